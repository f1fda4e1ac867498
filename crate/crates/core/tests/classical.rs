use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stmi_core::classical::{
    classical_connected, classical_decomposition, classical_response, classical_stmi, input_output_mi, kl_divergence,
    record_conditional_mi, record_coupling, response_coupling, verify_classical_bounds, ClassicalConfig, ClassicalProblem,
    Distribution, StochasticMap,
};
use stmi_core::TensorSpace;

fn sp(f: &[(&str, usize)]) -> TensorSpace {
    TensorSpace::new(f).unwrap()
}

fn dist(space: TensorSpace, p: &[f64]) -> Distribution<f64> {
    Distribution::new(space, p.to_vec()).unwrap()
}

fn random_generator<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let mut n = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut out = 0.0;
        for k in 0..d {
            if k != i && rng.random_bool(0.7) {
                let x: f64 = rng.random_range(0.0..2.0);
                n[(k, i)] = x;
                out += x;
            }
        }
        n[(i, i)] = -out;
    }
    n
}

#[test]
fn kl_examples() {
    let s = sp(&[("X", 2)]);
    let half = dist(s.clone(), &[0.5, 0.5]);
    let point = dist(s.clone(), &[1.0, 0.0]);
    assert_eq!(kl_divergence(&half, &half).unwrap().to_f64(), 0.0);
    assert!((kl_divergence(&point, &half).unwrap().to_f64() - 2f64.ln()).abs() < 1e-15);
    assert!(kl_divergence(&half, &point).unwrap().to_f64().is_infinite());
    assert!(kl_divergence(&half, &Distribution::uniform(sp(&[("X", 3)]))).is_err());
}

#[test]
fn invalid_inputs_are_rejected() {
    let s = sp(&[("X", 2)]);
    assert!(Distribution::new(s.clone(), vec![0.6, 0.6]).is_err());
    assert!(Distribution::new(s.clone(), vec![1.2, -0.2]).is_err());
    let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.6, 0.8]);
    assert!(StochasticMap::new(s.clone(), s.clone(), bad).is_err());
    let neg = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, -0.5, 1.0]);
    assert!(StochasticMap::new(s.clone(), s, neg).is_err());
}

#[test]
fn connected_matches_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (da, dabar, db, dbbar, dw) = (2, 3, 2, 2, 3);
    let p_in = Distribution::<f64>::random(sp(&[("A", da), ("Abar", dabar)]), &mut rng);
    let m = StochasticMap::<f64>::random(sp(&[("A", da), ("Abar", dabar)]), sp(&[("B", db), ("Bbar", dbbar)]), &mut rng);
    let k = StochasticMap::<f64>::random(sp(&[("A", da)]), sp(&[("A", da), ("W", dw)]), &mut rng);
    let got = classical_connected(&p_in, &m, &k, &["A"], &["B"]).unwrap();
    for kk in 0..db {
        for p in 0..dw {
            let mut want = 0.0;
            for l in 0..dbbar {
                for q in 0..da {
                    for j in 0..dabar {
                        for i in 0..da {
                            want += m.matrix()[(kk * dbbar + l, q * dabar + j)]
                                * k.matrix()[(q * dw + p, i)]
                                * p_in.probs()[i * dabar + j];
                        }
                    }
                }
            }
            assert!((got.probs()[kk * dw + p] - want).abs() < 1e-15);
        }
    }
}

#[test]
fn connected_special_couplings() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = sp(&[("A", 3)]);
    let p_in = Distribution::<f64>::random(a.clone(), &mut rng);
    let m = StochasticMap::<f64>::random(a.clone(), sp(&[("B", 2)]), &mut rng);

    let trivial = StochasticMap::new(a.clone(), sp(&[("A", 3), ("W", 1)]), DMatrix::identity(3, 3)).unwrap();
    let p_b0 = m.apply(&p_in).unwrap();
    let got = classical_connected(&p_in, &m, &trivial, &["A"], &["B"]).unwrap();
    for (x, y) in got.probs().iter().zip(p_b0.probs()) {
        assert!((x - y).abs() < 1e-15);
    }

    // copy channel K(qp|i) = 1 iff q = p = i yields the joint input-output law
    let mut copy = DMatrix::zeros(9, 3);
    for i in 0..3 {
        copy[(i * 3 + i, i)] = 1.0;
    }
    let copy = StochasticMap::new(a.clone(), sp(&[("A", 3), ("W", 3)]), copy).unwrap();
    let got = classical_connected(&p_in, &m, &copy, &["A"], &["B"]).unwrap();
    for kk in 0..2 {
        for i in 0..3 {
            assert!((got.probs()[kk * 3 + i] - m.matrix()[(kk, i)] * p_in.probs()[i]).abs() < 1e-15);
        }
    }
}

#[test]
fn closed_form_matches_search_and_ascent() {
    let cfg = ClassicalConfig { max_iters: 3000, ..ClassicalConfig::default() };
    for seed in 0..12 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let da = 2 + seed as usize % 3;
        let p_in = Distribution::<f64>::random(sp(&[("A", da), ("Abar", 2)]), &mut rng);
        let m = StochasticMap::<f64>::random(sp(&[("A", da), ("Abar", 2)]), sp(&[("B", 3)]), &mut rng);
        let problem = ClassicalProblem::new(&p_in, &m, &["A"], &["B"]).unwrap();
        let (closed, _) = problem.closed_form();
        let search = problem.deterministic_search().unwrap();
        assert!((closed.to_f64() - search.to_f64()).abs() < 1e-12);
        let res = classical_stmi(&p_in, &m, &["A"], &["B"], &cfg).unwrap();
        assert!(res.mirror_value.to_f64() >= search.to_f64() - 1e-6, "seed {seed}: {res:?}");
        assert!((res.mirror_value.to_f64() - closed.to_f64()).abs() < 1e-6);
        assert!(res.full_form_value.to_f64() <= res.value.to_f64() + 1e-9);
    }
}

#[test]
fn record_coupling_attains_the_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p_in = Distribution::<f64>::random(sp(&[("A", 3), ("Abar", 2)]), &mut rng);
    let m = StochasticMap::<f64>::random(sp(&[("A", 3), ("Abar", 2)]), sp(&[("B", 2), ("Bbar", 2)]), &mut rng);
    let res = classical_stmi(&p_in, &m, &["A"], &["B"], &ClassicalConfig::default()).unwrap();
    let bw = classical_connected(&p_in, &m, &res.coupling, &["A"], &["B"]).unwrap();
    let p_w = bw.marginal(&["Wq", "Wi"]).unwrap();
    let p_b0 = m.apply(&p_in).unwrap().marginal(&["B"]).unwrap();
    let prod: Vec<f64> = p_b0.probs().iter().flat_map(|b| p_w.probs().iter().map(move |w| b * w)).collect();
    let value = kl_divergence(&bw, &Distribution::new(bw.space().clone(), prod).unwrap()).unwrap();
    assert!((value.to_f64() - res.value.to_f64()).abs() < 1e-10);
    let copy = record_coupling::<f64>(&sp(&[("A", 3)]), &[0, 1, 2]).unwrap();
    assert_eq!(copy.output().dims(), vec![3, 3, 3]);
}

#[test]
fn factorized_inputs_reduce_to_a_state_choice() {
    for seed in 0..6 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let pa = Distribution::<f64>::random(sp(&[("A", 3)]), &mut rng);
        let pabar = Distribution::<f64>::random(sp(&[("Abar", 2)]), &mut rng);
        let probs: Vec<f64> = pa.probs().iter().flat_map(|x| pabar.probs().iter().map(move |y| x * y)).collect();
        let p_in = dist(sp(&[("A", 3), ("Abar", 2)]), &probs);
        let m = StochasticMap::<f64>::random(sp(&[("A", 3), ("Abar", 2)]), sp(&[("B", 3)]), &mut rng);
        let res = classical_stmi(&p_in, &m, &["A"], &["B"], &ClassicalConfig::default()).unwrap();
        let f = res.factorized_value.expect("factorized input");
        assert!((f.to_f64() - res.value.to_f64()).abs() < 1e-10);
    }
}

#[test]
fn constant_map_gives_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = sp(&[("A", 4)]);
    let p_in = Distribution::<f64>::random(a.clone(), &mut rng);
    let fixed = Distribution::<f64>::random(sp(&[("B", 3)]), &mut rng);
    let m = StochasticMap::constant(a, &fixed);
    let res = classical_stmi(&p_in, &m, &["A"], &["B"], &ClassicalConfig::default()).unwrap();
    assert!(res.value.to_f64().abs() < 1e-14);
}

#[test]
fn identity_map_value() {
    let p = [0.5, 0.3, 0.2];
    let p_in = dist(sp(&[("A", 3)]), &p);
    let m = StochasticMap::new(sp(&[("A", 3)]), sp(&[("B", 3)]), DMatrix::identity(3, 3)).unwrap();
    let res = classical_stmi(&p_in, &m, &["A"], &["B"], &ClassicalConfig::default()).unwrap();
    assert!((res.value.to_f64() + 0.2f64.ln()).abs() < 1e-12);
    let problem = ClassicalProblem::new(&p_in, &m, &["A"], &["B"]).unwrap();
    assert!((problem.deterministic_search().unwrap().to_f64() + 0.2f64.ln()).abs() < 1e-12);
    // the copy coupling only reaches the input-output information
    let mi = input_output_mi(&p_in, &m, &["A"], &["B"]).unwrap();
    let h: f64 = -p.iter().map(|x| x * x.ln()).sum::<f64>();
    assert!((mi - h).abs() < 1e-12);
    assert!(res.value.to_f64() >= mi);
}

#[test]
fn response_matches_finite_difference() {
    for seed in 0..8 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let (da, dabar) = (3, 2);
        let p_in = Distribution::<f64>::random(sp(&[("A", da), ("Abar", dabar)]), &mut rng);
        let m = StochasticMap::<f64>::random(sp(&[("A", da), ("Abar", dabar)]), sp(&[("B", 2), ("Bbar", 2)]), &mut rng);
        let n = random_generator(da, &mut rng);
        let o_b: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = classical_response(&p_in, &m, &n, &o_b, &["A"], &["B"]).unwrap();
        let eps = 1e-6;
        let expect = |eps: f64| {
            let mut q = vec![0.0; da * dabar];
            for k in 0..da {
                for i in 0..da {
                    let t = if k == i { 1.0 } else { 0.0 } + eps * n[(k, i)];
                    for j in 0..dabar {
                        q[k * dabar + j] += t * p_in.probs()[i * dabar + j];
                    }
                }
            }
            let out = m.apply(&dist(p_in.space().clone(), &q)).unwrap();
            let b = out.marginal(&["B"]).unwrap();
            b.probs().iter().zip(&o_b).map(|(p, o)| p * o).sum::<f64>()
        };
        let fd = (expect(eps) - expect(-eps)) / (2.0 * eps);
        assert!((g - fd).abs() < 1e-8, "{g} vs {fd}");
    }
}

#[test]
fn response_edge_cases() {
    let a = sp(&[("A", 2)]);
    let p_in = dist(a.clone(), &[1.0, 0.0]);
    let m = StochasticMap::new(a.clone(), sp(&[("B", 2)]), DMatrix::identity(2, 2)).unwrap();
    let zero = DMatrix::zeros(2, 2);
    assert_eq!(classical_response(&p_in, &m, &zero, &[1.0, -1.0], &["A"], &["B"]).unwrap(), 0.0);

    // move mass 0 → 1 and watch the indicator of 1: unit response without correlation
    let n = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, 0.0]);
    let g = classical_response(&p_in, &m, &n, &[0.0, 1.0], &["A"], &["B"]).unwrap();
    assert!((g - 1.0).abs() < 1e-15);
    assert!(input_output_mi(&p_in, &m, &["A"], &["B"]).unwrap().abs() < 1e-15);
    let rep = verify_classical_bounds(&p_in, &m, &n, &[1.0, -1.0], &[0.0, 1.0], &["A"], &["B"]).unwrap();
    assert!(rep.j > 0.0 && rep.response_coupling_value >= rep.response_rhs && rep.response_rhs > 0.0);
    assert!(rep.passes(1e-9));

    let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.5, 0.0]);
    assert!(classical_response(&p_in, &m, &bad, &[0.0, 1.0], &["A"], &["B"]).is_err());
    let neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
    assert!(response_coupling(&a, &neg).is_err());
}

#[test]
fn bounds_hold_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    for n_inst in 0..500 {
        let da = rng.random_range(2..=5);
        let dabar = rng.random_range(1..=2);
        let db = rng.random_range(2..=5);
        let p_in = Distribution::<f64>::random(sp(&[("A", da), ("Abar", dabar)]), &mut rng);
        let m = StochasticMap::<f64>::random(sp(&[("A", da), ("Abar", dabar)]), sp(&[("B", db)]), &mut rng);
        let n = if n_inst % 50 == 0 { DMatrix::zeros(da, da) } else { random_generator(da, &mut rng) };
        let o_a: Vec<f64> = (0..da).map(|_| rng.random_range(-1.0..1.0)).collect();
        let o_b: Vec<f64> = (0..db).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rep = verify_classical_bounds(&p_in, &m, &n, &o_a, &o_b, &["A"], &["B"]).unwrap();
        assert!(rep.passes(1e-9), "instance {n_inst}: {rep:?}");
        if n_inst % 50 == 0 {
            assert_eq!(rep.response, 0.0);
            assert_eq!(rep.response_rhs, 0.0);
        }
    }
}

#[test]
fn record_construction_and_decomposition() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let p_in = Distribution::<f64>::random(sp(&[("A", 3), ("Abar", 2)]), &mut rng);
        let m = StochasticMap::<f64>::random(sp(&[("A", 3), ("Abar", 2)]), sp(&[("B", 2), ("Bbar", 2)]), &mut rng);
        let problem = ClassicalProblem::new(&p_in, &m, &["A"], &["B"]).unwrap();
        let d_w = 4;
        let k = StochasticMap::<f64>::random(sp(&[("A", 3)]), sp(&[("A", 3), ("W", d_w)]), &mut rng);
        assert!(record_conditional_mi(&problem, k.matrix(), d_w).abs() < 1e-12);
        let (d, i_bw, rel) = classical_decomposition(&problem, k.matrix(), d_w);
        assert!((d.to_f64() - i_bw - rel.to_f64()).abs() < 1e-10);
        assert!(d.to_f64() <= problem.closed_form().0.to_f64() + 1e-10);
    }
}

#[test]
fn f32_classical_smoke() {
    let p_in = Distribution::<f32>::new(sp(&[("A", 2)]), vec![0.25, 0.75]).unwrap();
    let m = StochasticMap::<f32>::new(sp(&[("A", 2)]), sp(&[("B", 2)]), DMatrix::identity(2, 2)).unwrap();
    let res = classical_stmi(&p_in, &m, &["A"], &["B"], &ClassicalConfig::default()).unwrap();
    assert!((res.value.to_f64() - 4f64.ln()).abs() < 1e-5);
}
