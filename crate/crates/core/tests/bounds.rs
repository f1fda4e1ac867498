use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stmi_core::bounds::{
    causal_influence_check, control_ancilla_traces, retarded_correlator, superdensity_bound, symmetric_connected_correlator,
    verify_theorem1, x_w, y_w, ControlCoupling,
};
use stmi_core::linalg::{self, CMat};
use stmi_core::scalar::{cplx, re};
use stmi_core::variational::{optimize_j1, Evolution, OptimizerConfig};
use stmi_core::{random_density_matrix, Channel, Density, KrausChannel, Observable, TensorSpace};

fn qubit(l: &str) -> TensorSpace {
    TensorSpace::single(l, 2).unwrap()
}

fn random_channel(seed: u64, n_kraus: usize) -> Channel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = linalg::random_isometry::<f64, _>(2 * n_kraus, 2, &mut rng);
    let kraus: Vec<CMat<f64>> = (0..n_kraus).map(|k| v.rows(2 * k, 2).into_owned()).collect();
    KrausChannel::new(qubit("A"), qubit("B"), kraus).unwrap()
}

struct Instance {
    rho: Density,
    ev: Evolution<f64>,
    o_a: Observable,
    o_b: Observable,
    channel: Channel,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channel = random_channel(seed, 1 + seed as usize % 4);
    let rho = random_density_matrix::<f64>(qubit("A"), seed + 7, 1 + seed as usize % 2).unwrap();
    let o_a = Observable::new(qubit("A"), linalg::random_hermitian::<f64, _>(2, &mut rng)).unwrap();
    let o_b = Observable::new(qubit("B"), linalg::random_hermitian::<f64, _>(2, &mut rng)).unwrap();
    Instance { rho, ev: Evolution::Channel(channel.clone()), o_a, o_b, channel }
}

fn heisenberg(ch: &Channel, o: &CMat<f64>) -> CMat<f64> {
    let mut out = CMat::zeros(2, 2);
    for k in ch.kraus_ops() {
        out += k.adjoint() * o * k;
    }
    out
}

#[test]
fn retarded_examples() {
    let rho = Density::basis(qubit("A"), 0).unwrap();
    let [x, y, _] = linalg::paulis::<f64>();
    let id = Evolution::Unitary(linalg::eye::<f64>(2));
    let ox = Observable::new(qubit("A"), x).unwrap();
    let oy = Observable::new(qubit("A"), y).unwrap();
    assert!((retarded_correlator(&rho, &id, &ox, &oy).unwrap() + 2.0).abs() < 1e-14);
    assert!(retarded_correlator(&rho, &id, &ox, &ox).unwrap().abs() < 1e-14);

    for seed in 0..10 {
        let inst = instance(seed);
        let ob_t = heisenberg(&inst.channel, inst.o_b.data());
        let comm = &ob_t * inst.o_a.data() - inst.o_a.data() * &ob_t;
        let want = (linalg::trace_product(inst.rho.data(), &comm) * cplx(0.0, -1.0)).re;
        let got = retarded_correlator(&inst.rho, &inst.ev, &inst.o_a, &inst.o_b).unwrap();
        assert!((got - want).abs() < 1e-13);
        let anti = &ob_t * inst.o_a.data() + inst.o_a.data() * &ob_t;
        let sym = linalg::trace_product(inst.rho.data(), &anti).re
            - 2.0 * linalg::trace_product(inst.rho.data(), &ob_t).re * linalg::trace_product(inst.rho.data(), inst.o_a.data()).re;
        let got = symmetric_connected_correlator(&inst.rho, &inst.ev, &inst.o_a, &inst.o_b).unwrap();
        assert!((got - sym).abs() < 1e-13);
    }
}

#[test]
fn symmetric_correlator_examples() {
    let space = TensorSpace::new(&[("A", 2), ("B", 2)]).unwrap();
    let rho = random_density_matrix::<f64>(space.clone(), 3, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let oa = Observable::new(qubit("A"), linalg::random_hermitian::<f64, _>(2, &mut rng)).unwrap();
    let ob = Observable::new(qubit("B"), linalg::random_hermitian::<f64, _>(2, &mut rng)).unwrap();
    let id = Evolution::Unitary(linalg::eye::<f64>(4));
    let ab = linalg::kron(oa.data(), ob.data());
    let a = linalg::kron(oa.data(), &linalg::eye::<f64>(2));
    let b = linalg::kron(&linalg::eye::<f64>(2), ob.data());
    let tr = |m: &CMat<f64>| linalg::trace_product(rho.data(), m).re;
    let want = 2.0 * (tr(&ab) - tr(&a) * tr(&b));
    assert!((symmetric_connected_correlator(&rho, &id, &oa, &ob).unwrap() - want).abs() < 1e-13);

    let prod = Density::basis(space, 2).unwrap();
    let [_, _, z] = linalg::paulis::<f64>();
    let za = Observable::new(qubit("A"), z.clone()).unwrap();
    let zb = Observable::new(qubit("B"), z).unwrap();
    assert!(symmetric_connected_correlator(&prod, &id, &za, &zb).unwrap().abs() < 1e-14);
}

#[test]
fn control_coupling_is_complete() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = Observable::new(TensorSpace::single("A", 3).unwrap(), linalg::random_hermitian::<f64, _>(3, &mut rng)).unwrap();
        let c = ControlCoupling::new(&o).unwrap();
        assert!(c.completeness_error() < 1e-10);
        assert!(c.coupling().unwrap().isometry_error() < 1e-10);
    }
    let mut d = CMat::<f64>::zeros(3, 3);
    d[(0, 0)] = re(2.0);
    d[(1, 1)] = re(-2.0);
    d[(2, 2)] = re(2.0);
    let c = ControlCoupling::new(&Observable::new(TensorSpace::single("A", 3).unwrap(), d).unwrap()).unwrap();
    assert!(c.completeness_error() < 1e-12);
    assert!(ControlCoupling::new(&Observable::new(qubit("A"), CMat::zeros(2, 2)).unwrap()).is_err());
    assert_eq!(y_w::<f64>()[(1, 0)], cplx(0.0, 1.0));
    assert_eq!(x_w::<f64>()[(0, 1)], re(1.0));
}

#[test]
fn ancilla_traces_carry_the_correlators() {
    for seed in 0..20 {
        let inst = instance(seed + 100);
        let tr = control_ancilla_traces(&inst.rho, &inst.ev, &inst.o_a, &inst.o_b).unwrap();
        let na = inst.o_a.op_norm();
        let ret = retarded_correlator(&inst.rho, &inst.ev, &inst.o_a, &inst.o_b).unwrap();
        let sym = symmetric_connected_correlator(&inst.rho, &inst.ev, &inst.o_a, &inst.o_b).unwrap();
        assert!((tr.y_connected - 0.5 * ret / na).abs() < 1e-10);
        assert!(tr.y_disconnected.abs() < 1e-12);
        assert!((tr.x_connected - tr.x_disconnected - 0.5 * sym / na).abs() < 1e-10);
    }
}

#[test]
fn correlation_bounds_hold_on_random_instances() {
    let cfg = OptimizerConfig { restarts: 2, ..OptimizerConfig::default() };
    for seed in 0..40 {
        let inst = instance(seed + 1000);
        let j = if seed % 4 == 0 {
            Some(optimize_j1(&inst.rho, &inst.ev, &["A"], &["B"], &cfg).unwrap().value.to_f64())
        } else {
            None
        };
        let rep = verify_theorem1(&inst.rho, &inst.ev, &inst.o_a, &inst.o_b, j).unwrap();
        assert!(rep.passes(1e-6), "seed {seed}: {rep:?}");
        if let Some(j) = j {
            assert!(j + 2e-3 >= rep.control_relent);
        }
    }
}

#[test]
fn correlation_bound_edge_cases() {
    let inst = instance(5);
    let dep = Evolution::Channel(Channel::depolarizing(1.0).unwrap());
    let rep = verify_theorem1(&inst.rho, &dep, &inst.o_a, &inst.o_b, None).unwrap();
    assert!(rep.retarded.abs() < 1e-14 && rep.symmetric.abs() < 1e-14);
    assert!(rep.rhs_retarded < 1e-20 && rep.passes(1e-12), "{rep:?}");

    let rho = Density::basis(qubit("A"), 0).unwrap();
    let [x, y, _] = linalg::paulis::<f64>();
    let id = Evolution::Unitary(linalg::eye::<f64>(2));
    let rep = verify_theorem1(&rho, &id, &Observable::new(qubit("A"), x).unwrap(), &Observable::new(qubit("A"), y).unwrap(), Some(f64::INFINITY)).unwrap();
    assert!((rep.rhs_retarded - 0.5).abs() < 1e-14);
    assert!(rep.passes(0.0));
}

#[test]
fn superdensity_examples() {
    let plus = Density::new(qubit("A"), linalg::eye::<f64>(2) * re(0.5) + &linalg::paulis::<f64>()[0] * re(0.5)).unwrap();
    let z = Observable::new(qubit("A"), linalg::paulis::<f64>()[2].clone()).unwrap();
    let rep = superdensity_bound(&plus, &Evolution::Unitary(linalg::eye::<f64>(2)), &z, &z).unwrap();
    assert!(rep.two_point.abs() < 1e-14 && rep.commutator.abs() < 1e-14);
    assert!(rep.margin_relent >= 0.0);
    let not_traceless = Observable::new(qubit("A"), linalg::eye::<f64>(2)).unwrap();
    assert!(superdensity_bound(&plus, &Evolution::Unitary(linalg::eye::<f64>(2)), &not_traceless, &z).is_err());
}

fn traceless(seed: u64, d: usize, label: &str) -> Observable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = linalg::random_hermitian::<f64, _>(d, &mut rng);
    let shift = linalg::trace(&h) / re(d as f64);
    Observable::new(TensorSpace::single(label, d).unwrap(), h - linalg::eye::<f64>(d) * shift).unwrap()
}

#[test]
fn superdensity_bounds_on_random_traceless_instances() {
    for seed in 0..30 {
        let space = TensorSpace::new(&[("C", 2), ("A", 2)]).unwrap();
        let rho = random_density_matrix::<f64>(space, seed, 1 + seed as usize % 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 9);
        let ev = Evolution::Unitary(linalg::random_unitary::<f64, _>(4, &mut rng));
        let o_a = traceless(seed + 1, 2, "A");
        let o_b = Observable::new(qubit("C"), linalg::random_hermitian::<f64, _>(2, &mut rng)).unwrap();
        let rep = superdensity_bound(&rho, &ev, &o_a, &o_b).unwrap();
        assert!(rep.identity_error < 1e-10, "{rep:?}");
        assert!(rep.margin_relent >= -1e-10 && rep.margin_mi >= -1e-10, "{rep:?}");

        let u_a = linalg::random_unitary::<f64, _>(2, &mut rng);
        let ci = causal_influence_check(&rho, &ev, &u_a, &["A"], &o_b).unwrap();
        assert!(ci.margin >= -1e-10, "{ci:?}");
    }
}
