use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stmi_core::linalg::{self, CMat};
use stmi_core::models::{build_mbl_unitary, MblParams};
use stmi_core::scalar::{cplx, re};
use stmi_core::{
    channel_from_unitary, random_density_matrix, von_neumann_entropy, Channel, ChannelSpec, Density, KrausChannel,
    NamedChannel, Observable, TensorSpace,
};

fn qubit(l: &str) -> TensorSpace {
    TensorSpace::single(l, 2).unwrap()
}

fn random_channel(seed: u64, din: usize, dout: usize, n_kraus: usize) -> Channel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = linalg::random_isometry::<f64, _>(dout * n_kraus, din, &mut rng);
    let kraus: Vec<CMat<f64>> = (0..n_kraus).map(|k| v.rows(dout * k, dout).into_owned()).collect();
    KrausChannel::new(TensorSpace::single("A", din).unwrap(), TensorSpace::single("B", dout).unwrap(), kraus).unwrap()
}

fn bloch(m: &CMat<f64>) -> [f64; 3] {
    [2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, (m[(0, 0)] - m[(1, 1)]).re]
}

#[test]
fn apply_examples() {
    let rho = random_density_matrix::<f64>(qubit("A"), 4, 2).unwrap();
    let same = KrausChannel::identity(qubit("A")).apply(&rho).unwrap();
    assert!(linalg::max_abs(&(same.data() - rho.data())) < 1e-15);
    let flat = Channel::depolarizing(1.0).unwrap().apply(&rho).unwrap();
    assert!(linalg::max_abs(&(flat.data() - linalg::eye::<f64>(2) * re(0.5))) < 1e-14);

    let a = bloch(rho.data());
    for p in [0.0, 0.3, 0.8, 1.0] {
        let out = Channel::dephasing(p).unwrap().apply(&rho).unwrap();
        let b = bloch(out.data());
        assert!((b[0] - a[0] * (1.0 - p)).abs() < 1e-14);
        assert!((b[1] - a[1] * (1.0 - p)).abs() < 1e-14);
        assert!((b[2] - a[2]).abs() < 1e-14);
    }
    let full = Channel::dephasing(1.0).unwrap().apply(&rho).unwrap();
    assert!(full.data()[(0, 1)].norm() < 1e-15);
    assert!((full.data()[(0, 0)] - rho.data()[(0, 0)]).norm() < 1e-15);
    assert!(Channel::depolarizing(1.2).is_err());
    assert!(Channel::identity(qubit("A")).apply(&Density::maximally_mixed(TensorSpace::single("A", 3).unwrap())).is_err());
}

#[test]
fn depolarizing_zero_is_identity() {
    let ch = Channel::depolarizing(0.0).unwrap();
    let rho = random_density_matrix::<f64>(qubit("A"), 7, 2).unwrap();
    assert!(linalg::max_abs(&(ch.apply(&rho).unwrap().data() - rho.data())) < 1e-15);
}

#[test]
fn adjoint_duality_and_unitality() {
    for seed in 0..10 {
        let ch = random_channel(seed, 2, 3, 3);
        let rho = random_density_matrix::<f64>(qubit("A"), seed, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let x = Observable::new(TensorSpace::single("B", 3).unwrap(), linalg::random_hermitian::<f64, _>(3, &mut rng)).unwrap();
        let lhs = linalg::trace_product(ch.apply(&rho).unwrap().data(), x.data());
        let rhs = linalg::trace_product(rho.data(), ch.adjoint_apply(&x).unwrap().data());
        assert!((lhs - rhs).norm() < 1e-12);
        let id = ch.adjoint_apply(&Observable::identity(TensorSpace::single("B", 3).unwrap())).unwrap();
        assert!(linalg::max_abs(&(id.data() - linalg::eye::<f64>(2))) < 1e-12);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = linalg::random_unitary::<f64, _>(2, &mut rng);
    let x = linalg::random_hermitian::<f64, _>(2, &mut rng);
    let ch = Channel::from_unitary(qubit("A"), u.clone()).unwrap();
    let got = ch.adjoint_apply(&Observable::new(qubit("A"), x.clone()).unwrap()).unwrap();
    assert!(linalg::max_abs(&(got.data() - u.adjoint() * x * u)) < 1e-14);
}

#[test]
fn complement_of_unitary_is_trivial() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ch = Channel::from_unitary(qubit("A"), linalg::random_unitary::<f64, _>(2, &mut rng)).unwrap();
    let g = ch.complement(&random_density_matrix(qubit("A"), 3, 2).unwrap()).unwrap();
    assert_eq!(g.dim(), 1);
    assert!((g.data()[(0, 0)].re - 1.0).abs() < 1e-14);
    assert!(von_neumann_entropy(&g).abs() < 1e-14);
}

#[test]
fn depolarizing_complement_in_pauli_basis() {
    let (p, beta) = (0.37f64, -0.6f64);
    let t = beta.tanh();
    let rho_w = Density::new(qubit("A"), CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![re(0.5 * (1.0 + t)), re(0.5 * (1.0 - t))]))).unwrap();
    let g = Channel::depolarizing(p).unwrap().complement(&rho_w).unwrap();
    let alpha = [(1.0 - 0.75 * p).sqrt(), (p / 4.0).sqrt(), (p / 4.0).sqrt(), (p / 4.0).sqrt()];
    let n = [0.0, 0.0, 1.0];
    let eps = |i: usize, j: usize, k: usize| -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    };
    let mut want = CMat::<f64>::zeros(4, 4);
    want[(0, 0)] = re(alpha[0] * alpha[0]);
    for i in 0..3 {
        want[(0, i + 1)] = re(alpha[0] * alpha[i + 1] * n[i] * t);
        want[(i + 1, 0)] = re(alpha[0] * alpha[i + 1] * n[i] * t);
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            let im: f64 = (0..3).map(|k| -t * eps(i, j, k) * n[k]).sum();
            want[(i + 1, j + 1)] = cplx(alpha[i + 1] * alpha[j + 1] * delta, alpha[i + 1] * alpha[j + 1] * im);
        }
    }
    assert!(linalg::max_abs(&(g.data() - want)) < 1e-14);
}

#[test]
fn complementary_outputs_share_entropy_on_pure_inputs() {
    for seed in 0..10 {
        let ch = random_channel(seed, 3, 2, 4);
        let psi = random_density_matrix::<f64>(TensorSpace::single("A", 3).unwrap(), seed + 50, 1).unwrap();
        let sb = von_neumann_entropy(&ch.apply(&psi).unwrap());
        let se = von_neumann_entropy(&ch.complement(&psi).unwrap());
        assert!((sb - se).abs() < 1e-10);
    }
}

#[test]
fn apply_preserves_trace_and_positivity() {
    for seed in 0..20 {
        let ch = random_channel(seed, 3, 2, 2 + seed as usize % 5);
        assert!(ch.completeness_error() < 1e-10);
        let rho = random_density_matrix::<f64>(TensorSpace::single("A", 3).unwrap(), seed, 2).unwrap();
        let out = ch.apply(&rho).unwrap();
        assert!((linalg::trace_re(out.data()) - 1.0).abs() < 1e-12);
        assert!(out.eigenvalues()[0] > -1e-12);
    }
}

#[test]
fn replacer_outputs_fixed_state() {
    let fixed = random_density_matrix::<f64>(TensorSpace::single("B", 3).unwrap(), 9, 2).unwrap();
    let ch = Channel::replacer(qubit("A"), &fixed).unwrap();
    for seed in 0..5 {
        let rho = random_density_matrix::<f64>(qubit("A"), seed, 2).unwrap();
        assert!(linalg::max_abs(&(ch.apply(&rho).unwrap().data() - fixed.data())) < 1e-14);
    }
    let named = Channel::named(&NamedChannel::Replacer(fixed.clone()), 0.5).unwrap();
    assert_eq!(named.output_dim(), 3);
    assert!(Channel::named(&NamedChannel::Dephasing, 1.5).is_err());
}

#[test]
fn effective_channel_examples() {
    let space = TensorSpace::new(&[("E", 2), ("A", 2)]).unwrap();
    let env = Density::basis(qubit("E"), 0).unwrap();
    let id = channel_from_unitary(&linalg::eye::<f64>(4), &space, &env, &["A"], &["A"]).unwrap();
    let rho = random_density_matrix::<f64>(qubit("A"), 1, 2).unwrap();
    assert!(linalg::max_abs(&(id.apply(&rho).unwrap().data() - rho.data())) < 1e-14);

    let mixed = Density::maximally_mixed(qubit("E"));
    let sw = channel_from_unitary(&linalg::swap::<f64>(2), &space, &mixed, &["A"], &["A"]).unwrap();
    let dep = Channel::depolarizing(1.0).unwrap();
    let paulis = linalg::paulis::<f64>();
    for m in std::iter::once(linalg::eye::<f64>(2)).chain(paulis.iter().cloned()) {
        let mut k = CMat::<f64>::zeros(2, 2);
        for op in sw.kraus_ops() {
            k += op * &m * op.adjoint();
        }
        let mut w = CMat::<f64>::zeros(2, 2);
        for op in dep.kraus_ops() {
            w += op * &m * op.adjoint();
        }
        assert!(linalg::max_abs(&(k - w)) < 1e-14);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = linalg::random_unitary::<f64, _>(2, &mut rng);
    let u_full = linalg::kron(&linalg::eye::<f64>(2), &u);
    let conj = channel_from_unitary(&u_full, &space, &env, &["A"], &["A"]).unwrap();
    let want = &u * rho.data() * u.adjoint();
    assert!(linalg::max_abs(&(conj.apply(&rho).unwrap().data() - want)) < 1e-14);

    let p = MblParams { l: 3, ..MblParams::default() };
    let u0 = build_mbl_unitary::<f64>(&p, 0.0).unwrap();
    let s3 = TensorSpace::qubits("q", 3);
    let env2 = Density::maximally_mixed(TensorSpace::new(&[("q0", 2), ("q2", 2)]).unwrap());
    let ch0 = channel_from_unitary(&u0, &s3, &env2, &["q1"], &["q1"]).unwrap();
    let r = random_density_matrix::<f64>(qubit("q1"), 2, 2).unwrap();
    assert!(linalg::max_abs(&(ch0.apply(&r).unwrap().data() - r.data())) < 1e-14);
}

#[test]
fn effective_channel_matches_direct_partial_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let space = TensorSpace::new(&[("A", 2), ("E", 3)]).unwrap();
    let u = linalg::random_unitary::<f64, _>(6, &mut rng);
    let env = random_density_matrix::<f64>(TensorSpace::single("E", 3).unwrap(), 4, 2).unwrap();
    let ch = channel_from_unitary(&u, &space, &env, &["A"], &["E"]).unwrap();
    let rho = random_density_matrix::<f64>(qubit("A"), 8, 2).unwrap();
    let joint = rho.tensor(&env).unwrap().conjugate(&u).unwrap();
    let want = joint.partial_trace(&["E"]).unwrap();
    assert!(linalg::max_abs(&(ch.apply(&rho).unwrap().data() - want.data())) < 1e-13);
    assert_eq!(ch.num_kraus(), 2 * 2);
}

#[test]
fn compression_and_composition() {
    let ch = random_channel(3, 2, 2, 7);
    let small = ch.compressed();
    assert!(small.num_kraus() <= 4);
    assert!(small.completeness_error() < 1e-12);
    let rho = random_density_matrix::<f64>(qubit("A"), 2, 2).unwrap();
    assert!(linalg::max_abs(&(ch.apply(&rho).unwrap().data() - small.apply(&rho).unwrap().data())) < 1e-13);

    let second = random_channel(4, 2, 2, 3).with_spaces(qubit("B"), qubit("C")).unwrap();
    let both = ch.then(&second).unwrap();
    let step = second.apply(&ch.apply(&rho).unwrap()).unwrap();
    assert!(linalg::max_abs(&(both.apply(&rho).unwrap().data() - step.data())) < 1e-13);

    let par = ch.tensor(&second).unwrap();
    assert_eq!(par.input_dim(), 4);
    assert!(par.completeness_error() < 1e-12);
}

#[test]
fn specs_build_from_json() {
    let dep: ChannelSpec = serde_json::from_str(r#"{"kind": "depolarizing", "p": 0.25}"#).unwrap();
    let ch = dep.build::<f64>("A", "B").unwrap();
    assert_eq!(ch.num_kraus(), 4);
    assert_eq!(ch.output_space().labels(), vec!["B"]);
    let kraus: ChannelSpec = serde_json::from_str(r#"{"kind": "kraus", "ops": [[[0, 0, 1, 0], [1, 0, 0, 0]]]}"#).unwrap();
    let x = kraus.build::<f64>("A", "B").unwrap();
    assert!(linalg::max_abs(&(&x.kraus_ops()[0] - &linalg::paulis::<f64>()[0])) < 1e-15);
    let bad: ChannelSpec = serde_json::from_str(r#"{"kind": "kraus", "ops": [[[2, 0, 0, 0], [0, 0, 1, 0]]]}"#).unwrap();
    assert!(bad.build::<f64>("A", "B").is_err());
}
