//! Petz recovery and the Markov property of the STMI under a causally
//! disconnected extension `B → BC`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::scalar::Real;
use crate::space::TensorSpace;
use crate::state::DensityMatrix;
use crate::tolerance::TAU_RANK;
use crate::variational::{Evolution, OptimizerConfig, StmiProblem, ANCILLA};

/// Consistency tolerance for shared marginals.
pub const MARGINAL_TOL: f64 = 1e-8;

/// Petz reconstruction together with the mass of `ρ_XB` outside the support
/// of `ρ_B` that was projected out before mapping.
#[derive(Debug, Clone)]
pub struct PetzOutput<T: Real> {
    pub state: DensityMatrix<T>,
    pub leaked_mass: T,
}

fn labels_minus<'a>(space: &'a TensorSpace, remove: &[&str]) -> Vec<&'a str> {
    space.labels().into_iter().filter(|l| !remove.contains(l)).collect()
}

/// `(Id_X ⊗ ρ_BC^{1/2}) (ρ_B^{-1/2} ρ_XB ρ_B^{-1/2} ⊗ Id_C) (Id_X ⊗ ρ_BC^{1/2})`
/// on `X ⊗ B ⊗ C`, with `ρ_xb` ordered `[X, B]` and `ρ_bc` ordered `[B, C]`.
fn petz_core<T: Real>(rho_xb: &CMat<T>, dx: usize, rho_b: &CMat<T>, rho_bc: &CMat<T>, dc: usize) -> (CMat<T>, T) {
    let (_, proj_b) = crate::entropy::log_support_raw(rho_b);
    let p = linalg::kron(&linalg::eye::<T>(dx), &proj_b);
    let projected = &p * rho_xb * &p;
    let leaked = linalg::trace_re(rho_xb) - linalg::trace_re(&projected);
    let inv = linalg::kron(&linalg::eye::<T>(dx), &linalg::inv_sqrt_support(rho_b, T::lit(TAU_RANK)));
    let inner = &inv * projected * &inv;
    let inner = linalg::kron(&inner, &linalg::eye::<T>(dc));
    let outer = linalg::kron(&linalg::eye::<T>(dx), &linalg::sqrt_psd(rho_bc));
    let out = &outer * inner * &outer;
    (linalg::hermitian_part(&out), leaked)
}

fn check_marginal<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Result<()> {
    let gap = linalg::max_abs(&(a - b));
    if gap > T::tol(MARGINAL_TOL) {
        return Err(Error::SpaceMismatch(format!("inconsistent marginals (gap {:e})", gap.as_f64())));
    }
    Ok(())
}

/// Petz map reconstructing `ρ_ABC` from `ρ_AB`, `ρ_B` and `ρ_BC`.
///
/// `B` is identified by the labels of `rho_b`; the output is ordered `[A, B, C]`.
pub fn petz_map<T: Real>(rho_ab: &DensityMatrix<T>, rho_b: &DensityMatrix<T>, rho_bc: &DensityMatrix<T>) -> Result<PetzOutput<T>> {
    let b = rho_b.space().labels();
    let a = labels_minus(rho_ab.space(), &b);
    let c = labels_minus(rho_bc.space(), &b);
    let ab = rho_ab.reorder(&[a.clone(), b.clone()].concat())?;
    let bc = rho_bc.reorder(&[b.clone(), c.clone()].concat())?;
    check_marginal(ab.partial_trace(&b)?.data(), rho_b.data())?;
    check_marginal(bc.partial_trace(&b)?.data(), rho_b.data())?;
    let dx = ab.dim() / rho_b.dim();
    let dc = bc.dim() / rho_b.dim();
    let (m, leaked) = petz_core(ab.data(), dx, rho_b.data(), bc.data(), dc);
    let space = ab.space().concat(&bc.space().subspace(&c)?)?;
    Ok(PetzOutput { state: DensityMatrix::trusted(space, m)?, leaked_mass: leaked })
}

/// `ρ_BC0^{1/2} (Id_C ⊗ ρ_B0^{-1/2} ρ_BW ρ_B0^{-1/2}) ρ_BC0^{1/2}`, acting
/// trivially on `W`. The output is ordered `[B, C, W]`.
pub fn petz_bcw<T: Real>(rho_bw: &DensityMatrix<T>, rho_b0: &DensityMatrix<T>, rho_bc0: &DensityMatrix<T>) -> Result<PetzOutput<T>> {
    let b = rho_b0.space().labels();
    let w = labels_minus(rho_bw.space(), &b);
    let c = labels_minus(rho_bc0.space(), &b);
    let wb = rho_bw.reorder(&[w.clone(), b.clone()].concat())?;
    let bc = rho_bc0.reorder(&[b.clone(), c.clone()].concat())?;
    check_marginal(bc.partial_trace(&b)?.data(), rho_b0.data())?;
    let dw = wb.dim() / rho_b0.dim();
    let dc = bc.dim() / rho_b0.dim();
    let (m, leaked) = petz_core(wb.data(), dw, rho_b0.data(), bc.data(), dc);
    let space = wb.space().concat(&bc.space().subspace(&c)?)?;
    let wbc = DensityMatrix::trusted(space, m)?;
    let order: Vec<&str> = [b, c, w].concat();
    Ok(PetzOutput { state: wbc.reorder(&order)?, leaked_mass: leaked })
}

/// `Õ_B = ρ_B0^{-1/2} Tr_C(ρ_BC0^{1/2} O_BC ρ_BC0^{1/2}) ρ_B0^{-1/2}`, with
/// `O_BC` and `ρ_BC0` ordered `[B, C]`.
pub fn mirror_operator<T: Real>(rho_b0: &CMat<T>, rho_bc0: &CMat<T>, o_bc: &CMat<T>) -> CMat<T> {
    let db = rho_b0.nrows();
    let dc = rho_bc0.nrows() / db;
    let s = linalg::sqrt_psd(rho_bc0);
    let reduced = linalg::trace_right(&(&s * o_bc * &s), db, dc);
    let inv = linalg::inv_sqrt_support(rho_b0, T::lit(TAU_RANK));
    linalg::hermitian_part(&(&inv * reduced * &inv))
}

/// Outcome of [`markov_check`].
#[derive(Debug, Clone, Serialize)]
pub struct MarkovReport {
    pub j_ab: f64,
    pub j_abc: f64,
    /// `J(A:BC)` evaluated at the coupling that is optimal for `J(A:B)`.
    pub j_abc_at_ab_optimum: f64,
    /// Set when `|J(A:BC) − J(A:B)|` is below the threshold.
    pub markov: bool,
    /// Trace distance between `ρ_BCW` and its Petz reconstruction.
    pub petz_reconstruction_error: Option<f64>,
    /// Largest deviation in the mirror-operator identity over random probes.
    pub mirror_operator_check: Option<f64>,
    pub leaked_mass: Option<f64>,
    pub converged: bool,
}

/// Compares `J(A:B)` with `J(A:BC)` and, when they agree, reconstructs
/// `ρ_BCW` from `ρ_BW` with the `J(A:B)`-optimal coupling.
pub fn markov_check<T: Real>(
    rho_in: &DensityMatrix<T>,
    evolution: &Evolution<T>,
    a_labels: &[&str],
    b_labels: &[&str],
    c_labels: &[&str],
    cfg: &OptimizerConfig,
    threshold: f64,
) -> Result<MarkovReport> {
    let bc_labels: Vec<&str> = b_labels.iter().chain(c_labels.iter()).copied().collect();
    let p_ab = StmiProblem::new(rho_in, evolution, a_labels, b_labels)?;
    let p_abc = StmiProblem::new(rho_in, evolution, a_labels, &bc_labels)?;
    let (r_ab, r_abc) = if c_labels.is_empty() {
        let r = p_ab.optimize_with_starts(cfg, &[])?;
        (r.clone(), Ok(r))
    } else {
        let (x, y) = rayon::join(|| p_ab.optimize_with_starts(cfg, &[]), || p_abc.optimize_with_starts(cfg, &[]));
        (x?, y)
    };
    let r_abc = r_abc?;
    let v = &r_ab.coupling;
    let shared = p_abc.evaluate(v)?.value.to_f64();
    let j_ab = r_ab.value.to_f64();
    let j_abc = r_abc.value.to_f64().max(shared);
    let markov = (j_abc - j_ab).abs() < threshold || (j_ab.is_infinite() && j_abc.is_infinite());
    let mut report = MarkovReport {
        j_ab,
        j_abc,
        j_abc_at_ab_optimum: shared,
        markov,
        petz_reconstruction_error: None,
        mirror_operator_check: None,
        leaked_mass: None,
        converged: r_ab.converged && r_abc.converged,
    };
    if !markov {
        return Ok(report);
    }
    if c_labels.is_empty() {
        report.petz_reconstruction_error = Some(0.0);
        report.mirror_operator_check = Some(0.0);
        report.leaked_mass = Some(0.0);
        return Ok(report);
    }
    let rho_bw = p_ab.connected(v)?;
    let rho_bcw = p_abc.connected(v)?;
    let rho_b0 = p_ab.rho_b0();
    let rho_bc0 = p_abc.rho_b0();
    let rec = petz_bcw(&rho_bw, &rho_b0, &rho_bc0)?;
    report.petz_reconstruction_error = Some(linalg::trace_distance(rho_bcw.data(), rec.state.data()).as_f64());
    report.leaked_mass = Some(rec.leaked_mass.as_f64());

    let dbc = rho_bc0.dim();
    let dw = v.w_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let o_bc = linalg::random_hermitian::<T, _>(dbc, &mut rng);
        let o_w = linalg::random_hermitian::<T, _>(dw, &mut rng);
        let lhs = linalg::trace_product(rho_bcw.data(), &linalg::kron(&o_bc, &o_w)).re;
        let mirror = mirror_operator(rho_b0.data(), rho_bc0.data(), &o_bc);
        let rhs = linalg::trace_product(rho_bw.data(), &linalg::kron(&mirror, &o_w)).re;
        worst = worst.max((lhs - rhs).abs().as_f64());
    }
    debug_assert_eq!(rho_bw.space().labels().last().copied(), Some(ANCILLA));
    report.mirror_operator_check = Some(worst);
    Ok(report)
}
