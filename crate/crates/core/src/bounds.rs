//! Couplings that turn two-point functions into ancilla expectation values,
//! and checks of the resulting correlation bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::scalar::{re, Real, C};
use crate::state::{DensityMatrix, HermitianObservable};
use crate::variational::{Evolution, IsometryCoupling, StmiProblem};

/// Three-outcome control-`O_A` coupling with `X₀ = √½ Id`,
/// `X₁ = √½ O_A/‖O_A‖` and `X₂ = √½ (Id − O_A²/‖O_A‖²)^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCoupling<T: Real> {
    pub o_a: HermitianObservable<T>,
    pub x_ops: [CMat<T>; 3],
}

impl<T: Real> ControlCoupling<T> {
    pub const ANCILLA_DIM: usize = 3;

    pub fn new(o_a: &HermitianObservable<T>) -> Result<Self> {
        let norm = o_a.op_norm();
        if !(norm > T::zero()) {
            return Err(Error::OutOfRange("O_A must be nonzero".into()));
        }
        let d = o_a.data().nrows();
        let half = re(T::lit(0.5).sqrt());
        let scaled = o_a.data() / re(norm);
        let x0 = linalg::eye::<T>(d) * half;
        let x1 = &scaled * half;
        let rest = linalg::hermitian_part(&(linalg::eye::<T>(d) - &scaled * &scaled));
        let x2 = linalg::sqrt_psd(&rest) * half;
        Ok(Self { o_a: o_a.clone(), x_ops: [x0, x1, x2] })
    }

    /// `V|a⟩ = Σ_i X_i|a⟩ ⊗ |i⟩_W`.
    pub fn coupling(&self) -> Result<IsometryCoupling<T>> {
        let d = self.x_ops[0].nrows();
        let mut v = CMat::zeros(3 * d, d);
        for (i, x) in self.x_ops.iter().enumerate() {
            for r in 0..d {
                for c in 0..d {
                    v[(r * 3 + i, c)] = x[(r, c)];
                }
            }
        }
        IsometryCoupling::new(self.o_a.space().clone(), 3, v)
    }

    /// Largest deviation of `Σ X_i†X_i` from the identity.
    pub fn completeness_error(&self) -> T {
        let d = self.x_ops[0].nrows();
        let mut s = CMat::zeros(d, d);
        for x in &self.x_ops {
            s += x.adjoint() * x;
        }
        linalg::max_abs(&(s - linalg::eye::<T>(d)))
    }
}

/// `Y_W` on the three-level ancilla.
pub fn y_w<T: Real>() -> CMat<T> {
    let mut y = CMat::zeros(3, 3);
    y[(0, 1)] = C::new(T::zero(), -T::one());
    y[(1, 0)] = C::new(T::zero(), T::one());
    y
}

/// `X_W` on the three-level ancilla.
pub fn x_w<T: Real>() -> CMat<T> {
    let mut x = CMat::zeros(3, 3);
    x[(0, 1)] = re(T::one());
    x[(1, 0)] = re(T::one());
    x
}

/// `O_A` and `O_B(t)` embedded in the full input space.
struct Embedded<T: Real> {
    rho: CMat<T>,
    o_a: CMat<T>,
    o_b_t: CMat<T>,
}

fn embed_ops<T: Real>(
    rho_in: &DensityMatrix<T>,
    evolution: &Evolution<T>,
    o_a: &HermitianObservable<T>,
    o_b: &HermitianObservable<T>,
) -> Result<Embedded<T>> {
    let space = rho_in.space();
    let a_pos = space.positions(&o_a.space().labels())?;
    let o_a_full = linalg::embed(o_a.data(), &space.dims(), &a_pos);
    let (kraus, out) = evolution.kraus_and_output(space)?;
    let b_pos = out.positions(&o_b.space().labels())?;
    let o_b_full = linalg::embed(o_b.data(), &out.dims(), &b_pos);
    let mut o_b_t = CMat::zeros(space.total_dim(), space.total_dim());
    for k in &kraus {
        o_b_t += k.adjoint() * &o_b_full * k;
    }
    Ok(Embedded { rho: rho_in.data().clone(), o_a: o_a_full, o_b_t: linalg::hermitian_part(&o_b_t) })
}

/// `−i Tr ρ_in [O_B(t), O_A]`.
pub fn retarded_correlator<T: Real>(
    rho_in: &DensityMatrix<T>,
    evolution: &Evolution<T>,
    o_a: &HermitianObservable<T>,
    o_b: &HermitianObservable<T>,
) -> Result<T> {
    let e = embed_ops(rho_in, evolution, o_a, o_b)?;
    let comm = &e.o_b_t * &e.o_a - &e.o_a * &e.o_b_t;
    Ok((linalg::trace_product(&e.rho, &comm) * C::new(T::zero(), -T::one())).re)
}

/// `Tr ρ_in {O_B(t), O_A} − 2 Tr(ρ_in O_B(t)) Tr(ρ_in O_A)`.
pub fn symmetric_connected_correlator<T: Real>(
    rho_in: &DensityMatrix<T>,
    evolution: &Evolution<T>,
    o_a: &HermitianObservable<T>,
    o_b: &HermitianObservable<T>,
) -> Result<T> {
    let e = embed_ops(rho_in, evolution, o_a, o_b)?;
    let anti = &e.o_b_t * &e.o_a + &e.o_a * &e.o_b_t;
    let full = linalg::trace_product(&e.rho, &anti).re;
    let b = linalg::trace_product(&e.rho, &e.o_b_t).re;
    let a = linalg::trace_product(&e.rho, &e.o_a).re;
    Ok(full - T::lit(2.0) * a * b)
}

/// Margins of the correlation bounds for one instance; negative margins are
/// violations.
#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Report {
    pub retarded: f64,
    pub symmetric: f64,
    pub rhs_retarded: f64,
    pub rhs_symmetric: f64,
    /// Relative entropy of the control coupling.
    pub control_relent: f64,
    /// `I(B:W)` of the control coupling.
    pub control_mi: f64,
    /// Externally supplied lower estimate of `J`, if any.
    pub j_value: Option<f64>,
    pub margin_retarded: f64,
    pub margin_symmetric: f64,
    pub margin_mi: f64,
    pub margin_j: Option<f64>,
}

impl Theorem1Report {
    pub fn min_margin(&self) -> f64 {
        let mut m = self.margin_retarded.min(self.margin_symmetric).min(self.margin_mi);
        if let Some(j) = self.margin_j {
            m = m.min(j);
        }
        m
    }

    pub fn passes(&self, slack: f64) -> bool {
        self.min_margin() >= -slack
    }
}

/// Evaluates both correlation bounds with the control coupling's relative
/// entropy and the tighter mutual-information form, plus an optional external
/// estimate of `J`.
pub fn verify_theorem1<T: Real>(
    rho_in: &DensityMatrix<T>,
    evolution: &Evolution<T>,
    o_a: &HermitianObservable<T>,
    o_b: &HermitianObservable<T>,
    j_lower_estimate: Option<T>,
) -> Result<Theorem1Report> {
    let ret = retarded_correlator(rho_in, evolution, o_a, o_b)?.as_f64();
    let sym = symmetric_connected_correlator(rho_in, evolution, o_a, o_b)?.as_f64();
    let norms = o_a.op_norm().as_f64() * o_b.op_norm().as_f64();
    let rhs = |c: f64| if norms > 0.0 { 0.125 * (c / norms).powi(2) } else { 0.0 };
    let (rhs_ret, rhs_sym) = (rhs(ret), rhs(sym));
    let a_labels = o_a.space().labels();
    let b_labels = o_b.space().labels();
    let problem = StmiProblem::new(rho_in, evolution, &a_labels, &b_labels)?;
    let eval = problem.evaluate(&ControlCoupling::new(o_a)?.coupling()?)?;
    let relent = eval.value.to_f64();
    let mi = eval.mi_term.as_f64();
    let j = j_lower_estimate.map(|x| x.as_f64());
    Ok(Theorem1Report {
        retarded: ret,
        symmetric: sym,
        rhs_retarded: rhs_ret,
        rhs_symmetric: rhs_sym,
        control_relent: relent,
        control_mi: mi,
        j_value: j,
        margin_retarded: relent - rhs_ret,
        margin_symmetric: relent - rhs_sym,
        margin_mi: mi - rhs_ret,
        margin_j: j.map(|j| j - rhs_ret.max(rhs_sym)),
    })
}

/// `Tr(ρ_BW Y_W O_B)`, `Tr(ρ_BW X_W O_B)` and the `Y_W` trace of the
/// disconnected state, for the control coupling.
#[derive(Debug, Clone, Copy)]
pub struct AncillaTraces<T: Real> {
    pub y_connected: T,
    pub x_connected: T,
    pub y_disconnected: T,
    pub x_disconnected: T,
}

pub fn control_ancilla_traces<T: Real>(
    rho_in: &DensityMatrix<T>,
    evolution: &Evolution<T>,
    o_a: &HermitianObservable<T>,
    o_b: &HermitianObservable<T>,
) -> Result<AncillaTraces<T>> {
    let problem = StmiProblem::new(rho_in, evolution, &o_a.space().labels(), &o_b.space().labels())?;
    let v = ControlCoupling::new(o_a)?.coupling()?;
    let conn = problem.connected(&v)?;
    let disc = problem.disconnected(&v)?;
    let b_ops = problem.b_space().positions(&o_b.space().labels())?;
    let o_b_on_b = linalg::embed(o_b.data(), &problem.b_space().dims(), &b_ops);
    let tr = |rho: &CMat<T>, w: &CMat<T>| linalg::trace_product(rho, &linalg::kron(&o_b_on_b, w)).re;
    Ok(AncillaTraces {
        y_connected: tr(conn.data(), &y_w()),
        x_connected: tr(conn.data(), &x_w()),
        y_disconnected: tr(disc.data(), &y_w()),
        x_disconnected: tr(disc.data(), &x_w()),
    })
}

/// Superdensity-coupling bound check.
#[derive(Debug, Clone, Serialize)]
pub struct SuperdensityReport {
    pub relent: f64,
    pub mi: f64,
    /// `i Tr([O_B(t), O_A] ρ_in)`.
    pub commutator: f64,
    pub rhs: f64,
    /// `⟨O_B O_W⟩_c` evaluated on the connected state.
    pub two_point: f64,
    /// `d_A⁻² i Tr([O_B(t), O_A] ρ_in)`.
    pub two_point_predicted: f64,
    pub identity_error: f64,
    pub margin_relent: f64,
    pub margin_mi: f64,
}

/// Builds the swap + maximally entangled ancilla coupling and checks the
/// `d_A⁻⁴`-suppressed bounds together with the two-point identity.
pub fn superdensity_bound<T: Real>(
    rho_in: &DensityMatrix<T>,
    evolution: &Evolution<T>,
    o_a: &HermitianObservable<T>,
    o_b: &HermitianObservable<T>,
) -> Result<SuperdensityReport> {
    let d = o_a.data().nrows();
    let tr_a = linalg::trace_re(o_a.data());
    if tr_a.abs() > T::tol(1e-10) * T::one().max(o_a.op_norm()) {
        return Err(Error::OutOfRange("O_A must be traceless".into()));
    }
    let problem = StmiProblem::new(rho_in, evolution, &o_a.space().labels(), &o_b.space().labels())?;
    let v = IsometryCoupling::swap_epr(o_a.space().clone())?;
    let eval = problem.evaluate(&v)?;
    let conn = problem.connected(&v)?;

    let epr = linalg::gamma_vector::<T>(d) / re(T::lit(d as f64).sqrt());
    let proj = &epr * epr.adjoint();
    let o_w1 = linalg::kron(o_a.data(), &linalg::eye::<T>(d));
    let o_w = (&proj * &o_w1 - &o_w1 * &proj) * C::new(T::zero(), T::one());
    let b_pos = problem.b_space().positions(&o_b.space().labels())?;
    let o_b_on_b = linalg::embed(o_b.data(), &problem.b_space().dims(), &b_pos);
    let db = o_b_on_b.nrows();
    let joint = linalg::trace_product(conn.data(), &linalg::kron(&o_b_on_b, &o_w)).re;
    let rho_b = linalg::trace_right(conn.data(), db, d * d);
    let rho_w = linalg::trace_left(conn.data(), db, d * d);
    let two_point = joint - linalg::trace_product(&rho_b, &o_b_on_b).re * linalg::trace_product(&rho_w, &o_w).re;

    let ret = retarded_correlator(rho_in, evolution, o_a, o_b)?;
    let commutator = -ret.as_f64();
    let predicted = commutator / (d * d) as f64;
    let norms = o_a.op_norm().as_f64() * o_b.op_norm().as_f64();
    let rhs = if norms > 0.0 { commutator.powi(2) / (8.0 * (d as f64).powi(4) * norms * norms) } else { 0.0 };
    let relent = eval.value.to_f64();
    let mi = eval.mi_term.as_f64();
    Ok(SuperdensityReport {
        relent,
        mi,
        commutator,
        rhs,
        two_point: two_point.as_f64(),
        two_point_predicted: predicted,
        identity_error: (two_point.as_f64() - predicted).abs(),
        margin_relent: relent - rhs,
        margin_mi: mi - rhs,
    })
}

/// Causal-influence bound with `O_W = U_A|I⟩⟨I|U_A†`.
#[derive(Debug, Clone, Serialize)]
pub struct CausalInfluenceReport {
    pub relent: f64,
    /// `⟨O_B(t)⟩` with `U_A` inserted minus without.
    pub shift: f64,
    pub rhs: f64,
    pub margin: f64,
}

pub fn causal_influence_check<T: Real>(
    rho_in: &DensityMatrix<T>,
    evolution: &Evolution<T>,
    u_a: &CMat<T>,
    a_labels: &[&str],
    o_b: &HermitianObservable<T>,
) -> Result<CausalInfluenceReport> {
    let space = rho_in.space();
    let a_pos = space.positions(a_labels)?;
    let d = space.select(&a_pos).total_dim();
    if u_a.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, found: u_a.nrows() });
    }
    let problem = StmiProblem::new(rho_in, evolution, a_labels, &o_b.space().labels())?;
    let eval = problem.evaluate(&IsometryCoupling::swap_epr(space.select(&a_pos))?)?;
    let u_full = linalg::embed(u_a, &space.dims(), &a_pos);
    let kicked = rho_in.conjugate(&u_full)?;
    let e0 = embed_ops(rho_in, evolution, &HermitianObservable::identity(space.select(&a_pos)), o_b)?;
    let before = linalg::trace_product(rho_in.data(), &e0.o_b_t).re.as_f64();
    let after = linalg::trace_product(kicked.data(), &e0.o_b_t).re.as_f64();
    let shift = after - before;
    let nb = o_b.op_norm().as_f64();
    let rhs = if nb > 0.0 { shift * shift / (2.0 * (d * d) as f64 * nb * nb) } else { 0.0 };
    let relent = eval.value.to_f64();
    Ok(CausalInfluenceReport { relent, shift, rhs, margin: relent - rhs })
}
