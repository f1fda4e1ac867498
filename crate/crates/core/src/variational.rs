//! STMI by Riemannian gradient ascent over ancilla couplings `V: A → A ⊗ W`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::KrausChannel;
use crate::entropy::{self, EntropyValue};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::scalar::{re, Real, C};
use crate::space::TensorSpace;
use crate::state::{DensityMatrix, HermitianObservable};
use crate::tolerance::{TAU_COMPLETE, TAU_SUPPORT};

/// Largest joint dimension of system and ancilla handled densely.
pub const MAX_JOINT_DIM: usize = 4096;

/// Label of the ancilla factor.
pub const ANCILLA: &str = "W";

/// Isometry from `A` into `A ⊗ W`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryCoupling<T: Real> {
    in_space: TensorSpace,
    out_space: TensorSpace,
    data: CMat<T>,
}

impl<T: Real> IsometryCoupling<T> {
    /// Validates `V†V = Id`. The output space is `in_space ⊗ W(w_dim)`.
    pub fn new(in_space: TensorSpace, w_dim: usize, data: CMat<T>) -> Result<Self> {
        let out_space = in_space.concat(&TensorSpace::single(ANCILLA, w_dim)?)?;
        let (din, dout) = (in_space.total_dim(), out_space.total_dim());
        if data.nrows() != dout || data.ncols() != din {
            return Err(Error::DimensionMismatch { expected: dout * din, found: data.nrows() * data.ncols() });
        }
        let defect = linalg::max_abs(&(data.adjoint() * &data - linalg::eye::<T>(din)));
        if defect > T::tol(TAU_COMPLETE) {
            return Err(Error::NotIsometry(defect.as_f64()));
        }
        Ok(Self { in_space, out_space, data })
    }

    fn trusted(in_space: TensorSpace, w_dim: usize, data: CMat<T>) -> Self {
        let out_space = in_space
            .concat(&TensorSpace::single(ANCILLA, w_dim).expect("positive dim"))
            .expect("ancilla label is reserved");
        Self { in_space, out_space, data }
    }

    /// `|a⟩ ↦ |a⟩|0⟩_W`.
    pub fn identity_embedding(in_space: TensorSpace, w_dim: usize) -> Result<Self> {
        let d = in_space.total_dim();
        let data = CMat::from_fn(d * w_dim, d, |r, c| if r == c * w_dim { re(T::one()) } else { re(T::zero()) });
        Self::new(in_space, w_dim, data)
    }

    /// Seeded random isometry.
    pub fn random<R: Rng + ?Sized>(in_space: TensorSpace, w_dim: usize, rng: &mut R) -> Result<Self> {
        let d = in_space.total_dim();
        Self::new(in_space, w_dim, linalg::random_isometry(d * w_dim, d, rng))
    }

    /// Swap coupling: the input moves to `W₁` and `A ⊗ W₂` is prepared in a
    /// purification `ψ = ρ_W^{1/2}` of `ρ_W`, so `V|a⟩ = Σ ψ_xy |x⟩_A|a⟩_W₁|y⟩_W₂`.
    /// `W = W₁W₂` has dimension `d_A²`.
    pub fn swap_ansatz(in_space: TensorSpace, rho_w: &CMat<T>) -> Result<Self> {
        let d = in_space.total_dim();
        if rho_w.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho_w.nrows() });
        }
        let psi = linalg::sqrt_psd(rho_w);
        let tr = linalg::trace_re(rho_w);
        let psi = psi / re(tr.sqrt());
        let mut data = CMat::zeros(d * d * d, d);
        for a in 0..d {
            for x in 0..d {
                for y in 0..d {
                    data[(x * d * d + a * d + y, a)] = psi[(x, y)];
                }
            }
        }
        Self::new(in_space, d * d, data)
    }

    /// Swap with a maximally entangled `A W₂` pair: the superdensity coupling.
    pub fn swap_epr(in_space: TensorSpace) -> Result<Self> {
        let d = in_space.total_dim();
        Self::swap_ansatz(in_space, &(linalg::eye::<T>(d) / re(T::lit(d as f64))))
    }

    pub fn in_space(&self) -> &TensorSpace {
        &self.in_space
    }

    pub fn out_space(&self) -> &TensorSpace {
        &self.out_space
    }

    pub fn data(&self) -> &CMat<T> {
        &self.data
    }

    pub fn w_dim(&self) -> usize {
        self.data.nrows() / self.data.ncols()
    }

    /// Largest deviation of `V†V` from the identity.
    pub fn isometry_error(&self) -> T {
        linalg::max_abs(&(self.data.adjoint() * &self.data - linalg::eye::<T>(self.data.ncols())))
    }

    /// `V₁ ⊗ V₁` reordered from `A₁W₁A₂W₂` to `A₁A₂ ⊗ W`, with `W = W₁W₂`.
    pub fn replicate2(&self) -> Result<Self> {
        let (da, dw) = (self.data.ncols(), self.w_dim());
        let doubled = linalg::kron(&self.data, &self.data);
        let data = linalg::permute_rows(&doubled, &[da, dw, da, dw], &[0, 2, 1, 3]);
        let in_space = self
            .in_space
            .relabel(|l| format!("{l}#1"))?
            .concat(&self.in_space.relabel(|l| format!("{l}#2"))?)?;
        Self::new(in_space, dw * dw, data)
    }
}

/// Time evolution from the input space to the output space.
#[derive(Debug, Clone, PartialEq)]
pub enum Evolution<T: Real> {
    /// Unitary on the input space; output labels equal input labels.
    Unitary(CMat<T>),
    /// Channel whose input shape matches the input state.
    Channel(KrausChannel<T>),
}

impl<T: Real> Evolution<T> {
    pub(crate) fn kraus_and_output(&self, input: &TensorSpace) -> Result<(Vec<CMat<T>>, TensorSpace)> {
        match self {
            Self::Unitary(u) => {
                let d = input.total_dim();
                if u.nrows() != d || u.ncols() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: u.nrows() });
                }
                Ok((vec![u.clone()], input.clone()))
            }
            Self::Channel(ch) => {
                if !ch.input_space().same_shape(input) {
                    return Err(Error::SpaceMismatch(format!(
                        "evolution input {} vs state {}",
                        ch.input_space(),
                        input
                    )));
                }
                Ok((ch.kraus_ops().to_vec(), ch.output_space().clone()))
            }
        }
    }
}

/// Step size, stopping rule and restart policy of the ascent.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub backtrack: f64,
    /// Defaults to `d_A²`.
    pub ancilla_dim: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { step: 0.05, max_iters: 5000, grad_tol: 1e-7, restarts: 8, seed: 0, backtrack: 0.5, ancilla_dim: None }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::OutOfRange(m.to_string()));
        if !(self.step > 0.0) {
            return bad("step must be positive");
        }
        if self.max_iters == 0 || self.restarts == 0 {
            return bad("max_iters and restarts must be positive");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if self.ancilla_dim == Some(0) {
            return bad("ancilla_dim must be positive");
        }
        Ok(())
    }
}

/// Outcome of an STMI optimization.
#[derive(Debug, Clone)]
pub struct StmiResult<T: Real> {
    pub value: EntropyValue<T>,
    /// `I(B:W)` of the returned coupling.
    pub mi_term: T,
    /// `S(ρ_B | ρ_B,0)` of the returned coupling.
    pub relent_term: EntropyValue<T>,
    pub coupling: IsometryCoupling<T>,
    pub iterations: usize,
    pub converged: bool,
    pub trajectory: Vec<T>,
    /// Best value of every restart, in restart order.
    pub restart_values: Vec<EntropyValue<T>>,
    /// Set when the best two restarts differ by more than `1e-3`.
    pub restarts_disagree: bool,
}

/// Objective, decomposition and gradient data at one coupling.
#[derive(Debug, Clone)]
pub struct Evaluation<T: Real> {
    pub value: EntropyValue<T>,
    pub mi_term: T,
    pub relent_term: EntropyValue<T>,
}

/// Input state, effective channel and output marginal, preprocessed for
/// repeated evaluation.
///
/// Internally the input is ordered `[Ā, A]` and the evolution is reduced to a
/// channel `E: ĀA → B`.
#[derive(Debug, Clone)]
pub struct StmiProblem<T: Real> {
    a_space: TensorSpace,
    b_space: TensorSpace,
    rho: CMat<T>,
    d_abar: usize,
    d_a: usize,
    d_b: usize,
    channel: Vec<CMat<T>>,
    rho_b0: CMat<T>,
    log_b0: CMat<T>,
    null_b0: CMat<T>,
    adj_log_b0: CMat<T>,
    adj_null_b0: CMat<T>,
}

/// Lifted Kraus operators `K ⊗ Id_W` for a fixed ancilla dimension.
struct Lifted<T: Real> {
    dw: usize,
    kraus: Vec<CMat<T>>,
}

/// Connected state and its marginals on `ĀAW` and `BW`.
struct Snapshot<T: Real> {
    rho_full: CMat<T>,
    rho_bw: CMat<T>,
    rho_b: CMat<T>,
    rho_w: CMat<T>,
}

impl<T: Real> StmiProblem<T> {
    pub fn new(rho_in: &DensityMatrix<T>, evolution: &Evolution<T>, a_labels: &[&str], b_labels: &[&str]) -> Result<Self> {
        let space = rho_in.space();
        let a_pos = space.positions(a_labels)?;
        if a_pos.is_empty() {
            return Err(Error::BadPartition);
        }
        let abar_pos = space.complement_positions(&a_pos);
        let in_order: Vec<usize> = abar_pos.iter().chain(a_pos.iter()).copied().collect();
        let dims = space.dims();
        let rho = linalg::permute_op(rho_in.data(), &dims, &in_order);

        let (kraus, out_space) = evolution.kraus_and_output(space)?;
        let b_pos = out_space.positions(b_labels)?;
        if b_pos.is_empty() {
            return Err(Error::BadPartition);
        }
        let bbar_pos = out_space.complement_positions(&b_pos);
        let out_dims = out_space.dims();
        let out_order: Vec<usize> = bbar_pos.iter().chain(b_pos.iter()).copied().collect();
        let d_b: usize = b_pos.iter().map(|&p| out_dims[p]).product();
        let d_bbar = out_space.total_dim() / d_b;
        let mut effective = Vec::with_capacity(kraus.len() * d_bbar);
        for k in &kraus {
            let k = linalg::permute_cols(&linalg::permute_rows(k, &out_dims, &out_order), &dims, &in_order);
            for l in 0..d_bbar {
                effective.push(k.rows(l * d_b, d_b).into_owned());
            }
        }
        let d_a: usize = a_pos.iter().map(|&p| dims[p]).product();
        let d_abar = space.total_dim() / d_a;
        let ch = KrausChannel::trusted(
            TensorSpace::single("in", d_abar * d_a)?,
            TensorSpace::single("out", d_b)?,
            effective,
        );
        let ch = if ch.num_kraus() > d_abar * d_a * d_b { ch.compressed() } else { ch };
        Ok(Self::from_parts(space.select(&a_pos), out_space.select(&b_pos), rho, d_abar, d_a, ch.kraus_ops().to_vec()))
    }

    fn from_parts(a_space: TensorSpace, b_space: TensorSpace, rho: CMat<T>, d_abar: usize, d_a: usize, channel: Vec<CMat<T>>) -> Self {
        let d_b = channel[0].nrows();
        let mut rho_b0 = CMat::zeros(d_b, d_b);
        for k in &channel {
            rho_b0 += k * &rho * k.adjoint();
        }
        let rho_b0 = linalg::hermitian_part(&rho_b0);
        let (log_b0, proj) = entropy::log_support_raw(&rho_b0);
        let null_b0 = linalg::eye::<T>(d_b) - proj;
        let adj = |x: &CMat<T>| {
            let mut out = CMat::zeros(d_abar * d_a, d_abar * d_a);
            for k in &channel {
                out += k.adjoint() * x * k;
            }
            out
        };
        let adj_log_b0 = adj(&log_b0);
        let adj_null_b0 = adj(&null_b0);
        Self { a_space, b_space, rho, d_abar, d_a, d_b, channel, rho_b0, log_b0, null_b0, adj_log_b0, adj_null_b0 }
    }

    pub fn a_space(&self) -> &TensorSpace {
        &self.a_space
    }

    pub fn b_space(&self) -> &TensorSpace {
        &self.b_space
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    /// Unperturbed output `ρ_B,0`.
    pub fn rho_b0(&self) -> DensityMatrix<T> {
        DensityMatrix::trusted(self.b_space.clone(), self.rho_b0.clone()).expect("Hermitian by construction")
    }

    /// Number of Kraus operators of the effective channel `ĀA → B`.
    pub fn effective_kraus_count(&self) -> usize {
        self.channel.len()
    }

    /// True when `ρ_B,0` is rank deficient.
    pub fn output_rank_deficient(&self) -> bool {
        linalg::trace_re(&self.null_b0) > T::lit(0.5)
    }

    fn check_coupling(&self, v: &IsometryCoupling<T>) -> Result<()> {
        if v.data.ncols() != self.d_a {
            return Err(Error::DimensionMismatch { expected: self.d_a, found: v.data.ncols() });
        }
        if self.d_abar * v.data.nrows() > MAX_JOINT_DIM {
            return Err(Error::TooLarge(self.d_abar * v.data.nrows()));
        }
        Ok(())
    }

    fn lift(&self, dw: usize) -> Lifted<T> {
        let id = linalg::eye::<T>(dw);
        Lifted { dw, kraus: self.channel.iter().map(|k| linalg::kron(k, &id)).collect() }
    }

    fn snapshot(&self, lifted: &Lifted<T>, v: &CMat<T>) -> Snapshot<T> {
        let iv = if self.d_abar == 1 { v.clone() } else { linalg::kron(&linalg::eye::<T>(self.d_abar), v) };
        let rho_full = &iv * &self.rho * iv.adjoint();
        let dbw = self.d_b * lifted.dw;
        let mut rho_bw = CMat::zeros(dbw, dbw);
        for k in &lifted.kraus {
            rho_bw += k * &rho_full * k.adjoint();
        }
        let rho_bw = linalg::hermitian_part(&rho_bw);
        let rho_b = linalg::trace_right(&rho_bw, self.d_b, lifted.dw);
        let rho_w = linalg::trace_left(&rho_bw, self.d_b, lifted.dw);
        Snapshot { rho_full, rho_bw, rho_b, rho_w }
    }

    fn leak(&self, s: &Snapshot<T>) -> T {
        linalg::trace_product(&s.rho_b, &self.null_b0).re
    }

    fn evaluate_snapshot(&self, s: &Snapshot<T>) -> Evaluation<T> {
        let s_bw = entropy::entropy_raw(&s.rho_bw);
        let s_b = entropy::entropy_raw(&s.rho_b);
        let s_w = entropy::entropy_raw(&s.rho_w);
        let mi = (s_b + s_w - s_bw).max(T::zero());
        if self.leak(s) > T::tol(TAU_SUPPORT) {
            return Evaluation { value: EntropyValue::Infinite, mi_term: mi, relent_term: EntropyValue::Infinite };
        }
        let cross = linalg::trace_product(&s.rho_b, &self.log_b0).re;
        let rel = (-s_b - cross).max(T::zero());
        let value = (-s_bw + s_w - cross).max(T::zero());
        Evaluation { value: EntropyValue::Finite(value), mi_term: mi, relent_term: EntropyValue::Finite(rel) }
    }

    /// Objective and decomposition at a coupling.
    pub fn evaluate(&self, v: &IsometryCoupling<T>) -> Result<Evaluation<T>> {
        self.check_coupling(v)?;
        let lifted = self.lift(v.w_dim());
        Ok(self.evaluate_snapshot(&self.snapshot(&lifted, &v.data)))
    }

    fn value_raw(&self, lifted: &Lifted<T>, v: &CMat<T>) -> EntropyValue<T> {
        self.evaluate_snapshot(&self.snapshot(lifted, v)).value
    }

    /// Riemannian gradient `G` on `A ⊗ W`: under `V → e^{iT}V` the objective
    /// changes by `Tr(T G)` to first order.
    fn gradient_snapshot(&self, lifted: &Lifted<T>, s: &Snapshot<T>) -> CMat<T> {
        let (log_bw, _) = entropy::log_support_raw(&s.rho_bw);
        let (log_w, _) = entropy::log_support_raw(&s.rho_w);
        let daw = self.d_a * lifted.dw;
        let dfull = self.d_abar * daw;
        let mut m = CMat::zeros(dfull, dfull);
        for k in &lifted.kraus {
            m += k.adjoint() * &log_bw * k;
        }
        m -= linalg::kron(&linalg::eye::<T>(self.d_abar * self.d_a), &log_w);
        m -= linalg::kron(&self.adj_log_b0, &linalg::eye::<T>(lifted.dw));
        let comm = &s.rho_full * &m - &m * &s.rho_full;
        let g = linalg::trace_left(&comm, self.d_abar, daw) * C::new(T::zero(), T::one());
        linalg::hermitian_part(&g)
    }

    /// Gradient of the leaked mass `Tr ρ_B (Id − Π_B,0)`.
    fn leak_gradient(&self, lifted: &Lifted<T>, s: &Snapshot<T>) -> CMat<T> {
        let daw = self.d_a * lifted.dw;
        let m = linalg::kron(&self.adj_null_b0, &linalg::eye::<T>(lifted.dw));
        let comm = &s.rho_full * &m - &m * &s.rho_full;
        let g = linalg::trace_left(&comm, self.d_abar, daw) * C::new(T::zero(), T::one());
        linalg::hermitian_part(&g)
    }

    /// Gradient at a coupling; fails when the objective is infinite.
    pub fn gradient(&self, v: &IsometryCoupling<T>) -> Result<CMat<T>> {
        self.check_coupling(v)?;
        let lifted = self.lift(v.w_dim());
        let s = self.snapshot(&lifted, &v.data);
        if self.leak(&s) > T::tol(TAU_SUPPORT) {
            return Err(Error::SupportViolation);
        }
        Ok(self.gradient_snapshot(&lifted, &s))
    }

    /// Objective after `V → exp(i t T) V`.
    pub fn value_along(&self, v: &IsometryCoupling<T>, direction: &CMat<T>, t: T) -> Result<EntropyValue<T>> {
        self.check_coupling(v)?;
        let lifted = self.lift(v.w_dim());
        let moved = linalg::expm_i_hermitian(direction, t) * &v.data;
        Ok(self.value_raw(&lifted, &moved))
    }

    /// The connected state `ρ_BW`.
    pub fn connected(&self, v: &IsometryCoupling<T>) -> Result<DensityMatrix<T>> {
        self.check_coupling(v)?;
        let lifted = self.lift(v.w_dim());
        let s = self.snapshot(&lifted, &v.data);
        let space = self.b_space.concat(&TensorSpace::single(ANCILLA, v.w_dim())?)?;
        DensityMatrix::trusted(space, s.rho_bw)
    }

    /// The disconnected state `ρ_B,0 ⊗ ρ_W`.
    pub fn disconnected(&self, v: &IsometryCoupling<T>) -> Result<DensityMatrix<T>> {
        let conn = self.connected(v)?;
        let rho_w = conn.partial_trace(&[ANCILLA])?;
        self.rho_b0().tensor(&rho_w)
    }

    /// True when some coupling pushes `ρ_B` out of the support of `ρ_B,0`.
    pub fn divergence_probe(&self, seed: u64, restarts: usize) -> Result<(bool, IsometryCoupling<T>)> {
        let dw = self.d_a * self.d_a;
        let id = IsometryCoupling::identity_embedding(self.a_space.clone(), dw)?;
        if !self.output_rank_deficient() {
            return Ok((false, id));
        }
        let lifted = self.lift(dw);
        let thresh = T::tol(TAU_SUPPORT) * T::lit(10.0);
        let mut best = (T::zero(), id.data.clone());
        for r in 0..restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut v = linalg::random_isometry::<T, _>(self.d_a * dw, self.d_a, &mut rng);
            let mut eta = T::lit(0.5);
            for _ in 0..200 {
                let s = self.snapshot(&lifted, &v);
                let leak = self.leak(&s);
                if leak > best.0 {
                    best = (leak, v.clone());
                }
                if leak > thresh {
                    break;
                }
                let g = self.leak_gradient(&lifted, &s);
                if linalg::frobenius(&g) < T::tol(1e-14) {
                    break;
                }
                let cand = linalg::expm_i_hermitian(&g, eta) * &v;
                if self.leak(&self.snapshot(&lifted, &cand)) > leak {
                    v = cand;
                    eta *= T::lit(1.5);
                } else {
                    eta *= T::lit(0.5);
                }
            }
            if best.0 > thresh {
                break;
            }
        }
        let coupling = IsometryCoupling::trusted(self.a_space.clone(), dw, best.1);
        Ok((best.0 > thresh, coupling))
    }

    /// Gradient ascent from one starting coupling.
    pub fn ascend(&self, start: &IsometryCoupling<T>, cfg: &OptimizerConfig) -> Result<StmiResult<T>> {
        cfg.validate()?;
        self.check_coupling(start)?;
        let dw = start.w_dim();
        let lifted = self.lift(dw);
        let mut v = start.data.clone();
        let mut snap = self.snapshot(&lifted, &v);
        let mut eval = self.evaluate_snapshot(&snap);
        let mut trajectory = Vec::new();
        let mut eta = T::lit(cfg.step);
        let backtrack = T::lit(cfg.backtrack);
        let grad_tol = T::tol(cfg.grad_tol);
        let min_step = T::tol(1e-14);
        let mut converged = false;
        let mut iterations = 0;
        let mut streak = 0;
        if let EntropyValue::Finite(mut f) = eval.value {
            trajectory.push(f);
            while iterations < cfg.max_iters {
                let g = self.gradient_snapshot(&lifted, &snap);
                let gn = linalg::frobenius(&g);
                if gn < grad_tol {
                    converged = true;
                    break;
                }
                iterations += 1;
                let mut accepted = None;
                while eta > min_step {
                    let cand = linalg::expm_i_hermitian(&g, eta) * &v;
                    let cs = self.snapshot(&lifted, &cand);
                    let ce = self.evaluate_snapshot(&cs);
                    match ce.value {
                        EntropyValue::Finite(cf) if cf > f => {
                            accepted = Some((cand, cs, ce, cf));
                            break;
                        }
                        EntropyValue::Infinite => {
                            accepted = Some((cand, cs, ce, T::zero()));
                            break;
                        }
                        _ => {
                            eta *= backtrack;
                            streak = 0;
                        }
                    }
                }
                let Some((cand, cs, ce, cf)) = accepted else {
                    break;
                };
                v = cand;
                snap = cs;
                eval = ce;
                if !eval.value.is_finite() {
                    break;
                }
                f = cf;
                trajectory.push(f);
                streak += 1;
                if streak >= 3 {
                    eta *= T::lit(1.5);
                    streak = 0;
                }
                if iterations % 100 == 0 {
                    v = linalg::polar_isometry(&v);
                    snap = self.snapshot(&lifted, &v);
                    eval = self.evaluate_snapshot(&snap);
                    if let Some(x) = eval.value.finite() {
                        f = x;
                    }
                }
            }
        }
        Ok(StmiResult {
            value: eval.value,
            mi_term: eval.mi_term,
            relent_term: eval.relent_term,
            coupling: IsometryCoupling::trusted(self.a_space.clone(), dw, v),
            iterations,
            converged,
            trajectory,
            restart_values: vec![eval.value],
            restarts_disagree: false,
        })
    }

    /// Multi-restart ascent from seeded random isometries, plus any extra
    /// starting couplings supplied by the caller. Returns the best run.
    pub fn optimize_with_starts(&self, cfg: &OptimizerConfig, extra: &[IsometryCoupling<T>]) -> Result<StmiResult<T>> {
        cfg.validate()?;
        let dw = cfg.ancilla_dim.unwrap_or(self.d_a * self.d_a);
        let (diverges, witness) = self.divergence_probe(cfg.seed, cfg.restarts)?;
        if diverges {
            let e = self.evaluate(&witness)?;
            return Ok(StmiResult {
                value: EntropyValue::Infinite,
                mi_term: e.mi_term,
                relent_term: EntropyValue::Infinite,
                coupling: witness,
                iterations: 0,
                converged: true,
                trajectory: Vec::new(),
                restart_values: vec![EntropyValue::Infinite],
                restarts_disagree: false,
            });
        }
        let mut starts = Vec::with_capacity(cfg.restarts + extra.len());
        for r in 0..cfg.restarts {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            starts.push(IsometryCoupling::random(self.a_space.clone(), dw, &mut rng)?);
        }
        starts.extend(extra.iter().cloned());
        let runs: Vec<Result<StmiResult<T>>> = starts.par_iter().map(|s| self.ascend(s, cfg)).collect();
        let runs: Vec<StmiResult<T>> = runs.into_iter().collect::<Result<_>>()?;
        let values: Vec<EntropyValue<T>> = runs.iter().map(|r| r.value).collect();
        let mut best = 0;
        for (i, r) in runs.iter().enumerate() {
            if r.value > runs[best].value {
                best = i;
            }
        }
        let mut sorted: Vec<f64> = values.iter().map(|v| v.to_f64()).collect();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let disagree = sorted.len() > 1 && (sorted[0] - sorted[1]).abs() > 1e-3;
        let mut out = runs.into_iter().nth(best).expect("at least one restart");
        out.restart_values = values;
        out.restarts_disagree = disagree;
        Ok(out)
    }

    /// Two-replica problem `ρ^{⊗2}`, `E^{⊗2}` with `A = A₁A₂`.
    pub fn replicate2(&self) -> Result<Self> {
        let (db_, da) = (self.d_abar, self.d_a);
        let rho2 = linalg::permute_op(&linalg::kron(&self.rho, &self.rho), &[db_, da, db_, da], &[0, 2, 1, 3]);
        let mut kraus = Vec::with_capacity(self.channel.len().pow(2));
        for k1 in &self.channel {
            for k2 in &self.channel {
                kraus.push(linalg::permute_cols(&linalg::kron(k1, k2), &[db_, da, db_, da], &[0, 2, 1, 3]));
            }
        }
        let two = |s: &TensorSpace| -> Result<TensorSpace> {
            s.relabel(|l| format!("{l}#1"))?.concat(&s.relabel(|l| format!("{l}#2"))?)
        };
        Ok(Self::from_parts(two(&self.a_space)?, two(&self.b_space)?, rho2, db_ * db_, da * da, kraus))
    }
}

/// Report of the two-replica stationarity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityN2<T: Real> {
    /// Frobenius norm of the two-replica gradient at `V₁ ⊗ V₁`.
    pub gradient_norm: T,
    /// Objective at `V₁ ⊗ V₁`, divided by two.
    pub half_objective: EntropyValue<T>,
}

fn problem<T: Real>(rho_in: &DensityMatrix<T>, v: &IsometryCoupling<T>, evolution: &Evolution<T>, b_labels: &[&str]) -> Result<StmiProblem<T>> {
    let a: Vec<&str> = v.in_space().labels();
    StmiProblem::new(rho_in, evolution, &a, b_labels)
}

/// `ρ_BW`: couple `A` to the ancilla, evolve, trace out `B̄`.
pub fn connected_state<T: Real>(rho_in: &DensityMatrix<T>, v: &IsometryCoupling<T>, evolution: &Evolution<T>, b_labels: &[&str]) -> Result<DensityMatrix<T>> {
    problem(rho_in, v, evolution, b_labels)?.connected(v)
}

/// `ρ_B,0 ⊗ ρ_W` with `ρ_W` the ancilla marginal of the connected state.
pub fn disconnected_state<T: Real>(rho_in: &DensityMatrix<T>, v: &IsometryCoupling<T>, evolution: &Evolution<T>, b_labels: &[&str]) -> Result<DensityMatrix<T>> {
    problem(rho_in, v, evolution, b_labels)?.disconnected(v)
}

/// `S(ρ_BW | ρ_B,0 ⊗ ρ_W)` evaluated with the generic relative entropy.
pub fn objective<T: Real>(rho_in: &DensityMatrix<T>, v: &IsometryCoupling<T>, evolution: &Evolution<T>, b_labels: &[&str]) -> Result<EntropyValue<T>> {
    let p = problem(rho_in, v, evolution, b_labels)?;
    entropy::relative_entropy(&p.connected(v)?, &p.disconnected(v)?)
}

/// Gradient of [`objective`] on `A ⊗ W` (see [`StmiProblem::gradient`]).
pub fn gradient<T: Real>(rho_in: &DensityMatrix<T>, v: &IsometryCoupling<T>, evolution: &Evolution<T>, b_labels: &[&str]) -> Result<HermitianObservable<T>> {
    let g = problem(rho_in, v, evolution, b_labels)?.gradient(v)?;
    HermitianObservable::new(v.out_space().clone(), g)
}

/// `J₁(A:B)`; returns `+∞` without ascending when the divergence probe fires.
pub fn optimize_j1<T: Real>(rho_in: &DensityMatrix<T>, evolution: &Evolution<T>, a_labels: &[&str], b_labels: &[&str], cfg: &OptimizerConfig) -> Result<StmiResult<T>> {
    StmiProblem::new(rho_in, evolution, a_labels, b_labels)?.optimize_with_starts(cfg, &[])
}

/// Whether `J₁` is infinite.
pub fn divergence_probe<T: Real>(rho_in: &DensityMatrix<T>, evolution: &Evolution<T>, a_labels: &[&str], b_labels: &[&str]) -> Result<bool> {
    Ok(StmiProblem::new(rho_in, evolution, a_labels, b_labels)?.divergence_probe(0, 8)?.0)
}

/// Gradient norm and half objective of `V₁ ⊗ V₁` for two replicas.
pub fn stationarity_check_n2<T: Real>(rho_in: &DensityMatrix<T>, evolution: &Evolution<T>, b_labels: &[&str], v1: &IsometryCoupling<T>) -> Result<StationarityN2<T>> {
    let p2 = problem(rho_in, v1, evolution, b_labels)?.replicate2()?;
    let v2 = v1.replicate2()?;
    p2.check_coupling(&v2)?;
    let half_objective = match p2.evaluate(&v2)?.value {
        EntropyValue::Finite(x) => EntropyValue::Finite(x / T::lit(2.0)),
        EntropyValue::Infinite => EntropyValue::Infinite,
    };
    let gradient_norm = linalg::frobenius(&p2.gradient(&v2)?);
    Ok(StationarityN2 { gradient_norm, half_objective })
}
