//! Swap-ansatz solver for factorized inputs: the coupling moves `A` into the
//! ancilla and prepares `A W₂` in a purification of `ρ_W`, leaving a
//! concave-looking problem over `ρ_W` alone.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::channel::KrausChannel;
use crate::entropy::{self, EntropyValue};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::scalar::{re, Real, C};
use crate::space::TensorSpace;
use crate::state::DensityMatrix;
use crate::tolerance::TAU_SUPPORT;
use crate::variational::{IsometryCoupling, StmiProblem};

/// Value substituted for the logarithm on the null space of the complement output.
pub const NULL_LOG: f64 = -50.0;

/// Ancilla marginal together with the channel and input it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzState<T: Real> {
    pub rho_w: DensityMatrix<T>,
    pub channel: KrausChannel<T>,
    pub rho_in_a: DensityMatrix<T>,
}

impl<T: Real> AnsatzState<T> {
    pub fn new(rho_w: DensityMatrix<T>, channel: KrausChannel<T>, rho_in_a: DensityMatrix<T>) -> Result<Self> {
        let d = channel.input_dim();
        if rho_w.dim() != d || rho_in_a.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho_w.dim().max(rho_in_a.dim()) });
        }
        Ok(Self { rho_w, channel, rho_in_a })
    }

    /// The swap coupling realizing this ancilla marginal.
    pub fn coupling(&self) -> Result<IsometryCoupling<T>> {
        IsometryCoupling::swap_ansatz(self.channel.input_space().clone(), self.rho_w.data())
    }
}

/// Precomputed `𝒩†log 𝒩(ρ_in)` and the support test for one channel and input.
#[derive(Debug, Clone)]
pub struct AnsatzObjective<T: Real> {
    channel: KrausChannel<T>,
    adj_log_out: CMat<T>,
    adj_null_out: CMat<T>,
}

impl<T: Real> AnsatzObjective<T> {
    pub fn new(channel: &KrausChannel<T>, rho_in_a: &DensityMatrix<T>) -> Result<Self> {
        if rho_in_a.dim() != channel.input_dim() {
            return Err(Error::DimensionMismatch { expected: channel.input_dim(), found: rho_in_a.dim() });
        }
        let out = channel.apply_raw(rho_in_a.data());
        let (log_out, proj) = entropy::log_support_raw(&linalg::hermitian_part(&out));
        let null = linalg::eye::<T>(channel.output_dim()) - proj;
        Ok(Self {
            channel: channel.clone(),
            adj_log_out: channel.adjoint_raw(&log_out),
            adj_null_out: channel.adjoint_raw(&null),
        })
    }

    /// True when some ancilla marginal leaks outside the support of `𝒩(ρ_in)`,
    /// i.e. `Tr 𝒩(Id)(Id − Π₀) > τ`.
    pub fn diverges(&self) -> bool {
        linalg::op_norm_hermitian(&self.adj_null_out) > T::tol(TAU_SUPPORT)
    }

    /// `−S(𝒩̃(ρ_W)) + S(ρ_W) − Tr ρ_W 𝒩†log 𝒩(ρ_in)` for a raw matrix.
    pub fn value_raw(&self, rho_w: &CMat<T>) -> EntropyValue<T> {
        if linalg::trace_product(rho_w, &self.adj_null_out).re > T::tol(TAU_SUPPORT) {
            return EntropyValue::Infinite;
        }
        let gamma = linalg::hermitian_part(&self.channel.complement_raw(rho_w));
        let v = -entropy::entropy_raw(&gamma) + entropy::entropy_raw(rho_w)
            - linalg::trace_product(rho_w, &self.adj_log_out).re;
        EntropyValue::Finite(v)
    }

    /// Right-hand side of the self-consistency condition,
    /// `𝒩̃†log 𝒩̃(ρ) − 𝒩†log 𝒩(ρ_in)`.
    fn update_target(&self, rho: &CMat<T>) -> CMat<T> {
        let gamma = linalg::hermitian_part(&self.channel.complement_raw(rho));
        let log_g = entropy::log_clamped_raw(&gamma, T::lit(NULL_LOG));
        linalg::hermitian_part(&(self.channel.complement_adjoint_raw(&log_g) - &self.adj_log_out))
    }
}

/// `ansatz_objective` on an [`AnsatzState`].
pub fn ansatz_objective<T: Real>(s: &AnsatzState<T>) -> Result<EntropyValue<T>> {
    Ok(AnsatzObjective::new(&s.channel, &s.rho_in_a)?.value_raw(s.rho_w.data()))
}

/// Result of the damped self-consistent iteration.
#[derive(Debug, Clone)]
pub struct FixedPoint<T: Real> {
    /// Iterate with the largest objective.
    pub best: AnsatzState<T>,
    pub best_value: EntropyValue<T>,
    /// Last iterate.
    pub last: AnsatzState<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective of every iterate.
    pub history: Vec<T>,
}

fn exp_normalized<T: Real>(l: &CMat<T>) -> (CMat<T>, CMat<T>) {
    let (vals, vecs) = linalg::eigh(l);
    let top = vals.iter().fold(T::min_value().unwrap_or(-T::one()), |a, &b| a.max(b));
    let ws: Vec<T> = vals.iter().map(|&x| (x - top).exp()).collect();
    let z = ws.iter().fold(T::zero(), |a, &b| a + b);
    let rho: Vec<C<T>> = ws.iter().map(|&w| re(w / z)).collect();
    let log: Vec<C<T>> = vals.iter().map(|&x| re(x - top - z.ln())).collect();
    (linalg::from_spectrum(&vecs, &rho), linalg::from_spectrum(&vecs, &log))
}

/// Damped log-space iteration of the self-consistency condition
/// `ρ_W ∝ exp[𝒩̃†log 𝒩̃(ρ_W) − 𝒩†log 𝒩(ρ_in)]`, started from `Id/d`.
pub fn fixed_point_solve<T: Real>(
    channel: &KrausChannel<T>,
    rho_in_a: &DensityMatrix<T>,
    damping: T,
    max_iters: usize,
    tol: T,
) -> Result<FixedPoint<T>> {
    let d = channel.input_dim();
    fixed_point_from(channel, rho_in_a, &(linalg::eye::<T>(d) / re(T::lit(d as f64))), damping, max_iters, tol)
}

/// [`fixed_point_solve`] from a given starting marginal (full rank).
pub fn fixed_point_from<T: Real>(
    channel: &KrausChannel<T>,
    rho_in_a: &DensityMatrix<T>,
    start: &CMat<T>,
    damping: T,
    max_iters: usize,
    tol: T,
) -> Result<FixedPoint<T>> {
    if !(damping > T::zero() && damping <= T::one()) {
        return Err(Error::OutOfRange(format!("damping {damping} not in (0, 1]")));
    }
    let obj = AnsatzObjective::new(channel, rho_in_a)?;
    if obj.diverges() {
        return Err(Error::SupportViolation);
    }
    let space = TensorSpace::single("W", channel.input_dim())?;
    let floor = T::lit(NULL_LOG);
    let mut rho = linalg::hermitian_part(start);
    let mut log = entropy::log_clamped_raw(&rho, floor);
    let mut history = vec![obj.value_raw(&rho).finite().unwrap_or(T::zero())];
    let mut best = (history[0], rho.clone());
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let target = obj.update_target(&rho);
        let mixed = &log * re(T::one() - damping) + target * re(damping);
        let (next, next_log) = exp_normalized(&mixed);
        let step = linalg::trace_norm_hermitian(&linalg::hermitian_part(&(&next - &rho)));
        rho = linalg::hermitian_part(&next);
        log = next_log;
        let v = obj.value_raw(&rho).finite().unwrap_or(T::zero());
        history.push(v);
        if v > best.0 {
            best = (v, rho.clone());
        }
        if step < tol {
            converged = true;
            break;
        }
    }
    let state = |m: CMat<T>| -> Result<AnsatzState<T>> {
        AnsatzState::new(DensityMatrix::trusted(space.clone(), m)?, channel.clone(), rho_in_a.clone())
    };
    Ok(FixedPoint {
        best: state(best.1)?,
        best_value: EntropyValue::Finite(best.0),
        last: state(rho)?,
        converged,
        iterations,
        history,
    })
}

/// For a unitary channel: `ρ_W = ρ_in⁻¹ / Tr ρ_in⁻¹` and `J₁ = log Tr ρ_in⁻¹`,
/// or `+∞` when `ρ_in` is rank deficient.
pub fn closed_form_unitary<T: Real>(rho_in_a: &DensityMatrix<T>) -> Result<(DensityMatrix<T>, EntropyValue<T>)> {
    let (vals, vecs) = linalg::eigh(rho_in_a.data());
    let top = vals.iter().fold(T::zero(), |a, &b| a.max(b));
    let space = TensorSpace::single("W", rho_in_a.dim())?;
    if vals.iter().any(|&x| x <= top * T::lit(crate::tolerance::TAU_RANK)) {
        let null: Vec<C<T>> = vals
            .iter()
            .map(|&x| re(if x <= top * T::lit(crate::tolerance::TAU_RANK) { T::one() } else { T::zero() }))
            .collect();
        let p = linalg::from_spectrum(&vecs, &null);
        let tr = linalg::trace_re(&p);
        return Ok((DensityMatrix::trusted(space, p / re(tr))?, EntropyValue::Infinite));
    }
    let inv: Vec<C<T>> = vals.iter().map(|&x| re(T::one() / x)).collect();
    let total = vals.iter().fold(T::zero(), |a, &x| a + T::one() / x);
    let rho_w = linalg::from_spectrum(&vecs, &inv) / re(total);
    Ok((DensityMatrix::trusted(space, rho_w)?, EntropyValue::Finite(total.ln())))
}

/// Leading divergent part of `J₁` for a dephasing channel acting on the
/// nearly-pure input with Bloch vector `(ε, 0, √(1−ε²))`: keeping only the
/// cross term with `log 𝒩(ρ_in) ≈ 2 log ε |1⟩⟨1|` gives
/// `sup_ρ −2 log ε ⟨1|𝒩(ρ)|1⟩ = −2 log ε`.
pub fn divergent_part_dephasing<T: Real>(epsilon: T, p: T) -> Result<T> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::OutOfRange(format!("epsilon {epsilon} not in (0, 1)")));
    }
    let ch = KrausChannel::dephasing(p)?;
    let mut proj1 = CMat::zeros(2, 2);
    proj1[(1, 1)] = re(T::lit(2.0) * epsilon.ln());
    let weight = ch.adjoint_raw(&proj1) * re(-T::one());
    Ok(linalg::eigvalsh(&weight).iter().fold(T::min_value().unwrap_or(-T::one()), |a, &b| a.max(b)))
}

/// Qubit state from an unconstrained 3-vector, `b = u tanh|u| / |u|`.
pub fn bloch_from_free<T: Real>(u: &[T; 3]) -> CMat<T> {
    let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let s = if n > T::zero() { n.tanh() / n } else { T::one() };
    bloch_state(&[u[0] * s, u[1] * s, u[2] * s])
}

/// `½(Id + b·σ)`.
pub fn bloch_state<T: Real>(b: &[T; 3]) -> CMat<T> {
    let [x, y, z] = linalg::paulis::<T>();
    (linalg::eye::<T>(2) + x * re(b[0]) + y * re(b[1]) + z * re(b[2])) * re(T::lit(0.5))
}

/// Downhill simplex minimization in `n` dimensions.
pub fn nelder_mead<T: Real>(f: &dyn Fn(&[T]) -> T, start: &[T], scale: T, max_evals: usize, ftol: T) -> (Vec<T>, T) {
    let n = start.len();
    let mut pts: Vec<Vec<T>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += scale;
        pts.push(p);
    }
    let mut vals: Vec<T> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    while evals < max_evals {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= ftol * (T::one() + vals[0].abs()) {
            break;
        }
        let mut centroid = vec![T::zero(); n];
        for p in &pts[..n] {
            for k in 0..n {
                centroid[k] += p[k] / T::lit(n as f64);
            }
        }
        let along = |t: T| -> Vec<T> { (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect() };
        let xr = along(-alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-gamma);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let xc = if fr < vals[n] { along(-rho) } else { along(rho) };
            let fc = f(&xc);
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    for k in 0..n {
                        let x0 = pts[0][k];
                        pts[i][k] = x0 + sigma * (pts[i][k] - x0);
                    }
                    vals[i] = f(&pts[i]);
                }
                evals += n;
            }
        }
    }
    let mut best = 0;
    for i in 0..vals.len() {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    (pts[best].clone(), vals[best])
}

/// Maximizes a function of a qubit state over the Bloch ball: a coarse grid
/// followed by Nelder–Mead refinement from the best grid points.
pub fn maximize_over_bloch<T: Real>(f: &(dyn Fn(&CMat<T>) -> T + Sync)) -> (CMat<T>, T) {
    let mut cand: Vec<([T; 3], T)> = Vec::new();
    let radii = [0.0, 0.5, 1.0, 1.5, 2.5, 4.0];
    for &r in &radii {
        let thetas: &[f64] = if r == 0.0 { &[0.0] } else { &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, PI] };
        for &th in thetas {
            let phis: &[f64] = if th == 0.0 || th == PI { &[0.0] } else { &[0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2] };
            for &ph in phis {
                let u = [
                    T::lit(r * th.sin() * ph.cos()),
                    T::lit(r * th.sin() * ph.sin()),
                    T::lit(r * th.cos()),
                ];
                let v = f(&bloch_from_free(&u));
                cand.push((u, v));
            }
        }
    }
    cand.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut best = (cand[0].0, cand[0].1);
    for (u, _) in cand.iter().take(3) {
        let neg = |x: &[T]| -> T { -f(&bloch_from_free(&[x[0], x[1], x[2]])) };
        let (mut x, mut fx) = nelder_mead(&neg, u, T::lit(0.3), 4000, T::tol(1e-14));
        for _ in 0..3 {
            let (y, fy) = nelder_mead(&neg, &x, T::lit(0.05), 4000, T::tol(1e-15));
            if !(fy < fx) {
                break;
            }
            x = y;
            fx = fy;
        }
        if -fx > best.1 {
            best = ([x[0], x[1], x[2]], -fx);
        }
    }
    (bloch_from_free(&best.0), best.1)
}

/// Best ansatz value over qubit ancilla marginals by direct maximization,
/// used to cross-check the fixed-point iteration.
pub fn bloch_maximize<T: Real>(channel: &KrausChannel<T>, rho_in_a: &DensityMatrix<T>) -> Result<(CMat<T>, EntropyValue<T>)> {
    if channel.input_dim() != 2 {
        return Err(Error::OutOfRange("Bloch parameterization needs a qubit input".into()));
    }
    let obj = AnsatzObjective::new(channel, rho_in_a)?;
    if obj.diverges() {
        return Err(Error::SupportViolation);
    }
    let f = |m: &CMat<T>| obj.value_raw(m).finite().unwrap_or(T::zero());
    let (m, v) = maximize_over_bloch(&f);
    Ok((m, EntropyValue::Finite(v)))
}

/// Outcome of [`solve_ansatz`].
#[derive(Debug, Clone)]
pub struct AnsatzSolution<T: Real> {
    pub state: AnsatzState<T>,
    pub value: EntropyValue<T>,
    pub fixed_point_value: EntropyValue<T>,
    /// Direct Bloch maximum (qubit inputs only).
    pub bloch_value: Option<EntropyValue<T>>,
    pub converged: bool,
}

/// Ansatz `J₁`: `+∞` when divergent, otherwise the better of the fixed point
/// and (for qubits) the direct Bloch maximization.
pub fn solve_ansatz<T: Real>(channel: &KrausChannel<T>, rho_in_a: &DensityMatrix<T>) -> Result<AnsatzSolution<T>> {
    let obj = AnsatzObjective::new(channel, rho_in_a)?;
    let space = TensorSpace::single("W", channel.input_dim())?;
    if obj.diverges() {
        let (rho_w, _) = closed_form_unitary(&DensityMatrix::maximally_mixed(space))?;
        return Ok(AnsatzSolution {
            state: AnsatzState::new(rho_w, channel.clone(), rho_in_a.clone())?,
            value: EntropyValue::Infinite,
            fixed_point_value: EntropyValue::Infinite,
            bloch_value: None,
            converged: true,
        });
    }
    let fp = fixed_point_solve(channel, rho_in_a, T::lit(0.5), 2000, T::tol(1e-10))?;
    let mut state = fp.best.clone();
    let mut value = fp.best_value;
    let mut bloch_value = None;
    if channel.input_dim() == 2 {
        let (m, v) = bloch_maximize(channel, rho_in_a)?;
        bloch_value = Some(v);
        if v > value {
            value = v;
            state = AnsatzState::new(DensityMatrix::trusted(space, m)?, channel.clone(), rho_in_a.clone())?;
        }
    }
    Ok(AnsatzSolution { state, value, fixed_point_value: fp.best_value, bloch_value, converged: fp.converged })
}

/// Best swap-ansatz value for a possibly entangled input, maximizing the
/// full objective over qubit ancilla marginals. The ansatz is not a valid
/// estimator of `J` when `A` is entangled with `Ā`; callers must opt in.
pub fn entangled_swap_optimum<T: Real>(problem: &StmiProblem<T>, unsafe_entangled: bool) -> Result<(CMat<T>, EntropyValue<T>)> {
    if !unsafe_entangled {
        return Err(Error::OutOfRange("the swap ansatz under-estimates J for entangled inputs; pass unsafe_entangled".into()));
    }
    if problem.d_a() != 2 {
        return Err(Error::OutOfRange("Bloch parameterization needs a qubit A".into()));
    }
    let a = problem.a_space().clone();
    let f = |m: &CMat<T>| -> T {
        IsometryCoupling::swap_ansatz(a.clone(), m)
            .and_then(|v| problem.evaluate(&v))
            .map(|e| e.value.finite().unwrap_or(T::zero()))
            .unwrap_or(T::zero())
    };
    let (m, v) = maximize_over_bloch(&f);
    Ok((m, EntropyValue::Finite(v)))
}
