//! Classical STMI: stochastic maps, the KL objective over classical
//! couplings, and the classical correlation and response bounds.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::EntropyValue;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::space::TensorSpace;

/// Normalization tolerance for distributions and map columns.
pub const TAU_NORM: f64 = 1e-12;

/// Probability vector over the product alphabet of `space`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T: Real> {
    space: TensorSpace,
    probs: Vec<T>,
}

impl<T: Real> Distribution<T> {
    pub fn new(space: TensorSpace, probs: Vec<T>) -> Result<Self> {
        if probs.len() != space.total_dim() {
            return Err(Error::DimensionMismatch { expected: space.total_dim(), found: probs.len() });
        }
        if probs.iter().any(|&p| p < T::zero()) {
            return Err(Error::InvalidStochastic("negative probability".into()));
        }
        let total = probs.iter().fold(T::zero(), |a, &b| a + b);
        if (total - T::one()).abs() > T::tol(TAU_NORM) {
            return Err(Error::BadTrace(total.as_f64()));
        }
        Ok(Self { space, probs })
    }

    pub fn uniform(space: TensorSpace) -> Self {
        let d = space.total_dim();
        Self { space, probs: vec![T::one() / T::lit(d as f64); d] }
    }

    /// Dirichlet(1) draw.
    pub fn random<R: Rng + ?Sized>(space: TensorSpace, rng: &mut R) -> Self {
        let probs = dirichlet::<T, _>(space.total_dim(), rng);
        Self { space, probs }
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// Marginal on `keep`, in the order of `self.space`.
    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let mut pos = self.space.positions(keep)?;
        pos.sort_unstable();
        let dims = self.space.dims();
        let strides = linalg::strides(&dims);
        let sub = self.space.select(&pos);
        let sub_strides = linalg::strides(&sub.dims());
        let mut out = vec![T::zero(); sub.total_dim()];
        for (idx, &p) in self.probs.iter().enumerate() {
            let mut j = 0;
            for (s, &q) in pos.iter().enumerate() {
                j += (idx / strides[q]) % dims[q] * sub_strides[s];
            }
            out[j] += p;
        }
        Ok(Self { space: sub, probs: out })
    }

    /// Same distribution with factors in the order given by `order`.
    pub fn reorder<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let perm = self.space.positions(order)?;
        if perm.len() != self.space.len() {
            return Err(Error::BadPartition);
        }
        let map = linalg::permutation_map(&self.space.dims(), &perm);
        let probs = map.iter().map(|&old| self.probs[old]).collect();
        Ok(Self { space: self.space.select(&perm), probs })
    }

    pub fn entropy(&self) -> T {
        self.probs.iter().filter(|&&p| p > T::zero()).fold(T::zero(), |a, &p| a - p * p.ln())
    }
}

fn dirichlet<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1) + 1e-300).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| T::lit(x / s)).collect()
}

/// Column-stochastic transfer matrix `M(j|i)`, indexed `[output][input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMap<T: Real> {
    input: TensorSpace,
    output: TensorSpace,
    matrix: DMatrix<T>,
}

impl<T: Real> StochasticMap<T> {
    pub fn new(input: TensorSpace, output: TensorSpace, matrix: DMatrix<T>) -> Result<Self> {
        if matrix.nrows() != output.total_dim() || matrix.ncols() != input.total_dim() {
            return Err(Error::DimensionMismatch { expected: output.total_dim() * input.total_dim(), found: matrix.len() });
        }
        for c in 0..matrix.ncols() {
            let col = matrix.column(c);
            if col.iter().any(|&x| x < T::zero()) {
                return Err(Error::InvalidStochastic("negative transition probability".into()));
            }
            if (col.sum() - T::one()).abs() > T::tol(TAU_NORM) {
                return Err(Error::InvalidStochastic("column does not sum to one".into()));
            }
        }
        Ok(Self { input, output, matrix })
    }

    pub fn identity(space: TensorSpace) -> Self {
        let d = space.total_dim();
        Self { input: space.clone(), output: space, matrix: DMatrix::identity(d, d) }
    }

    /// Every input is mapped to `fixed`.
    pub fn constant(input: TensorSpace, fixed: &Distribution<T>) -> Self {
        let d = input.total_dim();
        let col = nalgebra::DVector::from_column_slice(fixed.probs());
        let matrix = DMatrix::from_fn(fixed.probs().len(), d, |r, _| col[r]);
        Self { input, output: fixed.space().clone(), matrix }
    }

    /// Columns drawn from Dirichlet(1).
    pub fn random<R: Rng + ?Sized>(input: TensorSpace, output: TensorSpace, rng: &mut R) -> Self {
        let (din, dout) = (input.total_dim(), output.total_dim());
        let mut matrix = DMatrix::zeros(dout, din);
        for c in 0..din {
            for (r, p) in dirichlet::<T, _>(dout, rng).into_iter().enumerate() {
                matrix[(r, c)] = p;
            }
        }
        Self { input, output, matrix }
    }

    pub fn input(&self) -> &TensorSpace {
        &self.input
    }

    pub fn output(&self) -> &TensorSpace {
        &self.output
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn apply(&self, p: &Distribution<T>) -> Result<Distribution<T>> {
        if !p.space().same_shape(&self.input) {
            return Err(Error::SpaceMismatch(format!("{} vs {}", p.space(), self.input)));
        }
        let v = &self.matrix * nalgebra::DVector::from_column_slice(p.probs());
        Ok(Distribution { space: self.output.clone(), probs: v.iter().copied().collect() })
    }

    /// Same map with input and output factors reordered.
    pub fn reorder<S: AsRef<str>>(&self, input_order: &[S], output_order: &[S]) -> Result<Self> {
        let pin = self.input.positions(input_order)?;
        let pout = self.output.positions(output_order)?;
        if pin.len() != self.input.len() || pout.len() != self.output.len() {
            return Err(Error::BadPartition);
        }
        let min = linalg::permutation_map(&self.input.dims(), &pin);
        let mout = linalg::permutation_map(&self.output.dims(), &pout);
        let matrix = DMatrix::from_fn(mout.len(), min.len(), |r, c| self.matrix[(mout[r], min[c])]);
        Ok(Self { input: self.input.select(&pin), output: self.output.select(&pout), matrix })
    }
}

/// `Σ p log(p/q)`, `+∞` when `p` charges a `q`-null symbol.
pub fn kl_divergence<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<EntropyValue<T>> {
    if !p.space().same_shape(q.space()) {
        return Err(Error::SpaceMismatch(format!("{} vs {}", p.space(), q.space())));
    }
    Ok(kl_raw(p.probs(), q.probs()))
}

fn kl_raw<T: Real>(p: &[T], q: &[T]) -> EntropyValue<T> {
    let mut s = T::zero();
    for (&a, &b) in p.iter().zip(q) {
        if a <= T::zero() {
            continue;
        }
        if b <= T::zero() {
            return EntropyValue::Infinite;
        }
        s += a * (a / b).ln();
    }
    EntropyValue::Finite(s.max(T::zero()))
}

/// Classical STMI instance: `P_in` on `A × Ā` and `M: AĀ → BB̄`, flattened
/// to the response tensor `R(k; q, i) = Σ_lj M(kl|qj) P_in(ij)`.
#[derive(Debug, Clone)]
pub struct ClassicalProblem<T: Real> {
    a_space: TensorSpace,
    b_space: TensorSpace,
    d_a: usize,
    d_b: usize,
    /// `r[(k, q·d_a + i)]`.
    r: DMatrix<T>,
    p_a: Vec<T>,
    p_b0: Vec<T>,
    /// `M̄(k|q) = Σ_lj M(kl|qj) P_Ā(j)`; set when `P_in` factorizes.
    factorized: Option<DMatrix<T>>,
}

impl<T: Real> ClassicalProblem<T> {
    pub fn new(p_in: &Distribution<T>, m: &StochasticMap<T>, a_labels: &[&str], b_labels: &[&str]) -> Result<Self> {
        if !p_in.space().same_shape(m.input()) || p_in.space().labels() != m.input().labels() {
            return Err(Error::SpaceMismatch(format!("{} vs {}", p_in.space(), m.input())));
        }
        let a_pos = p_in.space().positions(a_labels)?;
        let abar: Vec<&str> = {
            let rest = p_in.space().complement_positions(&a_pos);
            rest.iter().map(|&p| p_in.space().labels()[p]).collect()
        };
        let b_pos = m.output().positions(b_labels)?;
        let bbar: Vec<&str> = {
            let rest = m.output().complement_positions(&b_pos);
            rest.iter().map(|&p| m.output().labels()[p]).collect()
        };
        let in_order: Vec<&str> = a_labels.iter().chain(abar.iter()).copied().collect();
        let out_order: Vec<&str> = b_labels.iter().chain(bbar.iter()).copied().collect();
        let p = p_in.reorder(&in_order)?;
        let mm = m.reorder(&in_order, &out_order)?;
        let a_space = p.space().subspace(a_labels)?;
        let b_space = mm.output().subspace(b_labels)?;
        let (d_a, d_b) = (a_space.total_dim(), b_space.total_dim());
        let d_abar = p.probs().len() / d_a;
        let d_bbar = mm.output().total_dim() / d_b;

        let mut r = DMatrix::zeros(d_b, d_a * d_a);
        for k in 0..d_b {
            for q in 0..d_a {
                for i in 0..d_a {
                    let mut s = T::zero();
                    for l in 0..d_bbar {
                        for j in 0..d_abar {
                            s += mm.matrix()[(k * d_bbar + l, q * d_abar + j)] * p.probs()[i * d_abar + j];
                        }
                    }
                    r[(k, q * d_a + i)] = s;
                }
            }
        }
        let p_a: Vec<T> = (0..d_a).map(|i| (0..d_abar).fold(T::zero(), |s, j| s + p.probs()[i * d_abar + j])).collect();
        let p_b0: Vec<T> = (0..d_b).map(|k| (0..d_a).fold(T::zero(), |s, i| s + r[(k, i * d_a + i)])).collect();

        let p_abar: Vec<T> = (0..d_abar).map(|j| (0..d_a).fold(T::zero(), |s, i| s + p.probs()[i * d_abar + j])).collect();
        let factorizes = (0..d_a).all(|i| (0..d_abar).all(|j| (p.probs()[i * d_abar + j] - p_a[i] * p_abar[j]).abs() <= T::tol(TAU_NORM)));
        let factorized = factorizes.then(|| {
            DMatrix::from_fn(d_b, d_a, |k, q| {
                let mut s = T::zero();
                for l in 0..d_bbar {
                    for j in 0..d_abar {
                        s += mm.matrix()[(k * d_bbar + l, q * d_abar + j)] * p_abar[j];
                    }
                }
                s
            })
        });
        Ok(Self { a_space, b_space, d_a, d_b, r, p_a, p_b0, factorized })
    }

    pub fn a_space(&self) -> &TensorSpace {
        &self.a_space
    }

    pub fn b_space(&self) -> &TensorSpace {
        &self.b_space
    }

    pub fn p_a(&self) -> &[T] {
        &self.p_a
    }

    pub fn p_b0(&self) -> &[T] {
        &self.p_b0
    }

    pub fn is_factorized(&self) -> bool {
        self.factorized.is_some()
    }

    /// Payoff `c(q, i) = Σ_k R log(R / (P_A(i) P_B,0(k)))` of sending `i` to `q`.
    pub fn payoff(&self, q: usize, i: usize) -> EntropyValue<T> {
        let mut s = T::zero();
        for k in 0..self.d_b {
            let r = self.r[(k, q * self.d_a + i)];
            if r <= T::zero() {
                continue;
            }
            let den = self.p_a[i] * self.p_b0[k];
            if den <= T::zero() {
                return EntropyValue::Infinite;
            }
            s += r * (r / den).ln();
        }
        EntropyValue::Finite(s)
    }

    /// Reduced objective for a map `K(q|i)` given as `[q][i]`.
    pub fn reduced_value(&self, k: &DMatrix<T>) -> EntropyValue<T> {
        let mut s = T::zero();
        for i in 0..self.d_a {
            for q in 0..self.d_a {
                let w = k[(q, i)];
                if w <= T::zero() {
                    continue;
                }
                match self.payoff(q, i) {
                    EntropyValue::Infinite => return EntropyValue::Infinite,
                    EntropyValue::Finite(c) => s += w * c,
                }
            }
        }
        EntropyValue::Finite(s.max(T::zero()))
    }

    /// Closed-form optimum `Σ_i max_q c(q, i)` and its maximizer `q(i)`.
    pub fn closed_form(&self) -> (EntropyValue<T>, Vec<usize>) {
        let mut total = EntropyValue::Finite(T::zero());
        let mut choice = Vec::with_capacity(self.d_a);
        for i in 0..self.d_a {
            let mut best = (0, self.payoff(0, i));
            for q in 1..self.d_a {
                let c = self.payoff(q, i);
                if c > best.1 {
                    best = (q, c);
                }
            }
            choice.push(best.0);
            total = match (total, best.1) {
                (EntropyValue::Finite(a), EntropyValue::Finite(b)) => EntropyValue::Finite(a + b),
                _ => EntropyValue::Infinite,
            };
        }
        (total.max(EntropyValue::Finite(T::zero())), choice)
    }

    /// Brute force over every deterministic `q(i)`; `|A| ≤ 6`.
    pub fn deterministic_search(&self) -> Result<EntropyValue<T>> {
        if self.d_a > 6 {
            return Err(Error::TooLarge(self.d_a));
        }
        let n = self.d_a.pow(self.d_a as u32);
        let mut best = EntropyValue::Finite(T::zero());
        for code in 0..n {
            let mut k = DMatrix::zeros(self.d_a, self.d_a);
            let mut c = code;
            for i in 0..self.d_a {
                k[(c % self.d_a, i)] = T::one();
                c /= self.d_a;
            }
            best = best.max(self.reduced_value(&k));
        }
        Ok(best)
    }

    /// `max_q KL(M̄(·|q) ‖ P_B,0)`, available for factorized inputs.
    pub fn factorized_value(&self) -> Option<EntropyValue<T>> {
        let mbar = self.factorized.as_ref()?;
        let mut best = EntropyValue::Finite(T::zero());
        for q in 0..self.d_a {
            let col: Vec<T> = mbar.column(q).iter().copied().collect();
            best = best.max(kl_raw(&col, &self.p_b0));
        }
        Some(best)
    }

    /// Exponentiated-gradient ascent on the columns of `K(q|i)` in the
    /// reduced form, from a Dirichlet(1) start.
    pub fn mirror_ascent_reduced<R: Rng + ?Sized>(&self, cfg: &ClassicalConfig, rng: &mut R) -> (EntropyValue<T>, DMatrix<T>, bool) {
        let d = self.d_a;
        let mut k = DMatrix::from_fn(d, d, |_, _| T::zero());
        for i in 0..d {
            for (q, p) in dirichlet::<T, _>(d, rng).into_iter().enumerate() {
                k[(q, i)] = p;
            }
        }
        let pay: Vec<EntropyValue<T>> = (0..d * d).map(|x| self.payoff(x / d, x % d)).collect();
        if pay.iter().any(|c| !c.is_finite()) {
            return (EntropyValue::Infinite, k, true);
        }
        // per-column gradient c(q, i)/P_A(i), matching the full-form scaling
        let c = DMatrix::from_fn(d, d, |q, i| {
            let pa = self.p_a[i];
            let x = pay[q * d + i].finite().unwrap_or(T::zero());
            if pa > T::zero() { x / pa } else { T::zero() }
        });
        let eta = T::lit(cfg.step);
        let mut converged = false;
        for _ in 0..cfg.max_iters {
            let mut change = T::zero();
            for i in 0..d {
                let top = (0..d).fold(c[(0, i)], |a, q| a.max(c[(q, i)]));
                let w: Vec<T> = (0..d).map(|q| k[(q, i)] * (eta * (c[(q, i)] - top)).exp()).collect();
                let s = w.iter().fold(T::zero(), |a, &b| a + b);
                for q in 0..d {
                    let nv = w[q] / s;
                    change = change.max((nv - k[(q, i)]).abs());
                    k[(q, i)] = nv;
                }
            }
            if change < T::lit(cfg.tol) {
                converged = true;
                break;
            }
        }
        (self.reduced_value(&k), k, converged)
    }

    /// Joint `P_BW` for a general coupling `K(q p|i)` stored as `[(q·d_w + p)][i]`.
    pub fn full_joint(&self, k: &DMatrix<T>, d_w: usize) -> DMatrix<T> {
        let d = self.d_a;
        DMatrix::from_fn(self.d_b, d_w, |kk, p| {
            let mut s = T::zero();
            for q in 0..d {
                for i in 0..d {
                    s += self.r[(kk, q * d + i)] * k[(q * d_w + p, i)];
                }
            }
            s
        })
    }

    /// `D(P_BW ‖ P_B,0 ⊗ P_W)` for a general coupling.
    pub fn full_value(&self, k: &DMatrix<T>, d_w: usize) -> EntropyValue<T> {
        let joint = self.full_joint(k, d_w);
        let p_w: Vec<T> = (0..d_w).map(|p| joint.column(p).sum()).collect();
        let prod: Vec<T> = (0..self.d_b * d_w).map(|x| self.p_b0[x / d_w] * p_w[x % d_w]).collect();
        let flat: Vec<T> = (0..self.d_b * d_w).map(|x| joint[(x / d_w, x % d_w)]).collect();
        kl_raw(&flat, &prod)
    }

    /// Mirror ascent over general couplings `K(q p|i)` with `|W| = d_w`.
    pub fn mirror_ascent_full<R: Rng + ?Sized>(&self, d_w: usize, cfg: &ClassicalConfig, rng: &mut R) -> (EntropyValue<T>, DMatrix<T>, bool) {
        let d = self.d_a;
        let rows = d * d_w;
        let mut k = DMatrix::zeros(rows, d);
        for i in 0..d {
            for (x, p) in dirichlet::<T, _>(rows, rng).into_iter().enumerate() {
                k[(x, i)] = p;
            }
        }
        let floor = T::lit(1e-300);
        let mut value = self.full_value(&k, d_w);
        if !value.is_finite() {
            return (value, k, true);
        }
        let mut converged = false;
        for _ in 0..cfg.max_iters {
            let joint = self.full_joint(&k, d_w);
            let p_w: Vec<T> = (0..d_w).map(|p| joint.column(p).sum()).collect();
            let mut next = k.clone();
            for i in 0..d {
                if self.p_a[i] <= T::zero() {
                    continue;
                }
                let mut grad = vec![T::zero(); rows];
                for q in 0..d {
                    for p in 0..d_w {
                        let mut g = T::zero();
                        for kk in 0..self.d_b {
                            let r = self.r[(kk, q * d + i)];
                            if r > T::zero() {
                                g += r * (joint[(kk, p)].max(floor).ln() - self.p_b0[kk].max(floor).ln() - p_w[p].max(floor).ln());
                            }
                        }
                        grad[q * d_w + p] = g / self.p_a[i];
                    }
                }
                let top = grad.iter().fold(grad[0], |a, &b| a.max(b));
                let w: Vec<T> = (0..rows).map(|x| k[(x, i)] * (T::lit(cfg.step) * (grad[x] - top)).exp()).collect();
                let s = w.iter().fold(T::zero(), |a, &b| a + b);
                for x in 0..rows {
                    next[(x, i)] = w[x] / s;
                }
            }
            let nv = self.full_value(&next, d_w);
            k = next;
            let gain = match (nv, value) {
                (EntropyValue::Finite(a), EntropyValue::Finite(b)) => (a - b).abs(),
                _ => T::zero(),
            };
            value = nv;
            if !value.is_finite() || gain < T::lit(cfg.tol) {
                converged = true;
                break;
            }
        }
        (value, k, converged)
    }
}

/// Mirror-ascent settings for the classical optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ClassicalConfig {
    pub step: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Ancilla alphabet of the full-form search; defaults to `|A|²`.
    pub ancilla_dim: Option<usize>,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self { step: 1.0, max_iters: 20000, tol: 1e-13, restarts: 4, seed: 0, ancilla_dim: None }
    }
}

/// Outcome of [`classical_stmi`].
#[derive(Debug, Clone)]
pub struct ClassicalResult<T: Real> {
    /// Best of the closed form and mirror ascent.
    pub value: EntropyValue<T>,
    pub closed_form: EntropyValue<T>,
    pub mirror_value: EntropyValue<T>,
    /// General-coupling search with `|W|` capped; a lower bound on `value`.
    pub full_form_value: EntropyValue<T>,
    pub factorized_value: Option<EntropyValue<T>>,
    /// Optimal coupling `A → A × W` with `W = (q, i)` recording both symbols.
    pub coupling: StochasticMap<T>,
    pub converged: bool,
    /// Set when the full-form search needed every ancilla symbol.
    pub on_cap: bool,
}

/// Deterministic reduced coupling `K(q', (q, i')|i) = δ_{q'q} δ_{i'i} δ_{q, choice(i)}`.
pub fn record_coupling<T: Real>(a_space: &TensorSpace, choice: &[usize]) -> Result<StochasticMap<T>> {
    let d = a_space.total_dim();
    let w = TensorSpace::new(&[("Wq", d), ("Wi", d)])?;
    let out = a_space.concat(&w)?;
    let mut m = DMatrix::zeros(d * d * d, d);
    for (i, &q) in choice.iter().enumerate() {
        m[(q * d * d + q * d + i, i)] = T::one();
    }
    StochasticMap::new(a_space.clone(), out, m)
}

/// Classical STMI of `M: AĀ → BB̄` from `P_in` on `AĀ`.
pub fn classical_stmi<T: Real>(
    p_in: &Distribution<T>,
    m: &StochasticMap<T>,
    a_labels: &[&str],
    b_labels: &[&str],
    cfg: &ClassicalConfig,
) -> Result<ClassicalResult<T>> {
    let problem = ClassicalProblem::new(p_in, m, a_labels, b_labels)?;
    let (closed, choice) = problem.closed_form();
    let d_w = cfg.ancilla_dim.unwrap_or(problem.d_a * problem.d_a);
    let runs: Vec<_> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let red = problem.mirror_ascent_reduced(cfg, &mut rng);
            let full = problem.mirror_ascent_full(d_w, cfg, &mut rng);
            (red, full)
        })
        .collect();
    let mut mirror = EntropyValue::Finite(T::zero());
    let mut full_best = EntropyValue::Finite(T::zero());
    let mut full_k = None;
    let mut converged = true;
    for ((v, _, c), (fv, fk, _)) in runs {
        mirror = mirror.max(v);
        converged &= c;
        if full_k.is_none() || fv > full_best {
            full_best = fv;
            full_k = Some(fk);
        }
    }
    let on_cap = full_k.is_some_and(|k| {
        let joint = problem.full_joint(&k, d_w);
        (0..d_w).all(|p| joint.column(p).sum() > T::lit(1e-9))
    });
    Ok(ClassicalResult {
        value: closed.max(mirror),
        closed_form: closed,
        mirror_value: mirror,
        full_form_value: full_best,
        factorized_value: problem.factorized_value(),
        coupling: record_coupling(problem.a_space(), &choice)?,
        converged,
        on_cap,
    })
}

/// `P_BW(k p) = Σ M(kl|qj) K(qp|i) P_in(ij)` for a coupling `A → A × W`.
pub fn classical_connected<T: Real>(
    p_in: &Distribution<T>,
    m: &StochasticMap<T>,
    k: &StochasticMap<T>,
    a_labels: &[&str],
    b_labels: &[&str],
) -> Result<Distribution<T>> {
    let problem = ClassicalProblem::new(p_in, m, a_labels, b_labels)?;
    let d = problem.d_a;
    if !k.input().same_shape(problem.a_space()) || !k.output().total_dim().is_multiple_of(d) {
        return Err(Error::SpaceMismatch(format!("coupling {} → {}", k.input(), k.output())));
    }
    let a_out = k.output().labels()[..problem.a_space().len()].to_vec();
    if !k.output().subspace(&a_out)?.same_shape(problem.a_space()) {
        return Err(Error::SpaceMismatch("coupling output must start with A".into()));
    }
    let w_labels: Vec<&str> = k.output().labels()[problem.a_space().len()..].to_vec();
    let w_space = k.output().subspace(&w_labels)?;
    let d_w = w_space.total_dim();
    let joint = problem.full_joint(k.matrix(), d_w);
    let probs = (0..problem.d_b * d_w).map(|x| joint[(x / d_w, x % d_w)]).collect();
    Distribution::new(problem.b_space().concat(&w_space)?, probs)
}

/// Joint input-output distribution `P_AB` from the copy coupling.
pub fn input_output_joint<T: Real>(p_in: &Distribution<T>, m: &StochasticMap<T>, a_labels: &[&str], b_labels: &[&str]) -> Result<DMatrix<T>> {
    let problem = ClassicalProblem::new(p_in, m, a_labels, b_labels)?;
    let d = problem.d_a;
    Ok(DMatrix::from_fn(d, problem.d_b, |i, k| problem.r[(k, i * d + i)]))
}

fn mutual_information_2d<T: Real>(joint: &DMatrix<T>) -> T {
    let rows: Vec<T> = (0..joint.nrows()).map(|i| joint.row(i).sum()).collect();
    let cols: Vec<T> = (0..joint.ncols()).map(|j| joint.column(j).sum()).collect();
    let mut s = T::zero();
    for i in 0..joint.nrows() {
        for j in 0..joint.ncols() {
            let p = joint[(i, j)];
            if p > T::zero() {
                s += p * (p / (rows[i] * cols[j])).ln();
            }
        }
    }
    s.max(T::zero())
}

/// Classical input-output mutual information `I(A:B)`.
pub fn input_output_mi<T: Real>(p_in: &Distribution<T>, m: &StochasticMap<T>, a_labels: &[&str], b_labels: &[&str]) -> Result<T> {
    Ok(mutual_information_2d(&input_output_joint(p_in, m, a_labels, b_labels)?))
}

/// Checks a perturbation generator: zero column sums and nonnegative
/// off-diagonals.
pub fn validate_generator<T: Real>(n_a: &DMatrix<T>) -> Result<()> {
    if !n_a.is_square() {
        return Err(Error::InvalidStochastic("generator must be square".into()));
    }
    for c in 0..n_a.ncols() {
        if n_a.column(c).sum().abs() > T::tol(1e-10) {
            return Err(Error::InvalidStochastic("generator column does not sum to zero".into()));
        }
        if (0..n_a.nrows()).any(|r| r != c && n_a[(r, c)] < T::zero()) {
            return Err(Error::InvalidStochastic("negative off-diagonal generator entry".into()));
        }
    }
    Ok(())
}

/// Maximum absolute column sum.
pub fn generator_norm<T: Real>(n_a: &DMatrix<T>) -> T {
    (0..n_a.ncols()).fold(T::zero(), |a, c| a.max(n_a.column(c).iter().fold(T::zero(), |s, x| s + x.abs())))
}

/// Linear response of `⟨O_B⟩` to `P_in → (Id + ε N_A) P_in`.
pub fn classical_response<T: Real>(
    p_in: &Distribution<T>,
    m: &StochasticMap<T>,
    n_a: &DMatrix<T>,
    o_b: &[T],
    a_labels: &[&str],
    b_labels: &[&str],
) -> Result<T> {
    validate_generator(n_a)?;
    let problem = ClassicalProblem::new(p_in, m, a_labels, b_labels)?;
    let d = problem.d_a;
    if n_a.nrows() != d || o_b.len() != problem.d_b {
        return Err(Error::DimensionMismatch { expected: d, found: n_a.nrows() });
    }
    let mut g = T::zero();
    for k in 0..problem.d_b {
        for q in 0..d {
            for i in 0..d {
                g += o_b[k] * n_a[(q, i)] * problem.r[(k, q * d + i)];
            }
        }
    }
    Ok(g)
}

/// Per-instance outcome of [`verify_classical_bounds`].
#[derive(Debug, Clone, Serialize)]
pub struct ClassicalBoundReport {
    pub j: f64,
    pub response: f64,
    /// KL value of the two-symbol response coupling.
    pub response_coupling_value: f64,
    pub response_rhs: f64,
    pub copy_mi: f64,
    pub correlator: f64,
    pub correlation_rhs: f64,
    /// Smallest of `J − D_K`, `D_K − rhs`, `I(A:B) − rhs_c`, `J − I(A:B)`.
    pub min_margin: f64,
}

impl ClassicalBoundReport {
    pub fn passes(&self, slack: f64) -> bool {
        self.min_margin >= -slack
    }
}

/// The two-symbol coupling `K(j0|i) = ½(δ + N/‖N‖)`, `K(j1|i) = ½δ`.
pub fn response_coupling<T: Real>(a_space: &TensorSpace, n_a: &DMatrix<T>) -> Result<StochasticMap<T>> {
    validate_generator(n_a)?;
    let d = a_space.total_dim();
    let norm = generator_norm(n_a);
    let half = T::lit(0.5);
    let mut m = DMatrix::zeros(2 * d, d);
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { T::one() } else { T::zero() };
            let pert = if norm > T::zero() { n_a[(j, i)] / norm } else { T::zero() };
            m[(j * 2, i)] = half * (delta + pert);
            m[(j * 2 + 1, i)] = half * delta;
        }
    }
    StochasticMap::new(a_space.clone(), a_space.concat(&TensorSpace::single("W", 2)?)?, m)
}

/// Checks `J ≥ ⅛(G_R / (‖O_B‖‖N_A‖))²` through the response coupling and
/// `I(A:B) ≥ ½(⟨O_B O_A⟩_c / (‖O_B‖‖O_A‖))²` through the copy coupling.
pub fn verify_classical_bounds<T: Real>(
    p_in: &Distribution<T>,
    m: &StochasticMap<T>,
    n_a: &DMatrix<T>,
    o_a: &[T],
    o_b: &[T],
    a_labels: &[&str],
    b_labels: &[&str],
) -> Result<ClassicalBoundReport> {
    let problem = ClassicalProblem::new(p_in, m, a_labels, b_labels)?;
    let (j, _) = problem.closed_form();
    let j = j.to_f64();
    let response = classical_response(p_in, m, n_a, o_b, a_labels, b_labels)?.as_f64();
    let kmap = response_coupling(problem.a_space(), n_a)?;
    let d_k = problem.full_value(kmap.matrix(), 2).to_f64();
    let norm_n = generator_norm(n_a).as_f64();
    let norm_ob = o_b.iter().fold(0.0f64, |a, x| a.max(x.as_f64().abs()));
    let norm_oa = o_a.iter().fold(0.0f64, |a, x| a.max(x.as_f64().abs()));
    let response_rhs = if norm_n > 0.0 && norm_ob > 0.0 { (response / (norm_ob * norm_n)).powi(2) / 8.0 } else { 0.0 };

    let joint = input_output_joint(p_in, m, a_labels, b_labels)?;
    let copy_mi = mutual_information_2d(&joint).as_f64();
    let d_a = joint.nrows();
    let d_b = joint.ncols();
    if o_a.len() != d_a {
        return Err(Error::DimensionMismatch { expected: d_a, found: o_a.len() });
    }
    let (mut ab, mut ea, mut eb) = (0.0, 0.0, 0.0);
    for i in 0..d_a {
        for k in 0..d_b {
            let p = joint[(i, k)].as_f64();
            ab += p * o_a[i].as_f64() * o_b[k].as_f64();
            ea += p * o_a[i].as_f64();
            eb += p * o_b[k].as_f64();
        }
    }
    let correlator = ab - ea * eb;
    let correlation_rhs = if norm_oa > 0.0 && norm_ob > 0.0 { (correlator / (norm_oa * norm_ob)).powi(2) / 2.0 } else { 0.0 };
    let margins = [j - d_k, d_k - response_rhs, copy_mi - correlation_rhs, j - copy_mi];
    let min_margin = if j.is_infinite() {
        (d_k - response_rhs).min(copy_mi - correlation_rhs)
    } else {
        margins.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(ClassicalBoundReport { j, response, response_coupling_value: d_k, response_rhs, copy_mi, correlator, correlation_rhs, min_margin })
}

/// `I(B:W₁|W₀W₂)` of the record construction with `W₀ = i`, `W₁ = p`,
/// `W₂ = q`, for a general coupling `K(qp|i)` stored as `[(q·d_w + p)][i]`.
pub fn record_conditional_mi<T: Real>(problem: &ClassicalProblem<T>, k: &DMatrix<T>, d_w: usize) -> T {
    let d = problem.d_a;
    let db = problem.d_b;
    // P(k, i, p, q)
    let idx = |kk: usize, i: usize, p: usize, q: usize| ((kk * d + i) * d_w + p) * d + q;
    let mut joint = vec![T::zero(); db * d * d_w * d];
    for kk in 0..db {
        for i in 0..d {
            for p in 0..d_w {
                for q in 0..d {
                    joint[idx(kk, i, p, q)] = problem.r[(kk, q * d + i)] * k[(q * d_w + p, i)];
                }
            }
        }
    }
    let mut s = T::zero();
    for i in 0..d {
        for q in 0..d {
            let p_c: T = (0..db).flat_map(|kk| (0..d_w).map(move |p| (kk, p))).fold(T::zero(), |a, (kk, p)| a + joint[idx(kk, i, p, q)]);
            if p_c <= T::zero() {
                continue;
            }
            for kk in 0..db {
                let p_bc = (0..d_w).fold(T::zero(), |a, p| a + joint[idx(kk, i, p, q)]);
                for p in 0..d_w {
                    let p_wc = (0..db).fold(T::zero(), |a, k2| a + joint[idx(k2, i, p, q)]);
                    let x = joint[idx(kk, i, p, q)];
                    if x > T::zero() {
                        s += x * (x * p_c / (p_bc * p_wc)).ln();
                    }
                }
            }
        }
    }
    s
}

/// Splits `D(P_BW ‖ P_B,0 ⊗ P_W)` into `I(B:W)` and `D(P_B ‖ P_B,0)`.
pub fn classical_decomposition<T: Real>(problem: &ClassicalProblem<T>, k: &DMatrix<T>, d_w: usize) -> (EntropyValue<T>, T, EntropyValue<T>) {
    let joint = problem.full_joint(k, d_w);
    let p_b: Vec<T> = (0..problem.d_b).map(|kk| joint.row(kk).sum()).collect();
    (problem.full_value(k, d_w), mutual_information_2d(&joint), kl_raw(&p_b, &problem.p_b0))
}
