//! Physical model builders: the MBL fixed-point Hamiltonian, the kicked
//! Ising Floquet chain, and single-site STMI time series.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::solve_ansatz;
use crate::channel::{channel_from_unitary, KrausChannel};
use crate::entropy::EntropyValue;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::scalar::{cplx, re, Real};
use crate::space::TensorSpace;
use crate::state::DensityMatrix;
use crate::variational::{Evolution, OptimizerConfig, StmiProblem};

/// Largest chain handled by dense simulation.
pub const MAX_SITES: usize = 12;

fn check_sites(l: usize) -> Result<()> {
    if l < 2 {
        return Err(Error::OutOfRange(format!("chain length {l} below 2")));
    }
    if l > MAX_SITES {
        return Err(Error::TooLarge(1usize << l));
    }
    Ok(())
}

/// `σ³` eigenvalue of site `i` in basis state `s`; site 0 is the most
/// significant bit and bit 0 maps to `+1`.
fn spin(s: usize, i: usize, l: usize) -> f64 {
    if (s >> (l - 1 - i)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MblParams {
    #[serde(rename = "L")]
    pub l: usize,
    pub w: f64,
    pub xi: f64,
    pub seed: u64,
    pub include_three_body: bool,
}

impl Default for MblParams {
    fn default() -> Self {
        Self { l: 8, w: 10.0, xi: 2.0, seed: 0, include_three_body: true }
    }
}

impl MblParams {
    pub fn validate(&self) -> Result<()> {
        check_sites(self.l)?;
        if !(self.w > 0.0) || !(self.xi > 0.0) {
            return Err(Error::OutOfRange("w and xi must be positive".into()));
        }
        Ok(())
    }
}

/// Disorder couplings of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct MblCouplings {
    pub h: Vec<f64>,
    /// `(i, j, J_ij)` for `i < j`, envelope applied.
    pub pairs: Vec<(usize, usize, f64)>,
    /// `(i, j, k, J_ijk)` for `i < j < k`, envelope applied.
    pub triples: Vec<(usize, usize, usize, f64)>,
}

/// Draws `h_i`, then `J̃_ij`, then `J̃_ijk`, all uniform on `[−w, w]`.
pub fn mbl_couplings(p: &MblParams) -> Result<MblCouplings> {
    p.validate()?;
    let l = p.l;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let dist = Uniform::new_inclusive(-p.w, p.w).map_err(|e| Error::OutOfRange(e.to_string()))?;
    let h: Vec<f64> = (0..l).map(|_| dist.sample(&mut rng)).collect();
    let mut pairs = Vec::new();
    for i in 0..l {
        for j in i + 1..l {
            let env = (-((j - i) as f64) / p.xi).exp();
            pairs.push((i, j, env * dist.sample(&mut rng)));
        }
    }
    let mut triples = Vec::new();
    if p.include_three_body {
        for i in 0..l {
            for j in i + 1..l {
                for k in j + 1..l {
                    let env = (-((k - i) as f64) / p.xi).exp();
                    triples.push((i, j, k, env * dist.sample(&mut rng)));
                }
            }
        }
    }
    Ok(MblCouplings { h, pairs, triples })
}

/// Diagonal of the MBL Hamiltonian in the computational basis.
pub fn mbl_energies(p: &MblParams) -> Result<Vec<f64>> {
    let c = mbl_couplings(p)?;
    let l = p.l;
    Ok((0..1usize << l)
        .map(|s| {
            let sp = |i| spin(s, i, l);
            let mut e: f64 = c.h.iter().enumerate().map(|(i, h)| h * sp(i)).sum();
            e += c.pairs.iter().map(|&(i, j, v)| v * sp(i) * sp(j)).sum::<f64>();
            e += c.triples.iter().map(|&(i, j, k, v)| v * sp(i) * sp(j) * sp(k)).sum::<f64>();
            e
        })
        .collect())
}

/// `e^{−iHt}` as a diagonal matrix.
pub fn build_mbl_unitary<T: Real>(p: &MblParams, t: f64) -> Result<CMat<T>> {
    let e = mbl_energies(p)?;
    let phases: Vec<_> = e.iter().map(|x| cplx::<T>((x * t).cos(), -(x * t).sin())).collect();
    Ok(CMat::from_diagonal(&nalgebra::DVector::from_vec(phases)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FloquetParams {
    #[serde(rename = "L")]
    pub l: usize,
    pub g: f64,
    pub h: f64,
    pub tau: f64,
}

impl Default for FloquetParams {
    fn default() -> Self {
        Self { l: 8, g: 0.9045, h: 0.8090, tau: 0.8 }
    }
}

impl FloquetParams {
    pub fn validate(&self) -> Result<()> {
        check_sites(self.l)
    }
}

/// One period `e^{−iτH_x/2} e^{−iτH_z} e^{−iτH_x/2}` with open boundaries.
pub fn build_floquet_unitary<T: Real>(p: &FloquetParams) -> Result<CMat<T>> {
    p.validate()?;
    let l = p.l;
    let theta = p.tau * p.g / 2.0;
    let x = &linalg::paulis::<T>()[0];
    let kick1 = linalg::eye::<T>(2) * re(T::lit(theta.cos())) - x * cplx::<T>(0.0, theta.sin());
    let mut kick = linalg::eye::<T>(1);
    for _ in 0..l {
        kick = linalg::kron(&kick, &kick1);
    }
    let phases: Vec<_> = (0..1usize << l)
        .map(|s| {
            let ising: f64 = (0..l - 1).map(|i| spin(s, i, l) * spin(s, i + 1, l)).sum();
            let field: f64 = (0..l).map(|i| spin(s, i, l)).sum();
            let ph = -p.tau * (ising + p.h * field);
            cplx::<T>(ph.cos(), ph.sin())
        })
        .collect();
    let mut out = kick.clone();
    for (c, ph) in phases.iter().enumerate() {
        let col = out.column(c) * *ph;
        out.set_column(c, &col);
    }
    Ok(out * kick)
}

/// `u^n` by repeated squaring.
pub fn unitary_power<T: Real>(u: &CMat<T>, n: u32) -> CMat<T> {
    let mut result = linalg::eye::<T>(u.nrows());
    let mut base = u.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Single-qubit state `½(Id + a·σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub a: [f64; 3],
}

impl BlochState {
    pub fn new(a: [f64; 3]) -> Result<Self> {
        let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1.0 + 1e-12 {
            return Err(Error::OutOfRange(format!("Bloch vector norm {n} exceeds 1")));
        }
        Ok(Self { a })
    }

    /// `|χ⟩ = cos α|0⟩ + sin α|1⟩`.
    pub fn chi(alpha: f64) -> Self {
        Self { a: [(2.0 * alpha).sin(), 0.0, (2.0 * alpha).cos()] }
    }

    /// `(1 − ε)|χ⟩⟨χ| + ε Id/2`.
    pub fn regularized(alpha: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::OutOfRange(format!("epsilon {epsilon} outside [0, 1]")));
        }
        let c = Self::chi(alpha);
        Ok(Self { a: c.a.map(|x| (1.0 - epsilon) * x) })
    }

    pub fn density<T: Real>(&self, label: &str) -> Result<DensityMatrix<T>> {
        let m = crate::ansatz::bloch_state(&self.a.map(T::lit));
        DensityMatrix::new(TensorSpace::single(label, 2)?, m)
    }
}

/// Initial state of the sites other than `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "seed")]
pub enum EnvChoice {
    AllZero,
    #[default]
    MaximallyMixed,
    /// Haar-random pure product state.
    RandomProduct(u64),
}

impl EnvChoice {
    pub fn density<T: Real>(&self, space: TensorSpace) -> Result<DensityMatrix<T>> {
        match *self {
            Self::AllZero => DensityMatrix::basis(space, 0),
            Self::MaximallyMixed => Ok(DensityMatrix::maximally_mixed(space)),
            Self::RandomProduct(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut psi = linalg::eye::<T>(1);
                for _ in 0..space.len() {
                    let v = linalg::random_isometry::<T, _>(2, 1, &mut rng);
                    psi = linalg::kron(&psi, &v);
                }
                let amps: Vec<_> = psi.iter().copied().collect();
                DensityMatrix::pure(space, &amps)
            }
        }
    }
}

/// Channel `A → B` on one site of an `L`-qubit chain. `env_state` lives on
/// the other `L − 1` sites in increasing order; its labels are ignored.
pub fn effective_single_site_channel<T: Real>(u: &CMat<T>, env_state: &DensityMatrix<T>, site: usize) -> Result<KrausChannel<T>> {
    let l = env_state.space().len() + 1;
    if u.nrows() != 1usize << l || site >= l {
        return Err(Error::DimensionMismatch { expected: 1usize << l, found: u.nrows() });
    }
    let space = TensorSpace::qubits("q", l);
    let labels = space.labels();
    let env_labels: Vec<(&str, usize)> = labels.iter().enumerate().filter(|(i, _)| *i != site).map(|(_, s)| (*s, 2)).collect();
    if env_state.space().dims() != vec![2; l - 1] {
        return Err(Error::SpaceMismatch("environment must be L − 1 qubits".into()));
    }
    let env = env_state.with_space(TensorSpace::new(&env_labels)?)?;
    let a = [labels[site]];
    let ch = channel_from_unitary(u, &space, &env, &a, &a)?.compressed();
    ch.with_spaces(TensorSpace::single("A", 2)?, TensorSpace::single("B", 2)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model")]
pub enum System {
    Mbl(MblParams),
    Floquet(FloquetParams),
}

impl System {
    pub fn sites(&self) -> usize {
        match self {
            Self::Mbl(p) => p.l,
            Self::Floquet(p) => p.l,
        }
    }

    /// Evolution operator at time `t`; Floquet times count whole periods.
    pub fn unitary<T: Real>(&self, t: f64) -> Result<CMat<T>> {
        match self {
            Self::Mbl(p) => build_mbl_unitary(p, t),
            Self::Floquet(p) => {
                if t < 0.0 || t.fract() != 0.0 || t > u32::MAX as f64 {
                    return Err(Error::OutOfRange(format!("Floquet time {t} is not a whole number of periods")));
                }
                Ok(unitary_power(&build_floquet_unitary(p)?, t as u32))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Variational,
    Ansatz,
    Both,
}

/// One row of a time series.
#[derive(Debug, Clone, Serialize)]
pub struct TimePoint {
    pub t: f64,
    pub method: &'static str,
    /// `+∞` on a support violation.
    pub value: f64,
    pub mi_term: f64,
    pub relent_term: f64,
    pub converged: bool,
}

/// `J₁` of one site at each time, sorted by time then method.
pub fn stmi_time_series<T: Real>(
    system: &System,
    initial: &DensityMatrix<T>,
    env: EnvChoice,
    site: usize,
    times: &[f64],
    method: Method,
    cfg: &OptimizerConfig,
) -> Result<Vec<TimePoint>> {
    let l = system.sites();
    check_sites(l)?;
    if site >= l {
        return Err(Error::OutOfRange(format!("site {site} outside chain of length {l}")));
    }
    if initial.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: initial.dim() });
    }
    let rho_a = initial.with_space(TensorSpace::single("A", 2)?)?;
    let env_state = env.density::<T>(TensorSpace::qubits("e", l - 1))?;
    let per_time: Vec<Result<Vec<TimePoint>>> = times
        .par_iter()
        .map(|&t| {
            let u = system.unitary::<T>(t)?;
            let ch = effective_single_site_channel(&u, &env_state, site)?;
            let mut rows = Vec::new();
            if matches!(method, Method::Variational | Method::Both) {
                let problem = StmiProblem::new(&rho_a, &Evolution::Channel(ch.clone()), &["A"], &["B"])?;
                let r = problem.optimize_with_starts(cfg, &[])?;
                rows.push(TimePoint {
                    t,
                    method: "variational",
                    value: r.value.to_f64(),
                    mi_term: r.mi_term.as_f64(),
                    relent_term: r.relent_term.to_f64(),
                    converged: r.converged,
                });
            }
            if matches!(method, Method::Ansatz | Method::Both) {
                let s = solve_ansatz(&ch, &rho_a)?;
                let problem = StmiProblem::new(&rho_a, &Evolution::Channel(ch), &["A"], &["B"])?;
                let (mi, rel) = match s.value {
                    EntropyValue::Infinite => (f64::NAN, f64::INFINITY),
                    _ => {
                        let e = problem.evaluate(&s.state.coupling()?)?;
                        (e.mi_term.as_f64(), e.relent_term.to_f64())
                    }
                };
                rows.push(TimePoint { t, method: "ansatz", value: s.value.to_f64(), mi_term: mi, relent_term: rel, converged: s.converged });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_time {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.method.cmp(b.method)));
    Ok(rows)
}
