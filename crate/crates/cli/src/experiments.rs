//! Experiment bodies shared by `stmi run` and the verification suites.

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use stmi_core::ansatz::{bloch_state, entangled_swap_optimum, solve_ansatz};
use stmi_core::bounds::{superdensity_bound, verify_theorem1, SuperdensityReport, Theorem1Report};
use stmi_core::classical::{
    classical_stmi, input_output_mi, record_conditional_mi, verify_classical_bounds, ClassicalBoundReport, ClassicalConfig,
    ClassicalProblem, Distribution, StochasticMap,
};
use stmi_core::linalg::{self, CMat};
use stmi_core::markov::{markov_check, MarkovReport};
use stmi_core::models::{stmi_time_series, BlochState, Method, System};
use stmi_core::scalar::re;
use stmi_core::variational::{optimize_j1, stationarity_check_n2, Evolution, IsometryCoupling, OptimizerConfig, StmiProblem};
use stmi_core::{random_density_matrix, Channel, Density, EntropyValue, KrausChannel, Observable, TensorSpace};

use crate::config::{
    AppendixCSection, BoundSuite, ClassicalSection, ExperimentConfig, Kind, MarkovInstance, SweepChannel, SweepSection,
    TimeSeriesSection,
};

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: Option<f64>,
    pub alpha_or_p: f64,
    pub seed: u64,
    pub method: String,
    pub j1: f64,
    pub mi_term: f64,
    pub relent_term: f64,
    pub converged: bool,
}

/// Data rows, a JSON report, and whether the embedded assertions held.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub report: Value,
    pub passed: bool,
}

impl RunOutput {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged) && self.report.get("converged").and_then(Value::as_bool).unwrap_or(true)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let opt = &cfg.optimizer;
    match cfg.kind {
        Kind::StmiChannelSweep => {
            let sec = cfg.sweep.as_ref().context("missing [sweep] section")?;
            let rows = channel_sweep(sec, opt, cfg.seed)?;
            let report = json!({ "kind": cfg.kind, "points": rows.len(), "converged": rows.iter().all(|r| r.converged) });
            Ok(RunOutput { rows, report, passed: true })
        }
        Kind::StmiTimeSeries => {
            let sec = cfg.time_series.as_ref().context("missing [time-series] section")?;
            let rows = time_series(sec, opt, cfg.seed)?;
            let report = json!({ "kind": cfg.kind, "points": rows.len(), "site": sec.site(), "system": sec.system() });
            Ok(RunOutput { rows, report, passed: true })
        }
        Kind::VerifyBounds => {
            let sec = cfg.bounds.clone().unwrap_or_default();
            match sec.suite {
                BoundSuite::Theorem1 => {
                    let s = theorem1_suite(sec.instances, cfg.seed, sec.optimizer_every, opt)?;
                    let passed = s.passed();
                    Ok(RunOutput { rows: Vec::new(), report: to_report(cfg.kind, &s)?, passed })
                }
                BoundSuite::Superdensity => {
                    let s = superdensity_suite(sec.instances, cfg.seed)?;
                    let passed = s.passed();
                    Ok(RunOutput { rows: Vec::new(), report: to_report(cfg.kind, &s)?, passed })
                }
            }
        }
        Kind::MarkovCheck => {
            let sec = cfg.markov.clone().unwrap_or_default();
            let rep = markov_instance(sec.instance, cfg.seed, opt, sec.threshold)?;
            let passed = match sec.instance {
                MarkovInstance::Decoupled => decoupled_passes(&rep),
                MarkovInstance::Scrambling => true,
            };
            let mut report = to_report(cfg.kind, &rep)?;
            report["instance"] = json!(sec.instance);
            Ok(RunOutput { rows: Vec::new(), report, passed })
        }
        Kind::Classical => {
            let sec = cfg.classical.clone().unwrap_or_default();
            if sec.p_in.is_some() {
                let report = classical_single(&sec, &cfg.classical_optimizer)?;
                Ok(RunOutput { rows: Vec::new(), report, passed: true })
            } else {
                let s = classical_suite(sec.instances, sec.max_alphabet, cfg.seed)?;
                let passed = s.passed();
                Ok(RunOutput { rows: Vec::new(), report: to_report(cfg.kind, &s)?, passed })
            }
        }
        Kind::AppendixC => {
            let sec = cfg.appendix_c.clone().unwrap_or_default();
            let (rows, s) = appendix_c(&sec, opt, cfg.seed)?;
            let passed = s.passed();
            Ok(RunOutput { rows, report: to_report(cfg.kind, &s)?, passed })
        }
        Kind::StationarityN2 => {
            let n = cfg.stationarity.clone().unwrap_or_default().instances;
            let s = stationarity_suite(n, cfg.seed, opt)?;
            let passed = s.passed();
            Ok(RunOutput { rows: Vec::new(), report: to_report(cfg.kind, &s)?, passed })
        }
    }
}

fn to_report<S: Serialize>(kind: Kind, body: &S) -> Result<Value> {
    let mut v = serde_json::to_value(body)?;
    v["kind"] = json!(kind);
    Ok(v)
}

fn qubit(label: &str) -> TensorSpace {
    TensorSpace::single(label, 2).expect("valid label")
}

/// Per-instance generator: stream `index` of the master seed.
fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Random qubit channel `A → B` with `n_kraus` operators.
pub fn random_qubit_channel<R: Rng>(n_kraus: usize, rng: &mut R) -> Result<Channel> {
    let v = linalg::random_isometry::<f64, _>(2 * n_kraus, 2, rng);
    let kraus: Vec<CMat<f64>> = (0..n_kraus).map(|k| v.rows(2 * k, 2).into_owned()).collect();
    Ok(KrausChannel::new(qubit("A"), qubit("B"), kraus)?)
}

/// `(J₁, I(B:W), S(ρ_B|ρ_B,0))`.
type Terms = (f64, f64, f64);

/// [`Terms`] plus the convergence flag.
type RowTerms = (f64, f64, f64, bool);

/// `J₁` row for the ansatz: the objective terms of its coupling, or `+∞`.
fn ansatz_row(ch: &Channel, rho: &Density) -> Result<RowTerms> {
    let s = solve_ansatz(ch, rho)?;
    if let EntropyValue::Infinite = s.value {
        return Ok((f64::INFINITY, f64::NAN, f64::INFINITY, s.converged));
    }
    let problem = StmiProblem::new(rho, &Evolution::Channel(ch.clone()), &["A"], &["B"])?;
    let e = problem.evaluate(&s.state.coupling()?)?;
    Ok((s.value.to_f64(), e.mi_term, e.relent_term.to_f64(), s.converged))
}

fn variational_row(ch: &Channel, rho: &Density, opt: &OptimizerConfig) -> Result<RowTerms> {
    let r = optimize_j1(rho, &Evolution::Channel(ch.clone()), &["A"], &["B"], opt)?;
    Ok((r.value.to_f64(), r.mi_term, r.relent_term.to_f64(), r.converged))
}

/// Input of a channel sweep.
pub fn sweep_input(sec: &SweepSection) -> Result<Density> {
    let a = match sec.epsilon {
        Some(e) => [e, 0.0, (1.0 - e * e).sqrt()],
        None => sec.input,
    };
    Ok(Density::new(qubit("A"), bloch_state(&a))?)
}

pub fn channel_sweep(sec: &SweepSection, opt: &OptimizerConfig, seed: u64) -> Result<Vec<Row>> {
    let rho = sweep_input(sec)?;
    let per_p: Vec<Result<Vec<Row>>> = sec
        .p
        .par_iter()
        .map(|&p| {
            let ch = match sec.channel {
                SweepChannel::Depolarizing => Channel::depolarizing(p)?,
                SweepChannel::Dephasing => Channel::dephasing(p)?,
            };
            let mut rows = Vec::new();
            let mut push = |method: &str, (j1, mi_term, relent_term, converged): RowTerms| {
                rows.push(Row { t: None, alpha_or_p: p, seed, method: method.into(), j1, mi_term, relent_term, converged });
            };
            if matches!(sec.method, Method::Ansatz | Method::Both) {
                push("ansatz", ansatz_row(&ch, &rho)?);
            }
            if matches!(sec.method, Method::Variational | Method::Both) {
                push("variational", variational_row(&ch, &rho, opt)?);
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_p {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| a.alpha_or_p.total_cmp(&b.alpha_or_p).then(a.method.cmp(&b.method)));
    Ok(rows)
}

/// Initial site state `|χ(α)⟩`, mixed with `ε Id/2` when requested.
pub fn site_state(alpha: f64, epsilon: Option<f64>) -> Result<Density> {
    let b = match epsilon {
        Some(e) => BlochState::regularized(alpha, e)?,
        None => BlochState::chi(alpha),
    };
    Ok(b.density("A")?)
}

pub fn time_series(sec: &TimeSeriesSection, opt: &OptimizerConfig, seed: u64) -> Result<Vec<Row>> {
    let system = sec.system();
    let row_seed = match &system {
        System::Mbl(p) => p.seed,
        System::Floquet(_) => seed,
    };
    let per_alpha: Vec<Result<Vec<Row>>> = sec
        .alpha
        .par_iter()
        .map(|&alpha| {
            let rho = site_state(alpha, sec.epsilon)?;
            let points = stmi_time_series(&system, &rho, sec.env, sec.site(), &sec.times, sec.method, opt)?;
            Ok(points
                .into_iter()
                .map(|p| Row {
                    t: Some(p.t),
                    alpha_or_p: alpha,
                    seed: row_seed,
                    method: p.method.into(),
                    j1: p.value,
                    mi_term: p.mi_term,
                    relent_term: p.relent_term,
                    converged: p.converged,
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_alpha {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| {
        a.alpha_or_p.total_cmp(&b.alpha_or_p).then(a.t.unwrap_or(0.0).total_cmp(&b.t.unwrap_or(0.0))).then(a.method.cmp(&b.method))
    });
    Ok(rows)
}

/// Random `(ρ_in, 𝒩, O_A, O_B)` on single qubits.
pub fn theorem1_instance(seed: u64, index: usize) -> Result<(Density, Evolution<f64>, Observable, Observable)> {
    let mut rng = instance_rng(seed, index);
    let n_kraus = rng.random_range(1..=4);
    let rank = rng.random_range(1..=2);
    let ch = random_qubit_channel(n_kraus, &mut rng)?;
    let rho = random_density_matrix::<f64>(qubit("A"), rng.random(), rank)?;
    let o_a = Observable::new(qubit("A"), linalg::random_hermitian::<f64, _>(2, &mut rng))?;
    let o_b = Observable::new(qubit("B"), linalg::random_hermitian::<f64, _>(2, &mut rng))?;
    Ok((rho, Evolution::Channel(ch), o_a, o_b))
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Summary {
    pub instances: usize,
    pub violations: usize,
    pub min_margin: f64,
    /// Instances where `J` was also optimized.
    pub optimized: usize,
    pub slack: f64,
    pub reports: Vec<Theorem1Report>,
}

impl Theorem1Summary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub const THEOREM1_SLACK: f64 = 1e-6;

pub fn theorem1_suite(instances: usize, seed: u64, optimizer_every: usize, opt: &OptimizerConfig) -> Result<Theorem1Summary> {
    let reports: Vec<Result<Theorem1Report>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let (rho, ev, o_a, o_b) = theorem1_instance(seed, i)?;
            let j = if optimizer_every > 0 && i % optimizer_every == 0 {
                Some(optimize_j1(&rho, &ev, &["A"], &["B"], opt)?.value.to_f64())
            } else {
                None
            };
            Ok(verify_theorem1(&rho, &ev, &o_a, &o_b, j)?)
        })
        .collect();
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let violations = reports.iter().filter(|r| !r.passes(THEOREM1_SLACK)).count();
    let min_margin = reports.iter().map(|r| r.min_margin()).fold(f64::INFINITY, f64::min);
    let optimized = reports.iter().filter(|r| r.j_value.is_some()).count();
    Ok(Theorem1Summary { instances, violations, min_margin, optimized, slack: THEOREM1_SLACK, reports })
}

#[derive(Debug, Clone, Serialize)]
pub struct SuperdensitySummary {
    pub instances: usize,
    pub violations: usize,
    pub min_margin: f64,
    pub max_identity_error: f64,
    pub reports: Vec<SuperdensityReport>,
}

impl SuperdensitySummary {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.max_identity_error < 1e-10
    }
}

/// Random `ρ_in` on `C ⊗ A`, random unitary, traceless `O_A`, and `O_B` on `C`.
pub fn superdensity_instance(seed: u64, index: usize) -> Result<(Density, Evolution<f64>, Observable, Observable)> {
    let mut rng = instance_rng(seed, index);
    let rank = rng.random_range(1..=4);
    let rho = random_density_matrix::<f64>(TensorSpace::new(&[("C", 2), ("A", 2)])?, rng.random(), rank)?;
    let ev = Evolution::Unitary(linalg::random_unitary::<f64, _>(4, &mut rng));
    let h = linalg::random_hermitian::<f64, _>(2, &mut rng);
    let shift = linalg::trace(&h) / re(2.0);
    let o_a = Observable::new(qubit("A"), h - linalg::eye::<f64>(2) * shift)?;
    let o_b = Observable::new(qubit("C"), linalg::random_hermitian::<f64, _>(2, &mut rng))?;
    Ok((rho, ev, o_a, o_b))
}

pub fn superdensity_suite(instances: usize, seed: u64) -> Result<SuperdensitySummary> {
    let reports: Vec<Result<SuperdensityReport>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let (rho, ev, o_a, o_b) = superdensity_instance(seed, i)?;
            Ok(superdensity_bound(&rho, &ev, &o_a, &o_b)?)
        })
        .collect();
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let margin = |r: &SuperdensityReport| r.margin_relent.min(r.margin_mi);
    let violations = reports.iter().filter(|r| margin(r) < -1e-10).count();
    let min_margin = reports.iter().map(margin).fold(f64::INFINITY, f64::min);
    let max_identity_error = reports.iter().map(|r| r.identity_error).fold(0.0, f64::max);
    Ok(SuperdensitySummary { instances, violations, min_margin, max_identity_error, reports })
}

/// `A → B` and a separate `C` for the Markov check; `C` either evolves on
/// its own or is scrambled with `A`.
pub fn markov_instance(kind: MarkovInstance, seed: u64, opt: &OptimizerConfig, threshold: f64) -> Result<MarkovReport> {
    let mut rng = instance_rng(seed, 0);
    let (rho, ch) = match kind {
        MarkovInstance::Decoupled => {
            let u_c = linalg::random_unitary::<f64, _>(2, &mut rng);
            let ch = random_qubit_channel(2, &mut rng)?.tensor(&KrausChannel::from_unitary(qubit("C"), u_c)?)?;
            let rho_a = random_density_matrix::<f64>(qubit("A"), rng.random(), 2)?;
            let rho_c = random_density_matrix::<f64>(qubit("C"), rng.random(), 2)?;
            (rho_a.tensor(&rho_c)?, ch)
        }
        MarkovInstance::Scrambling => {
            let v = linalg::random_isometry::<f64, _>(8, 4, &mut rng);
            let kraus: Vec<CMat<f64>> = (0..2).map(|k| v.rows(4 * k, 4).into_owned()).collect();
            let ac = TensorSpace::new(&[("A", 2), ("C", 2)])?;
            let ch = KrausChannel::new(ac.clone(), TensorSpace::new(&[("B", 2), ("C", 2)])?, kraus)?;
            (random_density_matrix::<f64>(ac, rng.random(), 4)?, ch)
        }
    };
    Ok(markov_check(&rho, &Evolution::Channel(ch), &["A"], &["B"], &["C"], opt, threshold)?)
}

pub fn decoupled_passes(rep: &MarkovReport) -> bool {
    rep.markov
        && rep.petz_reconstruction_error.is_some_and(|e| e < 1e-4)
        && rep.mirror_operator_check.is_some_and(|e| e < 1e-8)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalSummary {
    pub instances: usize,
    pub violations: usize,
    pub min_margin: f64,
    pub max_record_cmi: f64,
    /// Instances where `J` fell below the input-output mutual information.
    pub copy_violations: usize,
    pub reports: Vec<ClassicalBoundReport>,
}

impl ClassicalSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.copy_violations == 0 && self.max_record_cmi < 1e-12
    }
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

pub fn classical_suite(instances: usize, max_alphabet: usize, seed: u64) -> Result<ClassicalSummary> {
    let per: Vec<Result<(ClassicalBoundReport, f64)>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i);
            let da = rng.random_range(2..=max_alphabet);
            let dabar = rng.random_range(1..=2);
            let db = rng.random_range(2..=max_alphabet);
            let input = TensorSpace::new(&[("A", da), ("Abar", dabar)])?;
            let p_in = Distribution::<f64>::random(input.clone(), &mut rng);
            let m = StochasticMap::<f64>::random(input, TensorSpace::single("B", db)?, &mut rng);
            let n = random_generator(da, &mut rng);
            let o_a: Vec<f64> = (0..da).map(|_| rng.random_range(-1.0..1.0)).collect();
            let o_b: Vec<f64> = (0..db).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rep = verify_classical_bounds(&p_in, &m, &n, &o_a, &o_b, &["A"], &["B"])?;
            let problem = ClassicalProblem::new(&p_in, &m, &["A"], &["B"])?;
            let d_w = 3;
            let k = StochasticMap::<f64>::random(TensorSpace::single("A", da)?, TensorSpace::new(&[("A", da), ("W", d_w)])?, &mut rng);
            let cmi = record_conditional_mi(&problem, k.matrix(), d_w).abs();
            Ok((rep, cmi))
        })
        .collect();
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    let violations = per.iter().filter(|(r, _)| !r.passes(1e-9)).count();
    let copy_violations = per.iter().filter(|(r, _)| r.j < r.copy_mi - 1e-9).count();
    let min_margin = per.iter().map(|(r, _)| r.min_margin).fold(f64::INFINITY, f64::min);
    let max_record_cmi = per.iter().map(|(_, c)| *c).fold(0.0, f64::max);
    let reports = per.into_iter().map(|(r, _)| r).collect();
    Ok(ClassicalSummary { instances, violations, min_margin, max_record_cmi, copy_violations, reports })
}

/// One explicitly given classical instance.
pub fn classical_single(sec: &ClassicalSection, cfg: &ClassicalConfig) -> Result<Value> {
    let (Some(p), Some(rows), Some(da), Some(db)) = (&sec.p_in, &sec.map, sec.a_dim, sec.b_dim) else {
        bail!("explicit classical instance needs p_in, map, a_dim and b_dim");
    };
    let input = TensorSpace::new(&[("A", da), ("Abar", sec.abar_dim)])?;
    let output = TensorSpace::new(&[("B", db), ("Bbar", sec.bbar_dim)])?;
    let p_in = Distribution::new(input.clone(), p.clone())?;
    let (nr, nc) = (rows.len(), rows.first().map_or(0, Vec::len));
    if rows.iter().any(|r| r.len() != nc) {
        bail!("map rows have unequal lengths");
    }
    let m = StochasticMap::new(input, output, DMatrix::from_fn(nr, nc, |r, c| rows[r][c]))?;
    let res = classical_stmi(&p_in, &m, &["A"], &["B"], cfg)?;
    let mi = input_output_mi(&p_in, &m, &["A"], &["B"])?;
    Ok(json!({
        "kind": Kind::Classical,
        "j": res.value.to_f64(),
        "closed_form": res.closed_form.to_f64(),
        "mirror_value": res.mirror_value.to_f64(),
        "full_form_value": res.full_form_value.to_f64(),
        "factorized_value": res.factorized_value.map(|v| v.to_f64()),
        "input_output_mi": mi,
        "converged": res.converged,
        "ancilla_on_cap": res.on_cap,
    }))
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct AppendixCSummary {
    pub epsilons: Vec<f64>,
    pub x_a: Vec<f64>,
    pub swap: Vec<f64>,
    pub variational: Option<Vec<f64>>,
    pub slope_x_a: f64,
    pub slope_swap: f64,
    pub slope_ratio: f64,
}

impl AppendixCSummary {
    pub fn passed(&self) -> bool {
        (self.slope_x_a - 1.0).abs() <= 0.05 && (self.slope_swap - 0.75).abs() <= 0.05
    }
}

/// `(1−ε)|Γ⟩⟨Γ| + ε Id/4` on `Ā A` with `|Γ⟩` an EPR pair.
pub fn epr_mixture(epsilon: f64) -> Result<Density> {
    let g = linalg::gamma_vector::<f64>(2);
    let m = (&g * g.adjoint()) * re((1.0 - epsilon) / 2.0) + linalg::eye::<f64>(4) * re(epsilon / 4.0);
    Ok(Density::new(TensorSpace::new(&[("Abar", 2), ("A", 2)])?, m)?)
}

/// `X_A` coupling against the swap ansatz for an entangled input under
/// trivial evolution.
pub fn appendix_c(sec: &AppendixCSection, opt: &OptimizerConfig, seed: u64) -> Result<(Vec<Row>, AppendixCSummary)> {
    let per: Vec<Result<(Terms, Terms, Option<RowTerms>)>> = sec
        .epsilons
        .par_iter()
        .map(|&e| {
            let rho = epr_mixture(e)?;
            let problem = StmiProblem::new(&rho, &Evolution::Unitary(linalg::eye::<f64>(4)), &["A"], &["Abar", "A"])?;
            let x = IsometryCoupling::new(qubit("A"), 1, linalg::paulis::<f64>()[0].clone())?;
            let ex = problem.evaluate(&x)?;
            let jx = (ex.value.to_f64(), ex.mi_term, ex.relent_term.to_f64());
            let (m, _) = entangled_swap_optimum(&problem, true)?;
            let swap = problem.evaluate(&IsometryCoupling::swap_ansatz(qubit("A"), &m)?)?;
            let js = (swap.value.to_f64(), swap.mi_term, swap.relent_term.to_f64());
            let var = if sec.variational {
                let r = problem.optimize_with_starts(opt, &[])?;
                Some((r.value.to_f64(), r.mi_term, r.relent_term.to_f64(), r.converged))
            } else {
                None
            };
            Ok((jx, js, var))
        })
        .collect();
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (&e, (jx, js, var)) in sec.epsilons.iter().zip(&per) {
        let (j1, mi_term, relent_term) = *js;
        rows.push(Row { t: None, alpha_or_p: e, seed, method: "swap".into(), j1, mi_term, relent_term, converged: true });
        let (j1, mi_term, relent_term) = *jx;
        rows.push(Row { t: None, alpha_or_p: e, seed, method: "x-a".into(), j1, mi_term, relent_term, converged: true });
        if let Some((j, mi, rel, conv)) = var {
            rows.push(Row { t: None, alpha_or_p: e, seed, method: "variational".into(), j1: *j, mi_term: *mi, relent_term: *rel, converged: *conv });
        }
    }
    rows.sort_by(|a, b| b.alpha_or_p.total_cmp(&a.alpha_or_p).then(a.method.cmp(&b.method)));
    let logs: Vec<f64> = sec.epsilons.iter().map(|e| -e.ln()).collect();
    let x_a: Vec<f64> = per.iter().map(|p| p.0 .0).collect();
    let swap: Vec<f64> = per.iter().map(|p| p.1 .0).collect();
    let pts = |ys: &[f64]| logs.iter().copied().zip(ys.iter().copied()).collect::<Vec<_>>();
    let slope_x_a = fit_slope(&pts(&x_a));
    let slope_swap = fit_slope(&pts(&swap));
    let variational = if sec.variational { Some(per.iter().map(|p| p.2.map_or(f64::NAN, |v| v.0)).collect()) } else { None };
    let summary = AppendixCSummary {
        epsilons: sec.epsilons.clone(),
        x_a,
        swap,
        variational,
        slope_x_a,
        slope_swap,
        slope_ratio: slope_x_a / slope_swap,
    };
    Ok((rows, summary))
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaritySummary {
    pub instances: usize,
    pub max_gradient_norm: f64,
    pub max_half_objective_gap: f64,
    pub gradient_norms: Vec<f64>,
}

impl StationaritySummary {
    pub fn passed(&self) -> bool {
        self.max_gradient_norm < 1e-5 && self.max_half_objective_gap < 1e-6
    }
}

/// Two replicas at `V₁ ⊗ V₁` for pure qubit inputs through random
/// non-unitary channels.
pub fn stationarity_suite(instances: usize, seed: u64, opt: &OptimizerConfig) -> Result<StationaritySummary> {
    let per: Vec<Result<(f64, f64)>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i);
            let n_kraus = rng.random_range(2..=4);
            let ch = random_qubit_channel(n_kraus, &mut rng)?;
            let rho = random_density_matrix::<f64>(qubit("A"), rng.random(), 1)?;
            let ev = Evolution::Channel(ch);
            let r = optimize_j1(&rho, &ev, &["A"], &["B"], opt)?;
            let check = stationarity_check_n2(&rho, &ev, &["B"], &r.coupling)?;
            Ok((check.gradient_norm, (check.half_objective.to_f64() - r.value.to_f64()).abs()))
        })
        .collect();
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(StationaritySummary {
        instances,
        max_gradient_norm: per.iter().map(|p| p.0).fold(0.0, f64::max),
        max_half_objective_gap: per.iter().map(|p| p.1).fold(0.0, f64::max),
        gradient_norms: per.iter().map(|p| p.0).collect(),
    })
}
