//! Acceptance suites, one per numbered criterion.

use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use stmi_core::ansatz::{bloch_state, closed_form_unitary, fixed_point_solve, solve_ansatz};
use stmi_core::linalg::{self, CMat};
use stmi_core::markov::{mirror_operator, petz_bcw, petz_map};
use stmi_core::models::{stmi_time_series, BlochState, EnvChoice, FloquetParams, MblParams, Method, System};
use stmi_core::variational::{gradient, optimize_j1, Evolution, IsometryCoupling, OptimizerConfig, StmiProblem};
use stmi_core::{mutual_information, random_density_matrix, Channel, Density, KrausChannel, TensorSpace};

use crate::config::{AppendixCSection, ExperimentConfig, MarkovInstance};
use crate::experiments::{self, fit_slope, random_qubit_channel};
use crate::output::write_outputs;

/// One labelled numeric check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub what: String,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub elapsed_s: f64,
    pub checks: Vec<Check>,
}

impl SuiteOutcome {
    /// `PASS 03 dephasing-divergence (1.2 s)` followed by failing checks.
    pub fn summary(&self) -> String {
        let mut s = format!("{} {:02} {} ({:.1} s)", if self.passed { "PASS" } else { "FAIL" }, self.id, self.name, self.elapsed_s);
        for c in self.checks.iter().filter(|c| !c.ok) {
            s.push_str(&format!("\n    failed: {}", c.what));
        }
        s
    }
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, ok: bool, what: String) {
        self.0.push(Check { what, ok });
    }

    fn within(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.push((got - want).abs() <= tol, format!("{label}: {got:.6} vs {want:.6} (tol {tol:e})"));
    }

    fn below(&mut self, label: &str, got: f64, limit: f64) {
        self.push(got < limit, format!("{label}: {got:.3e} < {limit:e}"));
    }

    fn runtime(&mut self, elapsed: Duration, limit_s: f64) {
        self.below("runtime [s]", elapsed.as_secs_f64(), limit_s);
    }
}

type SuiteFn = fn(&mut Checks, Instant) -> Result<()>;

const SUITES: [(u32, &str, SuiteFn); 15] = [
    (1, "closed-form-oracle", closed_form_oracle),
    (2, "depolarizing-limit", depolarizing_limit),
    (3, "dephasing-divergence", dephasing_divergence),
    (4, "reduction-to-mi", reduction_to_mi),
    (5, "correlation-bounds", correlation_bounds),
    (6, "superdensity-bounds", superdensity_bounds),
    (7, "gradient-check", gradient_check),
    (8, "ansatz-stationarity", ansatz_stationarity),
    (9, "two-replica-stationarity", two_replica_stationarity),
    (10, "mbl-plateau", mbl_plateau),
    (11, "floquet-decay", floquet_decay),
    (12, "entangled-counterexample", entangled_counterexample),
    (13, "classical-suite", classical_suite),
    (14, "petz-recovery", petz_recovery),
    (15, "determinism", determinism),
];

pub fn names() -> Vec<(u32, &'static str)> {
    SUITES.iter().map(|(i, n, _)| (*i, *n)).collect()
}

/// Resolves a suite by number or name.
pub fn find(key: &str) -> Option<u32> {
    SUITES.iter().find(|(i, n, _)| *n == key || key.parse::<u32>().ok() == Some(*i)).map(|(i, _, _)| *i)
}

/// Runs suite `id`; an error inside the suite is reported as a failed check.
pub fn run(id: u32) -> Option<SuiteOutcome> {
    let (id, name, f) = SUITES.iter().find(|(i, _, _)| *i == id)?;
    let start = Instant::now();
    let mut checks = Checks::default();
    if let Err(e) = f(&mut checks, start) {
        checks.push(false, format!("error: {e:#}"));
    }
    let passed = !checks.0.is_empty() && checks.0.iter().all(|c| c.ok);
    Some(SuiteOutcome { id: *id, name, passed, elapsed_s: start.elapsed().as_secs_f64(), checks: checks.0 })
}

fn qubit(label: &str) -> TensorSpace {
    TensorSpace::single(label, 2).expect("valid label")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unitary_channel(seed: u64) -> Result<Channel> {
    let u = linalg::random_unitary::<f64, _>(2, &mut rng(seed));
    Ok(KrausChannel::from_unitary(qubit("A"), u)?.with_spaces(qubit("A"), qubit("B"))?)
}

fn log_trace_inverse(rho: &Density) -> f64 {
    let inv = linalg::inv_sqrt_support(rho.data(), 1e-14);
    (&inv * &inv).trace().re.ln()
}

fn closed_form_oracle(c: &mut Checks, start: Instant) -> Result<()> {
    let opt = OptimizerConfig::default();
    for seed in 0..3 {
        let rho = random_density_matrix::<f64>(qubit("A"), 10 + seed, 2)?;
        let ch = unitary_channel(20 + seed)?;
        let want = log_trace_inverse(&rho);
        c.within(&format!("ansatz, seed {seed}"), solve_ansatz(&ch, &rho)?.value.to_f64(), want, 1e-3);
        let var = optimize_j1(&rho, &Evolution::Channel(ch), &["A"], &["B"], &opt)?;
        c.within(&format!("variational, seed {seed}"), var.value.to_f64(), want, 1e-3);
    }
    let mixed = Density::maximally_mixed(qubit("A"));
    c.within("maximally mixed, closed form", closed_form_unitary(&mixed)?.1.to_f64(), 4f64.ln(), 1e-12);
    let ch = unitary_channel(30)?;
    c.within("maximally mixed, ansatz", solve_ansatz(&ch, &mixed)?.value.to_f64(), 4f64.ln(), 1e-3);
    let var = optimize_j1(&mixed, &Evolution::Channel(ch), &["A"], &["B"], &opt)?;
    c.within("maximally mixed, variational", var.value.to_f64(), 4f64.ln(), 1e-3);
    c.runtime(start.elapsed(), 5.0);
    Ok(())
}

/// Second- and third-order coefficients of the small-`(1−p)` expansion.
pub fn depolarizing_series(beta: f64, x: f64) -> f64 {
    let a = (-2.0 * beta).exp() * (1.0 + 1.0 / beta.tanh()) * (1.0 + beta + beta / beta.tanh()) * beta.tanh();
    let b = -beta / (beta.sinh() * beta.cosh());
    a * x * x + b * x * x * x
}

fn depolarizing_limit(c: &mut Checks, start: Instant) -> Result<()> {
    let p = 0.999;
    let sol = solve_ansatz(&Channel::depolarizing(p)?, &Density::basis(qubit("A"), 0)?)?;
    let m = sol.state.rho_w.data();
    let beta = (m[(0, 0)].re - m[(1, 1)].re).atanh();
    c.within("beta", beta, -0.72 - 0.68 * (1.0 - p), 0.05);
    let j = sol.value.to_f64();
    let s = depolarizing_series(beta, 1.0 - p);
    c.within("J1 vs series", j, s, 0.05 * s);
    c.runtime(start.elapsed(), 30.0);
    Ok(())
}

fn dephasing_divergence(c: &mut Checks, start: Instant) -> Result<()> {
    let eps = [1e-2f64, 1e-3, 1e-4];
    for p in [0.3, 0.6, 0.9] {
        let ch = Channel::dephasing(p)?;
        let mut pts = Vec::new();
        for e in eps {
            let rho = Density::new(qubit("A"), bloch_state(&[e, 0.0, (1.0 - e * e).sqrt()]))?;
            pts.push((-e.ln(), solve_ansatz(&ch, &rho)?.value.to_f64()));
        }
        c.within(&format!("slope at p = {p}"), fit_slope(&pts), 2.0, 0.1);
    }
    c.runtime(start.elapsed(), 120.0);
    Ok(())
}

fn reduction_to_mi(c: &mut Checks, _: Instant) -> Result<()> {
    let space = TensorSpace::new(&[("A", 2), ("B", 2)])?;
    let opt = OptimizerConfig { restarts: 2, ..OptimizerConfig::default() };
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let rho = random_density_matrix::<f64>(space.clone(), 400 + seed, 1 + seed as usize % 4)?;
        let want = mutual_information(&rho, &["A"], &["B"])?;
        let got = optimize_j1(&rho, &Evolution::Unitary(CMat::identity(4, 4)), &["A"], &["B"], &opt)?.value.to_f64();
        worst = worst.max((got - want).abs());
    }
    c.below("max |J - I(A:B)| over 20 states", worst, 1e-3);
    Ok(())
}

fn correlation_bounds(c: &mut Checks, start: Instant) -> Result<()> {
    let s = experiments::theorem1_suite(200, 5, 10, &OptimizerConfig::default())?;
    c.push(s.violations == 0, format!("{} violations in {} instances", s.violations, s.instances));
    c.push(s.min_margin >= -1e-6, format!("min margin {:.3e} >= -1e-6", s.min_margin));
    c.runtime(start.elapsed(), 300.0);
    Ok(())
}

fn superdensity_bounds(c: &mut Checks, _: Instant) -> Result<()> {
    let s = experiments::superdensity_suite(100, 6)?;
    c.push(s.violations == 0, format!("{} violations in {} instances", s.violations, s.instances));
    c.below("max two-point identity error", s.max_identity_error, 1e-10);
    Ok(())
}

fn gradient_check(c: &mut Checks, _: Instant) -> Result<()> {
    let mut r = rng(7);
    let rho = random_density_matrix::<f64>(qubit("A"), 70, 2)?;
    let ev = Evolution::Channel(random_qubit_channel(3, &mut r)?);
    let v = IsometryCoupling::random(qubit("A"), 4, &mut r)?;
    let g = gradient(&rho, &v, &ev, &["B"])?;
    let p = StmiProblem::new(&rho, &ev, &["A"], &["B"])?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let t = linalg::random_hermitian::<f64, _>(8, &mut r);
        let fd = (p.value_along(&v, &t, h)?.to_f64() - p.value_along(&v, &t, -h)?.to_f64()) / (2.0 * h);
        let an = linalg::trace_product(&t, g.data()).re;
        worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
    }
    c.below("max relative error over 50 directions", worst, 1e-5);
    Ok(())
}

fn ansatz_stationarity(c: &mut Checks, _: Instant) -> Result<()> {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut r = rng(800 + seed);
        let ch = random_qubit_channel(2 + seed as usize % 3, &mut r)?;
        let rho = random_density_matrix::<f64>(qubit("A"), 900 + seed, 2)?;
        let fp = fixed_point_solve(&ch, &rho, 0.5, 5000, 1e-13)?;
        let problem = StmiProblem::new(&rho, &Evolution::Channel(ch), &["A"], &["B"])?;
        worst = worst.max(linalg::frobenius(&problem.gradient(&fp.last.coupling()?)?));
    }
    c.below("max gradient norm at the fixed point", worst, 1e-5);
    Ok(())
}

fn two_replica_stationarity(c: &mut Checks, _: Instant) -> Result<()> {
    let s = experiments::stationarity_suite(10, 9, &OptimizerConfig::default())?;
    c.below("max gradient norm at V1 x V1", s.max_gradient_norm, 1e-5);
    c.below("max |objective/2 - J1|", s.max_half_objective_gap, 1e-6);
    Ok(())
}

fn mbl_plateau(c: &mut Checks, start: Instant) -> Result<()> {
    let sys = System::Mbl(MblParams { l: 8, w: 10.0, xi: 2.0, ..MblParams::default() });
    let opt = OptimizerConfig::default();
    let site = 4;
    for alpha in [0.05f64, 0.1] {
        let rho = BlochState::chi(alpha).density::<f64>("A")?;
        let rows = stmi_time_series(&sys, &rho, EnvChoice::MaximallyMixed, site, &[1e4], Method::Ansatz, &opt)?;
        c.within(&format!("plateau at alpha = {alpha}"), rows[0].value, -2.0 * alpha.ln(), 1.0);
    }
    let rho = BlochState::chi(0.0).density::<f64>("A")?;
    let rows = stmi_time_series(&sys, &rho, EnvChoice::MaximallyMixed, site, &[1e4], Method::Ansatz, &opt)?;
    c.push(rows[0].value == f64::INFINITY, format!("alpha = 0 gives {}", rows[0].value));
    c.runtime(start.elapsed(), 600.0);
    Ok(())
}

fn floquet_decay(c: &mut Checks, _: Instant) -> Result<()> {
    let sys = System::Floquet(FloquetParams { l: 8, g: 0.9045, h: 0.8090, tau: 0.8 });
    let opt = OptimizerConfig::default();
    let times: Vec<f64> = (0..=20).map(f64::from).collect();
    for alpha in [0.0, std::f64::consts::FRAC_PI_8, std::f64::consts::FRAC_PI_4] {
        let rho = BlochState::regularized(alpha, 1e-5)?.density::<f64>("A")?;
        let rows = stmi_time_series(&sys, &rho, EnvChoice::MaximallyMixed, 4, &times, Method::Ansatz, &opt)?;
        let first = rows.iter().find(|r| r.value < 0.05).map(|r| r.t);
        c.push(first.is_some(), format!("alpha = {alpha:.4}: first period below 0.05 is {first:?}"));
    }
    Ok(())
}

fn entangled_counterexample(c: &mut Checks, _: Instant) -> Result<()> {
    let (_, s) = experiments::appendix_c(&AppendixCSection::default(), &OptimizerConfig::default(), 0)?;
    c.within("X_A slope", s.slope_x_a, 1.0, 0.05);
    c.within("swap slope", s.slope_swap, 0.75, 0.05);
    c.within("slope ratio", s.slope_ratio, 4.0 / 3.0, 0.1);
    c.push(s.x_a.iter().zip(&s.swap).all(|(x, w)| x > w), "X_A coupling beats the swap ansatz at every epsilon".into());
    Ok(())
}

fn classical_suite(c: &mut Checks, _: Instant) -> Result<()> {
    let s = experiments::classical_suite(500, 5, 13)?;
    c.push(s.violations == 0, format!("{} response/correlation violations in {}", s.violations, s.instances));
    c.below("max record conditional MI", s.max_record_cmi, 1e-12);
    c.push(s.copy_violations == 0, format!("{} instances with J below the copy-channel MI", s.copy_violations));
    Ok(())
}

fn petz_recovery(c: &mut Checks, _: Instant) -> Result<()> {
    let sp = |f: &[(&str, usize)]| TensorSpace::new(f);
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let ab = random_density_matrix::<f64>(sp(&[("A", 2), ("B", 3)])?, 1400 + seed, 3)?;
        let cc = random_density_matrix::<f64>(sp(&[("C", 2)])?, 1450 + seed, 2)?;
        let abc = ab.tensor(&cc)?;
        let out = petz_map(&abc.partial_trace(&["A", "B"])?, &abc.partial_trace(&["B"])?, &abc.partial_trace(&["B", "C"])?)?;
        worst = worst.max(abc.trace_distance(&out.state)?);
    }
    // Classical chain p(a|b) p(b, c).
    let p_a_given_b = [[0.2, 0.7, 0.5], [0.8, 0.3, 0.5]];
    let p_bc = [[0.1, 0.15], [0.3, 0.05], [0.25, 0.15]];
    let mut probs = vec![0.0; 12];
    for a in 0..2 {
        for b in 0..3 {
            for cc in 0..2 {
                probs[(a * 3 + b) * 2 + cc] = p_a_given_b[a][b] * p_bc[b][cc];
            }
        }
    }
    let abc = Density::diagonal(sp(&[("A", 2), ("B", 3), ("C", 2)])?, &probs)?;
    let out = petz_map(&abc.partial_trace(&["A", "B"])?, &abc.partial_trace(&["B"])?, &abc.partial_trace(&["B", "C"])?)?;
    worst = worst.max(abc.trace_distance(&out.state)?);
    c.below("max trace distance on constructed Markov states", worst, 1e-8);

    let mut r = rng(14);
    let mut mirror: f64 = 0.0;
    for seed in 0..3 {
        let bw = random_density_matrix::<f64>(sp(&[("B", 2), ("W", 2)])?, 1500 + seed, 4)?;
        let b0 = random_density_matrix::<f64>(sp(&[("B", 2)])?, 1510 + seed, 2)?;
        let bc0 = b0.tensor(&random_density_matrix::<f64>(sp(&[("C", 2)])?, 1520 + seed, 2)?)?;
        let bcw = petz_bcw(&bw, &b0, &bc0)?.state;
        for _ in 0..5 {
            let o_bc = linalg::random_hermitian::<f64, _>(4, &mut r);
            let o_w = linalg::random_hermitian::<f64, _>(2, &mut r);
            let lhs = linalg::trace_product(bcw.data(), &linalg::kron(&o_bc, &o_w)).re;
            let rhs = linalg::trace_product(bw.data(), &linalg::kron(&mirror_operator(b0.data(), bc0.data(), &o_bc), &o_w)).re;
            mirror = mirror.max((lhs - rhs).abs());
        }
    }
    let rep = experiments::markov_instance(MarkovInstance::Decoupled, 3, &OptimizerConfig::default(), 1e-3)?;
    if let Some(m) = rep.mirror_operator_check {
        mirror = mirror.max(m);
    }
    c.push(rep.markov, format!("decoupled evolution flagged Markov: {}", rep.markov));
    c.below("max mirror-operator deviation", mirror, 1e-8);
    Ok(())
}

/// Small configuration used by the determinism check.
pub const DETERMINISM_CONFIG: &str = r#"
kind = "stmi-channel-sweep"
seed = 17

[optimizer]
restarts = 2
max_iters = 300

[sweep]
channel = "depolarizing"
p = [0.2, 0.5, 0.8]
input = [0.3, 0.1, 0.8]
method = "both"
"#;

fn run_into(cfg: &ExperimentConfig, dir: &Path) -> Result<(Vec<u8>, Vec<u8>)> {
    let out = experiments::run(cfg)?;
    write_outputs(dir, cfg, &out, Duration::ZERO, rayon::current_num_threads())?;
    Ok((std::fs::read(dir.join("data.csv"))?, std::fs::read(dir.join("report.json"))?))
}

fn determinism(c: &mut Checks, _: Instant) -> Result<()> {
    let cfg = ExperimentConfig::parse(DETERMINISM_CONFIG, Path::new("determinism.toml"))?;
    let tmp = tempfile::tempdir()?;
    let first = run_into(&cfg, &tmp.path().join("a"))?;
    let second = run_into(&cfg, &tmp.path().join("b"))?;
    ensure!(!first.0.is_empty(), "empty data output");
    c.push(first.0 == second.0, "data.csv byte-identical across runs".into());
    c.push(first.1 == second.1, "report.json byte-identical across runs".into());
    Ok(())
}
