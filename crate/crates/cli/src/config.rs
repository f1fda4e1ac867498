//! Experiment configuration: TOML with one level of sections, or the same
//! schema encoded as JSON.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stmi_core::classical::ClassicalConfig;
use stmi_core::models::{EnvChoice, FloquetParams, MblParams, Method, System};
use stmi_core::variational::OptimizerConfig;

/// Malformed or incomplete configuration, anchored to a line of the source
/// when one can be identified.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path.display(), l, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    StmiChannelSweep,
    StmiTimeSeries,
    VerifyBounds,
    MarkovCheck,
    Classical,
    AppendixC,
    StationarityN2,
}

impl Kind {
    /// Section that must accompany this kind, if any.
    fn section(self) -> Option<&'static str> {
        match self {
            Self::StmiChannelSweep => Some("sweep"),
            Self::StmiTimeSeries => Some("time-series"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepChannel {
    Depolarizing,
    Dephasing,
}

fn default_method() -> Method {
    Method::Ansatz
}

fn default_bloch() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// `J₁` of a single-qubit channel family as a function of `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub channel: SweepChannel,
    pub p: Vec<f64>,
    /// Bloch vector of the input.
    #[serde(default = "default_bloch")]
    pub input: [f64; 3],
    /// Replaces `input` by the tilted pure state `(ε, 0, √(1−ε²))`.
    pub epsilon: Option<f64>,
    #[serde(default = "default_method")]
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Mbl,
    Floquet,
}

/// `J₁(t)` of one site of an MBL or Floquet chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSeriesSection {
    pub model: Model,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub w: Option<f64>,
    pub xi: Option<f64>,
    pub disorder_seed: Option<u64>,
    pub include_three_body: Option<bool>,
    pub g: Option<f64>,
    pub h: Option<f64>,
    pub tau: Option<f64>,
    pub times: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Mixes `ε Id/2` into `|χ(α)⟩⟨χ(α)|`.
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub env: EnvChoice,
    /// Defaults to `L/2`.
    pub site: Option<usize>,
    #[serde(default = "default_method")]
    pub method: Method,
}

impl TimeSeriesSection {
    pub fn system(&self) -> System {
        match self.model {
            Model::Mbl => {
                let d = MblParams::default();
                System::Mbl(MblParams {
                    l: self.l.unwrap_or(d.l),
                    w: self.w.unwrap_or(d.w),
                    xi: self.xi.unwrap_or(d.xi),
                    seed: self.disorder_seed.unwrap_or(d.seed),
                    include_three_body: self.include_three_body.unwrap_or(d.include_three_body),
                })
            }
            Model::Floquet => {
                let d = FloquetParams::default();
                System::Floquet(FloquetParams {
                    l: self.l.unwrap_or(d.l),
                    g: self.g.unwrap_or(d.g),
                    h: self.h.unwrap_or(d.h),
                    tau: self.tau.unwrap_or(d.tau),
                })
            }
        }
    }

    pub fn site(&self) -> usize {
        self.site.unwrap_or(self.system().sites() / 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundSuite {
    Theorem1,
    Superdensity,
}

fn default_bound_suite() -> BoundSuite {
    BoundSuite::Theorem1
}

fn default_bound_instances() -> usize {
    200
}

fn default_optimizer_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default = "default_bound_suite")]
    pub suite: BoundSuite,
    #[serde(default = "default_bound_instances")]
    pub instances: usize,
    /// Runs the full optimizer on every n-th instance; 0 disables it.
    #[serde(default = "default_optimizer_every")]
    pub optimizer_every: usize,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self { suite: default_bound_suite(), instances: default_bound_instances(), optimizer_every: default_optimizer_every() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkovInstance {
    /// `C` evolves on its own and never meets `A`.
    Decoupled,
    /// A random channel on `A C`.
    Scrambling,
}

fn default_markov_instance() -> MarkovInstance {
    MarkovInstance::Decoupled
}

fn default_threshold() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovSection {
    #[serde(default = "default_markov_instance")]
    pub instance: MarkovInstance,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl Default for MarkovSection {
    fn default() -> Self {
        Self { instance: default_markov_instance(), threshold: default_threshold() }
    }
}

fn one() -> usize {
    1
}

fn default_classical_instances() -> usize {
    500
}

fn default_max_alphabet() -> usize {
    5
}

/// Either one instance given explicitly (`p_in` over `A × Ā` row-major and
/// `map` as rows of `M(kl|ij)` with outputs `B × B̄`), or a random suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSection {
    pub p_in: Option<Vec<f64>>,
    pub map: Option<Vec<Vec<f64>>>,
    pub a_dim: Option<usize>,
    #[serde(default = "one")]
    pub abar_dim: usize,
    pub b_dim: Option<usize>,
    #[serde(default = "one")]
    pub bbar_dim: usize,
    #[serde(default = "default_classical_instances")]
    pub instances: usize,
    #[serde(default = "default_max_alphabet")]
    pub max_alphabet: usize,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        Self {
            p_in: None,
            map: None,
            a_dim: None,
            abar_dim: 1,
            b_dim: None,
            bbar_dim: 1,
            instances: default_classical_instances(),
            max_alphabet: default_max_alphabet(),
        }
    }
}

fn default_epsilons() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendixCSection {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Also runs the unrestricted optimizer at each `ε`.
    #[serde(default)]
    pub variational: bool,
}

impl Default for AppendixCSection {
    fn default() -> Self {
        Self { epsilons: default_epsilons(), variational: false }
    }
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaritySection {
    #[serde(default = "ten")]
    pub instances: usize,
}

impl Default for StationaritySection {
    fn default() -> Self {
        Self { instances: ten() }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("stmi-out")
}

/// One experiment. `seed` is the master seed and overrides the optimizer
/// seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Exit with status 3 when any optimizer run did not converge.
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default, rename = "classical-optimizer")]
    pub classical_optimizer: ClassicalConfig,
    pub sweep: Option<SweepSection>,
    #[serde(rename = "time-series")]
    pub time_series: Option<TimeSeriesSection>,
    pub bounds: Option<BoundsSection>,
    pub markov: Option<MarkovSection>,
    pub classical: Option<ClassicalSection>,
    #[serde(rename = "appendix-c")]
    pub appendix_c: Option<AppendixCSection>,
    pub stationarity: Option<StationaritySection>,
}

/// 1-based line holding byte `offset`.
fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// First line that assigns `key`, as `key = …` or `"key": …`.
fn line_of(src: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    src.lines().position(|l| {
        let t = l.trim_start();
        let rest = t.strip_prefix(key).or_else(|| t.strip_prefix(quoted.as_str()));
        rest.is_some_and(|r| {
            let r = r.trim_start();
            r.starts_with('=') || r.starts_with(':')
        })
    })
    .map(|i| i + 1)
}

/// First line of a `[section]` header or a `"section":` key.
fn line_of_section(src: &str, section: &str) -> Option<usize> {
    let header = format!("[{section}]");
    src.lines().position(|l| l.trim() == header).map(|i| i + 1).or_else(|| line_of(src, section))
}

fn is_json(path: &Path, src: &str) -> bool {
    path.extension().is_some_and(|e| e == "json") || src.trim_start().starts_with('{')
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError { path: path.into(), line: None, message: e.to_string() })?;
        Self::parse(&src, path)
    }

    /// Parses and validates; `path` only labels errors and picks the
    /// encoding.
    pub fn parse(src: &str, path: &Path) -> Result<Self, ConfigError> {
        let err = |line: Option<usize>, message: String| ConfigError { path: path.into(), line, message };
        let mut cfg: Self = if is_json(path, src) {
            serde_json::from_str(src).map_err(|e| err(Some(e.line()), e.to_string()))?
        } else {
            toml::from_str(src).map_err(|e| {
                let line = e.span().map(|s| line_at(src, s.start));
                err(line, e.message().to_string())
            })?
        };
        cfg.optimizer.seed = cfg.seed;
        cfg.classical_optimizer.seed = cfg.seed;
        cfg.validate().map_err(|(key, msg)| err(line_of(src, key).or_else(|| line_of_section(src, key)), msg))?;
        Ok(cfg)
    }

    /// Checks kind-specific requirements; returns the offending key.
    fn validate(&self) -> Result<(), (&'static str, String)> {
        if let Some(s) = self.kind.section() {
            let present = match self.kind {
                Kind::StmiChannelSweep => self.sweep.is_some(),
                Kind::StmiTimeSeries => self.time_series.is_some(),
                _ => true,
            };
            if !present {
                return Err(("kind", format!("kind {:?} requires a [{s}] section", self.kind)));
            }
        }
        self.optimizer.validate().map_err(|e| ("optimizer", e.to_string()))?;
        if let Some(s) = &self.sweep {
            if s.p.is_empty() {
                return Err(("p", "p must list at least one value".into()));
            }
            if s.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(("p", "every p must lie in [0, 1]".into()));
            }
            if let Some(e) = s.epsilon {
                if !(e > 0.0 && e < 1.0) {
                    return Err(("epsilon", "epsilon must lie in (0, 1)".into()));
                }
            }
            if s.input.iter().map(|x| x * x).sum::<f64>() > 1.0 + 1e-12 {
                return Err(("input", "Bloch vector longer than 1".into()));
            }
        }
        if let Some(t) = &self.time_series {
            if t.times.is_empty() || t.alpha.is_empty() {
                return Err(("times", "times and alpha must be non-empty".into()));
            }
            if t.times.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(("times", "times must be finite and non-negative".into()));
            }
            if t.model == Model::Floquet && t.times.iter().any(|x| x.fract() != 0.0) {
                return Err(("times", "Floquet times count whole periods".into()));
            }
            if let Some(e) = t.epsilon {
                if !(0.0..=1.0).contains(&e) {
                    return Err(("epsilon", "epsilon must lie in [0, 1]".into()));
                }
            }
            let system = t.system();
            match &system {
                System::Mbl(p) => p.validate(),
                System::Floquet(p) => p.validate(),
            }
            .map_err(|e| ("L", e.to_string()))?;
            if t.site() >= system.sites() {
                return Err(("site", format!("site {} outside chain of length {}", t.site(), system.sites())));
            }
        }
        if let Some(c) = &self.classical {
            if c.p_in.is_some() != c.map.is_some() {
                return Err(("p_in", "p_in and map must be given together".into()));
            }
            if c.p_in.is_some() && (c.a_dim.is_none() || c.b_dim.is_none()) {
                return Err(("p_in", "an explicit instance needs a_dim and b_dim".into()));
            }
            if c.max_alphabet < 2 {
                return Err(("max_alphabet", "max_alphabet must be at least 2".into()));
            }
        }
        if let Some(a) = &self.appendix_c {
            if a.epsilons.len() < 2 {
                return Err(("epsilons", "a fit needs at least two epsilons".into()));
            }
            if a.epsilons.iter().any(|e| !(*e > 0.0 && *e <= 0.1)) {
                return Err(("epsilons", "epsilons must lie in (0, 0.1]".into()));
            }
        }
        Ok(())
    }
}
