//! TOML run configuration. Every section is optional; commands that need one
//! error out when it is missing. Unknown keys are rejected so typos surface
//! instead of silently falling back to defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cilm::{mcmc::PriorSpec, SparkSpec, SpatialScenario};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub simulate: Option<SimulateSection>,
    pub cluster: Option<ClusterSection>,
    pub fit: Option<FitSection>,
    pub assess: Option<AssessSection>,
    pub forecast: Option<ForecastSection>,
    pub bench: Option<BenchSection>,
    pub study: Option<StudySection>,
    pub ingest: Option<IngestSection>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Study scenario slugs in canonical order: one homogeneous layout and the
/// clustered layouts over K in {3, 5, 8} at low and high spread.
pub const STUDY_SCENARIOS: [&str; 7] = [
    "csr", "lowvar_k3", "lowvar_k5", "lowvar_k8", "highvar_k3", "highvar_k5", "highvar_k8",
];

pub const LOW_VARIANCE: f64 = 3.0;
pub const HIGH_VARIANCE: f64 = 8.0;

pub fn scenario_from_slug(slug: &str) -> Result<SpatialScenario> {
    let clustered = |prefix: &str, variance: f64| -> Option<SpatialScenario> {
        let k: usize = slug.strip_prefix(prefix)?.parse().ok()?;
        Some(SpatialScenario::clustered(k, variance))
    };
    if slug == "csr" {
        return Ok(SpatialScenario::csr());
    }
    clustered("lowvar_k", LOW_VARIANCE)
        .or_else(|| clustered("highvar_k", HIGH_VARIANCE))
        .ok_or_else(|| {
            anyhow::anyhow!(
                "unknown scenario {slug:?}; expected csr, lowvar_k<K> or highvar_k<K>"
            )
        })
}

/// Fit target: the full-population model or a composite model with the given
/// between-cluster spark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Basic,
    Composite(SparkSpec),
}

impl ModelKind {
    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Basic => "basic",
            ModelKind::Composite(spark) => spark.name(),
        }
    }

    pub fn composite(self) -> bool {
        matches!(self, ModelKind::Composite(_))
    }

    pub fn spark(self) -> SparkSpec {
        match self {
            ModelKind::Basic => SparkSpec::Zero,
            ModelKind::Composite(spark) => spark,
        }
    }
}

pub fn parse_model(slug: &str) -> Result<ModelKind> {
    Ok(match slug {
        "basic" => ModelKind::Basic,
        "zero" => ModelKind::Composite(SparkSpec::Zero),
        "constant" => ModelKind::Composite(SparkSpec::Constant),
        "m1" => ModelKind::Composite(SparkSpec::M1),
        "m2" => ModelKind::Composite(SparkSpec::M2),
        "m3" => ModelKind::Composite(SparkSpec::M3),
        "m4" => ModelKind::Composite(SparkSpec::M4),
        other => bail!("unknown model {other:?}; expected basic, zero, constant or m1..m4"),
    })
}

fn d_replicates() -> usize {
    10
}
fn d_n() -> usize {
    100
}
fn d_alpha() -> f64 {
    0.8
}
fn d_beta() -> f64 {
    2.0
}
fn d_t_max() -> u32 {
    31
}
fn d_period() -> u32 {
    3
}
fn d_initial() -> usize {
    1
}
fn d_method() -> String {
    "dpmm".into()
}
fn d_sweeps() -> usize {
    2000
}
fn d_iters() -> usize {
    2000
}
fn d_frame() -> String {
    "sir".into()
}
fn d_n_sims() -> usize {
    cilm::DEFAULT_PPD_SIMS
}
fn d_from_t() -> u32 {
    5
}
fn d_true() -> bool {
    true
}
fn d_scenarios() -> Vec<String> {
    STUDY_SCENARIOS.iter().map(|s| s.to_string()).collect()
}
fn d_models() -> Vec<String> {
    ["basic", "zero", "constant", "m1", "m2", "m3", "m4"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}
fn d_bench_n() -> usize {
    1000
}
fn d_bench_k() -> usize {
    5
}
fn d_bench_initial() -> usize {
    10
}
fn d_reps() -> usize {
    30
}
fn d_warmup() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Scenario slug; omitted means every study scenario.
    pub scenario: Option<String>,
    #[serde(default = "d_replicates")]
    pub replicates: usize,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_t_max")]
    pub t_max: u32,
    #[serde(default = "d_period")]
    pub period: u32,
    #[serde(default = "d_initial")]
    pub initial: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            scenario: None,
            replicates: d_replicates(),
            n: d_n(),
            alpha: d_alpha(),
            beta: d_beta(),
            t_max: d_t_max(),
            period: d_period(),
            initial: d_initial(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub population: PathBuf,
    /// Infection data for spatio-temporal clustering; t_max must accompany it.
    pub events: Option<PathBuf>,
    pub t_max: Option<u32>,
    /// "kmeans" (requires k) or "dpmm".
    #[serde(default = "d_method")]
    pub method: String,
    pub k: Option<usize>,
    #[serde(default = "d_true")]
    pub temporal: bool,
    #[serde(default = "d_sweeps")]
    pub sweeps: usize,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorsSection {
    pub alpha: Option<[f64; 2]>,
    pub beta: Option<[f64; 2]>,
    pub beta_tilde: Option<[f64; 2]>,
    pub epsilon: Option<[f64; 2]>,
    pub delta: Option<[f64; 2]>,
}

impl PriorsSection {
    pub fn to_spec(self) -> PriorSpec {
        let mut spec = PriorSpec::default();
        let pair = |v: [f64; 2]| (v[0], v[1]);
        if let Some(v) = self.alpha {
            spec.alpha = pair(v);
        }
        if let Some(v) = self.beta {
            spec.beta = pair(v);
        }
        if let Some(v) = self.beta_tilde {
            spec.beta_tilde = pair(v);
        }
        if let Some(v) = self.epsilon {
            spec.epsilon = pair(v);
        }
        if let Some(v) = self.delta {
            spec.delta = pair(v);
        }
        spec
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub population: PathBuf,
    pub events: PathBuf,
    pub t_max: u32,
    /// basic, zero, constant or m1..m4; all but basic need an assignment.
    pub model: String,
    pub assignment: Option<PathBuf>,
    pub centroids: Option<PathBuf>,
    #[serde(default = "d_frame")]
    pub frame: String,
    pub latent: Option<u32>,
    #[serde(default = "d_period")]
    pub period: u32,
    #[serde(default = "d_iters")]
    pub iters: usize,
    pub priors: Option<PriorsSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub model: String,
    pub trace: PathBuf,
    pub meta: PathBuf,
    pub assignment: Option<PathBuf>,
    pub centroids: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessSection {
    pub population: PathBuf,
    pub events: PathBuf,
    pub t_max: u32,
    #[serde(default = "d_frame")]
    pub frame: String,
    pub latent: Option<u32>,
    #[serde(default = "d_period")]
    pub period: u32,
    #[serde(default = "d_n_sims")]
    pub n_sims: usize,
    /// Also write posterior predictive incidence envelopes per model.
    #[serde(default = "d_true")]
    pub curves: bool,
    pub models: Vec<ModelEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSection {
    pub population: PathBuf,
    pub events: PathBuf,
    pub t_max: u32,
    #[serde(default = "d_frame")]
    pub frame: String,
    pub latent: Option<u32>,
    #[serde(default = "d_period")]
    pub period: u32,
    /// Observation cutoff: infections up to this day are kept, the rest is
    /// re-simulated from the posterior.
    #[serde(default = "d_from_t")]
    pub from_t: u32,
    #[serde(default = "d_n_sims")]
    pub n_sims: usize,
    pub model: ModelEntry,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    #[serde(default = "d_bench_n")]
    pub n: usize,
    #[serde(default = "d_bench_k")]
    pub k: usize,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_t_max")]
    pub t_max: u32,
    #[serde(default = "d_period")]
    pub period: u32,
    #[serde(default = "d_bench_initial")]
    pub initial: usize,
    /// Timed repetitions of one full-likelihood and one composite evaluation.
    #[serde(default = "d_reps")]
    pub reps: usize,
    #[serde(default = "d_warmup")]
    pub warmup: usize,
    /// Zero skips the chain timing.
    #[serde(default)]
    pub mcmc_iters: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            n: d_bench_n(),
            k: d_bench_k(),
            alpha: d_alpha(),
            beta: d_beta(),
            t_max: d_t_max(),
            period: d_period(),
            initial: d_bench_initial(),
            reps: d_reps(),
            warmup: d_warmup(),
            mcmc_iters: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default = "d_scenarios")]
    pub scenarios: Vec<String>,
    #[serde(default = "d_replicates")]
    pub replicates: usize,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_t_max")]
    pub t_max: u32,
    #[serde(default = "d_period")]
    pub period: u32,
    #[serde(default = "d_initial")]
    pub initial: usize,
    #[serde(default = "d_method")]
    pub method: String,
    pub k: Option<usize>,
    #[serde(default = "d_true")]
    pub temporal: bool,
    #[serde(default = "d_sweeps")]
    pub sweeps: usize,
    #[serde(default = "d_models")]
    pub models: Vec<String>,
    #[serde(default = "d_iters")]
    pub iters: usize,
    #[serde(default = "d_n_sims")]
    pub n_sims: usize,
    #[serde(default)]
    pub curves: bool,
    pub priors: Option<PriorsSection>,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            scenarios: d_scenarios(),
            replicates: d_replicates(),
            n: d_n(),
            alpha: d_alpha(),
            beta: d_beta(),
            t_max: d_t_max(),
            period: d_period(),
            initial: d_initial(),
            method: d_method(),
            k: None,
            temporal: d_true(),
            sweeps: d_sweeps(),
            models: d_models(),
            iters: d_iters(),
            n_sims: d_n_sims(),
            curves: false,
            priors: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub input: PathBuf,
    /// Inclusive day window [start, end] in source time; output days are
    /// shifted so the window starts at day zero.
    pub window: [u32; 2],
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys() {
        let err = toml::from_str::<RunConfig>("nonsense = 3").unwrap_err();
        assert!(err.to_string().contains("nonsense"));
        let err =
            toml::from_str::<RunConfig>("[simulate]\nscenari = \"csr\"").unwrap_err();
        assert!(err.to_string().contains("scenari"));
    }

    #[test]
    fn scenario_slugs_round_trip() {
        for slug in STUDY_SCENARIOS {
            scenario_from_slug(slug).unwrap();
        }
        assert!(matches!(
            scenario_from_slug("lowvar_k5").unwrap(),
            SpatialScenario::Clustered { k: 5, .. }
        ));
        assert!(scenario_from_slug("midvar_k2").is_err());
        assert!(scenario_from_slug("lowvar_kx").is_err());
    }

    #[test]
    fn model_slugs_parse() {
        assert_eq!(parse_model("basic").unwrap(), ModelKind::Basic);
        assert_eq!(parse_model("m3").unwrap(), ModelKind::Composite(SparkSpec::M3));
        assert!(parse_model("m5").is_err());
    }

    #[test]
    fn sections_fill_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 7\n[study]\nreplicates = 2").unwrap();
        let study = cfg.study.unwrap();
        assert_eq!(study.replicates, 2);
        assert_eq!(study.scenarios.len(), 7);
        assert_eq!(study.models.len(), 7);
        assert_eq!(study.iters, 2000);
        assert_eq!(cfg.seed, Some(7));
    }

    #[test]
    fn priors_override_partially() {
        let cfg: RunConfig =
            toml::from_str("[fit]\npopulation = \"p\"\nevents = \"e\"\nt_max = 10\nmodel = \"m2\"\n[fit.priors]\nalpha = [2.0, 0.5]")
                .unwrap();
        let spec = cfg.fit.unwrap().priors.unwrap().to_spec();
        assert_eq!(spec.alpha, (2.0, 0.5));
        assert_eq!(spec.beta, (2.0, 3.0));
    }
}
