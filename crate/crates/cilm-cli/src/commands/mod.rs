//! Subcommand implementations plus the context and file helpers they share.

pub mod assess;
pub mod bench;
pub mod cluster;
pub mod fit;
pub mod forecast;
pub mod ingest;
pub mod simulate;
pub mod study;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cilm::seeds::stream_rng;
use cilm::{
    diagnostics, fit_mcmc, io, ClusterAssignment, DistanceMatrix, EpidemicRecord, McmcTrace,
    ModelSpec, PriorSpec, Population,
};
use rand::Rng;

use crate::config::ModelKind;

/// Resolved global settings: base seed, output directory and optional worker
/// cap for the rayon pool.
pub struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

/// Sub-seed for one stage of a run. Stages draw from disjoint counter-mode
/// streams of the base seed, so adding stages never shifts existing ones.
pub fn seed_for(base: u64, tag: u64) -> u64 {
    stream_rng(base, tag).gen()
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} {} is not a readable file", path.display());
    }
    Ok(())
}

pub fn load_epidemic(
    population: &Path,
    events: &Path,
    t_max: u32,
) -> Result<(Population, DistanceMatrix, EpidemicRecord)> {
    require_file(population, "population file")?;
    require_file(events, "events file")?;
    let pop = io::read_population(population)?;
    let dist = DistanceMatrix::compute(&pop)?;
    let record = io::read_events(events, t_max)?;
    if record.len() != pop.len() {
        bail!(
            "events file covers {} individuals, population has {}",
            record.len(),
            pop.len()
        );
    }
    Ok((pop, dist, record))
}

/// Read an assignment and optional externally estimated centroids. Centroids
/// without an assignment have nothing to attach to.
pub fn load_clusters(
    pop: &Population,
    assignment: Option<&Path>,
    centroids: Option<&Path>,
) -> Result<Option<ClusterAssignment>> {
    let Some(assignment) = assignment else {
        if centroids.is_some() {
            bail!("centroids file given without an assignment file");
        }
        return Ok(None);
    };
    require_file(assignment, "assignment file")?;
    let labels = io::read_assignment(assignment)?;
    let clusters = match centroids {
        Some(path) => {
            require_file(path, "centroids file")?;
            let cents = io::read_centroids(path)?;
            ClusterAssignment::with_centroids(pop.len(), labels, cents)?
        }
        None => ClusterAssignment::from_membership(pop, labels)?,
    };
    Ok(Some(clusters))
}

/// Assemble the model to fit or assess. Composite kinds require clusters; the
/// basic kind ignores any that were supplied.
pub fn build_spec(
    kind: ModelKind,
    frame: &str,
    latent: Option<u32>,
    period: u32,
    clusters: Option<ClusterAssignment>,
) -> Result<ModelSpec> {
    let mut spec = ModelSpec::sir(kind.spark());
    match frame {
        "sir" => {}
        "seir" => {
            let latent = latent.context("seir frame requires a latent period")?;
            spec = spec.seir(latent);
        }
        other => bail!("unknown frame {other:?}; expected sir or seir"),
    }
    spec = spec.with_infectious_period(period);
    if kind.composite() {
        let clusters =
            clusters.with_context(|| format!("model {} requires an assignment", kind.slug()))?;
        spec = spec.with_clusters(clusters);
    }
    Ok(spec)
}

fn fmt_prior_rows(spec: &ModelSpec, priors: &PriorSpec) -> Vec<(String, String)> {
    let gamma = |(shape, rate): (f64, f64)| format!("gamma(shape={shape},rate={rate})");
    let mut rows = vec![
        ("prior_alpha".into(), gamma(priors.alpha)),
        ("prior_beta".into(), gamma(priors.beta)),
    ];
    if spec.spark.needs_beta_tilde() {
        rows.push(("prior_beta_tilde".into(), gamma(priors.beta_tilde)));
    }
    if spec.spark.needs_epsilon() {
        rows.push(("prior_epsilon".into(), gamma(priors.epsilon)));
    }
    if spec.spark.needs_delta() {
        let (mean, sd) = priors.delta;
        rows.push(("prior_delta".into(), format!("normal(mean={mean},sd={sd})")));
    }
    rows
}

/// Run one chain and describe it as meta rows: settings first, then priors,
/// then per-parameter acceptance and convergence. The seed and burn_in rows
/// are what `read_trace` needs to reload the output.
pub fn fit_with_meta(
    pop: &Population,
    dist: &DistanceMatrix,
    record: &EpidemicRecord,
    kind: ModelKind,
    spec: &ModelSpec,
    priors: &PriorSpec,
    iters: usize,
    seed: u64,
) -> Result<(McmcTrace, Vec<(String, String)>)> {
    let trace = fit_mcmc(pop, dist, record, spec, priors, iters, seed)?;
    let mut meta: Vec<(String, String)> = vec![
        ("model".into(), kind.slug().into()),
        ("frame".into(), if spec.latent_period.is_some() { "seir" } else { "sir" }.into()),
    ];
    if let Some(latent) = spec.latent_period {
        meta.push(("latent".into(), latent.to_string()));
    }
    if let Some(period) = spec.infectious_period {
        meta.push(("period".into(), period.to_string()));
    }
    if let Some(clusters) = &spec.clusters {
        meta.push(("clusters".into(), clusters.k().to_string()));
    }
    meta.push(("iters".into(), iters.to_string()));
    meta.push(("burn_in".into(), trace.burn_in().to_string()));
    meta.push(("seed".into(), seed.to_string()));
    meta.push((
        "proposal".into(),
        "adaptive block random walk, log scale for positive parameters".into(),
    ));
    meta.extend(fmt_prior_rows(spec, priors));
    for (name, acc) in trace.names().iter().zip(trace.acceptance()) {
        meta.push((format!("acceptance_{name}"), format!("{acc}")));
    }
    match diagnostics(&trace) {
        Ok(diag) => {
            for (name, r) in diag.names.iter().zip(&diag.r_hat) {
                meta.push((format!("r_hat_{name}"), format!("{r}")));
            }
            meta.push(("r_hat_flagged".into(), diag.any_flagged().to_string()));
        }
        Err(_) => meta.push(("r_hat".into(), "unavailable, chain too short".into())),
    }
    Ok((trace, meta))
}

pub fn meta_lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .with_context(|| format!("meta file has no {key} row"))
}

pub fn meta_u64(pairs: &[(String, String)], key: &str) -> Result<u64> {
    meta_lookup(pairs, key)?
        .parse()
        .with_context(|| format!("meta row {key} is not an integer"))
}

/// Load a trace back using the seed and burn-in recorded in its meta file.
pub fn load_trace(trace_path: &Path, meta_path: &Path) -> Result<McmcTrace> {
    require_file(trace_path, "trace file")?;
    require_file(meta_path, "meta file")?;
    let meta = io::read_meta(meta_path)?;
    let seed = meta_u64(&meta, "seed")?;
    let burn_in = meta_u64(&meta, "burn_in")? as usize;
    Ok(io::read_trace(trace_path, seed, burn_in)?)
}
