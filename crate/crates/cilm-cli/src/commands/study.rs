//! Full replicate pipeline: simulate each scenario, cluster every replicate,
//! fit the candidate models and rank them by WAIC, mirroring the layout the
//! individual commands produce so their outputs stay interchangeable.

use std::fs;
use std::path::Path;

use anyhow::{bail, Result};
use cilm::{
    io, pointwise_log_lik, ppd_complete, waic, ClusterAssignment, DistanceMatrix,
    EpidemicRecord, McmcTrace, ModelSpec, Population, PriorSpec, WaicResult,
};

use super::{build_spec, fit_with_meta, seed_for, Ctx};
use crate::config::{parse_model, ClusterSection, ModelKind, SimulateSection, StudySection};

/// Per-replicate seed tags: population 0, epidemic 1, clustering 2, then two
/// tags per model (fit and predictive) from 8. The stride leaves room for
/// more models than the pipeline will ever fit at once.
const REP_STRIDE: u64 = 64;
const MODEL_TAG0: u64 = 8;

pub fn run(section: &StudySection, ctx: &Ctx) -> Result<()> {
    if section.replicates < 1 {
        bail!("replicates must be at least 1");
    }
    if section.models.is_empty() {
        bail!("study needs at least one model");
    }
    let models: Vec<ModelKind> =
        section.models.iter().map(|m| parse_model(m)).collect::<Result<_>>()?;
    if section.method == "kmeans" && section.k.is_none() {
        bail!("kmeans requires k");
    }
    let scenarios: Vec<_> = section
        .scenarios
        .iter()
        .map(|s| Ok((s.clone(), crate::config::scenario_from_slug(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let priors = section.priors.unwrap_or_default().to_spec();
    let sim_section = SimulateSection {
        scenario: None,
        replicates: section.replicates,
        n: section.n,
        alpha: section.alpha,
        beta: section.beta,
        t_max: section.t_max,
        period: section.period,
        initial: section.initial,
    };
    let cluster_section = ClusterSection {
        population: Default::default(),
        events: None,
        t_max: Some(section.t_max),
        method: section.method.clone(),
        k: section.k,
        temporal: section.temporal,
        sweeps: section.sweeps,
    };

    for (si, (slug, scenario)) in scenarios.iter().enumerate() {
        for rep in 0..section.replicates {
            let tag = ((si * section.replicates + rep) as u64) * REP_STRIDE;
            let (pop, record) =
                super::simulate::draw_replicate(&sim_section, *scenario, ctx.seed, tag)?;
            let dist = DistanceMatrix::compute(&pop)?;
            let assignment =
                cluster_replicate(&cluster_section, &pop, &record, ctx.seed, tag + 2)?;
            let dir = ctx.out.join(slug).join(format!("rep{rep}"));
            fs::create_dir_all(&dir)?;
            io::write_population(&dir.join("population.csv"), &pop)?;
            io::write_events(&dir.join("events.csv"), &record)?;
            io::write_assignment(&dir.join("assignment.csv"), &assignment)?;
            io::write_centroids(&dir.join("centroids.csv"), &assignment)?;
            let summary = fit_models(
                section, &models, &priors, &pop, &dist, &record, &assignment, ctx.seed, tag,
                &dir,
            )?;
            let preferred = summary
                .rows
                .iter()
                .min_by(|a, b| a.1.waic.total_cmp(&b.1.waic))
                .map(|(name, _)| name.clone())
                .unwrap();
            io::write_report(&dir.join("report.csv"), &summary.rows)?;
            let mut rep_meta = vec![
                ("scenario".into(), slug.clone()),
                ("rep".into(), rep.to_string()),
                ("clusters_found".into(), assignment.k().to_string()),
                ("preferred".into(), preferred.clone()),
            ];
            rep_meta.extend(summary.notes);
            io::write_meta(&dir.join("rep_meta.csv"), &rep_meta)?;
            println!(
                "study: {slug} rep{rep}: {} clusters, preferred {preferred}",
                assignment.k()
            );
        }
    }

    let meta = vec![
        ("command".into(), "replicate-study".into()),
        (
            "scenarios".into(),
            scenarios.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>().join(" "),
        ),
        ("replicates".into(), section.replicates.to_string()),
        ("n".into(), section.n.to_string()),
        ("models".into(), section.models.join(" ")),
        ("method".into(), section.method.clone()),
        ("iters".into(), section.iters.to_string()),
        ("seed".into(), ctx.seed.to_string()),
    ];
    io::write_meta(&ctx.out.join("meta.csv"), &meta)?;
    Ok(())
}

fn cluster_replicate(
    template: &ClusterSection,
    pop: &Population,
    record: &EpidemicRecord,
    seed: u64,
    tag: u64,
) -> Result<ClusterAssignment> {
    use cilm::cluster::{dpmm_gibbs, extract_assignment, DpmmConfig, StandardizedData};
    use cilm::seeds::stream_rng;
    match template.method.as_str() {
        "kmeans" => {
            let mut rng = stream_rng(seed, tag);
            Ok(cilm::cluster::kmeans(pop, template.k.unwrap(), &mut rng, 100)?)
        }
        "dpmm" => {
            let data = StandardizedData::standardize(pop, record, None)?;
            let mut cfg = DpmmConfig::new(template.sweeps);
            if !template.temporal {
                cfg = cfg.spatial_only();
            }
            let mut rng = stream_rng(seed, tag);
            let chain = dpmm_gibbs(&data, &cfg, &mut rng)?;
            Ok(extract_assignment(&chain[cfg.burn_in..], &data)?)
        }
        other => bail!("unknown clustering method {other:?}; expected kmeans or dpmm"),
    }
}

struct RepSummary {
    rows: Vec<(String, WaicResult)>,
    notes: Vec<(String, String)>,
}

#[allow(clippy::too_many_arguments)]
fn fit_models(
    section: &StudySection,
    models: &[ModelKind],
    priors: &PriorSpec,
    pop: &Population,
    dist: &DistanceMatrix,
    record: &EpidemicRecord,
    assignment: &ClusterAssignment,
    seed: u64,
    tag: u64,
    dir: &Path,
) -> Result<RepSummary> {
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (mi, &kind) in models.iter().enumerate() {
        let name = kind.slug().to_string();
        let clusters = kind.composite().then(|| assignment.clone());
        let spec = build_spec(kind, "sir", None, section.period, clusters)?;
        let fit_seed = seed_for(seed, tag + MODEL_TAG0 + 2 * mi as u64);
        // A model the record rules out entirely still gets a report row;
        // the failure is recorded and scored as infinitely penalized.
        let fitted =
            fit_replicate(section, kind, &spec, priors, pop, dist, record, fit_seed, dir)?;
        let row = match fitted {
            Ok((trace, w)) => {
                if section.curves {
                    let ppd_seed = seed_for(seed, tag + MODEL_TAG0 + 2 * mi as u64 + 1);
                    let ensemble = ppd_complete(
                        &trace,
                        pop,
                        dist,
                        record,
                        &spec,
                        section.n_sims,
                        ppd_seed,
                    )?;
                    io::write_curves(&dir.join(format!("curves_{name}.csv")), &ensemble)?;
                }
                w
            }
            Err(message) => {
                notes.push((format!("error_{name}"), message));
                WaicResult {
                    waic: f64::INFINITY,
                    lppd: f64::NEG_INFINITY,
                    p_waic: f64::INFINITY,
                }
            }
        };
        rows.push((name, row));
    }
    Ok(RepSummary { rows, notes })
}

/// Outer error means an I/O failure; the inner result separates clean fits
/// from model failures that the study tolerates.
#[allow(clippy::too_many_arguments)]
fn fit_replicate(
    section: &StudySection,
    kind: ModelKind,
    spec: &ModelSpec,
    priors: &PriorSpec,
    pop: &Population,
    dist: &DistanceMatrix,
    record: &EpidemicRecord,
    fit_seed: u64,
    dir: &Path,
) -> Result<std::result::Result<(McmcTrace, WaicResult), String>> {
    let fitted = fit_with_meta(pop, dist, record, kind, spec, priors, section.iters, fit_seed);
    let (trace, meta) = match fitted {
        Ok(pair) => pair,
        Err(e) => return Ok(Err(e.to_string())),
    };
    let name = kind.slug();
    io::write_trace(&dir.join(format!("trace_{name}.csv")), &trace)?;
    io::write_meta(&dir.join(format!("meta_{name}.csv")), &meta)?;
    let scored = pointwise_log_lik(&trace, pop, dist, record, spec).and_then(|pll| waic(&pll));
    Ok(match scored {
        Ok(w) => Ok((trace, w)),
        Err(e) => Err(e.to_string()),
    })
}
