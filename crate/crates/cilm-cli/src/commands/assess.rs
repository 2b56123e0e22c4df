//! Compare fitted models on one data set by WAIC, optionally writing each
//! model's posterior predictive incidence envelope.

use std::fs;

use anyhow::{bail, Result};
use cilm::{io, pointwise_log_lik, ppd_complete, waic, WaicResult};

use super::{build_spec, load_clusters, load_epidemic, load_trace, seed_for, Ctx};
use crate::config::{parse_model, AssessSection};

/// Tag offset separating predictive-simulation seeds from fit seeds.
const PPD_TAG: u64 = 100;

pub fn run(section: &AssessSection, ctx: &Ctx) -> Result<()> {
    if section.models.is_empty() {
        bail!("assess needs at least one model entry");
    }
    let (pop, dist, record) = load_epidemic(&section.population, &section.events, section.t_max)?;
    fs::create_dir_all(&ctx.out)?;
    let mut rows: Vec<(String, WaicResult)> = Vec::new();
    let mut notes: Vec<(String, String)> = Vec::new();
    for (i, entry) in section.models.iter().enumerate() {
        let kind = parse_model(&entry.model)?;
        let clusters =
            load_clusters(&pop, entry.assignment.as_deref(), entry.centroids.as_deref())?;
        let spec = build_spec(kind, &section.frame, section.latent, section.period, clusters)?;
        let trace = load_trace(&entry.trace, &entry.meta)?;
        // A model that cannot explain the data (some exposure has zero
        // likelihood under every draw) scores as infinitely penalized
        // rather than aborting the comparison.
        let result = pointwise_log_lik(&trace, &pop, &dist, &record, &spec)
            .and_then(|pll| waic(&pll));
        let row = match result {
            Ok(w) => w,
            Err(e) => {
                notes.push((format!("waic_error_{}", entry.name), e.to_string()));
                WaicResult {
                    waic: f64::INFINITY,
                    lppd: f64::NEG_INFINITY,
                    p_waic: f64::INFINITY,
                }
            }
        };
        rows.push((entry.name.clone(), row));
        if section.curves {
            let ensemble = ppd_complete(
                &trace,
                &pop,
                &dist,
                &record,
                &spec,
                section.n_sims,
                seed_for(ctx.seed, PPD_TAG + i as u64),
            )?;
            io::write_curves(&ctx.out.join(format!("curves_{}.csv", entry.name)), &ensemble)?;
        }
    }
    io::write_report(&ctx.out.join("report.csv"), &rows)?;
    let preferred = rows
        .iter()
        .min_by(|a, b| a.1.waic.total_cmp(&b.1.waic))
        .map(|(name, _)| name.clone())
        .unwrap();
    let mut meta = vec![
        ("command".into(), "assess".into()),
        ("n_sims".into(), section.n_sims.to_string()),
        ("seed".into(), ctx.seed.to_string()),
        ("waic_unit".into(), "one individual-day exposure".into()),
        ("preferred".into(), preferred.clone()),
    ];
    meta.append(&mut notes);
    io::write_meta(&ctx.out.join("meta.csv"), &meta)?;
    println!("assess: {} models compared, preferred {preferred}", rows.len());
    Ok(())
}
