//! Posterior predictive forecast: keep infections observed up to a cutoff
//! day, re-simulate the remainder under one fitted model, and write the
//! resulting incidence envelope.

use std::fs;

use anyhow::Result;
use cilm::{io, ppd_forecast};

use super::{build_spec, load_clusters, load_epidemic, load_trace, seed_for, Ctx};
use crate::config::{parse_model, ForecastSection};

const FORECAST_TAG: u64 = 7;

pub fn run(section: &ForecastSection, ctx: &Ctx) -> Result<()> {
    let entry = &section.model;
    let kind = parse_model(&entry.model)?;
    let (pop, dist, record) = load_epidemic(&section.population, &section.events, section.t_max)?;
    let clusters = load_clusters(&pop, entry.assignment.as_deref(), entry.centroids.as_deref())?;
    let spec = build_spec(kind, &section.frame, section.latent, section.period, clusters)?;
    let trace = load_trace(&entry.trace, &entry.meta)?;
    let ensemble = ppd_forecast(
        &trace,
        &pop,
        &dist,
        &record,
        &spec,
        section.from_t,
        section.n_sims,
        seed_for(ctx.seed, FORECAST_TAG),
    )?;
    fs::create_dir_all(&ctx.out)?;
    io::write_curves(&ctx.out.join("forecast.csv"), &ensemble)?;
    let meta = vec![
        ("command".into(), "forecast".into()),
        ("model".into(), entry.name.clone()),
        ("from_t".into(), section.from_t.to_string()),
        ("n_sims".into(), section.n_sims.to_string()),
        ("seed".into(), ctx.seed.to_string()),
    ];
    io::write_meta(&ctx.out.join("meta.csv"), &meta)?;
    println!(
        "forecast: {} simulations from day {} under {}",
        section.n_sims, section.from_t, entry.name
    );
    Ok(())
}
