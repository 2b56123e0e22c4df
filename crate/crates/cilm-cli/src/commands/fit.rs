//! Fit one model by adaptive random-walk Metropolis, writing the trace and a
//! meta file that records everything needed to reload or audit the chain.

use std::fs;

use anyhow::Result;
use cilm::io;

use super::{build_spec, fit_with_meta, load_clusters, load_epidemic, Ctx};
use crate::config::{parse_model, FitSection};

pub fn run(section: &FitSection, ctx: &Ctx) -> Result<()> {
    let kind = parse_model(&section.model)?;
    let priors = section.priors.unwrap_or_default().to_spec();
    let (pop, dist, record) = load_epidemic(&section.population, &section.events, section.t_max)?;
    let clusters =
        load_clusters(&pop, section.assignment.as_deref(), section.centroids.as_deref())?;
    let spec = build_spec(kind, &section.frame, section.latent, section.period, clusters)?;
    let (trace, meta) =
        fit_with_meta(&pop, &dist, &record, kind, &spec, &priors, section.iters, ctx.seed)?;
    fs::create_dir_all(&ctx.out)?;
    io::write_trace(&ctx.out.join("trace.csv"), &trace)?;
    io::write_meta(&ctx.out.join("meta.csv"), &meta)?;
    let acc: Vec<String> = trace
        .names()
        .iter()
        .zip(trace.acceptance())
        .map(|(n, a)| format!("{n} {a:.2}"))
        .collect();
    println!("fit: {} for {} iterations, acceptance {}", kind.slug(), section.iters, acc.join(", "));
    Ok(())
}
