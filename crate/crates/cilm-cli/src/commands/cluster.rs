//! Partition a population: K-means on coordinates or the Dirichlet process
//! mixture over space and, when events are supplied, infection time.

use std::fs;

use anyhow::{bail, Context, Result};
use cilm::cluster::{dpmm_gibbs, extract_assignment, kmeans, DpmmConfig, StandardizedData};
use cilm::seeds::stream_rng;
use cilm::{io, ClusterAssignment, EpidemicRecord, Population};

use super::{require_file, Ctx};
use crate::config::ClusterSection;

const KMEANS_MAX_ITERS: usize = 100;

/// Temporal span assumed when clustering without events; only sets the scale
/// coordinates are mapped onto.
const SPATIAL_SPAN: u32 = 30;

pub fn run(section: &ClusterSection, ctx: &Ctx) -> Result<()> {
    require_file(&section.population, "population file")?;
    let pop = io::read_population(&section.population)?;
    let assignment = cluster_population(section, &pop, ctx.seed)?;
    fs::create_dir_all(&ctx.out)?;
    io::write_assignment(&ctx.out.join("assignment.csv"), &assignment)?;
    io::write_centroids(&ctx.out.join("centroids.csv"), &assignment)?;
    let mut meta = vec![
        ("command".into(), "cluster".into()),
        ("method".into(), section.method.clone()),
    ];
    match section.method.as_str() {
        "kmeans" => meta.push(("k".into(), section.k.unwrap_or(0).to_string())),
        _ => {
            meta.push(("temporal".into(), section.temporal.to_string()));
            meta.push(("sweeps".into(), section.sweeps.to_string()));
        }
    }
    meta.push(("clusters_found".into(), assignment.k().to_string()));
    meta.push(("seed".into(), ctx.seed.to_string()));
    io::write_meta(&ctx.out.join("meta.csv"), &meta)?;
    println!("cluster: {} clusters over {} individuals", assignment.k(), pop.len());
    Ok(())
}

pub fn cluster_population(
    section: &ClusterSection,
    pop: &Population,
    seed: u64,
) -> Result<ClusterAssignment> {
    match section.method.as_str() {
        "kmeans" => {
            let k = section.k.context("kmeans requires k")?;
            let mut rng = stream_rng(seed, 0);
            Ok(kmeans(pop, k, &mut rng, KMEANS_MAX_ITERS)?)
        }
        "dpmm" => {
            let record = match (&section.events, section.t_max) {
                (Some(events), Some(t_max)) => {
                    require_file(events, "events file")?;
                    io::read_events(events, t_max)?
                }
                (Some(_), None) => bail!("events file needs t_max"),
                (None, _) if section.temporal => {
                    bail!("spatio-temporal clustering requires events and t_max")
                }
                (None, _) => EpidemicRecord::new(
                    vec![None; pop.len()],
                    vec![None; pop.len()],
                    SPATIAL_SPAN,
                )?,
            };
            let data = StandardizedData::standardize(pop, &record, None)?;
            let mut cfg = DpmmConfig::new(section.sweeps);
            if !section.temporal {
                cfg = cfg.spatial_only();
            }
            let mut rng = stream_rng(seed, 0);
            let chain = dpmm_gibbs(&data, &cfg, &mut rng)?;
            Ok(extract_assignment(&chain[cfg.burn_in..], &data)?)
        }
        other => bail!("unknown clustering method {other:?}; expected kmeans or dpmm"),
    }
}
