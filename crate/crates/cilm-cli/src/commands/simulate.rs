//! Generate study populations and epidemics: for each requested scenario, a
//! set of replicate directories each holding population.csv and events.csv.

use std::fs;

use anyhow::{bail, Result};
use cilm::seeds::stream_rng;
use cilm::{
    generate_population, io, simulate_epidemic, DistanceMatrix, ModelParams, ModelSpec,
    SimConfig, SparkSpec, SpatialScenario,
};

use super::{seed_for, Ctx};
use crate::config::{scenario_from_slug, SimulateSection, STUDY_SCENARIOS};

pub fn run(section: &SimulateSection, ctx: &Ctx) -> Result<()> {
    if section.replicates < 1 {
        bail!("replicates must be at least 1");
    }
    let scenarios = resolve_scenarios(section.scenario.as_deref())?;
    for (si, (slug, scenario)) in scenarios.iter().enumerate() {
        for rep in 0..section.replicates {
            let tag = ((si * section.replicates + rep) as u64) * 2;
            let (pop, record) = draw_replicate(section, *scenario, ctx.seed, tag)?;
            let dir = ctx.out.join(slug).join(format!("rep{rep}"));
            fs::create_dir_all(&dir)?;
            io::write_population(&dir.join("population.csv"), &pop)?;
            io::write_events(&dir.join("events.csv"), &record)?;
        }
        println!("simulate: {slug}: {} replicates", section.replicates);
    }
    let meta = vec![
        ("command".into(), "simulate".into()),
        (
            "scenarios".into(),
            scenarios.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>().join(" "),
        ),
        ("replicates".into(), section.replicates.to_string()),
        ("n".into(), section.n.to_string()),
        ("alpha".into(), format!("{}", section.alpha)),
        ("beta".into(), format!("{}", section.beta)),
        ("t_max".into(), section.t_max.to_string()),
        ("period".into(), section.period.to_string()),
        ("initial".into(), section.initial.to_string()),
        ("seed".into(), ctx.seed.to_string()),
    ];
    io::write_meta(&ctx.out.join("meta.csv"), &meta)?;
    Ok(())
}

pub fn resolve_scenarios(
    requested: Option<&str>,
) -> Result<Vec<(String, SpatialScenario)>> {
    let slugs: Vec<String> = match requested {
        Some(slug) => vec![slug.to_string()],
        None => STUDY_SCENARIOS.iter().map(|s| s.to_string()).collect(),
    };
    slugs
        .into_iter()
        .map(|slug| Ok((slug.clone(), scenario_from_slug(&slug)?)))
        .collect()
}

/// One population and epidemic; `tag` and `tag + 1` seed the two draws.
pub fn draw_replicate(
    section: &SimulateSection,
    scenario: SpatialScenario,
    base_seed: u64,
    tag: u64,
) -> Result<(cilm::Population, cilm::EpidemicRecord)> {
    let mut rng = stream_rng(base_seed, tag);
    let (pop, _labels) = generate_population(scenario, section.n, &mut rng)?;
    let dist = DistanceMatrix::compute(&pop)?;
    let config = SimConfig {
        spec: ModelSpec::sir(SparkSpec::Zero).with_infectious_period(section.period),
        params: ModelParams::basic(section.alpha, section.beta),
        t_max: section.t_max,
        initial_count: section.initial,
        seed: seed_for(base_seed, tag + 1),
    };
    let record = simulate_epidemic(&pop, &dist, &config)?;
    Ok((pop, record))
}
