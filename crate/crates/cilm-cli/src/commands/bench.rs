//! Time the full likelihood against the composite likelihood on one synthetic
//! instance with a balanced assignment, optionally timing whole chains too.
//! Rows whose key ends in _seconds or _ratio vary between runs; everything
//! else in the output is deterministic.

use std::fs;
use std::time::Instant;

use anyhow::{bail, Result};
use cilm::seeds::stream_rng;
use cilm::stats::median;
use cilm::{
    composite_log_likelihood, fit_mcmc, generate_population, io, log_likelihood,
    simulate_epidemic, ClusterAssignment, DistanceMatrix, ModelParams, ModelSpec, PriorSpec,
    SimConfig, SparkSpec, SpatialScenario,
};

use super::{seed_for, Ctx};
use crate::config::{BenchSection, LOW_VARIANCE};

/// Median wall time of one evaluation inside the given pool.
fn timed<F: Fn() -> f64 + Sync + Send>(
    pool: &rayon::ThreadPool,
    warmup: usize,
    reps: usize,
    eval: F,
) -> f64 {
    pool.install(|| {
        for _ in 0..warmup {
            eval();
        }
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            eval();
            times.push(start.elapsed().as_secs_f64());
        }
        median(&times)
    })
}

pub fn run(section: &BenchSection, ctx: &Ctx) -> Result<()> {
    if section.reps < 1 {
        bail!("reps must be at least 1");
    }
    let workers = ctx
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
    let mut rng = stream_rng(ctx.seed, 0);
    let scenario = SpatialScenario::clustered(section.k, LOW_VARIANCE);
    let (pop, _) = generate_population(scenario, section.n, &mut rng)?;
    let dist = DistanceMatrix::compute(&pop)?;
    let membership: Vec<usize> = (0..section.n).map(|i| i % section.k).collect();
    let clusters = ClusterAssignment::from_membership(&pop, membership)?;

    let full_spec = ModelSpec::sir(SparkSpec::Zero).with_infectious_period(section.period);
    let comp_spec = ModelSpec::sir(SparkSpec::M2)
        .with_infectious_period(section.period)
        .with_clusters(clusters);
    let full_params = ModelParams::basic(section.alpha, section.beta);
    let comp_params = ModelParams::basic(section.alpha, section.beta)
        .with_beta_tilde(section.beta);
    let config = SimConfig {
        spec: full_spec.clone(),
        params: full_params,
        t_max: section.t_max,
        initial_count: section.initial,
        seed: seed_for(ctx.seed, 1),
    };
    let record = simulate_epidemic(&pop, &dist, &config)?;
    let infections = (0..record.len()).filter(|&i| record.infection_time(i).is_some()).count();

    // Local pool so the measured worker count is exact regardless of any
    // global pool the process may have.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    log_likelihood(&pop, &dist, &record, &full_spec, &full_params)?;
    composite_log_likelihood(&pop, &dist, &record, &comp_spec, &comp_params)?;
    let full_eval = timed(&pool, section.warmup, section.reps, || {
        log_likelihood(&pop, &dist, &record, &full_spec, &full_params).unwrap()
    });
    let comp_eval = timed(&pool, section.warmup, section.reps, || {
        composite_log_likelihood(&pop, &dist, &record, &comp_spec, &comp_params).unwrap()
    });

    let mut rows: Vec<(String, String)> = vec![
        ("command".into(), "bench".into()),
        ("n".into(), section.n.to_string()),
        ("k".into(), section.k.to_string()),
        ("workers".into(), workers.to_string()),
        ("reps".into(), section.reps.to_string()),
        ("warmup".into(), section.warmup.to_string()),
        ("t_max".into(), section.t_max.to_string()),
        ("period".into(), section.period.to_string()),
        ("initial".into(), section.initial.to_string()),
        ("alpha".into(), format!("{}", section.alpha)),
        ("beta".into(), format!("{}", section.beta)),
        ("infections".into(), infections.to_string()),
        ("seed".into(), ctx.seed.to_string()),
        ("full_eval_seconds".into(), format!("{full_eval}")),
        ("composite_eval_seconds".into(), format!("{comp_eval}")),
        ("eval_ratio".into(), format!("{}", comp_eval / full_eval)),
    ];

    if section.mcmc_iters > 0 {
        let priors = PriorSpec::default();
        let time_chain = |spec: &ModelSpec, tag: u64| -> Result<f64> {
            let start = Instant::now();
            pool.install(|| {
                fit_mcmc(
                    &pop,
                    &dist,
                    &record,
                    spec,
                    &priors,
                    section.mcmc_iters,
                    seed_for(ctx.seed, tag),
                )
            })?;
            Ok(start.elapsed().as_secs_f64())
        };
        let full_chain = time_chain(&full_spec, 2)?;
        let comp_chain = time_chain(&comp_spec, 3)?;
        rows.push(("mcmc_iters".into(), section.mcmc_iters.to_string()));
        rows.push(("full_mcmc_seconds".into(), format!("{full_chain}")));
        rows.push(("composite_mcmc_seconds".into(), format!("{comp_chain}")));
        rows.push(("mcmc_ratio".into(), format!("{}", comp_chain / full_chain)));
    }

    fs::create_dir_all(&ctx.out)?;
    io::write_meta(&ctx.out.join("bench.csv"), &rows)?;
    println!(
        "bench: n={} k={} workers={workers}: composite/full eval ratio {:.3}",
        section.n,
        section.k,
        comp_eval / full_eval
    );
    Ok(())
}
