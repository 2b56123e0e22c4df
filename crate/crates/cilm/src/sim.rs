//! Population generation and forward simulation of the epidemic process.
//!
//! Each day t, every susceptible takes one Bernoulli draw against P(i,t);
//! successes enter the next compartment at t+1. Draws advance a single RNG
//! stream in ascending id order, so a seed fixes the whole trajectory.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::epidemic::{EpidemicRecord, Frame};
use crate::error::{Error, Result};
use crate::kernel::{infection_probability, powered_centroid_distances, spark_bases_day};
use crate::params::{ModelParams, ModelSpec, SparkSpec};
use crate::population::{DistanceMatrix, Population};
use crate::seeds::seeded_rng;

pub const DEFAULT_BOUNDS: (f64, f64) = (0.0, 30.0);

/// Spatial layout of a synthetic population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialScenario {
    /// Complete spatial randomness: coordinates uniform over the bounds.
    Csr { bounds: (f64, f64) },
    /// K Gaussian clusters with uniformly placed means and per-axis
    /// `variance`; member coordinates may exit the bounds.
    Clustered { k: usize, variance: f64, bounds: (f64, f64) },
}

impl SpatialScenario {
    pub fn csr() -> Self {
        Self::Csr { bounds: DEFAULT_BOUNDS }
    }

    pub fn clustered(k: usize, variance: f64) -> Self {
        Self::Clustered { k, variance, bounds: DEFAULT_BOUNDS }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bounds = match *self {
            Self::Csr { bounds } => bounds,
            Self::Clustered { k, variance, bounds } => {
                if k < 1 || k > n {
                    return Err(Error::InvalidPopulation(format!(
                        "cluster count {k} outside 1..={n}"
                    )));
                }
                if !(variance > 0.0) {
                    return Err(Error::InvalidPopulation(format!(
                        "cluster variance {variance} must be positive"
                    )));
                }
                bounds
            }
        };
        if !(bounds.0 < bounds.1) || !bounds.0.is_finite() || !bounds.1.is_finite() {
            return Err(Error::InvalidPopulation(format!(
                "invalid bounds ({}, {})",
                bounds.0, bounds.1
            )));
        }
        Ok(())
    }
}

/// Draw a population; the labels give each individual's generating cluster
/// (all zero for CSR). Exact coordinate collisions are redrawn.
pub fn generate_population(
    scenario: SpatialScenario,
    n: usize,
    rng: &mut impl Rng,
) -> Result<(Population, Vec<usize>)> {
    if n == 0 {
        return Err(Error::InvalidPopulation("population size 0".into()));
    }
    scenario.validate(n)?;
    let mut seen: HashSet<(u64, u64)> = HashSet::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    let mut draw_unique = |rng: &mut dyn FnMut() -> (f64, f64)| {
        loop {
            let p = rng();
            if seen.insert((p.0.to_bits(), p.1.to_bits())) {
                return p;
            }
        }
    };
    let labels = match scenario {
        SpatialScenario::Csr { bounds } => {
            for _ in 0..n {
                coords.push(draw_unique(&mut || {
                    (rng.gen_range(bounds.0..bounds.1), rng.gen_range(bounds.0..bounds.1))
                }));
            }
            vec![0; n]
        }
        SpatialScenario::Clustered { k, variance, bounds } => {
            let means: Vec<(f64, f64)> = (0..k)
                .map(|_| (rng.gen_range(bounds.0..bounds.1), rng.gen_range(bounds.0..bounds.1)))
                .collect();
            let noise = Normal::new(0.0, variance.sqrt()).expect("positive variance");
            let mut labels = Vec::with_capacity(n);
            let base = n / k;
            let extra = n % k;
            for (m, &mean) in means.iter().enumerate() {
                let size = base + usize::from(m < extra);
                for _ in 0..size {
                    coords.push(draw_unique(&mut || {
                        (mean.0 + noise.sample(rng), mean.1 + noise.sample(rng))
                    }));
                    labels.push(m);
                }
            }
            labels
        }
    };
    Ok((Population::new(coords)?, labels))
}

/// Simulation settings on top of a model specification.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub t_max: u32,
    pub initial_count: usize,
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self, n: usize) -> Result<()> {
        self.spec.validate(n)?;
        self.params.validate(self.spec.spark)?;
        if self.t_max < 1 {
            return Err(Error::InvalidSpec("t_max must be at least 1".into()));
        }
        if self.initial_count < 1 || self.initial_count > n {
            return Err(Error::InvalidSpec(format!(
                "initial_count {} outside 1..={n}",
                self.initial_count
            )));
        }
        match self.spec.infectious_period {
            Some(p) if p >= 1 => {}
            _ => {
                return Err(Error::InvalidSpec(
                    "simulation requires infectious_period >= 1".into(),
                ))
            }
        }
        if self.spec.frame == Frame::Seir && self.spec.latent_period.is_none() {
            return Err(Error::InvalidSpec("SEIR simulation requires latent_period".into()));
        }
        Ok(())
    }
}

/// SIR epidemic from `initial_count` uniformly chosen day-0 infectives.
pub fn simulate_epidemic(
    pop: &Population,
    dist: &DistanceMatrix,
    config: &SimConfig,
) -> Result<EpidemicRecord> {
    if config.spec.frame != Frame::Sir {
        return Err(Error::InvalidSpec("simulate_epidemic requires the SIR frame".into()));
    }
    simulate_seeded(pop, dist, config)
}

/// SEIR epidemic; initial individuals are exposed at day 0 and become
/// infectious after the latent period.
pub fn simulate_seir(
    pop: &Population,
    dist: &DistanceMatrix,
    config: &SimConfig,
) -> Result<EpidemicRecord> {
    if config.spec.frame != Frame::Seir {
        return Err(Error::InvalidSpec("simulate_seir requires the SEIR frame".into()));
    }
    simulate_seeded(pop, dist, config)
}

fn simulate_seeded(
    pop: &Population,
    dist: &DistanceMatrix,
    config: &SimConfig,
) -> Result<EpidemicRecord> {
    config.validate(pop.len())?;
    let mut rng = seeded_rng(config.seed);
    let n = pop.len();
    let mut initials = sample(&mut rng, n, config.initial_count).into_vec();
    initials.sort_unstable();
    let latent = match config.spec.frame {
        Frame::Sir => 0,
        Frame::Seir => config.spec.latent_period.unwrap(),
    };
    let period = config.spec.infectious_period.unwrap();
    let mut infection_time = vec![None; n];
    let mut removal_day = vec![None; n];
    for &id in &initials {
        infection_time[id] = Some(0);
        removal_day[id] = Some(latent + period);
    }
    simulate_from_state(
        pop,
        dist,
        &config.spec,
        &config.params,
        &infection_time,
        &removal_day,
        0,
        config.t_max,
        &mut rng,
    )
}

/// Advance the epidemic from a known state at `start_t` through `t_max`.
///
/// `infection_time` holds the recorded entry day (I-entry for SIR, E-entry
/// for SEIR) of everybody infected so far; `removal_day` their day of R entry
/// (scheduled or recorded), which may exceed `t_max`. Every susceptible takes
/// one draw per day even at zero rate, keeping the stream position
/// independent of the parameters.
#[allow(clippy::too_many_arguments)]
pub fn simulate_from_state(
    pop: &Population,
    dist: &DistanceMatrix,
    spec: &ModelSpec,
    params: &ModelParams,
    infection_time: &[Option<u32>],
    removal_day: &[Option<u32>],
    start_t: u32,
    t_max: u32,
    rng: &mut ChaCha8Rng,
) -> Result<EpidemicRecord> {
    spec.validate(pop.len())?;
    params.validate(spec.spark)?;
    let n = pop.len();
    if infection_time.len() != n || removal_day.len() != n {
        return Err(Error::InvalidSpec("state vectors must cover the population".into()));
    }
    let latent = match spec.frame {
        Frame::Sir => 0,
        Frame::Seir => spec
            .latent_period
            .ok_or_else(|| Error::InvalidSpec("SEIR simulation requires latent_period".into()))?,
    };
    let period = match spec.infectious_period {
        Some(p) if p >= 1 => p,
        _ => return Err(Error::InvalidSpec("simulation requires infectious_period >= 1".into())),
    };

    let k = spec.clusters.as_ref().map_or(1, |c| c.k());
    let member = |i: usize| spec.clusters.as_ref().map_or(0, |c| c.member_of(i));
    let pd = match spec.spark {
        SparkSpec::M1 | SparkSpec::M2 | SparkSpec::M4 => {
            let clusters = spec.clusters.as_ref().unwrap();
            powered_centroid_distances(
                &clusters.centroid_distances(),
                k,
                params.beta_tilde.unwrap(),
            )
        }
        _ => Vec::new(),
    };

    let mut infection_time = infection_time.to_vec();
    let mut removal_day = removal_day.to_vec();
    let mut i_day: Vec<Option<u32>> =
        infection_time.iter().map(|e| e.map(|d| d + latent)).collect();

    for t in start_t..t_max {
        let mut infectious: Vec<Vec<usize>> = vec![Vec::new(); k];
        let mut counts = vec![0usize; k];
        for id in 0..n {
            if let (Some(d), Some(r)) = (i_day[id], removal_day[id]) {
                if d <= t && t < r {
                    infectious[member(id)].push(id);
                    counts[member(id)] += 1;
                }
            }
        }
        let cents = (spec.spark == SparkSpec::M3).then(|| {
            infectious
                .iter()
                .map(|ids| {
                    if ids.is_empty() {
                        return None;
                    }
                    let inv = 1.0 / ids.len() as f64;
                    let (sx, sy) = ids
                        .iter()
                        .fold((0.0, 0.0), |(sx, sy), &j| {
                            let (x, y) = pop.coord(j);
                            (sx + x, sy + y)
                        });
                    Some((sx * inv, sy * inv))
                })
                .collect::<Vec<_>>()
        });
        let bases = spark_bases_day(spec.spark, params, &counts, &pd, cents.as_deref());

        let mut newly = Vec::new();
        for i in 0..n {
            if infection_time[i].is_some() {
                continue;
            }
            let row = dist.row(i);
            let mut sum = 0.0;
            for &j in &infectious[member(i)] {
                sum += row[j].powf(-params.beta);
            }
            let rate = params.alpha * sum + bases[member(i)];
            if !rate.is_finite() {
                return Err(Error::NonFiniteRate { id: i, t });
            }
            let p = infection_probability(rate);
            if rng.gen::<f64>() < p {
                newly.push(i);
            }
        }
        for i in newly {
            infection_time[i] = Some(t + 1);
            i_day[i] = Some(t + 1 + latent);
            removal_day[i] = Some(t + 1 + latent + period);
        }
    }

    let removal_time: Vec<Option<u32>> = infection_time
        .iter()
        .zip(&removal_day)
        .map(|(inf, rem)| match (inf, rem) {
            (Some(_), Some(r)) if *r <= t_max => Some(*r),
            _ => None,
        })
        .collect();
    EpidemicRecord::new(infection_time, removal_time, t_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::build_timeline;
    use crate::kernel::ClusterAssignment;
    use crate::seeds::seeded_rng;

    fn csr_pop(n: usize, seed: u64) -> Population {
        let mut rng = seeded_rng(seed);
        generate_population(SpatialScenario::csr(), n, &mut rng).unwrap().0
    }

    #[test]
    fn csr_population_is_in_bounds_and_deterministic() {
        let mut rng = seeded_rng(7);
        let (pop, labels) = generate_population(SpatialScenario::csr(), 100, &mut rng).unwrap();
        assert!(labels.iter().all(|&m| m == 0));
        for id in 0..pop.len() {
            let (x, y) = pop.coord(id);
            assert!((0.0..30.0).contains(&x) && (0.0..30.0).contains(&y));
        }
        let mut rng2 = seeded_rng(7);
        let (pop2, _) = generate_population(SpatialScenario::csr(), 100, &mut rng2).unwrap();
        assert_eq!(pop.coords(), pop2.coords());
    }

    #[test]
    fn clustered_split_is_as_even_as_possible() {
        let mut rng = seeded_rng(3);
        let (_, labels) =
            generate_population(SpatialScenario::clustered(3, 3.0), 100, &mut rng).unwrap();
        let mut counts = [0usize; 3];
        for &m in &labels {
            counts[m] += 1;
        }
        assert_eq!(counts, [34, 33, 33]);
        // Labels come in contiguous ascending blocks.
        assert!(labels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn clustered_rejects_more_clusters_than_individuals() {
        let mut rng = seeded_rng(3);
        let err = generate_population(SpatialScenario::clustered(5, 3.0), 4, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidPopulation(_)), "{err}");
    }

    fn sir_config(alpha: f64, beta: f64, t_max: u32, period: u32, seed: u64) -> SimConfig {
        SimConfig {
            spec: ModelSpec::sir(SparkSpec::Zero).with_infectious_period(period),
            params: ModelParams::basic(alpha, beta),
            t_max,
            initial_count: 1,
            seed,
        }
    }

    #[test]
    fn same_seed_reproduces_the_record() {
        let pop = csr_pop(60, 11);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let cfg = sir_config(0.6, 2.0, 15, 3, 42);
        let a = simulate_epidemic(&pop, &dist, &cfg).unwrap();
        let b = simulate_epidemic(&pop, &dist, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vanishing_alpha_leaves_only_initials() {
        let pop = csr_pop(40, 5);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let mut cfg = sir_config(1e-15, 2.0, 20, 3, 9);
        cfg.initial_count = 2;
        let rec = simulate_epidemic(&pop, &dist, &cfg).unwrap();
        let infected = (0..pop.len()).filter(|&i| rec.infection_time(i).is_some()).count();
        assert_eq!(infected, 2);
        assert!((0..pop.len()).all(|i| rec.infection_time(i) != Some(1)));
    }

    #[test]
    fn infectious_period_spans_three_consecutive_days() {
        let pop = csr_pop(50, 2);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let cfg = sir_config(0.8, 1.5, 12, 3, 4);
        let rec = simulate_epidemic(&pop, &dist, &cfg).unwrap();
        let tl = build_timeline(&rec, Frame::Sir, None, None).unwrap();
        let mut checked = 0;
        for id in 0..pop.len() {
            let Some(e) = tl.i_entry(id) else { continue };
            if e + 3 > 12 {
                continue;
            }
            for t in e..e + 3 {
                assert!(tl.infectious_at(t).contains(&id), "id {id} at {t}");
            }
            if e + 3 < 12 {
                assert!(!tl.infectious_at(e + 3).contains(&id));
            }
            checked += 1;
        }
        assert!(checked > 3, "epidemic too small to exercise the period");
    }

    #[test]
    fn timeline_is_monotone_under_simulation() {
        let pop = csr_pop(50, 20);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let cfg = sir_config(0.9, 1.8, 15, 3, 8);
        let rec = simulate_epidemic(&pop, &dist, &cfg).unwrap();
        let tl = build_timeline(&rec, Frame::Sir, None, None).unwrap();
        for t in 0..15 {
            let s_next: HashSet<_> = tl.susceptible_at(t + 1).iter().collect();
            assert!(tl.susceptible_at(t + 1).iter().all(|i| tl.susceptible_at(t).contains(i)));
            let _ = s_next;
            assert!(tl.removed_at(t).iter().all(|i| tl.removed_at(t + 1).contains(i)));
        }
    }

    #[test]
    fn seir_with_zero_latency_reproduces_the_sir_trace() {
        let pop = csr_pop(40, 13);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let sir = sir_config(0.7, 2.0, 14, 3, 77);
        let seir = SimConfig {
            spec: ModelSpec {
                frame: Frame::Seir,
                latent_period: Some(0),
                ..sir.spec.clone()
            },
            ..sir.clone()
        };
        let a = simulate_epidemic(&pop, &dist, &sir).unwrap();
        let b = simulate_seir(&pop, &dist, &seir).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seir_latency_delays_infectiousness() {
        let pop = csr_pop(40, 14);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let cfg = SimConfig {
            spec: ModelSpec::sir(SparkSpec::Zero)
                .with_infectious_period(4)
                .seir(5),
            params: ModelParams::basic(1.2, 1.2),
            t_max: 20,
            initial_count: 1,
            seed: 3,
        };
        let rec = simulate_seir(&pop, &dist, &cfg).unwrap();
        let tl = build_timeline(&rec, Frame::Seir, Some(5), Some(4)).unwrap();
        let mut secondary = 0;
        for id in 0..pop.len() {
            let Some(exposure) = rec.infection_time(id) else { continue };
            assert_eq!(tl.e_entry(id), Some(exposure));
            if let Some(i_day) = tl.i_entry(id) {
                assert_eq!(i_day, exposure + 5);
            }
            if exposure > 0 {
                secondary += 1;
            }
        }
        assert!(secondary > 0, "no transmission happened");
    }

    #[test]
    fn zero_spark_composite_never_crosses_clusters() {
        let mut rng = seeded_rng(31);
        let (pop, labels) =
            generate_population(SpatialScenario::clustered(3, 3.0), 60, &mut rng).unwrap();
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let clusters = ClusterAssignment::from_membership(&pop, labels.clone()).unwrap();
        let cfg = SimConfig {
            spec: ModelSpec::sir(SparkSpec::Zero)
                .with_infectious_period(3)
                .with_clusters(clusters),
            params: ModelParams::basic(1.5, 1.5),
            t_max: 25,
            initial_count: 1,
            seed: 6,
        };
        let rec = simulate_epidemic(&pop, &dist, &cfg).unwrap();
        let seed_cluster = (0..pop.len())
            .find(|&i| rec.infection_time(i) == Some(0))
            .map(|i| labels[i])
            .unwrap();
        let mut infected = 0;
        for id in 0..pop.len() {
            if rec.infection_time(id).is_some() {
                assert_eq!(labels[id], seed_cluster, "id {id} crossed clusters");
                infected += 1;
            }
        }
        assert!(infected > 1, "epidemic died immediately");
    }

    #[test]
    fn empirical_infection_frequency_matches_the_rate() {
        let pop = Population::new(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let spec = ModelSpec::sir(SparkSpec::Zero).with_infectious_period(5);
        let params = ModelParams::basic(0.8, 2.0);
        let p = infection_probability(0.8);
        let reps = 100_000u32;
        let mut hits = 0u32;
        for s in 0..reps {
            let mut rng = seeded_rng(1000 + s as u64);
            let rec = simulate_from_state(
                &pop,
                &dist,
                &spec,
                &params,
                &[Some(0), None],
                &[Some(5), None],
                0,
                1,
                &mut rng,
            )
            .unwrap();
            if rec.infection_time(1).is_some() {
                hits += 1;
            }
        }
        let freq = hits as f64 / reps as f64;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!(
            (freq - p).abs() <= 3.0 * se,
            "freq {freq} vs p {p} (3se {})",
            3.0 * se
        );
    }

    #[test]
    fn from_state_honours_scheduled_removal() {
        let pop = Population::new(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let spec = ModelSpec::sir(SparkSpec::Zero).with_infectious_period(3);
        let params = ModelParams::basic(0.8, 2.0);
        let mut rng = seeded_rng(0);
        let rec = simulate_from_state(
            &pop,
            &dist,
            &spec,
            &params,
            &[Some(0), None],
            &[Some(2), None],
            0,
            6,
            &mut rng,
        )
        .unwrap();
        assert_eq!(rec.removal_time(0), Some(2));
        // Infection of id 1, if any, happened while id 0 was still infectious.
        if let Some(t) = rec.infection_time(1) {
            assert!(t <= 2);
        }
    }
}
