//! Infectivity rates and the (composite) discrete-time likelihood.
//!
//! The full-population likelihood multiplies one Bernoulli factor per
//! susceptible per day over days 1..t_max-1: infection with probability
//! P(i,t) = 1 - exp(-(alpha * sum_j d_ij^-beta + spark)), escape with the
//! complement, summing over the infectious j in i's group (the whole
//! population, or i's cluster in composite mode). Escape log-probability is
//! exactly the negated rate.

use rayon::prelude::*;

use crate::epidemic::{build_timeline, CompartmentTimeline, EpidemicRecord};
use crate::error::{Error, Result};
use crate::params::{ModelParams, ModelSpec, SparkSpec};
use crate::population::{euclidean, DistanceMatrix, Population};
use crate::stats::ln_1m_exp;

/// Partition of the population into K clusters with one planar centroid each.
///
/// Labels are compact (every cluster 0..K-1 occupied). Centroids produced by
/// `from_membership` are member means; clustering point estimates may supply
/// their own centroids via `with_centroids`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    membership: Vec<usize>,
    members: Vec<Vec<usize>>,
    centroids: Vec<(f64, f64)>,
}

impl ClusterAssignment {
    pub fn from_membership(pop: &Population, membership: Vec<usize>) -> Result<Self> {
        let members = collect_members(pop.len(), &membership)?;
        let centroids = members
            .iter()
            .map(|ids| {
                let inv = 1.0 / ids.len() as f64;
                let (sx, sy) = ids
                    .iter()
                    .fold((0.0, 0.0), |(sx, sy), &i| (sx + pop.coord(i).0, sy + pop.coord(i).1));
                (sx * inv, sy * inv)
            })
            .collect();
        Ok(Self { membership, members, centroids })
    }

    /// Assignment with externally supplied centroids (e.g. posterior medians).
    pub fn with_centroids(
        n: usize,
        membership: Vec<usize>,
        centroids: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let members = collect_members(n, &membership)?;
        if centroids.len() != members.len() {
            return Err(Error::InvalidAssignment(format!(
                "{} centroids for {} clusters",
                centroids.len(),
                members.len()
            )));
        }
        Ok(Self { membership, members, centroids })
    }

    /// Trivial single-cluster assignment covering the whole population.
    pub fn single_cluster(pop: &Population) -> Self {
        Self::from_membership(pop, vec![0; pop.len()]).expect("non-empty population")
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    pub fn member_of(&self, id: usize) -> usize {
        self.membership[id]
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    /// Ids in cluster k, ascending.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    pub fn centroid(&self, k: usize) -> (f64, f64) {
        self.centroids[k]
    }

    pub fn centroids(&self) -> &[(f64, f64)] {
        &self.centroids
    }

    /// K x K matrix of centroid distances, row-major.
    pub fn centroid_distances(&self) -> Vec<f64> {
        let k = self.k();
        let mut d = vec![0.0; k * k];
        for a in 0..k {
            for b in (a + 1)..k {
                let dist = euclidean(self.centroids[a], self.centroids[b]);
                d[a * k + b] = dist;
                d[b * k + a] = dist;
            }
        }
        d
    }
}

fn collect_members(n: usize, membership: &[usize]) -> Result<Vec<Vec<usize>>> {
    if membership.len() != n {
        return Err(Error::InvalidAssignment(format!(
            "{} labels for {n} individuals",
            membership.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidAssignment("empty assignment".into()));
    }
    let k = membership.iter().max().copied().unwrap_or(0) + 1;
    let mut members = vec![Vec::new(); k];
    for (id, &m) in membership.iter().enumerate() {
        members[m].push(id);
    }
    if let Some(empty) = members.iter().position(|ids| ids.is_empty()) {
        return Err(Error::InvalidAssignment(format!(
            "cluster {empty} has no members; labels must be compact"
        )));
    }
    Ok(members)
}

/// P(i,t) = 1 - exp(-rate), stable for small rates.
pub fn infection_probability(rate: f64) -> f64 {
    assert!(rate >= 0.0, "negative rate {rate}");
    -(-rate).exp_m1()
}

/// Between-cluster spark term for a susceptible in cluster `k` at day `t`.
pub fn spark_rate(
    pop: &Population,
    timeline: &CompartmentTimeline,
    clusters: &ClusterAssignment,
    spark: SparkSpec,
    params: &ModelParams,
    k: usize,
    t: u32,
) -> Result<f64> {
    params.validate(spark)?;
    let counts = infectious_counts(timeline, clusters, t);
    let pd = match spark {
        SparkSpec::M1 | SparkSpec::M2 | SparkSpec::M4 => powered_centroid_distances(
            &clusters.centroid_distances(),
            clusters.k(),
            params.beta_tilde.unwrap(),
        ),
        _ => Vec::new(),
    };
    let cents = (spark == SparkSpec::M3)
        .then(|| infectious_centroids(pop, timeline, clusters, t));
    let bases = spark_bases_day(spark, params, &counts, &pd, cents.as_deref());
    Ok(bases[k])
}

/// Spark addend per receiving cluster for one day's state. `pd` holds the
/// K x K centroid distances already raised to -beta_tilde (unused for Zero,
/// Constant and M3); `cents` holds the per-cluster infectious centroids
/// (M3 only).
pub(crate) fn spark_bases_day(
    spark: SparkSpec,
    params: &ModelParams,
    counts: &[usize],
    pd: &[f64],
    cents: Option<&[Option<(f64, f64)>]>,
) -> Vec<f64> {
    let k = counts.len();
    match spark {
        SparkSpec::Zero => vec![0.0; k],
        SparkSpec::Constant => vec![params.epsilon.unwrap(); k],
        SparkSpec::M1 | SparkSpec::M2 | SparkSpec::M4 => {
            let scale = if spark == SparkSpec::M1 {
                params.epsilon.unwrap()
            } else {
                params.alpha
            };
            let w: Vec<f64> = counts
                .iter()
                .map(|&c| {
                    let m = c as f64;
                    if spark == SparkSpec::M4 {
                        let d = params.delta.unwrap();
                        if c == 0 {
                            0.0
                        } else if d == 1.0 {
                            m
                        } else {
                            m.powf(d)
                        }
                    } else {
                        m
                    }
                })
                .collect();
            (0..k)
                .map(|a| {
                    let mut sum = 0.0;
                    for b in 0..k {
                        if b != a && counts[b] > 0 {
                            sum += w[b] * pd[a * k + b];
                        }
                    }
                    scale * sum
                })
                .collect()
        }
        SparkSpec::M3 => {
            let bt = params.beta_tilde.unwrap();
            let cents = cents.expect("M3 needs infectious centroids");
            (0..k)
                .map(|a| {
                    let Some(ca) = cents[a] else { return 0.0 };
                    let mut sum = 0.0;
                    for b in 0..k {
                        if b == a || counts[b] == 0 {
                            continue;
                        }
                        let Some(cb) = cents[b] else { continue };
                        sum += counts[b] as f64 * euclidean(ca, cb).powf(-bt);
                    }
                    params.alpha * sum
                })
                .collect()
        }
    }
}

/// K x K centroid distances raised to -beta_tilde for the table sparks.
pub(crate) fn powered_centroid_distances(cd: &[f64], k: usize, beta_tilde: f64) -> Vec<f64> {
    let mut pd = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            if a != b {
                pd[a * k + b] = cd[a * k + b].powf(-beta_tilde);
            }
        }
    }
    pd
}

pub(crate) fn infectious_counts(
    timeline: &CompartmentTimeline,
    clusters: &ClusterAssignment,
    t: u32,
) -> Vec<usize> {
    let mut counts = vec![0usize; clusters.k()];
    for &j in timeline.infectious_at(t) {
        counts[clusters.member_of(j)] += 1;
    }
    counts
}

fn infectious_centroids(
    pop: &Population,
    timeline: &CompartmentTimeline,
    clusters: &ClusterAssignment,
    t: u32,
) -> Vec<Option<(f64, f64)>> {
    let k = clusters.k();
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for &j in timeline.infectious_at(t) {
        let m = clusters.member_of(j);
        let (x, y) = pop.coord(j);
        sums[m].0 += x;
        sums[m].1 += y;
        sums[m].2 += 1;
    }
    sums.into_iter()
        .map(|(sx, sy, c)| (c > 0).then(|| (sx / c as f64, sy / c as f64)))
        .collect()
}

/// Force of infection on susceptible `i` at day `t`: the distance-kernel sum
/// over the infectious in i's group plus the spark term. Reference
/// implementation; `Evaluator` computes the same quantity with per-day
/// precomputation.
pub fn infectivity_rate(
    pop: &Population,
    dist: &DistanceMatrix,
    timeline: &CompartmentTimeline,
    clusters: Option<&ClusterAssignment>,
    spark: SparkSpec,
    params: &ModelParams,
    i: usize,
    t: u32,
) -> Result<f64> {
    params.validate(spark)?;
    if spark.needs_clusters() && clusters.is_none() {
        return Err(Error::InvalidSpec(format!(
            "spark {} requires a cluster assignment",
            spark.name()
        )));
    }
    let row = dist.row(i);
    let mut sum = 0.0;
    for &j in timeline.infectious_at(t) {
        if let Some(c) = clusters {
            if c.member_of(j) != c.member_of(i) {
                continue;
            }
        }
        sum += row[j].powf(-params.beta);
    }
    let spark_term = match clusters {
        Some(c) => spark_rate(pop, timeline, c, spark, params, c.member_of(i), t)?,
        None => match spark {
            SparkSpec::Zero => 0.0,
            SparkSpec::Constant => params.epsilon.unwrap(),
            _ => unreachable!("checked above"),
        },
    };
    let rate = params.alpha * sum + spark_term;
    if !rate.is_finite() {
        return Err(Error::NonFiniteRate { id: i, t });
    }
    Ok(rate)
}

struct Step {
    infectious: Vec<usize>,
    new_cases: Vec<usize>,
    escapes: Vec<usize>,
    /// Index into the per-day tables (t - 1).
    ti: usize,
}

struct ClusterSteps {
    k: usize,
    steps: Vec<Step>,
}

/// Likelihood evaluator with the record-dependent structure resolved once:
/// per-day per-cluster index lists, infectious counts, centroid geometry and
/// the conditioned-on initial infections. Each `log_likelihood` call then only
/// depends on the parameter values.
pub struct Evaluator<'a> {
    dist: &'a DistanceMatrix,
    spec: &'a ModelSpec,
    by_cluster: Vec<ClusterSteps>,
    /// Infectious count per (day-1, cluster).
    counts: Vec<Vec<usize>>,
    /// Static centroid distances, K x K (composite only).
    cd: Vec<f64>,
    /// Per (day-1, cluster) infectious-member centroids (M3 only).
    inf_centroids: Vec<Vec<Option<(f64, f64)>>>,
    conditioned: Vec<bool>,
    units: usize,
    k: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        pop: &'a Population,
        dist: &'a DistanceMatrix,
        record: &EpidemicRecord,
        spec: &'a ModelSpec,
    ) -> Result<Self> {
        spec.validate(pop.len())?;
        if record.len() != pop.len() {
            return Err(Error::InvalidSpec(format!(
                "record covers {} individuals, population has {}",
                record.len(),
                pop.len()
            )));
        }
        let timeline = build_timeline(record, spec.frame, spec.latent_period, spec.infectious_period)?;
        let n = pop.len();
        let single;
        let clusters = match &spec.clusters {
            Some(c) => c,
            None => {
                single = ClusterAssignment::single_cluster(pop);
                &single
            }
        };
        let k = clusters.k();

        let mut conditioned = vec![false; n];
        if let Some(first) = timeline.first_infectious_day() {
            for id in 0..n {
                if timeline.i_entry(id) == Some(first) {
                    conditioned[id] = true;
                }
            }
        }
        // The zero spark assigns probability zero to the first infection
        // entering a cluster with no infectious members, so each cluster's
        // earliest infection is conditioned on as well. Other sparks model
        // those entries; M3 in particular scores them as impossible because
        // the receiving cluster has no infectious centroid yet.
        if spec.composite() && spec.spark == SparkSpec::Zero {
            for kk in 0..k {
                let first = clusters
                    .members(kk)
                    .iter()
                    .filter_map(|&id| timeline.i_entry(id))
                    .min();
                if let Some(first) = first {
                    for &id in clusters.members(kk) {
                        if timeline.i_entry(id) == Some(first) {
                            conditioned[id] = true;
                        }
                    }
                }
            }
        }

        let t_max = timeline.t_max();
        let days: Vec<u32> = if t_max >= 2 { (1..t_max).collect() } else { Vec::new() };

        let mut counts = Vec::with_capacity(days.len());
        let mut inf_centroids = Vec::new();
        for &t in &days {
            counts.push(infectious_counts(&timeline, clusters, t));
            if spec.spark == SparkSpec::M3 {
                inf_centroids.push(infectious_centroids(pop, &timeline, clusters, t));
            }
        }

        let mut by_cluster: Vec<ClusterSteps> =
            (0..k).map(|kk| ClusterSteps { k: kk, steps: Vec::new() }).collect();
        let mut units = 0;
        for (ti, &t) in days.iter().enumerate() {
            let mut inf: Vec<Vec<usize>> = vec![Vec::new(); k];
            for &j in timeline.infectious_at(t) {
                inf[clusters.member_of(j)].push(j);
            }
            let mut new_cases: Vec<Vec<usize>> = vec![Vec::new(); k];
            for &i in timeline.newly_infectious_at(t + 1) {
                if !conditioned[i] {
                    new_cases[clusters.member_of(i)].push(i);
                }
            }
            let mut escapes: Vec<Vec<usize>> = vec![Vec::new(); k];
            for &i in timeline.susceptible_at(t + 1) {
                escapes[clusters.member_of(i)].push(i);
            }
            for kk in 0..k {
                if new_cases[kk].is_empty() && escapes[kk].is_empty() {
                    continue;
                }
                units += new_cases[kk].len() + escapes[kk].len();
                by_cluster[kk].steps.push(Step {
                    infectious: std::mem::take(&mut inf[kk]),
                    new_cases: std::mem::take(&mut new_cases[kk]),
                    escapes: std::mem::take(&mut escapes[kk]),
                    ti,
                });
            }
        }

        let cd = if spec.composite() { clusters.centroid_distances() } else { Vec::new() };

        Ok(Self { dist, spec, by_cluster, counts, cd, inf_centroids, conditioned, units, k })
    }

    /// Number of Bernoulli units in the likelihood product.
    pub fn units(&self) -> usize {
        self.units
    }

    /// Ids whose infection terms are conditioned on (excluded).
    pub fn conditioned_ids(&self) -> Vec<usize> {
        (0..self.conditioned.len()).filter(|&i| self.conditioned[i]).collect()
    }

    /// Per (day-1, cluster) spark addends for the given parameters.
    fn spark_bases(&self, params: &ModelParams) -> Vec<Vec<f64>> {
        let pd = match self.spec.spark {
            SparkSpec::M1 | SparkSpec::M2 | SparkSpec::M4 => {
                powered_centroid_distances(&self.cd, self.k, params.beta_tilde.unwrap())
            }
            _ => Vec::new(),
        };
        self.counts
            .iter()
            .enumerate()
            .map(|(ti, counts)| {
                let cents = (self.spec.spark == SparkSpec::M3)
                    .then(|| self.inf_centroids[ti].as_slice());
                spark_bases_day(self.spec.spark, params, counts, &pd, cents)
            })
            .collect()
    }

    fn cluster_sum(&self, cs: &ClusterSteps, params: &ModelParams, bases: &[Vec<f64>]) -> Result<f64> {
        let alpha = params.alpha;
        let beta = params.beta;
        let mut acc = 0.0;
        for step in &cs.steps {
            let base = bases[step.ti][cs.k];
            for &i in &step.new_cases {
                let r = self.rate(i, &step.infectious, alpha, beta, base)?;
                acc += ln_1m_exp(-r);
            }
            for &i in &step.escapes {
                let r = self.rate(i, &step.infectious, alpha, beta, base)?;
                acc -= r;
            }
        }
        Ok(acc)
    }

    #[inline]
    fn rate(&self, i: usize, infectious: &[usize], alpha: f64, beta: f64, base: f64) -> Result<f64> {
        let row = self.dist.row(i);
        let mut sum = 0.0;
        for &j in infectious {
            sum += row[j].powf(-beta);
        }
        let r = alpha * sum + base;
        if !r.is_finite() {
            // ti is not a day; report via the caller's id only.
            return Err(Error::NonFiniteRate { id: i, t: 0 });
        }
        Ok(r)
    }

    /// Joint log-likelihood. Per-cluster partial sums are accumulated in
    /// ascending cluster index regardless of how the clusters were scheduled,
    /// so the result is identical at any worker count.
    pub fn log_likelihood(&self, params: &ModelParams) -> Result<f64> {
        params.validate(self.spec.spark)?;
        let bases = self.spark_bases(params);
        let partials: Vec<Result<f64>> = if self.spec.composite() && self.k > 1 {
            self.by_cluster
                .par_iter()
                .map(|cs| self.cluster_sum(cs, params, &bases))
                .collect()
        } else {
            self.by_cluster
                .iter()
                .map(|cs| self.cluster_sum(cs, params, &bases))
                .collect()
        };
        let mut total = 0.0;
        for p in partials {
            total += p?;
        }
        Ok(total)
    }

    /// Per-unit log-likelihood contributions in a fixed order: cluster
    /// ascending, then day ascending, new cases before escapes, ids ascending.
    pub fn pointwise(&self, params: &ModelParams) -> Result<Vec<f64>> {
        params.validate(self.spec.spark)?;
        let bases = self.spark_bases(params);
        let mut out = Vec::with_capacity(self.units);
        for cs in &self.by_cluster {
            for step in &cs.steps {
                let base = bases[step.ti][cs.k];
                for &i in &step.new_cases {
                    let r = self.rate(i, &step.infectious, params.alpha, params.beta, base)?;
                    out.push(ln_1m_exp(-r));
                }
                for &i in &step.escapes {
                    let r = self.rate(i, &step.infectious, params.alpha, params.beta, base)?;
                    out.push(-r);
                }
            }
        }
        Ok(out)
    }
}

/// Full-population log-likelihood (spark Zero or Constant, no clusters).
pub fn log_likelihood(
    pop: &Population,
    dist: &DistanceMatrix,
    record: &EpidemicRecord,
    spec: &ModelSpec,
    params: &ModelParams,
) -> Result<f64> {
    if spec.composite() {
        return Err(Error::InvalidSpec(
            "full-population likelihood called with a cluster assignment".into(),
        ));
    }
    Evaluator::new(pop, dist, record, spec)?.log_likelihood(params)
}

/// Composite log-likelihood: within-cluster kernel sums plus the spark term,
/// one independent factor per cluster.
pub fn composite_log_likelihood(
    pop: &Population,
    dist: &DistanceMatrix,
    record: &EpidemicRecord,
    spec: &ModelSpec,
    params: &ModelParams,
) -> Result<f64> {
    if !spec.composite() {
        return Err(Error::InvalidSpec(
            "composite likelihood requires a cluster assignment".into(),
        ));
    }
    Evaluator::new(pop, dist, record, spec)?.log_likelihood(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::Frame;
    use approx::assert_relative_eq;

    fn line_pop(xs: &[f64]) -> Population {
        Population::new(xs.iter().map(|&x| (x, 0.0)).collect()).unwrap()
    }

    fn sir_record(inf: &[Option<u32>], rem: &[Option<u32>], t_max: u32) -> EpidemicRecord {
        EpidemicRecord::new(inf.to_vec(), rem.to_vec(), t_max).unwrap()
    }

    #[test]
    fn probability_examples() {
        assert_relative_eq!(infection_probability(0.8), 0.5506710358827784, max_relative = 1e-12);
        assert_relative_eq!(infection_probability(0.1), 0.09516258196404048, max_relative = 1e-12);
        assert_eq!(infection_probability(0.0), 0.0);
        // Tiny rates keep full precision.
        assert_relative_eq!(infection_probability(1e-12), 1e-12, max_relative = 1e-9);
    }

    #[test]
    #[should_panic]
    fn probability_rejects_negative_rate() {
        infection_probability(-0.1);
    }

    #[test]
    fn rate_single_infectious_at_unit_distance() {
        let pop = line_pop(&[0.0, 1.0, 2.0]);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let record = sir_record(&[Some(0), None, None], &[None, None, None], 3);
        let tl = build_timeline(&record, Frame::Sir, None, None).unwrap();
        let p = ModelParams::basic(0.8, 2.0);
        let r1 =
            infectivity_rate(&pop, &dist, &tl, None, SparkSpec::Zero, &p, 1, 1).unwrap();
        assert_relative_eq!(r1, 0.8, max_relative = 1e-12);
        let r2 =
            infectivity_rate(&pop, &dist, &tl, None, SparkSpec::Zero, &p, 2, 1).unwrap();
        assert_relative_eq!(r2, 0.2, max_relative = 1e-12);
    }

    #[test]
    fn rate_zero_when_nobody_infectious() {
        let pop = line_pop(&[0.0, 1.0]);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let record = sir_record(&[None, None], &[None, None], 3);
        let tl = build_timeline(&record, Frame::Sir, None, None).unwrap();
        let p = ModelParams::basic(0.8, 2.0);
        let r = infectivity_rate(&pop, &dist, &tl, None, SparkSpec::Zero, &p, 0, 1).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn nonfinite_rate_reported() {
        // 0.001^-200 overflows f64.
        let pop = Population::new(vec![(0.0, 0.0), (0.001, 0.0)]).unwrap();
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let record = sir_record(&[Some(0), None], &[None, None], 3);
        let tl = build_timeline(&record, Frame::Sir, None, None).unwrap();
        let p = ModelParams::basic(0.8, 200.0);
        let err = infectivity_rate(&pop, &dist, &tl, None, SparkSpec::Zero, &p, 1, 1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteRate { id: 1, .. }), "{err}");
    }

    /// Two clusters at centroid distance 4, two infectious in the other
    /// cluster, beta_tilde 1, alpha 0.8: M2 spark = 0.8 * 2 * 4^-1.
    fn spark_fixture() -> (Population, ClusterAssignment, EpidemicRecord) {
        let pop = Population::new(vec![
            (0.0, 0.0),
            (0.0, 2.0),
            (4.0, 0.0),
            (4.0, 2.0),
        ])
        .unwrap();
        let clusters = ClusterAssignment::from_membership(&pop, vec![0, 0, 1, 1]).unwrap();
        assert_eq!(clusters.centroid(0), (0.0, 1.0));
        assert_eq!(clusters.centroid(1), (4.0, 1.0));
        let record = sir_record(
            &[None, None, Some(0), Some(0)],
            &[None, None, None, None],
            3,
        );
        (pop, clusters, record)
    }

    #[test]
    fn spark_m2_frozen_value() {
        let (pop, clusters, record) = spark_fixture();
        let tl = build_timeline(&record, Frame::Sir, None, None).unwrap();
        let p = ModelParams::basic(0.8, 2.0).with_beta_tilde(1.0);
        let s = spark_rate(&pop, &tl, &clusters, SparkSpec::M2, &p, 0, 1).unwrap();
        assert_relative_eq!(s, 0.4, max_relative = 1e-12);
        // Zero spark stays zero; constant returns epsilon.
        let s0 = spark_rate(
            &pop,
            &tl,
            &clusters,
            SparkSpec::Zero,
            &ModelParams::basic(0.8, 2.0),
            0,
            1,
        )
        .unwrap();
        assert_eq!(s0, 0.0);
    }

    #[test]
    fn spark_m4_delta_one_matches_m2_bitwise() {
        let (pop, clusters, record) = spark_fixture();
        let tl = build_timeline(&record, Frame::Sir, None, None).unwrap();
        let m2 = ModelParams::basic(0.8, 2.0).with_beta_tilde(1.3);
        let m4 = m2.with_delta(1.0);
        let s2 = spark_rate(&pop, &tl, &clusters, SparkSpec::M2, &m2, 0, 1).unwrap();
        let s4 = spark_rate(&pop, &tl, &clusters, SparkSpec::M4, &m4, 0, 1).unwrap();
        assert_eq!(s2.to_bits(), s4.to_bits());
    }

    #[test]
    fn spark_m3_empty_side_contributes_zero() {
        let (pop, clusters, record) = spark_fixture();
        let tl = build_timeline(&record, Frame::Sir, None, None).unwrap();
        let p = ModelParams::basic(0.8, 2.0).with_beta_tilde(1.0);
        // Cluster 0 has no infectious members, so its receiving terms vanish.
        let s = spark_rate(&pop, &tl, &clusters, SparkSpec::M3, &p, 0, 1).unwrap();
        assert_eq!(s, 0.0);
        // Symmetric case: cluster 1 looks toward cluster 0 with zero count.
        let s1 = spark_rate(&pop, &tl, &clusters, SparkSpec::M3, &p, 1, 1).unwrap();
        assert_eq!(s1, 0.0);
    }

    #[test]
    fn m3_uses_infectious_centroids_not_static_ones() {
        // Clusters of two; only one member of cluster 1 is infectious, so the
        // infectious centroid sits on that member rather than the mean.
        let pop = Population::new(vec![
            (0.0, 0.0),
            (0.0, 2.0),
            (4.0, 0.0),
            (4.0, 2.0),
        ])
        .unwrap();
        let clusters = ClusterAssignment::from_membership(&pop, vec![0, 0, 1, 1]).unwrap();
        let record = sir_record(
            &[Some(0), None, Some(0), None],
            &[None, None, None, None],
            3,
        );
        let tl = build_timeline(&record, Frame::Sir, None, None).unwrap();
        let p = ModelParams::basic(1.0, 2.0).with_beta_tilde(1.0);
        let s = spark_rate(&pop, &tl, &clusters, SparkSpec::M3, &p, 0, 1).unwrap();
        // Infectious centroids: (0,0) and (4,0), distance 4, one infectious.
        assert_relative_eq!(s, 1.0 * 1.0 * 0.25, max_relative = 1e-12);
    }

    #[test]
    fn single_step_log_likelihood_frozen() {
        // One initial infective, d = 1 to both others; one infected, one escapes.
        // t_max = 2 gives the single product term t = 1.
        let pop = Population::new(vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]).unwrap();
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let record = sir_record(&[Some(0), Some(2), None], &[None, None, None], 2);
        let spec = ModelSpec::sir(SparkSpec::Zero);
        let p = ModelParams::basic(0.8, 2.0);
        let ll = log_likelihood(&pop, &dist, &record, &spec, &p).unwrap();
        assert_relative_eq!(ll, -1.3966176791889753, max_relative = 1e-12);
    }

    #[test]
    fn escapes_only_likelihood_is_sum_of_negated_rates() {
        let pop = line_pop(&[0.0, 1.0, 3.0]);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let record = sir_record(&[Some(0), None, None], &[None, None, None], 4);
        let spec = ModelSpec::sir(SparkSpec::Zero);
        let p = ModelParams::basic(0.7, 1.5);
        let tl = build_timeline(&record, Frame::Sir, None, None).unwrap();
        let mut expect = 0.0;
        for t in 1..4u32 {
            for &i in [1usize, 2].iter() {
                expect -=
                    infectivity_rate(&pop, &dist, &tl, None, SparkSpec::Zero, &p, i, t).unwrap();
            }
        }
        let ll = log_likelihood(&pop, &dist, &record, &spec, &p).unwrap();
        assert_relative_eq!(ll, expect, max_relative = 1e-12);
    }

    #[test]
    fn impossible_infection_gives_neg_infinity() {
        // Initial infective removed at day 1; an infection entering at day 3
        // has no infectious source and zero spark.
        let pop = line_pop(&[0.0, 1.0]);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let record = sir_record(&[Some(0), Some(3)], &[Some(1), None], 4);
        let spec = ModelSpec::sir(SparkSpec::Zero);
        let ll = log_likelihood(&pop, &dist, &record, &spec, &ModelParams::basic(0.8, 2.0))
            .unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn constant_spark_rescues_impossible_infection() {
        let pop = line_pop(&[0.0, 1.0]);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let record = sir_record(&[Some(0), Some(3)], &[Some(1), None], 4);
        let spec = ModelSpec::sir(SparkSpec::Constant);
        let p = ModelParams::basic(0.8, 2.0).with_epsilon(0.05);
        let ll = log_likelihood(&pop, &dist, &record, &spec, &p).unwrap();
        assert!(ll.is_finite());
    }

    #[test]
    fn composite_zero_spark_blocks_other_cluster() {
        let (pop, clusters, record) = spark_fixture();
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let tl = build_timeline(&record, Frame::Sir, None, None).unwrap();
        let p = ModelParams::basic(0.8, 2.0);
        // Susceptible 0 lives in cluster 0; all infectious sit in cluster 1.
        let r = infectivity_rate(
            &pop,
            &dist,
            &tl,
            Some(&clusters),
            SparkSpec::Zero,
            &p,
            0,
            1,
        )
        .unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(infection_probability(r), 0.0);
    }

    #[test]
    fn conditioning_excludes_initial_and_cluster_firsts() {
        let (pop, clusters, record) = spark_fixture();
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let spec = ModelSpec::sir(SparkSpec::Zero).with_clusters(clusters);
        let ev = Evaluator::new(&pop, &dist, &record, &spec).unwrap();
        // Global first day 0 covers ids 2 and 3; cluster 0 has no infections.
        assert_eq!(ev.conditioned_ids(), vec![2, 3]);
    }

    #[test]
    fn composite_single_cluster_matches_full() {
        let pop = line_pop(&[0.0, 1.0, 2.5, 4.0]);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let record = sir_record(
            &[Some(0), Some(2), None, Some(3)],
            &[Some(3), None, None, None],
            5,
        );
        let p = ModelParams::basic(0.9, 1.8);
        let full = log_likelihood(&pop, &dist, &record, &ModelSpec::sir(SparkSpec::Zero), &p)
            .unwrap();
        let spec =
            ModelSpec::sir(SparkSpec::Zero).with_clusters(ClusterAssignment::single_cluster(&pop));
        let comp = composite_log_likelihood(&pop, &dist, &record, &spec, &p).unwrap();
        assert_relative_eq!(comp, full, max_relative = 1e-12);
    }

    #[test]
    fn relabelling_clusters_leaves_likelihood_unchanged() {
        let pop = Population::new(vec![
            (0.0, 0.0),
            (1.0, 0.5),
            (10.0, 0.0),
            (11.0, 0.5),
            (5.0, 8.0),
            (5.5, 9.0),
        ])
        .unwrap();
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let record = sir_record(
            &[Some(0), Some(1), Some(3), None, Some(4), None],
            &[Some(4), Some(5), None, None, None, None],
            6,
        );
        let p = ModelParams::basic(0.8, 2.0).with_beta_tilde(1.2);
        let membership = vec![0, 0, 1, 1, 2, 2];
        let perm = [2usize, 0, 1];
        let relabeled: Vec<usize> = membership.iter().map(|&m| perm[m]).collect();
        let a = ClusterAssignment::from_membership(&pop, membership).unwrap();
        let b = ClusterAssignment::from_membership(&pop, relabeled).unwrap();
        let sa = ModelSpec::sir(SparkSpec::M2).with_clusters(a);
        let sb = ModelSpec::sir(SparkSpec::M2).with_clusters(b);
        let la = composite_log_likelihood(&pop, &dist, &record, &sa, &p).unwrap();
        let lb = composite_log_likelihood(&pop, &dist, &record, &sb, &p).unwrap();
        assert_relative_eq!(la, lb, max_relative = 1e-12);
    }

    #[test]
    fn escape_probabilities_complement_infection_probabilities() {
        for &r in &[1e-9, 1e-4, 0.1, 0.8, 3.0, 20.0] {
            let p_inf = infection_probability(r);
            let p_esc = (-r).exp();
            assert!((p_inf + p_esc - 1.0).abs() < 1e-15, "rate {r}");
        }
    }

    #[test]
    fn escapes_only_likelihood_increases_with_beta_beyond_unit_distances() {
        // All pairwise distances exceed 1, so larger beta weakens every rate.
        let pop = line_pop(&[0.0, 1.5, 3.2, 5.1]);
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let record = sir_record(
            &[Some(0), None, None, None],
            &[None, None, None, None],
            5,
        );
        let spec = ModelSpec::sir(SparkSpec::Zero);
        let mut last = f64::NEG_INFINITY;
        for beta in [0.5, 1.0, 2.0, 4.0] {
            let ll = log_likelihood(
                &pop,
                &dist,
                &record,
                &spec,
                &ModelParams::basic(0.8, beta),
            )
            .unwrap();
            assert!(ll > last, "beta {beta}: {ll} <= {last}");
            last = ll;
        }
    }

    #[test]
    fn pointwise_sums_to_total() {
        let (pop, clusters, record) = spark_fixture();
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let spec = ModelSpec::sir(SparkSpec::M2).with_clusters(clusters);
        let p = ModelParams::basic(0.8, 2.0).with_beta_tilde(1.0);
        let ev = Evaluator::new(&pop, &dist, &record, &spec).unwrap();
        let units = ev.pointwise(&p).unwrap();
        assert_eq!(units.len(), ev.units());
        let total = ev.log_likelihood(&p).unwrap();
        assert_relative_eq!(units.iter().sum::<f64>(), total, max_relative = 1e-12);
    }

    #[test]
    fn empty_cluster_labels_rejected() {
        let pop = line_pop(&[0.0, 1.0, 2.0]);
        let err = ClusterAssignment::from_membership(&pop, vec![0, 0, 2]).unwrap_err();
        assert!(matches!(err, Error::InvalidAssignment(_)), "{err}");
    }
}
