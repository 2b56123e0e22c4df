//! Posterior assessment: WAIC model comparison, highest posterior density
//! intervals, and posterior predictive incidence envelopes rebuilt from a
//! fitted trace, either over the whole epidemic or forecast from a cut day.

use rayon::prelude::*;

use crate::epidemic::{build_timeline, incidence_curve, EpidemicRecord, Frame};
use crate::error::{Error, Result};
use crate::kernel::Evaluator;
use crate::mcmc::McmcTrace;
use crate::params::ModelSpec;
use crate::population::{DistanceMatrix, Population};
use crate::seeds::stream_rng;
use crate::sim::simulate_from_state;
use crate::stats::{log_sum_exp, median, sample_variance};

pub const DEFAULT_PPD_SIMS: usize = 100;
const CURVE_MASS: f64 = 0.95;

/// Per-draw, per-unit log Bernoulli contributions to the likelihood. A unit
/// is one (individual, day) exposure; the column count is the evaluator's
/// unit count for every draw.
#[derive(Debug, Clone)]
pub struct PointwiseLogLik {
    rows: Vec<Vec<f64>>,
    units: usize,
}

impl PointwiseLogLik {
    /// Wrap a (draw x unit) matrix, checking that the rows agree on width.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let units = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != units {
                return Err(Error::Assessment(format!(
                    "draw {i} has {} units, draw 0 has {units}",
                    row.len()
                )));
            }
        }
        Ok(Self { rows, units })
    }

    pub fn draws(&self) -> usize {
        self.rows.len()
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Evaluate the pointwise log-likelihood at every post-burn-in draw of the
/// trace. Draws are independent, so the matrix is filled in parallel.
pub fn pointwise_log_lik(
    trace: &McmcTrace,
    pop: &Population,
    dist: &DistanceMatrix,
    record: &EpidemicRecord,
    spec: &ModelSpec,
) -> Result<PointwiseLogLik> {
    let eval = Evaluator::new(pop, dist, record, spec)?;
    if trace.len() == trace.burn_in() {
        return Err(Error::Assessment("trace has no post-burn-in draws".into()));
    }
    let rows = (trace.burn_in()..trace.len())
        .into_par_iter()
        .map(|i| eval.pointwise(&trace.params_at(i)?))
        .collect::<Result<Vec<_>>>()?;
    PointwiseLogLik::new(rows)
}

#[derive(Debug, Clone, Copy)]
pub struct WaicResult {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// WAIC = -2 (lppd - p_waic) with the variance penalty.
///
/// A unit at -inf under every draw means the model gives the observed event
/// probability zero and is an error. A unit at -inf under only some draws
/// keeps a finite lppd but has unbounded variance, so the penalty and the
/// criterion come back infinite.
pub fn waic(pointwise: &PointwiseLogLik) -> Result<WaicResult> {
    let s = pointwise.draws();
    if s < 2 {
        return Err(Error::Assessment(format!(
            "WAIC needs at least 2 posterior draws, got {s}"
        )));
    }
    let ln_s = (s as f64).ln();
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    let mut col = vec![0.0; s];
    for u in 0..pointwise.units() {
        for (i, row) in pointwise.rows().iter().enumerate() {
            col[i] = row[u];
        }
        let lme = log_sum_exp(&col) - ln_s;
        if lme == f64::NEG_INFINITY {
            return Err(Error::Assessment(format!(
                "unit {u} is impossible under every posterior draw"
            )));
        }
        lppd += lme;
        if col.iter().any(|&v| v == f64::NEG_INFINITY) {
            p_waic = f64::INFINITY;
        } else {
            p_waic += sample_variance(&col);
        }
    }
    Ok(WaicResult { waic: -2.0 * (lppd - p_waic), lppd, p_waic })
}

/// Shortest interval of consecutive order statistics holding `mass` of the
/// samples; ties go to the lowest start index. Needs at least 20 samples.
pub fn hpdi(samples: &[f64], mass: f64) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 20 {
        return Err(Error::Assessment(format!("HPDI needs at least 20 samples, got {n}")));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::Assessment(format!("HPDI mass {mass} outside (0, 1]")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Assessment("HPDI samples must be finite".into()));
    }
    let mut v = samples.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let w = (mass * n as f64).ceil() as usize;
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for i in 0..=(n - w) {
        let width = v[i + w - 1] - v[i];
        if width < best_width {
            best_width = width;
            best = i;
        }
    }
    Ok((v[best], v[best + w - 1]))
}

/// Posterior predictive incidence curves with their pointwise envelope.
/// Entry `t` of a curve counts the new infectious cases on day `t + 1`; day
/// 0 holds only the conditioned-on initial cases and is not part of the
/// curve.
#[derive(Debug, Clone)]
pub struct CurveEnsemble {
    curves: Vec<Vec<u32>>,
    lower: Vec<f64>,
    median: Vec<f64>,
    upper: Vec<f64>,
}

impl CurveEnsemble {
    fn from_curves(curves: Vec<Vec<u32>>) -> Result<Self> {
        let t = curves.first().map_or(0, Vec::len);
        let mut lower = Vec::with_capacity(t);
        let mut med = Vec::with_capacity(t);
        let mut upper = Vec::with_capacity(t);
        for i in 0..t {
            let vals: Vec<f64> = curves.iter().map(|c| f64::from(c[i])).collect();
            let (lo, hi) = hpdi(&vals, CURVE_MASS)?;
            lower.push(lo);
            med.push(median(&vals));
            upper.push(hi);
        }
        Ok(Self { curves, lower, median: med, upper })
    }

    pub fn n_sims(&self) -> usize {
        self.curves.len()
    }

    /// Curve length, one entry per day 1..=t_max.
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn curves(&self) -> &[Vec<u32>] {
        &self.curves
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn median(&self) -> &[f64] {
        &self.median
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// True when `curve[t]` lies inside the envelope at every day.
    pub fn covers(&self, curve: &[u32]) -> bool {
        curve.len() == self.len()
            && curve
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&c, (&lo, &hi))| lo <= f64::from(c) && f64::from(c) <= hi)
    }

    /// Fraction of days where `curve[t]` lies inside the envelope.
    pub fn coverage(&self, curve: &[u32]) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        let hit = curve
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|&(&c, (&lo, &hi))| lo <= f64::from(c) && f64::from(c) <= hi)
            .count();
        hit as f64 / self.len() as f64
    }
}

struct PpdSetup {
    infection: Vec<Option<u32>>,
    removal: Vec<Option<u32>>,
    latent: Option<u32>,
    period: u32,
}

/// Observed state with entries up to `cutoff` kept. Removal days fall back
/// to the frame's fixed schedule when the record has none, so removals stay
/// the exogenous process the likelihood conditions on.
fn observed_state(record: &EpidemicRecord, spec: &ModelSpec, cutoff: u32) -> Result<PpdSetup> {
    let period = spec
        .infectious_period
        .ok_or_else(|| Error::Assessment("predictive simulation needs infectious_period".into()))?;
    let latent = match spec.frame {
        Frame::Sir => None,
        Frame::Seir => Some(
            spec.latent_period
                .ok_or_else(|| Error::Assessment("SEIR prediction needs latent_period".into()))?,
        ),
    };
    let scheduled = |d: u32| d + latent.unwrap_or(0) + period;
    let mut infection = vec![None; record.len()];
    let mut removal = vec![None; record.len()];
    for i in 0..record.len() {
        if let Some(d) = record.infection_time(i) {
            if d <= cutoff {
                infection[i] = Some(d);
                removal[i] = Some(record.removal_time(i).unwrap_or_else(|| scheduled(d)));
            }
        }
    }
    Ok(PpdSetup { infection, removal, latent, period })
}

fn run_ensemble(
    trace: &McmcTrace,
    pop: &Population,
    dist: &DistanceMatrix,
    record: &EpidemicRecord,
    spec: &ModelSpec,
    setup: &PpdSetup,
    start_t: u32,
    n_sims: usize,
    seed: u64,
) -> Result<CurveEnsemble> {
    if n_sims < 20 {
        return Err(Error::Assessment(format!(
            "the envelope needs at least 20 simulations, got {n_sims}"
        )));
    }
    let kept = trace.len() - trace.burn_in();
    if kept == 0 {
        return Err(Error::Assessment("trace has no post-burn-in draws".into()));
    }
    // Stream 0 picks the parameter draws; member s simulates on stream s + 1.
    // Both are fixed ahead of the parallel loop, so the ensemble is identical
    // at any worker count.
    let mut pick = stream_rng(seed, 0);
    let indices: Vec<usize> = (0..n_sims)
        .map(|_| trace.burn_in() + rand::Rng::gen_range(&mut pick, 0..kept))
        .collect();
    let curves = indices
        .into_par_iter()
        .enumerate()
        .map(|(s, idx)| {
            let params = trace.params_at(idx)?;
            let mut rng = stream_rng(seed, 1 + s as u64);
            let rec = simulate_from_state(
                pop,
                dist,
                spec,
                &params,
                &setup.infection,
                &setup.removal,
                start_t,
                record.t_max(),
                &mut rng,
            )?;
            let tl = build_timeline(&rec, spec.frame, setup.latent, Some(setup.period))?;
            Ok(incidence_curve(&tl))
        })
        .collect::<Result<Vec<_>>>()?;
    CurveEnsemble::from_curves(curves)
}

/// Complete-case predictive check: re-simulate the whole epidemic from the
/// originally observed seed cases under `n_sims` posterior parameter draws
/// (sampled with replacement from the post-burn-in trace).
pub fn ppd_complete(
    trace: &McmcTrace,
    pop: &Population,
    dist: &DistanceMatrix,
    record: &EpidemicRecord,
    spec: &ModelSpec,
    n_sims: usize,
    seed: u64,
) -> Result<CurveEnsemble> {
    let d0 = (0..record.len())
        .filter_map(|i| record.infection_time(i))
        .min()
        .ok_or_else(|| Error::Assessment("record has no infections to seed from".into()))?;
    let setup = observed_state(record, spec, d0)?;
    run_ensemble(trace, pop, dist, record, spec, &setup, d0, n_sims, seed)
}

/// Forecast check: copy the observed epidemic up to `from_t`, then let each
/// posterior draw simulate the remaining days. `from_t == t_max` returns the
/// observed curve in every member.
pub fn ppd_forecast(
    trace: &McmcTrace,
    pop: &Population,
    dist: &DistanceMatrix,
    record: &EpidemicRecord,
    spec: &ModelSpec,
    from_t: u32,
    n_sims: usize,
    seed: u64,
) -> Result<CurveEnsemble> {
    if from_t > record.t_max() {
        return Err(Error::Assessment(format!(
            "forecast start {from_t} is beyond the record horizon {}",
            record.t_max()
        )));
    }
    let setup = observed_state(record, spec, from_t)?;
    run_ensemble(trace, pop, dist, record, spec, &setup, from_t, n_sims, seed)
}
