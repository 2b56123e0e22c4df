//! Small numeric helpers shared by the likelihood, the samplers and WAIC.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

/// log(1 - exp(x)) for x < 0, switching branches to stay accurate near 0 and -inf.
pub fn ln_1m_exp(x: f64) -> f64 {
    debug_assert!(x <= 0.0);
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// log(sum(exp(xs))) with the usual max shift; -inf for an empty or all -inf slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Gamma(shape, rate) log-density; -inf outside the support.
pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
}

/// Normal(mean, sd) log-density.
pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Draw from Gamma parameterized by shape and rate.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("gamma parameters").sample(rng)
}

/// Draw from Beta(a, b).
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b).expect("beta parameters").sample(rng)
}

/// Sample median; even lengths average the two middle order statistics.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Random-walk Metropolis step width with batch-50 acceptance tuning.
///
/// Every 50 recorded proposals the log step moves by min(0.05, 1/sqrt(batch))
/// toward a 0.44 acceptance rate. Callers stop recording once their burn-in
/// ends so the step is fixed for the retained draws.
pub(crate) struct StepSize {
    ln_step: f64,
    accepted: u32,
    tried: u32,
    batch: u32,
}

impl StepSize {
    pub(crate) fn new(step: f64) -> Self {
        Self { ln_step: step.ln(), accepted: 0, tried: 0, batch: 0 }
    }

    pub(crate) fn step(&self) -> f64 {
        self.ln_step.exp()
    }

    pub(crate) fn record(&mut self, accepted: bool, adapting: bool) {
        if !adapting {
            return;
        }
        self.tried += 1;
        self.accepted += u32::from(accepted);
        if self.tried == 50 {
            self.batch += 1;
            let delta = (1.0 / (self.batch as f64).sqrt()).min(0.05);
            if self.accepted as f64 / 50.0 > 0.44 {
                self.ln_step += delta;
            } else {
                self.ln_step -= delta;
            }
            self.tried = 0;
            self.accepted = 0;
        }
    }
}

/// Sample variance with the n-1 denominator; 0 for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}
