//! Truncated stick-breaking Dirichlet process mixture over (x, y, t).
//!
//! Spatial coordinates are bivariate Gaussian around cluster means with
//! shared axis variances; infection days follow a cluster-dependent hurdle
//! negative binomial with shared dispersion. One Gibbs sweep updates, in
//! order: memberships, spatial means, temporal means, hurdle probabilities,
//! the shared scale parameters, stick fractions and the concentration.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cluster::hurdle::nb_logpmf;
use crate::cluster::standardize::StandardizedData;
use crate::error::{Error, Result};
use crate::kernel::ClusterAssignment;
use crate::stats::{
    gamma_ln_pdf, ln_1m_exp, log_sum_exp, median, sample_beta, sample_gamma, StepSize,
};

pub const DEFAULT_TRUNCATION: usize = 30;

#[derive(Debug, Clone)]
pub struct DpmmConfig {
    /// Truncation level of the stick-breaking representation.
    pub m: usize,
    pub iters: usize,
    pub burn_in: usize,
    /// When false the temporal factor is omitted everywhere and the sampler
    /// clusters on coordinates alone.
    pub temporal: bool,
}

impl DpmmConfig {
    pub fn new(iters: usize) -> Self {
        Self { m: DEFAULT_TRUNCATION, iters, burn_in: iters / 2, temporal: true }
    }

    pub fn spatial_only(mut self) -> Self {
        self.temporal = false;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Clustering(format!("truncation {} too small", self.m)));
        }
        if self.iters == 0 || self.burn_in >= self.iters {
            return Err(Error::Clustering(format!(
                "burn-in {} must be below iteration count {}",
                self.burn_in, self.iters
            )));
        }
        Ok(())
    }
}

/// One sweep's parameter values. Labels in `g` are 0-based.
#[derive(Debug, Clone)]
pub struct DpmmState {
    pub g: Vec<usize>,
    pub c_x: Vec<f64>,
    pub c_y: Vec<f64>,
    pub c_t: Vec<f64>,
    pub theta: Vec<f64>,
    pub omega_x: f64,
    pub omega_y: f64,
    pub phi: f64,
    pub u: Vec<f64>,
    pub pi: Vec<f64>,
    pub gamma_dp: f64,
}

/// Weights from stick fractions: pi_1 = U_1, pi_i = U_i * prod_{j<i}(1-U_j).
pub fn stick_weights(u: &[f64]) -> Vec<f64> {
    let mut remaining = 1.0;
    let mut pi = Vec::with_capacity(u.len());
    for (i, &ui) in u.iter().enumerate() {
        pi.push(remaining * ui);
        if i + 1 < u.len() {
            remaining *= 1.0 - ui;
        }
    }
    pi
}

/// Spatial-mean draw for an occupied cluster: Normal(member mean, omega^2/n).
pub fn sample_center(member_mean: f64, omega: f64, n_m: usize, rng: &mut impl Rng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    member_mean + omega / (n_m as f64).sqrt() * z
}

/// Hurdle-probability draw: Beta(n0 + 2, npos + 2) under the Beta(2,2) prior.
pub fn sample_theta(n_zero: usize, n_pos: usize, rng: &mut impl Rng) -> f64 {
    sample_beta(n_zero as f64 + 2.0, n_pos as f64 + 2.0, rng)
}

/// Stick-fraction draws U_m ~ Beta(n_m + 1, gamma + sum_{j>m} n_j); the last
/// fraction is pinned at 1.
pub fn sample_sticks(counts: &[usize], gamma: f64, rng: &mut impl Rng) -> Vec<f64> {
    let m = counts.len();
    let mut tail: usize = counts.iter().sum();
    let mut u = Vec::with_capacity(m);
    for &c in counts.iter().take(m - 1) {
        tail -= c;
        let draw = sample_beta(c as f64 + 1.0, gamma + tail as f64, rng);
        // A fraction of exactly 1 would zero the remaining stick and send
        // the concentration update's rate to infinity.
        u.push(draw.min(1.0 - 1e-15));
    }
    u.push(1.0);
    u
}

/// Concentration draw gamma ~ Gamma(M, 2 - sum_{m<M} ln(1-U_m)).
pub fn sample_gamma_dp(u: &[f64], rng: &mut impl Rng) -> f64 {
    let m = u.len();
    let sum: f64 = u.iter().take(m - 1).map(|&ui| (1.0 - ui).ln()).sum();
    sample_gamma(m as f64, 2.0 - sum, rng)
}

struct Sampler<'a> {
    cfg: &'a DpmmConfig,
    t_lo: f64,
    t_hi: f64,
    max_t: u32,
    state: DpmmState,
    /// Per-cluster log P(t | cluster) by t level; all zero in spatial mode.
    t_levels: Vec<Vec<f64>>,
    ct_steps: Vec<StepSize>,
    scale_steps: [StepSize; 3],
}

impl<'a> Sampler<'a> {
    fn init(data: &StandardizedData, cfg: &'a DpmmConfig, rng: &mut ChaCha8Rng) -> Self {
        let m = cfg.m;
        let (t_lo, t_hi) = data.t_bounds();
        let max_t = (0..data.len()).map(|n| data.t_code(n)).max().unwrap_or(0);
        let gamma_dp = sample_gamma(1.0, 2.0, rng);
        let u = {
            let mut u: Vec<f64> = (0..m - 1)
                .map(|_| sample_beta(1.0, gamma_dp, rng).min(1.0 - 1e-15))
                .collect();
            u.push(1.0);
            u
        };
        let pi = stick_weights(&u);
        let c_x: Vec<f64> = (0..m).map(|_| rng.gen_range(t_lo..t_hi)).collect();
        let c_y: Vec<f64> = (0..m).map(|_| rng.gen_range(t_lo..t_hi)).collect();
        let c_t: Vec<f64> = (0..m).map(|_| draw_open(t_lo, t_hi, rng)).collect();
        let theta: Vec<f64> = (0..m).map(|_| sample_beta(2.0, 2.0, rng)).collect();
        let omega_x = sample_gamma(1.5, 1.0, rng);
        let omega_y = sample_gamma(1.5, 1.0, rng);
        let phi = sample_gamma(1.5, 1.0, rng);
        let g: Vec<usize> = (0..data.len()).map(|_| categorical_from_probs(&pi, rng)).collect();
        let state = DpmmState { g, c_x, c_y, c_t, theta, omega_x, omega_y, phi, u, pi, gamma_dp };
        let mut s = Self {
            cfg,
            t_lo,
            t_hi,
            max_t,
            state,
            t_levels: vec![vec![0.0; max_t as usize + 1]; m],
            ct_steps: (0..m).map(|_| StepSize::new(1.0)).collect(),
            scale_steps: [StepSize::new(0.3), StepSize::new(0.3), StepSize::new(0.3)],
        };
        s.rebuild_t_levels();
        s
    }

    /// Point the level tables at a new dataset (same length) before sweeping.
    #[cfg(test)]
    fn retarget(&mut self, data: &StandardizedData) {
        self.max_t = (0..data.len()).map(|i| data.t_code(i)).max().unwrap_or(0);
        for lv in self.t_levels.iter_mut() {
            lv.resize(self.max_t as usize + 1, 0.0);
        }
        self.rebuild_t_levels();
    }

    fn rebuild_t_levels(&mut self) {
        if !self.cfg.temporal {
            return;
        }
        for j in 0..self.cfg.m {
            self.t_levels[j] = t_level_table(
                self.max_t,
                self.state.theta[j],
                self.state.c_t[j],
                self.state.phi,
            );
        }
    }

    fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.cfg.m];
        for &gj in &self.state.g {
            counts[gj] += 1;
        }
        counts
    }

    /// log of the membership-marginalized likelihood at the given scales.
    fn mixture_ll(
        &self,
        data: &StandardizedData,
        omega_x: f64,
        omega_y: f64,
        t_levels: &[Vec<f64>],
    ) -> f64 {
        let m = self.cfg.m;
        let inv2x = 0.5 / (omega_x * omega_x);
        let inv2y = 0.5 / (omega_y * omega_y);
        let ln_scale = omega_x.ln() + omega_y.ln();
        let ln_pi: Vec<f64> = self.state.pi.iter().map(|&p| p.ln()).collect();
        let mut total = 0.0;
        let mut w = vec![0.0; m];
        for n in 0..data.len() {
            let (x, y) = data.coord(n);
            let t = data.t_code(n) as usize;
            for j in 0..m {
                let dx = x - self.state.c_x[j];
                let dy = y - self.state.c_y[j];
                w[j] = ln_pi[j] - dx * dx * inv2x - dy * dy * inv2y - ln_scale
                    + t_levels[j][t];
            }
            total += log_sum_exp(&w);
        }
        total
    }

    fn sweep(&mut self, data: &StandardizedData, rng: &mut ChaCha8Rng, adapting: bool) {
        let m = self.cfg.m;
        let n = data.len();

        // (a) memberships.
        {
            let inv2x = 0.5 / (self.state.omega_x * self.state.omega_x);
            let inv2y = 0.5 / (self.state.omega_y * self.state.omega_y);
            let ln_pi: Vec<f64> = self.state.pi.iter().map(|&p| p.ln()).collect();
            let mut w = vec![0.0; m];
            for i in 0..n {
                let (x, y) = data.coord(i);
                let t = data.t_code(i) as usize;
                for j in 0..m {
                    let dx = x - self.state.c_x[j];
                    let dy = y - self.state.c_y[j];
                    w[j] = ln_pi[j] - dx * dx * inv2x - dy * dy * inv2y + self.t_levels[j][t];
                }
                self.state.g[i] = categorical_from_logs(&w, rng);
            }
        }

        let counts = self.counts();

        // (b) spatial means: conjugate for occupied clusters, prior otherwise.
        for j in 0..m {
            if counts[j] > 0 {
                let (mut sx, mut sy) = (0.0, 0.0);
                for i in 0..n {
                    if self.state.g[i] == j {
                        let (x, y) = data.coord(i);
                        sx += x;
                        sy += y;
                    }
                }
                let inv = 1.0 / counts[j] as f64;
                self.state.c_x[j] = sample_center(sx * inv, self.state.omega_x, counts[j], rng);
                self.state.c_y[j] = sample_center(sy * inv, self.state.omega_y, counts[j], rng);
            } else {
                self.state.c_x[j] = rng.gen_range(self.t_lo..self.t_hi);
                self.state.c_y[j] = rng.gen_range(self.t_lo..self.t_hi);
            }
        }

        // (c) temporal means: random walk on the member product, support
        // restricted to the uniform prior's interval.
        if self.cfg.temporal {
            for j in 0..m {
                let members: Vec<u32> = (0..n)
                    .filter(|&i| self.state.g[i] == j)
                    .map(|i| data.t_code(i))
                    .filter(|&t| t > 0)
                    .collect();
                if members.is_empty() {
                    self.state.c_t[j] = draw_open(self.t_lo, self.t_hi, rng);
                    continue;
                }
                let cur = self.state.c_t[j];
                let z: f64 = rng.sample(StandardNormal);
                let cand = cur + self.ct_steps[j].step() * z;
                let u: f64 = rng.gen();
                let mut accepted = false;
                if cand > self.t_lo && cand < self.t_hi {
                    let delta = truncated_nb_sum(&members, cand, self.state.phi)
                        - truncated_nb_sum(&members, cur, self.state.phi);
                    if u.ln() < delta {
                        self.state.c_t[j] = cand;
                        accepted = true;
                    }
                }
                self.ct_steps[j].record(accepted, adapting);
            }
        } else {
            for j in 0..m {
                self.state.c_t[j] = draw_open(self.t_lo, self.t_hi, rng);
            }
        }

        // (d) hurdle probabilities.
        if self.cfg.temporal {
            for j in 0..m {
                let mut zero = 0usize;
                let mut pos = 0usize;
                for i in 0..n {
                    if self.state.g[i] == j {
                        if data.t_code(i) == 0 {
                            zero += 1;
                        } else {
                            pos += 1;
                        }
                    }
                }
                self.state.theta[j] = sample_theta(zero, pos, rng);
            }
        } else {
            for j in 0..m {
                self.state.theta[j] = sample_beta(2.0, 2.0, rng);
            }
        }
        self.rebuild_t_levels();

        // (e) shared scales against the membership-marginalized likelihood.
        let mut cur_ll = self.mixture_ll(data, self.state.omega_x, self.state.omega_y, &self.t_levels);
        for which in 0..2 {
            let cur = if which == 0 { self.state.omega_x } else { self.state.omega_y };
            let z: f64 = rng.sample(StandardNormal);
            let cand = (cur.ln() + self.scale_steps[which].step() * z).exp();
            let (cx, cy) = if which == 0 {
                (cand, self.state.omega_y)
            } else {
                (self.state.omega_x, cand)
            };
            let cand_ll = self.mixture_ll(data, cx, cy, &self.t_levels);
            let delta = cand_ll - cur_ll + gamma_ln_pdf(cand, 1.5, 1.0)
                - gamma_ln_pdf(cur, 1.5, 1.0)
                + (cand.ln() - cur.ln());
            let u: f64 = rng.gen();
            let accepted = u.ln() < delta;
            if accepted {
                if which == 0 {
                    self.state.omega_x = cand;
                } else {
                    self.state.omega_y = cand;
                }
                cur_ll = cand_ll;
            }
            self.scale_steps[which].record(accepted, adapting);
        }
        if self.cfg.temporal {
            let cur = self.state.phi;
            let z: f64 = rng.sample(StandardNormal);
            let cand = (cur.ln() + self.scale_steps[2].step() * z).exp();
            let cand_levels: Vec<Vec<f64>> = (0..m)
                .map(|j| t_level_table(self.max_t, self.state.theta[j], self.state.c_t[j], cand))
                .collect();
            let cand_ll = self.mixture_ll(data, self.state.omega_x, self.state.omega_y, &cand_levels);
            let delta = cand_ll - cur_ll + gamma_ln_pdf(cand, 1.5, 1.0)
                - gamma_ln_pdf(cur, 1.5, 1.0)
                + (cand.ln() - cur.ln());
            let u: f64 = rng.gen();
            let accepted = u.ln() < delta;
            if accepted {
                self.state.phi = cand;
                self.t_levels = cand_levels;
            }
            self.scale_steps[2].record(accepted, adapting);
        } else {
            self.state.phi = sample_gamma(1.5, 1.0, rng);
        }

        // (f) stick fractions and (g) concentration, then the weights.
        let counts = self.counts();
        self.state.u = sample_sticks(&counts, self.state.gamma_dp, rng);
        self.state.gamma_dp = sample_gamma_dp(&self.state.u, rng);
        self.state.pi = stick_weights(&self.state.u);
    }
}

fn draw_open(lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    loop {
        let v = rng.gen_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}

/// log P(t | cluster) for every t level 0..=max_t.
fn t_level_table(max_t: u32, theta: f64, c_t: f64, phi: f64) -> Vec<f64> {
    let ln_nb0 = phi * (phi.ln() - (c_t + phi).ln());
    let ln_trunc = ln_1m_exp(ln_nb0);
    let ln_pos = (1.0 - theta).ln();
    (0..=max_t)
        .map(|t| {
            if t == 0 {
                theta.ln()
            } else {
                ln_pos + nb_logpmf(t, c_t, phi) - ln_trunc
            }
        })
        .collect()
}

/// Sum of zero-truncated NB log-masses over positive member days.
fn truncated_nb_sum(ts: &[u32], mu: f64, phi: f64) -> f64 {
    let ln_nb0 = phi * (phi.ln() - (mu + phi).ln());
    let ln_trunc = ln_1m_exp(ln_nb0);
    ts.iter().map(|&t| nb_logpmf(t, mu, phi) - ln_trunc).sum()
}

fn categorical_from_probs(p: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = p.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (j, &pj) in p.iter().enumerate() {
        u -= pj;
        if u < 0.0 {
            return j;
        }
    }
    p.len() - 1
}

fn categorical_from_logs(w: &[f64], rng: &mut impl Rng) -> usize {
    let mx = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut u = rng.gen::<f64>() * w.iter().map(|&v| (v - mx).exp()).sum::<f64>();
    for (j, &wj) in w.iter().enumerate() {
        u -= (wj - mx).exp();
        if u < 0.0 {
            return j;
        }
    }
    w.len() - 1
}

/// Run the Gibbs sampler, returning one state per sweep (burn-in included;
/// callers slice the chain at `cfg.burn_in`).
pub fn dpmm_gibbs(
    data: &StandardizedData,
    cfg: &DpmmConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DpmmState>> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::Clustering("need at least two individuals".into()));
    }
    let (t_lo, _) = data.t_bounds();
    if cfg.temporal && t_lo < 0.0 {
        return Err(Error::Clustering(
            "temporal clustering needs a non-negative time range (NB mean support)".into(),
        ));
    }
    let mut sampler = Sampler::init(data, cfg, rng);
    let mut chain = Vec::with_capacity(cfg.iters);
    for it in 0..cfg.iters {
        sampler.sweep(data, rng, it < cfg.burn_in);
        chain.push(sampler.state.clone());
    }
    Ok(chain)
}

/// Point-estimate assignment: per-individual marginal mode of the membership
/// across the given states (lowest label on ties), labels compacted, and
/// centroids taken as posterior medians of the cluster means mapped back to
/// original units.
pub fn extract_assignment(
    chain: &[DpmmState],
    data: &StandardizedData,
) -> Result<ClusterAssignment> {
    let Some(first) = chain.first() else {
        return Err(Error::Clustering("empty chain".into()));
    };
    let n = first.g.len();
    let m = first.pi.len();
    let mut counts = vec![0u32; n * m];
    for state in chain {
        for (i, &gi) in state.g.iter().enumerate() {
            counts[i * m + gi] += 1;
        }
    }
    let modes: Vec<usize> = (0..n)
        .map(|i| {
            let row = &counts[i * m..(i + 1) * m];
            let mut best = 0usize;
            for (j, &c) in row.iter().enumerate() {
                if c > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    let mut occupied: Vec<usize> = modes.clone();
    occupied.sort_unstable();
    occupied.dedup();
    let membership: Vec<usize> = modes
        .iter()
        .map(|gi| occupied.binary_search(gi).unwrap())
        .collect();
    let centroids: Vec<(f64, f64)> = occupied
        .iter()
        .map(|&j| {
            let xs: Vec<f64> = chain.iter().map(|s| s.c_x[j]).collect();
            let ys: Vec<f64> = chain.iter().map(|s| s.c_y[j]).collect();
            data.to_original((median(&xs), median(&ys)))
        })
        .collect();
    ClusterAssignment::with_centroids(n, membership, centroids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::seeded_rng;
    use crate::stats::sample_variance;
    use approx::assert_relative_eq;

    #[test]
    fn stick_weights_frozen_example() {
        let pi = stick_weights(&[0.5, 0.4, 1.0]);
        assert_relative_eq!(pi[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(pi[1], 0.2, max_relative = 1e-15);
        assert_relative_eq!(pi[2], 0.3, max_relative = 1e-15);
    }

    #[test]
    fn stick_weights_sum_to_one() {
        let mut rng = seeded_rng(5);
        for _ in 0..100 {
            let mut u: Vec<f64> = (0..29).map(|_| rng.gen_range(0.0..1.0)).collect();
            u.push(1.0);
            let pi = stick_weights(&u);
            assert!((pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn center_draw_matches_closed_form_moments() {
        // Members {1,3} with omega = 1: Normal(2, 1/2).
        let mut rng = seeded_rng(11);
        let draws: Vec<f64> = (0..10_000).map(|_| sample_center(2.0, 1.0, 2, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = sample_variance(&draws);
        let se_mean = (0.5f64 / 10_000.0).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se_mean, "mean {mean}");
        // Variance of the sample variance for a normal is 2 sigma^4 / (n-1).
        let se_var = (2.0 * 0.25 / 9_999.0f64).sqrt();
        assert!((var - 0.5).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn theta_draw_matches_beta_moments() {
        // n0 = 3, n+ = 5 under Beta(2,2): Beta(5,7).
        let mut rng = seeded_rng(12);
        let draws: Vec<f64> = (0..10_000).map(|_| sample_theta(3, 5, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let expect: f64 = 5.0 / 12.0;
        let var = expect * (7.0 / 12.0) / 13.0;
        let se = (var / 10_000.0).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "mean {mean} vs {expect}");
    }

    #[test]
    fn stick_draw_matches_beta_moments() {
        // counts (10,5,0), gamma 2: U_1 ~ Beta(11, 7).
        let mut rng = seeded_rng(13);
        let draws: Vec<f64> =
            (0..10_000).map(|_| sample_sticks(&[10, 5, 0], 2.0, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let expect = 11.0 / 18.0;
        let var = (11.0 * 7.0) / (18.0f64.powi(2) * 19.0);
        let se = (var / 10_000.0).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "mean {mean} vs {expect}");
        // Last fraction is pinned.
        assert_eq!(sample_sticks(&[1, 2, 3], 1.0, &mut rng)[2], 1.0);
    }

    #[test]
    fn concentration_draw_matches_gamma_moments() {
        // 29 fractions with ln(1-u) summing to -10: Gamma(30, 12).
        let ui = 1.0 - (-10.0f64 / 29.0).exp();
        let mut u = vec![ui; 29];
        u.push(1.0);
        let mut rng = seeded_rng(14);
        let draws: Vec<f64> = (0..10_000).map(|_| sample_gamma_dp(&u, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let expect = 30.0 / 12.0;
        let se = (30.0f64 / 144.0 / 10_000.0).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "mean {mean} vs {expect}");
    }

    fn blob_data(seed: u64) -> StandardizedData {
        // Two spatial blobs; the first infected early, the second mostly never.
        let mut rng = seeded_rng(seed);
        let mut coords = Vec::new();
        let mut t = Vec::new();
        for i in 0..40 {
            let (cx, cy, early) = if i < 20 { (5.0, 5.0, true) } else { (25.0, 24.0, false) };
            let dx: f64 = rng.sample::<f64, _>(StandardNormal);
            let dy: f64 = rng.sample::<f64, _>(StandardNormal);
            coords.push((cx + dx, cy + dy));
            t.push(if early {
                2 + (i % 4) as u32
            } else if i % 4 == 0 {
                16 + (i % 3) as u32
            } else {
                0
            });
        }
        StandardizedData::from_parts(coords, t, (0.0, 30.0), (0.0, 30.0), (0.0, 30.0)).unwrap()
    }

    #[test]
    fn two_blobs_recovered_on_most_seeds() {
        let mut ok = 0;
        for seed in 0..10u64 {
            let data = blob_data(100 + seed);
            let cfg = DpmmConfig::new(400);
            let mut rng = seeded_rng(seed);
            let chain = dpmm_gibbs(&data, &cfg, &mut rng).unwrap();
            let a = extract_assignment(&chain[cfg.burn_in..], &data).unwrap();
            if a.k() != 2 {
                continue;
            }
            let mut cents = a.centroids().to_vec();
            cents.sort_by(|p, q| p.0.total_cmp(&q.0));
            let d0 = ((cents[0].0 - 5.0).powi(2) + (cents[0].1 - 5.0).powi(2)).sqrt();
            let d1 = ((cents[1].0 - 25.0).powi(2) + (cents[1].1 - 24.0).powi(2)).sqrt();
            if d0 < 1.0 && d1 < 1.0 {
                ok += 1;
            }
        }
        assert!(ok >= 9, "only {ok}/10 seeds recovered the blobs");
    }

    #[test]
    fn chain_is_deterministic_for_a_seed() {
        let data = blob_data(55);
        let cfg = DpmmConfig::new(40);
        let a = dpmm_gibbs(&data, &cfg, &mut seeded_rng(9)).unwrap();
        let b = dpmm_gibbs(&data, &cfg, &mut seeded_rng(9)).unwrap();
        let (la, lb) = (a.last().unwrap(), b.last().unwrap());
        assert_eq!(la.g, lb.g);
        assert_eq!(la.omega_x, lb.omega_x);
        assert_eq!(la.gamma_dp, lb.gamma_dp);
    }

    #[test]
    fn spatial_only_mode_yields_valid_states() {
        let data = blob_data(77);
        let cfg = DpmmConfig::new(60).spatial_only();
        let chain = dpmm_gibbs(&data, &cfg, &mut seeded_rng(21)).unwrap();
        for s in &chain {
            assert!((s.pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(s.omega_x > 0.0 && s.omega_y > 0.0 && s.phi > 0.0);
        }
        let a = extract_assignment(&chain[cfg.burn_in..], &data).unwrap();
        assert!(a.k() >= 1);
    }

    #[test]
    fn extraction_returns_constant_memberships_verbatim() {
        let data = blob_data(1);
        let m = 30;
        let mut g = vec![7usize; 40];
        g[0] = 3;
        let state = DpmmState {
            g,
            c_x: vec![10.0; m],
            c_y: vec![12.0; m],
            c_t: vec![5.0; m],
            theta: vec![0.5; m],
            omega_x: 1.0,
            omega_y: 1.0,
            phi: 1.0,
            u: vec![0.5; m],
            pi: vec![1.0 / m as f64; m],
            gamma_dp: 1.0,
        };
        let chain = vec![state.clone(), state];
        let a = extract_assignment(&chain, &data).unwrap();
        assert_eq!(a.k(), 2);
        // Label 3 compacts to 0, label 7 to 1.
        assert_eq!(a.member_of(0), 0);
        assert!((1..40).all(|i| a.member_of(i) == 1));
        assert_eq!(a.centroid(0), (10.0, 12.0));
    }

    #[test]
    fn empty_chain_is_an_error() {
        let data = blob_data(2);
        assert!(extract_assignment(&[], &data).is_err());
    }

    /// Successive-conditional simulator check: regenerating data from the
    /// model between sweeps must keep the parameter marginals at their
    /// priors. Detects stationarity bugs in any update.
    #[test]
    fn sweeps_preserve_the_prior_joint() {
        let n = 20;
        let bounds = (0.0, 10.0);
        let cfg = DpmmConfig { m: 30, iters: 1, burn_in: 0, temporal: true };
        let mut rng = seeded_rng(2024);
        let reps = 2000usize;
        let mut gammas = Vec::with_capacity(reps);
        let mut omegas = Vec::with_capacity(reps);
        let mut thetas = Vec::with_capacity(reps);

        let data = regenerate(None, n, bounds, &mut rng);
        let mut sampler = Sampler::init(&data, &cfg, &mut rng);
        for rep in 0..reps {
            let data = regenerate(Some(&sampler.state), n, bounds, &mut rng);
            sampler.retarget(&data);
            sampler.sweep(&data, &mut rng, false);
            if rep % 5 == 0 {
                gammas.push(sampler.state.gamma_dp);
                omegas.push(sampler.state.omega_x);
                thetas.push(sampler.state.theta[0]);
            }
        }
        let check = |draws: &[f64], expect: f64, name: &str| {
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let se = (sample_variance(draws) / draws.len() as f64).sqrt();
            assert!(
                (mean - expect).abs() < 5.0 * se.max(1e-3),
                "{name}: mean {mean} vs prior mean {expect} (se {se})"
            );
        };
        // Prior means: gamma ~ Gamma(1,2), omega_x ~ Gamma(1.5,1), theta ~ Beta(2,2).
        check(&gammas, 0.5, "gamma");
        check(&omegas, 1.5, "omega_x");
        check(&thetas, 0.5, "theta");
    }

    /// Draw a dataset from the mixture given a state (or from the prior
    /// predictive when none is supplied).
    fn regenerate(
        state: Option<&DpmmState>,
        n: usize,
        bounds: (f64, f64),
        rng: &mut ChaCha8Rng,
    ) -> StandardizedData {
        let mut coords = Vec::with_capacity(n);
        let mut ts = Vec::with_capacity(n);
        match state {
            Some(s) => {
                for i in 0..n {
                    let j = s.g[i];
                    let zx: f64 = rng.sample(StandardNormal);
                    let zy: f64 = rng.sample(StandardNormal);
                    coords.push((s.c_x[j] + s.omega_x * zx, s.c_y[j] + s.omega_y * zy));
                    ts.push(sample_hurdle_nb(s.theta[j], s.c_t[j], s.phi, rng));
                }
            }
            None => {
                for _ in 0..n {
                    coords.push((rng.gen_range(bounds.0..bounds.1), rng.gen_range(bounds.0..bounds.1)));
                    ts.push(rng.gen_range(0..5));
                }
            }
        }
        StandardizedData::from_parts(coords, ts, bounds, bounds, bounds).unwrap()
    }

    fn sample_hurdle_nb(theta: f64, mu: f64, phi: f64, rng: &mut ChaCha8Rng) -> u32 {
        if rng.gen::<f64>() < theta {
            return 0;
        }
        // Inverse CDF over the zero-truncated support.
        let ln_nb0 = phi * (phi.ln() - (mu + phi).ln());
        let trunc = ln_1m_exp(ln_nb0);
        let mut u = rng.gen::<f64>();
        for t in 1..10_000u32 {
            let p = (nb_logpmf(t, mu, phi) - trunc).exp();
            u -= p;
            if u < 0.0 {
                return t;
            }
        }
        10_000
    }
}
