//! Hurdle negative binomial distribution for infection days, with t = 0
//! reserved for individuals that were never infected.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::stats::ln_1m_exp;

/// log NB(t | mu, phi) in the mean/dispersion parameterization with a
/// continuous binomial coefficient: E(t) = mu, Var(t) = mu + mu^2/phi.
pub fn nb_logpmf(t: u32, mu: f64, phi: f64) -> f64 {
    let tf = t as f64;
    let denom = (mu + phi).ln();
    ln_gamma(tf + phi) - ln_gamma(phi) - ln_gamma(tf + 1.0)
        + tf * (mu.ln() - denom)
        + phi * (phi.ln() - denom)
}

/// log P(t) under the hurdle model: theta at t = 0, otherwise (1 - theta)
/// times the zero-truncated NB.
pub fn hurdle_nb_logpmf(t: u32, theta: f64, mu: f64, phi: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("hurdle theta {theta} outside (0,1)")));
    }
    if !(mu > 0.0) || !(phi > 0.0) {
        return Err(Error::Domain(format!("hurdle mu {mu}, phi {phi} must be positive")));
    }
    if t == 0 {
        return Ok(theta.ln());
    }
    let ln_nb0 = phi * (phi.ln() - (mu + phi).ln());
    Ok((1.0 - theta).ln() + nb_logpmf(t, mu, phi) - ln_1m_exp(ln_nb0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_branch_is_log_theta() {
        assert_relative_eq!(
            hurdle_nb_logpmf(0, 0.3, 5.0, 2.0).unwrap(),
            0.3f64.ln(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn unit_mu_two_phi_one_frozen_value() {
        // (1 - 0.5) * NB(1|2,1) / (1 - NB(0|2,1)) = 0.5 * (2/9) / (2/3) = 1/6.
        assert_relative_eq!(
            hurdle_nb_logpmf(1, 0.5, 2.0, 1.0).unwrap(),
            -1.791759469228055,
            max_relative = 1e-12
        );
    }

    #[test]
    fn pmf_sums_to_one() {
        let theta = 0.4;
        let (mu, phi) = (6.0, 1.5);
        let mut total = 0.0;
        for t in 0..=5000u32 {
            total += hurdle_nb_logpmf(t, theta, mu, phi).unwrap().exp();
        }
        assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn domain_violations_rejected() {
        assert!(hurdle_nb_logpmf(1, 0.0, 2.0, 1.0).is_err());
        assert!(hurdle_nb_logpmf(1, 1.0, 2.0, 1.0).is_err());
        assert!(hurdle_nb_logpmf(1, 0.5, 0.0, 1.0).is_err());
        assert!(hurdle_nb_logpmf(1, 0.5, 2.0, -1.0).is_err());
    }
}
