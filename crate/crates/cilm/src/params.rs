//! Model parameters, spark variants and the combined model specification.

use crate::epidemic::Frame;
use crate::error::{Error, Result};
use crate::kernel::ClusterAssignment;

/// Between-cluster spark term of a composite model.
///
/// With cluster sums over k' != k, infectious counts m and centroid distances
/// d, the variants add to an individual's rate:
/// `Zero` nothing, `Constant` a flat epsilon, `M1` epsilon * sum m * d^-bt,
/// `M2` alpha * sum m * d^-bt, `M3` like M2 but d taken between the centroids
/// of currently infectious members, and `M4` alpha * sum m^delta * d^-bt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparkSpec {
    Zero,
    Constant,
    M1,
    M2,
    M3,
    M4,
}

impl SparkSpec {
    /// Variants whose sum runs over other clusters; meaningless without an assignment.
    pub fn needs_clusters(self) -> bool {
        matches!(self, SparkSpec::M1 | SparkSpec::M2 | SparkSpec::M3 | SparkSpec::M4)
    }

    pub fn needs_epsilon(self) -> bool {
        matches!(self, SparkSpec::Constant | SparkSpec::M1)
    }

    pub fn needs_beta_tilde(self) -> bool {
        self.needs_clusters()
    }

    pub fn needs_delta(self) -> bool {
        matches!(self, SparkSpec::M4)
    }

    pub fn name(self) -> &'static str {
        match self {
            SparkSpec::Zero => "zero",
            SparkSpec::Constant => "constant",
            SparkSpec::M1 => "m1",
            SparkSpec::M2 => "m2",
            SparkSpec::M3 => "m3",
            SparkSpec::M4 => "m4",
        }
    }
}

/// Infectivity parameters. Optional fields are present exactly when the spark
/// variant uses them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: Option<f64>,
    pub beta_tilde: Option<f64>,
    pub delta: Option<f64>,
}

impl ModelParams {
    pub fn basic(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, epsilon: None, beta_tilde: None, delta: None }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_beta_tilde(mut self, beta_tilde: f64) -> Self {
        self.beta_tilde = Some(beta_tilde);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    /// Positivity of the kernel parameters plus exact presence of the spark's fields.
    pub fn validate(&self, spark: SparkSpec) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Domain(format!("alpha = {} must be positive", self.alpha)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Domain(format!("beta = {} must be positive", self.beta)));
        }
        for (name, value, needed) in [
            ("epsilon", self.epsilon, spark.needs_epsilon()),
            ("beta_tilde", self.beta_tilde, spark.needs_beta_tilde()),
            ("delta", self.delta, spark.needs_delta()),
        ] {
            match (value, needed) {
                (None, true) => {
                    return Err(Error::Domain(format!(
                        "spark {} requires {name}",
                        spark.name()
                    )))
                }
                (Some(v), true) => {
                    if !v.is_finite() {
                        return Err(Error::Domain(format!("{name} = {v} must be finite")));
                    }
                    if name != "delta" && v <= 0.0 {
                        return Err(Error::Domain(format!("{name} = {v} must be positive")));
                    }
                }
                (Some(_), false) => {
                    return Err(Error::Domain(format!(
                        "spark {} does not use {name}",
                        spark.name()
                    )))
                }
                (None, false) => {}
            }
        }
        Ok(())
    }
}

/// Everything that fixes a model apart from its parameter values: the
/// compartmental frame with its transition periods, the spark variant, and the
/// cluster assignment when the likelihood factorizes per cluster.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub frame: Frame,
    pub latent_period: Option<u32>,
    pub infectious_period: Option<u32>,
    pub spark: SparkSpec,
    pub clusters: Option<ClusterAssignment>,
}

impl ModelSpec {
    /// Full-population SIR model with the given spark (Zero or Constant).
    pub fn sir(spark: SparkSpec) -> Self {
        Self { frame: Frame::Sir, latent_period: None, infectious_period: None, spark, clusters: None }
    }

    /// Switch to the SEIR frame with a fixed latent period.
    pub fn seir(mut self, latent_period: u32) -> Self {
        self.frame = Frame::Seir;
        self.latent_period = Some(latent_period);
        self
    }

    pub fn with_clusters(mut self, clusters: ClusterAssignment) -> Self {
        self.clusters = Some(clusters);
        self
    }

    pub fn with_infectious_period(mut self, period: u32) -> Self {
        self.infectious_period = Some(period);
        self
    }

    pub fn composite(&self) -> bool {
        self.clusters.is_some()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.spark.needs_clusters() && self.clusters.is_none() {
            return Err(Error::InvalidSpec(format!(
                "spark {} requires a cluster assignment",
                self.spark.name()
            )));
        }
        if self.frame == Frame::Seir && self.latent_period.is_none() {
            return Err(Error::InvalidSpec("SEIR requires a latent period".into()));
        }
        if let Some(c) = &self.clusters {
            if c.len() != n {
                return Err(Error::InvalidSpec(format!(
                    "assignment covers {} individuals, population has {n}",
                    c.len()
                )));
            }
        }
        Ok(())
    }

    /// Canonical order of the free parameters this model is fit over.
    pub fn param_names(&self) -> Vec<&'static str> {
        let mut names = vec!["alpha", "beta"];
        if self.spark.needs_beta_tilde() {
            names.push("beta_tilde");
        }
        if self.spark.needs_epsilon() {
            names.push("epsilon");
        }
        if self.spark.needs_delta() {
            names.push("delta");
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_requires_spark_fields() {
        let p = ModelParams::basic(0.8, 2.0);
        assert!(p.validate(SparkSpec::Zero).is_ok());
        assert!(p.validate(SparkSpec::Constant).is_err());
        assert!(p.with_epsilon(0.1).validate(SparkSpec::Constant).is_ok());
        assert!(p.with_epsilon(0.1).validate(SparkSpec::Zero).is_err());
    }

    #[test]
    fn validate_rejects_nonpositive() {
        assert!(ModelParams::basic(0.0, 2.0).validate(SparkSpec::Zero).is_err());
        assert!(ModelParams::basic(0.8, -1.0).validate(SparkSpec::Zero).is_err());
        let p = ModelParams::basic(0.8, 2.0).with_beta_tilde(0.0);
        assert!(p.validate(SparkSpec::M2).is_err());
    }

    #[test]
    fn m4_delta_may_be_any_real() {
        let p = ModelParams::basic(0.8, 2.0).with_beta_tilde(1.0).with_delta(-0.5);
        assert!(p.validate(SparkSpec::M4).is_ok());
    }

    #[test]
    fn param_names_follow_variant() {
        assert_eq!(ModelSpec::sir(SparkSpec::Zero).param_names(), vec!["alpha", "beta"]);
        assert_eq!(
            ModelSpec::sir(SparkSpec::M1).param_names(),
            vec!["alpha", "beta", "beta_tilde", "epsilon"]
        );
        assert_eq!(
            ModelSpec::sir(SparkSpec::M4).param_names(),
            vec!["alpha", "beta", "beta_tilde", "delta"]
        );
    }
}
