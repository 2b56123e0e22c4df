//! Population partitioning: K-means on coordinates and a Dirichlet process
//! mixture over space and infection time, with point-estimate extraction for
//! the composite likelihood.

pub mod dpmm;
pub mod hurdle;
pub mod kmeans;
pub mod standardize;

pub use dpmm::{
    dpmm_gibbs, extract_assignment, sample_center, sample_gamma_dp, sample_sticks,
    sample_theta, stick_weights, DpmmConfig, DpmmState, DEFAULT_TRUNCATION,
};
pub use hurdle::{hurdle_nb_logpmf, nb_logpmf};
pub use kmeans::kmeans;
pub use standardize::StandardizedData;
