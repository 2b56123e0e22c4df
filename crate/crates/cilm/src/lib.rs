//! Spatial individual-level epidemic models on discrete time: simulation,
//! clustering, Bayesian fitting of full and composite likelihoods with
//! between-cluster spark terms, and posterior assessment.

pub mod assess;
pub mod cluster;
pub mod epidemic;
pub mod error;
pub mod io;
pub mod kernel;
pub mod mcmc;
pub mod params;
pub mod population;
pub mod seeds;
pub mod sim;
pub mod stats;

pub use assess::{
    hpdi, pointwise_log_lik, ppd_complete, ppd_forecast, waic, CurveEnsemble, PointwiseLogLik,
    WaicResult, DEFAULT_PPD_SIMS,
};
pub use epidemic::{build_timeline, CompartmentTimeline, EpidemicRecord, Frame, State};
pub use error::{Error, Result};
pub use kernel::{
    composite_log_likelihood, infection_probability, infectivity_rate, log_likelihood,
    spark_rate, ClusterAssignment, Evaluator,
};
pub use mcmc::{diagnostics, fit_mcmc, log_prior, Diagnostics, McmcTrace, PriorSpec};
pub use params::{ModelParams, ModelSpec, SparkSpec};
pub use population::{DistanceMatrix, Population};
pub use sim::{
    generate_population, simulate_epidemic, simulate_from_state, simulate_seir, SimConfig,
    SpatialScenario,
};
