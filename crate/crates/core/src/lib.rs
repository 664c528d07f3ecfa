//! Upper bounds on how well any nonintrusive load monitoring algorithm can
//! tell scenarios apart, given device signatures and Gaussian noise.
//!
//! The MAP decision rule is optimal, so its success probability bounds every
//! disaggregation algorithm. Two-scenario bounds are computed in closed form
//! ([`detection`]); N-way and collection-level bounds are estimated by seeded
//! Monte-Carlo ([`montecarlo`]); [`experiment`] runs parameter sweeps.

pub mod detection;
pub mod devices;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod linear;
pub mod montecarlo;
pub mod noise;
pub mod rng;
pub mod scenario;
pub mod signal;
pub mod special;

pub use detection::{
    decision_hyperplane, halfspace_system, log_likelihood_ratio, map_classify, np_threshold,
    pairwise_conditional_success, pairwise_success_probability, projection_stats, DiscretePrior,
    HalfspaceSystem, Hyperplane, MapClassifier, NpRule, ProjectionStats,
};
pub use error::{Error, Result};
pub use estimators::{Baseline, BaselineRule};
pub use experiment::{
    run_eval_estimator, run_magnitude_sweep, run_noise_sweep, run_np_threshold, run_nway,
    run_nway_sweep, run_pairwise, run_rate_sweep, Experiment, ExperimentConfig, Method,
    OutputFormat, SweepRow, SweepTable,
};
pub use linear::{largest_singular_value, linear_system_upper_bound, LinearSystemBoundInput};
pub use montecarlo::{
    collection_success_probability, evaluate_estimator, nway_success_probability,
    orthant_probability, sample_gaussian, McConfig, McEstimate, NwayEstimate,
};
pub use noise::NoiseModel;
pub use scenario::{compose_scenario_mean, ScenarioMean, ScenarioSet, ScenarioSpec, SignalLibrary};
pub use signal::{decimate, load_signal_csv, phase_variants, synth_pulse, DeviceSignal, SamplingPlan};
