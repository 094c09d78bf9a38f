//! Benchmarks with known coefficients and the studies built on them.

mod manufacture;
mod properties;
mod studies;

pub use manufacture::{add_noise, manufacture, Benchmark, InitialDatum, NoiseSpec, Profile};
pub use properties::{random_strong_spec, run_property_suite, CheckOutcome, PropertyReport, PropertySuite};
pub use studies::{
    fit_loglog, run_convergence_study, run_stability_study, study_options, ConvergenceConfig, RateReport, RunSummary,
    SlopeFit, StabilityConfig, StudyRow,
};
