//! Estimation of the full outcome distributions under treatment and
//! control from observational data, by inverse-propensity weighting of the
//! empirical process, with distributional inference on top: confidence
//! bands for the outcome CDFs, ATE and quantile treatment effects, a
//! Wilcoxon-type test of distributional equality, and a first-order
//! stochastic-dominance test, all with subsampling-based critical values.
//!
//! The pipeline is: ingest a sample of (covariates, binary treatment,
//! outcome) rows, fit a polynomial-sieve logistic propensity model, build
//! normalized (Hajek) or unnormalized (Horvitz-Thompson) weighted ECDFs
//! per arm, and derive estimates and tests from those curves. A built-in
//! simulation subsystem generates two benchmark scenarios with known
//! truths and reproduces their Monte Carlo summary tables.

pub mod data;
pub mod ecdf;
pub mod error;
pub mod propensity;
pub mod seeding;
pub mod simulation;
pub mod subsampling;
pub mod wilcoxon;

pub use data::{
    default_schema, emit_csv, ingest_csv, ingest_csv_str, validate, Arm, CsvSchema, Observation,
    Sample, ValidationReport,
};
pub use ecdf::{
    ate, estimate_cdf, hajek_weights, naive_mean_diff, qte, sup_distance, CdfCurve, EcdfKind,
    WeightedEcdf,
};
pub use error::{Error, Result};
pub use propensity::{
    fit_propensity, select_basis_cv, CvSelection, PropensityModel, SieveBasis, DEFAULT_DELTA,
    DEFAULT_RIDGE,
};
pub use simulation::{
    generate, run_monte_carlo, ExactOracle, ExactTruths, MonteCarloConfig, MonteCarloReport,
    Scenario, ScenarioSpec,
};
pub use subsampling::{
    ci_functional, confidence_band, dominance_test, draw_subsample, root_distribution,
    BandReport, ConfidenceBand, DominanceReport, Interval, RefitPolicy, SubsamplingDistribution,
};
pub use wilcoxon::{
    test_equality_normal, test_equality_subsampling, theta01, variance_estimate, BandwidthRule,
    KernelRegressionFit, TestMethod, WilcoxonReport,
};
