//! Synthetic benchmark scenarios with known truths: data generators, an
//! exact oracle for the population quantities (CDFs, propensity, rank
//! statistic, ATE, quantiles, asymptotic variance), and a Monte Carlo
//! harness that reproduces the reference summary tables at configurable
//! scale.

use crate::data::{Arm, Observation, Sample};
use crate::ecdf::{
    estimate_cdf, naive_mean_diff, sup_distance, CdfCurve, EcdfKind, WeightedEcdf,
};
use crate::error::{Error, Result};
use crate::propensity::{fit_propensity, select_basis_cv, DEFAULT_RIDGE};
use crate::seeding::{
    derive_seed, TAG_BAND_CONTROL, TAG_BAND_TREATED, TAG_DOMINANCE, TAG_GENERATOR,
    TAG_REPLICATION, TAG_WILCOXON_CI,
};
use crate::subsampling::{confidence_band, dominance_test, RefitPolicy};
use crate::wilcoxon::{test_equality_normal, test_equality_subsampling, theta01};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// The two benchmark designs. Both draw a binary confounder X ~ Be(1/2)
/// and uniform noise U ~ U(-10, 10) per potential outcome.
///
/// - `NoEffect`: both potential outcomes are 70 + 10X + U and treatment
///   is assigned with probability 0.75 when X = 1, 0.25 when X = 0. The
///   arms share one distribution, yet the naive treated/control mean gap
///   is 5 by confounding.
/// - `TreatmentEffect`: the treated outcome is 75 + 10X + U (a +5 shift)
///   and assignment flips to 0.25 when X = 1. The ATE is 5 while the
///   naive gap is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    NoEffect,
    TreatmentEffect,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::NoEffect => "no_effect",
            Scenario::TreatmentEffect => "treatment_effect",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "no_effect" | "no-effect" | "i" => Ok(Scenario::NoEffect),
            "treatment_effect" | "treatment-effect" | "ii" => Ok(Scenario::TreatmentEffect),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario '{other}' (expected no-effect or treatment-effect)"
            ))),
        }
    }

    /// Lower endpoint of the conditional outcome support for each arm at
    /// X = 0; the conditional law of Y given X = x is U(lo + 10x,
    /// lo + 20 + 10x).
    fn arm_lo(self, arm: Arm) -> f64 {
        match (self, arm) {
            (Scenario::NoEffect, _) => 60.0,
            (Scenario::TreatmentEffect, Arm::Control) => 60.0,
            (Scenario::TreatmentEffect, Arm::Treated) => 65.0,
        }
    }

    /// P(T = 1 | X = x) for x in {0, 1}.
    pub fn propensity(self, x: f64) -> f64 {
        match self {
            Scenario::NoEffect => 0.75 * x + 0.25 * (1.0 - x),
            Scenario::TreatmentEffect => 0.25 * x + 0.75 * (1.0 - x),
        }
    }
}

/// A generation request: scenario, sample size, seed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub seed: u64,
}

/// One generated unit with both potential outcomes. Only the simulation
/// module sees these; observed samples carry y = t*y1 + (1-t)*y0.
#[derive(Debug, Clone, Copy)]
pub struct PotentialRow {
    pub x: f64,
    pub t: u8,
    pub y_treated: f64,
    pub y_control: f64,
}

/// Draw n units with both potential outcomes. Per row the draw order is
/// fixed (x, t, u_control, u_treated) so streams are reproducible.
pub fn generate_potential<R: Rng>(scenario: Scenario, n: usize, rng: &mut R) -> Vec<PotentialRow> {
    (0..n)
        .map(|_| {
            let x = f64::from(rng.gen_bool(0.5));
            let t = u8::from(rng.gen_bool(scenario.propensity(x)));
            let u0: f64 = rng.gen_range(-10.0..10.0);
            let u1: f64 = rng.gen_range(-10.0..10.0);
            let lo0 = scenario.arm_lo(Arm::Control);
            let lo1 = scenario.arm_lo(Arm::Treated);
            PotentialRow {
                x,
                t,
                y_treated: lo1 + 10.0 + 10.0 * x + u1,
                y_control: lo0 + 10.0 + 10.0 * x + u0,
            }
        })
        .collect()
}

/// Generate an observed sample for the scenario.
pub fn generate(spec: &ScenarioSpec) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, TAG_GENERATOR, 0));
    generate_with_rng(spec.scenario, spec.n, &mut rng)
}

pub fn generate_with_rng<R: Rng>(scenario: Scenario, n: usize, rng: &mut R) -> Result<Sample> {
    let rows = generate_potential(scenario, n, rng)
        .into_iter()
        .map(|r| Observation {
            x: vec![r.x],
            t: r.t,
            y: if r.t == 1 { r.y_treated } else { r.y_control },
        })
        .collect();
    Sample::new(rows)
}

/// Exact population quantities for a scenario. Each arm's marginal law is
/// the equal mixture of U(lo, lo+20) and U(lo+10, lo+30) induced by the
/// binary confounder, so the CDF is piecewise linear with knots at lo,
/// lo+10, lo+20, lo+30 and values 0, 1/4, 3/4, 1.
#[derive(Debug, Clone, Copy)]
pub struct ExactOracle {
    scenario: Scenario,
}

/// Frozen truths consumed by the Monte Carlo report and acceptance checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactTruths {
    pub theta01: f64,
    pub tau: f64,
    pub naive_diff: f64,
    /// Quantiles at p = 0.25, 0.50, 0.75 per arm.
    pub q_treated: [f64; 3],
    pub q_control: [f64; 3],
    /// Asymptotic variance of sqrt(n) * (theta01_hat - theta01).
    pub wilcoxon_v: f64,
}

/// The exact CDF of one arm as a curve, for sup-distance computations.
#[derive(Debug, Clone, Copy)]
pub struct ExactCdf {
    oracle: ExactOracle,
    arm: Arm,
}

impl CdfCurve for ExactCdf {
    fn value(&self, y: f64) -> f64 {
        self.oracle.cdf(self.arm, y)
    }

    fn value_left(&self, y: f64) -> f64 {
        // Continuous distribution: no jumps.
        self.oracle.cdf(self.arm, y)
    }

    fn change_points(&self) -> Vec<f64> {
        self.oracle.knots(self.arm).to_vec()
    }
}

fn uniform_cdf(y: f64, lo: f64, hi: f64) -> f64 {
    ((y - lo) / (hi - lo)).clamp(0.0, 1.0)
}

impl ExactOracle {
    pub fn new(scenario: Scenario) -> Self {
        ExactOracle { scenario }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn propensity(&self, x: f64) -> f64 {
        self.scenario.propensity(x)
    }

    /// Knots of the piecewise-linear marginal CDF of the arm.
    pub fn knots(&self, arm: Arm) -> [f64; 4] {
        let lo = self.scenario.arm_lo(arm);
        [lo, lo + 10.0, lo + 20.0, lo + 30.0]
    }

    /// Exact marginal CDF of the arm's potential outcome.
    pub fn cdf(&self, arm: Arm, y: f64) -> f64 {
        let lo = self.scenario.arm_lo(arm);
        0.5 * uniform_cdf(y, lo, lo + 20.0) + 0.5 * uniform_cdf(y, lo + 10.0, lo + 30.0)
    }

    /// Conditional CDF of the arm's potential outcome given X = x.
    pub fn conditional_cdf(&self, arm: Arm, y: f64, x: f64) -> f64 {
        let lo = self.scenario.arm_lo(arm) + 10.0 * x;
        uniform_cdf(y, lo, lo + 20.0)
    }

    /// Exact marginal density of the arm's potential outcome.
    pub fn density(&self, arm: Arm, y: f64) -> f64 {
        let lo = self.scenario.arm_lo(arm);
        let part = |a: f64, b: f64| -> f64 {
            if y >= a && y < b {
                1.0 / (b - a)
            } else {
                0.0
            }
        };
        0.5 * part(lo, lo + 20.0) + 0.5 * part(lo + 10.0, lo + 30.0)
    }

    /// Exact quantile of the arm's marginal law.
    pub fn quantile(&self, arm: Arm, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile order must be in (0, 1), got {p}"
            )));
        }
        let lo = self.scenario.arm_lo(arm);
        // Slopes: 1/40 on [lo, lo+10), 1/20 on [lo+10, lo+20), 1/40 after.
        Ok(if p <= 0.25 {
            lo + 40.0 * p
        } else if p <= 0.75 {
            lo + 10.0 + 20.0 * (p - 0.25)
        } else {
            lo + 20.0 + 40.0 * (p - 0.75)
        })
    }

    pub fn exact_cdf_curve(&self, arm: Arm) -> ExactCdf {
        ExactCdf {
            oracle: *self,
            arm,
        }
    }

    pub fn mean(&self, arm: Arm) -> f64 {
        self.scenario.arm_lo(arm) + 15.0
    }

    /// integral of cdf(arm, .) over [a, b], exact (trapezoid on the knot
    /// refinement of a piecewise-linear function).
    fn integral_cdf(&self, arm: Arm, a: f64, b: f64) -> f64 {
        let mut pts = vec![a, b];
        for k in self.knots(arm) {
            if k > a && k < b {
                pts.push(k);
            }
        }
        pts.sort_by(f64::total_cmp);
        let mut acc = 0.0;
        for w in pts.windows(2) {
            acc += (self.cdf(arm, w[0]) + self.cdf(arm, w[1])) / 2.0 * (w[1] - w[0]);
        }
        acc
    }

    /// integral of cdf(arm, .)^2 over [a, b], exact (Simpson per linear
    /// piece, exact for quadratics).
    fn integral_cdf_squared(&self, arm: Arm, a: f64, b: f64) -> f64 {
        let mut pts = vec![a, b];
        for k in self.knots(arm) {
            if k > a && k < b {
                pts.push(k);
            }
        }
        pts.sort_by(f64::total_cmp);
        let mut acc = 0.0;
        for w in pts.windows(2) {
            let mid = (w[0] + w[1]) / 2.0;
            let f = |y: f64| self.cdf(arm, y).powi(2);
            acc += (w[1] - w[0]) / 6.0 * (f(w[0]) + 4.0 * f(mid) + f(w[1]));
        }
        acc
    }

    /// Conditional mean of the other arm's marginal CDF evaluated at this
    /// arm's outcome, given X = x: for `Arm::Treated` this is
    /// E[F0(Y_treated) | x] (the regression target the variance estimator
    /// pursues), and symmetrically for `Arm::Control`.
    pub fn gamma(&self, arm: Arm, x: f64) -> f64 {
        let lo = self.scenario.arm_lo(arm) + 10.0 * x;
        self.integral_cdf(arm.other(), lo, lo + 20.0) / 20.0
    }

    /// Conditional second moment companion of [`ExactOracle::gamma`].
    pub fn second_moment(&self, arm: Arm, x: f64) -> f64 {
        let lo = self.scenario.arm_lo(arm) + 10.0 * x;
        self.integral_cdf_squared(arm.other(), lo, lo + 20.0) / 20.0
    }

    /// All scalar truths: rank statistic, ATE, naive gap, quantiles, and
    /// the exact asymptotic variance of the rank statistic assembled by
    /// discrete expectation over x in {0, 1}.
    pub fn truths(&self) -> ExactTruths {
        let gamma01 = |x: f64| self.gamma(Arm::Treated, x);
        let gamma10 = |x: f64| self.gamma(Arm::Control, x);
        let theta01 = 0.5 * (gamma01(0.0) + gamma01(1.0));

        let mut within_treated = 0.0;
        let mut within_control = 0.0;
        for x in [0.0, 1.0] {
            let p1 = self.propensity(x);
            let v01 = self.second_moment(Arm::Treated, x) - gamma01(x).powi(2);
            let v10 = self.second_moment(Arm::Control, x) - gamma10(x).powi(2);
            within_treated += 0.5 * v01 / p1;
            within_control += 0.5 * v10 / (1.0 - p1);
        }
        let d0 = gamma10(0.0) - gamma01(0.0);
        let d1 = gamma10(1.0) - gamma01(1.0);
        let between = 0.25 * (d1 - d0).powi(2);

        let quantiles = |arm: Arm| -> [f64; 3] {
            [
                self.quantile(arm, 0.25).unwrap(),
                self.quantile(arm, 0.50).unwrap(),
                self.quantile(arm, 0.75).unwrap(),
            ]
        };

        // E[Y | T = j] come from P(X = 1 | T = j); both scenarios have
        // P(T = 1) = 1/2 so Bayes reduces P(X = 1 | T = 1) to p(1), and
        // E[Y_j | X = x] = lo_j + 10 + 10x.
        let p1_given = self.propensity(1.0);
        let mean_given_treated = self.scenario.arm_lo(Arm::Treated) + 10.0 + 10.0 * p1_given;
        let mean_given_control =
            self.scenario.arm_lo(Arm::Control) + 10.0 + 10.0 * (1.0 - p1_given);

        ExactTruths {
            theta01,
            tau: self.mean(Arm::Treated) - self.mean(Arm::Control),
            naive_diff: mean_given_treated - mean_given_control,
            q_treated: quantiles(Arm::Treated),
            q_control: quantiles(Arm::Control),
            wilcoxon_v: within_treated + within_control + between,
        }
    }
}

/// Configuration of a Monte Carlo study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub scenario: Scenario,
    /// Number of replications N.
    pub replications: usize,
    pub n: usize,
    /// Subsample size m.
    pub m: usize,
    /// Subsample replicate count M.
    pub subsamples: usize,
    pub alpha: f64,
    /// Candidate polynomial degrees for cross-validated basis selection.
    pub degrees: Vec<u32>,
    pub folds: usize,
    pub delta: f64,
    pub seed: u64,
    pub refit: RefitPolicy,
}

impl MonteCarloConfig {
    /// Reduced-scale defaults: N = 200 replications, n = 1000, m = 100,
    /// M = 400 subsamples, alpha = 0.05.
    pub fn desk_scale(scenario: Scenario, seed: u64) -> Self {
        MonteCarloConfig {
            scenario,
            replications: 200,
            n: 1000,
            m: 100,
            subsamples: 400,
            alpha: 0.05,
            degrees: vec![0, 1, 2],
            folds: 5,
            delta: 0.01,
            seed,
            refit: RefitPolicy::PerSubsample,
        }
    }

    /// Full-scale configuration matching the reference tables: N = 1000
    /// replications and M = 1000 subsamples, with m = n/10.
    pub fn full_scale(scenario: Scenario, n: usize, seed: u64) -> Self {
        MonteCarloConfig {
            scenario,
            replications: 1000,
            n,
            m: n / 10,
            subsamples: 1000,
            alpha: 0.05,
            degrees: vec![0, 1, 2],
            folds: 5,
            delta: 0.01,
            seed,
            refit: RefitPolicy::PerSubsample,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::InvalidParameter("replications must be >= 1".into()));
        }
        if self.m >= self.n {
            return Err(Error::InvalidParameter(format!(
                "m = {} must be below n = {}",
                self.m, self.n
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Location/dispersion summary of one estimator across replications,
/// paired with its population truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub name: String,
    pub truth: f64,
    pub average: f64,
    pub median: f64,
    pub sd: f64,
}

/// Coverage/length summary of one confidence-interval method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub method: String,
    pub coverage: f64,
    pub average_length: f64,
}

/// Coverage/width summary of one arm's confidence band against the exact
/// CDF.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandSummary {
    pub arm: Arm,
    pub coverage: f64,
    pub average_width: f64,
}

/// Aggregated Monte Carlo results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub scenario: Scenario,
    pub replications: usize,
    pub n: usize,
    pub m: usize,
    pub subsamples: usize,
    pub alpha: f64,
    pub seed: u64,
    pub truths: ExactTruths,
    pub estimators: Vec<EstimatorSummary>,
    pub intervals: Vec<IntervalSummary>,
    pub bands: Vec<BandSummary>,
    pub dominance_rejection_rate: f64,
    /// Replications whose pipeline failed; counted, never dropped
    /// silently.
    pub failures: usize,
    /// Normal-approximation tests that degenerated (zero variance).
    pub degenerate_variance_count: usize,
    /// Total subsample redraws across all replications.
    pub redraws: u64,
}

struct Replication {
    theta01: f64,
    q_treated: [f64; 3],
    q_control: [f64; 3],
    ate: f64,
    naive: f64,
    normal_ci: Option<(bool, f64)>,
    subsampling_ci: (bool, f64),
    band_treated: (bool, f64),
    band_control: (bool, f64),
    dominance_reject: bool,
    redraws: u64,
}

fn run_replication(
    config: &MonteCarloConfig,
    oracle: &ExactOracle,
    truths: &ExactTruths,
    index: u64,
) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_REPLICATION, index));
    let sample = generate_with_rng(config.scenario, config.n, &mut rng)?;

    let selection = select_basis_cv(&sample, &config.degrees, config.folds, config.delta)?;
    let model = fit_propensity(&sample, &selection.basis, config.delta, DEFAULT_RIDGE)?;

    let e1 = estimate_cdf(&sample, &model, Arm::Treated, EcdfKind::Hajek)?;
    let e0 = estimate_cdf(&sample, &model, Arm::Control, EcdfKind::Hajek)?;

    let th = theta01(&e0, &e1)?;
    let q = |e: &WeightedEcdf| -> Result<[f64; 3]> {
        Ok([e.quantile(0.25)?, e.quantile(0.50)?, e.quantile(0.75)?])
    };
    let ate = crate::ecdf::ate(&e1, &e0)?;
    let naive = naive_mean_diff(&sample)?;

    let normal = test_equality_normal(&sample, &model, config.alpha)?;
    let normal_ci = if normal.degenerate_variance {
        None
    } else {
        Some((
            normal.ci.contains(truths.theta01),
            normal.ci.length(),
        ))
    };

    let sub = test_equality_subsampling(
        &sample,
        &model,
        config.alpha,
        config.m,
        config.subsamples,
        derive_seed(config.seed, TAG_WILCOXON_CI, index),
        config.refit,
    )?;
    let subsampling_ci = (sub.ci.contains(truths.theta01), sub.ci.length());

    let mut redraws = sub.redraws.unwrap_or(0);
    let mut band_stat = |arm: Arm, tag: u64| -> Result<(bool, f64)> {
        let band = confidence_band(
            &sample,
            &model,
            arm,
            config.alpha,
            config.m,
            config.subsamples,
            derive_seed(config.seed, tag, index),
            config.refit,
        )?;
        redraws += band.redraws();
        let distance = sup_distance(band.ecdf(), &oracle.exact_cdf_curve(arm));
        Ok((band.covers(distance), 2.0 * band.half_width()))
    };
    let band_treated = band_stat(Arm::Treated, TAG_BAND_TREATED)?;
    let band_control = band_stat(Arm::Control, TAG_BAND_CONTROL)?;

    let dominance = dominance_test(
        &sample,
        &model,
        config.alpha,
        config.m,
        config.subsamples,
        derive_seed(config.seed, TAG_DOMINANCE, index),
        config.refit,
    )?;
    redraws += dominance.redraws;

    Ok(Replication {
        theta01: th,
        q_treated: q(&e1)?,
        q_control: q(&e0)?,
        ate,
        naive,
        normal_ci,
        subsampling_ci,
        band_treated,
        band_control,
        dominance_reject: dominance.reject,
        redraws,
    })
}

fn summarize(name: &str, truth: f64, values: &[f64]) -> EstimatorSummary {
    let n = values.len() as f64;
    let average = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - average).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
    };
    EstimatorSummary {
        name: name.to_string(),
        truth,
        average,
        median,
        sd,
    }
}

/// Run the full Monte Carlo study: per replication, generate a sample,
/// select and fit the propensity basis, estimate the weighted ECDFs and
/// their functionals, run both equality tests, both confidence bands, and
/// the dominance test; aggregate into a [`MonteCarloReport`].
///
/// Replications run in parallel keyed by derived seeds: the report is
/// identical for any worker count.
pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    let oracle = ExactOracle::new(config.scenario);
    let truths = oracle.truths();

    let outcomes: Vec<Result<Replication>> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, &oracle, &truths, r as u64))
        .collect();

    let mut reps = Vec::with_capacity(outcomes.len());
    let mut failures = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(rep) => reps.push(rep),
            Err(_) => failures += 1,
        }
    }
    if reps.is_empty() {
        return Err(Error::Internal(
            "every Monte Carlo replication failed".into(),
        ));
    }

    let collect = |f: &dyn Fn(&Replication) -> f64| -> Vec<f64> { reps.iter().map(f).collect() };

    let estimators = vec![
        summarize("theta01", truths.theta01, &collect(&|r| r.theta01)),
        summarize("q_treated_25", truths.q_treated[0], &collect(&|r| r.q_treated[0])),
        summarize("q_treated_50", truths.q_treated[1], &collect(&|r| r.q_treated[1])),
        summarize("q_treated_75", truths.q_treated[2], &collect(&|r| r.q_treated[2])),
        summarize("q_control_25", truths.q_control[0], &collect(&|r| r.q_control[0])),
        summarize("q_control_50", truths.q_control[1], &collect(&|r| r.q_control[1])),
        summarize("q_control_75", truths.q_control[2], &collect(&|r| r.q_control[2])),
        summarize("ate", truths.tau, &collect(&|r| r.ate)),
        summarize("naive_diff", truths.naive_diff, &collect(&|r| r.naive)),
    ];

    let normal_entries: Vec<(bool, f64)> = reps.iter().filter_map(|r| r.normal_ci).collect();
    let degenerate_variance_count = reps.len() - normal_entries.len();
    let rate = |hits: usize, total: usize| -> f64 {
        if total == 0 {
            f64::NAN
        } else {
            hits as f64 / total as f64
        }
    };
    let mean = |values: &[f64]| -> f64 {
        if values.is_empty() {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    };

    let intervals = vec![
        IntervalSummary {
            method: "wilcoxon_normal".to_string(),
            coverage: rate(
                normal_entries.iter().filter(|(c, _)| *c).count(),
                normal_entries.len(),
            ),
            average_length: mean(
                &normal_entries.iter().map(|(_, l)| *l).collect::<Vec<_>>(),
            ),
        },
        IntervalSummary {
            method: "wilcoxon_subsampling".to_string(),
            coverage: rate(
                reps.iter().filter(|r| r.subsampling_ci.0).count(),
                reps.len(),
            ),
            average_length: mean(&collect(&|r| r.subsampling_ci.1)),
        },
    ];

    let bands = vec![
        BandSummary {
            arm: Arm::Treated,
            coverage: rate(reps.iter().filter(|r| r.band_treated.0).count(), reps.len()),
            average_width: mean(&collect(&|r| r.band_treated.1)),
        },
        BandSummary {
            arm: Arm::Control,
            coverage: rate(reps.iter().filter(|r| r.band_control.0).count(), reps.len()),
            average_width: mean(&collect(&|r| r.band_control.1)),
        },
    ];

    Ok(MonteCarloReport {
        scenario: config.scenario,
        replications: config.replications,
        n: config.n,
        m: config.m,
        subsamples: config.subsamples,
        alpha: config.alpha,
        seed: config.seed,
        truths,
        estimators,
        intervals,
        bands,
        dominance_rejection_rate: rate(
            reps.iter().filter(|r| r.dominance_reject).count(),
            reps.len(),
        ),
        failures,
        degenerate_variance_count,
        redraws: reps.iter().map(|r| r.redraws).sum(),
    })
}

impl MonteCarloReport {
    /// Estimator table in the reference layout: estimator, truth,
    /// average, median, SD.
    pub fn write_estimator_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "estimator,truth,average,median,sd")?;
        for e in &self.estimators {
            writeln!(
                writer,
                "{},{},{},{},{}",
                e.name, e.truth, e.average, e.median, e.sd
            )?;
        }
        Ok(())
    }

    pub fn write_interval_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "method,coverage,average_length")?;
        for i in &self.intervals {
            writeln!(writer, "{},{},{}", i.method, i.coverage, i.average_length)?;
        }
        Ok(())
    }

    pub fn write_band_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "arm,coverage,average_width")?;
        for b in &self.bands {
            writeln!(
                writer,
                "{},{},{}",
                b.arm.label(),
                b.coverage,
                b.average_width
            )?;
        }
        Ok(())
    }

    pub fn write_dominance_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "test,rejection_rate")?;
        writeln!(writer, "dominance,{}", self.dominance_rejection_rate)?;
        Ok(())
    }
}
