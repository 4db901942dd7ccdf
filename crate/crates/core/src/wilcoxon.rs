//! Wilcoxon-type comparison of the treated and control outcome
//! distributions: the rank statistic theta01 = P(control outcome <=
//! treated outcome), its analytic variance estimator built from kernel
//! regressions, and equality tests by normal approximation and by
//! subsampling.

use crate::data::{Arm, Sample, DISCRETE_COVARIATE_MAX_LEVELS};
use crate::ecdf::{estimate_cdf, EcdfKind, WeightedEcdf};
use crate::error::{Error, Result};
use crate::propensity::{fit_propensity, PropensityModel};
use crate::subsampling::{ci_functional, root_distribution, Interval, RefitPolicy};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::cmp::Ordering;

/// theta01 = integral of F0 d F1 estimated by the weighted double sum
/// sum_i sum_k w1_i w0_k I(y_k <= y_i): the probability that a treated
/// outcome is at least an independent control outcome. Computed in
/// O(n log n) by accumulating w1 * F0 over the treated support; ties
/// across arms count inclusively. Both ECDFs must be normalized.
///
/// Argument order: the first distribution is evaluated, the second
/// weights, so `theta01(e0, e1)` estimates P(Y0 <= Y1) and swapping the
/// arguments estimates P(Y1 <= Y0).
pub fn theta01(ecdf0: &WeightedEcdf, ecdf1: &WeightedEcdf) -> Result<f64> {
    if !ecdf0.is_normalized() || !ecdf1.is_normalized() {
        return Err(Error::InvalidParameter(
            "theta01 requires normalized ECDFs".into(),
        ));
    }
    let s0 = ecdf0.support();
    let c0 = ecdf0.cumulative();
    let mut j = 0usize;
    let mut acc = 0.0;
    for (&s, &w) in ecdf1.support().iter().zip(ecdf1.weights()) {
        while j < s0.len() && s0[j] <= s {
            j += 1;
        }
        if j > 0 {
            acc += w * c0[j - 1];
        }
    }
    Ok(acc.clamp(0.0, 1.0))
}

/// Total cross-arm tie mass sum_{y} w1(y) * w0(y) over shared support
/// values; theta01 + theta10 - tie mass = 1 exactly.
pub fn cross_tie_mass(ecdf0: &WeightedEcdf, ecdf1: &WeightedEcdf) -> f64 {
    let mut j = 0usize;
    let s0 = ecdf0.support();
    let mut mass = 0.0;
    for (&s, &w1) in ecdf1.support().iter().zip(ecdf1.weights()) {
        while j < s0.len() && s0[j] < s {
            j += 1;
        }
        if j < s0.len() && s0[j] == s {
            mass += w1 * ecdf0.weights()[j];
        }
    }
    mass
}

/// Bandwidth choice for the kernel regressions.
#[derive(Debug, Clone)]
pub enum BandwidthRule {
    /// 1.06 * sd * n^(-1/5) per covariate dimension.
    Silverman,
    /// Fixed bandwidth per covariate dimension.
    Fixed(Vec<f64>),
}

/// Nadaraya-Watson regression with a Gaussian product kernel. When the
/// covariate rows take at most [`DISCRETE_COVARIATE_MAX_LEVELS`] distinct
/// values the regression collapses to exact cell means, which removes
/// bandwidth sensitivity for discrete designs.
#[derive(Debug, Clone)]
pub struct KernelRegressionFit {
    inputs: Vec<Vec<f64>>,
    responses: Vec<f64>,
    bandwidths: Vec<f64>,
    /// Sorted distinct covariate rows with their mean responses, present
    /// in discrete mode.
    cells: Option<Vec<(Vec<f64>, f64)>>,
    global_mean: f64,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

impl KernelRegressionFit {
    pub fn new(inputs: Vec<Vec<f64>>, responses: Vec<f64>, rule: &BandwidthRule) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != responses.len() {
            return Err(Error::InvalidParameter(
                "kernel regression needs matching nonempty inputs and responses".into(),
            ));
        }
        let dim = inputs[0].len();
        let n = inputs.len() as f64;
        let bandwidths = match rule {
            BandwidthRule::Fixed(h) => {
                if h.len() != dim || h.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::InvalidParameter(
                        "fixed bandwidths must be positive, one per dimension".into(),
                    ));
                }
                h.clone()
            }
            BandwidthRule::Silverman => (0..dim)
                .map(|d| {
                    let mean = inputs.iter().map(|x| x[d]).sum::<f64>() / n;
                    let var = inputs.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / n;
                    let sd = var.sqrt();
                    let h = 1.06 * sd * n.powf(-0.2);
                    if h > 0.0 {
                        h
                    } else {
                        1.0
                    }
                })
                .collect(),
        };
        let global_mean = responses.iter().sum::<f64>() / n;

        // Detect a discrete design: few distinct covariate rows.
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(&inputs[a], &inputs[b]));
        let mut cells: Vec<(Vec<f64>, f64, usize)> = Vec::new();
        for &i in &order {
            match cells.last_mut() {
                Some((x, sum, count)) if lex_cmp(x, &inputs[i]) == Ordering::Equal => {
                    *sum += responses[i];
                    *count += 1;
                }
                _ => cells.push((inputs[i].clone(), responses[i], 1)),
            }
        }
        let cells = if cells.len() <= DISCRETE_COVARIATE_MAX_LEVELS {
            Some(
                cells
                    .into_iter()
                    .map(|(x, sum, count)| (x, sum / count as f64))
                    .collect(),
            )
        } else {
            None
        };

        Ok(KernelRegressionFit {
            inputs,
            responses,
            bandwidths,
            cells,
            global_mean,
        })
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn is_discrete(&self) -> bool {
        self.cells.is_some()
    }

    /// Predict the regression function at `x`. Falls back to the global
    /// response mean when every kernel weight underflows, or (in discrete
    /// mode) to the smooth estimate when `x` matches no cell.
    pub fn predict(&self, x: &[f64]) -> f64 {
        if let Some(cells) = &self.cells {
            if let Ok(idx) = cells.binary_search_by(|(cx, _)| lex_cmp(cx, x)) {
                return cells[idx].1;
            }
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (xi, ri) in self.inputs.iter().zip(&self.responses) {
            let mut k = 1.0;
            for ((a, b), h) in x.iter().zip(xi).zip(&self.bandwidths) {
                let u = (a - b) / h;
                k *= (-0.5 * u * u).exp();
            }
            num += k * ri;
            den += k;
        }
        if den > 0.0 {
            num / den
        } else {
            self.global_mean
        }
    }
}

/// Plug-in estimator of the asymptotic variance of sqrt(n) * theta01_hat.
///
/// Regresses the weighted CDF responses on the covariates to estimate the
/// conditional means gamma01(x) = E[F0(Y)|x, treated] and gamma10(x) =
/// E[F1(Y)|x, control] plus their squared-response counterparts, then
/// assembles the three variance components. Negative bracketed terms are
/// floored at zero pointwise.
///
/// With `alternative_centering` the between-covariate component uses the
/// uncentered sum minus (1 - theta01_hat)^2 instead of the empirical
/// variance of gamma10 - gamma01.
pub fn variance_estimate(
    sample: &Sample,
    model: &PropensityModel,
    ecdf0: &WeightedEcdf,
    ecdf1: &WeightedEcdf,
    rule: &BandwidthRule,
    alternative_centering: bool,
) -> Result<f64> {
    sample.require_arm(Arm::Treated)?;
    sample.require_arm(Arm::Control)?;
    let n = sample.len();
    let inputs: Vec<Vec<f64>> = sample.rows().iter().map(|r| r.x.clone()).collect();

    let mut r_g01 = vec![0.0; n];
    let mut r_m01 = vec![0.0; n];
    let mut r_g10 = vec![0.0; n];
    let mut r_m10 = vec![0.0; n];
    let mut p1 = vec![0.0; n];
    for (i, row) in sample.rows().iter().enumerate() {
        p1[i] = model.predict(&row.x, Arm::Treated)?;
        if row.t == 1 {
            let f0 = ecdf0.eval(row.y);
            r_g01[i] = f0 / p1[i];
            r_m01[i] = f0 * f0 / p1[i];
        } else {
            let f1 = ecdf1.eval(row.y);
            let p0 = 1.0 - p1[i];
            r_g10[i] = f1 / p0;
            r_m10[i] = f1 * f1 / p0;
        }
    }

    let g01 = KernelRegressionFit::new(inputs.clone(), r_g01, rule)?;
    let m01 = KernelRegressionFit::new(inputs.clone(), r_m01, rule)?;
    let g10 = KernelRegressionFit::new(inputs.clone(), r_g10, rule)?;
    let m10 = KernelRegressionFit::new(inputs, r_m10, rule)?;

    let mut within_treated = 0.0;
    let mut within_control = 0.0;
    let mut diffs = Vec::with_capacity(n);
    for (i, row) in sample.rows().iter().enumerate() {
        let gh01 = g01.predict(&row.x);
        let gh10 = g10.predict(&row.x);
        within_treated += (m01.predict(&row.x) - gh01 * gh01).max(0.0) / p1[i];
        within_control += (m10.predict(&row.x) - gh10 * gh10).max(0.0) / (1.0 - p1[i]);
        diffs.push(gh10 - gh01);
    }
    within_treated /= n as f64;
    within_control /= n as f64;

    let between = if alternative_centering {
        let th01 = theta01(ecdf0, ecdf1)?;
        let raw = diffs.iter().map(|d| d * d).sum::<f64>() / n as f64;
        raw - (1.0 - th01).powi(2)
    } else {
        let mean = diffs.iter().sum::<f64>() / n as f64;
        diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64
    };

    Ok((within_treated + within_control + between).max(0.0))
}

/// How the equality test obtained its critical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    NormalApprox,
    Subsampling,
}

/// Result of a Wilcoxon-type equality test of the two outcome
/// distributions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WilcoxonReport {
    pub theta01_hat: f64,
    /// Analytic variance estimate; absent for the subsampling method.
    pub variance_hat: Option<f64>,
    /// Standardized statistic sqrt(n)(theta01_hat - 1/2)/sqrt(variance);
    /// absent for subsampling or when the variance degenerates.
    pub z_stat: Option<f64>,
    pub ci: Interval,
    pub method: TestMethod,
    /// Significance level the decision used.
    pub reject_at: f64,
    /// None when the variance estimate degenerated to zero.
    pub decision: Option<bool>,
    pub degenerate_variance: bool,
    pub m: Option<usize>,
    pub subsamples: Option<usize>,
    pub seed: Option<u64>,
    pub redraws: Option<u64>,
}

/// Test H0: theta01 = 1/2 by normal approximation with the analytic
/// variance estimator.
pub fn test_equality_normal(
    sample: &Sample,
    model: &PropensityModel,
    alpha: f64,
) -> Result<WilcoxonReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let ecdf0 = estimate_cdf(sample, model, Arm::Control, EcdfKind::Hajek)?;
    let ecdf1 = estimate_cdf(sample, model, Arm::Treated, EcdfKind::Hajek)?;
    let th = theta01(&ecdf0, &ecdf1)?;
    let v = variance_estimate(
        sample,
        model,
        &ecdf0,
        &ecdf1,
        &BandwidthRule::Silverman,
        false,
    )?;
    let n = sample.len() as f64;
    if v == 0.0 {
        return Ok(WilcoxonReport {
            theta01_hat: th,
            variance_hat: Some(0.0),
            z_stat: None,
            ci: Interval {
                lower: th,
                upper: th,
            },
            method: TestMethod::NormalApprox,
            reject_at: alpha,
            decision: None,
            degenerate_variance: true,
            m: None,
            subsamples: None,
            seed: None,
            redraws: None,
        });
    }
    let z_crit = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let z = n.sqrt() * (th - 0.5) / v.sqrt();
    let half = z_crit * (v / n).sqrt();
    Ok(WilcoxonReport {
        theta01_hat: th,
        variance_hat: Some(v),
        z_stat: Some(z),
        ci: Interval {
            lower: th - half,
            upper: th + half,
        },
        method: TestMethod::NormalApprox,
        reject_at: alpha,
        decision: Some(z.abs() > z_crit),
        degenerate_variance: false,
        m: None,
        subsamples: None,
        seed: None,
        redraws: None,
    })
}

/// theta01 recomputed from scratch on a (sub)sample; refits the propensity
/// when asked, otherwise reuses the full-sample model for prediction.
fn theta01_statistic(
    sub: &Sample,
    model: &PropensityModel,
    refit: RefitPolicy,
) -> Result<f64> {
    let refitted = match refit {
        RefitPolicy::PerSubsample => Some(fit_propensity(
            sub,
            model.basis(),
            model.delta(),
            model.ridge(),
        )?),
        RefitPolicy::FullSampleModel => None,
    };
    let active = refitted.as_ref().unwrap_or(model);
    let e0 = estimate_cdf(sub, active, Arm::Control, EcdfKind::Hajek)?;
    let e1 = estimate_cdf(sub, active, Arm::Treated, EcdfKind::Hajek)?;
    theta01(&e0, &e1)
}

/// Test H0: theta01 = 1/2 by inverting the subsampling confidence
/// interval: reject when 1/2 falls outside it.
#[allow(clippy::too_many_arguments)]
pub fn test_equality_subsampling(
    sample: &Sample,
    model: &PropensityModel,
    alpha: f64,
    m: usize,
    replicates: usize,
    seed: u64,
    refit: RefitPolicy,
) -> Result<WilcoxonReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    if m >= sample.len() {
        return Err(Error::InvalidParameter(format!(
            "subsample size m = {m} must be below n = {}",
            sample.len()
        )));
    }
    let dist = root_distribution(
        sample,
        |sub| theta01_statistic(sub, model, refit),
        m,
        replicates,
        seed,
    )?;
    let th = theta01_statistic(sample, model, RefitPolicy::FullSampleModel)?;
    let ci = ci_functional(&dist, th, alpha)?;
    Ok(WilcoxonReport {
        theta01_hat: th,
        variance_hat: None,
        z_stat: None,
        ci,
        method: TestMethod::Subsampling,
        reject_at: alpha,
        decision: Some(!ci.contains(0.5)),
        degenerate_variance: false,
        m: Some(m),
        subsamples: Some(replicates),
        seed: Some(seed),
        redraws: Some(dist.redraws()),
    })
}
