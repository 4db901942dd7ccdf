//! Inverse-propensity-weighted empirical distribution functions per arm
//! (normalized Hajek and unnormalized Horvitz-Thompson variants) and the
//! point functionals derived from them: CDF evaluation, quantiles, ATE,
//! QTE, and exact sup-distances between distribution curves.

use crate::data::{Arm, Sample};
use crate::error::{Error, Result};
use crate::propensity::PropensityModel;
use std::io::Write;

/// Which weighting scheme an ECDF uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcdfKind {
    /// Weights normalized to sum 1 over the arm; a proper distribution
    /// function.
    Hajek,
    /// Unnormalized weights [t=j]/p_j(x)/n; total mass differs from 1 in
    /// finite samples.
    HorvitzThompson,
}

/// A weighted empirical CDF on one arm's outcomes. Equal outcome values
/// are merged with summed weights, so the support is strictly increasing.
/// Evaluation is right-continuous.
#[derive(Debug, Clone)]
pub struct WeightedEcdf {
    arm: Arm,
    support: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    normalized: bool,
    total_mass: f64,
}

impl WeightedEcdf {
    /// Build from (value, weight) points. Ties are merged; weights must be
    /// nonnegative and finite. When `normalized` is set the weights are
    /// expected to sum to 1 (up to rounding) and the final cumulative value
    /// is pinned to exactly 1.
    pub fn from_points(arm: Arm, points: Vec<(f64, f64)>, normalized: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyArm(arm.label()));
        }
        let mut points = points;
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support = Vec::with_capacity(points.len());
        let mut weights: Vec<f64> = Vec::with_capacity(points.len());
        for (y, w) in points {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "ecdf weight must be finite and >= 0, got {w}"
                )));
            }
            match support.last() {
                Some(&last) if last == y => *weights.last_mut().unwrap() += w,
                _ => {
                    support.push(y);
                    weights.push(w);
                }
            }
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        let total_mass = if normalized {
            // Pin the total at 1 and keep monotonicity against rounding
            // drift in the running sum.
            for c in cumulative.iter_mut() {
                *c = c.min(1.0);
            }
            *cumulative.last_mut().unwrap() = 1.0;
            1.0
        } else {
            *cumulative.last().unwrap()
        };
        Ok(WeightedEcdf {
            arm,
            support,
            weights,
            cumulative,
            normalized,
            total_mass,
        })
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    /// Strictly increasing outcome values after tie-merging.
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// Merged weights aligned to the support.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Running weight sums aligned to the support; the last entry equals
    /// `total_mass`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Right-continuous CDF value at `y`: total weight of support <= y.
    pub fn eval(&self, y: f64) -> f64 {
        let count = self.support.partition_point(|&s| s <= y);
        if count == 0 {
            0.0
        } else {
            self.cumulative[count - 1]
        }
    }

    /// Left limit at `y`: total weight of support strictly below y.
    pub fn eval_left(&self, y: f64) -> f64 {
        let count = self.support.partition_point(|&s| s < y);
        if count == 0 {
            0.0
        } else {
            self.cumulative[count - 1]
        }
    }

    /// Lower quantile inf{y: F(y) >= p} for p in (0, 1]. Requires a
    /// normalized ECDF.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !self.normalized {
            return Err(Error::InvalidParameter(
                "quantile requires a normalized ECDF".into(),
            ));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile order must be in (0, 1], got {p}"
            )));
        }
        let idx = self
            .cumulative
            .partition_point(|&c| c < p)
            .min(self.support.len() - 1);
        Ok(self.support[idx])
    }

    /// Weighted mean of the support.
    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s * w)
            .sum()
    }

    /// Write rows (y, weight, cumulative) as CSV with a header.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "y,weight,cumulative")?;
        for i in 0..self.support.len() {
            writeln!(
                writer,
                "{},{},{}",
                self.support[i], self.weights[i], self.cumulative[i]
            )?;
        }
        Ok(())
    }
}

/// Normalized inverse-propensity weights for one arm: w_i proportional to
/// [t_i = j] / p_j(x_i), summing to 1 over the arm and zero elsewhere.
/// Returned in row order with length n.
pub fn hajek_weights(
    sample: &Sample,
    model: &PropensityModel,
    arm: Arm,
) -> Result<Vec<f64>> {
    sample.require_arm(arm)?;
    let t = arm.indicator();
    let mut raw = vec![0.0; sample.len()];
    let mut total = 0.0;
    for (i, row) in sample.rows().iter().enumerate() {
        if row.t == t {
            let p = model.predict(&row.x, arm)?;
            raw[i] = 1.0 / p;
            total += raw[i];
        }
    }
    for w in raw.iter_mut() {
        *w /= total;
    }
    Ok(raw)
}

/// Estimate the outcome CDF for one arm by inverse-propensity weighting.
pub fn estimate_cdf(
    sample: &Sample,
    model: &PropensityModel,
    arm: Arm,
    kind: EcdfKind,
) -> Result<WeightedEcdf> {
    sample.require_arm(arm)?;
    match kind {
        EcdfKind::Hajek => {
            let weights = hajek_weights(sample, model, arm)?;
            let t = arm.indicator();
            let points = sample
                .rows()
                .iter()
                .zip(weights)
                .filter(|(row, _)| row.t == t)
                .map(|(row, w)| (row.y, w))
                .collect();
            WeightedEcdf::from_points(arm, points, true)
        }
        EcdfKind::HorvitzThompson => {
            let t = arm.indicator();
            let n = sample.len() as f64;
            let mut points = Vec::new();
            for row in sample.rows() {
                if row.t == t {
                    let p = model.predict(&row.x, arm)?;
                    points.push((row.y, 1.0 / (p * n)));
                }
            }
            WeightedEcdf::from_points(arm, points, false)
        }
    }
}

/// Average treatment effect: weighted mean of the treated ECDF minus the
/// weighted mean of the control ECDF. Both inputs must be normalized.
pub fn ate(treated: &WeightedEcdf, control: &WeightedEcdf) -> Result<f64> {
    if !treated.is_normalized() || !control.is_normalized() {
        return Err(Error::InvalidParameter(
            "ate requires normalized ECDFs".into(),
        ));
    }
    Ok(treated.mean() - control.mean())
}

/// Quantile treatment effect at order p: Q_treated(p) - Q_control(p).
pub fn qte(treated: &WeightedEcdf, control: &WeightedEcdf, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "qte order must be in (0, 1), got {p}"
        )));
    }
    Ok(treated.quantile(p)? - control.quantile(p)?)
}

/// Unweighted treated-mean minus control-mean; the confounded comparison
/// the weighted estimators correct.
pub fn naive_mean_diff(sample: &Sample) -> Result<f64> {
    sample.require_arm(Arm::Treated)?;
    sample.require_arm(Arm::Control)?;
    let mut sums = [0.0, 0.0];
    let mut counts = [0usize, 0];
    for row in sample.rows() {
        sums[row.t as usize] += row.y;
        counts[row.t as usize] += 1;
    }
    Ok(sums[1] / counts[1] as f64 - sums[0] / counts[0] as f64)
}

/// A distribution curve that can be evaluated with one-sided limits and
/// enumerates the points where its shape changes. Implemented by weighted
/// ECDFs (jump points) and by the exact piecewise-linear scenario CDFs
/// (knots).
pub trait CdfCurve {
    fn value(&self, y: f64) -> f64;
    fn value_left(&self, y: f64) -> f64;
    fn change_points(&self) -> Vec<f64>;
}

impl CdfCurve for WeightedEcdf {
    fn value(&self, y: f64) -> f64 {
        self.eval(y)
    }

    fn value_left(&self, y: f64) -> f64 {
        self.eval_left(y)
    }

    fn change_points(&self) -> Vec<f64> {
        self.support.clone()
    }
}

/// Exact sup-norm distance between two curves, evaluated at both one-sided
/// limits of every change point of either curve. Exact for piecewise
/// constant and piecewise linear inputs because the difference is monotone
/// between consecutive change points.
pub fn sup_distance(a: &dyn CdfCurve, b: &dyn CdfCurve) -> f64 {
    let mut points = a.change_points();
    points.extend(b.change_points());
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut sup = 0.0_f64;
    for &y in &points {
        sup = sup.max((a.value(y) - b.value(y)).abs());
        sup = sup.max((a.value_left(y) - b.value_left(y)).abs());
    }
    sup
}
