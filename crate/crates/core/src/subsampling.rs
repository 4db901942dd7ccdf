//! Subsampling inference for root statistics sqrt(m) * (estimate_m -
//! estimate_n), and its three applications: confidence intervals for
//! functionals, Kolmogorov-type confidence bands, and the one-sided
//! stochastic-dominance test.

use crate::data::{Arm, Sample};
use crate::ecdf::{estimate_cdf, EcdfKind, WeightedEcdf};
use crate::error::{Error, Result};
use crate::propensity::{fit_propensity, PropensityModel};
use crate::seeding::{derive_seed, TAG_SUBSAMPLE};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Maximum redraw attempts per replicate before giving up on finding a
/// subsample with both arms present (10 per replicate, 10*M overall).
const MAX_ATTEMPTS_PER_REPLICATE: usize = 10;

/// Whether the propensity model is re-estimated on every subsample
/// replicate (the default; the statistic includes estimation of the
/// propensity) or the full-sample fit is reused as a fast approximation
/// whose roots no longer account for estimation noise in p-hat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitPolicy {
    PerSubsample,
    FullSampleModel,
}

/// A closed interval, used for functional confidence intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// The empirical distribution of M subsampling roots, with quantile
/// inversion by the inf convention.
#[derive(Debug, Clone)]
pub struct SubsamplingDistribution {
    roots: Vec<f64>,
    m: usize,
    n: usize,
    replicates: usize,
    redraws: u64,
}

impl SubsamplingDistribution {
    fn new(mut roots: Vec<f64>, m: usize, n: usize, redraws: u64) -> Self {
        roots.sort_by(f64::total_cmp);
        let replicates = roots.len();
        SubsamplingDistribution {
            roots,
            m,
            n,
            replicates,
            redraws,
        }
    }

    /// Sorted roots sqrt(m) * (estimate_m - estimate_n).
    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    pub fn subsample_size(&self) -> usize {
        self.m
    }

    pub fn full_size(&self) -> usize {
        self.n
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    /// Replicates that had to be redrawn because a subsample lost an arm.
    pub fn redraws(&self) -> u64 {
        self.redraws
    }

    /// inf{u : R(u) >= p}: the smallest root whose empirical CDF value
    /// reaches p. The index comparison uses j/M >= p directly so that grid
    /// probabilities are handled without rounding surprises.
    pub fn quantile(&self, p: f64) -> f64 {
        let m = self.replicates;
        let mut lo = 1usize;
        let mut hi = m;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if (mid as f64) / (m as f64) >= p {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        self.roots[lo - 1]
    }
}

/// Simple random sample of m rows without replacement, in original row
/// order. Deterministic given the RNG state.
pub fn draw_subsample<R: Rng>(sample: &Sample, m: usize, rng: &mut R) -> Result<Sample> {
    let n = sample.len();
    if m < 1 || m > n {
        return Err(Error::InvalidParameter(format!(
            "subsample size must be in [1, {n}], got {m}"
        )));
    }
    let mut indices = rand::seq::index::sample(rng, n, m).into_vec();
    indices.sort_unstable();
    Sample::from_indices(sample, &indices)
}

/// Draw subsamples until both arms are present, up to the per-replicate
/// attempt cap. Returns the subsample and the number of redraws.
fn draw_with_both_arms<R: Rng>(sample: &Sample, m: usize, rng: &mut R) -> Result<(Sample, u64)> {
    for attempt in 0..MAX_ATTEMPTS_PER_REPLICATE {
        let sub = draw_subsample(sample, m, rng)?;
        if sub.has_both_arms() {
            return Ok((sub, attempt as u64));
        }
    }
    Err(Error::RedrawLimit)
}

/// Run the per-replicate kernel over M seeded subsamples and collect its
/// outputs in replicate order. The kernel sees subsamples that contain
/// both arms; replicates violating that are redrawn and counted.
fn subsample_map<F>(
    sample: &Sample,
    m: usize,
    replicates: usize,
    seed: u64,
    kernel: F,
) -> Result<(Vec<f64>, u64)>
where
    F: Fn(&Sample) -> Result<f64> + Sync,
{
    if replicates < 1 {
        return Err(Error::InvalidParameter(
            "subsample replicate count must be >= 1".into(),
        ));
    }
    let outcomes: Vec<Result<(f64, u64)>> = (0..replicates)
        .into_par_iter()
        .map(|l| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_SUBSAMPLE, l as u64));
            let (sub, redraws) = draw_with_both_arms(sample, m, &mut rng)?;
            Ok((kernel(&sub)?, redraws))
        })
        .collect();
    let mut values = Vec::with_capacity(replicates);
    let mut redraws = 0;
    for outcome in outcomes {
        let (v, r) = outcome?;
        values.push(v);
        redraws += r;
    }
    Ok((values, redraws))
}

/// Subsampling distribution of the roots sqrt(m) * (statistic(subsample) -
/// statistic(sample)). The statistic owns everything it estimates, so any
/// model refitting happens inside it.
pub fn root_distribution<F>(
    sample: &Sample,
    statistic: F,
    m: usize,
    replicates: usize,
    seed: u64,
) -> Result<SubsamplingDistribution>
where
    F: Fn(&Sample) -> Result<f64> + Sync,
{
    let n = sample.len();
    if m < 1 || m > n {
        return Err(Error::InvalidParameter(format!(
            "subsample size must be in [1, {n}], got {m}"
        )));
    }
    let theta_n = statistic(sample)?;
    let sqrt_m = (m as f64).sqrt();
    let (roots, redraws) = subsample_map(sample, m, replicates, seed, |sub| {
        Ok(sqrt_m * (statistic(sub)? - theta_n))
    })?;
    Ok(SubsamplingDistribution::new(roots, m, n, redraws))
}

/// Confidence interval of asymptotic level 1 - alpha for the functional
/// behind a root distribution:
/// [theta_n - q(1 - alpha/2)/sqrt(n), theta_n - q(alpha/2)/sqrt(n)].
pub fn ci_functional(dist: &SubsamplingDistribution, theta_n: f64, alpha: f64) -> Result<Interval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let sqrt_n = (dist.full_size() as f64).sqrt();
    Ok(Interval {
        lower: theta_n - dist.quantile(1.0 - alpha / 2.0) / sqrt_n,
        upper: theta_n - dist.quantile(alpha / 2.0) / sqrt_n,
    })
}

/// Evaluate an ECDF along an ascending grid that contains every point of
/// its support, by a linear merge.
fn eval_along_grid(ecdf: &WeightedEcdf, grid: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let support = ecdf.support();
    let cumulative = ecdf.cumulative();
    let mut j = 0usize;
    for &g in grid {
        while j < support.len() && support[j] <= g {
            j += 1;
        }
        out.push(if j == 0 { 0.0 } else { cumulative[j - 1] });
    }
}

fn refit_for(
    sub: &Sample,
    model: &PropensityModel,
    policy: RefitPolicy,
) -> Result<Option<PropensityModel>> {
    match policy {
        RefitPolicy::PerSubsample => Ok(Some(fit_propensity(
            sub,
            model.basis(),
            model.delta(),
            model.ridge(),
        )?)),
        RefitPolicy::FullSampleModel => Ok(None),
    }
}

/// Uniform confidence band for one arm's outcome CDF: the estimate plus
/// and minus d_hat/sqrt(n), clamped to [0, 1], where d_hat is the
/// subsampling estimate of the 1 - alpha quantile of the limiting
/// Kolmogorov statistic.
#[derive(Debug, Clone)]
pub struct ConfidenceBand {
    arm: Arm,
    level: f64,
    d_hat: f64,
    half_width: f64,
    ecdf: WeightedEcdf,
    n: usize,
    m: usize,
    replicates: usize,
    seed: u64,
    redraws: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandReport {
    pub arm: Arm,
    pub level: f64,
    pub d_hat: f64,
    pub half_width: f64,
    pub n: usize,
    pub m: usize,
    pub subsamples: usize,
    pub seed: u64,
    pub redraws: u64,
}

impl ConfidenceBand {
    pub fn arm(&self) -> Arm {
        self.arm
    }

    /// Nominal level 1 - alpha.
    pub fn level(&self) -> f64 {
        self.level
    }

    /// Estimated critical value of the limiting sup statistic.
    pub fn d_hat(&self) -> f64 {
        self.d_hat
    }

    /// d_hat / sqrt(n): the band's half width before clamping.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn ecdf(&self) -> &WeightedEcdf {
        &self.ecdf
    }

    pub fn redraws(&self) -> u64 {
        self.redraws
    }

    pub fn lower(&self, y: f64) -> f64 {
        (self.ecdf.eval(y) - self.half_width).max(0.0)
    }

    pub fn upper(&self, y: f64) -> f64 {
        (self.ecdf.eval(y) + self.half_width).min(1.0)
    }

    /// True when the whole curve `f` lies inside the band; for the exact
    /// scenario CDFs this is coverage of the truth.
    pub fn covers(&self, sup_distance_to_estimate: f64) -> bool {
        sup_distance_to_estimate <= self.half_width
    }

    pub fn report(&self) -> BandReport {
        BandReport {
            arm: self.arm,
            level: self.level,
            d_hat: self.d_hat,
            half_width: self.half_width,
            n: self.n,
            m: self.m,
            subsamples: self.replicates,
            seed: self.seed,
            redraws: self.redraws,
        }
    }

    /// Write rows (y, lower, upper) at the support points as CSV.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "y,lower,upper")?;
        for &y in self.ecdf.support() {
            writeln!(writer, "{},{},{}", y, self.lower(y), self.upper(y))?;
        }
        Ok(())
    }
}

/// Build the confidence band for one arm. Roots are the one-sample
/// Kolmogorov statistics sqrt(m) * sup_y |F_m(y) - F_n(y)| over seeded
/// subsamples, with the propensity refit per subsample by default.
#[allow(clippy::too_many_arguments)]
pub fn confidence_band(
    sample: &Sample,
    model: &PropensityModel,
    arm: Arm,
    alpha: f64,
    m: usize,
    replicates: usize,
    seed: u64,
    refit: RefitPolicy,
) -> Result<ConfidenceBand> {
    let n = sample.len();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    if m >= n {
        return Err(Error::InvalidParameter(format!(
            "subsample size m = {m} must be below n = {n}"
        )));
    }
    let full = estimate_cdf(sample, model, arm, EcdfKind::Hajek)?;
    let grid = full.support();
    let full_values = full.cumulative();
    let sqrt_m = (m as f64).sqrt();

    let (roots, redraws) = subsample_map(sample, m, replicates, seed, |sub| {
        let refitted = refit_for(sub, model, refit)?;
        let active = refitted.as_ref().unwrap_or(model);
        let sub_ecdf = estimate_cdf(sub, active, arm, EcdfKind::Hajek)?;
        let mut sub_values = Vec::new();
        eval_along_grid(&sub_ecdf, grid, &mut sub_values);
        let mut sup = 0.0_f64;
        for (s, f) in sub_values.iter().zip(full_values) {
            sup = sup.max((s - f).abs());
        }
        Ok(sqrt_m * sup)
    })?;

    let dist = SubsamplingDistribution::new(roots, m, n, redraws);
    let d_hat = dist.quantile(1.0 - alpha);
    Ok(ConfidenceBand {
        arm,
        level: 1.0 - alpha,
        d_hat,
        half_width: d_hat / (n as f64).sqrt(),
        ecdf: full,
        n,
        m,
        replicates,
        seed,
        redraws,
    })
}

/// Result of the one-sided first-order stochastic-dominance test of
/// "treated dominates control" (H0: F1 <= F0 everywhere).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominanceReport {
    /// sup_y of the estimated difference F1_n(y) - F0_n(y).
    pub sup_stat: f64,
    /// Subsampling critical value for the sup statistic.
    pub d_hat: f64,
    pub reject: bool,
    /// Outcome value attaining the sup (smallest such point on ties).
    pub witness_y: f64,
    pub n: usize,
    pub m: usize,
    pub subsamples: usize,
    pub alpha: f64,
    pub seed: u64,
    pub redraws: u64,
}

/// Merged ascending jump points of both arms' full-sample ECDFs. Every
/// subsample ECDF jumps only at a subset of these.
fn pooled_grid(e1: &WeightedEcdf, e0: &WeightedEcdf) -> Vec<f64> {
    let mut grid = Vec::with_capacity(e1.support().len() + e0.support().len());
    grid.extend_from_slice(e1.support());
    grid.extend_from_slice(e0.support());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Test H0: F1(y) <= F0(y) for all y, rejecting when the estimated
/// difference exceeds d_hat/sqrt(n) somewhere. Roots are centered sup
/// statistics of the difference process over seeded subsamples.
pub fn dominance_test(
    sample: &Sample,
    model: &PropensityModel,
    alpha: f64,
    m: usize,
    replicates: usize,
    seed: u64,
    refit: RefitPolicy,
) -> Result<DominanceReport> {
    let n = sample.len();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    if m >= n {
        return Err(Error::InvalidParameter(format!(
            "subsample size m = {m} must be below n = {n}"
        )));
    }
    sample.require_arm(Arm::Treated)?;
    sample.require_arm(Arm::Control)?;

    let full1 = estimate_cdf(sample, model, Arm::Treated, EcdfKind::Hajek)?;
    let full0 = estimate_cdf(sample, model, Arm::Control, EcdfKind::Hajek)?;
    let grid = pooled_grid(&full1, &full0);
    let mut f1_values = Vec::new();
    let mut f0_values = Vec::new();
    eval_along_grid(&full1, &grid, &mut f1_values);
    eval_along_grid(&full0, &grid, &mut f0_values);
    let full_delta: Vec<f64> = f1_values
        .iter()
        .zip(&f0_values)
        .map(|(a, b)| a - b)
        .collect();

    let mut sup_stat = f64::NEG_INFINITY;
    let mut witness_y = grid[0];
    for (k, &d) in full_delta.iter().enumerate() {
        if d > sup_stat {
            sup_stat = d;
            witness_y = grid[k];
        }
    }

    let sqrt_m = (m as f64).sqrt();
    let (roots, redraws) = subsample_map(sample, m, replicates, seed, |sub| {
        let refitted = refit_for(sub, model, refit)?;
        let active = refitted.as_ref().unwrap_or(model);
        let sub1 = estimate_cdf(sub, active, Arm::Treated, EcdfKind::Hajek)?;
        let sub0 = estimate_cdf(sub, active, Arm::Control, EcdfKind::Hajek)?;
        let mut s1 = Vec::new();
        let mut s0 = Vec::new();
        eval_along_grid(&sub1, &grid, &mut s1);
        eval_along_grid(&sub0, &grid, &mut s0);
        let mut sup = f64::NEG_INFINITY;
        for k in 0..grid.len() {
            sup = sup.max(s1[k] - s0[k] - full_delta[k]);
        }
        Ok(sqrt_m * sup)
    })?;

    let dist = SubsamplingDistribution::new(roots, m, n, redraws);
    let d_hat = dist.quantile(1.0 - alpha);
    let reject = sup_stat - d_hat / (n as f64).sqrt() > 0.0;
    Ok(DominanceReport {
        sup_stat,
        d_hat,
        reject,
        witness_y,
        n,
        m,
        subsamples: replicates,
        alpha,
        seed,
        redraws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use crate::propensity::{SieveBasis, DEFAULT_RIDGE};
    use rand::Rng;

    fn simple_sample(n: usize, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                let x = f64::from(rng.gen_bool(0.5));
                Observation {
                    x: vec![x],
                    t: u8::from(rng.gen_bool(0.5)),
                    y: rng.gen_range(0.0..1.0) + x,
                }
            })
            .collect();
        Sample::new(rows).unwrap()
    }

    #[test]
    fn draw_full_size_is_permutation_of_sample() {
        let sample = simple_sample(50, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sub = draw_subsample(&sample, 50, &mut rng).unwrap();
        // Indices are sorted, so drawing all rows returns them verbatim.
        assert_eq!(sub.rows(), sample.rows());
    }

    #[test]
    fn draw_single_row_is_uniform() {
        let n = 10;
        let sample = simple_sample(n, 3);
        let mut counts = vec![0usize; n];
        let draws = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..draws {
            let sub = draw_subsample(&sample, 1, &mut rng).unwrap();
            let row = &sub.rows()[0];
            let idx = sample.rows().iter().position(|r| r == row).unwrap();
            counts[idx] += 1;
        }
        // Each count is Binomial(draws, 1/n): mean 1000, sd ~ 30.
        let se = (draws as f64 * (1.0 / n as f64) * (1.0 - 1.0 / n as f64)).sqrt();
        for &c in &counts {
            assert!(
                (c as f64 - draws as f64 / n as f64).abs() <= 4.0 * se,
                "count {c} outside 4 SE"
            );
        }
    }

    #[test]
    fn independent_seeds_give_different_draws() {
        let sample = simple_sample(1000, 5);
        let mut rng_a = ChaCha8Rng::seed_from_u64(derive_seed(9, TAG_SUBSAMPLE, 0));
        let mut rng_b = ChaCha8Rng::seed_from_u64(derive_seed(9, TAG_SUBSAMPLE, 1));
        let a = draw_subsample(&sample, 100, &mut rng_a).unwrap();
        let b = draw_subsample(&sample, 100, &mut rng_b).unwrap();
        assert_ne!(a.rows(), b.rows());
    }

    #[test]
    fn constant_statistic_gives_zero_roots() {
        let sample = simple_sample(100, 6);
        let dist = root_distribution(&sample, |_| Ok(42.0), 20, 50, 7).unwrap();
        assert!(dist.roots().iter().all(|&r| r == 0.0));
        let ci = ci_functional(&dist, 42.0, 0.1).unwrap();
        assert_eq!(ci.lower, 42.0);
        assert_eq!(ci.upper, 42.0);
    }

    #[test]
    fn quantile_inversion_hand_case() {
        // Roots -1 x 50, +1 x 50; n = 100, alpha = 0.5 gives
        // [theta - 0.1, theta + 0.1].
        let mut roots = vec![-1.0; 50];
        roots.extend(vec![1.0; 50]);
        let dist = SubsamplingDistribution::new(roots, 25, 100, 0);
        assert_eq!(dist.quantile(0.75), 1.0);
        assert_eq!(dist.quantile(0.25), -1.0);
        let ci = ci_functional(&dist, 0.0, 0.5).unwrap();
        assert!((ci.lower + 0.1).abs() < 1e-15);
        assert!((ci.upper - 0.1).abs() < 1e-15);
    }

    #[test]
    fn quantile_is_nondecreasing_in_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let roots: Vec<f64> = (0..137).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let dist = SubsamplingDistribution::new(roots, 10, 200, 0);
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=100 {
            let q = dist.quantile(i as f64 / 100.0);
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn ci_is_shift_equivariant() {
        let sample = simple_sample(200, 10);
        let mean_y = |s: &Sample| -> Result<f64> {
            Ok(s.rows().iter().map(|r| r.y).sum::<f64>() / s.len() as f64)
        };
        let shift = 3.5;
        let dist_a = root_distribution(&sample, mean_y, 50, 200, 11).unwrap();
        let dist_b =
            root_distribution(&sample, |s| Ok(mean_y(s)? + shift), 50, 200, 11).unwrap();
        let theta = mean_y(&sample).unwrap();
        let ci_a = ci_functional(&dist_a, theta, 0.1).unwrap();
        let ci_b = ci_functional(&dist_b, theta + shift, 0.1).unwrap();
        assert!((ci_b.lower - ci_a.lower - shift).abs() < 1e-10);
        assert!((ci_b.upper - ci_a.upper - shift).abs() < 1e-10);
    }

    #[test]
    fn root_sd_matches_clt_oracle() {
        // Statistic = mean of y with y ~ N(0, 1): the root distribution's
        // SD approaches 1.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rows: Vec<Observation> = (0..2000)
            .map(|_| {
                // Box-Muller
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                Observation {
                    x: vec![0.0],
                    t: u8::from(rng.gen_bool(0.5)),
                    y: z,
                }
            })
            .collect();
        let sample = Sample::new(rows).unwrap();
        let mean_y = |s: &Sample| -> Result<f64> {
            Ok(s.rows().iter().map(|r| r.y).sum::<f64>() / s.len() as f64)
        };
        let dist = root_distribution(&sample, mean_y, 200, 500, 13).unwrap();
        let mean_root = dist.roots().iter().sum::<f64>() / dist.replicates() as f64;
        let sd = (dist
            .roots()
            .iter()
            .map(|r| (r - mean_root).powi(2))
            .sum::<f64>()
            / (dist.replicates() - 1) as f64)
            .sqrt();
        assert!((sd - 1.0).abs() < 0.15, "root sd {sd} not within 15% of 1");
    }

    #[test]
    fn band_is_monotone_and_clamped() {
        let sample = simple_sample(300, 14);
        let basis = SieveBasis::new(1, 1).unwrap();
        let model = fit_propensity(&sample, &basis, 0.01, DEFAULT_RIDGE).unwrap();
        let band = confidence_band(
            &sample,
            &model,
            Arm::Treated,
            0.05,
            60,
            200,
            15,
            RefitPolicy::PerSubsample,
        )
        .unwrap();
        assert!(band.d_hat() > 0.0);
        let mut prev_lower = 0.0;
        let mut prev_upper = 0.0;
        for &y in band.ecdf().support() {
            let lo = band.lower(y);
            let hi = band.upper(y);
            assert!((0.0..=1.0).contains(&lo));
            assert!((0.0..=1.0).contains(&hi));
            assert!(lo <= hi);
            assert!(lo >= prev_lower);
            assert!(hi >= prev_upper);
            prev_lower = lo;
            prev_upper = hi;
        }
        // Constant width d_hat/sqrt(n) wherever no clamping occurs.
        for &y in band.ecdf().support() {
            let f = band.ecdf().eval(y);
            if f - band.half_width() > 0.0 && f + band.half_width() < 1.0 {
                assert!(
                    (band.upper(y) - band.lower(y) - 2.0 * band.half_width()).abs() < 1e-15
                );
            }
        }
    }

    #[test]
    fn band_rejects_bad_m() {
        let sample = simple_sample(50, 16);
        let basis = SieveBasis::new(1, 0).unwrap();
        let model = fit_propensity(&sample, &basis, 0.01, DEFAULT_RIDGE).unwrap();
        assert!(confidence_band(
            &sample,
            &model,
            Arm::Treated,
            0.05,
            50,
            10,
            0,
            RefitPolicy::PerSubsample
        )
        .is_err());
    }

    #[test]
    fn dominance_detects_shifted_arm() {
        // Treated outcomes sit 5 below control: F1 > F0, far from H0.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Observation> = (0..400)
            .map(|_| {
                let t = u8::from(rng.gen_bool(0.5));
                let y = rng.gen_range(0.0..1.0) + if t == 1 { -5.0 } else { 0.0 };
                Observation { x: vec![0.0], t, y }
            })
            .collect();
        let sample = Sample::new(rows).unwrap();
        let basis = SieveBasis::new(1, 0).unwrap();
        let model = fit_propensity(&sample, &basis, 0.01, DEFAULT_RIDGE).unwrap();
        let report = dominance_test(
            &sample,
            &model,
            0.05,
            80,
            200,
            18,
            RefitPolicy::PerSubsample,
        )
        .unwrap();
        assert!(report.reject);
        assert!(report.sup_stat > 0.9);
        // Invariant: reject <=> sup - d_hat/sqrt(n) > 0
        assert_eq!(
            report.reject,
            report.sup_stat - report.d_hat / (report.n as f64).sqrt() > 0.0
        );
    }

    #[test]
    fn dominance_sup_matches_dense_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let n1 = rng.gen_range(3..30);
            let n0 = rng.gen_range(3..30);
            let v1: Vec<f64> = (0..n1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v0: Vec<f64> = (0..n0).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e1 = WeightedEcdf::from_points(
                Arm::Treated,
                v1.iter().map(|&y| (y, 1.0 / n1 as f64)).collect(),
                true,
            )
            .unwrap();
            let e0 = WeightedEcdf::from_points(
                Arm::Control,
                v0.iter().map(|&y| (y, 1.0 / n0 as f64)).collect(),
                true,
            )
            .unwrap();
            let grid = pooled_grid(&e1, &e0);
            let mut a = Vec::new();
            let mut b = Vec::new();
            eval_along_grid(&e1, &grid, &mut a);
            eval_along_grid(&e0, &grid, &mut b);
            let sup_grid_points = a
                .iter()
                .zip(&b)
                .map(|(x, y)| x - y)
                .fold(f64::NEG_INFINITY, f64::max);
            // Dense evaluation: all jump points, midpoints, and a fill.
            let mut dense = grid.clone();
            for w in grid.windows(2) {
                dense.push((w[0] + w[1]) / 2.0);
            }
            for k in 0..10_000 {
                dense.push(-1.2 + 2.4 * k as f64 / 9_999.0);
            }
            let sup_dense = dense
                .iter()
                .map(|&y| e1.eval(y) - e0.eval(y))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(sup_grid_points.max(0.0), sup_dense.max(0.0));
        }
    }

    #[test]
    fn determinism_same_seed_same_roots() {
        let sample = simple_sample(200, 20);
        let mean_y = |s: &Sample| -> Result<f64> {
            Ok(s.rows().iter().map(|r| r.y).sum::<f64>() / s.len() as f64)
        };
        let a = root_distribution(&sample, mean_y, 50, 100, 21).unwrap();
        let b = root_distribution(&sample, mean_y, 50, 100, 21).unwrap();
        assert_eq!(a.roots(), b.roots());
        assert_eq!(a.redraws(), b.redraws());
    }
}
