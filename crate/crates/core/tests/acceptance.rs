//! Acceptance suite. Each criterion is one test that prints a single
//! PASS/FAIL line (visible with --nocapture) and asserts its thresholds.
//! Desk scale means N = 200 replications, n = 1000, m = 100, M = 400
//! subsamples at alpha = 0.05; the two desk runs are shared across
//! criteria through OnceLocks.

use ipwdist_core::data::Observation;
use ipwdist_core::propensity::DEFAULT_RIDGE;
use ipwdist_core::simulation::generate_with_rng;
use ipwdist_core::wilcoxon::cross_tie_mass;
use ipwdist_core::{
    dominance_test, estimate_cdf, fit_propensity, sup_distance, theta01, Arm, EcdfKind,
    ExactOracle, MonteCarloConfig, MonteCarloReport, RefitPolicy, Sample, Scenario, SieveBasis,
    WeightedEcdf,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

const SEED_NO_EFFECT: u64 = 20_240_801;
const SEED_TREATMENT: u64 = 20_240_802;
const SEED_BAND_5000: u64 = 20_240_803;
const SEED_ANTI_DOMINANCE: u64 = 20_240_804;

fn desk_no_effect() -> &'static MonteCarloReport {
    static REPORT: OnceLock<MonteCarloReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let config = MonteCarloConfig::desk_scale(Scenario::NoEffect, SEED_NO_EFFECT);
        ipwdist_core::run_monte_carlo(&config).expect("desk-scale no-effect run")
    })
}

fn desk_treatment_effect() -> &'static MonteCarloReport {
    static REPORT: OnceLock<MonteCarloReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let config = MonteCarloConfig::desk_scale(Scenario::TreatmentEffect, SEED_TREATMENT);
        ipwdist_core::run_monte_carlo(&config).expect("desk-scale treatment-effect run")
    })
}

fn band_run_n5000() -> &'static MonteCarloReport {
    static REPORT: OnceLock<MonteCarloReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let mut config = MonteCarloConfig::desk_scale(Scenario::NoEffect, SEED_BAND_5000);
        config.replications = 100;
        config.n = 5000;
        config.m = 500;
        ipwdist_core::run_monte_carlo(&config).expect("n=5000 band run")
    })
}

fn estimator<'r>(report: &'r MonteCarloReport, name: &str) -> &'r ipwdist_core::simulation::EstimatorSummary {
    report
        .estimators
        .iter()
        .find(|e| e.name == name)
        .unwrap_or_else(|| panic!("estimator {name} missing"))
}

fn interval<'r>(report: &'r MonteCarloReport, method: &str) -> &'r ipwdist_core::simulation::IntervalSummary {
    report
        .intervals
        .iter()
        .find(|i| i.method == method)
        .unwrap_or_else(|| panic!("interval {method} missing"))
}

fn band<'r>(report: &'r MonteCarloReport, arm: Arm) -> &'r ipwdist_core::simulation::BandSummary {
    report
        .bands
        .iter()
        .find(|b| b.arm == arm)
        .unwrap_or_else(|| panic!("band {arm:?} missing"))
}

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_theta01_location_and_spread() {
    let report = desk_no_effect();
    let th = estimator(report, "theta01");
    let pass = (0.495..=0.505).contains(&th.average) && (0.010..=0.020).contains(&th.sd);
    verdict(
        "1",
        pass,
        &format!(
            "no-effect n=1000: mean theta01 {:.4} (target [0.495, 0.505]), sd {:.4} (target [0.010, 0.020])",
            th.average, th.sd
        ),
    );
}

#[test]
fn criterion_2_ate_naive_and_quantiles_no_effect() {
    let report = desk_no_effect();
    let ate = estimator(report, "ate");
    let naive = estimator(report, "naive_diff");
    let mut pass = (-0.1..=0.2).contains(&ate.average) && (4.8..=5.2).contains(&naive.average);
    let mut detail = format!(
        "mean ate {:.3} (target [-0.1, 0.2]), mean naive {:.3} (target [4.8, 5.2])",
        ate.average, naive.average
    );
    for (name, truth) in [
        ("q_treated_25", 70.0),
        ("q_treated_50", 75.0),
        ("q_treated_75", 80.0),
        ("q_control_25", 70.0),
        ("q_control_50", 75.0),
        ("q_control_75", 80.0),
    ] {
        let q = estimator(report, name);
        if (q.average - truth).abs() > 0.5 {
            pass = false;
            detail.push_str(&format!("; {name} mean {:.2} off {truth} by > 0.5", q.average));
        }
    }
    verdict("2", pass, &detail);
}

#[test]
fn criterion_3_treatment_effect_estimates() {
    let report = desk_treatment_effect();
    let th = estimator(report, "theta01");
    let ate = estimator(report, "ate");
    let naive = estimator(report, "naive_diff");
    let pass = (0.66..=0.68).contains(&th.average)
        && (4.8..=5.2).contains(&ate.average)
        && (-0.2..=0.2).contains(&naive.average);
    verdict(
        "3",
        pass,
        &format!(
            "treatment-effect n=1000: mean theta01 {:.4} (target [0.66, 0.68]), mean ate {:.3} (target [4.8, 5.2]), mean naive {:.3} (target [-0.2, 0.2])",
            th.average, ate.average, naive.average
        ),
    );
}

#[test]
fn criterion_4_wilcoxon_ci_coverage_and_length() {
    let report = desk_no_effect();
    let normal = interval(report, "wilcoxon_normal");
    let sub = interval(report, "wilcoxon_subsampling");
    let normal_len_ok = (normal.average_length - 0.063).abs() <= 0.25 * 0.063;
    let sub_len_ok = (sub.average_length - 0.062).abs() <= 0.25 * 0.062;
    let pass = (0.91..=0.99).contains(&normal.coverage)
        && (0.90..=0.98).contains(&sub.coverage)
        && normal_len_ok
        && sub_len_ok;
    verdict(
        "4",
        pass,
        &format!(
            "normal coverage {:.3} (target [0.91, 0.99]) length {:.4} (target 0.063 +/- 25%); subsampling coverage {:.3} (target [0.90, 0.98]) length {:.4} (target 0.062 +/- 25%)",
            normal.coverage, normal.average_length, sub.coverage, sub.average_length
        ),
    );
}

#[test]
fn criterion_5_confidence_band_coverage_and_width() {
    let report = desk_no_effect();
    let mut pass = true;
    let mut detail = String::from("n=1000:");
    for arm in [Arm::Treated, Arm::Control] {
        let b = band(report, arm);
        let cover_ok = (0.94..=1.00).contains(&b.coverage);
        let width_ok = (b.average_width - 0.137).abs() <= 0.25 * 0.137;
        pass &= cover_ok && width_ok;
        detail.push_str(&format!(
            " {:?} coverage {:.3} width {:.4};",
            arm, b.coverage, b.average_width
        ));
    }
    let big = band_run_n5000();
    detail.push_str(" n=5000:");
    for arm in [Arm::Treated, Arm::Control] {
        let b = band(big, arm);
        let cover_ok = (0.94..=1.00).contains(&b.coverage);
        let width_ok = (b.average_width - 0.060).abs() <= 0.25 * 0.060;
        pass &= cover_ok && width_ok;
        detail.push_str(&format!(
            " {:?} coverage {:.3} width {:.4};",
            arm, b.coverage, b.average_width
        ));
    }
    detail.push_str(" (coverage target [0.94, 1.00]; widths 0.137/0.060 +/- 25%)");
    verdict("5", pass, &detail);
}

/// No-effect samples with treated outcomes shifted down by 10, so the
/// treated CDF sits strictly above control: the dominance null is false.
fn anti_dominance_sample(n: usize, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = generate_with_rng(Scenario::NoEffect, n, &mut rng).unwrap();
    let rows = base
        .rows()
        .iter()
        .map(|r| Observation {
            x: r.x.clone(),
            t: r.t,
            y: if r.t == 1 { r.y - 10.0 } else { r.y },
        })
        .collect();
    Sample::new(rows).unwrap()
}

#[test]
fn criterion_6_dominance_rejection_rates() {
    let boundary = desk_no_effect().dominance_rejection_rate;
    let interior = desk_treatment_effect().dominance_rejection_rate;

    let seeds = 200;
    let rejections: usize = (0..seeds)
        .filter(|&s| {
            let sample = anti_dominance_sample(2000, SEED_ANTI_DOMINANCE + s as u64);
            let basis = SieveBasis::new(1, 1).unwrap();
            let model = fit_propensity(&sample, &basis, 0.01, DEFAULT_RIDGE).unwrap();
            dominance_test(
                &sample,
                &model,
                0.05,
                200,
                400,
                SEED_ANTI_DOMINANCE + 1000 + s as u64,
                RefitPolicy::PerSubsample,
            )
            .unwrap()
            .reject
        })
        .count();
    let power = rejections as f64 / seeds as f64;

    let pass = (0.02..=0.10).contains(&boundary) && interior <= 0.02 && power >= 0.95;
    verdict(
        "6",
        pass,
        &format!(
            "no-effect rejection {boundary:.3} (target [0.02, 0.10]); treatment-effect rejection {interior:.3} (target <= 0.02); anti-dominance power {power:.3} (target >= 0.95)"
        ),
    );
}

fn random_weighted_points(rng: &mut ChaCha8Rng, n: usize, lattice: bool) -> Vec<(f64, f64)> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter()
        .map(|w| {
            let y = if lattice {
                f64::from(rng.gen_range(-20i32..20)) / 4.0
            } else {
                rng.gen_range(-5.0..5.0)
            };
            (y, w / total)
        })
        .collect()
}

#[test]
fn criterion_7_oracle_equivalences() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let mut pass = true;
    let mut detail = String::new();

    // theta01 fast path vs O(n^2) double sum, n <= 200, with cross-ties.
    let mut max_gap: f64 = 0.0;
    for _ in 0..60 {
        let n1 = rng.gen_range(2..=200);
        let n0 = rng.gen_range(2..=200);
        let pts1 = random_weighted_points(&mut rng, n1, true);
        let pts0 = random_weighted_points(&mut rng, n0, true);
        let e1 = WeightedEcdf::from_points(Arm::Treated, pts1.clone(), true).unwrap();
        let e0 = WeightedEcdf::from_points(Arm::Control, pts0.clone(), true).unwrap();
        let fast = theta01(&e0, &e1).unwrap();
        let mut slow = 0.0;
        for &(yi, wi) in &pts1 {
            for &(yk, wk) in &pts0 {
                if yk <= yi {
                    slow += wi * wk;
                }
            }
        }
        max_gap = max_gap.max((fast - slow).abs());
    }
    if max_gap > 1e-12 {
        pass = false;
    }
    detail.push_str(&format!("theta01 fast-vs-double-sum max |gap| {max_gap:.2e} (<= 1e-12)"));

    // Hajek = HT / HT(+inf) pointwise.
    let mut hajek_gap: f64 = 0.0;
    for seed in 0..5u64 {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let sample = generate_with_rng(Scenario::NoEffect, 400, &mut gen_rng).unwrap();
        let basis = SieveBasis::new(1, 1).unwrap();
        let model = fit_propensity(&sample, &basis, 0.01, DEFAULT_RIDGE).unwrap();
        for arm in [Arm::Treated, Arm::Control] {
            let hajek = estimate_cdf(&sample, &model, arm, EcdfKind::Hajek).unwrap();
            let ht = estimate_cdf(&sample, &model, arm, EcdfKind::HorvitzThompson).unwrap();
            for &y in hajek.support() {
                hajek_gap = hajek_gap.max((hajek.eval(y) - ht.eval(y) / ht.total_mass()).abs());
            }
        }
    }
    if hajek_gap > 1e-12 {
        pass = false;
    }
    detail.push_str(&format!("; Hajek-vs-HT/mass max |gap| {hajek_gap:.2e} (<= 1e-12)"));

    // sup_distance equals a dense-grid sup exactly on 100 random pairs.
    let mut sup_exact = true;
    for _ in 0..100 {
        let n1 = rng.gen_range(2..60);
        let n0 = rng.gen_range(2..60);
        let e1 = WeightedEcdf::from_points(
            Arm::Treated,
            random_weighted_points(&mut rng, n1, false),
            true,
        )
        .unwrap();
        let e0 = WeightedEcdf::from_points(
            Arm::Control,
            random_weighted_points(&mut rng, n0, false),
            true,
        )
        .unwrap();
        let exact = sup_distance(&e1, &e0);
        // Dense grid: every jump point, midpoints, and a uniform fill of
        // 10^4 points.
        let mut grid: Vec<f64> = e1
            .support()
            .iter()
            .chain(e0.support())
            .copied()
            .collect();
        grid.sort_by(f64::total_cmp);
        let mids: Vec<f64> = grid.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        grid.extend(mids);
        for k in 0..10_000 {
            grid.push(-5.5 + 11.0 * k as f64 / 9_999.0);
        }
        let dense = grid
            .iter()
            .map(|&y| (e1.eval(y) - e0.eval(y)).abs())
            .fold(0.0, f64::max);
        if dense != exact {
            sup_exact = false;
        }
    }
    if !sup_exact {
        pass = false;
    }
    detail.push_str(&format!("; sup_distance dense-grid exact: {sup_exact}"));

    // theta01 + theta10 = 1 without cross-ties (and with the tie mass
    // correction in general).
    let mut sum_gap: f64 = 0.0;
    for _ in 0..50 {
        let n1 = rng.gen_range(2..100);
        let n0 = rng.gen_range(2..100);
        let e1 = WeightedEcdf::from_points(
            Arm::Treated,
            random_weighted_points(&mut rng, n1, false),
            true,
        )
        .unwrap();
        let e0 = WeightedEcdf::from_points(
            Arm::Control,
            random_weighted_points(&mut rng, n0, false),
            true,
        )
        .unwrap();
        let ties = cross_tie_mass(&e0, &e1);
        let total = theta01(&e0, &e1).unwrap() + theta01(&e1, &e0).unwrap() - ties;
        sum_gap = sum_gap.max((total - 1.0).abs());
    }
    if sum_gap > 1e-12 {
        pass = false;
    }
    detail.push_str(&format!("; theta01+theta10 max |gap to 1| {sum_gap:.2e} (<= 1e-12)"));

    verdict("7", pass, &detail);
}

#[test]
fn criterion_8_numerical_checks() {
    let mut pass = true;
    let mut detail = String::new();

    // Pseudo-likelihood gradient vs central finite differences.
    let mut gen_rng = ChaCha8Rng::seed_from_u64(8001);
    let sample = generate_with_rng(Scenario::NoEffect, 400, &mut gen_rng).unwrap();
    let basis = SieveBasis::new(1, 2).unwrap();
    let model = fit_propensity(&sample, &basis, 0.01, DEFAULT_RIDGE).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8002);
    let step = 1e-6;
    let mut max_rel: f64 = 0.0;
    for _ in 0..10 {
        let pi: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = model.penalized_loglik_and_gradient(&sample, &pi).unwrap();
        for j in 0..basis.len() {
            let mut hi = pi.clone();
            let mut lo = pi.clone();
            hi[j] += step;
            lo[j] -= step;
            let (ll_hi, _) = model.penalized_loglik_and_gradient(&sample, &hi).unwrap();
            let (ll_lo, _) = model.penalized_loglik_and_gradient(&sample, &lo).unwrap();
            let fd = (ll_hi - ll_lo) / (2.0 * step);
            max_rel = max_rel.max((grad[j] - fd).abs() / grad[j].abs().max(1.0));
        }
    }
    if max_rel > 1e-5 {
        pass = false;
    }
    detail.push_str(&format!("gradient max rel err {max_rel:.2e} (<= 1e-5)"));

    // Newton ascent monotonicity on the accepted path.
    let path = &model.diagnostics().loglik_path;
    let monotone = path.windows(2).all(|w| w[1] >= w[0]);
    if !monotone {
        pass = false;
    }
    detail.push_str(&format!("; Newton ascent monotone: {monotone}"));

    // Exact-oracle densities integrate to 1 (numeric derivative of the
    // CDF, trapezoid rule).
    let mut worst_density_gap: f64 = 0.0;
    for scenario in [Scenario::NoEffect, Scenario::TreatmentEffect] {
        let oracle = ExactOracle::new(scenario);
        for arm in [Arm::Treated, Arm::Control] {
            let steps = 200_000usize;
            let (a, b) = (50.0, 100.0);
            let h = (b - a) / steps as f64;
            let eps = 1e-5;
            let mut acc = 0.0;
            for k in 0..=steps {
                let y = a + k as f64 * h;
                let d = (oracle.cdf(arm, y + eps) - oracle.cdf(arm, y - eps)) / (2.0 * eps);
                let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
                acc += w * d * h;
            }
            worst_density_gap = worst_density_gap.max((acc - 1.0).abs());
        }
    }
    if worst_density_gap > 1e-6 {
        pass = false;
    }
    detail.push_str(&format!(
        "; density integral max |gap to 1| {worst_density_gap:.2e} (<= 1e-6)"
    ));

    // Quadrature reproduction of theta01 = 0.672 in the treatment-effect
    // scenario, to 3 decimals.
    let oracle = ExactOracle::new(Scenario::TreatmentEffect);
    let steps = 1_000_000usize;
    let (a, b) = (55.0, 100.0);
    let h = (b - a) / steps as f64;
    let mut quad = 0.0;
    for k in 0..steps {
        let mid = a + (k as f64 + 0.5) * h;
        quad += oracle.cdf(Arm::Control, mid) * oracle.density(Arm::Treated, mid) * h;
    }
    let quad_ok = (quad - 0.672).abs() < 5e-4 && (quad - oracle.truths().theta01).abs() < 1e-6;
    if !quad_ok {
        pass = false;
    }
    detail.push_str(&format!("; theta01 quadrature {quad:.6} vs 0.672"));

    verdict("8", pass, &detail);
}

#[test]
fn criterion_9_determinism_across_worker_counts() {
    // Two full desk-scale runs with the same master seed, in worker pools
    // of different sizes, must serialize byte-identically (and match the
    // shared run on the default pool).
    let reference = serde_json::to_string(desk_no_effect()).unwrap();
    let config = MonteCarloConfig::desk_scale(Scenario::NoEffect, SEED_NO_EFFECT);

    let run_with_jobs = |jobs: usize| -> String {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .unwrap();
        let report = pool.install(|| ipwdist_core::run_monte_carlo(&config).unwrap());
        serde_json::to_string(&report).unwrap()
    };

    let two = run_with_jobs(2);
    let five = run_with_jobs(5);
    let pass = two == reference && five == reference;
    verdict(
        "9",
        pass,
        &format!(
            "desk-scale reports byte-identical across --jobs (default vs 2 vs 5): {} ({} bytes)",
            pass,
            reference.len()
        ),
    );
}
