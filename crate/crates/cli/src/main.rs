//! Command-line surface over the estimation library: point estimation,
//! equality and dominance tests, confidence bands, and the Monte Carlo
//! simulation harness. Reports are JSON; plot data is CSV.
//!
//! Exit codes: 0 success, 1 user or configuration error, 2 internal
//! invariant violation. Test decisions are payload, never exit codes.

use clap::{Args, Parser, Subcommand};
use ipwdist_core::{
    confidence_band, dominance_test, estimate_cdf, fit_propensity, ingest_csv, naive_mean_diff,
    qte, run_monte_carlo, select_basis_cv, test_equality_normal, test_equality_subsampling,
    theta01, validate, Arm, CsvSchema, EcdfKind, Error, MonteCarloConfig, PropensityModel,
    RefitPolicy, Sample, Scenario, DEFAULT_RIDGE,
};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ipwdist",
    about = "Distributional treatment-effect estimation via propensity-score weighting",
    version
)]
struct Cli {
    /// Worker thread cap for parallel sections; output is identical for
    /// any value.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV file (UTF-8, header row, comma separated).
    #[arg(long)]
    input: PathBuf,

    /// Column holding the outcome.
    #[arg(long = "y-col", default_value = "y")]
    y_col: String,

    /// Column holding the 0/1 treatment indicator.
    #[arg(long = "t-col", default_value = "t")]
    t_col: String,

    /// Comma-separated covariate columns, in order.
    #[arg(long = "x-cols", value_delimiter = ',', required = true)]
    x_cols: Vec<String>,

    /// Candidate polynomial degrees for cross-validated basis selection.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0u32, 1, 2])]
    degrees: Vec<u32>,

    /// Propensity clipping constant in (0, 1/2).
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
}

#[derive(Args)]
struct SubsamplingArgs {
    /// Subsample size m (must be below n).
    #[arg(long)]
    m: Option<usize>,

    /// Number of subsample replicates M.
    #[arg(long = "M", default_value_t = 1000)]
    subsamples: usize,

    /// Master seed; drawn and printed when absent.
    #[arg(long)]
    seed: Option<u64>,

    /// Reuse the full-sample propensity fit inside subsamples instead of
    /// refitting (faster; roots ignore estimation noise in p-hat).
    #[arg(long)]
    no_refit: bool,
}

impl SubsamplingArgs {
    fn refit(&self) -> RefitPolicy {
        if self.no_refit {
            RefitPolicy::FullSampleModel
        } else {
            RefitPolicy::PerSubsample
        }
    }

    /// Default m = ceil(n^0.7) when unspecified.
    fn resolve_m(&self, n: usize) -> usize {
        self.m.unwrap_or_else(|| (n as f64).powf(0.7).ceil() as usize)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the weighted ECDFs and point functionals from a CSV file.
    Estimate {
        #[command(flatten)]
        input: InputArgs,

        /// Output directory for estimate.json and per-arm ECDF CSVs.
        #[arg(long)]
        out: PathBuf,

        /// Accepted for interface uniformity; estimation is deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },

    /// Run a hypothesis test and write its JSON report.
    Test {
        /// Which test: wilcoxon-normal, wilcoxon-subsample, or dominance.
        which: String,

        #[command(flatten)]
        input: InputArgs,

        #[command(flatten)]
        subsampling: SubsamplingArgs,

        /// Significance level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,

        /// Output directory for the report JSON.
        #[arg(long)]
        out: PathBuf,
    },

    /// Build a uniform confidence band for one arm's outcome CDF.
    Band {
        #[command(flatten)]
        input: InputArgs,

        #[command(flatten)]
        subsampling: SubsamplingArgs,

        /// Arm: treated or control.
        #[arg(long, default_value = "treated")]
        arm: String,

        /// One minus the band level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,

        /// Output directory for band.json and band.csv.
        #[arg(long)]
        out: PathBuf,
    },

    /// Run the Monte Carlo study for a benchmark scenario.
    Simulate {
        /// Scenario: no-effect or treatment-effect.
        #[arg(long)]
        scenario: String,

        /// Number of replications N.
        #[arg(long, default_value_t = 200)]
        replications: usize,

        #[arg(long, default_value_t = 1000)]
        n: usize,

        #[arg(long, default_value_t = 100)]
        m: usize,

        #[arg(long = "M", default_value_t = 400)]
        subsamples: usize,

        #[arg(long, default_value_t = 0.05)]
        alpha: f64,

        #[arg(long, value_delimiter = ',', default_values_t = vec![0u32, 1, 2])]
        degrees: Vec<u32>,

        #[arg(long, default_value_t = 0.01)]
        delta: f64,

        #[arg(long)]
        seed: Option<u64>,

        /// Output directory for monte_carlo.json and the table CSVs.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap help/version requests are success; parse errors are
            // user errors.
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: could not configure worker pool: {err}");
            return ExitCode::from(2);
        }
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Internal(message)) => {
            eprintln!("internal error: {message}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            s
        }
    }
}

fn load_sample(input: &InputArgs) -> Result<Sample, Error> {
    let schema = CsvSchema::new(
        input.y_col.clone(),
        input.t_col.clone(),
        input.x_cols.clone(),
    );
    ingest_csv(&input.input, &schema)
}

fn fit_from_args(sample: &Sample, input: &InputArgs) -> Result<(PropensityModel, u32), Error> {
    let selection = select_basis_cv(sample, &input.degrees, 5, input.delta)?;
    let degree = selection.basis.degree();
    let model = fit_propensity(sample, &selection.basis, input.delta, DEFAULT_RIDGE)?;
    Ok((model, degree))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    std::fs::write(dir.join(name), json)?;
    Ok(())
}

fn parse_arm(text: &str) -> Result<Arm, Error> {
    match text {
        "treated" => Ok(Arm::Treated),
        "control" => Ok(Arm::Control),
        other => Err(Error::InvalidParameter(format!(
            "unknown arm '{other}' (expected treated or control)"
        ))),
    }
}

#[derive(Serialize)]
struct PropensityDiagnostics {
    degree: u32,
    basis_size: usize,
    converged: bool,
    iterations: usize,
    min_fitted: f64,
    max_fitted: f64,
}

#[derive(Serialize)]
struct QteReport {
    p25: f64,
    p50: f64,
    p75: f64,
}

#[derive(Serialize)]
struct EstimateReport {
    n: usize,
    n_treated: usize,
    n_control: usize,
    theta01: f64,
    ate: f64,
    qte: QteReport,
    naive_diff: f64,
    propensity: PropensityDiagnostics,
    validation_flags: Vec<String>,
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Estimate { input, out, seed } => {
            let _ = seed; // estimation has no random stage
            let sample = load_sample(&input)?;
            let report = validate(&sample);
            let (model, degree) = fit_from_args(&sample, &input)?;
            let e1 = estimate_cdf(&sample, &model, Arm::Treated, EcdfKind::Hajek)?;
            let e0 = estimate_cdf(&sample, &model, Arm::Control, EcdfKind::Hajek)?;
            let fitted = model.fitted();
            let estimate = EstimateReport {
                n: sample.len(),
                n_treated: report.n_treated,
                n_control: report.n_control,
                theta01: theta01(&e0, &e1)?,
                ate: ipwdist_core::ate(&e1, &e0)?,
                qte: QteReport {
                    p25: qte(&e1, &e0, 0.25)?,
                    p50: qte(&e1, &e0, 0.50)?,
                    p75: qte(&e1, &e0, 0.75)?,
                },
                naive_diff: naive_mean_diff(&sample)?,
                propensity: PropensityDiagnostics {
                    degree,
                    basis_size: model.basis().len(),
                    converged: model.diagnostics().converged,
                    iterations: model.diagnostics().iterations,
                    min_fitted: fitted.iter().copied().fold(f64::INFINITY, f64::min),
                    max_fitted: fitted.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                },
                validation_flags: report.flags,
            };
            write_json(&out, "estimate.json", &estimate)?;
            let mut buf = Vec::new();
            e1.write_csv(&mut buf)?;
            std::fs::write(out.join("ecdf_treated.csv"), &buf)?;
            buf.clear();
            e0.write_csv(&mut buf)?;
            std::fs::write(out.join("ecdf_control.csv"), &buf)?;
            Ok(())
        }

        Command::Test {
            which,
            input,
            subsampling,
            alpha,
            out,
        } => {
            let sample = load_sample(&input)?;
            let (model, _) = fit_from_args(&sample, &input)?;
            match which.as_str() {
                "wilcoxon-normal" => {
                    let report = test_equality_normal(&sample, &model, alpha)?;
                    write_json(&out, "wilcoxon_normal.json", &report)
                }
                "wilcoxon-subsample" => {
                    let seed = resolve_seed(subsampling.seed);
                    let m = subsampling.resolve_m(sample.len());
                    let report = test_equality_subsampling(
                        &sample,
                        &model,
                        alpha,
                        m,
                        subsampling.subsamples,
                        seed,
                        subsampling.refit(),
                    )?;
                    write_json(&out, "wilcoxon_subsampling.json", &report)
                }
                "dominance" => {
                    let seed = resolve_seed(subsampling.seed);
                    let m = subsampling.resolve_m(sample.len());
                    let report = dominance_test(
                        &sample,
                        &model,
                        alpha,
                        m,
                        subsampling.subsamples,
                        seed,
                        subsampling.refit(),
                    )?;
                    write_json(&out, "dominance.json", &report)
                }
                other => Err(Error::InvalidParameter(format!(
                    "unknown test '{other}' (expected wilcoxon-normal, wilcoxon-subsample, or dominance)"
                ))),
            }
        }

        Command::Band {
            input,
            subsampling,
            arm,
            alpha,
            out,
        } => {
            let sample = load_sample(&input)?;
            let arm = parse_arm(&arm)?;
            let (model, _) = fit_from_args(&sample, &input)?;
            let seed = resolve_seed(subsampling.seed);
            let m = subsampling.resolve_m(sample.len());
            let band = confidence_band(
                &sample,
                &model,
                arm,
                alpha,
                m,
                subsampling.subsamples,
                seed,
                subsampling.refit(),
            )?;
            write_json(&out, "band.json", &band.report())?;
            let mut buf = Vec::new();
            band.write_csv(&mut buf)?;
            std::fs::write(out.join("band.csv"), &buf)?;
            Ok(())
        }

        Command::Simulate {
            scenario,
            replications,
            n,
            m,
            subsamples,
            alpha,
            degrees,
            delta,
            seed,
            out,
        } => {
            let config = MonteCarloConfig {
                scenario: Scenario::parse(&scenario)?,
                replications,
                n,
                m,
                subsamples,
                alpha,
                degrees,
                folds: 5,
                delta,
                seed: resolve_seed(seed),
                refit: RefitPolicy::PerSubsample,
            };
            let report = run_monte_carlo(&config)?;
            write_json(&out, "monte_carlo.json", &report)?;
            let tables: [(&str, fn(&ipwdist_core::MonteCarloReport, &mut Vec<u8>) -> Result<(), Error>); 4] = [
                ("estimators.csv", |r, buf| r.write_estimator_csv(buf)),
                ("intervals.csv", |r, buf| r.write_interval_csv(buf)),
                ("bands.csv", |r, buf| r.write_band_csv(buf)),
                ("dominance.csv", |r, buf| r.write_dominance_csv(buf)),
            ];
            for (name, writer) in tables {
                let mut buf = Vec::new();
                writer(&report, &mut buf)?;
                std::fs::write(out.join(name), &buf)?;
            }
            Ok(())
        }
    }
}
