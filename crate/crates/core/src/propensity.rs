//! Propensity-score estimation: polynomial-sieve logistic model fit by
//! penalized pseudo-likelihood (Newton/IRLS with step halving), data-driven
//! basis size via cross-validation, and overlap clipping.

use crate::data::{Arm, Observation, Sample};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default clipping constant for fitted probabilities.
pub const DEFAULT_DELTA: f64 = 0.01;
/// Default L2 penalty; regularizes collinear polynomial bases.
pub const DEFAULT_RIDGE: f64 = 1e-8;

const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON_ITER: usize = 100;
const MAX_HALVINGS: usize = 60;

/// Fixed seed for the fold-assignment shuffle in cross-validation, so that
/// basis selection is a deterministic function of the data alone.
const CV_FOLD_SEED: u64 = 0x5EED_F01D_0C01_15E5;

/// Polynomial basis of all monomials with total degree <= `degree` in
/// `dim` variables, in graded lexicographic order. The first function is
/// the constant 1, so K = C(dim + degree, degree).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SieveBasis {
    dim: usize,
    degree: u32,
    exponents: Vec<Vec<u32>>,
}

impl SieveBasis {
    pub fn new(dim: usize, degree: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "basis dimension must be >= 1".into(),
            ));
        }
        let mut exponents = Vec::new();
        for total in 0..=degree {
            push_compositions(total, dim, &mut Vec::new(), &mut exponents);
        }
        Ok(SieveBasis {
            dim,
            degree,
            exponents,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Number of basis functions K.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Evaluate all K monomials at `x`. The first entry is always 1.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.len()];
        self.evaluate_into(x, &mut out);
        Ok(out)
    }

    fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        for (slot, alpha) in out.iter_mut().zip(&self.exponents) {
            let mut v = 1.0;
            for (xj, &a) in x.iter().zip(alpha) {
                for _ in 0..a {
                    v *= xj;
                }
            }
            *slot = v;
        }
    }
}

/// All exponent vectors with the given total degree, first coordinate
/// descending (graded lexicographic within a degree block).
fn push_compositions(total: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if slots == 1 {
        let mut alpha = prefix.clone();
        alpha.push(total);
        out.push(alpha);
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        push_compositions(total - first, slots - 1, prefix, out);
        prefix.pop();
    }
}

/// Per-column centering/scaling constants used to condition the design
/// matrix. The intercept column is left untouched (mean 0, scale 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: f64,
    pub scale: f64,
}

/// Convergence diagnostics of the Newton fit.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub final_grad_norm: f64,
    /// Penalized log-likelihood after each accepted step, starting at the
    /// initial point. Nondecreasing by construction.
    pub loglik_path: Vec<f64>,
}

/// A fitted sieve-logit propensity model. Coefficients are reported in the
/// standardized basis; predictions apply the stored scaling so they are
/// invariant to it. Immutable after fit.
#[derive(Debug, Clone)]
pub struct PropensityModel {
    basis: SieveBasis,
    scaling: Vec<ColumnScaling>,
    coefficients: Vec<f64>,
    delta: f64,
    ridge: f64,
    fitted: Vec<f64>,
    diagnostics: FitDiagnostics,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    dim: usize,
    degree: u32,
    k: usize,
    scaling: Vec<ColumnScaling>,
    coefficients: Vec<f64>,
    delta: f64,
    ridge: f64,
}

impl PropensityModel {
    pub fn basis(&self) -> &SieveBasis {
        &self.basis
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Coefficient vector in the standardized basis.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Clipped fitted probability of treatment for each row of the fitting
    /// sample, in row order. Empty for models loaded from JSON.
    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    /// Probability of membership in `arm` at covariates `x`, clipped to
    /// [delta, 1 - delta]. Control is exactly one minus Treated.
    pub fn predict(&self, x: &[f64], arm: Arm) -> Result<f64> {
        let p = self.predict_treated(x)?;
        Ok(match arm {
            Arm::Treated => p,
            Arm::Control => 1.0 - p,
        })
    }

    fn predict_treated(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.dim(),
                got: x.len(),
            });
        }
        let mut h = vec![0.0; self.basis.len()];
        self.basis.evaluate_into(x, &mut h);
        let mut eta = 0.0;
        for k in 0..h.len() {
            let z = (h[k] - self.scaling[k].mean) / self.scaling[k].scale;
            eta += self.coefficients[k] * z;
        }
        Ok(clip(sigmoid(eta), self.delta))
    }

    /// Penalized pseudo-log-likelihood and its gradient at an arbitrary
    /// coefficient vector (standardized basis), for the sample the model
    /// structure was built for. Exposed for finite-difference checks.
    pub fn penalized_loglik_and_gradient(
        &self,
        sample: &Sample,
        coefficients: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let design = Design::build(sample.rows(), &self.basis)?;
        Ok(design.loglik_and_grad(coefficients, self.ridge))
    }

    /// Serialize basis spec, standardization constants, coefficients, and
    /// delta as a JSON document.
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelJson {
            dim: self.basis.dim(),
            degree: self.basis.degree(),
            k: self.basis.len(),
            scaling: self.scaling.clone(),
            coefficients: self.coefficients.clone(),
            delta: self.delta,
            ridge: self.ridge,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Load a model exported by [`PropensityModel::to_json`]. The loaded
    /// model predicts but carries no per-row fitted values.
    pub fn from_json(json: &str) -> Result<Self> {
        let doc: ModelJson = serde_json::from_str(json)?;
        let basis = SieveBasis::new(doc.dim, doc.degree)?;
        if basis.len() != doc.k || doc.coefficients.len() != doc.k || doc.scaling.len() != doc.k {
            return Err(Error::Internal(
                "model JSON is inconsistent with its basis spec".into(),
            ));
        }
        Ok(PropensityModel {
            basis,
            scaling: doc.scaling,
            coefficients: doc.coefficients,
            delta: doc.delta,
            ridge: doc.ridge,
            fitted: Vec::new(),
            diagnostics: FitDiagnostics {
                converged: true,
                iterations: 0,
                final_grad_norm: f64::NAN,
                loglik_path: Vec::new(),
            },
        })
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn clip(p: f64, delta: f64) -> f64 {
    p.clamp(delta, 1.0 - delta)
}

/// log(sigmoid(z)), computed without overflow for large |z|.
fn log_sigmoid(z: f64) -> f64 {
    if z > 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Standardized design matrix plus responses; owns the sufficient state
/// for likelihood, gradient, and Hessian evaluation.
struct Design {
    // row-major n x k
    h: Vec<f64>,
    t: Vec<f64>,
    n: usize,
    k: usize,
    scaling: Vec<ColumnScaling>,
}

impl Design {
    fn build(rows: &[Observation], basis: &SieveBasis) -> Result<Self> {
        let n = rows.len();
        let k = basis.len();
        let mut h = vec![0.0; n * k];
        for (i, row) in rows.iter().enumerate() {
            if row.x.len() != basis.dim() {
                return Err(Error::DimensionMismatch {
                    expected: basis.dim(),
                    got: row.x.len(),
                });
            }
            basis.evaluate_into(&row.x, &mut h[i * k..(i + 1) * k]);
        }
        // Center and scale all columns except the intercept.
        let mut scaling = vec![
            ColumnScaling {
                mean: 0.0,
                scale: 1.0
            };
            k
        ];
        for col in 1..k {
            let mean = (0..n).map(|i| h[i * k + col]).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| (h[i * k + col] - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            let sd = var.sqrt();
            let scale = if sd > 1e-12 { sd } else { 1.0 };
            for i in 0..n {
                h[i * k + col] = (h[i * k + col] - mean) / scale;
            }
            scaling[col] = ColumnScaling { mean, scale };
        }
        let t = rows.iter().map(|r| f64::from(r.t)).collect();
        Ok(Design {
            h,
            t,
            n,
            k,
            scaling,
        })
    }

    fn linear_predictor(&self, pi: &[f64], eta: &mut [f64]) {
        for i in 0..self.n {
            let row = &self.h[i * self.k..(i + 1) * self.k];
            eta[i] = row.iter().zip(pi).map(|(hk, ck)| hk * ck).sum();
        }
    }

    fn loglik_and_grad(&self, pi: &[f64], ridge: f64) -> (f64, Vec<f64>) {
        let mut eta = vec![0.0; self.n];
        self.linear_predictor(pi, &mut eta);
        let mut ll = 0.0;
        let mut grad = vec![0.0; self.k];
        for i in 0..self.n {
            ll += self.t[i] * log_sigmoid(eta[i]) + (1.0 - self.t[i]) * log_sigmoid(-eta[i]);
            let resid = self.t[i] - sigmoid(eta[i]);
            let row = &self.h[i * self.k..(i + 1) * self.k];
            for (gk, hk) in grad.iter_mut().zip(row) {
                *gk += hk * resid;
            }
        }
        for (gk, ck) in grad.iter_mut().zip(pi) {
            *gk -= ridge * ck;
        }
        let penalty: f64 = pi.iter().map(|c| c * c).sum::<f64>() * ridge / 2.0;
        (ll - penalty, grad)
    }
}

/// Internal fit result on an index subset; shared by `fit_propensity` and
/// cross-validation.
struct CoreFit {
    scaling: Vec<ColumnScaling>,
    coefficients: Vec<f64>,
    diagnostics: FitDiagnostics,
}

fn newton_fit(design: &Design, ridge: f64) -> Result<CoreFit> {
    let k = design.k;
    let mut pi = vec![0.0; k];
    let mut path = Vec::new();
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;

    for _ in 0..MAX_NEWTON_ITER {
        let (ll, grad) = design.loglik_and_grad(&pi, ridge);
        if !ll.is_finite() {
            return Err(Error::NonFiniteLikelihood);
        }
        if path.is_empty() {
            path.push(ll);
        }
        grad_norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if grad_norm <= GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;

        // Weighted information matrix plus ridge.
        let mut info = DMatrix::<f64>::zeros(k, k);
        let mut eta = vec![0.0; design.n];
        design.linear_predictor(&pi, &mut eta);
        for i in 0..design.n {
            let mu = sigmoid(eta[i]);
            let w = mu * (1.0 - mu);
            let row = &design.h[i * k..(i + 1) * k];
            for a in 0..k {
                let wa = w * row[a];
                for b in a..k {
                    info[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..k {
            info[(a, a)] += ridge;
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }
        let chol = match info.cholesky() {
            Some(c) => c,
            None => return Err(Error::SingularSystem),
        };
        let direction = chol.solve(&DVector::from_column_slice(&grad));

        // Step halving keeps the penalized log-likelihood nondecreasing.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = pi
                .iter()
                .zip(direction.iter())
                .map(|(c, d)| c + step * d)
                .collect();
            let (ll_new, _) = design.loglik_and_grad(&candidate, ridge);
            if ll_new.is_finite() && ll_new >= ll {
                pi = candidate;
                path.push(ll_new);
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            // Numerical floor: no ascent direction improves the objective.
            converged = grad_norm <= 1e-4;
            break;
        }
    }

    Ok(CoreFit {
        scaling: design.scaling.clone(),
        coefficients: pi,
        diagnostics: FitDiagnostics {
            converged,
            iterations,
            final_grad_norm: grad_norm,
            loglik_path: path,
        },
    })
}

/// Fit the sieve-logit propensity model by penalized pseudo-likelihood.
///
/// The optimizer is Newton-Raphson with step halving on the standardized
/// design; convergence is declared when the gradient max-norm falls below
/// 1e-8 or after 100 iterations. Fitted probabilities are clipped to
/// [delta, 1 - delta]. Deterministic given (sample, basis, delta, ridge).
pub fn fit_propensity(
    sample: &Sample,
    basis: &SieveBasis,
    delta: f64,
    ridge: f64,
) -> Result<PropensityModel> {
    if !(0.0 < delta && delta < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0, 1/2), got {delta}"
        )));
    }
    if ridge < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ridge must be >= 0, got {ridge}"
        )));
    }
    let design = Design::build(sample.rows(), basis)?;
    let core = newton_fit(&design, ridge)?;
    let mut model = PropensityModel {
        basis: basis.clone(),
        scaling: core.scaling,
        coefficients: core.coefficients,
        delta,
        ridge,
        fitted: Vec::new(),
        diagnostics: core.diagnostics,
    };
    let fitted: Vec<f64> = sample
        .rows()
        .iter()
        .map(|row| model.predict_treated(&row.x))
        .collect::<Result<_>>()?;
    model.fitted = fitted;
    Ok(model)
}

/// Outcome of cross-validated degree selection.
#[derive(Debug, Clone)]
pub struct CvSelection {
    pub basis: SieveBasis,
    /// (degree, out-of-fold squared error) for every evaluated candidate.
    pub scores: Vec<(u32, f64)>,
    /// Candidates skipped because K >= n.
    pub skipped: Vec<u32>,
}

/// Choose the basis degree minimizing out-of-fold squared error
/// sum_i (t_i - p_hat^(-fold(i))(x_i))^2, with folds assigned by a
/// deterministic shuffle and ties broken toward the smaller degree.
/// Candidates with K >= n are skipped.
pub fn select_basis_cv(
    sample: &Sample,
    degrees: &[u32],
    folds: usize,
    delta: f64,
) -> Result<CvSelection> {
    if degrees.is_empty() {
        return Err(Error::InvalidParameter("degrees must be nonempty".into()));
    }
    let n = sample.len();
    if folds < 2 || folds > n {
        return Err(Error::InvalidParameter(format!(
            "folds must be in [2, n], got {folds} with n = {n}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(CV_FOLD_SEED);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    let mut candidates: Vec<u32> = degrees.to_vec();
    candidates.sort_unstable();
    candidates.dedup();

    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    for &degree in &candidates {
        let basis = SieveBasis::new(sample.dim(), degree)?;
        if basis.len() >= n {
            skipped.push(degree);
            continue;
        }
        let mut score = 0.0;
        for fold in 0..folds {
            let train: Vec<Observation> = sample
                .rows()
                .iter()
                .enumerate()
                .filter(|(i, _)| fold_of[*i] != fold)
                .map(|(_, r)| r.clone())
                .collect();
            if train.is_empty() {
                continue;
            }
            let design = Design::build(&train, &basis)?;
            let core = newton_fit(&design, DEFAULT_RIDGE)?;
            let held = PropensityModel {
                basis: basis.clone(),
                scaling: core.scaling,
                coefficients: core.coefficients,
                delta,
                ridge: DEFAULT_RIDGE,
                fitted: Vec::new(),
                diagnostics: core.diagnostics,
            };
            for (i, row) in sample.rows().iter().enumerate() {
                if fold_of[i] == fold {
                    let p = held.predict_treated(&row.x)?;
                    score += (f64::from(row.t) - p).powi(2);
                }
            }
        }
        scores.push((degree, score));
    }

    // Ascending candidate order plus strict improvement ties toward the
    // smaller degree.
    let best = scores
        .iter()
        .fold(None::<(u32, f64)>, |best, &(d, s)| match best {
            None => Some((d, s)),
            Some((_, bs)) if s < bs => Some((d, s)),
            keep => keep,
        });
    match best {
        Some((degree, _)) => Ok(CvSelection {
            basis: SieveBasis::new(sample.dim(), degree)?,
            scores,
            skipped,
        }),
        None => Err(Error::NoViableDegree),
    }
}
