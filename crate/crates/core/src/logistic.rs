//! Softplus loss, its derivatives and a Newton solver for L2-regularized
//! logistic regression restricted to a fixed feature support.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{check_lambda, Dataset, FitConfig};
use crate::error::{Error, Result};

/// Coefficients and intercept of a logistic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: Vec<f64>,
    pub theta0: f64,
}

impl ModelParams {
    pub fn zeros(n: usize) -> Self {
        Self {
            theta: vec![0.0; n],
            theta0: 0.0,
        }
    }

    /// Indices of nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.theta
            .iter()
            .enumerate()
            .filter(|(_, &t)| t != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Value of the regularized training objective, split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub loss_sum: f64,
    pub reg: f64,
    pub total: f64,
}

impl Objective {
    fn new(loss_sum: f64, reg: f64) -> Self {
        Self {
            loss_sum,
            reg,
            total: loss_sum + reg,
        }
    }
}

/// `log(1 + exp(-margin))` without overflow.
#[inline]
pub fn softplus(margin: f64) -> f64 {
    (-margin).max(0.0) + (-margin.abs()).exp().ln_1p()
}

/// Logistic function `1 / (1 + exp(-z))`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Probability of label +1 at feature vector `x`.
pub fn predict_proba(p: &ModelParams, x: &[f64]) -> f64 {
    debug_assert_eq!(p.theta.len(), x.len());
    let z: f64 = p.theta.iter().zip(x).map(|(t, v)| t * v).sum::<f64>() + p.theta0;
    sigmoid(z)
}

/// Probabilities of label +1 for every row of `d`.
pub fn predict_dataset(p: &ModelParams, d: &Dataset) -> Vec<f64> {
    let mut z = vec![p.theta0; d.n_examples()];
    for (j, &t) in p.theta.iter().enumerate() {
        if t != 0.0 {
            for (zm, &x) in z.iter_mut().zip(d.column(j)) {
                *zm += t * x;
            }
        }
    }
    z.into_iter().map(sigmoid).collect()
}

fn check_dims(d: &Dataset, p: &ModelParams) -> Result<()> {
    if p.theta.len() != d.n_features() {
        return Err(Error::DimensionMismatch {
            expected: d.n_features(),
            found: p.theta.len(),
        });
    }
    Ok(())
}

fn margins(d: &Dataset, p: &ModelParams) -> Vec<f64> {
    let mut z = vec![p.theta0; d.n_examples()];
    for (j, &t) in p.theta.iter().enumerate() {
        if t != 0.0 {
            for (zm, &x) in z.iter_mut().zip(d.column(j)) {
                *zm += t * x;
            }
        }
    }
    for (zm, &y) in z.iter_mut().zip(d.y()) {
        *zm *= y;
    }
    z
}

/// Sum of softplus losses plus `lambda / 2 * ||theta||^2`; the intercept is
/// not penalized.
pub fn objective(d: &Dataset, p: &ModelParams, lambda: f64) -> Result<Objective> {
    check_dims(d, p)?;
    let loss: f64 = margins(d, p).into_iter().map(softplus).sum();
    let reg = 0.5 * lambda * p.theta.iter().map(|t| t * t).sum::<f64>();
    Ok(Objective::new(loss, reg))
}

/// Gradient of [`objective`] with respect to `theta` and `theta0`.
pub fn gradient(d: &Dataset, p: &ModelParams, lambda: f64) -> Result<(Vec<f64>, f64)> {
    check_dims(d, p)?;
    // r_m = d loss / d (theta^T x_m + theta0) = -y_m * sigmoid(-margin_m)
    let r: Vec<f64> = margins(d, p)
        .into_iter()
        .zip(d.y())
        .map(|(z, &y)| -y * sigmoid(-z))
        .collect();
    let g: Vec<f64> = (0..d.n_features())
        .map(|j| dot(d.column(j), &r) + lambda * p.theta[j])
        .collect();
    Ok((g, r.iter().sum()))
}

/// Inner product with four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Result of a fixed-support fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportFit {
    pub params: ModelParams,
    pub objective: Objective,
    pub iterations: usize,
    /// False when `max_newton_iters` ran out or the line search stalled;
    /// `params` then holds the best iterate.
    pub converged: bool,
}

/// Coefficient norm beyond which an unregularized fit is declared unbounded.
const UNBOUNDED_NORM: f64 = 1e6;

/// Minimizes the regularized objective over coefficients supported on
/// `support` (all others exactly zero) with a damped Newton method.
pub fn fit_support(d: &Dataset, support: &[usize], lambda: f64, cfg: &FitConfig) -> Result<SupportFit> {
    check_lambda(lambda)?;
    let mut idx = support.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if let Some(&j) = idx.iter().find(|&&j| j >= d.n_features()) {
        return Err(Error::DimensionMismatch {
            expected: d.n_features(),
            found: j + 1,
        });
    }
    let cols: Vec<&[f64]> = idx.iter().map(|&j| d.column(j)).collect();
    let fit = newton_fit(&cols, d.y(), lambda, cfg, None, UNBOUNDED_NORM)?;
    let mut theta = vec![0.0; d.n_features()];
    for (&j, &w) in idx.iter().zip(&fit.coef) {
        theta[j] = w;
    }
    Ok(SupportFit {
        params: ModelParams {
            theta,
            theta0: fit.intercept,
        },
        objective: fit.objective,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

/// Newton fit over explicit columns.
#[derive(Debug, Clone)]
pub(crate) struct ColumnFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub objective: Objective,
    pub iterations: usize,
    pub converged: bool,
}

/// Log-odds of the positive class, the optimal intercept of the empty model.
pub(crate) fn log_odds(y: &[f64]) -> f64 {
    let pos = y.iter().filter(|&&v| v > 0.0).count() as f64;
    let neg = y.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        0.0
    } else {
        (pos / neg).ln()
    }
}

struct Evaluation {
    objective: Objective,
    grad: DVector<f64>,
}

/// Objective and gradient at `(coef, intercept)`. Also fills `margins`.
fn evaluate(
    cols: &[&[f64]],
    y: &[f64],
    lambda: f64,
    coef: &[f64],
    intercept: f64,
    margins: &mut [f64],
    residual: &mut [f64],
) -> Evaluation {
    compute_margins(cols, y, coef, intercept, margins);
    let mut loss = 0.0;
    let mut g0 = 0.0;
    for ((r, &z), &ym) in residual.iter_mut().zip(margins.iter()).zip(y) {
        loss += softplus(z);
        *r = -ym * sigmoid(-z);
        g0 += *r;
    }
    let s = cols.len();
    let mut grad = DVector::zeros(s + 1);
    for (j, col) in cols.iter().enumerate() {
        grad[j] = dot(col, residual) + lambda * coef[j];
    }
    grad[s] = g0;
    let reg = 0.5 * lambda * coef.iter().map(|w| w * w).sum::<f64>();
    Evaluation {
        objective: Objective::new(loss, reg),
        grad,
    }
}

fn compute_margins(cols: &[&[f64]], y: &[f64], coef: &[f64], intercept: f64, margins: &mut [f64]) {
    margins.fill(intercept);
    for (col, &w) in cols.iter().zip(coef) {
        if w != 0.0 {
            for (z, &x) in margins.iter_mut().zip(col.iter()) {
                *z += w * x;
            }
        }
    }
    for (z, &ym) in margins.iter_mut().zip(y) {
        *z *= ym;
    }
}

fn total_at(cols: &[&[f64]], y: &[f64], lambda: f64, coef: &[f64], intercept: f64, margins: &mut [f64]) -> f64 {
    compute_margins(cols, y, coef, intercept, margins);
    let loss: f64 = margins.iter().map(|&z| softplus(z)).sum();
    loss + 0.5 * lambda * coef.iter().map(|w| w * w).sum::<f64>()
}

pub(crate) fn newton_fit(
    cols: &[&[f64]],
    y: &[f64],
    lambda: f64,
    cfg: &FitConfig,
    warm: Option<(&[f64], f64)>,
    unbounded_norm: f64,
) -> Result<ColumnFit> {
    let s = cols.len();
    let m = y.len();
    let (mut coef, mut intercept) = match warm {
        Some((c, b)) => (c.to_vec(), b),
        None => (vec![0.0; s], log_odds(y)),
    };
    let mut margins = vec![0.0; m];
    let mut residual = vec![0.0; m];
    let mut trial_margins = vec![0.0; m];
    let mut weighted = vec![0.0; m];
    let mut eval = evaluate(cols, y, lambda, &coef, intercept, &mut margins, &mut residual);
    let mut iterations = 0;
    let mut converged = false;

    loop {
        if eval.grad.norm() <= cfg.newton_tol {
            // A finite unregularized optimum misclassifies at least one example;
            // all-positive margins mean the gradient merely decayed along a
            // separating direction.
            if lambda == 0.0 && margins.iter().all(|&z| z > 0.0) {
                return Err(Error::Unbounded);
            }
            converged = true;
            break;
        }
        if iterations >= cfg.max_newton_iters {
            break;
        }
        iterations += 1;

        // Hessian: X~^T diag(sigma(z) sigma(-z)) X~ + lambda I on coefficients
        let curv: Vec<f64> = margins.iter().map(|&z| sigmoid(z) * sigmoid(-z)).collect();
        let mut h = DMatrix::zeros(s + 1, s + 1);
        for a in 0..s {
            for (wv, (&c, &x)) in weighted.iter_mut().zip(curv.iter().zip(cols[a].iter())) {
                *wv = c * x;
            }
            for b in 0..=a {
                let v = dot(&weighted, cols[b]);
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
            let v: f64 = weighted.iter().sum();
            h[(a, s)] = v;
            h[(s, a)] = v;
            h[(a, a)] += lambda;
        }
        h[(s, s)] = curv.iter().sum();
        let step = newton_direction(h, &eval.grad);

        let f0 = eval.objective.total;
        let slope = step.dot(&eval.grad);
        if !(slope < 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        let mut trial = vec![0.0; s];
        for _ in 0..60 {
            for j in 0..s {
                trial[j] = coef[j] + t * step[j];
            }
            let b = intercept + t * step[s];
            let f = total_at(cols, y, lambda, &trial, b, &mut trial_margins);
            let slack = 1e-13 * (1.0 + f0.abs());
            if f <= f0 + 1e-4 * t * slope + slack {
                accepted = Some(b);
                break;
            }
            t *= 0.5;
        }
        let Some(b) = accepted else { break };
        coef.copy_from_slice(&trial);
        intercept = b;
        eval = evaluate(cols, y, lambda, &coef, intercept, &mut margins, &mut residual);

        if lambda == 0.0 {
            let norm = coef.iter().map(|w| w * w).sum::<f64>().sqrt();
            if norm > unbounded_norm {
                return Err(Error::Unbounded);
            }
        }
    }

    Ok(ColumnFit {
        coef,
        intercept,
        objective: eval.objective,
        iterations,
        converged,
    })
}

/// Solves `H d = -g`, adding a growing ridge to the diagonal until the
/// Cholesky factorization succeeds.
fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let mut ridge = 0.0;
    loop {
        let mut hr = h.clone();
        if ridge > 0.0 {
            for i in 0..hr.nrows() {
                hr[(i, i)] += ridge;
            }
        }
        if let Some(chol) = hr.cholesky() {
            return -chol.solve(g);
        }
        ridge = if ridge == 0.0 { 1e-10 } else { ridge * 10.0 };
        if ridge > 1e10 {
            return -g.clone();
        }
    }
}
