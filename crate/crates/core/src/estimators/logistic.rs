//! Logistic regression by iteratively reweighted least squares, used for
//! propensity scores.

use nalgebra::{DMatrix, DVector};

use super::linalg::{add_ridge, solve_spd, weighted_gram};
use crate::dgp::sigmoid;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-8;
pub const RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Intercept first, then one coefficient per feature column.
    pub coefficients: Vec<f64>,
    /// Square roots of the diagonal of the inverse penalized information.
    pub standard_errors: Vec<f64>,
    pub iterations: usize,
}

impl LogisticFit {
    /// Fitted probabilities for rows of a design matrix (intercept column
    /// included).
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta).iter().map(|&eta| sigmoid(eta)).collect()
    }
}

/// Maximum-likelihood logistic coefficients with a `1e-6` ridge on the
/// non-intercept terms. Stops when the largest coefficient change is below
/// `1e-8`. Failure to converge in 100 iterations, or a fit that separates
/// the two groups perfectly, means they do not overlap.
pub fn fit_propensity(x: &DMatrix<f64>, z: &[bool]) -> Result<LogisticFit> {
    let n = x.nrows();
    if z.len() != n {
        return Err(Error::Invalid(format!(
            "{} treatment values for {} design rows",
            z.len(),
            n
        )));
    }
    let treated = z.iter().filter(|&&t| t).count();
    if treated == 0 || treated == n {
        return Err(Error::NonOverlap(
            "only one treatment group present".into(),
        ));
    }
    let y = DVector::from_iterator(n, z.iter().map(|&t| t as u8 as f64));
    let k = x.ncols();
    let mut beta = DVector::zeros(k);
    let rate = treated as f64 / n as f64;
    beta[0] = (rate / (1.0 - rate)).ln();

    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        let eta = x * &beta;
        let p = eta.map(sigmoid);
        let w = p.map(|pi| pi * (1.0 - pi));
        let mut h = weighted_gram(x, &w);
        add_ridge(&mut h, RIDGE);
        // Newton step written as a weighted least-squares solve
        let rhs = x.tr_mul(&(w.component_mul(&eta) + &y - &p));
        let next = solve_spd(h, &rhs).ok_or_else(|| {
            Error::NonOverlap(format!("information matrix singular at iteration {iter}"))
        })?;
        let change = (&next - &beta).amax();
        beta = next;
        if !change.is_finite() {
            return Err(Error::NonOverlap("coefficients diverged".into()));
        }
        if change < TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonOverlap(format!(
            "no convergence after {MAX_ITERATIONS} iterations"
        )));
    }

    // a linear predictor that classifies every row correctly means the
    // groups are linearly separable and no finite maximum exists
    let eta = x * &beta;
    if eta.iter().zip(z).all(|(&e, &t)| (e > 0.0) == t) {
        return Err(Error::NonOverlap("treatment groups are linearly separable".into()));
    }
    let p = eta.map(sigmoid);
    let w = p.map(|pi| pi * (1.0 - pi));
    let mut info = weighted_gram(x, &w);
    add_ridge(&mut info, RIDGE);
    let standard_errors = match info.try_inverse() {
        Some(inv) => (0..k).map(|j| inv[(j, j)].max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; k],
    };
    Ok(LogisticFit {
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        iterations,
    })
}
