use nalgebra::{DMatrix, DVector};

use crate::data_model::CovariateTable;
use crate::error::{Error, Result};

/// Rows of `covariates` for the given sample ids, with a leading column of
/// ones for the intercept.
pub fn design_matrix<'a>(
    covariates: &CovariateTable,
    sample_ids: impl ExactSizeIterator<Item = &'a str>,
) -> Result<DMatrix<f64>> {
    let n = sample_ids.len();
    let p = covariates.n_features();
    let mut x = DMatrix::zeros(n, p + 1);
    for (i, id) in sample_ids.enumerate() {
        let row = covariates
            .row_of(id)
            .ok_or_else(|| Error::UnknownSample(id.to_string()))?;
        x[(i, 0)] = 1.0;
        for (j, v) in covariates.row(row).iter().enumerate() {
            x[(i, j + 1)] = *v;
        }
    }
    Ok(x)
}

/// Adds `ridge` to the diagonal, skipping the intercept at index 0.
pub(crate) fn add_ridge(m: &mut DMatrix<f64>, ridge: f64) {
    for j in 1..m.ncols() {
        m[(j, j)] += ridge;
    }
}

/// Solves a symmetric positive definite system; `None` if it is not.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = a.cholesky()?;
    let x = chol.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `X' diag(w) X`
pub(crate) fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut xw = x.clone();
    for mut col in xw.column_iter_mut() {
        col.component_mul_assign(w);
    }
    x.tr_mul(&xw)
}
