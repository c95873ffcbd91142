//! Degree-based weights and the diagonal rescaling `D^{-1/2}(wf) A D^{-1/2}(wb)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{Entries, ModelMatrix, Observation, RegWeights, RowSet};

fn degree_weights(row_mass: &[f64], col_mass: &[f64], lambda: f64) -> RegWeights {
    let w = |mass: &f64| f64::max(1.0, mass / lambda);
    RegWeights {
        wf: row_mass.iter().map(w).collect(),
        wb: col_mass.iter().map(w).collect(),
        lambda,
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidWeights(format!("lambda {lambda} must be positive")))
    }
}

/// `wf(i) = max(1, ||X_i*||_1 / lambda)`, `wb(j) = max(1, ||X_*j||_1 / lambda)`.
pub fn compute_weights(obs: &Observation, lambda: f64) -> Result<RegWeights> {
    check_lambda(lambda)?;
    Ok(degree_weights(&obs.entries().row_l1(), &obs.entries().col_l1(), lambda))
}

/// Same rule applied to raw entries.
pub fn weights_from_entries(entries: &Entries, lambda: f64) -> Result<RegWeights> {
    check_lambda(lambda)?;
    Ok(degree_weights(&entries.row_l1(), &entries.col_l1(), lambda))
}

/// Ideal weights built from the model's own row and column masses. Only
/// used for diagnostics; the recovery algorithm never sees `M`.
pub fn ideal_weights(model: &ModelMatrix, lambda: f64) -> Result<RegWeights> {
    weights_from_entries(model.entries(), lambda)
}

fn rescale(a: &DMatrix<f64>, w: &RegWeights, power: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != w.wf.len() || a.ncols() != w.wb.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix {} x {} vs weights {} / {}",
            a.nrows(),
            a.ncols(),
            w.wf.len(),
            w.wb.len()
        )));
    }
    let rf: Vec<f64> = w.wf.iter().map(|x| x.powf(power)).collect();
    let rb: Vec<f64> = w.wb.iter().map(|x| x.powf(power)).collect();
    Ok(DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * rf[i] * rb[j]))
}

/// `A_ij / sqrt(wf(i) wb(j))`.
pub fn regularize(a: &DMatrix<f64>, w: &RegWeights) -> Result<DMatrix<f64>> {
    rescale(a, w, -0.5)
}

/// `A_ij * sqrt(wf(i) wb(j))`; inverse of [`regularize`].
pub fn deregularize(a: &DMatrix<f64>, w: &RegWeights) -> Result<DMatrix<f64>> {
    rescale(a, w, 0.5)
}

/// Total row weight of the subset `rows`.
pub fn weight_of_rows(w: &RegWeights, rows: &RowSet) -> f64 {
    rows.iter().fold(0.0, |acc, &i| acc + w.wf[i])
}
