//! Brute-force reference computations and error metrics.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::singular_values;
use crate::types::{ModelMatrix, Observation, RowSet};

pub const DENSE_ORACLE_CAP: usize = 512;
pub const BRUTE_KNAPSACK_CAP: usize = 22;
pub const SIGN_ENUMERATION_CAP: usize = 20;
pub const HEAVY_SUBSET_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// `sum |F - F_cur| / k^2` for collaborative filtering, otherwise
    /// `||est - M||_1 / ||M||_1`.
    pub normalized_l1: f64,
    pub mse: Option<f64>,
    pub spectral_noise_norm: f64,
    pub zeroed_weight: f64,
    pub runtime_ms: f64,
}

/// `||est - M||_1 / ||M||_1`.
pub fn normalized_l1(m: &ModelMatrix, est: &DMatrix<f64>) -> Result<f64> {
    let mass = m.mass();
    if mass == 0.0 {
        return Err(Error::InvalidModel("normalized L1 undefined for ||M||_1 = 0".into()));
    }
    if est.nrows() != m.k() || est.ncols() != m.k() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {} x {}, model is {} x {}",
            est.nrows(),
            est.ncols(),
            m.k(),
            m.k()
        )));
    }
    let md = m.to_dense()?;
    Ok((est - md).iter().map(|x| x.abs()).sum::<f64>() / mass)
}

/// Per-entry L1 and mean squared error of `F_cur = clamp(m_cur / p, 0, 1)`
/// against `F`.
pub fn collab_eval(f_true: &DMatrix<f64>, m_cur: &DMatrix<f64>, p: f64) -> Result<EvalReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!("sampling probability {p} not in (0, 1]")));
    }
    if f_true.shape() != m_cur.shape() {
        return Err(Error::DimensionMismatch("F and estimate shapes differ".into()));
    }
    let n = (f_true.nrows() * f_true.ncols()) as f64;
    let (mut l1, mut sq) = (0.0, 0.0);
    for (f, m) in f_true.iter().zip(m_cur.iter()) {
        let d = (f - (m / p).clamp(0.0, 1.0)).abs();
        l1 += d;
        sq += d * d;
    }
    let (l1, mse) = (l1 / n, sq / n);
    debug_assert!(l1 + 1e-15 >= mse, "entries in [0,1] force L1 >= MSE");
    Ok(EvalReport {
        normalized_l1: l1,
        mse: Some(mse),
        spectral_noise_norm: 0.0,
        zeroed_weight: 0.0,
        runtime_ms: 0.0,
    })
}

/// `sigma_1` from a full dense SVD.
pub fn dense_spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    let side = a.nrows().max(a.ncols());
    if side > DENSE_ORACLE_CAP {
        return Err(Error::TooLarge {
            what: "dense spectral-norm oracle",
            size: side,
            cap: DENSE_ORACLE_CAP,
        });
    }
    Ok(singular_values(a).first().copied().unwrap_or(0.0))
}

/// Exact 0-1 knapsack optimum by subset enumeration.
pub fn brute_knapsack(values: &[f64], weights: &[f64], capacity: f64) -> Result<(Vec<usize>, f64)> {
    let n = values.len();
    if n > BRUTE_KNAPSACK_CAP {
        return Err(Error::TooLarge {
            what: "exhaustive knapsack",
            size: n,
            cap: BRUTE_KNAPSACK_CAP,
        });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch("values and weights differ in length".into()));
    }
    let mut best = (0u32, 0.0);
    for mask in 0u32..(1u32 << n) {
        let (mut v, mut w) = (0.0, 0.0);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                v += values[i];
                w += weights[i];
            }
        }
        if w <= capacity && v > best.1 {
            best = (mask, v);
        }
    }
    let items = (0..n).filter(|i| best.0 >> i & 1 == 1).collect();
    Ok((items, best.1))
}

/// `max over v in {-1, 1}^m of ||A v||_2`.
pub fn inf_to_2_norm(a: &DMatrix<f64>) -> Result<f64> {
    let m = a.ncols();
    if m > SIGN_ENUMERATION_CAP {
        return Err(Error::TooLarge {
            what: "sign-vector enumeration",
            size: m,
            cap: SIGN_ENUMERATION_CAP,
        });
    }
    let mut best: f64 = 0.0;
    let mut v = nalgebra::DVector::from_element(m, 1.0);
    // v and -v give the same norm, so fix the last sign.
    let free = m.saturating_sub(1);
    for mask in 0u32..(1u32 << free) {
        for i in 0..free {
            v[i] = if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
        }
        best = best.max((a * &v).norm());
    }
    Ok(best)
}

/// `sum_i |sum_j (X_ij - M_ij)|`.
pub fn row_sum_deviation(obs: &Observation, m: &ModelMatrix) -> Result<f64> {
    if obs.k() != m.k() {
        return Err(Error::DimensionMismatch(format!(
            "observation k = {}, model k = {}",
            obs.k(),
            m.k()
        )));
    }
    let mut diff = vec![0.0; m.k()];
    obs.entries().for_each_nonzero(|i, _, v| diff[i] += v);
    m.entries().for_each_nonzero(|i, _, v| diff[i] -= v);
    Ok(diff.iter().map(|d| d.abs()).sum())
}

fn restricted_norm(a: &DMatrix<f64>, rows: &RowSet) -> f64 {
    let sub = DMatrix::from_fn(rows.len(), a.ncols(), |r, c| a[(*rows.iter().nth(r).unwrap(), c)]);
    singular_values(&sub).first().copied().unwrap_or(0.0)
}

/// Greedily extracts disjoint row subsets with `||A_I|| > 2 beta`.
///
/// Every single row above the threshold becomes its own subset; the
/// remaining rows are then grown into subsets, adding at each step the row
/// that increases the restricted norm most, until the norm exceeds `2 beta`
/// or no rows are left. Returns the subsets found.
pub fn heavy_subsets(a: &DMatrix<f64>, beta: f64) -> Result<Vec<RowSet>> {
    let k = a.nrows();
    if k > HEAVY_SUBSET_CAP {
        return Err(Error::TooLarge {
            what: "heavy subset search",
            size: k,
            cap: HEAVY_SUBSET_CAP,
        });
    }
    let threshold = 2.0 * beta;
    let mut remaining: RowSet = (0..k).collect();
    let mut found = Vec::new();
    for i in 0..k {
        let single: RowSet = [i].into_iter().collect();
        if a.row(i).norm() > threshold {
            remaining.remove(&i);
            found.push(single);
        }
    }
    loop {
        let mut current = RowSet::new();
        let mut norm = 0.0;
        while norm <= threshold {
            let next = remaining
                .iter()
                .filter(|i| !current.contains(i))
                .map(|&i| {
                    let mut trial = current.clone();
                    trial.insert(i);
                    (i, restricted_norm(a, &trial))
                })
                .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
            match next {
                Some((i, n)) => {
                    current.insert(i);
                    norm = n;
                }
                None => break,
            }
        }
        if norm > threshold {
            for i in &current {
                remaining.remove(i);
            }
            found.push(current);
        } else {
            return Ok(found);
        }
    }
}

/// Number of disjoint heavy row subsets found by [`heavy_subsets`].
pub fn heavy_subset_count(a: &DMatrix<f64>, beta: f64) -> Result<usize> {
    heavy_subsets(a, beta).map(|v| v.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Entries, ModelKind};

    fn model(d: DMatrix<f64>, r: usize) -> ModelMatrix {
        ModelMatrix::new(r, ModelKind::Poisson, Entries::dense(d).unwrap()).unwrap()
    }

    #[test]
    fn normalized_l1_examples() {
        let m = model(DMatrix::from_element(2, 2, 1.0), 1);
        assert_eq!(normalized_l1(&m, &DMatrix::from_element(2, 2, 1.0)).unwrap(), 0.0);
        assert_eq!(normalized_l1(&m, &DMatrix::zeros(2, 2)).unwrap(), 1.0);
        let est = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        assert_eq!(normalized_l1(&m, &est).unwrap(), 0.25);
        let zero = model(DMatrix::zeros(2, 2), 1);
        assert!(normalized_l1(&zero, &est).is_err());
    }

    #[test]
    fn collab_eval_examples() {
        let f = DMatrix::from_row_slice(2, 2, &[0.2, 0.4, 0.6, 0.8]);
        let rep = collab_eval(&f, &(&f * 0.3), 0.3).unwrap();
        assert!(rep.normalized_l1 < 1e-15 && rep.mse.unwrap() < 1e-15);
        let rep = collab_eval(&f, &DMatrix::zeros(2, 2), 0.3).unwrap();
        assert!((rep.normalized_l1 - 0.5).abs() < 1e-15);
        assert!(rep.normalized_l1 >= rep.mse.unwrap());
        assert!(collab_eval(&f, &f, 0.0).is_err());
    }

    #[test]
    fn dense_norm_examples() {
        assert!((dense_spectral_norm(&DMatrix::identity(4, 4)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(dense_spectral_norm(&DMatrix::zeros(3, 3)).unwrap(), 0.0);
        assert!(dense_spectral_norm(&DMatrix::zeros(513, 1)).is_err());
    }

    #[test]
    fn brute_knapsack_examples() {
        let (items, v) = brute_knapsack(&[3.0, 9.0], &[5.0, 2.0], 2.0).unwrap();
        assert_eq!((items, v), (vec![1], 9.0));
        assert_eq!(brute_knapsack(&[3.0, 9.0], &[5.0, 2.0], 0.0).unwrap(), (vec![], 0.0));
        assert_eq!(brute_knapsack(&[6.0, 5.0, 5.0], &[3.0, 2.0, 2.0], 4.0).unwrap().1, 10.0);
        assert!(brute_knapsack(&[1.0; 23], &[1.0; 23], 1.0).is_err());
    }

    #[test]
    fn inf_to_2_examples() {
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert!((inf_to_2_norm(&ones).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(inf_to_2_norm(&DMatrix::zeros(3, 3)).unwrap(), 0.0);
        assert!(inf_to_2_norm(&DMatrix::zeros(1, 21)).is_err());
    }

    #[test]
    fn row_sum_deviation_examples() {
        let m = model(DMatrix::from_element(1, 1, 1.0), 1);
        let x = Observation::new(ModelKind::Poisson, Entries::from_triplets(1, vec![(0, 0, 3.0)]).unwrap()).unwrap();
        assert_eq!(row_sum_deviation(&x, &m).unwrap(), 2.0);
        let m2 = model(DMatrix::from_element(2, 2, 2.0), 1);
        let x2 = Observation::new(ModelKind::Poisson, Entries::dense(DMatrix::from_element(2, 2, 2.0)).unwrap()).unwrap();
        assert_eq!(row_sum_deviation(&x2, &m2).unwrap(), 0.0);
    }

    #[test]
    fn heavy_subsets_none_when_rows_light() {
        // rank 1 with sigma_1 = 1; single rows have norm 0.5 <= 2 beta = 0.6,
        // pairs have norm 0.707 and are found
        let a = DMatrix::from_fn(4, 4, |_, _| 0.25);
        let found = heavy_subsets(&a, 0.3).unwrap();
        assert_eq!(found.len(), 2);
        assert!(found.iter().all(|s| s.len() == 2));
        assert!(found.len() as f64 <= (1.0 / 0.3f64).powi(2));
        let tiny = DMatrix::from_fn(4, 4, |_, _| 0.01);
        assert_eq!(heavy_subset_count(&tiny, 0.3).unwrap(), 0);
    }
}
