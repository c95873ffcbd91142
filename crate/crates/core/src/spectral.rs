//! Truncated SVD backends, the de-regularized `(t, w)`-SVD, spectral-norm
//! estimation and row impacts.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::regularization::{deregularize, regularize};
use crate::types::{RegWeights, RowSet, SingularTriplet, SparseMatrix, SvdResult};

/// Singular values below this fraction of `sigma_1` are reported as zero.
pub const ZERO_SIGMA_TOLERANCE: f64 = 1e-12;

const OVERSAMPLING: usize = 10;
const POWER_ITERATIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    /// Use the exact dense SVD up to this dimension.
    pub dense_threshold: usize,
    /// Seed for the randomized backend.
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 2048,
            seed: 0,
        }
    }
}

/// Something that can multiply a dense block from the left, with or
/// without transposition.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64>;
    fn apply_transpose(&self, block: &DMatrix<f64>) -> DMatrix<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        self * block
    }

    fn apply_transpose(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(block)
    }
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.k()
    }

    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        self.mul_dense(block)
    }

    fn apply_transpose(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul_dense(block)
    }
}

/// Flips each pair so the first significant entry of `u` is positive, and
/// zeroes negligible singular values.
fn normalize_triplets(mut triplets: Vec<SingularTriplet>) -> Vec<SingularTriplet> {
    let top = triplets.first().map_or(0.0, |t| t.sigma);
    for t in &mut triplets {
        if t.sigma <= ZERO_SIGMA_TOLERANCE * top {
            t.sigma = 0.0;
        }
        let scale = t.u.amax();
        if let Some(first) = t.u.iter().copied().find(|x| x.abs() > 1e-12 * scale) {
            if first < 0.0 {
                t.u.neg_mut();
                t.v.neg_mut();
            }
        }
    }
    triplets
}

fn triplets_from_svd(
    u: &DMatrix<f64>,
    sigma: &DVector<f64>,
    v_t: &DMatrix<f64>,
    t: usize,
) -> Vec<SingularTriplet> {
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let triplets = order
        .into_iter()
        .take(t)
        .map(|idx| SingularTriplet {
            sigma: sigma[idx].max(0.0),
            u: u.column(idx).into_owned(),
            v: v_t.row(idx).transpose(),
        })
        .collect();
    normalize_triplets(triplets)
}

fn dense_svd(a: &DMatrix<f64>, t: usize) -> Vec<SingularTriplet> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    triplets_from_svd(&u, &svd.singular_values, &v_t, t)
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Randomized subspace iteration: Gaussian sketch with oversampling, a few
/// power iterations with re-orthonormalization, then an exact SVD of the
/// small projected matrix.
pub fn randomized_svd<A: LinearOperator + ?Sized>(a: &A, t: usize, seed: u64) -> Result<Vec<SingularTriplet>> {
    let k = a.dim();
    if t == 0 || t > k {
        return Err(Error::RankOutOfRange { t, k });
    }
    let l = (t + OVERSAMPLING).min(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(k, l, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormal_basis(a.apply(&omega));
    for _ in 0..POWER_ITERATIONS {
        let z = orthonormal_basis(a.apply_transpose(&q));
        q = orthonormal_basis(a.apply(&z));
    }
    // B = Q^T A, computed as (A^T Q)^T.
    let b = a.apply_transpose(&q).transpose();
    let svd = b.svd(true, true);
    let ub = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let u = &q * ub;
    Ok(triplets_from_svd(&u, &svd.singular_values, &v_t, t))
}

/// Top-`t` singular triplets with the default backend options.
pub fn truncated_svd(a: &DMatrix<f64>, t: usize) -> Result<SvdResult> {
    truncated_svd_with(a, t, &SvdOptions::default())
}

/// Top-`t` singular triplets; exact dense SVD up to `opts.dense_threshold`,
/// seeded randomized subspace iteration above it.
pub fn truncated_svd_with(a: &DMatrix<f64>, t: usize, opts: &SvdOptions) -> Result<SvdResult> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {} x {}",
            a.nrows(),
            a.ncols()
        )));
    }
    if t == 0 || t > k {
        return Err(Error::RankOutOfRange { t, k });
    }
    let triplets = if k <= opts.dense_threshold {
        dense_svd(a, t)
    } else {
        randomized_svd(a, t, opts.seed)?
    };
    Ok(SvdResult {
        triplets,
        source_rows_zeroed: RowSet::new(),
    })
}

/// Top-`t` triplets of a sparse matrix via the randomized backend.
pub fn truncated_svd_sparse(a: &SparseMatrix, t: usize, seed: u64) -> Result<SvdResult> {
    Ok(SvdResult {
        triplets: randomized_svd(a, t, seed)?,
        source_rows_zeroed: RowSet::new(),
    })
}

/// Rank-`t` truncation of `A`, `A^(t)`.
pub fn truncate(a: &DMatrix<f64>, t: usize, opts: &SvdOptions) -> Result<DMatrix<f64>> {
    Ok(truncated_svd_with(a, t, opts)?.reconstruct(a.nrows()))
}

/// `D^{1/2}(wf) R(A, w)^(t) D^{1/2}(wb)`.
pub fn rw_svd(a: &DMatrix<f64>, t: usize, w: &RegWeights) -> Result<DMatrix<f64>> {
    rw_svd_with(a, t, w, &SvdOptions::default())
}

pub fn rw_svd_with(a: &DMatrix<f64>, t: usize, w: &RegWeights, opts: &SvdOptions) -> Result<DMatrix<f64>> {
    let reg = regularize(a, w)?;
    deregularize(&truncate(&reg, t, opts)?, w)
}

pub const POWER_TOLERANCE: f64 = 1e-9;
pub const POWER_MAX_ITERATIONS: usize = 10_000;

/// `sigma_1(A)` by power iteration on `A^T A`.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() || a.amax() == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_fn(a.ncols(), |_, _| StandardNormal.sample(&mut rng));
    v.normalize_mut();
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERATIONS {
        let av = a * &v;
        let next = av.norm();
        let mut w = a.tr_mul(&av);
        let wn = w.norm();
        if wn == 0.0 {
            return next;
        }
        w /= wn;
        v = w;
        if (next - estimate).abs() <= POWER_TOLERANCE * next {
            estimate = next;
            break;
        }
        estimate = next;
    }
    (a * &v).norm().max(estimate)
}

/// `A` with the rows in `rows` set to zero.
pub fn zero_rows(a: &DMatrix<f64>, rows: &RowSet) -> DMatrix<f64> {
    let mut out = a.clone();
    for &i in rows {
        out.row_mut(i).fill(0.0);
    }
    out
}

/// `sigma_j^2 sum_{i in rows} u_j(i)^2`, the share of component `j`'s energy
/// carried by `rows`.
pub fn impact(svd: &SvdResult, rows: &RowSet, j: usize) -> Result<f64> {
    let t = svd.triplets.get(j).ok_or(Error::ComponentOutOfRange {
        j,
        len: svd.triplets.len(),
    })?;
    let s2 = t.sigma * t.sigma;
    Ok(s2 * rows.iter().map(|&i| t.u[i] * t.u[i]).sum::<f64>())
}

/// Per-row impacts `sigma_j^2 u_j(i)^2` for every retained component.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactTable {
    pub columns: Vec<Vec<f64>>,
}

impl ImpactTable {
    pub fn from_svd(svd: &SvdResult) -> Self {
        let columns = svd
            .triplets
            .iter()
            .map(|t| {
                let s2 = t.sigma * t.sigma;
                t.u.iter().map(|x| s2 * x * x).collect()
            })
            .collect();
        Self { columns }
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }
}

/// All singular values, non-increasing.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}
