//! Shared value types: model and observation matrices, regularization
//! weights, singular triplets and the recovery configuration.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Set of row indices, kept ordered so iteration is reproducible.
pub type RowSet = BTreeSet<usize>;

/// Matrices with at most this many entries are stored densely.
pub const DENSE_STORAGE_LIMIT: usize = 4_000_000;

/// Relative cutoff (against `sigma_1`) used when counting numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Observation model linking `M = E[X]` to the law of each entry of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Poisson,
    Bernoulli,
    Binomial { trials: u32 },
    /// `samples` draws from a distribution over the `k x k` cells.
    Distribution { samples: u64 },
    /// Each rating is revealed with probability `p`; `M = p F`.
    Collab { p: f64 },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Poisson => "poisson",
            ModelKind::Bernoulli => "bernoulli",
            ModelKind::Binomial { .. } => "binomial",
            ModelKind::Distribution { .. } => "distribution",
            ModelKind::Collab { .. } => "collab",
        }
    }

    /// Upper bound on a single entry of `M`, if the model has one.
    pub fn entry_cap(&self) -> Option<f64> {
        match *self {
            ModelKind::Poisson | ModelKind::Distribution { .. } => None,
            ModelKind::Bernoulli => Some(1.0),
            ModelKind::Binomial { trials } => Some(trials as f64),
            ModelKind::Collab { p } => Some(p),
        }
    }

    /// Whether sampled entries are integer counts.
    pub fn integer_valued(&self) -> bool {
        !matches!(self, ModelKind::Collab { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelKind::Binomial { trials: 0 } => {
                Err(Error::InvalidModel("binomial trials must be positive".into()))
            }
            ModelKind::Distribution { samples: 0 } => Err(Error::InvalidModel(
                "distribution sample size must be positive".into(),
            )),
            ModelKind::Collab { p } if !(p > 0.0 && p <= 1.0) => Err(Error::InvalidModel(
                format!("collab probability {p} not in (0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ModelKind {
    /// Header form used by the matrix file format: `name [param]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ModelKind::Poisson => write!(f, "poisson"),
            ModelKind::Bernoulli => write!(f, "bernoulli"),
            ModelKind::Binomial { trials } => write!(f, "binomial {trials}"),
            ModelKind::Distribution { samples } => write!(f, "distribution {samples}"),
            ModelKind::Collab { p } => write!(f, "collab {p:?}"),
        }
    }
}

/// Coordinate-list square matrix. Triplets are row-major sorted, unique and
/// nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    k: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    /// Builds from arbitrary triplets; duplicates are summed and zeros dropped.
    pub fn from_triplets(k: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|&&(i, j, _)| i >= k || j >= k) {
            return Err(Error::DimensionMismatch(format!(
                "entry ({i}, {j}) outside {k} x {k}"
            )));
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);
        Ok(Self {
            k,
            triplets: merged,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    /// `A * B` for a dense `k x c` block `B`.
    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.k, b.ncols());
        for &(i, j, v) in &self.triplets {
            for c in 0..b.ncols() {
                out[(i, c)] += v * b[(j, c)];
            }
        }
        out
    }

    /// `A^T * B` for a dense `k x c` block `B`.
    pub fn tr_mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.k, b.ncols());
        for &(i, j, v) in &self.triplets {
            for c in 0..b.ncols() {
                out[(j, c)] += v * b[(i, c)];
            }
        }
        out
    }
}

/// Entry storage shared by model and observation matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum Entries {
    Dense(DMatrix<f64>),
    Sparse(SparseMatrix),
}

impl Entries {
    /// Picks dense storage when `k^2 <= DENSE_STORAGE_LIMIT`.
    pub fn from_triplets(k: usize, triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        let sparse = SparseMatrix::from_triplets(k, triplets)?;
        if k.saturating_mul(k) <= DENSE_STORAGE_LIMIT {
            let mut m = DMatrix::zeros(k, k);
            for &(i, j, v) in sparse.triplets() {
                m[(i, j)] = v;
            }
            Ok(Entries::Dense(m))
        } else {
            Ok(Entries::Sparse(sparse))
        }
    }

    pub fn dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {} x {}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Entries::Dense(m))
    }

    pub fn k(&self) -> usize {
        match self {
            Entries::Dense(m) => m.nrows(),
            Entries::Sparse(s) => s.k,
        }
    }

    /// Visits nonzero entries in row-major order.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, usize, f64)) {
        match self {
            Entries::Dense(m) => {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        let v = m[(i, j)];
                        if v != 0.0 {
                            f(i, j, v);
                        }
                    }
                }
            }
            Entries::Sparse(s) => {
                for &(i, j, v) in &s.triplets {
                    f(i, j, v);
                }
            }
        }
    }

    pub fn nonzeros(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        self.for_each_nonzero(|i, j, v| out.push((i, j, v)));
        out
    }

    pub fn nnz(&self) -> usize {
        match self {
            Entries::Dense(m) => m.iter().filter(|v| **v != 0.0).count(),
            Entries::Sparse(s) => s.triplets.len(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Entries::Dense(m) => m[(i, j)],
            Entries::Sparse(s) => s
                .triplets
                .binary_search_by_key(&(i, j), |&(a, b, _)| (a, b))
                .map(|idx| s.triplets[idx].2)
                .unwrap_or(0.0),
        }
    }

    /// Entrywise L1 norm.
    pub fn l1(&self) -> f64 {
        let mut total = 0.0;
        self.for_each_nonzero(|_, _, v| total += v.abs());
        total
    }

    pub fn row_l1(&self) -> Vec<f64> {
        let mut rows = vec![0.0; self.k()];
        self.for_each_nonzero(|i, _, v| rows[i] += v.abs());
        rows
    }

    pub fn col_l1(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.k()];
        self.for_each_nonzero(|_, j, v| cols[j] += v.abs());
        cols
    }

    /// Dense copy; refuses sizes beyond `cap` entries per side.
    pub fn to_dense_capped(&self, cap: usize) -> Result<DMatrix<f64>> {
        match self {
            Entries::Dense(m) => Ok(m.clone()),
            Entries::Sparse(s) => {
                if s.k > cap {
                    return Err(Error::TooLarge {
                        what: "dense materialization",
                        size: s.k,
                        cap,
                    });
                }
                let mut m = DMatrix::zeros(s.k, s.k);
                for &(i, j, v) in &s.triplets {
                    m[(i, j)] = v;
                }
                Ok(m)
            }
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        self.to_dense_capped(MAX_DENSE_SIDE)
    }
}

/// Largest side length the crate will materialize as a dense matrix.
pub const MAX_DENSE_SIDE: usize = 16_384;

/// Number of singular values above `RANK_TOLERANCE * sigma_1`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let top = sv.iter().cloned().fold(0.0_f64, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * top).count()
}

/// Expected-observation matrix `M` with rank bound `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrix {
    k: usize,
    r: usize,
    kind: ModelKind,
    entries: Entries,
}

impl ModelMatrix {
    /// Validates entry ranges for `kind` and, for dense storage, the rank
    /// bound. Sparse (very large) models skip the rank check.
    pub fn new(r: usize, kind: ModelKind, entries: Entries) -> Result<Self> {
        kind.validate()?;
        let k = entries.k();
        if k == 0 || r == 0 {
            return Err(Error::InvalidModel("k and r must be positive".into()));
        }
        let cap = kind.entry_cap();
        let mut bad = None;
        entries.for_each_nonzero(|i, j, v| {
            if bad.is_none() && (!v.is_finite() || v < 0.0 || cap.is_some_and(|c| v > c * (1.0 + 1e-12))) {
                bad = Some((i, j, v));
            }
        });
        if let Some((i, j, v)) = bad {
            return Err(Error::InvalidModel(format!(
                "entry ({i}, {j}) = {v} outside the range allowed for {}",
                kind.name()
            )));
        }
        if let ModelKind::Distribution { samples } = kind {
            let total = entries.l1();
            if (total - samples as f64).abs() > 1e-6 * (samples as f64) {
                return Err(Error::InvalidModel(format!(
                    "distribution entries sum to {total}, expected {samples}"
                )));
            }
        }
        if let Entries::Dense(m) = &entries {
            let rank = numerical_rank(m);
            if rank > r {
                return Err(Error::InvalidModel(format!(
                    "numerical rank {rank} exceeds bound {r}"
                )));
            }
        }
        Ok(Self {
            k,
            r,
            kind,
            entries,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn entries(&self) -> &Entries {
        &self.entries
    }

    /// `||M||_1`, the expected number of observations.
    pub fn mass(&self) -> f64 {
        self.entries.l1()
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        self.entries.to_dense()
    }
}

/// One draw `X ~ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    k: usize,
    kind: ModelKind,
    entries: Entries,
}

impl Observation {
    pub fn new(kind: ModelKind, entries: Entries) -> Result<Self> {
        kind.validate()?;
        let k = entries.k();
        if k == 0 {
            return Err(Error::InvalidObservation("k must be positive".into()));
        }
        let mut bad = None;
        entries.for_each_nonzero(|i, j, v| {
            let ok = v.is_finite()
                && v >= 0.0
                && match kind {
                    ModelKind::Bernoulli => v == 1.0,
                    ModelKind::Collab { .. } => v <= 1.0,
                    ModelKind::Binomial { trials } => v.fract() == 0.0 && v <= trials as f64,
                    _ => v.fract() == 0.0,
                };
            if bad.is_none() && !ok {
                bad = Some((i, j, v));
            }
        });
        if let Some((i, j, v)) = bad {
            return Err(Error::InvalidObservation(format!(
                "entry ({i}, {j}) = {v} not admissible for {}",
                kind.name()
            )));
        }
        Ok(Self { k, kind, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn entries(&self) -> &Entries {
        &self.entries
    }

    /// `||X||_1`.
    pub fn total(&self) -> f64 {
        self.entries.l1()
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        self.entries.to_dense()
    }
}

/// Row (`wf`) and column (`wb`) regularization weights, all `>= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegWeights {
    pub(crate) wf: Vec<f64>,
    pub(crate) wb: Vec<f64>,
    pub(crate) lambda: f64,
}

impl RegWeights {
    pub fn from_vectors(wf: Vec<f64>, wb: Vec<f64>, lambda: f64) -> Result<Self> {
        if wf.len() != wb.len() {
            return Err(Error::InvalidWeights(format!(
                "row weights have length {}, column weights {}",
                wf.len(),
                wb.len()
            )));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidWeights(format!("lambda {lambda} must be positive")));
        }
        if let Some(w) = wf.iter().chain(&wb).find(|w| !(**w >= 1.0) || !w.is_finite()) {
            return Err(Error::InvalidWeights(format!("weight {w} below 1")));
        }
        Ok(Self { wf, wb, lambda })
    }

    pub fn unit(k: usize) -> Self {
        Self {
            wf: vec![1.0; k],
            wb: vec![1.0; k],
            lambda: 1.0,
        }
    }

    pub fn k(&self) -> usize {
        self.wf.len()
    }

    pub fn wf(&self) -> &[f64] {
        &self.wf
    }

    pub fn wb(&self) -> &[f64] {
        &self.wb
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn total_f(&self) -> f64 {
        self.wf.iter().sum()
    }

    pub fn total_b(&self) -> f64 {
        self.wb.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

/// Leading singular triplets of a matrix, in non-increasing `sigma` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub triplets: Vec<SingularTriplet>,
    pub source_rows_zeroed: RowSet,
}

impl SvdResult {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.triplets.iter().map(|t| t.sigma).collect()
    }

    /// `sum_j sigma_j u_j v_j^T`.
    pub fn reconstruct(&self, k: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(k, k);
        for t in &self.triplets {
            if t.sigma != 0.0 {
                out.ger(t.sigma, &t.u, &t.v, 1.0);
            }
        }
        out
    }

    /// Largest `||A v_j - sigma_j u_j||` over the triplets.
    pub fn max_residual(&self, a: &DMatrix<f64>) -> f64 {
        self.triplets
            .iter()
            .map(|t| (a * &t.v - &t.u * t.sigma).norm())
            .fold(0.0, f64::max)
    }
}

fn default_c() -> f64 {
    1.0
}

fn default_dense_threshold() -> usize {
    2048
}

/// Knobs for Curated SVD: rank, the constants inside `tau` and `W_cn`,
/// restart count and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuratedConfig {
    pub r: usize,
    #[serde(default = "default_c")]
    pub c_tau: f64,
    #[serde(default = "default_c")]
    pub c_w: f64,
    /// `None` means `ceil(log2 k)`.
    #[serde(default)]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Use this as `||M||_1` instead of `||X||_1`.
    #[serde(default)]
    pub n_total_override: Option<f64>,
    #[serde(default = "default_dense_threshold")]
    pub svd_dense_threshold: usize,
}

impl CuratedConfig {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            c_tau: 1.0,
            c_w: 1.0,
            restarts: None,
            seed: 0,
            n_total_override: None,
            svd_dense_threshold: default_dense_threshold(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = Some(restarts);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidConfig("r must be positive".into()));
        }
        if !(self.c_tau > 0.0 && self.c_w > 0.0) {
            return Err(Error::InvalidConfig("c_tau and c_w must be positive".into()));
        }
        if self.restarts == Some(0) {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if self.n_total_override.is_some_and(|n| !(n > 0.0)) {
            return Err(Error::InvalidConfig("n_total_override must be positive".into()));
        }
        if self.svd_dense_threshold == 0 {
            return Err(Error::InvalidConfig("svd_dense_threshold must be positive".into()));
        }
        Ok(())
    }

    /// Effective restart count for dimension `k`.
    pub fn restarts_for(&self, k: usize) -> usize {
        self.restarts
            .unwrap_or_else(|| (k.max(2) as f64).log2().ceil() as usize)
            .max(1)
    }
}

/// Average expected observations per row, `||M||_1 / k`, estimated from
/// `||X||_1` unless the configuration supplies the true total.
pub fn n_avg(obs: &Observation, cfg: &CuratedConfig) -> Result<f64> {
    let k = obs.k() as f64;
    match cfg.n_total_override {
        Some(total) => Ok(total / k),
        None => {
            let total = obs.total();
            if total == 0.0 {
                Err(Error::EmptyObservation)
            } else {
                Ok(total / k)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_obs(k: usize, triplets: Vec<(usize, usize, f64)>) -> Observation {
        Observation::new(ModelKind::Poisson, Entries::from_triplets(k, triplets).unwrap()).unwrap()
    }

    #[test]
    fn n_avg_from_observation_total() {
        let obs = poisson_obs(100, vec![(0, 0, 150.0), (3, 7, 50.0)]);
        assert_eq!(n_avg(&obs, &CuratedConfig::new(1)).unwrap(), 2.0);
    }

    #[test]
    fn n_avg_prefers_override() {
        let obs = poisson_obs(100, vec![(0, 0, 1.0)]);
        let mut cfg = CuratedConfig::new(1);
        cfg.n_total_override = Some(300.0);
        assert_eq!(n_avg(&obs, &cfg).unwrap(), 3.0);
    }

    #[test]
    fn n_avg_rejects_empty() {
        let obs = poisson_obs(100, vec![]);
        assert!(matches!(
            n_avg(&obs, &CuratedConfig::new(1)),
            Err(Error::EmptyObservation)
        ));
    }

    #[test]
    fn model_range_checks() {
        let e = Entries::dense(DMatrix::from_element(2, 2, 1.5)).unwrap();
        assert!(ModelMatrix::new(1, ModelKind::Bernoulli, e.clone()).is_err());
        assert!(ModelMatrix::new(1, ModelKind::Poisson, e.clone()).is_ok());
        assert!(ModelMatrix::new(1, ModelKind::Binomial { trials: 1 }, e.clone()).is_err());
        assert!(ModelMatrix::new(1, ModelKind::Binomial { trials: 2 }, e.clone()).is_ok());
        assert!(ModelMatrix::new(1, ModelKind::Collab { p: 0.5 }, e.clone()).is_err());
        assert!(ModelMatrix::new(1, ModelKind::Distribution { samples: 6 }, e.clone()).is_ok());
        assert!(ModelMatrix::new(1, ModelKind::Distribution { samples: 7 }, e).is_err());
        let neg = Entries::dense(DMatrix::from_element(2, 2, -0.1)).unwrap();
        assert!(ModelMatrix::new(1, ModelKind::Poisson, neg).is_err());
    }

    #[test]
    fn model_rank_bound_enforced() {
        let e = Entries::dense(DMatrix::identity(3, 3)).unwrap();
        assert!(ModelMatrix::new(2, ModelKind::Poisson, e.clone()).is_err());
        assert!(ModelMatrix::new(3, ModelKind::Poisson, e).is_ok());
    }

    #[test]
    fn observation_admissibility() {
        let frac = Entries::from_triplets(2, vec![(0, 0, 0.5)]).unwrap();
        assert!(Observation::new(ModelKind::Poisson, frac.clone()).is_err());
        assert!(Observation::new(ModelKind::Collab { p: 0.2 }, frac).is_ok());
        let two = Entries::from_triplets(2, vec![(0, 1, 2.0)]).unwrap();
        assert!(Observation::new(ModelKind::Bernoulli, two.clone()).is_err());
        assert!(Observation::new(ModelKind::Binomial { trials: 1 }, two.clone()).is_err());
        assert!(Observation::new(ModelKind::Binomial { trials: 2 }, two).is_ok());
    }

    #[test]
    fn sparse_storage_above_limit() {
        let k = 3000;
        let e = Entries::from_triplets(k, vec![(2999, 1, 2.0), (0, 0, 1.0), (0, 0, 1.0)]).unwrap();
        assert!(matches!(e, Entries::Sparse(_)));
        assert_eq!(e.nonzeros(), vec![(0, 0, 2.0), (2999, 1, 2.0)]);
        assert_eq!(e.get(2999, 1), 2.0);
        assert_eq!(e.get(5, 5), 0.0);
        assert_eq!(e.row_l1()[2999], 2.0);
        let small = Entries::from_triplets(4, vec![(1, 2, 3.0)]).unwrap();
        assert!(matches!(small, Entries::Dense(_)));
    }

    #[test]
    fn sparse_products_match_dense() {
        let s = SparseMatrix::from_triplets(3, vec![(0, 1, 2.0), (2, 0, -1.0), (1, 1, 4.0)]).unwrap();
        let d = Entries::Sparse(s.clone()).to_dense().unwrap();
        let b = DMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64 + 0.5);
        assert_eq!(s.mul_dense(&b), &d * &b);
        assert_eq!(s.tr_mul_dense(&b), d.transpose() * &b);
    }

    #[test]
    fn weights_reject_below_one() {
        assert!(RegWeights::from_vectors(vec![1.0, 0.5], vec![1.0, 1.0], 1.0).is_err());
        assert!(RegWeights::from_vectors(vec![1.0], vec![1.0, 1.0], 1.0).is_err());
        assert!(RegWeights::from_vectors(vec![1.0], vec![2.0], 0.0).is_err());
    }

    #[test]
    fn restarts_default_is_log2_k() {
        let cfg = CuratedConfig::new(2);
        assert_eq!(cfg.restarts_for(256), 8);
        assert_eq!(cfg.restarts_for(1000), 10);
        assert_eq!(cfg.restarts_for(1), 1);
        assert_eq!(cfg.clone().with_restarts(3).restarts_for(256), 3);
    }
}
