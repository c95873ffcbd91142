//! Seeded randomized checks of the linear-algebra inequalities the recovery
//! guarantees rest on. Each suite draws unit-scale instances, evaluates both
//! sides directly and records the worst excess `lhs - rhs`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curated::greedy_knapsack;
use crate::oracles::{brute_knapsack, heavy_subset_count};
use crate::regularization::{compute_weights, regularize};
use crate::spectral::{impact, rw_svd, singular_values, truncated_svd, zero_rows};
use crate::types::{Entries, ModelKind, Observation, RegWeights, RowSet};

/// Absolute slack allowed on unit-scale inputs.
pub const LEMMA_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub name: &'static str,
    pub instances: usize,
    pub violations: usize,
    /// Largest `lhs - rhs` seen; negative when every instance had room.
    pub worst_excess: f64,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn run_suite(
    name: &'static str,
    seed: u64,
    instances: usize,
    slack: f64,
    mut instance: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..instances {
        let excess = instance(&mut rng);
        if !(excess <= slack) {
            violations += 1;
        }
        worst = worst.max(excess);
    }
    LemmaReport {
        name,
        instances,
        violations,
        worst_excess: worst,
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Unit-scale rank-`r` matrix: product of uniform factors scaled by `1/r`.
fn low_rank(rng: &mut ChaCha8Rng, k: usize, r: usize) -> DMatrix<f64> {
    let u = uniform(rng, k, r);
    let v = uniform(rng, r, k);
    u * v / r as f64
}

fn weights(rng: &mut ChaCha8Rng, k: usize) -> RegWeights {
    let wf = (0..k).map(|_| rng.random_range(1.0..5.0)).collect();
    let wb = (0..k).map(|_| rng.random_range(1.0..5.0)).collect();
    RegWeights::from_vectors(wf, wb, 1.0).expect("weights >= 1")
}

fn l1(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

fn norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

fn random_rows(rng: &mut ChaCha8Rng, k: usize) -> RowSet {
    (0..k).filter(|_| rng.random_bool(0.5)).collect()
}

/// `||R(A, w)|| <= sqrt(max_i ||A_i*||_1 / wf(i) * max_j ||A_*j||_1 / wb(j))`,
/// with the regularizer supplied by the caller.
pub fn dampcon_with(
    seed: u64,
    instances: usize,
    reg: impl Fn(&DMatrix<f64>, &RegWeights) -> DMatrix<f64>,
) -> LemmaReport {
    run_suite("dampcon", seed, instances, LEMMA_SLACK, |rng| {
        let k = rng.random_range(2..12);
        let a = uniform(rng, k, k);
        let w = weights(rng, k);
        let row = (0..k).map(|i| a.row(i).abs().sum() / w.wf()[i]).fold(0.0, f64::max);
        let col = (0..k).map(|j| a.column(j).abs().sum() / w.wb()[j]).fold(0.0, f64::max);
        norm(&reg(&a, &w)) - (row * col).sqrt()
    })
}

pub fn dampcon(seed: u64, instances: usize) -> LemmaReport {
    dampcon_with(seed, instances, |a, w| regularize(a, w).expect("matching dimensions"))
}

/// With data weights at `lambda = n_avg`: `||R(X, w̄)|| <= n_avg`.
pub fn regularized_norm_bound(seed: u64, instances: usize) -> LemmaReport {
    run_suite("regularized_norm_bound", seed, instances, LEMMA_SLACK, |rng| {
        let k = rng.random_range(2..14);
        let x = count_matrix(rng, k);
        let n_avg = x.total() / k as f64;
        let w = compute_weights(&x, n_avg).expect("positive lambda");
        let xd = x.to_dense().expect("small");
        // scale both sides to unit size
        (norm(&regularize(&xd, &w).expect("dims")) - n_avg) / n_avg
    })
}

fn count_matrix(rng: &mut ChaCha8Rng, k: usize) -> Observation {
    let heavy = rng.random_range(0..k);
    let triplets = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let scale = if i == heavy { 20 } else { 3 };
            let v = rng.random_range(0..=scale);
            (v > 0 && rng.random_bool(0.6)).then_some((i, j, v as f64))
        })
        .collect::<Vec<_>>();
    let mut triplets = triplets;
    triplets.push((heavy, 0, 1.0));
    Observation::new(ModelKind::Poisson, Entries::from_triplets(k, triplets).expect("in range"))
        .expect("integer counts")
}

/// With `lambda = ||X||_1 / k`, total row and column weight is at most `2k`.
pub fn total_weight(seed: u64, instances: usize) -> LemmaReport {
    run_suite("total_weight", seed, instances, LEMMA_SLACK, |rng| {
        let k = rng.random_range(2..20);
        let x = count_matrix(rng, k);
        let w = compute_weights(&x, x.total() / k as f64).expect("positive lambda");
        let bound = 2.0 * k as f64;
        (w.total_f().max(w.total_b()) - bound) / bound
    })
}

/// Rank-`r` `A`: `||D^{1/2}(wf) A D^{1/2}(wb)||_1 <= sqrt(r sum wf sum wb) ||A||`.
pub fn spll(seed: u64, instances: usize) -> LemmaReport {
    run_suite("spll", seed, instances, LEMMA_SLACK, |rng| {
        let k = rng.random_range(3..12);
        let r = rng.random_range(1..=k.min(4));
        let a = low_rank(rng, k, r);
        let w = weights(rng, k);
        let scaled = DMatrix::from_fn(k, k, |i, j| a[(i, j)] * (w.wf()[i] * w.wb()[j]).sqrt());
        let rhs = (r as f64 * w.total_f() * w.total_b()).sqrt() * norm(&a);
        l1(&scaled) - rhs
    })
}

/// For a row partition `I_1 .. I_t`: `||A||^2 <= sum_j ||A_{I_j}||^2`.
pub fn subnorm(seed: u64, instances: usize) -> LemmaReport {
    run_suite("subnorm", seed, instances, LEMMA_SLACK, |rng| {
        let k = rng.random_range(2..12);
        let a = uniform(rng, k, k);
        let parts = rng.random_range(1..=k);
        let mut rows: Vec<usize> = (0..k).collect();
        rows.shuffle(rng);
        let mut blocks = vec![RowSet::new(); parts];
        for (idx, i) in rows.into_iter().enumerate() {
            blocks[idx % parts].insert(i);
        }
        let all: RowSet = (0..k).collect();
        let pieces: f64 = blocks
            .iter()
            .map(|b| {
                let outside: RowSet = all.difference(b).copied().collect();
                norm(&zero_rows(&a, &outside)).powi(2)
            })
            .sum();
        norm(&a).powi(2) - pieces
    })
}

/// Zeroing rows and columns never raises any singular value.
pub fn interlacing(seed: u64, instances: usize) -> LemmaReport {
    run_suite("interlacing", seed, instances, LEMMA_SLACK, |rng| {
        let k = rng.random_range(2..12);
        let a = uniform(rng, k, k);
        let rows = random_rows(rng, k);
        let cols = random_rows(rng, k);
        let mut sub = zero_rows(&a, &rows);
        for &j in &cols {
            sub.column_mut(j).fill(0.0);
        }
        let full = singular_values(&a);
        singular_values(&sub)
            .iter()
            .zip(&full)
            .map(|(s, f)| s - f)
            .fold(f64::NEG_INFINITY, f64::max)
    })
}

/// `sigma_{i+j-1}(A + B) <= sigma_i(A) + sigma_j(B)`.
pub fn weyl(seed: u64, instances: usize) -> LemmaReport {
    run_suite("weyl", seed, instances, LEMMA_SLACK, |rng| {
        let k = rng.random_range(2..10);
        let a = uniform(rng, k, k);
        let b = uniform(rng, k, k);
        let (sa, sb, ss) = (singular_values(&a), singular_values(&b), singular_values(&(&a + &b)));
        let mut worst = f64::NEG_INFINITY;
        for i in 0..k {
            for j in 0..k - i {
                worst = worst.max(ss[i + j] - sa[i] - sb[j]);
            }
        }
        worst
    })
}

/// `sigma_j^2 sum_{i in I} u_j(i)^2 = ||A_I v_j||^2`.
pub fn impact_identity(seed: u64, instances: usize) -> LemmaReport {
    run_suite("impact_identity", seed, instances, LEMMA_SLACK, |rng| {
        let k = rng.random_range(2..12);
        let a = uniform(rng, k, k);
        let t = rng.random_range(1..=k);
        let svd = truncated_svd(&a, t).expect("t <= k");
        let rows = random_rows(rng, k);
        let outside: RowSet = (0..k).filter(|i| !rows.contains(i)).collect();
        let restricted = zero_rows(&a, &outside);
        (0..t)
            .map(|j| {
                let direct = (&restricted * &svd.triplets[j].v).norm_squared();
                (impact(&svd, &rows, j).expect("j < t") - direct).abs()
            })
            .fold(0.0, f64::max)
    })
}

/// Rank-`r` `A`, any `B`: `||A - B^(r,w)||_1 <= sqrt(r sum wf sum wb) ||R(A - B, w)||`.
pub fn recovery(seed: u64, instances: usize) -> LemmaReport {
    run_suite("recovery", seed, instances, LEMMA_SLACK, |rng| {
        let k = rng.random_range(3..12);
        let r = rng.random_range(1..=k.min(3));
        let a = low_rank(rng, k, r);
        let noise_scale = rng.random_range(0.0..1.0);
        let b = &a + uniform(rng, k, k) * noise_scale;
        let w = weights(rng, k);
        let est = rw_svd(&b, r, &w).expect("r <= k");
        let lhs = l1(&(&a - est));
        let rhs = (r as f64 * w.total_f() * w.total_b()).sqrt()
            * norm(&regularize(&(&a - &b), &w).expect("dims"));
        lhs - rhs
    })
}

/// `A = B + C` with `sigma_{r+1}(B) <= beta` and `||C v_i|| <= 2 beta` on
/// `A`'s top `2r` right singular vectors gives `sigma_{2r}(A) <= 4 beta`.
/// `beta` is taken as the smallest value meeting both hypotheses.
pub fn bad_part(seed: u64, instances: usize) -> LemmaReport {
    run_suite("bad_part", seed, instances, LEMMA_SLACK, |rng| {
        let r = rng.random_range(1..=3);
        let k = rng.random_range(2 * r..12.max(2 * r + 1));
        let b = low_rank(rng, k, r) + uniform(rng, k, k) * rng.random_range(0.0..0.2);
        let c = uniform(rng, k, k) * rng.random_range(0.0..0.5);
        let a = &b + &c;
        let svd = truncated_svd(&a, 2 * r).expect("2r <= k");
        let c_part = svd
            .triplets
            .iter()
            .map(|t| (&c * &t.v).norm() / 2.0)
            .fold(0.0, f64::max);
        let beta = singular_values(&b)[r].max(c_part);
        svd.triplets[2 * r - 1].sigma - 4.0 * beta
    })
}

/// With `sigma_1(A) <= alpha` and `sigma_{r+1}(A) <= beta`, at most
/// `(r alpha / beta)^2` disjoint row subsets have `||A_I|| > 2 beta`.
pub fn heavy_subsets(seed: u64, instances: usize) -> LemmaReport {
    run_suite("heavy_subsets", seed, instances, LEMMA_SLACK, |rng| {
        let k = rng.random_range(4..14);
        let r = rng.random_range(1..=2);
        let a = low_rank(rng, k, r) + uniform(rng, k, k) * rng.random_range(0.005..0.1);
        let s = singular_values(&a);
        let (alpha, beta) = (s[0], s[r]);
        let count = heavy_subset_count(&a, beta).expect("k within cap") as f64;
        count - (r as f64 * alpha / beta).powi(2)
    })
}

/// Greedy knapsack value is at least half the exhaustive optimum.
pub fn knapsack_half(seed: u64, instances: usize) -> LemmaReport {
    run_suite("knapsack_half", seed, instances, LEMMA_SLACK, |rng| {
        let n = rng.random_range(1..=15);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..6.0)).collect();
        let capacity = rng.random_range(0.0..(3.0 * n as f64));
        let greedy = greedy_knapsack(&values, &weights, capacity);
        let (_, best) = brute_knapsack(&values, &weights, capacity).expect("n <= 15");
        0.5 * best - greedy.value
    })
}

/// Every suite with the given seed and instance count.
pub fn run_all(seed: u64, instances: usize) -> Vec<LemmaReport> {
    vec![
        dampcon(seed, instances),
        regularized_norm_bound(seed.wrapping_add(1), instances),
        total_weight(seed.wrapping_add(2), instances),
        spll(seed.wrapping_add(3), instances),
        subnorm(seed.wrapping_add(4), instances),
        interlacing(seed.wrapping_add(5), instances),
        weyl(seed.wrapping_add(6), instances),
        impact_identity(seed.wrapping_add(7), instances),
        recovery(seed.wrapping_add(8), instances),
        bad_part(seed.wrapping_add(9), instances),
        heavy_subsets(seed.wrapping_add(10), instances.min(100)),
        knapsack_half(seed.wrapping_add(11), instances),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_holds() {
        for report in run_all(7, 200) {
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn dampcon_catches_a_wrong_regularizer() {
        // scaling by w^{+1/2} instead of w^{-1/2}
        let report = dampcon_with(3, 200, |a, w| {
            DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * (w.wf()[i] * w.wb()[j]).sqrt())
        });
        assert!(report.violations > 0);
    }
}
