//! Curated SVD.
//!
//! The observation matrix is regularized with the degree weights `w̄`, then
//! rows are zeroed until no light row subset (total weight at most `W_cn`)
//! carries more than `8 tau^2` of any of the top `2r` singular components.
//! Finding the heaviest light subset is a 0-1 knapsack over row impacts,
//! solved approximately by the greedy half-approximation. Once the zeroed
//! set stops growing the estimate is the de-regularized rank-`2r` truncation
//! of what is left.
//!
//! Each pass is randomized (the row to zero is sampled proportionally to its
//! impact-to-weight ratio), so the full procedure runs several restarts and
//! keeps the one that zeroed the least weight.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::regularization::{compute_weights, deregularize, regularize, weight_of_rows};
use crate::spectral::{truncated_svd_with, zero_rows, SvdOptions};
use crate::types::{n_avg, CuratedConfig, Observation, RegWeights, RowSet, SvdResult};

/// Spectral-noise threshold `tau`, subset weight capacity `W_cn` and the
/// per-component impact cutoff `8 tau^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub tau: f64,
    pub w_cn: f64,
    pub impact_cutoff: f64,
}

impl Thresholds {
    pub fn new(k: usize, r: usize, n_avg: f64, c_tau: f64, c_w: f64) -> Self {
        let rn = r as f64 * n_avg;
        let tau = c_tau * n_avg.sqrt() * rn.ln().max(1.0);
        let w_cn = (c_w * k as f64 / (rn * rn)).max(1.0);
        Self {
            tau,
            w_cn,
            impact_cutoff: 8.0 * tau * tau,
        }
    }

    pub fn from_config(k: usize, n_avg: f64, cfg: &CuratedConfig) -> Self {
        Self::new(k, cfg.r, n_avg, cfg.c_tau, cfg.c_w)
    }
}

/// Items chosen by a knapsack routine, with their total value and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub items: Vec<usize>,
    pub value: f64,
    pub weight: f64,
}

impl Selection {
    fn empty() -> Self {
        Self {
            items: Vec::new(),
            value: 0.0,
            weight: 0.0,
        }
    }
}

/// Greedy half-approximation for 0-1 knapsack: fill by value/weight ratio
/// (ties to the lower index), skipping items that overflow, then return
/// the better of that bundle and the best single feasible item.
pub fn greedy_knapsack(values: &[f64], weights: &[f64], capacity: f64) -> Selection {
    assert_eq!(values.len(), weights.len(), "values and weights differ in length");
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = values[a] / weights[a];
        let rb = values[b] / weights[b];
        rb.total_cmp(&ra).then(a.cmp(&b))
    });

    let mut bundle = Selection::empty();
    for &i in &order {
        if bundle.weight + weights[i] <= capacity {
            bundle.items.push(i);
            bundle.weight += weights[i];
            bundle.value += values[i];
        }
    }

    let best_single = (0..values.len())
        .filter(|&i| weights[i] <= capacity)
        .fold(None::<usize>, |best, i| match best {
            Some(b) if values[b] >= values[i] => Some(b),
            _ => Some(i),
        });
    if let Some(i) = best_single {
        if values[i] > bundle.value {
            return Selection {
                items: vec![i],
                value: values[i],
                weight: weights[i],
            };
        }
    }
    bundle.items.sort_unstable();
    bundle
}

/// Best light subset (weight at most `capacity`) among rows outside
/// `zeroed`, by greedy knapsack over `impacts`. Returned items are row
/// indices.
pub fn heaviest_light_subset(impacts: &[f64], wf: &[f64], zeroed: &RowSet, capacity: f64) -> Selection {
    let candidates: Vec<usize> = (0..impacts.len())
        .filter(|i| !zeroed.contains(i) && wf[*i] <= capacity)
        .collect();
    let values: Vec<f64> = candidates.iter().map(|&i| impacts[i]).collect();
    let weights: Vec<f64> = candidates.iter().map(|&i| wf[i]).collect();
    let mut pick = greedy_knapsack(&values, &weights, capacity);
    for item in &mut pick.items {
        *item = candidates[*item];
    }
    pick
}

/// Outcome of one Row-Deletion call.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDeletionReport {
    pub added: Vec<usize>,
    /// Impact of the last greedy subset, the one that fell below the cutoff.
    pub terminal_impact: f64,
}

/// Row-Deletion for one component `sigma u`.
///
/// While the greedy light subset `I` of the surviving rows has impact above
/// `cutoff`, one row of `I` is zeroed, drawn with probability proportional
/// to `u(i)^2 / wf(i)`.
pub fn row_deletion<R: Rng + ?Sized>(
    sigma: f64,
    u: &DVector<f64>,
    w: &RegWeights,
    zeroed: &mut RowSet,
    cutoff: f64,
    capacity: f64,
    rng: &mut R,
) -> RowDeletionReport {
    let s2 = sigma * sigma;
    let impacts: Vec<f64> = u.iter().map(|x| s2 * x * x).collect();
    let mut added = Vec::new();
    loop {
        let pick = heaviest_light_subset(&impacts, w.wf(), zeroed, capacity);
        if pick.value <= cutoff {
            return RowDeletionReport {
                added,
                terminal_impact: pick.value,
            };
        }
        let ratios: Vec<f64> = pick.items.iter().map(|&i| impacts[i] / w.wf()[i]).collect();
        let total: f64 = ratios.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut chosen = *pick.items.last().expect("subset above cutoff is nonempty");
        for (&i, &ratio) in pick.items.iter().zip(&ratios) {
            if target < ratio {
                chosen = i;
                break;
            }
            target -= ratio;
        }
        zeroed.insert(chosen);
        added.push(chosen);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuratedOutcome {
    /// Estimate of `M`, rank at most `2r`.
    pub estimate: DMatrix<f64>,
    pub zeroed_rows: RowSet,
    /// `sum_{i in zeroed_rows} wf(i)`.
    pub zeroed_weight: f64,
    /// Number of outer passes, including the final one that added nothing.
    pub iterations: usize,
    pub restart_index: usize,
    pub thresholds: Thresholds,
    pub n_avg: f64,
    pub weights: RegWeights,
    /// Terminal greedy impact per retained component, from the final pass.
    pub certificate: Vec<f64>,
    /// Truncated SVD of the regularized, row-zeroed matrix from the final pass.
    pub final_svd: SvdResult,
}

impl CuratedOutcome {
    /// Every component's terminal greedy impact is at most `8 tau^2`.
    pub fn objective_i_holds(&self) -> bool {
        self.certificate
            .iter()
            .all(|&v| v <= self.thresholds.impact_cutoff)
    }
}

fn zero_outcome(k: usize, cfg: &CuratedConfig, restart_index: usize) -> CuratedOutcome {
    let n = cfg.n_total_override.map_or(0.0, |t| t / k as f64);
    CuratedOutcome {
        estimate: DMatrix::zeros(k, k),
        zeroed_rows: RowSet::new(),
        zeroed_weight: 0.0,
        iterations: 0,
        restart_index,
        thresholds: Thresholds::from_config(k, n.max(f64::MIN_POSITIVE), cfg),
        n_avg: n,
        weights: RegWeights::unit(k),
        certificate: Vec::new(),
        final_svd: SvdResult {
            triplets: Vec::new(),
            source_rows_zeroed: RowSet::new(),
        },
    }
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One randomized pass of Curated SVD with the given seed.
pub fn curated_svd_once(obs: &Observation, cfg: &CuratedConfig, restart_seed: u64) -> Result<CuratedOutcome> {
    run_once(obs, cfg, restart_seed, 0)
}

fn run_once(obs: &Observation, cfg: &CuratedConfig, restart_seed: u64, restart_index: usize) -> Result<CuratedOutcome> {
    cfg.validate()?;
    let k = obs.k();
    if obs.total() == 0.0 {
        return Ok(zero_outcome(k, cfg, restart_index));
    }
    let n = n_avg(obs, cfg)?;
    let weights = compute_weights(obs, n)?;
    let thresholds = Thresholds::from_config(k, n, cfg);
    let t = (2 * cfg.r).min(k);
    let x = obs.to_dense()?;
    let regularized = regularize(&x, &weights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed);
    let opts = SvdOptions {
        dense_threshold: cfg.svd_dense_threshold,
        seed: mix_seed(restart_seed, 0x51d),
    };

    let mut zeroed = RowSet::new();
    let mut iterations = 0;
    let (svd, certificate) = loop {
        iterations += 1;
        let current = zero_rows(&regularized, &zeroed);
        let mut svd = truncated_svd_with(&current, t, &opts)?;
        svd.source_rows_zeroed = zeroed.clone();
        let before = zeroed.len();
        let mut certificate = Vec::with_capacity(t);
        for triplet in &svd.triplets {
            let report = row_deletion(
                triplet.sigma,
                &triplet.u,
                &weights,
                &mut zeroed,
                thresholds.impact_cutoff,
                thresholds.w_cn,
                &mut rng,
            );
            certificate.push(report.terminal_impact);
        }
        // The zeroed set only grows, so this terminates within k + 1 passes.
        if zeroed.len() == before {
            break (svd, certificate);
        }
    };

    let mut estimate = deregularize(&svd.reconstruct(k), &weights)?;
    // Exact arithmetic gives zero rows here; clear the rounding residue.
    for &i in &zeroed {
        estimate.row_mut(i).fill(0.0);
    }
    Ok(CuratedOutcome {
        estimate,
        zeroed_weight: weight_of_rows(&weights, &zeroed),
        zeroed_rows: zeroed,
        iterations,
        restart_index,
        thresholds,
        n_avg: n,
        weights,
        certificate,
        final_svd: svd,
    })
}

/// Curated SVD with restarts: seeds `seed + 0 .. seed + restarts - 1`, keeping
/// the run with the smallest zeroed weight (ties to the lowest restart).
pub fn curated_svd(obs: &Observation, cfg: &CuratedConfig) -> Result<CuratedOutcome> {
    cfg.validate()?;
    let restarts = cfg.restarts_for(obs.k());
    let first = run_once(obs, cfg, cfg.seed, 0)?;
    // Nothing can beat zero weight, and ties go to the lowest index.
    if restarts == 1 || first.zeroed_weight == 0.0 {
        return Ok(first);
    }
    let rest: Vec<CuratedOutcome> = (1..restarts)
        .into_par_iter()
        .map(|i| run_once(obs, cfg, cfg.seed.wrapping_add(i as u64), i))
        .collect::<Result<_>>()?;
    Ok(std::iter::once(first)
        .chain(rest)
        .reduce(|best, next| if next.zeroed_weight < best.zeroed_weight { next } else { best })
        .expect("at least one restart"))
}

/// Per-restart zeroed weights, for diagnostics and tests of the selection rule.
pub fn restart_weights(obs: &Observation, cfg: &CuratedConfig) -> Result<Vec<f64>> {
    let restarts = cfg.restarts_for(obs.k());
    (0..restarts)
        .into_par_iter()
        .map(|i| run_once(obs, cfg, cfg.seed.wrapping_add(i as u64), i).map(|o| o.zeroed_weight))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Entries, ModelKind};

    #[test]
    fn knapsack_examples() {
        let s = greedy_knapsack(&[10.0], &[1.0], 1.0);
        assert_eq!(s.items, vec![0]);
        assert_eq!(s.value, 10.0);
        assert!(greedy_knapsack(&[10.0, 3.0], &[1.0, 2.0], 0.0).items.is_empty());
        let s = greedy_knapsack(&[6.0, 5.0, 5.0], &[3.0, 2.0, 2.0], 4.0);
        assert_eq!(s.items, vec![1, 2]);
        assert_eq!(s.value, 10.0);
        assert!(greedy_knapsack(&[1.0], &[2.0], 1.5).items.is_empty());
    }

    #[test]
    fn knapsack_falls_back_to_best_single_item() {
        // ratio order picks the small item first, which blocks the big one
        let s = greedy_knapsack(&[2.0, 90.0], &[1.0, 100.0], 100.0);
        assert_eq!(s.items, vec![1]);
        assert_eq!(s.value, 90.0);
    }

    #[test]
    fn thresholds_formula() {
        let t = Thresholds::new(256, 2, 16.0, 1.0, 1.0);
        assert!((t.tau - 4.0 * (32.0f64).ln()).abs() < 1e-12);
        assert_eq!(t.w_cn, 1.0);
        assert!((t.impact_cutoff - 8.0 * t.tau * t.tau).abs() < 1e-9);
        // ln clamp and W_cn above 1
        let t = Thresholds::new(10_000, 1, 1.5, 2.0, 1.0);
        assert!((t.tau - 2.0 * 1.5f64.sqrt()).abs() < 1e-12);
        assert!((t.w_cn - 10_000.0 / 2.25).abs() < 1e-9);
    }

    #[test]
    fn row_deletion_no_op_below_cutoff() {
        let u = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let w = RegWeights::unit(3);
        let mut zeroed = RowSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rep = row_deletion(1.0, &u, &w, &mut zeroed, 1.0, 3.0, &mut rng);
        assert!(zeroed.is_empty());
        assert!(rep.added.is_empty());
        assert!((rep.terminal_impact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn row_deletion_single_candidate() {
        let u = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        let w = RegWeights::from_vectors(vec![1.0, 2.0, 5.0, 5.0], vec![1.0; 4], 1.0).unwrap();
        for seed in 0..20 {
            let mut zeroed = RowSet::new();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = row_deletion(10.0, &u, &w, &mut zeroed, 50.0, 2.0, &mut rng);
            assert_eq!(rep.added, vec![1]);
            assert_eq!(rep.terminal_impact, 0.0);
        }
    }

    #[test]
    fn zero_observation_outcome() {
        let obs = Observation::new(ModelKind::Poisson, Entries::from_triplets(5, vec![]).unwrap()).unwrap();
        let out = curated_svd(&obs, &CuratedConfig::new(1)).unwrap();
        assert_eq!(out.estimate, DMatrix::zeros(5, 5));
        assert!(out.zeroed_rows.is_empty());
    }

    #[test]
    fn single_restart_matches_once() {
        let x = DMatrix::from_fn(12, 12, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let obs = Observation::new(ModelKind::Poisson, Entries::dense(x).unwrap()).unwrap();
        let cfg = CuratedConfig::new(1).with_seed(4).with_restarts(1);
        assert_eq!(curated_svd(&obs, &cfg).unwrap(), curated_svd_once(&obs, &cfg, 4).unwrap());
    }
}
