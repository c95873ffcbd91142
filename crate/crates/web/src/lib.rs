//! WebAssembly bindings for the browser demo in `www/`. Matrices cross the
//! boundary as row-major `Vec<f64>`; seeds are `u32` so JavaScript can pass
//! plain numbers.

use lowrank::bench::{trial_seed, zero_blocks, Baseline};
use lowrank::models::ModelShape;
use lowrank::oracles::normalized_l1;
use lowrank::{curated_svd, gen_model, sample, CuratedConfig, ModelKind, ModelSpec};
use nalgebra::DMatrix;
use wasm_bindgen::prelude::*;

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn js(e: lowrank::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// One Poisson draw from a random rank-`r` model, recovered by Curated SVD
/// and by a plain rank-`2r` truncation for comparison.
#[wasm_bindgen(getter_with_clone)]
pub struct Recovery {
    pub k: usize,
    pub model: Vec<f64>,
    pub observation: Vec<f64>,
    pub estimate: Vec<f64>,
    pub baseline: Vec<f64>,
    /// Row weights `max(1, ||X_i*||_1 / n_avg)`.
    pub row_weights: Vec<f64>,
    pub zeroed_rows: Vec<u32>,
    pub n_avg: f64,
    pub curated_error: f64,
    pub baseline_error: f64,
}

#[wasm_bindgen]
pub fn recover(k: usize, r: usize, mass: f64, heavy_rows: usize, boost: f64, seed: u32) -> Result<Recovery, JsError> {
    let shape = if heavy_rows == 0 {
        ModelShape::RandomFactors
    } else {
        ModelShape::HeavyRows {
            count: heavy_rows,
            boost,
        }
    };
    let model = gen_model(&ModelSpec {
        shape,
        observation: ModelKind::Poisson,
        k,
        r,
        target_mass: mass,
        seed: seed as u64,
    })
    .map_err(js)?;
    let x = sample(&model, trial_seed(seed as u64, 0, 0)).map_err(js)?;
    let cfg = CuratedConfig::new(r).with_seed(seed as u64);
    let out = curated_svd(&x, &cfg).map_err(js)?;
    let plain = Baseline::Plain2rSvd.estimate(&x, r, &cfg).map_err(js)?;
    Ok(Recovery {
        k,
        model: row_major(&model.to_dense().map_err(js)?),
        observation: row_major(&x.to_dense().map_err(js)?),
        curated_error: normalized_l1(&model, &out.estimate).map_err(js)?,
        baseline_error: normalized_l1(&model, &plain).map_err(js)?,
        estimate: row_major(&out.estimate),
        baseline: row_major(&plain),
        row_weights: out.weights.wf().to_vec(),
        zeroed_rows: out.zeroed_rows.iter().map(|&i| i as u32).collect(),
        n_avg: out.n_avg,
    })
}

/// Zero-block counts of the block-diagonal counterexample over `trials`
/// Bernoulli draws.
#[wasm_bindgen(getter_with_clone)]
pub struct ZeroBlocks {
    pub counts: Vec<u32>,
    pub empirical_probability: f64,
    pub expected_probability: f64,
}

#[wasm_bindgen]
pub fn zero_block_scan(k: usize, n_max: usize, trials: u32, seed: u32) -> Result<ZeroBlocks, JsError> {
    let model = gen_model(&ModelSpec {
        shape: ModelShape::Counterexample { n_max },
        observation: ModelKind::Bernoulli,
        k,
        r: 1,
        target_mass: (k * n_max) as f64,
        seed: 0,
    })
    .map_err(js)?;
    // sequential: browsers get no worker pool
    let counts = (0..trials)
        .map(|t| {
            sample(&model, trial_seed(seed as u64, 0, t as u64)).map(|x| zero_blocks(&x, n_max) as u32)
        })
        .collect::<lowrank::Result<Vec<_>>>()
        .map_err(js)?;
    let found = counts.iter().filter(|&&c| c > 0).count();
    let q = 0.5f64.powi((4 * n_max * n_max) as i32);
    let blocks = (k / (2 * n_max)) as f64;
    Ok(ZeroBlocks {
        empirical_probability: found as f64 / trials.max(1) as f64,
        expected_probability: -(blocks * (-q).ln_1p()).exp_m1(),
        counts,
    })
}
