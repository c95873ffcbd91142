//! Synthetic low-rank model matrices and one-draw samplers for each
//! observation model.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Entries, ModelKind, ModelMatrix, Observation};

/// Shape of the generated expected-observation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ModelShape {
    /// `U V` with `U` (`k x r`) and `V` (`r x k`) i.i.d. uniform on `[0, 1]`.
    RandomFactors,
    /// `r` contiguous communities, `p_in` inside and `p_out` across.
    Sbm { p_in: f64, p_out: f64 },
    /// Random factors with `count` randomly chosen rows multiplied by `boost`.
    HeavyRows { count: usize, boost: f64 },
    /// Block-diagonal all-`1/2` blocks of side `2 n_max`; mass is forced to
    /// `k n_max` and the rank bound to the number of blocks.
    Counterexample { n_max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub shape: ModelShape,
    pub observation: ModelKind,
    pub k: usize,
    pub r: usize,
    /// Desired `||M||_1`.
    pub target_mass: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        self.observation.validate()?;
        if self.k == 0 || self.r == 0 {
            return Err(Error::InvalidModel("k and r must be positive".into()));
        }
        if self.r > self.k {
            return Err(Error::InvalidModel(format!("r = {} exceeds k = {}", self.r, self.k)));
        }
        match self.shape {
            ModelShape::Counterexample { n_max } => {
                if n_max == 0 || self.k % (2 * n_max) != 0 {
                    return Err(Error::InvalidModel(format!(
                        "counterexample needs 2 n_max = {} to divide k = {}",
                        2 * n_max,
                        self.k
                    )));
                }
                if self.observation.entry_cap().is_some_and(|c| c < 0.5) {
                    return Err(Error::InvalidModel(
                        "counterexample entries of 1/2 exceed the model's range".into(),
                    ));
                }
                return Ok(());
            }
            ModelShape::Sbm { p_in, p_out } => {
                if !(p_in >= 0.0 && p_out >= 0.0 && p_in + p_out > 0.0) {
                    return Err(Error::InvalidModel("SBM probabilities must be nonnegative".into()));
                }
            }
            ModelShape::HeavyRows { count, boost } => {
                if count > self.k || !(boost > 0.0) {
                    return Err(Error::InvalidModel(
                        "heavy rows need count <= k and positive boost".into(),
                    ));
                }
            }
            ModelShape::RandomFactors => {}
        }
        if !(self.target_mass > 0.0 && self.target_mass.is_finite()) {
            return Err(Error::InvalidModel("target mass must be positive".into()));
        }
        let k2 = (self.k * self.k) as f64;
        if let Some(cap) = self.observation.entry_cap() {
            if self.target_mass > cap * k2 {
                return Err(Error::InvalidModel(format!(
                    "target mass {} exceeds {} for {}",
                    self.target_mass,
                    cap * k2,
                    self.observation.name()
                )));
            }
        }
        if let ModelKind::Distribution { samples } = self.observation {
            if (self.target_mass - samples as f64).abs() > 1e-9 * samples as f64 {
                return Err(Error::InvalidModel(format!(
                    "distribution model needs target mass equal to n = {samples}"
                )));
            }
        }
        Ok(())
    }
}

fn random_factors(rng: &mut ChaCha8Rng, k: usize, r: usize) -> DMatrix<f64> {
    let u = DMatrix::from_fn(k, r, |_, _| rng.random::<f64>());
    let v = DMatrix::from_fn(r, k, |_, _| rng.random::<f64>());
    u * v
}

/// Generates `M` for `spec`, normalized to the target mass.
pub fn gen_model(spec: &ModelSpec) -> Result<ModelMatrix> {
    spec.validate()?;
    let (k, r) = (spec.k, spec.r);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base = match spec.shape {
        ModelShape::Counterexample { n_max } => return counterexample(spec.observation, k, n_max),
        ModelShape::RandomFactors => random_factors(&mut rng, k, r),
        ModelShape::Sbm { p_in, p_out } => {
            let community = |i: usize| i * r / k;
            DMatrix::from_fn(k, k, |i, j| if community(i) == community(j) { p_in } else { p_out })
        }
        ModelShape::HeavyRows { count, boost } => {
            let mut m = random_factors(&mut rng, k, r);
            for i in sample_indices(&mut rng, k, count) {
                m.row_mut(i).scale_mut(boost);
            }
            m
        }
    };
    let total = base.sum();
    if !(total > 0.0) {
        return Err(Error::InvalidModel("generated matrix is identically zero".into()));
    }
    let m = base * (spec.target_mass / total);
    if let Some(cap) = spec.observation.entry_cap() {
        let max = m.max();
        if max > cap {
            return Err(Error::InvalidModel(format!(
                "target mass not achievable: largest entry {max} exceeds {cap}"
            )));
        }
    }
    ModelMatrix::new(r, spec.observation, Entries::dense(m)?)
}

fn counterexample(kind: ModelKind, k: usize, n_max: usize) -> Result<ModelMatrix> {
    let side = 2 * n_max;
    let blocks = k / side;
    let mut triplets = Vec::with_capacity(k * side);
    for b in 0..blocks {
        for i in b * side..(b + 1) * side {
            for j in b * side..(b + 1) * side {
                triplets.push((i, j, 0.5));
            }
        }
    }
    ModelMatrix::new(blocks, kind, Entries::from_triplets(k, triplets)?)
}

/// Law of the bounded rating `Y` in the collaborative-filtering model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollabNoise {
    /// `Y = F + Z`, `Z` uniform on `[-min(F, 1-F), min(F, 1-F)]`.
    #[default]
    UniformSymmetric,
    /// `Y = F`.
    Noiseless,
    /// `Y ~ Ber(F)`.
    TwoPoint,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerOptions {
    /// Draw exactly `n` multinomial samples for distribution models instead
    /// of the Poissonized draw.
    pub exact_multinomial: bool,
    pub collab_noise: CollabNoise,
}

/// One draw `X ~ M` with default sampler options.
pub fn sample(model: &ModelMatrix, seed: u64) -> Result<Observation> {
    sample_with(model, seed, &SamplerOptions::default())
}

/// One draw `X ~ M`, entries independent, deterministic given `seed`.
///
/// Cells with `M_ij = 0` are zero under every model, so only the support of
/// `M` is visited (row-major).
pub fn sample_with(model: &ModelMatrix, seed: u64, opts: &SamplerOptions) -> Result<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = model.kind();
    let support = model.entries().nonzeros();
    let mut out = Vec::with_capacity(support.len());
    match kind {
        ModelKind::Distribution { samples } if opts.exact_multinomial => {
            let mut remaining = samples;
            let mut mass_left = model.mass();
            let last = support.len().saturating_sub(1);
            for (idx, (i, j, m)) in support.into_iter().enumerate() {
                if remaining == 0 {
                    break;
                }
                let p = (m / mass_left).clamp(0.0, 1.0);
                let x = if idx == last || p >= 1.0 {
                    remaining
                } else {
                    Binomial::new(remaining, p)
                        .map_err(|e| Error::InvalidModel(e.to_string()))?
                        .sample(&mut rng)
                };
                remaining -= x;
                mass_left -= m;
                if x > 0 {
                    out.push((i, j, x as f64));
                }
            }
        }
        ModelKind::Poisson | ModelKind::Distribution { .. } => {
            for (i, j, m) in support {
                let x: f64 = Poisson::new(m)
                    .map_err(|e| Error::InvalidModel(e.to_string()))?
                    .sample(&mut rng);
                if x > 0.0 {
                    out.push((i, j, x));
                }
            }
        }
        ModelKind::Bernoulli => {
            for (i, j, m) in support {
                if rng.random::<f64>() < m {
                    out.push((i, j, 1.0));
                }
            }
        }
        ModelKind::Binomial { trials } => {
            for (i, j, m) in support {
                let p = (m / trials as f64).min(1.0);
                let x = Binomial::new(trials as u64, p)
                    .map_err(|e| Error::InvalidModel(e.to_string()))?
                    .sample(&mut rng);
                if x > 0 {
                    out.push((i, j, x as f64));
                }
            }
        }
        ModelKind::Collab { p } => {
            for (i, j, m) in support {
                if rng.random::<f64>() >= p {
                    continue;
                }
                let f = (m / p).clamp(0.0, 1.0);
                let y = match opts.collab_noise {
                    CollabNoise::UniformSymmetric => {
                        let half = f.min(1.0 - f);
                        (f + half * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0)
                    }
                    CollabNoise::Noiseless => f,
                    CollabNoise::TwoPoint => {
                        if rng.random::<f64>() < f {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                if y > 0.0 {
                    out.push((i, j, y));
                }
            }
        }
    }
    Observation::new(kind, Entries::from_triplets(model.k(), out)?)
}
