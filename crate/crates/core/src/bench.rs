//! Config-driven experiments behind the command-line tool: generation,
//! sampling, recovery with evaluation, mass scaling sweeps, the zero-block
//! counterexample and the lemma suites. Every table written here is a pure
//! function of the experiment file and seed; thread count only changes speed.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curated::{curated_svd, CuratedOutcome};
use crate::error::{Error, Result};
use crate::io::{read_matrix, MatrixFile};
use crate::lemmas::{run_all, LemmaReport};
use crate::models::{gen_model, sample_with, ModelShape, ModelSpec, SamplerOptions};
use crate::oracles::normalized_l1;
use crate::regularization::compute_weights;
use crate::spectral::{rw_svd_with, truncate, SvdOptions};
use crate::types::{n_avg, CuratedConfig, Entries, ModelMatrix, Observation};

/// Comparison estimators computed alongside Curated SVD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Rank-`r` truncated SVD of `X`.
    PlainRSvd,
    /// Rank-`2r` truncated SVD of `X`.
    #[serde(rename = "plain_2r_svd")]
    Plain2rSvd,
    /// `(2r, w̄)`-SVD of `X` with no rows zeroed.
    RwSvdNoDeletion,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::PlainRSvd, Baseline::Plain2rSvd, Baseline::RwSvdNoDeletion];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::PlainRSvd => "plain_r_svd",
            Baseline::Plain2rSvd => "plain_2r_svd",
            Baseline::RwSvdNoDeletion => "rw_svd_no_deletion",
        }
    }

    /// Estimate of `M` from `x`; `r` is the target rank of the experiment.
    pub fn estimate(self, obs: &Observation, r: usize, cfg: &CuratedConfig) -> Result<DMatrix<f64>> {
        let k = obs.k();
        let x = obs.to_dense()?;
        let opts = SvdOptions {
            dense_threshold: cfg.svd_dense_threshold,
            seed: cfg.seed,
        };
        match self {
            Baseline::PlainRSvd => truncate(&x, r.min(k), &opts),
            Baseline::Plain2rSvd => truncate(&x, (2 * r).min(k), &opts),
            Baseline::RwSvdNoDeletion => {
                if obs.total() == 0.0 {
                    return Ok(DMatrix::zeros(k, k));
                }
                let w = compute_weights(obs, n_avg(obs, cfg)?)?;
                rw_svd_with(&x, (2 * r).min(k), &w, &opts)
            }
        }
    }
}

fn one() -> usize {
    1
}

/// One experiment: a model family, how to sample it, how to recover it and
/// what to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Master seed. It replaces `model.seed` and `curated.seed`; per-trial
    /// seeds are derived from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub mass_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub baselines: Vec<Baseline>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    pub model: ModelSpec,
    #[serde(default)]
    pub sampler: SamplerOptions,
    pub curated: CuratedConfig,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if let Some(grid) = &self.mass_grid {
            if grid.is_empty() {
                return Err(Error::InvalidConfig("mass_grid is empty".into()));
            }
            if grid.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
                return Err(Error::InvalidConfig("mass_grid values must be positive".into()));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig("mass_grid must be strictly increasing".into()));
            }
        }
        self.model.validate()?;
        self.curated.validate()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn model_spec(&self, seed: u64, mass: f64) -> ModelSpec {
        ModelSpec {
            seed,
            target_mass: mass,
            ..self.model.clone()
        }
    }

    fn curated_config(&self, seed: u64) -> CuratedConfig {
        CuratedConfig {
            seed,
            ..self.curated.clone()
        }
    }
}

/// Seed for trial `trial` at grid point `point`, independent of scheduling.
pub fn trial_seed(seed: u64, point: u64, trial: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ point) ^ trial)
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const MODEL_SALT: u64 = 1;
const SAMPLE_SALT: u64 = 2;
const RECOVER_SALT: u64 = 3;

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// `M` for the experiment, seeded by the master seed.
pub fn cmd_gen(spec: &ExperimentSpec) -> Result<ModelMatrix> {
    gen_model(&spec.model_spec(spec.seed, spec.model.target_mass))
}

/// One draw from `model`, seeded by the master seed.
pub fn cmd_sample(spec: &ExperimentSpec, model: &ModelMatrix) -> Result<Observation> {
    sample_with(model, splitmix(spec.seed ^ SAMPLE_SALT), &spec.sampler)
}

pub fn read_matrix_file(path: &Path) -> Result<MatrixFile> {
    read_matrix(BufReader::new(fs::File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverRow {
    pub k: usize,
    pub r: usize,
    pub model: String,
    pub x_l1: f64,
    pub normalized_l1: Option<f64>,
    pub zeroed_weight: f64,
    pub restarts: usize,
    /// Empty when timing is disabled.
    pub runtime_ms: Option<f64>,
}

/// Runs Curated SVD on `obs`; the estimate is returned as a matrix file of
/// rank `2r` in the observation's model.
pub fn cmd_recover(
    obs: &Observation,
    cfg: &CuratedConfig,
    truth: Option<&ModelMatrix>,
    timing: bool,
) -> Result<(MatrixFile, RecoverRow, CuratedOutcome)> {
    let start = Instant::now();
    let outcome = curated_svd(obs, cfg)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let normalized = truth.map(|m| normalized_l1(m, &outcome.estimate)).transpose()?;
    let k = obs.k();
    let row = RecoverRow {
        k,
        r: cfg.r,
        model: obs.kind().to_string(),
        x_l1: obs.total(),
        normalized_l1: normalized,
        zeroed_weight: outcome.zeroed_weight,
        restarts: cfg.restarts_for(k),
        runtime_ms: timing.then_some(elapsed),
    };
    let file = MatrixFile {
        k,
        r: (2 * cfg.r).min(k),
        kind: obs.kind(),
        entries: Entries::dense(outcome.estimate.clone())?,
    };
    Ok((file, row, outcome))
}

/// What a scaling trial hook sees.
pub struct TrialContext<'a> {
    pub point: usize,
    pub mass: f64,
    pub trial: usize,
    pub model: &'a ModelMatrix,
    pub obs: &'a Observation,
    pub outcome: &'a CuratedOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: usize,
    pub mass: f64,
    pub trial: usize,
    pub curated: f64,
    /// Error per requested baseline, in `ExperimentSpec::baselines` order.
    pub baselines: Vec<f64>,
    pub zeroed_weight: f64,
    pub n_avg: f64,
    pub objective_i: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub baselines: Vec<Baseline>,
    pub masses: Vec<f64>,
    pub trials: Vec<TrialRecord>,
    /// Median curated error per grid point.
    pub curated_medians: Vec<f64>,
    /// `baseline_medians[b][point]`.
    pub baseline_medians: Vec<Vec<f64>>,
    pub curated_slope: Option<f64>,
    pub baseline_slopes: Vec<Option<f64>>,
}

/// Grid points with median error at or above this are treated as saturated
/// and left out of the slope fit.
pub const SATURATION: f64 = 0.9;

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Least-squares slope of `ln error` against `ln mass` over the points with
/// error below [`SATURATION`]; `None` with fewer than two such points.
pub fn loglog_slope(masses: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = masses
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 0.0 && e < SATURATION)
        .map(|(&m, &e)| (m.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn cmd_scaling(spec: &ExperimentSpec, threads: Option<usize>) -> Result<ScalingReport> {
    run_scaling_with(spec, threads, |_| ()).map(|(report, _)| report)
}

/// Scaling sweep that also hands every trial to `hook` and collects its
/// results in (grid point, trial) order.
pub fn run_scaling_with<T: Send>(
    spec: &ExperimentSpec,
    threads: Option<usize>,
    hook: impl Fn(&TrialContext) -> T + Sync,
) -> Result<(ScalingReport, Vec<T>)> {
    spec.validate()?;
    let masses = spec
        .mass_grid
        .clone()
        .unwrap_or_else(|| vec![spec.model.target_mass]);
    let jobs: Vec<(usize, usize)> = (0..masses.len())
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();
    let run = |&(point, trial): &(usize, usize)| -> Result<(TrialRecord, T)> {
        let mass = masses[point];
        let seed = trial_seed(spec.seed, point as u64, trial as u64);
        let model = gen_model(&spec.model_spec(splitmix(seed ^ MODEL_SALT), mass))?;
        let obs = sample_with(&model, splitmix(seed ^ SAMPLE_SALT), &spec.sampler)?;
        let cfg = spec.curated_config(splitmix(seed ^ RECOVER_SALT));
        let outcome = curated_svd(&obs, &cfg)?;
        let baselines = spec
            .baselines
            .iter()
            .map(|b| normalized_l1(&model, &b.estimate(&obs, cfg.r, &cfg)?))
            .collect::<Result<Vec<_>>>()?;
        let record = TrialRecord {
            point,
            mass,
            trial,
            curated: normalized_l1(&model, &outcome.estimate)?,
            baselines,
            zeroed_weight: outcome.zeroed_weight,
            n_avg: outcome.n_avg,
            objective_i: outcome.objective_i_holds(),
        };
        let extra = hook(&TrialContext {
            point,
            mass,
            trial,
            model: &model,
            obs: &obs,
            outcome: &outcome,
        });
        Ok((record, extra))
    };
    let results: Vec<(TrialRecord, T)> = in_pool(threads, || jobs.par_iter().map(run).collect::<Result<Vec<_>>>())??;
    let (trials, extras): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let per_point = |f: &dyn Fn(&TrialRecord) -> f64| -> Vec<f64> {
        (0..masses.len())
            .map(|p| median(&trials.iter().filter(|t| t.point == p).map(f).collect::<Vec<_>>()))
            .collect()
    };
    let curated_medians = per_point(&|t| t.curated);
    let baseline_medians: Vec<Vec<f64>> = (0..spec.baselines.len())
        .map(|b| per_point(&|t| t.baselines[b]))
        .collect();
    let report = ScalingReport {
        baselines: spec.baselines.clone(),
        curated_slope: loglog_slope(&masses, &curated_medians),
        baseline_slopes: baseline_medians.iter().map(|m| loglog_slope(&masses, m)).collect(),
        masses,
        trials,
        curated_medians,
        baseline_medians,
    };
    Ok((report, extras))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns: `row,point,mass,trial,curated,<baselines...>,zeroed_weight,n_avg,objective_i`.
/// `row` is `trial`, `median` or `slope`; the slope row carries each
/// method's fitted log-log slope in that method's column.
pub fn write_scaling_csv<W: Write>(w: W, report: &ScalingReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["row", "point", "mass", "trial", "curated"];
    header.extend(report.baselines.iter().map(|b| b.name()));
    header.extend(["zeroed_weight", "n_avg", "objective_i"]);
    out.write_record(&header)?;
    for t in &report.trials {
        let mut rec = vec![
            "trial".to_string(),
            t.point.to_string(),
            t.mass.to_string(),
            t.trial.to_string(),
            t.curated.to_string(),
        ];
        rec.extend(t.baselines.iter().map(|e| e.to_string()));
        rec.extend([t.zeroed_weight.to_string(), t.n_avg.to_string(), t.objective_i.to_string()]);
        out.write_record(&rec)?;
    }
    for (p, &mass) in report.masses.iter().enumerate() {
        let mut rec = vec![
            "median".to_string(),
            p.to_string(),
            mass.to_string(),
            String::new(),
            report.curated_medians[p].to_string(),
        ];
        rec.extend(report.baseline_medians.iter().map(|m| m[p].to_string()));
        rec.extend([String::new(), String::new(), String::new()]);
        out.write_record(&rec)?;
    }
    let mut rec = vec![
        "slope".to_string(),
        String::new(),
        String::new(),
        String::new(),
        fmt_opt(report.curated_slope),
    ];
    rec.extend(report.baseline_slopes.iter().map(|&s| fmt_opt(s)));
    rec.extend([String::new(), String::new(), String::new()]);
    out.write_record(&rec)?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub trial: usize,
    pub zero_block_found: bool,
    pub zero_block_count: usize,
    /// `n_max` when some block of `X` is all zero, else 0: a certified lower
    /// bound on `||X - M||`.
    pub certified_lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub k: usize,
    pub n_max: usize,
    pub rows: Vec<CounterexampleRow>,
    pub empirical_probability: f64,
    /// `1 - (1 - 2^{-4 n_max^2})^{k / (2 n_max)}`.
    pub expected_probability: f64,
}

/// Number of diagonal blocks of side `2 n_max` in which `obs` is all zero.
/// Only the block-diagonal support is inspected, so off-block entries are
/// ignored.
pub fn zero_blocks(obs: &Observation, n_max: usize) -> usize {
    let side = 2 * n_max;
    let blocks = obs.k() / side;
    let mut hit = vec![false; blocks];
    obs.entries().for_each_nonzero(|i, j, _| {
        if i / side == j / side && i / side < blocks {
            hit[i / side] = true;
        }
    });
    hit.iter().filter(|&&h| !h).count()
}

/// Block-diagonal counterexample with Bernoulli observations: each trial
/// samples `X` entry by entry and scans the blocks for an all-zero one.
pub fn cmd_counterexample(
    k: usize,
    n_max: usize,
    trials: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<CounterexampleReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let spec = ModelSpec {
        shape: ModelShape::Counterexample { n_max },
        observation: crate::types::ModelKind::Bernoulli,
        k,
        r: 1,
        target_mass: (k * n_max) as f64,
        seed,
    };
    let model = gen_model(&spec)?;
    let rows = in_pool(threads, || {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let x = sample_with(&model, trial_seed(seed, 0, t as u64), &SamplerOptions::default())?;
                let count = zero_blocks(&x, n_max);
                Ok(CounterexampleRow {
                    trial: t,
                    zero_block_found: count > 0,
                    zero_block_count: count,
                    certified_lower_bound: if count > 0 { n_max as f64 } else { 0.0 },
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let found = rows.iter().filter(|r| r.zero_block_found).count();
    let q = 0.5f64.powi((4 * n_max * n_max) as i32);
    let blocks = (k / (2 * n_max)) as f64;
    Ok(CounterexampleReport {
        k,
        n_max,
        empirical_probability: found as f64 / trials as f64,
        expected_probability: -(blocks * (-q).ln_1p()).exp_m1(),
        rows,
    })
}

/// Columns: `row,trial,zero_block_found,zero_block_count,certified_lower_bound,probability,expected_probability`.
/// One `trial` row per trial, then one `summary` row.
pub fn write_counterexample_csv<W: Write>(w: W, report: &CounterexampleReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "row",
        "trial",
        "zero_block_found",
        "zero_block_count",
        "certified_lower_bound",
        "probability",
        "expected_probability",
    ])?;
    for r in &report.rows {
        out.write_record([
            "trial".to_string(),
            r.trial.to_string(),
            r.zero_block_found.to_string(),
            r.zero_block_count.to_string(),
            r.certified_lower_bound.to_string(),
            String::new(),
            String::new(),
        ])?;
    }
    out.write_record([
        "summary".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        report.empirical_probability.to_string(),
        report.expected_probability.to_string(),
    ])?;
    out.flush()?;
    Ok(())
}

/// Instances per lemma suite for the `lemmas` command.
pub const LEMMA_INSTANCES: usize = 200;

pub fn cmd_lemmas(seed: u64, threads: Option<usize>) -> Result<Vec<LemmaReport>> {
    in_pool(threads, || run_all(seed, LEMMA_INSTANCES))
}

/// Columns: `lemma,instances,violations,worst_excess,passed`.
pub fn write_lemma_csv<W: Write>(w: W, reports: &[LemmaReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lemma", "instances", "violations", "worst_excess", "passed"])?;
    for r in reports {
        out.write_record([
            r.name.to_string(),
            r.instances.to_string(),
            r.violations.to_string(),
            r.worst_excess.to_string(),
            r.passed().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_recover_csv<W: Write>(w: W, row: &RecoverRow) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.serialize(row)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ModelKind;

    fn spec() -> ExperimentSpec {
        ExperimentSpec::from_toml(
            r#"
seed = 5
trials = 2
mass_grid = [4096.0, 8192.0, 16384.0, 32768.0]
baselines = ["plain_2r_svd"]

[model]
k = 32
r = 1
target_mass = 4096.0
shape = { shape = "random_factors" }
observation = { kind = "poisson" }

[curated]
r = 1
"#,
        )
        .unwrap()
    }

    #[test]
    fn toml_and_json_agree() {
        let s = spec();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(ExperimentSpec::from_json(&json).unwrap(), s);
        assert_eq!(ExperimentSpec::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut s = spec();
        s.mass_grid = Some(vec![2.0, 1.0]);
        assert!(s.validate().is_err());
        s.mass_grid = Some(vec![0.0]);
        assert!(s.validate().is_err());
        s.mass_grid = None;
        s.trials = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = spec().to_toml() + "\nbogus = 1\n";
        assert!(matches!(ExperimentSpec::from_toml(&text), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn median_and_slope() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        // error = mass^{-1/2}
        let masses = [4.0, 16.0, 64.0, 256.0];
        let errs: Vec<f64> = masses.iter().map(|m: &f64| m.powf(-0.5)).collect();
        assert!((loglog_slope(&masses, &errs).unwrap() + 0.5).abs() < 1e-12);
        // saturated points are dropped
        assert_eq!(loglog_slope(&[1.0, 2.0], &[0.95, 0.5]), None);
    }

    #[test]
    fn scaling_is_schedule_independent() {
        let s = spec();
        let a = cmd_scaling(&s, Some(1)).unwrap();
        let b = cmd_scaling(&s, Some(3)).unwrap();
        assert_eq!(a, b);
        let mut csv_a = Vec::new();
        write_scaling_csv(&mut csv_a, &a).unwrap();
        let text = String::from_utf8(csv_a).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "row,point,mass,trial,curated,plain_2r_svd,zeroed_weight,n_avg,objective_i"
        );
        assert_eq!(lines.len(), 1 + 8 + 4 + 1);
        assert!(a.curated_slope.is_some());
        // doubling mass never raises the median by more than 20%
        for w in a.curated_medians.windows(2) {
            assert!(w[1] <= 1.2 * w[0]);
        }
    }

    #[test]
    fn baseline_columns_only_when_requested() {
        let mut s = spec();
        s.baselines.clear();
        s.mass_grid = None;
        let report = cmd_scaling(&s, None).unwrap();
        let mut buf = Vec::new();
        write_scaling_csv(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "row,point,mass,trial,curated,zeroed_weight,n_avg,objective_i");
    }

    #[test]
    fn counterexample_small() {
        // one block of side 2: all zero with probability 1/16
        let report = cmd_counterexample(2, 1, 64, 9, None).unwrap();
        assert_eq!(report.rows.len(), 64);
        assert!((report.expected_probability - 1.0 / 16.0).abs() < 1e-15);
        for r in &report.rows {
            assert_eq!(r.zero_block_found, r.zero_block_count == 1);
        }
        assert!(cmd_counterexample(6, 2, 1, 0, None).is_err());
    }

    #[test]
    fn zero_block_scan() {
        let entries = Entries::from_triplets(4, vec![(0, 1, 1.0), (3, 0, 1.0)]).unwrap();
        let x = Observation::new(ModelKind::Bernoulli, entries).unwrap();
        // (3, 0) is off the block diagonal
        assert_eq!(zero_blocks(&x, 1), 1);
    }

    #[test]
    fn recover_zero_observation() {
        let x = Observation::new(ModelKind::Poisson, Entries::from_triplets(4, vec![]).unwrap()).unwrap();
        let (file, row, _) = cmd_recover(&x, &CuratedConfig::new(1), None, false).unwrap();
        assert_eq!(file.entries.nnz(), 0);
        assert_eq!(row.runtime_ms, None);
        let mut buf = Vec::new();
        write_recover_csv(&mut buf, &row).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "k,r,model,x_l1,normalized_l1,zeroed_weight,restarts,runtime_ms\n4,1,poisson,0.0,,0.0,2,\n"
        );
    }
}
