use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lowrank::bench::{
    cmd_counterexample, cmd_gen, cmd_lemmas, cmd_recover, cmd_sample, cmd_scaling, read_matrix_file,
    write_counterexample_csv, write_lemma_csv, write_recover_csv, write_scaling_csv, ExperimentSpec,
};
use lowrank::io::{write_matrix, MatrixFile};
use lowrank::models::ModelShape;
use lowrank::{CuratedConfig, Error};

#[derive(Parser)]
#[command(name = "lowrank", version, about = "Low-rank matrix recovery experiments")]
struct Cli {
    /// Experiment file (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the experiment file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Never changes outputs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; defaults to the experiment's output_path, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the model matrix M.
    Gen,
    /// Draw one observation X from M.
    Sample {
        /// Sample from this M file instead of generating one.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run Curated SVD on an observation file. Writes the estimate to --out
    /// and one CSV row to stdout.
    Recover {
        #[arg(long)]
        input: PathBuf,
        /// True M, to report the normalized L1 error.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Target rank; defaults to the experiment file, then the file header.
        #[arg(long)]
        rank: Option<usize>,
        /// Leave runtime_ms empty so the row is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Error versus mass sweep over the experiment's mass_grid.
    Scaling,
    /// Zero-block scan of the block-diagonal counterexample.
    Counterexample {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Run the linear-algebra property suites.
    Lemmas,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Lemmas,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn load_spec(cli: &Cli) -> Result<Option<ExperimentSpec>, Failure> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let spec = ExperimentSpec::load(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Ok(Some(match cli.seed {
        Some(seed) => spec.with_seed(seed),
        None => spec,
    }))
}

fn require_spec(cli: &Cli) -> Result<ExperimentSpec, Failure> {
    load_spec(cli)?.ok_or_else(|| Failure::Invalid("this command needs --config".into()))
}

fn output(cli: &Cli, spec: Option<&ExperimentSpec>) -> Result<Box<dyn Write>, Failure> {
    let path = cli.out.as_deref().or_else(|| spec.and_then(|s| s.output_path.as_deref()));
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create(p: &Path) -> Result<File, Failure> {
    File::create(p).map_err(|e| Failure::Invalid(format!("{}: {e}", p.display())))
}

fn read(p: &Path) -> Result<MatrixFile, Failure> {
    read_matrix_file(p).map_err(|e| Failure::Invalid(format!("{}: {e}", p.display())))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Gen => {
            let spec = require_spec(cli)?;
            let m = cmd_gen(&spec)?;
            let mut w = output(cli, Some(&spec))?;
            write_matrix(&mut w, &MatrixFile::from_model(&m))?;
            w.flush()?;
        }
        Command::Sample { model } => {
            let spec = require_spec(cli)?;
            let m = match model {
                Some(p) => read(p)?.into_model()?,
                None => cmd_gen(&spec)?,
            };
            let x = cmd_sample(&spec, &m)?;
            let mut w = output(cli, Some(&spec))?;
            write_matrix(&mut w, &MatrixFile::from_observation(&x, m.r()))?;
            w.flush()?;
        }
        Command::Recover {
            input,
            model,
            rank,
            no_timing,
        } => {
            let spec = load_spec(cli)?;
            let file = read(input)?;
            let mut cfg = match &spec {
                Some(s) => s.curated.clone(),
                None => CuratedConfig::new(file.r.max(1)),
            };
            if let Some(r) = rank {
                cfg.r = *r;
            }
            if let Some(seed) = cli.seed.or(spec.as_ref().map(|s| s.seed)) {
                cfg.seed = seed;
            }
            let truth = model.as_deref().map(read).transpose()?.map(|f| f.into_model()).transpose()?;
            let x = file.into_observation()?;
            let (estimate, row, _) = cmd_recover(&x, &cfg, truth.as_ref(), !no_timing)?;
            let est_path = cli.out.as_deref().or_else(|| spec.as_ref().and_then(|s| s.output_path.as_deref()));
            if let Some(p) = est_path {
                let mut w = BufWriter::new(create(p)?);
                write_matrix(&mut w, &estimate)?;
                w.flush()?;
            }
            write_recover_csv(io::stdout().lock(), &row)?;
        }
        Command::Scaling => {
            let spec = require_spec(cli)?;
            if spec.mass_grid.is_none() {
                return Err(Failure::Invalid("scaling needs mass_grid in the experiment file".into()));
            }
            let report = cmd_scaling(&spec, cli.threads)?;
            write_scaling_csv(output(cli, Some(&spec))?, &report)?;
        }
        Command::Counterexample { k, n_max, trials } => {
            let spec = load_spec(cli)?;
            let from_spec = spec.as_ref().map(|s| {
                let n = match s.model.shape {
                    ModelShape::Counterexample { n_max } => Some(n_max),
                    _ => None,
                };
                (s.model.k, n, s.trials)
            });
            let k = k
                .or(from_spec.map(|f| f.0))
                .ok_or_else(|| Failure::Invalid("counterexample needs --k or --config".into()))?;
            let n_max = n_max
                .or(from_spec.and_then(|f| f.1))
                .ok_or_else(|| Failure::Invalid("counterexample needs --n-max or a counterexample model".into()))?;
            let trials = trials.or(from_spec.map(|f| f.2)).unwrap_or(1);
            let seed = cli.seed.or(spec.as_ref().map(|s| s.seed)).unwrap_or(0);
            let report = cmd_counterexample(k, n_max, trials, seed, cli.threads)?;
            write_counterexample_csv(output(cli, spec.as_ref())?, &report)?;
        }
        Command::Lemmas => {
            let reports = cmd_lemmas(cli.seed.unwrap_or(0), cli.threads)?;
            write_lemma_csv(output(cli, None)?, &reports)?;
            if reports.iter().any(|r| !r.passed()) {
                return Err(Failure::Lemmas);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lemmas) => {
            eprintln!("error: lemma suite reported violations");
            ExitCode::from(2)
        }
    }
}
