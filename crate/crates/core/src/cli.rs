//! Subcommands behind the `cegan` binary. Exit codes: 0 success,
//! 1 invalid configuration or input, 2 runtime failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::datagen::{export_csv, split};
use crate::error::{Error, Result};
use crate::eval::{hex, realization_seeds, run_experiment, run_sweep, sweep_svg, SweepReport, REPORT_CSV_HEADER};
use crate::gradcheck::{run_gradcheck, GradcheckConfig};
use crate::inference::{estimate_ite, IteConfig};
use crate::model::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::training::fit;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cegan", version, about = "Treatment-effect estimation with adversarially learned latent confounders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, overriding the config (default: current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Concurrent realizations.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured dataset as CSV plus schema sidecar.
    Generate(Common),
    /// Fit a model on the first realization's split; writes a checkpoint and trace.
    Train(Common),
    /// Export per-subject outcome and effect estimates from a checkpoint.
    Ite {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run every configured method over R realizations (or a sweep).
    Experiment(Common),
    /// Finite-difference check of all analytic gradients.
    Gradcheck {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Whether an error stems from the user's input rather than the run itself.
pub fn is_validation_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidConfig { .. } | Error::Csv { .. } | Error::SchemaMismatch(_) | Error::Data(_) | Error::Shape { .. }
    )
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_validation_error(&e) {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Generate(c) => cmd_generate(&c),
        Command::Train(c) => cmd_train(&c),
        Command::Ite { common, checkpoint } => cmd_ite(&common, &checkpoint),
        Command::Experiment(c) => cmd_experiment(&c),
        Command::Gradcheck { seed, out } => cmd_gradcheck(seed.unwrap_or(0), out.as_deref()),
    }
}

fn load(c: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &c.config {
        Some(p) if !p.is_file() => {
            return Err(Error::config("--config", format!("{} does not exist", p.display())))
        }
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.jobs.is_some() {
        cfg.jobs = c.jobs;
    }
    cfg.validate()?;
    let out = c.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok((cfg, out))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn fingerprint<T: serde::Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("serializable config");
    hex(&Sha256::digest(json.as_bytes()))
}

pub fn cmd_generate(c: &Common) -> Result<i32> {
    let (cfg, out) = load(c)?;
    let seeds = realization_seeds(cfg.seed, 0);
    let data = cfg.data_source()?.realize(seeds.data)?;
    let path = out.join("data.csv");
    export_csv(&data, &path)?;
    println!("wrote {} rows to {}", data.len(), path.display());
    Ok(EXIT_OK)
}

pub fn cmd_train(c: &Common) -> Result<i32> {
    let (cfg, out) = load(c)?;
    let seeds = realization_seeds(cfg.seed, 0);
    let data = cfg.data_source()?.realize(seeds.data)?;
    let (train, valid, _) = split(&data, cfg.eval.split, seeds.split)?;
    let train_cfg = crate::training::TrainConfig { seed: seeds.train, ..cfg.train.clone() };
    let trace_path = out.join("trace.csv");
    let (model, trace) = match fit(&train, &valid, &cfg.model, &train_cfg) {
        Ok(r) => r,
        Err(Error::Diverged { iteration, reason, trace }) => {
            trace.write_csv(create(&trace_path)?)?;
            return Err(Error::Diverged { iteration, reason, trace });
        }
        Err(e) => return Err(e),
    };
    trace.write_csv(create(&trace_path)?)?;
    let ck_path = out.join("model.json");
    save_checkpoint(&ck_path, &Checkpoint::new(model, Some(fingerprint(&(&cfg.model, &train_cfg)))))?;
    match trace.best_validation() {
        Some(v) => println!("best validation L_P {v:.6} at iteration {:?}", trace.best_iteration),
        None => println!("no validation evaluations"),
    }
    println!("wrote {} and {}", ck_path.display(), trace_path.display());
    Ok(EXIT_OK)
}

pub fn cmd_ite(c: &Common, checkpoint: &Path) -> Result<i32> {
    let (cfg, out) = load(c)?;
    let seeds = realization_seeds(cfg.seed, 0);
    let data = cfg.data_source()?.realize(seeds.data)?;
    let ck = load_checkpoint(checkpoint, Some(data.schema()))?;
    let ite_cfg = IteConfig { seed: seeds.inference, ..cfg.inference.clone() };
    let est = estimate_ite(&ck.model, data.x(), &ite_cfg)?;
    let path = out.join("ite.csv");
    est.write_csv(create(&path)?)?;
    println!("estimated ATE {:.6} over {} subjects; wrote {}", est.ate(), data.len(), path.display());
    Ok(EXIT_OK)
}

fn write_sweep_csv(sweep: &SweepReport, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{},{REPORT_CSV_HEADER}", sweep.axis.replace(' ', "_")).map_err(io)?;
    for p in &sweep.points {
        for s in &p.report.summary {
            writeln!(w, "{},{},{},{},{},{},{}", p.value, s.method, s.split, s.metric, s.mean, s.std, s.count)
                .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn cmd_experiment(c: &Common) -> Result<i32> {
    let (cfg, out) = load(c)?;
    let spec = cfg.spec(Some(cfg.data_source()?))?;
    let warnings = match cfg.sweep_axis() {
        None => {
            let report = run_experiment(&spec)?;
            write_text(&out.join("report.json"), &report.to_json()?)?;
            report.write_csv(create(&out.join("report.csv"))?)?;
            for s in report.summary.iter().filter(|s| s.split == "out" && s.metric == "sqrt-pehe") {
                println!("{:<9} out-of-sample sqrt-PEHE {:.4} ± {:.4} (R = {})", s.method.name(), s.mean, s.std, s.count);
            }
            report.warnings
        }
        Some(axis) => {
            let sweep = run_sweep(&spec, &axis)?;
            let json = serde_json::to_string_pretty(&sweep).map_err(|e| Error::Format(e.to_string()))? + "\n";
            write_text(&out.join("sweep.json"), &json)?;
            write_sweep_csv(&sweep, &out.join("sweep.csv"))?;
            write_text(&out.join("sweep.svg"), &sweep_svg(&sweep, "out", &cfg.eval.plot_metric))?;
            println!("wrote sweep over {} ({} points) to {}", sweep.axis, sweep.points.len(), out.display());
            sweep.points.into_iter().flat_map(|p| p.report.warnings).collect()
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(EXIT_OK)
}

pub fn cmd_gradcheck(seed: u64, out: Option<&Path>) -> Result<i32> {
    let report = run_gradcheck(&GradcheckConfig { seed, ..Default::default() })?;
    println!("{report}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))? + "\n";
        write_text(&dir.join("gradcheck.json"), &json)?;
    }
    if report.passed() {
        Ok(EXIT_OK)
    } else {
        for f in report.failures() {
            eprintln!("gradcheck failed: {}", f.group());
        }
        Ok(EXIT_RUNTIME)
    }
}
