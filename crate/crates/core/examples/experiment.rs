//! A small multi-realization comparison of every method, printed as the
//! summary table.
//!
//!     cargo run --release --example experiment -- [realizations] [jobs]

use cegan::datagen::ToyGenConfig;
use cegan::eval::{run_experiment, DataSource, ExperimentSpec};
use cegan::model::ModelConfig;
use cegan::training::TrainConfig;

fn main() -> cegan::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let realizations = args.next().flatten().unwrap_or(3);
    let jobs = args.next().flatten().unwrap_or(1);

    let spec = ExperimentSpec {
        realizations,
        jobs,
        model: ModelConfig::default().with_hidden(vec![32, 32]).with_latent_dim(5),
        train: TrainConfig { max_iterations: 500, ..Default::default() },
        ..ExperimentSpec::new(DataSource::Toy(ToyGenConfig { n: 600, zeta: 2.0, ..Default::default() }))
    };
    let report = run_experiment(&spec)?;
    report.write_csv(std::io::stdout().lock())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
