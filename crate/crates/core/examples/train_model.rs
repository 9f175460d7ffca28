//! Fit the full model on a toy realization and print the training trace.
//!
//!     cargo run --release --example train_model -- [iterations]

use cegan::datagen::{generate_toy, split, SplitFractions, ToyGenConfig};
use cegan::model::ModelConfig;
use cegan::training::{fit, TrainConfig};

fn main() -> cegan::Result<()> {
    let iterations: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let data = generate_toy(&ToyGenConfig { n: 1000, zeta: 1.0, seed: 3, ..Default::default() })?;
    let (train, valid, _test) = split(&data, SplitFractions::default(), 3)?;

    let model = ModelConfig::default().with_hidden(vec![64, 64]).with_latent_dim(5);
    let config = TrainConfig { max_iterations: iterations, seed: 3, ..Default::default() };
    let (_model, trace) = fit(&train, &valid, &model, &config)?;

    trace.write_csv(std::io::stdout().lock())?;
    eprintln!(
        "best validation L_P {:?} at iteration {:?} ({:.1}s)",
        trace.best_validation(),
        trace.best_iteration,
        trace.wall_clock_secs
    );
    Ok(())
}
