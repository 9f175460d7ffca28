//! Train, checkpoint, reload and estimate per-subject effects on held-out
//! data, comparing against the known potential outcomes.

use cegan::datagen::{generate_toy, split, SplitFractions, ToyGenConfig};
use cegan::eval::{ate_error, pehe};
use cegan::inference::{estimate_ite, IteConfig};
use cegan::model::{load_checkpoint, save_checkpoint, Checkpoint, ModelConfig};
use cegan::training::{fit, TrainConfig};

fn main() -> cegan::Result<()> {
    let data = generate_toy(&ToyGenConfig { n: 1000, zeta: 1.0, seed: 8, ..Default::default() })?;
    let (train, valid, test) = split(&data, SplitFractions::default(), 8)?;
    let model_cfg = ModelConfig::default().with_hidden(vec![64, 64]).with_latent_dim(5);
    let (model, _) = fit(&train, &valid, &model_cfg, &TrainConfig { max_iterations: 1500, seed: 8, ..Default::default() })?;

    let path = std::env::temp_dir().join("cegan-example-model.json");
    save_checkpoint(&path, &Checkpoint::new(model, None))?;
    let restored = load_checkpoint(&path, Some(test.schema()))?.model;

    let est = estimate_ite(&restored, test.x(), &IteConfig { mc_samples: 200, seed: 8, ..Default::default() })?;
    let (y0, y1) = test.potential_outcomes().expect("toy data carries both outcomes");
    let (h1, h0) = (est.y1.col_vec(0), est.y0.col_vec(0));
    println!("estimated ATE {:.4}", est.ate());
    println!("sqrt-PEHE {:.4}", pehe(y1.as_slice(), y0.as_slice(), &h1, &h0)?.sqrt());
    println!("ATE error {:.4}", ate_error(y1.as_slice(), y0.as_slice(), &h1, &h0)?);
    for i in 0..5 {
        println!("subject {i}: ite_hat {:+.4}  true {:+.4}", est.ite.get(i, 0), y1.get(i, 0) - y0.get(i, 0));
    }
    Ok(())
}
