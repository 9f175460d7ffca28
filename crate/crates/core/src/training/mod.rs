//! Alternating optimization: reconstruction network, discriminator,
//! generator, then the propensity model, once per iteration.

mod passes;
mod trace;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use passes::{
    discriminator_pass, generator_pass, prediction_pass, propensity_pass, reconstruction_pass,
    GeneratorLoss, ModelGrads,
};
pub use trace::{TraceRecord, TrainTrace, TRACE_CSV_HEADER};

use crate::datagen::{Batch, Dataset};
use crate::error::{Error, Result};
use crate::model::{prediction_loss, CeganModel, ModelConfig};
use crate::numerics::{AdamConfig, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationMetric {
    /// Mean prediction loss `L_P` on the validation split.
    #[default]
    PredictionLoss,
}

/// What the generator side optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Reconstruction, adversarial game and `α·L_P`.
    Full,
    /// `L_P` only through the inference subnetwork and prediction decoder.
    PredictionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_reconstruction: usize,
    pub batch_discriminator: usize,
    pub batch_generator: usize,
    pub adam: AdamConfig,
    pub alpha: f64,
    pub max_iterations: usize,
    /// Number of validation evaluations without improvement before stopping.
    pub patience: usize,
    pub eval_every: usize,
    pub validation_metric: ValidationMetric,
    pub seed: u64,
    pub disc_steps_per_iter: usize,
    pub gen_steps_per_iter: usize,
    pub generator_loss: GeneratorLoss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_reconstruction: 64,
            batch_discriminator: 64,
            batch_generator: 64,
            adam: AdamConfig::default(),
            alpha: 1.0,
            max_iterations: 10_000,
            patience: 20,
            eval_every: 100,
            validation_metric: ValidationMetric::PredictionLoss,
            seed: 0,
            disc_steps_per_iter: 1,
            gen_steps_per_iter: 1,
            generator_loss: GeneratorLoss::Saturating,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train.batch_reconstruction", self.batch_reconstruction),
            ("train.batch_discriminator", self.batch_discriminator),
            ("train.batch_generator", self.batch_generator),
            ("train.patience", self.patience),
            ("train.eval_every", self.eval_every),
            ("train.disc_steps_per_iter", self.disc_steps_per_iter),
            ("train.gen_steps_per_iter", self.gen_steps_per_iter),
        ] {
            if v == 0 {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("train.alpha", "must be finite and >= 0"));
        }
        self.adam.validate()
    }
}

fn sample_batch(data: &Dataset, k: usize, rng: &mut RngStream) -> Batch {
    let idx: Vec<usize> = (0..k).map(|_| rng.index(data.len())).collect();
    data.batch(&idx)
}

fn apply(model: &mut CeganModel, grads: &ModelGrads, adam: &AdamConfig) -> Result<()> {
    for (net, g) in grads.iter() {
        model.net_mut(net).adam_step(g, adam)?;
    }
    Ok(())
}

fn checked(loss: f64, what: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite(format!("{what} loss")))
    }
}

/// One reconstruction update of `(θ_E, θ_R)`; returns the pre-update mean `L_R`.
pub fn train_reconstruction_step(
    model: &mut CeganModel,
    batch: &Batch,
    adam: &AdamConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    let (loss, grads) = reconstruction_pass(model, batch, rng)?;
    checked(loss, "reconstruction")?;
    apply(model, &grads, adam)?;
    Ok(loss)
}

/// One discriminator update of `θ_D`; returns the pre-update mean `−V`.
pub fn train_discriminator_step(
    model: &mut CeganModel,
    batch: &Batch,
    adam: &AdamConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    let (loss, grads) = discriminator_pass(model, batch, rng)?;
    checked(loss, "discriminator")?;
    apply(model, &grads, adam)?;
    Ok(loss)
}

/// One generator update of `(θ_E, θ_I, θ_P)`; returns the pre-update composite loss.
pub fn train_generator_step(
    model: &mut CeganModel,
    batch: &Batch,
    alpha: f64,
    mode: GeneratorLoss,
    adam: &AdamConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    let (loss, grads) = generator_pass(model, batch, alpha, mode, rng)?;
    checked(loss, "generator")?;
    apply(model, &grads, adam)?;
    Ok(loss)
}

/// One `L_P`-only update of `(θ_I, θ_P)`.
pub fn train_prediction_step(
    model: &mut CeganModel,
    batch: &Batch,
    adam: &AdamConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    let (loss, grads) = prediction_pass(model, batch, rng)?;
    checked(loss, "prediction")?;
    apply(model, &grads, adam)?;
    Ok(loss)
}

/// One propensity update; returns the pre-update mean cross-entropy.
pub fn train_propensity_step(
    model: &mut CeganModel,
    batch: &Batch,
    adam: &AdamConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    let (loss, grads) = propensity_pass(model, batch, rng)?;
    checked(loss, "propensity")?;
    apply(model, &grads, adam)?;
    Ok(loss)
}

/// Mean validation `L_P` with dropout off. The noise stream is passed by
/// value so every evaluation sees the same draws.
pub fn validation_loss(model: &CeganModel, valid: &Dataset, mut rng: RngStream) -> Result<f64> {
    let b = valid.full_batch();
    let z = model.infer_z(&b.x, &b.t, &mut rng)?;
    let y_hat = model.predict_y(&z, &b.x, &b.t, &mut rng)?;
    let l = prediction_loss(&b.y, &y_hat, model.schema())?;
    Ok(l.iter().sum::<f64>() / l.len() as f64)
}

/// Trains the full model with early stopping on validation `L_P`.
pub fn fit(
    train: &Dataset,
    valid: &Dataset,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<(CeganModel, TrainTrace)> {
    fit_with_objective(train, valid, model_config, config, Objective::Full)
}

pub fn fit_with_objective(
    train: &Dataset,
    valid: &Dataset,
    model_config: &ModelConfig,
    config: &TrainConfig,
    objective: Objective,
) -> Result<(CeganModel, TrainTrace)> {
    config.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::Data("training and validation splits must be non-empty".into()));
    }
    if train.schema() != valid.schema() {
        return Err(Error::SchemaMismatch("train and validation schemas differ".into()));
    }
    let master = RngStream::new(config.seed);
    let init_rng = master.child(0);
    let mut batch_rng = master.child(1);
    let mut noise_rng = master.child(2);
    let valid_rng = master.child(3);
    let mut model = CeganModel::new(train.schema().clone(), model_config.clone(), &init_rng)?;
    let mut trace = TrainTrace::new(vec![
        ("init".into(), init_rng.id()),
        ("minibatch".into(), batch_rng.id()),
        ("noise".into(), noise_rng.id()),
        ("validation".into(), valid_rng.id()),
    ]);
    let started = Instant::now();
    let mut best: Option<(f64, CeganModel)> = None;
    let mut since_best = 0;
    let adam = &config.adam;

    for iteration in 1..=config.max_iterations {
        let step = (|| -> Result<TraceRecord> {
            let mut rec = TraceRecord::new(iteration);
            match objective {
                Objective::Full => {
                    let b = sample_batch(train, config.batch_reconstruction, &mut batch_rng);
                    rec.l_r = Some(train_reconstruction_step(&mut model, &b, adam, &mut noise_rng)?);
                    let mut d = 0.0;
                    for _ in 0..config.disc_steps_per_iter {
                        let b = sample_batch(train, config.batch_discriminator, &mut batch_rng);
                        d += train_discriminator_step(&mut model, &b, adam, &mut noise_rng)?;
                    }
                    rec.d_loss = Some(d / config.disc_steps_per_iter as f64);
                    let mut g = 0.0;
                    for _ in 0..config.gen_steps_per_iter {
                        let b = sample_batch(train, config.batch_generator, &mut batch_rng);
                        g += train_generator_step(
                            &mut model,
                            &b,
                            config.alpha,
                            config.generator_loss,
                            adam,
                            &mut noise_rng,
                        )?;
                    }
                    rec.g_loss = Some(g / config.gen_steps_per_iter as f64);
                }
                Objective::PredictionOnly => {
                    let mut g = 0.0;
                    for _ in 0..config.gen_steps_per_iter {
                        let b = sample_batch(train, config.batch_generator, &mut batch_rng);
                        g += train_prediction_step(&mut model, &b, adam, &mut noise_rng)?;
                    }
                    rec.g_loss = Some(g / config.gen_steps_per_iter as f64);
                }
            }
            let b = sample_batch(train, config.batch_generator, &mut batch_rng);
            rec.propensity_loss = Some(train_propensity_step(&mut model, &b, adam, &mut noise_rng)?);
            if iteration % config.eval_every == 0 || iteration == config.max_iterations {
                rec.val_l_p = Some(checked(validation_loss(&model, valid, valid_rng.clone())?, "validation")?);
            }
            Ok(rec)
        })();
        let rec = match step {
            Ok(rec) => rec,
            Err(e) => {
                trace.wall_clock_secs = started.elapsed().as_secs_f64();
                return Err(Error::Diverged {
                    iteration,
                    reason: e.to_string(),
                    trace: Box::new(trace),
                });
            }
        };
        let val = rec.val_l_p;
        trace.records.push(rec);
        if let Some(v) = val {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, model.clone()));
                trace.best_iteration = Some(iteration);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    log::debug!("early stop at iteration {iteration}");
                    break;
                }
            }
        }
    }
    trace.wall_clock_secs = started.elapsed().as_secs_f64();
    let model = best.map_or(model, |(_, m)| m);
    Ok((model, trace))
}
