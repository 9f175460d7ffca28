//! Loss evaluation with exact gradients for each optimization step.
//!
//! Every pass draws its noise and dropout masks from the stream it is given,
//! in a fixed order that does not depend on parameter values. Re-running a
//! pass with a clone of the same stream therefore evaluates the same
//! deterministic function of the parameters, which is what the
//! finite-difference checks rely on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datagen::Batch;
use crate::error::Result;
use crate::model::{reconstruction_loss, rowwise_loss, rowwise_loss_grad, CeganModel, Kind, Net, Tuple4};
use crate::numerics::{Dropout, Gradients, Matrix, RngStream};

/// Gradients for the parameter groups a pass touches.
#[derive(Debug, Clone, Default)]
pub struct ModelGrads {
    groups: BTreeMap<Net, Gradients>,
}

impl ModelGrads {
    pub fn get(&self, net: Net) -> Option<&Gradients> {
        self.groups.get(&net)
    }

    pub fn get_mut(&mut self, net: Net) -> Option<&mut Gradients> {
        self.groups.get_mut(&net)
    }

    pub fn nets(&self) -> impl Iterator<Item = Net> + '_ {
        self.groups.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Net, &Gradients)> {
        self.groups.iter().map(|(n, g)| (*n, g))
    }

    fn insert(&mut self, net: Net, g: Gradients) {
        self.groups.insert(net, g);
    }
}

/// Form of the adversarial term the generator minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorLoss {
    /// `log D(ẑ, x, t, y) + log(1 − D(z, x, t, ŷ))`, the value function itself.
    #[default]
    Saturating,
    /// `−log(1 − D(ẑ, x, t, y)) − log D(z, x, t, ŷ)`: same fixed points,
    /// stronger gradients when the discriminator wins.
    NonSaturating,
}

/// Per-row gradient of `Σ log p / n` with respect to `p`.
fn d_log(p: &[f64], scale: f64) -> Matrix {
    Matrix::column(p.iter().map(|&p| scale / p).collect())
}

/// Per-row gradient of `Σ log(1 − p) / n` with respect to `p`.
fn d_log1m(p: &[f64], scale: f64) -> Matrix {
    Matrix::column(p.iter().map(|&p| -scale / (1.0 - p)).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn corrupt(m: &Matrix, kinds: &[Kind], std: f64, rng: &mut RngStream) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        for (v, k) in out.row_mut(r).iter_mut().zip(kinds) {
            let e = rng.normal();
            if *k == Kind::Continuous {
                *v += std * e;
            }
        }
    }
    out
}

/// Generator forward state shared by the discriminator and generator passes.
struct GeneratorForward {
    z_hat: Matrix,
    z: Matrix,
    y_hat: Matrix,
    tape_e: crate::numerics::Tape,
    tape_i: crate::numerics::Tape,
    tape_p: crate::numerics::Tape,
}

fn generator_forward(model: &CeganModel, b: &Batch, rng: &mut RngStream) -> Result<GeneratorForward> {
    let n = b.len();
    let cfg = model.config();
    let eps_e = rng.normal_matrix(n, cfg.encoder_noise());
    let eps_i = rng.normal_matrix(n, cfg.inference_noise());
    let eps_p = rng.normal_matrix(n, cfg.predictor_noise());
    let (z_hat, tape_e) = model
        .net(Net::Encoder)
        .forward(&model.encoder_input(&b.x, &b.t, &b.y, &eps_e)?, Dropout::Sample(rng))?;
    let (z, tape_i) = model
        .net(Net::Inference)
        .forward(&model.inference_input(&b.x, &b.t, &eps_i)?, Dropout::Sample(rng))?;
    let (y_hat, tape_p) = model
        .net(Net::Predictor)
        .forward(&model.predictor_input(&z, &b.x, &b.t, &eps_p)?, Dropout::Sample(rng))?;
    Ok(GeneratorForward {
        z_hat,
        z,
        y_hat,
        tape_e,
        tape_i,
        tape_p,
    })
}

/// Mean `L_R` over the batch and its gradient for the encoder and the
/// reconstruction decoder.
pub fn reconstruction_pass(model: &CeganModel, b: &Batch, rng: &mut RngStream) -> Result<(f64, ModelGrads)> {
    model.check_record(&b.x, &b.t, Some(&b.y))?;
    let n = b.len();
    let schema = model.schema();
    let cfg = model.config();
    let eps = rng.normal_matrix(n, cfg.encoder_noise());
    let (x_in, y_in) = if cfg.corruption_std > 0.0 {
        (
            corrupt(&b.x, &schema.feature_kinds, cfg.corruption_std, rng),
            corrupt(&b.y, &schema.outcome_kinds, cfg.corruption_std, rng),
        )
    } else {
        (b.x.clone(), b.y.clone())
    };
    let encoder = model.net(Net::Encoder);
    let recon_net = model.net(Net::Reconstructor);
    let (z_hat, tape_e) = encoder.forward(&model.encoder_input(&x_in, &b.t, &y_in, &eps)?, Dropout::Sample(rng))?;
    let (out, tape_r) = recon_net.forward(&z_hat, Dropout::Sample(rng))?;
    let recon = model.split_reconstruction(&out);
    let loss = mean(&reconstruction_loss(&b.x, &b.t, &b.y, &recon, schema)?);

    let target = Matrix::hcat(&[&b.x, &b.t, &b.y])?;
    let upstream = rowwise_loss_grad(&target, &out, &schema.record_kinds(), 1.0 / n as f64);
    let (g_r, d_zhat) = recon_net.backward(&tape_r, &upstream)?;
    let (g_e, _) = encoder.backward(&tape_e, &d_zhat)?;
    let mut grads = ModelGrads::default();
    grads.insert(Net::Encoder, g_e);
    grads.insert(Net::Reconstructor, g_r);
    Ok((loss, grads))
}

/// Mean `−V` over the batch and its gradient for the discriminator.
pub fn discriminator_pass(model: &CeganModel, b: &Batch, rng: &mut RngStream) -> Result<(f64, ModelGrads)> {
    model.check_record(&b.x, &b.t, Some(&b.y))?;
    let n = b.len() as f64;
    let g = generator_forward(model, b, rng)?;
    let disc = model.net(Net::Discriminator);
    let enc_tuple = Tuple4 { z: g.z_hat, x: b.x.clone(), t: b.t.clone(), y: b.y.clone() };
    let dec_tuple = Tuple4 { z: g.z, x: b.x.clone(), t: b.t.clone(), y: g.y_hat };
    let (p1, tape1) = disc.forward(&model.discriminator_input(&enc_tuple)?, Dropout::Sample(rng))?;
    let (p2, tape2) = disc.forward(&model.discriminator_input(&dec_tuple)?, Dropout::Sample(rng))?;
    let v = crate::model::value_function(p1.as_slice(), p2.as_slice())?;
    let loss = -mean(&v);
    // d(−V̄)/dp1 = −1/(n p1), d(−V̄)/dp2 = 1/(n (1 − p2))
    let (mut gd, _) = disc.backward(&tape1, &d_log(p1.as_slice(), -1.0 / n))?;
    let (gd2, _) = disc.backward(&tape2, &d_log1m(p2.as_slice(), -1.0 / n))?;
    gd.add_assign(&gd2);
    let mut grads = ModelGrads::default();
    grads.insert(Net::Discriminator, gd);
    Ok((loss, grads))
}

/// Mean `V + α·L_P` (or its non-saturating variant) and its gradient for
/// the encoder, inference subnetwork and prediction decoder.
pub fn generator_pass(
    model: &CeganModel,
    b: &Batch,
    alpha: f64,
    mode: GeneratorLoss,
    rng: &mut RngStream,
) -> Result<(f64, ModelGrads)> {
    model.check_record(&b.x, &b.t, Some(&b.y))?;
    let n = b.len() as f64;
    let schema = model.schema();
    let (dz, dx) = (model.latent_dim(), schema.x_dim());
    let g = generator_forward(model, b, rng)?;
    let disc = model.net(Net::Discriminator);
    let enc_tuple = Tuple4 { z: g.z_hat.clone(), x: b.x.clone(), t: b.t.clone(), y: b.y.clone() };
    let dec_tuple = Tuple4 { z: g.z.clone(), x: b.x.clone(), t: b.t.clone(), y: g.y_hat.clone() };
    let (p1, tape1) = disc.forward(&model.discriminator_input(&enc_tuple)?, Dropout::Sample(rng))?;
    let (p2, tape2) = disc.forward(&model.discriminator_input(&dec_tuple)?, Dropout::Sample(rng))?;
    let (p1, p2) = (p1.as_slice(), p2.as_slice());

    let (adv, up1, up2) = match mode {
        GeneratorLoss::Saturating => (
            mean(&crate::model::value_function(p1, p2)?),
            d_log(p1, 1.0 / n),
            d_log1m(p2, 1.0 / n),
        ),
        GeneratorLoss::NonSaturating => {
            let v: Vec<f64> = p1.iter().zip(p2).map(|(&a, &b)| -(1.0 - a).ln() - b.ln()).collect();
            (mean(&v), d_log1m(p1, -1.0 / n), d_log(p2, -1.0 / n))
        }
    };
    let l_p = mean(&rowwise_loss(&b.y, &g.y_hat, &schema.outcome_kinds)?);
    let loss = adv + alpha * l_p;

    let (_, d_in1) = disc.backward(&tape1, &up1)?;
    let (_, d_in2) = disc.backward(&tape2, &up2)?;
    let d_zhat = d_in1.slice_cols(0, dz);
    let mut d_z = d_in2.slice_cols(0, dz);
    let mut d_yhat = d_in2.slice_cols(dz + dx + 1, d_in2.cols());
    if alpha != 0.0 {
        d_yhat.add_assign(&rowwise_loss_grad(&b.y, &g.y_hat, &schema.outcome_kinds, alpha / n));
    }
    let predictor = model.net(Net::Predictor);
    let (g_p, d_pin) = predictor.backward(&g.tape_p, &d_yhat)?;
    d_z.add_assign(&d_pin.slice_cols(0, dz));
    let (g_i, _) = model.net(Net::Inference).backward(&g.tape_i, &d_z)?;
    let (g_e, _) = model.net(Net::Encoder).backward(&g.tape_e, &d_zhat)?;
    let mut grads = ModelGrads::default();
    grads.insert(Net::Encoder, g_e);
    grads.insert(Net::Inference, g_i);
    grads.insert(Net::Predictor, g_p);
    Ok((loss, grads))
}

/// Mean `L_P` alone through the inference subnetwork and prediction decoder.
pub fn prediction_pass(model: &CeganModel, b: &Batch, rng: &mut RngStream) -> Result<(f64, ModelGrads)> {
    model.check_record(&b.x, &b.t, Some(&b.y))?;
    let n = b.len();
    let cfg = model.config();
    let eps_i = rng.normal_matrix(n, cfg.inference_noise());
    let eps_p = rng.normal_matrix(n, cfg.predictor_noise());
    let inference = model.net(Net::Inference);
    let predictor = model.net(Net::Predictor);
    let (z, tape_i) = inference.forward(&model.inference_input(&b.x, &b.t, &eps_i)?, Dropout::Sample(rng))?;
    let (y_hat, tape_p) = predictor.forward(&model.predictor_input(&z, &b.x, &b.t, &eps_p)?, Dropout::Sample(rng))?;
    let kinds = &model.schema().outcome_kinds;
    let loss = mean(&rowwise_loss(&b.y, &y_hat, kinds)?);
    let up = rowwise_loss_grad(&b.y, &y_hat, kinds, 1.0 / n as f64);
    let (g_p, d_pin) = predictor.backward(&tape_p, &up)?;
    let (g_i, _) = inference.backward(&tape_i, &d_pin.slice_cols(0, model.latent_dim()))?;
    let mut grads = ModelGrads::default();
    grads.insert(Net::Inference, g_i);
    grads.insert(Net::Predictor, g_p);
    Ok((loss, grads))
}

/// Mean binary cross-entropy of `t` against `q(t = 1 | x)`.
pub fn propensity_pass(model: &CeganModel, b: &Batch, rng: &mut RngStream) -> Result<(f64, ModelGrads)> {
    model.check_record(&b.x, &b.t, None)?;
    let net = model.net(Net::Propensity);
    let (q, tape) = net.forward(&b.x, Dropout::Sample(rng))?;
    let kinds = [Kind::Binary];
    let loss = mean(&rowwise_loss(&b.t, &q, &kinds)?);
    let up = rowwise_loss_grad(&b.t, &q, &kinds, 1.0 / b.len() as f64);
    let (g, _) = net.backward(&tape, &up)?;
    let mut grads = ModelGrads::default();
    grads.insert(Net::Propensity, g);
    Ok((loss, grads))
}
