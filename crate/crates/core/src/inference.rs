//! Monte-Carlo estimation of interventional outcomes and individual
//! treatment effects from a trained model.
//!
//! Draw `m` of an estimate uses the child stream `m` of the configured
//! seed, so results do not depend on how subjects or draws are batched.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rowwise_loss, CeganModel, Kind};
use crate::numerics::{Matrix, RngStream};

/// How the latent `z` is obtained for a subject with features `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZMode {
    /// Draw `t̃ ~ q(t|x)`, then `z ~ q_I(z | x, t̃)`.
    #[default]
    SampleT,
    /// `Σ_t q(t|x) · E_z[· | x, t]`, one `z` draw per arm.
    WeightedSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IteConfig {
    pub mc_samples: usize,
    pub z_mode: ZMode,
    /// Share `z` and `ε_P` draws between the two arms of an ITE.
    pub paired: bool,
    pub seed: u64,
}

impl Default for IteConfig {
    fn default() -> Self {
        Self {
            mc_samples: 100,
            z_mode: ZMode::SampleT,
            paired: true,
            seed: 0,
        }
    }
}

impl IteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_samples == 0 {
            return Err(Error::config("inference.mc_samples", "must be >= 1"));
        }
        Ok(())
    }
}

/// Per-subject expected outcomes under both interventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItEstimate {
    pub y1: Matrix,
    pub y0: Matrix,
    pub ite: Matrix,
}

impl ItEstimate {
    /// Mean estimated effect of the first outcome column.
    pub fn ate(&self) -> f64 {
        let c = self.ite.col_vec(0);
        c.iter().sum::<f64>() / c.len() as f64
    }

    /// CSV with columns `subject-id,y1_hat,y0_hat,ite_hat` (with `_k`
    /// suffixes for multi-column outcomes).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dy = self.ite.cols();
        let names = |base: &str| -> Vec<String> {
            if dy == 1 {
                vec![base.to_string()]
            } else {
                (0..dy).map(|k| format!("{base}_{k}")).collect()
            }
        };
        let mut header = vec!["subject-id".to_string()];
        header.extend(names("y1_hat"));
        header.extend(names("y0_hat"));
        header.extend(names("ite_hat"));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let wrap = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(&header).map_err(wrap)?;
        for i in 0..self.ite.rows() {
            let mut rec = vec![i.to_string()];
            for m in [&self.y1, &self.y0, &self.ite] {
                rec.extend(m.row(i).iter().map(f64::to_string));
            }
            w.write_record(&rec).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }
}

enum ZDraw {
    Single(Matrix),
    PerArm { z1: Matrix, z0: Matrix },
}

fn t_column(n: usize, t: u8) -> Matrix {
    Matrix::filled(n, 1, t as f64)
}

fn draw_z(model: &CeganModel, x: &Matrix, q: &[f64], mode: ZMode, mut rng: RngStream) -> Result<ZDraw> {
    let n = x.rows();
    match mode {
        ZMode::SampleT => {
            let t_tilde = Matrix::column(q.iter().map(|&p| rng.bernoulli(p) as u8 as f64).collect());
            Ok(ZDraw::Single(model.infer_z(x, &t_tilde, &mut rng)?))
        }
        ZMode::WeightedSum => Ok(ZDraw::PerArm {
            z1: model.infer_z(x, &t_column(n, 1), &mut rng)?,
            z0: model.infer_z(x, &t_column(n, 0), &mut rng)?,
        }),
    }
}

fn predict_from(
    model: &CeganModel,
    z: &ZDraw,
    x: &Matrix,
    q: &[f64],
    do_t: u8,
    mut rng: RngStream,
) -> Result<Matrix> {
    let t = t_column(x.rows(), do_t);
    match z {
        ZDraw::Single(z) => model.predict_y(z, x, &t, &mut rng),
        ZDraw::PerArm { z1, z0 } => {
            let mut y = model.predict_y(z1, x, &t, &mut rng)?;
            let y0 = model.predict_y(z0, x, &t, &mut rng)?;
            for i in 0..y.rows() {
                let w = q[i];
                for (a, b) in y.row_mut(i).iter_mut().zip(y0.row(i)) {
                    *a = w * *a + (1.0 - w) * b;
                }
            }
            Ok(y)
        }
    }
}

fn check(model: &CeganModel, x: &Matrix, config: &IteConfig) -> Result<()> {
    config.validate()?;
    if x.cols() != model.schema().x_dim() {
        return Err(Error::shape("inference x columns", model.schema().x_dim(), x.cols()));
    }
    Ok(())
}

/// Outcome draws under `do(t)`, one matrix per Monte-Carlo sample.
pub fn outcome_draws(model: &CeganModel, x: &Matrix, do_t: u8, config: &IteConfig) -> Result<Vec<Matrix>> {
    check(model, x, config)?;
    let q = model.propensity(x)?;
    let root = RngStream::new(config.seed);
    (0..config.mc_samples as u64)
        .map(|m| {
            let s = root.child(m);
            let z = draw_z(model, x, &q, config.z_mode, s.child(0))?;
            predict_from(model, &z, x, &q, do_t, s.child(1))
        })
        .collect()
}

fn average(draws: &[Matrix]) -> Matrix {
    let mut acc = draws[0].clone();
    for d in &draws[1..] {
        acc.add_assign(d);
    }
    acc.scale(1.0 / draws.len() as f64)
}

/// Monte-Carlo estimate of `E[y | x, do(t)]` for every row of `x`.
pub fn estimate_outcome(model: &CeganModel, x: &Matrix, do_t: u8, config: &IteConfig) -> Result<Matrix> {
    if do_t > 1 {
        return Err(Error::config("do_t", "treatment must be 0 or 1"));
    }
    Ok(average(&outcome_draws(model, x, do_t, config)?))
}

/// Both interventional outcomes and their difference. With `paired` set,
/// the two arms share every latent and decoder-noise draw, so the result
/// equals two calls of [`estimate_outcome`] with the same config.
pub fn estimate_ite(model: &CeganModel, x: &Matrix, config: &IteConfig) -> Result<ItEstimate> {
    check(model, x, config)?;
    let q = model.propensity(x)?;
    let root = RngStream::new(config.seed);
    let mut y1 = Matrix::zeros(x.rows(), model.schema().y_dim());
    let mut y0 = y1.clone();
    for m in 0..config.mc_samples as u64 {
        let s = root.child(m);
        if config.paired {
            let z = draw_z(model, x, &q, config.z_mode, s.child(0))?;
            y1.add_assign(&predict_from(model, &z, x, &q, 1, s.child(1))?);
            y0.add_assign(&predict_from(model, &z, x, &q, 0, s.child(1))?);
        } else {
            let z1 = draw_z(model, x, &q, config.z_mode, s.child(2))?;
            let z0 = draw_z(model, x, &q, config.z_mode, s.child(3))?;
            y1.add_assign(&predict_from(model, &z1, x, &q, 1, s.child(4))?);
            y0.add_assign(&predict_from(model, &z0, x, &q, 0, s.child(5))?);
        }
    }
    let k = 1.0 / config.mc_samples as f64;
    let (y1, y0) = (y1.scale(k), y0.scale(k));
    let ite = y1.sub(&y0)?;
    Ok(ItEstimate { y1, y0, ite })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Mean cross-entropy of the observed treatment against `q(t=1|x)`.
    pub treatment_ce: f64,
    /// Mean `|ẏ − ỹ|` between predictions conditioned on the observed
    /// treatment and on a propensity draw `t̃`, with common noise.
    pub outcome_gap: f64,
}

/// Intermediate-prediction errors on records `(x*, t*)`.
pub fn intermediate_diagnostics(
    model: &CeganModel,
    x: &Matrix,
    t: &Matrix,
    config: &IteConfig,
) -> Result<Diagnostics> {
    check(model, x, config)?;
    model.check_record(x, t, None)?;
    let n = x.rows();
    let q = model.propensity(x)?;
    let q_col = Matrix::column(q.clone());
    let ce = rowwise_loss(t, &q_col, &[Kind::Binary])?;
    let treatment_ce = ce.iter().sum::<f64>() / n as f64;

    let root = RngStream::new(config.seed);
    let mut gap = 0.0;
    for m in 0..config.mc_samples as u64 {
        let s = root.child(m);
        let mut tr = s.child(0);
        let t_tilde = Matrix::column(q.iter().map(|&p| tr.bernoulli(p) as u8 as f64).collect());
        let y_dot = model.predict_y(&model.infer_z(x, t, &mut s.child(1))?, x, t, &mut s.child(2))?;
        let y_tilde = model.predict_y(
            &model.infer_z(x, &t_tilde, &mut s.child(1))?,
            x,
            &t_tilde,
            &mut s.child(2),
        )?;
        gap += y_dot.sub(&y_tilde)?.as_slice().iter().map(|v| v.abs()).sum::<f64>();
    }
    let outcome_gap = gap / (config.mc_samples * n * model.schema().y_dim()) as f64;
    Ok(Diagnostics { treatment_ce, outcome_gap })
}
