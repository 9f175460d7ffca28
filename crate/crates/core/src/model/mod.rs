//! The adversarial ITE model: a shared encoder, an inference subnetwork and a
//! prediction decoder forming the generator, a reconstruction decoder that
//! turns the encoder into a denoising autoencoder, a tuple discriminator, and
//! a separate propensity classifier.
//!
//! Noise enters every generator subnetwork by concatenation: `ε ~ N(0, I)` is
//! appended to the subnetwork input.

mod checkpoint;
mod loss;
mod schema;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT};
pub use loss::{
    elementwise_loss, prediction_loss, reconstruction_loss, rowwise_loss, value_function,
    Reconstruction,
};
pub(crate) use loss::rowwise_loss_grad;
pub use schema::{DataSchema, Kind};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Mlp, MlpSpec, OutputActivation, RngStream};

/// Architecture hyper-parameters shared by all subnetworks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub latent_dim: usize,
    /// Defaults to `latent_dim` when unset.
    pub encoder_noise_dim: Option<usize>,
    pub inference_noise_dim: Option<usize>,
    pub predictor_noise_dim: Option<usize>,
    pub hidden_dims: Vec<usize>,
    pub propensity_hidden_dims: Vec<usize>,
    pub dropout: f64,
    /// Whether the discriminator's hidden layers also use dropout in training.
    pub discriminator_dropout: bool,
    /// Std of additive Gaussian corruption on continuous encoder inputs in
    /// the reconstruction path.
    pub corruption_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 20,
            encoder_noise_dim: None,
            inference_noise_dim: None,
            predictor_noise_dim: None,
            hidden_dims: vec![200, 200, 200],
            propensity_hidden_dims: vec![200, 200, 200],
            dropout: 0.6,
            discriminator_dropout: true,
            corruption_std: 0.0,
        }
    }
}

impl ModelConfig {
    /// Same hidden widths for every subnetwork including the propensity model.
    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.propensity_hidden_dims = hidden.clone();
        self.hidden_dims = hidden;
        self
    }

    pub fn with_latent_dim(mut self, d: usize) -> Self {
        self.latent_dim = d;
        self
    }

    pub fn with_dropout(mut self, d: f64) -> Self {
        self.dropout = d;
        self
    }

    pub fn encoder_noise(&self) -> usize {
        self.encoder_noise_dim.unwrap_or(self.latent_dim)
    }

    pub fn inference_noise(&self) -> usize {
        self.inference_noise_dim.unwrap_or(self.latent_dim)
    }

    pub fn predictor_noise(&self) -> usize {
        self.predictor_noise_dim.unwrap_or(self.latent_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::config("model.latent_dim", "must be >= 1"));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::config("model.hidden_dims", "need non-empty positive widths"));
        }
        if self.propensity_hidden_dims.is_empty() || self.propensity_hidden_dims.contains(&0) {
            return Err(Error::config(
                "model.propensity_hidden_dims",
                "need non-empty positive widths",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("model.dropout", "must lie in [0, 1)"));
        }
        if !(self.corruption_std >= 0.0 && self.corruption_std.is_finite()) {
            return Err(Error::config("model.corruption_std", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Identifies one parameter group of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Net {
    Encoder,
    Inference,
    Predictor,
    Reconstructor,
    Discriminator,
    Propensity,
}

impl Net {
    pub const ALL: [Net; 6] = [
        Net::Encoder,
        Net::Inference,
        Net::Predictor,
        Net::Reconstructor,
        Net::Discriminator,
        Net::Propensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Net::Encoder => "encoder",
            Net::Inference => "inference",
            Net::Predictor => "predictor",
            Net::Reconstructor => "reconstructor",
            Net::Discriminator => "discriminator",
            Net::Propensity => "propensity",
        }
    }
}

impl std::fmt::Display for Net {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A batch of `(z, x, t, y)` tuples as seen by the discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuple4 {
    pub z: Matrix,
    pub x: Matrix,
    pub t: Matrix,
    pub y: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeganModel {
    schema: DataSchema,
    config: ModelConfig,
    encoder: Mlp,
    inference: Mlp,
    predictor: Mlp,
    reconstructor: Mlp,
    discriminator: Mlp,
    propensity: Mlp,
}

fn sigmoid_flags(kinds: &[Kind]) -> Vec<bool> {
    kinds.iter().map(|k| *k == Kind::Binary).collect()
}

impl CeganModel {
    fn specs(schema: &DataSchema, cfg: &ModelConfig) -> [MlpSpec; 6] {
        let (dx, dy, dz) = (schema.x_dim(), schema.y_dim(), cfg.latent_dim);
        let h = cfg.hidden_dims.clone();
        let d = cfg.dropout;
        let d_disc = if cfg.discriminator_dropout { d } else { 0.0 };
        [
            MlpSpec::new(dx + 1 + dy + cfg.encoder_noise(), h.clone(), dz, OutputActivation::Identity, d),
            MlpSpec::new(dx + 1 + cfg.inference_noise(), h.clone(), dz, OutputActivation::Identity, d),
            MlpSpec::new(
                dz + dx + 1 + cfg.predictor_noise(),
                h.clone(),
                dy,
                OutputActivation::PerColumn(sigmoid_flags(&schema.outcome_kinds)),
                d,
            ),
            MlpSpec::new(
                dz,
                h.clone(),
                dx + 1 + dy,
                OutputActivation::PerColumn(sigmoid_flags(&schema.record_kinds())),
                d,
            ),
            MlpSpec::new(dz + dx + 1 + dy, h, 1, OutputActivation::Sigmoid, d_disc),
            MlpSpec::new(dx, cfg.propensity_hidden_dims.clone(), 1, OutputActivation::Sigmoid, 0.0),
        ]
    }

    /// Xavier-initialized model; each subnetwork draws from its own child stream.
    pub fn new(schema: DataSchema, config: ModelConfig, rng: &RngStream) -> Result<Self> {
        schema.validate()?;
        config.validate()?;
        let specs = Self::specs(&schema, &config);
        let mut nets = Vec::with_capacity(6);
        for (i, spec) in specs.into_iter().enumerate() {
            nets.push(Mlp::xavier(spec, &mut rng.child(i as u64))?);
        }
        // discriminator starts undecided: D ≡ 0.5 on every tuple
        let head = nets[4].layers_mut().last_mut().expect("non-empty network");
        head.weight = Matrix::zeros(head.weight.rows(), head.weight.cols());
        Self::assemble(schema, config, nets)
    }

    /// All parameters zero.
    pub fn zeroed(schema: DataSchema, config: ModelConfig) -> Result<Self> {
        schema.validate()?;
        config.validate()?;
        let nets = Self::specs(&schema, &config)
            .into_iter()
            .map(Mlp::zeroed)
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(schema, config, nets)
    }

    fn assemble(schema: DataSchema, config: ModelConfig, nets: Vec<Mlp>) -> Result<Self> {
        let mut it = nets.into_iter();
        let mut next = || it.next().expect("six networks");
        Ok(Self {
            schema,
            config,
            encoder: next(),
            inference: next(),
            predictor: next(),
            reconstructor: next(),
            discriminator: next(),
            propensity: next(),
        })
    }

    pub fn schema(&self) -> &DataSchema {
        &self.schema
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn net(&self, which: Net) -> &Mlp {
        match which {
            Net::Encoder => &self.encoder,
            Net::Inference => &self.inference,
            Net::Predictor => &self.predictor,
            Net::Reconstructor => &self.reconstructor,
            Net::Discriminator => &self.discriminator,
            Net::Propensity => &self.propensity,
        }
    }

    pub fn net_mut(&mut self, which: Net) -> &mut Mlp {
        match which {
            Net::Encoder => &mut self.encoder,
            Net::Inference => &mut self.inference,
            Net::Predictor => &mut self.predictor,
            Net::Reconstructor => &mut self.reconstructor,
            Net::Discriminator => &mut self.discriminator,
            Net::Propensity => &mut self.propensity,
        }
    }

    pub(crate) fn check_record(&self, x: &Matrix, t: &Matrix, y: Option<&Matrix>) -> Result<()> {
        if x.cols() != self.schema.x_dim() {
            return Err(Error::shape("x columns", self.schema.x_dim(), x.cols()));
        }
        if t.cols() != 1 || t.rows() != x.rows() {
            return Err(Error::shape("t", format!("{}x1", x.rows()), format!("{:?}", t.shape())));
        }
        if let Some(y) = y {
            if y.cols() != self.schema.y_dim() || y.rows() != x.rows() {
                return Err(Error::shape(
                    "y",
                    format!("{}x{}", x.rows(), self.schema.y_dim()),
                    format!("{:?}", y.shape()),
                ));
            }
        }
        Ok(())
    }

    fn check_latent(&self, z: &Matrix, rows: usize) -> Result<()> {
        if z.cols() != self.latent_dim() || z.rows() != rows {
            return Err(Error::shape(
                "latent z",
                format!("{rows}x{}", self.latent_dim()),
                format!("{:?}", z.shape()),
            ));
        }
        Ok(())
    }

    pub(crate) fn encoder_input(&self, x: &Matrix, t: &Matrix, y: &Matrix, eps: &Matrix) -> Result<Matrix> {
        Matrix::hcat(&[x, t, y, eps])
    }

    pub(crate) fn inference_input(&self, x: &Matrix, t: &Matrix, eps: &Matrix) -> Result<Matrix> {
        Matrix::hcat(&[x, t, eps])
    }

    pub(crate) fn predictor_input(&self, z: &Matrix, x: &Matrix, t: &Matrix, eps: &Matrix) -> Result<Matrix> {
        Matrix::hcat(&[z, x, t, eps])
    }

    pub(crate) fn discriminator_input(&self, tuple: &Tuple4) -> Result<Matrix> {
        Matrix::hcat(&[&tuple.z, &tuple.x, &tuple.t, &tuple.y])
    }

    pub(crate) fn split_reconstruction(&self, out: &Matrix) -> Reconstruction {
        let dx = self.schema.x_dim();
        Reconstruction {
            x: out.slice_cols(0, dx),
            t: out.slice_cols(dx, dx + 1),
            y: out.slice_cols(dx + 1, out.cols()),
        }
    }

    /// `ẑ = f_E(x, t, y, ε_E)` with dropout off.
    pub fn encode(&self, x: &Matrix, t: &Matrix, y: &Matrix, rng: &mut RngStream) -> Result<Matrix> {
        self.check_record(x, t, Some(y))?;
        let eps = rng.normal_matrix(x.rows(), self.config.encoder_noise());
        self.encoder.predict(&self.encoder_input(x, t, y, &eps)?)
    }

    /// `z = f_I(x, t, ε_I)` with dropout off.
    pub fn infer_z(&self, x: &Matrix, t: &Matrix, rng: &mut RngStream) -> Result<Matrix> {
        self.check_record(x, t, None)?;
        let eps = rng.normal_matrix(x.rows(), self.config.inference_noise());
        self.inference.predict(&self.inference_input(x, t, &eps)?)
    }

    /// `ŷ = f_P(z, x, t, ε_P)` with dropout off. Binary outcome columns are
    /// probabilities.
    pub fn predict_y(&self, z: &Matrix, x: &Matrix, t: &Matrix, rng: &mut RngStream) -> Result<Matrix> {
        self.check_record(x, t, None)?;
        self.check_latent(z, x.rows())?;
        let eps = rng.normal_matrix(x.rows(), self.config.predictor_noise());
        self.predictor.predict(&self.predictor_input(z, x, t, &eps)?)
    }

    /// `(x̄, t̄, ȳ) = f_R(ẑ)` with dropout off.
    pub fn reconstruct(&self, z_hat: &Matrix) -> Result<Reconstruction> {
        self.check_latent(z_hat, z_hat.rows())?;
        let out = self.reconstructor.predict(z_hat)?;
        Ok(self.split_reconstruction(&out))
    }

    /// Probability that each tuple came from the encoder joint.
    pub fn discriminate(&self, tuple: &Tuple4) -> Result<Vec<f64>> {
        self.check_record(&tuple.x, &tuple.t, Some(&tuple.y))?;
        self.check_latent(&tuple.z, tuple.x.rows())?;
        Ok(self.discriminator.predict(&self.discriminator_input(tuple)?)?.into_vec())
    }

    /// Propensity score `q(t = 1 | x)` per row.
    pub fn propensity(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.schema.x_dim() {
            return Err(Error::shape("x columns", self.schema.x_dim(), x.cols()));
        }
        Ok(self.propensity.predict(x)?.into_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ModelConfig {
        ModelConfig::default().with_hidden(vec![4, 4]).with_latent_dim(3)
    }

    fn record(n: usize, schema: &DataSchema, rng: &mut RngStream) -> (Matrix, Matrix, Matrix) {
        let bin = |k: Kind, v: f64| if k == Kind::Binary { (v > 0.0) as u8 as f64 } else { v };
        let x = Matrix::from_fn(n, schema.x_dim(), |_, j| bin(schema.feature_kinds[j], rng.normal()));
        let t = Matrix::from_fn(n, 1, |_, _| rng.bernoulli(0.5) as u8 as f64);
        let y = Matrix::from_fn(n, schema.y_dim(), |_, j| bin(schema.outcome_kinds[j], rng.normal()));
        (x, t, y)
    }

    #[test]
    fn zero_weights_give_trivial_outputs() {
        let schema = DataSchema::new(vec![Kind::Continuous, Kind::Binary], vec![Kind::Binary]).unwrap();
        let model = CeganModel::zeroed(schema.clone(), small_config()).unwrap();
        let mut rng = RngStream::new(1);
        let (x, t, y) = record(5, &schema, &mut rng);
        let z_hat = model.encode(&x, &t, &y, &mut rng).unwrap();
        assert!(z_hat.as_slice().iter().all(|&v| v == 0.0));
        let z = model.infer_z(&x, &t, &mut rng).unwrap();
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
        let y_hat = model.predict_y(&z, &x, &t, &mut rng).unwrap();
        assert!(y_hat.as_slice().iter().all(|&v| v == 0.5));
        let r = model.reconstruct(&z_hat).unwrap();
        assert_eq!((r.x.cols(), r.t.cols(), r.y.cols()), (2, 1, 1));
        assert!(r.t.as_slice().iter().all(|&v| v == 0.5));
        assert_eq!(r.x.get(0, 0), 0.0);
        assert_eq!(r.x.get(0, 1), 0.5);
        let d = model.discriminate(&Tuple4 { z, x: x.clone(), t, y }).unwrap();
        assert!(d.iter().all(|&v| v == 0.5));
        assert!(model.propensity(&x).unwrap().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn continuous_outcome_zero_weights_predict_zero() {
        let schema = DataSchema::continuous(2, 2);
        let model = CeganModel::zeroed(schema.clone(), small_config()).unwrap();
        let mut rng = RngStream::new(1);
        let (x, t, _) = record(3, &schema, &mut rng);
        let z = Matrix::zeros(3, 3);
        let y_hat = model.predict_y(&z, &x, &t, &mut rng).unwrap();
        assert_eq!(y_hat.shape(), (3, 2));
        assert!(y_hat.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_latent_is_twenty_and_seeded_calls_repeat() {
        let schema = DataSchema::continuous(3, 1);
        let cfg = ModelConfig::default().with_hidden(vec![8]);
        let model = CeganModel::new(schema.clone(), cfg, &RngStream::new(4)).unwrap();
        let mut rng = RngStream::new(2);
        let (x, t, y) = record(4, &schema, &mut rng);
        let a = model.encode(&x, &t, &y, &mut RngStream::new(10)).unwrap();
        let b = model.encode(&x, &t, &y, &mut RngStream::new(10)).unwrap();
        assert_eq!(a.cols(), 20);
        assert_eq!(a, b);
        let z1 = model.infer_z(&x, &t, &mut RngStream::new(3)).unwrap();
        let z2 = model.infer_z(&x, &t, &mut RngStream::new(3)).unwrap();
        assert_eq!(z1, z2);
    }

    #[test]
    fn inference_noise_spreads_samples() {
        let schema = DataSchema::continuous(2, 1);
        let model = CeganModel::new(schema, small_config(), &RngStream::new(8)).unwrap();
        let x = Matrix::from_rows(&[vec![0.3, -0.7]]).unwrap();
        let t = Matrix::column(vec![1.0]);
        let mut rng = RngStream::new(5);
        let draws: Vec<f64> = (0..100)
            .map(|_| model.infer_z(&x, &t, &mut rng).unwrap().as_slice().iter().sum())
            .collect();
        let mean = draws.iter().sum::<f64>() / 100.0;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 100.0;
        assert!(var > 0.0);
    }

    #[test]
    fn probabilities_stay_inside_clamp_for_extreme_inputs() {
        let schema = DataSchema::continuous(2, 1);
        let model = CeganModel::new(schema, small_config(), &RngStream::new(8)).unwrap();
        let x = Matrix::from_rows(&[vec![1e6, -1e6], vec![-1e6, 1e6]]).unwrap();
        for p in model.propensity(&x).unwrap() {
            assert!((1e-7..=1.0 - 1e-7).contains(&p));
        }
    }

    #[test]
    fn all_subnetworks_compose_for_every_kind_mix() {
        let mut rng = RngStream::new(12);
        for &dx in &[1usize, 5, 49] {
            for &dy in &[1usize, 2] {
                for pattern in 0..4u32 {
                    let fk = (0..dx)
                        .map(|j| if (pattern >> (j % 2)) & 1 == 1 { Kind::Binary } else { Kind::Continuous })
                        .collect();
                    let ok = (0..dy)
                        .map(|j| if (pattern >> ((j + 1) % 2)) & 1 == 1 { Kind::Binary } else { Kind::Continuous })
                        .collect();
                    let schema = DataSchema::new(fk, ok).unwrap();
                    let model = CeganModel::new(schema.clone(), small_config(), &rng.child(0)).unwrap();
                    let (x, t, y) = record(3, &schema, &mut rng);
                    let z_hat = model.encode(&x, &t, &y, &mut rng).unwrap();
                    let z = model.infer_z(&x, &t, &mut rng).unwrap();
                    let y_hat = model.predict_y(&z, &x, &t, &mut rng).unwrap();
                    let r = model.reconstruct(&z_hat).unwrap();
                    reconstruction_loss(&x, &t, &y, &r, &schema).unwrap();
                    let d = model
                        .discriminate(&Tuple4 { z, x: x.clone(), t: t.clone(), y: y_hat })
                        .unwrap();
                    assert_eq!(d.len(), 3);
                    model.propensity(&x).unwrap();
                }
            }
        }
    }

    #[test]
    fn schema_mismatch_rejected() {
        let schema = DataSchema::continuous(2, 1);
        let model = CeganModel::zeroed(schema, small_config()).unwrap();
        let mut rng = RngStream::new(0);
        let x = Matrix::zeros(2, 3);
        let t = Matrix::zeros(2, 1);
        assert!(model.infer_z(&x, &t, &mut rng).is_err());
        assert!(model.propensity(&x).is_err());
        let z = Matrix::zeros(2, 5);
        assert!(model.reconstruct(&z).is_err());
    }
}
