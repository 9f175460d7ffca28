//! Fully connected networks with exact reverse-mode gradients.
//!
//! A network is a stack of affine layers `h = a·W + b` (row-major batches,
//! `W` of shape `(n_in, n_out)`), ReLU on every hidden layer, inverted
//! dropout after each hidden activation during training, and an output
//! activation that is either identity, a clamped sigmoid, or a per-column
//! mix of the two.

use serde::{Deserialize, Serialize};

use super::{Matrix, RngStream};
use crate::error::{Error, Result};

/// Probabilities emitted by sigmoid outputs are clamped to `[PROB_EPS, 1 - PROB_EPS]`.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HiddenActivation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputActivation {
    Identity,
    Sigmoid,
    /// `true` marks a sigmoid column, `false` an identity column.
    PerColumn(Vec<bool>),
}

impl OutputActivation {
    fn is_sigmoid(&self, col: usize) -> bool {
        match self {
            OutputActivation::Identity => false,
            OutputActivation::Sigmoid => true,
            OutputActivation::PerColumn(flags) => flags[col],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
    pub dropout: f64,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        output_activation: OutputActivation,
        dropout: f64,
    ) -> Self {
        Self {
            input_dim,
            hidden_dims,
            output_dim,
            hidden_activation: HiddenActivation::Relu,
            output_activation,
            dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::config("mlp.dims", "input and output dims must be > 0"));
        }
        if self.hidden_dims.is_empty() {
            return Err(Error::config("mlp.hidden_dims", "must be non-empty"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::config("mlp.hidden_dims", "hidden widths must be > 0"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(
                "mlp.dropout",
                format!("{} is outside [0, 1)", self.dropout),
            ));
        }
        if let OutputActivation::PerColumn(flags) = &self.output_activation {
            if flags.len() != self.output_dim {
                return Err(Error::shape(
                    "MlpSpec per-column activation",
                    self.output_dim,
                    flags.len(),
                ));
            }
        }
        Ok(())
    }

    /// `(n_in, n_out)` of every layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(n_in, n_out),
            bias: vec![0.0; n_out],
        }
    }

    fn len(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }
}

/// Per-layer parameter gradients; same shapes as the owning network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_for(spec: &MlpSpec) -> Self {
        Self {
            layers: spec
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_assign(&b.weight);
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Mutable access to flat entry `index` (weights of layer 0, bias of
    /// layer 0, weights of layer 1, ...).
    pub fn entry_mut(&mut self, index: usize) -> &mut f64 {
        flat_entry_mut(&mut self.layers, index)
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::with_capacity(layers.iter().map(Layer::len).sum());
    for l in layers {
        out.extend_from_slice(l.weight.as_slice());
        out.extend_from_slice(&l.bias);
    }
    out
}

fn flat_entry_mut(layers: &mut [Layer], mut index: usize) -> &mut f64 {
    for l in layers.iter_mut() {
        let nw = l.weight.as_slice().len();
        if index < nw {
            return &mut l.weight.as_mut_slice()[index];
        }
        index -= nw;
        if index < l.bias.len() {
            return &mut l.bias[index];
        }
        index -= l.bias.len();
    }
    panic!("parameter index out of range");
}

/// Weights and biases of one network plus its Adam moment state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
    pub adam_m: Vec<Layer>,
    pub adam_v: Vec<Layer>,
    pub adam_t: u64,
}

impl NetworkParams {
    fn zeros(spec: &MlpSpec) -> Self {
        let make = || -> Vec<Layer> {
            spec.layer_shapes()
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect()
        };
        Self {
            layers: make(),
            adam_m: make(),
            adam_v: make(),
            adam_t: 0,
        }
    }
}

/// How hidden-layer dropout is realized during a forward pass.
pub enum Dropout<'a> {
    /// No masks, no rescaling.
    Off,
    /// Sample fresh Bernoulli keep-masks from the stream.
    Sample(&'a mut RngStream),
}

/// Activations cached by [`Mlp::forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    version: u64,
    /// Input fed to each layer (post-dropout for hidden layers).
    inputs: Vec<Matrix>,
    /// Pre-activations of every layer, the last one being the output layer.
    pre: Vec<Matrix>,
    /// Inverted-dropout scale per hidden unit (0 or 1/(1-d)); `None` when off.
    masks: Vec<Option<Matrix>>,
    output: Matrix,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    /// Dropout scale matrices of the hidden layers (None when dropout was off).
    pub fn masks(&self) -> &[Option<Matrix>] {
        &self.masks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    spec: MlpSpec,
    params: NetworkParams,
    /// Bumped on every parameter mutation; tapes from older versions are rejected.
    #[serde(default)]
    version: u64,
}

#[inline]
fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid clamped to `[PROB_EPS, 1 - PROB_EPS]`.
#[inline]
pub fn clamped_sigmoid(a: f64) -> f64 {
    sigmoid(a).clamp(PROB_EPS, 1.0 - PROB_EPS)
}

impl Mlp {
    /// All-zero parameters.
    pub fn zeroed(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let params = NetworkParams::zeros(&spec);
        Ok(Self {
            spec,
            params,
            version: 0,
        })
    }

    /// Xavier-uniform weights, zero biases, zeroed Adam state.
    pub fn xavier(spec: MlpSpec, rng: &mut RngStream) -> Result<Self> {
        let mut net = Self::zeroed(spec)?;
        for layer in &mut net.params.layers {
            let (n_in, n_out) = layer.weight.shape();
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for w in layer.weight.as_mut_slice() {
                *w = rng.uniform_range(-limit, limit);
            }
        }
        Ok(net)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn param_count(&self) -> usize {
        self.params.layers.iter().map(Layer::len).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        flatten_layers(&self.params.layers)
    }

    pub fn param(&self, index: usize) -> f64 {
        self.flat_params()[index]
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        *flat_entry_mut(&mut self.params.layers, index) = value;
        self.version += 1;
    }

    /// Mutable access to the layers; counts as a parameter mutation.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.params.layers
    }

    pub fn forward(&self, input: &Matrix, dropout: Dropout<'_>) -> Result<(Matrix, Tape)> {
        if input.cols() != self.spec.input_dim {
            return Err(Error::shape(
                "Mlp::forward input columns",
                self.spec.input_dim,
                input.cols(),
            ));
        }
        let n_layers = self.params.layers.len();
        let keep = 1.0 - self.spec.dropout;
        let mut rng = match dropout {
            Dropout::Sample(r) if self.spec.dropout > 0.0 => Some(r),
            _ => None,
        };
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        let mut masks = Vec::with_capacity(n_layers - 1);
        let mut current = input.clone();
        for (li, layer) in self.params.layers.iter().enumerate() {
            let mut h = current.matmul(&layer.weight)?;
            for r in 0..h.rows() {
                for (v, b) in h.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            inputs.push(current);
            if li + 1 < n_layers {
                let mut act = h.map(|v| v.max(0.0));
                let mask = rng.as_deref_mut().map(|r| {
                    Matrix::from_fn(act.rows(), act.cols(), |_, _| {
                        if r.uniform() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                });
                if let Some(m) = &mask {
                    for (a, s) in act.as_mut_slice().iter_mut().zip(m.as_slice()) {
                        *a *= s;
                    }
                }
                masks.push(mask);
                pre.push(h);
                current = act;
            } else {
                let mut out = h.clone();
                for r in 0..out.rows() {
                    for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                        if self.spec.output_activation.is_sigmoid(c) {
                            *v = clamped_sigmoid(*v);
                        }
                    }
                }
                pre.push(h);
                current = out;
            }
        }
        if !current.is_finite() {
            return Err(Error::NonFinite("Mlp::forward output".into()));
        }
        let tape = Tape {
            version: self.version,
            inputs,
            pre,
            masks,
            output: current.clone(),
        };
        Ok((current, tape))
    }

    /// Forward pass without dropout, discarding the tape.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.forward(input, Dropout::Off).map(|(out, _)| out)
    }

    /// Reverse-mode pass: gradients of `Σ upstream ⊙ output` with respect to
    /// the parameters and to the network input.
    pub fn backward(&self, tape: &Tape, upstream: &Matrix) -> Result<(Gradients, Matrix)> {
        if tape.version != self.version {
            return Err(Error::StaleTape {
                recorded: tape.version,
                current: self.version,
            });
        }
        if upstream.shape() != tape.output.shape() {
            return Err(Error::shape(
                "Mlp::backward upstream",
                format!("{:?}", tape.output.shape()),
                format!("{:?}", upstream.shape()),
            ));
        }
        let n_layers = self.params.layers.len();
        let out_pre = &tape.pre[n_layers - 1];
        // d output / d pre-activation of the output layer
        let mut delta = Matrix::from_fn(upstream.rows(), upstream.cols(), |r, c| {
            let g = upstream.get(r, c);
            if self.spec.output_activation.is_sigmoid(c) {
                let s = sigmoid(out_pre.get(r, c));
                if !(PROB_EPS..=1.0 - PROB_EPS).contains(&s) {
                    0.0
                } else {
                    g * s * (1.0 - s)
                }
            } else {
                g
            }
        });
        let mut grads = Gradients::zeros_for(&self.spec);
        for li in (0..n_layers).rev() {
            let layer = &self.params.layers[li];
            grads.layers[li].weight = tape.inputs[li].t_matmul(&delta)?;
            let gb = &mut grads.layers[li].bias;
            for r in 0..delta.rows() {
                for (b, d) in gb.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            let mut d_in = delta.matmul_t(&layer.weight)?;
            if li > 0 {
                // back through dropout scale and the ReLU of hidden layer li-1
                let pre_h = &tape.pre[li - 1];
                let mask = &tape.masks[li - 1];
                for (i, v) in d_in.as_mut_slice().iter_mut().enumerate() {
                    if pre_h.as_slice()[i] <= 0.0 {
                        *v = 0.0;
                    } else if let Some(m) = mask {
                        *v *= m.as_slice()[i];
                    }
                }
            }
            delta = d_in;
        }
        Ok((grads, delta))
    }

    /// One bias-corrected Adam update. Rejects non-finite or mis-shaped
    /// gradients without touching the parameters.
    pub fn adam_step(&mut self, grads: &Gradients, cfg: &super::AdamConfig) -> Result<()> {
        if grads.layers.len() != self.params.layers.len()
            || grads
                .layers
                .iter()
                .zip(&self.params.layers)
                .any(|(g, p)| g.weight.shape() != p.weight.shape() || g.bias.len() != p.bias.len())
        {
            return Err(Error::shape(
                "Mlp::adam_step gradients",
                format!("{:?}", self.spec.layer_shapes()),
                "mismatched layer shapes",
            ));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        let p = &mut self.params;
        p.adam_t += 1;
        let t = p.adam_t as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let update = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        };
        for (li, g) in grads.layers.iter().enumerate() {
            let (layer, m, v) = (&mut p.layers[li], &mut p.adam_m[li], &mut p.adam_v[li]);
            for (((theta, mm), vv), &gg) in layer
                .weight
                .as_mut_slice()
                .iter_mut()
                .zip(m.weight.as_mut_slice())
                .zip(v.weight.as_mut_slice())
                .zip(g.weight.as_slice())
            {
                update(theta, mm, vv, gg);
            }
            for (((theta, mm), vv), &gg) in layer
                .bias
                .iter_mut()
                .zip(m.bias.iter_mut())
                .zip(v.bias.iter_mut())
                .zip(&g.bias)
            {
                update(theta, mm, vv, gg);
            }
        }
        self.version += 1;
        Ok(())
    }
}
