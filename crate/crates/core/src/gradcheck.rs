//! Central finite-difference check of every training loss against its
//! analytic gradient, on a tiny model.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::datagen::{generate_toy, generate_twins_like, Batch, Dataset, ProxyScheme, ToyGenConfig, TwinsLikeConfig};
use crate::error::Result;
use crate::model::{CeganModel, ModelConfig, Net};
use crate::numerics::RngStream;
use crate::training::{
    discriminator_pass, generator_pass, prediction_pass, propensity_pass, reconstruction_pass, GeneratorLoss,
    ModelGrads,
};

/// Losses covered by the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossId {
    Reconstruction,
    NegValue,
    Generator,
    GeneratorNonSaturating,
    Prediction,
    Propensity,
}

impl LossId {
    pub const ALL: [LossId; 6] = [
        LossId::Reconstruction,
        LossId::NegValue,
        LossId::Generator,
        LossId::GeneratorNonSaturating,
        LossId::Prediction,
        LossId::Propensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossId::Reconstruction => "L_R",
            LossId::NegValue => "-V",
            LossId::Generator => "V+a*L_P",
            LossId::GeneratorNonSaturating => "V+a*L_P (non-saturating)",
            LossId::Prediction => "L_P",
            LossId::Propensity => "propensity CE",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    /// Gradients smaller than this in both forms are compared absolutely.
    pub floor: f64,
    pub batch: usize,
    pub alpha: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
            batch: 8,
            alpha: 0.7,
        }
    }
}

/// Worst relative error over one layer of one network under one loss.
#[derive(Debug, Clone, Serialize)]
pub struct LayerCheck {
    pub fixture: String,
    pub loss: LossId,
    pub net: Net,
    pub layer: usize,
    pub params: usize,
    pub max_rel_error: f64,
    /// Flat index (within the network) of the worst entry.
    pub worst_index: usize,
    /// Analytic and finite-difference values at the worst entry.
    pub worst_pair: (f64, f64),
    /// Entries that only agreed at the smaller or larger step.
    pub refined: usize,
}

#[derive(Default)]
struct LayerAcc {
    params: usize,
    max_rel_error: f64,
    worst_index: usize,
    worst_pair: (f64, f64),
    refined: usize,
}

impl LayerAcc {
    fn add(&mut self, idx: usize, rel: f64, pair: (f64, f64), refined: bool) {
        if self.params == 0 || rel > self.max_rel_error {
            self.max_rel_error = rel;
            self.worst_index = idx;
            self.worst_pair = pair;
        }
        self.params += 1;
        self.refined += refined as usize;
    }
}

impl LayerCheck {
    pub fn group(&self) -> String {
        format!("{}.layer{}", self.net, self.layer)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub checks: Vec<LayerCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.max_rel_error < self.tolerance)
    }

    pub fn failures(&self) -> Vec<&LayerCheck> {
        self.checks.iter().filter(|c| !(c.max_rel_error < self.tolerance)).collect()
    }

    pub fn max_per_net(&self) -> BTreeMap<Net, f64> {
        let mut out = BTreeMap::new();
        for c in &self.checks {
            let e = out.entry(c.net).or_insert(0.0f64);
            *e = e.max(c.max_rel_error);
        }
        out
    }

    pub fn max_per_loss(&self) -> BTreeMap<LossId, f64> {
        let mut out = BTreeMap::new();
        for c in &self.checks {
            let e = out.entry(c.loss).or_insert(0.0f64);
            *e = e.max(c.max_rel_error);
        }
        out
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "max relative error per subnetwork (tolerance {:e}):", self.tolerance)?;
        for (net, e) in self.max_per_net() {
            writeln!(f, "  {:<16} {e:.3e}", net.name())?;
        }
        let refined: usize = self.checks.iter().map(|c| c.refined).sum();
        let total: usize = self.checks.iter().map(|c| c.params).sum();
        writeln!(f, "{total} entries checked, {refined} agreed only at step/10 or step*10")?;
        writeln!(f, "max relative error per loss:")?;
        for (loss, e) in self.max_per_loss() {
            writeln!(f, "  {:<26} {e:.3e}", loss.name())?;
        }
        for c in self.failures() {
            writeln!(
                f,
                "FAIL {} [{} / {}]: {:.3e} at parameter {} (analytic {:e}, numeric {:e})",
                c.group(),
                c.loss.name(),
                c.fixture,
                c.max_rel_error,
                c.worst_index,
                c.worst_pair.0,
                c.worst_pair.1
            )?;
        }
        write!(f, "{}", if self.passed() { "gradcheck: pass" } else { "gradcheck: FAIL" })
    }
}

fn tiny_config() -> ModelConfig {
    ModelConfig {
        corruption_std: 0.1,
        ..ModelConfig::default().with_hidden(vec![4, 4]).with_latent_dim(2)
    }
}

fn fixtures(seed: u64) -> Result<Vec<(String, Dataset)>> {
    let toy = generate_toy(&ToyGenConfig { n: 64, dim: 3, zeta: 1.0, seed })?;
    let twins = generate_twins_like(&TwinsLikeConfig {
        n: 64,
        covariates: 4,
        scheme: ProxyScheme::Gestat10Onehot,
        replicas: 1,
        seed,
        ..Default::default()
    })?;
    Ok(vec![("continuous".into(), toy), ("mixed".into(), twins)])
}

/// A freshly initialized model with a Xavier-scaled discriminator head and
/// small random biases, so no gradient is structurally zero.
fn random_model(data: &Dataset, rng: &RngStream) -> Result<CeganModel> {
    let mut model = CeganModel::new(data.schema().clone(), tiny_config(), &rng.child(0))?;
    let mut draw = rng.child(1);
    let head = model.net_mut(Net::Discriminator).layers_mut().last_mut().expect("non-empty network");
    let a = (6.0 / (head.weight.rows() + head.weight.cols()) as f64).sqrt();
    for w in head.weight.as_mut_slice() {
        *w = draw.uniform_range(-a, a);
    }
    for net in Net::ALL {
        for layer in model.net_mut(net).layers_mut() {
            for b in &mut layer.bias {
                *b = 0.1 * draw.normal();
            }
        }
    }
    Ok(model)
}

fn evaluate(loss: LossId, model: &CeganModel, b: &Batch, alpha: f64, rng: &RngStream) -> Result<(f64, ModelGrads)> {
    let mut r = rng.clone();
    match loss {
        LossId::Reconstruction => reconstruction_pass(model, b, &mut r),
        LossId::NegValue => discriminator_pass(model, b, &mut r),
        LossId::Generator => generator_pass(model, b, alpha, GeneratorLoss::Saturating, &mut r),
        LossId::GeneratorNonSaturating => generator_pass(model, b, alpha, GeneratorLoss::NonSaturating, &mut r),
        LossId::Prediction => prediction_pass(model, b, &mut r),
        LossId::Propensity => propensity_pass(model, b, &mut r),
    }
}

/// Layer index owning flat parameter `index`.
fn layer_of(model: &CeganModel, net: Net, mut index: usize) -> usize {
    for (l, (i, o)) in model.net(net).spec().layer_shapes().into_iter().enumerate() {
        let len = i * o + o;
        if index < len {
            return l;
        }
        index -= len;
    }
    unreachable!("parameter index out of range")
}

pub fn run_gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    run_gradcheck_with_hook(config, |_, _| {})
}

/// Like [`run_gradcheck`], but `hook` may tamper with each analytic
/// gradient before comparison. Used to prove that failures are caught.
pub fn run_gradcheck_with_hook(
    config: &GradcheckConfig,
    hook: impl Fn(LossId, &mut ModelGrads),
) -> Result<GradcheckReport> {
    let root = RngStream::new(config.seed);
    let mut checks = Vec::new();
    for (f, (name, data)) in fixtures(config.seed)?.into_iter().enumerate() {
        let fr = root.child(1 + f as u64);
        let model = random_model(&data, &fr.child(0))?;
        let b = data.batch(&(0..config.batch.min(data.len())).collect::<Vec<_>>());
        for (k, loss) in LossId::ALL.into_iter().enumerate() {
            let noise = fr.child(10 + k as u64);
            let (_, mut grads) = evaluate(loss, &model, &b, config.alpha, &noise)?;
            hook(loss, &mut grads);
            for (net, g) in grads.iter() {
                let analytic = g.flatten();
                let mut per_layer: BTreeMap<usize, LayerAcc> = BTreeMap::new();
                let mut probe = model.clone();
                let mut at = |idx: usize, v: f64| -> Result<f64> {
                    probe.net_mut(net).set_param(idx, v);
                    evaluate(loss, &probe, &b, config.alpha, &noise).map(|r| r.0)
                };
                let rel_err = |a: f64, n: f64| {
                    let r = (a - n).abs() / a.abs().max(n.abs()).max(config.floor);
                    if r.is_nan() { f64::INFINITY } else { r }
                };
                for (idx, &a) in analytic.iter().enumerate() {
                    let v = model.net(net).param(idx);
                    let h = config.step;
                    let (up, down) = (at(idx, v + h)?, at(idx, v - h)?);
                    let mut numeric = (up - down) / (2.0 * h);
                    let mut rel = rel_err(a, numeric);
                    let mut refined = false;
                    if rel >= config.tolerance {
                        // Near a ReLU switch or a saturated sigmoid the first
                        // step is dominated by non-smoothness or cancellation;
                        // a wrong gradient disagrees at every step size.
                        for h in [h / 10.0, h * 10.0] {
                            let n = (at(idx, v + h)? - at(idx, v - h)?) / (2.0 * h);
                            if rel_err(a, n) < rel {
                                numeric = n;
                                rel = rel_err(a, n);
                            }
                        }
                        refined = rel < config.tolerance;
                    }
                    at(idx, v)?;
                    per_layer.entry(layer_of(&model, net, idx)).or_default().add(idx, rel, (a, numeric), refined);
                }
                for (layer, acc) in per_layer {
                    checks.push(LayerCheck {
                        fixture: name.clone(),
                        loss,
                        net,
                        layer,
                        params: acc.params,
                        max_rel_error: acc.max_rel_error,
                        worst_index: acc.worst_index,
                        worst_pair: acc.worst_pair,
                        refined: acc.refined,
                    });
                }
            }
        }
    }
    Ok(GradcheckReport { tolerance: config.tolerance, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let r = run_gradcheck(&GradcheckConfig::default()).unwrap();
        assert!(r.passed(), "{r}");
        let nets: Vec<Net> = r.max_per_net().into_keys().collect();
        assert_eq!(nets, Net::ALL.to_vec());
        assert_eq!(r.max_per_loss().len(), LossId::ALL.len());
    }

    #[test]
    fn corrupted_gradient_is_reported_with_its_layer() {
        let r = run_gradcheck_with_hook(&GradcheckConfig::default(), |loss, g| {
            if loss == LossId::Reconstruction {
                if let Some(g) = g.get_mut(Net::Reconstructor) {
                    g.layers[1].bias[0] += 0.5;
                }
            }
        })
        .unwrap();
        assert!(!r.passed());
        let failed: Vec<String> = r.failures().iter().map(|c| c.group()).collect();
        assert!(failed.iter().all(|g| g == "reconstructor.layer1"), "{failed:?}");
        assert!(r.to_string().contains("FAIL reconstructor.layer1"));
    }
}
