use std::collections::BTreeMap;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::baselines::{fit_knn, fit_lr1, fit_lr2, Counterfactuals};
use super::metrics::{ate_error, pehe};
use super::report::{EvalReport, MethodId, MethodOutcome, RealizationRecord, SplitMetrics};
use crate::datagen::{generate_toy, generate_twins_like, split, Dataset, SplitFractions, ToyGenConfig, TwinsLikeConfig};
use crate::error::{Error, Result};
use crate::inference::{estimate_ite, intermediate_diagnostics, IteConfig};
use crate::model::{CeganModel, ModelConfig, Tuple4};
use crate::numerics::{Matrix, RngStream};
use crate::training::{fit, fit_with_objective, Objective, TrainConfig, TrainTrace};

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Where each realization's data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Toy(ToyGenConfig),
    TwinsLike(TwinsLikeConfig),
    /// A fixed dataset; only the split changes between realizations.
    Fixed(Arc<Dataset>),
}

impl DataSource {
    /// Dataset of one realization; `seed` only matters for generators.
    pub fn realize(&self, seed: u64) -> Result<Dataset> {
        match self {
            DataSource::Toy(c) => generate_toy(&ToyGenConfig { seed, ..c.clone() }),
            DataSource::TwinsLike(c) => generate_twins_like(&TwinsLikeConfig { seed, ..c.clone() }),
            DataSource::Fixed(d) => Ok((**d).clone()),
        }
    }

    fn describe(&self) -> serde_json::Value {
        match self {
            DataSource::Toy(c) => serde_json::json!({ "toy": { "n": c.n, "dim": c.dim, "zeta": c.zeta } }),
            DataSource::TwinsLike(c) => {
                let mut v = serde_json::to_value(c).expect("serializable config");
                v.as_object_mut().expect("object").remove("seed");
                serde_json::json!({ "twins-like": v })
            }
            DataSource::Fixed(d) => {
                let mut h = Sha256::new();
                for m in [d.x(), d.y()] {
                    for v in m.as_slice() {
                        h.update(v.to_le_bytes());
                    }
                }
                h.update(d.t());
                serde_json::json!({ "fixed": hex(&h.finalize()) })
            }
        }
    }
}

/// Everything that determines an experiment's report.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub methods: Vec<MethodId>,
    pub realizations: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub inference: IteConfig,
    pub knn_k: usize,
    pub split: SplitFractions,
    /// Upper bound on concurrently running realizations.
    pub jobs: usize,
}

impl ExperimentSpec {
    pub fn new(source: DataSource) -> Self {
        Self {
            source,
            methods: MethodId::ALL.to_vec(),
            realizations: 50,
            seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            inference: IteConfig::default(),
            knn_k: 5,
            split: SplitFractions::default(),
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::config("eval.realizations", "must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("eval.methods", "must name at least one method"));
        }
        if self.knn_k == 0 {
            return Err(Error::config("eval.knn_k", "must be >= 1"));
        }
        if self.jobs == 0 {
            return Err(Error::config("jobs", "must be >= 1"));
        }
        self.model.validate()?;
        self.train.validate()?;
        self.inference.validate()
    }

    /// SHA-256 over everything that affects results (not `jobs`).
    pub fn fingerprint(&self) -> String {
        let doc = serde_json::json!({
            "source": self.source.describe(),
            "methods": self.methods,
            "realizations": self.realizations,
            "seed": self.seed,
            "model": self.model,
            "train": self.train,
            "inference": self.inference,
            "knn_k": self.knn_k,
            "split": self.split,
        });
        hex(&Sha256::digest(doc.to_string().as_bytes()))
    }
}

/// A trained model plus the inference settings used to query it.
#[derive(Debug, Clone)]
pub struct CeganEstimator {
    pub model: CeganModel,
    pub trace: TrainTrace,
    pub inference: IteConfig,
}

impl CeganEstimator {
    pub fn predict(&self, x: &Matrix) -> Result<Counterfactuals> {
        let est = estimate_ite(&self.model, x, &self.inference)?;
        Ok(Counterfactuals { y1: est.y1.col_vec(0), y0: est.y0.col_vec(0) })
    }
}

pub fn fit_cegan(
    train: &Dataset,
    valid: &Dataset,
    model: &ModelConfig,
    config: &TrainConfig,
    inference: &IteConfig,
) -> Result<CeganEstimator> {
    let (model, trace) = fit(train, valid, model, config)?;
    Ok(CeganEstimator { model, trace, inference: inference.clone() })
}

/// The inference subnetwork and prediction decoder trained on `L_P` alone.
pub fn fit_cegan_lp(
    train: &Dataset,
    valid: &Dataset,
    model: &ModelConfig,
    config: &TrainConfig,
    inference: &IteConfig,
) -> Result<CeganEstimator> {
    let (model, trace) = fit_with_objective(train, valid, model, config, Objective::PredictionOnly)?;
    Ok(CeganEstimator { model, trace, inference: inference.clone() })
}

/// Mean discriminator output on encoder tuples `(ẑ, x, t, y)` and decoder
/// tuples `(z, x, t, ŷ)` over `data`, dropout off.
pub fn discriminator_means(model: &CeganModel, data: &Dataset, seed: u64) -> Result<(f64, f64)> {
    let b = data.full_batch();
    let root = RngStream::new(seed);
    let z_hat = model.encode(&b.x, &b.t, &b.y, &mut root.child(0))?;
    let z = model.infer_z(&b.x, &b.t, &mut root.child(1))?;
    let y_hat = model.predict_y(&z, &b.x, &b.t, &mut root.child(2))?;
    let p_enc = model.discriminate(&Tuple4 { z: z_hat, x: b.x.clone(), t: b.t.clone(), y: b.y.clone() })?;
    let p_dec = model.discriminate(&Tuple4 { z, x: b.x, t: b.t, y: y_hat })?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok((mean(&p_enc), mean(&p_dec)))
}

fn split_metrics(data: &Dataset, cf: &Counterfactuals) -> Result<SplitMetrics> {
    let (y0, y1) = data
        .potential_outcomes()
        .ok_or_else(|| Error::Data("evaluation needs both potential outcomes".into()))?;
    let (y1, y0) = (y1.col_vec(0), y0.col_vec(0));
    Ok(SplitMetrics {
        sqrt_pehe: pehe(&y1, &y0, &cf.y1, &cf.y0)?.sqrt(),
        ate_error: ate_error(&y1, &y0, &cf.y1, &cf.y0)?,
    })
}

/// Seeds of one realization, all derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RealizationSeeds {
    pub data: u64,
    pub split: u64,
    pub train: u64,
    pub inference: u64,
}

pub fn realization_seeds(master: u64, index: usize) -> RealizationSeeds {
    let r = RngStream::new(master).child(index as u64);
    RealizationSeeds {
        data: r.child(0).next_u64(),
        split: r.child(1).next_u64(),
        train: r.child(2).next_u64(),
        inference: r.child(3).next_u64(),
    }
}

fn run_method(
    spec: &ExperimentSpec,
    method: MethodId,
    s: &RealizationSeeds,
    (train, valid, test): (&Dataset, &Dataset, &Dataset),
) -> Result<MethodOutcome> {
    let mut diagnostics = BTreeMap::new();
    let predict: Box<dyn Fn(&Matrix) -> Result<Counterfactuals>> = match method {
        MethodId::Lr1 => {
            let m = fit_lr1(train)?;
            Box::new(move |x| m.predict(x))
        }
        MethodId::Lr2 => {
            let m = fit_lr2(train)?;
            Box::new(move |x| m.predict(x))
        }
        MethodId::Knn => {
            let m = fit_knn(train, spec.knn_k)?;
            Box::new(move |x| m.predict(x))
        }
        MethodId::Cegan | MethodId::CeganLp => {
            let tc = TrainConfig { seed: s.train, ..spec.train.clone() };
            let ic = IteConfig { seed: s.inference, ..spec.inference.clone() };
            let est = if method == MethodId::Cegan {
                fit_cegan(train, valid, &spec.model, &tc, &ic)?
            } else {
                fit_cegan_lp(train, valid, &spec.model, &tc, &ic)?
            };
            let d = intermediate_diagnostics(&est.model, test.x(), &test.t_column(), &ic)?;
            diagnostics.insert("out/treatment-ce".to_string(), d.treatment_ce);
            diagnostics.insert("out/outcome-gap".to_string(), d.outcome_gap);
            if method == MethodId::Cegan {
                let (enc, dec) = discriminator_means(&est.model, valid, s.inference)?;
                diagnostics.insert("valid/d-encoder".to_string(), enc);
                diagnostics.insert("valid/d-decoder".to_string(), dec);
            }
            if let Some(it) = est.trace.best_iteration {
                diagnostics.insert("train/best-iteration".to_string(), it as f64);
            }
            Box::new(move |x| est.predict(x))
        }
    };
    Ok(MethodOutcome {
        method,
        in_sample: Some(split_metrics(train, &predict(train.x())?)?),
        out_sample: Some(split_metrics(test, &predict(test.x())?)?),
        diagnostics,
        error: None,
    })
}

fn run_realization(spec: &ExperimentSpec, index: usize) -> Result<RealizationRecord> {
    let s = realization_seeds(spec.seed, index);
    let data = spec.source.realize(s.data)?;
    let (train, valid, test) = split(&data, spec.split, s.split)?;
    let outcomes = spec
        .methods
        .iter()
        .map(|&m| {
            run_method(spec, m, &s, (&train, &valid, &test)).unwrap_or_else(|e| {
                log::warn!("realization {index}: {m} failed: {e}");
                MethodOutcome {
                    method: m,
                    in_sample: None,
                    out_sample: None,
                    diagnostics: BTreeMap::new(),
                    error: Some(e.to_string()),
                }
            })
        })
        .collect();
    log::info!("realization {index} done");
    Ok(RealizationRecord {
        index,
        data_seed: s.data,
        split_seed: s.split,
        train_seed: s.train,
        inference_seed: s.inference,
        outcomes,
    })
}

/// Runs every method on `R` independently generated and split datasets.
/// Realizations run on up to `jobs` threads; the report does not depend on it.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<EvalReport> {
    use rayon::prelude::*;
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Format(format!("thread pool: {e}")))?;
    let records: Vec<RealizationRecord> = pool.install(|| {
        (0..spec.realizations)
            .into_par_iter()
            .map(|i| run_realization(spec, i))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(EvalReport::from_records(spec.fingerprint(), spec.methods.clone(), records))
}

/// Generator parameter varied across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Toy proxy-noise std ζ.
    Zeta(Vec<f64>),
    /// Twins-like one-hot replica flip probability.
    FlipProb(Vec<f64>),
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::Zeta(_) => "zeta",
            SweepAxis::FlipProb(_) => "flip probability",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            SweepAxis::Zeta(v) | SweepAxis::FlipProb(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: String,
    pub points: Vec<SweepPoint>,
}

/// One experiment per grid value with the same master seed.
pub fn run_sweep(spec: &ExperimentSpec, axis: &SweepAxis) -> Result<SweepReport> {
    let mut points = Vec::new();
    for &value in axis.values() {
        let source = match (axis, &spec.source) {
            (SweepAxis::Zeta(_), DataSource::Toy(c)) => DataSource::Toy(ToyGenConfig { zeta: value, ..c.clone() }),
            (SweepAxis::FlipProb(_), DataSource::TwinsLike(c)) => {
                DataSource::TwinsLike(TwinsLikeConfig { flip_prob: value, ..c.clone() })
            }
            _ => {
                return Err(Error::config(
                    "eval.sweep",
                    format!("a {} sweep does not apply to this generator", axis.label()),
                ))
            }
        };
        log::info!("sweep {} = {value}", axis.label());
        let report = run_experiment(&ExperimentSpec { source, ..spec.clone() })?;
        points.push(SweepPoint { value, report });
    }
    Ok(SweepReport { axis: axis.label().to_string(), points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(methods: Vec<MethodId>, r: usize) -> ExperimentSpec {
        ExperimentSpec {
            methods,
            realizations: r,
            seed: 3,
            model: ModelConfig::default().with_hidden(vec![8, 8]).with_latent_dim(2),
            train: TrainConfig {
                max_iterations: 20,
                eval_every: 10,
                ..Default::default()
            },
            inference: IteConfig { mc_samples: 5, ..Default::default() },
            ..ExperimentSpec::new(DataSource::Toy(ToyGenConfig { n: 150, ..Default::default() }))
        }
    }

    #[test]
    fn single_realization_has_zero_std() {
        let r = run_experiment(&quick(vec![MethodId::Lr1], 1)).unwrap();
        assert_eq!(r.realizations, 1);
        for s in &r.summary {
            assert_eq!(s.std, 0.0);
            assert_eq!(s.count, 1);
        }
        assert_eq!(r.summary.len(), 4);
    }

    #[test]
    fn same_seed_same_report_regardless_of_jobs() {
        let spec = quick(MethodId::ALL.to_vec(), 3);
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&ExperimentSpec { jobs: 3, ..spec.clone() }).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(a.warnings.is_empty(), "{:?}", a.warnings);
        assert!(a.get(MethodId::Cegan, "valid", "d-encoder").is_some());
        assert!(a.get(MethodId::CeganLp, "out", "outcome-gap").is_some());
        assert_ne!(a.records[0].data_seed, a.records[1].data_seed);
    }

    #[test]
    fn failures_become_warnings() {
        let mut spec = quick(vec![MethodId::Lr1, MethodId::Knn], 2);
        spec.knn_k = 1000;
        let r = run_experiment(&spec).unwrap();
        assert_eq!(r.warnings.len(), 2);
        assert!(r.get(MethodId::Knn, "out", "sqrt-pehe").is_none());
        assert_eq!(r.get(MethodId::Lr1, "out", "sqrt-pehe").unwrap().count, 2);
    }

    #[test]
    fn fingerprint_ignores_jobs_but_not_seed() {
        let spec = quick(vec![MethodId::Lr1], 1);
        assert_eq!(spec.fingerprint(), ExperimentSpec { jobs: 4, ..spec.clone() }.fingerprint());
        assert_ne!(spec.fingerprint(), ExperimentSpec { seed: 4, ..spec.clone() }.fingerprint());
    }

    #[test]
    fn sweep_axis_must_match_generator() {
        let spec = quick(vec![MethodId::Lr1], 1);
        let s = run_sweep(&spec, &SweepAxis::Zeta(vec![0.0, 2.0])).unwrap();
        assert_eq!(s.points.len(), 2);
        assert!(run_sweep(&spec, &SweepAxis::FlipProb(vec![0.1])).is_err());
    }
}
