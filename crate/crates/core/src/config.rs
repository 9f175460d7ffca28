//! Declarative experiment configuration (TOML). Unknown keys are rejected
//! everywhere so that typos fail loudly.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datagen::{ingest_csv, read_sidecar, sidecar_path, SplitFractions, ToyGenConfig, TwinsLikeConfig};
use crate::error::{Error, Result};
use crate::eval::{DataSource, ExperimentSpec, MethodId, SweepAxis};
use crate::inference::IteConfig;
use crate::model::ModelConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    /// Defaults to `<path>.schema.json`.
    #[serde(default)]
    pub schema: Option<PathBuf>,
}

/// Exactly one data source. Generator seeds are replaced by seeds derived
/// from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSection {
    Toy(ToyGenConfig),
    TwinsLike(TwinsLikeConfig),
    Csv(CsvSource),
}

impl Default for GeneratorSection {
    fn default() -> Self {
        GeneratorSection::Toy(ToyGenConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum SweepSection {
    Zeta(Vec<f64>),
    FlipProb(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub methods: Vec<MethodId>,
    pub realizations: usize,
    pub knn_k: usize,
    pub split: SplitFractions,
    pub sweep: Option<SweepSection>,
    /// Metric drawn in the sweep chart (`sqrt-pehe` or `ate-error`).
    pub plot_metric: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            methods: MethodId::ALL.to_vec(),
            realizations: 10,
            knn_k: 5,
            split: SplitFractions::default(),
            sweep: None,
            plot_metric: "sqrt-pehe".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub generator: GeneratorSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub inference: IteConfig,
    pub eval: EvalSection,
}

impl ExperimentConfig {
    /// Parses and validates; relative CSV paths resolve against `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
        if let (GeneratorSection::Csv(c), Some(base)) = (&mut cfg.generator, base) {
            if c.path.is_relative() {
                c.path = base.join(&c.path);
            }
            if let Some(s) = c.schema.as_mut().filter(|s| s.is_relative()) {
                *s = base.join(&*s);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.generator {
            GeneratorSection::Toy(c) => c.validate()?,
            GeneratorSection::TwinsLike(c) => c.validate()?,
            GeneratorSection::Csv(c) => {
                let schema = c.schema.clone().unwrap_or_else(|| sidecar_path(&c.path));
                for p in [&c.path, &schema] {
                    if !p.is_file() {
                        return Err(Error::config("generator.path", format!("{} does not exist", p.display())));
                    }
                }
            }
        }
        match (&self.eval.sweep, &self.generator) {
            (None, _)
            | (Some(SweepSection::Zeta(_)), GeneratorSection::Toy(_))
            | (Some(SweepSection::FlipProb(_)), GeneratorSection::TwinsLike(_)) => {}
            _ => return Err(Error::config("eval.sweep", "axis does not match the generator kind")),
        }
        if let Some(SweepSection::Zeta(v) | SweepSection::FlipProb(v)) = &self.eval.sweep {
            if v.is_empty() {
                return Err(Error::config("eval.sweep", "grid must not be empty"));
            }
        }
        if !["sqrt-pehe", "ate-error"].contains(&self.eval.plot_metric.as_str()) {
            return Err(Error::config("eval.plot_metric", "must be `sqrt-pehe` or `ate-error`"));
        }
        if self.jobs == Some(0) {
            return Err(Error::config("jobs", "must be >= 1"));
        }
        self.spec(None)?.validate()
    }

    pub fn data_source(&self) -> Result<DataSource> {
        Ok(match &self.generator {
            GeneratorSection::Toy(c) => DataSource::Toy(c.clone()),
            GeneratorSection::TwinsLike(c) => DataSource::TwinsLike(c.clone()),
            GeneratorSection::Csv(c) => {
                let schema = c.schema.clone().unwrap_or_else(|| sidecar_path(&c.path));
                let sidecar = read_sidecar(&schema)?;
                DataSource::Fixed(Arc::new(ingest_csv(&c.path, &sidecar)?))
            }
        })
    }

    /// Experiment spec; CSV data is only read when `source` is `None`
    /// and the generator is a CSV file.
    pub fn spec(&self, source: Option<DataSource>) -> Result<ExperimentSpec> {
        let source = match (source, &self.generator) {
            (Some(s), _) => s,
            (None, GeneratorSection::Csv(_)) => DataSource::Toy(ToyGenConfig::default()),
            (None, _) => self.data_source()?,
        };
        Ok(ExperimentSpec {
            source,
            methods: self.eval.methods.clone(),
            realizations: self.eval.realizations,
            seed: self.seed,
            model: self.model.clone(),
            train: self.train.clone(),
            inference: self.inference.clone(),
            knn_k: self.eval.knn_k,
            split: self.eval.split,
            jobs: self.jobs.unwrap_or(1),
        })
    }

    pub fn sweep_axis(&self) -> Option<SweepAxis> {
        self.eval.sweep.as_ref().map(|s| match s {
            SweepSection::Zeta(v) => SweepAxis::Zeta(v.clone()),
            SweepSection::FlipProb(v) => SweepAxis::FlipProb(v.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        let c = ExperimentConfig::from_toml("", None).unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn sections_parse() {
        let text = r#"
            seed = 7
            jobs = 2
            [generator]
            kind = "twins-like"
            n = 500
            scheme = "gestat10-onehot"
            flip_prob = 0.3
            [model]
            hidden_dims = [32, 32]
            [train]
            max_iterations = 50
            alpha = 2.0
            [inference]
            mc_samples = 10
            z_mode = "weighted-sum"
            [eval]
            methods = ["lr1", "knn"]
            realizations = 3
            sweep = { flip-prob = [0.1, 0.3] }
        "#;
        let c = ExperimentConfig::from_toml(text, None).unwrap();
        assert_eq!(c.seed, 7);
        let GeneratorSection::TwinsLike(g) = &c.generator else { panic!() };
        assert_eq!((g.n, g.flip_prob), (500, 0.3));
        assert_eq!(c.train.max_iterations, 50);
        assert_eq!(c.eval.methods, vec![MethodId::Lr1, MethodId::Knn]);
        assert_eq!(c.sweep_axis(), Some(SweepAxis::FlipProb(vec![0.1, 0.3])));
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap(), None).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "sed = 1",
            "[train]\nmax_iteration = 5",
            "[generator]\nkind = \"toy\"\nzetta = 1.0",
            "[eval]\nmethod = [\"lr1\"]",
            "[generator]\nkind = \"gan\"",
            "[eval]\nmethods = [\"bart\"]",
        ] {
            let e = ExperimentConfig::from_toml(text, None).unwrap_err();
            assert!(matches!(e, Error::InvalidConfig { .. }), "{text}: {e}");
        }
    }

    #[test]
    fn invalid_values_name_their_field() {
        let e = ExperimentConfig::from_toml("[generator]\nkind = \"toy\"\nzeta = -1.0", None).unwrap_err();
        assert!(e.to_string().contains("zeta"), "{e}");
        let e = ExperimentConfig::from_toml("[eval]\nsweep = { flip-prob = [0.1] }", None).unwrap_err();
        assert!(e.to_string().contains("eval.sweep"), "{e}");
    }

    #[test]
    fn missing_csv_is_a_validation_error() {
        let e = ExperimentConfig::from_toml("[generator]\nkind = \"csv\"\npath = \"/nonexistent/data.csv\"", None)
            .unwrap_err();
        assert!(e.to_string().contains("does not exist"), "{e}");
    }
}
