//! Twins-like semi-synthetic generator.
//!
//! A latent gestation variable drives treatment (being the heavier twin)
//! and a binary outcome (first-year mortality). Observed covariates are
//! noisy functions of gestation. Two proxy schemes are supported: treatment
//! driven by the normalized gestation alone, or by covariates plus a
//! ten-category gestation code with three bit-flipped one-hot replicas
//! appended as extra proxies. With `latent_confounding` the true gestation
//! column(s) are withheld from `x` and kept only in `z_true`.

use serde::{Deserialize, Serialize};

use super::{minmax_normalize, sigmoid, Dataset};
use crate::error::{Error, Result};
use crate::model::{DataSchema, Kind};
use crate::numerics::{Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyScheme {
    GestatScalar,
    Gestat10Onehot,
}

/// Law of the raw gestation variable before min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law")]
pub enum GestationLaw {
    Gamma { shape: f64 },
    Uniform,
}

/// `y(t) ~ Bern(σ(a·z̃ + b_t))`, both arms sharing one uniform draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutcomeModel {
    pub a: f64,
    pub b0: f64,
    pub b1: f64,
}

impl Default for OutcomeModel {
    fn default() -> Self {
        Self {
            a: -4.0,
            b0: -1.0,
            b1: -1.35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwinsLikeConfig {
    pub n: usize,
    /// Observed covariates besides gestation and proxies; the first half
    /// (rounded up) are continuous, the rest binary.
    pub covariates: usize,
    pub scheme: ProxyScheme,
    pub latent_confounding: bool,
    pub gestation: GestationLaw,
    /// Scalar scheme: `w ~ N(w_mean, w_std²)`.
    pub w_mean: f64,
    pub w_std: f64,
    /// Onehot scheme: per-bit flip probability of each replica.
    pub flip_prob: f64,
    pub replicas: usize,
    /// Onehot scheme: `w_o ~ N(0, w_o_var·I)`, `w_h ~ N(w_h_mean, w_h_var)`.
    pub w_o_var: f64,
    pub w_h_mean: f64,
    pub w_h_var: f64,
    pub outcome: OutcomeModel,
    pub seed: u64,
}

impl Default for TwinsLikeConfig {
    fn default() -> Self {
        Self {
            n: 10_286,
            covariates: 10,
            scheme: ProxyScheme::GestatScalar,
            latent_confounding: true,
            gestation: GestationLaw::Gamma { shape: 1.0 },
            w_mean: 10.0,
            w_std: 0.1,
            flip_prob: 0.1,
            replicas: 3,
            w_o_var: 0.1,
            w_h_mean: 9.0,
            w_h_var: 0.1,
            outcome: OutcomeModel::default(),
            seed: 0,
        }
    }
}

impl TwinsLikeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("generator.n", "need at least two subjects"));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::config("generator.flip_prob", "must lie in [0, 1]"));
        }
        if self.replicas == 0 {
            return Err(Error::config("generator.replicas", "must be >= 1"));
        }
        for (name, v) in [("generator.w_std", self.w_std), ("generator.w_o_var", self.w_o_var), ("generator.w_h_var", self.w_h_var)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and >= 0"));
            }
        }
        if let GestationLaw::Gamma { shape } = self.gestation {
            if !(shape > 0.0 && shape.is_finite()) {
                return Err(Error::config("generator.gestation.shape", "must be > 0"));
            }
        }
        if self.covariates == 0 && self.latent_confounding && self.scheme == ProxyScheme::GestatScalar {
            return Err(Error::config(
                "generator.covariates",
                "scalar scheme under latent confounding needs at least one covariate",
            ));
        }
        Ok(())
    }
}

/// Parameters drawn for one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinsParams {
    pub w: f64,
    pub w_o: Vec<f64>,
    pub w_h: f64,
    pub loadings: Vec<f64>,
}

fn gamma(shape: f64, rng: &mut RngStream) -> f64 {
    use rand_distr::{Distribution, Gamma};
    Gamma::new(shape, 1.0).expect("validated shape").sample(rng)
}

pub fn generate_twins_like(config: &TwinsLikeConfig) -> Result<Dataset> {
    generate_twins_like_with_params(config).map(|(d, _)| d)
}

pub fn generate_twins_like_with_params(config: &TwinsLikeConfig) -> Result<(Dataset, TwinsParams)> {
    config.validate()?;
    let n = config.n;
    let root = RngStream::new(config.seed);
    let mut param_rng = root.child(0);
    let mut rng = root.child(1);

    let raw: Vec<f64> = (0..n)
        .map(|_| match config.gestation {
            GestationLaw::Gamma { shape } => gamma(shape, &mut rng),
            GestationLaw::Uniform => rng.uniform(),
        })
        .collect();
    let g = minmax_normalize(&raw)?;
    let category: Vec<usize> = g.iter().map(|&v| ((v * 10.0) as usize).min(9)).collect();
    let g_mean = g.iter().sum::<f64>() / n as f64;
    let g_sd = (g.iter().map(|v| (v - g_mean).powi(2)).sum::<f64>() / n as f64).sqrt().max(1e-12);

    let n_cont = config.covariates.div_ceil(2);
    let loadings: Vec<f64> = (0..config.covariates)
        .map(|_| {
            let sign = if param_rng.bernoulli(0.5) { 1.0 } else { -1.0 };
            sign * param_rng.uniform_range(0.5, 1.5)
        })
        .collect();
    let w = config.w_mean + config.w_std * param_rng.normal();
    let w_o: Vec<f64> = (0..config.covariates)
        .map(|_| config.w_o_var.sqrt() * param_rng.normal())
        .collect();
    let w_h = config.w_h_mean + config.w_h_var.sqrt() * param_rng.normal();

    let mut cov = Matrix::zeros(n, config.covariates);
    for i in 0..n {
        let s = (g[i] - g_mean) / g_sd;
        for j in 0..config.covariates {
            let v = if j < n_cont {
                loadings[j] * s + rng.normal()
            } else {
                rng.bernoulli(sigmoid(loadings[j] * s)) as u8 as f64
            };
            cov.set(i, j, v);
        }
    }

    let mut t = Vec::with_capacity(n);
    for i in 0..n {
        let logit = match config.scheme {
            ProxyScheme::GestatScalar => w * g[i],
            ProxyScheme::Gestat10Onehot => {
                let lin: f64 = cov.row(i).iter().zip(&w_o).map(|(a, b)| a * b).sum();
                lin + w_h * (category[i] as f64 / 10.0 - 0.1)
            }
        };
        t.push(rng.bernoulli(sigmoid(logit)) as u8);
    }

    let om = config.outcome;
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for &gi in &g {
        let u = rng.uniform();
        y0.push((u < sigmoid(om.a * gi + om.b0)) as u8 as f64);
        y1.push((u < sigmoid(om.a * gi + om.b1)) as u8 as f64);
    }
    let y: Vec<f64> = (0..n).map(|i| if t[i] == 1 { y1[i] } else { y0[i] }).collect();

    let mut kinds: Vec<Kind> = (0..config.covariates)
        .map(|j| if j < n_cont { Kind::Continuous } else { Kind::Binary })
        .collect();
    let mut blocks = vec![cov];
    let onehot = |c: usize| -> Vec<f64> { (0..10).map(|k| (k == c) as u8 as f64).collect() };
    match config.scheme {
        ProxyScheme::GestatScalar => {
            if !config.latent_confounding {
                blocks.push(Matrix::column(g.clone()));
                kinds.push(Kind::Continuous);
            }
        }
        ProxyScheme::Gestat10Onehot => {
            if !config.latent_confounding {
                blocks.push(Matrix::from_fn(n, 10, |i, k| onehot(category[i])[k]));
                kinds.extend([Kind::Binary; 10]);
            }
            for _ in 0..config.replicas {
                let mut rep = Matrix::zeros(n, 10);
                for (i, &c) in category.iter().enumerate() {
                    for k in 0..10 {
                        let bit = (k == c) as u8;
                        let flipped = if rng.bernoulli(config.flip_prob) { 1 - bit } else { bit };
                        rep.set(i, k, flipped as f64);
                    }
                }
                blocks.push(rep);
                kinds.extend([Kind::Binary; 10]);
            }
        }
    }
    let refs: Vec<&Matrix> = blocks.iter().collect();
    let x = Matrix::hcat(&refs)?;
    let z_true = Matrix::from_fn(n, 2, |i, k| if k == 0 { g[i] } else { category[i] as f64 });
    let schema = DataSchema::new(kinds, vec![Kind::Binary])?;
    let data = Dataset::new(
        schema,
        x,
        t,
        Matrix::column(y),
        Some((Matrix::column(y0), Matrix::column(y1))),
        Some(z_true),
    )?;
    Ok((data, TwinsParams { w, w_o, w_h, loadings }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flip_replicas_equal_true_onehot() {
        let cfg = TwinsLikeConfig {
            n: 500,
            scheme: ProxyScheme::Gestat10Onehot,
            flip_prob: 0.0,
            latent_confounding: false,
            ..Default::default()
        };
        let d = generate_twins_like(&cfg).unwrap();
        let c = cfg.covariates;
        assert_eq!(d.schema().x_dim(), c + 10 + 30);
        let x = d.x();
        for i in 0..d.len() {
            let truth = &x.row(i)[c..c + 10];
            assert_eq!(truth.iter().sum::<f64>(), 1.0);
            for r in 0..3 {
                let start = c + 10 + 10 * r;
                assert_eq!(&x.row(i)[start..start + 10], truth);
            }
            let cat = d.z_true().unwrap().get(i, 1) as usize;
            assert_eq!(truth[cat], 1.0);
        }
    }

    #[test]
    fn latent_flag_controls_gestation_column() {
        let base = TwinsLikeConfig { n: 300, ..Default::default() };
        let hidden = generate_twins_like(&base).unwrap();
        let shown = generate_twins_like(&TwinsLikeConfig { latent_confounding: false, ..base.clone() }).unwrap();
        assert_eq!(hidden.schema().x_dim(), base.covariates);
        assert_eq!(shown.schema().x_dim(), base.covariates + 1);
        let g = shown.x().col_vec(base.covariates);
        assert_eq!(g, hidden.z_true().unwrap().col_vec(0));
    }

    #[test]
    fn outcome_rates_near_calibration_targets() {
        let d = generate_twins_like(&TwinsLikeConfig { seed: 3, ..Default::default() }).unwrap();
        let (y0, y1) = d.potential_outcomes().unwrap();
        let (r0, r1) = (y0.mean(), y1.mean());
        assert!((r0 - 0.2164).abs() < 0.03, "y0 rate {r0}");
        assert!((r1 - 0.1532).abs() < 0.03, "y1 rate {r1}");
        // coupled draws: the heavier twin never dies when the lighter survives
        assert!(y1.as_slice().iter().zip(y0.as_slice()).all(|(a, b)| a <= b));
    }

    #[test]
    fn deterministic_and_validated() {
        let cfg = TwinsLikeConfig { n: 200, scheme: ProxyScheme::Gestat10Onehot, flip_prob: 0.5, seed: 9, ..Default::default() };
        assert_eq!(generate_twins_like(&cfg).unwrap(), generate_twins_like(&cfg).unwrap());
        assert!(generate_twins_like(&TwinsLikeConfig { flip_prob: 1.5, ..cfg.clone() }).is_err());
        assert!(generate_twins_like(&TwinsLikeConfig { replicas: 0, ..cfg }).is_err());
    }

    /// Empirical P(t=1) per bin of z̃ against the mean of σ(w z̃) over the bin.
    fn max_treatment_law_gap(d: &Dataset, w: f64, bins: usize) -> f64 {
        let g = d.z_true().unwrap().col_vec(0);
        let mut n = vec![0usize; bins];
        let mut treated = vec![0.0; bins];
        let mut expected = vec![0.0; bins];
        for (i, &v) in g.iter().enumerate() {
            let b = ((v * bins as f64) as usize).min(bins - 1);
            n[b] += 1;
            treated[b] += d.t()[i] as f64;
            expected[b] += sigmoid(w * v);
        }
        (0..bins)
            .filter(|&b| n[b] >= 500)
            .map(|b| ((treated[b] - expected[b]) / n[b] as f64).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn scalar_treatment_law_matches_sigmoid() {
        let cfg = TwinsLikeConfig {
            n: 100_000,
            gestation: GestationLaw::Uniform,
            seed: 11,
            ..Default::default()
        };
        let (d, params) = generate_twins_like_with_params(&cfg).unwrap();
        assert!((params.w - 10.0).abs() < 0.5);
        let gap = max_treatment_law_gap(&d, params.w, 10);
        assert!(gap < 0.02, "gap {gap}");
    }

    /// Plug-in mutual information (nats) between a binary column and the category.
    fn plugin_mi(bits: &[f64], cat: &[f64]) -> f64 {
        let n = bits.len() as f64;
        let mut joint = [[0.0; 2]; 10];
        for (&b, &c) in bits.iter().zip(cat) {
            joint[c as usize][b as usize] += 1.0 / n;
        }
        let pb = [0, 1].map(|b| joint.iter().map(|r| r[b]).sum::<f64>());
        let mut mi = 0.0;
        for row in &joint {
            let pc: f64 = row.iter().sum();
            for b in 0..2 {
                if row[b] > 0.0 {
                    mi += row[b] * (row[b] / (pc * pb[b])).ln();
                }
            }
        }
        mi
    }

    #[test]
    fn half_flip_replicas_carry_no_information() {
        let cfg = TwinsLikeConfig {
            n: 100_000,
            scheme: ProxyScheme::Gestat10Onehot,
            flip_prob: 0.5,
            seed: 5,
            ..Default::default()
        };
        let d = generate_twins_like(&cfg).unwrap();
        let cat = d.z_true().unwrap().col_vec(1);
        let start = cfg.covariates;
        let mut worst: f64 = 0.0;
        for c in start..start + 30 {
            worst = worst.max(plugin_mi(&d.x().col_vec(c), &cat));
        }
        assert!(worst < 0.01, "MI {worst}");
        let informative = generate_twins_like(&TwinsLikeConfig { flip_prob: 0.1, ..cfg }).unwrap();
        assert!(plugin_mi(&informative.x().col_vec(start), &cat) > 0.01);
    }
}
