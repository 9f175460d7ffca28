use serde::{Deserialize, Serialize};

use super::{sigmoid, Dataset};
use crate::error::{Error, Result};
use crate::model::DataSchema;
use crate::numerics::{Matrix, RngStream};

/// Synthetic latent-confounder benchmark: a two-component Gaussian latent
/// `z`, proxies `x = z + N(0, ζ²I)`, treatment driven by the last latent
/// coordinate and a sigmoid outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyGenConfig {
    pub n: usize,
    /// Shared latent and proxy dimension.
    pub dim: usize,
    /// Proxy noise std ζ.
    pub zeta: f64,
    pub seed: u64,
}

impl Default for ToyGenConfig {
    fn default() -> Self {
        Self {
            n: 5000,
            dim: 5,
            zeta: 0.0,
            seed: 0,
        }
    }
}

impl ToyGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("generator.n", "must be >= 1"));
        }
        if self.dim == 0 {
            return Err(Error::config("generator.dim", "must be >= 1"));
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(Error::config("generator.zeta", format!("{} is not a finite value >= 0", self.zeta)));
        }
        Ok(())
    }
}

pub fn generate_toy(config: &ToyGenConfig) -> Result<Dataset> {
    config.validate()?;
    let (n, d) = (config.n, config.dim);
    let mut rng = RngStream::new(config.seed);
    let mut z = Matrix::zeros(n, d);
    let mut x = Matrix::zeros(n, d);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..d {
            // mixture component mean is 0 (μ = 1) or -3 (μ = 0)
            let mu = rng.bernoulli(0.5) as u8 as f64;
            z.set(i, j, 3.0 * (mu - 1.0) + rng.normal());
        }
        for j in 0..d {
            let noise = rng.normal();
            x.set(i, j, z.get(i, j) + config.zeta * noise);
        }
        let ti = rng.bernoulli(sigmoid(0.25 * z.get(i, d - 1))) as u8;
        let s: f64 = z.row(i).iter().sum();
        let (a, b) = (sigmoid(s - 1.0), sigmoid(s + 1.0));
        y0.push(a);
        y1.push(b);
        y.push(if ti == 1 { b } else { a });
        t.push(ti);
    }
    Dataset::new(
        DataSchema::continuous(d, 1),
        x,
        t,
        Matrix::column(y),
        Some((Matrix::column(y0), Matrix::column(y1))),
        Some(z),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_zero_noise() {
        let d = generate_toy(&ToyGenConfig::default()).unwrap();
        assert_eq!(d.len(), 5000);
        assert_eq!(d.schema().x_dim(), 5);
        assert_eq!(d.x(), d.z_true().unwrap());
        assert!(d.y().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = ToyGenConfig { n: 200, zeta: 2.0, seed: 4, ..Default::default() };
        assert_eq!(generate_toy(&cfg).unwrap(), generate_toy(&cfg).unwrap());
        let other = ToyGenConfig { seed: 5, ..cfg };
        assert_ne!(generate_toy(&cfg).unwrap(), generate_toy(&other).unwrap());
    }

    #[test]
    fn true_ate_is_positive() {
        for seed in 0..5 {
            let d = generate_toy(&ToyGenConfig { n: 500, seed, zeta: 1.0, ..Default::default() }).unwrap();
            let (y0, y1) = d.potential_outcomes().unwrap();
            let ate = y1.sub(y0).unwrap().mean();
            assert!(ate > 0.0);
        }
    }

    #[test]
    fn proxy_variance_adds_noise_variance() {
        let zeta = 2.0;
        let d = generate_toy(&ToyGenConfig { n: 100_000, zeta, seed: 1, ..Default::default() }).unwrap();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        for j in 0..5 {
            let vx = var(&d.x().col_vec(j));
            let vz = var(&d.z_true().unwrap().col_vec(j));
            assert!(((vx - (vz + zeta * zeta)) / vx).abs() < 0.05, "column {j}");
        }
    }

    #[test]
    fn rejects_negative_zeta() {
        let err = generate_toy(&ToyGenConfig { zeta: -1.0, ..Default::default() }).unwrap_err();
        assert!(err.to_string().contains("zeta"));
    }
}
