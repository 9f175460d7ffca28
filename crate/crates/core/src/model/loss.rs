//! Per-sample losses: the kind-dependent `ℓ`, the reconstruction loss, the
//! prediction loss and the adversarial value function.

use super::{DataSchema, Kind};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, PROB_EPS};

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `ℓ(a, b)`: squared error for continuous values, cross-entropy of target
/// `a` against probability `b` for binary values.
pub fn elementwise_loss(a: &[f64], b: &[f64], kind: Kind) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("elementwise_loss", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(&a, &b)| scalar_loss(a, b, kind)).sum())
}

#[inline]
pub(crate) fn scalar_loss(a: f64, b: f64, kind: Kind) -> f64 {
    match kind {
        Kind::Continuous => (a - b) * (a - b),
        Kind::Binary => {
            let b = clamp_prob(b);
            -(a * b.ln() + (1.0 - a) * (1.0 - b).ln())
        }
    }
}

/// d ℓ / d b.
#[inline]
pub(crate) fn scalar_loss_grad(a: f64, b: f64, kind: Kind) -> f64 {
    match kind {
        Kind::Continuous => 2.0 * (b - a),
        Kind::Binary => {
            let b = clamp_prob(b);
            -a / b + (1.0 - a) / (1.0 - b)
        }
    }
}

/// Row-wise `ℓ` over matrices whose columns have the given kinds.
pub fn rowwise_loss(target: &Matrix, pred: &Matrix, kinds: &[Kind]) -> Result<Vec<f64>> {
    if target.shape() != pred.shape() || target.cols() != kinds.len() {
        return Err(Error::shape(
            "rowwise_loss",
            format!("{}x{}", target.rows(), kinds.len()),
            format!("{:?} vs {:?}", target.shape(), pred.shape()),
        ));
    }
    Ok((0..target.rows())
        .map(|r| {
            target
                .row(r)
                .iter()
                .zip(pred.row(r))
                .zip(kinds)
                .map(|((&a, &b), &k)| scalar_loss(a, b, k))
                .sum()
        })
        .collect())
}

/// Gradient of `weight · Σ_rows ℓ(target, pred)` with respect to `pred`.
pub(crate) fn rowwise_loss_grad(
    target: &Matrix,
    pred: &Matrix,
    kinds: &[Kind],
    weight: f64,
) -> Matrix {
    Matrix::from_fn(pred.rows(), pred.cols(), |r, c| {
        weight * scalar_loss_grad(target.get(r, c), pred.get(r, c), kinds[c])
    })
}

/// Output of the reconstruction decoder, split into its three heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub x: Matrix,
    pub t: Matrix,
    pub y: Matrix,
}

/// `L_R(w, w̄) = ℓ(x, x̄) + ℓ(t, t̄) + ℓ(y, ȳ)` per row.
pub fn reconstruction_loss(
    x: &Matrix,
    t: &Matrix,
    y: &Matrix,
    recon: &Reconstruction,
    schema: &DataSchema,
) -> Result<Vec<f64>> {
    let lx = rowwise_loss(x, &recon.x, &schema.feature_kinds)?;
    let lt = rowwise_loss(t, &recon.t, &[Kind::Binary])?;
    let ly = rowwise_loss(y, &recon.y, &schema.outcome_kinds)?;
    Ok(lx
        .iter()
        .zip(&lt)
        .zip(&ly)
        .map(|((a, b), c)| a + b + c)
        .collect())
}

/// `L_P(y, ŷ) = ℓ(y, ŷ)` per row.
pub fn prediction_loss(y: &Matrix, y_hat: &Matrix, schema: &DataSchema) -> Result<Vec<f64>> {
    rowwise_loss(y, y_hat, &schema.outcome_kinds)
}

/// `V = log D(ẑ, x, t, y) + log(1 − D(z, x, t, ŷ))` per row, given the
/// discriminator outputs on encoder tuples and decoder tuples.
pub fn value_function(d_encoder: &[f64], d_decoder: &[f64]) -> Result<Vec<f64>> {
    if d_encoder.len() != d_decoder.len() {
        return Err(Error::shape("value_function", d_encoder.len(), d_decoder.len()));
    }
    Ok(d_encoder
        .iter()
        .zip(d_decoder)
        .map(|(&p1, &p2)| clamp_prob(p1).ln() + (1.0 - clamp_prob(p2)).ln())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(elementwise_loss(&[1.0, 2.0], &[0.0, 0.0], Kind::Continuous).unwrap(), 5.0);
        let b = elementwise_loss(&[1.0], &[0.5], Kind::Binary).unwrap();
        assert!((b - 0.693147).abs() < 1e-6);
        assert_eq!(elementwise_loss(&[0.3, -2.0], &[0.3, -2.0], Kind::Continuous).unwrap(), 0.0);
        assert!(elementwise_loss(&[1.0], &[1.0, 2.0], Kind::Continuous).is_err());
    }

    #[test]
    fn binary_loss_minimized_at_target() {
        let at = elementwise_loss(&[1.0, 0.0], &[1.0 - 1e-7, 1e-7], Kind::Binary).unwrap();
        let off = elementwise_loss(&[1.0, 0.0], &[0.9, 0.1], Kind::Binary).unwrap();
        assert!(at < off && at >= 0.0);
    }

    #[test]
    fn reconstruction_hand_sum() {
        let schema = DataSchema::continuous(2, 1);
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let t = Matrix::column(vec![1.0]);
        let y = Matrix::column(vec![3.0]);
        let recon = Reconstruction {
            x: Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap(),
            t: Matrix::column(vec![0.5]),
            y: Matrix::column(vec![2.0]),
        };
        let l = reconstruction_loss(&x, &t, &y, &recon, &schema).unwrap();
        assert!((l[0] - (6.0 + 0.693147)).abs() < 1e-6);
    }

    #[test]
    fn value_function_values() {
        let v = value_function(&[0.5], &[0.5]).unwrap();
        assert!((v[0] + 1.386294).abs() < 1e-6);
        let v = value_function(&[1.0], &[0.0]).unwrap();
        assert!(v[0] < 0.0 && v[0] > -1e-6);
        // clamping caps V at 2·log(1 − 1e-7)
        assert!(v[0] <= 2.0 * (1.0 - 1e-7f64).ln() + 1e-15);
    }

    #[test]
    fn loss_gradient_matches_difference_quotient() {
        for (a, b, k) in [(1.0, 0.3, Kind::Binary), (0.0, 0.8, Kind::Binary), (0.4, -1.2, Kind::Continuous)] {
            let h = 1e-6;
            let fd = (scalar_loss(a, b + h, k) - scalar_loss(a, b - h, k)) / (2.0 * h);
            assert!((fd - scalar_loss_grad(a, b, k)).abs() < 1e-6);
        }
    }
}
