use crate::error::{Error, Result};

fn check(y1: &[f64], y0: &[f64], y1_hat: &[f64], y0_hat: &[f64]) -> Result<()> {
    let n = y1.len();
    if n == 0 {
        return Err(Error::Data("effect metrics need at least one subject".into()));
    }
    for (name, len) in [("y0", y0.len()), ("y1_hat", y1_hat.len()), ("y0_hat", y0_hat.len())] {
        if len != n {
            return Err(Error::shape(format!("metric input {name}"), n, len));
        }
    }
    Ok(())
}

/// Mean squared error of the estimated per-subject effects. Report its
/// square root.
pub fn pehe(y1: &[f64], y0: &[f64], y1_hat: &[f64], y0_hat: &[f64]) -> Result<f64> {
    check(y1, y0, y1_hat, y0_hat)?;
    let mut s = 0.0;
    for i in 0..y1.len() {
        let e = (y1[i] - y0[i]) - (y1_hat[i] - y0_hat[i]);
        s += e * e;
    }
    Ok(s / y1.len() as f64)
}

/// Absolute error of the estimated average effect.
pub fn ate_error(y1: &[f64], y0: &[f64], y1_hat: &[f64], y0_hat: &[f64]) -> Result<f64> {
    check(y1, y0, y1_hat, y0_hat)?;
    let n = y1.len() as f64;
    let truth = y1.iter().zip(y0).map(|(a, b)| a - b).sum::<f64>() / n;
    let est = y1_hat.iter().zip(y0_hat).map(|(a, b)| a - b).sum::<f64>() / n;
    Ok((truth - est).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let (y1, y0, h1, h0) = ([1.0, 0.0], [0.0, 0.0], [1.0, 1.0], [0.0, 0.0]);
        assert_eq!(pehe(&y1, &y0, &h1, &h0).unwrap(), 0.5);
        assert!((pehe(&y1, &y0, &h1, &h0).unwrap().sqrt() - 0.707107).abs() < 5e-7);
        assert_eq!(ate_error(&y1, &y0, &h1, &h0).unwrap(), 0.5);
        assert_eq!(pehe(&y1, &y0, &y1, &y0).unwrap(), 0.0);
        assert_eq!(ate_error(&y1, &y0, &y1, &y0).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(pehe(&[1.0], &[0.0, 1.0], &[1.0], &[0.0]).is_err());
        assert!(ate_error(&[], &[], &[], &[]).is_err());
    }

    fn vecs(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let v = || proptest::collection::vec(-5.0..5.0f64, n);
        (v(), v(), v(), v())
    }

    proptest! {
        #[test]
        fn shift_invariance_and_jensen((y1, y0, h1, h0) in (1usize..50).prop_flat_map(vecs), c in -3.0..3.0f64) {
            let p = pehe(&y1, &y0, &h1, &h0).unwrap();
            let s1: Vec<f64> = h1.iter().map(|v| v + c).collect();
            let s0: Vec<f64> = h0.iter().map(|v| v + c).collect();
            prop_assert!((pehe(&y1, &y0, &s1, &s0).unwrap() - p).abs() < 1e-9);
            prop_assert!(ate_error(&y1, &y0, &h1, &h0).unwrap() <= p.sqrt() + 1e-12);
            let a = ate_error(&y1, &y0, &h1, &h0).unwrap();
            prop_assert_eq!(a, ate_error(&y0, &y1, &h0, &h1).unwrap());
        }
    }
}
