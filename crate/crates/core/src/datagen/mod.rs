//! Ground-truth-bearing data: synthetic generators, validation, CSV
//! ingestion and export, normalization and train/validation/test splits.

mod csv_io;
mod dataset;
mod split;
mod toy;
mod twins;

pub use csv_io::{
    export_csv, ingest_csv, read_sidecar, sidecar_path, write_sidecar, SchemaSidecar,
    SIDECAR_SUFFIX,
};
pub use dataset::{Batch, Dataset};
pub use split::{split, split_indices, SplitFractions};
pub use toy::{generate_toy, ToyGenConfig};
pub use twins::{
    generate_twins_like, generate_twins_like_with_params, GestationLaw, OutcomeModel,
    ProxyScheme, TwinsLikeConfig, TwinsParams,
};

use crate::error::{Error, Result};

/// `(v − min) / (max − min)`; rejects constant or non-finite columns.
pub fn minmax_normalize(column: &[f64]) -> Result<Vec<f64>> {
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("minmax_normalize input".into()));
    }
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(min < max) {
        return Err(Error::Data("cannot min-max normalize a constant column".into()));
    }
    Ok(column.iter().map(|v| (v - min) / (max - min)).collect())
}

#[inline]
pub(crate) fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_normalize(&[0.0, 5.0, 10.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        let v = [0.0, 0.25, 1.0, 0.6];
        assert_eq!(minmax_normalize(&v).unwrap(), v.to_vec());
        assert!(minmax_normalize(&[2.0, 2.0]).is_err());
        let out = minmax_normalize(&[-3.0, 7.0, 1.0]).unwrap();
        assert_eq!(out.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(out.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }
}
