use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::StreamId;

pub const TRACE_CSV_HEADER: &str = "iter,l_r,d_loss,g_loss,val_l_p";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub l_r: Option<f64>,
    /// Mean `−V` over the discriminator steps of the iteration.
    pub d_loss: Option<f64>,
    /// Mean generator objective over the generator steps of the iteration.
    pub g_loss: Option<f64>,
    pub propensity_loss: Option<f64>,
    /// Present on evaluation iterations only.
    pub val_l_p: Option<f64>,
}

impl TraceRecord {
    pub fn new(iteration: usize) -> Self {
        Self {
            iteration,
            l_r: None,
            d_loss: None,
            g_loss: None,
            propensity_loss: None,
            val_l_p: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub streams: Vec<(String, StreamId)>,
    pub best_iteration: Option<usize>,
    /// Excluded from comparisons of traces across runs.
    pub wall_clock_secs: f64,
}

impl TrainTrace {
    pub fn new(streams: Vec<(String, StreamId)>) -> Self {
        Self {
            records: Vec::new(),
            streams,
            best_iteration: None,
            wall_clock_secs: 0.0,
        }
    }

    /// `(iteration, val_l_p)` for every evaluated iteration.
    pub fn validation_curve(&self) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.val_l_p.map(|v| (r.iteration, v)))
            .collect()
    }

    pub fn best_validation(&self) -> Option<f64> {
        self.validation_curve().into_iter().map(|(_, v)| v).reduce(f64::min)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        w.write_record(TRACE_CSV_HEADER.split(','))
            .map_err(|e| Error::Format(e.to_string()))?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                fmt(r.l_r),
                fmt(r.d_loss),
                fmt(r.g_loss),
                fmt(r.val_l_p),
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }
}
