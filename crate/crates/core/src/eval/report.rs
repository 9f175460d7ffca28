use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_CSV_HEADER: &str = "method,split,metric,mean,std,R";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodId {
    Cegan,
    CeganLp,
    Lr1,
    Lr2,
    Knn,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::Cegan,
        MethodId::CeganLp,
        MethodId::Lr1,
        MethodId::Lr2,
        MethodId::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Cegan => "cegan",
            MethodId::CeganLp => "cegan-lp",
            MethodId::Lr1 => "lr1",
            MethodId::Lr2 => "lr2",
            MethodId::Knn => "knn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `√ε_PEHE` and `ε_ATE` on one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub sqrt_pehe: f64,
    pub ate_error: f64,
}

/// Result of one method in one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: MethodId,
    pub in_sample: Option<SplitMetrics>,
    pub out_sample: Option<SplitMetrics>,
    /// Named auxiliary quantities (treatment cross-entropy, outcome gap,
    /// discriminator means) for the neural methods.
    pub diagnostics: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub data_seed: u64,
    pub split_seed: u64,
    pub train_seed: u64,
    pub inference_seed: u64,
    pub outcomes: Vec<MethodOutcome>,
}

/// Mean and population standard deviation over the successful realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: MethodId,
    pub split: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: String,
    pub realizations: usize,
    pub methods: Vec<MethodId>,
    pub summary: Vec<Summary>,
    pub warnings: Vec<String>,
    pub records: Vec<RealizationRecord>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `(split, metric, value)` triples carried by one outcome.
fn values(o: &MethodOutcome) -> Vec<(String, String, f64)> {
    let mut out = Vec::new();
    for (split, m) in [("in", o.in_sample), ("out", o.out_sample)] {
        if let Some(m) = m {
            out.push((split.into(), "sqrt-pehe".into(), m.sqrt_pehe));
            out.push((split.into(), "ate-error".into(), m.ate_error));
        }
    }
    for (k, v) in &o.diagnostics {
        let (split, name) = k.split_once('/').unwrap_or(("out", k));
        out.push((split.into(), name.into(), *v));
    }
    out
}

impl EvalReport {
    /// Builds the summary from records sorted by realization index.
    pub fn from_records(
        fingerprint: String,
        methods: Vec<MethodId>,
        mut records: Vec<RealizationRecord>,
    ) -> Self {
        records.sort_by_key(|r| r.index);
        let mut warnings = Vec::new();
        let mut groups: BTreeMap<(MethodId, String, String), Vec<f64>> = BTreeMap::new();
        let mut order: Vec<(MethodId, String, String)> = Vec::new();
        for r in &records {
            for o in &r.outcomes {
                if let Some(e) = &o.error {
                    warnings.push(format!("realization {}: {} failed: {e}", r.index, o.method));
                    continue;
                }
                for (split, metric, v) in values(o) {
                    let key = (o.method, split, metric);
                    if !groups.contains_key(&key) {
                        order.push(key.clone());
                    }
                    groups.entry(key).or_default().push(v);
                }
            }
        }
        let rank = |s: &str| match s {
            "in" => 0,
            "out" => 1,
            _ => 2,
        };
        order.sort_by_key(|(m, s, k)| (methods.iter().position(|x| x == m), rank(s), s.clone(), k.clone()));
        let summary = order
            .into_iter()
            .map(|key| {
                let v = &groups[&key];
                let (mean, std) = mean_std(v);
                Summary { method: key.0, split: key.1, metric: key.2, mean, std, count: v.len() }
            })
            .collect();
        Self {
            fingerprint,
            realizations: records.len(),
            methods,
            summary,
            warnings,
            records,
        }
    }

    pub fn get(&self, method: MethodId, split: &str, metric: &str) -> Option<&Summary> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.split == split && s.metric == metric)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let wrap = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(REPORT_CSV_HEADER.split(',')).map_err(wrap)?;
        for s in &self.summary {
            w.write_record([
                s.method.name().to_string(),
                s.split.clone(),
                s.metric.clone(),
                s.mean.to_string(),
                s.std.to_string(),
                s.count.to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(method: MethodId, pehe: f64, err: Option<&str>) -> MethodOutcome {
        let m = SplitMetrics { sqrt_pehe: pehe, ate_error: pehe / 2.0 };
        MethodOutcome {
            method,
            in_sample: err.is_none().then_some(m),
            out_sample: err.is_none().then_some(m),
            diagnostics: BTreeMap::new(),
            error: err.map(str::to_string),
        }
    }

    fn record(index: usize, outcomes: Vec<MethodOutcome>) -> RealizationRecord {
        RealizationRecord { index, data_seed: 0, split_seed: 0, train_seed: 0, inference_seed: 0, outcomes }
    }

    #[test]
    fn summary_recomputes_from_records() {
        let recs = vec![
            record(1, vec![outcome(MethodId::Lr1, 3.0, None), outcome(MethodId::Knn, 1.0, Some("boom"))]),
            record(0, vec![outcome(MethodId::Lr1, 1.0, None), outcome(MethodId::Knn, 2.0, None)]),
        ];
        let r = EvalReport::from_records("f".into(), vec![MethodId::Lr1, MethodId::Knn], recs);
        assert_eq!(r.records[0].index, 0);
        let s = r.get(MethodId::Lr1, "out", "sqrt-pehe").unwrap();
        assert_eq!((s.mean, s.std, s.count), (2.0, 1.0, 2));
        let k = r.get(MethodId::Knn, "in", "ate-error").unwrap();
        assert_eq!((k.mean, k.std, k.count), (1.0, 0.0, 1));
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.summary[0].method, MethodId::Lr1);
        let back = EvalReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_rows() {
        let r = EvalReport::from_records("f".into(), vec![MethodId::Lr1], vec![record(0, vec![outcome(MethodId::Lr1, 0.5, None)])]);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], REPORT_CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines.contains(&"lr1,out,sqrt-pehe,0.5,0,1"));
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodId::ALL {
            assert_eq!(MethodId::parse(m.name()), Some(m));
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
    }
}
