//! Evaluation report: per-sample rows, corpus aggregates and run metadata,
//! written as JSON or TSV and checked for consistency when loaded.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use lmx_core::metrics::{aggregate, SequenceEvalResult};
use serde::{Deserialize, Serialize};

/// Identifies the TSV column layout; bump when columns change.
pub const TSV_SCHEMA: &str = "lmx-eval-tsv-1";

pub const TSV_COLUMNS: [&str; 11] = [
    "sample_id",
    "ser",
    "ser_distance",
    "gold_tokens",
    "cer",
    "cer_distance",
    "gold_chars",
    "exact_match",
    "tedn_full",
    "tedn_lmx",
    "warnings_count",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub sample_id: String,
    pub ser: Option<f64>,
    pub ser_distance: Option<usize>,
    pub gold_tokens: usize,
    pub cer: Option<f64>,
    pub cer_distance: Option<usize>,
    pub gold_chars: usize,
    pub exact_match: bool,
    pub tedn_full: Option<f64>,
    pub tedn_lmx: Option<f64>,
    pub warnings_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub samples: usize,
    pub ser_micro: Option<f64>,
    pub ser_macro: Option<f64>,
    pub cer_micro: Option<f64>,
    pub cer_macro: Option<f64>,
    pub ler: Option<f64>,
    pub tedn_full_mean: Option<f64>,
    pub tedn_lmx_mean: Option<f64>,
}

impl Aggregates {
    /// Aggregate over rows; a metric is reported only when every row has it.
    pub fn compute(rows: &[SampleRow], with_ler: bool) -> Aggregates {
        fn seq(rows: &[SampleRow], f: impl Fn(&SampleRow) -> Option<(usize, usize, f64)>) -> (Option<f64>, Option<f64>) {
            let r: Option<Vec<SequenceEvalResult>> = rows
                .iter()
                .map(|row| {
                    f(row).map(|(d, n, rate)| SequenceEvalResult {
                        edit_distance: d,
                        reference_length: n,
                        rate_percent: rate,
                        exact_match: d == 0,
                    })
                })
                .collect();
            match r.as_deref().and_then(aggregate) {
                Some(a) => (Some(a.micro), Some(a.macro_)),
                None => (None, None),
            }
        }
        fn mean(rows: &[SampleRow], f: impl Fn(&SampleRow) -> Option<f64>) -> Option<f64> {
            let v: Option<Vec<f64>> = rows.iter().map(f).collect();
            v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
        }
        let (ser_micro, ser_macro) = seq(rows, |r| Some((r.ser_distance?, r.gold_tokens, r.ser?)));
        let (cer_micro, cer_macro) = seq(rows, |r| Some((r.cer_distance?, r.gold_chars, r.cer?)));
        let ler = (with_ler && !rows.is_empty())
            .then(|| 100.0 * rows.iter().filter(|r| !r.exact_match).count() as f64 / rows.len() as f64);
        Aggregates {
            samples: rows.len(),
            ser_micro,
            ser_macro,
            cer_micro,
            cer_macro,
            ler,
            tedn_full_mean: mean(rows, |r| r.tedn_full),
            tedn_lmx_mean: mean(rows, |r| r.tedn_lmx),
        }
    }

    fn fields(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("ser_micro", self.ser_micro),
            ("ser_macro", self.ser_macro),
            ("cer_micro", self.cer_micro),
            ("cer_macro", self.cer_macro),
            ("ler", self.ler),
            ("tedn_full_mean", self.tedn_full_mean),
            ("tedn_lmx_mean", self.tedn_lmx_mean),
        ]
    }

    fn set(&mut self, name: &str, v: Option<f64>) -> Result<()> {
        let slot = match name {
            "ser_micro" => &mut self.ser_micro,
            "ser_macro" => &mut self.ser_macro,
            "cer_micro" => &mut self.cer_micro,
            "cer_macro" => &mut self.cer_macro,
            "ler" => &mut self.ler,
            "tedn_full_mean" => &mut self.tedn_full_mean,
            "tedn_lmx_mean" => &mut self.tedn_lmx_mean,
            _ => bail!("unknown aggregate {name:?}"),
        };
        *slot = v;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub toolkit_version: String,
    pub vocabulary_version: String,
    pub cost_model_hash: String,
    pub timestamp: String,
    pub metrics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: Metadata,
    pub aggregates: Aggregates,
    pub per_sample: Vec<SampleRow>,
    /// Gold stems without a prediction, excluded from scoring.
    #[serde(default)]
    pub missing: Vec<String>,
}

impl EvalReport {
    pub fn new(metadata: Metadata, mut per_sample: Vec<SampleRow>, missing: Vec<String>) -> Self {
        per_sample.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        let with_ler = metadata.metrics.iter().any(|m| m == "ler");
        EvalReport {
            aggregates: Aggregates::compute(&per_sample, with_ler),
            metadata,
            per_sample,
            missing,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_tsv(&self) -> String {
        let m = &self.metadata;
        let mut s = format!("# {TSV_SCHEMA}\n");
        for (k, v) in [
            ("toolkit_version", m.toolkit_version.as_str()),
            ("vocabulary_version", &m.vocabulary_version),
            ("cost_model_hash", &m.cost_model_hash),
            ("timestamp", &m.timestamp),
        ] {
            let _ = writeln!(s, "# {k}\t{v}");
        }
        let _ = writeln!(s, "# metrics\t{}", m.metrics.join(","));
        s.push_str(&TSV_COLUMNS.join("\t"));
        s.push('\n');
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let opt_n = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.per_sample {
            let cells = [
                r.sample_id.clone(),
                opt(r.ser),
                opt_n(r.ser_distance),
                r.gold_tokens.to_string(),
                opt(r.cer),
                opt_n(r.cer_distance),
                r.gold_chars.to_string(),
                r.exact_match.to_string(),
                opt(r.tedn_full),
                opt(r.tedn_lmx),
                r.warnings_count.to_string(),
            ];
            s.push_str(&cells.join("\t"));
            s.push('\n');
        }
        let _ = writeln!(s, "# aggregate\tsamples\t{}", self.aggregates.samples);
        for (k, v) in self.aggregates.fields() {
            let _ = writeln!(s, "# aggregate\t{k}\t{}", opt(v));
        }
        for stem in &self.missing {
            let _ = writeln!(s, "# missing\t{stem}");
        }
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(text).context("invalid report JSON")?;
        r.verify()?;
        Ok(r)
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(&format!("# {TSV_SCHEMA}")) {
            bail!("not a {TSV_SCHEMA} report");
        }
        let mut meta = std::collections::BTreeMap::new();
        let mut agg = Aggregates::default();
        let mut rows = Vec::new();
        let mut missing = Vec::new();
        let mut header_seen = false;
        for line in lines {
            let cells: Vec<&str> = line.split('\t').collect();
            if let Some(key) = cells[0].strip_prefix("# ") {
                match (key, &cells[1..]) {
                    ("aggregate", ["samples", v]) => agg.samples = v.parse()?,
                    ("aggregate", [name, v]) => agg.set(name, parse_opt(v)?)?,
                    ("missing", [stem]) => missing.push(stem.to_string()),
                    (k, [v]) => {
                        meta.insert(k.to_string(), v.to_string());
                    }
                    _ => bail!("malformed comment line {line:?}"),
                }
                continue;
            }
            if !header_seen {
                if cells != TSV_COLUMNS {
                    bail!("unexpected TSV columns {cells:?}");
                }
                header_seen = true;
                continue;
            }
            if cells.len() != TSV_COLUMNS.len() {
                bail!("row has {} cells, expected {}", cells.len(), TSV_COLUMNS.len());
            }
            rows.push(SampleRow {
                sample_id: cells[0].to_string(),
                ser: parse_opt(cells[1])?,
                ser_distance: parse_opt(cells[2])?,
                gold_tokens: cells[3].parse()?,
                cer: parse_opt(cells[4])?,
                cer_distance: parse_opt(cells[5])?,
                gold_chars: cells[6].parse()?,
                exact_match: cells[7].parse()?,
                tedn_full: parse_opt(cells[8])?,
                tedn_lmx: parse_opt(cells[9])?,
                warnings_count: cells[10].parse()?,
            });
        }
        let mut take = |k: &str| meta.remove(k).ok_or_else(|| anyhow!("missing metadata {k}"));
        let metadata = Metadata {
            toolkit_version: take("toolkit_version")?,
            vocabulary_version: take("vocabulary_version")?,
            cost_model_hash: take("cost_model_hash")?,
            timestamp: take("timestamp")?,
            metrics: take("metrics")?.split(',').filter(|s| !s.is_empty()).map(String::from).collect(),
        };
        let r = EvalReport {
            metadata,
            aggregates: agg,
            per_sample: rows,
            missing,
        };
        r.verify()?;
        Ok(r)
    }

    /// Load either format, sniffed from the first byte.
    pub fn load(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_tsv(text)
        }
    }

    /// Check that the aggregates follow from the rows.
    pub fn verify(&self) -> Result<()> {
        let with_ler = self.metadata.metrics.iter().any(|m| m == "ler");
        let expect = Aggregates::compute(&self.per_sample, with_ler);
        if expect.samples != self.aggregates.samples {
            bail!("aggregate sample count {} but {} rows", self.aggregates.samples, expect.samples);
        }
        for ((name, want), (_, got)) in expect.fields().into_iter().zip(self.aggregates.fields()) {
            let ok = match (want, got) {
                (None, None) => true,
                (Some(a), Some(b)) => (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                _ => false,
            };
            if !ok {
                bail!("aggregate {name} is {got:?} but rows give {want:?}");
            }
        }
        Ok(())
    }
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    if s.is_empty() {
        Ok(None)
    } else {
        Ok(Some(s.parse()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, d: usize, n: usize) -> SampleRow {
        SampleRow {
            sample_id: id.into(),
            ser: Some(100.0 * d as f64 / n as f64),
            ser_distance: Some(d),
            gold_tokens: n,
            cer: None,
            cer_distance: None,
            gold_chars: 3 * n,
            exact_match: d == 0,
            tedn_full: Some(d as f64 / 3.0),
            tedn_lmx: None,
            warnings_count: 0,
        }
    }

    fn report() -> EvalReport {
        let meta = Metadata {
            toolkit_version: "0.1.0".into(),
            vocabulary_version: "v".into(),
            cost_model_hash: "h".into(),
            timestamp: "1970-01-01T00:00:00+00:00".into(),
            metrics: vec!["ser".into(), "tedn".into(), "ler".into()],
        };
        EvalReport::new(meta, vec![row("b", 0, 7), row("a", 1, 3)], vec!["c".into()])
    }

    #[test]
    fn formats_agree_and_verify() {
        let r = report();
        assert_eq!(r.per_sample[0].sample_id, "a");
        assert_eq!(r.aggregates.ser_micro, Some(10.0));
        assert_eq!(r.aggregates.ler, Some(50.0));
        assert_eq!(r.aggregates.cer_micro, None);
        assert_eq!(EvalReport::load(&r.to_json()).unwrap(), r);
        assert_eq!(EvalReport::load(&r.to_tsv()).unwrap(), r);
    }

    #[test]
    fn tampered_aggregates_rejected() {
        let mut r = report();
        r.aggregates.ser_macro = Some(1.0);
        assert!(EvalReport::from_json(&r.to_json()).is_err());
        assert!(EvalReport::from_tsv(&r.to_tsv()).is_err());
    }
}
