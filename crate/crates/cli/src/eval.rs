//! Corpus evaluation: pair gold and predicted files by stem and score them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use lmx_core::canonical::canonicalize;
use lmx_core::lmx::{delinearize, linearize, lmx_scope, TokenSequence};
use lmx_core::metrics::{cer, ser};
use lmx_core::score::ScoreDocument;
use lmx_core::treedist::{tedn, TednCosts, TednMode};

use crate::inputs::{has_extension, load_score, stem, SCORE_EXTENSIONS};
use crate::report::SampleRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Tedn,
    TednLmx,
    Ser,
    Cer,
    Ler,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Tedn, Metric::TednLmx, Metric::Ser, Metric::Cer, Metric::Ler];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Tedn => "tedn",
            Metric::TednLmx => "tedn-lmx",
            Metric::Ser => "ser",
            Metric::Cer => "cer",
            Metric::Ler => "ler",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for name in s.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match Metric::ALL.into_iter().find(|m| m.name() == name) {
                Some(m) => out.push(m),
                None => bail!("unknown metric {name:?} (known: tedn, tedn-lmx, ser, cer, ler)"),
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub stem: String,
    pub gold: PathBuf,
    pub pred: PathBuf,
}

#[derive(Debug, Default)]
pub struct Pairing {
    pub pairs: Vec<Pair>,
    /// Gold stems with no prediction.
    pub missing: Vec<String>,
    /// Prediction stems with no gold.
    pub orphans: Vec<String>,
}

/// Preferred prediction extensions, first match wins.
const PRED_EXTENSIONS: &[&str] = &["lmx", "musicxml", "xml", "mxl"];

fn by_stem(dir: &Path, exts: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let mut out: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && has_extension(p, exts))
        .collect();
    let rank = |p: &Path| {
        let e = p.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        exts.iter().position(|x| *x == e).unwrap_or(usize::MAX)
    };
    files.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
    for f in files {
        out.entry(stem(&f)).or_insert(f);
    }
    Ok(out)
}

pub fn pair_dirs(gold: &Path, pred: &Path) -> Result<Pairing> {
    let g = by_stem(gold, SCORE_EXTENSIONS)?;
    let mut p = by_stem(pred, PRED_EXTENSIONS)?;
    let mut out = Pairing::default();
    for (s, gold) in g {
        match p.remove(&s) {
            Some(pred) => out.pairs.push(Pair { stem: s, gold, pred }),
            None => out.missing.push(s),
        }
    }
    out.orphans = p.into_keys().collect();
    Ok(out)
}

pub struct EvalOptions {
    pub metrics: Vec<Metric>,
    pub costs: TednCosts,
    pub part: Option<String>,
}

impl EvalOptions {
    fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}

/// Tokens and document for the prediction; problems become warnings.
fn load_prediction(path: &Path, part: Option<&str>, warnings: &mut Vec<String>) -> (TokenSequence, ScoreDocument) {
    if has_extension(path, &["lmx"]) {
        return match std::fs::read_to_string(path) {
            Ok(text) => {
                let seq = TokenSequence::parse(&text);
                let (doc, w) = delinearize(&seq);
                warnings.extend(w.iter().map(|w| w.to_string()));
                (seq, doc)
            }
            Err(e) => {
                warnings.push(format!("unreadable prediction: {e}"));
                (TokenSequence::default(), ScoreDocument::empty())
            }
        };
    }
    let doc = match load_score(path, part) {
        Ok((d, _)) => d,
        Err(e) => {
            warnings.push(format!("invalid prediction: {e}"));
            return (TokenSequence::default(), ScoreDocument::empty());
        }
    };
    let tokens = canonicalize(&doc)
        .map_err(|e| e.to_string())
        .and_then(|(c, _)| lmx_scope(&c).map_err(|e| e.to_string()))
        .and_then(|s| linearize(&s).map_err(|e| e.to_string()));
    match tokens {
        Ok(t) => (t, doc),
        Err(e) => {
            warnings.push(format!("prediction cannot be linearized: {e}"));
            (TokenSequence::default(), doc)
        }
    }
}

/// Score one pair. Errors mean the gold file is unusable.
pub fn score_pair(pair: &Pair, opts: &EvalOptions) -> Result<SampleRow, String> {
    let part = opts.part.as_deref();
    let (gold, _) = load_score(&pair.gold, part)?;
    let (gc, _) = canonicalize(&gold).map_err(|e| format!("gold does not canonicalize: {e}"))?;
    let gold_tokens = lmx_scope(&gc)
        .map_err(|e| e.to_string())
        .and_then(|s| linearize(&s).map_err(|e| e.to_string()))
        .map_err(|e| format!("gold cannot be linearized: {e}"))?;
    if gold_tokens.is_empty() {
        return Err("gold has no content".to_string());
    }
    let mut warnings = Vec::new();
    let (pred_tokens, pred) = load_prediction(&pair.pred, part, &mut warnings);

    let seq = (opts.wants(Metric::Ser)).then(|| ser(&pred_tokens, &gold_tokens).expect("gold is non-empty"));
    let (pj, gj) = (pred_tokens.joined(), gold_tokens.joined());
    let chr = (opts.wants(Metric::Cer)).then(|| cer(&pj, &gj).expect("gold is non-empty"));
    let mut ted = |mode: TednMode| -> Result<f64, String> {
        let r = tedn(&pred, &gold, mode, &opts.costs).map_err(|e| e.to_string())?;
        warnings.extend(r.warnings.iter().cloned());
        Ok(r.percent())
    };
    let tedn_full = opts.wants(Metric::Tedn).then(|| ted(TednMode::Full)).transpose()?;
    let tedn_lmx = opts.wants(Metric::TednLmx).then(|| ted(TednMode::Lmx)).transpose()?;
    Ok(SampleRow {
        sample_id: pair.stem.clone(),
        ser: seq.map(|r| r.rate_percent),
        ser_distance: seq.map(|r| r.edit_distance),
        gold_tokens: gold_tokens.len(),
        cer: chr.map(|r| r.rate_percent),
        cer_distance: chr.map(|r| r.edit_distance),
        gold_chars: gj.chars().count(),
        exact_match: pred_tokens.tokens == gold_tokens.tokens,
        tedn_full,
        tedn_lmx,
        warnings_count: warnings.len(),
    })
}
