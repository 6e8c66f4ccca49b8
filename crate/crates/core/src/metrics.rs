//! Symbol, character and line error rates.

use std::collections::BTreeMap;
use std::fmt::Display;

use thiserror::Error;

use crate::lmx::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceEvalResult {
    pub edit_distance: usize,
    pub reference_length: usize,
    pub rate_percent: f64,
    pub exact_match: bool,
}

impl SequenceEvalResult {
    fn new(edit_distance: usize, reference_length: usize) -> Self {
        SequenceEvalResult {
            edit_distance,
            reference_length,
            rate_percent: 100.0 * edit_distance as f64 / reference_length as f64,
            exact_match: edit_distance == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("gold sequence is empty, error rate undefined")]
    EmptyGold,
    #[error("corpora are not aligned; unmatched ids: {}", .0.join(", "))]
    Unaligned(Vec<String>),
    #[error("empty corpus")]
    EmptyCorpus,
}

/// Unit-cost Levenshtein distance, two rolling rows.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Symbol error rate over tokens.
pub fn ser(pred: &TokenSequence, gold: &TokenSequence) -> Result<SequenceEvalResult, MetricError> {
    if gold.is_empty() {
        return Err(MetricError::EmptyGold);
    }
    Ok(SequenceEvalResult::new(levenshtein(&pred.tokens, &gold.tokens), gold.len()))
}

/// Character error rate over Unicode scalar values.
pub fn cer(pred: &str, gold: &str) -> Result<SequenceEvalResult, MetricError> {
    let g: Vec<char> = gold.chars().collect();
    if g.is_empty() {
        return Err(MetricError::EmptyGold);
    }
    let p: Vec<char> = pred.chars().collect();
    Ok(SequenceEvalResult::new(levenshtein(&p, &g), g.len()))
}

/// Line error rate: percentage of samples that are not token-exact.
pub fn ler<K: Ord + Display>(
    pred: &BTreeMap<K, TokenSequence>,
    gold: &BTreeMap<K, TokenSequence>,
) -> Result<f64, MetricError> {
    let mut unmatched: Vec<String> = pred.keys().filter(|k| !gold.contains_key(k)).map(|k| k.to_string()).collect();
    unmatched.extend(gold.keys().filter(|k| !pred.contains_key(k)).map(|k| k.to_string()));
    if !unmatched.is_empty() {
        return Err(MetricError::Unaligned(unmatched));
    }
    if gold.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let wrong = gold.iter().filter(|(k, g)| pred[*k].tokens != g.tokens).count();
    Ok(100.0 * wrong as f64 / gold.len() as f64)
}

/// Positional variant of [`ler`]; ids are indices.
pub fn ler_aligned(pred: &[TokenSequence], gold: &[TokenSequence]) -> Result<f64, MetricError> {
    if pred.len() != gold.len() {
        let (lo, hi) = (pred.len().min(gold.len()), pred.len().max(gold.len()));
        return Err(MetricError::Unaligned((lo..hi).map(|i| i.to_string()).collect()));
    }
    if gold.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let wrong = pred.iter().zip(gold).filter(|(p, g)| p.tokens != g.tokens).count();
    Ok(100.0 * wrong as f64 / gold.len() as f64)
}

/// Corpus-level rates: micro sums distances over gold lengths, macro averages per-sample rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub micro: f64,
    pub macro_: f64,
    pub samples: usize,
}

pub fn aggregate(results: &[SequenceEvalResult]) -> Option<Aggregate> {
    if results.is_empty() {
        return None;
    }
    let dist: usize = results.iter().map(|r| r.edit_distance).sum();
    let len: usize = results.iter().map(|r| r.reference_length).sum();
    let macro_ = results.iter().map(|r| r.rate_percent).sum::<f64>() / results.len() as f64;
    Some(Aggregate {
        micro: 100.0 * dist as f64 / len as f64,
        macro_,
        samples: results.len(),
    })
}
