//! Linearized MusicXML token sequences.

mod delinearize;
mod linearize;
pub mod pitch;
pub mod vocab;

use std::fmt;

use crate::canonical::{canonicalize, CanonicalizationError};
use crate::score::{MusicElement, ScoreDocument};

pub use delinearize::{delinearize, DelinearizeWarning, WarningKind};
pub use linearize::{linearize, linearize_with_stats, LinearizeError, LinearizeStats};
pub use vocab::{vocabulary, Category, Vocabulary, VOCABULARY_VERSION};

/// The part of a single-part document that survives linearization: no
/// out-of-subset elements, part `P1` without a name, in canonical form.
pub fn lmx_scope(doc: &ScoreDocument) -> Result<ScoreDocument, CanonicalizationError> {
    let mut d = doc.clone();
    for p in &mut d.parts {
        p.name = None;
        for m in &mut p.measures {
            m.elements.retain(|e| !matches!(e, MusicElement::Other(_)));
        }
    }
    if d.parts.len() == 1 && d.parts[0].id != "P1" {
        let old = std::mem::replace(&mut d.parts[0].id, "P1".into());
        if let Some(div) = d.source_divisions.remove(&old) {
            d.source_divisions.insert("P1".into(), div);
        }
    }
    canonicalize(&d).map(|(c, _)| c)
}

/// Source position of a token: `(measure index, element index)`.
pub type Provenance = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    /// Parallel to `tokens` when produced by the linearizer.
    pub provenance: Option<Vec<Provenance>>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence {
            tokens,
            provenance: None,
        }
    }

    /// Split on any whitespace run.
    pub fn parse(text: &str) -> Self {
        TokenSequence::new(text.split_whitespace().map(str::to_string).collect())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Canonical `.lmx` text: one measure per line, single spaces.
    pub fn to_lmx(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if t == "measure" && i > 0 {
                out.push('\n');
            } else if i > 0 {
                out.push(' ');
            }
            out.push_str(t);
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    /// Single-line, space-separated form used for character error rates.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

impl PartialEq<[&str]> for TokenSequence {
    fn eq(&self, other: &[&str]) -> bool {
        self.tokens.len() == other.len() && self.tokens.iter().zip(other).all(|(a, b)| a == b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_round_trip() {
        for seed in 0..300 {
            let (c, _) = canonicalize(&crate::synth::generate(seed)).unwrap();
            let seq = linearize(&c).unwrap();
            let (back, warnings) = delinearize(&seq);
            let expected = lmx_scope(&c).unwrap();
            assert!(
                warnings.iter().all(|w| w.kind == WarningKind::UnterminatedConstruct),
                "seed {seed}: {warnings:?}"
            );
            if back != expected {
                for (mi, (a, b)) in back.parts[0].measures.iter().zip(&expected.parts[0].measures).enumerate() {
                    if a != b {
                        for (x, y) in a.elements.iter().zip(&b.elements) {
                            if x != y {
                                panic!("seed {seed} measure {mi}:\n got {x:?}\nwant {y:?}\n{}", seq.to_lmx());
                            }
                        }
                        panic!("seed {seed} measure {mi}: {} vs {} elements", a.elements.len(), b.elements.len());
                    }
                }
                panic!("seed {seed}: {:?} vs {:?}", back.source_divisions, expected.source_divisions);
            }
        }
    }

    #[test]
    fn lmx_text_format() {
        let seq = TokenSequence::parse("measure  voice:1\tG4 quarter\n\nmeasure voice:1 rest:measure whole");
        assert_eq!(seq.len(), 8);
        assert_eq!(
            seq.to_lmx(),
            "measure voice:1 G4 quarter\nmeasure voice:1 rest:measure whole\n"
        );
        assert_eq!(TokenSequence::parse(&seq.to_lmx()), seq);
    }
}
