//! Round-trip audit: canonicalize, linearize, delinearize and compare.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use lmx_core::canonical::canonicalize;
use lmx_core::lmx::{delinearize, linearize, lmx_scope, vocabulary};
use lmx_core::score::{ScoreDocument, SkipLog};
use lmx_core::treedist::{tedn, TednCosts, TednMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileAudit {
    pub file: String,
    pub tokens: usize,
    /// Re-linearizing the delinearized document reproduces the tokens.
    pub token_stable: bool,
    pub tedn_lmx: Option<f64>,
    pub source_nodes: usize,
    pub discarded_nodes: usize,
    pub warnings: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub files: usize,
    pub failures: usize,
    pub token_stability_percent: f64,
    pub tedn_lmx_zero_percent: f64,
    pub discarded_node_percent: f64,
    pub distinct_tokens: usize,
    pub tokens_outside_vocabulary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub summary: AuditSummary,
    pub files: Vec<FileAudit>,
}

pub struct Audited {
    pub row: FileAudit,
    pub emitted: BTreeSet<String>,
}

pub fn audit_document(file: &str, doc: &ScoreDocument, log: &SkipLog, costs: &TednCosts) -> Audited {
    let mut row = FileAudit {
        file: file.to_string(),
        tokens: 0,
        token_stable: false,
        tedn_lmx: None,
        source_nodes: log.source_total(),
        discarded_nodes: log.skipped_total() + log.retained_total(),
        warnings: 0,
        error: None,
    };
    let mut emitted = BTreeSet::new();
    let seq = canonicalize(doc)
        .map_err(|e| e.to_string())
        .and_then(|(c, _)| lmx_scope(&c).map_err(|e| e.to_string()))
        .and_then(|s| linearize(&s).map_err(|e| e.to_string()));
    let seq = match seq {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e);
            return Audited { row, emitted };
        }
    };
    row.tokens = seq.len();
    emitted.extend(seq.tokens.iter().cloned());
    let (back, warnings) = delinearize(&seq);
    row.warnings = warnings.len();
    row.token_stable = linearize(&back).is_ok_and(|s| s.tokens == seq.tokens);
    match tedn(&back, doc, TednMode::Lmx, costs) {
        Ok(r) => row.tedn_lmx = Some(r.percent()),
        Err(e) => row.error = Some(e.to_string()),
    }
    Audited { row, emitted }
}

impl AuditReport {
    pub fn new(audited: Vec<Audited>) -> Self {
        let vocab = vocabulary();
        let mut emitted = BTreeSet::new();
        let mut files = Vec::new();
        for a in audited {
            emitted.extend(a.emitted);
            files.push(a.row);
        }
        files.sort_by(|a, b| a.file.cmp(&b.file));
        let n = files.len().max(1) as f64;
        let source: usize = files.iter().map(|f| f.source_nodes).sum();
        let discarded: usize = files.iter().map(|f| f.discarded_nodes).sum();
        let summary = AuditSummary {
            files: files.len(),
            failures: files
                .iter()
                .filter(|f| f.error.is_some() || !f.token_stable || f.tedn_lmx != Some(0.0))
                .count(),
            token_stability_percent: 100.0 * files.iter().filter(|f| f.token_stable).count() as f64 / n,
            tedn_lmx_zero_percent: 100.0 * files.iter().filter(|f| f.tedn_lmx == Some(0.0)).count() as f64 / n,
            discarded_node_percent: 100.0 * discarded as f64 / source.max(1) as f64,
            distinct_tokens: emitted.len(),
            tokens_outside_vocabulary: emitted.into_iter().filter(|t| !vocab.contains(t)).collect(),
        };
        AuditReport { summary, files }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("file\ttokens\ttoken_stable\ttedn_lmx\tsource_nodes\tdiscarded_nodes\twarnings\terror\n");
        for f in &self.files {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                f.file,
                f.tokens,
                f.token_stable,
                f.tedn_lmx.map(|v| v.to_string()).unwrap_or_default(),
                f.source_nodes,
                f.discarded_nodes,
                f.warnings,
                f.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ")
            );
        }
        let m = &self.summary;
        let _ = writeln!(s, "# files\t{}", m.files);
        let _ = writeln!(s, "# failures\t{}", m.failures);
        let _ = writeln!(s, "# token_stability_percent\t{}", m.token_stability_percent);
        let _ = writeln!(s, "# tedn_lmx_zero_percent\t{}", m.tedn_lmx_zero_percent);
        let _ = writeln!(s, "# discarded_node_percent\t{}", m.discarded_node_percent);
        let _ = writeln!(s, "# distinct_tokens\t{}", m.distinct_tokens);
        let _ = writeln!(s, "# tokens_outside_vocabulary\t{}", m.tokens_outside_vocabulary.join(" "));
        s
    }
}
