use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use num_traits::{ToPrimitive, Zero};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::tree::{LabeledTree, Node};
use super::zs::{edit_script, zhang_shasha, CostModel, EditOp};
use crate::canonical::{canonicalize, CanonicalizationError};
use crate::lmx::{delinearize, linearize, LinearizeError};
use crate::score::*;

pub type Cost = num_rational::Ratio<i64>;

/// Environment variable naming a default cost-model file.
pub const COST_MODEL_ENV: &str = "LMX_COST_MODEL";

/// Attributes that only number or identify things and carry no notation.
const IGNORED_ATTRS: [(&str, &str); 4] = [
    ("measure", "number"),
    ("part", "id"),
    ("score-partwise", "version"),
    ("slur", "number"),
];

pub const NOTE_FEATURES: [&str; 20] = [
    "pitch-step",
    "pitch-octave",
    "alter",
    "type",
    "dots",
    "voice",
    "staff",
    "stem",
    "grace",
    "chord",
    "rest",
    "accidental",
    "tied-start",
    "tied-stop",
    "beam-list",
    "timemod",
    "tuplet-start",
    "tuplet-stop",
    "slur-start",
    "slur-stop",
];

/// Collapsed `<note>`: a set of (feature, value) pairs, one per feature key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NoteLabel {
    pub features: BTreeMap<String, String>,
}

impl NoteLabel {
    pub fn from_note(n: &Note) -> Self {
        let mut f = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            f.insert(k.to_string(), v);
        };
        if let Some(p) = n.pitch {
            put("pitch-step", p.step.as_char().to_string());
            put("pitch-octave", p.octave.to_string());
            if let Some(a) = p.alter.filter(|a| *a != 0) {
                put("alter", a.to_string());
            }
        }
        if let Some(t) = n.note_type {
            put("type", t.as_str().to_string());
        }
        if n.dots > 0 {
            put("dots", n.dots.to_string());
        }
        put("voice", n.voice.to_string());
        put("staff", n.staff.to_string());
        if let Some(s) = n.stem {
            put("stem", s.as_str().to_string());
        }
        if n.grace {
            put("grace", if n.grace_slash { "slash" } else { "plain" }.to_string());
        }
        if n.chord {
            put("chord", "yes".into());
        }
        if n.rest {
            put("rest", if n.measure_rest { "measure" } else { "normal" }.to_string());
        }
        if let Some(a) = n.accidental {
            put("accidental", a.as_str().to_string());
        }
        if n.tied_start || n.tie_start {
            put("tied-start", "yes".into());
        }
        if n.tied_stop || n.tie_stop {
            put("tied-stop", "yes".into());
        }
        if !n.beams.is_empty() {
            put(
                "beam-list",
                n.beams.iter().map(|b| b.as_str()).collect::<Vec<_>>().join(","),
            );
        }
        if let Some(tm) = n.time_modification {
            put("timemod", tm.token());
        }
        if n.tuplet_start {
            put("tuplet-start", "yes".into());
        }
        if n.tuplet_stop {
            put("tuplet-stop", "yes".into());
        }
        if n.slur_starts > 0 {
            put("slur-start", n.slur_starts.to_string());
        }
        if n.slur_stops > 0 {
            put("slur-stop", n.slur_stops.to_string());
        }
        let mut orn = |name: &str| {
            f.insert(format!("ornament:{name}"), "yes".into());
        };
        if n.trill {
            orn("trill-mark");
        }
        for o in &n.ornaments {
            orn(o.as_str());
        }
        if let Some(m) = n.tremolo {
            orn(&format!("tremolo:{m}"));
        }
        for (on, name) in [
            (n.staccato, "staccato"),
            (n.accent, "accent"),
            (n.tenuto, "tenuto"),
            (n.fermata, "fermata"),
            (n.arpeggiate, "arpeggiate"),
        ] {
            if on {
                orn(name);
            }
        }
        NoteLabel { features: f }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeLabel {
    /// Element name with its kept attributes and trimmed text, e.g. `fifths=2`.
    Plain(String),
    Note(NoteLabel),
}

impl fmt::Display for TreeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeLabel::Plain(s) => f.write_str(s),
            TreeLabel::Note(n) => {
                f.write_str("note{")?;
                for (i, (k, v)) in n.features.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{k}={v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Edit costs: unit costs for plain nodes, weighted feature counts for notes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TednCosts {
    pub plain_insert: Cost,
    pub plain_delete: Cost,
    pub plain_substitute: Cost,
    /// Weight per note feature key; keys not listed use `default_weight`.
    pub weights: BTreeMap<String, Cost>,
    pub default_weight: Cost,
}

impl Default for TednCosts {
    fn default() -> Self {
        TednCosts {
            plain_insert: Cost::from_integer(1),
            plain_delete: Cost::from_integer(1),
            plain_substitute: Cost::from_integer(1),
            weights: BTreeMap::new(),
            default_weight: Cost::from_integer(1),
        }
    }
}

#[derive(Debug, Error)]
pub enum CostModelError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

fn parse_cost(s: &str) -> Option<Cost> {
    let s = s.trim();
    let c = if let Some((a, b)) = s.split_once('/') {
        let d: i64 = b.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        Cost::new(a.trim().parse().ok()?, d)
    } else if let Some((w, frac)) = s.split_once('.') {
        let scale = 10i64.checked_pow(u32::try_from(frac.len()).ok()?)?;
        let whole: i64 = if w.is_empty() { 0 } else { w.parse().ok()? };
        let f: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
        Cost::new(whole * scale + f, scale)
    } else {
        Cost::from_integer(s.parse().ok()?)
    };
    (c >= Cost::zero()).then_some(c)
}

impl TednCosts {
    /// Parse `key = value` lines; `#` starts a comment.
    ///
    /// Keys: `plain.insert`, `plain.delete`, `plain.substitute`,
    /// `note.default`, and `note.<feature>` for any feature key.
    /// Values are non-negative integers, decimals or fractions `a/b`.
    pub fn parse(text: &str) -> Result<Self, CostModelError> {
        let mut c = TednCosts::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| CostModelError::Syntax { line: i + 1, message };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let value = parse_cost(v).ok_or_else(|| syntax(format!("bad cost {v:?}")))?;
            match k {
                "plain.insert" => c.plain_insert = value,
                "plain.delete" => c.plain_delete = value,
                "plain.substitute" => c.plain_substitute = value,
                "note.default" => c.default_weight = value,
                _ => match k.strip_prefix("note.") {
                    Some(f) if !f.is_empty() => {
                        c.weights.insert(f.to_string(), value);
                    }
                    _ => return Err(syntax(format!("unknown key {k:?}"))),
                },
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CostModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| CostModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The file named by `LMX_COST_MODEL`, or the defaults.
    pub fn from_env() -> Result<Self, CostModelError> {
        match std::env::var_os(COST_MODEL_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    /// Normalized text form; equal models give equal text.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "plain.insert = {}\nplain.delete = {}\nplain.substitute = {}\nnote.default = {}\n",
            self.plain_insert, self.plain_delete, self.plain_substitute, self.default_weight
        );
        for (k, v) in &self.weights {
            s.push_str(&format!("note.{k} = {v}\n"));
        }
        s
    }

    /// Hex SHA-256 of `to_text`.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Weight of a feature key, falling back to its prefix before `:`, then the default.
    pub fn weight(&self, key: &str) -> Cost {
        let base = key.split_once(':').map_or(key, |(b, _)| b);
        self.weights
            .get(key)
            .or_else(|| self.weights.get(base))
            .copied()
            .unwrap_or(self.default_weight)
    }

    fn note_size(&self, n: &NoteLabel) -> Cost {
        n.features.keys().fold(Cost::zero(), |s, k| s + self.weight(k))
    }
}

impl CostModel<TreeLabel> for TednCosts {
    type Cost = Cost;

    fn delete(&self, a: &TreeLabel) -> Cost {
        match a {
            TreeLabel::Plain(_) => self.plain_delete,
            TreeLabel::Note(n) => self.note_size(n),
        }
    }

    fn insert(&self, b: &TreeLabel) -> Cost {
        match b {
            TreeLabel::Plain(_) => self.plain_insert,
            TreeLabel::Note(n) => self.note_size(n),
        }
    }

    fn relabel(&self, a: &TreeLabel, b: &TreeLabel) -> Cost {
        match (a, b) {
            (TreeLabel::Plain(x), TreeLabel::Plain(y)) => {
                if x == y {
                    Cost::zero()
                } else {
                    self.plain_substitute
                }
            }
            (TreeLabel::Note(x), TreeLabel::Note(y)) => {
                // weighted symmetric difference of the (key, value) sets
                let keys: BTreeSet<&String> = x.features.keys().chain(y.features.keys()).collect();
                keys.into_iter().fold(Cost::zero(), |s, k| {
                    let w = self.weight(k);
                    match (x.features.get(k), y.features.get(k)) {
                        (Some(p), Some(q)) if p == q => s,
                        (Some(_), Some(_)) => s + w + w,
                        _ => s + w,
                    }
                })
            }
            _ => self.delete(a) + self.insert(b),
        }
    }
}

fn plain_label(x: &XmlElement) -> String {
    let mut s = x.name.clone();
    let attrs: Vec<String> = x
        .attrs
        .iter()
        .filter(|(k, _)| !IGNORED_ATTRS.contains(&(x.name.as_str(), k.as_str())))
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    if !attrs.is_empty() {
        s.push('[');
        s.push_str(&attrs.join(","));
        s.push(']');
    }
    if let Some(t) = x.text.as_deref().map(str::trim).filter(|t| !t.is_empty()) {
        s.push('=');
        s.push_str(t);
    }
    s
}

fn plain_node(x: &XmlElement) -> Node<TreeLabel> {
    Node::new(
        TreeLabel::Plain(plain_label(x)),
        x.children.iter().map(plain_node).collect(),
    )
}

/// Tree of a document: every serialized element is a node, except that each
/// `<note>` subtree collapses into one note node. The part list is left out.
pub fn score_tree(doc: &ScoreDocument) -> Result<LabeledTree<TreeLabel>, SerializeError> {
    if doc.is_blank() {
        return Ok(LabeledTree::empty());
    }
    let xml = to_xml_tree(doc)?;
    let mut parts = Vec::new();
    let mut model_parts = doc.parts.iter();
    for px in xml.children.iter().filter(|c| c.name == "part") {
        let part = model_parts.next().expect("one part element per part");
        let mut measures = Vec::new();
        for (mx, m) in px.children.iter().zip(&part.measures) {
            let mut kids = Vec::with_capacity(m.elements.len());
            for (ex, e) in mx.children.iter().zip(&m.elements) {
                kids.push(match e {
                    MusicElement::Note(n) => Node::leaf(TreeLabel::Note(NoteLabel::from_note(n))),
                    _ => plain_node(ex),
                });
            }
            measures.push(Node::new(TreeLabel::Plain(plain_label(mx)), kids));
        }
        parts.push(Node::new(TreeLabel::Plain(plain_label(px)), measures));
    }
    Ok(LabeledTree::from_root(Node::new(TreeLabel::Plain(plain_label(&xml)), parts)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TednMode {
    Full,
    /// Both sides projected through linearization first.
    Lmx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TednResult {
    pub distance: Cost,
    pub gold_size_cost: Cost,
    pub pred_nodes: usize,
    pub gold_nodes: usize,
    /// Problems with the prediction that were scored rather than raised.
    pub warnings: Vec<String>,
}

impl TednResult {
    pub fn percent(&self) -> f64 {
        let r = self.distance * Cost::from_integer(100) / self.gold_size_cost;
        r.to_f64().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Error)]
pub enum TednError {
    #[error("gold does not canonicalize: {0}")]
    GoldCanonicalization(#[from] CanonicalizationError),
    #[error("gold cannot be linearized: {0}")]
    GoldLinearization(#[from] LinearizeError),
    #[error("gold cannot be serialized: {0}")]
    GoldSerialization(#[from] SerializeError),
    #[error("gold tree is empty")]
    EmptyGold,
}

/// Project a canonical document onto what linearization keeps, part by part.
pub fn lmx_projection(doc: &ScoreDocument) -> Result<ScoreDocument, LinearizeError> {
    let mut out = ScoreDocument::default();
    for p in &doc.parts {
        let single = ScoreDocument {
            parts: vec![p.clone()],
            source_divisions: BTreeMap::new(),
        };
        let (back, _) = delinearize(&linearize(&single)?);
        let mut part = back.parts.into_iter().next().unwrap_or_default();
        part.id = p.id.clone();
        out.source_divisions
            .insert(p.id.clone(), back.source_divisions.get("P1").copied().unwrap_or(1));
        out.parts.push(part);
    }
    Ok(out)
}

fn prepare(doc: &ScoreDocument, mode: TednMode) -> Result<ScoreDocument, String> {
    let (c, _) = canonicalize(doc).map_err(|e| format!("canonicalization failed: {e}"))?;
    match mode {
        TednMode::Full => Ok(c),
        TednMode::Lmx => lmx_projection(&c).map_err(|e| format!("linearization failed: {e}")),
    }
}

/// Normalized tree edit distance of a prediction against gold.
pub fn tedn(pred: &ScoreDocument, gold: &ScoreDocument, mode: TednMode, costs: &TednCosts) -> Result<TednResult, TednError> {
    let (g, _) = canonicalize(gold)?;
    let g = match mode {
        TednMode::Full => g,
        TednMode::Lmx => lmx_projection(&g)?,
    };
    let gold_tree = score_tree(&g)?;
    if gold_tree.is_empty() {
        return Err(TednError::EmptyGold);
    }
    let mut warnings = Vec::new();
    let pred_tree = match prepare(pred, mode).and_then(|p| score_tree(&p).map_err(|e| e.to_string())) {
        Ok(t) => t,
        Err(e) => {
            warnings.push(format!("prediction scored as empty: {e}"));
            LabeledTree::empty()
        }
    };
    Ok(tedn_trees(&pred_tree, &gold_tree, costs, warnings))
}

pub fn tedn_trees(
    pred: &LabeledTree<TreeLabel>,
    gold: &LabeledTree<TreeLabel>,
    costs: &TednCosts,
    warnings: Vec<String>,
) -> TednResult {
    let distance = zhang_shasha(pred, gold, costs);
    let gold_size_cost = gold.labels().iter().fold(Cost::zero(), |s, l| s + costs.delete(l));
    TednResult {
        distance,
        gold_size_cost,
        pred_nodes: pred.len(),
        gold_nodes: gold.len(),
        warnings,
    }
}

/// Human-readable optimal edit script, one operation per line.
pub fn edit_script_text(pred: &LabeledTree<TreeLabel>, gold: &LabeledTree<TreeLabel>, costs: &TednCosts) -> String {
    let (_, ops) = edit_script(pred, gold, costs);
    let mut s = String::new();
    for op in ops {
        match op {
            EditOp::Delete(i) => s.push_str(&format!("delete {} ({})\n", pred.label(i), costs.delete(pred.label(i)))),
            EditOp::Insert(j) => s.push_str(&format!("insert {} ({})\n", gold.label(j), costs.insert(gold.label(j)))),
            EditOp::Relabel(i, j) => {
                let c = costs.relabel(pred.label(i), gold.label(j));
                if !c.is_zero() {
                    s.push_str(&format!("substitute {} -> {} ({c})\n", pred.label(i), gold.label(j)));
                }
            }
        }
    }
    s
}
