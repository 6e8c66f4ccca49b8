use std::collections::BTreeMap;
use std::str::FromStr;

use roxmltree::{Document, Node};
use thiserror::Error;

use super::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),
    #[error("invalid <{element}> at line {line}, column {column}: {message}")]
    InvalidValue {
        element: String,
        line: u32,
        column: u32,
        message: String,
    },
    #[error("invalid compressed container: {0}")]
    Container(String),
}

/// Accounting of what the parser kept and what it dropped.
///
/// `consumed + skipped.values().sum()` equals the number of element nodes in
/// the source document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SkipLog {
    /// Element nodes represented in the model.
    pub consumed: usize,
    /// Dropped subtrees: root element name -> element nodes dropped.
    pub skipped: BTreeMap<String, usize>,
    /// Kept verbatim but outside the linearized subset: name -> element nodes.
    pub retained_out_of_scope: BTreeMap<String, usize>,
    /// Elements seen with `print-object="no"`.
    pub hidden_objects: usize,
}

impl SkipLog {
    pub fn skipped_total(&self) -> usize {
        self.skipped.values().sum()
    }

    pub fn retained_total(&self) -> usize {
        self.retained_out_of_scope.values().sum()
    }

    pub fn source_total(&self) -> usize {
        self.consumed + self.skipped_total()
    }

    pub fn merge(&mut self, other: &SkipLog) {
        self.consumed += other.consumed;
        for (k, v) in &other.skipped {
            *self.skipped.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.retained_out_of_scope {
            *self.retained_out_of_scope.entry(k.clone()).or_default() += v;
        }
        self.hidden_objects += other.hidden_objects;
    }
}

/// Measure-level elements kept verbatim for full-document evaluation.
const RETAINED_MEASURE_CHILDREN: &[&str] = &["direction", "barline", "harmony", "figured-bass"];

/// Presentation-only attributes dropped from retained elements.
const LAYOUT_ATTRS: &[&str] = &[
    "default-x",
    "default-y",
    "relative-x",
    "relative-y",
    "font-family",
    "font-size",
    "font-style",
    "font-weight",
    "color",
    "halign",
    "valign",
    "justify",
    "id",
    "print-object",
    "enclosure",
    "system",
];

pub fn parse_musicxml(bytes: &[u8]) -> Result<ScoreDocument, ParseError> {
    parse_musicxml_with_log(bytes).map(|(doc, _)| doc)
}

pub fn parse_musicxml_with_log(bytes: &[u8]) -> Result<(ScoreDocument, SkipLog), ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Xml {
        line: 0,
        column: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    // roxmltree refuses DTDs with external subsets only when asked to resolve them;
    // MusicXML DOCTYPE declarations are accepted with allow_dtd.
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let doc = Document::parse_with_options(text, opts).map_err(|e| {
        let pos = e.pos();
        ParseError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let mut cx = Cx {
        doc: &doc,
        log: SkipLog::default(),
    };
    let score = cx.score(doc.root_element())?;
    Ok((score, cx.log))
}

struct Cx<'a, 'input> {
    doc: &'a Document<'input>,
    log: SkipLog,
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|c| c.is_element())
}

fn subtree_size(node: Node<'_, '_>) -> usize {
    node.descendants().filter(|n| n.is_element()).count()
}

impl<'a, 'input> Cx<'a, 'input> {
    fn consume(&mut self, node: Node<'_, '_>) {
        self.log.consumed += 1;
        if node.attribute("print-object") == Some("no") {
            self.log.hidden_objects += 1;
        }
    }

    fn skip(&mut self, node: Node<'_, '_>) {
        *self
            .log
            .skipped
            .entry(node.tag_name().name().to_string())
            .or_default() += subtree_size(node);
    }

    fn retain(&mut self, node: Node<'_, '_>) -> XmlElement {
        let n = subtree_size(node);
        self.log.consumed += n;
        *self
            .log
            .retained_out_of_scope
            .entry(node.tag_name().name().to_string())
            .or_default() += n;
        XmlElement::from_node(node, &|a| !LAYOUT_ATTRS.contains(&a))
    }

    fn invalid(&self, node: Node<'_, '_>, message: impl Into<String>) -> ParseError {
        let pos = self.doc.text_pos_at(node.range().start);
        ParseError::InvalidValue {
            element: node.tag_name().name().to_string(),
            line: pos.row,
            column: pos.col,
            message: message.into(),
        }
    }

    fn text(&self, node: Node<'_, '_>) -> String {
        node.children()
            .filter(|c| c.is_text())
            .filter_map(|c| c.text())
            .collect::<String>()
            .trim()
            .to_string()
    }

    fn number<T: FromStr>(&self, node: Node<'_, '_>) -> Result<T, ParseError> {
        let t = self.text(node);
        t.parse::<T>()
            .map_err(|_| self.invalid(node, format!("expected a number, got {t:?}")))
    }

    /// Non-negative integral value, accepting a redundant `.0` suffix.
    fn integral(&self, node: Node<'_, '_>) -> Result<u32, ParseError> {
        let t = self.text(node);
        if let Ok(v) = t.parse::<u32>() {
            return Ok(v);
        }
        match t.parse::<f64>() {
            Ok(f) if f >= 0.0 && f.fract() == 0.0 && f <= f64::from(u32::MAX) => Ok(f as u32),
            _ => Err(self.invalid(node, format!("expected a non-negative integer, got {t:?}"))),
        }
    }

    fn score(&mut self, root: Node<'_, '_>) -> Result<ScoreDocument, ParseError> {
        match root.tag_name().name() {
            "score-partwise" => {}
            "score-timewise" => {
                return Err(ParseError::UnsupportedStructure(
                    "score-timewise documents are not supported".into(),
                ))
            }
            other => {
                return Err(ParseError::UnsupportedStructure(format!(
                    "root element <{other}> is not a MusicXML score"
                )))
            }
        }
        self.consume(root);
        let mut names: BTreeMap<String, Option<String>> = BTreeMap::new();
        let mut doc = ScoreDocument::default();
        for child in elements(root) {
            match child.tag_name().name() {
                "part-list" => {
                    self.consume(child);
                    for sp in elements(child) {
                        if sp.tag_name().name() != "score-part" {
                            self.skip(sp);
                            continue;
                        }
                        self.consume(sp);
                        let id = sp.attribute("id").unwrap_or_default().to_string();
                        let mut name = None;
                        for c in elements(sp) {
                            if c.tag_name().name() == "part-name" {
                                self.consume(c);
                                let t = self.text(c);
                                if !t.is_empty() {
                                    name = Some(t);
                                }
                            } else {
                                self.skip(c);
                            }
                        }
                        names.insert(id, name);
                    }
                }
                "part" => {
                    self.consume(child);
                    let id = child.attribute("id").unwrap_or_default().to_string();
                    if doc.parts.iter().any(|p| p.id == id) {
                        return Err(ParseError::UnsupportedStructure(format!(
                            "duplicate part id {id:?}"
                        )));
                    }
                    let (part, divisions) = self.part(child, id.clone())?;
                    doc.source_divisions.insert(id, divisions.unwrap_or(1));
                    doc.parts.push(part);
                }
                _ => self.skip(child),
            }
        }
        for part in &mut doc.parts {
            part.name = names.get(&part.id).cloned().flatten();
        }
        Ok(doc)
    }

    fn part(&mut self, node: Node<'_, '_>, id: String) -> Result<(Part, Option<u32>), ParseError> {
        let mut part = Part {
            id,
            name: None,
            measures: Vec::new(),
        };
        let mut first_divisions = None;
        for m in elements(node) {
            if m.tag_name().name() != "measure" {
                self.skip(m);
                continue;
            }
            self.consume(m);
            let measure = self.measure(m)?;
            if first_divisions.is_none() {
                first_divisions = measure.elements.iter().find_map(|e| match e {
                    MusicElement::Attributes(a) => a.divisions,
                    _ => None,
                });
            }
            part.measures.push(measure);
        }
        Ok((part, first_divisions))
    }

    fn measure(&mut self, node: Node<'_, '_>) -> Result<Measure, ParseError> {
        let mut measure = Measure::default();
        for c in elements(node) {
            let name = c.tag_name().name();
            let el = match name {
                "note" => self.note(c)?.map(MusicElement::Note),
                "backup" => self.backup(c)?,
                "forward" => self.forward(c)?,
                "attributes" => Some(MusicElement::Attributes(self.attributes(c)?)),
                _ if RETAINED_MEASURE_CHILDREN.contains(&name) => {
                    Some(MusicElement::Other(self.retain(c)))
                }
                _ => {
                    self.skip(c);
                    None
                }
            };
            if let Some(el) = el {
                measure.elements.push(el);
            }
        }
        Ok(measure)
    }

    fn backup(&mut self, node: Node<'_, '_>) -> Result<Option<MusicElement>, ParseError> {
        let mut duration = None;
        let start_consumed = self.log.consumed;
        self.consume(node);
        for c in elements(node) {
            if c.tag_name().name() == "duration" {
                self.consume(c);
                duration = Some(self.integral(c)?);
            } else {
                self.skip(c);
            }
        }
        match duration {
            Some(d) if d > 0 => Ok(Some(MusicElement::Backup(Backup { duration: d }))),
            _ => {
                self.unconsume(node, start_consumed);
                Ok(None)
            }
        }
    }

    fn forward(&mut self, node: Node<'_, '_>) -> Result<Option<MusicElement>, ParseError> {
        let start_consumed = self.log.consumed;
        self.consume(node);
        let mut fwd = Forward {
            duration: 0,
            voice: None,
            staff: None,
        };
        for c in elements(node) {
            match c.tag_name().name() {
                "duration" => {
                    self.consume(c);
                    fwd.duration = self.integral(c)?;
                }
                "voice" => {
                    self.consume(c);
                    fwd.voice = Some(self.voice(c)?);
                }
                "staff" => {
                    self.consume(c);
                    fwd.staff = Some(self.staff(c)?);
                }
                _ => self.skip(c),
            }
        }
        if fwd.duration == 0 {
            self.unconsume(node, start_consumed);
            return Ok(None);
        }
        Ok(Some(MusicElement::Forward(fwd)))
    }

    /// Reclassify an element consumed so far as skipped.
    fn unconsume(&mut self, node: Node<'_, '_>, before: usize) {
        let n = self.log.consumed - before;
        self.log.consumed = before;
        *self
            .log
            .skipped
            .entry(node.tag_name().name().to_string())
            .or_default() += n;
    }

    fn voice(&self, node: Node<'_, '_>) -> Result<u8, ParseError> {
        let v: u32 = self.number(node)?;
        if v == 0 || v > u32::from(MAX_VOICES) {
            return Err(ParseError::UnsupportedStructure(format!(
                "voice {v} outside 1..={MAX_VOICES}"
            )));
        }
        Ok(v as u8)
    }

    fn staff(&self, node: Node<'_, '_>) -> Result<u8, ParseError> {
        let v: u32 = self.number(node)?;
        if v == 0 || v > u32::from(MAX_STAVES) {
            return Err(ParseError::UnsupportedStructure(format!(
                "staff {v}: parts with more than {MAX_STAVES} staves are not supported"
            )));
        }
        Ok(v as u8)
    }

    fn note(&mut self, node: Node<'_, '_>) -> Result<Option<Note>, ParseError> {
        self.consume(node);
        let mut note = Note::default();
        let mut beams: Vec<(u32, Beam)> = Vec::new();
        for c in elements(node) {
            match c.tag_name().name() {
                "grace" => {
                    self.consume(c);
                    note.grace = true;
                    note.grace_slash = c.attribute("slash") == Some("yes");
                }
                "chord" => {
                    self.consume(c);
                    note.chord = true;
                }
                "pitch" => {
                    self.consume(c);
                    note.pitch = Some(self.pitch(c)?);
                }
                "unpitched" => {
                    return Err(ParseError::UnsupportedStructure(
                        "unpitched (percussion) notes are not supported".into(),
                    ))
                }
                "rest" => {
                    self.consume(c);
                    note.rest = true;
                    note.measure_rest = c.attribute("measure") == Some("yes");
                    for d in elements(c) {
                        self.skip(d);
                    }
                }
                "duration" => {
                    self.consume(c);
                    note.duration = self.integral(c)?;
                }
                "tie" => match c.attribute("type") {
                    Some("start") => {
                        self.consume(c);
                        note.tie_start = true;
                    }
                    Some("stop") => {
                        self.consume(c);
                        note.tie_stop = true;
                    }
                    _ => self.skip(c),
                },
                "voice" => {
                    self.consume(c);
                    note.voice = self.voice(c)?;
                }
                "type" => {
                    self.consume(c);
                    let t = self.text(c);
                    note.note_type = Some(
                        t.parse::<NoteType>()
                            .map_err(|_| self.invalid(c, format!("unknown note type {t:?}")))?,
                    );
                }
                "dot" => {
                    self.consume(c);
                    note.dots += 1;
                    if note.dots > 2 {
                        return Err(ParseError::UnsupportedStructure(
                            "notes with more than two dots are not supported".into(),
                        ));
                    }
                }
                "accidental" => match Accidental::from_name(&self.text(c)) {
                    Some(a) => {
                        self.consume(c);
                        note.accidental = Some(a);
                    }
                    None => self.skip(c),
                },
                "time-modification" => {
                    self.consume(c);
                    let mut actual = None;
                    let mut normal = None;
                    for d in elements(c) {
                        match d.tag_name().name() {
                            "actual-notes" => {
                                self.consume(d);
                                actual = Some(self.number::<u32>(d)?);
                            }
                            "normal-notes" => {
                                self.consume(d);
                                normal = Some(self.number::<u32>(d)?);
                            }
                            _ => self.skip(d),
                        }
                    }
                    match (actual, normal) {
                        (Some(a), Some(n)) if a > 0 && n > 0 => {
                            note.time_modification = Some(TimeModification::new(a, n))
                        }
                        _ => return Err(self.invalid(c, "incomplete time modification")),
                    }
                }
                "stem" => match Stem::from_name(&self.text(c)) {
                    Some(s) => {
                        self.consume(c);
                        note.stem = Some(s);
                    }
                    None => self.skip(c),
                },
                "staff" => {
                    self.consume(c);
                    note.staff = self.staff(c)?;
                }
                "beam" => match Beam::from_name(&self.text(c)) {
                    Some(b) => {
                        self.consume(c);
                        let number = c
                            .attribute("number")
                            .and_then(|n| n.parse::<u32>().ok())
                            .unwrap_or(beams.len() as u32 + 1);
                        beams.push((number, b));
                    }
                    None => self.skip(c),
                },
                "notations" => {
                    self.consume(c);
                    self.notations(c, &mut note)?;
                }
                _ => self.skip(c),
            }
        }
        beams.sort_by_key(|(n, _)| *n);
        note.beams = beams.into_iter().map(|(_, b)| b).collect();
        if note.rest {
            note.pitch = None;
            if note.stem.take().is_some() {
                *self.log.skipped.entry("stem".into()).or_default() += 1;
                self.log.consumed -= 1;
            }
            if note.accidental.take().is_some() {
                *self.log.skipped.entry("accidental".into()).or_default() += 1;
                self.log.consumed -= 1;
            }
        }
        if note.grace {
            note.duration = 0;
        }
        Ok(Some(note))
    }

    fn pitch(&mut self, node: Node<'_, '_>) -> Result<Pitch, ParseError> {
        let mut step = None;
        let mut octave = None;
        let mut alter = None;
        for c in elements(node) {
            match c.tag_name().name() {
                "step" => {
                    self.consume(c);
                    let t = self.text(c);
                    step = t.chars().next().and_then(Step::from_char).filter(|_| t.len() == 1);
                    if step.is_none() {
                        return Err(self.invalid(c, format!("bad step {t:?}")));
                    }
                }
                "octave" => {
                    self.consume(c);
                    let o: u8 = self.number(c)?;
                    if o > 9 {
                        return Err(self.invalid(c, format!("octave {o} outside 0..=9")));
                    }
                    octave = Some(o);
                }
                "alter" => {
                    self.consume(c);
                    let a: f64 = self.number(c)?;
                    if a.fract() != 0.0 || !(-2.0..=2.0).contains(&a) {
                        return Err(ParseError::UnsupportedStructure(format!(
                            "microtonal or out-of-range alter {a}"
                        )));
                    }
                    alter = Some(a as i8);
                }
                _ => self.skip(c),
            }
        }
        match (step, octave) {
            (Some(step), Some(octave)) => Ok(Pitch {
                step,
                octave,
                alter,
            }),
            _ => Err(self.invalid(node, "pitch requires step and octave")),
        }
    }

    fn notations(&mut self, node: Node<'_, '_>, note: &mut Note) -> Result<(), ParseError> {
        for c in elements(node) {
            match c.tag_name().name() {
                "tied" => match c.attribute("type") {
                    Some("start") => {
                        self.consume(c);
                        note.tied_start = true;
                    }
                    Some("stop") => {
                        self.consume(c);
                        note.tied_stop = true;
                    }
                    _ => self.skip(c),
                },
                "slur" => match c.attribute("type") {
                    Some("start") => {
                        self.consume(c);
                        note.slur_starts = note.slur_starts.saturating_add(1);
                    }
                    Some("stop") => {
                        self.consume(c);
                        note.slur_stops = note.slur_stops.saturating_add(1);
                    }
                    _ => self.skip(c),
                },
                "tuplet" => match c.attribute("type") {
                    Some("start") => {
                        self.consume(c);
                        note.tuplet_start = true;
                        for d in elements(c) {
                            self.skip(d);
                        }
                    }
                    Some("stop") => {
                        self.consume(c);
                        note.tuplet_stop = true;
                        for d in elements(c) {
                            self.skip(d);
                        }
                    }
                    _ => self.skip(c),
                },
                "ornaments" => {
                    self.consume(c);
                    for d in elements(c) {
                        let name = d.tag_name().name();
                        if name == "trill-mark" {
                            self.consume(d);
                            note.trill = true;
                        } else if name == "tremolo"
                            && d.attribute("type").unwrap_or("single") == "single"
                        {
                            self.consume(d);
                            let marks: u8 = self.number(d).unwrap_or(3);
                            note.tremolo = Some(marks.clamp(1, 4));
                        } else if let Some(o) = Ornament::from_name(name) {
                            self.consume(d);
                            note.ornaments.insert(o);
                        } else {
                            self.skip(d);
                        }
                    }
                }
                "articulations" => {
                    self.consume(c);
                    for d in elements(c) {
                        match d.tag_name().name() {
                            "staccato" => {
                                self.consume(d);
                                note.staccato = true;
                            }
                            "accent" => {
                                self.consume(d);
                                note.accent = true;
                            }
                            "tenuto" => {
                                self.consume(d);
                                note.tenuto = true;
                            }
                            _ => self.skip(d),
                        }
                    }
                }
                "fermata" => {
                    self.consume(c);
                    note.fermata = true;
                }
                "arpeggiate" => {
                    self.consume(c);
                    note.arpeggiate = true;
                }
                _ => self.skip(c),
            }
        }
        Ok(())
    }

    fn attributes(&mut self, node: Node<'_, '_>) -> Result<Attributes, ParseError> {
        self.consume(node);
        let mut attrs = Attributes::default();
        for c in elements(node) {
            match c.tag_name().name() {
                "divisions" => {
                    let d = self.integral(c)?;
                    if d == 0 {
                        return Err(self.invalid(c, "divisions must be positive"));
                    }
                    self.consume(c);
                    attrs.divisions = Some(d);
                }
                "key" => {
                    let fifths = elements(c).find(|d| d.tag_name().name() == "fifths");
                    let value = fifths.and_then(|f| self.number::<i8>(f).ok());
                    match (fifths, value) {
                        (Some(f), Some(v)) if (-7..=7).contains(&v) => {
                            self.consume(c);
                            self.consume(f);
                            attrs.key_fifths = Some(v);
                            for d in elements(c).filter(|d| *d != f) {
                                self.skip(d);
                            }
                        }
                        _ => self.skip(c),
                    }
                }
                "time" => {
                    let beats = elements(c).find(|d| d.tag_name().name() == "beats");
                    let beat_type = elements(c).find(|d| d.tag_name().name() == "beat-type");
                    let pair = match (beats, beat_type) {
                        (Some(b), Some(t)) => match (self.number::<u32>(b), self.number::<u32>(t)) {
                            (Ok(bv), Ok(tv)) if bv > 0 && tv.is_power_of_two() => {
                                Some((b, t, bv, tv))
                            }
                            _ => None,
                        },
                        _ => None,
                    };
                    // Composite signatures repeat beats/beat-type; only the simple form is kept.
                    let simple = elements(c).filter(|d| d.tag_name().name() == "beats").count() == 1;
                    match pair {
                        Some((b, t, bv, tv)) if simple => {
                            self.consume(c);
                            self.consume(b);
                            self.consume(t);
                            attrs.time = Some(TimeSignature::new(bv, tv));
                            for d in elements(c).filter(|d| *d != b && *d != t) {
                                self.skip(d);
                            }
                        }
                        _ => self.skip(c),
                    }
                }
                "staves" => {
                    let s: u32 = self.number(c)?;
                    if s == 0 || s > u32::from(MAX_STAVES) {
                        return Err(ParseError::UnsupportedStructure(format!(
                            "{s} staves: parts with more than {MAX_STAVES} staves are not supported"
                        )));
                    }
                    self.consume(c);
                    attrs.staves = Some(s as u8);
                }
                "clef" => {
                    let staff = match c.attribute("number") {
                        Some(n) => {
                            let v: u32 = n.parse().map_err(|_| self.invalid(c, "bad clef number"))?;
                            if v == 0 || v > u32::from(MAX_STAVES) {
                                return Err(ParseError::UnsupportedStructure(format!(
                                    "clef for staff {v}"
                                )));
                            }
                            v as u8
                        }
                        None => 1,
                    };
                    let sign_node = elements(c).find(|d| d.tag_name().name() == "sign");
                    let sign = sign_node.and_then(|s| ClefSign::from_name(&self.text(s)));
                    match (sign_node, sign) {
                        (Some(sn), Some(sign)) => {
                            self.consume(c);
                            self.consume(sn);
                            let mut line = sign.default_line();
                            for d in elements(c).filter(|d| *d != sn) {
                                if d.tag_name().name() == "line" {
                                    match self.number::<u8>(d) {
                                        Ok(l) if (1..=5).contains(&l) => {
                                            self.consume(d);
                                            line = l;
                                        }
                                        _ => self.skip(d),
                                    }
                                } else {
                                    self.skip(d);
                                }
                            }
                            attrs.clefs.push(Clef { staff, sign, line });
                        }
                        _ => self.skip(c),
                    }
                }
                _ => self.skip(c),
            }
        }
        Ok(attrs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrap(measure_body: &str) -> String {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?>
<score-partwise version="3.1">
  <part-list><score-part id="P1"><part-name>Piano</part-name></score-part></part-list>
  <part id="P1"><measure number="1">{measure_body}</measure></part>
</score-partwise>"#
        )
    }

    fn count_elements(xml: &str) -> usize {
        let doc = Document::parse_with_options(
            xml,
            roxmltree::ParsingOptions {
                allow_dtd: true,
                ..Default::default()
            },
        )
        .unwrap();
        doc.descendants().filter(|n| n.is_element()).count()
    }

    #[test]
    fn empty_part() {
        let xml = r#"<score-partwise><part-list><score-part id="P1"/></part-list><part id="P1"/></score-partwise>"#;
        let doc = parse_musicxml(xml.as_bytes()).unwrap();
        assert_eq!(doc.parts.len(), 1);
        assert!(doc.parts[0].measures.is_empty());
        assert_eq!(doc.source_divisions["P1"], 1);
    }

    #[test]
    fn single_note() {
        let xml = wrap(
            "<note><pitch><step>G</step><octave>4</octave></pitch><type>quarter</type><voice>1</voice></note>",
        );
        let doc = parse_musicxml(xml.as_bytes()).unwrap();
        let n = doc.notes().next().unwrap();
        assert_eq!(n.pitch, Some(Pitch::new(Step::G, 4)));
        assert_eq!(n.note_type, Some(NoteType::Quarter));
        assert_eq!(n.voice, 1);
        assert!(!n.rest);
    }

    #[test]
    fn rejects_timewise_and_too_many_staves() {
        let xml = "<score-timewise/>";
        assert!(matches!(
            parse_musicxml(xml.as_bytes()),
            Err(ParseError::UnsupportedStructure(_))
        ));
        let xml = wrap("<attributes><staves>3</staves></attributes>");
        assert!(matches!(
            parse_musicxml(xml.as_bytes()),
            Err(ParseError::UnsupportedStructure(_))
        ));
        let xml = wrap("<note><rest/><duration>1</duration><staff>3</staff></note>");
        assert!(matches!(
            parse_musicxml(xml.as_bytes()),
            Err(ParseError::UnsupportedStructure(_))
        ));
    }

    #[test]
    fn malformed_reports_position() {
        let xml = "<score-partwise>\n  <part id=\"P1\">\n</score-partwise>";
        match parse_musicxml(xml.as_bytes()) {
            Err(ParseError::Xml { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn microtones_rejected() {
        let xml = wrap(
            "<note><pitch><step>G</step><alter>0.5</alter><octave>4</octave></pitch><duration>1</duration></note>",
        );
        assert!(matches!(
            parse_musicxml(xml.as_bytes()),
            Err(ParseError::UnsupportedStructure(_))
        ));
    }

    #[test]
    fn skip_log_is_exhaustive() {
        let xml = wrap(
            r#"<attributes><divisions>2</divisions><key><fifths>1</fifths><mode>major</mode></key>
               <time><beats>4</beats><beat-type>4</beat-type></time>
               <clef><sign>G</sign><line>2</line></clef><clef><sign>percussion</sign></clef></attributes>
               <direction placement="below"><direction-type><dynamics><p/></dynamics></direction-type><staff>1</staff></direction>
               <print new-system="yes"><system-layout><system-distance>10</system-distance></system-layout></print>
               <note default-x="10"><pitch><step>C</step><octave>5</octave></pitch><duration>2</duration>
                 <voice>1</voice><type>quarter</type><stem>up</stem><notehead>x</notehead>
                 <lyric><text>la</text></lyric>
                 <notations><tied type="start"/><dynamics><f/></dynamics><articulations><staccato/><spiccato/></articulations></notations></note>
               <note print-object="no"><rest/><duration>6</duration><voice>1</voice><stem>up</stem></note>
               <backup><duration>0</duration></backup>"#,
        );
        let (doc, log) = parse_musicxml_with_log(xml.as_bytes()).unwrap();
        assert_eq!(log.source_total(), count_elements(&xml));
        assert_eq!(log.hidden_objects, 1);
        assert!(log.skipped.contains_key("lyric"));
        assert!(log.skipped.contains_key("print"));
        assert_eq!(log.skipped.get("backup"), Some(&2));
        assert_eq!(log.retained_out_of_scope.get("direction"), Some(&5));
        let rest = doc.notes().nth(1).unwrap();
        assert!(rest.rest && rest.stem.is_none());
        // element order preserved: attributes, direction, note, note
        let names: Vec<_> = doc.parts[0].measures[0]
            .elements
            .iter()
            .map(|e| e.name().to_string())
            .collect();
        assert_eq!(names, ["attributes", "direction", "note", "note"]);
        let MusicElement::Other(dir) = &doc.parts[0].measures[0].elements[1] else {
            panic!()
        };
        assert_eq!(dir.get_attr("placement"), Some("below"));
    }
}
