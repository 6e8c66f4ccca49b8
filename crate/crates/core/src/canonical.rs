//! Canonical form: voice-major measures, renumbered voices, ordered chords,
//! full-measure backups, gap forwards and minimal divisions.

use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use crate::duration::{from_divisions, minimal_divisions, note_quarters, to_divisions, type_for_duration, NoteType, Quarters};
use crate::score::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChordOrder {
    /// Staff ascending, then highest pitch first.
    #[default]
    StaffThenPitchDescending,
    /// Keep the source order of chord notes.
    Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CanonicalOptions {
    pub chord_order: ChordOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CanonicalReport {
    pub reordered_chords: usize,
    pub renumbered_voices: usize,
    pub dropped_elements: BTreeMap<String, usize>,
    pub divisions_rescaled: bool,
    /// Notes that had no `<type>` and received one from their duration.
    pub inferred_types: usize,
    /// Out-of-scope elements kept verbatim (element name -> nodes).
    pub retained_out_of_scope: BTreeMap<String, usize>,
    /// `print-object="no"` flags seen at parse time.
    pub hidden_objects: usize,
}

impl CanonicalReport {
    /// True when canonicalization changed nothing.
    pub fn is_noop(&self) -> bool {
        self.reordered_chords == 0
            && self.renumbered_voices == 0
            && self.dropped_elements.is_empty()
            && !self.divisions_rescaled
            && self.inferred_types == 0
    }

    fn drop(&mut self, name: &str) {
        *self.dropped_elements.entry(name.to_string()).or_default() += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonicalizationError {
    #[error("part {part}, measure {}, voice {voice}: {message}", .measure + 1)]
    InconsistentDurations {
        part: String,
        /// Zero-based measure index.
        measure: usize,
        voice: u8,
        message: String,
    },
    #[error("part {part}, measure {}: more than four voices on staff {staff}", .measure + 1)]
    TooManyVoices { part: String, measure: usize, staff: u8 },
    #[error("part {part}, measure {}: note without duration or type", .measure + 1)]
    MissingDuration { part: String, measure: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TimedNote {
    pub note: Note,
    pub dur: Quarters,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum ItemKind {
    /// A note with its chord continuation notes, head first.
    Chord(Vec<TimedNote>),
    /// Attributes or a retained out-of-scope element.
    Element(MusicElement),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Item {
    pub onset: Quarters,
    pub kind: ItemKind,
}

impl Item {
    pub fn span(&self) -> Quarters {
        match &self.kind {
            ItemKind::Chord(ns) if !ns[0].note.grace => ns[0].dur,
            _ => Quarters::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct VoiceStream {
    pub voice: u8,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct LaidMeasure {
    pub leading: Vec<MusicElement>,
    pub voices: Vec<VoiceStream>,
    pub length: Quarters,
}

pub(crate) fn default_staff(voice: u8) -> u8 {
    if voice > 4 {
        2
    } else {
        1
    }
}

/// Sort chord notes in place; returns whether the order changed.
pub(crate) fn order_chord(notes: &mut [TimedNote], order: ChordOrder) -> bool {
    if order == ChordOrder::Source || notes.len() < 2 {
        return false;
    }
    let key = |t: &TimedNote| {
        let h = t.note.pitch.map(|p| p.height()).unwrap_or((i32::MIN, 0));
        (t.note.staff, std::cmp::Reverse(h))
    };
    if notes.windows(2).all(|w| key(&w[0]) <= key(&w[1])) {
        return false;
    }
    let head_beams = std::mem::take(&mut notes[0].note.beams);
    notes.sort_by_key(key);
    for (i, t) in notes.iter_mut().enumerate() {
        t.note.chord = i > 0;
    }
    notes[0].note.beams = head_beams;
    true
}

fn conflicts(a: &Attributes, b: &Attributes) -> bool {
    (a.divisions.is_some() && b.divisions.is_some())
        || (a.key_fifths.is_some() && b.key_fifths.is_some())
        || (a.time.is_some() && b.time.is_some())
        || (a.staves.is_some() && b.staves.is_some())
        || a.clefs.iter().any(|c| b.clefs.iter().any(|d| d.staff == c.staff))
        || {
            let mut staffs: Vec<u8> = a.clefs.iter().chain(&b.clefs).map(|c| c.staff).collect();
            staffs.sort_unstable();
            staffs.windows(2).any(|w| w[0] == w[1])
        }
}

fn merge_into(a: &mut Attributes, b: Attributes) {
    a.divisions = a.divisions.or(b.divisions);
    a.key_fifths = a.key_fifths.or(b.key_fifths);
    a.time = a.time.or(b.time);
    a.staves = a.staves.or(b.staves);
    a.clefs.extend(b.clefs);
}

fn normalize_attributes(a: &mut Attributes) {
    a.clefs.sort_by_key(|c| c.staff);
}

/// Merge adjacent non-conflicting attributes and sort clefs.
fn merge_elements(els: Vec<MusicElement>) -> Vec<MusicElement> {
    let mut out: Vec<MusicElement> = Vec::with_capacity(els.len());
    for e in els {
        match (out.last_mut(), e) {
            (Some(MusicElement::Attributes(prev)), MusicElement::Attributes(b)) if !conflicts(prev, &b) => {
                merge_into(prev, b);
                normalize_attributes(prev);
            }
            (_, MusicElement::Attributes(mut b)) => {
                normalize_attributes(&mut b);
                out.push(MusicElement::Attributes(b));
            }
            (_, e) => out.push(e),
        }
    }
    out
}

fn merge_items(items: Vec<Item>) -> Vec<Item> {
    let mut out: Vec<Item> = Vec::with_capacity(items.len());
    for it in items {
        if let (Some(prev), ItemKind::Element(MusicElement::Attributes(b))) = (out.last_mut(), &it.kind) {
            if prev.onset == it.onset {
                if let ItemKind::Element(MusicElement::Attributes(a)) = &mut prev.kind {
                    if !conflicts(a, b) {
                        merge_into(a, b.clone());
                        normalize_attributes(a);
                        continue;
                    }
                }
            }
        }
        let mut it = it;
        if let ItemKind::Element(MusicElement::Attributes(a)) = &mut it.kind {
            normalize_attributes(a);
        }
        out.push(it);
    }
    out
}

/// Strip divisions and staves (re-added once at the start of the part).
/// Returns false when nothing is left.
fn strip_attributes(a: &mut Attributes) -> bool {
    a.divisions = None;
    a.staves = None;
    !a.is_empty()
}

/// Turn laid-out measures into canonical MusicXML measures.
///
/// Voices are emitted in the given order, each followed by a backup over the
/// full measure length; gaps become forwards. Divisions are the minimal value
/// making every onset and duration integral and appear once, in the first
/// measure, together with `staves` for two-staff parts.
pub(crate) fn assemble_part(
    measures: Vec<LaidMeasure>,
    two_staves: bool,
    report: &mut CanonicalReport,
) -> (Vec<Measure>, u32) {
    let mut measures = measures;
    for m in &mut measures {
        // Attributes sitting at the very start of the first voice belong to the measure.
        if let Some(first) = m.voices.first_mut() {
            let n = first
                .items
                .iter()
                .take_while(|it| it.onset.is_zero() && matches!(it.kind, ItemKind::Element(_)))
                .count();
            for it in first.items.drain(..n) {
                if let ItemKind::Element(e) = it.kind {
                    m.leading.push(e);
                }
            }
        }
    }
    for (mi, m) in measures.iter_mut().enumerate() {
        // The first attributes of the part receive divisions, so they stay even if emptied.
        let keep = if mi == 0 {
            m.leading.iter().position(|e| matches!(e, MusicElement::Attributes(_)))
        } else {
            None
        };
        let leading = std::mem::take(&mut m.leading);
        for (i, e) in leading.into_iter().enumerate() {
            match e {
                MusicElement::Attributes(mut a) => {
                    if strip_attributes(&mut a) || keep == Some(i) {
                        m.leading.push(MusicElement::Attributes(a));
                    } else {
                        report.drop("attributes");
                    }
                }
                e => m.leading.push(e),
            }
        }
        for v in &mut m.voices {
            let items = std::mem::take(&mut v.items);
            v.items = items
                .into_iter()
                .filter_map(|mut it| {
                    if let ItemKind::Element(MusicElement::Attributes(a)) = &mut it.kind {
                        if !strip_attributes(a) {
                            report.drop("attributes");
                            return None;
                        }
                    }
                    Some(it)
                })
                .collect();
        }
    }

    let mut values: Vec<Quarters> = Vec::new();
    for m in &measures {
        values.push(m.length);
        for v in &m.voices {
            for it in &v.items {
                values.push(it.onset);
                if let ItemKind::Chord(ns) = &it.kind {
                    values.extend(ns.iter().map(|t| t.dur));
                }
            }
        }
    }
    let divisions = minimal_divisions(values).max(1);
    let to_div = |q: Quarters| to_divisions(q, divisions).value;

    if let Some(first) = measures.first_mut() {
        let head = Attributes {
            divisions: Some(divisions),
            staves: two_staves.then_some(2),
            ..Default::default()
        };
        match first.leading.iter_mut().find_map(|e| match e {
            MusicElement::Attributes(a) => Some(a),
            _ => None,
        }) {
            Some(a) => {
                a.divisions = head.divisions;
                a.staves = head.staves;
            }
            None => first.leading.insert(0, MusicElement::Attributes(head)),
        }
    }

    let mut out = Vec::with_capacity(measures.len());
    for m in measures {
        let mut elements = merge_elements(m.leading);
        let nvoices = m.voices.len();
        for (vi, v) in m.voices.into_iter().enumerate() {
            let mut cursor = Quarters::zero();
            let mut staff_state: Option<u8> = None;
            let forward = |gap: Quarters, staff: Option<u8>| {
                MusicElement::Forward(Forward {
                    duration: to_div(gap),
                    voice: Some(v.voice),
                    staff: Some(staff.unwrap_or_else(|| default_staff(v.voice))),
                })
            };
            for it in merge_items(v.items) {
                if it.onset > cursor {
                    elements.push(forward(it.onset - cursor, staff_state));
                    cursor = it.onset;
                }
                let span = it.span();
                match it.kind {
                    ItemKind::Chord(ns) => {
                        for t in ns {
                            let mut n = t.note;
                            n.voice = v.voice;
                            n.duration = if n.grace { 0 } else { to_div(t.dur) };
                            staff_state = Some(n.staff);
                            elements.push(MusicElement::Note(n));
                        }
                    }
                    ItemKind::Element(e) => elements.push(e),
                }
                if it.onset + span > cursor {
                    cursor = it.onset + span;
                }
            }
            if m.length > cursor {
                elements.push(forward(m.length - cursor, staff_state));
            }
            if vi + 1 < nvoices && !m.length.is_zero() {
                elements.push(MusicElement::Backup(Backup {
                    duration: to_div(m.length),
                }));
            }
        }
        out.push(Measure { elements });
    }
    (out, divisions)
}

pub fn canonicalize(doc: &ScoreDocument) -> Result<(ScoreDocument, CanonicalReport), CanonicalizationError> {
    canonicalize_with(doc, &CanonicalOptions::default())
}

/// Canonicalize and carry the parser's scope accounting into the report.
pub fn canonicalize_logged(
    doc: &ScoreDocument,
    log: &SkipLog,
) -> Result<(ScoreDocument, CanonicalReport), CanonicalizationError> {
    let (d, mut r) = canonicalize(doc)?;
    r.retained_out_of_scope = log.retained_out_of_scope.clone();
    r.hidden_objects = log.hidden_objects;
    Ok((d, r))
}

pub fn canonicalize_with(
    doc: &ScoreDocument,
    opts: &CanonicalOptions,
) -> Result<(ScoreDocument, CanonicalReport), CanonicalizationError> {
    let mut report = CanonicalReport::default();
    let mut out = ScoreDocument::default();
    for part in &doc.parts {
        let start_div = doc.source_divisions.get(&part.id).copied().unwrap_or(1);
        let (p, div) = canonical_part(part, start_div, opts, &mut report)?;
        out.source_divisions.insert(p.id.clone(), div);
        out.parts.push(p);
    }
    Ok((out, report))
}

struct Group {
    src: usize,
    onset: Quarters,
    notes: Vec<TimedNote>,
}

fn canonical_part(
    part: &Part,
    start_div: u32,
    opts: &CanonicalOptions,
    report: &mut CanonicalReport,
) -> Result<(Part, u32), CanonicalizationError> {
    let mut div = part
        .measures
        .iter()
        .flat_map(|m| &m.elements)
        .find_map(|e| match e {
            MusicElement::Attributes(a) => a.divisions,
            _ => None,
        })
        .unwrap_or(start_div)
        .max(1);
    let mut time: Option<TimeSignature> = None;
    let mut two_staves = false;
    let mut source_divs = Vec::new();
    let mut staves_declared = 0usize;
    let mut laid = Vec::with_capacity(part.measures.len());

    for (mi, measure) in part.measures.iter().enumerate() {
        let inconsistent = |voice: u8, message: String| CanonicalizationError::InconsistentDurations {
            part: part.id.clone(),
            measure: mi,
            voice,
            message,
        };
        let mut cursor = Quarters::zero();
        let mut max_cursor = Quarters::zero();
        let mut groups: Vec<Group> = Vec::new();
        let mut elements: Vec<(usize, Quarters, MusicElement)> = Vec::new();
        let mut leading = Vec::new();
        // Chord notes join the previous note only if the cursor has not moved since.
        let mut chord_target: Option<usize> = None;
        let mut seen_note = false;
        let mut measure_time = time;

        for (idx, el) in measure.elements.iter().enumerate() {
            match el {
                MusicElement::Note(n) => {
                    let mut n = n.clone();
                    if n.note_type.is_none() {
                        let inferred = if n.measure_rest {
                            Some((NoteType::Whole, 0))
                        } else if n.grace || n.duration == 0 {
                            None
                        } else {
                            type_for_duration(from_divisions(n.duration, div), n.time_modification)
                        };
                        if let Some((t, dots)) = inferred {
                            n.note_type = Some(t);
                            n.dots = dots;
                            report.inferred_types += 1;
                        }
                    }
                    if let Some(p) = n.pitch.as_mut().filter(|p| p.alter == Some(0)) {
                        p.alter = None;
                        report.drop("alter");
                    }
                    if n.rest && !n.beams.is_empty() {
                        n.beams.clear();
                        report.drop("beam");
                    }
                    // Sounding and notated ties are one fact in canonical form.
                    let (start, stop) = (n.tie_start || n.tied_start, n.tie_stop || n.tied_stop);
                    if (n.tie_start, n.tie_stop, n.tied_start, n.tied_stop) != (start, stop, start, stop) {
                        report.drop("tie");
                    }
                    n.tie_start = start;
                    n.tied_start = start;
                    n.tie_stop = stop;
                    n.tied_stop = stop;
                    let dur = if n.grace {
                        Quarters::zero()
                    } else if n.duration > 0 {
                        from_divisions(n.duration, div)
                    } else if let Some(t) = n.note_type {
                        note_quarters(t, n.dots, n.time_modification)
                    } else {
                        return Err(CanonicalizationError::MissingDuration {
                            part: part.id.clone(),
                            measure: mi,
                        });
                    };
                    two_staves |= n.staff == 2;
                    seen_note = true;
                    match chord_target.filter(|_| n.chord) {
                        Some(g) => {
                            n.voice = groups[g].notes[0].note.voice;
                            groups[g].notes.push(TimedNote { note: n, dur });
                        }
                        None => {
                            if n.chord {
                                n.chord = false;
                                report.drop("chord");
                            }
                            let advance = !n.grace;
                            groups.push(Group {
                                src: idx,
                                onset: cursor,
                                notes: vec![TimedNote { note: n, dur }],
                            });
                            chord_target = Some(groups.len() - 1);
                            if advance {
                                cursor += dur;
                            }
                        }
                    }
                }
                MusicElement::Backup(b) => {
                    cursor -= from_divisions(b.duration, div);
                    if cursor < Quarters::zero() {
                        cursor = Quarters::zero();
                    }
                    chord_target = None;
                }
                MusicElement::Forward(f) => {
                    cursor += from_divisions(f.duration, div);
                    two_staves |= f.staff == Some(2);
                    chord_target = None;
                }
                MusicElement::Attributes(a) => {
                    if let Some(d) = a.divisions {
                        source_divs.push(d);
                        div = d.max(1);
                    }
                    if let Some(t) = a.time {
                        time = Some(t);
                        if cursor.is_zero() {
                            measure_time = Some(t);
                        }
                    }
                    two_staves |= a.staves == Some(2) || a.clefs.iter().any(|c| c.staff == 2);
                    staves_declared += usize::from(a.staves.is_some());
                    if !seen_note && cursor.is_zero() {
                        leading.push(el.clone());
                    } else {
                        elements.push((idx, cursor, el.clone()));
                    }
                }
                MusicElement::Other(_) => {
                    if !seen_note && cursor.is_zero() {
                        leading.push(el.clone());
                    } else {
                        elements.push((idx, cursor, el.clone()));
                    }
                }
            }
            if cursor > max_cursor {
                max_cursor = cursor;
            }
        }

        // Voices in order of first appearance.
        let mut source_voices: Vec<u8> = Vec::new();
        for g in &groups {
            let v = g.notes[0].note.voice;
            if !source_voices.contains(&v) {
                source_voices.push(v);
            }
        }
        let mut streams: BTreeMap<u8, Vec<(Quarters, usize, ItemKind)>> = BTreeMap::new();
        for g in groups {
            let v = g.notes[0].note.voice;
            let mut notes = g.notes;
            if order_chord(&mut notes, opts.chord_order) {
                report.reordered_chords += 1;
            }
            for t in notes.iter_mut().skip(1) {
                if !t.note.beams.is_empty() {
                    t.note.beams.clear();
                    report.drop("beam");
                }
            }
            streams.entry(v).or_default().push((g.onset, g.src, ItemKind::Chord(notes)));
        }
        for (idx, onset, el) in elements {
            let heads: Vec<(usize, u8)> = streams
                .iter()
                .flat_map(|(v, items)| items.iter().map(move |(_, src, _)| (*src, *v)))
                .collect();
            let last_backup = measure.elements[..idx]
                .iter()
                .rposition(|e| matches!(e, MusicElement::Backup(_)));
            let prev = heads
                .iter()
                .filter(|(s, _)| *s < idx && last_backup.map_or(true, |b| *s > b))
                .max_by_key(|(s, _)| *s);
            let next = heads.iter().filter(|(s, _)| *s > idx).min_by_key(|(s, _)| *s);
            let any_prev = heads.iter().filter(|(s, _)| *s < idx).max_by_key(|(s, _)| *s);
            match prev.or(next).or(any_prev) {
                Some((_, v)) => streams.get_mut(v).unwrap().push((onset, idx, ItemKind::Element(el))),
                None => leading.push(el),
            }
        }

        let mut voices: Vec<VoiceStream> = Vec::new();
        let mut home: Vec<(u8, u8)> = Vec::new();
        for v in &source_voices {
            let items = streams.get_mut(v).unwrap();
            items.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            let first_staff = items
                .iter()
                .find_map(|(_, _, k)| match k {
                    ItemKind::Chord(ns) => Some(ns[0].note.staff),
                    _ => None,
                })
                .unwrap_or(1);
            home.push((*v, first_staff));
        }
        let mut next_number = [1u8, 5u8];
        let mut numbering: BTreeMap<u8, u8> = BTreeMap::new();
        for (v, staff) in &home {
            let slot = usize::from(*staff == 2);
            let n = next_number[slot];
            if n > if slot == 0 { 4 } else { 8 } {
                return Err(CanonicalizationError::TooManyVoices {
                    part: part.id.clone(),
                    measure: mi,
                    staff: *staff,
                });
            }
            next_number[slot] += 1;
            numbering.insert(*v, n);
            if n != *v {
                report.renumbered_voices += 1;
            }
        }
        let mut order: Vec<u8> = source_voices.clone();
        order.sort_by_key(|v| numbering[v]);
        for v in order {
            let items = streams.remove(&v).unwrap();
            let new_v = numbering[&v];
            let mut end = Quarters::zero();
            let mut out_items = Vec::with_capacity(items.len());
            for (onset, _, kind) in items {
                let it = Item { onset, kind };
                if let ItemKind::Chord(_) = &it.kind {
                    if it.onset < end {
                        return Err(inconsistent(
                            new_v,
                            format!("overlapping notes at onset {}", it.onset),
                        ));
                    }
                    end = it.onset + it.span();
                }
                out_items.push(it);
            }
            voices.push(VoiceStream {
                voice: new_v,
                items: out_items,
            });
        }

        if let Some(t) = measure_time {
            let full = t.measure_quarters();
            if max_cursor > full {
                let worst = voices
                    .iter()
                    .map(|v| {
                        let end = v.items.iter().map(|i| i.onset + i.span()).max().unwrap_or_default();
                        (end, v.voice)
                    })
                    .max()
                    .filter(|(end, _)| *end > full)
                    .map(|(_, v)| v)
                    .unwrap_or(0);
                return Err(inconsistent(
                    worst,
                    format!(
                        "content of {} quarters over-fills {}/{}",
                        max_cursor, t.beats, t.beat_type
                    ),
                ));
            }
        }

        laid.push(LaidMeasure {
            leading,
            voices,
            length: max_cursor,
        });
    }

    let (measures, divisions) = assemble_part(laid, two_staves, report);
    report.divisions_rescaled = source_divs.iter().any(|d| *d != divisions);
    if source_divs.len() > 1 {
        *report.dropped_elements.entry("divisions".into()).or_default() += source_divs.len() - 1;
    }
    let kept_staves = usize::from(two_staves);
    if staves_declared > kept_staves {
        *report.dropped_elements.entry("staves".into()).or_default() += staves_declared - kept_staves;
    }
    Ok((
        Part {
            id: part.id.clone(),
            name: part.name.clone(),
            measures,
        },
        divisions,
    ))
}

/// Whether every voice fills the same length without over-filling the meter.
///
/// Durations of notes (grace and chord continuation notes excluded) and
/// forwards are summed per voice; forwards without a voice count toward the
/// voice of the preceding note. Under-full voices are accepted only when all
/// voices are under-full by the same amount.
pub fn durations_consistent(measure: &Measure, time: TimeSignature, divisions: u32) -> bool {
    let full = time.measure_quarters() * Quarters::from_integer(i64::from(divisions));
    let mut sums: BTreeMap<u8, Quarters> = BTreeMap::new();
    let mut current: Option<u8> = None;
    for e in &measure.elements {
        match e {
            MusicElement::Note(n) => {
                current = Some(n.voice);
                let s = sums.entry(n.voice).or_default();
                if n.advances_time() {
                    *s += Quarters::from_integer(i64::from(n.duration));
                }
            }
            MusicElement::Forward(f) => {
                if let Some(v) = f.voice.or(current) {
                    *sums.entry(v).or_default() += Quarters::from_integer(i64::from(f.duration));
                }
            }
            MusicElement::Backup(_) => current = None,
            _ => {}
        }
    }
    let mut values = sums.values();
    let Some(first) = values.next() else {
        return true;
    };
    *first <= full && values.all(|v| v == first)
}
