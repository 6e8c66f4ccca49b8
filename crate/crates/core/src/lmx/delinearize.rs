use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::Zero;

use super::vocab::{parse_time_modification, vocabulary, Category};
use super::TokenSequence;
use crate::canonical::{
    assemble_part, default_staff, order_chord, CanonicalReport, ChordOrder, Item, ItemKind, LaidMeasure, TimedNote,
    VoiceStream,
};
use crate::duration::{note_quarters, NoteType, Quarters, TimeModification};
use crate::score::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WarningKind {
    UnknownToken,
    UnexpectedToken,
    UnterminatedConstruct,
    OrphanStop,
    VoiceOverflow,
    DurationMismatch,
}

impl WarningKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WarningKind::UnknownToken => "unknown_token",
            WarningKind::UnexpectedToken => "unexpected_token",
            WarningKind::UnterminatedConstruct => "unterminated_construct",
            WarningKind::OrphanStop => "orphan_stop",
            WarningKind::VoiceOverflow => "voice_overflow",
            WarningKind::DurationMismatch => "duration_mismatch",
        }
    }
}

impl fmt::Display for WarningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelinearizeWarning {
    pub kind: WarningKind,
    pub token_index: usize,
    pub token: String,
    pub message: String,
}

impl fmt::Display for DelinearizeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "token {} ({:?}): {}: {}", self.token_index, self.token, self.kind, self.message)
    }
}

#[derive(Debug)]
struct RawNote {
    note: Note,
    beam_tokens: Vec<Beam>,
    /// Full-measure length for measure rests.
    measure_len: Option<Quarters>,
}

impl RawNote {
    fn quarters(&self) -> Quarters {
        if self.note.grace {
            return Quarters::zero();
        }
        if let Some(len) = self.measure_len {
            return len;
        }
        let ty = self.note.note_type.unwrap_or(NoteType::Quarter);
        note_quarters(ty, self.note.dots, self.note.time_modification)
    }
}

#[derive(Debug)]
enum RawItem {
    Chord(Vec<RawNote>),
    Forward(Quarters),
    Attr(Attributes),
}

#[derive(Debug, Default)]
struct Segment {
    voice: Option<u8>,
    items: Vec<RawItem>,
}

#[derive(Debug, Default)]
struct RawMeasure {
    token_index: usize,
    leading: Vec<Attributes>,
    segments: Vec<Segment>,
    time: Option<TimeSignature>,
}

#[derive(Debug, Clone, Copy)]
enum Head {
    Rest { measure: bool },
    Pitch(Pitch),
}

#[derive(Debug, Default)]
struct Pending {
    start: Option<usize>,
    grace: Option<bool>,
    chord: bool,
    head: Option<Head>,
}

impl Pending {
    fn is_empty(&self) -> bool {
        self.grace.is_none() && !self.chord && self.head.is_none()
    }
}

enum Mode {
    Normal,
    Forward { start: usize, types: Vec<NoteType>, tm: Option<TimeModification> },
    Backup,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum AttrSlot {
    Key,
    Time,
    Clef(u8),
}

struct Parser {
    warnings: Vec<DelinearizeWarning>,
    measures: Vec<RawMeasure>,
    index: usize,
    token: String,
    pending: Pending,
    mode: Mode,
    /// A note can take modifiers until the next note, forward, backup or voice.
    has_current: bool,
    /// Backup seen: the next content starts a new segment.
    segment_closed: bool,
    staff_state: Option<u8>,
    stem_state: Option<Stem>,
    pending_clef: Option<(ClefSign, u8)>,
    time: Option<TimeSignature>,
    two_staves: bool,
    open_slurs: HashMap<u8, u32>,
    open_ties: HashMap<(Step, u8), u32>,
    open_tuplets: BTreeMap<u8, bool>,
    warned_no_measure: bool,
}

pub fn delinearize(seq: &TokenSequence) -> (ScoreDocument, Vec<DelinearizeWarning>) {
    let mut p = Parser {
        warnings: Vec::new(),
        measures: Vec::new(),
        index: 0,
        token: String::new(),
        pending: Pending::default(),
        mode: Mode::Normal,
        has_current: false,
        segment_closed: false,
        staff_state: None,
        stem_state: None,
        pending_clef: None,
        time: None,
        two_staves: false,
        open_slurs: HashMap::new(),
        open_ties: HashMap::new(),
        open_tuplets: BTreeMap::new(),
        warned_no_measure: false,
    };
    if seq.is_empty() {
        p.warnings.push(DelinearizeWarning {
            kind: WarningKind::UnexpectedToken,
            token_index: 0,
            token: String::new(),
            message: "empty token sequence".into(),
        });
    }
    for (i, t) in seq.iter().enumerate() {
        p.index = i;
        p.token = t.to_string();
        p.step(t);
    }
    p.finish();
    let doc = p.build();
    (doc, std::mem::take(&mut p.warnings))
}

impl Parser {
    fn warn(&mut self, kind: WarningKind, message: impl Into<String>) {
        self.warnings.push(DelinearizeWarning {
            kind,
            token_index: self.index,
            token: self.token.clone(),
            message: message.into(),
        });
    }

    fn step(&mut self, t: &str) {
        if let Some(v) = t.strip_prefix("voice:").and_then(|v| v.parse::<u32>().ok()).filter(|v| *v > 8) {
            self.warn(WarningKind::VoiceOverflow, format!("voice {v} clamped to {MAX_VOICES}"));
            return self.step("voice:8");
        }
        let Some(cat) = vocabulary().category(t) else {
            self.warn(WarningKind::UnknownToken, "not in the vocabulary");
            return;
        };
        if self.pending_clef.is_some() && cat != Category::Staff {
            self.flush_clef(None);
        }
        match self.mode {
            Mode::Forward { .. } if !matches!(cat, Category::Type | Category::TimeMod | Category::Staff) => {
                self.end_forward()
            }
            Mode::Backup if !matches!(cat, Category::Type | Category::TimeMod) => self.mode = Mode::Normal,
            _ => {}
        }
        if !self.pending.is_empty() && !matches!(cat, Category::Grace | Category::Chord | Category::Rest | Category::Pitch | Category::Type) {
            self.discard_pending("note prefix without a duration type");
        }
        if cat != Category::Structural && self.measures.is_empty() {
            if !self.warned_no_measure {
                self.warn(WarningKind::UnexpectedToken, "content before the first measure token");
                self.warned_no_measure = true;
            }
            self.start_measure();
        }
        match cat {
            Category::Structural => {
                self.finish_measure();
                self.start_measure();
            }
            Category::Backup => {
                self.has_current = false;
                self.segment_closed = true;
                self.staff_state = None;
                self.stem_state = None;
                self.mode = Mode::Backup;
            }
            Category::Forward => {
                self.has_current = false;
                self.mode = Mode::Forward {
                    start: self.index,
                    types: Vec::new(),
                    tm: None,
                };
            }
            Category::Voice => self.voice(t),
            Category::Grace => {
                if !self.pending.is_empty() {
                    self.discard_pending("grace must open a note");
                }
                self.pending.start = Some(self.index);
                self.pending.grace = Some(t == "grace:slash");
            }
            Category::Chord => {
                if self.pending.chord || self.pending.head.is_some() {
                    self.discard_pending("chord out of order");
                }
                self.pending.start.get_or_insert(self.index);
                self.pending.chord = true;
            }
            Category::Rest | Category::Pitch => {
                if self.pending.head.is_some() {
                    self.discard_pending("second pitch or rest for one note");
                }
                self.pending.start.get_or_insert(self.index);
                let head = if cat == Category::Rest {
                    Head::Rest {
                        measure: t == "rest:measure",
                    }
                } else {
                    let step = Step::from_char(t.chars().next().unwrap()).unwrap();
                    Head::Pitch(Pitch::new(step, t[1..].parse().unwrap()))
                };
                self.pending.head = Some(head);
            }
            Category::Type => {
                let ty: NoteType = t.parse().unwrap();
                match &mut self.mode {
                    Mode::Forward { types, .. } => types.push(ty),
                    Mode::Backup => {}
                    Mode::Normal => self.new_note(ty),
                }
            }
            Category::TimeMod => {
                let tm = parse_time_modification(t).unwrap();
                match &mut self.mode {
                    Mode::Forward { tm: slot, .. } => {
                        if slot.is_some() {
                            self.warn(WarningKind::UnexpectedToken, "second tuplet ratio on a forward");
                        } else {
                            *slot = Some(tm);
                        }
                    }
                    Mode::Backup => {}
                    Mode::Normal => match self.current() {
                        Some(n) if n.note.time_modification.is_none() => n.note.time_modification = Some(tm),
                        Some(_) => self.warn(WarningKind::UnexpectedToken, "second tuplet ratio on a note"),
                        None => self.warn(WarningKind::UnexpectedToken, "tuplet ratio without a note"),
                    },
                }
            }
            Category::Dot => match self.current() {
                Some(n) if n.note.dots < 2 && n.measure_len.is_none() => n.note.dots += 1,
                Some(_) => self.warn(WarningKind::UnexpectedToken, "too many dots"),
                None => self.warn(WarningKind::UnexpectedToken, "dot without a note"),
            },
            Category::Accidental => {
                let a = Accidental::from_name(&t["accidental:".len()..]).unwrap();
                match self.current() {
                    Some(n) if !n.note.rest => n.note.accidental = Some(a),
                    _ => self.warn(WarningKind::UnexpectedToken, "accidental without a pitched note"),
                }
            }
            Category::Stem => {
                let s = Stem::from_name(&t["stem:".len()..]).unwrap();
                let mut state = self.stem_state;
                match self.current() {
                    Some(n) if !n.note.rest => {
                        n.note.stem = Some(s);
                        if n.note.stem_bearing() {
                            state = Some(s);
                        }
                    }
                    _ => self.warn(WarningKind::UnexpectedToken, "stem without a pitched note"),
                }
                self.stem_state = state;
            }
            Category::Staff => self.staff(t[6..].parse().unwrap()),
            Category::Beam => {
                let b = match t {
                    "beam:begin" => Beam::Begin,
                    "beam:end" => Beam::End,
                    "beam:forward-hook" => Beam::ForwardHook,
                    _ => Beam::BackwardHook,
                };
                match self.current() {
                    Some(n) if n.beam_tokens.len() >= MAX_BEAM_LEVELS => {
                        self.warn(WarningKind::UnexpectedToken, "more than eight beam levels")
                    }
                    Some(n) if !n.note.rest && !n.note.chord => n.beam_tokens.push(b),
                    Some(_) => self.warn(WarningKind::UnexpectedToken, "beam on a rest or chord note"),
                    None => self.warn(WarningKind::UnexpectedToken, "beam without a note"),
                }
            }
            Category::Tied => self.tied(t == "tied:start"),
            Category::Slur => self.slur(t == "slur:start"),
            Category::Tuplet => self.tuplet(t == "tuplet:start"),
            Category::Ornament => {
                let Some(n) = self.current() else {
                    self.warn(WarningKind::UnexpectedToken, "ornament without a note");
                    return;
                };
                let n = &mut n.note;
                match t {
                    "trill-mark" => n.trill = true,
                    "staccato" => n.staccato = true,
                    "accent" => n.accent = true,
                    "tenuto" => n.tenuto = true,
                    "fermata" => n.fermata = true,
                    "arpeggiate" => n.arpeggiate = true,
                    _ => {
                        if let Some(m) = t.strip_prefix("tremolo:") {
                            n.tremolo = Some(m.parse().unwrap());
                        } else if let Some(o) = Ornament::from_name(t) {
                            n.ornaments.insert(o);
                        }
                    }
                }
            }
            Category::Clef => {
                let sign = ClefSign::from_name(&t[5..6]).unwrap();
                let line = t[6..].parse().unwrap();
                self.pending_clef = Some((sign, line));
            }
            Category::Key => {
                let fifths: i8 = t["key:fifths:".len()..].parse().unwrap();
                self.add_attr(AttrSlot::Key, |a| a.key_fifths = Some(fifths));
            }
            Category::Time => {
                let (b, bt) = t[5..].split_once('/').unwrap();
                let ts = TimeSignature::new(b.parse().unwrap(), bt.parse().unwrap());
                self.time = Some(ts);
                self.add_attr(AttrSlot::Time, |a| a.time = Some(ts));
            }
        }
    }

    fn start_measure(&mut self) {
        self.measures.push(RawMeasure {
            token_index: self.index,
            time: self.time,
            ..Default::default()
        });
        self.has_current = false;
        self.segment_closed = false;
        self.staff_state = None;
        self.stem_state = None;
    }

    fn measure(&mut self) -> &mut RawMeasure {
        self.measures.last_mut().expect("measure started")
    }

    fn current(&mut self) -> Option<&mut RawNote> {
        if !self.has_current {
            return None;
        }
        match self.measure().segments.last_mut()?.items.last_mut()? {
            RawItem::Chord(ns) => ns.last_mut(),
            _ => None,
        }
    }

    fn segment(&mut self) -> &mut Segment {
        let closed = self.segment_closed;
        self.segment_closed = false;
        let m = self.measure();
        if closed || m.segments.is_empty() {
            m.segments.push(Segment::default());
        }
        m.segments.last_mut().unwrap()
    }

    /// The current segment, assigning a voice if the sequence did not give one.
    fn voiced_segment(&mut self) -> u8 {
        let prev = {
            let closed = self.segment_closed;
            let m = self.measure();
            let n = m.segments.len();
            let open = if closed || n == 0 { None } else { m.segments[n - 1].voice };
            if let Some(v) = open {
                return v;
            }
            let before = if closed || n == 0 { n } else { n - 1 };
            m.segments[..before].iter().rev().find_map(|s| s.voice)
        };
        let v = prev.map_or(1, |p| p + 1);
        if v > MAX_VOICES {
            self.warn(WarningKind::VoiceOverflow, format!("voice {v} clamped to {MAX_VOICES}"));
        }
        let v = v.min(MAX_VOICES);
        self.warn(WarningKind::UnexpectedToken, format!("content without a voice token, using voice {v}"));
        self.segment().voice = Some(v);
        v
    }

    fn voice(&mut self, t: &str) {
        let v: u8 = t[6..].parse().unwrap();
        self.has_current = false;
        let closed = self.segment_closed;
        let m = self.measure();
        match m.segments.last_mut() {
            Some(s) if !closed && s.voice == Some(v) => return,
            Some(s) if !closed && s.voice.is_none() => s.voice = Some(v),
            _ => {
                self.segment_closed = true;
                self.segment().voice = Some(v);
            }
        }
        self.staff_state = None;
        self.stem_state = None;
    }

    fn discard_pending(&mut self, why: &str) {
        let start = self.pending.start.unwrap_or(self.index);
        self.warnings.push(DelinearizeWarning {
            kind: WarningKind::UnexpectedToken,
            token_index: start,
            token: self.token.clone(),
            message: format!("dropped incomplete note: {why}"),
        });
        self.pending = Pending::default();
    }

    fn new_note(&mut self, ty: NoteType) {
        let pending = std::mem::take(&mut self.pending);
        let head = pending.head.unwrap_or_else(|| {
            self.warn(WarningKind::UnexpectedToken, "duration type without pitch or rest, read as a rest");
            Head::Rest { measure: false }
        });
        let voice = self.voiced_segment();
        let staff = self.staff_state.unwrap_or_else(|| default_staff(voice));
        self.staff_state = Some(staff);
        let mut note = Note {
            grace: pending.grace.is_some(),
            grace_slash: pending.grace == Some(true),
            chord: pending.chord,
            note_type: Some(ty),
            voice,
            staff,
            ..Note::default()
        };
        let mut measure_len = None;
        match head {
            Head::Rest { measure } => {
                note.rest = true;
                note.measure_rest = measure;
                if measure {
                    measure_len = Some(self.time.unwrap_or(TimeSignature::new(4, 4)).measure_quarters());
                }
            }
            Head::Pitch(p) => note.pitch = Some(p),
        }
        if note.stem_bearing() {
            note.stem = self.stem_state;
        }
        let raw = RawNote {
            note,
            beam_tokens: Vec::new(),
            measure_len,
        };
        let chord = raw.note.chord;
        let grace = raw.note.grace;
        let had_current = self.has_current;
        let seg = self.segment();
        match seg.items.last_mut() {
            Some(RawItem::Chord(ns)) if chord && had_current && ns[0].note.grace == grace => ns.push(raw),
            _ => {
                let mut raw = raw;
                if chord {
                    raw.note.chord = false;
                    seg.items.push(RawItem::Chord(vec![raw]));
                    self.warn(WarningKind::UnexpectedToken, "chord note without a preceding note");
                } else {
                    seg.items.push(RawItem::Chord(vec![raw]));
                }
            }
        }
        self.has_current = true;
    }

    fn end_forward(&mut self) {
        let Mode::Forward { start, types, tm } = std::mem::replace(&mut self.mode, Mode::Normal) else {
            return;
        };
        if types.is_empty() {
            self.warnings.push(DelinearizeWarning {
                kind: WarningKind::UnterminatedConstruct,
                token_index: start,
                token: "forward".into(),
                message: "forward without a duration".into(),
            });
            return;
        }
        let factor = tm.map_or(Quarters::from_integer(1), |t| t.factor());
        let q = types.iter().fold(Quarters::zero(), |acc, t| acc + t.quarters()) * factor;
        self.voiced_segment();
        self.segment().items.push(RawItem::Forward(q));
    }

    fn staff(&mut self, s: u8) {
        if self.pending_clef.is_some() {
            self.flush_clef(Some(s));
            return;
        }
        if s == 2 {
            self.two_staves = true;
        }
        if matches!(self.mode, Mode::Forward { .. }) {
            self.staff_state = Some(s);
            return;
        }
        match self.current() {
            Some(n) => {
                n.note.staff = s;
                self.staff_state = Some(s);
            }
            None => self.warn(WarningKind::UnexpectedToken, "staff without a note, forward or clef"),
        }
    }

    fn flush_clef(&mut self, staff: Option<u8>) {
        let Some((sign, line)) = self.pending_clef.take() else {
            return;
        };
        if staff.is_some() {
            self.two_staves = true;
        }
        let staff = staff.unwrap_or(1);
        self.add_attr(AttrSlot::Clef(staff), |a| a.clefs.push(Clef { staff, sign, line }));
    }

    fn add_attr(&mut self, slot: AttrSlot, apply: impl FnOnce(&mut Attributes)) {
        self.has_current = false;
        let leading = {
            let m = self.measures.last().unwrap();
            m.segments.is_empty() && !self.segment_closed
        };
        let fits = |a: &Attributes| {
            let last = if let Some(c) = a.clefs.iter().map(|c| c.staff).max() {
                Some(AttrSlot::Clef(c))
            } else if a.time.is_some() {
                Some(AttrSlot::Time)
            } else if a.key_fifths.is_some() {
                Some(AttrSlot::Key)
            } else {
                None
            };
            last.map_or(true, |l| l < slot)
        };
        if leading {
            let m = self.measure();
            match m.leading.last_mut() {
                Some(a) if fits(a) => apply(a),
                _ => {
                    let mut a = Attributes::default();
                    apply(&mut a);
                    m.leading.push(a);
                }
            }
        } else {
            let seg = self.segment();
            match seg.items.last_mut() {
                Some(RawItem::Attr(a)) if fits(a) => apply(a),
                _ => {
                    let mut a = Attributes::default();
                    apply(&mut a);
                    seg.items.push(RawItem::Attr(a));
                }
            }
        }
    }

    fn current_voice(&self) -> u8 {
        self.measures
            .last()
            .and_then(|m| m.segments.last())
            .and_then(|s| s.voice)
            .unwrap_or(1)
    }

    fn tied(&mut self, start: bool) {
        let pitch = match self.current() {
            Some(n) => n.note.pitch,
            None => {
                self.warn(WarningKind::UnexpectedToken, "tie without a note");
                return;
            }
        };
        let Some(p) = pitch else {
            self.warn(WarningKind::UnexpectedToken, "tie on a rest");
            return;
        };
        let key = (p.step, p.octave);
        if start {
            *self.open_ties.entry(key).or_default() += 1;
            let n = self.current().unwrap();
            n.note.tied_start = true;
            n.note.tie_start = true;
        } else {
            match self.open_ties.get_mut(&key).filter(|c| **c > 0) {
                Some(c) => {
                    *c -= 1;
                    let n = self.current().unwrap();
                    n.note.tied_stop = true;
                    n.note.tie_stop = true;
                }
                None => self.warn(WarningKind::OrphanStop, "tie stop without a matching start"),
            }
        }
    }

    fn slur(&mut self, start: bool) {
        if self.current().is_none() {
            self.warn(WarningKind::UnexpectedToken, "slur without a note");
            return;
        }
        let voice = self.current_voice();
        let open = self.open_slurs.entry(voice).or_default();
        if start {
            *open += 1;
            self.current().unwrap().note.slur_starts += 1;
        } else if *open > 0 {
            *open -= 1;
            self.current().unwrap().note.slur_stops += 1;
        } else {
            self.warn(WarningKind::OrphanStop, "slur stop without a matching start");
        }
    }

    fn tuplet(&mut self, start: bool) {
        let voice = self.current_voice();
        let open = self.open_tuplets.get(&voice).copied().unwrap_or(false);
        let Some(has_tm) = self.current().map(|n| n.note.time_modification.is_some()) else {
            self.warn(WarningKind::UnexpectedToken, "tuplet without a note");
            return;
        };
        if !has_tm {
            self.warn(WarningKind::UnexpectedToken, "tuplet bracket on a note without a tuplet ratio");
            return;
        }
        if start {
            if open {
                self.warn(WarningKind::UnexpectedToken, "tuplet start inside an open tuplet");
                return;
            }
            self.current().unwrap().note.tuplet_start = true;
            self.open_tuplets.insert(voice, true);
        } else if open {
            self.current().unwrap().note.tuplet_stop = true;
            self.open_tuplets.insert(voice, false);
        } else {
            self.warn(WarningKind::OrphanStop, "tuplet stop without a matching start");
        }
    }

    fn finish_measure(&mut self) {
        self.flush_clef(None);
        self.end_forward();
        self.mode = Mode::Normal;
        if !self.pending.is_empty() {
            self.discard_pending("measure ended inside a note");
        }
        let open: Vec<u8> = self
            .open_tuplets
            .iter()
            .filter(|(_, o)| **o)
            .map(|(v, _)| *v)
            .collect();
        self.open_tuplets.clear();
        for v in open {
            let closed = self.measures.last_mut().and_then(|m| {
                m.segments
                    .iter_mut()
                    .rev()
                    .filter(|s| s.voice == Some(v))
                    .flat_map(|s| s.items.iter_mut().rev())
                    .find_map(|it| match it {
                        RawItem::Chord(ns) if ns[0].note.time_modification.is_some() => Some(&mut ns[0].note),
                        _ => None,
                    })
                    .map(|n| n.tuplet_stop = true)
            });
            if closed.is_some() {
                self.warn(WarningKind::UnterminatedConstruct, format!("tuplet in voice {v} closed at the barline"));
            }
        }
    }

    fn finish(&mut self) {
        self.finish_measure();
        let open_slurs: u32 = self.open_slurs.values().sum();
        if open_slurs > 0 {
            self.warn(WarningKind::UnterminatedConstruct, format!("{open_slurs} slur(s) never closed"));
        }
        let open_ties: u32 = self.open_ties.values().sum();
        if open_ties > 0 {
            self.warn(WarningKind::UnterminatedConstruct, format!("{open_ties} tie(s) never closed"));
        }
    }

    fn build(&mut self) -> ScoreDocument {
        let mut measures = std::mem::take(&mut self.measures);
        if measures.is_empty() {
            return ScoreDocument::empty();
        }
        decode_beams(&mut measures);
        let mut two_staves = self.two_staves;
        let mut laid = Vec::with_capacity(measures.len());
        for m in measures {
            let mut lm = LaidMeasure {
                leading: m.leading.into_iter().map(MusicElement::Attributes).collect(),
                ..Default::default()
            };
            let mut streams: BTreeMap<u8, (Quarters, Vec<Item>)> = BTreeMap::new();
            for seg in m.segments {
                let Some(v) = seg.voice else {
                    // attributes after a final backup with no voice to follow
                    for it in seg.items {
                        if let RawItem::Attr(a) = it {
                            lm.leading.push(MusicElement::Attributes(a));
                        }
                    }
                    continue;
                };
                let (cursor, items) = streams.entry(v).or_insert_with(|| (Quarters::zero(), Vec::new()));
                for it in seg.items {
                    match it {
                        RawItem::Chord(ns) => {
                            let mut notes: Vec<TimedNote> = ns
                                .into_iter()
                                .map(|r| TimedNote {
                                    dur: r.quarters(),
                                    note: r.note,
                                })
                                .collect();
                            two_staves |= notes.iter().any(|t| t.note.staff == 2);
                            order_chord(&mut notes, ChordOrder::default());
                            let item = Item {
                                onset: *cursor,
                                kind: ItemKind::Chord(notes),
                            };
                            *cursor += item.span();
                            items.push(item);
                        }
                        RawItem::Forward(q) => *cursor += q,
                        RawItem::Attr(a) => items.push(Item {
                            onset: *cursor,
                            kind: ItemKind::Element(MusicElement::Attributes(a)),
                        }),
                    }
                }
            }
            lm.length = streams.values().map(|(c, _)| *c).max().unwrap_or_default();
            if let Some(t) = self.time_at(&lm).or(m.time) {
                if lm.length > t.measure_quarters() {
                    self.warnings.push(DelinearizeWarning {
                        kind: WarningKind::DurationMismatch,
                        token_index: m.token_index,
                        token: "measure".into(),
                        message: format!(
                            "content of {} quarters over-fills {}/{}",
                            lm.length, t.beats, t.beat_type
                        ),
                    });
                }
            }
            lm.voices = streams
                .into_iter()
                .map(|(voice, (_, items))| VoiceStream { voice, items })
                .collect();
            laid.push(lm);
        }
        super::pitch::infer_alters(&mut laid);
        let mut report = CanonicalReport::default();
        let (measures, divisions) = assemble_part(laid, two_staves, &mut report);
        let mut doc = ScoreDocument::empty();
        doc.parts[0].measures = measures;
        doc.source_divisions.insert("P1".into(), divisions);
        doc
    }

    /// Time signature declared at the start of this measure.
    fn time_at(&self, lm: &LaidMeasure) -> Option<TimeSignature> {
        lm.leading.iter().rev().find_map(|e| match e {
            MusicElement::Attributes(a) => a.time,
            _ => None,
        })
    }
}

const MAX_BEAM_LEVELS: usize = 8;

/// Rebuild full beam lists from explicit begin/end/hook tokens.
///
/// Open levels are tracked per voice (grace notes separately) across measures.
fn decode_beams(measures: &mut [RawMeasure]) {
    let mut depth: HashMap<(u8, bool), usize> = HashMap::new();
    for m in measures.iter_mut() {
        for seg in &mut m.segments {
            let voice = seg.voice.unwrap_or(1);
            for it in &mut seg.items {
                let RawItem::Chord(ns) = it else { continue };
                let head = &mut ns[0];
                if head.note.rest {
                    continue;
                }
                let d = depth.entry((voice, head.note.grace)).or_default();
                let beamable = head.note.note_type.map_or(false, |t| t.flag_count() > 0);
                let tokens = std::mem::take(&mut head.beam_tokens);
                if tokens.is_empty() {
                    if beamable && *d > 0 {
                        head.note.beams = vec![Beam::Continue; *d];
                    }
                    continue;
                }
                let ends = tokens.iter().take_while(|b| **b == Beam::End).count();
                let closing = ends.min(*d);
                let mut beams = vec![Beam::Continue; *d - closing];
                beams.extend(std::iter::repeat(Beam::End).take(ends));
                *d -= closing;
                for b in &tokens[ends..] {
                    match b {
                        Beam::Begin if *d >= MAX_BEAM_LEVELS => continue,
                        Beam::Begin => *d += 1,
                        Beam::End => *d = d.saturating_sub(1),
                        _ => {}
                    }
                    beams.push(*b);
                }
                beams.truncate(MAX_BEAM_LEVELS);
                head.note.beams = beams;
            }
        }
    }
}
