//! Semantic model of the pianoform subset of a part-wise MusicXML score.

mod mxl;
mod parse;
mod serialize;
pub mod validate;
pub mod xml;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use crate::duration::{NoteType, TimeModification};
pub use mxl::{mxl_root_bytes, parse_mxl, read_score_file};
pub use parse::{parse_musicxml, parse_musicxml_with_log, ParseError, SkipLog};
pub use serialize::{serialize_musicxml, to_xml_tree, SerializeError};
pub use xml::XmlElement;

/// Maximum number of staves in a pianoform part.
pub const MAX_STAVES: u8 = 2;
/// Maximum voice number (four per staff).
pub const MAX_VOICES: u8 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScoreDocument {
    pub parts: Vec<Part>,
    /// Divisions per quarter note as first declared in each part.
    pub source_divisions: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Part {
    pub id: String,
    pub name: Option<String>,
    pub measures: Vec<Measure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Measure {
    pub elements: Vec<MusicElement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MusicElement {
    Note(Note),
    Backup(Backup),
    Forward(Forward),
    Attributes(Attributes),
    /// Measure-level content outside the linearized subset (directions,
    /// barlines, harmony). Kept verbatim so full-document evaluation sees it.
    Other(XmlElement),
}

impl MusicElement {
    pub fn name(&self) -> &str {
        match self {
            MusicElement::Note(_) => "note",
            MusicElement::Backup(_) => "backup",
            MusicElement::Forward(_) => "forward",
            MusicElement::Attributes(_) => "attributes",
            MusicElement::Other(x) => &x.name,
        }
    }

    pub fn as_note(&self) -> Option<&Note> {
        match self {
            MusicElement::Note(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    C,
    D,
    E,
    F,
    G,
    A,
    B,
}

impl Step {
    pub const ALL: [Step; 7] = [Step::C, Step::D, Step::E, Step::F, Step::G, Step::A, Step::B];

    pub fn as_char(self) -> char {
        match self {
            Step::C => 'C',
            Step::D => 'D',
            Step::E => 'E',
            Step::F => 'F',
            Step::G => 'G',
            Step::A => 'A',
            Step::B => 'B',
        }
    }

    pub fn from_char(c: char) -> Option<Step> {
        Step::ALL.iter().copied().find(|s| s.as_char() == c)
    }

    /// Diatonic index within the octave, C = 0.
    pub fn index(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pitch {
    pub step: Step,
    pub octave: u8,
    /// Chromatic alteration in semitones, -2..=2.
    pub alter: Option<i8>,
}

impl Pitch {
    pub fn new(step: Step, octave: u8) -> Self {
        Self {
            step,
            octave,
            alter: None,
        }
    }

    /// Diatonic height, then alteration. Used for chord ordering.
    pub fn height(&self) -> (i32, i8) {
        (
            i32::from(self.octave) * 7 + i32::from(self.step.index()),
            self.alter.unwrap_or(0),
        )
    }

    /// `G4` style spelling without the alteration.
    pub fn token(&self) -> String {
        format!("{}{}", self.step.as_char(), self.octave)
    }
}

impl fmt::Display for Pitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.step.as_char(), self.octave)?;
        if let Some(a) = self.alter.filter(|a| *a != 0) {
            write!(f, "({a:+})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Accidental {
    Sharp,
    Flat,
    Natural,
    DoubleSharp,
    FlatFlat,
}

impl Accidental {
    pub const ALL: [Accidental; 5] = [
        Accidental::Sharp,
        Accidental::Flat,
        Accidental::Natural,
        Accidental::DoubleSharp,
        Accidental::FlatFlat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Accidental::Sharp => "sharp",
            Accidental::Flat => "flat",
            Accidental::Natural => "natural",
            Accidental::DoubleSharp => "double-sharp",
            Accidental::FlatFlat => "flat-flat",
        }
    }

    pub fn from_name(s: &str) -> Option<Accidental> {
        Accidental::ALL.iter().copied().find(|a| a.as_str() == s)
    }

    pub fn alter(self) -> i8 {
        match self {
            Accidental::Sharp => 1,
            Accidental::Flat => -1,
            Accidental::Natural => 0,
            Accidental::DoubleSharp => 2,
            Accidental::FlatFlat => -2,
        }
    }

    pub fn for_alter(alter: i8) -> Option<Accidental> {
        Accidental::ALL.iter().copied().find(|a| a.alter() == alter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stem {
    Up,
    Down,
    /// `<stem>none</stem>`: explicitly stemless.
    Stemless,
}

impl Stem {
    pub const ALL: [Stem; 3] = [Stem::Up, Stem::Down, Stem::Stemless];

    pub fn as_str(self) -> &'static str {
        match self {
            Stem::Up => "up",
            Stem::Down => "down",
            Stem::Stemless => "none",
        }
    }

    pub fn from_name(s: &str) -> Option<Stem> {
        Stem::ALL.iter().copied().find(|a| a.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Beam {
    Begin,
    Continue,
    End,
    ForwardHook,
    BackwardHook,
}

impl Beam {
    pub const ALL: [Beam; 5] = [
        Beam::Begin,
        Beam::Continue,
        Beam::End,
        Beam::ForwardHook,
        Beam::BackwardHook,
    ];

    /// MusicXML text content.
    pub fn as_str(self) -> &'static str {
        match self {
            Beam::Begin => "begin",
            Beam::Continue => "continue",
            Beam::End => "end",
            Beam::ForwardHook => "forward hook",
            Beam::BackwardHook => "backward hook",
        }
    }

    pub fn from_name(s: &str) -> Option<Beam> {
        Beam::ALL.iter().copied().find(|a| a.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ornament {
    Mordent,
    InvertedMordent,
    Turn,
    InvertedTurn,
}

impl Ornament {
    pub const ALL: [Ornament; 4] = [
        Ornament::Mordent,
        Ornament::InvertedMordent,
        Ornament::Turn,
        Ornament::InvertedTurn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ornament::Mordent => "mordent",
            Ornament::InvertedMordent => "inverted-mordent",
            Ornament::Turn => "turn",
            Ornament::InvertedTurn => "inverted-turn",
        }
    }

    pub fn from_name(s: &str) -> Option<Ornament> {
        Ornament::ALL.iter().copied().find(|a| a.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Note {
    pub rest: bool,
    pub measure_rest: bool,
    pub grace: bool,
    pub grace_slash: bool,
    pub chord: bool,
    pub pitch: Option<Pitch>,
    /// `<duration>` in the part's current divisions; 0 for grace notes.
    pub duration: u32,
    pub note_type: Option<NoteType>,
    pub dots: u8,
    pub accidental: Option<Accidental>,
    pub voice: u8,
    pub staff: u8,
    pub stem: Option<Stem>,
    /// One entry per beam level, level 1 first.
    pub beams: Vec<Beam>,
    pub tie_start: bool,
    pub tie_stop: bool,
    pub tied_start: bool,
    pub tied_stop: bool,
    pub slur_starts: u8,
    pub slur_stops: u8,
    pub tuplet_start: bool,
    pub tuplet_stop: bool,
    pub time_modification: Option<TimeModification>,
    pub ornaments: BTreeSet<Ornament>,
    pub fermata: bool,
    pub arpeggiate: bool,
    pub staccato: bool,
    pub accent: bool,
    pub tenuto: bool,
    pub trill: bool,
    /// Single-note tremolo with the given number of marks.
    pub tremolo: Option<u8>,
}

impl Default for Note {
    fn default() -> Self {
        Note {
            rest: false,
            measure_rest: false,
            grace: false,
            grace_slash: false,
            chord: false,
            pitch: None,
            duration: 0,
            note_type: None,
            dots: 0,
            accidental: None,
            voice: 1,
            staff: 1,
            stem: None,
            beams: Vec::new(),
            tie_start: false,
            tie_stop: false,
            tied_start: false,
            tied_stop: false,
            slur_starts: 0,
            slur_stops: 0,
            tuplet_start: false,
            tuplet_stop: false,
            time_modification: None,
            ornaments: BTreeSet::new(),
            fermata: false,
            arpeggiate: false,
            staccato: false,
            accent: false,
            tenuto: false,
            trill: false,
            tremolo: None,
        }
    }
}

impl Note {
    pub fn pitched(pitch: Pitch, note_type: NoteType, duration: u32) -> Self {
        Note {
            pitch: Some(pitch),
            note_type: Some(note_type),
            duration,
            ..Note::default()
        }
    }

    pub fn rest(note_type: NoteType, duration: u32) -> Self {
        Note {
            rest: true,
            note_type: Some(note_type),
            duration,
            ..Note::default()
        }
    }

    /// Whether the note advances the voice's time cursor.
    pub fn advances_time(&self) -> bool {
        !self.chord && !self.grace
    }

    /// Notes that take part in stem state: pitched and shorter than a whole note.
    pub fn stem_bearing(&self) -> bool {
        !self.rest && self.note_type.map(NoteType::has_stem).unwrap_or(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backup {
    pub duration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Forward {
    pub duration: u32,
    pub voice: Option<u8>,
    pub staff: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeSignature {
    pub beats: u32,
    pub beat_type: u32,
}

impl TimeSignature {
    pub fn new(beats: u32, beat_type: u32) -> Self {
        Self { beats, beat_type }
    }

    /// Measure length in quarter notes.
    pub fn measure_quarters(self) -> crate::duration::Quarters {
        crate::duration::Quarters::new(
            i64::from(self.beats) * 4,
            i64::from(self.beat_type.max(1)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClefSign {
    G,
    F,
    C,
}

impl ClefSign {
    pub const ALL: [ClefSign; 3] = [ClefSign::G, ClefSign::F, ClefSign::C];

    pub fn as_str(self) -> &'static str {
        match self {
            ClefSign::G => "G",
            ClefSign::F => "F",
            ClefSign::C => "C",
        }
    }

    pub fn from_name(s: &str) -> Option<ClefSign> {
        ClefSign::ALL.iter().copied().find(|a| a.as_str() == s)
    }

    pub fn default_line(self) -> u8 {
        match self {
            ClefSign::G => 2,
            ClefSign::F => 4,
            ClefSign::C => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Clef {
    pub staff: u8,
    pub sign: ClefSign,
    pub line: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Attributes {
    pub divisions: Option<u32>,
    pub key_fifths: Option<i8>,
    pub time: Option<TimeSignature>,
    pub staves: Option<u8>,
    pub clefs: Vec<Clef>,
}

impl Attributes {
    pub fn is_empty(&self) -> bool {
        self.divisions.is_none()
            && self.key_fifths.is_none()
            && self.time.is_none()
            && self.staves.is_none()
            && self.clefs.is_empty()
    }
}

impl ScoreDocument {
    /// A document with one empty part.
    pub fn empty() -> Self {
        let mut doc = ScoreDocument::default();
        doc.parts.push(Part {
            id: "P1".to_string(),
            name: None,
            measures: Vec::new(),
        });
        doc.source_divisions.insert("P1".to_string(), 1);
        doc
    }

    pub fn part(&self, id: &str) -> Option<&Part> {
        self.parts.iter().find(|p| p.id == id)
    }

    pub fn part_ids(&self) -> Vec<&str> {
        self.parts.iter().map(|p| p.id.as_str()).collect()
    }

    /// Keep a single part, by id.
    pub fn select_part(&self, id: &str) -> Option<ScoreDocument> {
        let part = self.part(id)?.clone();
        let mut source_divisions = BTreeMap::new();
        if let Some(d) = self.source_divisions.get(id) {
            source_divisions.insert(id.to_string(), *d);
        }
        Some(ScoreDocument {
            parts: vec![part],
            source_divisions,
        })
    }

    /// True when no part has any measure.
    pub fn is_blank(&self) -> bool {
        self.parts.iter().all(|p| p.measures.is_empty())
    }

    pub fn notes(&self) -> impl Iterator<Item = &Note> {
        self.parts
            .iter()
            .flat_map(|p| p.measures.iter())
            .flat_map(|m| m.elements.iter())
            .filter_map(MusicElement::as_note)
    }
}

/// Key-signature alteration for each step, from circle-of-fifths position.
pub fn key_alters(fifths: i8) -> [i8; 7] {
    const SHARP_ORDER: [Step; 7] = [Step::F, Step::C, Step::G, Step::D, Step::A, Step::E, Step::B];
    let mut alters = [0i8; 7];
    let n = fifths.unsigned_abs().min(7) as usize;
    if fifths >= 0 {
        for step in SHARP_ORDER.iter().take(n) {
            alters[step.index() as usize] = 1;
        }
    } else {
        for step in SHARP_ORDER.iter().rev().take(n) {
            alters[step.index() as usize] = -1;
        }
    }
    alters
}
