//! Random piano-style scores for property tests and benchmarks.
//!
//! Output covers the whole linearized subset: two staves, up to four voices
//! per staff, cross-staff notes, chords, tuplets, ties across barlines, grace
//! notes, beams, slurs, ornaments, measure rests and mid-measure clefs. The
//! generated documents are already canonical up to divisions.

use std::collections::HashMap;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::duration::{note_quarters, NoteType, Quarters, TimeModification};
use crate::score::*;

/// Divisions used while generating; canonicalization reduces them.
pub const SYNTH_DIVISIONS: u32 = 10080;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub max_measures: usize,
    pub max_voices_per_staff: u8,
    /// Also emit out-of-subset elements (directions).
    pub out_of_scope: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_measures: 6,
            max_voices_per_staff: 4,
            out_of_scope: true,
        }
    }
}

const TIMES: [(u32, u32); 8] = [(4, 4), (3, 4), (2, 4), (6, 8), (2, 2), (3, 8), (5, 4), (12, 8)];
const TUPLETS: [(u32, u32); 6] = [(3, 2), (5, 4), (6, 4), (7, 4), (2, 3), (4, 3)];

pub fn generate(seed: u64) -> ScoreDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_with(&mut rng, &SynthConfig::default())
}

struct Event {
    onset: Quarters,
    kind: EventKind,
}

enum EventKind {
    Notes(Vec<(Note, Quarters)>),
    Gap(Quarters),
    Element(MusicElement),
}

struct VoiceGen<'a, R: Rng> {
    rng: &'a mut R,
    voice: u8,
    home: u8,
    two_staves: bool,
    events: Vec<Event>,
    cursor: Quarters,
    length: Quarters,
    tie_in: Option<Pitch>,
    stem: Stem,
}

impl<R: Rng> VoiceGen<'_, R> {
    fn remaining(&self) -> Quarters {
        self.length - self.cursor
    }

    fn pitch(&mut self, staff: u8) -> Pitch {
        let octave = if staff == 1 { self.rng.gen_range(4..=5) } else { self.rng.gen_range(2..=3) };
        Pitch::new(*Step::ALL.choose(self.rng).unwrap(), octave)
    }

    fn staff(&mut self) -> u8 {
        let first = !self.events.iter().any(|e| matches!(e.kind, EventKind::Notes(_)));
        if self.two_staves && !first && self.rng.gen_bool(0.05) {
            3 - self.home
        } else {
            self.home
        }
    }

    fn note(&mut self, pitch: Option<Pitch>, ty: NoteType, dots: u8, staff: u8) -> Note {
        let mut n = Note {
            pitch,
            rest: pitch.is_none(),
            note_type: Some(ty),
            dots,
            voice: self.voice,
            staff,
            ..Note::default()
        };
        if pitch.is_some() {
            if self.rng.gen_bool(0.12) {
                n.accidental = Some(*Accidental::ALL.choose(self.rng).unwrap());
            }
            if n.stem_bearing() {
                n.stem = Some(self.stem);
            }
        }
        n
    }

    fn push(&mut self, notes: Vec<(Note, Quarters)>) {
        let span = if notes[0].0.grace { Quarters::zero() } else { notes[0].1 };
        self.events.push(Event {
            onset: self.cursor,
            kind: EventKind::Notes(notes),
        });
        self.cursor += span;
    }

    /// A single note or chord of the given value.
    fn sound(&mut self, ty: NoteType, dots: u8, tm: Option<TimeModification>, allow_rest: bool) {
        let q = note_quarters(ty, dots, tm);
        let staff = self.staff();
        if let Some(p) = self.tie_in.take() {
            let mut n = self.note(Some(Pitch { alter: None, ..p }), ty, dots, staff);
            n.time_modification = tm;
            n.tied_stop = true;
            n.tie_stop = true;
            self.push(vec![(n, q)]);
            return;
        }
        if allow_rest && self.rng.gen_bool(0.15) {
            let mut n = self.note(None, ty, dots, staff);
            n.time_modification = tm;
            self.push(vec![(n, q)]);
            return;
        }
        if tm.is_none() && self.rng.gen_bool(0.06) {
            let gp = self.pitch(staff);
            let mut g = self.note(Some(gp), NoteType::Eighth, 0, staff);
            g.grace = true;
            g.grace_slash = self.rng.gen_bool(0.5);
            self.push(vec![(g, Quarters::zero())]);
        }
        let size = match self.rng.gen_range(0..100) {
            0..=74 => 1,
            75..=91 => 2,
            _ => 3,
        };
        let mut pitches: Vec<Pitch> = Vec::new();
        while pitches.len() < size {
            let p = self.pitch(staff);
            if !pitches.iter().any(|o| (o.step, o.octave) == (p.step, p.octave)) {
                pitches.push(p);
            }
        }
        pitches.sort_by_key(|p| std::cmp::Reverse(p.height()));
        let mut notes = Vec::new();
        for (i, p) in pitches.into_iter().enumerate() {
            let mut n = self.note(Some(p), ty, dots, staff);
            n.time_modification = tm;
            n.chord = i > 0;
            notes.push((n, q));
        }
        let head = &mut notes[0].0;
        if self.rng.gen_bool(0.1) {
            match self.rng.gen_range(0..9) {
                0 => head.trill = true,
                1 => {
                    head.ornaments.insert(*Ornament::ALL.choose(self.rng).unwrap());
                }
                2 if !head.grace => head.tremolo = Some(self.rng.gen_range(1..=4)),
                3 => head.staccato = true,
                4 => head.accent = true,
                5 => head.tenuto = true,
                6 => head.fermata = true,
                7 => head.arpeggiate = true,
                _ => {
                    head.staccato = true;
                    head.accent = true;
                }
            }
        }
        self.push(notes);
    }

    /// Pick a plain value fitting the remaining time.
    fn value(&mut self) -> (NoteType, u8) {
        let r = self.remaining();
        let mut options: Vec<((NoteType, u8), u32)> = Vec::new();
        for (ty, w) in [
            (NoteType::Whole, 2),
            (NoteType::Half, 6),
            (NoteType::Quarter, 12),
            (NoteType::Eighth, 12),
            (NoteType::Sixteenth, 6),
            (NoteType::ThirtySecond, 2),
        ] {
            for (dots, dw) in [(0u8, 4u32), (1, 1)] {
                // dotted 32nds would leave gaps finer than the smallest value
                if note_quarters(ty, dots, None) <= r && !(dots > 0 && ty == NoteType::ThirtySecond) {
                    options.push(((ty, dots), w * dw));
                }
            }
        }
        options.choose_weighted(self.rng, |o| o.1).map(|o| o.0).unwrap_or((NoteType::ThirtySecond, 0))
    }

    fn fill(&mut self, measure_rest_ok: bool, clef_change: bool, direction: bool) {
        if measure_rest_ok && self.tie_in.is_none() && self.rng.gen_bool(0.06) {
            let n = Note {
                rest: true,
                measure_rest: true,
                note_type: Some(NoteType::Whole),
                voice: self.voice,
                staff: self.home,
                ..Note::default()
            };
            let len = self.length;
            self.push(vec![(n, len)]);
            return;
        }
        let mut clef_change = clef_change;
        let mut direction = direction;
        while self.cursor < self.length {
            let started = !self.events.is_empty();
            if started && clef_change && self.rng.gen_bool(0.3) {
                clef_change = false;
                let sign = *ClefSign::ALL.choose(self.rng).unwrap();
                let clef = Clef {
                    staff: self.home,
                    sign,
                    line: sign.default_line(),
                };
                self.events.push(Event {
                    onset: self.cursor,
                    kind: EventKind::Element(MusicElement::Attributes(Attributes {
                        clefs: vec![clef],
                        ..Default::default()
                    })),
                });
            }
            if direction && self.rng.gen_bool(0.3) {
                direction = false;
                let words = XmlElement::new("direction").attr("placement", "above").child(
                    XmlElement::new("direction-type").child(XmlElement::with_text("words", "dolce")),
                );
                self.events.push(Event {
                    onset: self.cursor,
                    kind: EventKind::Element(MusicElement::Other(words)),
                });
            }
            let r = self.remaining();
            let roll = self.rng.gen_range(0..100);
            if roll < 12 && self.tie_in.is_none() {
                let (a, n) = *TUPLETS.choose(self.rng).unwrap();
                let ty = *[NoteType::Quarter, NoteType::Eighth, NoteType::Sixteenth].choose(self.rng).unwrap();
                let tm = TimeModification::new(a, n);
                if ty.quarters() * Quarters::from_integer(i64::from(n)) <= r {
                    let first = self.events.len();
                    for _ in 0..a {
                        self.sound(ty, 0, Some(tm), true);
                    }
                    let heads: Vec<usize> = (first..self.events.len())
                        .filter(|i| matches!(&self.events[*i].kind, EventKind::Notes(ns) if !ns[0].0.grace))
                        .collect();
                    if let (Some(s), Some(e)) = (heads.first(), heads.last()) {
                        if let EventKind::Notes(ns) = &mut self.events[*s].kind {
                            ns[0].0.tuplet_start = true;
                        }
                        if let EventKind::Notes(ns) = &mut self.events[*e].kind {
                            ns[0].0.tuplet_stop = true;
                        }
                    }
                    continue;
                }
            }
            let voiced = self.events.iter().any(|e| matches!(e.kind, EventKind::Notes(_)));
            if roll >= 95 && self.tie_in.is_none() && voiced {
                let (ty, dots) = self.value();
                self.events.push(Event {
                    onset: self.cursor,
                    kind: EventKind::Gap(note_quarters(ty, dots, None)),
                });
                self.cursor += note_quarters(ty, dots, None);
                continue;
            }
            let (ty, dots) = self.value();
            self.sound(ty, dots, None, true);
            // tie into the next event, possibly over the barline
            if let Some(Event {
                kind: EventKind::Notes(ns),
                ..
            }) = self.events.last_mut()
            {
                let single = ns.len() == 1;
                let n = &mut ns[0].0;
                if single && !n.rest && !n.grace && n.time_modification.is_none() && self.rng.gen_bool(0.1) {
                    n.tied_start = true;
                    n.tie_start = true;
                    self.tie_in = n.pitch;
                }
            }
        }
    }

    fn finish(&mut self) {
        self.beams();
        self.slurs();
    }

    fn heads(&self) -> Vec<usize> {
        (0..self.events.len())
            .filter(|i| matches!(&self.events[*i].kind, EventKind::Notes(ns) if !ns[0].0.grace))
            .collect()
    }

    fn head(&mut self, i: usize) -> &mut Note {
        match &mut self.events[i].kind {
            EventKind::Notes(ns) => &mut ns[0].0,
            _ => unreachable!(),
        }
    }

    fn beams(&mut self) {
        let heads = self.heads();
        let mut runs: Vec<Vec<usize>> = vec![Vec::new()];
        let mut prev_end: Option<Quarters> = None;
        for &i in &heads {
            let onset = self.events[i].onset;
            let n = self.head(i);
            let beamable = !n.rest && n.note_type.map_or(false, |t| t.flag_count() > 0);
            let contiguous = prev_end.map_or(true, |e| e == onset);
            let run = runs.last_mut().unwrap();
            if beamable && contiguous && run.len() < 4 {
                run.push(i);
            } else if beamable {
                runs.push(vec![i]);
            } else {
                runs.push(Vec::new());
            }
            prev_end = match &self.events[i].kind {
                EventKind::Notes(ns) => Some(onset + ns[0].1),
                _ => None,
            };
        }
        for run in runs.into_iter().filter(|r| r.len() >= 2) {
            let flags: Vec<u8> = run
                .iter()
                .map(|i| self.head(*i).note_type.unwrap().flag_count())
                .collect();
            let levels = *flags.iter().max().unwrap();
            let mut beams: Vec<Vec<Beam>> = vec![Vec::new(); run.len()];
            for level in 1..=levels {
                let mut k = 0;
                while k < run.len() {
                    if flags[k] < level {
                        k += 1;
                        continue;
                    }
                    let start = k;
                    while k < run.len() && flags[k] >= level {
                        k += 1;
                    }
                    let end = k - 1;
                    if start == end {
                        beams[start].push(if start == 0 { Beam::ForwardHook } else { Beam::BackwardHook });
                    } else {
                        beams[start].push(Beam::Begin);
                        for b in &mut beams[start + 1..end] {
                            b.push(Beam::Continue);
                        }
                        beams[end].push(Beam::End);
                    }
                }
            }
            for (i, b) in run.iter().zip(beams) {
                self.head(*i).beams = b;
            }
        }
    }

    fn slurs(&mut self) {
        let pitched: Vec<usize> = self
            .heads()
            .into_iter()
            .filter(|i| {
                let n = self.head_ref(*i);
                !n.rest
            })
            .collect();
        if pitched.len() >= 2 && self.rng.gen_bool(0.3) {
            let a = self.rng.gen_range(0..pitched.len() - 1);
            let b = self.rng.gen_range(a + 1..pitched.len());
            self.head(pitched[a]).slur_starts += 1;
            self.head(pitched[b]).slur_stops += 1;
        }
    }

    fn head_ref(&self, i: usize) -> &Note {
        match &self.events[i].kind {
            EventKind::Notes(ns) => &ns[0].0,
            _ => unreachable!(),
        }
    }
}

pub fn generate_with<R: Rng>(rng: &mut R, cfg: &SynthConfig) -> ScoreDocument {
    let div = SYNTH_DIVISIONS;
    let to_div = |q: Quarters| (q * Quarters::from_integer(i64::from(div))).to_integer() as u32;
    let two_staves = rng.gen_bool(0.6);
    let nmeasures = rng.gen_range(1..=cfg.max_measures.max(1));
    let mut time = {
        let (b, t) = *TIMES.choose(rng).unwrap();
        TimeSignature::new(b, t)
    };
    let mut fifths: i8 = rng.gen_range(-7..=7);
    let mut tie_carry: HashMap<u8, Pitch> = HashMap::new();
    let mut measures = Vec::with_capacity(nmeasures);

    for mi in 0..nmeasures {
        let mut elements = Vec::new();
        let mut lead = Attributes::default();
        if mi == 0 {
            lead.divisions = Some(div);
            lead.key_fifths = Some(fifths);
            lead.time = Some(time);
            lead.staves = two_staves.then_some(2);
            lead.clefs.push(Clef { staff: 1, sign: ClefSign::G, line: 2 });
            if two_staves {
                lead.clefs.push(Clef { staff: 2, sign: ClefSign::F, line: 4 });
            }
        } else {
            if rng.gen_bool(0.1) {
                let f = rng.gen_range(-7..=7);
                if f != fifths {
                    fifths = f;
                    lead.key_fifths = Some(f);
                }
            }
            if rng.gen_bool(0.1) {
                let (b, t) = *TIMES.choose(rng).unwrap();
                let ts = TimeSignature::new(b, t);
                if ts != time {
                    time = ts;
                    lead.time = Some(ts);
                }
            }
            if rng.gen_bool(0.08) {
                let staff = if two_staves { rng.gen_range(1..=2) } else { 1 };
                let sign = *ClefSign::ALL.choose(rng).unwrap();
                lead.clefs.push(Clef {
                    staff,
                    sign,
                    line: rng.gen_range(1..=5),
                });
            }
        }
        if !lead.is_empty() {
            elements.push(MusicElement::Attributes(lead));
        }
        let length = time.measure_quarters();
        let max_v = cfg.max_voices_per_staff.clamp(1, 4);
        let mut voices: Vec<(u8, u8)> = Vec::new();
        for staff in 1..=if two_staves { 2u8 } else { 1 } {
            let n = match rng.gen_range(0..100) {
                0..=59 => 1,
                60..=89 => 2,
                90..=96 => 3,
                _ => 4,
            }
            .min(max_v);
            for k in 0..n {
                voices.push((if staff == 1 { 1 + k } else { 5 + k }, staff));
            }
        }
        let mut new_carry = HashMap::new();
        for (vi, (voice, home)) in voices.iter().copied().enumerate() {
            let mut g = VoiceGen {
                rng: &mut *rng,
                voice,
                home,
                two_staves,
                events: Vec::new(),
                cursor: Quarters::zero(),
                length,
                tie_in: tie_carry.remove(&voice),
                stem: if voice % 2 == 1 { Stem::Up } else { Stem::Down },
            };
            g.fill(true, vi == 0, cfg.out_of_scope && vi == 0);
            g.finish();
            if let Some(p) = g.tie_in.take() {
                new_carry.insert(voice, p);
            }
            let mut staff_state: Option<u8> = None;
            for ev in g.events {
                match ev.kind {
                    EventKind::Notes(ns) => {
                        for (mut n, q) in ns {
                            n.duration = if n.grace { 0 } else { to_div(q) };
                            staff_state = Some(n.staff);
                            elements.push(MusicElement::Note(n));
                        }
                    }
                    EventKind::Gap(q) => elements.push(MusicElement::Forward(Forward {
                        duration: to_div(q),
                        voice: Some(voice),
                        staff: Some(staff_state.unwrap_or(home)),
                    })),
                    EventKind::Element(e) => elements.push(e),
                }
            }
            if vi + 1 < voices.len() {
                elements.push(MusicElement::Backup(Backup { duration: to_div(length) }));
            }
        }
        tie_carry = new_carry;
        measures.push(Measure { elements });
    }

    let mut doc = ScoreDocument::default();
    doc.parts.push(Part {
        id: "P1".into(),
        name: Some("Piano".into()),
        measures,
    });
    doc.source_divisions.insert("P1".into(), div);
    spell_alters(&mut doc);
    doc
}

/// Assign `alter` from the written accidentals, key and ties.
///
/// Measure-wise, notes are taken in onset order, then voice order, then
/// written order; an accidental holds for its step and octave until the
/// barline, and a tie carries its alteration into the tied note.
fn spell_alters(doc: &mut ScoreDocument) {
    let mut fifths = 0i8;
    let mut div = 1u32;
    let mut carried: HashMap<(Step, u8, u8), i8> = HashMap::new();
    for part in &mut doc.parts {
        for m in &mut part.measures {
            let mut seen: HashMap<(Step, u8), i8> = HashMap::new();
            let mut cursor = Quarters::zero();
            let mut slots: Vec<(Quarters, u8, usize)> = Vec::new();
            for (i, e) in m.elements.iter().enumerate() {
                match e {
                    MusicElement::Attributes(a) => {
                        fifths = a.key_fifths.unwrap_or(fifths);
                        div = a.divisions.unwrap_or(div);
                    }
                    MusicElement::Backup(b) => cursor -= Quarters::new(i64::from(b.duration), i64::from(div)),
                    MusicElement::Forward(f) => cursor += Quarters::new(i64::from(f.duration), i64::from(div)),
                    MusicElement::Note(n) => {
                        slots.push((cursor, n.voice, i));
                        if n.advances_time() {
                            cursor += Quarters::new(i64::from(n.duration), i64::from(div));
                        }
                    }
                    MusicElement::Other(_) => {}
                }
            }
            // chord notes sit at the onset of their head
            let mut fixed: Vec<(Quarters, u8, usize)> = Vec::with_capacity(slots.len());
            for (onset, voice, i) in slots {
                let chord = matches!(&m.elements[i], MusicElement::Note(n) if n.chord);
                let onset = if chord { fixed.last().map_or(onset, |s| s.0) } else { onset };
                fixed.push((onset, voice, i));
            }
            fixed.sort();
            let key = key_alters(fifths);
            for (_, voice, i) in fixed {
                let MusicElement::Note(n) = &mut m.elements[i] else { continue };
                let Some(p) = n.pitch.as_mut() else { continue };
                let from_tie = if n.tied_stop { carried.remove(&(p.step, p.octave, voice)) } else { None };
                let alter = match (n.accidental, from_tie) {
                    (Some(a), _) => {
                        seen.insert((p.step, p.octave), a.alter());
                        a.alter()
                    }
                    (None, Some(a)) => a,
                    (None, None) => seen
                        .get(&(p.step, p.octave))
                        .copied()
                        .unwrap_or(key[p.step.index() as usize]),
                };
                p.alter = (alter != 0).then_some(alter);
                if n.tied_start {
                    carried.insert((p.step, p.octave, voice), alter);
                }
            }
        }
    }
}
