//! Alteration inference for pitches spelled without `<alter>`.
//!
//! Notes are visited in time order. The first rule that applies wins:
//! an explicit accidental, the alteration carried by an incoming tie,
//! an earlier accidental on the same step and octave in this measure,
//! then the key signature.

use std::collections::HashMap;

use crate::canonical::{ItemKind, LaidMeasure};
use crate::score::{key_alters, Accidental, MusicElement, Note, Step};

#[derive(Debug, Clone, Default)]
pub struct PitchContext {
    key: [i8; 7],
    measure: HashMap<(Step, u8), i8>,
    ties: HashMap<(Step, u8, u8), i8>,
}

impl PitchContext {
    pub fn new(fifths: i8) -> Self {
        PitchContext {
            key: key_alters(fifths),
            ..Default::default()
        }
    }

    pub fn set_key(&mut self, fifths: i8) {
        self.key = key_alters(fifths);
    }

    pub fn start_measure(&mut self) {
        self.measure.clear();
    }

    /// Alteration of a note, updating the context.
    pub fn alter_for(
        &mut self,
        step: Step,
        octave: u8,
        accidental: Option<Accidental>,
        voice: u8,
        tied_stop: bool,
        tied_start: bool,
    ) -> i8 {
        let tie_key = (step, octave, voice);
        let carried = if tied_stop { self.ties.remove(&tie_key) } else { None };
        let alter = if let Some(a) = accidental {
            self.measure.insert((step, octave), a.alter());
            a.alter()
        } else if let Some(a) = carried {
            a
        } else if let Some(a) = self.measure.get(&(step, octave)) {
            *a
        } else {
            self.key[step.index() as usize]
        };
        if tied_start {
            self.ties.insert(tie_key, alter);
        }
        alter
    }

    fn apply(&mut self, n: &mut Note) {
        if let Some(p) = n.pitch.as_mut() {
            let a = self.alter_for(p.step, p.octave, n.accidental, n.voice, n.tied_stop, n.tied_start);
            p.alter = (a != 0).then_some(a);
        }
    }
}

/// Fill in `alter` for every pitched note of a laid-out part.
pub(crate) fn infer_alters(measures: &mut [LaidMeasure]) {
    let mut cx = PitchContext::new(0);
    for m in measures.iter_mut() {
        cx.start_measure();
        for e in &m.leading {
            if let MusicElement::Attributes(a) = e {
                if let Some(k) = a.key_fifths {
                    cx.set_key(k);
                }
            }
        }
        // (onset, voice position, item index)
        let mut order: Vec<_> = m
            .voices
            .iter()
            .enumerate()
            .flat_map(|(vi, v)| v.items.iter().enumerate().map(move |(ii, it)| (it.onset, vi, ii)))
            .collect();
        order.sort();
        for (_, vi, ii) in order {
            let voice = m.voices[vi].voice;
            match &mut m.voices[vi].items[ii].kind {
                ItemKind::Element(MusicElement::Attributes(a)) => {
                    if let Some(k) = a.key_fifths {
                        cx.set_key(k);
                    }
                }
                ItemKind::Element(_) => {}
                ItemKind::Chord(ns) => {
                    for t in ns.iter_mut() {
                        t.note.voice = voice;
                        cx.apply(&mut t.note);
                    }
                }
            }
        }
    }
}
