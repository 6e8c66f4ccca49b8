use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use super::vocab::{vocabulary, TIME_MODIFICATIONS};
use super::{Provenance, TokenSequence};
use crate::duration::{decompose_duration, from_divisions, type_for_duration, Quarters, TimeModification};
use crate::score::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinearizeError {
    #[error("measure {}: input is not canonical: {message}", .measure + 1)]
    NonCanonical { measure: usize, message: String },
    #[error("measure {}: unsupported feature: {message}", .measure + 1)]
    UnsupportedFeature { measure: usize, message: String },
    #[error("linearization needs a single part, found {0}")]
    PartCount(usize),
}

/// What the linearizer saw but could not encode.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearizeStats {
    /// Out-of-scope measure elements: name -> element nodes.
    pub skipped: BTreeMap<String, usize>,
    /// Element nodes of the serialized model that have no token representation
    /// (divisions, staves, backup/forward voice and staff bookkeeping are
    /// reconstructed and do not count).
    pub skipped_nodes: usize,
}

#[derive(Default)]
struct State {
    voice: Option<u8>,
    staff: Option<u8>,
    stem: Option<Stem>,
}

struct Out {
    tokens: Vec<String>,
    prov: Vec<Provenance>,
    at: Provenance,
}

impl Out {
    fn push(&mut self, t: impl Into<String>) {
        let t = t.into();
        debug_assert!(vocabulary().contains(&t), "token {t} outside vocabulary");
        self.tokens.push(t);
        self.prov.push(self.at);
    }
}

pub fn linearize(doc: &ScoreDocument) -> Result<TokenSequence, LinearizeError> {
    linearize_with_stats(doc).map(|(s, _)| s)
}

pub fn linearize_with_stats(doc: &ScoreDocument) -> Result<(TokenSequence, LinearizeStats), LinearizeError> {
    let mut out = Out {
        tokens: Vec::new(),
        prov: Vec::new(),
        at: (0, 0),
    };
    let mut stats = LinearizeStats::default();
    match doc.parts.len() {
        0 => {}
        1 => linearize_part(&doc.parts[0], &mut out, &mut stats)?,
        n => return Err(LinearizeError::PartCount(n)),
    }
    Ok((
        TokenSequence {
            tokens: out.tokens,
            provenance: Some(out.prov),
        },
        stats,
    ))
}

/// Type tokens for a duration, with a tuplet ratio when the duration only
/// decomposes in tuplet time.
fn duration_tokens(q: Quarters) -> Option<(Vec<&'static str>, Option<TimeModification>)> {
    if let Ok(types) = decompose_duration(q) {
        return Some((types.iter().map(|t| t.as_str()).collect(), None));
    }
    for (a, n) in TIME_MODIFICATIONS {
        let tm = TimeModification::new(a, n);
        if let Ok(types) = decompose_duration(q / tm.factor()) {
            return Some((types.iter().map(|t| t.as_str()).collect(), Some(tm)));
        }
    }
    None
}

fn linearize_part(part: &Part, out: &mut Out, stats: &mut LinearizeStats) -> Result<(), LinearizeError> {
    let two_staves = part
        .measures
        .iter()
        .flat_map(|m| &m.elements)
        .any(|e| matches!(e, MusicElement::Attributes(a) if a.staves == Some(2)));
    let mut divisions = 1u32;
    let mut open_tuplet: BTreeMap<u8, bool> = BTreeMap::new();

    for (mi, measure) in part.measures.iter().enumerate() {
        out.at = (mi, 0);
        out.push("measure");
        let mut st = State::default();
        let mut last_voice: Option<u8> = None;
        let mut cursor = Quarters::zero();
        let mut after_backup = false;
        let unsupported = |message: String| LinearizeError::UnsupportedFeature { measure: mi, message };
        let noncanonical = |message: String| LinearizeError::NonCanonical { measure: mi, message };

        let mut enter_voice = |v: u8, st: &mut State, out: &mut Out, after_backup: &mut bool| -> Result<(), LinearizeError> {
            if st.voice == Some(v) {
                return Ok(());
            }
            if st.voice.is_some() {
                return Err(noncanonical(format!("voice {v} starts without a backup")));
            }
            if let Some(prev) = last_voice {
                if v <= prev {
                    return Err(noncanonical(format!("voice {v} after voice {prev}")));
                }
                if !*after_backup {
                    return Err(noncanonical(format!("voice {v} starts without a backup")));
                }
            }
            out.push(format!("voice:{v}"));
            *st = State {
                voice: Some(v),
                ..State::default()
            };
            last_voice = Some(v);
            *after_backup = false;
            Ok(())
        };

        for (ei, el) in measure.elements.iter().enumerate() {
            out.at = (mi, ei);
            match el {
                MusicElement::Attributes(a) => {
                    if let Some(d) = a.divisions {
                        divisions = d.max(1);
                    }
                    if let Some(k) = a.key_fifths {
                        out.push(format!("key:fifths:{k}"));
                    }
                    if let Some(t) = a.time {
                        let tok = format!("time:{}/{}", t.beats, t.beat_type);
                        if !vocabulary().contains(&tok) {
                            return Err(unsupported(format!("time signature {}/{}", t.beats, t.beat_type)));
                        }
                        out.push(tok);
                    }
                    for c in &a.clefs {
                        out.push(format!("clef:{}{}", c.sign.as_str(), c.line));
                        if two_staves {
                            out.push(format!("staff:{}", c.staff));
                        }
                    }
                }
                MusicElement::Other(x) => {
                    *stats.skipped.entry(x.name.clone()).or_default() += x.element_count();
                    stats.skipped_nodes += x.element_count();
                }
                MusicElement::Backup(b) => {
                    let q = from_divisions(b.duration, divisions);
                    if q != cursor {
                        return Err(noncanonical(format!(
                            "backup of {q} quarters does not return to the measure start ({cursor})"
                        )));
                    }
                    cursor = Quarters::zero();
                    out.push("backup");
                    if let Some((types, tm)) = duration_tokens(q) {
                        for t in types {
                            out.push(t);
                        }
                        if let Some(tm) = tm {
                            out.push(tm.token());
                        }
                    }
                    st = State::default();
                    after_backup = true;
                }
                MusicElement::Forward(f) => {
                    let v = f.voice.or(st.voice).unwrap_or(1);
                    enter_voice(v, &mut st, out, &mut after_backup)?;
                    let q = from_divisions(f.duration, divisions);
                    let (types, tm) =
                        duration_tokens(q).ok_or_else(|| unsupported(format!("forward of {q} quarters")))?;
                    out.push("forward");
                    for t in types {
                        out.push(t);
                    }
                    if let Some(tm) = tm {
                        out.push(tm.token());
                    }
                    let staff = f.staff.unwrap_or_else(|| crate::canonical::default_staff(v));
                    if st.staff != Some(staff) {
                        out.push(format!("staff:{staff}"));
                        st.staff = Some(staff);
                    }
                    cursor += q;
                }
                MusicElement::Note(n) => {
                    if !n.chord {
                        enter_voice(n.voice, &mut st, out, &mut after_backup)?;
                    } else if st.voice != Some(n.voice) {
                        return Err(noncanonical("chord note in a different voice".into()));
                    }
                    let q = from_divisions(n.duration, divisions);
                    note_tokens(n, q, &mut st, out, &mut open_tuplet).map_err(unsupported)?;
                    if n.advances_time() {
                        cursor += q;
                    }
                }
            }
        }
        if open_tuplet.values().any(|o| *o) {
            // Tuplets never cross a barline in the encoded form.
            open_tuplet.clear();
        }
    }
    Ok(())
}

fn note_tokens(
    n: &Note,
    q: Quarters,
    st: &mut State,
    out: &mut Out,
    open_tuplet: &mut BTreeMap<u8, bool>,
) -> Result<(), String> {
    if n.grace {
        out.push(if n.grace_slash { "grace:slash" } else { "grace" });
    }
    if n.chord {
        out.push("chord");
    }
    if n.rest {
        out.push(if n.measure_rest { "rest:measure" } else { "rest" });
    } else {
        let p = n.pitch.ok_or("pitched note without pitch")?;
        out.push(p.token());
    }
    let (ty, dots) = match n.note_type {
        Some(t) => (t, n.dots),
        None if !n.grace => type_for_duration(q, n.time_modification)
            .ok_or_else(|| format!("note without type and with unrepresentable duration {q}"))?,
        None => return Err("grace note without type".into()),
    };
    out.push(ty.as_str());
    for _ in 0..dots {
        out.push("dot");
    }
    if let Some(tm) = n.time_modification {
        let tok = tm.token();
        if !vocabulary().contains(&tok) {
            return Err(format!("time modification {tok}"));
        }
        out.push(tok);
    }
    if let Some(a) = n.accidental {
        out.push(format!("accidental:{}", a.as_str()));
    }
    if let Some(s) = n.stem {
        let note = Note {
            note_type: Some(ty),
            ..n.clone()
        };
        if note.stem_bearing() {
            if st.stem != Some(s) {
                out.push(format!("stem:{}", s.as_str()));
                st.stem = Some(s);
            }
        } else {
            out.push(format!("stem:{}", s.as_str()));
        }
    }
    if st.staff != Some(n.staff) {
        out.push(format!("staff:{}", n.staff));
        st.staff = Some(n.staff);
    }
    if !n.chord && !n.rest {
        for b in &n.beams {
            match b {
                Beam::Continue => {}
                Beam::Begin => out.push("beam:begin"),
                Beam::End => out.push("beam:end"),
                Beam::ForwardHook => out.push("beam:forward-hook"),
                Beam::BackwardHook => out.push("beam:backward-hook"),
            }
        }
    }
    if n.tied_stop {
        out.push("tied:stop");
    }
    if n.tied_start {
        out.push("tied:start");
    }
    for _ in 0..n.slur_stops {
        out.push("slur:stop");
    }
    for _ in 0..n.slur_starts {
        out.push("slur:start");
    }
    let open = open_tuplet.entry(n.voice).or_default();
    if n.tuplet_start {
        if *open {
            return Err("nested tuplets".into());
        }
        *open = true;
        out.push("tuplet:start");
    }
    if n.tuplet_stop {
        *open = false;
        out.push("tuplet:stop");
    }
    if n.trill {
        out.push("trill-mark");
    }
    for o in &n.ornaments {
        out.push(o.as_str());
    }
    if let Some(m) = n.tremolo {
        if !(1..=4).contains(&m) {
            return Err(format!("tremolo with {m} marks"));
        }
        out.push(format!("tremolo:{m}"));
    }
    if n.staccato {
        out.push("staccato");
    }
    if n.accent {
        out.push("accent");
    }
    if n.tenuto {
        out.push("tenuto");
    }
    if n.fermata {
        out.push("fermata");
    }
    if n.arpeggiate {
        out.push("arpeggiate");
    }
    Ok(())
}
