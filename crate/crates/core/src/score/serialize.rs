use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use super::*;

pub const DOCTYPE: &str = "<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" \"http://www.musicxml.org/dtds/partwise.dtd\">";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct SerializeError {
    /// Slash-separated location, e.g. `part[P1]/measure[3]/note[5]`.
    pub path: String,
    pub message: String,
}

/// Emit a MusicXML 3.1 partwise document.
pub fn serialize_musicxml(doc: &ScoreDocument) -> Result<Vec<u8>, SerializeError> {
    let tree = to_xml_tree(doc)?;
    let mut out = String::with_capacity(4096);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    out.push_str(DOCTYPE);
    out.push('\n');
    tree.write_to(&mut out, 0);
    Ok(out.into_bytes())
}

/// The element tree `serialize_musicxml` writes.
pub fn to_xml_tree(doc: &ScoreDocument) -> Result<XmlElement, SerializeError> {
    let mut root = XmlElement::new("score-partwise").attr("version", "3.1");
    let mut part_list = XmlElement::new("part-list");
    let mut seen = BTreeSet::new();
    for part in &doc.parts {
        if part.id.is_empty() {
            return Err(err("part", "part id must not be empty"));
        }
        if !seen.insert(part.id.as_str()) {
            return Err(err(format!("part[{}]", part.id), "duplicate part id"));
        }
        let name = match &part.name {
            Some(n) => XmlElement::with_text("part-name", n.clone()),
            None => XmlElement::new("part-name"),
        };
        part_list.push(XmlElement::new("score-part").attr("id", part.id.clone()).child(name));
    }
    root.push(part_list);
    for part in &doc.parts {
        root.push(part_tree(part)?);
    }
    Ok(root)
}

fn err(path: impl Into<String>, message: impl Into<String>) -> SerializeError {
    SerializeError {
        path: path.into(),
        message: message.into(),
    }
}

/// Slur numbering: stops close the oldest open slur of the voice.
#[derive(Default)]
struct SlurNumbers {
    open: HashMap<u8, VecDeque<u32>>,
    used: BTreeSet<u32>,
}

impl SlurNumbers {
    fn stop(&mut self, voice: u8) -> u32 {
        match self.open.get_mut(&voice).and_then(VecDeque::pop_front) {
            Some(n) => {
                self.used.remove(&n);
                n
            }
            None => 1,
        }
    }

    fn start(&mut self, voice: u8) -> u32 {
        let n = (1..).find(|n| !self.used.contains(n)).unwrap_or(1);
        self.used.insert(n);
        self.open.entry(voice).or_default().push_back(n);
        n
    }
}

fn part_tree(part: &Part) -> Result<XmlElement, SerializeError> {
    let mut el = XmlElement::new("part").attr("id", part.id.clone());
    let mut slurs = SlurNumbers::default();
    for (mi, measure) in part.measures.iter().enumerate() {
        let mut m = XmlElement::new("measure").attr("number", (mi + 1).to_string());
        let mut prev_note_voice: Option<u8> = None;
        for (ei, e) in measure.elements.iter().enumerate() {
            let path = || format!("part[{}]/measure[{}]/{}[{}]", part.id, mi + 1, e.name(), ei + 1);
            match e {
                MusicElement::Note(n) => {
                    if n.chord && prev_note_voice != Some(n.voice) {
                        return Err(err(
                            path(),
                            "chord note must directly follow a note of the same voice",
                        ));
                    }
                    m.push(note_tree(n, &mut slurs).map_err(|msg| err(path(), msg))?);
                    prev_note_voice = Some(n.voice);
                }
                MusicElement::Backup(b) => {
                    if b.duration == 0 {
                        return Err(err(path(), "backup duration must be positive"));
                    }
                    m.push(
                        XmlElement::new("backup")
                            .child(XmlElement::with_text("duration", b.duration.to_string())),
                    );
                    prev_note_voice = None;
                }
                MusicElement::Forward(f) => {
                    if f.duration == 0 {
                        return Err(err(path(), "forward duration must be positive"));
                    }
                    let mut x = XmlElement::new("forward")
                        .child(XmlElement::with_text("duration", f.duration.to_string()));
                    if let Some(v) = f.voice {
                        check_voice(v).map_err(|msg| err(path(), msg))?;
                        x.push(XmlElement::with_text("voice", v.to_string()));
                    }
                    if let Some(s) = f.staff {
                        check_staff(s).map_err(|msg| err(path(), msg))?;
                        x.push(XmlElement::with_text("staff", s.to_string()));
                    }
                    m.push(x);
                    prev_note_voice = None;
                }
                MusicElement::Attributes(a) => {
                    m.push(attributes_tree(a).map_err(|msg| err(path(), msg))?);
                    prev_note_voice = None;
                }
                MusicElement::Other(x) => {
                    m.push(x.clone());
                    prev_note_voice = None;
                }
            }
        }
        el.push(m);
    }
    Ok(el)
}

fn check_voice(v: u8) -> Result<(), String> {
    if v == 0 || v > MAX_VOICES {
        return Err(format!("voice {v} outside 1..={MAX_VOICES}"));
    }
    Ok(())
}

fn check_staff(s: u8) -> Result<(), String> {
    if s == 0 || s > MAX_STAVES {
        return Err(format!("staff {s} outside 1..={MAX_STAVES}"));
    }
    Ok(())
}

fn note_tree(n: &Note, slurs: &mut SlurNumbers) -> Result<XmlElement, String> {
    check_voice(n.voice)?;
    check_staff(n.staff)?;
    if n.dots > 2 {
        return Err("at most two dots are supported".into());
    }
    if n.rest && (n.pitch.is_some() || n.stem.is_some() || n.accidental.is_some()) {
        return Err("rest must not carry pitch, stem or accidental".into());
    }
    if (n.tuplet_start || n.tuplet_stop) && n.time_modification.is_none() {
        return Err("tuplet requires a time modification".into());
    }
    if !n.grace && n.duration == 0 {
        return Err("non-grace note needs a positive duration".into());
    }
    let mut el = XmlElement::new("note");
    if n.grace {
        let mut g = XmlElement::new("grace");
        if n.grace_slash {
            g = g.attr("slash", "yes");
        }
        el.push(g);
    }
    if n.chord {
        el.push(XmlElement::new("chord"));
    }
    if n.rest {
        let mut r = XmlElement::new("rest");
        if n.measure_rest {
            r = r.attr("measure", "yes");
        }
        el.push(r);
    } else {
        let p = n.pitch.ok_or("pitched note without pitch")?;
        if p.octave > 9 {
            return Err(format!("octave {} outside 0..=9", p.octave));
        }
        let mut px = XmlElement::new("pitch").child(XmlElement::with_text("step", p.step.as_char().to_string()));
        if let Some(a) = p.alter {
            if !(-2..=2).contains(&a) {
                return Err(format!("alter {a} outside -2..=2"));
            }
            px.push(XmlElement::with_text("alter", a.to_string()));
        }
        px.push(XmlElement::with_text("octave", p.octave.to_string()));
        el.push(px);
    }
    if !n.grace {
        el.push(XmlElement::with_text("duration", n.duration.to_string()));
    }
    if n.tie_stop {
        el.push(XmlElement::new("tie").attr("type", "stop"));
    }
    if n.tie_start {
        el.push(XmlElement::new("tie").attr("type", "start"));
    }
    el.push(XmlElement::with_text("voice", n.voice.to_string()));
    if let Some(t) = n.note_type {
        el.push(XmlElement::with_text("type", t.as_str()));
    }
    for _ in 0..n.dots {
        el.push(XmlElement::new("dot"));
    }
    if let Some(a) = n.accidental {
        el.push(XmlElement::with_text("accidental", a.as_str()));
    }
    if let Some(tm) = n.time_modification {
        if tm.actual == 0 || tm.normal == 0 {
            return Err("time modification ratio must be positive".into());
        }
        el.push(
            XmlElement::new("time-modification")
                .child(XmlElement::with_text("actual-notes", tm.actual.to_string()))
                .child(XmlElement::with_text("normal-notes", tm.normal.to_string())),
        );
    }
    if let Some(s) = n.stem {
        el.push(XmlElement::with_text("stem", s.as_str()));
    }
    el.push(XmlElement::with_text("staff", n.staff.to_string()));
    if n.beams.len() > 8 {
        return Err("at most eight beam levels".into());
    }
    for (i, b) in n.beams.iter().enumerate() {
        el.push(XmlElement::with_text("beam", b.as_str()).attr("number", (i + 1).to_string()));
    }
    let notations = notations_tree(n, slurs);
    if !notations.children.is_empty() {
        el.push(notations);
    }
    Ok(el)
}

fn notations_tree(n: &Note, slurs: &mut SlurNumbers) -> XmlElement {
    let mut el = XmlElement::new("notations");
    if n.tied_stop {
        el.push(XmlElement::new("tied").attr("type", "stop"));
    }
    if n.tied_start {
        el.push(XmlElement::new("tied").attr("type", "start"));
    }
    for _ in 0..n.slur_stops {
        let num = slurs.stop(n.voice);
        el.push(
            XmlElement::new("slur")
                .attr("type", "stop")
                .attr("number", num.to_string()),
        );
    }
    for _ in 0..n.slur_starts {
        let num = slurs.start(n.voice);
        el.push(
            XmlElement::new("slur")
                .attr("type", "start")
                .attr("number", num.to_string()),
        );
    }
    if n.tuplet_start {
        el.push(XmlElement::new("tuplet").attr("type", "start"));
    }
    if n.tuplet_stop {
        el.push(XmlElement::new("tuplet").attr("type", "stop"));
    }
    let mut orn = XmlElement::new("ornaments");
    if n.trill {
        orn.push(XmlElement::new("trill-mark"));
    }
    for o in &n.ornaments {
        orn.push(XmlElement::new(o.as_str()));
    }
    if let Some(marks) = n.tremolo {
        orn.push(XmlElement::with_text("tremolo", marks.to_string()).attr("type", "single"));
    }
    if !orn.children.is_empty() {
        el.push(orn);
    }
    let mut art = XmlElement::new("articulations");
    if n.staccato {
        art.push(XmlElement::new("staccato"));
    }
    if n.accent {
        art.push(XmlElement::new("accent"));
    }
    if n.tenuto {
        art.push(XmlElement::new("tenuto"));
    }
    if !art.children.is_empty() {
        el.push(art);
    }
    if n.fermata {
        el.push(XmlElement::new("fermata"));
    }
    if n.arpeggiate {
        el.push(XmlElement::new("arpeggiate"));
    }
    el
}

fn attributes_tree(a: &Attributes) -> Result<XmlElement, String> {
    let mut el = XmlElement::new("attributes");
    if let Some(d) = a.divisions {
        if d == 0 {
            return Err("divisions must be positive".into());
        }
        el.push(XmlElement::with_text("divisions", d.to_string()));
    }
    if let Some(k) = a.key_fifths {
        if !(-7..=7).contains(&k) {
            return Err(format!("key fifths {k} outside -7..=7"));
        }
        el.push(XmlElement::new("key").child(XmlElement::with_text("fifths", k.to_string())));
    }
    if let Some(t) = a.time {
        if t.beats == 0 || !t.beat_type.is_power_of_two() {
            return Err(format!("invalid time signature {}/{}", t.beats, t.beat_type));
        }
        el.push(
            XmlElement::new("time")
                .child(XmlElement::with_text("beats", t.beats.to_string()))
                .child(XmlElement::with_text("beat-type", t.beat_type.to_string())),
        );
    }
    if let Some(s) = a.staves {
        check_staff(s)?;
        el.push(XmlElement::with_text("staves", s.to_string()));
    }
    for c in &a.clefs {
        check_staff(c.staff)?;
        if !(1..=5).contains(&c.line) {
            return Err(format!("clef line {} outside 1..=5", c.line));
        }
        el.push(
            XmlElement::new("clef")
                .attr("number", c.staff.to_string())
                .child(XmlElement::with_text("sign", c.sign.as_str()))
                .child(XmlElement::with_text("line", c.line.to_string())),
        );
    }
    Ok(el)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_measure(elements: Vec<MusicElement>) -> ScoreDocument {
        let mut doc = ScoreDocument::empty();
        doc.parts[0].measures.push(Measure { elements });
        doc
    }

    #[test]
    fn empty_document_skeleton() {
        let out = String::from_utf8(serialize_musicxml(&ScoreDocument::empty()).unwrap()).unwrap();
        assert!(out.contains("<part-list>"));
        assert!(out.contains("<score-part id=\"P1\">"));
        assert!(out.contains("<part id=\"P1\"/>"));
        let back = parse_musicxml(out.as_bytes()).unwrap();
        assert_eq!(back.parts.len(), 1);
        assert!(back.parts[0].measures.is_empty());
    }

    #[test]
    fn tie_and_tied_both_emitted() {
        let mut n = Note::pitched(Pitch::new(Step::C, 4), NoteType::Quarter, 1);
        n.tie_start = true;
        n.tied_start = true;
        let doc = one_measure(vec![MusicElement::Note(n)]);
        let out = String::from_utf8(serialize_musicxml(&doc).unwrap()).unwrap();
        assert!(out.contains("<tie type=\"start\"/>"));
        assert!(out.contains("<notations>\n          <tied type=\"start\"/>"));
    }

    #[test]
    fn invariant_violations_name_path() {
        let mut n = Note::rest(NoteType::Quarter, 1);
        n.stem = Some(Stem::Up);
        let doc = one_measure(vec![MusicElement::Note(n)]);
        let e = serialize_musicxml(&doc).unwrap_err();
        assert_eq!(e.path, "part[P1]/measure[1]/note[1]");

        let mut c = Note::pitched(Pitch::new(Step::C, 4), NoteType::Quarter, 1);
        c.chord = true;
        let doc = one_measure(vec![MusicElement::Backup(Backup { duration: 1 }), MusicElement::Note(c)]);
        let e = serialize_musicxml(&doc).unwrap_err();
        assert_eq!(e.path, "part[P1]/measure[1]/note[2]");
    }

    #[test]
    fn slur_numbers_overlap() {
        let mut a = Note::pitched(Pitch::new(Step::C, 4), NoteType::Quarter, 1);
        a.slur_starts = 1;
        let mut b = Note::pitched(Pitch::new(Step::D, 4), NoteType::Quarter, 1);
        b.slur_starts = 1;
        let mut c = Note::pitched(Pitch::new(Step::E, 4), NoteType::Quarter, 1);
        c.slur_stops = 2;
        let doc = one_measure(vec![MusicElement::Note(a), MusicElement::Note(b), MusicElement::Note(c)]);
        let tree = to_xml_tree(&doc).unwrap();
        let notes: Vec<_> = tree.find_all("part").next().unwrap().children[0].find_all("note").collect();
        let nums = |n: &XmlElement| -> Vec<String> {
            n.find("notations")
                .unwrap()
                .find_all("slur")
                .map(|s| format!("{}{}", s.get_attr("type").unwrap(), s.get_attr("number").unwrap()))
                .collect()
        };
        assert_eq!(nums(notes[0]), ["start1"]);
        assert_eq!(nums(notes[1]), ["start2"]);
        assert_eq!(nums(notes[2]), ["stop1", "stop2"]);
    }

    #[test]
    fn serialize_parse_serialize_is_stable() {
        let mut n = Note::pitched(
            Pitch {
                step: Step::F,
                octave: 5,
                alter: Some(1),
            },
            NoteType::Eighth,
            1,
        );
        n.beams = vec![Beam::Begin];
        n.accidental = Some(Accidental::Sharp);
        n.stem = Some(Stem::Down);
        n.ornaments.insert(Ornament::Turn);
        n.tremolo = Some(2);
        let attrs = Attributes {
            divisions: Some(2),
            key_fifths: Some(-3),
            time: Some(TimeSignature::new(3, 8)),
            staves: Some(2),
            clefs: vec![
                Clef { staff: 1, sign: ClefSign::G, line: 2 },
                Clef { staff: 2, sign: ClefSign::F, line: 4 },
            ],
        };
        let doc = one_measure(vec![MusicElement::Attributes(attrs), MusicElement::Note(n)]);
        let a = serialize_musicxml(&doc).unwrap();
        let parsed = parse_musicxml(&a).unwrap();
        assert_eq!(parsed.parts, doc.parts);
        let b = serialize_musicxml(&parsed).unwrap();
        assert_eq!(a, b);
    }
}
