//! Structural validation of MusicXML partwise output.
//!
//! Checks the content models of the elements this crate emits (child order,
//! cardinality, enumerated and numeric values). Retained passthrough
//! elements are only checked for being allowed where they appear.

use roxmltree::{Document, Node};

/// One content-model slot: child name, minimum and maximum occurrences.
type Slot = (&'static str, usize, usize);

const MANY: usize = usize::MAX;

const NOTE_REGULAR: &[Slot] = &[
    ("chord", 0, 1),
    ("pitch|rest", 1, 1),
    ("duration", 1, 1),
    ("tie", 0, 2),
    ("voice", 0, 1),
    ("type", 0, 1),
    ("dot", 0, MANY),
    ("accidental", 0, 1),
    ("time-modification", 0, 1),
    ("stem", 0, 1),
    ("staff", 0, 1),
    ("beam", 0, 8),
    ("notations", 0, MANY),
];

const NOTE_GRACE: &[Slot] = &[
    ("grace", 1, 1),
    ("chord", 0, 1),
    ("pitch|rest", 1, 1),
    ("tie", 0, 2),
    ("voice", 0, 1),
    ("type", 0, 1),
    ("dot", 0, MANY),
    ("accidental", 0, 1),
    ("time-modification", 0, 1),
    ("stem", 0, 1),
    ("staff", 0, 1),
    ("beam", 0, 8),
    ("notations", 0, MANY),
];

const ATTRIBUTES: &[Slot] = &[
    ("divisions", 0, 1),
    ("key", 0, MANY),
    ("time", 0, MANY),
    ("staves", 0, 1),
    ("clef", 0, MANY),
];

const PITCH: &[Slot] = &[("step", 1, 1), ("alter", 0, 1), ("octave", 1, 1)];
const FORWARD: &[Slot] = &[("duration", 1, 1), ("voice", 0, 1), ("staff", 0, 1)];
const BACKUP: &[Slot] = &[("duration", 1, 1)];
const TIME: &[Slot] = &[("beats", 1, 1), ("beat-type", 1, 1)];
const KEY: &[Slot] = &[("fifths", 1, 1)];
const CLEF: &[Slot] = &[("sign", 1, 1), ("line", 0, 1)];
const TIMEMOD: &[Slot] = &[("actual-notes", 1, 1), ("normal-notes", 1, 1)];
const SCORE_PART: &[Slot] = &[("part-name", 1, 1)];

const MEASURE_CHILDREN: &[&str] = &[
    "note",
    "backup",
    "forward",
    "attributes",
    "direction",
    "barline",
    "harmony",
    "figured-bass",
];
const NOTATION_CHILDREN: &[&str] = &[
    "tied",
    "slur",
    "tuplet",
    "ornaments",
    "articulations",
    "fermata",
    "arpeggiate",
];
const ORNAMENT_CHILDREN: &[&str] = &[
    "trill-mark",
    "turn",
    "inverted-turn",
    "mordent",
    "inverted-mordent",
    "tremolo",
];
const ARTICULATION_CHILDREN: &[&str] = &["staccato", "accent", "tenuto"];

const NOTE_TYPES: &[&str] = &[
    "maxima", "long", "breve", "whole", "half", "quarter", "eighth", "16th", "32nd", "64th",
    "128th", "256th",
];

/// Validate a serialized document, returning every problem found.
pub fn validate_musicxml(bytes: &[u8]) -> Result<(), Vec<String>> {
    let text = std::str::from_utf8(bytes).map_err(|e| vec![format!("not UTF-8: {e}")])?;
    let doc = Document::parse_with_options(
        text,
        roxmltree::ParsingOptions {
            allow_dtd: true,
            ..Default::default()
        },
    )
    .map_err(|e| vec![format!("not well-formed: {e}")])?;
    let mut v = Validator { problems: Vec::new() };
    v.score(doc.root_element());
    if v.problems.is_empty() {
        Ok(())
    } else {
        Err(v.problems)
    }
}

struct Validator {
    problems: Vec<String>,
}

fn name<'a>(n: &Node<'a, '_>) -> &'a str {
    n.tag_name().name()
}

fn element_children<'a, 'i>(n: Node<'a, 'i>) -> Vec<Node<'a, 'i>> {
    n.children().filter(|c| c.is_element()).collect()
}

fn text<'a>(n: Node<'a, '_>) -> &'a str {
    n.text().unwrap_or("").trim()
}

impl Validator {
    fn problem(&mut self, path: &str, msg: impl AsRef<str>) {
        self.problems.push(format!("{path}: {}", msg.as_ref()));
    }

    fn sequence(&mut self, node: Node<'_, '_>, path: &str, model: &[Slot]) {
        let children = element_children(node);
        let mut i = 0;
        for &(names, min, max) in model {
            let mut count = 0;
            while i < children.len() && names.split('|').any(|n| n == name(&children[i])) {
                count += 1;
                i += 1;
            }
            if count < min {
                self.problem(path, format!("missing <{names}>"));
            }
            if count > max {
                self.problem(path, format!("too many <{names}> ({count})"));
            }
        }
        if i < children.len() {
            self.problem(
                path,
                format!("unexpected or misplaced <{}>", name(&children[i])),
            );
        }
    }

    fn allowed(&mut self, node: Node<'_, '_>, path: &str, names: &[&str]) {
        for c in element_children(node) {
            if !names.contains(&name(&c)) {
                self.problem(path, format!("<{}> not allowed here", name(&c)));
            }
        }
    }

    fn int_in(&mut self, node: Node<'_, '_>, path: &str, lo: i64, hi: i64) {
        match text(node).parse::<i64>() {
            Ok(v) if (lo..=hi).contains(&v) => {}
            _ => self.problem(
                path,
                format!("<{}> value {:?} outside {lo}..={hi}", name(&node), text(node)),
            ),
        }
    }

    fn attr_in(&mut self, node: Node<'_, '_>, path: &str, attr: &str, values: &[&str], required: bool) {
        match node.attribute(attr) {
            Some(v) if values.contains(&v) => {}
            None if !required => {}
            other => self.problem(path, format!("attribute {attr}={other:?} not allowed")),
        }
    }

    fn score(&mut self, root: Node<'_, '_>) {
        if name(&root) != "score-partwise" {
            self.problem("/", format!("root is <{}>, expected <score-partwise>", name(&root)));
            return;
        }
        let children = element_children(root);
        let part_list: Vec<_> = children.iter().filter(|c| name(c) == "part-list").collect();
        if part_list.len() != 1 || name(&children[0]) != "part-list" {
            self.problem("/score-partwise", "exactly one leading <part-list> required");
        }
        let mut ids = Vec::new();
        for pl in part_list {
            for sp in element_children(*pl) {
                if name(&sp) != "score-part" {
                    self.problem("/part-list", format!("unexpected <{}>", name(&sp)));
                    continue;
                }
                let id = sp.attribute("id").unwrap_or("").to_string();
                if id.is_empty() {
                    self.problem("/part-list/score-part", "missing id");
                }
                self.sequence(sp, &format!("/part-list/score-part[{id}]"), SCORE_PART);
                ids.push(id);
            }
        }
        if ids.is_empty() {
            self.problem("/part-list", "at least one <score-part> required");
        }
        let mut parts = 0;
        for c in children.iter().skip(1) {
            if name(c) != "part" {
                self.problem("/score-partwise", format!("unexpected <{}>", name(c)));
                continue;
            }
            let id = c.attribute("id").unwrap_or("");
            if !ids.iter().any(|i| i == id) {
                self.problem("/score-partwise", format!("part {id:?} not declared in part-list"));
            }
            parts += 1;
            self.part(*c, id);
        }
        if parts != ids.len() {
            self.problem("/score-partwise", "part-list and parts disagree");
        }
    }

    fn part(&mut self, part: Node<'_, '_>, id: &str) {
        for (mi, m) in element_children(part).into_iter().enumerate() {
            let path = format!("/part[{id}]/measure[{}]", mi + 1);
            if name(&m) != "measure" {
                self.problem(&path, format!("unexpected <{}>", name(&m)));
                continue;
            }
            if m.attribute("number").map_or(true, str::is_empty) {
                self.problem(&path, "measure number required");
            }
            self.allowed(m, &path, MEASURE_CHILDREN);
            for (ei, e) in element_children(m).into_iter().enumerate() {
                let epath = format!("{path}/{}[{}]", name(&e), ei + 1);
                match name(&e) {
                    "note" => self.note(e, &epath),
                    "backup" => {
                        self.sequence(e, &epath, BACKUP);
                        self.durations(e, &epath);
                    }
                    "forward" => {
                        self.sequence(e, &epath, FORWARD);
                        self.durations(e, &epath);
                        self.voice_staff(e, &epath);
                    }
                    "attributes" => self.attributes(e, &epath),
                    _ => {}
                }
            }
        }
    }

    fn durations(&mut self, node: Node<'_, '_>, path: &str) {
        for d in element_children(node).into_iter().filter(|c| name(c) == "duration") {
            self.int_in(d, path, 1, i64::from(u32::MAX));
        }
    }

    fn voice_staff(&mut self, node: Node<'_, '_>, path: &str) {
        for c in element_children(node) {
            match name(&c) {
                "voice" => self.int_in(c, path, 1, 8),
                "staff" => self.int_in(c, path, 1, 2),
                _ => {}
            }
        }
    }

    fn note(&mut self, note: Node<'_, '_>, path: &str) {
        let children = element_children(note);
        let grace = children.first().map(|c| name(c) == "grace").unwrap_or(false);
        self.sequence(note, path, if grace { NOTE_GRACE } else { NOTE_REGULAR });
        self.durations(note, path);
        self.voice_staff(note, path);
        for c in children {
            match name(&c) {
                "grace" => self.attr_in(c, path, "slash", &["yes", "no"], false),
                "pitch" => {
                    self.sequence(c, path, PITCH);
                    for p in element_children(c) {
                        match name(&p) {
                            "step" => {
                                if !["A", "B", "C", "D", "E", "F", "G"].contains(&text(p)) {
                                    self.problem(path, format!("bad step {:?}", text(p)));
                                }
                            }
                            "alter" => self.int_in(p, path, -2, 2),
                            "octave" => self.int_in(p, path, 0, 9),
                            _ => {}
                        }
                    }
                }
                "rest" => {
                    self.attr_in(c, path, "measure", &["yes", "no"], false);
                    self.allowed(c, path, &[]);
                }
                "tie" => self.attr_in(c, path, "type", &["start", "stop"], true),
                "type" => {
                    if !NOTE_TYPES.contains(&text(c)) {
                        self.problem(path, format!("bad note type {:?}", text(c)));
                    }
                }
                "accidental" => {
                    if !["sharp", "flat", "natural", "double-sharp", "flat-flat"].contains(&text(c)) {
                        self.problem(path, format!("bad accidental {:?}", text(c)));
                    }
                }
                "time-modification" => {
                    self.sequence(c, path, TIMEMOD);
                    for t in element_children(c) {
                        self.int_in(t, path, 1, 1000);
                    }
                }
                "stem" => {
                    if !["up", "down", "none", "double"].contains(&text(c)) {
                        self.problem(path, format!("bad stem {:?}", text(c)));
                    }
                }
                "beam" => {
                    if !["begin", "continue", "end", "forward hook", "backward hook"]
                        .contains(&text(c))
                    {
                        self.problem(path, format!("bad beam {:?}", text(c)));
                    }
                    match c.attribute("number").map(str::parse::<u8>) {
                        None | Some(Ok(1..=8)) => {}
                        _ => self.problem(path, "beam number outside 1..=8"),
                    }
                }
                "notations" => self.notations(c, path),
                _ => {}
            }
        }
    }

    fn notations(&mut self, node: Node<'_, '_>, path: &str) {
        self.allowed(node, path, NOTATION_CHILDREN);
        for c in element_children(node) {
            match name(&c) {
                "tied" => self.attr_in(c, path, "type", &["start", "stop", "continue", "let-ring"], true),
                "slur" => {
                    self.attr_in(c, path, "type", &["start", "stop", "continue"], true);
                    match c.attribute("number").map(str::parse::<u8>) {
                        None | Some(Ok(1..=16)) => {}
                        _ => self.problem(path, "slur number outside 1..=16"),
                    }
                }
                "tuplet" => self.attr_in(c, path, "type", &["start", "stop"], true),
                "ornaments" => {
                    self.allowed(c, path, ORNAMENT_CHILDREN);
                    for o in element_children(c).into_iter().filter(|o| name(o) == "tremolo") {
                        self.attr_in(o, path, "type", &["single", "start", "stop", "unmeasured"], false);
                        self.int_in(o, path, 0, 8);
                    }
                }
                "articulations" => self.allowed(c, path, ARTICULATION_CHILDREN),
                _ => {}
            }
        }
    }

    fn attributes(&mut self, node: Node<'_, '_>, path: &str) {
        self.sequence(node, path, ATTRIBUTES);
        for c in element_children(node) {
            match name(&c) {
                "divisions" => self.int_in(c, path, 1, i64::from(u32::MAX)),
                "key" => {
                    self.sequence(c, path, KEY);
                    for f in element_children(c) {
                        self.int_in(f, path, -7, 7);
                    }
                }
                "time" => {
                    self.sequence(c, path, TIME);
                    for t in element_children(c) {
                        if name(&t) == "beat-type" {
                            match text(t).parse::<u32>() {
                                Ok(v) if v.is_power_of_two() => {}
                                _ => self.problem(path, format!("bad beat-type {:?}", text(t))),
                            }
                        } else {
                            self.int_in(t, path, 1, 99);
                        }
                    }
                }
                "staves" => self.int_in(c, path, 1, 2),
                "clef" => {
                    self.sequence(c, path, CLEF);
                    match c.attribute("number").map(str::parse::<u8>) {
                        None | Some(Ok(1..=2)) => {}
                        _ => self.problem(path, "clef number outside 1..=2"),
                    }
                    for s in element_children(c) {
                        match name(&s) {
                            "sign" => {
                                if !["G", "F", "C"].contains(&text(s)) {
                                    self.problem(path, format!("bad clef sign {:?}", text(s)));
                                }
                            }
                            "line" => self.int_in(s, path, 1, 5),
                            _ => {}
                        }
                    }
                }
                _ => {}
            }
        }
    }
}
