use std::collections::HashMap;
use std::sync::OnceLock;

use crate::duration::{NoteType, TimeModification};
use crate::score::{Accidental, ClefSign, Step};

pub const VOCABULARY_VERSION: &str = "lmx-vocab-1";

/// Tuplet ratios with a token, as `(actual, normal)`.
pub const TIME_MODIFICATIONS: [(u32, u32); 9] = [
    (2, 3),
    (3, 2),
    (3, 4),
    (4, 3),
    (5, 4),
    (6, 4),
    (7, 4),
    (7, 8),
    (9, 8),
];

pub const TIME_BEAT_TYPES: [u32; 5] = [1, 2, 4, 8, 16];
pub const TIME_MAX_BEATS: u32 = 12;

/// Ornament-category tokens in emission order.
pub const ORNAMENT_TOKENS: [&str; 14] = [
    "trill-mark",
    "mordent",
    "inverted-mordent",
    "turn",
    "inverted-turn",
    "tremolo:1",
    "tremolo:2",
    "tremolo:3",
    "tremolo:4",
    "staccato",
    "accent",
    "tenuto",
    "fermata",
    "arpeggiate",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Structural,
    Type,
    Pitch,
    Accidental,
    Voice,
    Staff,
    Stem,
    Beam,
    Tied,
    Slur,
    Tuplet,
    TimeMod,
    Clef,
    Key,
    Time,
    Ornament,
    Grace,
    Chord,
    Rest,
    Dot,
    Backup,
    Forward,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Structural => "structural",
            Category::Type => "type",
            Category::Pitch => "pitch",
            Category::Accidental => "accidental",
            Category::Voice => "voice",
            Category::Staff => "staff",
            Category::Stem => "stem",
            Category::Beam => "beam",
            Category::Tied => "tied",
            Category::Slur => "slur",
            Category::Tuplet => "tuplet",
            Category::TimeMod => "timemod",
            Category::Clef => "clef",
            Category::Key => "key",
            Category::Time => "time",
            Category::Ornament => "ornament",
            Category::Grace => "grace",
            Category::Chord => "chord",
            Category::Rest => "rest",
            Category::Dot => "dot",
            Category::Backup => "backup",
            Category::Forward => "forward",
        }
    }
}

/// The closed LMX token inventory.
#[derive(Debug)]
pub struct Vocabulary {
    tokens: Vec<(String, Category)>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn build() -> Self {
        let mut tokens: Vec<(String, Category)> = Vec::new();
        let mut add = |t: String, c: Category| tokens.push((t, c));
        add("measure".into(), Category::Structural);
        add("backup".into(), Category::Backup);
        add("forward".into(), Category::Forward);
        for t in NoteType::ALL {
            add(t.as_str().into(), Category::Type);
        }
        for octave in 0..=9 {
            for step in Step::ALL {
                add(format!("{}{}", step.as_char(), octave), Category::Pitch);
            }
        }
        for a in Accidental::ALL {
            add(format!("accidental:{}", a.as_str()), Category::Accidental);
        }
        for v in 1..=8 {
            add(format!("voice:{v}"), Category::Voice);
        }
        for s in 1..=2 {
            add(format!("staff:{s}"), Category::Staff);
        }
        for s in ["up", "down", "none"] {
            add(format!("stem:{s}"), Category::Stem);
        }
        for b in ["begin", "end", "forward-hook", "backward-hook"] {
            add(format!("beam:{b}"), Category::Beam);
        }
        for kind in ["start", "stop"] {
            add(format!("tied:{kind}"), Category::Tied);
        }
        for kind in ["start", "stop"] {
            add(format!("slur:{kind}"), Category::Slur);
        }
        for kind in ["start", "stop"] {
            add(format!("tuplet:{kind}"), Category::Tuplet);
        }
        for (a, n) in TIME_MODIFICATIONS {
            add(TimeModification::new(a, n).token(), Category::TimeMod);
        }
        for sign in ClefSign::ALL {
            for line in 1..=5 {
                add(format!("clef:{}{}", sign.as_str(), line), Category::Clef);
            }
        }
        for f in -7..=7 {
            add(format!("key:fifths:{f}"), Category::Key);
        }
        for beats in 1..=TIME_MAX_BEATS {
            for bt in TIME_BEAT_TYPES {
                add(format!("time:{beats}/{bt}"), Category::Time);
            }
        }
        for o in ORNAMENT_TOKENS {
            add(o.into(), Category::Ornament);
        }
        add("grace".into(), Category::Grace);
        add("grace:slash".into(), Category::Grace);
        add("chord".into(), Category::Chord);
        add("rest".into(), Category::Rest);
        add("rest:measure".into(), Category::Rest);
        add("dot".into(), Category::Dot);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn version(&self) -> &'static str {
        VOCABULARY_VERSION
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn category(&self, token: &str) -> Option<Category> {
        self.index.get(token).map(|i| self.tokens[*i].1)
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(|(t, _)| t.as_str())
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|(t, _)| t.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Category)> {
        self.tokens.iter().map(|(t, c)| (t.as_str(), *c))
    }

    /// Plain-text listing: a version header comment, then one token per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("# {VOCABULARY_VERSION}\n");
        for (t, _) in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }
}

pub fn vocabulary() -> &'static Vocabulary {
    static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
    VOCAB.get_or_init(Vocabulary::build)
}

/// Parse `XinY`.
pub fn parse_time_modification(token: &str) -> Option<TimeModification> {
    let (a, n) = token.split_once("in")?;
    let tm = TimeModification::new(a.parse().ok()?, n.parse().ok()?);
    TIME_MODIFICATIONS
        .contains(&(tm.actual, tm.normal))
        .then_some(tm)
}
