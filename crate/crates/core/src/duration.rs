//! Note values and exact duration arithmetic.
//!
//! All musical time is measured in quarter notes as an exact rational.
//! `<divisions>` only enters when a value is turned into a MusicXML
//! integer duration.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::Zero;
use thiserror::Error;

/// Exact musical time in quarter notes.
pub type Quarters = Ratio<i64>;

/// Written note value, as carried by the MusicXML `<type>` element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoteType {
    Maxima,
    Long,
    Breve,
    Whole,
    Half,
    Quarter,
    Eighth,
    Sixteenth,
    ThirtySecond,
    SixtyFourth,
    OneTwentyEighth,
    TwoFiftySixth,
}

impl NoteType {
    /// Longest first; the decomposition order.
    pub const ALL: [NoteType; 12] = [
        NoteType::Maxima,
        NoteType::Long,
        NoteType::Breve,
        NoteType::Whole,
        NoteType::Half,
        NoteType::Quarter,
        NoteType::Eighth,
        NoteType::Sixteenth,
        NoteType::ThirtySecond,
        NoteType::SixtyFourth,
        NoteType::OneTwentyEighth,
        NoteType::TwoFiftySixth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoteType::Maxima => "maxima",
            NoteType::Long => "long",
            NoteType::Breve => "breve",
            NoteType::Whole => "whole",
            NoteType::Half => "half",
            NoteType::Quarter => "quarter",
            NoteType::Eighth => "eighth",
            NoteType::Sixteenth => "16th",
            NoteType::ThirtySecond => "32nd",
            NoteType::SixtyFourth => "64th",
            NoteType::OneTwentyEighth => "128th",
            NoteType::TwoFiftySixth => "256th",
        }
    }

    /// Value in quarter notes: whole = 4, each further type halves.
    pub fn quarters(self) -> Quarters {
        let idx = self as i32;
        // Maxima is index 0 and worth 32 quarters = 2^5.
        let exp = 5 - idx;
        if exp >= 0 {
            Quarters::from_integer(1 << exp)
        } else {
            Quarters::new(1, 1 << (-exp))
        }
    }

    /// Number of flags/beams a note of this value carries when beamed.
    pub fn flag_count(self) -> u8 {
        match self {
            NoteType::Eighth => 1,
            NoteType::Sixteenth => 2,
            NoteType::ThirtySecond => 3,
            NoteType::SixtyFourth => 4,
            NoteType::OneTwentyEighth => 5,
            NoteType::TwoFiftySixth => 6,
            _ => 0,
        }
    }

    /// Whole notes and longer are drawn without a stem.
    pub fn has_stem(self) -> bool {
        self > NoteType::Whole
    }
}

impl fmt::Display for NoteType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoteType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        NoteType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or(())
    }
}

/// `<time-modification>`: `actual` notes in the time of `normal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeModification {
    pub actual: u32,
    pub normal: u32,
}

impl TimeModification {
    pub fn new(actual: u32, normal: u32) -> Self {
        Self { actual, normal }
    }

    /// Multiplier applied to the written value.
    pub fn factor(self) -> Quarters {
        Quarters::new(i64::from(self.normal), i64::from(self.actual))
    }

    /// The `XinY` token spelling.
    pub fn token(self) -> String {
        format!("{}in{}", self.actual, self.normal)
    }
}

/// Sounding length of a note value with dots and an optional tuplet ratio.
pub fn note_quarters(ty: NoteType, dots: u8, timemod: Option<TimeModification>) -> Quarters {
    let base = ty.quarters();
    // 2 - 2^-dots
    let dot_factor = Quarters::from_integer(2) - Quarters::new(1, 1i64 << dots);
    let mut q = base * dot_factor;
    if let Some(tm) = timemod {
        q *= tm.factor();
    }
    q
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecompositionError {
    #[error("duration must be positive, got {0}")]
    NonPositive(Quarters),
    #[error("duration {0} quarters is not a finite sum of binary note values")]
    NotRepresentable(Quarters),
}

/// Greedy largest-first split of a duration into plain note values.
pub fn decompose_duration(duration: Quarters) -> Result<Vec<NoteType>, DecompositionError> {
    if duration <= Quarters::zero() {
        return Err(DecompositionError::NonPositive(duration));
    }
    let smallest = NoteType::TwoFiftySixth.quarters();
    // Representable iff it is an integer multiple of the smallest value.
    if !(duration / smallest).is_integer() {
        return Err(DecompositionError::NotRepresentable(duration));
    }
    let mut rest = duration;
    let mut out = Vec::new();
    for ty in NoteType::ALL {
        let v = ty.quarters();
        while rest >= v {
            out.push(ty);
            rest -= v;
        }
    }
    debug_assert!(rest.is_zero());
    Ok(out)
}

/// Result of turning note values back into an integer `<duration>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComposedDuration {
    pub value: u32,
    /// False when the exact value was not integral and `value` is the nearest integer.
    pub exact: bool,
}

/// `divisions * sum(quarters(t)) * (2 - 2^-dots) * normal/actual`.
pub fn compose_duration(
    types: &[NoteType],
    timemod: Option<TimeModification>,
    dots: u8,
    divisions: u32,
) -> ComposedDuration {
    let sum: Quarters = types
        .iter()
        .map(|t| note_quarters(*t, dots, timemod))
        .fold(Quarters::zero(), |a, b| a + b);
    to_divisions(sum, divisions)
}

/// Convert quarters to an integer number of divisions, rounding if needed.
pub fn to_divisions(q: Quarters, divisions: u32) -> ComposedDuration {
    let exact = q * Quarters::from_integer(i64::from(divisions));
    if exact.is_integer() {
        ComposedDuration {
            value: exact.to_integer().max(0) as u32,
            exact: true,
        }
    } else {
        ComposedDuration {
            value: exact.round().to_integer().max(0) as u32,
            exact: false,
        }
    }
}

/// Minimal positive divisions-per-quarter making every duration integral.
pub fn minimal_divisions<I: IntoIterator<Item = Quarters>>(durations: I) -> u32 {
    let lcm = durations
        .into_iter()
        .fold(1i64, |acc, q| acc.lcm(q.denom()));
    u32::try_from(lcm).unwrap_or(u32::MAX)
}

/// Quarter value of an integer duration in the given divisions.
pub fn from_divisions(duration: u32, divisions: u32) -> Quarters {
    Quarters::new(i64::from(duration), i64::from(divisions.max(1)))
}

/// Find a written value (with up to two dots) matching a sounding length.
pub fn type_for_duration(
    q: Quarters,
    timemod: Option<TimeModification>,
) -> Option<(NoteType, u8)> {
    for ty in NoteType::ALL {
        for dots in 0..=2u8 {
            if note_quarters(ty, dots, timemod) == q {
                return Some((ty, dots));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Quarters {
        Quarters::new(n, d)
    }

    #[test]
    fn type_values() {
        assert_eq!(NoteType::Whole.quarters(), q(4, 1));
        assert_eq!(NoteType::Maxima.quarters(), q(32, 1));
        assert_eq!(NoteType::Sixteenth.quarters(), q(1, 4));
        assert_eq!(NoteType::TwoFiftySixth.quarters(), q(1, 64));
        assert_eq!("16th".parse::<NoteType>(), Ok(NoteType::Sixteenth));
    }

    #[test]
    fn decompose_examples() {
        assert_eq!(
            decompose_duration(q(3, 2)).unwrap(),
            vec![NoteType::Quarter, NoteType::Eighth]
        );
        assert_eq!(decompose_duration(q(4, 1)).unwrap(), vec![NoteType::Whole]);
        assert!(matches!(
            decompose_duration(q(1, 3)),
            Err(DecompositionError::NotRepresentable(_))
        ));
        assert!(decompose_duration(q(0, 1)).is_err());
    }

    #[test]
    fn decompose_sums_exactly_for_sixteenths() {
        for k in 1..=128 {
            let d = q(k, 16);
            let parts = decompose_duration(d).unwrap();
            let sum = parts.iter().fold(Quarters::zero(), |a, t| a + t.quarters());
            assert_eq!(sum, d, "k = {k}");
            // greedy output is non-increasing and uses each value below the largest at most once
            assert!(parts.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn compose_examples() {
        let c = compose_duration(&[NoteType::Quarter], None, 1, 4);
        assert_eq!(c, ComposedDuration { value: 6, exact: true });
        let c = compose_duration(&[NoteType::Eighth], Some(TimeModification::new(6, 4)), 0, 6);
        assert_eq!(c, ComposedDuration { value: 2, exact: true });
        let c = compose_duration(&[NoteType::Eighth], Some(TimeModification::new(3, 2)), 0, 1);
        assert!(!c.exact);
        assert_eq!(c.value, 0);
    }

    #[test]
    fn minimal_divisions_is_lcm() {
        assert_eq!(minimal_divisions([q(1, 3), q(1, 2), q(1, 1)]), 6);
        assert_eq!(minimal_divisions(Vec::<Quarters>::new()), 1);
    }

    #[test]
    fn type_lookup() {
        assert_eq!(type_for_duration(q(3, 2), None), Some((NoteType::Quarter, 1)));
        assert_eq!(
            type_for_duration(q(1, 3), Some(TimeModification::new(3, 2))),
            Some((NoteType::Eighth, 0))
        );
    }
}
