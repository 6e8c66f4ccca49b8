use lmx_core::duration::{
    compose_duration, decompose_duration, minimal_divisions, note_quarters, to_divisions, type_for_duration, NoteType,
    Quarters, TimeModification,
};
use proptest::prelude::*;

fn note_type() -> impl Strategy<Value = NoteType> {
    prop::sample::select(NoteType::ALL.to_vec())
}

fn timemod() -> impl Strategy<Value = Option<TimeModification>> {
    prop::option::of((2u32..10, 1u32..9).prop_map(|(a, n)| TimeModification::new(a, n)))
}

proptest! {
    #[test]
    fn decomposition_sums_back(n in 1i64..100_000) {
        let q = Quarters::new(n, 64);
        let parts = decompose_duration(q).unwrap();
        let sum = parts.iter().fold(Quarters::from_integer(0), |s, t| s + t.quarters());
        prop_assert_eq!(sum, q);
        // Greedy split: strictly non-increasing and no value repeated except the longest.
        prop_assert!(parts.windows(2).all(|w| w[0].quarters() >= w[1].quarters()));
        let longest = parts[0];
        prop_assert!(parts.windows(2).all(|w| w[0] != w[1] || w[0] == longest));
        let c = compose_duration(&parts, None, 0, 64);
        prop_assert_eq!((c.value, c.exact), (n as u32, true));
    }

    #[test]
    fn unrepresentable_rejected(n in 1i64..1000, d in prop::sample::select(vec![3i64, 5, 7, 12, 385])) {
        let q = Quarters::new(n, d * 256);
        prop_assume!(!(q * Quarters::from_integer(256)).is_integer());
        prop_assert!(decompose_duration(q).is_err());
    }

    #[test]
    fn written_value_recovered(ty in note_type(), dots in 0u8..=2, tm in timemod()) {
        let q = note_quarters(ty, dots, tm);
        let (t, d) = type_for_duration(q, tm).unwrap();
        prop_assert_eq!(note_quarters(t, d, tm), q);
    }

    #[test]
    fn minimal_divisions_is_minimal(ds in prop::collection::vec((note_type(), 0u8..=2, timemod()), 1..8)) {
        let qs: Vec<Quarters> = ds.iter().map(|(t, d, m)| note_quarters(*t, *d, *m)).collect();
        let div = minimal_divisions(qs.iter().copied());
        prop_assert!(qs.iter().all(|q| to_divisions(*q, div).exact));
        for smaller in 1..div.min(2000) {
            prop_assert!(!qs.iter().all(|q| to_divisions(*q, smaller).exact));
        }
    }
}

#[test]
fn triplet_quarter_and_half() {
    let q = note_quarters(NoteType::Quarter, 0, Some(TimeModification::new(3, 2)));
    assert_eq!(minimal_divisions([q, NoteType::Half.quarters()]), 3);
    assert_eq!(compose_duration(&[NoteType::Quarter], Some(TimeModification::new(3, 2)), 0, 3).value, 2);
    let c = compose_duration(&[NoteType::Eighth], Some(TimeModification::new(3, 2)), 0, 2);
    assert_eq!((c.value, c.exact), (1, false));
}
