mod common;

use std::collections::BTreeMap;

use common::{brute_edit_distance, char_dp};
use lmx_core::lmx::TokenSequence;
use lmx_core::metrics::{aggregate, cer, ler, levenshtein, ser};
use proptest::prelude::*;

fn tokens() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["measure", "C4", "quarter", "eighth", "beam", "chord"]), 0..=12)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn nonempty() -> impl Strategy<Value = Vec<String>> {
    tokens().prop_filter("gold must be non-empty", |v| !v.is_empty())
}

proptest! {
    #[test]
    fn ser_matches_alignment_enumeration(p in tokens(), g in nonempty()) {
        let r = ser(&TokenSequence::new(p.clone()), &TokenSequence::new(g.clone())).unwrap();
        let d = brute_edit_distance(&p, &g);
        prop_assert_eq!(r.edit_distance, d);
        prop_assert_eq!(r.reference_length, g.len());
        prop_assert_eq!(r.exact_match, d == 0);
        prop_assert!((r.rate_percent - 100.0 * d as f64 / g.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn cer_matches_char_dp(p in "[ ab:0-9]{0,30}", g in "[ ab:0-9]{1,30}") {
        prop_assert_eq!(cer(&p, &g).unwrap().edit_distance, char_dp(&p, &g));
    }

    #[test]
    fn edit_distance_is_a_metric(a in tokens(), b in tokens(), c in tokens()) {
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        prop_assert_eq!(levenshtein(&a, &b) == 0, a == b);
    }

    #[test]
    fn ser_ignores_whitespace_layout(p in tokens(), g in nonempty(), seps in prop::collection::vec("[ \t\n]{1,3}", 13)) {
        let messy: String = p.iter().zip(&seps).map(|(t, s)| format!("{s}{t}")).collect();
        let a = ser(&TokenSequence::parse(&messy), &TokenSequence::new(g.clone())).unwrap();
        let b = ser(&TokenSequence::new(p), &TokenSequence::new(g)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ler_zero_iff_corpus_ser_zero(rows in prop::collection::vec((tokens(), nonempty(), any::<bool>()), 1..8)) {
        let mut pred = BTreeMap::new();
        let mut gold = BTreeMap::new();
        let mut results = Vec::new();
        for (i, (p, g, copy)) in rows.into_iter().enumerate() {
            let p = if copy { g.clone() } else { p };
            let (p, g) = (TokenSequence::new(p), TokenSequence::new(g));
            results.push(ser(&p, &g).unwrap());
            pred.insert(i, p);
            gold.insert(i, g);
        }
        let l = ler(&pred, &gold).unwrap();
        let agg = aggregate(&results).unwrap();
        prop_assert_eq!(l == 0.0, agg.micro == 0.0);
        prop_assert_eq!(l == 0.0, agg.macro_ == 0.0);
    }
}
