mod common;

use std::path::Path;

use common::{corrupt, synth_tokens};
use lmx_core::canonical::canonicalize_logged;
use lmx_core::lmx::{delinearize, linearize, linearize_with_stats, lmx_scope, vocabulary, TokenSequence, WarningKind};
use lmx_core::score::validate::validate_musicxml;
use lmx_core::score::{read_score_file, serialize_musicxml};
use lmx_core::treedist::{tedn, TednCosts, TednMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/nocturne.musicxml")
}

#[test]
fn fixture_linearizes() {
    let (doc, log) = read_score_file(&fixture()).unwrap();
    let (c, report) = canonicalize_logged(&doc, &log).unwrap();
    assert!(report.retained_out_of_scope.contains_key("direction"));
    let (seq, stats) = linearize_with_stats(&c).unwrap();
    assert!(stats.skipped_nodes > 0);
    let text = seq.to_lmx();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, FIXTURE_LMX);
}

const FIXTURE_LMX: &[&str] = &[
    "measure key:fifths:1 time:4/4 clef:G2 staff:1 clef:F4 staff:2 voice:1 C5 quarter stem:down staff:1 slur:start \
     D5 eighth beam:begin E5 eighth beam:end slur:stop F5 half tied:start backup whole voice:5 G3 whole staff:2 chord C3 whole",
    "measure voice:1 F5 quarter stem:down staff:1 tied:stop E5 eighth 3in2 beam:begin tuplet:start F5 eighth 3in2 \
     G5 eighth 3in2 beam:end tuplet:stop staccato rest half backup whole voice:5 rest:measure whole staff:2",
];

#[test]
fn fixture_round_trip_drops_only_out_of_scope() {
    let (doc, log) = read_score_file(&fixture()).unwrap();
    let (c, _) = canonicalize_logged(&doc, &log).unwrap();
    let seq = linearize(&c).unwrap();
    let (back, warnings) = delinearize(&seq);
    assert!(warnings.is_empty(), "{warnings:?}");
    assert_eq!(linearize(&back).unwrap().tokens, seq.tokens);
    let costs = TednCosts::default();
    assert_eq!(tedn(&back, &doc, TednMode::Lmx, &costs).unwrap().percent(), 0.0);
    let full = tedn(&back, &doc, TednMode::Full, &costs).unwrap().percent();
    assert!(full > 0.0, "directions are outside LMX, full TEDn must see them");
    let discarded = log.skipped_total() + log.retained_total();
    assert!(discarded > 0 && discarded < log.source_total());
}

#[test]
fn emitted_tokens_are_in_vocabulary() {
    let v = vocabulary();
    for seed in 0..200 {
        for t in synth_tokens(seed).iter() {
            assert!(v.contains(t), "seed {seed}: {t} not in vocabulary");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn relinearization_is_stable(seed in any::<u64>()) {
        let seq = synth_tokens(seed);
        let (back, warnings) = delinearize(&seq);
        prop_assert!(warnings.iter().all(|w| w.kind == WarningKind::UnterminatedConstruct), "{:?}", warnings);
        prop_assert_eq!(linearize(&back).unwrap().tokens, seq.tokens);
    }

    #[test]
    fn lmx_tedn_is_zero_after_round_trip(seed in 0u64..10_000) {
        let doc = lmx_core::synth::generate(seed);
        let (c, _) = lmx_core::canonical::canonicalize(&doc).unwrap();
        let (back, _) = delinearize(&linearize(&lmx_scope(&c).unwrap()).unwrap());
        let r = tedn(&back, &doc, TednMode::Lmx, &TednCosts::default()).unwrap();
        prop_assert_eq!(r.percent(), 0.0);
        prop_assert!(r.warnings.is_empty());
    }

    #[test]
    fn delinearize_is_total(seed in any::<u64>(), edits in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = corrupt(&synth_tokens(seed % 1000), &mut rng, edits);
        let (doc, warnings) = delinearize(&seq);
        let bytes = serialize_musicxml(&doc).unwrap();
        prop_assert!(validate_musicxml(&bytes).is_ok(), "{:?}", validate_musicxml(&bytes));
        prop_assert!(warnings.iter().all(|w| w.token_index <= seq.len()));
    }

    #[test]
    fn arbitrary_strings_are_total(tokens in prop::collection::vec("\\PC{0,12}", 0..60)) {
        let (doc, _) = delinearize(&TokenSequence::new(tokens));
        let bytes = serialize_musicxml(&doc).unwrap();
        prop_assert!(validate_musicxml(&bytes).is_ok());
    }
}
