//! Acceptance suite. Runs each criterion in sequence on one thread and prints
//! a PASS/FAIL line per criterion; exits non-zero if any criterion fails.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use common::{brute_edit_distance, corrupt, random_tree, synth_tokens, ted_oracle, Skewed, Unit};
use lmx_core::augment::{augment, augment_traced, AugmentConfig, Op, RasterImage};
use lmx_core::canonical::canonicalize;
use lmx_core::duration::{compose_duration, decompose_duration, Quarters};
use lmx_core::lmx::{delinearize, linearize, lmx_scope, TokenSequence, WarningKind};
use lmx_core::metrics::{cer, ser};
use lmx_core::score::validate::validate_musicxml;
use lmx_core::score::{read_score_file, serialize_musicxml, MusicElement, ScoreDocument, SkipLog};
use lmx_core::treedist::{tedn, zhang_shasha, LabeledTree, TednCosts, TednMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
            PEAK.fetch_max(now, Ordering::SeqCst);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::SeqCst);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

/// Bytes allocated above the starting level while `f` runs.
fn peak_during<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let base = CURRENT.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    let out = f();
    (out, PEAK.load(Ordering::SeqCst) - base)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(name: &str, results: &mut Vec<bool>, f: impl FnOnce() -> Outcome) {
    let t = Instant::now();
    let out = f();
    println!(
        "{} {name}: {} [{:.1} s]",
        if out.pass { "PASS" } else { "FAIL" },
        out.detail,
        t.elapsed().as_secs_f64()
    );
    results.push(out.pass);
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/nocturne.musicxml")
}

fn is_pianoform(doc: &ScoreDocument) -> bool {
    doc.parts.len() == 1
        && doc.parts[0].measures.iter().flat_map(|m| &m.elements).any(|e| {
            matches!(e, MusicElement::Attributes(a) if a.staves == Some(2))
        })
}

#[derive(Default)]
struct Features {
    tuplets: usize,
    ties: usize,
    grace: usize,
    cross_staff: usize,
    max_voices_per_staff: usize,
}

fn features(doc: &ScoreDocument, f: &mut Features) {
    for m in &doc.parts[0].measures {
        let mut voices = [std::collections::BTreeSet::new(), std::collections::BTreeSet::new()];
        for n in m.elements.iter().filter_map(MusicElement::as_note) {
            f.tuplets += usize::from(n.tuplet_start);
            f.ties += usize::from(n.tied_start);
            f.grace += usize::from(n.grace);
            let home = if n.voice >= 5 { 2 } else { 1 };
            f.cross_staff += usize::from(n.staff != home);
            voices[usize::from(home - 1)].insert(n.voice);
        }
        f.max_voices_per_staff = f.max_voices_per_staff.max(voices[0].len()).max(voices[1].len());
    }
}

fn round_trip() -> Outcome {
    let t = Instant::now();
    let costs = TednCosts::default();
    let (mut docs, mut stable, mut zero) = (0, 0, 0);
    let mut feats = Features::default();
    let mut failures = Vec::new();
    let mut seed = 0u64;
    while docs < 500 {
        let doc = lmx_core::synth::generate(seed);
        seed += 1;
        if !is_pianoform(&doc) {
            continue;
        }
        docs += 1;
        features(&doc, &mut feats);
        let (c, _) = canonicalize(&doc).expect("generated documents canonicalize");
        let seq = linearize(&lmx_scope(&c).expect("scope")).expect("linearize");
        let (back, warnings) = delinearize(&seq);
        let clean = warnings.iter().all(|w| w.kind == WarningKind::UnterminatedConstruct);
        if clean && linearize(&back).map(|s| s.tokens == seq.tokens).unwrap_or(false) {
            stable += 1;
        } else {
            failures.push(seed - 1);
        }
        if tedn(&back, &doc, TednMode::Lmx, &costs).map(|r| r.percent() == 0.0).unwrap_or(false) {
            zero += 1;
        } else {
            failures.push(seed - 1);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let covered = feats.tuplets > 0 && feats.ties > 0 && feats.grace > 0 && feats.cross_staff > 0 && feats.max_voices_per_staff == 4;
    failures.dedup();
    Outcome {
        pass: stable == docs && zero == docs && secs < 120.0 && covered,
        detail: format!(
            "{docs} two-staff documents; token-stable {stable}/{docs}, TEDn-lmx = 0 {zero}/{docs}; \
             corpus has {} tuplets, {} ties, {} grace, {} cross-staff notes, up to {} voices/staff; \
             {secs:.1} s (limit 120 s){}",
            feats.tuplets,
            feats.ties,
            feats.grace,
            feats.cross_staff,
            feats.max_voices_per_staff,
            if failures.is_empty() { String::new() } else { format!("; failing seeds {:?}", &failures[..failures.len().min(10)]) }
        ),
    }
}

fn ted_oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ED);
    let mut agree = 0;
    let pairs = 1000;
    for _ in 0..pairs {
        let (n, m) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let (a, b) = (random_tree(&mut rng, n, 4), random_tree(&mut rng, m, 4));
        let (ta, tb) = (LabeledTree::from_root(a.clone()), LabeledTree::from_root(b.clone()));
        if zhang_shasha(&ta, &tb, &Unit) == ted_oracle(&a, &b, &Unit)
            && zhang_shasha(&ta, &tb, &Skewed) == ted_oracle(&a, &b, &Skewed)
        {
            agree += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        pass: agree == pairs && secs < 60.0,
        detail: format!("{agree}/{pairs} pairs of <= 8 nodes agree under unit and skewed costs; {secs:.1} s (limit 60 s)"),
    }
}

fn tedn_endpoints() -> Outcome {
    let costs = TednCosts::default();
    let mut docs = vec![read_score_file(&fixture()).expect("fixture parses").0];
    docs.extend((0..20).map(lmx_core::synth::generate));
    let mut bad = Vec::new();
    for (i, g) in docs.iter().enumerate() {
        for mode in [TednMode::Full, TednMode::Lmx] {
            let same = tedn(g, g, mode, &costs).map(|r| r.percent());
            let empty = tedn(&ScoreDocument::empty(), g, mode, &costs).map(|r| r.percent());
            if !matches!(same, Ok(p) if p == 0.0) || !matches!(empty, Ok(p) if p == 100.0) {
                bad.push(format!("doc {i} {mode:?}: identical {same:?}, empty {empty:?}"));
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} documents x 2 modes: identical = 0.00%, empty prediction = 100.00%", docs.len())
        } else {
            bad.join("; ")
        },
    }
}

fn seq_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E2);
    let alphabet = ["measure", "C4", "quarter", "eighth", "beam:begin", "chord"];
    let chars = ['a', 'b', 'c', ' ', ':'];
    let pairs = 1000;
    let (mut ser_ok, mut cer_ok) = (0, 0);
    for _ in 0..pairs {
        let toks = |rng: &mut ChaCha8Rng, lo: usize| -> Vec<String> {
            let n = rng.gen_range(lo..=12);
            (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string()).collect()
        };
        let (p, g) = (toks(&mut rng, 0), toks(&mut rng, 1));
        let r = ser(&TokenSequence::new(p.clone()), &TokenSequence::new(g.clone())).unwrap();
        let d = brute_edit_distance(&p, &g);
        if r.edit_distance == d && r.rate_percent == 100.0 * d as f64 / g.len() as f64 {
            ser_ok += 1;
        }
        let text = |rng: &mut ChaCha8Rng, lo: usize| -> String {
            let n = rng.gen_range(lo..=12);
            (0..n).map(|_| chars[rng.gen_range(0..chars.len())]).collect()
        };
        let (p, g) = (text(&mut rng, 0), text(&mut rng, 1));
        let pc: Vec<char> = p.chars().collect();
        let gc: Vec<char> = g.chars().collect();
        if cer(&p, &g).unwrap().edit_distance == brute_edit_distance(&pc, &gc) {
            cer_ok += 1;
        }
    }
    Outcome {
        pass: ser_ok == pairs && cer_ok == pairs,
        detail: format!("SER {ser_ok}/{pairs}, CER {cer_ok}/{pairs} pairs of length <= 12 match alignment enumeration"),
    }
}

fn fuzzing() -> Outcome {
    let cases = 10_000;
    let base: Vec<TokenSequence> = (0..100).map(synth_tokens).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let (mut crashes, mut invalid) = (0, 0);
    let mut first_problem = None;
    let prev_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for i in 0..cases {
        let edits = rng.gen_range(1..=30);
        let seq = corrupt(&base[i % base.len()], &mut rng, edits);
        let outcome = std::panic::catch_unwind(|| {
            let (doc, _) = delinearize(&seq);
            serialize_musicxml(&doc).map_err(|e| e.to_string()).and_then(|b| validate_musicxml(&b).map_err(|e| e.join("; ")))
        });
        match outcome {
            Err(_) => {
                crashes += 1;
                first_problem.get_or_insert(format!("case {i} panicked"));
            }
            Ok(Err(e)) => {
                invalid += 1;
                first_problem.get_or_insert(format!("case {i}: {e}"));
            }
            Ok(Ok(())) => {}
        }
    }
    std::panic::set_hook(prev_hook);
    Outcome {
        pass: crashes == 0 && invalid == 0,
        detail: format!(
            "{cases} corrupted sequences: {crashes} crashes, {} / {cases} valid MusicXML{}",
            cases - invalid - crashes,
            first_problem.map(|p| format!(" (first: {p})")).unwrap_or_default()
        ),
    }
}

fn duration_algebra() -> Outcome {
    let (mut checked, mut bad) = (0, Vec::new());
    for k in 1..=128i64 {
        let q = Quarters::new(k, 16);
        let types = decompose_duration(q).expect("k/16 decomposes");
        for div in 1..=48u32 {
            if (k * i64::from(div)) % 16 != 0 {
                continue;
            }
            checked += 1;
            let c = compose_duration(&types, None, 0, div);
            if !c.exact || i64::from(c.value) != k * i64::from(div) / 16 {
                bad.push(format!("{k}/16 at {div}"));
            }
        }
    }
    Outcome {
        pass: bad.is_empty() && checked > 0,
        detail: format!("{} / {checked} (duration, divisions) pairs compose back exactly{}", checked - bad.len(), if bad.is_empty() { String::new() } else { format!("; failing {:?}", &bad[..bad.len().min(5)]) }),
    }
}

fn augmentation() -> Outcome {
    let img = {
        let (w, h) = (32u32, 16u32);
        let px = (0..w * h).map(|i| if (i / w) % 5 == 2 || i % 11 == 0 { 0.0 } else { 1.0 }).collect();
        RasterImage::new(w, h, px).unwrap()
    };
    let cfg = AugmentConfig::default();
    let trials = 10_000u64;
    let mut counts = [0u64; 8];
    for seed in 0..trials {
        for a in augment_traced(&img, &cfg, seed).1 {
            counts[a.op().index()] += 1;
        }
    }
    let rates: Vec<f64> = counts.iter().map(|c| 100.0 * *c as f64 / trials as f64).collect();
    let rates_ok = rates.iter().all(|r| (r - 50.0).abs() <= 3.0);
    let identity = (0..200).all(|s| augment(&img, &AugmentConfig::disabled(), s) == img);
    let deterministic = (0..200).all(|s| augment(&img, &cfg, s).hash() == augment(&img, &cfg, s).hash());
    let summary: Vec<String> = Op::ALL.iter().zip(&rates).map(|(o, r)| format!("{} {r:.2}%", o.name())).collect();
    Outcome {
        pass: rates_ok && identity && deterministic,
        detail: format!(
            "rates over {trials} trials: {} (50 +/- 3); all-disabled identity: {identity}; same seed bit-identical: {deterministic}",
            summary.join(", ")
        ),
    }
}

fn zs_memory() -> Outcome {
    // Two tables of one cost each per cell, with 2x slack for bookkeeping.
    let c = 4 * std::mem::size_of::<u32>();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA110C);
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for n in [10usize, 20, 50, 100, 200, 350, 500] {
        let a = LabeledTree::from_root(random_tree(&mut rng, n, 5));
        let b = LabeledTree::from_root(random_tree(&mut rng, n, 5));
        let (_, peak) = peak_during(|| zhang_shasha(&a, &b, &Unit));
        let per_cell = peak as f64 / (n * n) as f64;
        worst = worst.max(per_cell);
        rows.push(format!("{n}: {per_cell:.2}"));
    }
    Outcome {
        pass: worst <= c as f64,
        detail: format!("peak bytes per m*n cell by size [{}]; max {worst:.2} <= c = {c}", rows.join(", ")),
    }
}

fn score_files(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = std::fs::read_dir(dir) else { return };
    let mut entries: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            score_files(&p, out);
        } else if matches!(p.extension().and_then(|e| e.to_str()), Some("musicxml" | "xml" | "mxl")) {
            out.push(p);
        }
    }
}

fn scope_accounting() -> Outcome {
    let (label, files) = match std::env::var_os("LMX_CORPUS") {
        Some(dir) => {
            let mut v = Vec::new();
            score_files(Path::new(&dir), &mut v);
            (format!("corpus {}", Path::new(&dir).display()), v)
        }
        None => ("bundled fixture (set LMX_CORPUS for a real corpus)".to_string(), vec![fixture()]),
    };
    let mut total = SkipLog::default();
    let mut failed = 0;
    for f in &files {
        match read_score_file(f) {
            Ok((_, log)) => total.merge(&log),
            Err(_) => failed += 1,
        }
    }
    let discarded = total.skipped_total() + total.retained_total();
    let frac = 100.0 * discarded as f64 / total.source_total().max(1) as f64;
    Outcome {
        pass: files.len() > failed,
        detail: format!(
            "informational, {label}: {} files ({failed} unreadable), {discarded} of {} element nodes outside LMX = {frac:.2}% (reference point about 4%)",
            files.len(),
            total.source_total()
        ),
    }
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a filter argument skips the suite.
    if std::env::args().skip(1).any(|a| !a.starts_with('-')) {
        return;
    }
    let mut results = Vec::new();
    let start = Instant::now();
    check("round-trip stability", &mut results, round_trip);
    check("TED oracle equivalence", &mut results, ted_oracle_equivalence);
    check("TEDn endpoints", &mut results, tedn_endpoints);
    check("SER/CER oracle equivalence", &mut results, seq_oracle_equivalence);
    check("robustness fuzzing", &mut results, fuzzing);
    check("duration algebra", &mut results, duration_algebra);
    check("augmentation statistics", &mut results, augmentation);
    check("Zhang-Shasha memory", &mut results, zs_memory);
    check("scope accounting", &mut results, scope_accounting);
    let passed = results.iter().filter(|p| **p).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.1} s",
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if passed != results.len() {
        std::process::exit(1);
    }
}
