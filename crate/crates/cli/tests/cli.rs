use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lmx_cli::report::EvalReport;
use lmx_core::augment::RasterImage;
use lmx_core::score::serialize_musicxml;
use tempfile::TempDir;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/nocturne.musicxml");

fn lmx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmx"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("LMX_COST_MODEL")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A directory with `n` generated single-part scores.
fn synth_corpus(dir: &Path, n: u64) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    (0..n)
        .map(|seed| {
            let p = dir.join(format!("s{seed:02}.musicxml"));
            std::fs::write(&p, serialize_musicxml(&lmx_core::synth::generate(seed)).unwrap()).unwrap();
            p
        })
        .collect()
}

#[test]
fn linearize_single_file_prints_one_measure_per_line() {
    let o = lmx(&["linearize", FIXTURE]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.starts_with("measure ")));
    assert!(stderr(&o).contains("not encoded"));
}

#[test]
fn malformed_file_is_reported_and_others_are_written() {
    let t = TempDir::new().unwrap();
    let src = t.path().join("in");
    synth_corpus(&src, 2);
    std::fs::write(src.join("broken.musicxml"), "<score-partwise><part").unwrap();
    let out = t.path().join("out");
    let o = lmx(&["linearize", s(&src), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("broken.musicxml"), "{}", stderr(&o));
    let mut written: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    written.sort();
    assert_eq!(written, ["s00.lmx", "s01.lmx"]);
}

#[test]
fn several_inputs_need_an_output_directory() {
    let t = TempDir::new().unwrap();
    synth_corpus(t.path(), 2);
    let o = lmx(&["linearize", s(t.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn linearize_delinearize_linearize_is_stable_on_disk() {
    let t = TempDir::new().unwrap();
    let src = t.path().join("src");
    synth_corpus(&src, 5);
    let (a, x, b) = (t.path().join("a"), t.path().join("x"), t.path().join("b"));
    assert!(lmx(&["linearize", s(&src), "-o", s(&a)]).status.success());
    assert!(lmx(&["delinearize", s(&a), "-o", s(&x)]).status.success());
    assert!(lmx(&["linearize", s(&x), "-o", s(&b)]).status.success());
    for i in 0..5 {
        let name = format!("s{i:02}.lmx");
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn canonicalize_is_idempotent() {
    let t = TempDir::new().unwrap();
    let (a, b) = (t.path().join("a.musicxml"), t.path().join("b.musicxml"));
    assert!(lmx(&["canonicalize", FIXTURE, "-o", s(&a)]).status.success());
    assert!(lmx(&["canonicalize", s(&a), "-o", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn delinearize_accepts_garbage() {
    let t = TempDir::new().unwrap();
    let f = t.path().join("junk.lmx");
    std::fs::write(&f, "measure voice:1 C9 quarter beam:end ??? chord\nmeasure tuplet:stop").unwrap();
    let o = lmx(&["delinearize", s(&f)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("<score-partwise"));
    assert!(stderr(&o).contains("warning"));
}

fn eval_setup(t: &TempDir) -> (PathBuf, PathBuf) {
    let gold = t.path().join("gold");
    let pred = t.path().join("pred");
    synth_corpus(&gold, 6);
    assert!(lmx(&["linearize", s(&gold), "-o", s(&pred)]).status.success());
    (gold, pred)
}

#[test]
fn evaluating_gold_against_itself_scores_zero() {
    let t = TempDir::new().unwrap();
    let (gold, pred) = eval_setup(&t);
    let o = lmx(&["evaluate", "--gold", s(&gold), "--pred", s(&pred)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = EvalReport::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(r.per_sample.len(), 6);
    let a = &r.aggregates;
    for v in [a.ser_micro, a.ser_macro, a.cer_micro, a.cer_macro, a.ler, a.tedn_lmx_mean] {
        assert_eq!(v, Some(0.0));
    }
    assert!(r.per_sample.iter().all(|row| row.exact_match));
}

#[test]
fn json_and_tsv_carry_identical_numbers() {
    let t = TempDir::new().unwrap();
    let (gold, pred) = eval_setup(&t);
    // perturb one prediction so nonzero values are compared too
    let p = pred.join("s03.lmx");
    let text = std::fs::read_to_string(&p).unwrap().replacen("quarter", "half", 3);
    std::fs::write(&p, text).unwrap();
    let j = lmx(&["evaluate", "--gold", s(&gold), "--pred", s(&pred), "--format", "json"]);
    let v = lmx(&["evaluate", "--gold", s(&gold), "--pred", s(&pred), "--format", "tsv"]);
    let j = EvalReport::from_json(&String::from_utf8(j.stdout).unwrap()).unwrap();
    let v = EvalReport::from_tsv(&String::from_utf8(v.stdout).unwrap()).unwrap();
    assert_eq!(j, v);
    assert!(j.aggregates.ler.unwrap() > 0.0);
}

#[test]
fn missing_predictions_are_listed() {
    let t = TempDir::new().unwrap();
    let (gold, _) = eval_setup(&t);
    let empty = t.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = lmx(&["evaluate", "--gold", s(&gold), "--pred", s(&empty)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for i in 0..6 {
        assert!(err.contains(&format!("s{i:02}")), "{err}");
    }
    let o = lmx(&["evaluate", "--gold", s(&gold), "--pred", s(&empty), "--allow-missing"]);
    assert!(o.status.success());
    let r = EvalReport::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(r.missing.len(), 6);
}

#[test]
fn report_does_not_depend_on_thread_count() {
    let t = TempDir::new().unwrap();
    let (gold, pred) = eval_setup(&t);
    let one = lmx(&["evaluate", "--gold", s(&gold), "--pred", s(&pred), "--jobs", "1"]);
    let four = lmx(&["evaluate", "--gold", s(&gold), "--pred", s(&pred), "--jobs", "4"]);
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn unknown_metric_is_an_input_error() {
    let t = TempDir::new().unwrap();
    let (gold, pred) = eval_setup(&t);
    let o = lmx(&["evaluate", "--gold", s(&gold), "--pred", s(&pred), "--metrics", "bleu"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bleu"));
}

#[test]
fn roundtrip_synthetic_is_fully_stable() {
    let o = lmx(&["roundtrip", "--synthetic", "30", "--seed", "100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["summary"]["files"], 30);
    assert_eq!(v["summary"]["token_stability_percent"], 100.0);
    assert_eq!(v["summary"]["tedn_lmx_zero_percent"], 100.0);
    assert_eq!(v["summary"]["tokens_outside_vocabulary"].as_array().unwrap().len(), 0);
}

#[test]
fn roundtrip_fixture_accounts_discarded_structure() {
    let o = lmx(&["roundtrip", FIXTURE]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let f = &v["files"][0];
    assert_eq!(f["tedn_lmx"], 0.0);
    assert!(f["discarded_nodes"].as_u64().unwrap() > 0);
    assert!(v["summary"]["discarded_node_percent"].as_f64().unwrap() > 0.0);
}

#[test]
fn vocab_formats_agree() {
    let txt = String::from_utf8(lmx(&["vocab"]).stdout).unwrap();
    let tokens: Vec<_> = txt.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(tokens.len(), lmx_core::lmx::vocabulary().len());
    let json: serde_json::Value = serde_json::from_slice(&lmx(&["vocab", "--format", "json"]).stdout).unwrap();
    let jt: Vec<_> = json["tokens"].as_array().unwrap().iter().map(|t| t["token"].as_str().unwrap().to_string()).collect();
    assert_eq!(jt, tokens);
    let tsv = String::from_utf8(lmx(&["vocab", "--format", "tsv"]).stdout).unwrap();
    assert_eq!(tsv.lines().count(), tokens.len() + 1);
}

fn score_image(path: &Path) {
    let pixels = (0..48 * 24)
        .map(|i| {
            let (x, y) = (i % 48, i / 48);
            if y % 6 == 0 || (x % 13 == 0 && y > 5) { 0.0 } else { 1.0 }
        })
        .collect();
    let img = RasterImage::new(48, 24, pixels).unwrap();
    img.save_png(path).unwrap();
}

#[test]
fn augment_is_reproducible_and_per_file() {
    let t = TempDir::new().unwrap();
    let src = t.path().join("src");
    std::fs::create_dir(&src).unwrap();
    score_image(&src.join("a.png"));
    score_image(&src.join("b.png"));
    let run = |out: &str, jobs: &str| {
        let dst = t.path().join(out);
        let o = lmx(&["augment", s(&src), "-o", s(&dst), "--seed", "7", "--apply-probability", "1", "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
        (std::fs::read(dst.join("a.png")).unwrap(), std::fs::read(dst.join("b.png")).unwrap())
    };
    let (a1, b1) = run("o1", "1");
    let (a2, b2) = run("o2", "3");
    assert_eq!((&a1, &b1), (&a2, &b2));
    assert_ne!(a1, b1, "identical inputs get different per-file streams");
}

#[test]
fn augment_trace_lists_enabled_ops_only() {
    let t = TempDir::new().unwrap();
    let f = t.path().join("p.png");
    score_image(&f);
    let o = lmx(&[
        "augment", s(&f), "-o", s(&t.path().join("o")), "--apply-probability", "1", "--trace", "--disable", "rotate,negate",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let ops: Vec<_> = out.lines().map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(ops, ["h-shift", "v-shift", "morph", "edge-noise", "contrast", "brightness"]);
    let bad = lmx(&["augment", s(&f), "-o", s(&t.path().join("o")), "--disable", "blur"]);
    assert_eq!(bad.status.code(), Some(2));
}
