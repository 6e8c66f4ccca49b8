use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lmx_cli::audit::{audit_document, AuditReport};
use lmx_cli::eval::{pair_dirs, score_pair, EvalOptions, Metric};
use lmx_cli::inputs::{expand, load_score, stem, SCORE_EXTENSIONS};
use lmx_cli::report::{EvalReport, Metadata};
use lmx_core::augment::{augment_traced, derive_seed, AugmentConfig, Op, RasterImage};
use lmx_core::canonical::canonicalize_logged;
use lmx_core::lmx::{delinearize, linearize_with_stats, vocabulary, TokenSequence, VOCABULARY_VERSION};
use lmx_core::score::{parse_musicxml_with_log, serialize_musicxml};
use lmx_core::treedist::TednCosts;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "lmx", version, about = "Linearized MusicXML toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// MusicXML to LMX token files, one measure per line.
    Linearize(LinearizeArgs),
    /// LMX token files back to MusicXML; always produces a document.
    Delinearize(ConvertArgs),
    /// Rewrite MusicXML in canonical form.
    Canonicalize(LinearizeArgs),
    /// Score predictions against gold files paired by file stem.
    Evaluate(EvaluateArgs),
    /// Apply the scan-simulation augmentation to grayscale images.
    Augment(AugmentArgs),
    /// Audit canonicalize, linearize, delinearize round trips over a corpus.
    Roundtrip(RoundtripArgs),
    /// Print the token vocabulary.
    Vocab(VocabArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Files or directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output file (single input) or directory; stdout when omitted for a single input.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LinearizeArgs {
    #[command(flatten)]
    io: ConvertArgs,
    /// Part id to use when a score has several parts.
    #[arg(long)]
    part: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Comma-separated: tedn, tedn-lmx, ser, cer, ler.
    #[arg(long, default_value = "tedn,tedn-lmx,ser,cer,ler")]
    metrics: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Report file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Exclude gold files without a prediction instead of failing.
    #[arg(long)]
    allow_missing: bool,
    #[arg(long)]
    part: Option<String>,
    /// TEDn cost-model file; defaults to $LMX_COST_MODEL, then built-in costs.
    #[arg(long)]
    cost_model: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// Operations to disable, comma-separated (h-shift, rotate, v-shift, morph, edge-noise, negate, contrast, brightness).
    #[arg(long, value_delimiter = ',')]
    disable: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    apply_probability: f64,
    #[arg(long, default_value_t = 8.0)]
    h_shift_max: f64,
    #[arg(long, default_value_t = 1.0)]
    rot_max_degrees: f64,
    #[arg(long, default_value_t = 4.0)]
    v_shift_max: f64,
    #[arg(long, default_value_t = 1.0)]
    morph_x: f64,
    #[arg(long, default_value_t = 0.5)]
    morph_y: f64,
    #[arg(long, default_value_t = 0.20)]
    edge_noise_p_max: f64,
    #[arg(long, default_value_t = 0.01)]
    negate_p_max: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    contrast_log2_min: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    contrast_log2_max: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    brightness_min: f64,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    brightness_max: f64,
    /// Print the applied operations as TSV on stdout.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct RoundtripArgs {
    /// Corpus directory or files.
    #[arg(required_unless_present = "synthetic")]
    corpus: Vec<PathBuf>,
    /// Audit this many generated scores instead of files.
    #[arg(long, conflicts_with = "corpus")]
    synthetic: Option<u64>,
    /// First seed for --synthetic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    part: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    cost_model: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VocabFormat {
    Txt,
    Tsv,
    Json,
}

#[derive(Args)]
struct VocabArgs {
    #[arg(long, value_enum, default_value = "txt")]
    format: VocabFormat,
}

/// Bad input from the user: exit status 2.
#[derive(Debug)]
struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// Outcome of a command that kept going past per-file input errors.
type Status = Result<bool>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Linearize(a) => cmd_linearize(a),
        Cmd::Delinearize(a) => cmd_delinearize(a),
        Cmd::Canonicalize(a) => cmd_canonicalize(a),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::Augment(a) => cmd_augment(a),
        Cmd::Roundtrip(a) => cmd_roundtrip(a),
        Cmd::Vocab(a) => cmd_vocab(a),
    };
    match r {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) if e.is::<InputError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(1)
        }
    }
}

enum Dest {
    Stdout,
    File(PathBuf),
    Dir(PathBuf),
}

fn destination(args: &ConvertArgs, files: &[PathBuf], ext: &str) -> Result<Dest> {
    match &args.output {
        None if files.len() == 1 && args.inputs.len() == 1 && args.inputs[0].is_file() => Ok(Dest::Stdout),
        None => Err(input_error("several inputs need -o DIR")),
        Some(p) if files.len() == 1 && args.inputs[0].is_file() && !p.is_dir() && p.extension().is_some_and(|e| e == ext) => {
            Ok(Dest::File(p.clone()))
        }
        Some(p) => {
            std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
            Ok(Dest::Dir(p.clone()))
        }
    }
}

fn emit(dest: &Dest, input: &Path, ext: &str, bytes: &[u8]) -> Result<()> {
    let path = match dest {
        Dest::Stdout => {
            std::io::stdout().write_all(bytes)?;
            return Ok(());
        }
        Dest::File(p) => p.clone(),
        Dest::Dir(d) => d.join(format!("{}.{ext}", stem(input))),
    };
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn counts(m: &BTreeMap<String, usize>) -> String {
    m.iter().map(|(k, v)| format!("{k} x{v}")).collect::<Vec<_>>().join(", ")
}

fn cmd_linearize(a: LinearizeArgs) -> Status {
    let (files, mut errors) = expand(&a.io.inputs, SCORE_EXTENSIONS);
    let dest = destination(&a.io, &files, "lmx")?;
    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    let mut written = 0;
    for f in &files {
        let r = load_score(f, a.part.as_deref()).and_then(|(doc, log)| {
            let (c, _) = canonicalize_logged(&doc, &log).map_err(|e| e.to_string())?;
            let (seq, stats) = linearize_with_stats(&c).map_err(|e| e.to_string())?;
            for (k, v) in log.skipped.iter().chain(&stats.skipped) {
                *dropped.entry(k.clone()).or_default() += v;
            }
            Ok(seq)
        });
        match r {
            Ok(seq) => {
                emit(&dest, f, "lmx", seq.to_lmx().as_bytes())?;
                written += 1;
            }
            Err(e) => errors.push(format!("{}: {e}", f.display())),
        }
    }
    for e in &errors {
        eprintln!("error: {e}");
    }
    eprintln!("linearized {written} of {} files; not encoded: {}", files.len(), if dropped.is_empty() { "nothing".into() } else { counts(&dropped) });
    Ok(!errors.is_empty())
}

fn cmd_delinearize(a: ConvertArgs) -> Status {
    let (files, mut errors) = expand(&a.inputs, &["lmx"]);
    let dest = destination(&a, &files, "musicxml")?;
    for f in &files {
        let text = match std::fs::read_to_string(f) {
            Ok(t) => t,
            Err(e) => {
                errors.push(format!("{}: {e}", f.display()));
                continue;
            }
        };
        let (doc, warnings) = delinearize(&TokenSequence::parse(&text));
        for w in &warnings {
            eprintln!("warning: {}: {w}", f.display());
        }
        let bytes = serialize_musicxml(&doc).context("serializing delinearized document")?;
        emit(&dest, f, "musicxml", &bytes)?;
    }
    for e in &errors {
        eprintln!("error: {e}");
    }
    Ok(!errors.is_empty())
}

fn cmd_canonicalize(a: LinearizeArgs) -> Status {
    let (files, mut errors) = expand(&a.io.inputs, SCORE_EXTENSIONS);
    let dest = destination(&a.io, &files, "musicxml")?;
    for f in &files {
        let r = load_score(f, a.part.as_deref()).and_then(|(doc, log)| {
            let (c, report) = canonicalize_logged(&doc, &log).map_err(|e| e.to_string())?;
            let bytes = serialize_musicxml(&c).map_err(|e| e.to_string())?;
            Ok((bytes, report))
        });
        match r {
            Ok((bytes, report)) => {
                emit(&dest, f, "musicxml", &bytes)?;
                if !report.is_noop() {
                    eprintln!(
                        "{}: reordered {} chords, renumbered {} voices, dropped [{}]{}",
                        f.display(),
                        report.reordered_chords,
                        report.renumbered_voices,
                        counts(&report.dropped_elements),
                        if report.divisions_rescaled { ", rescaled divisions" } else { "" }
                    );
                }
            }
            Err(e) => errors.push(format!("{}: {e}", f.display())),
        }
    }
    for e in &errors {
        eprintln!("error: {e}");
    }
    Ok(!errors.is_empty())
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?)
}

fn load_costs(path: Option<&Path>) -> Result<TednCosts> {
    match path {
        Some(p) => TednCosts::load(p),
        None => TednCosts::from_env(),
    }
    .map_err(|e| input_error(format!("cost model: {e}")))
}

/// `SOURCE_DATE_EPOCH` when set, so reruns produce identical reports.
fn timestamp() -> Result<String> {
    let secs = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v.trim().parse::<i64>().map_err(|_| input_error(format!("SOURCE_DATE_EPOCH is not an integer: {v:?}")))?,
        Err(_) => chrono::Utc::now().timestamp(),
    };
    let t = chrono::DateTime::from_timestamp(secs, 0).ok_or_else(|| input_error("SOURCE_DATE_EPOCH out of range"))?;
    Ok(t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn write_report(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> Status {
    let metrics = Metric::parse_list(&a.metrics).map_err(|e| input_error(e.to_string()))?;
    for dir in [&a.gold, &a.pred] {
        if !dir.is_dir() {
            return Err(input_error(format!("{}: not a directory", dir.display())));
        }
    }
    let costs = load_costs(a.cost_model.as_deref())?;
    let pairing = pair_dirs(&a.gold, &a.pred).map_err(|e| input_error(e.to_string()))?;
    let mut bad = false;
    if !pairing.missing.is_empty() {
        eprintln!("{} gold files have no prediction: {}", pairing.missing.len(), pairing.missing.join(", "));
        bad |= !a.allow_missing;
    }
    for o in &pairing.orphans {
        eprintln!("warning: prediction {o} has no gold counterpart");
    }
    let opts = EvalOptions {
        metrics: metrics.clone(),
        costs,
        part: a.part.clone(),
    };
    let scored: Vec<_> = pool(a.jobs)?.install(|| pairing.pairs.par_iter().map(|p| (p, score_pair(p, &opts))).collect());
    let mut rows = Vec::new();
    for (p, r) in scored {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                eprintln!("error: gold {}: {e}", p.gold.display());
                bad = true;
            }
        }
    }
    let meta = Metadata {
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        vocabulary_version: VOCABULARY_VERSION.to_string(),
        cost_model_hash: opts.costs.hash(),
        timestamp: timestamp()?,
        metrics: metrics.iter().map(|m| m.name().to_string()).collect(),
    };
    let report = EvalReport::new(meta, rows, pairing.missing);
    let text = match a.format {
        Format::Json => report.to_json(),
        Format::Tsv => report.to_tsv(),
    };
    write_report(a.output.as_deref(), &text)?;
    Ok(bad)
}

fn augment_config(a: &AugmentArgs) -> Result<AugmentConfig> {
    let mut cfg = AugmentConfig {
        apply_probability: a.apply_probability,
        h_shift_max: a.h_shift_max,
        rot_max_degrees: a.rot_max_degrees,
        v_shift_max: a.v_shift_max,
        morph_semi_axes: (a.morph_x, a.morph_y),
        edge_noise_p_max: a.edge_noise_p_max,
        negate_p_max: a.negate_p_max,
        contrast_log2: (a.contrast_log2_min, a.contrast_log2_max),
        brightness: (a.brightness_min, a.brightness_max),
        ..AugmentConfig::default()
    };
    for name in a.disable.iter().filter(|s| !s.is_empty()) {
        let op = Op::from_name(name).ok_or_else(|| input_error(format!("unknown operation {name:?}")))?;
        cfg.set_enabled(op, false);
    }
    cfg.validate().map_err(input_error)?;
    Ok(cfg)
}

fn cmd_augment(a: AugmentArgs) -> Status {
    let cfg = augment_config(&a)?;
    let (files, mut errors) = expand(&a.inputs, &["png"]);
    std::fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    let results: Vec<_> = pool(a.jobs)?.install(|| {
        files
            .par_iter()
            .map(|f| {
                let id = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let img = RasterImage::load(f).map_err(|e| format!("{}: {e}", f.display()))?;
                let (out, trace) = augment_traced(&img, &cfg, derive_seed(a.seed, &id));
                let dst = a.output.join(format!("{}.png", stem(f)));
                out.save_png(&dst).map_err(|e| format!("{}: {e}", dst.display()))?;
                Ok::<_, String>((id, trace))
            })
            .collect()
    });
    for r in results {
        match r {
            Ok((id, trace)) if a.trace => {
                for t in trace {
                    println!("{id}\t{}\t{}", t.op().name(), t.magnitude());
                }
            }
            Ok(_) => {}
            Err(e) => errors.push(e),
        }
    }
    for e in &errors {
        eprintln!("error: {e}");
    }
    Ok(!errors.is_empty())
}

fn cmd_roundtrip(a: RoundtripArgs) -> Status {
    let costs = load_costs(a.cost_model.as_deref())?;
    let part = a.part.as_deref();
    let audited: Vec<_> = if let Some(n) = a.synthetic {
        pool(a.jobs)?.install(|| {
            (a.seed..a.seed + n)
                .into_par_iter()
                .map(|seed| {
                    let doc = lmx_core::synth::generate(seed);
                    let bytes = serialize_musicxml(&doc).expect("generated scores serialize");
                    let (doc, log) = parse_musicxml_with_log(&bytes).expect("generated scores parse");
                    audit_document(&format!("synth-{seed:06}"), &doc, &log, &costs)
                })
                .collect()
        })
    } else {
        let (files, errors) = expand(&a.corpus, SCORE_EXTENSIONS);
        if !errors.is_empty() {
            return Err(input_error(errors.join("; ")));
        }
        pool(a.jobs)?.install(|| {
            files
                .par_iter()
                .map(|f| {
                    let name = f.display().to_string();
                    match load_score(f, part) {
                        Ok((doc, log)) => audit_document(&name, &doc, &log, &costs),
                        Err(e) => {
                            let mut r = audit_document(&name, &lmx_core::score::ScoreDocument::default(), &Default::default(), &costs);
                            r.row.error = Some(e);
                            r.row.token_stable = false;
                            r.row.tedn_lmx = None;
                            r
                        }
                    }
                })
                .collect()
        })
    };
    let report = AuditReport::new(audited);
    for f in report.files.iter().filter(|f| f.error.is_some() || !f.token_stable || f.tedn_lmx != Some(0.0)) {
        eprintln!(
            "failure: {}: {}",
            f.file,
            f.error.clone().unwrap_or_else(|| format!("token_stable={} tedn_lmx={:?}", f.token_stable, f.tedn_lmx))
        );
    }
    let s = &report.summary;
    eprintln!(
        "{} files: token-stable {:.2}%, TEDn-lmx zero {:.2}%, discarded nodes {:.2}%",
        s.files, s.token_stability_percent, s.tedn_lmx_zero_percent, s.discarded_node_percent
    );
    let text = match a.format {
        Format::Json => report.to_json(),
        Format::Tsv => report.to_tsv(),
    };
    write_report(a.output.as_deref(), &text)?;
    Ok(false)
}

fn cmd_vocab(a: VocabArgs) -> Status {
    let v = vocabulary();
    let text = match a.format {
        VocabFormat::Txt => v.to_text(),
        VocabFormat::Tsv => {
            let mut s = String::from("id\ttoken\tcategory\n");
            for (i, (t, c)) in v.entries().enumerate() {
                s.push_str(&format!("{i}\t{t}\t{}\n", c.as_str()));
            }
            s
        }
        VocabFormat::Json => {
            let tokens: Vec<_> = v
                .entries()
                .enumerate()
                .map(|(i, (t, c))| serde_json::json!({"id": i, "token": t, "category": c.as_str()}))
                .collect();
            let mut s = serde_json::to_string_pretty(&serde_json::json!({"version": VOCABULARY_VERSION, "tokens": tokens}))?;
            s.push('\n');
            s
        }
    };
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(false)
}
