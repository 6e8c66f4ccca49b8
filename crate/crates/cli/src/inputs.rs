use std::path::{Path, PathBuf};

use lmx_core::score::{read_score_file, ScoreDocument, SkipLog};

pub const SCORE_EXTENSIONS: &[&str] = &["musicxml", "xml", "mxl"];

pub fn has_extension(p: &Path, exts: &[&str]) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// Expand files and directories (one level) into a sorted file list.
///
/// Returns the files and one error message per unreadable argument.
pub fn expand(paths: &[PathBuf], exts: &[&str]) -> (Vec<PathBuf>, Vec<String>) {
    let mut files = Vec::new();
    let mut errors = Vec::new();
    for p in paths {
        if p.is_dir() {
            match std::fs::read_dir(p) {
                Ok(entries) => {
                    let mut v: Vec<PathBuf> = entries
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|f| f.is_file() && has_extension(f, exts))
                        .collect();
                    v.sort();
                    files.extend(v);
                }
                Err(e) => errors.push(format!("{}: {e}", p.display())),
            }
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            errors.push(format!("{}: no such file or directory", p.display()));
        }
    }
    (files, errors)
}

pub fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Reduce a document to one part: the requested id, or the only part.
pub fn single_part(doc: &ScoreDocument, part: Option<&str>) -> Result<ScoreDocument, String> {
    match part {
        Some(id) => doc
            .select_part(id)
            .ok_or_else(|| format!("no part {id:?} (parts: {})", doc.part_ids().join(", "))),
        None if doc.parts.len() <= 1 => Ok(doc.clone()),
        None => Err(format!(
            "{} parts; choose one with --part (parts: {})",
            doc.parts.len(),
            doc.part_ids().join(", ")
        )),
    }
}

pub fn load_score(path: &Path, part: Option<&str>) -> Result<(ScoreDocument, SkipLog), String> {
    let (doc, log) = read_score_file(path).map_err(|e| e.to_string())?;
    Ok((single_part(&doc, part)?, log))
}
