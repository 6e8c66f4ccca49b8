use std::io::{Cursor, Read};
use std::path::Path;

use zip::ZipArchive;

use super::{parse_musicxml_with_log, ParseError, ScoreDocument, SkipLog};

fn container_err(e: impl std::fmt::Display) -> ParseError {
    ParseError::Container(e.to_string())
}

/// Extract the root score of a compressed `.mxl` archive.
pub fn mxl_root_bytes(bytes: &[u8]) -> Result<Vec<u8>, ParseError> {
    let mut zip = ZipArchive::new(Cursor::new(bytes)).map_err(container_err)?;
    let mut container = String::new();
    zip.by_name("META-INF/container.xml")
        .map_err(container_err)?
        .read_to_string(&mut container)
        .map_err(container_err)?;
    let doc = roxmltree::Document::parse(&container).map_err(container_err)?;
    let root_path = doc
        .descendants()
        .find(|n| n.has_tag_name("rootfile"))
        .and_then(|n| n.attribute("full-path"))
        .ok_or_else(|| container_err("container.xml has no rootfile"))?
        .to_string();
    let mut out = Vec::new();
    zip.by_name(&root_path)
        .map_err(container_err)?
        .read_to_end(&mut out)
        .map_err(container_err)?;
    Ok(out)
}

pub fn parse_mxl(bytes: &[u8]) -> Result<(ScoreDocument, SkipLog), ParseError> {
    parse_musicxml_with_log(&mxl_root_bytes(bytes)?)
}

/// Read `.mxl`, `.musicxml` or `.xml` from disk, dispatching on the zip magic.
pub fn read_score_file(path: &Path) -> Result<(ScoreDocument, SkipLog), ParseError> {
    let bytes = std::fs::read(path).map_err(|e| ParseError::Container(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(b"PK\x03\x04") {
        parse_mxl(&bytes)
    } else {
        parse_musicxml_with_log(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use zip::write::SimpleFileOptions;

    #[test]
    fn reads_root_file_from_container() {
        let score = br#"<score-partwise><part-list><score-part id="P1"/></part-list><part id="P1"><measure/></part></score-partwise>"#;
        let mut buf = Vec::new();
        {
            let mut w = zip::ZipWriter::new(Cursor::new(&mut buf));
            let opts = SimpleFileOptions::default();
            w.start_file("META-INF/container.xml", opts).unwrap();
            w.write_all(br#"<container><rootfiles><rootfile full-path="score/a.musicxml"/></rootfiles></container>"#)
                .unwrap();
            w.start_file("score/a.musicxml", opts).unwrap();
            w.write_all(score).unwrap();
            w.finish().unwrap();
        }
        let (doc, _) = parse_mxl(&buf).unwrap();
        assert_eq!(doc.parts[0].measures.len(), 1);
        assert!(matches!(parse_mxl(b"not a zip"), Err(ParseError::Container(_))));
    }
}
