use crate::corpus::SentencePair;

use super::{CleanerError, CleanerVerdict};

fn blocks(text: &str) -> Vec<Vec<&str>> {
    let mut out = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(line);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn strip_name<'a>(line: &'a str, name: &str) -> &'a str {
    let line = line.trim();
    line.strip_prefix(name)
        .and_then(|rest| rest.strip_prefix(':'))
        .map_or(line, str::trim)
}

fn parse_flag(line: &str) -> Option<bool> {
    let token = line.split_whitespace().next()?;
    let token = token.trim_matches(|c: char| !c.is_alphanumeric());
    if token.eq_ignore_ascii_case("true") {
        Some(true)
    } else if token.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

/// Parses a batch response: one blank-line separated block per pair, in
/// batch order. `True` blocks carry the cleaned source and target lines;
/// an optional `<Language>: ` prefix on each is removed.
pub fn parse_cleaner_response(text: &str, batch: &[SentencePair]) -> Result<Vec<CleanerVerdict>, CleanerError> {
    let blocks = blocks(text);
    if blocks.len() != batch.len() {
        return Err(CleanerError::Parse(format!(
            "expected {} blocks, got {}",
            batch.len(),
            blocks.len()
        )));
    }
    blocks
        .iter()
        .zip(batch)
        .enumerate()
        .map(|(i, (block, pair))| {
            let aligned = parse_flag(block[0]).ok_or_else(|| {
                CleanerError::Parse(format!("block {}: expected True or False, got {:?}", i + 1, block[0]))
            })?;
            if !aligned {
                return Ok(CleanerVerdict::misaligned());
            }
            if block.len() != 3 {
                return Err(CleanerError::Parse(format!(
                    "block {}: True needs exactly two sentence lines, got {}",
                    i + 1,
                    block.len() - 1
                )));
            }
            let src = strip_name(block[1], pair.src.lang.display_name());
            let tgt = strip_name(block[2], pair.tgt.lang.display_name());
            if src.is_empty() || tgt.is_empty() {
                return Err(CleanerError::Parse(format!("block {}: empty cleaned sentence", i + 1)));
            }
            Ok(CleanerVerdict::aligned(src, tgt))
        })
        .collect()
}
