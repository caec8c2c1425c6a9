use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{knn, EmbeddingTable, MarginError};
use crate::corpus::{Sentence, SentencePair};

pub const DEFAULT_SIM_THRESHOLD: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MineConfig {
    pub sim_threshold: f64,
    /// Also require the source to be the target's nearest neighbor.
    pub mutual: bool,
}

impl Default for MineConfig {
    fn default() -> Self {
        Self {
            sim_threshold: DEFAULT_SIM_THRESHOLD,
            mutual: false,
        }
    }
}

/// A mined alignment between row `src_row` of the source table and row
/// `tgt_row` of the target table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinedRow {
    pub src_row: usize,
    pub tgt_row: usize,
    pub cosine: f64,
}

fn check_rows(
    src_len: usize,
    src_table: &EmbeddingTable,
    tgt_len: usize,
    tgt_table: &EmbeddingTable,
) -> Result<(), MarginError> {
    for (side, n, table) in [("source", src_len, src_table), ("target", tgt_len, tgt_table)] {
        if table.len() != n {
            return Err(MarginError::Format(format!(
                "{side} side has {n} sentences but {} embedding rows",
                table.len()
            )));
        }
    }
    Ok(())
}

/// Nearest-target alignment over whole tables, sorted by source row.
/// A target claimed by several sources goes to the highest cosine (lowest
/// source row on ties).
pub fn mine_rows(
    src_table: &EmbeddingTable,
    tgt_table: &EmbeddingTable,
    cfg: &MineConfig,
) -> Result<Vec<MinedRow>, MarginError> {
    if src_table.is_empty() || tgt_table.is_empty() {
        return Ok(Vec::new());
    }
    // target row -> (source row, cosine) of the winning claim
    let mut claims: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for i in 0..src_table.len() {
        let best = knn(i, src_table, tgt_table, 1)?.neighbors[0];
        if best.cosine < cfg.sim_threshold {
            continue;
        }
        if cfg.mutual && knn(best.id, tgt_table, src_table, 1)?.neighbors[0].id != i {
            continue;
        }
        match claims.get(&best.id) {
            Some(&(_, c)) if c >= best.cosine => {}
            _ => {
                claims.insert(best.id, (i, best.cosine));
            }
        }
    }
    let mut rows: Vec<MinedRow> = claims
        .into_iter()
        .map(|(t, (s, c))| MinedRow {
            src_row: s,
            tgt_row: t,
            cosine: c,
        })
        .collect();
    rows.sort_by_key(|r| r.src_row);
    Ok(rows)
}

/// Turns mined rows into pairs with ids from `first_id`, recording the
/// cosine under `mine_cos`.
pub fn pairs_from_rows(
    src: &[Sentence],
    tgt: &[Sentence],
    rows: &[MinedRow],
    first_id: u64,
) -> Result<Vec<SentencePair>, MarginError> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let (s, t) = (&src[r.src_row], &tgt[r.tgt_row]);
            let mut pair = SentencePair::new(
                first_id + i as u64,
                s.text.clone(),
                s.lang.clone(),
                t.text.clone(),
                t.lang.clone(),
                s.origin.clone(),
            )
            .map_err(|e| MarginError::Format(e.to_string()))?;
            pair.scores.insert("mine_cos".to_string(), r.cosine);
            Ok(pair)
        })
        .collect()
}

/// Pairs each source sentence with its nearest target when the cosine is at
/// least `sim_threshold` (see [`mine_rows`]). Row `i` of each table embeds
/// sentence `i` of the matching slice. Output follows source order with ids
/// `0..`.
pub fn mine_pairs(
    src: &[Sentence],
    src_table: &EmbeddingTable,
    tgt: &[Sentence],
    tgt_table: &EmbeddingTable,
    cfg: &MineConfig,
) -> Result<Vec<SentencePair>, MarginError> {
    if src.is_empty() || tgt.is_empty() {
        return Ok(Vec::new());
    }
    check_rows(src.len(), src_table, tgt.len(), tgt_table)?;
    pairs_from_rows(src, tgt, &mine_rows(src_table, tgt_table, cfg)?, 0)
}

/// Mines each comparable document separately. Sentences are grouped by
/// `origin`; returned rows index the full slices, documents in name order.
pub fn mine_document_rows(
    src: &[Sentence],
    src_table: &EmbeddingTable,
    tgt: &[Sentence],
    tgt_table: &EmbeddingTable,
    cfg: &MineConfig,
) -> Result<Vec<MinedRow>, MarginError> {
    check_rows(src.len(), src_table, tgt.len(), tgt_table)?;
    let group = |sents: &[Sentence]| {
        let mut g: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, s) in sents.iter().enumerate() {
            g.entry(s.origin.clone()).or_default().push(i);
        }
        g
    };
    let src_docs = group(src);
    let tgt_docs = group(tgt);
    let mut out = Vec::new();
    for (doc, src_rows) in &src_docs {
        let Some(tgt_rows) = tgt_docs.get(doc) else {
            continue;
        };
        let local = mine_rows(&src_table.select(src_rows)?, &tgt_table.select(tgt_rows)?, cfg)?;
        out.extend(local.into_iter().map(|r| MinedRow {
            src_row: src_rows[r.src_row],
            tgt_row: tgt_rows[r.tgt_row],
            cosine: r.cosine,
        }));
    }
    Ok(out)
}

/// [`mine_document_rows`] turned into pairs with ids from `first_id`.
pub fn mine_documents(
    src: &[Sentence],
    src_table: &EmbeddingTable,
    tgt: &[Sentence],
    tgt_table: &EmbeddingTable,
    cfg: &MineConfig,
    first_id: u64,
) -> Result<Vec<SentencePair>, MarginError> {
    let rows = mine_document_rows(src, src_table, tgt, tgt_table, cfg)?;
    pairs_from_rows(src, tgt, &rows, first_id)
}
