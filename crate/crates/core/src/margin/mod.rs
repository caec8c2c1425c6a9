//! Exact cosine kNN and ratio-margin scoring of bitext.
//!
//! For a candidate pair (x, y) the score is
//! `cos(x, y) / (mean_{z in NN_k(x)} cos(x, z) / 2 + mean_{z in NN_k(y)} cos(y, z) / 2)`
//! where `NN_k(x)` are the k nearest rows of the opposite-language table,
//! which includes y itself. With a full pool this is the usual
//! `sum cos / 2k` form.

mod embeddings;
mod mine;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::corpus::SentencePair;
use crate::report::{FilterReport, Rejection};

pub use embeddings::{EmbeddingTable, EMBEDDING_MAGIC};
pub use mine::{
    mine_document_rows, mine_documents, mine_pairs, mine_rows, pairs_from_rows, MineConfig, MinedRow,
    DEFAULT_SIM_THRESHOLD,
};

pub const STAGE_MARGIN: &str = "margin";
pub const DEFAULT_MARGIN_THRESHOLD: f64 = 1.09;
pub const DEFAULT_K: usize = 3;
/// Denominators at or below this are treated as undefined.
pub const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum MarginError {
    #[error("zero_vector{}", .row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    ZeroVector { row: Option<usize> },
    #[error("dimension mismatch ({context}): expected {expected}, found {found}")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },
    #[error("no embedding row {row}")]
    MissingRow { row: usize },
    #[error("pair {pair_id}: no {side} embedding row")]
    MissingPairRow { pair_id: u64, side: &'static str },
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("k must be positive")]
    ZeroK,
    #[error("embedding format: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MarginError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        MarginError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `dot(x, y) / (|x| |y|)`, clamped to [-1, 1].
pub fn cosine(x: &[f64], y: &[f64]) -> Result<f64, MarginError> {
    if x.len() != y.len() {
        return Err(MarginError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
            context: "cosine".to_string(),
        });
    }
    let nx = dot(x, x).sqrt();
    let ny = dot(y, y).sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(MarginError::ZeroVector { row: None });
    }
    Ok((dot(x, y) / (nx * ny)).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub cosine: f64,
}

/// Neighbors ordered by descending cosine, ties by ascending id.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborSet {
    pub query_id: usize,
    pub k: usize,
    pub neighbors: Vec<Neighbor>,
}

impl NeighborSet {
    pub fn mean_cosine(&self) -> f64 {
        self.neighbors.iter().map(|n| n.cosine).sum::<f64>() / self.neighbors.len() as f64
    }
}

fn ranks_before(a: &Neighbor, b: &Neighbor) -> bool {
    a.cosine > b.cosine || (a.cosine == b.cosine && a.id < b.id)
}

fn top_k(query: &[f64], pool: &EmbeddingTable, k: usize) -> Vec<Neighbor> {
    let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
    for id in 0..pool.len() {
        let cand = Neighbor {
            id,
            cosine: dot(query, pool.unit_row(id)).clamp(-1.0, 1.0),
        };
        if best.len() == k && !ranks_before(&cand, &best[k - 1]) {
            continue;
        }
        let pos = best.iter().position(|b| ranks_before(&cand, b)).unwrap_or(best.len());
        best.insert(pos, cand);
        best.truncate(k);
    }
    best
}

/// Exact brute-force top-k of `query_table[query_id]` among the rows of
/// `candidates`.
pub fn knn(
    query_id: usize,
    query_table: &EmbeddingTable,
    candidates: &EmbeddingTable,
    k: usize,
) -> Result<NeighborSet, MarginError> {
    if k == 0 {
        return Err(MarginError::ZeroK);
    }
    if candidates.is_empty() {
        return Err(MarginError::EmptyPool);
    }
    if query_table.dim() != candidates.dim() {
        return Err(MarginError::DimensionMismatch {
            expected: query_table.dim(),
            found: candidates.dim(),
            context: "knn".to_string(),
        });
    }
    if query_id >= query_table.len() {
        return Err(MarginError::MissingRow { row: query_id });
    }
    Ok(NeighborSet {
        query_id,
        k,
        neighbors: top_k(query_table.unit_row(query_id), candidates, k),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginScore {
    /// `None` when the denominator is at or below [`DEGENERATE_EPS`].
    pub value: Option<f64>,
    pub cos_xy: f64,
    pub denom: f64,
}

impl MarginScore {
    fn from_parts(cos_xy: f64, fwd_mean: f64, bwd_mean: f64) -> Self {
        let denom = fwd_mean / 2.0 + bwd_mean / 2.0;
        MarginScore {
            value: (denom > DEGENERATE_EPS).then(|| cos_xy / denom),
            cos_xy,
            denom,
        }
    }
}

pub fn margin_score(
    x_id: usize,
    y_id: usize,
    x_table: &EmbeddingTable,
    y_table: &EmbeddingTable,
    k: usize,
) -> Result<MarginScore, MarginError> {
    let fwd = knn(x_id, x_table, y_table, k)?;
    let bwd = knn(y_id, y_table, x_table, k)?;
    let cos_xy = dot(x_table.unit_row(x_id), y_table.unit_row(y_id)).clamp(-1.0, 1.0);
    Ok(MarginScore::from_parts(cos_xy, fwd.mean_cosine(), bwd.mean_cosine()))
}

/// Neighbor means precomputed for a set of source and target rows so a
/// corpus can be scored without repeating kNN searches.
pub struct MarginIndex<'a> {
    src: &'a EmbeddingTable,
    tgt: &'a EmbeddingTable,
    fwd: Vec<Option<f64>>,
    bwd: Vec<Option<f64>>,
}

impl<'a> MarginIndex<'a> {
    pub fn build(
        src: &'a EmbeddingTable,
        tgt: &'a EmbeddingTable,
        src_rows: &BTreeSet<usize>,
        tgt_rows: &BTreeSet<usize>,
        k: usize,
    ) -> Result<Self, MarginError> {
        if src.dim() != tgt.dim() {
            return Err(MarginError::DimensionMismatch {
                expected: src.dim(),
                found: tgt.dim(),
                context: "source vs target table".to_string(),
            });
        }
        let means = |query: &EmbeddingTable, pool: &EmbeddingTable, rows: &BTreeSet<usize>| {
            let rows: Vec<usize> = rows.iter().copied().collect();
            let computed: Vec<(usize, f64)> = rows
                .par_iter()
                .map(|&r| knn(r, query, pool, k).map(|n| (r, n.mean_cosine())))
                .collect::<Result<_, _>>()?;
            let mut out = vec![None; query.len()];
            for (r, m) in computed {
                out[r] = Some(m);
            }
            Ok::<_, MarginError>(out)
        };
        Ok(Self {
            src,
            tgt,
            fwd: means(src, tgt, src_rows)?,
            bwd: means(tgt, src, tgt_rows)?,
        })
    }

    pub fn score(&self, x: usize, y: usize) -> Result<MarginScore, MarginError> {
        let fwd = self
            .fwd
            .get(x)
            .copied()
            .flatten()
            .ok_or(MarginError::MissingRow { row: x })?;
        let bwd = self
            .bwd
            .get(y)
            .copied()
            .flatten()
            .ok_or(MarginError::MissingRow { row: y })?;
        let cos_xy = dot(self.src.unit_row(x), self.tgt.unit_row(y)).clamp(-1.0, 1.0);
        Ok(MarginScore::from_parts(cos_xy, fwd, bwd))
    }
}

/// Keeps pairs whose defined margin score is at least `threshold`. Row `p`
/// of each table holds the embedding of pair `p`'s side, and the whole
/// opposite table is the neighbor pool.
pub fn filter_by_margin(
    pairs: Vec<SentencePair>,
    src_table: &EmbeddingTable,
    tgt_table: &EmbeddingTable,
    threshold: f64,
    k: usize,
) -> Result<(Vec<SentencePair>, FilterReport), MarginError> {
    let mut rows = BTreeSet::new();
    for p in &pairs {
        let row = usize::try_from(p.id).unwrap_or(usize::MAX);
        if row >= src_table.len() {
            return Err(MarginError::MissingPairRow {
                pair_id: p.id,
                side: "source",
            });
        }
        if row >= tgt_table.len() {
            return Err(MarginError::MissingPairRow {
                pair_id: p.id,
                side: "target",
            });
        }
        rows.insert(row);
    }
    let index = MarginIndex::build(src_table, tgt_table, &rows, &rows, k)?;
    let input = pairs.len();
    let mut kept = Vec::with_capacity(input);
    let mut rejections = Vec::new();
    for mut pair in pairs {
        let row = pair.id as usize;
        let score = index.score(row, row)?;
        let reason = match score.value {
            None => Some("degenerate_margin"),
            Some(v) => {
                pair.scores.insert("margin".to_string(), v);
                (v < threshold).then_some("below_threshold")
            }
        };
        match reason {
            None => {
                pair.mark_passed();
                kept.push(pair);
            }
            Some(reason) => rejections.push(Rejection {
                pair_id: pair.id,
                stage: STAGE_MARGIN.to_string(),
                reason: reason.to_string(),
            }),
        }
    }
    let mut report = FilterReport::new();
    report.push_stage(STAGE_MARGIN, input, rejections);
    Ok((kept, report))
}
