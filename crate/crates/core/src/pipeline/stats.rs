use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::SentencePair;
use crate::report::StageCount;

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("pair {0} is in the after-corpus but not the before-corpus")]
    NotSubset(u64),
}

/// dataset -> language pair -> pair count
pub type GroupCounts = BTreeMap<String, BTreeMap<String, usize>>;

pub fn group_counts(pairs: &[SentencePair]) -> GroupCounts {
    let mut out = GroupCounts::new();
    for p in pairs {
        *out.entry(p.origin().to_string())
            .or_default()
            .entry(p.lang_pair())
            .or_insert(0) += 1;
    }
    out
}

/// Grouped counts of the pairs left after a stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub after: String,
    pub total: usize,
    pub synthetic: usize,
    pub groups: GroupCounts,
}

impl Boundary {
    pub fn new(after: &str, pairs: &[SentencePair]) -> Self {
        Self {
            after: after.to_string(),
            total: pairs.len(),
            synthetic: pairs.iter().filter(|p| p.is_synthetic()).count(),
            groups: group_counts(pairs),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub stages: Vec<StageCount>,
    pub boundaries: Vec<Boundary>,
    pub table: StatsTable,
}

impl PipelineStats {
    /// Stage k's output equals stage k+1's input, and each boundary total
    /// equals the output of the stage it follows.
    pub fn telescopes(&self) -> bool {
        let chained = self.stages.windows(2).all(|w| w[0].output() == w[1].input);
        let matched = self
            .stages
            .iter()
            .all(|s| match self.boundaries.iter().find(|b| b.after == s.stage) {
                Some(b) => b.total == s.output(),
                None => true,
            });
        chained && matched
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub dataset: String,
    /// (before, after) per language pair column.
    pub cells: Vec<(usize, usize)>,
}

/// Before/after counts with one row per dataset and one column pair per
/// language pair, plus a TOTAL row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsTable {
    pub lang_pairs: Vec<String>,
    pub rows: Vec<StatsRow>,
    pub total: Vec<(usize, usize)>,
}

/// Counts `before` and `after` by dataset and language pair. Every pair of
/// `after` must appear (by id) in `before`.
pub fn stats_report(before: &[SentencePair], after: &[SentencePair]) -> Result<StatsTable, StatsError> {
    let ids: HashSet<u64> = before.iter().map(|p| p.id).collect();
    if let Some(p) = after.iter().find(|p| !ids.contains(&p.id)) {
        return Err(StatsError::NotSubset(p.id));
    }
    let b = group_counts(before);
    let a = group_counts(after);
    let lang_pairs: Vec<String> = b
        .values()
        .flat_map(|m| m.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut total = vec![(0, 0); lang_pairs.len()];
    let rows = b
        .iter()
        .map(|(dataset, counts)| {
            let cells: Vec<(usize, usize)> = lang_pairs
                .iter()
                .map(|lp| {
                    let before = counts.get(lp).copied().unwrap_or(0);
                    let after = a.get(dataset).and_then(|m| m.get(lp)).copied().unwrap_or(0);
                    (before, after)
                })
                .collect();
            for (t, c) in total.iter_mut().zip(&cells) {
                t.0 += c.0;
                t.1 += c.1;
            }
            StatsRow {
                dataset: dataset.clone(),
                cells,
            }
        })
        .collect();
    Ok(StatsTable {
        lang_pairs,
        rows,
        total,
    })
}

impl StatsTable {
    /// Plain-text rendering with aligned columns.
    pub fn render(&self) -> String {
        let mut header = vec!["dataset".to_string()];
        for lp in &self.lang_pairs {
            header.push(format!("{lp} before"));
            header.push(format!("{lp} after"));
        }
        let row = |name: &str, cells: &[(usize, usize)]| {
            let mut r = vec![name.to_string()];
            for (b, a) in cells {
                r.push(b.to_string());
                r.push(a.to_string());
            }
            r
        };
        let mut lines: Vec<Vec<String>> = vec![header];
        lines.extend(self.rows.iter().map(|r| row(&r.dataset, &r.cells)));
        lines.push(row("TOTAL", &self.total));
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for l in &lines {
            let cols: Vec<String> = l
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    if c == 0 {
                        format!("{v:<w$}", w = widths[c])
                    } else {
                        format!("{v:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cols.join("  ").trim_end());
        }
        out
    }
}
