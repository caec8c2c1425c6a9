use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::MarginError;
use crate::corpus::LanguageTag;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";

/// Dense sentence embeddings, one row per sentence. Rows are kept both as
/// given and L2-normalized; zero rows are refused.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    rows: Vec<f64>,
    unit: Vec<f64>,
    lang: Option<LanguageTag>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, rows: Vec<f64>) -> Result<Self, MarginError> {
        if dim == 0 {
            return Err(MarginError::Format("embedding dimension must be positive".to_string()));
        }
        if !rows.len().is_multiple_of(dim) {
            return Err(MarginError::Format(format!(
                "{} values do not form rows of dimension {dim}",
                rows.len()
            )));
        }
        let mut unit = Vec::with_capacity(rows.len());
        for (i, row) in rows.chunks_exact(dim).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MarginError::Format(format!("row {i} has a non-finite value")));
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(MarginError::ZeroVector { row: Some(i) });
            }
            unit.extend(row.iter().map(|v| v / norm));
        }
        Ok(Self {
            dim,
            rows,
            unit,
            lang: None,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, MarginError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(MarginError::DimensionMismatch {
                expected: dim,
                found: r.len(),
                context: format!("row {i}"),
            });
        }
        Self::new(dim, rows.into_iter().flatten().collect())
    }

    pub fn with_lang(mut self, lang: LanguageTag) -> Self {
        self.lang = Some(lang);
        self
    }

    pub fn lang(&self) -> Option<&LanguageTag> {
        self.lang.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> Option<&[f64]> {
        (i < self.len()).then(|| &self.rows[i * self.dim..(i + 1) * self.dim])
    }

    pub(crate) fn unit_row(&self, i: usize) -> &[f64] {
        &self.unit[i * self.dim..(i + 1) * self.dim]
    }

    /// Table restricted to `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self, MarginError> {
        let mut rows = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            rows.extend_from_slice(self.row(i).ok_or(MarginError::MissingRow { row: i })?);
        }
        let mut t = Self::new(self.dim, rows)?;
        t.lang = self.lang.clone();
        Ok(t)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self, MarginError> {
        if self.dim != other.dim {
            return Err(MarginError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
                context: "concatenated table".to_string(),
            });
        }
        let mut rows = self.rows.clone();
        rows.extend_from_slice(&other.rows);
        let mut unit = self.unit.clone();
        unit.extend_from_slice(&other.unit);
        Ok(Self {
            dim: self.dim,
            rows,
            unit,
            lang: self.lang.clone(),
        })
    }

    /// Loads the binary format when the file starts with `EMB1`, otherwise
    /// one whitespace-separated vector per line.
    pub fn load(path: &Path) -> Result<Self, MarginError> {
        let mut file = BufReader::new(File::open(path).map_err(|e| MarginError::io(path, e))?);
        let head = file.fill_buf().map_err(|e| MarginError::io(path, e))?;
        if head.starts_with(EMBEDDING_MAGIC) {
            Self::read_binary(file)
        } else {
            Self::read_text(file)
        }
    }

    /// `EMB1`, u32 LE dim, u64 LE row count, then row-major f32 LE values.
    pub fn read_binary<R: Read>(mut reader: R) -> Result<Self, MarginError> {
        let mut header = [0u8; 16];
        reader
            .read_exact(&mut header)
            .map_err(|_| MarginError::Format("truncated embedding header".to_string()))?;
        if &header[..4] != EMBEDDING_MAGIC {
            return Err(MarginError::Format("bad embedding magic".to_string()));
        }
        let dim = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let expected = dim
            .checked_mul(count)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| MarginError::Format("embedding header overflows".to_string()))?;
        let mut body = Vec::with_capacity(expected);
        reader
            .read_to_end(&mut body)
            .map_err(|e| MarginError::Format(e.to_string()))?;
        if body.len() != expected {
            return Err(MarginError::Format(format!(
                "expected {expected} bytes of vectors for {count}x{dim}, found {}",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        Self::new(dim, values)
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, MarginError> {
        let mut dim = None;
        let mut values = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| MarginError::Format(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| MarginError::Format(format!("line {}: {e}", idx + 1)))?;
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(MarginError::DimensionMismatch {
                        expected: d,
                        found: row.len(),
                        context: format!("line {}", idx + 1),
                    })
                }
                _ => {}
            }
            values.extend(row);
        }
        match dim {
            Some(d) => Self::new(d, values),
            None => Err(MarginError::Format("embedding file has no vectors".to_string())),
        }
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(EMBEDDING_MAGIC)?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        for v in &self.rows {
            out.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save_binary(&self, path: &Path) -> Result<(), MarginError> {
        let file = File::create(path).map_err(|e| MarginError::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_binary(&mut out).map_err(|e| MarginError::io(path, e))?;
        out.flush().map_err(|e| MarginError::io(path, e))
    }
}
