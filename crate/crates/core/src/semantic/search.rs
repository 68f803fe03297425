use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EncodeError, Encoder};
use crate::index::EntryId;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Components rounded to `f32`, the on-disk precision.
    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&x| x as f32).collect()
    }

    pub fn from_f32(values: &[f32]) -> Self {
        Self(values.iter().map(|&x| f64::from(x)).collect())
    }

    fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("embedding dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

/// Cosine similarity in [-1, 1]. Zero when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, DimensionMismatch> {
    if a.dim() != b.dim() {
        return Err(DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(cosine_with_norms(a, a.norm(), b, b.norm()))
}

fn cosine_with_norms(a: &EmbeddingVector, na: f64, b: &EmbeddingVector, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub entry_id: EntryId,
    pub vector: EmbeddingVector,
    pub passage: String,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate entry id {0} in embedding index")]
    DuplicateEntry(EntryId),
    #[error("row for entry {entry} has {got} dimensions, index has {dim}")]
    Dimension { entry: EntryId, dim: usize, got: usize },
    #[error("row for entry {0} has a non-finite component")]
    NonFinite(EntryId),
}

/// Immutable set of (entry id, vector, passage) rows sharing one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingIndex {
    dim: usize,
    rows: Vec<IndexRow>,
    norms: Vec<f64>,
}

impl EmbeddingIndex {
    pub fn new(dim: usize, rows: Vec<IndexRow>) -> Result<Self, IndexError> {
        let mut seen = HashSet::with_capacity(rows.len());
        for row in &rows {
            if !seen.insert(row.entry_id) {
                return Err(IndexError::DuplicateEntry(row.entry_id));
            }
            if row.vector.dim() != dim {
                return Err(IndexError::Dimension {
                    entry: row.entry_id,
                    dim,
                    got: row.vector.dim(),
                });
            }
            if !row.vector.is_finite() {
                return Err(IndexError::NonFinite(row.entry_id));
            }
        }
        let norms = rows.iter().map(|r| r.vector.norm()).collect();
        Ok(Self { dim, rows, norms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[IndexRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, id: EntryId) -> Option<&IndexRow> {
        self.rows.iter().find(|r| r.entry_id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    /// First round: the task description.
    Initial,
    /// Later rounds: the error report plus the offending line.
    Subsequent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub text: String,
    pub mode: QueryMode,
}

impl RetrievalQuery {
    pub fn new(text: impl Into<String>, mode: QueryMode) -> Self {
        Self {
            text: text.into(),
            mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub entry_id: EntryId,
    pub score: f64,
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("retrieval query text is empty")]
    EmptyQuery,
    #[error("top-n requires n >= 1")]
    ZeroN,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

/// Encodes `query` and returns the `n` most similar rows.
pub fn top_n(
    query: &RetrievalQuery,
    index: &EmbeddingIndex,
    encoder: &dyn Encoder,
    n: usize,
) -> Result<Vec<ScoredEntry>, RetrievalError> {
    if query.text.trim().is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    if n == 0 {
        return Err(RetrievalError::ZeroN);
    }
    if index.is_empty() {
        return Ok(Vec::new());
    }
    let q = encoder.encode(&query.text)?;
    Ok(top_n_vector(&q, index, n)?)
}

/// Exhaustive scan: descending score, ties by ascending entry id.
pub fn top_n_vector(
    q: &EmbeddingVector,
    index: &EmbeddingIndex,
    n: usize,
) -> Result<Vec<ScoredEntry>, DimensionMismatch> {
    if index.is_empty() || n == 0 {
        return Ok(Vec::new());
    }
    if q.dim() != index.dim {
        return Err(DimensionMismatch {
            left: q.dim(),
            right: index.dim,
        });
    }
    let qn = q.norm();
    let mut scored = par::map_range(index.rows.len(), |i| ScoredEntry {
        entry_id: index.rows[i].entry_id,
        score: cosine_with_norms(q, qn, &index.rows[i].vector, index.norms[i]),
    });
    let order = |a: &ScoredEntry, b: &ScoredEntry| -> Ordering {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.entry_id.cmp(&b.entry_id))
    };
    if n < scored.len() {
        scored.select_nth_unstable_by(n - 1, order);
        scored.truncate(n);
    }
    scored.sort_by(order);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec())
    }

    fn index(rows: &[(u32, &[f64])]) -> EmbeddingIndex {
        let dim = rows.first().map_or(0, |r| r.1.len());
        EmbeddingIndex::new(
            dim,
            rows.iter()
                .map(|(id, xs)| IndexRow {
                    entry_id: EntryId(*id),
                    vector: v(xs),
                    passage: String::new(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn cosine_identities() {
        assert!((cosine(&v(&[3.0, -4.0]), &v(&[3.0, -4.0])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine(&v(&[1.0, 1.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((c - 0.7071).abs() < 1e-4 && (c - 2f64.sqrt() / 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_norm_cosine_is_zero() {
        assert_eq!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 2.0])).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(cosine(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn n_larger_than_index_returns_all() {
        let idx = index(&[(0, &[1.0, 0.0]), (1, &[0.0, 1.0]), (2, &[1.0, 1.0])]);
        let out = top_n_vector(&v(&[1.0, 0.2]), &idx, 5).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].entry_id, EntryId(0));
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let idx = index(&[(7, &[1.0, 0.0]), (3, &[1.0, 0.0]), (5, &[0.0, 1.0])]);
        let out = top_n_vector(&v(&[1.0, 0.0]), &idx, 2).unwrap();
        assert_eq!(
            out.iter().map(|s| s.entry_id).collect::<Vec<_>>(),
            vec![EntryId(3), EntryId(7)]
        );
    }

    #[test]
    fn empty_index_yields_nothing() {
        let out = top_n_vector(&v(&[1.0]), &EmbeddingIndex::default(), 5).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn index_rejects_bad_rows() {
        let row = |id, xs: &[f64]| IndexRow {
            entry_id: EntryId(id),
            vector: v(xs),
            passage: String::new(),
        };
        assert!(EmbeddingIndex::new(2, vec![row(0, &[1.0, 0.0]), row(0, &[0.0, 1.0])]).is_err());
        assert!(EmbeddingIndex::new(2, vec![row(0, &[1.0])]).is_err());
        assert!(EmbeddingIndex::new(1, vec![row(0, &[f64::NAN])]).is_err());
    }
}
