use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};

use super::{EmbedError, Result};
use crate::corpus::Id;

/// Id-indexed dense `f32` table. Row order matches id order.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    ids: Vec<Id>,
    matrix: Array2<f32>,
    index: HashMap<Id, usize>,
}

impl PartialEq for EmbeddingTable {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids && self.matrix == other.matrix
    }
}

impl EmbeddingTable {
    pub fn new(ids: Vec<Id>, matrix: Array2<f32>) -> Result<Self> {
        if matrix.nrows() != ids.len() || matrix.ncols() == 0 {
            return Err(EmbedError::Shape {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                ids: ids.len(),
                dim: matrix.ncols(),
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(EmbedError::DuplicateId(id.clone()));
            }
            if matrix.row(i).iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::NonFinite { row: i, id: id.clone() });
            }
        }
        // Standard layout keeps `as_slice` available for serialisation.
        let matrix = if matrix.is_standard_layout() { matrix } else { matrix.as_standard_layout().to_owned() };
        Ok(EmbeddingTable { ids, matrix, index })
    }

    /// Builds a table from `f64` rows, rounding to `f32`.
    pub fn from_f64(ids: Vec<Id>, matrix: &Array2<f64>) -> Result<Self> {
        Self::new(ids, matrix.mapv(|v| v as f32))
    }

    pub fn ids(&self) -> &[Id] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn matrix(&self) -> &Array2<f32> {
        &self.matrix
    }

    pub fn position<Q: AsRef<str> + ?Sized>(&self, id: &Q) -> Option<usize> {
        self.index.get(id.as_ref()).copied()
    }

    pub fn contains<Q: AsRef<str> + ?Sized>(&self, id: &Q) -> bool {
        self.index.contains_key(id.as_ref())
    }

    pub fn row<Q: AsRef<str> + ?Sized>(&self, id: &Q) -> Option<ArrayView1<'_, f32>> {
        self.position(id).map(|i| self.matrix.row(i))
    }

    pub fn row_f64<Q: AsRef<str> + ?Sized>(&self, id: &Q) -> Option<Vec<f64>> {
        self.row(id).map(|r| r.iter().map(|v| *v as f64).collect())
    }

    pub fn row_at(&self, i: usize) -> ArrayView1<'_, f32> {
        self.matrix.row(i)
    }

    /// Cosine similarity between two rows, computed in `f64`.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.row(a)?.iter().map(|v| *v as f64), self.row(b)?.iter().map(|v| *v as f64)))
    }
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.into_iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_duplicates_and_non_finite() {
        let ids = vec![Id::new("a"), Id::new("a")];
        assert!(matches!(
            EmbeddingTable::new(ids, array![[1.0f32], [2.0]]),
            Err(EmbedError::DuplicateId(_))
        ));
        let ids = vec![Id::new("a"), Id::new("b")];
        assert!(matches!(
            EmbeddingTable::new(ids, array![[1.0f32], [f32::NAN]]),
            Err(EmbedError::NonFinite { row: 1, .. })
        ));
    }

    #[test]
    fn lookup_and_cosine() {
        let t = EmbeddingTable::new(vec!["x".into(), "y".into()], array![[1.0f32, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(t.position("y"), Some(1));
        assert!((t.cosine("x", "y").unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(t.row("z").is_none());
    }
}
