//! Sparse coefficient vectors and symmetric triplet matrices.

/// Index/value pairs with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(v: &[f64]) -> Self {
        let mut out = Self::zeros(v.len());
        for (i, &x) in v.iter().enumerate() {
            if x != 0.0 {
                out.indices.push(i);
                out.values.push(x);
            }
        }
        out
    }

    /// Builds from arbitrary pairs; zeros are dropped and duplicates rejected.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Option<Self> {
        pairs.sort_by_key(|p| p.0);
        let mut out = Self::zeros(dim);
        for (i, x) in pairs {
            if i >= dim || out.indices.last() == Some(&i) {
                return None;
            }
            if x != 0.0 {
                out.indices.push(i);
                out.values.push(x);
            }
        }
        Some(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.indices.binary_search(&i) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for (i, x) in self.iter() {
            v[i] = x;
        }
        v
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).sum()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SparseVector) -> f64 {
        let a = self.to_dense();
        let b = other.to_dense();
        a.iter()
            .zip(&b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }
}

/// Symmetric matrix stored as its upper triangle (row <= col), sorted by (row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTriplets {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymmetricTriplets {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds from upper-triangle entries; zeros are dropped.
    pub fn from_upper(dim: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.retain(|e| e.2 != 0.0);
        for e in &mut entries {
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        entries.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz_upper(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if i <= j { (i, j) } else { (j, i) };
        match self
            .entries
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
        {
            Ok(k) => self.entries[k].2,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Off-diagonal support as (i, j) pairs with i < j.
    pub fn off_diagonal_support(&self) -> Vec<(usize, usize)> {
        self.entries
            .iter()
            .filter(|e| e.0 != e.1)
            .map(|e| (e.0, e.1))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_drops_zeros() {
        let v = SparseVector::from_dense(&[0.0, 1.5, 0.0, -2.0]);
        assert_eq!(v.nnz(), 2);
        assert_eq!(v.indices(), &[1, 3]);
        assert_eq!(v.to_dense(), vec![0.0, 1.5, 0.0, -2.0]);
        assert_eq!(v.get(2), 0.0);
        assert_eq!(v.l1_norm(), 3.5);
    }

    #[test]
    fn duplicate_pairs_rejected() {
        assert!(SparseVector::from_pairs(3, vec![(1, 1.0), (1, 2.0)]).is_none());
        assert!(SparseVector::from_pairs(3, vec![(3, 1.0)]).is_none());
    }

    #[test]
    fn triplets_are_symmetric() {
        let t = SymmetricTriplets::from_upper(3, vec![(1, 0, 0.5), (2, 2, 1.0), (0, 0, 2.0)]);
        assert_eq!(t.entries(), &[(0, 0, 2.0), (0, 1, 0.5), (2, 2, 1.0)]);
        assert_eq!(t.get(1, 0), t.get(0, 1));
        let d = t.to_dense();
        assert_eq!(d, d.transpose());
        assert_eq!(t.off_diagonal_support(), vec![(0, 1)]);
    }
}
