//! Dense coefficient tensors and nested mixed norms.
//!
//! A tensor holds `A(e_{j1}, …, e_{jm})` for every index tuple in row-major
//! order (`j1` slowest). Each entry is a vector of `value_dim` reals measured
//! in `ℓρ`; `value_dim = 1` is the scalar case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{Exponent, MixedExponents};

/// Default refusal threshold for dense storage, in scalar cells.
pub const DEFAULT_CELL_CAP: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorDoc", into = "TensorDoc")]
pub struct CoefficientTensor {
    dims: Vec<usize>,
    value_dim: usize,
    value_norm: Exponent,
    entries: Vec<f64>,
}

/// The JSON exchange document.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorDoc {
    dims: Vec<usize>,
    value_dim: usize,
    value_norm: Exponent,
    entries: Vec<f64>,
}

impl TryFrom<TensorDoc> for CoefficientTensor {
    type Error = Error;

    fn try_from(doc: TensorDoc) -> Result<Self> {
        CoefficientTensor::new(doc.dims, doc.value_dim, doc.value_norm, doc.entries)
    }
}

impl From<CoefficientTensor> for TensorDoc {
    fn from(t: CoefficientTensor) -> Self {
        TensorDoc {
            dims: t.dims,
            value_dim: t.value_dim,
            value_norm: t.value_norm,
            entries: t.entries,
        }
    }
}

fn cell_count(dims: &[usize], value_dim: usize, cap: usize) -> Result<usize> {
    let mut cells = value_dim;
    for &n in dims {
        cells = cells
            .checked_mul(n)
            .filter(|&c| c <= cap)
            .ok_or_else(|| Error::InvalidTensor(format!("{dims:?} x {value_dim} exceeds the cap of {cap} cells")))?;
    }
    if cells > cap {
        return Err(Error::InvalidTensor(format!("{cells} cells exceed the cap of {cap}")));
    }
    Ok(cells)
}

impl CoefficientTensor {
    pub fn new(
        dims: Vec<usize>,
        value_dim: usize,
        value_norm: Exponent,
        entries: Vec<f64>,
    ) -> Result<Self> {
        Self::with_cap(dims, value_dim, value_norm, entries, DEFAULT_CELL_CAP)
    }

    pub fn with_cap(
        dims: Vec<usize>,
        value_dim: usize,
        value_norm: Exponent,
        entries: Vec<f64>,
        cap: usize,
    ) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidTensor("arity must be at least 1".into()));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidTensor(format!("zero-sized axis in {dims:?}")));
        }
        if value_dim == 0 {
            return Err(Error::InvalidTensor("value_dim must be at least 1".into()));
        }
        if value_norm.value() < 1.0 {
            return Err(Error::InvalidTensor(format!("value norm {value_norm} must be >= 1")));
        }
        let cells = cell_count(&dims, value_dim, cap)?;
        if entries.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                got: entries.len(),
            });
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTensor(format!("non-finite entry at cell {pos}")));
        }
        Ok(CoefficientTensor {
            dims,
            value_dim,
            value_norm,
            entries,
        })
    }

    /// Scalar-valued tensor.
    pub fn scalar(dims: Vec<usize>, entries: Vec<f64>) -> Result<Self> {
        Self::new(dims, 1, Exponent::Finite(1.0), entries)
    }

    pub fn zeros(dims: Vec<usize>, value_dim: usize, value_norm: Exponent) -> Result<Self> {
        let cells = cell_count(&dims, value_dim, DEFAULT_CELL_CAP)?;
        Self::new(dims, value_dim, value_norm, vec![0.0; cells])
    }

    /// Scalar tensor `a_1 ⊗ … ⊗ a_m`.
    pub fn rank_one(factors: &[&[f64]]) -> Result<Self> {
        let dims: Vec<usize> = factors.iter().map(|f| f.len()).collect();
        let mut entries = vec![1.0];
        for f in factors {
            entries = entries
                .iter()
                .flat_map(|&e| f.iter().map(move |&x| e * x))
                .collect();
        }
        Self::scalar(dims, entries)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn value_norm(&self) -> Exponent {
        self.value_norm
    }

    pub fn is_scalar(&self) -> bool {
        self.value_dim == 1
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Number of index tuples.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    /// Row-major offset of an index tuple (0-based indices).
    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.arity());
        index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&j, &n)| acc * n + j)
    }

    pub fn entry(&self, index: &[usize]) -> &[f64] {
        let off = self.flat_index(index) * self.value_dim;
        &self.entries[off..off + self.value_dim]
    }

    pub fn entry_mut(&mut self, index: &[usize]) -> &mut [f64] {
        let off = self.flat_index(index) * self.value_dim;
        &mut self.entries[off..off + self.value_dim]
    }

    /// Replaces the value norm used on entries.
    pub fn with_value_norm(mut self, value_norm: Exponent) -> Result<Self> {
        if value_norm.value() < 1.0 {
            return Err(Error::InvalidTensor(format!("value norm {value_norm} must be >= 1")));
        }
        self.value_norm = value_norm;
        Ok(self)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.entries.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `‖A(e_{j1}, …, e_{jm})‖_ρ` for every index tuple, row-major.
    pub fn entry_norms(&self) -> Vec<f64> {
        if self.value_dim == 1 {
            return self.entries.iter().map(|v| v.abs()).collect();
        }
        self.entries
            .chunks_exact(self.value_dim)
            .map(|v| lp_norm(v, self.value_norm))
            .collect()
    }

    /// Nested mixed norm `ℓ_{q1}(ℓ_{q2}(…ℓ_{qm}))` of the entry norms, innermost
    /// index reduced first. `q_k = ∞` is a maximum; `q_k < 1` is the
    /// power-sum quasi-norm.
    pub fn mixed_norm(&self, q: &MixedExponents) -> Result<f64> {
        if q.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: q.len(),
            });
        }
        let mut level = self.entry_norms();
        for (&n, &qk) in self.dims.iter().zip(q.as_slice()).rev() {
            level = level.chunks_exact(n).map(|c| lp_norm(c, qk)).collect();
        }
        debug_assert_eq!(level.len(), 1);
        Ok(level[0])
    }

    /// Unnested `(Σ_{j1,…,jm} ‖A(e_{j1},…,e_{jm})‖^s)^{1/s}`.
    pub fn flat_norm(&self, s: Exponent) -> f64 {
        lp_norm(&self.entry_norms(), s)
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]` (0-based).
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        let m = self.arity();
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&a| a >= m || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::InvalidPermutation(perm.to_vec()));
        }
        let mut in_strides = vec![1usize; m];
        for a in (0..m.saturating_sub(1)).rev() {
            in_strides[a] = in_strides[a + 1] * self.dims[a + 1];
        }
        let out_dims: Vec<usize> = perm.iter().map(|&a| self.dims[a]).collect();
        let strides: Vec<usize> = perm.iter().map(|&a| in_strides[a]).collect();
        let d = self.value_dim;
        let mut entries = Vec::with_capacity(self.entries.len());
        let mut idx = vec![0usize; m];
        for _ in 0..self.len() {
            let src: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            entries.extend_from_slice(&self.entries[src * d..src * d + d]);
            advance(&mut idx, &out_dims);
        }
        Ok(CoefficientTensor {
            dims: out_dims,
            value_dim: d,
            value_norm: self.value_norm,
            entries,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tensor serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Row-major increment of a multi-index; wraps to all zeros after the last tuple.
pub(crate) fn advance(idx: &mut [usize], dims: &[usize]) {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < dims[a] {
            return;
        }
        idx[a] = 0;
    }
}

/// `ℓs` (quasi-)norm of a vector of reals, `s ∈ (0, ∞]`. Finite `s` is
/// evaluated as `max · (Σ (|v|/max)^s)^{1/s}` so large exponents do not
/// overflow; a single nonzero value is returned unchanged.
pub fn lp_norm(values: &[f64], s: Exponent) -> f64 {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    match s {
        Exponent::Infinite => max,
        _ if max == 0.0 => 0.0,
        Exponent::Finite(s) if s == 1.0 => values.iter().map(|v| v.abs()).sum(),
        Exponent::Finite(s) if s == 2.0 => {
            let sum: f64 = values.iter().map(|v| (v / max) * (v / max)).sum();
            max * sum.sqrt()
        }
        Exponent::Finite(s) => {
            let sum: f64 = values.iter().map(|v| (v.abs() / max).powf(s)).sum();
            if sum == 1.0 {
                max
            } else {
                max * sum.powf(1.0 / s)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fin(v: f64) -> Exponent {
        Exponent::Finite(v)
    }

    fn q(values: &[f64]) -> MixedExponents {
        MixedExponents::from_values(values).unwrap()
    }

    fn identity(n: usize) -> CoefficientTensor {
        let mut t = CoefficientTensor::zeros(vec![n, n], 1, fin(1.0)).unwrap();
        for i in 0..n {
            t.entry_mut(&[i, i])[0] = 1.0;
        }
        t
    }

    #[test]
    fn mixed_norm_examples() {
        assert_eq!(identity(4).mixed_norm(&q(&[1.0, 1.0])).unwrap(), 4.0);

        let ones = CoefficientTensor::scalar(vec![2, 2], vec![1.0; 4]).unwrap();
        assert_relative_eq!(ones.mixed_norm(&q(&[2.0, 2.0])).unwrap(), 2.0, max_relative = 1e-15);

        let r1 = CoefficientTensor::rank_one(&[&[1.0, 1.0], &[3.0, 4.0]]).unwrap();
        let qq = MixedExponents::new(vec![Exponent::Infinite, fin(2.0)]).unwrap();
        assert_relative_eq!(r1.mixed_norm(&qq).unwrap(), 5.0, max_relative = 1e-15);
    }

    #[test]
    fn mixed_norm_rejects_wrong_length() {
        assert!(identity(2).mixed_norm(&q(&[1.0])).is_err());
    }

    #[test]
    fn zero_tensor_has_zero_norms() {
        let z = CoefficientTensor::zeros(vec![3, 2], 2, fin(2.0)).unwrap();
        assert_eq!(z.mixed_norm(&q(&[0.5, 3.0])).unwrap(), 0.0);
        assert_eq!(z.flat_norm(fin(1.0)), 0.0);
    }

    #[test]
    fn flat_norm_examples() {
        let ones = CoefficientTensor::scalar(vec![2, 2], vec![1.0; 4]).unwrap();
        assert_eq!(ones.flat_norm(fin(1.0)), 4.0);

        // diagonal n-tensor whose entries are unit basis vectors of l_r
        let n = 5;
        let mut t = CoefficientTensor::zeros(vec![n, n, n], n, fin(3.0)).unwrap();
        for j in 0..n {
            t.entry_mut(&[j, j, j])[j] = 1.0;
        }
        for s in [0.5, 1.0, 2.5, 7.0] {
            assert_relative_eq!(t.flat_norm(fin(s)), (n as f64).powf(1.0 / s), max_relative = 1e-14);
        }
    }

    #[test]
    fn vector_entries_use_value_norm() {
        let t = CoefficientTensor::new(vec![1], 2, fin(1.0), vec![3.0, -4.0]).unwrap();
        assert_eq!(t.mixed_norm(&q(&[2.0])).unwrap(), 7.0);
        let t = t.with_value_norm(fin(2.0)).unwrap();
        assert_relative_eq!(t.mixed_norm(&q(&[2.0])).unwrap(), 5.0, max_relative = 1e-15);
        let t = t.with_value_norm(Exponent::Infinite).unwrap();
        assert_eq!(t.mixed_norm(&q(&[2.0])).unwrap(), 4.0);
    }

    #[test]
    fn strict_non_interchangeability_example() {
        // rows (1,1), (0,0): l_1(l_inf) = 1 but after transposing l_1(l_inf) = 2
        let t = CoefficientTensor::scalar(vec![2, 2], vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let qq = MixedExponents::new(vec![fin(1.0), Exponent::Infinite]).unwrap();
        let tt = t.permute_axes(&[1, 0]).unwrap();
        assert_eq!(t.mixed_norm(&qq).unwrap(), 1.0);
        assert_eq!(tt.mixed_norm(&qq).unwrap(), 2.0);
    }

    #[test]
    fn permutations() {
        let r1 = CoefficientTensor::rank_one(&[&[1.0, 2.0], &[3.0, 4.0, 5.0]]).unwrap();
        assert_eq!(r1.permute_axes(&[0, 1]).unwrap(), r1);
        let swapped = CoefficientTensor::rank_one(&[&[3.0, 4.0, 5.0], &[1.0, 2.0]]).unwrap();
        assert_eq!(r1.permute_axes(&[1, 0]).unwrap(), swapped);

        assert!(r1.permute_axes(&[0, 0]).is_err());
        assert!(r1.permute_axes(&[0]).is_err());
        assert!(r1.permute_axes(&[0, 2]).is_err());
    }

    #[test]
    fn permute_three_axes_moves_entries() {
        let entries: Vec<f64> = (0..24).map(f64::from).collect();
        let t = CoefficientTensor::scalar(vec![2, 3, 4], entries).unwrap();
        let p = t.permute_axes(&[2, 0, 1]).unwrap();
        assert_eq!(p.dims(), &[4, 2, 3]);
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..4 {
                    assert_eq!(p.entry(&[c, a, b]), t.entry(&[a, b, c]));
                }
            }
        }
    }

    #[test]
    fn construction_errors() {
        assert!(CoefficientTensor::scalar(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(CoefficientTensor::scalar(vec![2, 0], vec![]).is_err());
        assert!(CoefficientTensor::scalar(vec![], vec![1.0]).is_err());
        assert!(CoefficientTensor::scalar(vec![1], vec![f64::NAN]).is_err());
        assert!(CoefficientTensor::new(vec![1], 1, fin(0.5), vec![1.0]).is_err());
        assert!(CoefficientTensor::with_cap(vec![4, 4], 1, fin(1.0), vec![0.0; 16], 15).is_err());
        assert!(CoefficientTensor::zeros(vec![1 << 15, 1 << 15], 2, fin(2.0)).is_err());
    }

    #[test]
    fn lp_norm_large_exponent_does_not_overflow() {
        let v = [1e20, 1e20];
        assert_relative_eq!(lp_norm(&v, fin(30.0)), 1e20 * 2f64.powf(1.0 / 30.0), max_relative = 1e-14);
        assert_eq!(lp_norm(&[0.0, -7.0, 0.0], fin(4.5)), 7.0);
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let t = CoefficientTensor::new(
            vec![2, 1],
            2,
            Exponent::Infinite,
            vec![0.1, -1.0 / 3.0, 1e-300, 12345.678901234567],
        )
        .unwrap();
        let s = t.to_json();
        assert!(s.contains("\"value_norm\":\"inf\""));
        let back = CoefficientTensor::from_json(&s).unwrap();
        assert_eq!(back, t);
        assert!(CoefficientTensor::from_json(r#"{"dims":[1],"value_dim":1,"value_norm":1,"entries":[1],"extra":0}"#).is_err());
        assert!(CoefficientTensor::from_json(r#"{"dims":[2],"value_dim":1,"value_norm":1,"entries":[1]}"#).is_err());
    }
}
