//! Extremal operator families and Rademacher matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{conjugate, Exponent, ExponentProfile, MixedExponents};
use crate::opnorm::{ascend_with, duality_functional, dual_maximizer, AscentConfig, NormEstimate, NormStatus};
use crate::tensor::{lp_norm, CoefficientTensor};

/// `A(x^(1), …, x^(m)) = Σ_j x_j^(1)⋯x_j^(m) z_j` on `n` coordinates, with
/// `z_j = e_j ∈ ℓr^d` for a vector-valued profile and `z_j = 1` for a scalar
/// one (`target_dim = 1`).
pub fn diagonal_operator(n: usize, profile: &ExponentProfile, target_dim: usize) -> Result<CoefficientTensor> {
    if n == 0 {
        return Err(Error::InvalidTensor("diagonal witness needs n >= 1".into()));
    }
    let m = profile.m();
    let (d, rho) = if profile.is_scalar() {
        if target_dim != 1 {
            return Err(Error::InvalidTensor(format!(
                "scalar profile needs target_dim 1, got {target_dim}"
            )));
        }
        (1, Exponent::Finite(1.0))
    } else {
        if target_dim < n {
            return Err(Error::InvalidTensor(format!(
                "target_dim {target_dim} must be at least n = {n}"
            )));
        }
        (target_dim, Exponent::Finite(profile.r()))
    };
    let mut t = CoefficientTensor::zeros(vec![n; m], d, rho)?;
    for j in 0..n {
        let cell = t.entry_mut(&vec![j; m]);
        if d == 1 {
            cell[0] = 1.0;
        } else {
            cell[j] = 1.0;
        }
    }
    Ok(t)
}

/// Diagonal witness of arity `arity` on `n` coordinates, lifted `lifts`
/// times (see [`lift_operator`]), evaluated without dense storage.
///
/// Every nonzero entry has norm one, so the mixed norm is `n^{1/q}` at the
/// first diagonal level and passes unchanged through the lifted levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalFamily {
    pub n: usize,
    pub arity: usize,
    pub lifts: usize,
}

impl DiagonalFamily {
    pub fn new(n: usize, arity: usize, lifts: usize) -> Result<Self> {
        if n == 0 || arity == 0 {
            return Err(Error::InvalidTensor("diagonal family needs n, arity >= 1".into()));
        }
        Ok(DiagonalFamily { n, arity, lifts })
    }

    pub fn total_arity(&self) -> usize {
        self.arity + self.lifts
    }

    /// O(n) mixed norm. `q` covers the lifted levels first.
    pub fn mixed_norm(&self, q: &MixedExponents) -> Result<f64> {
        if q.len() != self.total_arity() {
            return Err(Error::DimensionMismatch {
                expected: self.total_arity(),
                got: q.len(),
            });
        }
        let q = q.as_slice();
        // one unit entry per diagonal index; inner levels see a single value
        let per_index = q[self.lifts + 1..].iter().rev().fold(1.0, |v, &qk| lp_norm(&[v], qk));
        let diagonal = lp_norm(&vec![per_index; self.n], q[self.lifts]);
        Ok(q[..self.lifts].iter().rev().fold(diagonal, |v, &qk| lp_norm(&[v], qk)))
    }

    /// Dense tensor: the diagonal witness for `profile` lifted with leading
    /// size `n` at each step.
    pub fn to_tensor(&self, profile: &ExponentProfile) -> Result<CoefficientTensor> {
        if profile.m() != self.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity,
                got: profile.m(),
            });
        }
        let d = if profile.is_scalar() { 1 } else { self.n };
        let mut t = diagonal_operator(self.n, profile, d)?;
        for _ in 0..self.lifts {
            t = lift_operator(&t, self.n)?;
        }
        Ok(t)
    }
}

/// `B(x^(1), x^(2), …, x^(m)) = x_1^(1) · T(x^(2), …, x^(m))` with a new
/// leading slot of size `leading`.
pub fn lift_operator(t: &CoefficientTensor, leading: usize) -> Result<CoefficientTensor> {
    if leading == 0 {
        return Err(Error::InvalidTensor("leading size must be at least 1".into()));
    }
    let mut dims = Vec::with_capacity(t.arity() + 1);
    dims.push(leading);
    dims.extend_from_slice(t.dims());
    let mut entries = t.entries().to_vec();
    entries.resize(t.entries().len() * leading, 0.0);
    CoefficientTensor::new(dims, t.value_dim(), t.value_norm(), entries)
}

/// Moves the last slot of a scalar tensor into the value:
/// `S(x^(1), …, x^(m−1)) = (T(x^(1), …, x^(m−1), e_j))_j ∈ ℓρ^{n_m}`.
pub fn slice_operator(t: &CoefficientTensor, rho: Exponent) -> Result<CoefficientTensor> {
    if !t.is_scalar() {
        return Err(Error::InvalidTensor("slicing needs a scalar-valued tensor".into()));
    }
    if t.arity() < 2 {
        return Err(Error::InvalidTensor("slicing needs arity at least 2".into()));
    }
    let (last, rest) = t.dims().split_last().expect("arity >= 2");
    // row-major storage already groups the last index contiguously
    CoefficientTensor::new(rest.to_vec(), *last, rho, t.entries().to_vec())
}

/// Largest supported Rademacher level.
pub const MAX_RADEMACHER_LEVEL: usize = 20;

/// The `2^n × n` sign matrix `R_n`: `R_1 = (1, −1)ᵀ` and `R_{n+1}` stacks
/// `(1 | R_n)` over `(−1 | R_n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RademacherMatrix {
    n: usize,
    entries: Vec<i8>,
}

impl RademacherMatrix {
    pub fn level(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        1 << self.n
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// `R_nᵀ R_n` in exact integer arithmetic, row-major `n × n`.
    pub fn gram(&self) -> Vec<i64> {
        let n = self.n;
        let mut g = vec![0i64; n * n];
        for i in 0..self.rows() {
            let row = self.row(i);
            for a in 0..n {
                for b in 0..n {
                    g[a * n + b] += i64::from(row[a]) * i64::from(row[b]);
                }
            }
        }
        g
    }

    /// One line per row, entries separated by commas.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows() * (3 * self.n + 1));
        for i in 0..self.rows() {
            let line: Vec<String> = self.row(i).iter().map(i8::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    fn to_dense(&self, direction: Direction) -> DMatrix<f64> {
        match direction {
            Direction::Forward => DMatrix::from_fn(self.rows(), self.n, |i, j| f64::from(self.get(i, j))),
            Direction::Transpose => DMatrix::from_fn(self.n, self.rows(), |i, j| f64::from(self.get(j, i))),
        }
    }
}

pub fn rademacher(n: usize) -> Result<RademacherMatrix> {
    if n == 0 || n > MAX_RADEMACHER_LEVEL {
        return Err(Error::RademacherLevel(n));
    }
    let mut entries: Vec<i8> = vec![1, -1];
    for level in 1..n {
        let rows = 1 << level;
        let mut next = Vec::with_capacity(2 * rows * (level + 1));
        for lead in [1i8, -1] {
            for i in 0..rows {
                next.push(lead);
                next.extend_from_slice(&entries[i * level..(i + 1) * level]);
            }
        }
        entries = next;
    }
    Ok(RademacherMatrix { n, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `R_n : ℓ_t^n → ℓ_s^{2^n}`
    Forward,
    /// `R_nᵀ : ℓ_t^{2^n} → ℓ_s^n`
    Transpose,
}

/// `‖M : ℓ_t → ℓ_s‖` for `M = R_n` or `R_nᵀ`, exponents in `[1, ∞]`.
///
/// Exact for `(2, 2)` (square root of the top eigenvalue of the Gram
/// matrix), for `t = 1` (largest column `ℓs` norm) and for `s = ∞` (largest
/// row `ℓ_{t*}` norm). Other pairs fall back to ascent on the bilinear form
/// `(y, x) ↦ yᵀ M x` over `B_{ℓ_{s*}} × B_{ℓ_t}`, a lower bound.
pub fn rademacher_matrix_norm(
    r: &RademacherMatrix,
    from_exp: Exponent,
    to_exp: Exponent,
    direction: Direction,
) -> Result<NormEstimate> {
    rademacher_matrix_norm_with(r, from_exp, to_exp, direction, &AscentConfig::default())
}

pub fn rademacher_matrix_norm_with(
    r: &RademacherMatrix,
    from_exp: Exponent,
    to_exp: Exponent,
    direction: Direction,
    cfg: &AscentConfig,
) -> Result<NormEstimate> {
    for e in [from_exp, to_exp] {
        if e.value() < 1.0 {
            return Err(Error::InvalidExponent(format!("{e} is not in [1, inf]")));
        }
    }
    let m = r.to_dense(direction);
    let exact = |value: f64, x: Vec<f64>| {
        let y = duality_functional((&m * nalgebra::DVector::from_vec(x.clone())).as_slice(), to_exp);
        NormEstimate {
            value,
            status: NormStatus::Exact,
            restarts_used: 0,
            iterations: 0,
            reinitializations: 0,
            argmax: vec![y, x],
        }
    };
    let two = Exponent::Finite(2.0);

    if from_exp == two && to_exp == two {
        let gram = DMatrix::from_fn(r.n, r.n, |a, b| r.gram()[a * r.n + b] as f64);
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.imax();
        let value = eig.eigenvalues[top].max(0.0).sqrt();
        let v = eig.eigenvectors.column(top);
        let x: Vec<f64> = match direction {
            Direction::Forward => v.iter().copied().collect(),
            Direction::Transpose => {
                let u = r.to_dense(Direction::Forward) * v;
                let norm = u.norm();
                u.iter().map(|a| a / norm).collect()
            }
        };
        return Ok(exact(value, x));
    }
    if from_exp == Exponent::Finite(1.0) {
        let (best, value) = (0..m.ncols())
            .map(|j| (j, lp_norm(m.column(j).as_slice(), to_exp)))
            .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        let mut x = vec![0.0; m.ncols()];
        x[best] = 1.0;
        return Ok(exact(value, x));
    }
    if to_exp.is_infinite() {
        let dual = conjugate(from_exp)?;
        let (best, value) = (0..m.nrows())
            .map(|i| {
                let row: Vec<f64> = m.row(i).iter().copied().collect();
                (i, lp_norm(&row, dual))
            })
            .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        let row: Vec<f64> = m.row(best).iter().copied().collect();
        let x = dual_maximizer(&row, from_exp).expect("rademacher rows are nonzero");
        return Ok(exact(value, x));
    }

    let entries: Vec<f64> = (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect();
    let form = CoefficientTensor::scalar(vec![m.nrows(), m.ncols()], entries)?;
    ascend_with(&form, &[conjugate(to_exp)?, from_exp], cfg)
}
