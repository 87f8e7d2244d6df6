//! Operator norms `‖A‖ = sup ‖A(x^(1), …, x^(m))‖_ρ` over the unit balls of
//! `ℓ_{p1} × … × ℓ_{pm}`.
//!
//! Three routes are provided: alternating ascent (always a lower bound),
//! sign enumeration (exact when at most one slot has finite `p`), and the
//! closed form for the diagonal witness family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{conjugate, lambda_exponent, Exponent, ExponentProfile};
use crate::tensor::{advance, lp_norm, CoefficientTensor};

pub const DEFAULT_RESTARTS: usize = 16;
pub const DEFAULT_MAX_SWEEPS: usize = 500;
pub const DEFAULT_REL_TOL: f64 = 1e-10;
/// Maximum number of enumerated sign bits.
pub const ENUMERATION_CAP_BITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormStatus {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub status: NormStatus,
    pub restarts_used: usize,
    /// Ascent sweeps summed over all starts, or sign patterns visited.
    pub iterations: usize,
    /// Slots re-drawn at random because their induced functional vanished.
    pub reinitializations: usize,
    pub argmax: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_sweeps: usize,
    pub rel_tol: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig {
            seed: 0,
            restarts: DEFAULT_RESTARTS,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

fn check_exponents(t: &CoefficientTensor, p: &[Exponent]) -> Result<()> {
    if p.len() != t.arity() {
        return Err(Error::DimensionMismatch {
            expected: t.arity(),
            got: p.len(),
        });
    }
    if let Some(e) = p.iter().find(|e| e.value() <= 1.0) {
        return Err(Error::InvalidExponent(format!("domain exponent {e} must be in (1, inf]")));
    }
    Ok(())
}

/// Contracts every slot except `skip` against `args`. Returns the output
/// vector (`skip = None`, length `d`) or the `n_k × d` block of partial
/// evaluations `A(x^(1), …, e_j, …, x^(m))` for slot `k`.
fn contract(t: &CoefficientTensor, args: &[Vec<f64>], skip: Option<usize>) -> Vec<f64> {
    let d = t.value_dim();
    let dims = t.dims();
    let rows = skip.map_or(1, |k| dims[k]);
    let mut out = vec![0.0; rows * d];
    let mut idx = vec![0usize; dims.len()];
    for cell in t.entries().chunks_exact(d) {
        let mut w = 1.0;
        for (slot, &j) in idx.iter().enumerate() {
            if Some(slot) != skip {
                w *= args[slot][j];
            }
        }
        if w != 0.0 {
            let row = skip.map_or(0, |k| idx[k]);
            for (o, v) in out[row * d..row * d + d].iter_mut().zip(cell) {
                *o += w * v;
            }
        }
        advance(&mut idx, dims);
    }
    out
}

/// `A(x^(1), …, x^(m))` as a `value_dim` vector.
pub fn evaluate(t: &CoefficientTensor, args: &[Vec<f64>]) -> Vec<f64> {
    contract(t, args, None)
}

/// `‖A(x^(1), …, x^(m))‖_ρ`.
pub fn evaluate_norm(t: &CoefficientTensor, args: &[Vec<f64>]) -> f64 {
    let y = evaluate(t, args);
    if t.is_scalar() {
        y[0].abs()
    } else {
        lp_norm(&y, t.value_norm())
    }
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Norming functional of `y ∈ ℓρ`: `φ ∈ ℓ_{ρ*}`, `‖φ‖ = 1`, `φ(y) = ‖y‖_ρ`.
/// Sign ties go to `+1`; for `ρ = ∞` (and for `y = 0` when `ρ > 1`) the
/// lowest-index maximal coordinate is used.
pub fn duality_functional(y: &[f64], rho: Exponent) -> Vec<f64> {
    if y.len() == 1 {
        return vec![sign(y[0])];
    }
    let max_at = |y: &[f64]| {
        let mut best = 0;
        for (i, v) in y.iter().enumerate() {
            if v.abs() > y[best].abs() {
                best = i;
            }
        }
        let mut phi = vec![0.0; y.len()];
        phi[best] = sign(y[best]);
        phi
    };
    match rho {
        Exponent::Finite(r) if r == 1.0 => y.iter().map(|&v| sign(v)).collect(),
        Exponent::Infinite => max_at(y),
        Exponent::Finite(r) => {
            let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                return max_at(y);
            }
            let powered: Vec<f64> = y.iter().map(|v| (v.abs() / scale).powf(r - 1.0)).collect();
            let rstar = r / (r - 1.0);
            let norm = lp_norm(&powered, Exponent::Finite(rstar));
            y.iter().zip(powered).map(|(&v, w)| sign(v) * w / norm).collect()
        }
    }
}

/// Maximiser of `x ↦ Σ c_j x_j` over the unit ball of `ℓp`, `p ∈ (1, ∞]`:
/// `x_j ∝ sign(c_j)|c_j|^{p*−1}`. `None` when `c = 0`.
pub fn dual_maximizer(c: &[f64], p: Exponent) -> Option<Vec<f64>> {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    match p {
        Exponent::Infinite => Some(c.iter().map(|&v| sign(v)).collect()),
        Exponent::Finite(p) => {
            let pstar = p / (p - 1.0);
            let powered: Vec<f64> = c.iter().map(|v| (v.abs() / scale).powf(pstar - 1.0)).collect();
            let norm = lp_norm(&powered, Exponent::Finite(p));
            Some(c.iter().zip(powered).map(|(&v, w)| sign(v) * w / norm).collect())
        }
    }
}

/// `‖c‖_{p*}`, the value attained by [`dual_maximizer`].
fn dual_norm(c: &[f64], p: Exponent) -> f64 {
    let pstar = conjugate(p).expect("domain exponents exceed 1");
    lp_norm(c, pstar)
}

fn unit_vector(n: usize, p: Exponent) -> Vec<f64> {
    vec![(n as f64).powf(-p.recip()); n]
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize, p: Exponent) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = lp_norm(&v, p);
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

struct Run {
    value: f64,
    args: Vec<Vec<f64>>,
    sweeps: usize,
    reinits: usize,
}

fn ascend_from(
    t: &CoefficientTensor,
    p: &[Exponent],
    mut args: Vec<Vec<f64>>,
    rng: &mut ChaCha8Rng,
    cfg: &AscentConfig,
) -> Run {
    let m = t.arity();
    let d = t.value_dim();
    let rho = t.value_norm();
    let single_exact_slot = m == 1 && t.is_scalar();
    let mut objective = evaluate_norm(t, &args);
    let mut sweeps = 0;
    let mut reinits = 0;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        for k in 0..m {
            // linearise the output first, then solve the slot in closed form
            let phi = duality_functional(&evaluate(t, &args), rho);
            let block = contract(t, &args, Some(k));
            let c: Vec<f64> = block
                .chunks_exact(d)
                .map(|row| row.iter().zip(&phi).map(|(a, b)| a * b).sum())
                .collect();
            match dual_maximizer(&c, p[k]) {
                Some(x) => args[k] = x,
                None => {
                    args[k] = random_unit(rng, t.dims()[k], p[k]);
                    reinits += 1;
                }
            }
        }
        let next = evaluate_norm(t, &args);
        debug_assert!(
            next >= objective * (1.0 - 1e-9) - 1e-300,
            "ascent objective decreased: {objective} -> {next}"
        );
        let improvement = next - objective;
        objective = objective.max(next);
        if single_exact_slot || improvement <= cfg.rel_tol * objective {
            break;
        }
    }
    let value = evaluate_norm(t, &args);
    Run {
        value,
        args,
        sweeps,
        reinits,
    }
}

/// Alternating ascent with the default sweep limits.
pub fn ascend(t: &CoefficientTensor, p: &[Exponent], seed: u64, restarts: usize) -> Result<NormEstimate> {
    ascend_with(
        t,
        p,
        &AscentConfig {
            seed,
            restarts,
            ..AscentConfig::default()
        },
    )
}

/// Best of the all-ones start and `cfg.restarts` random starts. Start `i`
/// draws from its own ChaCha stream, so the result does not depend on the
/// thread schedule; ties keep the lowest start index.
pub fn ascend_with(t: &CoefficientTensor, p: &[Exponent], cfg: &AscentConfig) -> Result<NormEstimate> {
    check_exponents(t, p)?;
    let dims = t.dims().to_vec();
    if t.is_zero() {
        return Ok(NormEstimate {
            value: 0.0,
            status: NormStatus::LowerBound,
            restarts_used: 0,
            iterations: 0,
            reinitializations: 0,
            argmax: dims.iter().zip(p).map(|(&n, &pk)| unit_vector(n, pk)).collect(),
        });
    }
    let runs: Vec<Run> = (0..=cfg.restarts)
        .into_par_iter()
        .map(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(start as u64);
            let init: Vec<Vec<f64>> = if start == 0 {
                dims.iter().zip(p).map(|(&n, &pk)| unit_vector(n, pk)).collect()
            } else {
                dims.iter().zip(p).map(|(&n, &pk)| random_unit(&mut rng, n, pk)).collect()
            };
            ascend_from(t, p, init, &mut rng, cfg)
        })
        .collect();
    let iterations = runs.iter().map(|r| r.sweeps).sum();
    let reinitializations = runs.iter().map(|r| r.reinits).sum();
    let restarts_used = runs.len();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("at least one start");
    Ok(NormEstimate {
        value: best.value,
        status: NormStatus::LowerBound,
        restarts_used,
        iterations,
        reinitializations,
        argmax: best.args,
    })
}

/// How [`enumerate_exact`] splits the slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationPlan {
    /// Slot solved in closed dual-norm form (scalar targets only).
    pub resolved: Option<usize>,
    pub enumerated: Vec<usize>,
    pub bits: usize,
}

/// Checks whether exact enumeration applies and which slot is resolved in
/// closed form: the finite slot if there is one, otherwise the largest
/// (lowest index on ties).
pub fn enumeration_plan(t: &CoefficientTensor, p: &[Exponent]) -> Result<EnumerationPlan> {
    check_exponents(t, p)?;
    let finite: Vec<usize> = (0..p.len()).filter(|&k| !p[k].is_infinite()).collect();
    let resolved = if t.is_scalar() {
        if finite.len() > 1 {
            return Err(Error::UnsupportedPattern(format!(
                "{} finite slots, at most one allowed for scalar targets",
                finite.len()
            )));
        }
        Some(finite.first().copied().unwrap_or_else(|| {
            let dims = t.dims();
            (0..dims.len()).fold(0, |best, k| if dims[k] > dims[best] { k } else { best })
        }))
    } else {
        if !finite.is_empty() {
            return Err(Error::UnsupportedPattern(
                "vector-valued targets need every domain exponent infinite".into(),
            ));
        }
        None
    };
    let enumerated: Vec<usize> = (0..p.len()).filter(|&k| Some(k) != resolved).collect();
    let bits = enumerated.iter().map(|&k| t.dims()[k]).sum();
    if bits > ENUMERATION_CAP_BITS {
        return Err(Error::EnumerationCap {
            bits,
            cap: ENUMERATION_CAP_BITS,
        });
    }
    Ok(EnumerationPlan {
        resolved,
        enumerated,
        bits,
    })
}

/// Exact operator norm by enumerating sign vectors in every slot with
/// `p = ∞` (extreme points of the cube), resolving at most one scalar slot
/// by duality. The global sign of the first enumerated coordinate is fixed
/// to `+1`, which halves the search without changing the maximum.
pub fn enumerate_exact(t: &CoefficientTensor, p: &[Exponent]) -> Result<NormEstimate> {
    let plan = enumeration_plan(t, p)?;
    let dims = t.dims();
    let free_bits = plan.bits.saturating_sub(1);

    let signs_for = |mask: u64| -> Vec<Vec<f64>> {
        let mut args: Vec<Vec<f64>> = dims.iter().map(|&n| vec![1.0; n]).collect();
        let mut bit = 0;
        for &k in &plan.enumerated {
            for j in 0..dims[k] {
                if bit > 0 && (mask >> (bit - 1)) & 1 == 1 {
                    args[k][j] = -1.0;
                }
                bit += 1;
            }
        }
        args
    };
    let value_of = |args: &[Vec<f64>]| -> f64 {
        match plan.resolved {
            Some(k) => dual_norm(&contract(t, args, Some(k)), p[k]),
            None => evaluate_norm(t, args),
        }
    };

    let patterns = 1u64 << free_bits;
    let (value, mask) = (0..patterns)
        .into_par_iter()
        .map(|mask| (value_of(&signs_for(mask)), mask))
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("at least one pattern");

    let mut argmax = signs_for(mask);
    if let Some(k) = plan.resolved {
        let c = contract(t, &argmax, Some(k));
        argmax[k] = dual_maximizer(&c, p[k]).unwrap_or_else(|| unit_vector(dims[k], p[k]));
    }
    Ok(NormEstimate {
        value,
        status: NormStatus::Exact,
        restarts_used: 0,
        iterations: patterns as usize,
        reinitializations: 0,
        argmax,
    })
}

/// Exact enumeration when the exponent pattern allows it, ascent otherwise.
pub fn operator_norm(t: &CoefficientTensor, p: &[Exponent], cfg: &AscentConfig) -> Result<NormEstimate> {
    match enumeration_plan(t, p) {
        Ok(_) => enumerate_exact(t, p),
        Err(Error::UnsupportedPattern(_)) | Err(Error::EnumerationCap { .. }) => ascend_with(t, p, cfg),
        Err(e) => Err(e),
    }
}

/// Norm of the diagonal witness `Σ_j x_j^(1)⋯x_j^(m) e_j` into `ℓr`
/// (scalar: `Σ_j x_j^(1)⋯x_j^(m)`) on `n` coordinates: `n^{1/λ_{m,r}}`.
pub fn diagonal_norm_closed_form(n: usize, profile: &ExponentProfile) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidSizes("n must be positive".into()));
    }
    let lambda = lambda_exponent(profile, 1)?;
    Ok((n as f64).powf(1.0 / lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const INF: Exponent = Exponent::Infinite;

    fn fin(v: f64) -> Exponent {
        Exponent::Finite(v)
    }

    #[test]
    fn sign_matrix_enumerates_to_two() {
        let t = CoefficientTensor::scalar(vec![2, 2], vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        let e = enumerate_exact(&t, &[INF, INF]).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.status, NormStatus::Exact);
        assert_eq!(evaluate_norm(&t, &e.argmax), 2.0);
    }

    #[test]
    fn diagonal_enumerates_to_n() {
        let mut t = CoefficientTensor::zeros(vec![4, 4], 1, fin(1.0)).unwrap();
        for i in 0..4 {
            t.entry_mut(&[i, i])[0] = 1.0;
        }
        assert_eq!(enumerate_exact(&t, &[INF, INF]).unwrap().value, 4.0);
    }

    #[test]
    fn rank_one_with_finite_slot() {
        let t = CoefficientTensor::rank_one(&[&[1.0, -2.0], &[1.0, 1.0, 1.0]]).unwrap();
        let e = enumerate_exact(&t, &[INF, fin(3.0)]).unwrap();
        // ||a||_1 * ||b||_{3/2} = 3 * 3^{2/3}
        let expected = 3.0 * 3f64.powf(2.0 / 3.0);
        assert_relative_eq!(e.value, expected, max_relative = 1e-14);
        assert_relative_eq!(evaluate_norm(&t, &e.argmax), expected, max_relative = 1e-12);
    }

    #[test]
    fn ascend_rank_one_matches_duality() {
        let a = [0.3, -1.2, 0.7];
        let b = [2.0, 0.5, -0.25, 1.0];
        let t = CoefficientTensor::rank_one(&[&a, &b]).unwrap();
        for (p1, p2) in [(fin(2.0), fin(3.0)), (INF, fin(1.5)), (fin(4.0), INF), (INF, INF)] {
            let e = ascend(&t, &[p1, p2], 7, 4).unwrap();
            let expected = lp_norm(&a, conjugate(p1).unwrap()) * lp_norm(&b, conjugate(p2).unwrap());
            assert_relative_eq!(e.value, expected, max_relative = 1e-10);
            assert_eq!(e.status, NormStatus::LowerBound);
        }
        let exact = enumerate_exact(&t, &[INF, INF]).unwrap();
        assert_relative_eq!(exact.value, lp_norm(&a, fin(1.0)) * lp_norm(&b, fin(1.0)), max_relative = 1e-14);
    }

    #[test]
    fn zero_tensor() {
        let t = CoefficientTensor::zeros(vec![3, 2], 1, fin(1.0)).unwrap();
        assert_eq!(ascend(&t, &[INF, fin(2.0)], 0, 4).unwrap().value, 0.0);
        let e = enumerate_exact(&t, &[INF, INF]).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.status, NormStatus::Exact);
    }

    #[test]
    fn diagonal_ascent_matches_closed_form() {
        let n = 3;
        let mut t = CoefficientTensor::zeros(vec![n, n], 1, fin(1.0)).unwrap();
        for i in 0..n {
            t.entry_mut(&[i, i])[0] = 1.0;
        }
        assert_relative_eq!(ascend(&t, &[INF, INF], 1, 16).unwrap().value, 3.0, max_relative = 1e-12);

        let n = 16;
        let mut t = CoefficientTensor::zeros(vec![n, n], 1, fin(1.0)).unwrap();
        for i in 0..n {
            t.entry_mut(&[i, i])[0] = 1.0;
        }
        let profile = ExponentProfile::scalar(vec![fin(4.0), fin(4.0)]).unwrap();
        let closed = diagonal_norm_closed_form(n, &profile).unwrap();
        assert_relative_eq!(closed, 4.0, max_relative = 1e-15);
        let e = ascend(&t, &[fin(4.0), fin(4.0)], 3, 16).unwrap();
        assert_relative_eq!(e.value, closed, max_relative = 1e-6);
    }

    #[test]
    fn closed_form_examples() {
        let p = ExponentProfile::new(vec![INF], 2.0).unwrap();
        assert_relative_eq!(diagonal_norm_closed_form(9, &p).unwrap(), 3.0, max_relative = 1e-15);
        let p = ExponentProfile::new(vec![fin(10.0); 3], 3.0).unwrap();
        for n in [2usize, 17, 1000] {
            assert_relative_eq!(
                diagonal_norm_closed_form(n, &p).unwrap(),
                (n as f64).powf(1.0 / 30.0),
                max_relative = 1e-13
            );
        }
        assert!(diagonal_norm_closed_form(0, &p).is_err());
    }

    #[test]
    fn one_slot_scalar_is_one_sweep() {
        let t = CoefficientTensor::scalar(vec![4], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        for p in [fin(1.5), fin(2.0), fin(7.0), INF] {
            let e = ascend(&t, &[p], 11, 3).unwrap();
            assert_eq!(e.iterations, e.restarts_used);
            assert_relative_eq!(e.value, dual_norm(t.entries(), p), max_relative = 1e-13);
        }
    }

    #[test]
    fn vector_valued_ascent_reaches_enumeration() {
        // 2x2 operator into l_2^2 with all-infinite domain
        let t = CoefficientTensor::new(
            vec![2, 2],
            2,
            fin(2.0),
            vec![1.0, 0.0, 0.5, -1.0, -0.3, 2.0, 1.0, 1.0],
        )
        .unwrap();
        let exact = enumerate_exact(&t, &[INF, INF]).unwrap();
        let est = ascend(&t, &[INF, INF], 5, 16).unwrap();
        assert!(est.value <= exact.value * (1.0 + 1e-12));
        assert_relative_eq!(est.value, exact.value, max_relative = 1e-6);
    }

    #[test]
    fn enumeration_pattern_errors() {
        let t = CoefficientTensor::scalar(vec![2, 2], vec![1.0; 4]).unwrap();
        assert!(matches!(
            enumerate_exact(&t, &[fin(2.0), fin(3.0)]),
            Err(Error::UnsupportedPattern(_))
        ));
        let v = CoefficientTensor::new(vec![2], 2, fin(2.0), vec![1.0; 4]).unwrap();
        assert!(matches!(enumerate_exact(&v, &[fin(2.0)]), Err(Error::UnsupportedPattern(_))));
        let big = CoefficientTensor::zeros(vec![13, 13, 13], 1, fin(1.0)).unwrap();
        assert!(matches!(
            enumerate_exact(&big, &[INF, INF, INF]),
            Err(Error::EnumerationCap { bits: 26, .. })
        ));
        assert!(enumerate_exact(&t, &[INF]).is_err());
        assert!(ascend(&t, &[INF, fin(1.0)], 0, 1).is_err());
    }

    #[test]
    fn duality_functional_rules() {
        assert_eq!(duality_functional(&[0.0, -2.0, 2.0], INF), vec![0.0, -1.0, 0.0]);
        assert_eq!(duality_functional(&[0.0, -2.0], fin(1.0)), vec![1.0, -1.0]);
        let y = [3.0, -4.0];
        let phi = duality_functional(&y, fin(2.0));
        assert_relative_eq!(phi[0] * y[0] + phi[1] * y[1], 5.0, max_relative = 1e-15);
        assert_relative_eq!(lp_norm(&phi, fin(2.0)), 1.0, max_relative = 1e-15);
        let phi = duality_functional(&[1.0, 2.0, -0.5], fin(3.0));
        assert_relative_eq!(lp_norm(&phi, fin(1.5)), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn ascent_is_deterministic_under_seed() {
        let entries: Vec<f64> = (0..27).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let t = CoefficientTensor::scalar(vec![3, 3, 3], entries).unwrap();
        let p = [fin(3.0), INF, fin(2.5)];
        let a = ascend(&t, &p, 42, 8).unwrap();
        let b = ascend(&t, &p, 42, 8).unwrap();
        assert_eq!(a, b);
    }
}
