//! Verification campaigns.
//!
//! [`verify_constant_one`] checks the sufficiency direction: for admissible
//! exponents the mixed norm never exceeds the operator norm. [`growth_scan`]
//! and [`lower_index_scan`] check necessity: below a threshold the diagonal
//! witnesses make the ratio grow like a power of `n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{admissible, lambda_exponent, ExponentProfile, MixedExponents};
use crate::opnorm::{ascend_with, diagonal_norm_closed_form, enumerate_exact, enumeration_plan, AscentConfig, NormStatus};
use crate::tensor::CoefficientTensor;
use crate::witnesses::{diagonal_operator, DiagonalFamily};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Ratios in `(1, 1 + REVIEW_BAND]` that miss the tolerance are flagged, not failed.
pub const REVIEW_BAND: f64 = 1e-6;
pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.01;
pub const DEFAULT_SUITE_SIZE: usize = 200;

/// One operator in a campaign. `known_norm` carries a closed-form norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteInstance {
    pub descriptor: String,
    pub tensor: CoefficientTensor,
    pub known_norm: Option<f64>,
}

/// Scalar tensors with i.i.d. entries uniform on `[−1, 1]`.
pub fn random_suite(dims: &[usize], count: usize, seed: u64) -> Result<Vec<SuiteInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: usize = dims.iter().product();
    (0..count)
        .map(|i| {
            let entries = (0..cells).map(|_| rng.random_range(-1.0..=1.0)).collect();
            Ok(SuiteInstance {
                descriptor: format!("random[{i}]"),
                tensor: CoefficientTensor::scalar(dims.to_vec(), entries)?,
                known_norm: None,
            })
        })
        .collect()
}

/// Scalar rank-one tensors `a_1 ⊗ … ⊗ a_m` with uniform `[−1, 1]` factors.
pub fn rank_one_suite(dims: &[usize], count: usize, seed: u64) -> Result<Vec<SuiteInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let factors: Vec<Vec<f64>> = dims
                .iter()
                .map(|&n| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect();
            let refs: Vec<&[f64]> = factors.iter().map(Vec::as_slice).collect();
            Ok(SuiteInstance {
                descriptor: format!("rank-one[{i}]"),
                tensor: CoefficientTensor::rank_one(&refs)?,
                known_norm: None,
            })
        })
        .collect()
}

/// Diagonal witnesses for `profile` with their closed-form norms.
pub fn diagonal_suite(profile: &ExponentProfile, sizes: &[usize]) -> Result<Vec<SuiteInstance>> {
    sizes
        .iter()
        .map(|&n| {
            let d = if profile.is_scalar() { 1 } else { n };
            Ok(SuiteInstance {
                descriptor: format!("diagonal[n={n}]"),
                tensor: diagonal_operator(n, profile, d)?,
                known_norm: Some(diagonal_norm_closed_form(n, profile)?),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    NeedsReview,
    Fail,
    /// The operator norm is only a lower bound; no claim is made.
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub instance: String,
    pub mixed_norm: f64,
    pub operator_norm: f64,
    pub norm_status: NormStatus,
    pub ratio: f64,
    pub verdict: Verdict,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignStatus {
    Passed,
    NeedsReview,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub profile: ExponentProfile,
    pub q: MixedExponents,
    pub tolerance: f64,
    pub reports: Vec<InequalityReport>,
    pub status: CampaignStatus,
}

impl Campaign {
    pub fn passed(&self) -> bool {
        self.status == CampaignStatus::Passed
    }

    pub fn max_exact_ratio(&self) -> f64 {
        self.reports
            .iter()
            .filter(|r| r.norm_status == NormStatus::Exact)
            .map(|r| r.ratio)
            .fold(0.0, f64::max)
    }
}

fn classify(ratio: f64, status: NormStatus, tolerance: f64) -> Verdict {
    match status {
        NormStatus::LowerBound => Verdict::Informational,
        NormStatus::Exact if ratio <= 1.0 + tolerance => Verdict::Pass,
        NormStatus::Exact if ratio > 1.0 && ratio <= 1.0 + REVIEW_BAND => Verdict::NeedsReview,
        NormStatus::Exact => Verdict::Fail,
    }
}

/// Runs the constant-one inequality `mixed_norm(A, q) ≤ ‖A‖` over `suite`.
///
/// Norms come from the closed form when known, exact enumeration when the
/// exponent pattern allows, and ascent otherwise; ascent-normed instances are
/// informational only.
pub fn verify_constant_one(
    profile: &ExponentProfile,
    q: &MixedExponents,
    suite: &[SuiteInstance],
    tolerance: f64,
    cfg: &AscentConfig,
) -> Result<Campaign> {
    let adm = admissible(profile, q, 0.0)?;
    if !adm.admissible {
        return Err(Error::Inadmissible(adm.margins));
    }
    let p = profile.p();
    let reports = suite
        .par_iter()
        .map(|inst| {
            if inst.tensor.arity() != profile.m() {
                return Err(Error::DimensionMismatch {
                    expected: profile.m(),
                    got: inst.tensor.arity(),
                });
            }
            let mixed = inst.tensor.mixed_norm(q)?;
            let (norm, status) = match inst.known_norm {
                Some(v) => (v, NormStatus::Exact),
                None if enumeration_plan(&inst.tensor, p).is_ok() => {
                    let e = enumerate_exact(&inst.tensor, p)?;
                    (e.value, e.status)
                }
                None => {
                    let e = ascend_with(&inst.tensor, p, cfg)?;
                    (e.value, e.status)
                }
            };
            let ratio = if norm == 0.0 {
                if mixed == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                mixed / norm
            };
            let verdict = classify(ratio, status, tolerance);
            Ok(InequalityReport {
                instance: inst.descriptor.clone(),
                mixed_norm: mixed,
                operator_norm: norm,
                norm_status: status,
                ratio,
                verdict,
                pass: match verdict {
                    Verdict::Informational => None,
                    v => Some(v == Verdict::Pass),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let status = if reports.iter().any(|r| r.verdict == Verdict::Fail) {
        CampaignStatus::Failed
    } else if reports.iter().any(|r| r.verdict == Verdict::NeedsReview) {
        CampaignStatus::NeedsReview
    } else {
        CampaignStatus::Passed
    };
    Ok(Campaign {
        profile: profile.clone(),
        q: q.clone(),
        tolerance,
        reports,
        status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Bounded,
    Growing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub family: String,
    pub sizes: Vec<usize>,
    pub mixed_norms: Vec<f64>,
    pub operator_norms: Vec<f64>,
    pub ratios: Vec<f64>,
    pub fitted_slope: f64,
    pub theoretical_slope: f64,
    pub slope_threshold: f64,
    pub verdict: Growth,
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 4 {
        return Err(Error::InvalidSizes(format!("need at least 4 sizes, got {}", sizes.len())));
    }
    if sizes[0] == 0 || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSizes(format!("sizes must be positive and increasing: {sizes:?}")));
    }
    Ok(())
}

/// Least-squares slope of `ln ratio` against `ln n` over the largest half
/// of the sizes.
pub fn fit_log_log_slope(sizes: &[usize], ratios: &[f64]) -> f64 {
    let start = sizes.len() / 2;
    let xs: Vec<f64> = sizes[start..].iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = ratios[start..].iter().map(|r| r.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

fn scan_family(
    family: DiagonalFamily,
    label: String,
    norm_profile: &ExponentProfile,
    q: &MixedExponents,
    q_index: usize,
    sizes: &[usize],
    slope_threshold: f64,
) -> Result<GrowthReport> {
    let mut mixed_norms = Vec::with_capacity(sizes.len());
    let mut operator_norms = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let fam = DiagonalFamily { n, ..family };
        mixed_norms.push(fam.mixed_norm(q)?);
        operator_norms.push(diagonal_norm_closed_form(n, norm_profile)?);
    }
    let ratios: Vec<f64> = mixed_norms.iter().zip(&operator_norms).map(|(a, b)| a / b).collect();
    let fitted_slope = fit_log_log_slope(sizes, &ratios);
    let theoretical_slope = q.as_slice()[q_index].recip() - 1.0 / lambda_exponent(norm_profile, 1)?;
    Ok(GrowthReport {
        family: label,
        sizes: sizes.to_vec(),
        mixed_norms,
        operator_norms,
        ratios,
        fitted_slope,
        theoretical_slope,
        slope_threshold,
        verdict: if fitted_slope > slope_threshold {
            Growth::Growing
        } else {
            Growth::Bounded
        },
    })
}

/// Ratio `mixed_norm / ‖A‖` of the diagonal witnesses across `sizes`; it is
/// exactly `n^{1/q_1 − 1/λ_{m,r}}`.
pub fn growth_scan(profile: &ExponentProfile, q: &MixedExponents, sizes: &[usize]) -> Result<GrowthReport> {
    growth_scan_with(profile, q, sizes, DEFAULT_SLOPE_THRESHOLD)
}

pub fn growth_scan_with(
    profile: &ExponentProfile,
    q: &MixedExponents,
    sizes: &[usize],
    slope_threshold: f64,
) -> Result<GrowthReport> {
    check_sizes(sizes)?;
    if q.len() != profile.m() {
        return Err(Error::DimensionMismatch {
            expected: profile.m(),
            got: q.len(),
        });
    }
    let family = DiagonalFamily::new(sizes[0], profile.m(), 0)?;
    let label = format!("diagonal(m={},r={})", profile.m(), profile.r());
    scan_family(family, label, profile, q, 0, sizes, slope_threshold)
}

/// Detects `q_k` below its threshold: the diagonal witness of arity
/// `m − k + 1` for `(p_k, …, p_m)`, lifted `k − 1` times, has the same
/// ratio as the unlifted family. `k` is 1-based and at least 2.
pub fn lower_index_scan(
    profile: &ExponentProfile,
    k: usize,
    q: &MixedExponents,
    sizes: &[usize],
) -> Result<GrowthReport> {
    lower_index_scan_with(profile, k, q, sizes, DEFAULT_SLOPE_THRESHOLD)
}

pub fn lower_index_scan_with(
    profile: &ExponentProfile,
    k: usize,
    q: &MixedExponents,
    sizes: &[usize],
    slope_threshold: f64,
) -> Result<GrowthReport> {
    check_sizes(sizes)?;
    if k < 2 || k > profile.m() {
        return Err(Error::IndexOutOfRange {
            index: k,
            max: profile.m(),
        });
    }
    let adm = admissible(profile, q, 0.0)?;
    if adm.margins[..k - 1].iter().any(|&d| d < -crate::exponents::ADMISSIBILITY_TOL) {
        return Err(Error::Inadmissible(adm.margins));
    }
    let tail = profile.tail(k)?;
    let family = DiagonalFamily::new(sizes[0], tail.m(), k - 1)?;
    let label = format!("lifted-diagonal(arity={},lifts={},r={})", tail.m(), k - 1, profile.r());
    scan_family(family, label, &tail, q, k - 1, sizes, slope_threshold)
}
