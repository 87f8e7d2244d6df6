//! Exponent calculus: conjugates, the classical bilinear exponents and the
//! optimal mixed-sum thresholds `λ_{m−k+1,r}^{p_k,…,p_m}`.
//!
//! The scalar-valued `δ` exponents are the same formula with cotype `r = 1`,
//! so they are not a separate type here.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance for the strict condition `Σ 1/p_k < 1/r`.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Default tolerance for threshold comparisons in [`admissible`].
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

/// An exponent in `(0, ∞]`. Infinity is kept exact so that `1/∞ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    /// Builds a finite exponent; `f64::INFINITY` maps to [`Exponent::Infinite`].
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value <= 0.0 {
            return Err(Error::InvalidExponent(format!("{value} is not in (0, inf]")));
        }
        if value.is_infinite() {
            Ok(Exponent::Infinite)
        } else {
            Ok(Exponent::Finite(value))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    /// `1/s` with `1/∞ = 0`.
    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(s) => 1.0 / s,
            Exponent::Infinite => 0.0,
        }
    }

    /// The exponent as a float (`f64::INFINITY` for ∞).
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(s) => s,
            Exponent::Infinite => f64::INFINITY,
        }
    }

    /// Conjugate exponent, see [`conjugate`].
    pub fn conjugate(self) -> Result<Exponent> {
        conjugate(self)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(s) => write!(f, "{s}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    /// Accepts `inf`, decimal literals and integer fractions such as `30/7`.
    /// Fractions are parsed as integers and divided once.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        if matches!(lower.as_str(), "inf" | "infinity" | "∞") {
            return Ok(Exponent::Infinite);
        }
        let value = match s.split_once('/') {
            Some((num, den)) => {
                let num: i64 = num
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad fraction numerator in {s:?}")))?;
                let den: i64 = den
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad fraction denominator in {s:?}")))?;
                if den == 0 {
                    return Err(Error::Parse(format!("zero denominator in {s:?}")));
                }
                num as f64 / den as f64
            }
            None => s
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad exponent literal {s:?}")))?,
        };
        Exponent::new(value)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(s) => serializer.serialize_f64(*s),
            Exponent::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Exponent::new(v).map_err(serde::de::Error::custom),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Parses a comma-separated exponent list such as `10,10,inf` or `30,15/2,30/7`.
pub fn parse_exponent_list(s: &str) -> Result<Vec<Exponent>> {
    s.split(',').map(str::parse).collect()
}

/// Conjugate index `s*` with `1/s + 1/s* = 1`; `1* = ∞` and `∞* = 1`.
pub fn conjugate(s: Exponent) -> Result<Exponent> {
    match s {
        Exponent::Infinite => Ok(Exponent::Finite(1.0)),
        Exponent::Finite(v) if v < 1.0 => Err(Error::InvalidExponent(format!(
            "conjugate needs s >= 1, got {v}"
        ))),
        Exponent::Finite(v) if v == 1.0 => Ok(Exponent::Infinite),
        Exponent::Finite(v) => Ok(Exponent::Finite(v / (v - 1.0))),
    }
}

/// Classical bilinear exponents `(λ, μ)` for forms on `ℓp × ℓq`:
/// `λ = pq/(pq−p−q)` and `μ = 4pq/(3pq−2p−2q)`, evaluated through
/// reciprocals so that `p = ∞` or `q = ∞` is the limit value.
pub fn bilinear_classics(p: Exponent, q: Exponent) -> Result<(f64, f64)> {
    for e in [p, q] {
        if e.value() <= 1.0 {
            return Err(Error::InvalidExponent(format!("{e} is not in (1, inf]")));
        }
    }
    let (a, b) = (p.recip(), q.recip());
    if a + b >= 1.0 {
        return Err(Error::InvalidProfile(format!(
            "1/p + 1/q = {} must be < 1",
            a + b
        )));
    }
    let lambda = 1.0 / (1.0 - a - b);
    let mu = 4.0 / (3.0 - 2.0 * a - 2.0 * b);
    Ok((lambda, mu))
}

/// The data `(m, p_1, …, p_m, r)` of one inequality instance. `r ≥ 2` is
/// the cotype of an `ℓr`-valued target; `r = 1` selects the scalar case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct ExponentProfile {
    p: Vec<Exponent>,
    r: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    m: usize,
    p: Vec<Exponent>,
    r: f64,
}

impl TryFrom<RawProfile> for ExponentProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        if raw.p.len() != raw.m {
            return Err(Error::DimensionMismatch {
                expected: raw.m,
                got: raw.p.len(),
            });
        }
        ExponentProfile::new(raw.p, raw.r)
    }
}

impl From<ExponentProfile> for RawProfile {
    fn from(profile: ExponentProfile) -> Self {
        RawProfile {
            m: profile.m(),
            p: profile.p,
            r: profile.r,
        }
    }
}

impl ExponentProfile {
    pub fn new(p: Vec<Exponent>, r: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidProfile("m must be at least 1".into()));
        }
        if !(r == 1.0 || (r.is_finite() && r >= 2.0)) {
            return Err(Error::InvalidProfile(format!(
                "cotype r must be 1 (scalar) or in [2, inf), got {r}"
            )));
        }
        for (k, pk) in p.iter().enumerate() {
            if pk.value() <= 1.0 {
                return Err(Error::InvalidProfile(format!(
                    "p_{} = {pk} must exceed 1",
                    k + 1
                )));
            }
            if r > 1.0 && pk.value() <= r {
                return Err(Error::InvalidProfile(format!(
                    "p_{} = {pk} must exceed r = {r}",
                    k + 1
                )));
            }
        }
        let total: f64 = p.iter().map(|e| e.recip()).sum();
        if total >= 1.0 / r - BOUNDARY_TOL {
            return Err(Error::InvalidProfile(format!(
                "sum of 1/p_k = {total} must be strictly below 1/r = {}",
                1.0 / r
            )));
        }
        Ok(ExponentProfile { p, r })
    }

    /// Scalar-valued profile (`r = 1`).
    pub fn scalar(p: Vec<Exponent>) -> Result<Self> {
        Self::new(p, 1.0)
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[Exponent] {
        &self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn is_scalar(&self) -> bool {
        self.r == 1.0
    }

    /// The profile `(m−k+1, p_k, …, p_m, r)` governing index `k` (1-based).
    pub fn tail(&self, k: usize) -> Result<ExponentProfile> {
        check_index(k, self.m())?;
        ExponentProfile::new(self.p[k - 1..].to_vec(), self.r)
    }

    /// All thresholds `λ_{m−k+1,r}^{p_k,…,p_m}` for `k = 1..=m`.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        (1..=self.m()).map(|k| lambda_exponent(self, k)).collect()
    }
}

fn check_index(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        Err(Error::IndexOutOfRange { index: k, max: m })
    } else {
        Ok(())
    }
}

/// `λ_{m−k+1,r}^{p_k,…,p_m} = r / (1 − (1/p_k + … + 1/p_m)·r)` for a 1-based
/// `k`. With `r = 1` this is `δ_{m−k+1}^{p_k,…,p_m}`.
pub fn lambda_exponent(profile: &ExponentProfile, k: usize) -> Result<f64> {
    check_index(k, profile.m())?;
    let r = profile.r;
    let tail: f64 = profile.p[k - 1..].iter().map(|e| e.recip()).sum();
    if tail >= 1.0 / r - BOUNDARY_TOL {
        return Err(Error::Boundary);
    }
    Ok(r / (1.0 - tail * r))
}

/// Mixed-sum exponents `(q_1, …, q_m)`, each in `(0, ∞]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Exponent>", into = "Vec<Exponent>")]
pub struct MixedExponents(Vec<Exponent>);

impl TryFrom<Vec<Exponent>> for MixedExponents {
    type Error = Error;

    fn try_from(q: Vec<Exponent>) -> Result<Self> {
        MixedExponents::new(q)
    }
}

impl From<MixedExponents> for Vec<Exponent> {
    fn from(q: MixedExponents) -> Self {
        q.0
    }
}

impl MixedExponents {
    pub fn new(q: Vec<Exponent>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidExponent("empty mixed exponent vector".into()));
        }
        for e in &q {
            if e.value().is_nan() || e.value() <= 0.0 {
                return Err(Error::InvalidExponent(format!("{e} is not in (0, inf]")));
            }
        }
        Ok(MixedExponents(q))
    }

    /// `(s, …, s)` with `m` entries.
    pub fn uniform(s: Exponent, m: usize) -> Result<Self> {
        Self::new(vec![s; m])
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Exponent::new(v)).collect::<Result<_>>()?)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Exponent] {
        &self.0
    }

    /// `(q_k, …, q_m)` for a 1-based `k`.
    pub fn tail(&self, k: usize) -> Result<MixedExponents> {
        check_index(k, self.len())?;
        Ok(MixedExponents(self.0[k - 1..].to_vec()))
    }
}

/// Outcome of [`admissible`]: the verdict and the signed margins
/// `q_k − λ_k` (`+∞` when `q_k = ∞`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub thresholds: Vec<f64>,
    pub margins: Vec<f64>,
}

/// Checks `q_k + slack ≥ λ_{m−k+1,r}^{p_k,…,p_m}` for every `k`, with the
/// default comparison tolerance.
pub fn admissible(
    profile: &ExponentProfile,
    q: &MixedExponents,
    slack: f64,
) -> Result<Admissibility> {
    admissible_with_tolerance(profile, q, slack, ADMISSIBILITY_TOL)
}

pub fn admissible_with_tolerance(
    profile: &ExponentProfile,
    q: &MixedExponents,
    slack: f64,
    tolerance: f64,
) -> Result<Admissibility> {
    if q.len() != profile.m() {
        return Err(Error::DimensionMismatch {
            expected: profile.m(),
            got: q.len(),
        });
    }
    if !(slack >= 0.0) {
        return Err(Error::InvalidExponent(format!("slack {slack} must be >= 0")));
    }
    let thresholds = profile.thresholds()?;
    let margins: Vec<f64> = q
        .as_slice()
        .iter()
        .zip(&thresholds)
        .map(|(qk, t)| qk.value() - t)
        .collect();
    let admissible = margins.iter().all(|&d| d + slack >= -tolerance);
    Ok(Admissibility {
        admissible,
        thresholds,
        margins,
    })
}
