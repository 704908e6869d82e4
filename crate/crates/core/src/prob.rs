//! Validated discrete distributions and the information measures used by the
//! solver: relative entropy, Shannon entropy and the collision probability.
//!
//! Two vector types live here. [`ProbVector`] has strictly positive entries
//! and is what utility distributions must be, since both the tilt kernel and
//! `D(P‖U)` divide by `u_i`. [`Pmf`] admits zeros; it carries the limit
//! distributions at the feasibility edges and the lattice points of the
//! brute-force oracle.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on `|Σ x − 1|` accepted by the constructors.
pub const DEFAULT_SUM_TOL: f64 = 1e-9;

/// Logarithm base for reported information quantities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    Nats,
    #[default]
    Bits,
}

impl LogBase {
    /// Converts a value measured in nats into this base.
    #[inline]
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Nats => nats,
            LogBase::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Nats => "nats",
            LogBase::Bits => "bits",
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.unit())
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nats" | "nat" | "e" => Ok(LogBase::Nats),
            "bits" | "bit" | "2" => Ok(LogBase::Bits),
            other => Err(Error::InvalidArgument(format!(
                "unknown log base `{other}` (expected nats or bits)"
            ))),
        }
    }
}

fn checked_sum(raw: &[f64], tol: f64, allow_zero: bool) -> Result<f64> {
    if raw.len() < 2 {
        return Err(Error::TooShort(raw.len()));
    }
    for (index, &value) in raw.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteEntry { index, value });
        }
        if allow_zero {
            if value < 0.0 {
                return Err(Error::NegativeEntry { index, value });
            }
        } else if value <= 0.0 {
            return Err(Error::NonPositiveEntry { index, value });
        }
    }
    let sum: f64 = raw.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::SumOutOfTolerance { sum, tol });
    }
    Ok(sum)
}

fn renormalized(raw: &[f64], sum: f64) -> Vec<f64> {
    if sum == 1.0 {
        raw.to_vec()
    } else {
        raw.iter().map(|x| x / sum).collect()
    }
}

/// A finite distribution with every entry strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates `raw` and returns it renormalized to sum to one.
    pub fn new(raw: &[f64], tol: f64) -> Result<Self> {
        let sum = checked_sum(raw, tol, false)?;
        Ok(ProbVector(renormalized(raw, sum)))
    }

    /// Uniform distribution over `n ≥ 2` classes.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooShort(n));
        }
        Ok(ProbVector(vec![1.0 / n as f64; n]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the unique smallest entry, or `None` when it is tied.
    pub fn unique_argmin(&self) -> Option<usize> {
        unique_position(&self.0, self.min())
    }

    /// Index of the unique largest entry, or `None` when it is tied.
    pub fn unique_argmax(&self) -> Option<usize> {
        unique_position(&self.0, self.max())
    }

    /// True when all entries are equal.
    pub fn is_uniform(&self) -> bool {
        self.min() == self.max()
    }

    pub fn to_pmf(&self) -> Pmf {
        Pmf(self.0.clone())
    }
}

fn unique_position(xs: &[f64], target: f64) -> Option<usize> {
    let mut hits = xs.iter().enumerate().filter(|(_, &x)| x == target);
    let first = hits.next()?.0;
    match hits.next() {
        Some(_) => None,
        None => Some(first),
    }
}

impl Deref for ProbVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for ProbVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        ProbVector::new(&raw, DEFAULT_SUM_TOL).map_err(serde::de::Error::custom)
    }
}

/// A finite distribution whose entries may be zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    pub fn new(raw: &[f64], tol: f64) -> Result<Self> {
        let sum = checked_sum(raw, tol, true)?;
        Ok(Pmf(renormalized(raw, sum)))
    }

    /// Point mass on class `k` out of `n`.
    pub fn indicator(n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooShort(n));
        }
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, len: n });
        }
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        Ok(Pmf(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Strict view, available when no entry is zero.
    pub fn to_strict(&self) -> Result<ProbVector> {
        ProbVector::new(&self.0, DEFAULT_SUM_TOL)
    }
}

impl Deref for Pmf {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Pmf {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<ProbVector> for Pmf {
    fn from(p: ProbVector) -> Self {
        Pmf(p.0)
    }
}

/// Builds a [`ProbVector`]; thin wrapper over [`ProbVector::new`].
pub fn make_prob_vector(raw: &[f64], tol: f64) -> Result<ProbVector> {
    ProbVector::new(raw, tol)
}

/// Relative entropy `D(p‖u) = Σ p_i log(p_i/u_i)`.
///
/// `p` may contain zeros (with `0 log 0 = 0`); `u` is strictly positive by
/// construction, so the result is always finite. Tiny negative round-off is
/// clamped to zero.
pub fn kl_divergence<P: AsRef<[f64]> + ?Sized>(p: &P, u: &ProbVector, base: LogBase) -> Result<f64> {
    let p = p.as_ref();
    if p.len() != u.len() {
        return Err(Error::LengthMismatch(p.len(), u.len()));
    }
    Ok(base.from_nats(kl_nats(p, u).max(0.0)))
}

#[inline]
pub(crate) fn kl_nats(p: &[f64], u: &[f64]) -> f64 {
    p.iter()
        .zip(u)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &ui)| pi * (pi / ui).ln())
        .sum()
}

/// Shannon entropy `H(p)`, zeros contributing nothing.
pub fn entropy<P: AsRef<[f64]> + ?Sized>(p: &P, base: LogBase) -> f64 {
    let h: f64 = p
        .as_ref()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    base.from_nats(h)
}

/// Collision probability `γ = Σ u_i²`, i.e. `exp(−H₂(U))`.
pub fn gamma(u: &ProbVector) -> f64 {
    u.iter().map(|x| x * x).sum()
}
