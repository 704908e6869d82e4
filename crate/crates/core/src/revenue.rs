//! Revenue model: per-push constants, expected revenue `R̄(P)`, the
//! normalized target `α` and the revenue thresholds that split the target
//! axis into regimes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{gamma, ProbVector};

/// The five per-push revenue constants, all in the same currency unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct RevenueParams {
    cost_push: f64,
    reward_hit: f64,
    cost_miss_like: f64,
    reward_ad: f64,
    cost_omit: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    cost_push: f64,
    reward_hit: f64,
    cost_miss_like: f64,
    reward_ad: f64,
    cost_omit: f64,
}

impl TryFrom<RawParams> for RevenueParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        RevenueParams::new(r.cost_push, r.reward_hit, r.cost_miss_like, r.reward_ad, r.cost_omit)
    }
}

impl From<RevenueParams> for RawParams {
    fn from(p: RevenueParams) -> Self {
        RawParams {
            cost_push: p.cost_push,
            reward_hit: p.reward_hit,
            cost_miss_like: p.cost_miss_like,
            reward_ad: p.reward_ad,
            cost_omit: p.cost_omit,
        }
    }
}

impl RevenueParams {
    /// Arguments in the order `C_p, R_p, C_n, R_ad, C_m`.
    pub fn new(
        cost_push: f64,
        reward_hit: f64,
        cost_miss_like: f64,
        reward_ad: f64,
        cost_omit: f64,
    ) -> Result<Self> {
        for (name, value) in [
            ("cost_push", cost_push),
            ("reward_hit", reward_hit),
            ("cost_miss_like", cost_miss_like),
            ("reward_ad", reward_ad),
            ("cost_omit", cost_omit),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(RevenueParams {
            cost_push,
            reward_hit,
            cost_miss_like,
            reward_ad,
            cost_omit,
        })
    }

    pub fn cost_push(&self) -> f64 {
        self.cost_push
    }
    pub fn reward_hit(&self) -> f64 {
        self.reward_hit
    }
    pub fn cost_miss_like(&self) -> f64 {
        self.cost_miss_like
    }
    pub fn reward_ad(&self) -> f64 {
        self.reward_ad
    }
    pub fn cost_omit(&self) -> f64 {
        self.cost_omit
    }

    /// `d = R_ad − R_p − C_n − C_m`; its sign fixes the system kind.
    pub fn denominator(&self) -> f64 {
        self.reward_ad - self.reward_hit - self.cost_miss_like - self.cost_omit
    }

    /// `R_p + C_n + C_m − R_ad`, the column printed in the threshold table.
    pub fn sign_sum(&self) -> f64 {
        self.reward_hit + self.cost_miss_like + self.cost_omit - self.reward_ad
    }

    /// `R_p − C_p`: revenue of a neutral system, regardless of `P`.
    pub fn beta_ne(&self) -> f64 {
        self.reward_hit - self.cost_push
    }

    /// `R_ad − C_p − C_n − C_m`, shared by the edge thresholds.
    pub(crate) fn edge_offset(&self) -> f64 {
        self.reward_ad - self.cost_push - self.cost_miss_like - self.cost_omit
    }

    pub fn system_kind(&self) -> SystemKind {
        system_kind(self)
    }
}

/// Which direction the revenue constraint pushes the recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    /// Pushing unwanted items pays more: `R_p + C_n + C_m − R_ad < 0`.
    Advertising,
    /// Pushing desired items pays more: `R_p + C_n + C_m − R_ad > 0`.
    Noncommercial,
    /// Revenue is independent of the recommendation distribution.
    Neutral,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemKind::Advertising => "advertising",
            SystemKind::Noncommercial => "noncommercial",
            SystemKind::Neutral => "neutral",
        })
    }
}

pub fn system_kind(params: &RevenueParams) -> SystemKind {
    let d = params.denominator();
    if d > 0.0 {
        SystemKind::Advertising
    } else if d < 0.0 {
        SystemKind::Noncommercial
    } else {
        SystemKind::Neutral
    }
}

/// Normalized target `α = (β + C_p − R_p) / (R_ad − R_p − C_n − C_m)`.
///
/// The revenue constraint `R̄(P) ≥ β` is `Σ p_i(1−u_i) ≥ α` for advertising
/// systems and `≤ α` for noncommercial ones.
pub fn alpha(params: &RevenueParams, beta: f64) -> Result<f64> {
    let d = params.denominator();
    if d == 0.0 {
        return Err(Error::NeutralSystem);
    }
    Ok((beta + params.cost_push - params.reward_hit) / d)
}

/// Expected revenue `R̄(P) = d·Σ p_i(1−u_i) + R_p − C_p`.
pub fn expected_revenue<P: AsRef<[f64]> + ?Sized>(
    p: &P,
    u: &ProbVector,
    params: &RevenueParams,
) -> Result<f64> {
    let p = p.as_ref();
    if p.len() != u.len() {
        return Err(Error::LengthMismatch(p.len(), u.len()));
    }
    let d = params.denominator();
    if d == 0.0 {
        return Ok(params.beta_ne());
    }
    let mass: f64 = p.iter().zip(u.iter()).map(|(pi, ui)| pi * (1.0 - ui)).sum();
    Ok(d * mass + params.beta_ne())
}

/// Per-push payoff matrix, rows (desired, unwanted) × columns
/// (recommend, not recommend).
///
/// The (desired, not recommend) cell holds `−C_m`: the miss cost enters the
/// expected revenue with a minus sign.
pub fn revenue_matrix(params: &RevenueParams) -> [[f64; 2]; 2] {
    [
        [params.reward_hit - params.cost_push, -params.cost_omit],
        [params.reward_ad - params.cost_push - params.cost_miss_like, 0.0],
    ]
}

/// Joint probability of (preference, action) for one class, laid out like
/// [`revenue_matrix`].
pub fn occurrence_matrix(p_i: f64, u_i: f64) -> [[f64; 2]; 2] {
    [
        [p_i * u_i, (1.0 - p_i) * u_i],
        [p_i * (1.0 - u_i), (1.0 - p_i) * (1.0 - u_i)],
    ]
}

/// `R̄(P)` as the elementwise payoff × occurrence sum over all classes.
pub fn expected_revenue_by_matrix<P: AsRef<[f64]> + ?Sized>(
    p: &P,
    u: &ProbVector,
    params: &RevenueParams,
) -> Result<f64> {
    let p = p.as_ref();
    if p.len() != u.len() {
        return Err(Error::LengthMismatch(p.len(), u.len()));
    }
    let pay = revenue_matrix(params);
    Ok(p.iter()
        .zip(u.iter())
        .map(|(&pi, &ui)| {
            let occ = occurrence_matrix(pi, ui);
            (0..2)
                .flat_map(|r| (0..2).map(move |c| (r, c)))
                .map(|(r, c)| pay[r][c] * occ[r][c])
                .sum::<f64>()
        })
        .sum())
}

/// Revenue thresholds for a (params, utility) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Revenue reached by recommending exactly `U`.
    pub beta_0: f64,
    /// Largest attainable revenue: `β_ad` (advertising) or `β_no`
    /// (noncommercial). Absent for neutral systems.
    pub beta_edge: Option<f64>,
    /// `R_p − C_p`.
    pub beta_ne: f64,
    pub kind: SystemKind,
}

impl Thresholds {
    pub fn beta_ad(&self) -> Option<f64> {
        match self.kind {
            SystemKind::Advertising => self.beta_edge,
            _ => None,
        }
    }

    pub fn beta_no(&self) -> Option<f64> {
        match self.kind {
            SystemKind::Noncommercial => self.beta_edge,
            _ => None,
        }
    }
}

pub fn thresholds(params: &RevenueParams, u: &ProbVector) -> Thresholds {
    let d = params.denominator();
    let kind = params.system_kind();
    let beta_0 = (1.0 - gamma(u)) * d + params.beta_ne();
    let beta_edge = match kind {
        SystemKind::Advertising => Some(-d * u.min() + params.edge_offset()),
        SystemKind::Noncommercial => Some(-d * u.max() + params.edge_offset()),
        SystemKind::Neutral => None,
    };
    Thresholds {
        beta_0,
        beta_edge,
        beta_ne: params.beta_ne(),
        kind,
    }
}
