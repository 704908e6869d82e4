//! Regime classification, the monotone root solve for the optimal importance
//! coefficient and assembly of the optimal recommendation distribution.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mim::{g, log_total_weight, normalized_mim, ImportanceCoefficient};
use crate::prob::{kl_divergence, LogBase, Pmf, ProbVector};
use crate::revenue::{alpha, expected_revenue, thresholds, RevenueParams, SystemKind, Thresholds};

/// Default tolerance on `|g(w, u) − target|`.
pub const SOLVER_TOL: f64 = 1e-12;
/// Bisection iteration cap.
pub const MAX_ITER: usize = 200;
/// Cap on bracket doublings; `2^1100` is past `f64::MAX`.
const MAX_DOUBLINGS: usize = 1100;

/// The eight outcomes of the (system kind × target revenue) partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CaseId {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
}

impl CaseId {
    pub const ALL: [CaseId; 8] = [
        CaseId::C1,
        CaseId::C2,
        CaseId::C3,
        CaseId::C4,
        CaseId::C5,
        CaseId::C6,
        CaseId::C7,
        CaseId::C8,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    /// Circled-digit label, `①` through `⑧`.
    pub fn symbol(self) -> char {
        char::from_u32(0x2460 + self as u32).unwrap_or('?')
    }

    pub fn system(self) -> SystemKind {
        match self {
            CaseId::C1 | CaseId::C2 | CaseId::C3 => SystemKind::Advertising,
            CaseId::C4 | CaseId::C5 => SystemKind::Neutral,
            CaseId::C6 | CaseId::C7 | CaseId::C8 => SystemKind::Noncommercial,
        }
    }

    pub fn feasible(self) -> bool {
        !matches!(self, CaseId::C3 | CaseId::C5 | CaseId::C8)
    }

    pub fn tilt_needed(self) -> bool {
        matches!(self, CaseId::C2 | CaseId::C6)
    }

    /// Short description of the optimal distribution in this case.
    pub fn outcome(self) -> &'static str {
        match self {
            CaseId::C1 | CaseId::C4 | CaseId::C7 => "utility",
            CaseId::C2 | CaseId::C6 => "tilted",
            CaseId::C3 | CaseId::C5 | CaseId::C8 => "infeasible",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A classified regime with its derived flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeCase {
    pub case_id: CaseId,
    pub system: SystemKind,
    pub feasible: bool,
    pub tilt_needed: bool,
}

impl From<CaseId> for RegimeCase {
    fn from(case_id: CaseId) -> Self {
        RegimeCase {
            case_id,
            system: case_id.system(),
            feasible: case_id.feasible(),
            tilt_needed: case_id.tilt_needed(),
        }
    }
}

/// Maps `(params, u, β)` to its case. Boundary values go to the closed side:
/// `β = β₀` is a utility case, `β = β_ad` / `β = β_no` is still feasible.
pub fn classify_regime(params: &RevenueParams, u: &ProbVector, beta: f64) -> RegimeCase {
    classify_with(&thresholds(params, u), beta)
}

fn classify_with(t: &Thresholds, beta: f64) -> RegimeCase {
    let case = match (t.kind, t.beta_edge) {
        (SystemKind::Neutral, _) | (_, None) => {
            if beta <= t.beta_ne {
                CaseId::C4
            } else {
                CaseId::C5
            }
        }
        (SystemKind::Advertising, Some(edge)) => {
            if beta <= t.beta_0 {
                CaseId::C1
            } else if beta <= edge {
                CaseId::C2
            } else {
                CaseId::C3
            }
        }
        (SystemKind::Noncommercial, Some(edge)) => {
            if beta <= t.beta_0 {
                CaseId::C7
            } else if beta <= edge {
                CaseId::C6
            } else {
                CaseId::C8
            }
        }
    };
    case.into()
}

/// Solves `g(w, u) = target` for `w`.
///
/// The bracket starts at `[−1, 1]` and doubles outward until `g` crosses the
/// target, then bisection runs until `|g(w, u) − target| ≤ tol`.
pub fn solve_varpi(u: &ProbVector, target: f64, tol: f64) -> Result<f64> {
    let (lo_v, hi_v) = (u.min(), u.max());
    if !(target > lo_v && target < hi_v) {
        return Err(Error::TargetOutOfRange {
            target,
            min: lo_v,
            max: hi_v,
        });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let resid = |w: f64| g(w, u) - target;
    if resid(0.0).abs() <= tol {
        return Ok(0.0);
    }

    // g is decreasing: resid(lo) > 0 > resid(hi) once bracketed.
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let mut doublings = 0;
    while resid(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::NoConvergence(doublings));
        }
    }
    while resid(lo) < 0.0 {
        hi = lo;
        lo *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !lo.is_finite() {
            return Err(Error::NoConvergence(doublings));
        }
    }

    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..MAX_ITER {
        let mid = lo + 0.5 * (hi - lo);
        let r = resid(mid);
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r.abs() <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 <= tol {
        Ok(best.1)
    } else {
        Err(Error::NoConvergence(MAX_ITER))
    }
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub regime: RegimeCase,
    /// Optimal distribution. Present iff the regime is feasible; a [`Pmf`]
    /// because the edge solutions are indicators.
    pub p_star: Option<Pmf>,
    pub varpi_star: Option<ImportanceCoefficient>,
    /// Absent for neutral systems.
    pub alpha: Option<f64>,
    /// `D(p*‖u)` in bits.
    pub kl_bits: Option<f64>,
    pub thresholds: Thresholds,
}

impl SolveResult {
    pub fn is_feasible(&self) -> bool {
        self.regime.feasible
    }

    /// `D(p*‖u)` in the requested base.
    pub fn kl(&self, base: LogBase) -> Option<f64> {
        self.kl_bits.map(|b| match base {
            LogBase::Bits => b,
            LogBase::Nats => b * std::f64::consts::LN_2,
        })
    }
}

/// Minimizes `D(P‖u)` subject to `R̄(P) ≥ β`.
pub fn optimal_distribution(params: &RevenueParams, u: &ProbVector, beta: f64) -> Result<SolveResult> {
    if !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("target revenue must be finite, got {beta}")));
    }
    let t = thresholds(params, u);
    let regime = classify_with(&t, beta);
    let alpha = match t.kind {
        SystemKind::Neutral => None,
        _ => Some(alpha(params, beta)?),
    };
    let mut out = SolveResult {
        regime,
        p_star: None,
        varpi_star: None,
        alpha,
        kl_bits: None,
        thresholds: t,
    };
    if !regime.feasible {
        return Ok(out);
    }
    let (w, p) = if regime.tilt_needed {
        tilted_solution(u, &t, beta, alpha.ok_or(Error::NeutralSystem)?)?
    } else {
        (ImportanceCoefficient::ZERO, u.to_pmf())
    };
    out.kl_bits = Some(kl_divergence(&p, u, LogBase::Bits)?);
    out.varpi_star = Some(w);
    out.p_star = Some(p);
    Ok(out)
}

fn tilted_solution(
    u: &ProbVector,
    t: &Thresholds,
    beta: f64,
    alpha: f64,
) -> Result<(ImportanceCoefficient, Pmf)> {
    let advertising = t.kind == SystemKind::Advertising;
    let edge_w = if advertising {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    let edge = || -> Result<(ImportanceCoefficient, Pmf)> {
        Ok((ImportanceCoefficient::new(edge_w)?, normalized_mim(edge_w, u)?))
    };
    if Some(beta) == t.beta_edge {
        return edge();
    }
    let target = 1.0 - alpha;
    // Rounding can push the target onto an endpoint of g's range.
    if (advertising && target <= u.min()) || (!advertising && target >= u.max()) {
        return edge();
    }
    let gamma = g(0.0, u);
    if (advertising && target >= gamma) || (!advertising && target <= gamma) {
        return Ok((ImportanceCoefficient::ZERO, u.to_pmf()));
    }
    let w = solve_varpi(u, target, SOLVER_TOL)?;
    Ok((ImportanceCoefficient::new(w)?, normalized_mim(w, u)?))
}

/// Residuals of the first-order optimality system at a solve result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    /// Multiplier of the revenue constraint, `|ϖ*|`.
    pub lambda: f64,
    /// Multiplier of the normalization constraint.
    pub mu: f64,
    /// Largest `|ln p_x + 1 − ln u_x − ϖ*(1−u_x) + μ|` over classes.
    pub stationarity: f64,
    /// `|Σ p − 1|`.
    pub normalization: f64,
    /// Constraint slack, positive when the revenue target is exceeded.
    /// Measured in units of `Σ p_i(1−u_i)` for non-neutral systems.
    pub slack: f64,
    /// `max(0, −slack)`.
    pub primal_violation: f64,
    /// Wrong-sign part of the multiplier given the system kind.
    pub dual_violation: f64,
    /// `|λ·slack|`.
    pub complementary: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.stationarity,
            self.normalization,
            self.primal_violation,
            self.dual_violation,
            self.complementary,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Substitutes a solve result into the optimality conditions.
pub fn verify_kkt(
    result: &SolveResult,
    u: &ProbVector,
    params: &RevenueParams,
    beta: f64,
) -> Result<KktReport> {
    let (p, w) = match (&result.p_star, result.varpi_star) {
        (Some(p), Some(w)) if w.is_finite() => (p, w.value()),
        _ => return Err(Error::NotApplicable),
    };
    if p.len() != u.len() {
        return Err(Error::LengthMismatch(p.len(), u.len()));
    }
    let mu = log_total_weight(w, u) - 1.0;
    let stationarity = p
        .iter()
        .zip(u.iter())
        .map(|(&px, &ux)| (px.ln() + 1.0 - ux.ln() - w * (1.0 - ux) + mu).abs())
        .fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    let normalization = (p.iter().sum::<f64>() - 1.0).abs();

    let d = params.denominator();
    let excess = expected_revenue(p, u, params)? - beta;
    let slack = if d == 0.0 { excess } else { excess / d.abs() };
    let lambda = w.abs();
    let dual_violation = match params.system_kind() {
        SystemKind::Advertising => (-w).max(0.0),
        SystemKind::Noncommercial => w.max(0.0),
        SystemKind::Neutral => lambda,
    };
    Ok(KktReport {
        lambda,
        mu,
        stationarity,
        normalization,
        slack,
        primal_violation: (-slack).max(0.0),
        dual_violation,
        complementary: (lambda * slack).abs(),
    })
}
