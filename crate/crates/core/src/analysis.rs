//! Structure of the tilt family: per-class peak coefficients `ϖ_x`,
//! crossover coefficients `ϖ̃_x`, their revenue images `β_x`, amplified and
//! attenuated class sets, and the tilt and revenue sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mim::{f, g, normalized_mim};
use crate::optimizer::{optimal_distribution, solve_varpi, SolveResult, MAX_ITER, SOLVER_TOL};
use crate::prob::{gamma, ProbVector};
use crate::revenue::{expected_revenue, thresholds, RevenueParams, SystemKind};

/// Default residual tolerance for `f(ϖ̃_x, x, u) = u_x`.
pub const CROSSOVER_TOL: f64 = 1e-12;

fn check_index(u: &ProbVector, x: usize) -> Result<()> {
    if x >= u.len() {
        Err(Error::IndexOutOfRange { index: x, len: u.len() })
    } else {
        Ok(())
    }
}

/// The tilt at which `f(·, x, u)` peaks, i.e. the root of `g(w, u) = u_x`.
///
/// `+∞` for the smallest entry, `−∞` for the largest, `0` when `u_x`
/// equals the collision probability or `u` is uniform.
pub fn varpi_x(u: &ProbVector, x: usize) -> Result<f64> {
    check_index(u, x)?;
    let ux = u[x];
    if u.is_uniform() {
        return Ok(0.0);
    }
    if ux == u.min() {
        return Ok(f64::INFINITY);
    }
    if ux == u.max() {
        return Ok(f64::NEG_INFINITY);
    }
    solve_varpi(u, ux, SOLVER_TOL)
}

/// The nonzero tilt at which `f(·, x, u)` crosses back through `u_x`.
///
/// `None` for the smallest and largest classes and for classes sitting at
/// the collision probability.
pub fn varpi_tilde_x(u: &ProbVector, x: usize, tol: f64) -> Result<Option<f64>> {
    let wx = varpi_x(u, x)?;
    if wx == 0.0 || !wx.is_finite() {
        return Ok(None);
    }
    let ux = u[x];
    let h = |w: f64| f(w, x, u).map(|v| v - ux);
    // Work on the positive half-line; the negative side is mirrored.
    let s = wx.signum();
    let hs = |t: f64| h(s * t);
    let peak = wx.abs();
    let delta = 1e-6 * (1.0 + peak);

    let mut lo = peak + delta;
    if hs(lo)? <= 0.0 {
        lo = peak;
    }
    let mut step = 1.0 + peak;
    let mut hi = lo + step;
    let mut grown = 0;
    while hs(hi)? >= 0.0 {
        lo = hi;
        step *= 2.0;
        hi = lo + step;
        grown += 1;
        if grown > 1100 || !hi.is_finite() {
            return Err(Error::NoConvergence(grown));
        }
    }

    let mut best = (f64::INFINITY, lo);
    for _ in 0..MAX_ITER {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = hs(mid)?;
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r > 0.0 {
            lo = mid;
        } else if r < 0.0 {
            hi = mid;
        } else {
            break;
        }
    }
    if best.0 <= tol {
        Ok(Some(s * best.1))
    } else {
        Err(Error::NoConvergence(MAX_ITER))
    }
}

/// Revenue level at which the optimal tilt equals `ϖ_x`:
/// `β_x = −(R_ad − R_p − C_n − C_m)·u_x + R_ad − C_p − C_n − C_m`.
pub fn beta_x(params: &RevenueParams, u: &ProbVector, x: usize) -> Result<f64> {
    check_index(u, x)?;
    let d = params.denominator();
    if d == 0.0 {
        return Err(Error::NeutralSystem);
    }
    Ok(-d * u[x] + params.edge_offset())
}

/// How `p*_x` moves as the revenue target sweeps `(β₀, β_edge)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaResponse {
    pub index: usize,
    pub beta_x: f64,
    /// Open interval on which `p*_x` increases with `β`.
    pub increasing: Option<(f64, f64)>,
    /// Open interval on which `p*_x` decreases with `β`.
    pub decreasing: Option<(f64, f64)>,
}

/// Monotone pieces of `β ↦ p*_x(β)` on the tilted range.
///
/// The optimal tilt moves monotonically away from zero as `β` grows, and
/// `f(·, x, u)` rises until the tilt reaches `ϖ_x`, which happens at `β_x`.
pub fn beta_response(params: &RevenueParams, u: &ProbVector, x: usize) -> Result<BetaResponse> {
    let bx = beta_x(params, u, x)?;
    let t = thresholds(params, u);
    let edge = t.beta_edge.ok_or(Error::NeutralSystem)?;
    let (b0, peak) = (t.beta_0, bx.clamp(t.beta_0.min(edge), edge.max(t.beta_0)));
    Ok(BetaResponse {
        index: x,
        beta_x: bx,
        increasing: (peak > b0).then_some((b0, peak)),
        decreasing: (edge > peak).then_some((peak, edge)),
    })
}

/// Where a class gets amplified above its utility probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignRegion {
    /// `u_x < γ_u`: amplified for positive tilts below `ϖ̃_x` (all positive
    /// tilts for the smallest class).
    AmplifiedAbove,
    /// `u_x > γ_u`: amplified for negative tilts above `ϖ̃_x` (all negative
    /// tilts for the largest class).
    AmplifiedBelow,
    /// `u_x = γ_u`: never amplified, `f(w, x, u) ≤ u_x` for every tilt.
    AlwaysUtility,
}

/// Per-class crossover data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassCrossover {
    pub index: usize,
    pub u: f64,
    pub varpi_x: f64,
    pub varpi_tilde_x: Option<f64>,
    pub sign_region: SignRegion,
    /// Absent for neutral systems or when no parameters were supplied.
    pub beta_x: Option<f64>,
}

/// Amplified and attenuated classes at one tilt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub amplified: Vec<usize>,
    pub attenuated: Vec<usize>,
}

impl Partition {
    /// `↑`, `↓` or `=` for class `x`.
    pub fn arrow(&self, x: usize) -> char {
        if self.amplified.contains(&x) {
            '↑'
        } else if self.attenuated.contains(&x) {
            '↓'
        } else {
            '='
        }
    }
}

/// Classes with `f(w, x, u) > u_x` and `f(w, x, u) < u_x`.
pub fn crossover_partition(u: &ProbVector, w: f64) -> Result<Partition> {
    if !w.is_finite() {
        return Err(Error::InvalidArgument(format!("partition needs a finite tilt, got {w}")));
    }
    let p = normalized_mim(w, u)?;
    let mut out = Partition {
        amplified: Vec::new(),
        attenuated: Vec::new(),
    };
    for (x, (&px, &ux)) in p.iter().zip(u.iter()).enumerate() {
        if px > ux {
            out.amplified.push(x);
        } else if px < ux {
            out.attenuated.push(x);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverReport {
    pub gamma: f64,
    pub classes: Vec<ClassCrossover>,
    /// Partition at the requested tilt, when one was given.
    pub partition: Option<(f64, Partition)>,
}

/// Per-class crossover data, plus the partition at `at` when given.
pub fn crossover_report(
    u: &ProbVector,
    params: Option<&RevenueParams>,
    at: Option<f64>,
) -> Result<CrossoverReport> {
    let classes = (0..u.len())
        .map(|x| {
            let wx = varpi_x(u, x)?;
            let sign_region = if wx > 0.0 {
                SignRegion::AmplifiedAbove
            } else if wx < 0.0 {
                SignRegion::AmplifiedBelow
            } else {
                SignRegion::AlwaysUtility
            };
            let beta_x = match params {
                Some(p) if p.system_kind() != SystemKind::Neutral => Some(beta_x(p, u, x)?),
                _ => None,
            };
            Ok(ClassCrossover {
                index: x,
                u: u[x],
                varpi_x: wx,
                varpi_tilde_x: varpi_tilde_x(u, x, CROSSOVER_TOL)?,
                sign_region,
                beta_x,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let partition = match at {
        Some(w) if w.is_finite() => Some((w, crossover_partition(u, w)?)),
        _ => None,
    };
    Ok(CrossoverReport {
        gamma: gamma(u),
        classes,
        partition,
    })
}

/// `steps` evenly spaced points from `min` to `max`, both ends exact.
pub fn linspace(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && min < max) {
        return Err(Error::InvalidArgument(format!("range needs min < max, got {min}:{max}")));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("range needs at least 2 steps, got {steps}")));
    }
    let span = max - min;
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { max } else { min + span * (i as f64 / last) })
        .collect())
}

/// Tilted distributions over a tilt grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarpiSweep {
    pub varpi: Vec<f64>,
    /// `rows[k][x] = f(varpi[k], x, u)`.
    pub rows: Vec<Vec<f64>>,
}

pub fn sweep_varpi(u: &ProbVector, w_min: f64, w_max: f64, steps: usize) -> Result<VarpiSweep> {
    let varpi = linspace(w_min, w_max, steps)?;
    let rows = varpi
        .par_iter()
        .map(|&w| normalized_mim(w, u).map(|p| p.into_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(VarpiSweep { varpi, rows })
}

/// One solve in a revenue sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaPoint {
    pub beta: f64,
    pub result: SolveResult,
    /// `R̄(p*)`, absent for infeasible rows.
    pub revenue: Option<f64>,
}

/// Solves at every point of a revenue grid. Infeasible targets yield rows
/// without a distribution; solver errors abort the sweep.
pub fn sweep_beta(
    params: &RevenueParams,
    u: &ProbVector,
    beta_min: f64,
    beta_max: f64,
    steps: usize,
) -> Result<Vec<BetaPoint>> {
    linspace(beta_min, beta_max, steps)?
        .into_par_iter()
        .map(|beta| {
            let result = optimal_distribution(params, u, beta)?;
            let revenue = match &result.p_star {
                Some(p) => Some(expected_revenue(p, u, params)?),
                None => None,
            };
            Ok(BetaPoint {
                beta,
                result,
                revenue,
            })
        })
        .collect()
}

/// `g(ϖ_x, u) − u_x`, exposed for diagnostics.
pub fn peak_residual(u: &ProbVector, x: usize) -> Result<f64> {
    let wx = varpi_x(u, x)?;
    Ok(g(wx, u) - u[x])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::DEFAULT_SUM_TOL;

    fn pv(x: &[f64]) -> ProbVector {
        ProbVector::new(x, DEFAULT_SUM_TOL).unwrap()
    }
    fn u1() -> ProbVector {
        pv(&[0.1, 0.2, 0.3, 0.4])
    }
    fn u6() -> ProbVector {
        pv(&[0.03, 0.07, 0.12, 0.24, 0.25, 0.29])
    }
    fn d1() -> RevenueParams {
        RevenueParams::new(4.5, 2.0, 2.0, 11.0, 2.0).unwrap()
    }
    fn d2() -> RevenueParams {
        RevenueParams::new(1.0, 9.0, 2.0, 3.0, 2.0).unwrap()
    }

    #[test]
    fn peak_coefficients() {
        let u = u1();
        assert_eq!(varpi_x(&u, 0).unwrap(), f64::INFINITY);
        assert_eq!(varpi_x(&u, 3).unwrap(), f64::NEG_INFINITY);
        let w = varpi_x(&u, 1).unwrap();
        assert!((w - 9.130_989_640_669_856).abs() < 1e-8);
        assert!((g(w, &u) - 0.2).abs() < 1e-12);
        // 0.5² + 0.3² + 0.2² = 0.38, so put 0.38 into a vector with that γ:
        // {a, 0.38, b} with a + b = 0.62 and a² + b² = 0.38 − 0.1444.
        let s = 0.62_f64;
        let q = 0.38 - 0.38_f64 * 0.38;
        let disc = (2.0 * q - s * s).sqrt();
        let (a, b) = ((s - disc) / 2.0, (s + disc) / 2.0);
        let v = pv(&[a, 0.38, b]);
        assert!((gamma(&v) - 0.38).abs() < 1e-12);
        assert!(varpi_x(&v, 1).unwrap().abs() < 1e-9);
    }

    #[test]
    fn fig6_reference_values() {
        let u = u6();
        let peaks = [
            24.576_076_588_854_66,
            13.591_638_172_737_827,
            -3.286_351_194_634_844,
            -6.265_927_079_511_027,
        ];
        let crossings = [
            85.805_439_225_489_44,
            31.819_857_575_834_83,
            -7.028_710_226_525_546,
            -14.489_477_198_923_184,
        ];
        for x in 1..5 {
            let wx = varpi_x(&u, x).unwrap();
            assert!((wx - peaks[x - 1]).abs() < 1e-8, "{x}: {wx}");
            let wt = varpi_tilde_x(&u, x, CROSSOVER_TOL).unwrap().unwrap();
            assert!((wt - crossings[x - 1]).abs() < 1e-7, "{x}: {wt}");
            assert!((f(wt, x, &u).unwrap() - u[x]).abs() < 1e-10);
        }
        assert_eq!(varpi_tilde_x(&u, 0, CROSSOVER_TOL).unwrap(), None);
        assert_eq!(varpi_tilde_x(&u, 5, CROSSOVER_TOL).unwrap(), None);
    }

    #[test]
    fn partitions() {
        let u = u1();
        let p = crossover_partition(&u, 0.0).unwrap();
        assert!(p.amplified.is_empty() && p.attenuated.is_empty());
        assert_eq!(p.arrow(2), '=');
        let wt = varpi_tilde_x(&u, 1, CROSSOVER_TOL).unwrap().unwrap();
        let p = crossover_partition(&u, wt + 1.0).unwrap();
        assert_eq!(p.amplified, vec![0]);
        let p = crossover_partition(&u, 1.0).unwrap();
        assert_eq!(p.amplified, vec![0, 1]);
        assert_eq!(p.arrow(3), '↓');
        // u_3 = 0.3 equals γ, so no crossing exists and only the largest
        // class is ever amplified by a negative tilt.
        assert_eq!(varpi_tilde_x(&u, 2, CROSSOVER_TOL).unwrap(), None);
        for w in [-0.5, -3.0, -30.0] {
            assert_eq!(crossover_partition(&u, w).unwrap().amplified, vec![3]);
        }
        assert!(crossover_partition(&u, f64::INFINITY).is_err());
    }

    #[test]
    fn beta_x_examples() {
        let u = u1();
        assert!((beta_x(&d1(), &u, 0).unwrap() - 2.0).abs() < 1e-12);
        assert!((beta_x(&d1(), &u, 3).unwrap() - 0.5).abs() < 1e-12);
        assert!((beta_x(&d2(), &u, 3).unwrap() - 2.0).abs() < 1e-12);
        let n = RevenueParams::new(1.0, 3.0, 1.0, 5.0, 1.0).unwrap();
        assert_eq!(beta_x(&n, &u, 0), Err(Error::NeutralSystem));
    }

    #[test]
    fn beta_response_pieces() {
        let u = u1();
        let r = beta_response(&d1(), &u, 1).unwrap();
        assert!((r.beta_x - 1.5).abs() < 1e-12);
        assert_eq!(r.increasing.map(|i| i.0), Some(1.0));
        assert!(r.decreasing.is_some());
        let r = beta_response(&d1(), &u, 0).unwrap();
        assert!(r.decreasing.is_none() && r.increasing.is_some());
        let r = beta_response(&d1(), &u, 3).unwrap();
        assert!(r.increasing.is_none() && r.decreasing.is_some());
        let r = beta_response(&d2(), &u, 2).unwrap();
        assert!(r.increasing.is_none() && r.decreasing.is_some());
        let r = beta_response(&d2(), &u, 3).unwrap();
        assert!(r.increasing.is_some() && r.decreasing.is_none());
        let v = pv(&[0.05, 0.05, 0.44, 0.46]);
        let r = beta_response(&d2(), &v, 2).unwrap();
        assert!(r.increasing.is_some() && r.decreasing.is_some());
        let r = beta_response(&d2(), &v, 0).unwrap();
        assert!(r.increasing.is_none());
    }

    #[test]
    fn varpi_sweep_rows() {
        let u = u6();
        let s = sweep_varpi(&u, -40.0, 40.0, 81).unwrap();
        assert_eq!(s.varpi[40], 0.0);
        assert_eq!(s.rows[40], u.as_slice());
        for r in &s.rows {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        let r = &s.rows[0];
        assert!((r[5] - 0.777_272_103_166_080_9).abs() < 1e-12);
        assert!(r[..3].iter().all(|&v| v < 1e-3));
        assert!(sweep_varpi(&u, 1.0, 1.0, 5).is_err());
        assert!(sweep_varpi(&u, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn beta_sweep_phases() {
        let u = u1();
        let pts = sweep_beta(&d1(), &u, 0.0, 3.0, 31).unwrap();
        assert_eq!(pts.len(), 31);
        assert_eq!(pts[30].beta, 3.0);
        let outcomes: Vec<&str> = pts.iter().map(|p| p.result.regime.case_id.outcome()).collect();
        assert_eq!(outcomes[0], "utility");
        assert_eq!(outcomes[15], "tilted");
        assert_eq!(outcomes[30], "infeasible");
        assert!(pts[30].revenue.is_none());
        assert!((pts[15].revenue.unwrap() - 1.5).abs() < 1e-9);
    }
}
