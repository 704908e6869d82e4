//! Brute-force reference optimizer: exhaustive minimization of `D(P‖U)` over
//! the lattice `{k/m}` on the simplex, subject to the revenue constraint.
//!
//! Nothing here uses the tilt structure. Revenue is scored through the
//! payoff × occurrence matrix sum rather than the closed form, and lattice
//! points may contain zeros (with `0·log 0 = 0`).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizer::SolveResult;
use crate::prob::{LogBase, ProbVector};
use crate::revenue::{expected_revenue_by_matrix, RevenueParams};

pub const DEFAULT_MAX_DIMENSION: usize = 5;
pub const MIN_RESOLUTION: u32 = 10;
/// Grid-vs-closed-form tolerance at `m = 200`, in bits.
pub const EPS_GRID_BITS: f64 = 2e-3;

/// Lattice resolution and dimension limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    resolution: u32,
    max_dimension: usize,
}

impl GridSpec {
    pub fn new(resolution: u32) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::ResolutionTooCoarse(resolution));
        }
        Ok(GridSpec {
            resolution,
            max_dimension: DEFAULT_MAX_DIMENSION,
        })
    }

    pub fn with_max_dimension(mut self, max_dimension: usize) -> Self {
        self.max_dimension = max_dimension;
        self
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn max_dimension(&self) -> usize {
        self.max_dimension
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.max_dimension {
            return Err(Error::DimensionTooLarge {
                n,
                max: self.max_dimension,
            });
        }
        Ok(())
    }
}

/// `C(m+n−1, n−1)`, the number of lattice points.
pub fn lattice_size(n: usize, m: u32) -> u128 {
    if n == 0 {
        return 0;
    }
    let k = (n - 1) as u128;
    let top = m as u128 + k;
    (1..=k).fold(1u128, |acc, i| acc * (top - k + i) / i)
}

/// Compositions of `total` into `parts` nonnegative integers, in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Option<Vec<u32>>,
}

impl Compositions {
    pub fn new(parts: usize, total: u32) -> Self {
        let current = (parts > 0).then(|| {
            let mut c = vec![0; parts];
            c[parts - 1] = total;
            c
        });
        Compositions { current }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.take()?;
        let n = out.len();
        // Rightmost nonzero entry; if it is the first one we are done.
        if let Some(j) = out.iter().rposition(|&c| c > 0).filter(|&j| j > 0) {
            let mut next = out.clone();
            let moved = next[j] - 1;
            next[j] = 0;
            next[j - 1] += 1;
            next[n - 1] = moved;
            self.current = Some(next);
        }
        Some(out)
    }
}

/// All lattice points of the simplex with step `1/m`, under the default
/// dimension limit.
pub fn enumerate_simplex(n: usize, m: u32) -> Result<impl Iterator<Item = Vec<f64>>> {
    if n > DEFAULT_MAX_DIMENSION {
        return Err(Error::DimensionTooLarge {
            n,
            max: DEFAULT_MAX_DIMENSION,
        });
    }
    if m == 0 {
        return Err(Error::ResolutionTooCoarse(m));
    }
    let mf = m as f64;
    Ok(Compositions::new(n, m).map(move |c| c.iter().map(|&k| k as f64 / mf).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOptimum {
    pub point: Vec<f64>,
    pub kl_bits: f64,
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub n: usize,
    pub resolution: u32,
    pub points: u64,
    pub feasible_points: u64,
    /// `None` when no lattice point meets the revenue target.
    pub best: Option<GridOptimum>,
}

impl OracleResult {
    pub fn is_feasible(&self) -> bool {
        self.best.is_some()
    }
}

/// Slack allowed when testing `R̄(p) ≥ β` on lattice points.
fn feasibility_tol(params: &RevenueParams, beta: f64) -> f64 {
    let scale = [
        params.cost_push(),
        params.reward_hit(),
        params.cost_miss_like(),
        params.reward_ad(),
        params.cost_omit(),
        beta,
    ]
    .iter()
    .map(|v| v.abs())
    .sum::<f64>();
    1e-12 * (1.0 + scale)
}

struct Partial {
    points: u64,
    feasible: u64,
    best: Option<(f64, Vec<u32>)>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.points += other.points;
        self.feasible += other.feasible;
        self.best = match (self.best, other.best) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
            (a, b) => a.or(b),
        };
        self
    }
}

/// Exhaustive search for the feasible lattice point closest to `u`.
pub fn brute_force_optimum(
    u: &ProbVector,
    params: &RevenueParams,
    beta: f64,
    grid: GridSpec,
) -> Result<OracleResult> {
    let n = u.len();
    grid.check(n)?;
    let m = grid.resolution;
    let mf = m as f64;
    let ln_u: Vec<f64> = u.iter().map(|x| x.ln()).collect();
    let ln_q: Vec<f64> = (0..=m).map(|k| (k as f64 / mf).ln()).collect();
    let tol = feasibility_tol(params, beta);

    let score = |counts: &[u32], p: &mut Vec<f64>| -> Result<Option<f64>> {
        p.clear();
        p.extend(counts.iter().map(|&k| k as f64 / mf));
        let r = expected_revenue_by_matrix(p.as_slice(), u, params)?;
        if r < beta - tol {
            return Ok(None);
        }
        let kl: f64 = counts
            .iter()
            .zip(p.iter())
            .zip(&ln_u)
            .filter(|((&k, _), _)| k > 0)
            .map(|((&k, &pi), lu)| pi * (ln_q[k as usize] - lu))
            .sum();
        Ok(Some(kl))
    };

    let total = (0..=m)
        .into_par_iter()
        .map(|first| -> Result<Partial> {
            let mut part = Partial {
                points: 0,
                feasible: 0,
                best: None,
            };
            let mut counts = vec![0u32; n];
            let mut p = Vec::with_capacity(n);
            counts[0] = first;
            for tail in Compositions::new(n - 1, m - first) {
                counts[1..].copy_from_slice(&tail);
                part.points += 1;
                if let Some(kl) = score(&counts, &mut p)? {
                    part.feasible += 1;
                    if part.best.as_ref().is_none_or(|b| kl < b.0) {
                        part.best = Some((kl, counts.clone()));
                    }
                }
            }
            Ok(part)
        })
        .try_reduce(
            || Partial {
                points: 0,
                feasible: 0,
                best: None,
            },
            |a, b| Ok(a.merge(b)),
        )?;

    let best = match total.best {
        Some((kl_nats, counts)) => {
            let point: Vec<f64> = counts.iter().map(|&k| k as f64 / mf).collect();
            let revenue = expected_revenue_by_matrix(&point, u, params)?;
            Some(GridOptimum {
                point,
                kl_bits: LogBase::Bits.from_nats(kl_nats.max(0.0)),
                revenue,
            })
        }
        None => None,
    };
    Ok(OracleResult {
        n,
        resolution: m,
        points: total.points,
        feasible_points: total.feasible,
        best,
    })
}

/// Agreement between a closed-form solve and the lattice search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub optimizer_feasible: bool,
    pub oracle_feasible: bool,
    /// Optimizer feasible but no lattice point found: the feasible set is
    /// thinner than the grid step. Not a failure.
    pub resolution_warning: bool,
    /// `D_grid − D(p*‖u)` in bits.
    pub delta_kl_bits: Option<f64>,
    /// `D(q‖u) − D(p*‖u)` in bits for a concrete feasible lattice point `q`
    /// built by rounding `p*`; an upper bound on `delta_kl_bits`.
    pub eps_grid_bits: Option<f64>,
}

impl DiscrepancyReport {
    /// The closed form is no worse than any lattice point, up to `slack`.
    pub fn never_loses(&self, slack: f64) -> bool {
        self.delta_kl_bits.is_none_or(|d| d >= -slack)
    }

    /// `|delta_kl_bits| ≤ eps`.
    pub fn within(&self, eps: f64) -> bool {
        self.delta_kl_bits.is_none_or(|d| d.abs() <= eps)
    }
}

/// Compares a solve result with an oracle run on the same instance.
///
/// Fails with [`Error::FeasibilityMismatch`] when the optimizer declares the
/// target unattainable yet a lattice point attains it.
pub fn compare(
    optimizer: &SolveResult,
    oracle: &OracleResult,
    u: &ProbVector,
    params: &RevenueParams,
    beta: f64,
) -> Result<DiscrepancyReport> {
    let (of, gf) = (optimizer.is_feasible(), oracle.is_feasible());
    if !of && gf {
        return Err(Error::FeasibilityMismatch {
            optimizer: of,
            oracle: gf,
        });
    }
    let mut report = DiscrepancyReport {
        optimizer_feasible: of,
        oracle_feasible: gf,
        resolution_warning: of && !gf,
        delta_kl_bits: None,
        eps_grid_bits: None,
    };
    if let (Some(kl), Some(best)) = (optimizer.kl_bits, &oracle.best) {
        report.delta_kl_bits = Some(best.kl_bits - kl);
    }
    if let (Some(p), Some(kl)) = (&optimizer.p_star, optimizer.kl_bits) {
        if let Some(q) = feasible_rounding(p, u, params, beta, oracle.resolution)? {
            let kq = crate::prob::kl_divergence(&q, u, LogBase::Bits)?;
            report.eps_grid_bits = Some(kq - kl);
        }
    }
    Ok(report)
}

/// A feasible lattice point near `p`: largest-remainder rounding, greedy
/// single-unit moves until the revenue target is met, then single-unit moves
/// that lower the divergence while staying feasible.
pub fn feasible_rounding(
    p: &[f64],
    u: &ProbVector,
    params: &RevenueParams,
    beta: f64,
    m: u32,
) -> Result<Option<Vec<f64>>> {
    if p.len() != u.len() {
        return Err(Error::LengthMismatch(p.len(), u.len()));
    }
    let mf = m as f64;
    let scaled: Vec<f64> = p.iter().map(|x| x * mf).collect();
    let mut counts: Vec<u32> = scaled.iter().map(|x| x.floor() as u32).collect();
    let short = m.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (scaled[a] - scaled[a].floor(), scaled[b] - scaled[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(short as usize) {
        counts[i] += 1;
    }

    let tol = feasibility_tol(params, beta);
    let to_point = |c: &[u32]| c.iter().map(|&k| k as f64 / mf).collect::<Vec<f64>>();
    let kl = |c: &[u32]| -> f64 {
        c.iter()
            .zip(u.iter())
            .filter(|(&k, _)| k > 0)
            .map(|(&k, &ui)| {
                let q = k as f64 / mf;
                q * (q / ui).ln()
            })
            .sum()
    };
    let d = params.denominator();
    let n = u.len();
    let feasible =
        |c: &[u32]| -> Result<bool> { Ok(expected_revenue_by_matrix(&to_point(c), u, params)? >= beta - tol) };
    // Single-unit moves that keep the point feasible and lower the divergence.
    let polish = |mut c: Vec<u32>| -> Result<Vec<u32>> {
        loop {
            let here = kl(&c);
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..n {
                for j in 0..n {
                    if i == j || c[i] == 0 {
                        continue;
                    }
                    c[i] -= 1;
                    c[j] += 1;
                    let k = kl(&c);
                    if k < here && best.is_none_or(|b| k < b.0) && feasible(&c)? {
                        best = Some((k, i, j));
                    }
                    c[j] -= 1;
                    c[i] += 1;
                }
            }
            match best {
                Some((_, i, j)) => {
                    c[i] -= 1;
                    c[j] += 1;
                }
                None => return Ok(c),
            }
        }
    };
    loop {
        if feasible(&counts)? {
            return polish(counts).map(|c| Some(to_point(&c)));
        }
        // Cheapest single-unit move per unit of revenue gained.
        let here = kl(&counts);
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            for j in 0..n {
                let gain = d * (u[i] - u[j]);
                if counts[i] == 0 || gain <= 0.0 {
                    continue;
                }
                counts[i] -= 1;
                counts[j] += 1;
                let cost = (kl(&counts) - here) / gain;
                counts[j] -= 1;
                counts[i] += 1;
                if best.is_none_or(|b| cost < b.0) {
                    best = Some((cost, i, j));
                }
            }
        }
        match best {
            Some((_, i, j)) => {
                counts[i] -= 1;
                counts[j] += 1;
            }
            None => return Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::optimal_distribution;
    use crate::prob::DEFAULT_SUM_TOL;

    fn u1() -> ProbVector {
        ProbVector::new(&[0.1, 0.2, 0.3, 0.4], DEFAULT_SUM_TOL).unwrap()
    }
    fn d1() -> RevenueParams {
        RevenueParams::new(4.5, 2.0, 2.0, 11.0, 2.0).unwrap()
    }
    fn d2() -> RevenueParams {
        RevenueParams::new(1.0, 9.0, 2.0, 3.0, 2.0).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        let pts: Vec<Vec<f64>> = enumerate_simplex(2, 2).unwrap().collect();
        assert_eq!(pts, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(enumerate_simplex(3, 4).unwrap().count(), 15);
        assert_eq!(lattice_size(3, 4), 15);
        assert_eq!(lattice_size(4, 200), 1_373_701);
        assert_eq!(enumerate_simplex(4, 30).unwrap().count() as u128, lattice_size(4, 30));
        assert!(matches!(enumerate_simplex(6, 10), Err(Error::DimensionTooLarge { n: 6, max: 5 })));
    }

    #[test]
    fn compositions_are_distinct_and_sum() {
        let all: Vec<Vec<u32>> = Compositions::new(3, 6).collect();
        assert_eq!(all.len(), 28);
        assert!(all.iter().all(|c| c.iter().sum::<u32>() == 6));
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Compositions::new(1, 5).collect::<Vec<_>>(), vec![vec![5]]);
    }

    #[test]
    fn grid_spec_validation() {
        assert_eq!(GridSpec::new(9), Err(Error::ResolutionTooCoarse(9)));
        let g = GridSpec::new(10).unwrap();
        assert_eq!(g.max_dimension(), 5);
        let u = ProbVector::uniform(6).unwrap();
        assert!(matches!(
            brute_force_optimum(&u, &d1(), 0.0, g),
            Err(Error::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn unconstrained_case_lands_on_utility() {
        let r = brute_force_optimum(&u1(), &d1(), 0.5, GridSpec::new(100).unwrap()).unwrap();
        let best = r.best.unwrap();
        assert_eq!(best.point, vec![0.1, 0.2, 0.3, 0.4]);
        assert!(best.kl_bits < 1e-12);
        assert_eq!(r.points as u128, lattice_size(4, 100));
    }

    #[test]
    fn infeasible_case_has_no_point() {
        let r = brute_force_optimum(&u1(), &d2(), 2.5, GridSpec::new(50).unwrap()).unwrap();
        assert!(r.best.is_none());
        assert_eq!(r.feasible_points, 0);
    }

    #[test]
    fn edge_indicator_is_reachable() {
        let r = brute_force_optimum(&u1(), &d1(), 2.0, GridSpec::new(20).unwrap()).unwrap();
        assert_eq!(r.best.unwrap().point, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn comparison_reports() {
        let u = u1();
        let s = optimal_distribution(&d1(), &u, 1.5).unwrap();
        let o = brute_force_optimum(&u, &d1(), 1.5, GridSpec::new(50).unwrap()).unwrap();
        let c = compare(&s, &o, &u, &d1(), 1.5).unwrap();
        assert!(c.never_loses(1e-12));
        let d = c.delta_kl_bits.unwrap();
        assert!(d <= c.eps_grid_bits.unwrap() + 1e-15);

        let s = optimal_distribution(&d2(), &u, 2.5).unwrap();
        let o = brute_force_optimum(&u, &d2(), 2.5, GridSpec::new(20).unwrap()).unwrap();
        let c = compare(&s, &o, &u, &d2(), 2.5).unwrap();
        assert!(!c.optimizer_feasible && !c.oracle_feasible && !c.resolution_warning);

        // A feasible solve against an infeasible oracle run only warns.
        let s = optimal_distribution(&d1(), &u, 1.99999).unwrap();
        let empty = OracleResult {
            n: 4,
            resolution: 10,
            points: 0,
            feasible_points: 0,
            best: None,
        };
        let c = compare(&s, &empty, &u, &d1(), 1.99999).unwrap();
        assert!(c.resolution_warning);

        let s = optimal_distribution(&d2(), &u, 2.5).unwrap();
        let o = brute_force_optimum(&u, &d1(), 0.5, GridSpec::new(10).unwrap()).unwrap();
        assert!(matches!(compare(&s, &o, &u, &d2(), 2.5), Err(Error::FeasibilityMismatch { .. })));
    }

    #[test]
    fn rounding_is_feasible() {
        let u = u1();
        let s = optimal_distribution(&d1(), &u, 1.9).unwrap();
        let q = feasible_rounding(s.p_star.as_ref().unwrap(), &u, &d1(), 1.9, 200)
            .unwrap()
            .unwrap();
        assert!(expected_revenue_by_matrix(&q, &u, &d1()).unwrap() >= 1.9 - 1e-9);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
