//! The exponential-tilt kernel.
//!
//! For a utility distribution `u` and importance coefficient `w` the class
//! weight is `u_i·exp(w(1−u_i))`; normalizing the weights gives the tilted
//! distribution `f(w, ·, u)` and the ratio of tilted second to first moment
//! gives `g(w, u)`. Every finite-`w` evaluation factors out the largest
//! exponent before calling `exp`, so nothing overflows for any finite `w`.
//! `w = ±∞` is handled through the explicit limits.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Extremum, Result};
use crate::prob::{Pmf, ProbVector};

/// Importance coefficient on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ImportanceCoefficient(f64);

impl ImportanceCoefficient {
    pub const ZERO: Self = ImportanceCoefficient(0.0);
    pub const POS_INF: Self = ImportanceCoefficient(f64::INFINITY);
    pub const NEG_INF: Self = ImportanceCoefficient(f64::NEG_INFINITY);

    /// Rejects NaN; infinities are allowed.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() {
            return Err(Error::InvalidArgument("importance coefficient is NaN".into()));
        }
        Ok(ImportanceCoefficient(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for ImportanceCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            f.write_str("+inf")
        } else if self.0 == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for ImportanceCoefficient {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `exp(w(1−u_i) − shift)` for every class, plus the shift.
fn shifted_exponentials(w: f64, u: &[f64]) -> (Vec<f64>, f64) {
    debug_assert!(w.is_finite());
    let shift = u
        .iter()
        .map(|&ui| w * (1.0 - ui))
        .fold(f64::NEG_INFINITY, f64::max);
    let e = u.iter().map(|&ui| (w * (1.0 - ui) - shift).exp()).collect();
    (e, shift)
}

/// The importance weight `u_i·exp(w(1−u_i))` of a single class.
pub fn mim_weight(u_i: f64, w: f64) -> Result<f64> {
    if !(u_i > 0.0 && u_i < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "class probability must lie in (0, 1), got {u_i}"
        )));
    }
    if !w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "weight needs a finite coefficient, got {w}"
        )));
    }
    let value = u_i * (w * (1.0 - u_i)).exp();
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::NonFiniteResult { u: u_i, w })
    }
}

/// Natural log of the total weight `Σ u_i·exp(w(1−u_i))`, finite for any
/// finite `w`.
pub fn log_total_weight(w: f64, u: &ProbVector) -> f64 {
    if w == 0.0 {
        return u.iter().sum::<f64>().ln();
    }
    let (e, shift) = shifted_exponentials(w, u);
    let s: f64 = u.iter().zip(&e).map(|(ui, ei)| ui * ei).sum();
    shift + s.ln()
}

/// `g(w, v) = Σ v_i² e^{w(1−v_i)} / Σ v_i e^{w(1−v_i)}`.
///
/// Strictly decreasing in `w` unless `v` is uniform, with `g(0, v) = Σ v_i²`,
/// `g(−∞, v) = max v` and `g(+∞, v) = min v`.
pub fn g(w: f64, v: &ProbVector) -> f64 {
    if w == f64::NEG_INFINITY {
        return v.max();
    }
    if w == f64::INFINITY {
        return v.min();
    }
    let (e, _) = shifted_exponentials(w, v);
    let (mut num, mut den) = (0.0, 0.0);
    for (&vi, &ei) in v.iter().zip(&e) {
        den += vi * ei;
        num += vi * vi * ei;
    }
    (num / den).clamp(v.min(), v.max())
}

/// `∂g/∂w` in the pairwise form
/// `−Σ_{v_i>v_j} (v_i−v_j)² v_i v_j e^{w(2−v_i−v_j)} / (Σ v_k e^{w(1−v_k)})²`,
/// which is non-positive term by term.
pub fn g_derivative(w: f64, v: &ProbVector) -> f64 {
    let (e, _) = shifted_exponentials(w, v);
    let den: f64 = v.iter().zip(&e).map(|(vi, ei)| vi * ei).sum();
    let mut num = 0.0;
    for i in 0..v.len() {
        for j in 0..i {
            let diff = v[i] - v[j];
            num += diff * diff * v[i] * v[j] * e[i] * e[j];
        }
    }
    -num / (den * den)
}

/// `f(w, x, u)`: the tilted probability of class `x` (zero-based).
///
/// For `w = +∞` (resp. `−∞`) the mass concentrates on the unique smallest
/// (resp. largest) utility entry; a tie there is reported as
/// [`Error::AmbiguousExtremum`].
pub fn f(w: f64, x: usize, u: &ProbVector) -> Result<f64> {
    if x >= u.len() {
        return Err(Error::IndexOutOfRange { index: x, len: u.len() });
    }
    if w == 0.0 {
        return Ok(u[x]);
    }
    if !w.is_finite() {
        let k = limit_class(w, u)?;
        return Ok(if k == x { 1.0 } else { 0.0 });
    }
    let (e, _) = shifted_exponentials(w, u);
    let den: f64 = u.iter().zip(&e).map(|(ui, ei)| ui * ei).sum();
    Ok(u[x] * e[x] / den)
}

fn limit_class(w: f64, u: &ProbVector) -> Result<usize> {
    if w > 0.0 {
        u.unique_argmin().ok_or(Error::AmbiguousExtremum(Extremum::Min))
    } else {
        u.unique_argmax().ok_or(Error::AmbiguousExtremum(Extremum::Max))
    }
}

/// The full tilted distribution `{f(w, x, u)}_x`.
///
/// Returned as a [`Pmf`] because entries underflow to zero for large `|w|`
/// and are exactly zero in the infinite limits.
pub fn normalized_mim(w: f64, u: &ProbVector) -> Result<Pmf> {
    if w == 0.0 {
        return Ok(u.to_pmf());
    }
    if !w.is_finite() {
        return Pmf::indicator(u.len(), limit_class(w, u)?);
    }
    let (e, _) = shifted_exponentials(w, u);
    let weights: Vec<f64> = u.iter().zip(&e).map(|(ui, ei)| ui * ei).collect();
    let den: f64 = weights.iter().sum();
    let p: Vec<f64> = weights.iter().map(|wt| wt / den).collect();
    Pmf::new(&p, 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{gamma, DEFAULT_SUM_TOL};

    fn u1() -> ProbVector {
        ProbVector::new(&[0.1, 0.2, 0.3, 0.4], DEFAULT_SUM_TOL).unwrap()
    }

    #[test]
    fn weights() {
        assert_eq!(mim_weight(0.3, 0.0).unwrap(), 0.3);
        // 0.1·e^0.9 and 0.5·e^-1, evaluated at 40 digits.
        assert!((mim_weight(0.1, 1.0).unwrap() - 0.245_960_311_115_694_97).abs() < 1e-15);
        assert!((mim_weight(0.5, -2.0).unwrap() - 0.183_939_720_585_721_16).abs() < 1e-15);
        assert!(matches!(mim_weight(0.1, 1e4), Err(Error::NonFiniteResult { .. })));
        assert!(mim_weight(0.0, 1.0).is_err());
    }

    #[test]
    fn g_special_values() {
        let v = u1();
        assert!((g(0.0, &v) - gamma(&v)).abs() < 1e-15);
        assert_eq!(g(f64::NEG_INFINITY, &v), 0.4);
        assert_eq!(g(f64::INFINITY, &v), 0.1);
        let g5 = g(5.0, &v);
        assert!(g5 > 0.1 && g5 < 0.3);
    }

    #[test]
    fn g_is_finite_for_huge_coefficients() {
        let v = u1();
        for w in [-1e4, -800.0, 800.0, 1e4, 1e300] {
            let x = g(w, &v);
            assert!(x.is_finite() && (v.min()..=v.max()).contains(&x), "{w} -> {x}");
        }
    }

    #[test]
    fn derivative_of_uniform_is_zero() {
        let v = ProbVector::uniform(5).unwrap();
        assert_eq!(g_derivative(3.0, &v), 0.0);
        assert_eq!(g_derivative(-30.0, &v), 0.0);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let v = u1();
        let h = 1e-5;
        let fd = (g(h, &v) - g(-h, &v)) / (2.0 * h);
        let d = g_derivative(0.0, &v);
        assert!(d < 0.0);
        assert!((d - fd).abs() < 1e-6, "{d} vs {fd}");
    }

    #[test]
    fn f_limits_and_zero() {
        let v = u1();
        for x in 0..4 {
            assert_eq!(f(0.0, x, &v).unwrap(), v[x]);
        }
        assert_eq!(f(f64::INFINITY, 0, &v).unwrap(), 1.0);
        assert_eq!(f(f64::INFINITY, 2, &v).unwrap(), 0.0);
        assert_eq!(f(f64::NEG_INFINITY, 3, &v).unwrap(), 1.0);
        assert!(matches!(f(1.0, 4, &v), Err(Error::IndexOutOfRange { index: 4, len: 4 })));
        let tied = ProbVector::new(&[0.2, 0.2, 0.6], DEFAULT_SUM_TOL).unwrap();
        assert!(matches!(
            f(f64::INFINITY, 0, &tied),
            Err(Error::AmbiguousExtremum(Extremum::Min))
        ));
        assert_eq!(f(f64::NEG_INFINITY, 2, &tied).unwrap(), 1.0);
    }

    #[test]
    fn normalized_vectors() {
        let v = u1();
        assert_eq!(normalized_mim(0.0, &v).unwrap().as_slice(), v.as_slice());
        assert_eq!(
            normalized_mim(f64::INFINITY, &v).unwrap().as_slice(),
            &[1.0, 0.0, 0.0, 0.0]
        );
        let p = normalized_mim(10.0, &v).unwrap();
        assert!(p[0] > 0.1);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_total_weight_matches_direct_sum() {
        let v = u1();
        let w = 3.0;
        let direct: f64 = v.iter().map(|ui| ui * (w * (1.0 - ui)).exp()).sum();
        assert!((log_total_weight(w, &v) - direct.ln()).abs() < 1e-13);
        assert!(log_total_weight(5e3, &v).is_finite());
    }

    #[test]
    fn coefficient_display() {
        assert_eq!(ImportanceCoefficient::POS_INF.to_string(), "+inf");
        assert_eq!(ImportanceCoefficient::new(-1.5).unwrap().to_string(), "-1.5");
        assert!(ImportanceCoefficient::new(f64::NAN).is_err());
    }
}
