//! Moments of linear error bounds under a uniform input distribution, and
//! the Hoeffding/Bernstein bounds on `P(|f(x) − f′(x)| ≤ ε)` built from them.
//!
//! The symmetric probability is split as
//! `P(|δ| ≤ ε) = P(δ ≤ ε) + P(−δ ≤ ε) − 1`, so with `δ^L ≤ δ ≤ δ^U`
//!
//! ```text
//! F_{δ^U}(ε) + F_{−δ^L}(ε) − 1  ≤  P(|δ| ≤ ε)  ≤  F_{δ^L}(ε) + F_{−δ^U}(ε) − 1
//! ```
//!
//! and each CDF is bounded by a one-sided tail inequality.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::InputRegion;
use crate::propagation::{AffineFn, OutputEnvelope};
use crate::scalar::Scalar;

/// Moments of `Z = C·X + d` with `X` uniform on a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMoments<S> {
    pub mu: S,
    pub var: S,
    /// `sup |Z − E Z|`.
    pub max_dev: S,
    /// `K·‖C‖₂`.
    pub range_norm: S,
    /// Largest box edge.
    pub k: S,
    /// `Σ C_i² (u_i − l_i)²`, the per-coordinate range sum.
    pub coord_range_sq: S,
}

impl<S: Scalar> LinearMoments<S> {
    /// Moments of the negated variable `−Z`.
    pub fn negated(&self) -> Self {
        Self { mu: -self.mu, ..*self }
    }

    /// The variable is a.s. constant.
    pub fn is_degenerate(&self) -> bool {
        self.max_dev <= S::zero()
    }
}

pub fn moments<S: Scalar>(coeffs: &[S], offset: S, region: &InputRegion<S>) -> Result<LinearMoments<S>> {
    if coeffs.len() != region.dim() {
        return Err(Error::Dimension {
            expected: region.dim(),
            got: coeffs.len(),
        });
    }
    let two = S::lit(2.0);
    let twelve = S::lit(12.0);
    let mut m = LinearMoments {
        mu: offset,
        var: S::zero(),
        max_dev: S::zero(),
        range_norm: S::zero(),
        k: region.max_width(),
        coord_range_sq: S::zero(),
    };
    let mut norm_sq = S::zero();
    for ((&c, &l), &u) in coeffs.iter().zip(region.lower()).zip(region.upper()) {
        let w = u - l;
        m.mu += c * (l + u) / two;
        m.var += c * c * w * w / twelve;
        m.max_dev += c.abs() * w / two;
        m.coord_range_sq += c * c * w * w;
        norm_sq += c * c;
    }
    m.range_norm = m.k * norm_sq.sqrt();
    Ok(m)
}

pub fn affine_moments<S: Scalar>(f: &AffineFn<S>, region: &InputRegion<S>) -> Result<LinearMoments<S>> {
    moments(&f.coeffs, f.offset, region)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Hoeffding with the `K·‖C‖₂` range term.
    Hoeffding,
    Bernstein,
    /// Hoeffding with the per-coordinate range sum; tighter, not the default.
    HoeffdingCoordinate,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Hoeffding, Method::Bernstein, Method::HoeffdingCoordinate];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hoeffding => "hoeffding",
            Method::Bernstein => "bernstein",
            Method::HoeffdingCoordinate => "hoeffding-coordinate",
        }
    }

    /// Upper bound on `P(Z − E Z ≥ t)` for `t ≥ 0`; `None` when the
    /// denominator vanishes.
    fn tail<S: Scalar>(self, m: &LinearMoments<S>, t: S) -> Option<S> {
        let denom = match self {
            Method::Hoeffding => m.range_norm * m.range_norm / S::lit(2.0),
            Method::HoeffdingCoordinate => m.coord_range_sq / S::lit(2.0),
            Method::Bernstein => S::lit(2.0) * m.var + S::lit(2.0) * m.max_dev * t / S::lit(3.0),
        };
        (denom > S::zero()).then(|| (-(t * t) / denom).exp().min(S::one()))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Query(format!("unknown method '{s}' (expected hoeffding or bernstein)")))
    }
}

fn indicator<S: Scalar>(holds: bool) -> S {
    if holds {
        S::one()
    } else {
        S::zero()
    }
}

/// Lower bound on `P(Z ≤ eps)` for `Z` with moments `m`.
pub fn cdf_lower<S: Scalar>(method: Method, m: &LinearMoments<S>, eps: S) -> S {
    if m.is_degenerate() {
        return indicator(m.mu <= eps);
    }
    let t = eps - m.mu;
    if t < S::zero() {
        return S::zero();
    }
    match method.tail(m, t) {
        Some(tail) => S::one() - tail,
        None => indicator(m.mu <= eps),
    }
}

/// Upper bound on `P(Z ≤ eps)`.
pub fn cdf_upper<S: Scalar>(method: Method, m: &LinearMoments<S>, eps: S) -> S {
    if m.is_degenerate() {
        return indicator(m.mu <= eps);
    }
    let t = m.mu - eps;
    if t < S::zero() {
        return S::one();
    }
    method.tail(m, t).unwrap_or_else(|| indicator(m.mu <= eps))
}

/// The four CDF bounds feeding [`combine`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfBounds {
    /// Lower bound on `F_{δ^U}(ε)`.
    pub f_du_lo: f64,
    /// Lower bound on `F_{−δ^L}(ε)`.
    pub f_negdl_lo: f64,
    /// Upper bound on `F_{δ^L}(ε)`.
    pub f_dl_hi: f64,
    /// Upper bound on `F_{−δ^U}(ε)`.
    pub f_negdu_hi: f64,
}

pub fn cdf_bounds<S: Scalar>(method: Method, eps: S, lower: &LinearMoments<S>, upper: &LinearMoments<S>) -> CdfBounds {
    CdfBounds {
        f_du_lo: cdf_lower(method, upper, eps).as_f64(),
        f_negdl_lo: cdf_lower(method, &lower.negated(), eps).as_f64(),
        f_dl_hi: cdf_upper(method, lower, eps).as_f64(),
        f_negdu_hi: cdf_upper(method, &upper.negated(), eps).as_f64(),
    }
}

pub fn hoeffding_bounds<S: Scalar>(eps: S, lower: &LinearMoments<S>, upper: &LinearMoments<S>) -> CdfBounds {
    cdf_bounds(Method::Hoeffding, eps, lower, upper)
}

pub fn bernstein_bounds<S: Scalar>(eps: S, lower: &LinearMoments<S>, upper: &LinearMoments<S>) -> CdfBounds {
    cdf_bounds(Method::Bernstein, eps, lower, upper)
}

/// `[γ_min, γ_max]` for `P(|f(x) − f′(x)| ≤ ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityInterval {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub method: Method,
}

impl ProbabilityInterval {
    pub fn exact(p: f64, method: Method) -> Self {
        Self {
            gamma_min: p,
            gamma_max: p,
            method,
        }
    }

    pub fn width(&self) -> f64 {
        self.gamma_max - self.gamma_min
    }

    /// `1 − (γ_max − γ_min)`.
    pub fn width_reduction(&self) -> f64 {
        (1.0 - self.width()).clamp(0.0, 1.0)
    }
}

pub fn combine(b: &CdfBounds, method: Method) -> ProbabilityInterval {
    let gamma_min = (b.f_du_lo + b.f_negdl_lo - 1.0).clamp(0.0, 1.0);
    let gamma_max = (b.f_dl_hi + b.f_negdu_hi - 1.0).clamp(0.0, 1.0).max(gamma_min);
    ProbabilityInterval {
        gamma_min,
        gamma_max,
        method,
    }
}

/// Interval for one output envelope over `region`, straight from the moment bounds.
pub fn envelope_interval<S: Scalar>(
    env: &OutputEnvelope<S>,
    region: &InputRegion<S>,
    eps: S,
    method: Method,
) -> Result<ProbabilityInterval> {
    let lower = affine_moments(&env.lower, region)?;
    let upper = affine_moments(&env.upper, region)?;
    Ok(combine(&cdf_bounds(method, eps, &lower, &upper), method))
}

/// Bernstein's exponent strictly beats Hoeffding's: `σ² < K²/4 − M·t/3`,
/// where `K` is the effective range of the variable.
pub fn tightness_holds<S: Scalar>(var: S, k: S, m: S, t: S) -> bool {
    var < k * k / S::lit(4.0) - m * t / S::lit(3.0)
}

/// Per CDF component (order of [`CdfBounds`]): `None` when the component is
/// decided without a tail bound (guard branch or constant variable), otherwise
/// whether the tightness condition holds with `K = range_norm`.
pub fn component_tightness<S: Scalar>(eps: S, lower: &LinearMoments<S>, upper: &LinearMoments<S>) -> [Option<bool>; 4] {
    let neg_l = lower.negated();
    let neg_u = upper.negated();
    let parts = [
        (*upper, eps - upper.mu),
        (neg_l, eps - neg_l.mu),
        (*lower, lower.mu - eps),
        (neg_u, neg_u.mu - eps),
    ];
    parts.map(|(m, t)| {
        if m.is_degenerate() || t < S::zero() {
            None
        } else {
            Some(tightness_holds(m.var, m.range_norm, m.max_dev, t))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> InputRegion<f64> {
        InputRegion::new(vec![-1.0], vec![1.0]).unwrap()
    }

    fn golden() -> (LinearMoments<f64>, LinearMoments<f64>) {
        let region = unit();
        (
            moments(&[0.09], -0.45, &region).unwrap(),
            moments(&[0.03], 0.40, &region).unwrap(),
        )
    }

    #[test]
    fn moment_examples() {
        let (l, u) = golden();
        assert_abs_diff_eq!(u.mu, 0.40, epsilon = 1e-15);
        assert_abs_diff_eq!(u.var, 0.0003, epsilon = 1e-15);
        assert_abs_diff_eq!(u.max_dev, 0.03, epsilon = 1e-15);
        assert_abs_diff_eq!(u.range_norm, 0.06, epsilon = 1e-15);
        assert_abs_diff_eq!(l.mu, -0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(l.var, 0.0027, epsilon = 1e-15);
        assert_abs_diff_eq!(l.max_dev, 0.09, epsilon = 1e-15);
        let c = moments(&[0.0, 0.0], 0.7, &InputRegion::new(vec![0.0, -3.0], vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!((c.mu, c.var, c.max_dev), (0.7, 0.0, 0.0));
        assert!(matches!(moments(&[1.0, 2.0], 0.0, &unit()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn golden_hoeffding() {
        let (l, u) = golden();
        let b = hoeffding_bounds(0.5, &l, &u);
        assert_abs_diff_eq!(b.f_du_lo, 1.0 - (-2.0 * 0.01 / 0.0036f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.f_du_lo, 0.99614, epsilon = 1e-5);
        assert_abs_diff_eq!(b.f_negdl_lo, 0.143, epsilon = 1e-3);
        assert_abs_diff_eq!(combine(&b, Method::Hoeffding).gamma_min, 0.139, epsilon = 1e-3);
    }

    #[test]
    fn golden_bernstein() {
        let (l, u) = golden();
        let b = bernstein_bounds(0.5, &l, &u);
        assert_abs_diff_eq!(b.f_du_lo, 0.97863, epsilon = 1e-5);
        assert_abs_diff_eq!(b.f_negdl_lo, 0.2574, epsilon = 1e-4);
        assert_abs_diff_eq!(combine(&b, Method::Bernstein).gamma_min, 0.236, epsilon = 1e-3);
    }

    #[test]
    fn golden_in_single_precision() {
        let region = InputRegion::new(vec![-1.0f32], vec![1.0]).unwrap();
        let l = moments(&[0.09f32], -0.45, &region).unwrap();
        let u = moments(&[0.03f32], 0.40, &region).unwrap();
        let h = combine(&hoeffding_bounds(0.5f32, &l, &u), Method::Hoeffding);
        let b = combine(&bernstein_bounds(0.5f32, &l, &u), Method::Bernstein);
        assert!((h.gamma_min - 0.139).abs() < 1e-3);
        assert!((b.gamma_min - 0.236).abs() < 1e-3);
    }

    #[test]
    fn guard_branches() {
        let region = unit();
        // ε − μ^U < 0
        let u = moments(&[0.1], 0.8, &region).unwrap();
        let l = moments(&[0.1], 0.0, &region).unwrap();
        for method in Method::ALL {
            let b = cdf_bounds(method, 0.5, &l, &u);
            assert_eq!(b.f_du_lo, 0.0);
            // μ^L − ε < 0 ⇒ trivial upper bound
            assert_eq!(b.f_dl_hi, 1.0);
        }
        // ε + μ^L < 0
        let l = moments(&[0.1], -0.9, &region).unwrap();
        assert_eq!(bernstein_bounds(0.5, &l, &u).f_negdl_lo, 0.0);
    }

    #[test]
    fn constant_variables_use_exact_cdf() {
        let region = unit();
        let below = moments(&[0.0], 0.3, &region).unwrap();
        let above = moments(&[0.0], 0.7, &region).unwrap();
        for method in Method::ALL {
            assert_eq!(cdf_lower(method, &below, 0.5), 1.0);
            assert_eq!(cdf_upper(method, &below, 0.5), 1.0);
            assert_eq!(cdf_lower(method, &above, 0.5), 0.0);
            assert_eq!(cdf_upper(method, &above, 0.5), 0.0);
        }
        let zero = moments(&[0.0], 0.0, &region).unwrap();
        let p = combine(&cdf_bounds(Method::Bernstein, 0.01, &zero, &zero), Method::Bernstein);
        assert_eq!((p.gamma_min, p.gamma_max), (1.0, 1.0));
    }

    #[test]
    fn combine_clamps_and_orders() {
        let b = CdfBounds {
            f_du_lo: 0.2,
            f_negdl_lo: 0.3,
            f_dl_hi: 0.4,
            f_negdu_hi: 0.1,
        };
        let p = combine(&b, Method::Hoeffding);
        assert_eq!((p.gamma_min, p.gamma_max), (0.0, 0.0));
        let b = CdfBounds {
            f_du_lo: 0.9,
            f_negdl_lo: 0.9,
            f_dl_hi: 1.0,
            f_negdu_hi: 0.85,
        };
        let p = combine(&b, Method::Bernstein);
        assert_abs_diff_eq!(p.gamma_min, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(p.gamma_max, 0.85, epsilon = 1e-12);
        assert_abs_diff_eq!(p.width_reduction(), 0.95, epsilon = 1e-12);
    }

    #[test]
    fn tightness_examples() {
        // δ^U of the two-sided example: K²/4 − Mt/3 = 0.0009 − 0.001 < σ², and
        // indeed Hoeffding's F_{δ^U} bound (0.99614) beats Bernstein's (0.97863).
        assert!(!tightness_holds(0.0003, 0.06, 0.03, 0.1));
        // −δ^L: 0.0081 − 0.0015 > 0.0027.
        assert!(tightness_holds(0.0027, 0.18, 0.09, 0.05));
        assert!(!tightness_holds(0.25, 1.0, 0.0, 0.0));
        assert!(!tightness_holds(0.0, 1.0, 100.0, 1.0));
        let (l, u) = golden();
        let flags = component_tightness(0.5, &l, &u);
        assert_eq!(flags[0], Some(false));
        assert_eq!(flags[1], Some(true));
        assert_eq!(flags[2], None);
        assert_eq!(flags[3], None);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("Bernstein".parse::<Method>().unwrap(), Method::Bernstein);
        assert_eq!("hoeffding-coordinate".parse::<Method>().unwrap(), Method::HoeffdingCoordinate);
        assert!("chernoff".parse::<Method>().is_err());
        assert_eq!(serde_json::to_string(&Method::Hoeffding).unwrap(), "\"hoeffding\"");
    }

    #[test]
    fn per_coordinate_hoeffding_is_tighter() {
        let region = InputRegion::new(vec![0.0, 0.0], vec![1.0, 0.1]).unwrap();
        let l = moments(&[0.1, 0.2], -0.05, &region).unwrap();
        let u = moments(&[0.1, 0.3], 0.05, &region).unwrap();
        let plain = combine(&hoeffding_bounds(0.2, &l, &u), Method::Hoeffding);
        let coord = combine(&cdf_bounds(Method::HoeffdingCoordinate, 0.2, &l, &u), Method::HoeffdingCoordinate);
        assert!(coord.gamma_min >= plain.gamma_min);
        assert!(coord.gamma_max <= plain.gamma_max);
    }

    proptest::proptest! {
        #[test]
        fn gamma_min_monotone_in_eps(c in -1.0f64..1.0, d in -0.5f64..0.5, w in 0.0f64..0.5, e in 0.001f64..1.0, de in 0.0f64..0.5) {
            let region = unit();
            let l = moments(&[c], d - w, &region).unwrap();
            let u = moments(&[c], d + w, &region).unwrap();
            for method in Method::ALL {
                let a = combine(&cdf_bounds(method, e, &l, &u), method);
                let b = combine(&cdf_bounds(method, e + de, &l, &u), method);
                proptest::prop_assert!(b.gamma_min >= a.gamma_min - 1e-15);
                proptest::prop_assert!((0.0..=1.0).contains(&a.gamma_min) && a.gamma_min <= a.gamma_max && a.gamma_max <= 1.0);
            }
        }
    }
}
