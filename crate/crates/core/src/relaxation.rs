//! Per-neuron linear relaxations of the ReLU activation and of the error
//! channel `ĝ(x, δ) = ReLU(x) − ReLU(x − δ)`.
//!
//! Every slope returned here lies in `[0, 1]`; the propagation step relies on
//! non-negative slopes to compose a relaxation with linear input bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `lower_slope·z + lower_intercept ≤ φ(z) ≤ upper_slope·z + upper_intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRelaxation<S> {
    pub lower_slope: S,
    pub lower_intercept: S,
    pub upper_slope: S,
    pub upper_intercept: S,
}

impl<S: Scalar> LinearRelaxation<S> {
    pub fn identity() -> Self {
        Self {
            lower_slope: S::one(),
            lower_intercept: S::zero(),
            upper_slope: S::one(),
            upper_intercept: S::zero(),
        }
    }

    pub fn zero() -> Self {
        Self {
            lower_slope: S::zero(),
            lower_intercept: S::zero(),
            upper_slope: S::zero(),
            upper_intercept: S::zero(),
        }
    }

    pub fn lower_at(&self, z: S) -> S {
        self.lower_slope * z + self.lower_intercept
    }

    pub fn upper_at(&self, z: S) -> S {
        self.upper_slope * z + self.upper_intercept
    }

    pub fn slopes_in_unit_interval(&self) -> bool {
        let unit = |s: S| s >= S::zero() && s <= S::one();
        unit(self.lower_slope) && unit(self.upper_slope)
    }
}

/// Relaxations for one neuron: activation channel (`m`, `p`) and error
/// channel (`n`, `q`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronRelaxation<S> {
    pub activation: LinearRelaxation<S>,
    pub error: LinearRelaxation<S>,
}

fn check_interval<S: Scalar>(lo: S, hi: S) -> Result<()> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::Interval {
            lower: lo.as_f64(),
            upper: hi.as_f64(),
        });
    }
    Ok(())
}

/// Chord of ReLU over a crossing interval `lo < 0 < hi`: `(slope, intercept)`.
fn relu_chord<S: Scalar>(lo: S, hi: S) -> (S, S) {
    let slope = hi / (hi - lo);
    (slope, -lo * slope)
}

/// Lower-line choice for a crossing ReLU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LowerSlope {
    /// `x` when `u ≥ −l`, otherwise `0`.
    #[default]
    Adaptive,
    /// Always `0`.
    Zero,
    /// Always `x`.
    One,
}

/// CROWN-style ReLU relaxation over `[l, u]`.
///
/// Stable intervals are exact. In the crossing case the upper line is the
/// chord through `(l, 0)` and `(u, u)`, and the lower line is `x` when
/// `u ≥ −l`, otherwise `0`.
pub fn relax_activation<S: Scalar>(l: S, u: S) -> Result<LinearRelaxation<S>> {
    relax_activation_with(l, u, LowerSlope::Adaptive)
}

/// [`relax_activation`] with an explicit lower-line rule.
///
/// A fixed rule makes relaxations pointwise nested when `[l, u]` shrinks, so
/// envelopes of sub-boxes stay inside the parent's; the adaptive rule can
/// switch lines and lose that.
pub fn relax_activation_with<S: Scalar>(l: S, u: S, rule: LowerSlope) -> Result<LinearRelaxation<S>> {
    check_interval(l, u)?;
    if l >= S::zero() {
        return Ok(LinearRelaxation::identity());
    }
    if u <= S::zero() {
        return Ok(LinearRelaxation::zero());
    }
    let (upper_slope, upper_intercept) = relu_chord(l, u);
    let lower_slope = match rule {
        LowerSlope::Adaptive if u >= -l => S::one(),
        LowerSlope::Adaptive | LowerSlope::Zero => S::zero(),
        LowerSlope::One => S::one(),
    };
    Ok(LinearRelaxation {
        lower_slope,
        lower_intercept: S::zero(),
        upper_slope,
        upper_intercept,
    })
}

/// Linear-in-δ envelope of `ReLU(x) − ReLU(x − δ)` for `x ∈ [l, u]` and
/// `δ ∈ [d_lo, d_hi]`.
///
/// Base case uses `min(0, δ) ≤ ĝ ≤ max(0, δ)`: the upper line relaxes
/// `max(0, δ)` like [`relax_activation`]'s chord, the lower line is the chord
/// of the concave `min(0, δ)`. Stability of either network tightens a side:
/// original dead (`u ≤ 0`) gives `ĝ ≤ 0`, original live (`l ≥ 0`) gives
/// `ĝ = min(x, δ) ≤ δ`, compressed dead (`x − δ ≤ 0`) gives `ĝ ≥ 0`, compressed
/// live (`x − δ ≥ 0`) gives `ĝ ≥ δ`.
pub fn relax_error<S: Scalar>(x: (S, S), delta: (S, S)) -> Result<LinearRelaxation<S>> {
    let (l, u) = x;
    let (d_lo, d_hi) = delta;
    check_interval(l, u)?;
    check_interval(d_lo, d_hi)?;
    let zero = S::zero();
    if d_lo == zero && d_hi == zero {
        return Ok(LinearRelaxation::zero());
    }
    // Compressed pre-activation x − δ ranges over [l − d_hi, u − d_lo].
    let (c_lo, c_hi) = (l - d_hi, u - d_lo);
    if u <= zero && c_hi <= zero {
        return Ok(LinearRelaxation::zero());
    }
    if l >= zero && c_lo >= zero {
        return Ok(LinearRelaxation::identity());
    }

    let (mut upper_slope, mut upper_intercept) = if d_lo >= zero {
        (S::one(), zero)
    } else if d_hi <= zero {
        (zero, zero)
    } else {
        relu_chord(d_lo, d_hi)
    };
    if u <= zero {
        (upper_slope, upper_intercept) = (zero, zero);
    } else if l >= zero {
        (upper_slope, upper_intercept) = (S::one(), zero);
    }

    let (mut lower_slope, mut lower_intercept) = if d_hi <= zero {
        (S::one(), zero)
    } else if d_lo >= zero {
        (zero, zero)
    } else {
        let slope = -d_lo / (d_hi - d_lo);
        (slope, -slope * d_hi)
    };
    if c_hi <= zero {
        (lower_slope, lower_intercept) = (zero, zero);
    } else if c_lo >= zero {
        (lower_slope, lower_intercept) = (S::one(), zero);
    }

    Ok(LinearRelaxation {
        lower_slope,
        lower_intercept,
        upper_slope,
        upper_intercept,
    })
}

pub fn relax_neuron<S: Scalar>(x: (S, S), delta: (S, S)) -> Result<NeuronRelaxation<S>> {
    Ok(NeuronRelaxation {
        activation: relax_activation(x.0, x.1)?,
        error: relax_error(x, delta)?,
    })
}
