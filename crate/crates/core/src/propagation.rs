//! Dual-network symbolic propagation.
//!
//! For each layer the state keeps linear functions of the network input that
//! sandwich the original network's activations (`A`, `b`) and the
//! accumulated error `δ = x − x′` between the original and the aligned
//! compressed network (`C`, `d`). Every composition with a mixed-sign matrix
//! is sign-split: positive entries pair lower with lower, negative entries
//! pair lower with upper.

use serde::{Deserialize, Serialize};

use crate::compression::AlignedPair;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::network::InputRegion;
use crate::relaxation::{relax_activation_with, relax_error, LinearRelaxation, LowerSlope};
use crate::scalar::{neg, pos, Scalar};

/// Affine scalar function `c·x + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct AffineFn<S> {
    pub coeffs: Vec<S>,
    pub offset: S,
}

impl<S: Scalar> AffineFn<S> {
    pub fn new(coeffs: Vec<S>, offset: S) -> Self {
        Self { coeffs, offset }
    }

    pub fn constant(dim: usize, offset: S) -> Self {
        Self::new(vec![S::zero(); dim], offset)
    }

    pub fn eval(&self, x: &[S]) -> S {
        dot(&self.coeffs, x) + self.offset
    }

    pub fn min_over(&self, region: &InputRegion<S>) -> S {
        row_min(&self.coeffs, self.offset, region)
    }

    pub fn max_over(&self, region: &InputRegion<S>) -> S {
        row_max(&self.coeffs, self.offset, region)
    }
}

fn row_min<S: Scalar>(coeffs: &[S], offset: S, region: &InputRegion<S>) -> S {
    coeffs
        .iter()
        .zip(region.lower().iter().zip(region.upper()))
        .fold(S::zero(), |acc, (&c, (&l, &u))| acc + pos(c) * l + neg(c) * u)
        + offset
}

fn row_max<S: Scalar>(coeffs: &[S], offset: S, region: &InputRegion<S>) -> S {
    coeffs
        .iter()
        .zip(region.lower().iter().zip(region.upper()))
        .fold(S::zero(), |acc, (&c, (&l, &u))| acc + pos(c) * u + neg(c) * l)
        + offset
}

/// Lower and upper linear bounds for a vector quantity:
/// `lower·x + lower_offset ≤ v ≤ upper·x + upper_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBounds<S> {
    pub lower: Matrix<S>,
    pub lower_offset: Vec<S>,
    pub upper: Matrix<S>,
    pub upper_offset: Vec<S>,
}

impl<S: Scalar> LinearBounds<S> {
    fn exact(coeffs: Matrix<S>, offset: Vec<S>) -> Self {
        Self {
            lower: coeffs.clone(),
            lower_offset: offset.clone(),
            upper: coeffs,
            upper_offset: offset,
        }
    }

    pub fn len(&self) -> usize {
        self.lower.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per row: `(min of lower fn, max of lower fn, min of upper fn, max of upper fn)`.
    pub fn concretize_all(&self, region: &InputRegion<S>) -> Vec<[S; 4]> {
        (0..self.len())
            .map(|i| {
                let (lr, ur) = (self.lower.row(i), self.upper.row(i));
                [
                    row_min(lr, self.lower_offset[i], region),
                    row_max(lr, self.lower_offset[i], region),
                    row_min(ur, self.upper_offset[i], region),
                    row_max(ur, self.upper_offset[i], region),
                ]
            })
            .collect()
    }

    /// Conservative interval per row: smallest lower-bound value to largest
    /// upper-bound value over the box.
    pub fn concretize(&self, region: &InputRegion<S>) -> Vec<(S, S)> {
        self.concretize_all(region)
            .into_iter()
            .map(|[ll, lu, ul, uu]| {
                let lo = ll.min(ul);
                let hi = lu.max(uu);
                // Rounding can invert a degenerate interval by an ulp; widen instead.
                (lo.min(hi), hi.max(lo))
            })
            .collect()
    }

    pub fn lower_fn(&self, i: usize) -> AffineFn<S> {
        AffineFn::new(self.lower.row(i).to_vec(), self.lower_offset[i])
    }

    pub fn upper_fn(&self, i: usize) -> AffineFn<S> {
        AffineFn::new(self.upper.row(i).to_vec(), self.upper_offset[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Bounds on `x_k` and `δ_k`.
    PreActivation,
    /// Bounds on `x̂_k` and `δ̂_k`.
    PostActivation,
}

#[derive(Debug, Clone)]
pub struct SymbolicState<S> {
    /// 1-based layer index (0 = input).
    pub layer: usize,
    pub stage: Stage,
    pub activation: LinearBounds<S>,
    pub error: LinearBounds<S>,
    /// `[l_k, u_k]` after [`concretize`].
    pub pre_interval: Option<Vec<(S, S)>>,
    /// `[d̲_k, d̄_k]` after [`concretize`].
    pub error_interval: Option<Vec<(S, S)>>,
}

impl<S: Scalar> SymbolicState<S> {
    /// Post-activation state of the input layer: `x̂_0 = x`, `δ̂_0 = 0`.
    pub fn input(dim: usize) -> Self {
        Self {
            layer: 0,
            stage: Stage::PostActivation,
            activation: LinearBounds::exact(Matrix::identity(dim), vec![S::zero(); dim]),
            error: LinearBounds::exact(Matrix::zeros(dim, dim), vec![S::zero(); dim]),
            pre_interval: None,
            error_interval: None,
        }
    }
}

/// Exact pre-activation bounds of layer 1: `A = W_1`, `b = b_1`,
/// `C = W_1 − W′_1`, `d = b_1 − b′_1`.
pub fn init_state<S: Scalar>(pair: &AlignedPair<S>) -> SymbolicState<S> {
    let first = &pair.original().layers()[0];
    SymbolicState {
        layer: 1,
        stage: Stage::PreActivation,
        activation: LinearBounds::exact(first.weight.clone(), first.bias.clone()),
        error: LinearBounds::exact(pair.weight_delta(1).clone(), pair.bias_delta(1).to_vec()),
        pre_interval: None,
        error_interval: None,
    }
}

fn add_into<S: Scalar>(acc: &mut Matrix<S>, other: &Matrix<S>) {
    *acc = acc.zip_map(other, |a, b| a + b);
}

/// Linear step into layer `k`:
/// `x_k = W_k x̂_{k−1} + b_k`, `δ_k = W^Δ_k x̂_{k−1} + W′_k δ̂_{k−1} + b^Δ_k`.
pub fn propagate_linear<S: Scalar>(state: &SymbolicState<S>, pair: &AlignedPair<S>, k: usize) -> Result<SymbolicState<S>> {
    if k == 0 || k > pair.num_layers() || state.layer + 1 != k || state.stage != Stage::PostActivation {
        return Err(Error::Shape(format!(
            "cannot enter layer {k} from layer {} ({:?})",
            state.layer, state.stage
        )));
    }
    let w = &pair.original().layers()[k - 1].weight;
    let bias = &pair.original().layers()[k - 1].bias;
    let w_c = &pair.compressed().layers()[k - 1].weight;
    let w_d = pair.weight_delta(k);
    let b_d = pair.bias_delta(k);
    if w.cols() != state.activation.len() {
        return Err(Error::Shape(format!(
            "layer {k} expects {} inputs, state has {}",
            w.cols(),
            state.activation.len()
        )));
    }
    let act = &state.activation;
    let err = &state.error;

    let (a_lo, a_hi) = w.split_matmul(&act.lower, &act.upper);
    let (mut b_lo, mut b_hi) = w.split_matvec(&act.lower_offset, &act.upper_offset);
    for i in 0..bias.len() {
        b_lo[i] += bias[i];
        b_hi[i] += bias[i];
    }

    let (mut c_lo, mut c_hi) = w_d.split_matmul(&act.lower, &act.upper);
    let (ce_lo, ce_hi) = w_c.split_matmul(&err.lower, &err.upper);
    add_into(&mut c_lo, &ce_lo);
    add_into(&mut c_hi, &ce_hi);
    let (mut d_lo, mut d_hi) = w_d.split_matvec(&act.lower_offset, &act.upper_offset);
    let (de_lo, de_hi) = w_c.split_matvec(&err.lower_offset, &err.upper_offset);
    for i in 0..d_lo.len() {
        d_lo[i] += de_lo[i] + b_d[i];
        d_hi[i] += de_hi[i] + b_d[i];
    }

    Ok(SymbolicState {
        layer: k,
        stage: Stage::PreActivation,
        activation: LinearBounds {
            lower: a_lo,
            lower_offset: b_lo,
            upper: a_hi,
            upper_offset: b_hi,
        },
        error: LinearBounds {
            lower: c_lo,
            lower_offset: d_lo,
            upper: c_hi,
            upper_offset: d_hi,
        },
        pre_interval: None,
        error_interval: None,
    })
}

/// Fills `[l_k, u_k]` and the error interval `[d̲_k, d̄_k]` over `region`.
pub fn concretize<S: Scalar>(state: &SymbolicState<S>, region: &InputRegion<S>) -> Result<SymbolicState<S>> {
    let dim = state.activation.lower.cols();
    if region.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: region.dim(),
        });
    }
    let mut out = state.clone();
    out.pre_interval = Some(state.activation.concretize(region));
    out.error_interval = Some(state.error.concretize(region));
    Ok(out)
}

/// Composes `lower ≤ v ≤ upper` (row `i` of `src`) with a relaxation
/// `φ(v) ∈ [s_l·v + t_l, s_u·v + t_u]`, `s_l, s_u ≥ 0`, writing row `i` of `dst`.
fn compose_row<S: Scalar>(dst: &mut LinearBounds<S>, src: &LinearBounds<S>, i: usize, r: &LinearRelaxation<S>) {
    for (d, s) in dst.lower.row_mut(i).iter_mut().zip(src.lower.row(i)) {
        *d = r.lower_slope * *s;
    }
    dst.lower_offset[i] = r.lower_slope * src.lower_offset[i] + r.lower_intercept;
    for (d, s) in dst.upper.row_mut(i).iter_mut().zip(src.upper.row(i)) {
        *d = r.upper_slope * *s;
    }
    dst.upper_offset[i] = r.upper_slope * src.upper_offset[i] + r.upper_intercept;
}

/// Tunables of the propagation pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub lower_slope: LowerSlope,
}

/// ReLU step at hidden layer `k`, producing bounds on `x̂_k` and `δ̂_k`.
///
/// For a pruned neuron the compressed activation is zero, so
/// `δ̂_{k,i} = ReLU(x_{k,i})` and its error row reuses the activation relaxation.
pub fn propagate_relu<S: Scalar>(state: &SymbolicState<S>, pair: &AlignedPair<S>, k: usize) -> Result<SymbolicState<S>> {
    propagate_relu_with(state, pair, k, PropagationConfig::default())
}

pub fn propagate_relu_with<S: Scalar>(
    state: &SymbolicState<S>,
    pair: &AlignedPair<S>,
    k: usize,
    config: PropagationConfig,
) -> Result<SymbolicState<S>> {
    if state.layer != k || state.stage != Stage::PreActivation || k == 0 || k >= pair.num_layers() {
        return Err(Error::Shape(format!(
            "ReLU step for layer {k} does not apply to state at layer {} ({:?})",
            state.layer, state.stage
        )));
    }
    let (Some(pre), Some(err)) = (&state.pre_interval, &state.error_interval) else {
        return Err(Error::Shape(format!("layer {k} must be concretized before its ReLU step")));
    };
    let mut activation = state.activation.clone();
    let mut error = state.error.clone();
    for i in 0..state.activation.len() {
        let act_relax = relax_activation_with(pre[i].0, pre[i].1, config.lower_slope)?;
        if !act_relax.slopes_in_unit_interval() {
            return Err(Error::Relaxation(format!(
                "activation slope outside [0, 1] at layer {k}, neuron {i}: {act_relax:?}"
            )));
        }
        compose_row(&mut activation, &state.activation, i, &act_relax);
        if pair.prune_spec().is_pruned(k, i) {
            compose_row(&mut error, &state.activation, i, &act_relax);
        } else {
            let err_relax = relax_error(pre[i], err[i])?;
            if !err_relax.slopes_in_unit_interval() {
                return Err(Error::Relaxation(format!(
                    "error slope outside [0, 1] at layer {k}, neuron {i}: {err_relax:?}"
                )));
            }
            compose_row(&mut error, &state.error, i, &err_relax);
        }
    }
    Ok(SymbolicState {
        layer: k,
        stage: Stage::PostActivation,
        activation,
        error,
        pre_interval: state.pre_interval.clone(),
        error_interval: state.error_interval.clone(),
    })
}

/// Output-layer bounds `C^L x + d^L ≤ f(x) − f′(x) ≤ C^U x + d^U` for every output.
#[derive(Debug, Clone)]
pub struct ErrorEnvelope<S> {
    pub bounds: LinearBounds<S>,
    /// Concrete `[δ_lo, δ_hi]` per output over the region.
    pub interval: Vec<(S, S)>,
}

impl<S: Scalar> ErrorEnvelope<S> {
    pub fn num_outputs(&self) -> usize {
        self.bounds.len()
    }

    pub fn output(&self, i: usize) -> Result<OutputEnvelope<S>> {
        if i >= self.num_outputs() {
            return Err(Error::Dimension {
                expected: self.num_outputs(),
                got: i,
            });
        }
        Ok(OutputEnvelope {
            lower: self.bounds.lower_fn(i),
            upper: self.bounds.upper_fn(i),
        })
    }
}

/// Linear error bounds `δ^L(x) ≤ δ(x) ≤ δ^U(x)` for one output coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct OutputEnvelope<S> {
    pub lower: AffineFn<S>,
    pub upper: AffineFn<S>,
}

impl<S: Scalar> OutputEnvelope<S> {
    /// `[min δ^L, max δ^U]` over the region.
    pub fn interval(&self, region: &InputRegion<S>) -> (S, S) {
        (self.lower.min_over(region), self.upper.max_over(region))
    }
}

/// Full pass: init → (concretize → ReLU → linear)* → concretize.
pub fn compute_envelope<S: Scalar>(pair: &AlignedPair<S>, region: &InputRegion<S>) -> Result<ErrorEnvelope<S>> {
    compute_envelope_with(pair, region, PropagationConfig::default())
}

pub fn compute_envelope_with<S: Scalar>(
    pair: &AlignedPair<S>,
    region: &InputRegion<S>,
    config: PropagationConfig,
) -> Result<ErrorEnvelope<S>> {
    if region.dim() != pair.input_dim() {
        return Err(Error::Dimension {
            expected: pair.input_dim(),
            got: region.dim(),
        });
    }
    let layers = pair.num_layers();
    let mut state = concretize(&init_state(pair), region)?;
    for k in 1..layers {
        let post = propagate_relu_with(&state, pair, k, config)?;
        state = concretize(&propagate_linear(&post, pair, k + 1)?, region)?;
    }
    let interval = state.error.concretize(region);
    Ok(ErrorEnvelope {
        bounds: state.error,
        interval,
    })
}

/// Envelope row for a single output coordinate.
pub fn output_envelope<S: Scalar>(
    pair: &AlignedPair<S>,
    region: &InputRegion<S>,
    output_index: usize,
) -> Result<OutputEnvelope<S>> {
    compute_envelope(pair, region)?.output(output_index)
}
