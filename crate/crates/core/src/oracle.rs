//! Independent checks: Monte Carlo estimates with exact binomial confidence
//! intervals, and dense-grid envelope verification.
//!
//! Sampling uses ChaCha8 streams. Samples are drawn in fixed chunks of
//! [`CHUNK`] points; chunk `i` uses stream `i` of the generator seeded with
//! the user seed, so results do not depend on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use crate::compression::AlignedPair;
use crate::error::{Error, Result};
use crate::network::InputRegion;
use crate::propagation::ErrorEnvelope;
use crate::scalar::Scalar;

pub const CHUNK: usize = 4096;

/// Two-sided level used by the soundness checks.
pub const DEFAULT_CONFIDENCE: f64 = 0.999;

/// Largest input dimension [`grid_envelope_check`] accepts.
pub const GRID_MAX_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEstimate {
    pub p_hat: f64,
    pub successes: u64,
    pub n_samples: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub seed: u64,
    pub sampler: String,
}

/// Exact (Clopper–Pearson) two-sided interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    assert!(k <= n && n > 0, "need 0 <= k <= n, n > 0");
    let alpha = 1.0 - confidence;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 { 0.0 } else { inv_beta_reg(kf, nf - kf + 1.0, alpha / 2.0) };
    let hi = if k == n { 1.0 } else { inv_beta_reg(kf + 1.0, nf - kf, 1.0 - alpha / 2.0) };
    (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_len(n: usize, chunk: usize) -> usize {
    CHUNK.min(n - chunk * CHUNK)
}

/// `n` reproducible uniform samples from the region.
pub fn sample_points<S: Scalar>(region: &InputRegion<S>, n: usize, seed: u64) -> Vec<Vec<S>> {
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = chunk_rng(seed, c);
            (0..chunk_len(n, c)).map(move |_| region.sample(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Estimates `P(event(X))` for `X` uniform on the region.
pub fn mc_estimate<S: Scalar>(
    region: &InputRegion<S>,
    n: usize,
    seed: u64,
    confidence: f64,
    event: impl Fn(&[S]) -> Result<bool> + Sync,
) -> Result<EmpiricalEstimate> {
    if n == 0 {
        return Err(Error::Query("sample count must be at least 1".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Query(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let successes = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut hits = 0u64;
            for _ in 0..chunk_len(n, c) {
                hits += u64::from(event(&region.sample(&mut rng))?);
            }
            Ok::<_, Error>(hits)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let (ci_low, ci_high) = clopper_pearson(successes, n as u64, confidence);
    Ok(EmpiricalEstimate {
        p_hat: successes as f64 / n as f64,
        successes,
        n_samples: n as u64,
        ci_low,
        ci_high,
        confidence,
        seed,
        sampler: "ChaCha8".into(),
    })
}

/// Estimates `P(|f(x) − f′(x)| ≤ eps)` for one output coordinate.
pub fn mc_probability<S: Scalar>(
    pair: &AlignedPair<S>,
    region: &InputRegion<S>,
    eps: S,
    output_index: usize,
    n: usize,
    seed: u64,
) -> Result<EmpiricalEstimate> {
    if region.dim() != pair.input_dim() {
        return Err(Error::Dimension {
            expected: pair.input_dim(),
            got: region.dim(),
        });
    }
    if output_index >= pair.output_dim() {
        return Err(Error::Query(format!(
            "output index {output_index} out of range for {} outputs",
            pair.output_dim()
        )));
    }
    mc_estimate(region, n, seed, DEFAULT_CONFIDENCE, |x| {
        Ok(pair.difference(x)?[output_index].abs() <= eps)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub passed: bool,
    /// Largest `max(δ^L(x) − δ(x), δ(x) − δ^U(x))` seen; negative means slack.
    pub max_violation: f64,
    pub points: usize,
}

/// Slack allowed for floating-point noise.
pub const GRID_SLACK: f64 = 1e-9;

/// Checks the envelope against the exact difference on a tensor grid.
pub fn grid_envelope_check<S: Scalar>(
    pair: &AlignedPair<S>,
    region: &InputRegion<S>,
    envelope: &ErrorEnvelope<S>,
    points_per_dim: usize,
) -> Result<GridCheck> {
    let dim = region.dim();
    if dim > GRID_MAX_DIM {
        return Err(Error::Dimension {
            expected: GRID_MAX_DIM,
            got: dim,
        });
    }
    if dim != pair.input_dim() {
        return Err(Error::Dimension {
            expected: pair.input_dim(),
            got: dim,
        });
    }
    if points_per_dim < 2 {
        return Err(Error::Query("grid needs at least 2 points per dimension".into()));
    }
    let total = points_per_dim.pow(dim as u32);
    let step = |i: usize, d: usize| {
        let t = S::from_usize_lossy(i) / S::from_usize_lossy(points_per_dim - 1);
        region.lower()[d] + (region.upper()[d] - region.lower()[d]) * t
    };
    let rows: Vec<_> = (0..envelope.num_outputs()).map(|o| envelope.output(o)).collect::<Result<_>>()?;
    let max_violation = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rest = flat;
            let x: Vec<S> = (0..dim)
                .map(|d| {
                    let i = rest % points_per_dim;
                    rest /= points_per_dim;
                    step(i, d)
                })
                .collect();
            let diff = pair.difference(&x)?;
            Ok::<_, Error>(rows
                .iter()
                .zip(&diff)
                .map(|(r, &d)| (r.lower.eval(&x) - d).max(d - r.upper.eval(&x)).as_f64())
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))?;
    Ok(GridCheck {
        passed: max_violation <= GRID_SLACK,
        max_violation,
        points: total,
    })
}
