//! Seeded synthetic networks and regions for tests, benches and demos.

use rand::Rng;

use crate::linalg::Matrix;
use crate::network::{Activation, InputRegion, Layer, Network};
use crate::scalar::Scalar;

/// Random dense network with the given widths `[d_in, n_1, …, n_L]`.
///
/// Weights are uniform with variance `scale² / fan_in`, biases uniform in
/// `±0.1·scale`.
pub fn random_network<S: Scalar, R: Rng + ?Sized>(rng: &mut R, widths: &[usize], scale: f64) -> Network<S> {
    assert!(widths.len() >= 2, "need at least input and output widths");
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let half = scale * (3.0 / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| S::lit(rng.gen_range(-half..=half)))
                .collect();
            let bias = (0..fan_out)
                .map(|_| S::lit(rng.gen_range(-0.1..=0.1) * scale))
                .collect();
            let activation = if k == last {
                Activation::Identity
            } else {
                Activation::Relu
            };
            Layer::new(
                Matrix::from_vec(fan_out, fan_in, data).expect("shape"),
                bias,
                activation,
            )
            .expect("bias matches rows")
        })
        .collect();
    Network::new(widths[0], layers).expect("consistent widths")
}

/// Random box with center in `[-1, 1]^d` and half-widths in `[min_half, max_half]`.
pub fn random_region<S: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    min_half: f64,
    max_half: f64,
) -> InputRegion<S> {
    let (mut lower, mut upper) = (Vec::with_capacity(dim), Vec::with_capacity(dim));
    for _ in 0..dim {
        let c = rng.gen_range(-1.0..=1.0);
        let h = rng.gen_range(min_half..=max_half);
        lower.push(S::lit(c - h));
        upper.push(S::lit(c + h));
    }
    InputRegion::new(lower, upper).expect("ordered bounds")
}
