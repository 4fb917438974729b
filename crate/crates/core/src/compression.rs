//! Compressed variants (quantization, magnitude pruning) and zero-padding
//! alignment of an original/compressed pair.
//!
//! Pruned neurons stay in place inside the engine: their incoming row and
//! bias are zeroed in the executable pruned network, and the aligned pair
//! restores the original parameters at those positions while flagging the
//! activation as forced-zero. The deviation `W − W′` is therefore zero on
//! every row and column that touches a pruned neuron.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{Layer, Network};
use crate::scalar::Scalar;

/// Pruned neuron indices per hidden layer. Layer keys are 1-based
/// (`1..L−1`), neuron indices 0-based.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneSpec {
    pub pruned: BTreeMap<usize, BTreeSet<usize>>,
}

impl PruneSpec {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_layers(layers: impl IntoIterator<Item = (usize, Vec<usize>)>) -> Self {
        let pruned = layers
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect();
        Self { pruned }
    }

    pub fn is_empty(&self) -> bool {
        self.pruned.values().all(BTreeSet::is_empty)
    }

    pub fn layer(&self, k: usize) -> Option<&BTreeSet<usize>> {
        self.pruned.get(&k).filter(|s| !s.is_empty())
    }

    #[inline]
    pub fn is_pruned(&self, k: usize, i: usize) -> bool {
        self.pruned.get(&k).is_some_and(|s| s.contains(&i))
    }

    pub fn count(&self, k: usize) -> usize {
        self.pruned.get(&k).map_or(0, BTreeSet::len)
    }

    pub fn total(&self) -> usize {
        self.pruned.values().map(BTreeSet::len).sum()
    }

    /// Checks indices against `widths = [d_in, n_1, …, n_L]`.
    pub fn validate(&self, widths: &[usize]) -> Result<()> {
        let num_layers = widths.len() - 1;
        for (&k, set) in &self.pruned {
            if set.is_empty() {
                continue;
            }
            if k == 0 || k >= num_layers {
                return Err(Error::Alignment(format!(
                    "layer {k} cannot be pruned (hidden layers are 1..={})",
                    num_layers.saturating_sub(1)
                )));
            }
            if let Some(&i) = set.iter().find(|&&i| i >= widths[k]) {
                return Err(Error::Alignment(format!(
                    "neuron {i} out of range for layer {k} of width {}",
                    widths[k]
                )));
            }
            if set.len() == widths[k] {
                return Err(Error::Alignment(format!("every neuron of layer {k} is pruned")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("prune spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Step size `max|w| / (2^{bits−1} − 1)` of symmetric per-tensor quantization.
pub fn quantization_step<S: Scalar>(weight: &Matrix<S>, bits: u32) -> S {
    let levels = S::lit(((1u64 << (bits - 1)) - 1) as f64);
    weight.max_abs() / levels
}

/// Symmetric per-tensor quantize-dequantize of every weight matrix
/// (`w ↦ round(w/s)·s`, ties to even). Biases are left untouched.
pub fn quantize<S: Scalar>(net: &Network<S>, bits: u32) -> Result<Network<S>> {
    if !(2..=16).contains(&bits) {
        return Err(Error::Value(format!("bits must be in [2, 16], got {bits}")));
    }
    net.map_layers(|_, layer| {
        let step = quantization_step(&layer.weight, bits);
        let weight = if step == S::zero() {
            layer.weight.clone()
        } else {
            layer.weight.map(|w| (w / step).round_ties_even() * step)
        };
        Layer {
            weight,
            bias: layer.bias.clone(),
            activation: layer.activation,
        }
    })
}

/// Magnitude pruning: in each hidden layer, the `⌊ratio·n_k⌋` neurons with the
/// smallest ℓ1 incoming-row norm (ties to the lowest index) get their row and
/// bias zeroed.
pub fn prune<S: Scalar>(net: &Network<S>, ratio: f64) -> Result<(Network<S>, PruneSpec)> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Value(format!("prune ratio must be in [0, 1), got {ratio}")));
    }
    let hidden = net.num_layers() - 1;
    let mut spec = PruneSpec::empty();
    for (idx, layer) in net.layers()[..hidden].iter().enumerate() {
        let n = layer.out_dim();
        // Guards products such as 0.57 * 100 = 56.999… from flooring one short.
        let count = ((ratio * n as f64 + 1e-9).floor() as usize).min(n - 1);
        if count == 0 {
            continue;
        }
        let mut order: Vec<(S, usize)> = (0..n)
            .map(|i| (layer.weight.row(i).iter().map(|w| w.abs()).sum::<S>(), i))
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));
        spec.pruned
            .insert(idx + 1, order[..count].iter().map(|&(_, i)| i).collect());
    }
    let pruned = net.map_layers(|k, layer| {
        let mut layer = layer.clone();
        if let Some(set) = spec.layer(k) {
            for &i in set {
                layer.weight.row_mut(i).fill(S::zero());
                layer.bias[i] = S::zero();
            }
        }
        layer
    })?;
    Ok((pruned, spec))
}

/// Physically removes pruned neurons: drops their rows (and biases) and the
/// matching columns of the next layer.
pub fn remove_pruned<S: Scalar>(net: &Network<S>, spec: &PruneSpec) -> Result<Network<S>> {
    spec.validate(&net.widths())?;
    let kept = |k: usize, n: usize| -> Vec<usize> { (0..n).filter(|&i| !spec.is_pruned(k, i)).collect() };
    let widths = net.widths();
    let layers = net
        .layers()
        .iter()
        .enumerate()
        .map(|(idx, layer)| {
            let k = idx + 1;
            let rows = kept(k, widths[k]);
            let cols = kept(k - 1, widths[k - 1]);
            let data: Vec<Vec<S>> = rows
                .iter()
                .map(|&i| cols.iter().map(|&j| layer.weight[(i, j)]).collect())
                .collect();
            let weight = Matrix::from_rows(&data).expect("rectangular");
            Layer::new(weight, rows.iter().map(|&i| layer.bias[i]).collect(), layer.activation)
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(net.input_dim(), layers)
}

/// Structurally identical original/compressed pair with per-layer deviations.
#[derive(Debug, Clone)]
pub struct AlignedPair<S> {
    original: Network<S>,
    compressed: Network<S>,
    prune_spec: PruneSpec,
    weight_delta: Vec<Matrix<S>>,
    bias_delta: Vec<Vec<S>>,
}

impl<S: Scalar> AlignedPair<S> {
    /// Pair of same-shape networks with no pruning (e.g. a quantized variant).
    pub fn new(original: Network<S>, compressed: Network<S>) -> Result<Self> {
        align(&original, &compressed, &PruneSpec::empty())
    }

    pub fn original(&self) -> &Network<S> {
        &self.original
    }

    /// Aligned compressed network; pruned activations must be forced to zero
    /// when executing it (see [`AlignedPair::forward_compressed`]).
    pub fn compressed(&self) -> &Network<S> {
        &self.compressed
    }

    pub fn prune_spec(&self) -> &PruneSpec {
        &self.prune_spec
    }

    /// `W^Δ_k = W_k − W′_k` for 1-based `k`.
    pub fn weight_delta(&self, k: usize) -> &Matrix<S> {
        &self.weight_delta[k - 1]
    }

    /// `b^Δ_k = b_k − b′_k` for 1-based `k`.
    pub fn bias_delta(&self, k: usize) -> &[S] {
        &self.bias_delta[k - 1]
    }

    pub fn input_dim(&self) -> usize {
        self.original.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.original.output_dim()
    }

    pub fn num_layers(&self) -> usize {
        self.original.num_layers()
    }

    pub fn forward_original(&self, x: &[S]) -> Result<Vec<S>> {
        self.original.forward(x)
    }

    pub fn forward_compressed(&self, x: &[S]) -> Result<Vec<S>> {
        self.compressed
            .forward_masked(x, |k, i| self.prune_spec.is_pruned(k, i))
    }

    /// `f(x) − f′(x)` per output.
    pub fn difference(&self, x: &[S]) -> Result<Vec<S>> {
        let a = self.forward_original(x)?;
        let b = self.forward_compressed(x)?;
        Ok(a.iter().zip(&b).map(|(&u, &v)| u - v).collect())
    }

    /// Whether the stored deltas match the stored weights and every
    /// deviation touching a pruned neuron is zero.
    pub fn check_invariants(&self) -> bool {
        let widths = self.original.widths();
        if self.compressed.widths() != widths {
            return false;
        }
        for (idx, (lo, lc)) in self
            .original
            .layers()
            .iter()
            .zip(self.compressed.layers())
            .enumerate()
        {
            let k = idx + 1;
            let wd = lo.weight.zip_map(&lc.weight, |a, b| a - b);
            if wd != self.weight_delta[idx] {
                return false;
            }
            let bd: Vec<S> = lo.bias.iter().zip(&lc.bias).map(|(&a, &b)| a - b).collect();
            if bd != self.bias_delta[idx] {
                return false;
            }
            if let Some(set) = self.prune_spec.layer(k) {
                if set
                    .iter()
                    .any(|&i| wd.row(i).iter().any(|v| *v != S::zero()) || bd[i] != S::zero())
                {
                    return false;
                }
            }
            if let Some(set) = self.prune_spec.layer(k - 1) {
                if set
                    .iter()
                    .any(|&j| (0..wd.rows()).any(|i| wd[(i, j)] != S::zero()))
                {
                    return false;
                }
            }
        }
        true
    }
}

/// Zero-padding alignment of `f` and its pruned (and possibly otherwise
/// compressed) variant.
///
/// `f_pruned` may keep the original widths with zeroed rows for pruned
/// neurons, or have them physically removed. In both cases the aligned
/// compressed network carries `f`'s parameters at pruned positions and the
/// pruned activations are forced to zero during execution.
pub fn align<S: Scalar>(f: &Network<S>, f_pruned: &Network<S>, spec: &PruneSpec) -> Result<AlignedPair<S>> {
    let widths = f.widths();
    spec.validate(&widths)?;
    let other = f_pruned.widths();
    if other.len() != widths.len() {
        return Err(Error::Alignment(format!(
            "layer count differs: {} vs {}",
            widths.len() - 1,
            other.len() - 1
        )));
    }
    if other[0] != widths[0] || other[widths.len() - 1] != widths[widths.len() - 1] {
        return Err(Error::Alignment("input/output dimensions differ".into()));
    }
    let removed_widths: Vec<usize> = widths
        .iter()
        .enumerate()
        .map(|(k, &n)| n - spec.count(k))
        .collect();
    let physically_removed = if other == widths {
        false
    } else if other == removed_widths {
        true
    } else {
        return Err(Error::Alignment(format!(
            "compressed widths {other:?} match neither {widths:?} nor the pruned widths {removed_widths:?}"
        )));
    };

    // Position of each kept neuron inside the compressed network.
    let position = |k: usize, i: usize| -> Option<usize> {
        if spec.is_pruned(k, i) {
            None
        } else if physically_removed {
            Some(i - spec.pruned.get(&k).map_or(0, |s| s.range(..i).count()))
        } else {
            Some(i)
        }
    };

    let mut layers = Vec::with_capacity(f.num_layers());
    for (idx, (lf, lp)) in f.layers().iter().zip(f_pruned.layers()).enumerate() {
        let k = idx + 1;
        let mut weight = Matrix::zeros(widths[k], widths[k - 1]);
        let mut bias = vec![S::zero(); widths[k]];
        for i in 0..widths[k] {
            match position(k, i) {
                None => {
                    if !physically_removed
                        && (lp.weight.row(i).iter().any(|v| *v != S::zero()) || lp.bias[i] != S::zero())
                    {
                        return Err(Error::Alignment(format!(
                            "neuron {i} of layer {k} is listed as pruned but its incoming row is not zero"
                        )));
                    }
                    weight.row_mut(i).copy_from_slice(lf.weight.row(i));
                    bias[i] = lf.bias[i];
                }
                Some(pi) => {
                    for j in 0..widths[k - 1] {
                        weight[(i, j)] = match position(k - 1, j) {
                            None => lf.weight[(i, j)],
                            Some(pj) => lp.weight[(pi, pj)],
                        };
                    }
                    bias[i] = lp.bias[pi];
                }
            }
        }
        layers.push(Layer::new(weight, bias, lf.activation)?);
    }
    let compressed = Network::new(f.input_dim(), layers)?;
    let weight_delta = f
        .layers()
        .iter()
        .zip(compressed.layers())
        .map(|(a, b)| a.weight.zip_map(&b.weight, |x, y| x - y))
        .collect();
    let bias_delta = f
        .layers()
        .iter()
        .zip(compressed.layers())
        .map(|(a, b)| a.bias.iter().zip(&b.bias).map(|(&x, &y)| x - y).collect())
        .collect();
    Ok(AlignedPair {
        original: f.clone(),
        compressed,
        prune_spec: spec.clone(),
        weight_delta,
        bias_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Activation;
    use crate::synth;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(weights: &[f64]) -> Network<f64> {
        Network::new(
            weights.len(),
            vec![Layer::new(Matrix::from_rows(&[weights.to_vec()]).unwrap(), vec![0.25], Activation::Identity).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn two_bit_quantization_rounds_ties_to_even() {
        let q = quantize(&single(&[-1.0, 0.5, 1.0]), 2).unwrap();
        // s = 1; 0.5 / 1 is a tie and rounds to the even integer 0.
        assert_eq!(q.layers()[0].weight.row(0), &[-1.0, 0.0, 1.0]);
        assert_eq!(q.layers()[0].bias, vec![0.25]);
    }

    #[test]
    fn sixteen_bit_step_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net: Network<f64> = synth::random_network(&mut rng, &[3, 8, 5, 1], 1.0);
        let q = quantize(&net, 16).unwrap();
        for (a, b) in net.layers().iter().zip(q.layers()) {
            let bound = a.weight.max_abs() / (2f64.powi(15) - 1.0);
            for (x, y) in a.weight.iter().zip(b.weight.iter()) {
                assert!((x - y).abs() <= bound);
            }
        }
    }

    #[test]
    fn zero_matrix_quantizes_to_itself() {
        let net = single(&[0.0, 0.0]);
        assert_eq!(quantize(&net, 4).unwrap(), net);
    }

    #[test]
    fn bits_out_of_range_rejected() {
        assert!(quantize(&single(&[1.0]), 1).is_err());
        assert!(quantize(&single(&[1.0]), 17).is_err());
    }

    #[test]
    fn ratio_zero_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net: Network<f64> = synth::random_network(&mut rng, &[2, 6, 4, 1], 1.0);
        let (p, spec) = prune(&net, 0.0).unwrap();
        assert_eq!(p, net);
        assert!(spec.is_empty());
    }

    #[test]
    fn quarter_of_four_prunes_one_smallest() {
        let w1 = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.1, -0.1], vec![-2.0, 0.0], vec![0.1, 0.1]]).unwrap();
        let net = Network::new(
            2,
            vec![
                Layer::new(w1, vec![0.5; 4], Activation::Relu).unwrap(),
                Layer::new(Matrix::from_rows(&[vec![1.0; 4]]).unwrap(), vec![0.0], Activation::Identity).unwrap(),
            ],
        )
        .unwrap();
        let (p, spec) = prune(&net, 0.25).unwrap();
        // Rows 1 and 3 tie on ℓ1 norm 0.2; the lower index wins.
        assert_eq!(spec, PruneSpec::from_layers([(1, vec![1])]));
        assert_eq!(p.layers()[0].weight.row(1), &[0.0, 0.0]);
        assert_eq!(p.layers()[0].bias[1], 0.0);
        // The pruned path no longer depends on the input.
        let base = p.forward(&[0.0, 0.0]).unwrap()[0];
        let moved: f64 = p.forward(&[0.0, 5.0]).unwrap()[0];
        assert!((moved - base - 5.5).abs() < 1e-12);
    }

    #[test]
    fn self_pair_has_zero_deltas() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net: Network<f64> = synth::random_network(&mut rng, &[3, 5, 2], 1.0);
        let pair = AlignedPair::new(net.clone(), net).unwrap();
        for k in 1..=pair.num_layers() {
            assert!(pair.weight_delta(k).is_zero());
            assert!(pair.bias_delta(k).iter().all(|v| *v == 0.0));
        }
        assert!(pair.check_invariants());
    }

    #[test]
    fn quantized_pair_has_nonzero_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net: Network<f64> = synth::random_network(&mut rng, &[3, 5, 2], 1.0);
        let pair = AlignedPair::new(net.clone(), quantize(&net, 4).unwrap()).unwrap();
        assert!(!pair.weight_delta(1).is_zero());
        assert!(pair.check_invariants());
    }

    #[test]
    fn aligned_2_3_1_matches_pruned_execution() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let net: Network<f64> = synth::random_network(&mut rng, &[2, 3, 1], 1.0);
        let spec = PruneSpec::from_layers([(1, vec![2])]);
        let mut zeroed = net.clone();
        zeroed = zeroed
            .map_layers(|k, l| {
                let mut l = l.clone();
                if k == 1 {
                    l.weight.row_mut(2).fill(0.0);
                    l.bias[2] = 0.0;
                }
                l
            })
            .unwrap();
        let removed = remove_pruned(&zeroed, &spec).unwrap();
        assert_eq!(removed.widths(), vec![2, 2, 1]);
        let from_zeroed = align(&net, &zeroed, &spec).unwrap();
        let from_removed = align(&net, &removed, &spec).unwrap();
        assert!(from_zeroed.check_invariants() && from_removed.check_invariants());
        let region = crate::network::InputRegion::new(vec![-2.0; 2], vec![2.0; 2]).unwrap();
        for _ in 0..100 {
            let x = region.sample(&mut rng);
            let want = zeroed.forward(&x).unwrap();
            assert_eq!(from_zeroed.forward_compressed(&x).unwrap(), want);
            assert_eq!(from_removed.forward_compressed(&x).unwrap(), want);
            assert_eq!(removed.forward(&x).unwrap(), want);
        }
        // Pure pruning leaves no deviation at all.
        for k in 1..=2 {
            assert!(from_zeroed.weight_delta(k).is_zero());
        }
    }

    #[test]
    fn inconsistent_specs_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net: Network<f64> = synth::random_network(&mut rng, &[2, 3, 1], 1.0);
        // Output layer and out-of-range neurons.
        assert!(matches!(
            align(&net, &net, &PruneSpec::from_layers([(2, vec![0])])),
            Err(Error::Alignment(_))
        ));
        assert!(matches!(
            align(&net, &net, &PruneSpec::from_layers([(1, vec![7])])),
            Err(Error::Alignment(_))
        ));
        // Listed as pruned but still wired.
        assert!(matches!(
            align(&net, &net, &PruneSpec::from_layers([(1, vec![0])])),
            Err(Error::Alignment(_))
        ));
        // Width mismatch that no spec explains.
        let other = synth::random_network(&mut rng, &[2, 2, 1], 1.0);
        assert!(matches!(align(&net, &other, &PruneSpec::empty()), Err(Error::Alignment(_))));
    }

    #[test]
    fn prune_spec_json_shape() {
        let spec = PruneSpec::from_layers([(1, vec![2, 5])]);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"pruned":{"1":[2,5]}}"#);
        assert_eq!(PruneSpec::from_json(&text).unwrap(), spec);
    }
}
