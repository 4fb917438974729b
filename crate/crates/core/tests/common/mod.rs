//! Shared random instances for the integration suites.
#![allow(dead_code)]

use deltacert::{align, prune, quantize, synth, AlignedPair, InputRegion, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    Quant4,
    Quant8,
    Prune10,
    Prune25,
}

impl Compression {
    pub const ALL: [Compression; 4] = [Compression::Quant4, Compression::Quant8, Compression::Prune10, Compression::Prune25];

    pub fn apply(self, net: &Network<f64>) -> AlignedPair<f64> {
        match self {
            Compression::Quant4 => AlignedPair::new(net.clone(), quantize(net, 4).unwrap()).unwrap(),
            Compression::Quant8 => AlignedPair::new(net.clone(), quantize(net, 8).unwrap()).unwrap(),
            Compression::Prune10 | Compression::Prune25 => {
                let ratio = if self == Compression::Prune10 { 0.10 } else { 0.25 };
                let (p, spec) = prune(net, ratio).unwrap();
                align(net, &p, &spec).unwrap()
            }
        }
    }
}

pub struct Instance {
    pub id: usize,
    pub compression: Compression,
    pub pair: AlignedPair<f64>,
    pub region: InputRegion<f64>,
}

/// `count` pairs with 2 to 4 layers, at most 32 neurons per layer, cycling
/// through the four compression settings.
pub fn instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|id| {
            let layers = rng.gen_range(2..=4);
            let input_dim = rng.gen_range(1..=4);
            let mut widths = vec![input_dim];
            for _ in 1..layers {
                widths.push(rng.gen_range(4..=32));
            }
            widths.push(rng.gen_range(1..=2));
            let net: Network<f64> = synth::random_network(&mut rng, &widths, 1.0);
            let region = synth::random_region(&mut rng, input_dim, 0.02, 0.5);
            let compression = Compression::ALL[id % 4];
            Instance {
                id,
                compression,
                pair: compression.apply(&net),
                region,
            }
        })
        .collect()
}
