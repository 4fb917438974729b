//! Probabilistic similarity certification for a ReLU network and its
//! quantized or pruned variant.
//!
//! The core is generic over the scalar type; `f64` aliases are the
//! default working precision and `f32` aliases are provided for smaller
//! models.

pub mod bounds;
pub mod certification;
pub mod compression;
pub mod error;
pub mod linalg;
pub mod network;
pub mod oracle;
pub mod propagation;
pub mod relaxation;
pub mod scalar;
pub mod synth;

pub use bounds::{
    bernstein_bounds, cdf_bounds, combine, component_tightness, envelope_interval, hoeffding_bounds, moments,
    tightness_holds, CdfBounds, LinearMoments, Method, ProbabilityInterval,
};
pub use certification::{
    certified_radius, certify_probability, clipped_ball, compare_probability, compare_radius, worst_case_radius,
    ConfiguredPair, EnvelopeSource, FixedEnvelope, OutputInterval, OutputSelection, PartitionConfig, ProbabilityComparison,
    ProbabilityQuery, ProbabilityReport, RadiusComparison, RadiusKind, RadiusQuery, RadiusReport,
};
pub use compression::{align, prune, quantization_step, quantize, remove_pruned, AlignedPair, PruneSpec};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use network::{load_network, Activation, InputRegion, Layer, Network};
pub use oracle::{
    clopper_pearson, grid_envelope_check, mc_estimate, mc_probability, sample_points, EmpiricalEstimate, GridCheck,
};
pub use propagation::{
    compute_envelope, compute_envelope_with, concretize, init_state, output_envelope, propagate_linear, propagate_relu,
    propagate_relu_with, AffineFn, ErrorEnvelope, LinearBounds, OutputEnvelope, PropagationConfig, Stage, SymbolicState,
};
pub use relaxation::{
    relax_activation, relax_activation_with, relax_error, relax_neuron, LinearRelaxation, LowerSlope, NeuronRelaxation,
};
pub use scalar::Scalar;

pub type NetworkF64 = Network<f64>;
pub type NetworkF32 = Network<f32>;
pub type AlignedPairF64 = AlignedPair<f64>;
pub type AlignedPairF32 = AlignedPair<f32>;
pub type InputRegionF64 = InputRegion<f64>;
pub type InputRegionF32 = InputRegion<f32>;
pub type OutputEnvelopeF64 = OutputEnvelope<f64>;
pub type OutputEnvelopeF32 = OutputEnvelope<f32>;
pub type ProbabilityQueryF64 = ProbabilityQuery<f64>;
pub type RadiusQueryF64 = RadiusQuery<f64>;
pub type FixedEnvelopeF64 = FixedEnvelope<f64>;
