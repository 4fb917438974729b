use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use deltacert::{Method, OutputSelection};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "deltacert", version, about = "Probabilistic similarity certification for compressed ReLU networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for certification and sampling (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Seed for randomized steps; echoed in every report.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Report path. Reports go to stdout when omitted; for quantize, prune and
    /// align this is the path of the produced network.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Check that a network file (and optionally a compressed pair) loads and aligns.
    Validate(ValidateArgs),
    /// Uniform symmetric per-layer weight quantization.
    Quantize(QuantizeArgs),
    /// Magnitude pruning of hidden neurons.
    Prune(PruneArgs),
    /// Zero-pad a physically pruned network back to the original widths.
    Align(AlignArgs),
    /// Bound the probability that the outputs differ by at most eps over a region.
    CertifyProb(CertifyProbArgs),
    /// Largest input ball on which the similarity probability stays above gamma.
    CertifyRadius(CertifyRadiusArgs),
    /// Largest input ball on which the outputs always differ by at most eps.
    WorstCaseRadius(WorstCaseArgs),
    /// Run Hoeffding and Bernstein side by side on a region or a radius query.
    Compare(CompareArgs),
    /// Monte Carlo estimate of the similarity probability.
    Sample(SampleArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Quantize(_) => "quantize",
            Command::Prune(_) => "prune",
            Command::Align(_) => "align",
            Command::CertifyProb(_) => "certify-prob",
            Command::CertifyRadius(_) => "certify-radius",
            Command::WorstCaseRadius(_) => "worst-case-radius",
            Command::Compare(_) => "compare",
            Command::Sample(_) => "sample",
        }
    }
}

/// Where error envelopes come from: a network pair or a fixed envelope file.
#[derive(Debug, Args, Serialize)]
pub struct SourceArgs {
    #[arg(long, required_unless_present = "envelope")]
    pub original: Option<PathBuf>,

    #[arg(long, required_unless_present = "envelope")]
    pub compressed: Option<PathBuf>,

    /// Pruned neurons of the compressed network, {"pruned": {"1": [2, 5]}}.
    #[arg(long)]
    pub prune_spec: Option<PathBuf>,

    /// Fixed affine envelope file, {"outputs": [{"lower": .., "upper": ..}]}.
    #[arg(long, conflicts_with_all = ["original", "compressed", "prune_spec"])]
    pub envelope: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PairArgs {
    #[arg(long)]
    pub original: PathBuf,

    #[arg(long)]
    pub compressed: PathBuf,

    #[arg(long)]
    pub prune_spec: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long, alias = "model")]
    pub original: PathBuf,

    #[arg(long)]
    pub compressed: Option<PathBuf>,

    #[arg(long, requires = "compressed")]
    pub prune_spec: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct QuantizeArgs {
    #[arg(long)]
    pub original: PathBuf,

    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=32))]
    pub bits: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct PruneArgs {
    #[arg(long)]
    pub original: PathBuf,

    /// Fraction of each hidden layer to prune, in [0, 1).
    #[arg(long)]
    pub ratio: f64,

    /// Where to write the prune spec.
    #[arg(long)]
    pub prune_spec: PathBuf,

    /// Drop pruned neurons instead of zeroing them.
    #[arg(long)]
    pub remove: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct AlignArgs {
    #[command(flatten)]
    pub pair: PairArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    /// Output coordinate to certify, or "all" for the weakest coordinate.
    #[arg(long, default_value = "0")]
    pub output_index: OutputSelection,

    #[arg(long, default_value_t = 1)]
    pub max_partitions: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyProbArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Region file, {"lower": [..], "upper": [..]}.
    #[arg(long)]
    pub region: PathBuf,

    #[arg(long)]
    pub eps: f64,

    #[arg(long, default_value = "bernstein")]
    pub method: Method,

    /// Certified when the lower probability bound reaches this level.
    #[arg(long)]
    pub gamma: Option<f64>,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct RadiusArgs {
    /// Center file, {"center": [..], "clip_lower": [..], "clip_upper": [..]}.
    #[arg(long)]
    pub center: PathBuf,

    #[arg(long)]
    pub eps: f64,

    #[arg(long, default_value_t = 1.0)]
    pub r_max: f64,

    #[arg(long, default_value_t = 1e-4)]
    pub radius_tol: f64,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyRadiusArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    #[command(flatten)]
    pub radius: RadiusArgs,

    #[arg(long)]
    pub gamma: f64,

    #[arg(long, default_value = "bernstein")]
    pub method: Method,
}

#[derive(Debug, Args, Serialize)]
pub struct WorstCaseArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    #[command(flatten)]
    pub radius: RadiusArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Compare probability bounds over this region.
    #[arg(long, required_unless_present = "center", conflicts_with = "center")]
    pub region: Option<PathBuf>,

    /// Compare certified radii around this center.
    #[arg(long, requires = "gamma")]
    pub center: Option<PathBuf>,

    #[arg(long)]
    pub eps: f64,

    #[arg(long)]
    pub gamma: Option<f64>,

    #[arg(long, default_value_t = 1.0)]
    pub r_max: f64,

    #[arg(long, default_value_t = 1e-4)]
    pub radius_tol: f64,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub pair: PairArgs,

    #[arg(long)]
    pub region: PathBuf,

    #[arg(long)]
    pub eps: f64,

    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,

    /// Two-sided Clopper-Pearson confidence level.
    #[arg(long, default_value_t = 0.999)]
    pub confidence: f64,

    #[arg(long, default_value_t = 0)]
    pub output_index: usize,
}
