//! File formats read and written by the CLI.

use std::path::Path;

use deltacert::{
    align, load_network, AlignedPair, EnvelopeSource, FixedEnvelope, InputRegion, Network, PruneSpec,
};
use serde::{Deserialize, Serialize};

use crate::args::{PairArgs, SourceArgs};
use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionFile {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CenterFile {
    center: Vec<f64>,
    #[serde(default)]
    clip_lower: Option<Vec<f64>>,
    #[serde(default)]
    clip_upper: Option<Vec<f64>>,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn in_file(path: &Path) -> impl Fn(deltacert::Error) -> CliError + '_ {
    move |e| CliError::from_core(e).context(&path.display().to_string())
}

pub fn network(path: &Path) -> Result<Network<f64>, CliError> {
    load_network(path).map_err(in_file(path))
}

pub fn prune_spec(path: &Path) -> Result<PruneSpec, CliError> {
    PruneSpec::from_json(&read_text(path)?).map_err(in_file(path))
}

pub fn region(path: &Path) -> Result<InputRegion<f64>, CliError> {
    let raw: RegionFile = parse_json(path)?;
    InputRegion::new(raw.lower, raw.upper).map_err(in_file(path))
}

/// Center point plus the optional clipping domain.
pub fn center(path: &Path) -> Result<(Vec<f64>, Option<InputRegion<f64>>), CliError> {
    let raw: CenterFile = parse_json(path)?;
    let domain = match (raw.clip_lower, raw.clip_upper) {
        (Some(lo), Some(hi)) => Some(InputRegion::new(lo, hi).map_err(in_file(path))?),
        (None, None) => None,
        _ => {
            return Err(CliError::Input(format!(
                "{}: clip_lower and clip_upper must be given together",
                path.display()
            )))
        }
    };
    Ok((raw.center, domain))
}

pub fn pair(args: &PairArgs) -> Result<AlignedPair<f64>, CliError> {
    let f = network(&args.original)?;
    let g = network(&args.compressed)?;
    let pair = match &args.prune_spec {
        Some(path) => align(&f, &g, &prune_spec(path)?),
        None => AlignedPair::new(f, g),
    };
    pair.map_err(CliError::from_core)
}

/// Either an aligned pair or a fixed envelope; both certify the same way.
pub enum Source {
    Pair(AlignedPair<f64>),
    Fixed(FixedEnvelope<f64>),
}

impl Source {
    pub fn load(args: &SourceArgs) -> Result<Self, CliError> {
        if let Some(path) = &args.envelope {
            let env = FixedEnvelope::from_json(&read_text(path)?).map_err(in_file(path))?;
            return Ok(Source::Fixed(env));
        }
        // clap guarantees both paths when no envelope is given.
        let pair_args = PairArgs {
            original: args.original.clone().expect("required by clap"),
            compressed: args.compressed.clone().expect("required by clap"),
            prune_spec: args.prune_spec.clone(),
        };
        Ok(Source::Pair(pair(&pair_args)?))
    }

    pub fn as_dyn(&self) -> &dyn EnvelopeSource<f64> {
        match self {
            Source::Pair(p) => p,
            Source::Fixed(f) => f,
        }
    }
}

/// Writes `value` as pretty JSON to `path`, or stdout when `path` is `None`.
pub fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn save_network(net: &Network<f64>, path: &Path) -> Result<(), CliError> {
    net.save(path)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

pub fn save_text(text: &str, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}
