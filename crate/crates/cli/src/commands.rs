use deltacert::{
    certified_radius, certify_probability, compare_probability, compare_radius, mc_estimate, prune, quantize,
    remove_pruned, worst_case_radius, AlignedPair, EnvelopeSource, Error, InputRegion, Method, Network,
    OutputSelection, PartitionConfig, ProbabilityQuery, RadiusQuery, RadiusReport,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{check, CliError};
use crate::io::{self, Source};
use crate::Ctx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Valid,
    Invalid,
    Certified,
    NotCertified,
    Infeasible,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok | Status::Valid | Status::Certified => 0,
            Status::Invalid | Status::NotCertified | Status::Infeasible => crate::error::EXIT_NOT_CERTIFIED,
        }
    }
}

pub struct Outcome {
    pub status: Status,
    pub result: Value,
}

fn outcome(status: Status, result: impl Serialize) -> Result<Outcome, CliError> {
    let result = serde_json::to_value(result).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(Outcome { status, result })
}

fn core(e: Error) -> CliError {
    CliError::from_core(e)
}

fn check_eps(eps: f64) -> Result<(), CliError> {
    check(eps.is_finite() && eps > 0.0, "eps", eps, "a positive number")
}

fn check_gamma(gamma: f64) -> Result<(), CliError> {
    check((0.0..=1.0).contains(&gamma), "gamma", gamma, "a probability in [0, 1]")
}

fn partitions(out: &OutputArgs) -> Result<PartitionConfig, CliError> {
    check(out.max_partitions >= 1, "max-partitions", out.max_partitions, "at least 1")?;
    Ok(PartitionConfig {
        max_partitions: out.max_partitions,
        ..PartitionConfig::default()
    })
}

fn check_output(source: &dyn EnvelopeSource<f64>, output: OutputSelection) -> Result<(), CliError> {
    if let OutputSelection::Index(i) = output {
        let n = source.num_outputs();
        check(i < n, "output-index", i, &format!("an index below {n} or 'all'"))?;
    }
    Ok(())
}

fn out_path<'a>(ctx: &'a Ctx, command: &str) -> Result<&'a std::path::Path, CliError> {
    ctx.out
        .as_deref()
        .ok_or_else(|| CliError::Input(format!("'--out' is required for {command}")))
}

fn summary(net: &Network<f64>) -> Value {
    let parameters: usize = net.layers().iter().map(|l| l.in_dim() * l.out_dim() + l.out_dim()).sum();
    json!({
        "input_dim": net.input_dim(),
        "output_dim": net.output_dim(),
        "widths": net.widths(),
        "parameters": parameters,
    })
}

pub fn validate(args: &ValidateArgs) -> Result<Outcome, CliError> {
    let invalid = |e: CliError| outcome(Status::Invalid, json!({ "valid": false, "error": e.to_string() }));
    let f = match io::network(&args.original) {
        Ok(f) => f,
        Err(e) => return invalid(e),
    };
    let mut result = json!({ "valid": true, "original": summary(&f) });
    if let Some(path) = &args.compressed {
        let pair = PairArgs {
            original: args.original.clone(),
            compressed: path.clone(),
            prune_spec: args.prune_spec.clone(),
        };
        match io::pair(&pair) {
            Ok(p) => {
                result["compressed"] = summary(p.compressed());
                result["pruned_neurons"] = json!(p.prune_spec().total());
            }
            Err(e) => return invalid(e),
        }
    }
    outcome(Status::Valid, result)
}

pub fn quantize_cmd(ctx: &Ctx, args: &QuantizeArgs) -> Result<Outcome, CliError> {
    let out = out_path(ctx, "quantize")?;
    let f = io::network(&args.original)?;
    let g = quantize(&f, args.bits).map_err(core)?;
    let pair = AlignedPair::new(f, g.clone()).map_err(core)?;
    let max_delta: Vec<f64> = (1..=pair.num_layers()).map(|k| pair.weight_delta(k).max_abs()).collect();
    io::save_network(&g, out)?;
    outcome(
        Status::Ok,
        json!({ "bits": args.bits, "network": out, "max_weight_delta": max_delta, "summary": summary(&g) }),
    )
}

pub fn prune_cmd(ctx: &Ctx, args: &PruneArgs) -> Result<Outcome, CliError> {
    let out = out_path(ctx, "prune")?;
    check((0.0..1.0).contains(&args.ratio), "ratio", args.ratio, "a fraction in [0, 1)")?;
    let f = io::network(&args.original)?;
    let (zeroed, spec) = prune(&f, args.ratio).map_err(core)?;
    let net = if args.remove {
        remove_pruned(&zeroed, &spec).map_err(core)?
    } else {
        zeroed
    };
    io::save_network(&net, out)?;
    io::save_text(&spec.to_json(), &args.prune_spec)?;
    outcome(
        Status::Ok,
        json!({
            "ratio": args.ratio,
            "removed": args.remove,
            "network": out,
            "prune_spec": args.prune_spec,
            "pruned": spec.pruned,
            "pruned_neurons": spec.total(),
            "summary": summary(&net),
        }),
    )
}

/// Writes the compressed network at the original widths, with pruned neurons
/// given zero rows and biases so they always output zero.
pub fn align_cmd(ctx: &Ctx, args: &AlignArgs) -> Result<Outcome, CliError> {
    let out = out_path(ctx, "align")?;
    let pair = io::pair(&args.pair)?;
    let spec = pair.prune_spec();
    let padded = pair
        .compressed()
        .map_layers(|k, layer| {
            let mut layer = layer.clone();
            for &i in spec.layer(k).into_iter().flatten() {
                layer.weight.row_mut(i).fill(0.0);
                layer.bias[i] = 0.0;
            }
            layer
        })
        .map_err(core)?;
    io::save_network(&padded, out)?;
    outcome(
        Status::Ok,
        json!({ "network": out, "pruned_neurons": spec.total(), "summary": summary(&padded) }),
    )
}

pub fn certify_prob(args: &CertifyProbArgs) -> Result<Outcome, CliError> {
    check_eps(args.eps)?;
    if let Some(g) = args.gamma {
        check_gamma(g)?;
    }
    let source = Source::load(&args.source)?;
    let src = source.as_dyn();
    check_output(src, args.output.output_index)?;
    let q = ProbabilityQuery {
        region: io::region(&args.region)?,
        eps: args.eps,
        method: args.method,
        output: args.output.output_index,
        partitions: partitions(&args.output)?,
    };
    let report = certify_probability(src, &q).map_err(core)?;
    let status = match args.gamma {
        Some(g) if report.interval.gamma_min >= g => Status::Certified,
        Some(_) => Status::NotCertified,
        None => Status::Ok,
    };
    outcome(status, report)
}

fn radius_query(
    args: &RadiusArgs,
    source: &dyn EnvelopeSource<f64>,
    gamma: f64,
    method: Method,
) -> Result<RadiusQuery<f64>, CliError> {
    check_eps(args.eps)?;
    check_gamma(gamma)?;
    check(args.r_max.is_finite() && args.r_max > 0.0, "r-max", args.r_max, "a positive number")?;
    check(
        args.radius_tol.is_finite() && args.radius_tol > 0.0,
        "radius-tol",
        args.radius_tol,
        "a positive number",
    )?;
    check_output(source, args.output.output_index)?;
    let (center, domain) = io::center(&args.center)?;
    Ok(RadiusQuery {
        center,
        domain,
        eps: args.eps,
        gamma,
        method,
        output: args.output.output_index,
        r_max: args.r_max,
        tolerance: args.radius_tol,
        partitions: partitions(&args.output)?,
    })
}

/// Turns an infeasible center into a reportable outcome rather than an error.
fn radius_outcome<T: Serialize>(found: deltacert::Result<T>, certified: impl Fn(&T) -> bool) -> Result<Outcome, CliError> {
    match found {
        Ok(r) => {
            let status = if certified(&r) { Status::Certified } else { Status::NotCertified };
            outcome(status, r)
        }
        Err(e @ Error::InfeasibleAtCenter { gap, eps }) => {
            outcome(Status::Infeasible, json!({ "error": e.to_string(), "gap": gap, "eps": eps }))
        }
        Err(e) => Err(core(e)),
    }
}

pub fn certify_radius(args: &CertifyRadiusArgs) -> Result<Outcome, CliError> {
    let source = Source::load(&args.source)?;
    let q = radius_query(&args.radius, source.as_dyn(), args.gamma, args.method)?;
    radius_outcome(certified_radius(source.as_dyn(), &q), |r: &RadiusReport| r.radius > 0.0)
}

pub fn worst_case(args: &WorstCaseArgs) -> Result<Outcome, CliError> {
    let source = Source::load(&args.source)?;
    // Neither gamma nor method affects the worst-case search.
    let q = radius_query(&args.radius, source.as_dyn(), 1.0, Method::Hoeffding)?;
    radius_outcome(worst_case_radius(source.as_dyn(), &q), |r: &RadiusReport| r.radius > 0.0)
}

pub fn compare(args: &CompareArgs) -> Result<Outcome, CliError> {
    let source = Source::load(&args.source)?;
    let src = source.as_dyn();
    match (&args.region, &args.center) {
        (Some(region), _) => {
            check_eps(args.eps)?;
            check_output(src, args.output.output_index)?;
            let q = ProbabilityQuery {
                region: io::region(region)?,
                eps: args.eps,
                method: Method::Bernstein,
                output: args.output.output_index,
                partitions: partitions(&args.output)?,
            };
            outcome(Status::Ok, compare_probability(src, &q).map_err(core)?)
        }
        (None, Some(center)) => {
            let radius = RadiusArgs {
                center: center.clone(),
                eps: args.eps,
                r_max: args.r_max,
                radius_tol: args.radius_tol,
                output: OutputArgs {
                    output_index: args.output.output_index,
                    max_partitions: args.output.max_partitions,
                },
            };
            let gamma = args.gamma.expect("required by clap");
            let q = radius_query(&radius, src, gamma, Method::Bernstein)?;
            let found = compare_radius(src, &q);
            match radius_outcome(found, |_| true)? {
                Outcome { status: Status::Certified, result } => outcome(Status::Ok, result),
                other => Ok(other),
            }
        }
        (None, None) => unreachable!("clap requires --region or --center"),
    }
}

pub fn sample(ctx: &Ctx, args: &SampleArgs) -> Result<Outcome, CliError> {
    check_eps(args.eps)?;
    check(args.samples >= 1, "samples", args.samples, "at least 1")?;
    check(
        args.confidence > 0.0 && args.confidence < 1.0,
        "confidence",
        args.confidence,
        "a level in (0, 1)",
    )?;
    let pair = io::pair(&args.pair)?;
    let index = args.output_index;
    check_output(&pair, OutputSelection::Index(index))?;
    let region: InputRegion<f64> = io::region(&args.region)?;
    let estimate = mc_estimate(&region, args.samples, ctx.seed, args.confidence, |x| {
        Ok(pair.difference(x)?[index].abs() <= args.eps)
    })
    .map_err(core)?;
    outcome(Status::Ok, estimate)
}
