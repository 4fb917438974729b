//! Certification drivers: probability intervals with domain partitioning,
//! certified radius search, the worst-case radius baseline and method
//! comparison.

use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{envelope_interval, Method, ProbabilityInterval};
use crate::compression::AlignedPair;
use crate::error::{Error, Result};
use crate::network::InputRegion;
use crate::propagation::{compute_envelope_with, OutputEnvelope, PropagationConfig};
use crate::scalar::Scalar;

/// Anything that yields linear error bounds over a box.
pub trait EnvelopeSource<S: Scalar>: Sync {
    fn input_dim(&self) -> usize;

    fn num_outputs(&self) -> usize;

    /// One envelope per output coordinate.
    fn envelopes(&self, region: &InputRegion<S>) -> Result<Vec<OutputEnvelope<S>>>;

    /// Bounds on `f(x) − f′(x)` at a single point, per output. Exact for a
    /// network pair.
    fn point_bounds(&self, x: &[S]) -> Result<Vec<(S, S)>>;
}

impl<S: Scalar> EnvelopeSource<S> for AlignedPair<S> {
    fn input_dim(&self) -> usize {
        AlignedPair::input_dim(self)
    }

    fn num_outputs(&self) -> usize {
        self.output_dim()
    }

    fn envelopes(&self, region: &InputRegion<S>) -> Result<Vec<OutputEnvelope<S>>> {
        ConfiguredPair::new(self, PropagationConfig::default()).envelopes(region)
    }

    fn point_bounds(&self, x: &[S]) -> Result<Vec<(S, S)>> {
        Ok(self.difference(x)?.into_iter().map(|d| (d, d)).collect())
    }
}

/// A pair propagated with non-default settings.
#[derive(Debug, Clone, Copy)]
pub struct ConfiguredPair<'a, S> {
    pub pair: &'a AlignedPair<S>,
    pub config: PropagationConfig,
}

impl<'a, S: Scalar> ConfiguredPair<'a, S> {
    pub fn new(pair: &'a AlignedPair<S>, config: PropagationConfig) -> Self {
        Self { pair, config }
    }
}

impl<S: Scalar> EnvelopeSource<S> for ConfiguredPair<'_, S> {
    fn input_dim(&self) -> usize {
        self.pair.input_dim()
    }

    fn num_outputs(&self) -> usize {
        self.pair.output_dim()
    }

    fn envelopes(&self, region: &InputRegion<S>) -> Result<Vec<OutputEnvelope<S>>> {
        let env = compute_envelope_with(self.pair, region, self.config)?;
        (0..env.num_outputs()).map(|i| env.output(i)).collect()
    }

    fn point_bounds(&self, x: &[S]) -> Result<Vec<(S, S)>> {
        self.pair.point_bounds(x)
    }
}

/// Region-independent envelope, e.g. a hand-specified pair of affine bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FixedEnvelope<S> {
    pub outputs: Vec<OutputEnvelope<S>>,
}

impl<S: Scalar> FixedEnvelope<S> {
    pub fn new(outputs: Vec<OutputEnvelope<S>>) -> Result<Self> {
        let dim = outputs
            .first()
            .map(|o| o.lower.coeffs.len())
            .ok_or_else(|| Error::Shape("envelope needs at least one output".into()))?;
        for o in &outputs {
            if o.lower.coeffs.len() != dim || o.upper.coeffs.len() != dim {
                return Err(Error::Shape("envelope rows have different input dimensions".into()));
            }
            let finite = o.lower.coeffs.iter().chain(&o.upper.coeffs).all(|c| c.is_finite())
                && o.lower.offset.is_finite()
                && o.upper.offset.is_finite();
            if !finite {
                return Err(Error::Value("envelope contains a non-finite coefficient".into()));
            }
        }
        Ok(Self { outputs })
    }

    pub fn single(env: OutputEnvelope<S>) -> Result<Self> {
        Self::new(vec![env])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(raw.outputs)
    }
}

impl<S: Scalar> EnvelopeSource<S> for FixedEnvelope<S> {
    fn input_dim(&self) -> usize {
        self.outputs[0].lower.coeffs.len()
    }

    fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    fn envelopes(&self, region: &InputRegion<S>) -> Result<Vec<OutputEnvelope<S>>> {
        if region.dim() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: region.dim(),
            });
        }
        Ok(self.outputs.clone())
    }

    fn point_bounds(&self, x: &[S]) -> Result<Vec<(S, S)>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.outputs.iter().map(|o| (o.lower.eval(x), o.upper.eval(x))).collect())
    }
}

/// Which output coordinates a query certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputSelection {
    Index(usize),
    /// Every coordinate; the reported interval bounds the smallest
    /// per-coordinate probability.
    All,
}

impl OutputSelection {
    fn indices(self, num_outputs: usize) -> Result<Vec<usize>> {
        match self {
            OutputSelection::Index(i) if i < num_outputs => Ok(vec![i]),
            OutputSelection::Index(i) => Err(Error::Query(format!(
                "output index {i} out of range for {num_outputs} outputs"
            ))),
            OutputSelection::All => Ok((0..num_outputs).collect()),
        }
    }
}

impl std::str::FromStr for OutputSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(OutputSelection::All);
        }
        s.parse()
            .map(OutputSelection::Index)
            .map_err(|_| Error::Query(format!("output index must be a number or 'all', got '{s}'")))
    }
}

/// Budget and stopping rule for domain partitioning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub max_partitions: usize,
    /// Stop once every cell's interval is narrower than this.
    pub width_tolerance: f64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            max_partitions: 1,
            width_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ProbabilityQuery<S> {
    pub region: InputRegion<S>,
    pub eps: S,
    pub method: Method,
    pub output: OutputSelection,
    pub partitions: PartitionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RadiusQuery<S> {
    pub center: Vec<S>,
    /// Global input domain the ball is clipped to.
    pub domain: Option<InputRegion<S>>,
    pub eps: S,
    pub gamma: f64,
    pub method: Method,
    pub output: OutputSelection,
    pub r_max: S,
    pub tolerance: S,
    pub partitions: PartitionConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputInterval {
    pub index: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbabilityReport {
    pub method: Method,
    pub eps: f64,
    pub output: OutputSelection,
    pub region: InputRegion<f64>,
    pub interval: ProbabilityInterval,
    pub per_output: Vec<OutputInterval>,
    pub partitions: usize,
    pub width_reduction: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusKind {
    Probabilistic,
    WorstCase,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusReport {
    pub kind: RadiusKind,
    /// `None` for the worst-case baseline.
    pub method: Option<Method>,
    pub eps: f64,
    /// `None` for the worst-case baseline.
    pub gamma: Option<f64>,
    pub output: OutputSelection,
    pub center: Vec<f64>,
    pub r_max: f64,
    pub tolerance: f64,
    pub radius: f64,
    /// Interval at the returned radius (probabilistic mode only).
    pub interval_at_radius: Option<ProbabilityInterval>,
    pub partitions: usize,
    pub evaluations: usize,
    /// A grid point beyond the first failure passed again.
    pub non_monotone: bool,
    pub wall_time_s: f64,
}

/// Interval of one cell for the selected outputs.
fn cell_intervals<S: Scalar, E: EnvelopeSource<S> + ?Sized>(
    source: &E,
    region: &InputRegion<S>,
    eps: S,
    method: Method,
    outputs: &[usize],
) -> Result<Vec<(f64, f64)>> {
    let envs = source.envelopes(region)?;
    outputs
        .iter()
        .map(|&o| {
            let env = &envs[o];
            let (lo, hi) = env.interval(region);
            // Decided deterministically by the concrete interval.
            if lo >= -eps && hi <= eps {
                return Ok((1.0, 1.0));
            }
            if lo > eps || hi < -eps {
                return Ok((0.0, 0.0));
            }
            let p = envelope_interval(env, region, eps, method)?;
            Ok((p.gamma_min, p.gamma_max))
        })
        .collect()
}

struct Node<S> {
    region: InputRegion<S>,
    own: Vec<(f64, f64)>,
    value: Vec<(f64, f64)>,
    parent: Option<usize>,
    children: Option<(usize, usize)>,
}

fn summarize(value: &[(f64, f64)]) -> (f64, f64) {
    value
        .iter()
        .fold((1.0f64, 1.0f64), |(a, b), &(lo, hi)| (a.min(lo), b.min(hi)))
}

fn spread(value: &[(f64, f64)]) -> f64 {
    value.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max)
}

struct PartitionOutcome {
    per_output: Vec<(f64, f64)>,
    leaves: usize,
}

/// Partition refinement. A node's value intersects its own bounds with the
/// even-weighted mean of its children's, so refining never loosens the root.
fn refine<S: Scalar, E: EnvelopeSource<S> + ?Sized>(
    source: &E,
    region: &InputRegion<S>,
    eps: S,
    method: Method,
    outputs: &[usize],
    cfg: PartitionConfig,
) -> Result<PartitionOutcome> {
    if cfg.max_partitions == 0 {
        return Err(Error::Query("max_partitions must be at least 1".into()));
    }
    let root = cell_intervals(source, region, eps, method, outputs)?;
    let mut nodes = vec![Node {
        region: region.clone(),
        own: root.clone(),
        value: root,
        parent: None,
        children: None,
    }];
    let mut leaves = vec![0usize];
    while leaves.len() < cfg.max_partitions {
        // Widest splittable leaf; ties go to the earliest leaf.
        let pick = leaves
            .iter()
            .enumerate()
            .filter(|(_, &n)| nodes[n].region.max_width() > S::zero())
            .map(|(pos, &n)| (pos, spread(&nodes[n].value)))
            .filter(|&(_, w)| w > cfg.width_tolerance)
            .fold(None, |best: Option<(usize, f64)>, (pos, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((pos, w)),
            });
        let Some((pos, _)) = pick else { break };
        let idx = leaves[pos];
        let dim = nodes[idx].region.longest_dim();
        let (a, b) = nodes[idx].region.bisect(dim);
        let (va, vb) = rayon::join(
            || cell_intervals(source, &a, eps, method, outputs),
            || cell_intervals(source, &b, eps, method, outputs),
        );
        let (va, vb) = (va?, vb?);
        let ia = nodes.len();
        for (r, v) in [(a, va), (b, vb)] {
            nodes.push(Node {
                region: r,
                own: v.clone(),
                value: v,
                parent: Some(idx),
                children: None,
            });
        }
        nodes[idx].children = Some((ia, ia + 1));
        leaves.splice(pos..=pos, [ia, ia + 1]);

        let mut cur = Some(idx);
        while let Some(n) = cur {
            let (ca, cb) = nodes[n].children.expect("interior node");
            let value = nodes[n]
                .own
                .iter()
                .zip(nodes[ca].value.iter().zip(&nodes[cb].value))
                .map(|(&(olo, ohi), (&(alo, ahi), &(blo, bhi)))| {
                    let lo = olo.max(0.5 * (alo + blo)).clamp(0.0, 1.0);
                    let hi = ohi.min(0.5 * (ahi + bhi)).clamp(0.0, 1.0);
                    (lo, hi.max(lo))
                })
                .collect();
            nodes[n].value = value;
            cur = nodes[n].parent;
        }
    }
    Ok(PartitionOutcome {
        per_output: nodes[0].value.clone(),
        leaves: leaves.len(),
    })
}

fn check_eps<S: Scalar>(eps: S) -> Result<()> {
    if !(eps > S::zero() && eps.is_finite()) {
        return Err(Error::Query(format!("eps must be a positive finite number, got {eps}")));
    }
    Ok(())
}

fn check_dim<S: Scalar, E: EnvelopeSource<S> + ?Sized>(source: &E, got: usize) -> Result<()> {
    if got != source.input_dim() {
        return Err(Error::Dimension {
            expected: source.input_dim(),
            got,
        });
    }
    Ok(())
}

pub fn certify_probability<S: Scalar, E: EnvelopeSource<S> + ?Sized>(
    source: &E,
    q: &ProbabilityQuery<S>,
) -> Result<ProbabilityReport> {
    let start = Instant::now();
    check_eps(q.eps)?;
    check_dim(source, q.region.dim())?;
    let outputs = q.output.indices(source.num_outputs())?;
    let out = refine(source, &q.region, q.eps, q.method, &outputs, q.partitions)?;
    let (gamma_min, gamma_max) = summarize(&out.per_output);
    let interval = ProbabilityInterval {
        gamma_min,
        gamma_max,
        method: q.method,
    };
    debug!("certify_probability: {interval:?} over {} partitions", out.leaves);
    Ok(ProbabilityReport {
        method: q.method,
        eps: q.eps.as_f64(),
        output: q.output,
        region: q.region.cast(),
        interval,
        per_output: outputs
            .iter()
            .zip(&out.per_output)
            .map(|(&index, &(gamma_min, gamma_max))| OutputInterval {
                index,
                gamma_min,
                gamma_max,
            })
            .collect(),
        partitions: out.leaves,
        width_reduction: interval.width_reduction(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Ball of radius `r` around the center, clipped to the domain.
pub fn clipped_ball<S: Scalar>(center: &[S], r: S, domain: Option<&InputRegion<S>>) -> Result<InputRegion<S>> {
    let ball = InputRegion::linf_ball(center, r)?;
    match domain {
        None => Ok(ball),
        Some(d) => ball
            .intersect(d)
            .ok_or_else(|| Error::Query("center lies outside the input domain".into())),
    }
}

struct SearchOutcome {
    radius: f64,
    evaluations: usize,
    non_monotone: bool,
}

/// Number of coarse grid points checked before bisecting.
pub const RADIUS_GRID: usize = 16;

/// Largest passing radius: coarse grid to bracket the first failure, then
/// bisection inside that bracket. `pass(0)` is assumed true.
fn search_radius<S: Scalar>(
    r_max: S,
    tolerance: S,
    pass: impl Fn(S) -> Result<bool> + Sync,
) -> Result<SearchOutcome> {
    let grid: Vec<S> = (1..=RADIUS_GRID)
        .map(|i| r_max * S::from_usize_lossy(i) / S::from_usize_lossy(RADIUS_GRID))
        .collect();
    let results: Vec<bool> = grid.par_iter().map(|&r| pass(r)).collect::<Result<_>>()?;
    let mut evaluations = grid.len();
    let Some(first_fail) = results.iter().position(|ok| !ok) else {
        return Ok(SearchOutcome {
            radius: r_max.as_f64(),
            evaluations,
            non_monotone: false,
        });
    };
    let non_monotone = results[first_fail..].iter().any(|&ok| ok);
    if non_monotone {
        warn!("radius predicate is not monotone on the coarse grid; keeping the first bracket");
    }
    let mut lo = if first_fail == 0 { S::zero() } else { grid[first_fail - 1] };
    let mut hi = grid[first_fail];
    let two = S::lit(2.0);
    while hi - lo > tolerance {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        evaluations += 1;
        if pass(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SearchOutcome {
        radius: lo.as_f64(),
        evaluations,
        non_monotone,
    })
}

fn check_radius_query<S: Scalar, E: EnvelopeSource<S> + ?Sized>(source: &E, q: &RadiusQuery<S>) -> Result<Vec<usize>> {
    check_eps(q.eps)?;
    check_dim(source, q.center.len())?;
    if !(q.r_max >= S::zero() && q.r_max.is_finite()) {
        return Err(Error::Query(format!("r_max must be finite and non-negative, got {}", q.r_max)));
    }
    if q.tolerance.is_nan() || q.tolerance <= S::zero() {
        return Err(Error::Query(format!("radius tolerance must be positive, got {}", q.tolerance)));
    }
    if let Some(d) = &q.domain {
        check_dim(source, d.dim())?;
        if !d.contains(&q.center) {
            return Err(Error::Query("center lies outside the input domain".into()));
        }
    }
    let outputs = q.output.indices(source.num_outputs())?;
    // At r = 0 the ball is the center itself; decide it exactly.
    let point = source.point_bounds(&q.center)?;
    let gap = outputs
        .iter()
        .map(|&o| point[o].0.abs().max(point[o].1.abs()).as_f64())
        .fold(0.0, f64::max);
    if gap > q.eps.as_f64() {
        return Err(Error::InfeasibleAtCenter {
            gap,
            eps: q.eps.as_f64(),
        });
    }
    Ok(outputs)
}

/// Largest `r ≤ r_max` with `γ_min(B∞(x₀, r) ∩ domain) ≥ γ`, to within the tolerance.
pub fn certified_radius<S: Scalar, E: EnvelopeSource<S> + ?Sized>(source: &E, q: &RadiusQuery<S>) -> Result<RadiusReport> {
    let start = Instant::now();
    if !(q.gamma > 0.0 && q.gamma < 1.0) {
        return Err(Error::Query(format!("gamma must lie in (0, 1), got {}", q.gamma)));
    }
    let outputs = check_radius_query(source, q)?;
    let evaluate = |r: S| -> Result<PartitionOutcome> {
        let region = clipped_ball(&q.center, r, q.domain.as_ref())?;
        refine(source, &region, q.eps, q.method, &outputs, q.partitions)
    };
    let found = search_radius(q.r_max, q.tolerance, |r| {
        Ok(summarize(&evaluate(r)?.per_output).0 >= q.gamma)
    })?;
    let at = evaluate(S::lit(found.radius))?;
    let (gamma_min, gamma_max) = summarize(&at.per_output);
    Ok(RadiusReport {
        kind: RadiusKind::Probabilistic,
        method: Some(q.method),
        eps: q.eps.as_f64(),
        gamma: Some(q.gamma),
        output: q.output,
        center: q.center.iter().map(|c| c.as_f64()).collect(),
        r_max: q.r_max.as_f64(),
        tolerance: q.tolerance.as_f64(),
        radius: found.radius,
        interval_at_radius: Some(ProbabilityInterval {
            gamma_min,
            gamma_max,
            method: q.method,
        }),
        partitions: at.leaves,
        evaluations: found.evaluations + 1,
        non_monotone: found.non_monotone,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Largest `r ≤ r_max` whose concretized error interval lies inside `[−ε, ε]`.
/// `gamma`, `method` and `partitions` of the query are ignored.
pub fn worst_case_radius<S: Scalar, E: EnvelopeSource<S> + ?Sized>(source: &E, q: &RadiusQuery<S>) -> Result<RadiusReport> {
    let start = Instant::now();
    let outputs = check_radius_query(source, q)?;
    let found = search_radius(q.r_max, q.tolerance, |r| {
        let region = clipped_ball(&q.center, r, q.domain.as_ref())?;
        let envs = source.envelopes(&region)?;
        Ok(outputs.iter().all(|&o| {
            let (lo, hi) = envs[o].interval(&region);
            lo >= -q.eps && hi <= q.eps
        }))
    })?;
    Ok(RadiusReport {
        kind: RadiusKind::WorstCase,
        method: None,
        eps: q.eps.as_f64(),
        gamma: None,
        output: q.output,
        center: q.center.iter().map(|c| c.as_f64()).collect(),
        r_max: q.r_max.as_f64(),
        tolerance: q.tolerance.as_f64(),
        radius: found.radius,
        interval_at_radius: None,
        partitions: 1,
        evaluations: found.evaluations,
        non_monotone: found.non_monotone,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbabilityComparison {
    pub hoeffding: ProbabilityReport,
    pub bernstein: ProbabilityReport,
    /// Bernstein minus Hoeffding.
    pub delta_gamma_min: f64,
    pub delta_width_reduction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusComparison {
    pub hoeffding: RadiusReport,
    pub bernstein: RadiusReport,
    pub worst_case: RadiusReport,
    /// Bernstein minus Hoeffding.
    pub delta_radius: f64,
}

/// Both methods under the same partition budget; the query's own method is ignored.
pub fn compare_probability<S: Scalar, E: EnvelopeSource<S> + ?Sized>(
    source: &E,
    q: &ProbabilityQuery<S>,
) -> Result<ProbabilityComparison> {
    let run = |method| {
        certify_probability(
            source,
            &ProbabilityQuery {
                method,
                ..q.clone()
            },
        )
    };
    let hoeffding = run(Method::Hoeffding)?;
    let bernstein = run(Method::Bernstein)?;
    Ok(ProbabilityComparison {
        delta_gamma_min: bernstein.interval.gamma_min - hoeffding.interval.gamma_min,
        delta_width_reduction: bernstein.width_reduction - hoeffding.width_reduction,
        hoeffding,
        bernstein,
    })
}

/// Both methods plus the worst-case baseline under the same search budget.
pub fn compare_radius<S: Scalar, E: EnvelopeSource<S> + ?Sized>(source: &E, q: &RadiusQuery<S>) -> Result<RadiusComparison> {
    let run = |method| {
        certified_radius(
            source,
            &RadiusQuery {
                method,
                ..q.clone()
            },
        )
    };
    let hoeffding = run(Method::Hoeffding)?;
    let bernstein = run(Method::Bernstein)?;
    let worst_case = worst_case_radius(source, q)?;
    Ok(RadiusComparison {
        delta_radius: bernstein.radius - hoeffding.radius,
        hoeffding,
        bernstein,
        worst_case,
    })
}
