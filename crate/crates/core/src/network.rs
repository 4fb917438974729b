//! Feed-forward ReLU networks, box input regions, and the JSON network format.
//!
//! On-disk format (row-major weights, one entry per layer):
//!
//! ```json
//! {"input_dim": 2,
//!  "layers": [{"weight": [[1, 0], [0, 1]], "bias": [0, 0], "activation": "relu"},
//!             {"weight": [[1, 1]], "bias": [0], "activation": "identity"}]}
//! ```
//!
//! Bare `NaN` / `Infinity` tokens (as emitted by Python's `json` module) are
//! accepted by the reader so that they can be rejected as a [`Error::Value`]
//! rather than surfacing as an opaque parse failure.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::{relu, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<S> {
    pub weight: Matrix<S>,
    pub bias: Vec<S>,
    pub activation: Activation,
}

impl<S: Scalar> Layer<S> {
    pub fn new(weight: Matrix<S>, bias: Vec<S>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Shape(format!(
                "bias length {} does not match weight rows {}",
                bias.len(),
                weight.rows()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// `W x + b`.
    pub fn affine(&self, x: &[S]) -> Vec<S> {
        (0..self.out_dim())
            .map(|i| dot(self.weight.row(i), x) + self.bias[i])
            .collect()
    }
}

/// A validated feed-forward network: ReLU on every layer but the last,
/// identity on the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<S> {
    input_dim: usize,
    layers: Vec<Layer<S>>,
    metadata: Option<serde_json::Value>,
}

impl<S: Scalar> Network<S> {
    pub fn new(input_dim: usize, layers: Vec<Layer<S>>) -> Result<Self> {
        let net = Self {
            input_dim,
            layers,
            metadata: None,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn with_metadata(mut self, metadata: serde_json::Value) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn metadata(&self) -> Option<&serde_json::Value> {
        self.metadata.as_ref()
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Shape("input_dim must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        let mut prev = self.input_dim;
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.out_dim() == 0 {
                return Err(Error::Shape(format!("layer {} has zero width", k + 1)));
            }
            if layer.in_dim() != prev {
                return Err(Error::Shape(format!(
                    "layer {} expects {} inputs but previous width is {}",
                    k + 1,
                    layer.in_dim(),
                    prev
                )));
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::Shape(format!(
                    "layer {} bias length {} does not match {} rows",
                    k + 1,
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            let expected = if k == last {
                Activation::Identity
            } else {
                Activation::Relu
            };
            if layer.activation != expected {
                return Err(Error::Shape(format!(
                    "layer {} must use {:?} activation",
                    k + 1,
                    expected
                )));
            }
            if layer.weight.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::Value(format!(
                    "layer {} contains a non-finite parameter",
                    k + 1
                )));
            }
            prev = layer.out_dim();
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    pub fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Widths `[n_0 = d_in, n_1, …, n_L]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub fn forward(&self, x: &[S]) -> Result<Vec<S>> {
        self.forward_masked(x, |_, _| false)
    }

    /// Forward pass where hidden neuron `(k, i)` (1-based layer) is forced to
    /// output zero whenever `zeroed(k, i)` holds.
    pub fn forward_masked(&self, x: &[S], zeroed: impl Fn(usize, usize) -> bool) -> Result<Vec<S>> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut act = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut next = layer.affine(&act);
            if layer.activation == Activation::Relu {
                for (i, v) in next.iter_mut().enumerate() {
                    *v = if zeroed(k + 1, i) { S::zero() } else { relu(*v) };
                }
            }
            act = next;
        }
        Ok(act)
    }

    /// Product of per-layer ∞-norms: an ℓ∞ Lipschitz constant for the network.
    pub fn lipschitz_inf(&self) -> S {
        self.layers
            .iter()
            .fold(S::one(), |acc, l| acc * l.weight.inf_norm())
    }

    pub fn map_layers(&self, mut f: impl FnMut(usize, &Layer<S>) -> Layer<S>) -> Result<Self> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(k, l)| f(k + 1, l))
            .collect();
        Self {
            input_dim: self.input_dim,
            layers,
            metadata: self.metadata.clone(),
        }
        .validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Result<Network<T>> {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                weight: Matrix::from_vec(
                    l.weight.rows(),
                    l.weight.cols(),
                    l.weight.iter().map(|v| T::lit(v.as_f64())).collect(),
                )
                .expect("same shape"),
                bias: l.bias.iter().map(|v| T::lit(v.as_f64())).collect(),
                activation: l.activation,
            })
            .collect();
        Network {
            input_dim: self.input_dim,
            layers,
            metadata: self.metadata.clone(),
        }
        .validated()
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weight: l
                        .weight
                        .to_rows()
                        .into_iter()
                        .map(|r| r.into_iter().map(|v| Num(v.as_f64())).collect())
                        .collect(),
                    bias: l.bias.iter().map(|v| Num(v.as_f64())).collect(),
                    activation: l.activation,
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cleaned = quote_nonfinite_tokens(text);
        let file: NetworkFile =
            serde_json::from_str(&cleaned).map_err(|e| Error::Parse(e.to_string()))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (k, lf) in file.layers.into_iter().enumerate() {
            let rows: Vec<Vec<S>> = lf
                .weight
                .iter()
                .map(|r| r.iter().map(|v| S::lit(v.0)).collect())
                .collect();
            let weight = Matrix::from_rows(&rows)
                .ok_or_else(|| Error::Shape(format!("layer {} has ragged weight rows", k + 1)))?;
            let bias = lf.bias.iter().map(|v| S::lit(v.0)).collect();
            layers.push(Layer {
                weight,
                bias,
                activation: lf.activation,
            });
        }
        Network {
            input_dim: file.input_dim,
            layers,
            metadata: file.metadata,
        }
        .validated()
    }
}

impl<S: Scalar> Network<S> {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

pub fn load_network<S: Scalar>(path: impl AsRef<Path>) -> Result<Network<S>> {
    let text = std::fs::read_to_string(path)?;
    Network::from_json(&text)
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    input_dim: usize,
    layers: Vec<LayerFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weight: Vec<Vec<Num>>,
    bias: Vec<Num>,
    activation: Activation,
}

/// JSON number that also accepts the quoted non-finite spellings.
struct Num(f64);

impl Serialize for Num {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(v) => Ok(Num(v)),
            Raw::S(s) => match s.as_str() {
                "NaN" => Ok(Num(f64::NAN)),
                "Infinity" => Ok(Num(f64::INFINITY)),
                "-Infinity" => Ok(Num(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number, found string {other:?}"
                ))),
            },
        }
    }
}

/// Wraps bare `NaN`, `Infinity`, `-Infinity` tokens outside string literals
/// in quotes so the result is strict JSON.
fn quote_nonfinite_tokens(text: &str) -> String {
    const TOKENS: [&str; 3] = ["-Infinity", "Infinity", "NaN"];
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
        } else if c == '"' {
            in_string = true;
        } else if let Some(tok) = TOKENS.iter().find(|t| rest.starts_with(**t)) {
            out.push('"');
            out.push_str(tok);
            out.push('"');
            rest = &rest[tok.len()..];
            continue;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

/// Axis-aligned box `[l, u]` of the input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct InputRegion<S> {
    lower: Vec<S>,
    upper: Vec<S>,
}

impl<S: Scalar> InputRegion<S> {
    pub fn new(lower: Vec<S>, upper: Vec<S>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::Shape("region has no dimensions".into()));
        }
        for (&l, &u) in lower.iter().zip(&upper) {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::Value("region bounds must be finite".into()));
            }
            if l > u {
                return Err(Error::Interval {
                    lower: l.as_f64(),
                    upper: u.as_f64(),
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// ℓ∞ ball `B∞(center, radius)`.
    pub fn linf_ball(center: &[S], radius: S) -> Result<Self> {
        Self::new(
            center.iter().map(|&c| c - radius).collect(),
            center.iter().map(|&c| c + radius).collect(),
        )
    }

    pub fn point(x: &[S]) -> Result<Self> {
        Self::new(x.to_vec(), x.to_vec())
    }

    pub fn lower(&self) -> &[S] {
        &self.lower
    }

    pub fn upper(&self) -> &[S] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn widths(&self) -> impl Iterator<Item = S> + '_ {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| u - l)
    }

    /// `K = max_i (u_i − l_i)`.
    pub fn max_width(&self) -> S {
        self.widths().fold(S::zero(), S::max)
    }

    /// Lebesgue measure `Π_i (u_i − l_i)`.
    pub fn measure(&self) -> S {
        self.widths().fold(S::one(), |acc, w| acc * w)
    }

    pub fn center(&self) -> Vec<S> {
        let half = S::lit(0.5);
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| (l + u) * half)
            .collect()
    }

    pub fn contains(&self, x: &[S]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &u))| l <= v && v <= u)
    }

    /// Intersection with another box; `None` when empty.
    pub fn intersect(&self, other: &Self) -> Option<Self> {
        if other.dim() != self.dim() {
            return None;
        }
        let lower: Vec<S> = self
            .lower
            .iter()
            .zip(&other.lower)
            .map(|(&a, &b)| a.max(b))
            .collect();
        let upper: Vec<S> = self
            .upper
            .iter()
            .zip(&other.upper)
            .map(|(&a, &b)| a.min(b))
            .collect();
        Self::new(lower, upper).ok()
    }

    /// Index of the widest edge; ties go to the lowest index.
    pub fn longest_dim(&self) -> usize {
        let mut best = 0;
        let mut best_w = S::neg_infinity();
        for (i, w) in self.widths().enumerate() {
            if w > best_w {
                best = i;
                best_w = w;
            }
        }
        best
    }

    /// Splits at the midpoint of dimension `dim`.
    pub fn bisect(&self, dim: usize) -> (Self, Self) {
        let mid = (self.lower[dim] + self.upper[dim]) * S::lit(0.5);
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[dim] = mid;
        right.lower[dim] = mid;
        (left, right)
    }

    /// Uniform sample from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<S> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| l + (u - l) * S::lit(rng.gen::<f64>()))
            .collect()
    }

    pub fn cast<T: Scalar>(&self) -> InputRegion<T> {
        InputRegion {
            lower: self.lower.iter().map(|v| T::lit(v.as_f64())).collect(),
            upper: self.upper.iter().map(|v| T::lit(v.as_f64())).collect(),
        }
    }
}
