//! Univariate ReLU knot sums.
//!
//! A knot pair `(w, b)` with `w > 0` is the ramp `σ(w y - b)`, switching on at
//! the threshold `t = b / w`. A sequence is *ordered* when its thresholds are
//! non-increasing. For ordered sequences the nested evaluation
//! `σ(… σ(σ(w_1 y - b_1) + w_2 y - b_2) … + w_J y - b_J)` equals the flat sum
//! `Σ_j σ(w_j y - b_j)`, which is what lets a chain of convolutional layers
//! accumulate a piecewise-linear interpolant one knot at a time.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[inline]
pub fn relu(v: f64) -> f64 {
    v.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotPair {
    pub weight: f64,
    pub bias: f64,
}

impl KnotPair {
    pub fn threshold(&self) -> f64 {
        self.bias / self.weight
    }

    pub fn ramp(&self, y: f64) -> f64 {
        relu(self.weight * y - self.bias)
    }
}

/// Knot pairs with strictly positive weights, in nesting order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<KnotPair>", into = "Vec<KnotPair>")]
pub struct ReluKnotSequence {
    pairs: Vec<KnotPair>,
}

impl TryFrom<Vec<KnotPair>> for ReluKnotSequence {
    type Error = Error;

    fn try_from(pairs: Vec<KnotPair>) -> Result<Self> {
        ReluKnotSequence::new(pairs)
    }
}

impl From<ReluKnotSequence> for Vec<KnotPair> {
    fn from(s: ReluKnotSequence) -> Self {
        s.pairs
    }
}

impl ReluKnotSequence {
    pub fn new(pairs: Vec<KnotPair>) -> Result<Self> {
        for p in &pairs {
            if !p.weight.is_finite() || !p.bias.is_finite() {
                return Err(Error::NonFinite(format!("knot pair {p:?}")));
            }
            if p.weight <= 0.0 {
                return Err(Error::NonPositiveWeight(p.weight));
            }
        }
        Ok(ReluKnotSequence { pairs })
    }

    pub fn from_tuples(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(weight, bias)| KnotPair { weight, bias })
                .collect(),
        )
    }

    /// Same pairs sorted into non-increasing threshold order.
    pub fn into_ordered(mut self) -> Self {
        self.pairs
            .sort_by(|a, b| b.threshold().total_cmp(&a.threshold()));
        self
    }

    pub fn pairs(&self) -> &[KnotPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.pairs.iter().map(KnotPair::threshold).collect()
    }

    pub fn push(&mut self, pair: KnotPair) -> Result<()> {
        if pair.weight.is_nan() || pair.weight <= 0.0 || !pair.bias.is_finite() {
            return Err(Error::NonPositiveWeight(pair.weight));
        }
        self.pairs.push(pair);
        Ok(())
    }
}

/// `Σ_j σ(w_j y - b_j)`.
pub fn flat_sum_eval(knots: &ReluKnotSequence, y: f64) -> f64 {
    knots.pairs.iter().map(|p| p.ramp(y)).sum()
}

/// Left-nested evaluation `σ(… σ(σ(w_1 y - b_1) + w_2 y - b_2) … )`.
pub fn nested_eval(knots: &ReluKnotSequence, y: f64) -> f64 {
    knots
        .pairs
        .iter()
        .fold(0.0, |acc, p| relu(acc + p.weight * y - p.bias))
}

/// Whether the thresholds are non-increasing (ties allowed).
pub fn check_order(knots: &ReluKnotSequence) -> bool {
    knots
        .pairs
        .windows(2)
        .all(|w| w[0].threshold() >= w[1].threshold())
}

/// Named univariate profiles available from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `cos(2π f t)`
    Cos {
        #[serde(default = "one")]
        frequency: f64,
    },
    /// `|t - c|`
    Abs {
        #[serde(default)]
        center: f64,
    },
    /// `σ(t - c)`
    ReluShift {
        #[serde(default)]
        shift: f64,
    },
    /// `exp(-sin²(π t) / (2 w²))`, a 1-periodic bump.
    GaussianPeriodic {
        #[serde(default = "default_width")]
        width: f64,
    },
    /// `cos(2πt) + cos(4πt)`
    CosSum,
    Identity,
}

fn one() -> f64 {
    1.0
}

fn default_width() -> f64 {
    0.25
}

impl ProfileKind {
    pub fn evaluate(&self, t: f64) -> f64 {
        match *self {
            ProfileKind::Cos { frequency } => (2.0 * PI * frequency * t).cos(),
            ProfileKind::Abs { center } => (t - center).abs(),
            ProfileKind::ReluShift { shift } => relu(t - shift),
            ProfileKind::GaussianPeriodic { width } => {
                let s = (PI * t).sin();
                (-s * s / (2.0 * width * width)).exp()
            }
            ProfileKind::CosSum => (2.0 * PI * t).cos() + (4.0 * PI * t).cos(),
            ProfileKind::Identity => t,
        }
    }

    pub fn holder_note(&self) -> &'static str {
        match self {
            ProfileKind::Cos { .. }
            | ProfileKind::GaussianPeriodic { .. }
            | ProfileKind::CosSum => "smooth",
            ProfileKind::Abs { .. } | ProfileKind::ReluShift { .. } => "Lipschitz",
            ProfileKind::Identity => "affine",
        }
    }

    /// Parse `name` or `name:param`, e.g. `cos:2` or `relu-shift:0.5`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, param) = match spec.split_once(':') {
            Some((n, p)) => {
                let v: f64 = p
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad profile parameter '{p}'")))?;
                (n, Some(v))
            }
            None => (spec, None),
        };
        Ok(match name {
            "cos" => ProfileKind::Cos {
                frequency: param.unwrap_or(1.0),
            },
            "abs" => ProfileKind::Abs {
                center: param.unwrap_or(0.0),
            },
            "relu-shift" => ProfileKind::ReluShift {
                shift: param.unwrap_or(0.0),
            },
            "gaussian-periodic" => ProfileKind::GaussianPeriodic {
                width: param.unwrap_or_else(default_width),
            },
            "cos-sum" => ProfileKind::CosSum,
            "identity" => ProfileKind::Identity,
            other => return Err(Error::invalid(format!("unknown profile '{other}'"))),
        })
    }
}

/// A univariate profile `φ` together with the interval it is approximated on.
#[derive(Clone)]
pub struct ProfileSpec {
    evaluator: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    domain: (f64, f64),
    pub holder_note: Option<String>,
}

impl fmt::Debug for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProfileSpec")
            .field("domain", &self.domain)
            .field("holder_note", &self.holder_note)
            .finish_non_exhaustive()
    }
}

impl ProfileSpec {
    pub fn new<F>(evaluator: F, y_min: f64, y_max: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_domain(y_min, y_max)?;
        Ok(ProfileSpec {
            evaluator: Arc::new(evaluator),
            domain: (y_min, y_max),
            holder_note: None,
        })
    }

    pub fn from_kind(kind: &ProfileKind, y_min: f64, y_max: f64) -> Result<Self> {
        let k = kind.clone();
        let mut p = ProfileSpec::new(move |t| k.evaluate(t), y_min, y_max)?;
        p.holder_note = Some(kind.holder_note().to_string());
        Ok(p)
    }

    pub fn evaluate(&self, y: f64) -> f64 {
        (self.evaluator)(y)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Same evaluator on another interval.
    pub fn with_domain(&self, y_min: f64, y_max: f64) -> Result<Self> {
        check_domain(y_min, y_max)?;
        Ok(ProfileSpec {
            evaluator: Arc::clone(&self.evaluator),
            domain: (y_min, y_max),
            holder_note: self.holder_note.clone(),
        })
    }
}

fn check_domain(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("degenerate profile domain [{lo}, {hi}]")));
    }
    Ok(())
}

/// Piecewise-linear interpolant of a profile at equispaced knots, written as
///
/// `L(y) = slope·y + intercept + Σ rising − Σ falling`
///
/// where `rising` holds the positive slope increments and `falling` the
/// magnitudes of the negative ones. Both sequences are ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotApproximation {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub rising: ReluKnotSequence,
    pub falling: ReluKnotSequence,
    pub slope: f64,
    pub intercept: f64,
}

impl KnotApproximation {
    pub fn evaluate(&self, y: f64) -> f64 {
        self.slope * y + self.intercept + flat_sum_eval(&self.rising, y)
            - flat_sum_eval(&self.falling, y)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Number of ramps with nonzero weight.
    pub fn ramp_count(&self) -> usize {
        self.rising.len() + self.falling.len()
    }
}

/// Interpolate `profile` at `n + 1` equispaced knots over its domain.
pub fn build_knots(profile: &ProfileSpec, n: usize) -> Result<KnotApproximation> {
    if n == 0 {
        return Err(Error::invalid("need at least one knot interval"));
    }
    let (lo, hi) = profile.domain();
    let h = (hi - lo) / n as f64;
    let knots: Vec<f64> = (0..=n)
        .map(|k| if k == n { hi } else { lo + k as f64 * h })
        .collect();
    let values: Vec<f64> = knots.iter().map(|&t| profile.evaluate(t)).collect();
    if let Some((t, v)) = knots.iter().zip(&values).find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(format!("profile value {v} at {t}")));
    }
    let slopes: Vec<f64> = knots
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
        .collect();

    let mut rising = Vec::new();
    let mut falling = Vec::new();
    for k in 1..n {
        let delta = slopes[k] - slopes[k - 1];
        let t = knots[k];
        let pair = KnotPair {
            weight: delta.abs(),
            bias: delta.abs() * t,
        };
        if delta > 0.0 {
            rising.push(pair);
        } else if delta < 0.0 {
            falling.push(pair);
        }
    }
    Ok(KnotApproximation {
        slope: slopes[0],
        intercept: values[0] - slopes[0] * knots[0],
        rising: ReluKnotSequence::new(rising)?.into_ordered(),
        falling: ReluKnotSequence::new(falling)?.into_ordered(),
        knots,
        values,
    })
}
