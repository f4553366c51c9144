//! Periodic CNNs and the constructive ridge-function network.
//!
//! A [`PeriodicCnn`] of width `d` maps `x ∈ R^d` through layers
//! `h^(j) = σ(w^(j) ∗ h^(j-1) − b^(j))` and reads out `c · h^(J)`.
//! [`build_ridge_network`] assembles a network approximating `φ(a·x)` on a
//! box in three stages:
//!
//! 1. Factor the reversed direction `W = (a_d, …, a_1)` into short filters and
//!    stack them with biases low enough that every ReLU stays in its linear
//!    regime on the box.
//! 2. Bias the last of those layers so only coordinate `d-1` survives; it
//!    carries `a·x + A` with `A` from [`shift_margin`].
//! 3. Append one layer per knot ramp. Each layer adds `w·(y + A)` into an
//!    accumulator slot, keeps the carry in place and zeroes every other slot;
//!    ordered knots make the nested ReLUs collapse into the flat knot sum.
//!    Negative slope increments use a second accumulator read out with a
//!    negative coefficient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circulant::{circular_convolve, compose_filters, Filter};
use crate::error::{Error, Result};
use crate::factorization::factorize;
use crate::par;
use crate::ridge::{build_knots, relu, KnotApproximation, KnotPair, ProfileSpec, ReluKnotSequence};

/// Residual allowed when factoring the direction filter.
const DIRECTION_FACTOR_TOLERANCE: f64 = 1e-10;

/// Bias vector whose components `s, …, d-s-1` (zero-based) are all equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVector {
    values: Vec<f64>,
    edge_width: usize,
}

impl BiasVector {
    pub fn new(values: Vec<f64>, edge_width: usize) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("bias component {v}")));
        }
        if let Some(index) = structure_violation(&values, edge_width) {
            return Err(Error::BiasStructure { index });
        }
        Ok(BiasVector { values, edge_width })
    }

    pub fn constant(value: f64, len: usize, edge_width: usize) -> Result<Self> {
        BiasVector::new(vec![value; len], edge_width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn edge_width(&self) -> usize {
        self.edge_width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Direct scan of the repeated-middle structure.
    pub fn has_repeated_middle(&self) -> bool {
        structure_violation(&self.values, self.edge_width).is_none()
    }
}

/// First middle index that differs from the middle value, if any.
fn structure_violation(values: &[f64], s: usize) -> Option<usize> {
    let d = values.len();
    if d <= 2 * s + 1 {
        return None;
    }
    let first = values[s];
    (s + 1..d - s).find(|&i| values[i] != first)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub filter: Filter,
    pub bias: BiasVector,
}

/// Fixed-width periodic CNN with a linear readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkSpec", into = "NetworkSpec")]
pub struct PeriodicCnn {
    width: usize,
    edge_width: usize,
    layers: Vec<Layer>,
    readout: Vec<f64>,
}

/// On-disk network format: filters and biases as plain number arrays, the
/// period of every filter being `width`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_width: Option<usize>,
    pub layers: Vec<LayerSpec>,
    pub readout: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerSpec {
    pub filter: Vec<f64>,
    pub bias: Vec<f64>,
}

impl TryFrom<NetworkSpec> for PeriodicCnn {
    type Error = Error;

    fn try_from(spec: NetworkSpec) -> Result<Self> {
        let edge_width = spec.edge_width.unwrap_or(spec.width);
        let layers = spec
            .layers
            .into_iter()
            .map(|l| {
                Ok(Layer {
                    filter: Filter::new(l.filter, spec.width)?,
                    bias: BiasVector::new(l.bias, edge_width)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PeriodicCnn::new(spec.width, edge_width, layers, spec.readout)
    }
}

impl From<PeriodicCnn> for NetworkSpec {
    fn from(net: PeriodicCnn) -> Self {
        NetworkSpec {
            width: net.width,
            edge_width: Some(net.edge_width),
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerSpec {
                    filter: l.filter.coefficients().to_vec(),
                    bias: l.bias.values,
                })
                .collect(),
            readout: net.readout,
        }
    }
}

impl PeriodicCnn {
    pub fn new(
        width: usize,
        edge_width: usize,
        layers: Vec<Layer>,
        readout: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::ZeroPeriod);
        }
        for layer in &layers {
            if layer.filter.period() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    actual: layer.filter.period(),
                });
            }
            if layer.bias.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    actual: layer.bias.len(),
                });
            }
            if let Some(index) = structure_violation(layer.bias.values(), edge_width) {
                return Err(Error::BiasStructure { index });
            }
        }
        if readout.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: readout.len(),
            });
        }
        if let Some(c) = readout.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("readout coefficient {c}")));
        }
        Ok(PeriodicCnn {
            width,
            edge_width,
            layers,
            readout,
        })
    }

    /// Network whose ReLUs never switch off for inputs with `|x_i| ≤ input_bound`:
    /// each layer is biased by `-(‖w‖₁·B + 1)` where `B` bounds its input.
    pub fn linear(
        width: usize,
        edge_width: usize,
        filters: Vec<Filter>,
        readout: Vec<f64>,
        input_bound: f64,
    ) -> Result<Self> {
        let mut bound = input_bound.abs();
        let mut layers = Vec::with_capacity(filters.len());
        for filter in filters {
            let reach = filter.l1_norm() * bound;
            let bias = -(reach + 1.0);
            layers.push(Layer {
                filter,
                bias: BiasVector::constant(bias, width, edge_width)?,
            });
            bound = 2.0 * reach + 1.0;
        }
        PeriodicCnn::new(width, edge_width, layers, readout)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn edge_width(&self) -> usize {
        self.edge_width
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn readout(&self) -> &[f64] {
        &self.readout
    }

    /// Same layers, different readout.
    pub fn with_readout(&self, readout: Vec<f64>) -> Result<Self> {
        PeriodicCnn::new(self.width, self.edge_width, self.layers.clone(), readout)
    }

    /// `h^(J)(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = apply_layer(layer, &h);
        }
        Ok(h)
    }

    /// `[h^(0), h^(1), …, h^(J)]`.
    pub fn forward_trace(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        out.push(x.to_vec());
        for layer in &self.layers {
            let next = apply_layer(layer, out.last().expect("non-empty"));
            out.push(next);
        }
        Ok(out)
    }

    /// `Σ_k c_k h_k^(J)(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let h = self.forward(x)?;
        Ok(dot(&self.readout, &h))
    }

    /// Evaluate many points; parallel under the `parallel` feature.
    pub fn evaluate_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        par::map(points, |x| self.evaluate(x)).into_iter().collect()
    }

    /// Single-threaded [`evaluate_batch`](Self::evaluate_batch).
    pub fn evaluate_batch_sequential(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        par::map_sequential(points, |x| self.evaluate(x))
            .into_iter()
            .collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                actual: x.len(),
            });
        }
        Ok(())
    }
}

fn apply_layer(layer: &Layer, h: &[f64]) -> Vec<f64> {
    let pre = circular_convolve(&layer.filter, h).expect("widths checked at construction");
    pre.iter()
        .zip(layer.bias.values())
        .map(|(p, b)| relu(p - b))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Composite filter `w^(J) ∗ … ∗ w^(1)` and merged bias
/// `B^(j) = w^(j) ∗ B^(j-1) + b^(j)` of a stack of layers. When no ReLU in the
/// stack switches off, `h^(J) = σ(W ∗ x − B^(J))`.
pub fn merged_linear_stage(layers: &[Layer]) -> Result<(Filter, Vec<f64>)> {
    let first = layers
        .first()
        .ok_or_else(|| Error::invalid("no layers to merge"))?;
    let mut filter = first.filter.clone();
    let mut bias = first.bias.values().to_vec();
    for layer in &layers[1..] {
        filter = compose_filters(&layer.filter, &filter)?;
        bias = circular_convolve(&layer.filter, &bias)?
            .into_iter()
            .zip(layer.bias.values())
            .map(|(a, b)| a + b)
            .collect();
    }
    Ok((filter, bias))
}

/// Axis-aligned box `Π [lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CoordinateBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!("bad box side [{lo}, {hi}]")));
            }
        }
        Ok(CoordinateBox { lower, upper })
    }

    /// `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        CoordinateBox::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Exact range of `a·x` over the box.
    pub fn project_range(&self, a: &[f64]) -> (f64, f64) {
        a.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .fold((0.0, 0.0), |(lo, hi), (&ai, (&l, &u))| {
                (lo + (ai * l).min(ai * u), hi + (ai * l).max(ai * u))
            })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if l == u { l } else { rng.random_range(l..u) })
            .collect()
    }

    /// `n` uniform points from a seeded ChaCha8 stream.
    pub fn sample_points(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

/// `A = Σ_i |a_i| · max(|lower_i|, |upper_i|) + 1`, so `a·x + A ≥ 1` on the box.
pub fn shift_margin(a: &[f64], region: &CoordinateBox) -> Result<f64> {
    if a.len() != region.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            actual: a.len(),
        });
    }
    Ok(a.iter()
        .zip(region.lower.iter().zip(&region.upper))
        .map(|(ai, (l, u))| ai.abs() * l.abs().max(u.abs()))
        .sum::<f64>()
        + 1.0)
}

/// Target ridge `φ(a·x)`.
#[derive(Debug, Clone)]
pub struct RidgeSpec {
    pub direction: Vec<f64>,
    pub profile: ProfileSpec,
}

impl RidgeSpec {
    pub fn new(direction: Vec<f64>, profile: ProfileSpec) -> Result<Self> {
        if direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("direction component".into()));
        }
        if direction.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("ridge direction must be nonzero"));
        }
        Ok(RidgeSpec { direction, profile })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.profile.evaluate(dot(&self.direction, x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub samples: usize,
    pub seed: u64,
}

/// Measured approximation error over seeded box samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub sup_error: f64,
    pub mean_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// `max |L(a·x) − φ(a·x)|` for the univariate interpolant `L` on the same samples.
    pub knot_sup_error: f64,
    /// `max |net(x) − L(a·x)|`: error added by the multivariate construction.
    pub construction_gap: f64,
}

/// Which slots of the final layer hold what.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccumulatorLayout {
    /// Rising sum in slot 0.
    Single,
    /// Falling sum in slot 0, rising sum in slot 1.
    Split,
}

#[derive(Debug, Clone)]
pub struct RidgeNetwork {
    pub network: PeriodicCnn,
    pub knots: KnotApproximation,
    /// Ramps actually realized in layers, including the always-on base ramp.
    pub rising: ReluKnotSequence,
    pub falling: ReluKnotSequence,
    pub margin: f64,
    /// Number of factor layers computing `a·x + A`.
    pub linear_depth: usize,
    pub layout: AccumulatorLayout,
    pub report: ErrorReport,
}

/// Affine map `x ↦ M x + c` tracked through linear-regime layers.
struct AffineTrack {
    rows: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

impl AffineTrack {
    fn identity(d: usize) -> Self {
        let rows = (0..d)
            .map(|i| (0..d).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        AffineTrack {
            rows,
            offset: vec![0.0; d],
        }
    }

    fn convolve(&self, w: &Filter) -> Self {
        let d = self.offset.len();
        let mut rows = vec![vec![0.0; d]; d];
        let mut offset = vec![0.0; d];
        for (m, &wm) in w.coefficients().iter().enumerate() {
            for i in 0..d {
                let src = (i + d - m) % d;
                offset[i] += wm * self.offset[src];
                for (r, s) in rows[i].iter_mut().zip(&self.rows[src]) {
                    *r += wm * s;
                }
            }
        }
        AffineTrack { rows, offset }
    }

    fn bounds(&self, region: &CoordinateBox) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .zip(&self.offset)
            .map(|(row, c)| {
                let (lo, hi) = region.project_range(row);
                (lo + c, hi + c)
            })
            .unzip()
    }
}

/// Build a periodic CNN approximating `φ(a·x)` on `region` with `n_knots`
/// equispaced interpolation intervals and filters supported on `{0, …, s}`.
pub fn build_ridge_network(
    spec: &RidgeSpec,
    s: usize,
    n_knots: usize,
    region: &CoordinateBox,
    plan: SamplingPlan,
) -> Result<RidgeNetwork> {
    let a = &spec.direction;
    let d = a.len();
    if region.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: region.dim(),
        });
    }
    if !(2 <= s && s <= d) {
        return Err(Error::invalid(format!("need 2 <= s <= d, got s = {s}, d = {d}")));
    }
    if d < 3 {
        return Err(Error::invalid(
            "knot layers need width at least 3 to keep the carry apart from the accumulator",
        ));
    }

    // direction filter: W_k = a_{d-1-k}, so (W ∗ x)_{d-1} = a·x
    let big_w = Filter::new((0..d).map(|k| a[d - 1 - k]).collect(), d)?;
    let factored = factorize(&big_w, s, DIRECTION_FACTOR_TOLERANCE)?;
    let margin = shift_margin(a, region)?;
    let (y_lo, y_hi) = region.project_range(a);
    let profile = spec.profile.with_domain(y_lo, y_hi)?;
    let knots = build_knots(&profile, n_knots)?;

    let mut layers = Vec::new();
    let mut track = AffineTrack::identity(d);
    let linear_depth = factored.factors.len();
    for (j, factor) in factored.factors.iter().enumerate() {
        track = track.convolve(factor);
        let (lo, hi) = track.bounds(region);
        let bias = if j + 1 < linear_depth {
            let beta = lo.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
            track.offset.iter_mut().for_each(|c| *c -= beta);
            BiasVector::constant(beta, d, s)?
        } else {
            let kill = hi[..d - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
            let mut v = vec![kill; d];
            v[d - 1] = track.offset[d - 1] - margin;
            BiasVector::new(v, s)?
        };
        layers.push(Layer {
            filter: factor.clone(),
            bias,
        });
    }

    // base ramp absorbing the affine part, then the knot ramps
    let (alpha, beta) = (knots.slope, knots.intercept);
    let base_weight = f64::max(1.0, 2.0 * (alpha * margin - beta) / (y_lo + margin));
    let base = KnotPair {
        weight: base_weight,
        bias: (alpha - base_weight) * margin - beta,
    };
    let carry_coeff = alpha - base_weight;
    let mut rising = knots.rising.clone();
    rising.push(base)?;
    let rising = rising.into_ordered();
    let falling = knots.falling.clone();

    let ramp_ub = |pairs: &[KnotPair]| -> f64 { pairs.iter().map(|p| p.ramp(y_hi)).sum() };
    let mut readout = vec![0.0; d];
    readout[d - 1] = carry_coeff;
    let layout = if falling.is_empty() {
        for (k, pair) in rising.pairs().iter().enumerate() {
            let kill = pair.weight * ramp_ub(&rising.pairs()[..k]) + 1.0;
            let mut v = vec![kill; d];
            v[0] = pair.weight * margin + pair.bias;
            v[d - 1] = 0.0;
            layers.push(Layer {
                filter: Filter::new(vec![1.0, pair.weight], d)?,
                bias: BiasVector::new(v, s)?,
            });
        }
        readout[0] = 1.0;
        AccumulatorLayout::Single
    } else {
        if d < 5 {
            return Err(Error::invalid(format!(
                "profile needs both rising and falling ramps, which requires width >= 5 (got {d})"
            )));
        }
        for (k, pair) in falling.pairs().iter().enumerate() {
            let kill = pair.weight * ramp_ub(&falling.pairs()[..k]) + 1.0;
            let mut v = vec![kill; d];
            v[0] = pair.weight * margin + pair.bias;
            v[d - 1] = 0.0;
            layers.push(Layer {
                filter: Filter::new(vec![1.0, pair.weight], d)?,
                bias: BiasVector::new(v, s)?,
            });
        }
        let falling_ub = ramp_ub(falling.pairs());
        for (k, pair) in rising.pairs().iter().enumerate() {
            let kill = pair.weight * falling_ub.max(ramp_ub(&rising.pairs()[..k])) + 1.0;
            let mut v = vec![kill; d];
            v[0] = 0.0;
            v[1] = pair.weight * margin + pair.bias;
            v[d - 1] = 0.0;
            layers.push(Layer {
                filter: Filter::new(vec![1.0, 0.0, pair.weight], d)?,
                bias: BiasVector::new(v, s)?,
            });
        }
        readout[0] = -1.0;
        readout[1] = 1.0;
        AccumulatorLayout::Split
    };

    let network = PeriodicCnn::new(d, s, layers, readout)?;
    let report = measure_error(&network, spec, &knots, region, plan)?;
    log::info!(
        "ridge network: depth {} ({} linear + {} knot layers), sup error {:.3e}",
        network.depth(),
        linear_depth,
        network.depth() - linear_depth,
        report.sup_error
    );
    Ok(RidgeNetwork {
        network,
        knots,
        rising,
        falling,
        margin,
        linear_depth,
        layout,
        report,
    })
}

/// Sample the box and compare the network against the target and against the
/// univariate interpolant.
pub fn measure_error(
    network: &PeriodicCnn,
    spec: &RidgeSpec,
    knots: &KnotApproximation,
    region: &CoordinateBox,
    plan: SamplingPlan,
) -> Result<ErrorReport> {
    if plan.samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let points = region.sample_points(plan.samples, plan.seed);
    let errs = par::map(&points, |x| -> Result<(f64, f64, f64)> {
        let net = network.evaluate(x)?;
        let y = dot(&spec.direction, x);
        let target = spec.profile.evaluate(y);
        let interp = knots.evaluate(y);
        Ok(((net - target).abs(), (interp - target).abs(), (net - interp).abs()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut report = ErrorReport {
        sup_error: 0.0,
        mean_error: 0.0,
        n_samples: plan.samples,
        seed: plan.seed,
        knot_sup_error: 0.0,
        construction_gap: 0.0,
    };
    for (e, k, g) in &errs {
        report.sup_error = report.sup_error.max(*e);
        report.knot_sup_error = report.knot_sup_error.max(*k);
        report.construction_gap = report.construction_gap.max(*g);
        report.mean_error += e;
    }
    report.mean_error /= plan.samples as f64;
    Ok(report)
}
