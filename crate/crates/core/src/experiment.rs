//! Experiment drivers and result files.
//!
//! Two experiments are provided. `convergence` builds ridge networks for a
//! list of knot counts and records their sampled errors. `dichotomy` pairs an
//! approachable ridge (direction inside the lattice, error falls with `n`)
//! with the blocked torus ridge whose distance to any lattice-limited network
//! is bounded below.
//!
//! [`emit_outputs`] writes `results.csv`, `results.json` and one `.dat` file
//! per experiment id.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::circulant::Filter;
use crate::error::{Error, Result};
use crate::lattice::FrequencyLattice;
use crate::network::{build_ridge_network, BiasVector, CoordinateBox, Layer, PeriodicCnn, RidgeSpec, SamplingPlan};
use crate::ridge::{ProfileKind, ProfileSpec};
use crate::spectral::{empirical_spectrum, grid_l2_distance, lower_bound, ridge_spectrum, ModeFeatures, TorusRidge};

pub const CONVERGENCE: &str = "convergence";
pub const APPROACHABLE: &str = "dichotomy-approachable";
pub const BLOCKED: &str = "dichotomy-blocked";

/// Torus dimension of the blocked ridge.
pub const BLOCKED_DIM: usize = 3;
/// Width of the random candidate networks in the blocked case.
pub const CANDIDATE_WIDTH: usize = 6;

fn default_d() -> usize {
    6
}
fn default_s() -> usize {
    2
}
fn default_upper() -> f64 {
    1.0
}
fn default_knots() -> Vec<usize> {
    vec![8, 16, 32, 64]
}
fn default_grid() -> usize {
    32
}
fn default_out() -> PathBuf {
    PathBuf::from("results")
}
fn default_samples() -> usize {
    10_000
}
fn default_profile() -> ProfileKind {
    ProfileKind::Cos { frequency: 1.0 }
}
fn default_candidates() -> usize {
    50
}

/// Experiment parameters. `seed` has no default; everything else does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_s")]
    pub s: usize,
    /// The box is the cube `[lower, upper]^d`.
    #[serde(default)]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
    #[serde(default = "default_knots")]
    pub knots: Vec<usize>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_profile")]
    pub profile: ProfileKind,
    /// Ridge direction for `convergence`; drawn from the seed when absent.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    /// Number of random networks tried in the blocked case.
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    /// Record wall-clock time per row. Off by default so that results are
    /// byte-for-byte reproducible.
    #[serde(default)]
    pub record_runtime: bool,
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        ExperimentConfig {
            seed,
            d: default_d(),
            s: default_s(),
            lower: 0.0,
            upper: default_upper(),
            knots: default_knots(),
            grid: default_grid(),
            out_dir: default_out(),
            samples: default_samples(),
            profile: default_profile(),
            direction: None,
            candidates: default_candidates(),
            record_runtime: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2 <= self.s && self.s <= self.d) {
            return Err(Error::invalid(format!(
                "need 2 <= s <= d, got s = {}, d = {}",
                self.s, self.d
            )));
        }
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::invalid(format!("empty box [{}, {}]", self.lower, self.upper)));
        }
        if self.knots.is_empty() || self.knots.contains(&0) {
            return Err(Error::invalid("knot counts must be a nonempty list of positive integers"));
        }
        if self.grid < 2 {
            return Err(Error::invalid("grid needs at least 2 points per axis"));
        }
        if self.samples == 0 {
            return Err(Error::invalid("need at least one sample"));
        }
        if let Some(a) = &self.direction {
            if a.len() != self.d {
                return Err(Error::DimensionMismatch {
                    expected: self.d,
                    actual: a.len(),
                });
            }
        }
        Ok(())
    }

    pub fn region(&self) -> Result<CoordinateBox> {
        CoordinateBox::cube(self.d, self.lower, self.upper)
    }

    /// Configured direction, or a seeded random integer direction.
    pub fn resolve_direction(&self) -> Vec<f64> {
        self.direction.clone().unwrap_or_else(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            random_integer_direction(self.d, &mut rng)
        })
    }
}

/// Direction with entries in `{-1, 0, 1}` and `1 ≤ ‖a‖₁ ≤ 3`.
pub fn random_integer_direction<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(-1i32..=1) as f64).collect();
        let l1: f64 = a.iter().map(|v| v.abs()).sum();
        if (1.0..=3.0).contains(&l1) {
            return a;
        }
    }
}

/// One measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub parameters: BTreeMap<String, Value>,
    pub metric: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
    /// Failure message for rows recording a build error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ResultRow {
    fn new(experiment: &str, parameters: &BTreeMap<String, Value>, metric: &str, value: f64) -> Self {
        ResultRow {
            experiment: experiment.to_string(),
            parameters: parameters.clone(),
            metric: metric.to_string(),
            value: if value.is_finite() { value } else { f64::MAX },
            runtime_s: None,
            note: (!value.is_finite()).then(|| format!("non-finite value {value}")),
        }
    }

    fn failure(experiment: &str, parameters: &BTreeMap<String, Value>, err: &Error) -> Self {
        ResultRow {
            note: Some(err.to_string()),
            ..ResultRow::new(experiment, parameters, "build_failed", 1.0)
        }
    }

    /// Plot abscissa: `n` when present, else `candidate`.
    pub fn x(&self) -> Option<f64> {
        self.parameters
            .get("n")
            .or_else(|| self.parameters.get("candidate"))
            .and_then(Value::as_f64)
    }
}

fn timed<T>(on: bool, f: impl FnOnce() -> T) -> (T, Option<f64>) {
    let start = Instant::now();
    let out = f();
    (out, on.then(|| start.elapsed().as_secs_f64()))
}

/// Sampled error of ridge networks for each configured knot count.
fn ridge_error_rows(
    experiment: &str,
    config: &ExperimentConfig,
    direction: &[f64],
    extra: &BTreeMap<String, Value>,
) -> Result<Vec<ResultRow>> {
    let region = config.region()?;
    let (lo, hi) = region.project_range(direction);
    let profile = ProfileSpec::from_kind(&config.profile, lo.min(hi - 1.0), hi)?;
    let spec = RidgeSpec::new(direction.to_vec(), profile)?;
    let plan = SamplingPlan {
        samples: config.samples,
        seed: config.seed,
    };
    let mut knots = config.knots.clone();
    knots.sort_unstable();
    knots.dedup();

    let mut rows = Vec::new();
    for n in knots {
        let mut params = extra.clone();
        params.insert("d".into(), config.d.into());
        params.insert("s".into(), config.s.into());
        params.insert("n".into(), n.into());
        params.insert("seed".into(), config.seed.into());
        params.insert("samples".into(), config.samples.into());
        let (built, runtime) = timed(config.record_runtime, || {
            build_ridge_network(&spec, config.s, n, &region, plan)
        });
        match built {
            Ok(net) => {
                let r = &net.report;
                for (metric, v) in [
                    ("sup_error", r.sup_error),
                    ("mean_error", r.mean_error),
                    ("knot_sup_error", r.knot_sup_error),
                    ("construction_gap", r.construction_gap),
                    ("depth", net.network.depth() as f64),
                ] {
                    let mut row = ResultRow::new(experiment, &params, metric, v);
                    row.runtime_s = runtime;
                    rows.push(row);
                }
            }
            Err(e) => {
                log::warn!("{experiment}: n = {n} failed: {e}");
                rows.push(ResultRow::failure(experiment, &params, &e));
            }
        }
    }
    Ok(rows)
}

fn direction_value(a: &[f64]) -> Value {
    Value::String(
        a.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
    )
}

pub fn run_convergence_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let a = config.resolve_direction();
    let mut extra = BTreeMap::new();
    extra.insert("direction".into(), direction_value(&a));
    ridge_error_rows(CONVERGENCE, config, &a, &extra)
}

/// Random network on `CANDIDATE_WIDTH` slots, in its linear regime on the
/// trigonometric features, with `1..=3` layers of filters of length `≤ 3`.
pub fn random_linear_candidate<R: Rng>(rng: &mut R) -> Result<PeriodicCnn> {
    let depth = rng.random_range(1..=3);
    let filters = (0..depth)
        .map(|_| {
            let len = rng.random_range(1..=3);
            let mut c: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            c[0] += 1.0; // keep away from the zero filter
            Filter::new(c, CANDIDATE_WIDTH)
        })
        .collect::<Result<Vec<_>>>()?;
    let readout = (0..CANDIDATE_WIDTH).map(|_| rng.random_range(-1.0..1.0)).collect();
    PeriodicCnn::linear(CANDIDATE_WIDTH, CANDIDATE_WIDTH, filters, readout, 1.0)
}

/// Random ReLU network with constant biases in `[-0.5, 0.5]`.
pub fn random_relu_network<R: Rng>(width: usize, depth: usize, rng: &mut R) -> Result<PeriodicCnn> {
    let layers = (0..depth)
        .map(|_| -> Result<Layer> {
            let len = width.min(3);
            let c = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            Ok(Layer {
                filter: Filter::new(c, width)?,
                bias: BiasVector::constant(rng.random_range(-0.5..0.5), width, width)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let readout = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
    PeriodicCnn::new(width, width, layers, readout)
}

/// Input modes `e_1, 2e_1, 3e_1` of the blocked-case candidates.
pub fn axis_modes(dim: usize) -> Result<ModeFeatures> {
    ModeFeatures::new(
        dim,
        (1..=(CANDIDATE_WIDTH / 2) as i64)
            .map(|m| {
                let mut k = vec![0; dim];
                k[0] = m;
                k
            })
            .collect(),
    )
}

/// Grid `L²` distance between `ridge` and each of `count` random linear
/// candidates fed with axis-1 features.
pub fn candidate_errors(ridge: &TorusRidge, grid: usize, count: usize, seed: u64) -> Result<Vec<f64>> {
    let dim = ridge.dim();
    let modes = axis_modes(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let net = random_linear_candidate(&mut rng)?;
            let g = |x: &[f64]| {
                net.evaluate(&modes.features(x, CANDIDATE_WIDTH))
                    .unwrap_or(f64::NAN)
            };
            grid_l2_distance(|x| ridge.evaluate(x), g, dim, grid)
        })
        .collect()
}

pub fn run_dichotomy_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;

    // approachable: u = e_1 lies in the lattice of the axis-1 network
    let mut e1 = vec![0.0; config.d];
    e1[0] = 1.0;
    let mut extra = BTreeMap::new();
    extra.insert("direction".into(), direction_value(&e1));
    let mut rows = ridge_error_rows(APPROACHABLE, config, &e1, &extra)?;

    // blocked: u = e_1 + 2e_2 against the lattice <e_1>
    let ridge = TorusRidge::counterexample(BLOCKED_DIM)?;
    let lattice = FrequencyLattice::axes(BLOCKED_DIM, &[0])?;
    let mut params = BTreeMap::new();
    params.insert("torus_dim".into(), BLOCKED_DIM.into());
    params.insert("grid".into(), config.grid.into());
    params.insert("seed".into(), config.seed.into());

    let epsilon = lower_bound(&ridge, &lattice)?;
    let norm = ridge_spectrum(&ridge)?.l2_norm();
    rows.push(ResultRow::new(BLOCKED, &params, "epsilon", epsilon));
    rows.push(ResultRow::new(BLOCKED, &params, "l2_norm", norm));
    let (grid_eps, runtime) = timed(config.record_runtime, || -> Result<f64> {
        let s = empirical_spectrum(|x| ridge.evaluate(x), BLOCKED_DIM, config.grid)?;
        Ok(s.off_lattice_energy(&lattice)?.sqrt())
    });
    let mut row = ResultRow::new(BLOCKED, &params, "grid_epsilon", grid_eps?);
    row.runtime_s = runtime;
    rows.push(row);

    let (errors, runtime) = timed(config.record_runtime, || {
        candidate_errors(&ridge, config.grid, config.candidates, config.seed)
    });
    let errors = errors?;
    for (i, e) in errors.iter().enumerate() {
        let mut p = params.clone();
        p.insert("candidate".into(), i.into());
        rows.push(ResultRow::new(BLOCKED, &p, "l2_error", *e));
    }
    if let Some(min) = errors.iter().copied().reduce(f64::min) {
        let mut row = ResultRow::new(BLOCKED, &params, "min_candidate_error", min);
        row.runtime_s = runtime;
        rows.push(row);
    }
    Ok(rows)
}

fn format_parameters(p: &BTreeMap<String, Value>) -> String {
    p.iter()
        .map(|(k, v)| match v {
            Value::String(s) => format!("{k}={s}"),
            other => format!("{k}={other}"),
        })
        .collect::<Vec<_>>()
        .join(";")
}

pub const CSV_HEADER: [&str; 6] = ["experiment", "parameters", "metric", "value", "runtime_s", "note"];

/// CSV text for `rows`: header line, one line per row, LF endings.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            format_parameters(&r.parameters),
            r.metric.clone(),
            r.value.to_string(),
            r.runtime_s.map(|t| t.to_string()).unwrap_or_default(),
            r.note.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(format!("csv: {e}")))
}

/// Gnuplot-style columns: `x` then one column per metric ending in `_error`.
pub fn rows_to_dat(experiment: &str, rows: &[ResultRow]) -> String {
    let mut metrics: Vec<&str> = rows
        .iter()
        .filter(|r| r.experiment == experiment && r.metric.ends_with("_error") && r.x().is_some())
        .map(|r| r.metric.as_str())
        .collect();
    metrics.sort_unstable();
    metrics.dedup();
    let mut table: BTreeMap<u64, (f64, BTreeMap<&str, f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.experiment == experiment) {
        if let (Some(x), true) = (r.x(), metrics.contains(&r.metric.as_str())) {
            table
                .entry(x.to_bits())
                .or_insert_with(|| (x, BTreeMap::new()))
                .1
                .insert(r.metric.as_str(), r.value);
        }
    }
    let mut out = format!("# {experiment}\n# x {}\n", metrics.join(" "));
    let mut lines: Vec<_> = table.into_values().collect();
    lines.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (x, vals) in lines {
        out.push_str(&x.to_string());
        for m in &metrics {
            out.push(' ');
            out.push_str(&vals.get(m).map_or("nan".to_string(), |v| v.to_string()));
        }
        out.push('\n');
    }
    out
}

/// Write `results.csv`, `results.json` and `<experiment>.dat` files into
/// `dir`, creating it if needed. Returns the written paths.
pub fn emit_outputs(rows: &[ResultRow], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let write = |name: String, text: String| -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(path)
    };
    let mut paths = vec![
        write("results.csv".into(), rows_to_csv(rows)?)?,
        write("results.json".into(), serde_json::to_string_pretty(rows)? + "\n")?,
    ];
    let mut ids: Vec<&str> = rows.iter().map(|r| r.experiment.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    for id in ids {
        paths.push(write(format!("{id}.dat"), rows_to_dat(id, rows))?);
    }
    Ok(paths)
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            samples: 500,
            candidates: 3,
            grid: 16,
            ..ExperimentConfig::new(seed)
        }
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(ExperimentConfig::from_json(r#"{"d": 4}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"seed": 3, "d": 4, "knots": [4]}"#).unwrap();
        assert_eq!(c.s, 2);
        assert!(ExperimentConfig::from_json(r#"{"seed": 3, "bogus": 1}"#).is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(1);
        c.s = 7;
        assert!(c.validate().is_err());
        c.s = 1;
        assert!(c.validate().is_err());
        c.s = 2;
        c.knots = vec![];
        assert!(c.validate().is_err());
        c.knots = vec![4];
        c.direction = Some(vec![1.0]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn piecewise_linear_profile_is_exact() {
        let c = ExperimentConfig {
            profile: ProfileKind::ReluShift { shift: 0.5 },
            direction: Some(vec![1.0, -1.0, 0.0, 1.0]),
            d: 4,
            knots: vec![2, 4, 8],
            ..quick(5)
        };
        let rows = run_convergence_experiment(&c).unwrap();
        assert!(rows.iter().all(|r| r.note.is_none()));
        for r in rows.iter().filter(|r| r.metric == "sup_error") {
            assert!(r.value <= 1e-10, "{r:?}");
        }
    }

    #[test]
    fn cos_errors_decrease() {
        let rows = run_convergence_experiment(&quick(11)).unwrap();
        let sup: Vec<f64> = rows.iter().filter(|r| r.metric == "sup_error").map(|r| r.value).collect();
        assert_eq!(sup.len(), 4);
        assert!(sup.windows(2).all(|w| w[1] < w[0]), "{sup:?}");
    }

    #[test]
    fn single_row_smoke_run_is_fast() {
        let c = ExperimentConfig {
            d: 8,
            knots: vec![32],
            record_runtime: true,
            ..ExperimentConfig::new(8)
        };
        let start = Instant::now();
        let rows = run_convergence_experiment(&c).unwrap();
        assert!(start.elapsed().as_secs_f64() < 10.0);
        assert!(rows.iter().all(|r| r.runtime_s.is_some()));
    }

    #[test]
    fn build_failure_is_recorded() {
        // cos needs both accumulators, which do not fit in width 4
        let c = ExperimentConfig {
            d: 4,
            knots: vec![8],
            direction: Some(vec![1.0, 0.0, 0.0, 0.0]),
            ..quick(2)
        };
        let rows = run_convergence_experiment(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].metric, "build_failed");
        assert!(rows[0].note.is_some());
    }

    #[test]
    fn dichotomy_rows() {
        let rows = run_dichotomy_experiment(&quick(9)).unwrap();
        let get = |m: &str| rows.iter().find(|r| r.experiment == BLOCKED && r.metric == m).unwrap().value;
        assert_eq!(get("epsilon"), 1.0);
        assert_eq!(get("l2_norm"), 1.0);
        assert!((get("grid_epsilon") - 1.0).abs() < 1e-9);
        assert!(get("min_candidate_error") >= 0.999);

        let none = run_dichotomy_experiment(&ExperimentConfig { candidates: 0, ..quick(9) }).unwrap();
        assert!(none.iter().any(|r| r.metric == "epsilon"));
        assert!(!none.iter().any(|r| r.metric == "min_candidate_error"));
    }

    #[test]
    fn empty_rows_give_header_only() {
        assert_eq!(rows_to_csv(&[]).unwrap(), "experiment,parameters,metric,value,runtime_s,note\n");
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_outputs(&[], dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
    }

    #[test]
    fn outputs_round_trip() {
        let mut p = BTreeMap::new();
        p.insert("n".to_string(), Value::from(8));
        let a = ResultRow::new("alpha", &p, "sup_error", 0.25);
        let b = ResultRow::new("beta", &p, "sup_error", 0.5);
        let rows = vec![a, b];
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_outputs(&rows, dir.path()).unwrap();
        let dats: Vec<_> = paths.iter().filter(|p| p.extension().is_some_and(|e| e == "dat")).collect();
        assert_eq!(dats.len(), 2);
        assert_eq!(read_rows(&dir.path().join("results.json")).unwrap(), rows);
        let dat = fs::read_to_string(dir.path().join("alpha.dat")).unwrap();
        assert_eq!(dat, "# alpha\n# x sup_error\n8 0.25\n");
    }
}
