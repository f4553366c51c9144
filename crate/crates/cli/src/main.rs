use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use pcnn_core::experiment::{
    emit_outputs, random_relu_network, run_convergence_experiment, run_dichotomy_experiment,
    ExperimentConfig,
};
use pcnn_core::factorization::depth_bound_holds;
use pcnn_core::network::NetworkSpec;
use pcnn_core::spectral::{empirical_spectrum, ModeFeatures};
use pcnn_core::{
    build_ridge_network, factorize, lower_bound, ridge_spectrum, verify_relu_closure, Filter,
    FrequencyLattice, PeriodicCnn, ProfileKind, ProfileSpec, RidgeSpec, SamplingPlan, TorusRidge,
};

#[derive(Parser)]
#[command(name = "pcnn", version, about = "Periodic CNN construction and frequency-lattice checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a filter into a product of filters of length at most s+1.
    Factorize(FactorizeArgs),
    /// Build a ridge-approximating network and report its sampled error.
    BuildRidgeNet(ExpArgs),
    /// Evaluate a network stored as JSON.
    EvalNet(EvalArgs),
    /// Test whether an integer vector lies in a lattice.
    LatticeCheck(LatticeArgs),
    /// L2 floor for a cosine-sum torus ridge against a lattice.
    LowerBound(LowerBoundArgs),
    /// The blocked ridge cos(2πt)+cos(4πt) along e1+2e2 against <e1>.
    Counterexample(CounterexampleArgs),
    /// Off-lattice energy per layer of a network fed trigonometric inputs.
    ReluClosure(ClosureArgs),
    /// Error against knot count for a ridge network.
    Convergence(ExpArgs),
    /// Approachable vs blocked ridges.
    Dichotomy(ExpArgs),
}

#[derive(Args)]
struct FactorizeArgs {
    /// Coefficients w_0,…,w_M.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    filter: Vec<f64>,
    /// Period; defaults to the number of coefficients.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct ExpArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    knots: Option<Vec<usize>>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Profile name with optional parameter, e.g. `cos`, `abs:0.5`.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    direction: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<f64>,
    #[arg(long)]
    candidates: Option<usize>,
    /// Record wall-clock time per row (results are then not reproducible byte-for-byte).
    #[arg(long)]
    timing: bool,
}

impl ExpArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let mut v: Value = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                if let (Some(seed), Some(obj)) = (self.seed, v.as_object_mut()) {
                    obj.insert("seed".into(), seed.into());
                }
                serde_json::from_value::<ExperimentConfig>(v)
                    .with_context(|| format!("invalid config {}", path.display()))?
            }
            None => ExperimentConfig::new(
                self.seed
                    .ok_or_else(|| anyhow!("a seed is required: pass --seed or set it in --config"))?,
            ),
        };
        if let Some(v) = self.d {
            c.d = v;
        }
        if let Some(v) = self.s {
            c.s = v;
        }
        if let Some(v) = &self.knots {
            c.knots = v.clone();
        }
        if let Some(v) = self.grid {
            c.grid = v;
        }
        if let Some(v) = self.samples {
            c.samples = v;
        }
        if let Some(v) = &self.profile {
            c.profile = ProfileKind::parse(v)?;
        }
        if let Some(v) = &self.direction {
            c.direction = Some(v.clone());
        }
        if let Some(v) = self.lower {
            c.lower = v;
        }
        if let Some(v) = self.upper {
            c.upper = v;
        }
        if let Some(v) = self.candidates {
            c.candidates = v;
        }
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        }
        c.record_runtime |= self.timing;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Network JSON, or the output of `build-ridge-net`.
    #[arg(long)]
    net: PathBuf,
    /// Comma-separated input point; repeat for several.
    #[arg(long, allow_hyphen_values = true)]
    point: Vec<String>,
    /// JSON file with an array of points.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Args)]
struct LatticeArgs {
    #[arg(long)]
    d: usize,
    /// Generators separated by ';', entries by ',' (e.g. "1,0,0;0,2,0").
    #[arg(long, allow_hyphen_values = true)]
    generators: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    u: Vec<i64>,
}

#[derive(Args)]
struct LowerBoundArgs {
    /// Integer ridge direction.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "ridge")]
    direction: Vec<i64>,
    /// Ridge as JSON `{"direction": [..], "coefficients": [{"m", "re", "im"}]}`
    /// instead of `--direction`/`--terms`.
    #[arg(long, conflicts_with = "direction")]
    ridge: Option<PathBuf>,
    /// Cosine terms `m:a` of the profile Σ a·cos(2πmt).
    #[arg(long, default_value = "1:1", allow_hyphen_values = true)]
    terms: String,
    #[arg(long, allow_hyphen_values = true)]
    generators: String,
    /// Also estimate the bound from an N^d sample grid.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 32)]
    grid: usize,
}

#[derive(Args)]
struct ClosureArgs {
    /// Torus dimension.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Seed for the random network used when `--net` is absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    width: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Input frequencies, ';'-separated; defaults to e1.
    #[arg(long, allow_hyphen_values = true)]
    modes: Option<String>,
    /// Lattice generators, ';'-separated; defaults to e1.
    #[arg(long, allow_hyphen_values = true)]
    generators: Option<String>,
    /// Print `layer,fraction` CSV instead of JSON.
    #[arg(long)]
    csv: bool,
    /// Also write closure.json and closure.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_vectors(text: &str) -> Result<Vec<Vec<i64>>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<i64>().with_context(|| format!("bad integer '{v}'")))
                .collect()
        })
        .collect()
}

fn parse_terms(text: &str) -> Result<Vec<(i64, f64)>> {
    text.split(',')
        .map(|t| {
            let (m, a) = t
                .split_once(':')
                .ok_or_else(|| anyhow!("term '{t}' is not of the form m:a"))?;
            Ok((m.trim().parse()?, a.trim().parse()?))
        })
        .collect()
}

fn print_json(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load_network(path: &Path) -> Result<PeriodicCnn> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(inner) = v.get_mut("network") {
        v = inner.take();
    }
    let spec: NetworkSpec = serde_json::from_value(v).context("not a network description")?;
    Ok(PeriodicCnn::try_from(spec)?)
}

fn e1(dim: usize) -> Vec<i64> {
    let mut k = vec![0; dim];
    k[0] = 1;
    k
}

fn factorize_cmd(a: &FactorizeArgs) -> Result<Value> {
    let d = a.d.unwrap_or(a.filter.len());
    let w = Filter::new(a.filter.clone(), d)?;
    let r = factorize(&w, a.s, a.tol)?;
    let m = w.degree().unwrap_or(0);
    Ok(json!({
        "input": w.coefficients(),
        "period": d,
        "s": a.s,
        "factors": r.factor_coefficients(),
        "depth": r.depth,
        "residual": r.residual,
        "degree": m,
        "depth_bound_holds": depth_bound_holds(r.depth, m, a.s),
    }))
}

fn build_cmd(a: &ExpArgs) -> Result<Value> {
    let c = a.resolve()?;
    let n = *c.knots.iter().max().expect("validated nonempty");
    let direction = c.resolve_direction();
    let region = c.region()?;
    let (lo, hi) = region.project_range(&direction);
    let profile = ProfileSpec::from_kind(&c.profile, lo.min(hi - 1.0), hi)?;
    let spec = RidgeSpec::new(direction.clone(), profile)?;
    let plan = SamplingPlan {
        samples: c.samples,
        seed: c.seed,
    };
    let built = build_ridge_network(&spec, c.s, n, &region, plan)?;
    let network = NetworkSpec::from(built.network.clone());
    let out = json!({
        "direction": direction,
        "n": n,
        "depth": built.network.depth(),
        "linear_depth": built.linear_depth,
        "margin": built.margin,
        "layout": built.layout,
        "report": built.report,
        "network": network,
    });
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("network.json");
        fs::write(&path, serde_json::to_string_pretty(&network)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(out)
}

fn eval_cmd(a: &EvalArgs) -> Result<Value> {
    let net = load_network(&a.net)?;
    let mut points = a
        .point
        .iter()
        .map(|p| {
            p.split(',')
                .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad coordinate '{v}'")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = &a.points {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let more: Vec<Vec<f64>> = serde_json::from_str(&text).context("points must be an array of arrays")?;
        points.extend(more);
    }
    if points.is_empty() {
        bail!("no input points: pass --point or --points");
    }
    let values = net.evaluate_batch(&points)?;
    Ok(json!({ "values": values }))
}

fn lattice_cmd(a: &LatticeArgs) -> Result<Value> {
    let lattice = FrequencyLattice::from_generators(a.d, parse_vectors(&a.generators)?)?;
    let member = lattice.member(&a.u)?;
    Ok(json!({
        "u": a.u,
        "member": member,
        "rank": lattice.rank(),
        "hnf_basis": lattice.hnf_basis(),
    }))
}

fn lower_bound_cmd(a: &LowerBoundArgs) -> Result<Value> {
    let ridge = match &a.ridge {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let r: TorusRidge = serde_json::from_str(&text).context("not a ridge description")?;
            TorusRidge::new(r.direction, r.coefficients)?
        }
        None => TorusRidge::cosine_sum(a.direction.clone(), &parse_terms(&a.terms)?)?,
    };
    let dim = ridge.dim();
    let lattice = FrequencyLattice::from_generators(dim, parse_vectors(&a.generators)?)?;
    let epsilon = lower_bound(&ridge, &lattice)?;
    let mut out = json!({
        "direction": ridge.direction,
        "epsilon": epsilon,
        "l2_norm": ridge_spectrum(&ridge)?.l2_norm(),
        "direction_in_lattice": lattice.member(&ridge.direction)?,
    });
    if let Some(n) = a.grid {
        let s = empirical_spectrum(|x| ridge.evaluate(x), dim, n)?;
        out["grid"] = n.into();
        out["grid_epsilon"] = s.off_lattice_energy(&lattice)?.sqrt().into();
    }
    Ok(out)
}

fn counterexample_cmd(a: &CounterexampleArgs) -> Result<Value> {
    let ridge = TorusRidge::counterexample(a.d)?;
    let lattice = FrequencyLattice::axes(a.d, &[0])?;
    let spectrum = ridge_spectrum(&ridge)?;
    let grid = empirical_spectrum(|x| ridge.evaluate(x), a.d, a.grid)?;
    let modes: Vec<Value> = spectrum
        .iter()
        .map(|(k, c)| json!({ "k": k, "re": c.re, "im": c.im }))
        .collect();
    Ok(json!({
        "direction": ridge.direction,
        "lattice_generators": lattice.generators(),
        "spectrum": modes,
        "epsilon": lower_bound(&ridge, &lattice)?,
        "l2_norm": spectrum.l2_norm(),
        "grid": a.grid,
        "grid_epsilon": grid.off_lattice_energy(&lattice)?.sqrt(),
    }))
}

fn closure_cmd(a: &ClosureArgs) -> Result<String> {
    let net = match (&a.net, a.seed) {
        (Some(path), _) => load_network(path)?,
        (None, Some(seed)) => random_relu_network(a.width, a.depth, &mut ChaCha8Rng::seed_from_u64(seed))?,
        (None, None) => bail!("pass --net or --seed"),
    };
    let modes = match &a.modes {
        Some(m) => parse_vectors(m)?,
        None => vec![e1(a.d)],
    };
    let gens = match &a.generators {
        Some(g) => parse_vectors(g)?,
        None => vec![e1(a.d)],
    };
    let lattice = FrequencyLattice::from_generators(a.d, gens)?;
    let report = verify_relu_closure(&net, &lattice, a.grid, &ModeFeatures::new(a.d, modes)?)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("closure.json"), &text).context("writing closure.json")?;
        fs::write(dir.join("closure.csv"), report.to_csv()).context("writing closure.csv")?;
    }
    Ok(if a.csv { report.to_csv() } else { text })
}

fn experiment_cmd(a: &ExpArgs, dichotomy: bool) -> Result<Value> {
    let c = a.resolve()?;
    let rows = if dichotomy {
        run_dichotomy_experiment(&c)?
    } else {
        run_convergence_experiment(&c)?
    };
    let files = emit_outputs(&rows, &c.out_dir)?;
    let failed = rows.iter().filter(|r| r.note.is_some()).count();
    Ok(json!({
        "rows": rows.len(),
        "failed_rows": failed,
        "files": files,
    }))
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Factorize(a) => print_json(&factorize_cmd(a)?),
        Command::BuildRidgeNet(a) => print_json(&build_cmd(a)?),
        Command::EvalNet(a) => print_json(&eval_cmd(a)?),
        Command::LatticeCheck(a) => print_json(&lattice_cmd(a)?),
        Command::LowerBound(a) => print_json(&lower_bound_cmd(a)?),
        Command::Counterexample(a) => print_json(&counterexample_cmd(a)?),
        Command::ReluClosure(a) => {
            print!("{}", closure_cmd(a)?);
            Ok(())
        }
        Command::Convergence(a) => print_json(&experiment_cmd(a, false)?),
        Command::Dichotomy(a) => print_json(&experiment_cmd(a, true)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PCNN_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
