//! `combgen`: samplers and verification experiments for comb genealogies.
//!
//! Exit codes: 0 success, 1 a verification test failed, 2 invalid
//! configuration, 3 a resource cap or sampling budget was hit.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use combgen::cannings::{offspring_registry, BridgeFlow};
use combgen::conditional::{
    averaged_conditional_sample_with_budget, averaged_default_budget, limit_quenched_sample, quenched_registry,
    QuenchedConfig,
};
use combgen::cpp::sample_cpp;
use combgen::diffusion::{default_dt, feller_hit_time, simulate_feller_path, DEFAULT_MAX_STEPS};
use combgen::intensity::IntensityRegistry;
use combgen::kingman::LevelSampler;
use combgen::record::{read_jsonl, SampleRecord};
use combgen::rng::run_replicates;
use combgen::stats::{summary_table, write_ecdf_csv};
use combgen::verify::{experiment_registry, ExperimentParams};
use combgen::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use output::Format;

const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "combgen", version, about = "Comb genealogy samplers and verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize, Clone)]
struct Common {
    /// Master seed; replicate r uses substream r.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Draw the master seed from OS entropy (it is echoed in the header).
    #[arg(long, global = true, conflicts_with = "seed")]
    #[serde(skip)]
    fresh_seed: bool,
    /// Output file; stdout when absent and no output directory is set.
    #[arg(long, short, global = true)]
    #[serde(skip)]
    output: Option<PathBuf>,
    /// Default output directory.
    #[arg(long, global = true, env = "COMBGEN_OUTPUT_DIR")]
    #[serde(skip)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    #[serde(skip)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample Kingman combs down to a depth cut.
    KingmanComb(KingmanArgs),
    /// Sample coalescent point processes on a window.
    Cpp(CppArgs),
    /// Quenched conditional samples of n individuals within one depth-eps block.
    Quenched(QuenchedArgs),
    /// Averaged conditional samples (rejection on the pure-death chain).
    Averaged(AveragedArgs),
    /// Samples from the eps -> 0 limit of the quenched law.
    Limit(LimitArgs),
    /// Lineages and pair coalescence in a Cannings flow.
    Cannings(CanningsArgs),
    /// Euler-Maruyama hitting times of 0 by the Feller diffusion.
    Feller(FellerArgs),
    /// Run a named verification experiment and emit its test reports.
    Verify(VerifyArgs),
    /// Empirical CDF of one numeric field of a JSON-lines record file.
    Ecdf(EcdfArgs),
}

#[derive(Args, Serialize)]
struct KingmanArgs {
    /// Depth cut: atoms with height >= eps are kept.
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Remainder for the truncated tail: mean, zero or sampled-gamma.
    #[arg(long, default_value = "mean")]
    tail_mode: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Serialize)]
struct CppArgs {
    #[arg(long, default_value_t = 1.0)]
    window: f64,
    /// Generation floor: only atoms at least this high are sampled.
    #[arg(long, default_value_t = 1e-3)]
    floor: f64,
    /// Intensity: brownian, brownian-capped-1 or brownian-capped (with --cap).
    #[arg(long, default_value = "brownian")]
    intensity: String,
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Serialize)]
struct QuenchedArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    eps: f64,
    /// Levels below the floor are never sampled (default 0.01 eps).
    #[arg(long)]
    floor: Option<f64>,
    /// roulette, full-comb or rejection.
    #[arg(long, default_value = "roulette")]
    scheme: String,
    /// Shorthand for --scheme rejection.
    #[arg(long)]
    rejection: bool,
    #[arg(long, default_value = "mean")]
    tail_mode: String,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Serialize)]
struct AveragedArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    eps: f64,
    /// Proposal budget per sample (default: 50 / asymptotic acceptance).
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Serialize)]
struct LimitArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Serialize)]
struct CanningsArgs {
    /// Population size N.
    #[arg(long)]
    size: usize,
    /// Number of generations T.
    #[arg(long)]
    generations: usize,
    /// Offspring law: wright-fisher or moran.
    #[arg(long, default_value = "wright-fisher")]
    law: String,
    /// The two individuals of the last generation whose lineages are traced.
    #[arg(long, num_args = 2, default_values_t = [1, 2])]
    pair: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Serialize)]
struct FellerArgs {
    /// Initial state.
    #[arg(long, default_value_t = 1.0)]
    x: f64,
    /// Time step (default 1e-4 x).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    /// Also emit the whole trajectory.
    #[arg(long)]
    trajectory: bool,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// Experiment id, e.g. cvc2, cvc, teo1, petit-calcul, ui, id, cor-final, block-count.
    id: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    tail_mode: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Serialize)]
struct EcdfArgs {
    /// JSON-lines record file.
    #[arg(long)]
    input: PathBuf,
    /// Record field holding a number or an array of numbers.
    #[arg(long)]
    key: String,
    #[command(flatten)]
    common: Common,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("--{name} must be at least {min}, got {v}")))
    }
}

struct Run {
    seed: u64,
    config: Value,
    path: Option<PathBuf>,
    format: Format,
}

impl Run {
    fn new<A: Serialize>(subcommand: &str, args: &A, common: &Common, default_seed: u64, default_format: Format) -> Result<Self> {
        if common.threads == Some(0) {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        if let Some(t) = common.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| Error::ResourceCap(format!("thread pool: {e}")))?;
        }
        let seed = if common.fresh_seed {
            rand::random()
        } else {
            common.seed.unwrap_or(default_seed)
        };
        let format = common.format.unwrap_or(default_format);
        let mut params = serde_json::to_value(args)?;
        if let Value::Object(m) = &mut params {
            m.remove("common");
        }
        let config = json!({
            "subcommand": subcommand,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "format": format,
            "params": params,
        });
        let path = output::resolve_path(common.output.as_deref(), common.output_dir.as_deref(), subcommand, format);
        Ok(Run {
            seed,
            config,
            path,
            format,
        })
    }

    fn records(&self, records: &[SampleRecord]) -> Result<()> {
        let mut out = output::open(self.path.as_deref())?;
        output::write_records(&mut out, &self.config, records, self.format)
    }
}

fn kingman(a: &KingmanArgs) -> Result<()> {
    positive("eps", a.eps)?;
    at_least("reps", a.reps, 1)?;
    let levels = LevelSampler::by_name(&a.tail_mode)?;
    let run = Run::new("kingman-comb", a, &a.common, DEFAULT_SEED, Format::Jsonl)?;
    let combs = run_replicates(a.reps, run.seed, |rng, _| Ok(levels.kingman_comb(a.eps, rng)?.comb))?;
    if run.format == Format::Json && a.reps == 1 {
        let mut out = output::open(run.path.as_deref())?;
        return output::write_document(&mut out, &run.config, &combs[0]);
    }
    let records = combs
        .iter()
        .enumerate()
        .map(|(r, c)| {
            SampleRecord::new("kingman-comb", run.seed, r as u64)
                .with_eps(a.eps)
                .with_values(c)
        })
        .collect::<Result<Vec<_>>>()?;
    run.records(&records)
}

fn cpp(a: &CppArgs) -> Result<()> {
    positive("window", a.window)?;
    positive("floor", a.floor)?;
    at_least("reps", a.reps, 1)?;
    let intensity = IntensityRegistry::default().build(&a.intensity, a.cap)?;
    let run = Run::new("cpp", a, &a.common, DEFAULT_SEED, Format::Jsonl)?;
    let combs = run_replicates(a.reps, run.seed, |rng, _| Ok(sample_cpp(&intensity, a.window, a.floor, rng)?.comb))?;
    if run.format == Format::Json && a.reps == 1 {
        let mut out = output::open(run.path.as_deref())?;
        return output::write_document(&mut out, &run.config, &combs[0]);
    }
    let records = combs
        .iter()
        .enumerate()
        .map(|(r, c)| SampleRecord::new("cpp", run.seed, r as u64).with_values(c))
        .collect::<Result<Vec<_>>>()?;
    run.records(&records)
}

fn quenched(a: &QuenchedArgs) -> Result<()> {
    at_least("reps", a.reps, 1)?;
    let mut cfg = QuenchedConfig::new(a.n, a.eps).with_levels(LevelSampler::by_name(&a.tail_mode)?);
    if let Some(f) = a.floor {
        cfg = cfg.with_floor(f);
    }
    cfg.validate()?;
    let name = if a.rejection { "rejection" } else { a.scheme.as_str() };
    let scheme = quenched_registry().get(name)?;
    let run = Run::new("quenched", a, &a.common, DEFAULT_SEED, Format::Jsonl)?;
    let samples = run_replicates(a.reps, run.seed, |rng, _| Ok(scheme.sample(&cfg, rng)?.times()))?;
    let records = samples
        .iter()
        .enumerate()
        .map(|(r, s)| {
            Ok(SampleRecord::new(name, run.seed, r as u64)
                .with_n(a.n)
                .with_eps(a.eps)
                .with_value("block_length", s.block_length)
                .with_value("coalescence_times", s.coalescence_times.clone())
                .with_value("scaled_times", s.scaled_times()))
        })
        .collect::<Result<Vec<_>>>()?;
    run.records(&records)
}

fn averaged(a: &AveragedArgs) -> Result<()> {
    at_least("n", a.n, 2)?;
    positive("eps", a.eps)?;
    at_least("reps", a.reps, 1)?;
    if a.eps >= 1.0 {
        return Err(Error::InvalidParameter(format!("--eps must be below 1, got {}", a.eps)));
    }
    let budget = a.budget.unwrap_or_else(|| averaged_default_budget(a.n, a.eps));
    let run = Run::new("averaged", a, &a.common, DEFAULT_SEED, Format::Jsonl)?;
    let samples = run_replicates(a.reps, run.seed, |rng, _| {
        averaged_conditional_sample_with_budget(a.n, a.eps, budget, rng)
    })?;
    let records = samples
        .iter()
        .enumerate()
        .map(|(r, s)| {
            Ok(SampleRecord::new("averaged", run.seed, r as u64)
                .with_n(a.n)
                .with_eps(a.eps)
                .with_value("ranked_times", s.ranked_times.clone())
                .with_value("proposals", s.proposals))
        })
        .collect::<Result<Vec<_>>>()?;
    run.records(&records)
}

fn limit(a: &LimitArgs) -> Result<()> {
    at_least("n", a.n, 1)?;
    at_least("reps", a.reps, 1)?;
    let run = Run::new("limit", a, &a.common, DEFAULT_SEED, Format::Jsonl)?;
    let samples = run_replicates(a.reps, run.seed, |rng, _| limit_quenched_sample(a.n, rng))?;
    let records = samples
        .iter()
        .enumerate()
        .map(|(r, s)| {
            Ok(SampleRecord::new("limit", run.seed, r as u64)
                .with_n(a.n)
                .with_value("kill_length", s.kill_length)
                .with_value("spacings", s.spacings.clone())
                .with_value("sups", s.sups.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    run.records(&records)
}

fn cannings(a: &CanningsArgs) -> Result<()> {
    at_least("size", a.size, 2)?;
    at_least("generations", a.generations, 1)?;
    at_least("reps", a.reps, 1)?;
    let (x, y) = (a.pair[0], a.pair[1]);
    if x == y || x < 1 || y < 1 || x > a.size || y > a.size {
        return Err(Error::InvalidParameter(format!(
            "--pair needs two distinct individuals in 1..={}, got {x} {y}",
            a.size
        )));
    }
    let law = offspring_registry().get(&a.law)?;
    let run = Run::new("cannings", a, &a.common, DEFAULT_SEED, Format::Jsonl)?;
    let rows = run_replicates(a.reps, run.seed, |rng, _| {
        let flow = BridgeFlow::sample(a.size, a.generations, law.as_ref(), rng)?;
        Ok((
            flow.pair_coalescence_generation(x, y)?,
            flow.lineage(a.generations, x)?,
            flow.lineage(a.generations, y)?,
        ))
    })?;
    let records = rows
        .into_iter()
        .enumerate()
        .map(|(r, (g, lx, ly))| {
            SampleRecord::new(law.name(), run.seed, r as u64)
                .with_value("coalescence_generation", g.map_or(Value::Null, Value::from))
                .with_value("lineage_x", lx)
                .with_value("lineage_y", ly)
        })
        .collect::<Vec<_>>();
    run.records(&records)
}

fn feller(a: &FellerArgs) -> Result<()> {
    positive("x", a.x)?;
    let dt = a.dt.unwrap_or_else(|| default_dt(a.x));
    positive("dt", dt)?;
    at_least("reps", a.reps, 1)?;
    let run = Run::new("feller", a, &a.common, DEFAULT_SEED, Format::Jsonl)?;
    let records = run_replicates(a.reps, run.seed, |rng, r| {
        let rec = SampleRecord::new("feller", run.seed, r).with_value("dt", dt);
        if a.trajectory {
            let p = simulate_feller_path(a.x, dt, a.max_steps, true, rng)?;
            rec.with_values(&p)
        } else {
            rec.with_values(&feller_hit_time(a.x, dt, a.max_steps, rng)?)
        }
    })?;
    run.records(&records)
}

fn verify(a: &VerifyArgs) -> Result<bool> {
    let experiment = experiment_registry().get(&a.id)?;
    if let Some(n) = a.n {
        at_least("n", n, 1)?;
    }
    if let Some(r) = a.reps {
        at_least("reps", r, 100)?;
    }
    for (name, v) in [("eps", a.eps), ("floor", a.floor)] {
        if let Some(v) = v {
            positive(name, v)?;
        }
    }
    if let Some(t) = &a.tail_mode {
        LevelSampler::by_name(t)?;
    }
    if let Some(s) = &a.scheme {
        quenched_registry().get(s)?;
    }
    let run = Run::new("verify", a, &a.common, experiment.default_seed(), Format::Json)?;
    let params = ExperimentParams {
        n: a.n,
        eps: a.eps,
        reps: a.reps,
        seed: Some(run.seed),
        floor: a.floor,
        tail_mode: a.tail_mode.clone(),
        scheme: a.scheme.clone(),
    };
    let reports = experiment.run(&params)?;
    eprint!("{}", summary_table(&reports));
    let mut out = output::open(run.path.as_deref())?;
    output::write_reports(&mut out, &run.config, &reports, run.format)?;
    Ok(reports.iter().all(|r| r.pass))
}

fn ecdf(a: &EcdfArgs) -> Result<()> {
    let file = std::fs::File::open(&a.input)?;
    let records = read_jsonl(std::io::BufReader::new(file))?;
    let values: Vec<f64> = records.iter().flat_map(|r| r.numbers(&a.key)).collect();
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("no numeric field {:?} in {}", a.key, a.input.display())));
    }
    let path = output::resolve_path(a.common.output.as_deref(), a.common.output_dir.as_deref(), "ecdf", Format::Csv);
    let out = output::open(path.as_deref())?;
    write_ecdf_csv(&values, out)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_resource_limit() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::KingmanComb(a) => kingman(a).map(|_| true),
        Command::Cpp(a) => cpp(a).map(|_| true),
        Command::Quenched(a) => quenched(a).map(|_| true),
        Command::Averaged(a) => averaged(a).map(|_| true),
        Command::Limit(a) => limit(a).map(|_| true),
        Command::Cannings(a) => cannings(a).map(|_| true),
        Command::Feller(a) => feller(a).map(|_| true),
        Command::Verify(a) => verify(a),
        Command::Ecdf(a) => ecdf(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
