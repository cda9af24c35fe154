use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlpscm::experiment::{self, discover_seeds, metrics_csv, prepare, ExperimentConfig, Variant};
use nlpscm::metrics::{evaluate, mod_shd};
use nlpscm::{Dag, Error, Pag};
use serde_json::json;

#[derive(Parser)]
#[command(name = "nlpscm", version, about = "Sequential causal discovery with a budgeted expert, and confounded SEM estimation")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a fixture and write batch CSVs, the truth graph and a manifest.
    Simulate(Common),
    /// Run sequential discovery and write per-batch PAGs, a report and a metrics CSV.
    Discover {
        #[command(flatten)]
        common: Common,
        /// nlpscm, cumulative, vanilla, iterative or heuristics.
        #[arg(long)]
        variant: Option<String>,
        /// Number of consecutive seeds to run concurrently.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Fit the SEM parameters by EM, one run per prior.
    Estimate(Common),
    /// Score a PAG text file against a truth DAG (JSON) or PAG (text).
    Evaluate {
        pred: PathBuf,
        truth: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config; may name a `profile` to start from.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset to use when no config file is given.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures with the exit code they map to.
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) if e.is_external() => 3,
            Failure::Core(Error::Config(_) | Error::UnknownFixture(_) | Error::Io { .. }) => 1,
            Failure::Core(_) => 2,
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let cfg = match (&c.config, &c.profile) {
        (Some(_), Some(_)) => return Err(Failure::Usage("give either --config or --profile, not both".into())),
        (Some(p), None) => ExperimentConfig::load(p)?,
        (None, Some(name)) => ExperimentConfig::from_json(&json!({ "profile": name }).to_string())?,
        (None, None) => return Err(Failure::Usage("a --config file or --profile is required".into())),
    };
    let mut cfg = match c.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg.clone().with_seed(cfg.seed),
    };
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e).into())
}

fn mkdir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e).into())
}

fn simulate(c: &Common) -> Outcome {
    let cfg = load_config(c)?;
    if !cfg.data.is_empty() {
        return Err(Failure::Usage("simulate needs a fixture config without `data`".into()));
    }
    let prep = prepare(&cfg)?;
    let dir = &cfg.output_dir;
    mkdir(dir)?;
    let mut files = Vec::new();
    for (k, b) in prep.batches.iter().enumerate() {
        let name = format!("batch_{}.csv", k + 1);
        b.write_csv(&dir.join(&name))?;
        files.push(name);
    }
    let truth = prep.truth.as_ref().expect("fixture supplies a truth graph");
    write(&dir.join("truth.json"), &truth.to_json()?)?;
    let manifest = json!({
        "fixture": cfg.fixture,
        "seed": cfg.seed,
        "batches": files,
        "rows": cfg.batch_sizes,
        "truth": "truth.json",
    });
    write(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest).map_err(Error::from)?)?;
    println!("wrote {} batches to {}", files.len(), dir.display());
    Ok(())
}

fn discover(c: &Common, variant: Option<&str>, seeds: u64) -> Outcome {
    let mut cfg = load_config(c)?;
    if let Some(v) = variant {
        cfg.variant = Variant::parse(v)?;
    }
    if seeds == 0 {
        return Err(Failure::Usage("--seeds must be at least 1".into()));
    }
    let list: Vec<u64> = (0..seeds).map(|k| cfg.seed.wrapping_add(k)).collect();
    let results = discover_seeds(&cfg, &list);
    mkdir(&cfg.output_dir)?;
    let mut summary = String::from("seed,final_mod_shd,final_f1\n");
    for (seed, res) in list.iter().zip(results) {
        let report = res?;
        let dir = if seeds == 1 { cfg.output_dir.clone() } else { cfg.output_dir.join(format!("seed_{seed}")) };
        mkdir(&dir)?;
        for b in &report.batches {
            write(&dir.join(format!("pag_batch_{}.txt", b.batch)), &b.pag.to_text())?;
            for w in &b.trace.warnings {
                log::warn!("seed {seed}, batch {}: {w}", b.batch);
            }
        }
        write(&dir.join("report.json"), &report.to_json()?)?;
        write(&dir.join("metrics.csv"), &metrics_csv(&report))?;
        let last = report.batches.last().and_then(|b| b.metrics.as_ref());
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        summary.push_str(&format!("{seed},{},{}\n", cell(last.map(|m| m.mod_shd)), cell(last.map(|m| m.f1))));
    }
    if seeds > 1 {
        write(&cfg.output_dir.join("summary.csv"), &summary)?;
    }
    print!("{summary}");
    Ok(())
}

fn estimate(c: &Common) -> Outcome {
    let cfg = load_config(c)?;
    let report = experiment::estimate(&cfg)?;
    let dir = &cfg.output_dir;
    mkdir(dir)?;
    for (k, run) in report.runs.iter().enumerate() {
        let stem = format!("prior_{}", k + 1);
        write(&dir.join(format!("{stem}_params.json")), &serde_json::to_string_pretty(&run.fit.params).map_err(Error::from)?)?;
        if let Some(errs) = &run.fit.errors {
            write(&dir.join(format!("{stem}_errors.csv")), &nlpscm::em::error_trace_csv(errs))?;
            println!(
                "prior N({}, {}): final error {}",
                run.prior.mean,
                run.prior.variance,
                errs.last().copied().unwrap_or(f64::NAN)
            );
        }
    }
    write(&dir.join("estimate.json"), &serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    Ok(())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e).into())
}

fn evaluate_files(pred: &Path, truth: &Path, out: Option<&Path>) -> Outcome {
    let pred: Pag = read(pred)?.parse()?;
    let text = read(truth)?;
    let report = if text.trim_start().starts_with('{') {
        let dag = Dag::from_json(&text)?;
        serde_json::to_value(evaluate(&pred, &dag, None)?).map_err(Error::from)?
    } else {
        let t: Pag = text.parse()?;
        json!({ "mod_shd": mod_shd(&pred, &t)? })
    };
    let s = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    match out {
        Some(p) => write(p, &s)?,
        None => println!("{s}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let res = match &cli.cmd {
        Command::Simulate(c) => simulate(c),
        Command::Discover { common, variant, seeds } => discover(common, variant.as_deref(), *seeds),
        Command::Estimate(c) => estimate(c),
        Command::Evaluate { pred, truth, out } => evaluate_files(pred, truth, out.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Core(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}
