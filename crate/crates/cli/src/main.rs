use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use concatqec::channels::{parse_noise, PauliChannel};
use concatqec::estimator::ChannelEstimate;
use concatqec::pipeline::{plan_and_run, run_level, CodeKind, CodeSpec, PipelinePolicy};
use concatqec::report::{curve_csv, format_table, RunRecords};
use concatqec::train::{train_code, TrainConfig, TrainedCode};
use serde::{Deserialize, Serialize};

const THREADS_VAR: &str = "CONCATQEC_THREADS";

#[derive(Parser)]
#[command(name = "concatqec", version, about = "Level-wise concatenation of learned and stabilizer codes under Pauli noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the effective channel of one code level.
    Estimate(EstimateArgs),
    /// Train a variational ((n,2)) code.
    Train(TrainArgs),
    /// Run the concatenation pipeline and write reports.
    Concat(ConcatArgs),
    /// Compare the qubit cost of two concatenation runs.
    Report(ReportArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Registered code id (rep3, perfect5) or path to a trained code.
    #[arg(long)]
    code: String,
    /// NAME:P (dep, adep, bit, yflip) or X,Y,Z.
    #[arg(long)]
    noise: String,
    /// Directory for estimate.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    noise: String,
    /// Recovery ancillas.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file; its [train] table supplies defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for code.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ConcatArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    max_levels: Option<usize>,
    /// Variational sizes to screen, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Use only the fallback code at every level.
    #[arg(long)]
    stabilizer_only: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory (or records file) of the hybrid run.
    hybrid: PathBuf,
    /// Run directory (or records file) of the baseline run.
    baseline: PathBuf,
    /// Worst-case infidelity to compare at; defaults to the hybrid's final level.
    #[arg(long)]
    target: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    noise: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    policy: PipelinePolicy,
    train: TrainConfig,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_code(reference: &str) -> Result<CodeSpec> {
    let path = Path::new(reference);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let code = TrainedCode::from_json(&text).with_context(|| format!("invalid trained code {}", path.display()))?;
        return Ok(CodeSpec::variational(code));
    }
    Ok(CodeSpec::stabilizer(reference)?)
}

fn print_estimate(estimate: &ChannelEstimate) {
    println!("{}", estimate.probs);
    println!("worst-case infidelity {:.6e}", estimate.worst_case_infidelity());
    if !estimate.is_pauli() {
        println!("note: non-Pauli residual {:.2e}", estimate.residual);
    }
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let code = load_code(&args.code)?;
    let noise = parse_noise(&args.noise)?;
    let estimate = run_level(&code, &noise)?;
    print_estimate(&estimate);
    if let Some(dir) = args.out {
        write(&dir.join("estimate.json"), &(serde_json::to_string_pretty(&estimate)? + "\n"))?;
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed.or(config.seed) {
        config.train.seed = seed;
    }
    if let Some(r) = args.r {
        config.train.ancillas = r;
    }
    let noise = parse_noise(&args.noise)?;
    let code = train_code(args.n, &noise, 1, &config.train, None)?;
    let losses = &code.losses;
    println!("distinguishability loss {:.6e}", losses.distinguishability);
    println!("average fidelity loss {:.6e}", losses.average_fidelity);
    println!("worst fidelity loss {:.6e}", losses.worst_fidelity);
    let path = args.out.join("code.json");
    write(&path, &code.to_json()?)?;
    let estimate = run_level(&CodeSpec::variational(code), &noise)?;
    print_estimate(&estimate);
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct Metadata {
    version: &'static str,
    started_unix_seconds: u64,
    elapsed_seconds: f64,
    threads: usize,
}

fn concat(args: ConcatArgs) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    let noise_spec = args.noise.or(config.noise.take()).context("no noise given (use --noise or `noise` in the config)")?;
    let noise: PauliChannel = parse_noise(&noise_spec)?;
    if let Some(seed) = args.seed.or(config.seed) {
        config.train.seed = seed;
    }
    let mut policy = config.policy;
    if let Some(tau) = args.tau {
        policy.tau = tau;
    }
    if let Some(target) = args.target {
        policy.target = target;
    }
    if let Some(max_levels) = args.max_levels {
        policy.max_levels = max_levels;
    }
    if let Some(sizes) = args.sizes {
        policy.sizes = sizes;
    }
    if args.stabilizer_only {
        policy.sizes.clear();
    }
    let out = args.out.or(config.out).unwrap_or_else(|| PathBuf::from("out"));

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let levels = plan_and_run(&noise, &policy, &config.train)?;
    let run = RunRecords { noise, policy, train: config.train, levels };

    for record in &run.levels {
        if let (CodeKind::Variational, Some(code)) = (record.code.kind, &record.code.trained) {
            write(&out.join("artifacts").join(format!("level{}.json", record.level)), &code.to_json()?)?;
        }
    }
    let table = format_table(&run.levels);
    write(&out.join("records.json"), &run.to_json()?)?;
    write(&out.join("table.txt"), &table)?;
    write(&out.join("curve.csv"), &curve_csv(&run))?;
    let metadata = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        started_unix_seconds: started,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    write(&out.join("metadata.json"), &(serde_json::to_string_pretty(&metadata)? + "\n"))?;

    print!("{table}");
    let qubits = run.levels.last().map_or(1, |r| r.cumulative_qubits);
    println!("levels {}, qubits {}, worst-case infidelity {:.3e}", run.levels.len(), qubits, run.final_infidelity());
    println!("wrote {}", out.display());
    Ok(())
}

fn load_run(path: &Path) -> Result<RunRecords> {
    let file = if path.is_dir() { path.join("records.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).with_context(|| format!("cannot read {}", file.display()))?;
    RunRecords::from_json(&text).with_context(|| format!("invalid records file {}", file.display()))
}

fn report(args: ReportArgs) -> Result<()> {
    let hybrid = load_run(&args.hybrid)?;
    let baseline = load_run(&args.baseline)?;
    if hybrid.noise.probs() != baseline.noise.probs() {
        bail!("incompatible runs: initial channels {} and {} differ", hybrid.noise, baseline.noise);
    }
    let target = args.target.unwrap_or_else(|| hybrid.final_infidelity());
    let mut qubits = [0.0; 2];
    for (slot, (name, run)) in qubits.iter_mut().zip([("hybrid", &hybrid), ("baseline", &baseline)]) {
        *slot = run.qubits_at(target).map_err(|_| {
            anyhow::anyhow!(
                "{name} run does not reach worst-case infidelity {target:.3e} (final {:.3e} after {} levels)",
                run.final_infidelity(),
                run.levels.len()
            )
        })?;
    }
    println!("target worst-case infidelity {target:.3e}");
    println!("hybrid qubits {:.1}", qubits[0]);
    println!("baseline qubits {:.1} (log-log interpolation between levels)", qubits[1]);
    println!("overhead ratio {:.1}", qubits[1] / qubits[0]);
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().with_context(|| format!("{THREADS_VAR} must be a positive integer, got `{value}`"))?;
    if threads == 0 {
        bail!("{THREADS_VAR} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    match cli.command {
        Command::Estimate(args) => estimate(args),
        Command::Train(args) => train(args),
        Command::Concat(args) => concat(args),
        Command::Report(args) => report(args),
    }
}
