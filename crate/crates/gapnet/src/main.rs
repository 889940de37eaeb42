//! Command-line front end: dataset generation, training, evaluation,
//! solver benchmarks, and hyperparameter sweeps. Exit code 0 on success;
//! any failure prints a single `error: …` line to stderr and exits 1.
//! Progress goes to stderr so stdout stays clean for scripting.

use clap::{Args, Parser, Subcommand};
use gapnet::dataset::Dataset;
use gapnet::error::{Error, Result};
use gapnet::loss::PenaltySign;
use gapnet::nn::{load_checkpoint, save_checkpoint};
use gapnet::train::{
    benchmark, evaluate, sweep_with, train_with, SweepGrid, TrainConfig, write_benchmark_csv,
    write_sweep_csv,
};
use gapnet::wireless::{default_quota, generate_dataset, InterferenceMode, NetworkConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "gapnet",
    version,
    about = "Neural and exact solvers for user-association assignment problems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample wireless networks and write a JSON-lines dataset
    GenData(GenDataArgs),
    /// Train an assignment network on a dataset and save a checkpoint
    Train(TrainArgs),
    /// Evaluate a checkpoint against the exact oracle on a test dataset
    Eval(EvalArgs),
    /// Solve a dataset with the exact oracle and the greedy baseline
    Benchmark(BenchmarkArgs),
    /// Train and evaluate across a hyperparameter grid
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Number of users I
    #[arg(long)]
    users: usize,
    /// Number of base stations J
    #[arg(long)]
    bs: usize,
    /// RF base stations (default: J split evenly, RF takes the odd one)
    #[arg(long = "rf-bs")]
    rf_bs: Option<usize>,
    /// Sub-THz base stations (default: J - rf_bs)
    #[arg(long = "thz-bs")]
    thz_bs: Option<usize>,
    /// Per-BS user quota (default: ceil(I/J))
    #[arg(long)]
    quota: Option<usize>,
    /// Number of examples to generate
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset path (JSON lines)
    #[arg(long)]
    out: PathBuf,
    /// Cell radius in meters
    #[arg(long)]
    radius: Option<f64>,
    /// RF carrier frequency in Hz
    #[arg(long = "f-rf")]
    f_rf: Option<f64>,
    /// Sub-THz carrier frequency in Hz
    #[arg(long = "f-thz")]
    f_thz: Option<f64>,
    /// RF path-loss exponent
    #[arg(long)]
    alpha: Option<f64>,
    /// Molecular absorption coefficient in 1/m
    #[arg(long = "k-abs")]
    k_abs: Option<f64>,
    /// RF transmit power in watts
    #[arg(long = "p-rf")]
    p_rf: Option<f64>,
    /// Sub-THz transmit power in watts
    #[arg(long = "p-thz")]
    p_thz: Option<f64>,
    /// Main-lobe transmit gain in dB
    #[arg(long = "g-tx-max-db", allow_negative_numbers = true)]
    g_tx_max_db: Option<f64>,
    /// Main-lobe receive gain in dB
    #[arg(long = "g-rx-max-db", allow_negative_numbers = true)]
    g_rx_max_db: Option<f64>,
    /// Side-lobe transmit gain in dB
    #[arg(long = "g-tx-min-db", allow_negative_numbers = true)]
    g_tx_min_db: Option<f64>,
    /// Side-lobe receive gain in dB
    #[arg(long = "g-rx-min-db", allow_negative_numbers = true)]
    g_rx_min_db: Option<f64>,
    /// Transmit beamwidth in radians
    #[arg(long = "beamwidth-tx")]
    beamwidth_tx: Option<f64>,
    /// Receive beamwidth in radians
    #[arg(long = "beamwidth-rx")]
    beamwidth_rx: Option<f64>,
    /// RF antenna gain in dB
    #[arg(long = "rf-gain-db", allow_negative_numbers = true)]
    rf_gain_db: Option<f64>,
    /// Noise power in dBm
    #[arg(long = "noise-dbm", allow_negative_numbers = true)]
    noise_dbm: Option<f64>,
    /// Bandwidth in Hz (1 for normalized rates)
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Minimum user-BS distance in meters
    #[arg(long = "min-distance")]
    min_distance: Option<f64>,
    /// Interference aggregation: per_user_other_bs or as_printed_all_pairs
    #[arg(long = "interference-mode")]
    interference_mode: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset (JSON lines)
    #[arg(long)]
    data: PathBuf,
    /// Penalty weight on capacity overloads
    #[arg(long, default_value_t = 6.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    /// Comma-separated layer widths including the I·J endpoints
    /// (default: a built-in stack for 4×4 or 16×4 datasets)
    #[arg(long)]
    dims: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output checkpoint path (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Capacity-penalty sign: corrected (default) or printed
    #[arg(long = "penalty-sign", default_value = "corrected")]
    penalty_sign: String,
    /// Skip feature standardization
    #[arg(long = "no-normalize")]
    no_normalize: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Model checkpoint (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Test dataset (JSON lines)
    #[arg(long)]
    data: PathBuf,
    /// Output metrics path (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Dataset to solve (JSON lines)
    #[arg(long)]
    data: PathBuf,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Training dataset (JSON lines)
    #[arg(long)]
    data: PathBuf,
    /// Test dataset (JSON lines)
    #[arg(long)]
    test: PathBuf,
    /// Comma-separated λ values
    #[arg(long, value_delimiter = ',', default_value = "6")]
    lambda: Vec<f64>,
    /// Comma-separated learning rates
    #[arg(long, value_delimiter = ',', default_value = "0.0001")]
    lr: Vec<f64>,
    /// Comma-separated epoch counts
    #[arg(long, value_delimiter = ',', default_value = "50")]
    epochs: Vec<usize>,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    /// Comma-separated layer widths including the I·J endpoints
    #[arg(long)]
    dims: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "penalty-sign", default_value = "corrected")]
    penalty_sign: String,
    #[arg(long = "no-normalize")]
    no_normalize: bool,
    /// Models trained per grid point (metrics averaged over repeats)
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn parse_dims(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidValue(format!("layer width {s:?} in --dims")))
        })
        .collect()
}

/// Built-in layer stacks for the two studied scenarios, keyed by I·J.
fn default_dims(width: usize) -> Result<Vec<usize>> {
    match width {
        16 => Ok(vec![16, 64, 128, 256, 512, 1024, 2048, 16]),
        64 => Ok(vec![64, 128, 256, 512, 1024, 2048, 2048, 4096, 4096, 64]),
        other => Err(Error::InvalidValue(format!(
            "no built-in layer stack for feature width {other}; pass --dims"
        ))),
    }
}

fn resolve_dims(dims: &Option<String>, dataset: &Dataset) -> Result<Vec<usize>> {
    match dims {
        Some(text) => parse_dims(text),
        None => default_dims(dataset.n_items() * dataset.n_knapsacks()),
    }
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let base = NetworkConfig::with_network_size(args.users, args.bs);
    let n_rf_bs = match (args.rf_bs, args.thz_bs) {
        (Some(rf), _) => rf,
        (None, Some(thz)) => args.bs.checked_sub(thz).ok_or_else(|| {
            Error::InvalidValue(format!("--thz-bs {thz} exceeds --bs {}", args.bs))
        })?,
        (None, None) => base.n_rf_bs,
    };
    let n_thz_bs = match args.thz_bs {
        Some(thz) => thz,
        None => args.bs.checked_sub(n_rf_bs).ok_or_else(|| {
            Error::InvalidValue(format!("--rf-bs {n_rf_bs} exceeds --bs {}", args.bs))
        })?,
    };
    let interference_mode = match &args.interference_mode {
        Some(s) => s.parse::<InterferenceMode>()?,
        None => base.interference_mode,
    };
    let cfg = NetworkConfig {
        n_users: args.users,
        n_bs: args.bs,
        n_rf_bs,
        n_thz_bs,
        bs_quota: args.quota.unwrap_or(default_quota(args.users, args.bs)),
        radius: args.radius.unwrap_or(base.radius),
        f_rf: args.f_rf.unwrap_or(base.f_rf),
        f_thz: args.f_thz.unwrap_or(base.f_thz),
        alpha: args.alpha.unwrap_or(base.alpha),
        k_abs: args.k_abs.unwrap_or(base.k_abs),
        p_rf: args.p_rf.unwrap_or(base.p_rf),
        p_thz: args.p_thz.unwrap_or(base.p_thz),
        g_tx_max_db: args.g_tx_max_db.unwrap_or(base.g_tx_max_db),
        g_rx_max_db: args.g_rx_max_db.unwrap_or(base.g_rx_max_db),
        g_tx_min_db: args.g_tx_min_db.unwrap_or(base.g_tx_min_db),
        g_rx_min_db: args.g_rx_min_db.unwrap_or(base.g_rx_min_db),
        beamwidth_tx: args.beamwidth_tx.unwrap_or(base.beamwidth_tx),
        beamwidth_rx: args.beamwidth_rx.unwrap_or(base.beamwidth_rx),
        rf_gain_db: args.rf_gain_db.unwrap_or(base.rf_gain_db),
        noise_power_dbm: args.noise_dbm.unwrap_or(base.noise_power_dbm),
        bandwidth: args.bandwidth.unwrap_or(base.bandwidth),
        min_distance: args.min_distance.unwrap_or(base.min_distance),
        interference_mode,
    };
    let ds = generate_dataset(&cfg, args.n, args.seed)?;
    ds.write_jsonl(&args.out)?;
    eprintln!(
        "wrote {} {}x{} examples to {}",
        ds.len(),
        cfg.n_users,
        cfg.n_bs,
        args.out.display()
    );
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let ds = Dataset::read_jsonl(&args.data)?;
    let cfg = TrainConfig {
        lambda: args.lambda,
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        layer_dims: resolve_dims(&args.dims, &ds)?,
        seed: args.seed,
        normalize_features: !args.no_normalize,
        penalty_sign: args.penalty_sign.parse::<PenaltySign>()?,
    };
    let epochs = cfg.epochs;
    let (model, _history) = train_with(&ds, &cfg, |epoch, loss| {
        eprintln!("epoch {}/{epochs} loss {loss:.6}", epoch + 1);
    })?;
    save_checkpoint(&model, &args.out)?;
    eprintln!("saved checkpoint to {}", args.out.display());
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let model = load_checkpoint(&args.model)?;
    let test = Dataset::read_jsonl(&args.data)?;
    let metrics = evaluate(&model, &test, gapnet::gap::DEFAULT_EPS)?;
    let json = serde_json::to_string_pretty(&metrics)
        .map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&args.out, json + "\n").map_err(|e| Error::io(&args.out, e))?;
    println!(
        "mean_sum_rate={} pct_of_optimal={:.2} avg_violation_prob={:.4} dnn_ms={:.4} oracle_ms={:.4}",
        metrics.mean_sum_rate,
        metrics.pct_of_optimal,
        metrics.avg_violation_prob,
        metrics.mean_inference_time * 1e3,
        metrics.mean_oracle_time * 1e3
    );
    Ok(())
}

fn benchmark_cmd(args: BenchmarkArgs) -> Result<()> {
    let ds = Dataset::read_jsonl(&args.data)?;
    let rows = benchmark(&ds)?;
    write_benchmark_csv(&rows, &args.out)?;
    let n = rows.len() as f64;
    let oracle: f64 = rows.iter().map(|r| r.oracle_objective).sum::<f64>() / n;
    let greedy: f64 = rows.iter().map(|r| r.greedy_objective).sum::<f64>() / n;
    println!(
        "examples={} mean_oracle={oracle} mean_greedy={greedy} greedy_pct={:.2}",
        rows.len(),
        100.0 * greedy / oracle
    );
    Ok(())
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let ds = Dataset::read_jsonl(&args.data)?;
    let test = Dataset::read_jsonl(&args.test)?;
    let base = TrainConfig {
        lambda: args.lambda[0],
        learning_rate: args.lr[0],
        epochs: args.epochs[0],
        batch_size: args.batch,
        layer_dims: resolve_dims(&args.dims, &ds)?,
        seed: args.seed,
        normalize_features: !args.no_normalize,
        penalty_sign: args.penalty_sign.parse::<PenaltySign>()?,
    };
    let grid = SweepGrid {
        lambdas: args.lambda.clone(),
        learning_rates: args.lr.clone(),
        epochs: args.epochs.clone(),
        repeats: args.repeats,
    };
    let total = grid.lambdas.len() * grid.learning_rates.len() * grid.epochs.len();
    let rows = sweep_with(&ds, &test, &grid, &base, |idx, row| {
        eprintln!(
            "grid point {}/{total}: lambda={} lr={} epochs={} -> pct_of_optimal={:.2} violation={:.4}",
            idx + 1,
            row.lambda,
            row.lr,
            row.epochs,
            row.metrics.pct_of_optimal,
            row.metrics.avg_violation_prob
        );
    })?;
    write_sweep_csv(&rows, &args.out)?;
    eprintln!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::GenData(args) => gen_data(args),
        Cmd::Train(args) => train_cmd(args),
        Cmd::Eval(args) => eval_cmd(args),
        Cmd::Benchmark(args) => benchmark_cmd(args),
        Cmd::Sweep(args) => sweep_cmd(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.cmd) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
