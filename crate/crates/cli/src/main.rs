use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nncrn_core::{
    add_cancellation, compile, evaluate, export_trajectory, load_csv, load_iris, make_synthetic,
    min_rate, randomize_rates, readout, reduce, simulate, train, verify, BinaryNetwork, Cancellation,
    Crn, Header, LabeledDataset, SimConfig, SyntheticSpec, TrainConfig,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "nncrn", version, about = "Compile binary-weight ReLU networks into chemical reaction networks")]
struct Cli {
    /// Seed for training, data generation and rate randomization.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a binary-weight network with BinaryConnect.
    Train(TrainArgs),
    /// Compile a network into a CRN.
    Compile(CompileArgs),
    /// Eliminate non-input unimolecular reactions from a CRN.
    Reduce(ReduceArgs),
    /// Simulate a CRN on one input under mass-action kinetics.
    Simulate(SimulateArgs),
    /// Compare a network and a CRN on every example of a dataset.
    Verify(VerifyArgs),
    /// Summarize a network or CRN file.
    Info(InfoArgs),
    /// Generate a synthetic Gaussian-blob dataset.
    GenData(GenDataArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// Numeric features followed by an integer label column.
    Csv,
    /// Four features and a species name or 0-2 label.
    Iris,
}

#[derive(Args)]
struct DataArgs {
    /// Labeled dataset (CSV).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

impl DataArgs {
    fn load(&self) -> Result<LabeledDataset> {
        let d = match self.format {
            Format::Csv => load_csv(&self.data, Header::Auto)?,
            Format::Iris => load_iris(&self.data)?,
        };
        Ok(d)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Hidden layer sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Per-epoch learning-rate decay factor.
    #[arg(long, default_value_t = 0.9995)]
    lr_decay: f64,
    /// Probability of keeping a hidden unit during training.
    #[arg(long, default_value_t = 1.0)]
    dropout_keep: f64,
    /// Fraction of the data held out to pick the best epoch.
    #[arg(long, default_value_t = 0.0)]
    validation: f64,
    /// Train on raw features instead of z-scores.
    #[arg(long)]
    no_standardize: bool,
    /// Network output file (JSON).
    #[arg(long, short)]
    out: PathBuf,
    /// Per-epoch log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Reduce the compiled CRN.
    #[arg(long)]
    reduce: bool,
    /// Append S+ + S- -> W for the given pairs (default: outputs).
    #[arg(long, num_args = 0..=1, default_missing_value = "outputs", value_parser = parse_cancellation)]
    cancellation: Option<Cancellation>,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    crn: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value = "none", value_parser = parse_cancellation)]
    cancellation: Cancellation,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    crn: PathBuf,
    /// Input values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    input: Vec<f64>,
    /// Treat the input as raw features and apply this network's scaling.
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long, default_value_t = 50.0)]
    t_end: f64,
    /// Trajectory output (CSV).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Randomize rate constants with this seed; t_end is divided by the smallest rate.
    #[arg(long)]
    rates_seed: Option<u64>,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.1, 10.0])]
    rates_range: Vec<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    crn: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 50.0)]
    t_end: f64,
    /// Only check the first N examples.
    #[arg(long)]
    limit: Option<usize>,
    /// Report output (JSON).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct InfoArgs {
    #[arg(long)]
    crn: Option<PathBuf>,
    #[arg(long)]
    net: Option<PathBuf>,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    features: usize,
    #[arg(long, default_value_t = 125)]
    per_class: usize,
    /// Gap between noise balls, in units of sigma.
    #[arg(long, default_value_t = 6.0)]
    margin: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Put every centroid at the origin.
    #[arg(long)]
    collapse: bool,
    #[arg(long, short)]
    out: PathBuf,
}

fn parse_cancellation(s: &str) -> Result<Cancellation, String> {
    s.parse()
}

struct Ctx {
    seed: u64,
    json: bool,
    quiet: bool,
}

/// Writes a line to stdout, ignoring a closed pipe.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

impl Ctx {
    /// Prints `value` as JSON, or `text` otherwise.
    fn emit(&self, value: serde_json::Value, text: impl FnOnce() -> String) {
        if self.json {
            say(&serde_json::to_string_pretty(&value).expect("json value"));
        } else if !self.quiet {
            say(&text());
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let data = a.data.load()?;
    let cfg = TrainConfig {
        hidden: a.hidden.clone(),
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        lr_decay: a.lr_decay,
        dropout_keep: a.dropout_keep,
        seed: ctx.seed,
        validation_fraction: a.validation,
        standardize: !a.no_standardize,
    };
    let rep = train(&data, &cfg)?;
    rep.network.save(&a.out)?;
    if let Some(log) = &a.log {
        write(log, &rep.log_csv())?;
    }
    let acc = evaluate(&rep.network, &data)?;
    ctx.emit(
        json!({
            "shape": rep.network.shape(),
            "best_epoch": rep.best_epoch,
            "best_accuracy": rep.best_accuracy,
            "accuracy": acc,
            "warnings": rep.warnings,
        }),
        || {
            format!(
                "trained {:?}: accuracy {acc:.4} on all {} examples (best epoch {})",
                rep.network.shape(),
                data.len(),
                rep.best_epoch
            )
        },
    );
    Ok(())
}

fn stats_json(crn: &Crn) -> serde_json::Value {
    let s = crn.stats();
    json!({
        "reactions": s.reactions,
        "uni": s.unimolecular,
        "bi": s.bimolecular,
        "species": s.species,
        "max_products": s.max_products,
    })
}

fn stats_text(crn: &Crn) -> String {
    let s = crn.stats();
    format!(
        "{} reactions ({} unimolecular, {} bimolecular), {} species, at most {} products",
        s.reactions, s.unimolecular, s.bimolecular, s.species, s.max_products
    )
}

fn run_compile(ctx: &Ctx, a: &CompileArgs) -> Result<()> {
    let net = BinaryNetwork::load(&a.net)?;
    let mut crn = compile(&net)?;
    if a.reduce {
        crn = reduce(&crn)?;
    }
    if let Some(c) = &a.cancellation {
        crn = add_cancellation(&crn, c)?;
    }
    crn.save(&a.out)?;
    ctx.emit(stats_json(&crn), || stats_text(&crn));
    Ok(())
}

fn run_reduce(ctx: &Ctx, a: &ReduceArgs) -> Result<()> {
    let crn = Crn::load(&a.crn)?;
    let red = add_cancellation(&reduce(&crn)?, &a.cancellation)?;
    red.save(&a.out)?;
    ctx.emit(stats_json(&red), || format!("{} -> {}", crn.reactions.len(), stats_text(&red)));
    Ok(())
}

fn run_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    let mut crn = Crn::load(&a.crn)?;
    let mut t_end = a.t_end;
    if let Some(seed) = a.rates_seed {
        crn = randomize_rates(&crn, seed, a.rates_range[0], a.rates_range[1])?;
        t_end /= min_rate(&crn);
    }
    let input = match &a.net {
        Some(p) => BinaryNetwork::load(p)?.prepare_input(&a.input),
        None => a.input.clone(),
    };
    let tr = simulate(&crn, &input, &SimConfig::default().with_t_end(t_end))?;
    if let Some(out) = &a.out {
        export_trajectory(&tr, &crn.outputs, out)?;
    }
    let r = readout(&tr, &crn)?;
    ctx.emit(
        json!({
            "outputs": r.values,
            "class": r.class,
            "stop_time": tr.stop_time,
            "stop_reason": tr.stop_reason,
            "steps": tr.steps,
        }),
        || {
            let vals: Vec<String> = r.values.iter().map(|v| format!("{v:.6}")).collect();
            format!("outputs [{}] -> class {} (t = {:.3})", vals.join(", "), r.class, tr.stop_time)
        },
    );
    Ok(())
}

fn run_verify(ctx: &Ctx, a: &VerifyArgs) -> Result<()> {
    let net = BinaryNetwork::load(&a.net)?;
    let crn = Crn::load(&a.crn)?;
    let mut data = a.data.load()?;
    if let Some(n) = a.limit {
        data = data.subset(&(0..n.min(data.len())).collect::<Vec<_>>());
    }
    let rep = verify(&net, &crn, &data, &SimConfig::default().with_t_end(a.t_end))?;
    if let Some(out) = &a.out {
        write(out, &rep.to_json())?;
    }
    if ctx.json {
        say(&rep.to_json());
    } else if !ctx.quiet {
        say(&format!(
            "agreement {}/{} ({:.2}%), max value error {:.3e}, {} simulation failures, {:.2}s",
            rep.agreements(),
            rep.examples.len(),
            100.0 * rep.agreement_rate,
            rep.max_err,
            rep.failures,
            rep.runtime_secs
        ));
    }
    Ok(())
}

fn run_info(ctx: &Ctx, a: &InfoArgs) -> Result<()> {
    if let Some(p) = &a.crn {
        let crn = Crn::load(p)?;
        ctx.emit(stats_json(&crn), || stats_text(&crn));
    } else if let Some(p) = &a.net {
        let net = BinaryNetwork::load(p)?;
        let activations: Vec<String> = net.layers().iter().map(|l| l.activation().to_string()).collect();
        ctx.emit(
            json!({
                "shape": net.shape(),
                "activations": activations,
                "reactions_unoptimized": nncrn_core::reaction_count_unoptimized(&net.shape()),
                "reactions_reduced": nncrn_core::reaction_count_reduced(&net.shape()),
                "metadata": net.metadata(),
            }),
            || {
                format!(
                    "network {:?} ({}), compiles to {} reactions, {} after reduction",
                    net.shape(),
                    activations.join(", "),
                    nncrn_core::reaction_count_unoptimized(&net.shape()),
                    nncrn_core::reaction_count_reduced(&net.shape())
                )
            },
        );
    }
    Ok(())
}

fn run_gen_data(ctx: &Ctx, a: &GenDataArgs) -> Result<()> {
    let spec = SyntheticSpec {
        classes: a.classes,
        features: a.features,
        per_class: a.per_class,
        margin: a.margin,
        sigma: a.sigma,
        collapse: a.collapse,
    };
    let s = make_synthetic(&spec, ctx.seed)?;
    s.data.write_csv(&a.out)?;
    ctx.emit(
        json!({"examples": s.data.len(), "features": a.features, "classes": a.classes}),
        || format!("wrote {} examples to {}", s.data.len(), a.out.display()),
    );
    Ok(())
}

/// Short category for the machine-readable error line.
fn error_kind(e: &anyhow::Error) -> &'static str {
    use nncrn_core::*;
    for cause in e.chain() {
        if cause.is::<NetworkError>() {
            return "network";
        } else if cause.is::<CrnError>() {
            return "crn";
        } else if cause.is::<CompileError>() {
            return "compile";
        } else if cause.is::<ReduceError>() {
            return "reduce";
        } else if cause.is::<SimError>() {
            return "simulate";
        } else if cause.is::<TrainError>() {
            return "train";
        } else if cause.is::<DataError>() {
            return "data";
        } else if cause.is::<VerifyError>() {
            return "verify";
        } else if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let ctx = Ctx {
        seed: cli.seed,
        json: cli.json,
        quiet: cli.quiet,
    };
    let result = match &cli.command {
        Command::Train(a) => run_train(&ctx, a),
        Command::Compile(a) => run_compile(&ctx, a),
        Command::Reduce(a) => run_reduce(&ctx, a),
        Command::Simulate(a) => {
            if a.rates_range.len() != 2 {
                Err(anyhow::anyhow!("--rates-range takes two values"))
            } else {
                run_simulate(&ctx, a)
            }
        }
        Command::Verify(a) => run_verify(&ctx, a),
        Command::Info(a) => run_info(&ctx, a),
        Command::GenData(a) => run_gen_data(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = json!({"error": {"kind": error_kind(&e), "message": format!("{e:#}")}});
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
