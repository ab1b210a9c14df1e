use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ldao_core::augment::LdaoError;
use ldao_core::config::{AlphaMode, ConfigError};
use ldao_core::harness::{CvPlan, HarnessError};
use ldao_core::ingest::{self, CsvSchema, IngestError, Table, TargetSelector};
use ldao_core::metrics::{self, MetricError, RelevanceFunction, DEFAULT_SERA_STEP};
use ldao_core::{build_relevance, RunConfig};

/// Oversampling for imbalanced regression with per-cluster kernel density
/// estimates in the joint feature-target space.
#[derive(Parser, Debug)]
#[command(name = "ldao", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Augment a CSV with synthetic rows.
    Oversample(OversampleArgs),
    /// Print the SSE curve and the chosen cluster count.
    Elbow(ElbowArgs),
    /// Score predictions with RMSE, MAE and SERA.
    Evaluate(EvaluateArgs),
    /// Cross-validate a k-NN learner with and without augmentation.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct CsvArgs {
    /// Field delimiter (single ASCII character).
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// The input has no header row; columns are named col0, col1, ...
    #[arg(long)]
    no_header: bool,
}

impl CsvArgs {
    fn delimiter(&self) -> Result<u8, CliError> {
        if self.delimiter.is_ascii() {
            Ok(self.delimiter as u8)
        } else {
            Err(CliError::usage(format!(
                "delimiter `{}` is not an ASCII character",
                self.delimiter
            )))
        }
    }

    fn schema(&self, target: &str) -> Result<CsvSchema, CliError> {
        Ok(CsvSchema {
            delimiter: self.delimiter()?,
            has_header: !self.no_header,
            target: TargetSelector::parse(target),
        })
    }
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV.
    #[arg(long)]
    input: PathBuf,
    /// Target column name, or zero-based index.
    #[arg(long)]
    target: String,
    #[command(flatten)]
    csv: CsvArgs,
}

impl DataArgs {
    fn load(&self) -> Result<ldao_core::Dataset, CliError> {
        let schema = self.csv.schema(&self.target)?;
        ingest::read_csv(&self.input, &schema).map_err(|e| ingest_error(&self.input, e))
    }
}

/// Settings shared by every command that runs the oversampler. Flags
/// override values read from --config.
#[derive(Args, Debug)]
struct TuningArgs {
    /// `key = value` file with run settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Elbow threshold on the relative SSE improvement.
    #[arg(long)]
    delta: Option<f64>,
    /// Growth multiplier in uniform mode.
    #[arg(long)]
    alpha: Option<f64>,
    /// uniform or adaptive.
    #[arg(long)]
    alpha_mode: Option<AlphaMode>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    bandwidth_scale: Option<f64>,
    /// k-means restarts per cluster count.
    #[arg(long)]
    restarts: Option<usize>,
    /// Clamp synthetic values to each column's observed range.
    #[arg(long)]
    clip_to_range: bool,
}

impl TuningArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            cfg.apply_kv_text(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        }
        macro_rules! overlay {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field {
                    cfg.$target = v;
                })*
            };
        }
        overlay!(
            seed => seed,
            k_min => k_min,
            k_max => k_max,
            delta => elbow_threshold,
            alpha => alpha,
            alpha_mode => alpha_mode,
            alpha_max => alpha_max,
            gamma => gamma,
            bandwidth_scale => bandwidth_scale,
            restarts => restarts
        );
        if self.clip_to_range {
            cfg.clip_to_range = true;
        }
        cfg.validate().map_err(config_error)?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct OversampleArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Output CSV [default: <input stem>.ldao.csv].
    #[arg(long)]
    output: Option<PathBuf>,
    /// Run report destination [default: stderr].
    #[arg(long)]
    report: Option<PathBuf>,
    /// Append a 0/1 `synthetic` column.
    #[arg(long)]
    mark_synthetic: bool,
}

#[derive(Args, Debug)]
struct ElbowArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// CSV holding both the true and predicted columns.
    #[arg(long, conflicts_with_all = ["true_file", "pred_file"])]
    input: Option<PathBuf>,
    /// Column of true values (name or index) [default with two files: 0].
    #[arg(long = "true")]
    true_col: Option<String>,
    /// Column of predictions (name or index) [default with two files: 0].
    #[arg(long = "pred")]
    pred_col: Option<String>,
    /// CSV with the true values.
    #[arg(long, requires = "pred_file")]
    true_file: Option<PathBuf>,
    /// CSV with the predictions.
    #[arg(long, requires = "true_file")]
    pred_file: Option<PathBuf>,
    /// Relevance control points, one `y phi slope` line each. Without it the
    /// relevance is derived from the true values.
    #[arg(long)]
    relevance: Option<PathBuf>,
    /// Threshold step for the SERA integral.
    #[arg(long, default_value_t = DEFAULT_SERA_STEP)]
    step: f64,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Neighbours used by the k-NN learner.
    #[arg(long, default_value_t = 5)]
    learner_k: usize,
    /// Significance level for the Wilcoxon test.
    #[arg(long, default_value_t = 0.05)]
    alpha_level: f64,
    /// Per-fold records CSV [default: <input stem>.folds.csv].
    #[arg(long)]
    records: Option<PathBuf>,
    /// Summary destination [default: stdout].
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    /// Bad flags, unreadable or malformed input. Exit 1.
    Usage(String),
    /// Numerical or I/O failure while running. Exit 2.
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Runtime(m) => m,
        }
    }
}

fn ingest_error(path: &Path, e: IngestError) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

fn config_error(e: ConfigError) -> CliError {
    CliError::usage(e.to_string())
}

fn ldao_error(e: LdaoError) -> CliError {
    match e {
        LdaoError::Config(_) | LdaoError::TooFewPoints { .. } => CliError::usage(e.to_string()),
        _ => CliError::runtime(e.to_string()),
    }
}

fn harness_error(e: HarnessError) -> CliError {
    match e {
        HarnessError::KTooLarge { .. }
        | HarnessError::ZeroK
        | HarnessError::TooFewRows { .. }
        | HarnessError::BadPlan(_) => CliError::usage(e.to_string()),
        _ => CliError::runtime(e.to_string()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// `dir/name.csv` becomes `dir/name<suffix>`.
fn sibling(input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    input.with_file_name(format!("{stem}{suffix}"))
}

fn oversample(args: &OversampleArgs) -> Result<(), CliError> {
    let cfg = args.tuning.resolve()?;
    let data = args.data.load()?;
    let out = ldao_core::run_ldao(&data, &cfg).map_err(ldao_error)?;
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| sibling(&args.data.input, ".ldao.csv"));
    ingest::write_csv(&out.dataset, &output, args.mark_synthetic)
        .map_err(|e| CliError::runtime(format!("{}: {e}", output.display())))?;
    let report = out.report.to_kv();
    match &args.report {
        Some(path) => write_file(path, &report),
        None => {
            eprint!("{report}");
            Ok(())
        }
    }
}

fn elbow(args: &ElbowArgs) -> Result<(), CliError> {
    let cfg = args.tuning.resolve()?;
    let data = args.data.load()?;
    let trace = ldao_core::elbow_trace(&data, &cfg).map_err(ldao_error)?;
    let mut out = String::from("k\tsse\tdelta\n");
    for (i, sse) in trace.sse.iter().enumerate() {
        let k = trace.k_min + i;
        let delta = trace
            .delta_at(k)
            .map_or_else(|| "-".to_string(), |d| d.to_string());
        out.push_str(&format!("{k}\t{sse}\t{delta}\n"));
    }
    out.push_str(&format!(
        "k_star = {}\n",
        trace.k_star.expect("elbow_trace selects k")
    ));
    print!("{out}");
    Ok(())
}

fn read_column(
    path: &Path,
    column: Option<&str>,
    csv: &CsvArgs,
) -> Result<(Table, usize), CliError> {
    let table = ingest::read_table(path, csv.delimiter()?, !csv.no_header)
        .map_err(|e| ingest_error(path, e))?;
    let sel = column.map_or(TargetSelector::Index(0), TargetSelector::parse);
    let j = table
        .column_index(&sel, !csv.no_header)
        .map_err(|e| ingest_error(path, e))?;
    Ok((table, j))
}

fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let (y, pred) = match (&args.input, &args.true_file, &args.pred_file) {
        (Some(input), _, _) => {
            let (Some(t), Some(p)) = (&args.true_col, &args.pred_col) else {
                return Err(CliError::usage("--input needs both --true and --pred"));
            };
            let (table, jt) = read_column(input, Some(t), &args.csv)?;
            let (_, jp) = read_column(input, Some(p), &args.csv)?;
            (table.column(jt), table.column(jp))
        }
        (None, Some(tf), Some(pf)) => {
            let (tt, jt) = read_column(tf, args.true_col.as_deref(), &args.csv)?;
            let (pt, jp) = read_column(pf, args.pred_col.as_deref(), &args.csv)?;
            (tt.column(jt), pt.column(jp))
        }
        _ => {
            return Err(CliError::usage(
                "give --input with --true and --pred, or --true-file and --pred-file",
            ))
        }
    };
    let metric = |e: MetricError| CliError::usage(e.to_string());
    let phi = match &args.relevance {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            RelevanceFunction::parse(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        }
        None => build_relevance(&y).map_err(|e| {
            CliError::usage(format!(
                "cannot derive relevance from the true values ({e}); pass --relevance"
            ))
        })?,
    };
    let rmse = metrics::rmse(&y, &pred).map_err(metric)?;
    let mae = metrics::mae(&y, &pred).map_err(metric)?;
    let sera = metrics::sera(&y, &pred, &phi, args.step).map_err(metric)?;
    println!("n = {}", y.len());
    println!("rmse = {rmse}");
    println!("mae = {mae}");
    println!("sera = {sera}");
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let cfg = args.tuning.resolve()?;
    let data = args.data.load()?;
    let plan = CvPlan {
        runs: args.runs,
        folds: args.folds,
        seed: cfg.seed,
    };
    let report = ldao_core::run_experiment(&data, &plan, &cfg, args.learner_k, args.alpha_level)
        .map_err(harness_error)?;
    let records = args
        .records
        .clone()
        .unwrap_or_else(|| sibling(&args.data.input, ".folds.csv"));
    write_file(&records, &report.records_csv())?;
    let summary = report.summary_kv();
    match &args.summary {
        Some(path) => write_file(path, &summary),
        None => {
            print!("{summary}");
            io::stdout()
                .flush()
                .map_err(|e| CliError::runtime(e.to_string()))
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("LDAO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("LDAO_THREADS: `{raw}` is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::runtime(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Oversample(a) => oversample(a),
        Command::Elbow(a) => elbow(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
