//! `fmfm`: build schemas, encode and split data, train, reduce, cache and
//! evaluate field-matrixed factorization machines.
//!
//! Failures print one line to stderr, `error\t<code>\t<message>`, and exit
//! with status 1 (2 for usage errors).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "fmfm", version, about = "Field-matrixed factorization machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count token frequencies in a raw file and write the vocabulary schema.
    SchemaBuild(SchemaBuildArgs),
    /// Encode a raw file against a schema into the binary data format.
    Encode(EncodeArgs),
    /// Split encoded data 80/10/10 into train, validation and test files.
    Split(SplitArgs),
    /// Train a model, keeping the epoch with the best validation AUC.
    Train(TrainArgs),
    /// Report AUC and log loss of a model or cache on a data file.
    Evaluate(EvaluateArgs),
    /// Write one click probability per instance.
    Predict(PredictArgs),
    /// Choose per-field embedding dimensions by retained PCA variance.
    Reduce(ReduceArgs),
    /// Compile a trained model into a cached scorer.
    Cache(CacheArgs),
    /// Estimated floating-point operations to score one instance.
    Flops(FlopsArgs),
    /// Number of stored parameters, bias excluded.
    Params(ParamsArgs),
    /// Mutual information between each field pair and the label.
    Mi(MiArgs),
    /// Generate a synthetic dataset from a planted model.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Criteo,
    Avazu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CountOn {
    /// Count over every row, before splitting.
    All,
    /// Count only the rows the split with `--seed` will put in train.
    Train,
}

#[derive(Args, Debug)]
struct SchemaBuildArgs {
    #[arg(long, value_enum)]
    format: FormatArg,
    #[arg(long)]
    input: PathBuf,
    /// Minimum token count to keep a token out of the unknown slot.
    #[arg(long, default_value_t = 1)]
    min_freq: u64,
    #[arg(long, value_enum, default_value_t = CountOn::All)]
    count_on: CountOn,
    /// Split seed, used with `--count-on train`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long, value_enum)]
    format: FormatArg,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving train.bin, validation.bin and test.bin.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Lr,
    Fm,
    Fwfm,
    Fvfm,
    Fmfm,
    Ffm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Identity,
    Scalar,
    Diagonal,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LinearArg {
    PerFeature,
    FieldShared,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
    Adagrad,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    validation: PathBuf,
    /// Also report metrics on this file.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = VariantArg::Fmfm)]
    variant: VariantArg,
    /// Matrix kind for the shared-embedding family; selects FM, FwFM, FvFM or FmFM.
    #[arg(long, value_enum)]
    matrix_kind: Option<KindArg>,
    /// Uniform embedding dimension.
    #[arg(long, conflicts_with = "dims")]
    dim: Option<usize>,
    /// Per-field dimensions from `reduce`.
    #[arg(long)]
    dims: Option<PathBuf>,
    /// Defaults to field-shared for the shared-embedding family.
    #[arg(long, value_enum)]
    linear: Option<LinearArg>,
    /// `key=value` training settings; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Threads for validation scoring. Parameter updates are always sequential.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Require bitwise-reproducible output. Updates are always sequential, so
    /// this holds with or without the flag.
    #[arg(long)]
    deterministic: bool,
    /// Per-epoch metrics as CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScorerArgs {
    #[arg(long, required_unless_present = "cache", conflicts_with = "cache")]
    model: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Reject the scorer unless it was built against this schema.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    variance: f64,
    /// Weight each embedding row by its feature's frequency in this schema.
    #[arg(long)]
    weighted_by: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TieArg {
    LowerIndex,
    MoreFeatures,
}

#[derive(Args, Debug)]
struct CacheArgs {
    #[arg(long)]
    model: PathBuf,
    /// Store 64-bit floats instead of 32-bit.
    #[arg(long)]
    f64: bool,
    #[arg(long, value_enum, default_value_t = TieArg::LowerIndex)]
    tie: TieArg,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FlopsArgs {
    #[arg(long, value_enum)]
    variant: VariantArg,
    #[arg(long, value_enum)]
    matrix_kind: Option<KindArg>,
    /// Number of fields; implied by `--dims`.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, conflicts_with = "dims")]
    k: Option<usize>,
    #[arg(long)]
    dims: Option<PathBuf>,
    #[arg(long)]
    cached: bool,
    #[arg(long, value_enum, default_value_t = LinearArg::PerFeature)]
    linear: LinearArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    #[arg(long, value_enum)]
    variant: VariantArg,
    #[arg(long, value_enum)]
    matrix_kind: Option<KindArg>,
    /// Feature counts come from this schema.
    #[arg(long, conflicts_with_all = ["m", "n"])]
    schema: Option<PathBuf>,
    /// Total feature count, when no schema is given.
    #[arg(long, requires = "n")]
    m: Option<u64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, conflicts_with = "dims")]
    k: Option<usize>,
    #[arg(long, requires = "schema")]
    dims: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LinearArg::PerFeature)]
    linear: LinearArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct MiArgs {
    #[arg(long)]
    data: PathBuf,
    /// Write the full matrix as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Start from the 8-field planted benchmark.
    #[arg(long)]
    benchmark: bool,
    /// Comma-separated vocabulary sizes, one per field.
    #[arg(long, value_delimiter = ',')]
    vocab: Option<Vec<usize>>,
    /// Comma-separated planted dimensions, one per field.
    #[arg(long, value_delimiter = ',')]
    truth_dims: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    truth_kind: Option<KindArg>,
    #[arg(long)]
    zipf: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives schema.txt, data.bin, train.bin, validation.bin, test.bin and truth.model.
    #[arg(long)]
    out_dir: PathBuf,
}

fn error_code(err: &anyhow::Error) -> &'static str {
    use fmfm_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io(_) => "io",
                E::Format { .. } => "format",
                E::EmptyInput => "empty-input",
                E::DuplicateField(_) => "duplicate-field",
                E::FieldOutOfRange { .. } => "field-out-of-range",
                E::DimensionMismatch { .. } => "dimension-mismatch",
                E::SchemaMismatch(_) => "schema-mismatch",
                E::InvalidDims(_) => "invalid-dims",
                E::InvalidConfig(_) => "invalid-config",
                E::Diverged { .. } => "diverged",
                E::SingleClass => "single-class",
                E::Malformed(_) => "malformed",
                E::Unsupported(_) => "unsupported",
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "error"
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let summary: String = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .collect::<Vec<_>>()
                .join(" ");
            eprintln!("error\tusage\t{}", one_line(summary.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error\t{}\t{}", error_code(&e), one_line(&format!("{e:#}")));
            ExitCode::from(1)
        }
    }
}
