use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use putwb_core::dataset::{DedupeStrategy, MissingStrategy};
use putwb_core::engine::DataFormat;
use putwb_core::GenerationMethod;

#[derive(Debug, Parser)]
#[command(name = "putwb", version, about = "Privacy-utility trade-off workbench")]
pub struct Cli {
    /// Log more detail to standard error; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its result CSV.
    Run(RunArgs),
    /// Run one experiment per partition size or PUT number.
    Sweep(SweepArgs),
    /// Re-evaluate chosen attribute sets on every row.
    Verify(VerifyArgs),
    /// Resume an interrupted run or dump its results.
    Recover(RecoverArgs),
    /// Suggest expenses and generation method for a dataset.
    Autopilot(AutopilotArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Describe a dataset or checkpoint as JSON on standard output.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Arff,
    Csv,
}

impl From<FormatArg> for DataFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Arff => DataFormat::Arff,
            FormatArg::Csv => DataFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MissingArg {
    Keep,
    RemoveRows,
    Impute,
}

impl From<MissingArg> for MissingStrategy {
    fn from(m: MissingArg) -> Self {
        match m {
            MissingArg::Keep => MissingStrategy::Keep,
            MissingArg::RemoveRows => MissingStrategy::RemoveRows,
            MissingArg::Impute => MissingStrategy::Impute,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DedupeArg {
    Keep,
    /// Drop repeated rows and every row of a conflicting group.
    Remove,
}

impl From<DedupeArg> for DedupeStrategy {
    fn from(d: DedupeArg) -> Self {
        match d {
            DedupeArg::Keep => DedupeStrategy::Keep,
            DedupeArg::Remove => DedupeStrategy::RemoveDuplicatesAndConflicts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenerationArg {
    Dictionary,
    Random,
}

impl From<GenerationArg> for GenerationMethod {
    fn from(g: GenerationArg) -> Self {
        match g {
            GenerationArg::Dictionary => GenerationMethod::Dictionary,
            GenerationArg::Random => GenerationMethod::Random,
        }
    }
}

/// Dataset location and cleaning.
#[derive(Debug, Clone, Default, Args)]
pub struct DatasetArgs {
    /// ARFF or CSV file.
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Class attribute name; the last attribute by default.
    #[arg(long, value_name = "NAME")]
    pub class: Option<String>,
    /// Missing-value handling.
    #[arg(long, value_enum)]
    pub missing: Option<MissingArg>,
    /// Duplicate and conflicting row handling.
    #[arg(long, value_enum)]
    pub dedupe: Option<DedupeArg>,
}

/// Classifier and cross-validation.
#[derive(Debug, Clone, Default, Args)]
pub struct LearnerArgs {
    /// `tree` or `naive-bayes`.
    #[arg(long)]
    pub learner: Option<String>,
    /// Smallest number of rows in a tree leaf.
    #[arg(long, value_name = "N")]
    pub min_leaf: Option<usize>,
    /// Tree pruning confidence, in (0, 0.5].
    #[arg(long, value_name = "C")]
    pub confidence: Option<f64>,
    /// Grow unpruned trees.
    #[arg(long)]
    pub no_pruning: bool,
    /// Seed for row sampling, random generation and fold assignment.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cross-validation folds.
    #[arg(long)]
    pub folds: Option<usize>,
}

/// Everything but the partition size.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// Experiment spec JSON; flags override its fields.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Privacy exceptions, e.g. `1,3;2,5`.
    #[arg(long, value_name = "SETS")]
    pub privacy: Option<String>,
    /// File with one privacy exception per line.
    #[arg(long, value_name = "PATH")]
    pub privacy_file: Option<PathBuf>,
    /// Utility exceptions, e.g. `1,3;2,5`.
    #[arg(long, value_name = "SETS")]
    pub utility: Option<String>,
    /// File with one utility exception per line.
    #[arg(long, value_name = "PATH")]
    pub utility_file: Option<PathBuf>,
    /// Fraction of candidate sets evaluated, in (0, 1].
    #[arg(long, value_name = "V")]
    pub vertical_expense: Option<f64>,
    /// Fraction of rows each task samples, in (0, 1].
    #[arg(long, value_name = "H")]
    pub horizontal_expense: Option<f64>,
    /// Candidate set order.
    #[arg(long, value_enum)]
    pub generation: Option<GenerationArg>,
    /// Result CSV; the checkpoint is written next to it.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Checkpoint file, `<out>.ckpt` by default.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Committed tasks between checkpoints.
    #[arg(long, value_name = "N")]
    pub checkpoint_interval: Option<u64>,
    /// Worker threads; PUTWB_WORKERS or the CPU count by default.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Largest number of tasks an experiment may plan.
    #[arg(long, value_name = "N", conflicts_with = "no_budget_cap")]
    pub budget_cap: Option<u64>,
    /// Plan every task the expenses ask for.
    #[arg(long)]
    pub no_budget_cap: bool,
    /// Write every time_taken as 0 so outputs are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
    /// Take expenses and generation method from the autopilot.
    #[arg(long, conflicts_with = "no_autopilot")]
    pub autopilot: bool,
    /// Keep the expenses and generation method as given.
    #[arg(long)]
    pub no_autopilot: bool,
    /// Print the resolved spec JSON and exit.
    #[arg(long)]
    pub print_spec: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Attributes per partition.
    #[arg(short = 'k', long, value_name = "K", conflicts_with = "put_number")]
    pub partition_size: Option<usize>,
    /// PUT number in [-1, 1]: -1 is one attribute, 1 is all of them.
    #[arg(short = 'p', long, value_name = "P", allow_negative_numbers = true)]
    pub put_number: Option<f64>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Partition sizes, as `1..8` or `1,3,5`.
    #[arg(
        long,
        value_name = "LIST",
        conflicts_with = "put_numbers",
        required_unless_present = "put_numbers"
    )]
    pub sizes: Option<String>,
    /// PUT numbers, as `-1:1:0.25` (start:end:step) or `-1,0,1`.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    pub put_numbers: Option<String>,
    /// Criteria picking each experiment's best row for the summary.
    #[arg(long, value_name = "CRITERIA", default_value = "accuracy:desc")]
    pub sort: String,
    /// Summary CSV, `<out stem>_summary.csv` by default.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Sets to verify, e.g. `1,3;2,5`.
    #[arg(long, value_name = "SETS")]
    pub sets: Option<String>,
    /// File with one set per line.
    #[arg(long, value_name = "PATH")]
    pub sets_file: Option<PathBuf>,
    /// Experiment result CSV to take sets from.
    #[arg(long, value_name = "PATH")]
    pub results: Option<PathBuf>,
    /// How many rows of `--results` to verify.
    #[arg(long, value_name = "N", requires = "results")]
    pub top: Option<usize>,
    /// Criteria ranking `--results` rows, e.g. `apr_1:desc,accuracy:desc`.
    #[arg(long, value_name = "CRITERIA", requires = "results")]
    pub sort: Option<String>,
    /// Report CSV.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Worker threads; PUTWB_WORKERS or the CPU count by default.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["resume", "dump"])))]
pub struct RecoverArgs {
    /// Checkpoint file.
    pub checkpoint: PathBuf,
    /// Continue the run to completion.
    #[arg(long)]
    pub resume: bool,
    /// Write the checkpoint's results to this CSV.
    #[arg(long, value_name = "PATH")]
    pub dump: Option<PathBuf>,
    /// Result CSV for a resumed run, instead of the original one.
    #[arg(long, value_name = "PATH", requires = "resume")]
    pub out: Option<PathBuf>,
    /// Worker threads for a resumed run.
    #[arg(long, value_name = "N", requires = "resume")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AutopilotArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Attributes per partition.
    #[arg(
        short = 'k',
        long,
        value_name = "K",
        conflicts_with = "put_number",
        required_unless_present = "put_number"
    )]
    pub partition_size: Option<usize>,
    /// PUT number in [-1, 1].
    #[arg(short = 'p', long, value_name = "P", allow_negative_numbers = true)]
    pub put_number: Option<f64>,
    /// Classifier the runtime probe trains.
    #[arg(long, default_value = "tree")]
    pub learner: String,
    /// Largest number of tasks to aim for.
    #[arg(long, value_name = "N")]
    pub task_cap: Option<u64>,
    /// Largest number of rows a task should sample.
    #[arg(long, value_name = "N")]
    pub row_cap: Option<u64>,
    /// Skip the timing probe; the suggestion then depends only on shape.
    #[arg(long)]
    pub no_probe: bool,
    /// Worker threads to plan for.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Bearer token clients must send; required off loopback.
    #[arg(long, env = "PUTWB_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Directory of UI files served at other paths.
    #[arg(long, value_name = "DIR")]
    pub static_dir: Option<PathBuf>,
    /// Largest upload in bytes.
    #[arg(long, value_name = "BYTES")]
    pub max_body: Option<usize>,
    /// Worker threads per experiment.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    /// Dataset or checkpoint file.
    pub path: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, value_name = "NAME")]
    pub class: Option<String>,
    /// Also report what this cleaning would remove.
    #[arg(long, value_enum)]
    pub missing: Option<MissingArg>,
    #[arg(long, value_enum)]
    pub dedupe: Option<DedupeArg>,
}
