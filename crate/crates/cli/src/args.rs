use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shelfwise_core::{IngestionConfig, ParseMode, SourceFormat, TimeUnit};

#[derive(Debug, Parser)]
#[command(name = "shelfwise", version, about = "Inventory Markov chains from grocery sales logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List products with event counts and first/last timestamps.
    Products {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Estimate purchase rates and print the discovered chain.
    Discover {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Steady-state metrics for one supply rate.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Steady-state metrics for several supply rates.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sample a path of the enhanced chain and its state occupancy.
    Simulate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimulationArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Serve the HTTP API over one log.
    Serve {
        #[command(flatten)]
        input: OptionalInputArgs,
        /// Port to listen on; 0 picks a free one.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Origin allowed by CORS (repeatable, `*` for any).
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Args)]
pub struct MappingArgs {
    /// Input format; inferred from the file extension when omitted.
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,
    /// Column holding event ids; rows are numbered when omitted.
    #[arg(long)]
    pub id_col: Option<String>,
    /// Column naming an object of the event (repeatable).
    #[arg(long = "object-col", default_value = "product")]
    pub object_cols: Vec<String>,
    #[arg(long, default_value = "quantity")]
    pub quantity_col: String,
    #[arg(long, default_value = "timestamp")]
    pub time_col: String,
    /// Extra column kept as an event attribute (repeatable).
    #[arg(long = "attr-col")]
    pub attr_cols: Vec<String>,
    /// chrono format string for timestamps.
    #[arg(long, default_value = shelfwise_core::eventlog::DEFAULT_TIMESTAMP_FORMAT)]
    pub time_format: String,
    /// Abort on the first bad row (the default).
    #[arg(long, conflicts_with = "lenient")]
    pub strict: bool,
    /// Skip bad rows and report them on stderr.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Sales log (CSV or JSON lines).
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub mapping: MappingArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OptionalInputArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub mapping: MappingArgs,
}

impl MappingArgs {
    pub fn config(&self, path: Option<&std::path::Path>, unit: TimeUnit) -> IngestionConfig {
        let format = match (self.input_format, path) {
            (Some(InputFormat::Csv), _) => SourceFormat::Csv,
            (Some(InputFormat::Jsonl), _) => SourceFormat::JsonLines,
            (None, Some(p)) => SourceFormat::from_path(p),
            (None, None) => SourceFormat::Csv,
        };
        IngestionConfig {
            id_column: self.id_col.clone(),
            object_columns: self.object_cols.clone(),
            quantity_column: self.quantity_col.clone(),
            timestamp_column: self.time_col.clone(),
            attribute_columns: self.attr_cols.clone(),
            timestamp_format: self.time_format.clone(),
            time_unit: unit,
            mode: if self.lenient { ParseMode::Lenient } else { ParseMode::Strict },
            format,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub product: String,
    /// Shelf capacity `k`; states are `0..=k`.
    #[arg(long, default_value_t = 100)]
    pub capacity: usize,
    /// Initial stock; defaults to the capacity.
    #[arg(long)]
    pub initial: Option<usize>,
    /// Time unit of all rates.
    #[arg(long, default_value_t = TimeUnit::Hours)]
    pub unit: TimeUnit,
}

#[derive(Debug, Clone, Args)]
pub struct StrategyArgs {
    /// Units delivered per restock.
    #[arg(long, default_value_t = 10)]
    pub batch: usize,
    /// Restock rate per time unit (repeatable for sweeps).
    #[arg(long = "rate", required = true)]
    pub rates: Vec<f64>,
    /// Stock level above which units count as surplus.
    #[arg(long, default_value_t = 70)]
    pub threshold: usize,
    /// Largest single purchase; defaults to the largest in the log.
    #[arg(long)]
    pub max_quantity: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulationArgs {
    #[arg(long, default_value_t = 10)]
    pub batch: usize,
    /// Restock rate per time unit.
    #[arg(long)]
    pub rate: f64,
    #[arg(long)]
    pub seed: u64,
    /// Simulated time in the chosen unit.
    #[arg(long)]
    pub horizon: f64,
    /// Time discarded before measuring occupancy; defaults to 1% of the horizon.
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Also write every jump of the path as `time,state` CSV.
    #[arg(long)]
    pub trajectory_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output format; `products` defaults to csv, everything else to json.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
