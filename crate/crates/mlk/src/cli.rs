use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modellake::lineage::NodeKind;
use modellake::model::RecordType;
use modellake::ArtifactKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "mlk", version, about = "Model lake command-line interface")]
pub struct Cli {
    /// Lake directory (embedded mode).
    #[arg(long, short = 'd', global = true, env = "MLK_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Service URL (remote mode), e.g. http://127.0.0.1:7878.
    #[arg(long, global = true, env = "MLK_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(
        long,
        short = 'o',
        global = true,
        env = "MLK_OUTPUT",
        value_enum,
        default_value = "table"
    )]
    pub output: Output,
    /// Documentation-rate threshold below which a lake counts as a swamp.
    #[arg(long, global = true, env = "MLK_SWAMP_THRESHOLD", default_value_t = modellake::governance::DEFAULT_SWAMP_THRESHOLD)]
    pub swamp_threshold: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RecordFile {
    /// JSON record file, or `-` for stdin.
    #[arg(long = "file", short = 'f')]
    pub file: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty lake.
    Init { dir: Option<PathBuf> },
    /// Store an artifact payload.
    Put {
        file: PathBuf,
        #[arg(long, value_parser = parse_artifact_kind)]
        kind: ArtifactKind,
    },
    /// Register an ingest record.
    Ingest(RecordFile),
    /// Register a process record.
    RegisterProcess(RecordFile),
    /// Register an analysis record.
    RegisterAnalysis(RecordFile),
    /// Register a record of any type.
    Register {
        #[arg(value_parser = parse_record_type)]
        record_type: RecordType,
        #[command(flatten)]
        file: RecordFile,
    },
    /// Search the catalog.
    Search {
        #[arg(long)]
        text: Option<String>,
        /// Node kind filter; repeatable or comma-separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_node_kind)]
        kind: Vec<NodeKind>,
        /// Required tag; repeatable or comma-separated.
        #[arg(long, value_delimiter = ',')]
        tag: Vec<String>,
        #[arg(long)]
        user: Option<String>,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, default_value_t = 0)]
        offset: usize,
    },
    /// Upstream lineage of a node.
    Lineage {
        id: String,
        /// Overrides --output for this command.
        #[arg(long, value_enum)]
        format: Option<Output>,
    },
    /// Version chain containing a node.
    Versions { id: String },
    /// Differences between two versions.
    Diff { a: String, b: String },
    #[command(subcommand)]
    Audit(Audit),
    /// Project view of a study.
    Project { study_id: String },
    /// Run the HTTP service over the data directory.
    Serve {
        #[arg(long, env = "MLK_BIND", default_value = modellake_server::DEFAULT_BIND)]
        bind: String,
    },
    /// Print `record_id<TAB>canonical JSON` for each line of a JSON-lines
    /// file of `{"record_type": ..., "record": {...}}` objects.
    Canonicalize(RecordFile),
}

#[derive(Debug, Subcommand)]
pub enum Audit {
    /// Check a model's data sources against an approved list.
    Compliance {
        model: String,
        #[arg(long, default_value = "")]
        approved: String,
    },
    /// Reproducibility closure of an analysis, with a stub re-run.
    Repro { analysis: String },
    /// Documentation rate and swamp flag.
    Health {
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Data sources behind a model's training data.
    Bias { model: String },
    /// Performance and changes along a version chain.
    Evolution { head: String },
}

fn parse_artifact_kind(s: &str) -> Result<ArtifactKind, String> {
    s.parse()
        .map_err(|e: modellake::cas::ParseKindError| e.to_string())
}

fn parse_record_type(s: &str) -> Result<RecordType, String> {
    s.parse()
}

fn parse_node_kind(s: &str) -> Result<NodeKind, String> {
    s.parse()
}
