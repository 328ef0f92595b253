use std::net::SocketAddr;
use std::path::PathBuf;

use attrib_core::attribution::BoundaryPolicy;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "attrib", version, about = "Token attribution from hidden states")]
pub struct Cli {
    /// Worker threads for dataset-scale commands (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect copied answer spans in one trace.
    Detect(DetectArgs),
    /// Attribute one answer span to a document window.
    Attribute(AttributeArgs),
    /// Dataset-scale evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Build annotated samples from raw dataset files.
    Curate(CurateArgs),
    /// Comparison systems.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Layer and threshold sweep for both subtasks.
    Sweep(SweepArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Produce a trace through the extractor.
    Extract(ExtractArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    RespectEvidence,
    IgnoreEvidence,
}

impl From<PolicyArg> for BoundaryPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::RespectEvidence => BoundaryPolicy::RespectEvidence,
            PolicyArg::IgnoreEvidence => BoundaryPolicy::IgnoreEvidence,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AttributionFlags {
    /// Number of anchor tokens.
    #[arg(short = 'K', long = "anchors")]
    pub anchors: Option<usize>,
    /// Maximum window length in tokens.
    #[arg(short = 'L', long = "max-window")]
    pub max_window: Option<usize>,
    #[arg(long, value_enum)]
    pub boundary_policy: Option<PolicyArg>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub layer: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: f64,
    /// Drop spans made only of stopwords and punctuation.
    #[arg(long)]
    pub filter: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("span_sel").required(true).args(["span", "span_chars"]))]
pub struct AttributeArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Answer-token range `s:e`.
    #[arg(long)]
    pub span: Option<String>,
    /// Answer byte range `s:e`, resolved to the overlapping tokens.
    #[arg(long)]
    pub span_chars: Option<String>,
    #[arg(long)]
    pub layer: usize,
    #[command(flatten)]
    pub attribution: AttributionFlags,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetTraces {
    /// Annotated samples (JSON lines).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory holding one trace directory per sample id.
    #[arg(long)]
    pub traces: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Token-level copy detection over a layer x theta grid.
    Subtask1(Subtask1Args),
    /// Paragraph accuracy of span attribution per layer.
    Subtask2(Subtask2Args),
    /// Accuracy by relative answer position.
    Positions(AnalysisArgs),
    /// Accuracy on spans whose text occurs in several passages.
    Disambig(AnalysisArgs),
}

#[derive(Debug, Args)]
pub struct Subtask1Args {
    #[command(flatten)]
    pub input: DatasetTraces,
    /// `layers=a..b thetas=start:stop:step`.
    #[arg(long, num_args = 1..=2, required = true)]
    pub sweep: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Subtask2Args {
    #[command(flatten)]
    pub input: DatasetTraces,
    /// `layers=a..b`.
    #[arg(long, num_args = 1..=2, required = true)]
    pub sweep: Vec<String>,
    #[command(flatten)]
    pub attribution: AttributionFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["predictions", "traces"]))]
pub struct AnalysisArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Span predictions written by `eval subtask2` or a baseline.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Attribute with the method instead, at `--layer`.
    #[arg(long, requires = "layer")]
    pub traces: Option<PathBuf>,
    #[arg(long)]
    pub layer: Option<usize>,
    #[command(flatten)]
    pub attribution: AttributionFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RawFormat {
    /// Records with query, response, statement, source text and citations.
    Verifiability,
    /// Question, passages and an answer with `[N text]` markup.
    Quotesum,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "verifiability")]
    pub format: RawFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BaselineCommand {
    /// BM25 paragraph ranking with the span text as query.
    Bm25(Bm25Args),
    /// Cosine ranking over precomputed embeddings.
    Dense(DenseArgs),
    /// External LLM marks copied spans (token-level metrics).
    LlmSpans(LlmArgs),
    /// External LLM names the source paragraph of each span.
    LlmAttr(LlmArgs),
}

#[derive(Debug, Args)]
pub struct Bm25Args {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 1.2)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DenseArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON lines of `{id, vector}`; ids `<sample>/p<i>` and `<sample>/s<j>`.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LlmArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Chat-completion endpoint URL.
    #[arg(long, required_unless_present = "replay")]
    pub endpoint: Option<String>,
    #[arg(long, default_value = "")]
    pub model: String,
    /// Answer from a recorded transcript instead of the network.
    #[arg(long, conflicts_with = "endpoint")]
    pub replay: Option<PathBuf>,
    /// Append every request and response to this JSON-lines file.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = attrib_core::baselines::DEFAULT_TOKEN_ENV)]
    pub token_env: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: DatasetTraces,
    #[arg(long)]
    pub layers: String,
    #[arg(long, default_value = "0.30:0.95:0.05")]
    pub thetas: String,
    #[command(flatten)]
    pub attribution: AttributionFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractorFlags {
    /// Extractor program, called with the `extract` command interface.
    #[arg(long, env = "ATTRIB_EXTRACTOR")]
    pub extractor_cmd: Option<PathBuf>,
    /// Extra arguments placed before `extract`.
    #[arg(long = "extractor-arg", allow_hyphen_values = true)]
    pub extractor_args: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Session storage directory.
    #[arg(long)]
    pub sessions: PathBuf,
    #[arg(long)]
    pub model: Option<String>,
    #[command(flatten)]
    pub extractor: ExtractorFlags,
    /// Base URL of an extractor running in HTTP mode.
    #[arg(long, conflicts_with = "extractor_cmd")]
    pub extractor_url: Option<String>,
    /// Use the built-in one-hot extractor.
    #[arg(long, conflicts_with_all = ["extractor_cmd", "extractor_url"])]
    pub synthetic: bool,
    /// Allowed CORS origin (default: any).
    #[arg(long)]
    pub cors_origin: Option<String>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("answer_sel").required(true).args(["answer", "generate"]))]
pub struct ExtractArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub doc: PathBuf,
    #[arg(long)]
    pub question: PathBuf,
    #[arg(long)]
    pub answer: Option<PathBuf>,
    #[arg(long)]
    pub generate: bool,
    #[arg(long, default_value = attrib_core::prompt::INST_V1)]
    pub template: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub extractor: ExtractorFlags,
    /// Use the built-in one-hot extractor.
    #[arg(long, conflicts_with = "extractor_cmd")]
    pub synthetic: bool,
    /// Layer count for `--synthetic`.
    #[arg(long, default_value_t = 2, requires = "synthetic")]
    pub synthetic_layers: usize,
}
