mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relnet_core::harness::SelectOn;
use relnet_core::optim::TopologyKind;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "relnet",
    version,
    about = "Relation detection between entity pairs with CNN/LSTM encoders and dense or RBF-SVM heads"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// JSON run configuration; unknown keys are rejected [default: built-in defaults]
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root seed for every random stream; falls back to the config file, then RELNET_SEED [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for grid sweeps [default: 1]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Split used for model selection in grid sweeps [default: dev]
    #[arg(long, global = true, value_parser = parse_select_on, value_name = "dev|test")]
    pub select_on: Option<SelectOn>,
}

fn parse_select_on(s: &str) -> Result<SelectOn, String> {
    s.parse().map_err(|e: relnet_core::Error| e.to_string())
}

fn parse_topology(s: &str) -> Result<TopologyKind, String> {
    s.parse().map_err(|e: relnet_core::Error| e.to_string())
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Encode an annotated corpus into an instances file
    Prepare {
        /// JSON-lines corpus [required]
        #[arg(long)]
        corpus: PathBuf,
        /// Encoded instances output (JSON lines) [required]
        #[arg(long)]
        out: PathBuf,
        /// Existing vocabulary to encode with [default: built from the corpus]
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Write the vocabulary used here [default: not written]
        #[arg(long)]
        vocab_out: Option<PathBuf>,
    },
    /// Train the network with its dense softmax head and write a checkpoint
    Train {
        /// JSON-lines training corpus [required]
        #[arg(long)]
        corpus: PathBuf,
        /// Checkpoint output [required]
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Per-epoch loss history as JSON [default: not written]
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Write dropout-layer feature vectors of a corpus
    Extract {
        /// [required]
        #[arg(long)]
        checkpoint: PathBuf,
        /// [required]
        #[arg(long)]
        corpus: PathBuf,
        /// Feature file output (JSON lines of {label, x}) [required]
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an RBF SVM on extracted features
    SvmTrain {
        /// [required]
        #[arg(long)]
        features: PathBuf,
        /// SVM model output (JSON) [required]
        #[arg(long)]
        out: PathBuf,
        /// Box constraint C [default: 1]
        #[arg(long)]
        c: Option<f64>,
        /// RBF width gamma [default: 0.1]
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Evaluate predictions, a checkpoint on a corpus, or an SVM on features
    Eval {
        /// JSON lines of {"pred": LABEL, "gold": LABEL}
        #[arg(long, conflicts_with_all = ["checkpoint", "svm"])]
        predictions: Option<PathBuf>,
        /// Checkpoint evaluated with its dense head; needs --corpus
        #[arg(long, requires = "corpus", conflicts_with = "svm")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// SVM model evaluated on --features
        #[arg(long, requires = "features")]
        svm: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Report JSON output [default: not written]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep network configurations and report the best one
    GridNn {
        /// JSON-lines training corpus; the dev split is drawn from it [required]
        #[arg(long)]
        train: PathBuf,
        /// JSON-lines test corpus [required]
        #[arg(long)]
        test: PathBuf,
        /// Sweep results output (JSON lines) [required]
        #[arg(long)]
        out: PathBuf,
        /// Encoder family of the standard grid [default: the config topology]
        #[arg(long, value_parser = parse_topology, value_name = "cnn|lstm|bilstm")]
        topology: Option<TopologyKind>,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Checkpoint of the best configuration [default: not written]
        #[arg(long)]
        best_checkpoint: Option<PathBuf>,
    },
    /// Sweep SVM C and gamma over extracted features
    GridSvm {
        /// Training features [required]
        #[arg(long)]
        train: PathBuf,
        /// Test features [required]
        #[arg(long)]
        test: PathBuf,
        /// Selection features [default: a seeded split of --train]
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Sweep results output (JSON lines) [required]
        #[arg(long)]
        out: PathBuf,
        /// Heatmap CSV output [default: not written]
        #[arg(long)]
        heatmap: Option<PathBuf>,
        /// SVM model of the best cell [default: not written]
        #[arg(long)]
        best_svm: Option<PathBuf>,
    },
    /// Turn SVM sweep results into a heatmap CSV
    Heatmap {
        /// [required]
        #[arg(long)]
        results: PathBuf,
        /// [required]
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic annotated corpus
    Synth {
        /// Number of sentences
        #[arg(long, default_value_t = 2000)]
        sentences: usize,
        /// [required]
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct TrainOverrides {
    /// Training epochs [default: 2]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Dropout rate on the encoder output [default: 0.25]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// word2vec text embeddings [default: random word vectors]
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
