use std::fmt;
use std::path::Path;

use relnet_core::backnet::{extract_feature_vectors, smo_train, svm_predict, FeatureDataset, SvmModel};
use relnet_core::corpus::{
    build_vocabulary, encode_corpus, load_corpus, save_corpus, save_instances, EncodedInstance, Label, Sentence,
    Vocabulary,
};
use relnet_core::evaluation::{confusion, EvaluationReport};
use relnet_core::features::{load_word_embeddings, EmbeddingTable};
use relnet_core::harness::{
    enumerate_nn_grid, export_heatmap, load_results, run_nn_config, run_nn_grid, run_svm_grid, save_results,
    select_best, split_dev, ExperimentConfig, NnBase, NnConfig, NnGridSpec, SelectOn,
};
use relnet_core::optim::{load_checkpoint, save_checkpoint, train, ModelSpec, NetworkModel, TrainConfig};
use relnet_core::seed::{rng_for, Purpose};
use relnet_core::synthetic::{generate_corpus, SyntheticConfig};
use relnet_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{Cli, Command, TrainOverrides, EXIT_DATA, EXIT_RUNTIME, EXIT_USAGE};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::InvalidParameter(_)) => EXIT_USAGE,
            CliError::Core(e) if e.is_data_error() => EXIT_DATA,
            CliError::Core(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let mut cfg = RunConfig::resolve(g.config.as_deref(), g.seed, g.workers, g.select_on)?;
    log::debug!("config: {}", serde_json::to_string(&cfg).map_err(Error::from)?);
    match cli.command {
        Command::Prepare { corpus, out, vocab, vocab_out } => {
            prepare(&cfg, &corpus, &out, vocab.as_deref(), vocab_out.as_deref())
        }
        Command::Train { corpus, out, overrides, history } => {
            apply(&mut cfg, &overrides);
            train_cmd(&cfg, &corpus, &out, history.as_deref())
        }
        Command::Extract { checkpoint, corpus, out } => extract(&cfg, &checkpoint, &corpus, &out),
        Command::SvmTrain { features, out, c, gamma } => {
            cfg.svm.c = c.unwrap_or(cfg.svm.c);
            cfg.svm.gamma = gamma.unwrap_or(cfg.svm.gamma);
            svm_train(&cfg, &features, &out)
        }
        Command::Eval { predictions, checkpoint, corpus, svm, features, out } => {
            let report =
                match (predictions, checkpoint, svm) {
                    (Some(p), None, None) => eval_predictions(&p)?,
                    (None, Some(ck), None) => eval_checkpoint(&cfg, &ck, corpus.as_deref().unwrap())?,
                    (None, None, Some(m)) => eval_svm(&m, features.as_deref().unwrap())?,
                    _ => return Err(CliError::Usage(
                        "eval needs exactly one of --predictions, --checkpoint with --corpus, or --svm with --features"
                            .into(),
                    )),
                };
            emit_report(&report, out.as_deref())
        }
        Command::GridNn { train, test, out, topology, overrides, best_checkpoint } => {
            apply(&mut cfg, &overrides);
            let spec = topology.map_or_else(|| cfg.nn_grid(), NnGridSpec::standard);
            grid_nn(&cfg, &spec, &train, &test, &out, best_checkpoint.as_deref())
        }
        Command::GridSvm { train, test, dev, out, heatmap, best_svm } => {
            grid_svm(&cfg, &train, &test, dev.as_deref(), &out, heatmap.as_deref(), best_svm.as_deref())
        }
        Command::Heatmap { results, out } => Ok(export_heatmap(&load_results(&results)?, &out)?),
        Command::Synth { sentences, out } => {
            Ok(save_corpus(&out, &generate_corpus(sentences, cfg.seed, &SyntheticConfig::default()))?)
        }
    }
}

fn apply(cfg: &mut RunConfig, o: &TrainOverrides) {
    if let Some(v) = o.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = o.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = o.learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = o.dropout {
        cfg.dropout = v;
    }
    if let Some(v) = &o.embeddings {
        cfg.embeddings = Some(v.clone());
    }
}

fn encode(cfg: &RunConfig, sentences: &[Sentence], vocab: &Vocabulary) -> Result<Vec<EncodedInstance>> {
    Ok(encode_corpus(sentences, vocab, &cfg.encode, cfg.unlabeled)?)
}

fn prepare(cfg: &RunConfig, corpus: &Path, out: &Path, vocab: Option<&Path>, vocab_out: Option<&Path>) -> Result<()> {
    let sentences = load_corpus(corpus)?;
    let vocab = match vocab {
        Some(p) => Vocabulary::load(p)?,
        None => build_vocabulary(&sentences, cfg.min_count)?,
    };
    let instances = encode(cfg, &sentences, &vocab)?;
    save_instances(out, &instances)?;
    if let Some(p) = vocab_out {
        vocab.save(p)?;
    }
    log::info!("encoded {} instances from {} sentences", instances.len(), sentences.len());
    Ok(())
}

/// Pretrained word table for `vocab`, adjusting the configured width to
/// the file's.
fn word_table(cfg: &mut RunConfig, vocab: &Vocabulary) -> Result<Option<EmbeddingTable>> {
    let Some(path) = cfg.embeddings.clone() else {
        return Ok(None);
    };
    let loaded = load_word_embeddings(&path, vocab, &mut rng_for(cfg.seed, Purpose::Embeddings))?;
    log::info!("{} of {} words missing from {}", loaded.oov.len(), vocab.words.len(), path.display());
    cfg.features.word_dim = loaded.table.dim();
    Ok(Some(loaded.table))
}

fn model_spec(cfg: &RunConfig) -> ModelSpec {
    ModelSpec {
        features: cfg.features.clone(),
        topology: cfg.topology.clone(),
        encode: cfg.encode,
        dropout: cfg.dropout,
    }
}

#[derive(Serialize)]
struct History<'a> {
    epochs: usize,
    loss: &'a [f64],
}

fn train_cmd(cfg: &RunConfig, corpus: &Path, out: &Path, history: Option<&Path>) -> Result<()> {
    let mut cfg = cfg.clone();
    let sentences = load_corpus(corpus)?;
    let vocab = build_vocabulary(&sentences, cfg.min_count)?;
    let data = encode(&cfg, &sentences, &vocab)?;
    let table = word_table(&mut cfg, &vocab)?;
    let model = NetworkModel::new(model_spec(&cfg), vocab, table, cfg.seed)?;
    let outcome = train(model, &data, &TrainConfig { parallel: true, ..cfg.train.clone() })?;
    save_checkpoint(&outcome.model, out)?;
    if let Some(p) = history {
        let text = serde_json::to_string_pretty(&History { epochs: outcome.history.len(), loss: &outcome.history })
            .map_err(Error::from)?;
        std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
    }
    log::info!(
        "trained on {} instances, final loss {:.6}",
        data.len(),
        outcome.history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn checkpoint_data(cfg: &RunConfig, checkpoint: &Path, corpus: &Path) -> Result<(NetworkModel, Vec<EncodedInstance>)> {
    let model = load_checkpoint(checkpoint)?;
    let sentences = load_corpus(corpus)?;
    let data = encode_corpus(&sentences, &model.vocab, &model.spec.encode, cfg.unlabeled)?;
    Ok((model, data))
}

fn extract(cfg: &RunConfig, checkpoint: &Path, corpus: &Path, out: &Path) -> Result<()> {
    let (model, data) = checkpoint_data(cfg, checkpoint, corpus)?;
    let features = extract_feature_vectors(&model, &data)?;
    features.save(out)?;
    log::info!("wrote {} feature vectors of width {}", features.len(), features.dim());
    Ok(())
}

fn svm_train(cfg: &RunConfig, features: &Path, out: &Path) -> Result<()> {
    let data = FeatureDataset::load(features)?;
    let outcome = smo_train(&data, &cfg.svm)?;
    if !outcome.converged {
        log::warn!("SMO stopped after {} iterations, max violation {:.3e}", outcome.iterations, outcome.max_violation);
    }
    outcome.model.save(out)?;
    log::info!("{} support vectors, dual objective {:.6}", outcome.model.support_vectors.len(), outcome.dual_objective);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionRow {
    pred: Label,
    gold: Label,
}

fn eval_predictions(path: &Path) -> Result<EvaluationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: PredictionRow = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        preds.push(row.pred);
        golds.push(row.gold);
    }
    report(&preds, &golds)
}

fn report(preds: &[Label], golds: &[Label]) -> Result<EvaluationReport> {
    let cm = confusion(preds, golds)?;
    let r = EvaluationReport::from_confusion(&cm)?;
    for note in r.undefined_notes(&cm) {
        log::warn!("{note}");
    }
    Ok(r)
}

fn eval_checkpoint(cfg: &RunConfig, checkpoint: &Path, corpus: &Path) -> Result<EvaluationReport> {
    let (model, data) = checkpoint_data(cfg, checkpoint, corpus)?;
    let preds = data.iter().map(|i| model.predict(i)).collect::<relnet_core::Result<Vec<_>>>()?;
    let golds: Vec<Label> = data.iter().map(|i| i.label).collect();
    report(&preds, &golds)
}

fn eval_svm(model: &Path, features: &Path) -> Result<EvaluationReport> {
    let svm = SvmModel::load(model)?;
    let data = FeatureDataset::load(features)?;
    report(&svm_predict(&svm, &data)?, &data.labels)
}

fn emit_report(report: &EvaluationReport, out: Option<&Path>) -> Result<()> {
    println!("{report}");
    if let Some(p) = out {
        std::fs::write(p, report.to_json() + "\n").map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn grid_nn(
    cfg: &RunConfig,
    spec: &NnGridSpec,
    train: &Path,
    test: &Path,
    out: &Path,
    best_ckpt: Option<&Path>,
) -> Result<()> {
    let mut cfg = cfg.clone();
    let train_s = load_corpus(train)?;
    let test_s = load_corpus(test)?;
    let (fit_s, select_s) = match cfg.select_on {
        SelectOn::Dev => split_dev(&train_s, cfg.dev_fraction, cfg.seed)?,
        SelectOn::Test => (train_s, test_s.clone()),
    };
    let vocab = build_vocabulary(&fit_s, cfg.min_count)?;
    let fit = encode(&cfg, &fit_s, &vocab)?;
    let select = encode(&cfg, &select_s, &vocab)?;
    let test_d = encode(&cfg, &test_s, &vocab)?;
    let word_table = word_table(&mut cfg, &vocab)?;
    let base = NnBase { features: cfg.features.clone(), encode: cfg.encode, vocab, word_table };
    let configs: Vec<NnConfig> = enumerate_nn_grid(spec)?;
    log::info!("sweeping {} configs on {} workers", configs.len(), cfg.workers);
    let results = run_nn_grid(&configs, &base, &fit, &select, &cfg.train, cfg.workers)?;
    save_results(out, &results)?;
    let best = select_best(&results)?;
    log::info!(
        "best on {:?}: {} (weighted F1 {:.4})",
        cfg.select_on,
        best.descriptor,
        best.weighted_f1().unwrap_or(0.0)
    );
    let (model, test_report) = run_nn_config(&configs[best.index], &base, &fit, &test_d, &cfg.train)?;
    println!("best: {}", best.descriptor);
    println!("{test_report}");
    if let Some(p) = best_ckpt {
        save_checkpoint(&model, p)?;
    }
    Ok(())
}

fn grid_svm(
    cfg: &RunConfig,
    train: &Path,
    test: &Path,
    dev: Option<&Path>,
    out: &Path,
    heatmap: Option<&Path>,
    best_svm: Option<&Path>,
) -> Result<()> {
    let train_f = FeatureDataset::load(train)?;
    let test_f = FeatureDataset::load(test)?;
    let (fit, select) = match (cfg.select_on, dev) {
        (SelectOn::Test, _) => (train_f, test_f.clone()),
        (SelectOn::Dev, Some(p)) => (train_f, FeatureDataset::load(p)?),
        (SelectOn::Dev, None) => {
            let rows: Vec<(Vec<f64>, Label)> = train_f.x.into_iter().zip(train_f.labels).collect();
            let (a, b) = split_dev(&rows, cfg.dev_fraction, cfg.seed)?;
            let unzip = |v: Vec<(Vec<f64>, Label)>| -> relnet_core::Result<FeatureDataset> {
                let (x, y) = v.into_iter().unzip();
                FeatureDataset::new(x, y)
            };
            (unzip(a)?, unzip(b)?)
        }
    };
    let results = run_svm_grid(&fit, &select, &cfg.svm_grid, cfg.seed, cfg.workers)?;
    save_results(out, &results)?;
    if let Some(p) = heatmap {
        export_heatmap(&results, p)?;
    }
    let best = select_best(&results)?;
    let ExperimentConfig::Svm { smo, .. } = best.config.clone() else {
        return Err(CliError::Core(Error::NoSuccessfulResult));
    };
    let model = smo_train(&fit, &smo)?.model;
    let test_report = report(&svm_predict(&model, &test_f)?, &test_f.labels)?;
    println!("best: {}", best.descriptor);
    println!("{test_report}");
    if let Some(p) = best_svm {
        model.save(p)?;
    }
    Ok(())
}
