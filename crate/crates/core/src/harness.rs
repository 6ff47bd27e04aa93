//! Grid sweeps over network topologies and SVM hyperparameters, model
//! selection and heatmap export.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backnet::{smo_train, svm_predict, FeatureDataset, SmoParams};
use crate::corpus::{read_json_lines, write_json_lines, EncodeConfig, EncodedInstance, Label, Vocabulary};
use crate::error::{Error, Result};
use crate::evaluation::EvaluationReport;
use crate::features::{EmbeddingTable, FeatureConfig};
use crate::optim::{train, ModelSpec, NetworkModel, Topology, TopologyKind, TrainConfig};
use crate::seed::{rng_for, Purpose};

/// Value lists of a network sweep. `filters` and `windows` apply to CNN,
/// `hidden` to the recurrent encoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnGridSpec {
    pub topology: TopologyKind,
    #[serde(default)]
    pub filters: Vec<usize>,
    #[serde(default)]
    pub windows: Vec<Vec<usize>>,
    #[serde(default)]
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
    pub postag_dim: Vec<usize>,
}

impl NnGridSpec {
    /// The value lists of the original study for one topology.
    pub fn standard(topology: TopologyKind) -> Self {
        match topology {
            TopologyKind::Cnn => Self {
                topology,
                filters: vec![50, 100, 150, 200],
                windows: vec![vec![2, 3], vec![2, 3, 4], vec![2, 3, 4, 5]],
                hidden: vec![],
                dropout: vec![0.25, 0.50, 0.75],
                postag_dim: vec![0, 50, 100],
            },
            TopologyKind::Lstm | TopologyKind::Bilstm => Self {
                topology,
                filters: vec![],
                windows: vec![],
                hidden: vec![50, 100, 150, 200],
                dropout: vec![0.0, 0.25, 0.50],
                postag_dim: vec![0, 50, 100],
            },
        }
    }
}

/// One point of a network sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnConfig {
    pub topology: Topology,
    pub dropout: f64,
    pub postag_dim: usize,
}

fn join(ws: &[usize]) -> String {
    ws.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl NnConfig {
    pub fn descriptor(&self) -> String {
        match &self.topology {
            Topology::Cnn { filters, windows } => format!(
                "CNN (Filter={filters}; Window={}; Dropout={:.2}; POS Tag={})",
                join(windows),
                self.dropout,
                self.postag_dim
            ),
            Topology::Lstm { hidden } | Topology::Bilstm { hidden } => format!(
                "{} (Hidden={hidden}; Dropout={:.2}; POS Tag={})",
                self.topology.kind(),
                self.dropout,
                self.postag_dim
            ),
        }
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidParameter(format!("grid value list `{name}` is empty")));
    }
    Ok(())
}

/// Cartesian product of the spec's value lists. CNN varies filters, then
/// windows, dropout and POS-tag width; recurrent encoders vary dropout,
/// hidden size and POS-tag width, the last list fastest.
pub fn enumerate_nn_grid(spec: &NnGridSpec) -> Result<Vec<NnConfig>> {
    nonempty("dropout", &spec.dropout)?;
    nonempty("postag_dim", &spec.postag_dim)?;
    let mut out = Vec::new();
    match spec.topology {
        TopologyKind::Cnn => {
            nonempty("filters", &spec.filters)?;
            nonempty("windows", &spec.windows)?;
            for &filters in &spec.filters {
                for windows in &spec.windows {
                    for &dropout in &spec.dropout {
                        for &postag_dim in &spec.postag_dim {
                            out.push(NnConfig {
                                topology: Topology::Cnn { filters, windows: windows.clone() },
                                dropout,
                                postag_dim,
                            });
                        }
                    }
                }
            }
        }
        kind => {
            nonempty("hidden", &spec.hidden)?;
            for &dropout in &spec.dropout {
                for &hidden in &spec.hidden {
                    for &postag_dim in &spec.postag_dim {
                        let topology = if kind == TopologyKind::Lstm {
                            Topology::Lstm { hidden }
                        } else {
                            Topology::Bilstm { hidden }
                        };
                        out.push(NnConfig { topology, dropout, postag_dim });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Nn { spec: ModelSpec, train: TrainConfig },
    Svm { c_exp: i32, gamma_exp: i32, smo: SmoParams },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentResult {
    pub index: usize,
    pub descriptor: String,
    pub config: ExperimentConfig,
    pub report: Option<EvaluationReport>,
    pub error: Option<String>,
    pub seconds: f64,
    pub seed: u64,
}

impl ExperimentResult {
    pub fn weighted_f1(&self) -> Option<f64> {
        self.report.map(|r| r.weighted_f1)
    }
}

/// What every network config in a sweep shares.
#[derive(Debug, Clone)]
pub struct NnBase {
    pub features: FeatureConfig,
    pub encode: EncodeConfig,
    pub vocab: Vocabulary,
    pub word_table: Option<EmbeddingTable>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))
}

fn evaluate_dense(model: &NetworkModel, data: &[EncodedInstance]) -> Result<EvaluationReport> {
    let preds = data.iter().map(|i| model.predict(i)).collect::<Result<Vec<_>>>()?;
    let golds: Vec<Label> = data.iter().map(|i| i.label).collect();
    EvaluationReport::from_predictions(&preds, &golds)
}

/// Trains and evaluates one network config.
pub fn run_nn_config(
    cfg: &NnConfig,
    base: &NnBase,
    train_data: &[EncodedInstance],
    eval_data: &[EncodedInstance],
    fixed: &TrainConfig,
) -> Result<(NetworkModel, EvaluationReport)> {
    let spec = nn_spec(cfg, base);
    let model = NetworkModel::new(spec, base.vocab.clone(), base.word_table.clone(), fixed.seed)?;
    let trained = train(model, train_data, &TrainConfig { parallel: false, ..fixed.clone() })?.model;
    let report = evaluate_dense(&trained, eval_data)?;
    Ok((trained, report))
}

fn nn_spec(cfg: &NnConfig, base: &NnBase) -> ModelSpec {
    ModelSpec {
        features: FeatureConfig { postag_dim: cfg.postag_dim, ..base.features.clone() },
        topology: cfg.topology.clone(),
        encode: base.encode,
        dropout: cfg.dropout,
    }
}

/// One result per config, in config order. A failing config yields a
/// result carrying its error; the sweep goes on.
pub fn run_nn_grid(
    configs: &[NnConfig],
    base: &NnBase,
    train_data: &[EncodedInstance],
    eval_data: &[EncodedInstance],
    fixed: &TrainConfig,
    workers: usize,
) -> Result<Vec<ExperimentResult>> {
    let run = |(index, cfg): (usize, &NnConfig)| {
        let start = Instant::now();
        let outcome = run_nn_config(cfg, base, train_data, eval_data, fixed);
        let seconds = start.elapsed().as_secs_f64();
        if let Err(e) = &outcome {
            log::warn!("config {index} `{}` failed: {e}", cfg.descriptor());
        }
        ExperimentResult {
            index,
            descriptor: cfg.descriptor(),
            config: ExperimentConfig::Nn { spec: nn_spec(cfg, base), train: fixed.clone() },
            report: outcome.as_ref().ok().map(|o| o.1),
            error: outcome.err().map(|e| e.to_string()),
            seconds,
            seed: fixed.seed,
        }
    };
    Ok(pool(workers.max(1))?.install(|| configs.par_iter().enumerate().map(run).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmGridSpec {
    pub c_exponents: Vec<i32>,
    pub gamma_exponents: Vec<i32>,
    /// Solver settings; `c` and `gamma` are overwritten per cell.
    pub smo: SmoParams,
}

impl Default for SvmGridSpec {
    fn default() -> Self {
        Self { c_exponents: (-3..=6).collect(), gamma_exponents: (-3..=6).collect(), smo: SmoParams::default() }
    }
}

pub fn svm_descriptor(c_exp: i32, gamma_exp: i32) -> String {
    format!("C=10^{c_exp}; Gamma=10^{gamma_exp}")
}

/// Trains one SVM per (C, γ) cell, C varying slowest.
pub fn run_svm_grid(
    train_set: &FeatureDataset,
    eval_set: &FeatureDataset,
    grid: &SvmGridSpec,
    seed: u64,
    workers: usize,
) -> Result<Vec<ExperimentResult>> {
    train_set.check_trainable()?;
    nonempty("c_exponents", &grid.c_exponents)?;
    nonempty("gamma_exponents", &grid.gamma_exponents)?;
    let cells: Vec<(i32, i32)> =
        grid.c_exponents.iter().flat_map(|&c| grid.gamma_exponents.iter().map(move |&g| (c, g))).collect();
    let run = |(index, &(c_exp, gamma_exp)): (usize, &(i32, i32))| {
        let start = Instant::now();
        let smo = SmoParams { c: 10f64.powi(c_exp), gamma: 10f64.powi(gamma_exp), ..grid.smo };
        let outcome = smo_train(train_set, &smo).and_then(|o| {
            if !o.converged {
                log::warn!("{} stopped after {} iterations", svm_descriptor(c_exp, gamma_exp), o.iterations);
            }
            let preds = svm_predict(&o.model, eval_set)?;
            EvaluationReport::from_predictions(&preds, &eval_set.labels)
        });
        ExperimentResult {
            index,
            descriptor: svm_descriptor(c_exp, gamma_exp),
            config: ExperimentConfig::Svm { c_exp, gamma_exp, smo },
            report: outcome.as_ref().ok().copied(),
            error: outcome.err().map(|e| e.to_string()),
            seconds: start.elapsed().as_secs_f64(),
            seed,
        }
    };
    Ok(pool(workers.max(1))?.install(|| cells.par_iter().enumerate().map(run).collect()))
}

/// Highest weighted F1 among successful results; ties go to the
/// lexicographically smallest descriptor.
pub fn select_best(results: &[ExperimentResult]) -> Result<&ExperimentResult> {
    results
        .iter()
        .filter_map(|r| r.weighted_f1().map(|f| (f, r)))
        .reduce(
            |best, cur| {
                if cur.0 > best.0 || (cur.0 == best.0 && cur.1.descriptor < best.1.descriptor) {
                    cur
                } else {
                    best
                }
            },
        )
        .map(|(_, r)| r)
        .ok_or(Error::NoSuccessfulResult)
}

pub fn save_results(path: impl AsRef<Path>, results: &[ExperimentResult]) -> Result<()> {
    write_json_lines(path, results)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ExperimentResult>> {
    read_json_lines(path)
}

/// Weighted F1 over the (C, γ) plane. `values[g][c]` belongs to
/// `gamma_exponents[g]` and `c_exponents[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub c_exponents: Vec<i32>,
    pub gamma_exponents: Vec<i32>,
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn from_results(results: &[ExperimentResult]) -> Result<Self> {
        let mut cells: BTreeMap<(i32, i32), Option<f64>> = BTreeMap::new();
        for r in results {
            if let ExperimentConfig::Svm { c_exp, gamma_exp, .. } = r.config {
                if cells.insert((c_exp, gamma_exp), r.weighted_f1()).is_some() {
                    return Err(Error::IncompleteGrid(format!("duplicate cell {}", svm_descriptor(c_exp, gamma_exp))));
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::IncompleteGrid("no SVM results".into()));
        }
        let mut c_exponents: Vec<i32> = cells.keys().map(|k| k.0).collect();
        let mut gamma_exponents: Vec<i32> = cells.keys().map(|k| k.1).collect();
        c_exponents.dedup();
        gamma_exponents.sort_unstable();
        gamma_exponents.dedup();
        let mut values = Vec::with_capacity(gamma_exponents.len());
        for &g in &gamma_exponents {
            let mut row = Vec::with_capacity(c_exponents.len());
            for &c in &c_exponents {
                match cells.get(&(c, g)) {
                    Some(Some(v)) => row.push(*v),
                    Some(None) => return Err(Error::IncompleteGrid(format!("cell {} failed", svm_descriptor(c, g)))),
                    None => return Err(Error::IncompleteGrid(format!("missing cell {}", svm_descriptor(c, g)))),
                }
            }
            values.push(row);
        }
        Ok(Self { c_exponents, gamma_exponents, values })
    }

    /// Header row of C exponents, then one row per γ exponent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma\\C");
        for c in &self.c_exponents {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (g, row) in self.gamma_exponents.iter().zip(&self.values) {
            out.push_str(&g.to_string());
            for v in row {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse { path: "<heatmap>".into(), line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty heatmap".into()))?;
        let c_exponents = header
            .split(',')
            .skip(1)
            .map(|s| s.trim().parse::<i32>().map_err(|e| bad(1, format!("C exponent `{s}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut gamma_exponents = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines {
            let mut fields = line.split(',');
            let g = fields.next().unwrap_or_default();
            gamma_exponents
                .push(g.trim().parse::<i32>().map_err(|e| bad(i + 1, format!("gamma exponent `{g}`: {e}")))?);
            let row = fields
                .map(|s| s.trim().parse::<f64>().map_err(|e| bad(i + 1, format!("cell `{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != c_exponents.len() {
                return Err(bad(i + 1, format!("{} cells, header has {}", row.len(), c_exponents.len())));
            }
            values.push(row);
        }
        Ok(Self { c_exponents, gamma_exponents, values })
    }
}

pub fn heatmap_csv(results: &[ExperimentResult]) -> Result<String> {
    Ok(Heatmap::from_results(results)?.to_csv())
}

pub fn export_heatmap(results: &[ExperimentResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv = heatmap_csv(results)?;
    std::fs::write(path, csv).map_err(|e| Error::io(path, e))
}

pub fn parse_heatmap(path: impl AsRef<Path>) -> Result<Heatmap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Heatmap::parse(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse { path: path.to_path_buf(), line, message },
        other => other,
    })
}

/// Which split drives model selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectOn {
    #[default]
    Dev,
    Test,
}

impl std::str::FromStr for SelectOn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dev" => Ok(SelectOn::Dev),
            "test" => Ok(SelectOn::Test),
            other => Err(Error::InvalidParameter(format!("select-on must be dev or test, got `{other}`"))),
        }
    }
}

pub const DEV_FRACTION: f64 = 0.1;

/// Seeded held-out split, `(train, dev)`. Both parts keep input order.
pub fn split_dev<T: Clone>(sentences: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!("dev fraction {fraction} must lie in [0, 1)")));
    }
    let n = sentences.len();
    let n_dev = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, Purpose::Split));
    let mut is_dev = vec![false; n];
    for &i in &idx[..n_dev] {
        is_dev[i] = true;
    }
    let (dev, train): (Vec<_>, Vec<_>) = sentences.iter().cloned().zip(is_dev).partition(|(_, d)| *d);
    Ok((train.into_iter().map(|p| p.0).collect(), dev.into_iter().map(|p| p.0).collect()))
}
