//! RBF-kernel SVM trained by sequential minimal optimization.
//!
//! The solver works on the dual in minimisation form,
//! `f(α) = ½ αᵀQα − Σα` with `Q_ij = y_i y_j K(x_i, x_j)`, subject to
//! `0 ≤ α_i ≤ C` and `Σ y_i α_i = 0`. Each iteration picks the working pair
//! with second-order information (first index: maximal KKT violator; second:
//! largest guaranteed decrease), solves the two-variable subproblem
//! analytically and updates the gradient `G = Qα − 1`. It stops once the
//! maximal violation `m(α) − M(α)` drops below `tol`.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;
use std::rc::Rc;

use rayon::prelude::*;
use serde::Deserialize;

use super::FeatureDataset;
use crate::corpus::Label;
use crate::error::{Error, Result};

pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("kernel inputs have {} and {} components", x.len(), y.len())));
    }
    Ok(rbf_unchecked(x, y, gamma))
}

#[inline]
fn rbf_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoParams {
    pub c: f64,
    pub gamma: f64,
    /// Stopping threshold on the maximal KKT violation.
    pub tol: f64,
    /// Iteration budget, in units of `n` pair updates.
    pub max_passes: usize,
    /// Kernel rows kept in the LRU cache.
    pub cache_rows: usize,
    /// Record the dual objective after every accepted update.
    pub record_objective: bool,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self { c: 1.0, gamma: 0.1, tol: 1e-3, max_passes: 100, cache_rows: 4096, record_objective: false }
    }
}

/// Trained SVM: support vectors with `α_i > 0`, their coefficients
/// `α_i y_i`, and the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
}

#[derive(Debug, Clone)]
pub struct SmoOutcome {
    pub model: SvmModel,
    /// Full dual vector, one entry per training point.
    pub alphas: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective `Σα − ½ αᵀQα` at the returned iterate.
    pub dual_objective: f64,
    /// `m(α) − M(α)` at the returned iterate.
    pub max_violation: f64,
    /// Dual objective after each update, when requested.
    pub objective_trace: Vec<f64>,
}

const TAU: f64 = 1e-12;

struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    capacity: usize,
    rows: HashMap<usize, Rc<Vec<f64>>>,
    order: VecDeque<usize>,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64, capacity: usize) -> Self {
        Self { x, gamma, capacity: capacity.max(2), rows: HashMap::new(), order: VecDeque::new() }
    }

    fn row(&mut self, i: usize) -> Rc<Vec<f64>> {
        if let Some(r) = self.rows.get(&i) {
            return Rc::clone(r);
        }
        let xi = &self.x[i];
        let gamma = self.gamma;
        let row: Vec<f64> = if self.x.len() >= 512 {
            self.x.par_iter().map(|xj| rbf_unchecked(xi, xj, gamma)).collect()
        } else {
            self.x.iter().map(|xj| rbf_unchecked(xi, xj, gamma)).collect()
        };
        let row = Rc::new(row);
        if self.rows.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows.remove(&old);
            }
        }
        self.rows.insert(i, Rc::clone(&row));
        self.order.push_back(i);
        row
    }
}

fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>()
}

pub fn smo_train(data: &FeatureDataset, params: &SmoParams) -> Result<SmoOutcome> {
    data.check_trainable()?;
    if !(params.c > 0.0) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    if !(params.gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", params.gamma)));
    }
    let n = data.len();
    let c = params.c;
    let y: Vec<f64> = data.labels.iter().map(|l| l.sign()).collect();
    let mut kernel = KernelRows::new(&data.x, params.gamma, params.cache_rows);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut trace = Vec::new();
    let max_iter = params.max_passes.saturating_mul(n).max(1);
    let mut iterations = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;

    while iterations < max_iter {
        // first index: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        // second index over I_low, by largest decrease of the objective
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        let ki = (i != usize::MAX).then(|| kernel.row(i));
        for t in 0..n {
            let in_low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            if let Some(ki) = &ki {
                let grad_diff = gmax + v;
                if grad_diff > 0.0 {
                    let quad = (2.0 - 2.0 * ki[t]).max(TAU);
                    let obj = -grad_diff * grad_diff / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }
        violation = gmax + gmax2;
        if violation < params.tol || i == usize::MAX || j == usize::MAX {
            converged = true;
            break;
        }
        let ki = ki.expect("first index selected");
        let kj = kernel.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        update_pair(&mut alpha, &grad, &y, i, j, ki[j], c);
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
        iterations += 1;
        if params.record_objective {
            trace.push(dual_objective(&alpha, &grad));
        }
    }
    if !converged {
        log::warn!(
            "SMO stopped after {iterations} iterations with KKT violation {violation:.3e} (tol {:.1e})",
            params.tol
        );
    }

    let bias = compute_bias(&alpha, &grad, &y, c);
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(data.x[t].clone());
            dual_coefs.push(alpha[t] * y[t]);
        }
    }
    Ok(SmoOutcome {
        model: SvmModel { support_vectors, dual_coefs, bias, gamma: params.gamma, c },
        dual_objective: dual_objective(&alpha, &grad),
        alphas: alpha,
        converged,
        iterations,
        max_violation: violation,
        objective_trace: trace,
    })
}

/// Exact minimiser of the two-variable subproblem, clipped to the box.
fn update_pair(alpha: &mut [f64], grad: &[f64], y: &[f64], i: usize, j: usize, kij: f64, c: f64) {
    let quad = (2.0 - 2.0 * kij).max(TAU);
    let (mut ai, mut aj) = (alpha[i], alpha[j]);
    if y[i] != y[j] {
        let delta = (-grad[i] - grad[j]) / quad;
        let diff = ai - aj;
        ai += delta;
        aj += delta;
        if diff > 0.0 {
            if aj < 0.0 {
                aj = 0.0;
                ai = diff;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = -diff;
        }
        if diff > 0.0 {
            if ai > c {
                ai = c;
                aj = c - diff;
            }
        } else if aj > c {
            aj = c;
            ai = c + diff;
        }
    } else {
        let delta = (grad[i] - grad[j]) / quad;
        let sum = ai + aj;
        ai -= delta;
        aj += delta;
        if sum > c {
            if ai > c {
                ai = c;
                aj = sum - c;
            }
        } else if aj < 0.0 {
            aj = 0.0;
            ai = sum;
        }
        if sum > c {
            if aj > c {
                aj = c;
                ai = sum - c;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = sum;
        }
    }
    alpha[i] = ai;
    alpha[j] = aj;
}

/// Mean of `−y_i G_i` over free vectors; without free vectors, the
/// midpoint of the feasible interval.
fn compute_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let r = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    -r
}

/// Decision value `Σ (α_i y_i) K(sv_i, x) + b`; positive scores are TRUE,
/// zero and below FALSE.
pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<(f64, Label)> {
    if let Some(sv) = model.support_vectors.first() {
        if sv.len() != x.len() {
            return Err(Error::Dimension(format!("SVM expects {} features, got {}", sv.len(), x.len())));
        }
    }
    let score = model
        .support_vectors
        .iter()
        .zip(&model.dual_coefs)
        .map(|(sv, a)| a * rbf_unchecked(sv, x, model.gamma))
        .sum::<f64>()
        + model.bias;
    Ok((score, Label::from(score > 0.0)))
}

fn fmt17(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SvmFile {
    gamma: f64,
    c: f64,
    bias: f64,
    dual_coefs: Vec<f64>,
    support_vectors: Vec<Vec<f64>>,
}

impl SvmModel {
    /// JSON with every number written to 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\"gamma\":");
        fmt17(&mut s, self.gamma);
        s.push_str(",\"c\":");
        fmt17(&mut s, self.c);
        s.push_str(",\"bias\":");
        fmt17(&mut s, self.bias);
        s.push_str(",\"dual_coefs\":[");
        for (k, a) in self.dual_coefs.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            fmt17(&mut s, *a);
        }
        s.push_str("],\"support_vectors\":[");
        for (k, sv) in self.support_vectors.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            s.push('[');
            for (m, v) in sv.iter().enumerate() {
                if m > 0 {
                    s.push(',');
                }
                fmt17(&mut s, *v);
            }
            s.push(']');
        }
        s.push_str("]}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SvmFile = serde_json::from_str(text)?;
        if f.dual_coefs.len() != f.support_vectors.len() {
            return Err(Error::LengthMismatch { left: f.dual_coefs.len(), right: f.support_vectors.len() });
        }
        if let Some(first) = f.support_vectors.first() {
            if f.support_vectors.iter().any(|sv| sv.len() != first.len()) {
                return Err(Error::Dimension("support vectors differ in length".into()));
            }
        }
        Ok(Self { support_vectors: f.support_vectors, dual_coefs: f.dual_coefs, bias: f.bias, gamma: f.gamma, c: f.c })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), line: 1, message: e.to_string() })
    }
}
