use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dropout::{dropout, DropoutSpec};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, TRAINABLE_INIT_HALF_WIDTH};
use crate::matrix::{axpy, dot, sigmoid, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
    Bidirectional,
}

/// One LSTM cell. Gate blocks in `w`, `u` and `b` are ordered
/// input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden: usize,
    /// `4H × D`
    pub w: Vec<f64>,
    /// `4H × H`
    pub u: Vec<f64>,
    /// `4H`
    pub b: Vec<f64>,
}

const INPUT: usize = 0;
const FORGET: usize = 1;
const CANDIDATE: usize = 2;
const OUTPUT: usize = 3;

impl LstmCell {
    /// Uniform(-0.05, 0.05) weights, forget-gate bias 1.0, other biases 0.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let h = TRAINABLE_INIT_HALF_WIDTH;
        let mut uniform = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-h..h)).collect() };
        let w = uniform(4 * hidden * input_dim);
        let u = uniform(4 * hidden * hidden);
        let mut b = vec![0.0; 4 * hidden];
        b[FORGET * hidden..(FORGET + 1) * hidden].fill(1.0);
        Self { input_dim, hidden, w, u, b }
    }

    fn zeros_like(&self) -> Self {
        Self {
            input_dim: self.input_dim,
            hidden: self.hidden,
            w: vec![0.0; self.w.len()],
            u: vec![0.0; self.u.len()],
            b: vec![0.0; self.b.len()],
        }
    }

    fn tensors(&self) -> [&[f64]; 3] {
        [&self.w, &self.u, &self.b]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [&mut self.w, &mut self.u, &mut self.b]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub row: usize,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gates, `4H`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

fn run_cell(cell: &LstmCell, x: &Matrix, order: impl Iterator<Item = usize>) -> (Vec<f64>, Vec<StepCache>) {
    let hd = cell.hidden;
    let d = cell.input_dim;
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    let mut steps = Vec::new();
    let mut z = vec![0.0; 4 * hd];
    for row in order {
        let xt = x.row(row);
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = dot(&cell.w[k * d..(k + 1) * d], xt) + dot(&cell.u[k * hd..(k + 1) * hd], &h) + cell.b[k];
        }
        let mut gates = vec![0.0; 4 * hd];
        for j in 0..hd {
            gates[INPUT * hd + j] = sigmoid(z[INPUT * hd + j]);
            gates[FORGET * hd + j] = sigmoid(z[FORGET * hd + j]);
            gates[CANDIDATE * hd + j] = z[CANDIDATE * hd + j].tanh();
            gates[OUTPUT * hd + j] = sigmoid(z[OUTPUT * hd + j]);
        }
        let c_prev = c.clone();
        let h_prev = h.clone();
        let mut tanh_c = vec![0.0; hd];
        for j in 0..hd {
            c[j] = gates[FORGET * hd + j] * c_prev[j] + gates[INPUT * hd + j] * gates[CANDIDATE * hd + j];
            tanh_c[j] = c[j].tanh();
            h[j] = gates[OUTPUT * hd + j] * tanh_c[j];
        }
        steps.push(StepCache { row, h_prev, c_prev, gates, tanh_c });
    }
    (h, steps)
}

/// Backpropagation through time from a gradient on the final hidden state.
fn cell_backward(
    cell: &LstmCell,
    steps: &[StepCache],
    dh_final: &[f64],
    x: &Matrix,
    dx: &mut Matrix,
    grads: &mut LstmCell,
) {
    let hd = cell.hidden;
    let d = cell.input_dim;
    let mut dh = dh_final.to_vec();
    let mut dc = vec![0.0; hd];
    let mut dz = vec![0.0; 4 * hd];
    for step in steps.iter().rev() {
        let g = &step.gates;
        for j in 0..hd {
            let (i, f, cand, o) = (g[INPUT * hd + j], g[FORGET * hd + j], g[CANDIDATE * hd + j], g[OUTPUT * hd + j]);
            let tc = step.tanh_c[j];
            let d_o = dh[j] * tc;
            dc[j] += dh[j] * o * (1.0 - tc * tc);
            let d_i = dc[j] * cand;
            let d_cand = dc[j] * i;
            let d_f = dc[j] * step.c_prev[j];
            dz[INPUT * hd + j] = d_i * i * (1.0 - i);
            dz[FORGET * hd + j] = d_f * f * (1.0 - f);
            dz[CANDIDATE * hd + j] = d_cand * (1.0 - cand * cand);
            dz[OUTPUT * hd + j] = d_o * o * (1.0 - o);
            dc[j] *= f;
        }
        let xt = x.row(step.row);
        dh.iter_mut().for_each(|v| *v = 0.0);
        let dxt = dx.row_mut(step.row);
        for (k, &dzk) in dz.iter().enumerate() {
            if dzk == 0.0 {
                continue;
            }
            axpy(dzk, xt, &mut grads.w[k * d..(k + 1) * d]);
            axpy(dzk, &step.h_prev, &mut grads.u[k * hd..(k + 1) * hd]);
            grads.b[k] += dzk;
            axpy(dzk, &cell.w[k * d..(k + 1) * d], dxt);
            axpy(dzk, &cell.u[k * hd..(k + 1) * hd], &mut dh);
        }
    }
}

/// Single-layer LSTM encoder. `Backward` runs one cell from the last real
/// token to the first; `Bidirectional` owns one cell per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmFront {
    pub direction: Direction,
    pub forward: Option<LstmCell>,
    pub backward: Option<LstmCell>,
}

impl LstmFront {
    pub fn new<R: Rng + ?Sized>(direction: Direction, input_dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidParameter("LSTM hidden size must be positive".into()));
        }
        let forward = matches!(direction, Direction::Forward | Direction::Bidirectional)
            .then(|| LstmCell::new(input_dim, hidden, rng));
        let backward = matches!(direction, Direction::Backward | Direction::Bidirectional)
            .then(|| LstmCell::new(input_dim, hidden, rng));
        Ok(Self { direction, forward, backward })
    }

    pub fn from_cells(forward: Option<LstmCell>, backward: Option<LstmCell>) -> Result<Self> {
        let direction = match (&forward, &backward) {
            (Some(_), Some(_)) => Direction::Bidirectional,
            (Some(_), None) => Direction::Forward,
            (None, Some(_)) => Direction::Backward,
            (None, None) => return Err(Error::InvalidParameter("LSTM needs at least one cell".into())),
        };
        Ok(Self { direction, forward, backward })
    }

    fn cells(&self) -> impl Iterator<Item = &LstmCell> {
        self.forward.iter().chain(self.backward.iter())
    }

    pub fn hidden(&self) -> usize {
        self.cells().next().map_or(0, |c| c.hidden)
    }

    pub fn input_dim(&self) -> usize {
        self.cells().next().map_or(0, |c| c.input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.hidden() * self.cells().count()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.cells().flat_map(LstmCell::tensors).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.forward.iter_mut().chain(self.backward.iter_mut()).flat_map(LstmCell::tensors_mut).collect()
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (dir, cell) in [("fwd", &self.forward), ("bwd", &self.backward)] {
            if cell.is_some() {
                names.extend(["w", "u", "b"].map(|t| format!("lstm.{dir}.{t}")));
            }
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    pub input: Matrix,
    pub forward: Option<Vec<StepCache>>,
    pub backward: Option<Vec<StepCache>>,
    pub mask: Vec<f64>,
}

/// Gradients mirror the front's cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub forward: Option<LstmCell>,
    pub backward: Option<LstmCell>,
}

impl LstmGrads {
    pub fn zeros(front: &LstmFront) -> Self {
        Self {
            forward: front.forward.as_ref().map(LstmCell::zeros_like),
            backward: front.backward.as_ref().map(LstmCell::zeros_like),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.forward.iter().chain(self.backward.iter()).flat_map(LstmCell::tensors).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.forward.iter_mut().chain(self.backward.iter_mut()).flat_map(LstmCell::tensors_mut).collect()
    }
}

/// Runs over the non-PAD prefix only, from a zero state. Returns the final
/// forward hidden state, the reversed pass's state after the first token,
/// or both concatenated (forward first).
pub fn lstm_forward(fm: &FeatureMatrix, front: &LstmFront, drop: &DropoutSpec) -> Result<(Vec<f64>, LstmCache)> {
    let x = &fm.values;
    if x.cols() != front.input_dim() {
        return Err(Error::Dimension(format!("LSTM expects input dim {}, got {}", front.input_dim(), x.cols())));
    }
    let n = fm.len.min(x.rows());
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let mut out = Vec::with_capacity(front.output_dim());
    let forward = front.forward.as_ref().map(|cell| {
        let (h, steps) = run_cell(cell, x, 0..n);
        out.extend_from_slice(&h);
        steps
    });
    let backward = front.backward.as_ref().map(|cell| {
        let (h, steps) = run_cell(cell, x, (0..n).rev());
        out.extend_from_slice(&h);
        steps
    });
    let (out, mask) = dropout(&out, drop)?;
    Ok((out, LstmCache { input: x.clone(), forward, backward, mask }))
}

pub fn lstm_backward(front: &LstmFront, cache: &LstmCache, grad_out: &[f64]) -> Result<(LstmGrads, Matrix)> {
    if grad_out.len() != front.output_dim() || cache.mask.len() != front.output_dim() {
        return Err(Error::Dimension(format!(
            "LSTM output gradient has {} components, expected {}",
            grad_out.len(),
            front.output_dim()
        )));
    }
    let g: Vec<f64> = grad_out.iter().zip(&cache.mask).map(|(g, m)| g * m).collect();
    let hd = front.hidden();
    let mut grads = LstmGrads::zeros(front);
    let mut dx = Matrix::zeros(cache.input.rows(), cache.input.cols());
    let mut offset = 0;
    if let (Some(cell), Some(steps), Some(cg)) = (&front.forward, &cache.forward, &mut grads.forward) {
        cell_backward(cell, steps, &g[offset..offset + hd], &cache.input, &mut dx, cg);
        offset += hd;
    }
    if let (Some(cell), Some(steps), Some(cg)) = (&front.backward, &cache.backward, &mut grads.backward) {
        cell_backward(cell, steps, &g[offset..offset + hd], &cache.input, &mut dx, cg);
    }
    Ok((grads, dx))
}
