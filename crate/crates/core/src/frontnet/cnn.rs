use rand::Rng;

use super::dropout::{dropout, DropoutSpec};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, TRAINABLE_INIT_HALF_WIDTH};
use crate::matrix::{axpy, dot, Matrix};

/// Multi-window convolution with tanh activation and max-over-time pooling.
///
/// Output layout: for each window size in order, `filters` pooled values.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFront {
    pub windows: Vec<usize>,
    pub filters: usize,
    pub input_dim: usize,
    /// Per window: `filters × (window · input_dim)`, filter-major.
    pub kernels: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ConvFront {
    pub fn new<R: Rng + ?Sized>(windows: &[usize], filters: usize, input_dim: usize, rng: &mut R) -> Result<Self> {
        if windows.is_empty() || windows.contains(&0) || filters == 0 {
            return Err(Error::InvalidParameter(format!(
                "CNN needs non-empty positive windows and filters, got {windows:?} x {filters}"
            )));
        }
        let h = TRAINABLE_INIT_HALF_WIDTH;
        let kernels =
            windows.iter().map(|&w| (0..filters * w * input_dim).map(|_| rng.random_range(-h..h)).collect()).collect();
        Ok(Self {
            windows: windows.to_vec(),
            filters,
            input_dim,
            kernels,
            biases: vec![vec![0.0; filters]; windows.len()],
        })
    }

    pub fn output_dim(&self) -> usize {
        self.filters * self.windows.len()
    }

    pub fn max_window(&self) -> usize {
        self.windows.iter().copied().max().unwrap_or(0)
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.kernels.iter().zip(&self.biases).flat_map(|(k, b)| [k.as_slice(), b.as_slice()]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.kernels
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(k, b)| [k.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }

    pub fn tensor_names(&self) -> Vec<String> {
        self.windows.iter().flat_map(|w| [format!("cnn.w{w}.kernel"), format!("cnn.w{w}.bias")]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnCache {
    pub input: Matrix,
    /// Pooled activations before dropout.
    pub pooled: Vec<f64>,
    /// Winning position per output component.
    pub argmax: Vec<usize>,
    pub mask: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub kernels: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ConvGrads {
    pub fn zeros(conv: &ConvFront) -> Self {
        Self {
            kernels: conv.kernels.iter().map(|k| vec![0.0; k.len()]).collect(),
            biases: conv.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.kernels.iter().zip(&self.biases).flat_map(|(k, b)| [k.as_slice(), b.as_slice()]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.kernels
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(k, b)| [k.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }
}

/// Convolves over the full padded length. Pooling ties go to the lowest
/// position.
pub fn cnn_forward(fm: &FeatureMatrix, conv: &ConvFront, drop: &DropoutSpec) -> Result<(Vec<f64>, CnnCache)> {
    let x = &fm.values;
    if x.cols() != conv.input_dim {
        return Err(Error::Dimension(format!("CNN expects input dim {}, got {}", conv.input_dim, x.cols())));
    }
    let t_len = x.rows();
    if t_len < conv.max_window() {
        return Err(Error::SequenceTooShort { len: t_len, window: conv.max_window() });
    }
    let f_count = conv.filters;
    let mut pooled = Vec::with_capacity(conv.output_dim());
    let mut argmax = Vec::with_capacity(conv.output_dim());
    let mut best = vec![0.0; f_count];
    let mut best_pos = vec![0usize; f_count];
    for (wi, &w) in conv.windows.iter().enumerate() {
        let span = w * conv.input_dim;
        let kernel = &conv.kernels[wi];
        let bias = &conv.biases[wi];
        best.iter_mut().for_each(|b| *b = f64::NEG_INFINITY);
        for p in 0..=t_len - w {
            let block = x.row_block(p, w);
            for f in 0..f_count {
                let pre = dot(&kernel[f * span..(f + 1) * span], block) + bias[f];
                if pre > best[f] {
                    best[f] = pre;
                    best_pos[f] = p;
                }
            }
        }
        pooled.extend(best.iter().map(|b| b.tanh()));
        argmax.extend_from_slice(&best_pos);
    }
    let (out, mask) = dropout(&pooled, drop)?;
    Ok((out, CnnCache { input: x.clone(), pooled, argmax, mask }))
}

pub fn cnn_backward(conv: &ConvFront, cache: &CnnCache, grad_out: &[f64]) -> Result<(ConvGrads, Matrix)> {
    if grad_out.len() != conv.output_dim() || cache.argmax.len() != conv.output_dim() {
        return Err(Error::Dimension(format!(
            "CNN output gradient has {} components, expected {}",
            grad_out.len(),
            conv.output_dim()
        )));
    }
    let mut grads = ConvGrads::zeros(conv);
    let mut dx = Matrix::zeros(cache.input.rows(), cache.input.cols());
    let f_count = conv.filters;
    for (wi, &w) in conv.windows.iter().enumerate() {
        let span = w * conv.input_dim;
        for f in 0..f_count {
            let j = wi * f_count + f;
            let y = cache.pooled[j];
            let dpre = grad_out[j] * cache.mask[j] * (1.0 - y * y);
            if dpre == 0.0 {
                continue;
            }
            let p = cache.argmax[j];
            let kernel = &conv.kernels[wi][f * span..(f + 1) * span];
            axpy(dpre, cache.input.row_block(p, w), &mut grads.kernels[wi][f * span..(f + 1) * span]);
            grads.biases[wi][f] += dpre;
            axpy(dpre, kernel, dx.row_block_mut(p, w));
        }
    }
    Ok((grads, dx))
}
