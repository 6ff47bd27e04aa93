//! Sequence encoders: a multi-window CNN with max-over-time pooling, and
//! single-layer LSTM / Bi-LSTM. Each maps a feature matrix to a fixed-size
//! vector and applies dropout to it.

mod cnn;
mod dropout;
mod lstm;

pub use cnn::{cnn_backward, cnn_forward, CnnCache, ConvFront, ConvGrads};
pub use dropout::{dropout, DropoutMode, DropoutSpec};
pub use lstm::{lstm_backward, lstm_forward, Direction, LstmCache, LstmCell, LstmFront, LstmGrads, StepCache};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::matrix::{axpy, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub enum Front {
    Cnn(ConvFront),
    Lstm(LstmFront),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrontCache {
    Cnn(CnnCache),
    Lstm(LstmCache),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrontGrads {
    Cnn(ConvGrads),
    Lstm(LstmGrads),
}

impl Front {
    pub fn output_dim(&self) -> usize {
        match self {
            Front::Cnn(c) => c.output_dim(),
            Front::Lstm(l) => l.output_dim(),
        }
    }

    pub fn forward(&self, fm: &FeatureMatrix, drop: &DropoutSpec) -> Result<(Vec<f64>, FrontCache)> {
        match self {
            Front::Cnn(c) => cnn_forward(fm, c, drop).map(|(v, k)| (v, FrontCache::Cnn(k))),
            Front::Lstm(l) => lstm_forward(fm, l, drop).map(|(v, k)| (v, FrontCache::Lstm(k))),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        match self {
            Front::Cnn(c) => c.tensors(),
            Front::Lstm(l) => l.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Front::Cnn(c) => c.tensors_mut(),
            Front::Lstm(l) => l.tensors_mut(),
        }
    }

    pub fn tensor_names(&self) -> Vec<String> {
        match self {
            Front::Cnn(c) => c.tensor_names(),
            Front::Lstm(l) => l.tensor_names(),
        }
    }
}

impl FrontGrads {
    pub fn zeros(front: &Front) -> Self {
        match front {
            Front::Cnn(c) => FrontGrads::Cnn(ConvGrads::zeros(c)),
            Front::Lstm(l) => FrontGrads::Lstm(LstmGrads::zeros(l)),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        match self {
            FrontGrads::Cnn(c) => c.tensors(),
            FrontGrads::Lstm(l) => l.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            FrontGrads::Cnn(c) => c.tensors_mut(),
            FrontGrads::Lstm(l) => l.tensors_mut(),
        }
    }

    pub fn merge(&mut self, other: &FrontGrads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(1.0, b, a);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// Gradients of a scalar loss w.r.t. every encoder parameter and every
/// input row, given the gradient on the encoder's (post-dropout) output.
pub fn front_backward(front: &Front, cache: &FrontCache, grad_out: &[f64]) -> Result<(FrontGrads, Matrix)> {
    match (front, cache) {
        (Front::Cnn(c), FrontCache::Cnn(k)) => cnn_backward(c, k, grad_out).map(|(g, dx)| (FrontGrads::Cnn(g), dx)),
        (Front::Lstm(l), FrontCache::Lstm(k)) => lstm_backward(l, k, grad_out).map(|(g, dx)| (FrontGrads::Lstm(g), dx)),
        _ => Err(Error::Dimension("encoder cache does not match the encoder type".into())),
    }
}
