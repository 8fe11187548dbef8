//! Hand-crafted workload summaries with a single-layer softmax classifier.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::nn::{argmax, softmax};
use crate::trace::IoRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TwsdType {
    Strided,
    Sequential,
    Random,
    Overlapped,
}

impl TwsdType {
    pub const ALL: [TwsdType; 4] = [TwsdType::Strided, TwsdType::Sequential, TwsdType::Random, TwsdType::Overlapped];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwsdConfig {
    pub seq_threshold_bytes: u64,
    pub stride_pages: u64,
    pub history: usize,
}

impl Default for TwsdConfig {
    fn default() -> Self {
        Self {
            seq_threshold_bytes: 64 * 1024,
            stride_pages: 8,
            history: 16,
        }
    }
}

/// Sequential beats Overlapped beats Strided beats Random. `history` holds
/// the most recent requests, oldest first.
pub fn twsd_classify(req: &IoRequest, history: &[IoRequest], cfg: &TwsdConfig) -> TwsdType {
    let (start, end) = (req.page_id, req.end_page());
    if req.size_bytes() >= cfg.seq_threshold_bytes
        || history.iter().any(|h| start == h.end_page() || end == h.page_id)
    {
        return TwsdType::Sequential;
    }
    if history.iter().any(|h| start < h.end_page() && h.page_id < end) {
        return TwsdType::Overlapped;
    }
    let gap = history
        .iter()
        .map(|h| if start >= h.end_page() { start - h.end_page() } else { h.page_id - end })
        .min();
    if gap.is_some_and(|g| g <= cfg.stride_pages) {
        TwsdType::Strided
    } else {
        TwsdType::Random
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    Twsd,
    Frequency,
    IoSize,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 3] = [BaselineMethod::Twsd, BaselineMethod::Frequency, BaselineMethod::IoSize];

    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::Twsd => "twsd",
            BaselineMethod::Frequency => "frequency",
            BaselineMethod::IoSize => "iosize",
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown baseline `{s}`")))
    }
}

pub const IOSIZE_BINS: usize = 8;

/// Summary vector for one window:
/// TWSD gives type fractions in [`TwsdType::ALL`] order; Frequency gives
/// (mean accesses per distinct page, read fraction, mean size in pages);
/// IoSize gives fractions over power-of-two page-count bins, the last open.
pub fn baseline_characterize(method: BaselineMethod, window: &[IoRequest]) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = window.len() as f64;
    Ok(match method {
        BaselineMethod::Twsd => {
            let cfg = TwsdConfig::default();
            let mut hist = vec![0.0; 4];
            for (i, r) in window.iter().enumerate() {
                let h = &window[i.saturating_sub(cfg.history)..i];
                hist[twsd_classify(r, h, &cfg).index()] += 1.0;
            }
            hist.iter().map(|c| c / n).collect()
        }
        BaselineMethod::Frequency => {
            let mut counts: HashMap<u64, u64> = HashMap::new();
            for p in window.iter().flat_map(IoRequest::pages) {
                *counts.entry(p).or_insert(0) += 1;
            }
            let total: u64 = counts.values().sum();
            let reads = window.iter().filter(|r| r.op.is_read()).count() as f64;
            let size = window.iter().map(|r| f64::from(r.size_pages)).sum::<f64>();
            vec![total as f64 / counts.len() as f64, reads / n, size / n]
        }
        BaselineMethod::IoSize => {
            let mut hist = vec![0.0; IOSIZE_BINS];
            for r in window {
                let bin = (r.size_pages.ilog2() as usize).min(IOSIZE_BINS - 1);
                hist[bin] += 1.0;
            }
            hist.iter().map(|c| c / n).collect()
        }
    })
}

/// Multinomial logistic regression on standardized inputs, fit by
/// full-batch gradient descent from zero weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    mean: Array1<f64>,
    scale: Array1<f64>,
    weights: Array2<f64>,
    bias: Array1<f64>,
}

impl SoftmaxClassifier {
    pub fn fit(xs: &[Vec<f64>], ys: &[usize], classes: usize, epochs: usize, learning_rate: f64) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::EmptyDataset);
        }
        let dim = xs[0].len();
        if let Some(bad) = xs.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        if let Some(&y) = ys.iter().find(|&&y| y >= classes) {
            return Err(Error::InvalidArgument(format!("label {y} outside {classes} classes")));
        }
        let n = xs.len() as f64;
        let x = Array2::from_shape_fn((xs.len(), dim), |(i, j)| xs[i][j]);
        let mean = x.mean_axis(ndarray::Axis(0)).expect("non-empty");
        let scale = x
            .var_axis(ndarray::Axis(0), 0.0)
            .mapv(|v| if v > 1e-12 { v.sqrt() } else { 1.0 });
        let z = (&x - &mean) / &scale;
        let mut weights = Array2::<f64>::zeros((classes, dim));
        let mut bias = Array1::<f64>::zeros(classes);
        for _ in 0..epochs {
            let logits = z.dot(&weights.t()) + &bias;
            let mut grad = Array2::<f64>::zeros((xs.len(), classes));
            for (i, row) in logits.rows().into_iter().enumerate() {
                let p = softmax(row);
                grad.row_mut(i).assign(&p);
                grad[[i, ys[i]]] -= 1.0;
            }
            weights -= &(grad.t().dot(&z) * (learning_rate / n));
            bias -= &(grad.sum_axis(ndarray::Axis(0)) * (learning_rate / n));
        }
        Ok(Self { mean, scale, weights, bias })
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = (Array1::from(x.to_vec()) - &self.mean) / &self.scale;
        argmax((self.weights.dot(&z) + &self.bias).view())
    }

    pub fn accuracy(&self, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
        if xs.is_empty() {
            return 0.0;
        }
        let ok = xs.iter().zip(ys).filter(|(x, &y)| self.predict(x) == y).count();
        ok as f64 / xs.len() as f64
    }
}
