//! Small recurrent-network stack: stacked LSTM layers feeding one or more
//! softmax classification heads, trained with backpropagation through time
//! and RMSProp.
//!
//! Every layer computes, per timestep,
//!
//! ```text
//! z = W_in·x + W_rec·h + b          (gate blocks: input, forget, output, candidate)
//! c = σ(z_f)∘c_prev + σ(z_i)∘tanh(z_c)
//! h = σ(z_o)∘tanh(c)
//! ```
//!
//! and each head maps the top layer's hidden state to class probabilities.

mod backprop;
mod io;
mod optim;
mod train;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use backprop::{BatchOutput, TargetStats};
pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use optim::{clip_global_norm, rmsprop_step};
pub use train::{evaluate, train, train_selected, EpochStats, Evaluation, SelectedTraining, TrainConfig};

/// One LSTM layer. Gate rows are stacked `[input, forget, output, candidate]`,
/// each block `hidden_dim` rows tall.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// `4·hidden × input`
    pub w_input: Array2<f64>,
    /// `4·hidden × hidden`
    pub w_recurrent: Array2<f64>,
    /// `4·hidden`
    pub bias: Array1<f64>,
}

impl LstmLayer {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w_input: Array2::zeros((4 * hidden_dim, input_dim)),
            w_recurrent: Array2::zeros((4 * hidden_dim, hidden_dim)),
            bias: Array1::zeros(4 * hidden_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_recurrent.ncols()
    }
}

/// Affine map from the top hidden state to class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHead {
    /// `classes × hidden`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseHead {
    pub fn zeros(hidden_dim: usize, classes: usize) -> Self {
        Self {
            weights: Array2::zeros((classes, hidden_dim)),
            bias: Array1::zeros(classes),
        }
    }

    pub fn classes(&self) -> usize {
        self.weights.nrows()
    }
}

/// Layer and head tensors. Gradients and optimizer accumulators use the
/// same shape as the parameters they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub layers: Vec<LstmLayer>,
    pub heads: Vec<DenseHead>,
}

pub type Gradients = Parameters;

impl Parameters {
    pub fn zeros(shape: &ModelShape) -> Self {
        let mut layers = Vec::with_capacity(shape.hidden.len());
        let mut input = shape.input_dim;
        for &h in &shape.hidden {
            layers.push(LstmLayer::zeros(input, h));
            input = h;
        }
        let heads = shape.heads.iter().map(|&c| DenseHead::zeros(input, c)).collect();
        Self { layers, heads }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape())
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            input_dim: self.layers[0].input_dim(),
            hidden: self.layers.iter().map(LstmLayer::hidden_dim).collect(),
            heads: self.heads.iter().map(DenseHead::classes).collect(),
        }
    }

    /// Flat views in declared order: per layer `w_input, w_recurrent, bias`,
    /// then per head `weights, bias`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 3 + self.heads.len() * 2);
        for l in &self.layers {
            out.push(l.w_input.as_slice().expect("standard layout"));
            out.push(l.w_recurrent.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
        }
        for h in &self.heads {
            out.push(h.weights.as_slice().expect("standard layout"));
            out.push(h.bias.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 3 + self.heads.len() * 2);
        for l in &mut self.layers {
            out.push(l.w_input.as_slice_mut().expect("standard layout"));
            out.push(l.w_recurrent.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        for h in &mut self.heads {
            out.push(h.weights.as_slice_mut().expect("standard layout"));
            out.push(h.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Dimensions of a model: input width, hidden width per stacked layer, and
/// class count per head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub heads: Vec<usize>,
}

impl ModelShape {
    pub fn new(input_dim: usize, hidden: Vec<usize>, heads: Vec<usize>) -> Result<Self> {
        if input_dim == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "model needs a positive input width and at least one non-empty layer".into(),
            ));
        }
        if heads.is_empty() || heads.iter().any(|&c| c < 2) {
            return Err(Error::InvalidArgument(
                "every head needs at least two classes".into(),
            ));
        }
        Ok(Self {
            input_dim,
            hidden,
            heads,
        })
    }
}

/// A stacked-LSTM classifier together with its RMSProp accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    pub params: Parameters,
    pub accumulators: Parameters,
}

/// Hidden and cell state per layer for step-by-step inference.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    hidden: Vec<Array1<f64>>,
    cell: Vec<Array1<f64>>,
}

impl RecurrentState {
    pub fn reset(&mut self) {
        for v in self.hidden.iter_mut().chain(self.cell.iter_mut()) {
            v.fill(0.0);
        }
    }
}

const FORGET_BIAS: f64 = 1.0;

impl RnnModel {
    /// Uniform `±1/√fan_in` initialization with forget-gate biases at 1.
    pub fn new(shape: &ModelShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Parameters::zeros(shape);
        for layer in &mut params.layers {
            let h = layer.hidden_dim();
            let bound = 1.0 / ((layer.input_dim() + h) as f64).sqrt();
            layer
                .w_input
                .mapv_inplace(|_| rng.random_range(-bound..=bound));
            layer
                .w_recurrent
                .mapv_inplace(|_| rng.random_range(-bound..=bound));
            layer
                .bias
                .slice_mut(ndarray::s![h..2 * h])
                .fill(FORGET_BIAS);
        }
        for head in &mut params.heads {
            let bound = 1.0 / (head.weights.ncols() as f64).sqrt();
            head.weights
                .mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Self::from_params(params)
    }

    /// All weights and biases zero; every head outputs a uniform distribution.
    pub fn zeros(shape: &ModelShape) -> Self {
        Self::from_params(Parameters::zeros(shape))
    }

    pub fn from_params(params: Parameters) -> Self {
        let accumulators = params.zeros_like();
        Self {
            params,
            accumulators,
        }
    }

    pub fn shape(&self) -> ModelShape {
        self.params.shape()
    }

    pub fn input_dim(&self) -> usize {
        self.params.layers[0].input_dim()
    }

    pub fn num_heads(&self) -> usize {
        self.params.heads.len()
    }

    fn check_window(&self, window: &ArrayView2<f64>) -> Result<()> {
        if window.nrows() == 0 {
            return Err(Error::InvalidArgument("window must be non-empty".into()));
        }
        if window.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: window.ncols(),
            });
        }
        Ok(())
    }

    /// Class distribution of the first head at the window's final timestep.
    pub fn forward(&self, window: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.forward_heads(window)?.swap_remove(0))
    }

    /// Final-timestep distribution of every head.
    pub fn forward_heads(&self, window: ArrayView2<f64>) -> Result<Vec<Array1<f64>>> {
        self.check_window(&window)?;
        let mut state = self.initial_state();
        let mut out = Vec::new();
        for row in window.rows() {
            out = self.step(&mut state, row)?;
        }
        Ok(out)
    }

    pub fn initial_state(&self) -> RecurrentState {
        let hidden: Vec<Array1<f64>> = self
            .params
            .layers
            .iter()
            .map(|l| Array1::zeros(l.hidden_dim()))
            .collect();
        RecurrentState {
            cell: hidden.clone(),
            hidden,
        }
    }

    /// Advances the recurrent state by one input row and returns each
    /// head's class distribution for that timestep.
    pub fn step(&self, state: &mut RecurrentState, x: ArrayView1<f64>) -> Result<Vec<Array1<f64>>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut input = x.to_owned();
        for (k, layer) in self.params.layers.iter().enumerate() {
            let h = layer.hidden_dim();
            let mut z = layer.w_input.dot(&input);
            z += &layer.w_recurrent.dot(&state.hidden[k]);
            z += &layer.bias;
            let (hs, cs) = (&mut state.hidden[k], &mut state.cell[k]);
            for j in 0..h {
                let i = sigmoid(z[j]);
                let f = sigmoid(z[h + j]);
                let o = sigmoid(z[2 * h + j]);
                let g = z[3 * h + j].tanh();
                let c = f * cs[j] + i * g;
                cs[j] = c;
                hs[j] = o * c.tanh();
            }
            input = hs.clone();
        }
        Ok(self
            .params
            .heads
            .iter()
            .map(|head| {
                let logits = head.weights.dot(&input) + &head.bias;
                softmax(logits.view())
            })
            .collect())
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut out = logits.mapv(|v| (v - max).exp());
    let sum = out.sum();
    out /= sum;
    out
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A training window with sparse supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `timesteps × input_dim`
    pub inputs: Array2<f64>,
    pub targets: Vec<Target>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Target {
    pub step: usize,
    pub head: usize,
    pub class: usize,
}

impl Sample {
    /// Supervise only the first head at the final timestep.
    pub fn final_step(inputs: Array2<f64>, class: usize) -> Self {
        let step = inputs.nrows().saturating_sub(1);
        Self {
            inputs,
            targets: vec![Target {
                step,
                head: 0,
                class,
            }],
        }
    }

    /// Number of distinct timesteps carrying at least one target.
    pub(crate) fn supervised_steps(&self) -> usize {
        let mut steps: Vec<usize> = self.targets.iter().map(|t| t.step).collect();
        steps.sort_unstable();
        steps.dedup();
        steps.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    #[test]
    fn softmax_closed_forms() {
        let p = softmax(array![0.0, 0.0].view());
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let p = softmax(array![2f64.ln(), 0.0].view());
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
        let p = softmax(array![1000.0, 0.0].view());
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
    }

    proptest! {
        #[test]
        fn softmax_is_distribution_and_shift_invariant(
            logits in prop::collection::vec(-50.0f64..50.0, 2..10),
            shift in -100.0f64..100.0,
        ) {
            let a = Array1::from(logits.clone());
            let p = softmax(a.view());
            prop_assert!((p.sum() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let q = softmax(a.mapv(|v| v + shift).view());
            for (x, y) in p.iter().zip(q.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            prop_assert_eq!(argmax(p.view()), argmax(q.view()));
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let shape = ModelShape::new(3, vec![5], vec![4]).unwrap();
        let m = RnnModel::zeros(&shape);
        let w = Array2::from_shape_fn((7, 3), |(i, j)| (i * 3 + j) as f64 - 4.0);
        let p = m.forward(w.view()).unwrap();
        for v in p.iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn random_models_emit_distributions() {
        let shape = ModelShape::new(4, vec![6, 5], vec![3]).unwrap();
        let w = Array2::from_shape_fn((5, 4), |(i, j)| ((i + 2 * j) as f64).sin());
        for seed in 0..1000 {
            let p = RnnModel::new(&shape, seed).forward(w.view()).unwrap();
            assert!((p.sum() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn permuting_head_rows_permutes_probabilities() {
        let shape = ModelShape::new(2, vec![4], vec![3]).unwrap();
        let m = RnnModel::new(&shape, 11);
        let mut permuted = m.clone();
        let perm = [2usize, 0, 1];
        for (dst, &src) in perm.iter().enumerate() {
            permuted.params.heads[0]
                .weights
                .row_mut(dst)
                .assign(&m.params.heads[0].weights.row(src));
            permuted.params.heads[0].bias[dst] = m.params.heads[0].bias[src];
        }
        let w = array![[0.3, -1.0], [0.5, 0.25], [-0.7, 0.1]];
        let p = m.forward(w.view()).unwrap();
        let q = permuted.forward(w.view()).unwrap();
        for (dst, &src) in perm.iter().enumerate() {
            assert!((q[dst] - p[src]).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_reported() {
        let shape = ModelShape::new(3, vec![2], vec![2]).unwrap();
        let m = RnnModel::zeros(&shape);
        let w = Array2::<f64>::zeros((4, 2));
        assert!(matches!(
            m.forward(w.view()),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(m.forward(Array2::<f64>::zeros((0, 3)).view()).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let shape = ModelShape::new(6, vec![8, 8], vec![2, 3]).unwrap();
        let a = RnnModel::new(&shape, 5);
        assert_eq!(a, RnnModel::new(&shape, 5));
        assert_ne!(a, RnnModel::new(&shape, 6));
        let l0 = &a.params.layers[0];
        let bound = 1.0 / (14f64).sqrt();
        assert!(l0.w_input.iter().all(|v| v.abs() <= bound));
        assert!(l0.bias.slice(ndarray::s![8..16]).iter().all(|&v| v == 1.0));
        assert!(l0.bias.slice(ndarray::s![0..8]).iter().all(|&v| v == 0.0));
        assert_eq!(a.params.layers[1].input_dim(), 8);
        assert_eq!(a.params.heads[1].classes(), 3);
    }

    #[test]
    fn shape_validation() {
        assert!(ModelShape::new(0, vec![4], vec![2]).is_err());
        assert!(ModelShape::new(4, vec![], vec![2]).is_err());
        assert!(ModelShape::new(4, vec![4], vec![1]).is_err());
    }
}
