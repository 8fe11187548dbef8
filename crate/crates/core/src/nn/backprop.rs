//! Batched forward pass and backpropagation through time.
//!
//! A batch of `B` windows of `T` steps is laid out time-major: row `t·B + b`
//! holds sample `b` at step `t`. Input projections and weight gradients are
//! computed as single matrix products over all `T·B` rows; only the
//! recurrent products run step by step.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::{sigmoid, Gradients, LstmLayer, RnnModel, Sample};
use crate::error::{Error, Result};

/// Per-head counts of correctly predicted targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetStats {
    pub correct: Vec<usize>,
    pub total: Vec<usize>,
}

impl TargetStats {
    fn new(heads: usize) -> Self {
        Self {
            correct: vec![0; heads],
            total: vec![0; heads],
        }
    }

    pub fn merge(&mut self, other: &TargetStats) {
        if self.correct.is_empty() {
            *self = other.clone();
            return;
        }
        for (a, b) in self.correct.iter_mut().zip(&other.correct) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
    }

    pub fn head_accuracy(&self, head: usize) -> f64 {
        match self.total.get(head) {
            Some(&n) if n > 0 => self.correct[head] as f64 / n as f64,
            _ => 0.0,
        }
    }

    pub fn overall_accuracy(&self) -> f64 {
        let n: usize = self.total.iter().sum();
        if n == 0 {
            0.0
        } else {
            self.correct.iter().sum::<usize>() as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    /// Mean over the batch of each sample's per-step cross-entropy.
    pub loss: f64,
    pub stats: TargetStats,
}

struct LayerTape {
    input: Array2<f64>,
    /// activated gates `[i, f, o, g]`
    gates: Array2<f64>,
    cell: Array2<f64>,
    cell_tanh: Array2<f64>,
    hidden: Array2<f64>,
}

struct Tape {
    steps: usize,
    batch: usize,
    layers: Vec<LayerTape>,
    /// per head, `T·B × classes` log-probabilities
    log_probs: Vec<Array2<f64>>,
}

fn layer_forward(layer: &LstmLayer, input: Array2<f64>, steps: usize, batch: usize) -> LayerTape {
    let h = layer.hidden_dim();
    let rows = steps * batch;
    let mut gates = Array2::zeros((rows, 4 * h));
    general_mat_mul(1.0, &input, &layer.w_input.t(), 0.0, &mut gates);
    gates += &layer.bias;

    let mut cell = Array2::<f64>::zeros((rows, h));
    let mut cell_tanh = Array2::<f64>::zeros((rows, h));
    let mut hidden = Array2::<f64>::zeros((rows, h));

    for t in 0..steps {
        let cur = t * batch..(t + 1) * batch;
        if t > 0 {
            let prev = hidden.slice(s![(t - 1) * batch..t * batch, ..]);
            let mut g = gates.slice_mut(s![cur.clone(), ..]);
            general_mat_mul(1.0, &prev, &layer.w_recurrent.t(), 1.0, &mut g);
        }
        let gs = gates.as_slice_mut().expect("standard layout");
        let cs = cell.as_slice_mut().expect("standard layout");
        let ts = cell_tanh.as_slice_mut().expect("standard layout");
        let hs = hidden.as_slice_mut().expect("standard layout");
        for row in cur {
            let g = &mut gs[row * 4 * h..(row + 1) * 4 * h];
            for v in &mut g[..3 * h] {
                *v = sigmoid(*v);
            }
            for v in &mut g[3 * h..] {
                *v = v.tanh();
            }
            for j in 0..h {
                let c_prev = if t > 0 { cs[(row - batch) * h + j] } else { 0.0 };
                let c = g[h + j] * c_prev + g[j] * g[3 * h + j];
                let tc = c.tanh();
                cs[row * h + j] = c;
                ts[row * h + j] = tc;
                hs[row * h + j] = g[2 * h + j] * tc;
            }
        }
    }

    LayerTape {
        input,
        gates,
        cell,
        cell_tanh,
        hidden,
    }
}

/// Accumulates this layer's parameter gradients into `grad` and returns the
/// gradient with respect to the layer's input when `need_input_grad`.
fn layer_backward(
    layer: &LstmLayer,
    tape: &LayerTape,
    d_hidden: &Array2<f64>,
    steps: usize,
    batch: usize,
    grad: &mut LstmLayer,
    need_input_grad: bool,
) -> Option<Array2<f64>> {
    let h = layer.hidden_dim();
    let rows = steps * batch;
    let mut d_gates = Array2::<f64>::zeros((rows, 4 * h));
    let mut dh_next = Array2::<f64>::zeros((batch, h));
    let mut dc_next = vec![0.0; batch * h];

    let gs = tape.gates.as_slice().expect("standard layout");
    let cs = tape.cell.as_slice().expect("standard layout");
    let ts = tape.cell_tanh.as_slice().expect("standard layout");
    let dhs = d_hidden.as_slice().expect("standard layout");

    for t in (0..steps).rev() {
        {
            let dgs = d_gates.as_slice_mut().expect("standard layout");
            let dhn = dh_next.as_slice().expect("standard layout");
            for b in 0..batch {
                let row = t * batch + b;
                let g = &gs[row * 4 * h..(row + 1) * 4 * h];
                let dg = &mut dgs[row * 4 * h..(row + 1) * 4 * h];
                for j in 0..h {
                    let idx = row * h + j;
                    let (i, f, o, cand) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                    let tc = ts[idx];
                    let dh = dhs[idx] + dhn[b * h + j];
                    let d_o = dh * tc;
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[b * h + j];
                    let c_prev = if t > 0 { cs[idx - batch * h] } else { 0.0 };
                    dc_next[b * h + j] = dc * f;
                    dg[j] = dc * cand * i * (1.0 - i);
                    dg[h + j] = dc * c_prev * f * (1.0 - f);
                    dg[2 * h + j] = d_o * o * (1.0 - o);
                    dg[3 * h + j] = dc * i * (1.0 - cand * cand);
                }
            }
        }
        if t > 0 {
            let dg_t = d_gates.slice(s![t * batch..(t + 1) * batch, ..]);
            general_mat_mul(1.0, &dg_t, &layer.w_recurrent, 0.0, &mut dh_next);
        }
    }

    general_mat_mul(1.0, &d_gates.t(), &tape.input, 1.0, &mut grad.w_input);
    if steps > 1 {
        let dg_later = d_gates.slice(s![batch.., ..]);
        let h_earlier = tape.hidden.slice(s![..(steps - 1) * batch, ..]);
        general_mat_mul(1.0, &dg_later.t(), &h_earlier, 1.0, &mut grad.w_recurrent);
    }
    grad.bias += &d_gates.sum_axis(Axis(0));

    need_input_grad.then(|| d_gates.dot(&layer.w_input))
}

fn log_softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
}

impl RnnModel {
    fn validate_batch(&self, batch: &[Sample]) -> Result<usize> {
        let first = batch.first().ok_or(Error::EmptyDataset)?;
        let steps = first.inputs.nrows();
        if steps == 0 {
            return Err(Error::InvalidArgument("window must be non-empty".into()));
        }
        for s in batch {
            if s.inputs.ncols() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim(),
                    got: s.inputs.ncols(),
                });
            }
            if s.inputs.nrows() != steps {
                return Err(Error::DimensionMismatch {
                    expected: steps,
                    got: s.inputs.nrows(),
                });
            }
            for t in &s.targets {
                let classes = self
                    .params
                    .heads
                    .get(t.head)
                    .ok_or_else(|| Error::InvalidArgument(format!("no head {}", t.head)))?
                    .classes();
                if t.step >= steps || t.class >= classes {
                    return Err(Error::InvalidArgument(format!(
                        "target (step {}, class {}) out of range",
                        t.step, t.class
                    )));
                }
            }
        }
        Ok(steps)
    }

    fn run_forward(&self, windows: &[ArrayView2<f64>], steps: usize) -> Tape {
        let batch = windows.len();
        let mut input = Array2::zeros((steps * batch, self.input_dim()));
        for (b, w) in windows.iter().enumerate() {
            for t in 0..steps {
                input.row_mut(t * batch + b).assign(&w.row(t));
            }
        }
        let mut layers: Vec<LayerTape> = Vec::with_capacity(self.params.layers.len());
        for layer in &self.params.layers {
            let x = match layers.last() {
                Some(prev) => prev.hidden.clone(),
                None => std::mem::take(&mut input),
            };
            layers.push(layer_forward(layer, x, steps, batch));
        }
        let top = &layers.last().expect("at least one layer").hidden;
        let log_probs = self
            .params
            .heads
            .iter()
            .map(|head| {
                let mut logits = top.dot(&head.weights.t());
                logits += &head.bias;
                log_softmax_rows(&mut logits);
                logits
            })
            .collect();
        Tape {
            steps,
            batch,
            layers,
            log_probs,
        }
    }

    fn score(&self, tape: &Tape, batch: &[Sample]) -> (f64, TargetStats) {
        let mut stats = TargetStats::new(self.num_heads());
        let mut loss = 0.0;
        for (b, sample) in batch.iter().enumerate() {
            let weight = 1.0 / sample.supervised_steps().max(1) as f64;
            for t in &sample.targets {
                let row = tape.log_probs[t.head].row(t.step * tape.batch + b);
                loss -= weight * row[t.class];
                stats.total[t.head] += 1;
                if super::argmax(row) == t.class {
                    stats.correct[t.head] += 1;
                }
            }
        }
        (loss / batch.len() as f64, stats)
    }

    /// Mean cross-entropy over the batch without computing gradients.
    pub fn batch_loss(&self, batch: &[Sample]) -> Result<BatchOutput> {
        let steps = self.validate_batch(batch)?;
        let views: Vec<_> = batch.iter().map(|s| s.inputs.view()).collect();
        let tape = self.run_forward(&views, steps);
        let (loss, stats) = self.score(&tape, batch);
        Ok(BatchOutput { loss, stats })
    }

    /// Mean cross-entropy over the batch and its gradient with respect to
    /// every parameter.
    pub fn loss_and_gradients(&self, batch: &[Sample]) -> Result<(BatchOutput, Gradients)> {
        let steps = self.validate_batch(batch)?;
        let views: Vec<_> = batch.iter().map(|s| s.inputs.view()).collect();
        let tape = self.run_forward(&views, steps);
        let (loss, stats) = self.score(&tape, batch);

        let nb = batch.len();
        let mut grads = self.params.zeros_like();
        let top_h = tape.layers.last().expect("at least one layer");
        let mut d_hidden = Array2::<f64>::zeros(top_h.hidden.raw_dim());

        for (k, head) in self.params.heads.iter().enumerate() {
            let mut d_logits = Array2::<f64>::zeros(tape.log_probs[k].raw_dim());
            for (b, sample) in batch.iter().enumerate() {
                let weight = 1.0 / (sample.supervised_steps().max(1) * nb) as f64;
                for t in sample.targets.iter().filter(|t| t.head == k) {
                    let row = t.step * tape.batch + b;
                    let lp = tape.log_probs[k].row(row);
                    let mut d = d_logits.row_mut(row);
                    for (c, v) in d.iter_mut().enumerate() {
                        *v += weight * (lp[c].exp() - if c == t.class { 1.0 } else { 0.0 });
                    }
                }
            }
            general_mat_mul(1.0, &d_logits.t(), &top_h.hidden, 1.0, &mut grads.heads[k].weights);
            grads.heads[k].bias += &d_logits.sum_axis(Axis(0));
            general_mat_mul(1.0, &d_logits, &head.weights, 1.0, &mut d_hidden);
        }

        for (idx, layer) in self.params.layers.iter().enumerate().rev() {
            let below = layer_backward(
                layer,
                &tape.layers[idx],
                &d_hidden,
                tape.steps,
                tape.batch,
                &mut grads.layers[idx],
                idx > 0,
            );
            if let Some(d) = below {
                d_hidden = d;
            }
        }

        Ok((BatchOutput { loss, stats }, grads))
    }

    /// Per-sample, per-head probability tables (`timesteps × classes`).
    pub fn predict_batch(&self, windows: &[ArrayView2<f64>]) -> Result<Vec<Vec<Array2<f64>>>> {
        let Some(first) = windows.first() else {
            return Ok(Vec::new());
        };
        let steps = first.nrows();
        for w in windows {
            if w.ncols() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim(),
                    got: w.ncols(),
                });
            }
            if w.nrows() != steps || steps == 0 {
                return Err(Error::DimensionMismatch {
                    expected: steps,
                    got: w.nrows(),
                });
            }
        }
        let tape = self.run_forward(windows, steps);
        let nb = windows.len();
        Ok((0..nb)
            .map(|b| {
                tape.log_probs
                    .iter()
                    .map(|lp| {
                        let rows: Vec<usize> = (0..steps).map(|t| t * nb + b).collect();
                        lp.select(Axis(0), &rows).mapv(f64::exp)
                    })
                    .collect()
            })
            .collect())
    }

    /// Final-step distribution of `head` for each window.
    pub fn predict_final(&self, windows: &[ArrayView2<f64>], head: usize) -> Result<Vec<Array1<f64>>> {
        Ok(self
            .predict_batch(windows)?
            .into_iter()
            .map(|mut heads| {
                let table = heads.swap_remove(head);
                table.row(table.nrows() - 1).to_owned()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ModelShape, Target};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_window(rng: &mut ChaCha8Rng, steps: usize, dim: usize) -> Array2<f64> {
        Array2::from_shape_fn((steps, dim), |_| rng.random_range(-1.0..1.0))
    }

    /// Central finite differences over every scalar parameter.
    fn numeric_gradient(model: &RnnModel, batch: &[Sample], h: f64) -> Vec<Vec<f64>> {
        let mut probe = model.clone();
        let sizes: Vec<usize> = model.params.tensors().iter().map(|t| t.len()).collect();
        let mut out = Vec::new();
        for (ti, &n) in sizes.iter().enumerate() {
            let mut g = vec![0.0; n];
            for (k, slot) in g.iter_mut().enumerate() {
                let orig = probe.params.tensors()[ti][k];
                probe.params.tensors_mut()[ti][k] = orig + h;
                let plus = probe.batch_loss(batch).unwrap().loss;
                probe.params.tensors_mut()[ti][k] = orig - h;
                let minus = probe.batch_loss(batch).unwrap().loss;
                probe.params.tensors_mut()[ti][k] = orig;
                *slot = (plus - minus) / (2.0 * h);
            }
            out.push(g);
        }
        out
    }

    fn max_relative_error(analytic: &Gradients, numeric: &[Vec<f64>], floor: f64) -> f64 {
        let mut worst = 0.0f64;
        for (a, n) in analytic.tensors().iter().zip(numeric) {
            for (&x, &y) in a.iter().zip(n) {
                let denom = x.abs().max(y.abs()).max(floor);
                worst = worst.max((x - y).abs() / denom);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences_final_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = ModelShape::new(3, vec![8], vec![3]).unwrap();
        let model = RnnModel::new(&shape, 17);
        let batch: Vec<Sample> = (0..3)
            .map(|i| Sample::final_step(random_window(&mut rng, 10, 3), i % 3))
            .collect();
        let (_, grads) = model.loss_and_gradients(&batch).unwrap();
        let numeric = numeric_gradient(&model, &batch, 1e-5);
        let err = max_relative_error(&grads, &numeric, 1e-8);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn gradients_match_finite_differences_two_heads_per_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let shape = ModelShape::new(4, vec![5, 4], vec![2, 3]).unwrap();
        let model = RnnModel::new(&shape, 2);
        let batch: Vec<Sample> = (0..2)
            .map(|_| {
                let inputs = random_window(&mut rng, 6, 4);
                let mut targets = Vec::new();
                for step in 0..6 {
                    let cached = rng.random_bool(0.5);
                    targets.push(Target { step, head: 0, class: cached as usize });
                    if cached {
                        targets.push(Target { step, head: 1, class: rng.random_range(0..3) });
                    }
                }
                Sample { inputs, targets }
            })
            .collect();
        let (_, grads) = model.loss_and_gradients(&batch).unwrap();
        let numeric = numeric_gradient(&model, &batch, 1e-5);
        // Central differences at h = 1e-5 carry ~1e-11 absolute rounding
        // error, so entries below 1e-6 are compared on an absolute scale.
        let err = max_relative_error(&grads, &numeric, 1e-6);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn uniform_model_loss_is_ln_classes() {
        let shape = ModelShape::new(2, vec![3], vec![4]).unwrap();
        let model = RnnModel::zeros(&shape);
        let batch = vec![
            Sample::final_step(Array2::ones((5, 2)), 0),
            Sample::final_step(Array2::zeros((5, 2)), 3),
        ];
        let out = model.batch_loss(&batch).unwrap();
        assert!((out.loss - 4f64.ln()).abs() < 1e-12);
        assert!((out.loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn duplicating_batch_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = ModelShape::new(3, vec![4], vec![2]).unwrap();
        let model = RnnModel::new(&shape, 4);
        let batch: Vec<Sample> = (0..3)
            .map(|i| Sample::final_step(random_window(&mut rng, 7, 3), i % 2))
            .collect();
        let doubled: Vec<Sample> = batch.iter().chain(batch.iter()).cloned().collect();
        let (a, ga) = model.loss_and_gradients(&batch).unwrap();
        let (b, gb) = model.loss_and_gradients(&doubled).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-12);
        for (x, y) in ga.tensors().iter().zip(gb.tensors()) {
            for (p, q) in x.iter().zip(y) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batched_forward_matches_stepwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let shape = ModelShape::new(3, vec![6, 5], vec![3, 2]).unwrap();
        let model = RnnModel::new(&shape, 12);
        let windows: Vec<Array2<f64>> = (0..4).map(|_| random_window(&mut rng, 8, 3)).collect();
        let views: Vec<_> = windows.iter().map(|w| w.view()).collect();
        let batched = model.predict_batch(&views).unwrap();
        for (w, tables) in windows.iter().zip(&batched) {
            let mut state = model.initial_state();
            for (t, row) in w.rows().into_iter().enumerate() {
                let probs = model.step(&mut state, row).unwrap();
                for (head, p) in probs.iter().enumerate() {
                    for c in 0..p.len() {
                        assert!((tables[head][[t, c]] - p[c]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_inconsistent_batches() {
        let shape = ModelShape::new(2, vec![3], vec![2]).unwrap();
        let model = RnnModel::zeros(&shape);
        let ragged = vec![
            Sample::final_step(Array2::zeros((4, 2)), 0),
            Sample::final_step(Array2::zeros((5, 2)), 0),
        ];
        assert!(model.loss_and_gradients(&ragged).is_err());
        let bad_label = vec![Sample::final_step(Array2::zeros((4, 2)), 2)];
        assert!(model.loss_and_gradients(&bad_label).is_err());
        assert!(matches!(model.batch_loss(&[]), Err(Error::EmptyDataset)));
    }
}
