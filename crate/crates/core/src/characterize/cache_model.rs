use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::features::{CacheFeatureState, PrevDecision, CACHE_FEATURES, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::nn::{
    argmax, train, train_selected, EpochStats, ModelShape, RecurrentState, RnnModel, Sample, SelectedTraining, Target, TrainConfig,
};
use crate::oracle::{DurationLabel, LabeledRequest};
use crate::policies::{AccessOutcome, Advisor, Decision, ModelDecision, RcRnnCache};
use crate::trace::{IoRequest, PageId};

pub const ADMIT_HEAD: usize = 0;
pub const DURATION_HEAD: usize = 1;
pub const CACHE_LAYERS: usize = 3;
pub const CACHE_HIDDEN: usize = 256;

/// Stacked LSTM with an admit head (2 classes) and a duration head
/// (3 classes).
#[derive(Debug, Clone, PartialEq)]
pub struct CacheDecisionModel {
    model: RnnModel,
}

impl CacheDecisionModel {
    pub fn shape(layers: usize, hidden: usize) -> Result<ModelShape> {
        ModelShape::new(CACHE_FEATURES, vec![hidden; layers], vec![2, DurationLabel::ALL.len()])
    }

    /// Default depth and width.
    pub fn new(seed: u64) -> Self {
        Self::with_size(CACHE_LAYERS, CACHE_HIDDEN, seed).expect("default shape is valid")
    }

    pub fn with_size(layers: usize, hidden: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            model: RnnModel::new(&Self::shape(layers, hidden)?, seed),
        })
    }

    pub fn from_model(model: RnnModel) -> Result<Self> {
        let s = model.shape();
        if s.input_dim != CACHE_FEATURES || s.heads != [2, DurationLabel::ALL.len()] {
            return Err(Error::ModelFormat(format!(
                "cache model needs input {CACHE_FEATURES} and heads [2, 3], found input {} heads {:?}",
                s.input_dim, s.heads
            )));
        }
        Ok(Self { model })
    }

    pub fn model(&self) -> &RnnModel {
        &self.model
    }

    pub fn into_model(self) -> RnnModel {
        self.model
    }

    fn decode(out: &[ndarray::Array1<f64>]) -> ModelDecision {
        ModelDecision {
            admit: argmax(out[ADMIT_HEAD].view()) == 1,
            label: DurationLabel::from_index(argmax(out[DURATION_HEAD].view())).expect("3-class head"),
        }
    }

    /// Duration label of each row, each run from a fresh state.
    pub fn relabel_rows(&self, rows: &[[f64; CACHE_FEATURES]]) -> Result<Vec<DurationLabel>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let windows: Vec<Array2<f64>> = rows
            .iter()
            .map(|r| Array2::from_shape_vec((1, CACHE_FEATURES), r.to_vec()).expect("row shape"))
            .collect();
        let views: Vec<ArrayView2<f64>> = windows.iter().map(|w| w.view()).collect();
        let probs = self.model.predict_final(&views, DURATION_HEAD)?;
        Ok(probs
            .iter()
            .map(|p| DurationLabel::from_index(argmax(p.view())).expect("3-class head"))
            .collect())
    }
}

fn tag(row: &LabeledRequest) -> PrevDecision {
    match row.duration_label {
        Some(l) => PrevDecision::cached(l),
        None => PrevDecision::ignored(),
    }
}

/// Teacher-forced sequences: each row carries the oracle's tag from the
/// previous access to the same page, and every step is supervised on the
/// admit head, plus the duration head when the oracle cached it.
/// Sequences are consecutive, non-overlapping runs of [`WINDOW_LEN`]
/// requests; a trace shorter than one window becomes a single sequence.
pub fn cache_dataset(labeled: &[LabeledRequest]) -> Vec<Sample> {
    let mut state = CacheFeatureState::new();
    let rows: Vec<[f64; CACHE_FEATURES]> = labeled
        .iter()
        .map(|l| {
            let r = state.row(&l.request);
            state.record(tag(l));
            r
        })
        .collect();
    let window = if labeled.len() < WINDOW_LEN { labeled.len() } else { WINDOW_LEN };
    if window == 0 {
        return Vec::new();
    }
    rows.chunks_exact(window)
        .zip(labeled.chunks_exact(window))
        .map(|(feats, tags)| {
            let inputs = Array2::from_shape_vec((window, CACHE_FEATURES), feats.iter().flatten().copied().collect())
                .expect("window shape");
            let mut targets = Vec::with_capacity(2 * window);
            for (step, t) in tags.iter().enumerate() {
                targets.push(Target {
                    step,
                    head: ADMIT_HEAD,
                    class: usize::from(t.cached),
                });
                if let Some(l) = t.duration_label {
                    targets.push(Target {
                        step,
                        head: DURATION_HEAD,
                        class: l.index(),
                    });
                }
            }
            Sample { inputs, targets }
        })
        .collect()
}

/// Deterministic split by sequence index: every fifth sequence is held out.
pub fn split_holdout<T: Clone>(items: &[T]) -> (Vec<T>, Vec<T>) {
    let (mut train, mut hold) = (Vec::new(), Vec::new());
    for (i, s) in items.iter().enumerate() {
        if i % 5 == 4 {
            hold.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    (train, hold)
}

/// Trains the default-size cache model on an oracle-labeled trace.
pub fn train_cache_model(labeled: &[LabeledRequest], config: &TrainConfig) -> Result<(CacheDecisionModel, Vec<EpochStats>)> {
    train_cache_model_sized(labeled, config, CACHE_LAYERS, CACHE_HIDDEN)
}

pub fn train_cache_model_sized(
    labeled: &[LabeledRequest],
    config: &TrainConfig,
    layers: usize,
    hidden: usize,
) -> Result<(CacheDecisionModel, Vec<EpochStats>)> {
    let data = cache_dataset(labeled);
    train_cache_samples(&data, config, layers, hidden)
}

pub fn train_cache_samples(
    data: &[Sample],
    config: &TrainConfig,
    layers: usize,
    hidden: usize,
) -> Result<(CacheDecisionModel, Vec<EpochStats>)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = CacheDecisionModel::with_size(layers, hidden, config.seed)?;
    let history = train(&mut model.model, data, config)?;
    Ok((model, history))
}

/// Trains on `data` and keeps the epoch with the lowest loss on
/// `validation`.
pub fn train_cache_selected(
    data: &[Sample],
    validation: &[Sample],
    config: &TrainConfig,
    layers: usize,
    hidden: usize,
) -> Result<(CacheDecisionModel, SelectedTraining)> {
    let mut model = CacheDecisionModel::with_size(layers, hidden, config.seed)?;
    let selected = train_selected(&mut model.model, data, validation, config)?;
    Ok((model, selected))
}

/// Closed-loop inference: feature rows describe the cache manager's own
/// past decisions, and the recurrent state restarts every [`WINDOW_LEN`]
/// requests to match the training sequences.
#[derive(Debug, Clone)]
pub struct CacheInference {
    model: CacheDecisionModel,
    state: RecurrentState,
    steps: usize,
    features: CacheFeatureState,
    last_rows: HashMap<PageId, [f64; CACHE_FEATURES]>,
    last_advice: Option<ModelDecision>,
}

impl CacheInference {
    pub fn new(model: CacheDecisionModel) -> Self {
        Self {
            state: model.model.initial_state(),
            model,
            steps: 0,
            features: CacheFeatureState::new(),
            last_rows: HashMap::new(),
            last_advice: None,
        }
    }

    pub fn model(&self) -> &CacheDecisionModel {
        &self.model
    }

    /// Installs a new model with a fresh recurrent state. Page history is
    /// kept.
    pub fn swap_model(&mut self, model: CacheDecisionModel) {
        self.state = model.model.initial_state();
        self.model = model;
        self.steps = 0;
    }

    pub fn reset_state(&mut self) {
        self.state.reset();
        self.steps = 0;
    }

    /// Feature row of the most recent access covering `page`.
    pub fn last_row(&self, page: PageId) -> Option<&[f64; CACHE_FEATURES]> {
        self.last_rows.get(&page)
    }

    /// Runs one request through the model and returns its decoded verdict.
    pub fn infer(&mut self, req: &IoRequest) -> ModelDecision {
        if self.steps == WINDOW_LEN {
            self.reset_state();
        }
        let row = self.features.row(req);
        for p in req.pages() {
            self.last_rows.insert(p, row);
        }
        let out = self
            .model
            .model
            .step(&mut self.state, ArrayView1::from(&row[..]))
            .expect("feature width matches model input");
        self.steps += 1;
        let d = CacheDecisionModel::decode(&out);
        self.last_advice = Some(d);
        d
    }

    /// Re-labels `pages` with the current model's duration head from their
    /// last seen rows. Pages without a row keep `None`.
    pub fn relabel(&self, pages: &[PageId]) -> Result<HashMap<PageId, DurationLabel>> {
        let known: Vec<(PageId, [f64; CACHE_FEATURES])> =
            pages.iter().filter_map(|p| self.last_rows.get(p).map(|r| (*p, *r))).collect();
        let rows: Vec<_> = known.iter().map(|(_, r)| *r).collect();
        let labels = self.model.relabel_rows(&rows)?;
        Ok(known.into_iter().map(|(p, _)| p).zip(labels).collect())
    }
}

impl Advisor for CacheInference {
    fn advise(&mut self, _index: usize, req: &IoRequest, _cache: &RcRnnCache) -> ModelDecision {
        self.infer(req)
    }

    fn observe(&mut self, _index: usize, req: &IoRequest, outcome: &AccessOutcome, cache: &RcRnnCache) {
        let decision = match outcome.decision {
            Decision::Hit => match cache.entry(req.page_id) {
                Some(e) => PrevDecision::cached(e.queue),
                None => PrevDecision::ignored(),
            },
            Decision::MissAdmit => {
                PrevDecision::cached(self.last_advice.map_or(DurationLabel::Soon, |d| d.label))
            }
            Decision::MissBypass => PrevDecision::ignored(),
        };
        self.features.record(decision);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::evaluate;
    use crate::policies::{CachePolicy, RcRnnPolicy};
    use crate::trace::Op;

    fn labeled(n: usize, cached: impl Fn(usize) -> Option<DurationLabel>) -> Vec<LabeledRequest> {
        (0..n)
            .map(|i| LabeledRequest::new(IoRequest::new(i as u64, (i % 37) as u64, 1, Op::Read), cached(i)))
            .collect()
    }

    #[test]
    fn dataset_targets() {
        let rows = labeled(250, |i| (i % 2 == 0).then_some(DurationLabel::Mean));
        let d = cache_dataset(&rows);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].inputs.dim(), (WINDOW_LEN, CACHE_FEATURES));
        assert_eq!(d[0].targets.len(), 150);
        assert_eq!(d[0].supervised_steps(), 100);
        // Each row carries the previous row's tag; the first has none.
        assert_eq!(&d[0].inputs.row(0).to_vec()[3..], &[0.0, 0.0, 1.0]);
        assert_eq!(&d[0].inputs.row(37).to_vec()[3..], &[1.0, 0.5, 0.0]);
        assert_eq!(&d[0].inputs.row(38).to_vec()[3..], &[0.0, 0.0, 1.0]);
        assert_eq!(&d[1].inputs.row(0).to_vec()[3..], &[0.0, 0.0, 1.0]);
        let short = cache_dataset(&rows[..10]);
        assert_eq!(short.len(), 1);
        assert_eq!(short[0].inputs.nrows(), 10);
        assert!(cache_dataset(&[]).is_empty());
    }

    #[test]
    fn holdout_is_every_fifth() {
        let (tr, ho) = split_holdout(&(0..10).collect::<Vec<_>>());
        assert_eq!(ho, vec![4, 9]);
        assert_eq!(tr.len(), 8);
    }

    #[test]
    fn never_cached_is_learnable() {
        let rows = labeled(800, |_| None);
        let cfg = TrainConfig {
            learning_rate: 0.01,
            epochs: 5,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let (m, _) = train_cache_model_sized(&rows, &cfg, 1, 8).unwrap();
        let eval = evaluate(m.model(), &cache_dataset(&rows), 8).unwrap();
        assert!(eval.stats.head_accuracy(ADMIT_HEAD) >= 0.99);
        let mut inf = CacheInference::new(m);
        let r = IoRequest::new(0, 3, 1, Op::Read);
        assert!(!inf.infer(&r).admit);
    }

    #[test]
    fn always_cached_admits() {
        let rows = labeled(800, |_| Some(DurationLabel::Late));
        let cfg = TrainConfig {
            learning_rate: 0.01,
            epochs: 5,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let (m, _) = train_cache_model_sized(&rows, &cfg, 1, 8).unwrap();
        let mut inf = CacheInference::new(m);
        let d = inf.infer(&IoRequest::new(0, 3, 1, Op::Read));
        assert!(d.admit);
        assert_eq!(d.label, DurationLabel::Late);
    }

    #[test]
    fn empty_labels_rejected() {
        assert!(matches!(train_cache_model_sized(&[], &TrainConfig::default(), 1, 4), Err(Error::EmptyDataset)));
    }

    #[test]
    fn inference_is_reproducible_and_resets() {
        let m = CacheDecisionModel::with_size(2, 8, 9).unwrap();
        let reqs: Vec<IoRequest> = (0..250).map(|i| IoRequest::new(i, i % 17, 1, Op::Read)).collect();
        let run = |m: &CacheDecisionModel| {
            let mut p = RcRnnPolicy::new(8, CacheInference::new(m.clone()));
            reqs.iter().enumerate().map(|(i, r)| p.on_access(i, r).decision).collect::<Vec<_>>()
        };
        assert_eq!(run(&m), run(&m));
        let mut inf = CacheInference::new(m.clone());
        let first = inf.infer(&reqs[0]);
        let mut inf2 = CacheInference::new(m);
        for r in &reqs[..WINDOW_LEN] {
            inf2.infer(r);
        }
        // Page 0 normalizes to 0 at any running max, and infer records no
        // history, so after the restart the row and state match the first call.
        assert_eq!(inf2.infer(&reqs[0]), first);
    }

    #[test]
    fn relabel_uses_last_rows() {
        let m = CacheDecisionModel::with_size(1, 4, 2).unwrap();
        let mut inf = CacheInference::new(m);
        inf.infer(&IoRequest::new(0, 10, 2, Op::Read));
        let labels = inf.relabel(&[10, 11, 99]).unwrap();
        assert_eq!(labels.len(), 2);
        assert!(!labels.contains_key(&99));
    }

    #[test]
    fn foreign_shape_rejected() {
        let m = RnnModel::zeros(&ModelShape::new(4, vec![3], vec![4]).unwrap());
        assert!(CacheDecisionModel::from_model(m).is_err());
    }
}
