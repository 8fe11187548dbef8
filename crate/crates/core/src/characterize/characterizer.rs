use ndarray::{Array1, ArrayView2};

use super::features::{extract_characterizer_features, CHARACTERIZER_FEATURES, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::nn::{argmax, evaluate, train, EpochStats, Evaluation, ModelShape, RnnModel, Sample, TrainConfig};
use crate::trace::{IoRequest, WorkloadCategory};

pub const CHARACTERIZER_HIDDEN: usize = 50;
const CATEGORIES: usize = WorkloadCategory::ALL.len();

/// One LSTM layer over 4-feature windows, one 4-way head.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizerModel {
    model: RnnModel,
}

impl CharacterizerModel {
    pub fn shape() -> ModelShape {
        ModelShape::new(CHARACTERIZER_FEATURES, vec![CHARACTERIZER_HIDDEN], vec![CATEGORIES])
            .expect("characterizer shape is valid")
    }

    pub fn new(seed: u64) -> Self {
        Self {
            model: RnnModel::new(&Self::shape(), seed),
        }
    }

    pub fn zeros() -> Self {
        Self {
            model: RnnModel::zeros(&Self::shape()),
        }
    }

    pub fn from_model(model: RnnModel) -> Result<Self> {
        let s = model.shape();
        if s.input_dim != CHARACTERIZER_FEATURES || s.heads != [CATEGORIES] {
            return Err(Error::ModelFormat(format!(
                "characterizer needs input {CHARACTERIZER_FEATURES} and one {CATEGORIES}-class head, found input {} heads {:?}",
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

    pub fn classify_features(&self, rows: ArrayView2<f64>) -> Result<(WorkloadCategory, Array1<f64>)> {
        let probs = self.model.forward(rows)?;
        let cat = WorkloadCategory::from_index(argmax(probs.view())).expect("head has one class per category");
        Ok((cat, probs))
    }

    /// Classifies many windows in one batched pass.
    pub fn classify_batch(&self, windows: &[&[IoRequest]]) -> Result<Vec<WorkloadCategory>> {
        let feats: Vec<_> = windows.iter().map(|w| extract_characterizer_features(w)).collect();
        let views: Vec<_> = feats.iter().map(|f| f.view()).collect();
        let probs = self.model.predict_final(&views, 0)?;
        Ok(probs
            .iter()
            .map(|p| WorkloadCategory::from_index(argmax(p.view())).expect("valid class"))
            .collect())
    }
}

/// Most probable category for `window`; ties go to the lowest index.
pub fn classify_workload(model: &CharacterizerModel, window: &[IoRequest]) -> Result<(WorkloadCategory, Array1<f64>)> {
    if window.is_empty() {
        return Err(Error::EmptyDataset);
    }
    model.classify_features(extract_characterizer_features(window).view())
}

/// Non-overlapping windows of every stream, each labeled with its
/// stream's category. Incomplete tail windows are dropped.
pub fn characterizer_dataset(streams: &[(&[IoRequest], WorkloadCategory)]) -> Vec<Sample> {
    streams
        .iter()
        .flat_map(|&(reqs, cat)| {
            reqs.chunks_exact(WINDOW_LEN)
                .map(move |w| Sample::final_step(extract_characterizer_features(w), cat.index()))
        })
        .collect()
}

pub fn train_characterizer(
    dataset: &[Sample],
    config: &TrainConfig,
) -> Result<(CharacterizerModel, Vec<EpochStats>)> {
    let mut model = RnnModel::new(&CharacterizerModel::shape(), config.seed);
    let history = train(&mut model, dataset, config)?;
    Ok((CharacterizerModel { model }, history))
}

pub fn evaluate_characterizer(model: &CharacterizerModel, dataset: &[Sample]) -> Result<Evaluation> {
    evaluate(&model.model, dataset, 64)
}
