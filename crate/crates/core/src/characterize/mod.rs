//! Feature extraction, the workload characterizer, the cache-decision
//! model with closed-loop inference, and hand-crafted baselines.

mod baselines;
mod cache_model;
mod characterizer;
mod features;

pub use baselines::{
    baseline_characterize, twsd_classify, BaselineMethod, SoftmaxClassifier, TwsdConfig, TwsdType, IOSIZE_BINS,
};
pub use cache_model::{
    cache_dataset, split_holdout, train_cache_model, train_cache_model_sized, train_cache_samples, train_cache_selected,
    CacheDecisionModel,
    CacheInference, ADMIT_HEAD, CACHE_HIDDEN, CACHE_LAYERS, DURATION_HEAD,
};
pub use characterizer::{
    characterizer_dataset, classify_workload, evaluate_characterizer, train_characterizer, CharacterizerModel,
    CHARACTERIZER_HIDDEN,
};
pub use features::{
    extract_cache_features, extract_characterizer_features, CacheFeatureState, PrevDecision, CACHE_FEATURES,
    CHARACTERIZER_FEATURES, WINDOW_LEN,
};
