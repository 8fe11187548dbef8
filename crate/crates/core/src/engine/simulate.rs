use std::collections::BTreeMap;

use super::metrics::{request_latency, run_policy, Metrics};
use super::monitor::{monitor_and_reconfigure, reevaluate_residents, MonitorState, SwitchEvent};
use crate::characterize::{CacheDecisionModel, CacheInference, CharacterizerModel};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::oracle::{aggregate_page_stats, Belady, BenefitOracle};
use crate::policies::{AccessFrequency, CachePolicy, Larc, Lru, PolicyKind, RcRnnPolicy};
use crate::trace::{Trace, WorkloadCategory};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub capacity_pages: usize,
    pub device: DeviceModel,
    /// Constant added to every request's modeled latency under rcrnn.
    pub rcrnn_overhead_ms: f64,
    /// Let the characterizer switch cache models during rcrnn runs.
    pub monitor: bool,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(capacity_pages: usize) -> Self {
        Self {
            capacity_pages,
            device: DeviceModel::default(),
            rcrnn_overhead_ms: 0.0,
            monitor: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity_pages == 0 {
            return Err(Error::InvalidArgument("capacity must be at least one page".into()));
        }
        self.device.validate().map_err(Error::InvalidArgument)?;
        if !(self.rcrnn_overhead_ms >= 0.0 && self.rcrnn_overhead_ms.is_finite()) {
            return Err(Error::InvalidArgument("rcrnn_overhead_ms must be non-negative".into()));
        }
        Ok(())
    }
}

/// Trained models available to rcrnn runs.
#[derive(Debug, Clone, Default)]
pub struct ModelRegistry {
    pub characterizer: Option<CharacterizerModel>,
    pub cache_models: BTreeMap<WorkloadCategory, CacheDecisionModel>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(category: WorkloadCategory, model: CacheDecisionModel) -> Self {
        let mut r = Self::new();
        r.cache_models.insert(category, model);
        r
    }

    /// Category to start in: the trace's own label when a model exists for
    /// it, otherwise the first registered category.
    pub fn initial_category(&self, hint: Option<WorkloadCategory>) -> Option<WorkloadCategory> {
        hint.filter(|c| self.cache_models.contains_key(c))
            .or_else(|| self.cache_models.keys().next().copied())
    }
}

/// Metrics of one policy over `trace`.
pub fn simulate(trace: &Trace, policy: PolicyKind, config: &SimulationConfig, models: &ModelRegistry) -> Result<Metrics> {
    Ok(simulate_detailed(trace, policy, config, models)?.0)
}

/// As [`simulate`], also returning any model switches made during rcrnn.
pub fn simulate_detailed(
    trace: &Trace,
    policy: PolicyKind,
    config: &SimulationConfig,
    models: &ModelRegistry,
) -> Result<(Metrics, Vec<SwitchEvent>)> {
    config.validate()?;
    let cap = config.capacity_pages;
    let mut p: Box<dyn CachePolicy> = match policy {
        PolicyKind::Lru => Box::new(Lru::new(cap)),
        PolicyKind::Access => Box::new(AccessFrequency::new(cap)),
        PolicyKind::Larc => Box::new(Larc::new(cap)),
        PolicyKind::Belady => Box::new(Belady::new(trace.requests(), cap)),
        PolicyKind::OracleBenefit => {
            Box::new(BenefitOracle::new(cap, &aggregate_page_stats(trace, &config.device)))
        }
        PolicyKind::RcRnn => return simulate_rcrnn(trace, config, models),
    };
    Ok((run_policy(p.as_mut(), trace, &config.device, 0.0), Vec::new()))
}

fn simulate_rcrnn(trace: &Trace, config: &SimulationConfig, models: &ModelRegistry) -> Result<(Metrics, Vec<SwitchEvent>)> {
    let start = models
        .initial_category(trace.category)
        .ok_or_else(|| Error::MissingModel("models.cache".into()))?;
    let mut policy = RcRnnPolicy::new(config.capacity_pages, CacheInference::new(models.cache_models[&start].clone()));
    let mut monitor = match (&models.characterizer, config.monitor && models.cache_models.len() > 1) {
        (Some(ch), true) => Some((ch, MonitorState::new(start, models.cache_models.clone()))),
        _ => None,
    };
    let mut metrics = Metrics::new();
    let mut events = Vec::new();
    let mut prev = None;
    for (i, req) in trace.requests().iter().enumerate() {
        let outcome = policy.on_access(i, req);
        let latency = request_latency(&config.device, prev, req, outcome.decision) + config.rcrnn_overhead_ms;
        metrics.record(req, &outcome, latency);
        prev = Some(req);
        if let Some((ch, state)) = monitor.as_mut() {
            if let Some(ev) = monitor_and_reconfigure(state, ch, i, req)? {
                let model = state.model(ev.to).expect("switch implies a registered model").clone();
                policy.parts_mut().1.swap_model(model);
                reevaluate_residents(&mut policy)?;
                events.push(ev);
            }
        }
    }
    Ok((metrics, events))
}
