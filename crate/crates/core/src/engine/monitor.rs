use std::collections::BTreeMap;

use crate::characterize::{CacheDecisionModel, CacheInference, CharacterizerModel, WINDOW_LEN};
use crate::error::Result;
use crate::policies::RcRnnPolicy;
use crate::trace::{IoRequest, WorkloadCategory};

/// Requests buffered between characterizer votes.
pub const MONITOR_PERIOD: usize = 1000;

/// The characterizer's view of the running workload and the models it can
/// switch between.
#[derive(Debug, Clone)]
pub struct MonitorState {
    buffer: Vec<IoRequest>,
    current: WorkloadCategory,
    models: BTreeMap<WorkloadCategory, CacheDecisionModel>,
    votes_taken: usize,
}

/// A category change that came with a model to install.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent {
    /// Index of the request that completed the deciding period.
    pub at_request: usize,
    pub from: WorkloadCategory,
    pub to: WorkloadCategory,
}

impl MonitorState {
    pub fn new(current: WorkloadCategory, models: BTreeMap<WorkloadCategory, CacheDecisionModel>) -> Self {
        Self {
            buffer: Vec::with_capacity(MONITOR_PERIOD),
            current,
            models,
            votes_taken: 0,
        }
    }

    pub fn current(&self) -> WorkloadCategory {
        self.current
    }

    pub fn votes_taken(&self) -> usize {
        self.votes_taken
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn model(&self, category: WorkloadCategory) -> Option<&CacheDecisionModel> {
        self.models.get(&category)
    }
}

/// Category with strictly the most votes, if any.
pub fn plurality(votes: &[WorkloadCategory]) -> Option<WorkloadCategory> {
    let mut counts = [0usize; WorkloadCategory::ALL.len()];
    for v in votes {
        counts[v.index()] += 1;
    }
    let best = *counts.iter().max()?;
    let mut winners = WorkloadCategory::ALL.into_iter().filter(|c| counts[c.index()] == best);
    let first = winners.next()?;
    winners.next().is_none().then_some(first)
}

/// Buffers `req`; once a full period is buffered, classifies its windows
/// and switches to the plurality category when it differs from the current
/// one and has a registered model. Ties keep the current category.
pub fn monitor_and_reconfigure(
    monitor: &mut MonitorState,
    characterizer: &CharacterizerModel,
    index: usize,
    req: &IoRequest,
) -> Result<Option<SwitchEvent>> {
    monitor.buffer.push(*req);
    if monitor.buffer.len() < MONITOR_PERIOD {
        return Ok(None);
    }
    let windows: Vec<&[IoRequest]> = monitor.buffer.chunks_exact(WINDOW_LEN).collect();
    let votes = characterizer.classify_batch(&windows)?;
    monitor.buffer.clear();
    monitor.votes_taken += 1;
    match plurality(&votes) {
        Some(to) if to != monitor.current && monitor.models.contains_key(&to) => {
            let from = monitor.current;
            monitor.current = to;
            Ok(Some(SwitchEvent { at_request: index, from, to }))
        }
        _ => Ok(None),
    }
}

/// Moves every resident page to the queue its last access row maps to
/// under the installed model. Residency is unchanged. Returns the number
/// of pages that changed queue.
pub fn reevaluate_residents(policy: &mut RcRnnPolicy<CacheInference>) -> Result<usize> {
    let (cache, inference) = policy.parts_mut();
    let pages = cache.resident_pages();
    if pages.is_empty() {
        return Ok(0);
    }
    let labels = inference.relabel(&pages)?;
    Ok(cache.reassign(|p| labels.get(&p).copied()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::RnnModel;
    use crate::oracle::DurationLabel;
    use crate::policies::CachePolicy;
    use crate::trace::Op;
    use WorkloadCategory::*;

    #[test]
    fn plurality_rules() {
        assert_eq!(plurality(&[MailServer; 10]), Some(MailServer));
        let mut v = vec![WebServer; 7];
        v.extend([MailServer; 3]);
        assert_eq!(plurality(&v), Some(WebServer));
        let mut tie = vec![WebServer; 5];
        tie.extend([MailServer; 5]);
        assert_eq!(plurality(&tie), None);
        assert_eq!(plurality(&[]), None);
    }

    /// A characterizer whose head always prefers `cat`.
    fn biased(cat: WorkloadCategory) -> CharacterizerModel {
        let mut m = CharacterizerModel::zeros().into_model();
        m.params.heads[0].bias[cat.index()] = 5.0;
        CharacterizerModel::from_model(m).unwrap()
    }

    fn models() -> BTreeMap<WorkloadCategory, CacheDecisionModel> {
        [MailServer, WebServer]
            .into_iter()
            .map(|c| (c, CacheDecisionModel::with_size(1, 4, c.index() as u64).unwrap()))
            .collect()
    }

    #[test]
    fn votes_every_period() {
        let mut m = MonitorState::new(MailServer, models());
        let ch = biased(MailServer);
        for i in 0..2 * MONITOR_PERIOD {
            let r = IoRequest::new(i as u64, i as u64, 1, Op::Read);
            assert!(monitor_and_reconfigure(&mut m, &ch, i, &r).unwrap().is_none());
            assert!(m.buffered() < MONITOR_PERIOD);
        }
        assert_eq!(m.votes_taken(), 2);
    }

    #[test]
    fn switches_only_with_model() {
        let ch = biased(WebServer);
        let mut m = MonitorState::new(MailServer, models());
        let mut event = None;
        for i in 0..MONITOR_PERIOD {
            let r = IoRequest::new(i as u64, 1, 1, Op::Read);
            event = monitor_and_reconfigure(&mut m, &ch, i, &r).unwrap().or(event);
        }
        assert_eq!(event, Some(SwitchEvent { at_request: MONITOR_PERIOD - 1, from: MailServer, to: WebServer }));
        assert_eq!(m.current(), WebServer);

        let ch = biased(Database);
        let mut m = MonitorState::new(MailServer, models());
        for i in 0..MONITOR_PERIOD {
            let r = IoRequest::new(i as u64, 1, 1, Op::Read);
            assert!(monitor_and_reconfigure(&mut m, &ch, i, &r).unwrap().is_none());
        }
        assert_eq!(m.current(), MailServer);
    }

    #[test]
    fn reevaluation_keeps_residents() {
        let mut soon = RnnModel::zeros(&CacheDecisionModel::shape(1, 4).unwrap());
        soon.params.heads[0].bias[1] = 3.0;
        soon.params.heads[1].bias[DurationLabel::Late.index()] = 3.0;
        let late = CacheDecisionModel::from_model(soon.clone()).unwrap();
        let mut p = RcRnnPolicy::new(8, CacheInference::new(late));
        assert_eq!(reevaluate_residents(&mut p).unwrap(), 0);
        for i in 0..6 {
            p.on_access(i, &IoRequest::new(i as u64, i as u64, 1, Op::Read));
        }
        assert_eq!(p.cache().queue_len(DurationLabel::Late), 6);
        soon.params.heads[1].bias[DurationLabel::Late.index()] = 0.0;
        soon.params.heads[1].bias[DurationLabel::Soon.index()] = 3.0;
        let before = p.cache().resident_pages();
        p.parts_mut().1.swap_model(CacheDecisionModel::from_model(soon).unwrap());
        assert_eq!(reevaluate_residents(&mut p).unwrap(), 6);
        assert_eq!(p.cache().resident_pages(), before);
        assert_eq!(p.cache().queue_order(DurationLabel::Soon), vec![5, 4, 3, 2, 1, 0]);
    }
}
