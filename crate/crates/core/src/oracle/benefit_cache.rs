use std::collections::{BTreeSet, HashMap};

use super::{benefit, check_capacity, label_duration, LabeledRequest, PageStats};
use crate::error::{Error, Result};
use crate::policies::{absent_pages, page_range, AccessOutcome, CachePolicy};
use crate::trace::{IoRequest, PageId, Trace};

/// Omniscient cache ranked by static per-page benefit. A missed request
/// enters as one unit carrying the benefit of its first page; it is
/// admitted only while its benefit is positive and strictly above every
/// victim it displaces. Equal-benefit victims leave in admission order.
#[derive(Debug, Clone)]
pub struct BenefitOracle {
    capacity: usize,
    benefits: HashMap<PageId, f64>,
    // Benefits are finite and non-negative, so their bit patterns sort like
    // the values themselves.
    order: BTreeSet<(u64, u64, PageId)>,
    keys: HashMap<PageId, (u64, u64)>,
    admissions: u64,
}

impl BenefitOracle {
    /// Pages absent from `stats` score zero and are never admitted.
    pub fn new(capacity: usize, stats: &HashMap<PageId, PageStats>) -> Self {
        assert!(capacity >= 1, "capacity must be at least one page");
        Self {
            capacity,
            benefits: stats.iter().map(|(&p, s)| (p, benefit(s))).collect(),
            order: BTreeSet::new(),
            keys: HashMap::new(),
            admissions: 0,
        }
    }

    pub fn page_benefit(&self, page: PageId) -> f64 {
        self.benefits.get(&page).copied().unwrap_or(0.0)
    }
}

impl CachePolicy for BenefitOracle {
    fn name(&self) -> &'static str {
        "oracle-benefit"
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn resident_len(&self) -> usize {
        self.keys.len()
    }

    fn is_resident(&self, page: PageId) -> bool {
        self.keys.contains_key(&page)
    }

    fn on_access(&mut self, _index: usize, req: &IoRequest) -> AccessOutcome {
        let absent = absent_pages(req, |p| self.keys.contains_key(&p));
        if absent.is_empty() {
            return AccessOutcome::hit();
        }
        let b = self.page_benefit(req.page_id);
        if req.size_pages as usize > self.capacity || b <= 0.0 {
            return AccessOutcome::bypass();
        }
        let need = (self.keys.len() + absent.len()).saturating_sub(self.capacity);
        let protect = page_range(req);
        let bits = b.to_bits();
        let victims: Vec<(u64, PageId)> = self
            .order
            .iter()
            .filter(|(_, _, p)| !protect.contains(p))
            .take(need)
            .map(|&(vb, _, p)| (vb, p))
            .collect();
        debug_assert_eq!(victims.len(), need);
        if victims.iter().any(|&(vb, _)| vb >= bits) {
            return AccessOutcome::bypass();
        }
        for &(_, p) in &victims {
            let (vb, seq) = self.keys.remove(&p).expect("victim is resident");
            self.order.remove(&(vb, seq, p));
        }
        for p in absent {
            self.admissions += 1;
            self.order.insert((bits, self.admissions, p));
            self.keys.insert(p, (bits, self.admissions));
        }
        AccessOutcome::admit(victims.into_iter().map(|(_, p)| p).collect())
    }
}

/// Replays `trace` through [`BenefitOracle`] and tags each access. An access
/// is cached when its pages are resident afterwards; its label comes from
/// the residency of the first page it admitted, or of its first page on a hit.
/// Residencies still open at the end are measured to the trace length.
pub fn oracle_replay(
    trace: &Trace,
    cache_size_pages: usize,
    stats: &HashMap<PageId, PageStats>,
) -> Result<Vec<LabeledRequest>> {
    check_capacity(cache_size_pages)?;
    for req in trace.requests() {
        if let Some(p) = req.pages().find(|p| !stats.contains_key(p)) {
            return Err(Error::MissingPageStats(p));
        }
    }
    let mut oracle = BenefitOracle::new(cache_size_pages, stats);
    // (admitted_at, evicted_at) per residency.
    let mut residencies: Vec<(usize, Option<usize>)> = Vec::new();
    let mut open: HashMap<PageId, usize> = HashMap::new();
    let mut tags: Vec<Option<usize>> = Vec::with_capacity(trace.len());
    for (i, req) in trace.requests().iter().enumerate() {
        let absent = absent_pages(req, |p| oracle.is_resident(p));
        let outcome = oracle.on_access(i, req);
        for p in &outcome.evicted {
            let r = open.remove(p).expect("evicted page had an open residency");
            residencies[r].1 = Some(i);
        }
        let tag = match outcome.decision {
            crate::policies::Decision::Hit => Some(open[&req.page_id]),
            crate::policies::Decision::MissAdmit => {
                let first = residencies.len();
                for p in absent {
                    open.insert(p, residencies.len());
                    residencies.push((i, None));
                }
                Some(first)
            }
            crate::policies::Decision::MissBypass => None,
        };
        tags.push(tag);
    }
    let n = trace.len();
    Ok(trace
        .requests()
        .iter()
        .zip(tags)
        .map(|(req, tag)| {
            let label = tag.map(|r| {
                let (admitted, evicted) = residencies[r];
                label_duration(evicted.unwrap_or(n) - admitted, cache_size_pages)
            });
            LabeledRequest::new(*req, label)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DeviceModel;
    use crate::oracle::{aggregate_page_stats, DurationLabel};
    use crate::policies::Decision;
    use crate::trace::Op;
    use proptest::prelude::*;

    fn flat(n_acc: u64, n_reads: u64) -> PageStats {
        PageStats {
            n_acc,
            n_reads,
            mean_size_pages: 1.0,
            t_hdd_ms: 80.0,
            t_ssd_ms: 1.0,
        }
    }

    fn trace_of(pages: &[u64]) -> Trace {
        Trace::new(
            pages
                .iter()
                .enumerate()
                .map(|(i, &p)| IoRequest::new(i as u64, p, 1, Op::Read))
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn higher_benefit_displaces_lower() {
        // X = 576, Y = 80.
        let stats = HashMap::from([(1, flat(5, 4)), (2, PageStats { mean_size_pages: 2.0, ..flat(3, 0) })]);
        assert!((benefit(&stats[&1]) - 576.0).abs() < 1e-9);
        assert!((benefit(&stats[&2]) - 80.0).abs() < 1e-9);
        let t = trace_of(&[2, 1]);
        let tags = oracle_replay(&t, 1, &stats).unwrap();
        assert!(tags[0].cached && tags[1].cached);
        // Y lived for one request before X replaced it.
        assert_eq!(tags[0].duration_label, Some(DurationLabel::Soon));
        let t = trace_of(&[1, 2]);
        let tags = oracle_replay(&t, 1, &stats).unwrap();
        assert!(tags[0].cached && !tags[1].cached);
    }

    #[test]
    fn single_use_never_admitted() {
        let stats = HashMap::from([(1, flat(1, 1)), (2, flat(2, 2))]);
        let tags = oracle_replay(&trace_of(&[1, 2, 2]), 4, &stats).unwrap();
        assert!(!tags[0].cached);
        assert!(tags[1].cached && tags[2].cached);
        assert!(tags.iter().all(|t| t.cached == t.duration_label.is_some()));
    }

    #[test]
    fn missing_stats_rejected() {
        let stats = HashMap::from([(1, flat(2, 2))]);
        assert!(matches!(
            oracle_replay(&trace_of(&[1, 3]), 2, &stats),
            Err(Error::MissingPageStats(3))
        ));
        assert!(oracle_replay(&trace_of(&[1]), 0, &stats).is_err());
    }

    #[test]
    fn equal_benefit_evicts_earliest_admitted() {
        let stats = HashMap::from([(1, flat(2, 2)), (2, flat(2, 2)), (3, flat(9, 9))]);
        let mut o = BenefitOracle::new(2, &stats);
        let t = trace_of(&[1, 2, 3]);
        for (i, r) in t.requests().iter().enumerate() {
            o.on_access(i, r);
        }
        assert!(!o.is_resident(1) && o.is_resident(2) && o.is_resident(3));
    }

    #[test]
    fn durations_measured_to_eviction_or_end() {
        let stats: HashMap<_, _> = (0..3).map(|p| (p, flat(2 + p, 2 + p))).collect();
        // Capacity 1: page 0 admitted at 0, replaced by 1 at index 8.
        let t = trace_of(&[0, 9, 9, 9, 9, 9, 9, 9, 1, 1]);
        let mut stats = stats;
        stats.insert(9, flat(1, 1));
        let tags = oracle_replay(&t, 1, &stats).unwrap();
        assert_eq!(tags[0].duration_label, Some(DurationLabel::Late));
        // Page 1 stays from 8 to the end: duration 2 > C = 1.
        assert_eq!(tags[8].duration_label, Some(DurationLabel::Mean));
        assert_eq!(tags[9].duration_label, tags[8].duration_label);
        assert!(!tags[1].cached);
    }

    proptest! {
        #[test]
        fn capacity_and_tag_consistency(
            cap in 1usize..8,
            reqs in prop::collection::vec((0u64..25, 1u32..4, any::<bool>()), 1..200),
        ) {
            let t = Trace::new(
                reqs.iter()
                    .enumerate()
                    .map(|(i, &(p, s, r))| IoRequest::new(i as u64, p, s, if r { Op::Read } else { Op::Write }))
                    .collect(),
                None,
            )
            .unwrap();
            let stats = aggregate_page_stats(&t, &DeviceModel::default());
            let tags = oracle_replay(&t, cap, &stats).unwrap();
            prop_assert_eq!(tags.len(), t.len());
            let mut o = BenefitOracle::new(cap, &stats);
            for (i, (req, tag)) in t.requests().iter().zip(&tags).enumerate() {
                let out = o.on_access(i, req);
                prop_assert!(o.resident_len() <= cap);
                prop_assert_eq!(tag.cached, out.decision != Decision::MissBypass);
                prop_assert_eq!(tag.cached, tag.duration_label.is_some());
                if tag.cached {
                    prop_assert!(req.pages().all(|p| o.is_resident(p)));
                }
            }
        }
    }
}
