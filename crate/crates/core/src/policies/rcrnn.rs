use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use super::{absent_pages, page_range, AccessOutcome, CachePolicy, RecencyList};
use crate::oracle::DurationLabel;
use crate::trace::{IoRequest, PageId};

/// What the caching model says about a missed request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDecision {
    pub admit: bool,
    pub label: DurationLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub page_id: PageId,
    pub queue: DurationLabel,
    pub admitted_at: usize,
    pub n_acc: u64,
    pub n_reads: u64,
}

/// Three LRU queues, one per duration label. Victims come from the Soon
/// tail first, then Mean, then Late. Pages left too long in Mean or Late
/// drift one queue down unless they sit near the head.
#[derive(Debug, Clone)]
pub struct RcRnnCache {
    capacity: usize,
    queues: [RecencyList; 3],
    entries: HashMap<PageId, CacheEntry>,
    // (admitted_at, page) for every resident page in Mean or Late.
    candidates: BTreeSet<(usize, PageId)>,
    head_clock: i64,
    tail_clock: i64,
    demotions: u64,
}

/// Demotion age threshold as a multiple of the capacity.
pub const DEMOTION_AGE_FACTOR: usize = 5;
/// Fraction of a queue, from the head, exempt from demotion.
pub const DEMOTION_EXEMPT_FRACTION: f64 = 0.2;

fn lower(label: DurationLabel) -> DurationLabel {
    match label {
        DurationLabel::Late => DurationLabel::Mean,
        _ => DurationLabel::Soon,
    }
}

impl RcRnnCache {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be at least one page");
        Self {
            capacity,
            queues: Default::default(),
            entries: HashMap::new(),
            candidates: BTreeSet::new(),
            head_clock: 0,
            tail_clock: 0,
            demotions: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, page: PageId) -> Option<&CacheEntry> {
        self.entries.get(&page)
    }

    pub fn demotions(&self) -> u64 {
        self.demotions
    }

    pub fn queue_len(&self, label: DurationLabel) -> usize {
        self.queues[label.index()].len()
    }

    /// Pages of one queue from head to tail.
    pub fn queue_order(&self, label: DurationLabel) -> Vec<PageId> {
        self.queues[label.index()].iter_from_head().collect()
    }

    pub fn resident_pages(&self) -> Vec<PageId> {
        let mut pages: Vec<PageId> = self.entries.keys().copied().collect();
        pages.sort_unstable();
        pages
    }

    /// Next victim in Soon → Mean → Late tail order.
    pub fn next_victim(&self) -> Option<PageId> {
        self.victims(1, &(0..0)).and_then(|v| v.first().copied())
    }

    fn victims(&self, need: usize, protect: &Range<PageId>) -> Option<Vec<PageId>> {
        let out: Vec<PageId> = self
            .queues
            .iter()
            .flat_map(|q| q.iter_from_tail())
            .filter(|p| !protect.contains(p))
            .take(need)
            .collect();
        (out.len() == need).then_some(out)
    }

    fn set_candidate(&mut self, page: PageId, queue: DurationLabel, admitted_at: usize) {
        if queue != DurationLabel::Soon {
            self.candidates.insert((admitted_at, page));
        }
    }

    fn touch(&mut self, page: PageId, is_read: bool) {
        self.head_clock += 1;
        let e = self.entries.get_mut(&page).expect("touched page is resident");
        e.n_acc += 1;
        e.n_reads += u64::from(is_read);
        self.queues[e.queue.index()].insert_with_stamp(page, self.head_clock);
    }

    fn insert_head(&mut self, page: PageId, label: DurationLabel, index: usize, is_read: bool) {
        self.head_clock += 1;
        self.queues[label.index()].insert_with_stamp(page, self.head_clock);
        self.entries.insert(
            page,
            CacheEntry {
                page_id: page,
                queue: label,
                admitted_at: index,
                n_acc: 1,
                n_reads: u64::from(is_read),
            },
        );
        self.set_candidate(page, label, index);
    }

    fn evict(&mut self, page: PageId) {
        if let Some(e) = self.entries.remove(&page) {
            self.queues[e.queue.index()].remove(page);
            self.candidates.remove(&(e.admitted_at, page));
        }
    }

    /// Moves aged pages below the exempt head region one queue down, to the
    /// tail of the destination, and restarts their age.
    pub fn demote(&mut self, current_index: usize) {
        let threshold = DEMOTION_AGE_FACTOR * self.capacity;
        let Some(&(oldest, _)) = self.candidates.first() else {
            return;
        };
        if current_index < threshold || oldest > current_index - threshold {
            return;
        }
        let cutoff = current_index - threshold;
        let aged: Vec<(usize, PageId)> = self
            .candidates
            .range(..=(cutoff, PageId::MAX))
            .copied()
            .collect();
        let exempt_from: [Option<i64>; 3] = std::array::from_fn(|i| {
            let q = &self.queues[i];
            let n = (DEMOTION_EXEMPT_FRACTION * q.len() as f64).ceil() as usize;
            q.nth_stamp_from_head(n)
        });
        for (admitted_at, page) in aged {
            let queue = self.entries[&page].queue;
            let stamp = self.queues[queue.index()].stamp(page).expect("entry is queued");
            if exempt_from[queue.index()].is_some_and(|c| stamp >= c) {
                continue;
            }
            self.candidates.remove(&(admitted_at, page));
            self.queues[queue.index()].remove(page);
            let dest = lower(queue);
            self.tail_clock -= 1;
            self.queues[dest.index()].insert_with_stamp(page, self.tail_clock);
            let e = self.entries.get_mut(&page).expect("entry is resident");
            e.queue = dest;
            e.admitted_at = current_index;
            self.set_candidate(page, dest, current_index);
            self.demotions += 1;
        }
    }

    /// Processes one request with the model's verdict, which only matters on
    /// a miss.
    pub fn access(&mut self, index: usize, req: &IoRequest, decision: ModelDecision) -> AccessOutcome {
        self.demote(index);
        let is_read = req.op.is_read();
        let absent = absent_pages(req, |p| self.entries.contains_key(&p));
        let touch_present = |s: &mut Self| {
            for p in req.pages() {
                if s.entries.contains_key(&p) {
                    s.touch(p, is_read);
                }
            }
        };
        if absent.is_empty() {
            touch_present(self);
            return AccessOutcome::hit();
        }
        if !decision.admit || req.size_pages as usize > self.capacity {
            touch_present(self);
            return AccessOutcome::bypass();
        }
        let need = (self.entries.len() + absent.len()).saturating_sub(self.capacity);
        let victims = self
            .victims(need, &page_range(req))
            .expect("resident pages outside the request cover the shortfall");
        for &v in &victims {
            self.evict(v);
        }
        for p in req.pages() {
            if self.entries.contains_key(&p) {
                self.touch(p, is_read);
            } else {
                self.insert_head(p, decision.label, index, is_read);
            }
        }
        AccessOutcome::admit(victims)
    }

    /// Moves residents to the queue named by `relabel`, keeping each page's
    /// recency stamp so relative order survives within every destination.
    pub fn reassign(&mut self, mut relabel: impl FnMut(PageId) -> Option<DurationLabel>) -> usize {
        let mut moved = 0;
        for page in self.resident_pages() {
            let Some(new) = relabel(page) else { continue };
            let e = self.entries.get_mut(&page).expect("listed page is resident");
            let old = e.queue;
            if new == old {
                continue;
            }
            e.queue = new;
            let admitted_at = e.admitted_at;
            let stamp = self.queues[old.index()].remove(page).expect("entry is queued");
            self.queues[new.index()].insert_with_stamp(page, stamp);
            self.candidates.remove(&(admitted_at, page));
            self.set_candidate(page, new, admitted_at);
            moved += 1;
        }
        moved
    }

    #[cfg(test)]
    pub(crate) fn check_invariants(&self) {
        assert!(self.entries.len() <= self.capacity);
        let queued: usize = self.queues.iter().map(RecencyList::len).sum();
        assert_eq!(queued, self.entries.len());
        for (p, e) in &self.entries {
            assert!(self.queues[e.queue.index()].contains(*p));
            assert_eq!(
                self.candidates.contains(&(e.admitted_at, *p)),
                e.queue != DurationLabel::Soon
            );
        }
        assert_eq!(
            self.candidates.len(),
            self.entries.values().filter(|e| e.queue != DurationLabel::Soon).count()
        );
    }
}

/// Supplies a decision for every request, including hits, so recurrent
/// advisors can keep their state in step with the trace.
pub trait Advisor {
    fn advise(&mut self, index: usize, req: &IoRequest, cache: &RcRnnCache) -> ModelDecision;

    fn observe(&mut self, _index: usize, _req: &IoRequest, _outcome: &AccessOutcome, _cache: &RcRnnCache) {}
}

/// Returns the same verdict for every request.
#[derive(Debug, Clone, Copy)]
pub struct ConstantAdvisor(pub ModelDecision);

impl Advisor for ConstantAdvisor {
    fn advise(&mut self, _index: usize, _req: &IoRequest, _cache: &RcRnnCache) -> ModelDecision {
        self.0
    }
}

/// Three-queue cache driven by an advisor.
#[derive(Debug, Clone)]
pub struct RcRnnPolicy<A> {
    cache: RcRnnCache,
    advisor: A,
}

impl<A: Advisor> RcRnnPolicy<A> {
    pub fn new(capacity: usize, advisor: A) -> Self {
        Self {
            cache: RcRnnCache::new(capacity),
            advisor,
        }
    }

    pub fn cache(&self) -> &RcRnnCache {
        &self.cache
    }

    pub fn advisor(&self) -> &A {
        &self.advisor
    }

    pub fn parts_mut(&mut self) -> (&mut RcRnnCache, &mut A) {
        (&mut self.cache, &mut self.advisor)
    }
}

impl<A: Advisor> CachePolicy for RcRnnPolicy<A> {
    fn name(&self) -> &'static str {
        "rcrnn"
    }

    fn capacity(&self) -> usize {
        self.cache.capacity()
    }

    fn resident_len(&self) -> usize {
        self.cache.len()
    }

    fn is_resident(&self, page: PageId) -> bool {
        self.cache.entry(page).is_some()
    }

    fn on_access(&mut self, index: usize, req: &IoRequest) -> AccessOutcome {
        let decision = self.advisor.advise(index, req, &self.cache);
        let outcome = self.cache.access(index, req, decision);
        self.advisor.observe(index, req, &outcome, &self.cache);
        outcome
    }
}
