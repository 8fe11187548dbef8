use std::collections::{BTreeSet, HashMap};

use super::{absent_pages, page_range, AccessOutcome, CachePolicy};
use crate::trace::{IoRequest, PageId};

/// Frequency-priority cache. Lifetime counts survive eviction; a miss
/// admits only when its count beats every victim it would displace.
#[derive(Debug, Clone)]
pub struct AccessFrequency {
    capacity: usize,
    counts: HashMap<PageId, u64>,
    // (count, last-access stamp, page) for residents; first = next victim.
    order: BTreeSet<(u64, u64, PageId)>,
    keys: HashMap<PageId, (u64, u64)>,
    clock: u64,
}

impl AccessFrequency {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be at least one page");
        Self {
            capacity,
            counts: HashMap::new(),
            order: BTreeSet::new(),
            keys: HashMap::new(),
            clock: 0,
        }
    }

    pub fn count(&self, page: PageId) -> u64 {
        self.counts.get(&page).copied().unwrap_or(0)
    }

    fn place(&mut self, page: PageId) {
        self.clock += 1;
        if let Some((c, s)) = self.keys.remove(&page) {
            self.order.remove(&(c, s, page));
        }
        let key = (self.count(page), self.clock);
        self.order.insert((key.0, key.1, page));
        self.keys.insert(page, key);
    }

    fn evict(&mut self, page: PageId) {
        if let Some((c, s)) = self.keys.remove(&page) {
            self.order.remove(&(c, s, page));
        }
    }
}

impl CachePolicy for AccessFrequency {
    fn name(&self) -> &'static str {
        "access"
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
        for p in req.pages() {
            *self.counts.entry(p).or_insert(0) += 1;
        }
        let absent = absent_pages(req, |p| self.keys.contains_key(&p));
        let touch_present = |s: &mut Self| {
            let present: Vec<PageId> = req.pages().filter(|p| s.keys.contains_key(p)).collect();
            present.into_iter().for_each(|p| s.place(p));
        };
        if absent.is_empty() {
            touch_present(self);
            return AccessOutcome::hit();
        }
        if req.size_pages as usize > self.capacity {
            touch_present(self);
            return AccessOutcome::bypass();
        }
        let need = (self.keys.len() + absent.len()).saturating_sub(self.capacity);
        let protect = page_range(req);
        let victims: Vec<(u64, PageId)> = self
            .order
            .iter()
            .filter(|(_, _, p)| !protect.contains(p))
            .take(need)
            .map(|&(c, _, p)| (c, p))
            .collect();
        debug_assert_eq!(victims.len(), need);
        let unit_count = absent.iter().map(|&p| self.count(p)).min().unwrap_or(0);
        if victims.iter().any(|&(c, _)| c >= unit_count) {
            touch_present(self);
            return AccessOutcome::bypass();
        }
        let evicted: Vec<PageId> = victims.into_iter().map(|(_, p)| p).collect();
        for &v in &evicted {
            self.evict(v);
        }
        req.pages().for_each(|p| self.place(p));
        AccessOutcome::admit(evicted)
    }
}
