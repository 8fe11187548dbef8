use std::collections::{BTreeMap, HashMap};

use crate::trace::PageId;

/// Ordered page list keyed by recency stamps. Larger stamps sit nearer the
/// head (most recent). Head inserts draw from an increasing clock and tail
/// inserts from a decreasing one, so both ends stay O(log n).
#[derive(Debug, Clone, Default)]
pub struct RecencyList {
    order: BTreeMap<i64, PageId>,
    stamps: HashMap<PageId, i64>,
    head_clock: i64,
    tail_clock: i64,
}

impl RecencyList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn contains(&self, page: PageId) -> bool {
        self.stamps.contains_key(&page)
    }

    pub fn stamp(&self, page: PageId) -> Option<i64> {
        self.stamps.get(&page).copied()
    }

    /// Inserts `page` at the head, moving it there if already present.
    pub fn push_head(&mut self, page: PageId) {
        self.head_clock += 1;
        self.insert_with_stamp(page, self.head_clock);
    }

    /// Inserts `page` behind every current entry.
    pub fn push_tail(&mut self, page: PageId) {
        self.tail_clock -= 1;
        self.insert_with_stamp(page, self.tail_clock);
    }

    /// Places `page` at an explicit stamp. Stamps must be unique within the
    /// list.
    pub fn insert_with_stamp(&mut self, page: PageId, stamp: i64) {
        self.remove(page);
        let clash = self.order.insert(stamp, page);
        debug_assert!(clash.is_none(), "duplicate recency stamp {stamp}");
        self.stamps.insert(page, stamp);
        self.head_clock = self.head_clock.max(stamp);
        self.tail_clock = self.tail_clock.min(stamp);
    }

    pub fn remove(&mut self, page: PageId) -> Option<i64> {
        let stamp = self.stamps.remove(&page)?;
        self.order.remove(&stamp);
        Some(stamp)
    }

    pub fn tail(&self) -> Option<PageId> {
        self.order.values().next().copied()
    }

    pub fn pop_tail(&mut self) -> Option<PageId> {
        let (_, page) = self.order.pop_first()?;
        self.stamps.remove(&page);
        Some(page)
    }

    pub fn iter_from_tail(&self) -> impl Iterator<Item = PageId> + '_ {
        self.order.values().copied()
    }

    pub fn iter_from_head(&self) -> impl Iterator<Item = PageId> + '_ {
        self.order.values().rev().copied()
    }

    /// Stamp of the `n`-th entry counted from the head (1-based).
    pub fn nth_stamp_from_head(&self, n: usize) -> Option<i64> {
        if n == 0 {
            return None;
        }
        self.order.keys().rev().nth(n - 1).copied()
    }

    /// 0-based distance from the head. Linear time.
    pub fn position_from_head(&self, page: PageId) -> Option<usize> {
        let stamp = self.stamp(page)?;
        Some(self.order.range(stamp + 1..).count())
    }
}
