use super::{absent_pages, page_range, tail_victims, AccessOutcome, CachePolicy, RecencyList};
use crate::trace::{IoRequest, PageId};

/// Always admits; evicts from the least recently used end.
#[derive(Debug, Clone)]
pub struct Lru {
    capacity: usize,
    list: RecencyList,
}

impl Lru {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be at least one page");
        Self {
            capacity,
            list: RecencyList::new(),
        }
    }

    /// Resident pages from most to least recently used.
    pub fn resident_order(&self) -> Vec<PageId> {
        self.list.iter_from_head().collect()
    }
}

impl CachePolicy for Lru {
    fn name(&self) -> &'static str {
        "lru"
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn resident_len(&self) -> usize {
        self.list.len()
    }

    fn is_resident(&self, page: PageId) -> bool {
        self.list.contains(page)
    }

    fn on_access(&mut self, _index: usize, req: &IoRequest) -> AccessOutcome {
        let absent = absent_pages(req, |p| self.list.contains(p));
        if absent.is_empty() {
            req.pages().for_each(|p| self.list.push_head(p));
            return AccessOutcome::hit();
        }
        if req.size_pages as usize > self.capacity {
            let present: Vec<PageId> = req.pages().filter(|&p| self.list.contains(p)).collect();
            present.into_iter().for_each(|p| self.list.push_head(p));
            return AccessOutcome::bypass();
        }
        let need = (self.list.len() + absent.len()).saturating_sub(self.capacity);
        let victims = tail_victims(&self.list, need, &page_range(req))
            .expect("resident pages outside the request cover the shortfall");
        for &v in &victims {
            self.list.remove(v);
        }
        req.pages().for_each(|p| self.list.push_head(p));
        AccessOutcome::admit(victims)
    }
}
