use super::{absent_pages, page_range, tail_victims, AccessOutcome, CachePolicy, RecencyList};
use crate::trace::{IoRequest, PageId};

/// Lazy admission: a miss is admitted only if its pages were already
/// waiting in the ghost filter. Ghost and main lists stay disjoint.
#[derive(Debug, Clone)]
pub struct Larc {
    capacity: usize,
    ghost_capacity: usize,
    main: RecencyList,
    ghost: RecencyList,
}

impl Larc {
    /// Ghost filter sized equal to the main cache.
    pub fn new(capacity: usize) -> Self {
        Self::with_ghost_capacity(capacity, capacity)
    }

    pub fn with_ghost_capacity(capacity: usize, ghost_capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be at least one page");
        assert!(ghost_capacity >= 1, "ghost capacity must be at least one page");
        Self {
            capacity,
            ghost_capacity,
            main: RecencyList::new(),
            ghost: RecencyList::new(),
        }
    }

    pub fn ghost_len(&self) -> usize {
        self.ghost.len()
    }

    pub fn in_ghost(&self, page: PageId) -> bool {
        self.ghost.contains(page)
    }

    fn touch_present(&mut self, req: &IoRequest) {
        for p in req.pages() {
            if self.main.contains(p) {
                self.main.push_head(p);
            }
        }
    }
}

impl CachePolicy for Larc {
    fn name(&self) -> &'static str {
        "larc"
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn resident_len(&self) -> usize {
        self.main.len()
    }

    fn is_resident(&self, page: PageId) -> bool {
        self.main.contains(page)
    }

    fn on_access(&mut self, _index: usize, req: &IoRequest) -> AccessOutcome {
        let absent = absent_pages(req, |p| self.main.contains(p));
        if absent.is_empty() {
            self.touch_present(req);
            return AccessOutcome::hit();
        }
        if req.size_pages as usize > self.capacity {
            self.touch_present(req);
            return AccessOutcome::bypass();
        }
        if !absent.iter().all(|&p| self.ghost.contains(p)) {
            self.touch_present(req);
            for &p in &absent {
                self.ghost.push_head(p);
            }
            while self.ghost.len() > self.ghost_capacity {
                self.ghost.pop_tail();
            }
            return AccessOutcome::bypass();
        }
        for &p in &absent {
            self.ghost.remove(p);
        }
        let need = (self.main.len() + absent.len()).saturating_sub(self.capacity);
        let victims = tail_victims(&self.main, need, &page_range(req))
            .expect("resident pages outside the request cover the shortfall");
        for &v in &victims {
            self.main.remove(v);
        }
        req.pages().for_each(|p| self.main.push_head(p));
        AccessOutcome::admit(victims)
    }
}
