use std::collections::{BTreeSet, HashMap};

use super::check_capacity;
use crate::device::DeviceModel;
use crate::engine::{run_policy, Metrics};
use crate::error::Result;
use crate::policies::{absent_pages, page_range, AccessOutcome, CachePolicy};
use crate::trace::{IoRequest, PageId, Trace};

const NEVER: usize = usize::MAX;

/// Farthest-next-use replacement with future knowledge of one fixed trace.
/// A miss that would evict a page needed no later than itself is bypassed,
/// so the cache never trades a sooner reuse for a later one.
#[derive(Debug, Clone)]
pub struct Belady {
    capacity: usize,
    // next_use[offsets[i] + k] = next request index touching page k of request i.
    offsets: Vec<usize>,
    next_use: Vec<usize>,
    expected: Vec<(PageId, u32)>,
    order: BTreeSet<(usize, PageId)>,
    resident: HashMap<PageId, usize>,
}

impl Belady {
    pub fn new(requests: &[IoRequest], capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be at least one page");
        let mut offsets = Vec::with_capacity(requests.len() + 1);
        offsets.push(0);
        for r in requests {
            offsets.push(offsets.last().unwrap() + r.size_pages as usize);
        }
        let mut next_use = vec![NEVER; *offsets.last().unwrap()];
        let mut seen: HashMap<PageId, usize> = HashMap::new();
        for (i, r) in requests.iter().enumerate().rev() {
            // A request larger than the cache can never hit, so it is not a use.
            let usable = r.size_pages as usize <= capacity;
            for (k, p) in r.pages().enumerate() {
                next_use[offsets[i] + k] = if usable {
                    seen.insert(p, i).unwrap_or(NEVER)
                } else {
                    seen.get(&p).copied().unwrap_or(NEVER)
                };
            }
        }
        Self {
            capacity,
            offsets,
            next_use,
            expected: requests.iter().map(|r| (r.page_id, r.size_pages)).collect(),
            order: BTreeSet::new(),
            resident: HashMap::new(),
        }
    }

    fn set_next(&mut self, page: PageId, next: usize) {
        if let Some(old) = self.resident.insert(page, next) {
            self.order.remove(&(old, page));
        }
        self.order.insert((next, page));
    }
}

impl CachePolicy for Belady {
    fn name(&self) -> &'static str {
        "belady"
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn resident_len(&self) -> usize {
        self.resident.len()
    }

    fn is_resident(&self, page: PageId) -> bool {
        self.resident.contains_key(&page)
    }

    /// Requests must arrive in the order and with the indices of the trace
    /// this instance was built from.
    fn on_access(&mut self, index: usize, req: &IoRequest) -> AccessOutcome {
        assert_eq!(
            self.expected.get(index),
            Some(&(req.page_id, req.size_pages)),
            "request {index} differs from the trace the oracle was built on"
        );
        let base = self.offsets[index];
        let next = |k: usize, s: &Self| s.next_use[base + k];
        let absent = absent_pages(req, |p| self.resident.contains_key(&p));
        let refresh_present = |s: &mut Self| {
            for (k, p) in req.pages().enumerate() {
                if s.resident.contains_key(&p) {
                    let n = next(k, s);
                    s.set_next(p, n);
                }
            }
        };
        if absent.is_empty() {
            refresh_present(self);
            return AccessOutcome::hit();
        }
        if req.size_pages as usize > self.capacity {
            refresh_present(self);
            return AccessOutcome::bypass();
        }
        let need = (self.resident.len() + absent.len()).saturating_sub(self.capacity);
        let protect = page_range(req);
        let victims: Vec<(usize, PageId)> = self
            .order
            .iter()
            .rev()
            .filter(|(_, p)| !protect.contains(p))
            .take(need)
            .copied()
            .collect();
        debug_assert_eq!(victims.len(), need);
        let unit_next = req
            .pages()
            .enumerate()
            .filter(|(_, p)| !self.resident.contains_key(p))
            .map(|(k, _)| next(k, self))
            .min()
            .unwrap_or(NEVER);
        if victims.iter().any(|&(vn, _)| vn <= unit_next) {
            refresh_present(self);
            return AccessOutcome::bypass();
        }
        for &(vn, p) in &victims {
            self.order.remove(&(vn, p));
            self.resident.remove(&p);
        }
        for (k, p) in req.pages().enumerate() {
            let n = next(k, self);
            self.set_next(p, n);
        }
        AccessOutcome::admit(victims.into_iter().map(|(_, p)| p).collect())
    }
}

/// Runs [`Belady`] over `trace` with the default device model.
pub fn belady_replay(trace: &Trace, cache_size_pages: usize) -> Result<Metrics> {
    check_capacity(cache_size_pages)?;
    let mut policy = Belady::new(trace.requests(), cache_size_pages);
    Ok(run_policy(&mut policy, trace, &DeviceModel::default(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::testing::{hits, reads};
    use crate::policies::Lru;
    use crate::trace::Op;
    use proptest::prelude::*;

    fn trace_of(pages: &[u64]) -> Trace {
        Trace::new(reads(pages), None).unwrap()
    }

    /// Exhaustive optimum over admit/bypass and victim choices, by memoized
    /// search on (position, resident bitmask).
    fn brute_force(pages: &[u64], cap: usize) -> usize {
        let mut ids: Vec<u64> = pages.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let idx: Vec<usize> = pages.iter().map(|p| ids.binary_search(p).unwrap()).collect();
        let mut memo: HashMap<(usize, u32), usize> = HashMap::new();
        fn go(i: usize, set: u32, idx: &[usize], cap: usize, memo: &mut HashMap<(usize, u32), usize>) -> usize {
            if i == idx.len() {
                return 0;
            }
            if let Some(&v) = memo.get(&(i, set)) {
                return v;
            }
            let bit = 1u32 << idx[i];
            let best = if set & bit != 0 {
                1 + go(i + 1, set, idx, cap, memo)
            } else {
                let mut best = go(i + 1, set, idx, cap, memo);
                if (set.count_ones() as usize) < cap {
                    best = best.max(go(i + 1, set | bit, idx, cap, memo));
                } else {
                    for v in 0..32 {
                        if set & (1 << v) != 0 {
                            best = best.max(go(i + 1, (set & !(1 << v)) | bit, idx, cap, memo));
                        }
                    }
                }
                best
            };
            memo.insert((i, set), best);
            best
        }
        go(0, 0, &idx, cap, &mut memo)
    }

    #[test]
    fn small_cases() {
        assert_eq!(belady_replay(&trace_of(&[1, 2, 3, 1, 2, 3]), 2).unwrap().hits, 2);
        assert_eq!(belady_replay(&trace_of(&[1, 1, 1]), 1).unwrap().hits, 2);
        let m = belady_replay(&trace_of(&[1, 2, 3, 1, 2, 3, 4]), 8).unwrap();
        assert_eq!(m.misses, 4);
        assert_eq!(brute_force(&[1, 2, 3, 1, 2, 3], 2), 2);
    }

    #[test]
    fn bypass_beats_forced_eviction() {
        // Admitting B would cost A's next hit.
        let t = trace_of(&[1, 2, 1]);
        assert_eq!(belady_replay(&t, 1).unwrap().hits, 1);
    }

    #[test]
    fn multi_page_unit() {
        let t = Trace::new(vec![
            IoRequest::new(0, 0, 2, Op::Read),
            IoRequest::new(1, 1, 2, Op::Read),
            IoRequest::new(2, 0, 3, Op::Read),
        ], None)
        .unwrap();
        let m = belady_replay(&t, 3).unwrap();
        assert_eq!(m.hits, 1);
    }

    #[test]
    #[should_panic(expected = "differs from the trace")]
    fn rejects_foreign_requests() {
        let r = reads(&[1, 2]);
        let mut b = Belady::new(&r, 1);
        b.on_access(0, &reads(&[5])[0]);
    }

    proptest! {
        #[test]
        fn matches_exhaustive_optimum(
            cap in 2usize..=3,
            pages in prop::collection::vec(0u64..10, 1..=30),
        ) {
            let got = belady_replay(&trace_of(&pages), cap).unwrap().hits as usize;
            prop_assert_eq!(got, brute_force(&pages, cap));
        }

        #[test]
        fn never_below_lru(
            cap in 1usize..6,
            pages in prop::collection::vec(0u64..12, 1..100),
        ) {
            let r = reads(&pages);
            let got = belady_replay(&trace_of(&pages), cap).unwrap().hits as usize;
            prop_assert!(got >= hits(&mut Lru::new(cap), &r));
        }
    }
}
