//! Online cache policies behind a single access interface.
//!
//! A request hits only when every page it covers is resident. On a miss
//! the request is admitted or bypassed as a unit: all of its absent pages
//! are copied in together, or none are. Pages of the request that are
//! already resident are never chosen as victims for its own admission.

mod access;
mod larc;
mod lru;
mod rcrnn;
mod recency;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::Error;
use crate::trace::{IoRequest, PageId};

pub use access::AccessFrequency;
pub use larc::Larc;
pub use lru::Lru;
pub use rcrnn::{Advisor, CacheEntry, ConstantAdvisor, ModelDecision, RcRnnCache, RcRnnPolicy};
pub use recency::RecencyList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Hit,
    MissAdmit,
    MissBypass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessOutcome {
    pub decision: Decision,
    /// Pages evicted to make room for this request's admission.
    pub evicted: Vec<PageId>,
}

impl AccessOutcome {
    pub fn hit() -> Self {
        Self {
            decision: Decision::Hit,
            evicted: Vec::new(),
        }
    }

    pub fn bypass() -> Self {
        Self {
            decision: Decision::MissBypass,
            evicted: Vec::new(),
        }
    }

    pub fn admit(evicted: Vec<PageId>) -> Self {
        Self {
            decision: Decision::MissAdmit,
            evicted,
        }
    }
}

/// Every policy sees each request exactly once, in trace order, with its
/// 0-based index in the trace.
pub trait CachePolicy {
    fn name(&self) -> &'static str;
    fn capacity(&self) -> usize;
    fn resident_len(&self) -> usize;
    fn is_resident(&self, page: PageId) -> bool;
    fn on_access(&mut self, index: usize, req: &IoRequest) -> AccessOutcome;
}

/// Policies selectable by name in a simulation config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Lru,
    Access,
    Larc,
    RcRnn,
    Belady,
    OracleBenefit,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Lru,
        PolicyKind::Access,
        PolicyKind::Larc,
        PolicyKind::RcRnn,
        PolicyKind::Belady,
        PolicyKind::OracleBenefit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Lru => "lru",
            PolicyKind::Access => "access",
            PolicyKind::Larc => "larc",
            PolicyKind::RcRnn => "rcrnn",
            PolicyKind::Belady => "belady",
            PolicyKind::OracleBenefit => "oracle-benefit",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy `{s}`")))
    }
}

pub(crate) fn page_range(req: &IoRequest) -> Range<PageId> {
    req.page_id..req.end_page()
}

/// Pages of `req` not currently resident according to `resident`.
pub(crate) fn absent_pages(req: &IoRequest, resident: impl Fn(PageId) -> bool) -> Vec<PageId> {
    req.pages().filter(|&p| !resident(p)).collect()
}

/// Shared miss handling for recency-list caches: pick `need` victims from
/// the tail (skipping the request's own pages) and return them, or `None`
/// when the list cannot supply that many.
pub(crate) fn tail_victims(list: &RecencyList, need: usize, protect: &Range<PageId>) -> Option<Vec<PageId>> {
    let victims: Vec<PageId> = list
        .iter_from_tail()
        .filter(|p| !protect.contains(p))
        .take(need)
        .collect();
    (victims.len() == need).then_some(victims)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_parse() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("arc".parse::<PolicyKind>().is_err());
    }
}
