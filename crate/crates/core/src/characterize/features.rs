
use ndarray::Array2;

use crate::oracle::DurationLabel;
use crate::trace::{IoRequest, PageId};

/// Requests per characterizer window and per cache-model training sequence.
pub const WINDOW_LEN: usize = 100;
pub const CHARACTERIZER_FEATURES: usize = 4;
pub const CACHE_FEATURES: usize = 6;

fn op_bit(req: &IoRequest) -> f64 {
    if req.op.is_read() {
        1.0
    } else {
        0.0
    }
}

/// One row per request: `[ln(1 + gap_us), page / window max page,
/// ln(size_pages), read]`. The first gap is zero.
pub fn extract_characterizer_features(window: &[IoRequest]) -> Array2<f64> {
    let max_pid = window.iter().map(|r| r.page_id).max().unwrap_or(0);
    let mut rows = Array2::zeros((window.len(), CHARACTERIZER_FEATURES));
    let mut prev_ts = window.first().map_or(0, |r| r.timestamp_us);
    for (mut row, req) in rows.rows_mut().into_iter().zip(window) {
        let gap = req.timestamp_us.saturating_sub(prev_ts);
        prev_ts = req.timestamp_us;
        row[0] = (gap as f64).ln_1p();
        row[1] = normalize(req.page_id, max_pid);
        row[2] = f64::from(req.size_pages).ln();
        row[3] = op_bit(req);
    }
    rows
}

fn normalize(page: PageId, max: PageId) -> f64 {
    if max == 0 {
        0.0
    } else {
        page as f64 / max as f64
    }
}

/// Cache decision recorded for a page's most recent access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PrevDecision {
    pub cached: bool,
    pub label: Option<DurationLabel>,
}

impl PrevDecision {
    pub fn cached(label: DurationLabel) -> Self {
        Self {
            cached: true,
            label: Some(label),
        }
    }

    pub fn ignored() -> Self {
        Self::default()
    }
}

/// `[page / running max page, ln(size_pages), read, cached, label / 2,
/// label absent]`, with the label index taken over Soon, Mean, Late.
pub fn extract_cache_features(req: &IoRequest, prev: PrevDecision, max_pid: PageId) -> [f64; CACHE_FEATURES] {
    let (label, absent) = match prev.label {
        Some(l) => (l.index() as f64 / 2.0, 0.0),
        None => (0.0, 1.0),
    };
    [
        normalize(req.page_id, max_pid.max(req.page_id)),
        f64::from(req.size_pages).ln(),
        op_bit(req),
        if prev.cached { 1.0 } else { 0.0 },
        label,
        absent,
    ]
}

/// Running context for cache-model features: the largest page seen so far
/// and the decision recorded for the previous request of the stream.
#[derive(Debug, Clone, Default)]
pub struct CacheFeatureState {
    max_pid: PageId,
    last: PrevDecision,
}

impl CacheFeatureState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feature row for `req`, carrying the previous request's decision.
    pub fn row(&mut self, req: &IoRequest) -> [f64; CACHE_FEATURES] {
        self.max_pid = self.max_pid.max(req.page_id);
        extract_cache_features(req, self.last, self.max_pid)
    }

    pub fn record(&mut self, decision: PrevDecision) {
        self.last = decision;
    }
}
