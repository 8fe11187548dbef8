use crate::device::{is_sequential, Device, DeviceModel};
use crate::policies::{AccessOutcome, CachePolicy, Decision};
use crate::trace::{IoRequest, Trace};

/// Requests per point of the periodic hit-ratio series.
pub const SERIES_WINDOW: usize = 1000;

/// Counters for one policy over one trace. Request-level except
/// `evicted_pages`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub admissions: u64,
    pub bypasses: u64,
    /// Admissions that evicted at least one resident page.
    pub replacements: u64,
    pub evicted_pages: u64,
    pub write_hits: u64,
    pub ssd_writes: u64,
    pub modeled_latency_ms_total: f64,
    /// Hit ratio of each complete window of [`SERIES_WINDOW`] requests.
    pub window_hit_ratios: Vec<f64>,
    window_hits: u64,
    window_len: usize,
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, req: &IoRequest, outcome: &AccessOutcome, latency_ms: f64) {
        self.requests += 1;
        self.modeled_latency_ms_total += latency_ms;
        match outcome.decision {
            Decision::Hit => {
                self.hits += 1;
                self.window_hits += 1;
                if !req.op.is_read() {
                    self.write_hits += 1;
                    self.ssd_writes += 1;
                }
            }
            Decision::MissAdmit => {
                self.misses += 1;
                self.admissions += 1;
                self.ssd_writes += 1;
                if !outcome.evicted.is_empty() {
                    self.replacements += 1;
                    self.evicted_pages += outcome.evicted.len() as u64;
                }
            }
            Decision::MissBypass => {
                self.misses += 1;
                self.bypasses += 1;
            }
        }
        self.window_len += 1;
        if self.window_len == SERIES_WINDOW {
            self.window_hit_ratios.push(self.window_hits as f64 / SERIES_WINDOW as f64);
            self.window_hits = 0;
            self.window_len = 0;
        }
    }

    pub fn hit_ratio(&self) -> f64 {
        ratio(self.hits, self.requests)
    }

    pub fn replacements_per_100(&self) -> f64 {
        100.0 * ratio(self.replacements, self.requests)
    }

    pub fn ssd_writes_per_100(&self) -> f64 {
        100.0 * ratio(self.ssd_writes, self.requests)
    }

    pub fn mean_latency_ms(&self) -> f64 {
        if self.requests == 0 {
            0.0
        } else {
            self.modeled_latency_ms_total / self.requests as f64
        }
    }

    /// Broken conservation laws, empty when all hold.
    pub fn conservation_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.hits + self.misses != self.requests {
            out.push(format!("hits {} + misses {} != requests {}", self.hits, self.misses, self.requests));
        }
        if self.admissions + self.bypasses != self.misses {
            out.push(format!(
                "admissions {} + bypasses {} != misses {}",
                self.admissions, self.bypasses, self.misses
            ));
        }
        if self.replacements > self.admissions {
            out.push(format!("replacements {} > admissions {}", self.replacements, self.admissions));
        }
        if self.ssd_writes != self.admissions + self.write_hits {
            out.push(format!(
                "ssd_writes {} != admissions {} + write hits {}",
                self.ssd_writes, self.admissions, self.write_hits
            ));
        }
        out
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Modeled service time of one request given the cache's decision.
pub fn request_latency(
    model: &DeviceModel,
    prev: Option<&IoRequest>,
    req: &IoRequest,
    decision: Decision,
) -> f64 {
    match decision {
        Decision::Hit => model.response_time(req, Device::Ssd, false),
        Decision::MissBypass => model.response_time(req, Device::Hdd, is_sequential(prev, req)),
        Decision::MissAdmit => {
            model.response_time(req, Device::Hdd, is_sequential(prev, req)) + model.ssd_write_time(req)
        }
    }
}

/// Drives `policy` over the whole trace. `overhead_ms` is added to every
/// request's modeled latency.
pub fn run_policy(policy: &mut dyn CachePolicy, trace: &Trace, model: &DeviceModel, overhead_ms: f64) -> Metrics {
    let mut m = Metrics::new();
    let mut prev = None;
    for (i, req) in trace.requests().iter().enumerate() {
        let outcome = policy.on_access(i, req);
        let latency = request_latency(model, prev, req, outcome.decision) + overhead_ms;
        m.record(req, &outcome, latency);
        prev = Some(req);
    }
    m
}
