//! Seeded synthetic workload generator.
//!
//! Popularity is a truncated Zipf over a hot set of pages, rank `r` landing
//! on page `r - 1`, so the hottest pages sit at the low end of the space.
//! With probability `seq_run_prob` a request instead continues sequentially
//! from the previous one, so runs have geometric length. Sizes are geometric on `{1, 2, ...}` pages with
//! the profile's mean, ops are Bernoulli, and inter-arrival gaps are
//! exponential.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, Zipf};

use super::{IoRequest, Op, PageId, Trace, WorkloadCategory};
use crate::error::{Error, Result};

/// Cache size the default profiles are scaled against; the hot set is four
/// times this.
pub const DEFAULT_CACHE_PAGES: usize = 1024;

const MAX_REQUEST_PAGES: u64 = 1024;
const SCENARIO_CHUNK: usize = 1000;
const STREAM_PAGE_STRIDE: PageId = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorProfile {
    pub read_ratio: f64,
    pub mean_size_kb: f64,
    pub zipf_s: f64,
    pub hot_set_pages: u64,
    pub seq_run_prob: f64,
    pub mean_interarrival_us: f64,
    pub seed: u64,
}

/// A row of published trace characteristics used to anchor profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub name: &'static str,
    pub requests: usize,
    /// Reads per write; `None` for an all-read trace.
    pub rw_ratio: Option<f64>,
    pub mean_size_kb: f64,
    pub category: WorkloadCategory,
}

impl TraceRow {
    pub fn read_fraction(&self) -> f64 {
        self.rw_ratio.map_or(1.0, |r| r / (r + 1.0))
    }
}

macro_rules! row {
    ($name:expr, $n:expr, $rw:expr, $kb:expr, $cat:ident) => {
        TraceRow {
            name: $name,
            requests: $n,
            rw_ratio: $rw,
            mean_size_kb: $kb,
            category: WorkloadCategory::$cat,
        }
    };
}

pub const TABLE3_TRACES: [TraceRow; 13] = [
    row!("radius_authentication", 80_000, Some(0.07), 12.44, WebServer),
    row!("radius_backed_SQL", 60_000, Some(0.21), 9.37, Database),
    row!("mail_index", 60_000, Some(2.56), 42.0, MailServer),
    row!("home_ikki", 60_000, Some(0.84), 4.0, FileServer),
    row!("home_madmax", 60_000, Some(0.25), 4.0, FileServer),
    row!("home_topgun", 60_000, Some(0.11), 4.0, FileServer),
    row!("enterprise_tpc_1", 90_000, Some(2.05), 8.24, Database),
    row!("MS_enterprise_ex", 70_000, Some(0.16), 21.6, MailServer),
    row!("Cambridge1", 65_000, Some(1.3), 9.46, FileServer),
    row!("MS_build_server", 60_000, Some(7.5), 4.0, FileServer),
    row!("MS_live_maps", 70_000, None, 4.0, WebServer),
    row!("web_proxy", 60_000, Some(4.5), 4.0, WebServer),
    row!("web_server", 60_000, Some(12.7), 4.0, WebServer),
];

pub fn trace_profile(name: &str) -> Option<&'static TraceRow> {
    TABLE3_TRACES
        .iter()
        .find(|r| r.name.eq_ignore_ascii_case(name))
}

impl WorkloadCategory {
    /// Published trace each category's default profile is anchored to.
    pub fn anchor_trace(self) -> &'static TraceRow {
        let name = match self {
            WorkloadCategory::MailServer => "mail_index",
            WorkloadCategory::WebServer => "web_server",
            WorkloadCategory::Database => "enterprise_tpc_1",
            WorkloadCategory::FileServer => "home_ikki",
        };
        trace_profile(name).expect("anchor rows are in the table")
    }

    pub fn default_seq_run_prob(self) -> f64 {
        match self {
            WorkloadCategory::MailServer => 0.3,
            WorkloadCategory::WebServer => 0.1,
            WorkloadCategory::Database => 0.2,
            WorkloadCategory::FileServer => 0.4,
        }
    }
}

impl GeneratorProfile {
    pub fn for_category(category: WorkloadCategory, seed: u64) -> Self {
        Self::for_row(category.anchor_trace(), seed)
    }

    pub fn for_row(row: &TraceRow, seed: u64) -> Self {
        Self {
            read_ratio: row.read_fraction(),
            mean_size_kb: row.mean_size_kb,
            zipf_s: 1.0,
            hot_set_pages: 4 * DEFAULT_CACHE_PAGES as u64,
            seq_run_prob: row.category.default_seq_run_prob(),
            mean_interarrival_us: 1000.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be in [0, 1]")))
            }
        };
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive")))
            }
        };
        frac(self.read_ratio, "read_ratio")?;
        frac(self.seq_run_prob, "seq_run_prob")?;
        pos(self.mean_size_kb, "mean_size_kb")?;
        pos(self.zipf_s, "zipf_s")?;
        pos(self.mean_interarrival_us, "mean_interarrival_us")?;
        if self.hot_set_pages == 0 {
            return Err(Error::InvalidArgument(
                "hot_set_pages must be positive".into(),
            ));
        }
        Ok(())
    }

    fn mean_size_pages(&self) -> f64 {
        (self.mean_size_kb / 4.0).max(1.0)
    }
}

pub fn generate_synthetic(profile: &GeneratorProfile, n: usize) -> Result<Trace> {
    profile.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("request count must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);

    let zipf = Zipf::new(profile.hot_set_pages as f64, profile.zipf_s)
        .map_err(|e| Error::InvalidArgument(format!("zipf: {e}")))?;
    let gap = Exp::new(1.0 / profile.mean_interarrival_us)
        .map_err(|e| Error::InvalidArgument(format!("inter-arrival: {e}")))?;
    let mean_pages = profile.mean_size_pages();
    let extra_pages = if mean_pages > 1.0 {
        Some(
            Geometric::new(1.0 / mean_pages)
                .map_err(|e| Error::InvalidArgument(format!("size: {e}")))?,
        )
    } else {
        None
    };

    let mut requests = Vec::with_capacity(n);
    let mut clock = 0.0f64;
    let mut prev: Option<IoRequest> = None;
    for i in 0..n {
        if i > 0 {
            clock += gap.sample(&mut rng);
        }
        let page_id = match prev {
            Some(p) if rng.random_bool(profile.seq_run_prob) => p.end_page(),
            _ => {
                let rank = zipf.sample(&mut rng) as PageId;
                rank.clamp(1, profile.hot_set_pages) - 1
            }
        };
        let size_pages = extra_pages
            .as_ref()
            .map_or(1, |g| (1 + g.sample(&mut rng)).min(MAX_REQUEST_PAGES)) as u32;
        let op = if rng.random_bool(profile.read_ratio) {
            Op::Read
        } else {
            Op::Write
        };
        let req = IoRequest {
            timestamp_us: clock.round() as u64,
            page_id,
            size_pages,
            op,
        };
        requests.push(req);
        prev = Some(req);
    }
    Trace::new(requests, None)
}

impl Trace {
    /// Generator output labelled with its ground-truth category.
    pub fn synthetic(category: WorkloadCategory, n: usize, seed: u64) -> Result<Trace> {
        let mut t = generate_synthetic(&GeneratorProfile::for_category(category, seed), n)?;
        t.category = Some(category);
        Ok(t)
    }
}

/// Multi-application mixes built from the published trace set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    SinglePurpose,
    Virtualization,
    StorageSystem,
}

impl Scenario {
    pub fn workloads(self) -> &'static [&'static str] {
        match self {
            Scenario::SinglePurpose => &["radius_authentication", "mail_index"],
            Scenario::Virtualization => &["home_ikki", "radius_authentication", "mail_index"],
            Scenario::StorageSystem => &[
                "enterprise_tpc_1",
                "home_ikki",
                "radius_authentication",
                "mail_index",
            ],
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Scenario::SinglePurpose),
            "virt" => Ok(Scenario::Virtualization),
            "storage" => Ok(Scenario::StorageSystem),
            _ => Err(Error::InvalidArgument(format!("unknown scenario `{s}`"))),
        }
    }
}

/// Interleaves one generator stream per scenario workload, round-robin in
/// 1000-request chunks. Streams live in disjoint page ranges and the merged
/// timeline preserves each chunk's inter-arrival gaps.
pub fn generate_scenario(scenario: Scenario, per_stream: usize, seed: u64) -> Result<Trace> {
    let streams = scenario
        .workloads()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let row = trace_profile(name).expect("scenario workloads are in the table");
            let profile = GeneratorProfile::for_row(row, seed.wrapping_add(i as u64 * 7919));
            generate_synthetic(&profile, per_stream).map(Trace::into_requests)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut merged = Vec::with_capacity(per_stream * streams.len());
    let mut clock = 0u64;
    let mut offset = 0;
    while offset < per_stream {
        for (i, stream) in streams.iter().enumerate() {
            let chunk = &stream[offset..(offset + SCENARIO_CHUNK).min(per_stream)];
            let base = chunk[0].timestamp_us;
            let mut last = clock;
            for r in chunk {
                last = clock + (r.timestamp_us - base);
                merged.push(IoRequest {
                    timestamp_us: last,
                    page_id: r.page_id + i as PageId * STREAM_PAGE_STRIDE,
                    ..*r
                });
            }
            clock = last + 1;
        }
        offset += SCENARIO_CHUNK;
    }
    Trace::new(merged, None)
}

/// Single-page reads of pages `0..distinct` in order, repeated `cycles`
/// times, one request per microsecond.
pub fn cyclic_scan(distinct: usize, cycles: usize) -> Result<Trace> {
    let requests = (0..distinct * cycles)
        .map(|i| IoRequest::new(i as u64, (i % distinct.max(1)) as PageId, 1, Op::Read))
        .collect();
    Trace::new(requests, None)
}
