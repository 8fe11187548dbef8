//! Canonical block-I/O trace representation.
//!
//! Addresses are page-granular with a fixed 4 KiB page. A [`Trace`] is a
//! non-empty, time-ordered sequence of [`IoRequest`]s, optionally carrying
//! the ground-truth [`WorkloadCategory`] when it was produced by the
//! synthetic generator.

mod format;
mod generator;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use format::{parse_trace, parse_trace_str, write_trace, write_trace_string, TRACE_HEADER};
pub(crate) use format::{parse_request_fields, write_request_fields};
pub use generator::{
    cyclic_scan, generate_scenario, generate_synthetic, trace_profile, GeneratorProfile, Scenario, TraceRow,
    DEFAULT_CACHE_PAGES, TABLE3_TRACES,
};

pub const PAGE_SIZE: u64 = 4096;

pub type PageId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Read,
    Write,
}

impl Op {
    pub fn is_read(self) -> bool {
        matches!(self, Op::Read)
    }

    pub fn code(self) -> char {
        match self {
            Op::Read => 'R',
            Op::Write => 'W',
        }
    }
}

/// One block-I/O event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IoRequest {
    pub timestamp_us: u64,
    pub page_id: PageId,
    pub size_pages: u32,
    pub op: Op,
}

impl IoRequest {
    pub fn new(timestamp_us: u64, page_id: PageId, size_pages: u32, op: Op) -> Self {
        Self {
            timestamp_us,
            page_id,
            size_pages,
            op,
        }
    }

    pub fn size_bytes(&self) -> u64 {
        u64::from(self.size_pages) * PAGE_SIZE
    }

    /// Pages touched by this request, `page_id .. page_id + size_pages`.
    pub fn pages(&self) -> impl Iterator<Item = PageId> + Clone {
        self.page_id..self.page_id + u64::from(self.size_pages)
    }

    /// One past the last page touched.
    pub fn end_page(&self) -> PageId {
        self.page_id + u64::from(self.size_pages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WorkloadCategory {
    MailServer,
    WebServer,
    Database,
    FileServer,
}

impl WorkloadCategory {
    pub const ALL: [WorkloadCategory; 4] = [
        WorkloadCategory::MailServer,
        WorkloadCategory::WebServer,
        WorkloadCategory::Database,
        WorkloadCategory::FileServer,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            WorkloadCategory::MailServer => "MailServer",
            WorkloadCategory::WebServer => "WebServer",
            WorkloadCategory::Database => "Database",
            WorkloadCategory::FileServer => "FileServer",
        }
    }
}

impl fmt::Display for WorkloadCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mailserver" | "mail" => Ok(WorkloadCategory::MailServer),
            "webserver" | "web" => Ok(WorkloadCategory::WebServer),
            "database" | "db" => Ok(WorkloadCategory::Database),
            "fileserver" | "file" => Ok(WorkloadCategory::FileServer),
            _ => Err(Error::InvalidArgument(format!(
                "unknown workload category `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    requests: Vec<IoRequest>,
    pub category: Option<WorkloadCategory>,
}

impl Trace {
    /// Validates that the trace is non-empty, time-ordered and that every
    /// request covers at least one page.
    pub fn new(requests: Vec<IoRequest>, category: Option<WorkloadCategory>) -> Result<Self> {
        if requests.is_empty() {
            return Err(Error::EmptyTrace);
        }
        for (i, pair) in requests.windows(2).enumerate() {
            if pair[1].timestamp_us < pair[0].timestamp_us {
                return Err(Error::InvalidTrace(format!(
                    "timestamp decreases at request {}",
                    i + 1
                )));
            }
        }
        if let Some(i) = requests.iter().position(|r| r.size_pages == 0) {
            return Err(Error::InvalidTrace(format!(
                "size_pages must be ≥ 1 (request {i})"
            )));
        }
        Ok(Self { requests, category })
    }

    pub fn requests(&self) -> &[IoRequest] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn into_requests(self) -> Vec<IoRequest> {
        self.requests
    }

    /// Number of distinct pages touched anywhere in the trace.
    pub fn working_set_pages(&self) -> usize {
        let mut pages: Vec<PageId> = self.requests.iter().flat_map(|r| r.pages()).collect();
        pages.sort_unstable();
        pages.dedup();
        pages.len()
    }

    /// Appends `other` after this trace, shifting its timestamps so the
    /// result stays ordered. The category is kept only if both agree.
    pub fn concat(&self, other: &Trace) -> Trace {
        let last = self.requests.last().map_or(0, |r| r.timestamp_us);
        let base = other.requests.first().map_or(0, |r| r.timestamp_us);
        let mut requests = self.requests.clone();
        requests.extend(other.requests.iter().map(|r| IoRequest {
            timestamp_us: last + (r.timestamp_us - base),
            ..*r
        }));
        let category = if self.category == other.category {
            self.category
        } else {
            None
        };
        Trace { requests, category }
    }
}

/// Splits a trace into consecutive non-overlapping windows of `window_len`
/// requests. A trailing partial window is discarded.
pub fn split_windows(trace: &Trace, window_len: usize) -> Vec<&[IoRequest]> {
    assert!(window_len >= 1, "window_len must be at least 1");
    trace.requests.chunks_exact(window_len).collect()
}
