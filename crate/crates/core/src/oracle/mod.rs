//! Offline analysis: per-page statistics, the caching benefit score,
//! benefit-driven replay that tags every access, and farthest-next-use
//! replay as an upper bound.

mod belady;
mod benefit_cache;
mod labels;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::device::{is_sequential, Device, DeviceModel};
use crate::error::Error;
use crate::trace::{PageId, Trace};

pub use belady::{belady_replay, Belady};
pub use benefit_cache::{oracle_replay, BenefitOracle};
pub use labels::{parse_labeled, parse_labeled_str, write_labeled, write_labeled_string, LABELED_HEADER};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageStats {
    pub n_acc: u64,
    pub n_reads: u64,
    pub mean_size_pages: f64,
    pub t_hdd_ms: f64,
    pub t_ssd_ms: f64,
}

impl PageStats {
    pub fn read_fraction(&self) -> f64 {
        self.n_reads as f64 / self.n_acc as f64
    }
}

/// Counts every page a request covers; times are whole-request service times.
pub fn aggregate_page_stats(trace: &Trace, model: &DeviceModel) -> HashMap<PageId, PageStats> {
    #[derive(Default)]
    struct Acc {
        n: u64,
        reads: u64,
        size: f64,
        hdd: f64,
        ssd: f64,
    }
    let mut acc: HashMap<PageId, Acc> = HashMap::new();
    let mut prev = None;
    for req in trace.requests() {
        let hdd = model.response_time(req, Device::Hdd, is_sequential(prev, req));
        let ssd = model.response_time(req, Device::Ssd, false);
        for p in req.pages() {
            let a = acc.entry(p).or_default();
            a.n += 1;
            a.reads += u64::from(req.op.is_read());
            a.size += f64::from(req.size_pages);
            a.hdd += hdd;
            a.ssd += ssd;
        }
        prev = Some(req);
    }
    acc.into_iter()
        .map(|(p, a)| {
            let n = a.n as f64;
            (
                p,
                PageStats {
                    n_acc: a.n,
                    n_reads: a.reads,
                    mean_size_pages: a.size / n,
                    t_hdd_ms: a.hdd / n,
                    t_ssd_ms: a.ssd / n,
                },
            )
        })
        .collect()
}

/// Device speed ratio, scaled by reuse, inverse size and read share.
pub fn benefit(stats: &PageStats) -> f64 {
    let reuse = stats.n_acc.saturating_sub(1) as f64;
    (stats.t_hdd_ms / stats.t_ssd_ms) * reuse * (1.0 / stats.mean_size_pages) * (1.0 + stats.read_fraction())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DurationLabel {
    Soon,
    Mean,
    Late,
}

impl DurationLabel {
    pub const ALL: [DurationLabel; 3] = [DurationLabel::Soon, DurationLabel::Mean, DurationLabel::Late];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DurationLabel::Soon => "soon",
            DurationLabel::Mean => "mean",
            DurationLabel::Late => "late",
        }
    }
}

impl fmt::Display for DurationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DurationLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown duration label `{s}`")))
    }
}

/// Soon up to and including C, Mean up to and including 5C, Late beyond.
pub fn label_duration(duration: usize, cache_size_pages: usize) -> DurationLabel {
    if duration <= cache_size_pages {
        DurationLabel::Soon
    } else if duration <= 5 * cache_size_pages {
        DurationLabel::Mean
    } else {
        DurationLabel::Late
    }
}

/// An access with the oracle's two tags. `duration_label` is `Some` exactly
/// when `cached` is true.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledRequest {
    pub request: crate::trace::IoRequest,
    pub cached: bool,
    pub duration_label: Option<DurationLabel>,
}

impl LabeledRequest {
    pub fn new(request: crate::trace::IoRequest, duration_label: Option<DurationLabel>) -> Self {
        Self {
            request,
            cached: duration_label.is_some(),
            duration_label,
        }
    }
}

pub(crate) fn check_capacity(capacity: usize) -> Result<(), Error> {
    if capacity == 0 {
        return Err(Error::InvalidArgument("cache capacity must be at least one page".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{IoRequest, Op};
    use proptest::prelude::*;

    fn stats(ratio: f64, n_acc: u64, n_reads: u64, size: f64) -> PageStats {
        PageStats {
            n_acc,
            n_reads,
            mean_size_pages: size,
            t_hdd_ms: ratio,
            t_ssd_ms: 1.0,
        }
    }

    #[test]
    fn benefit_substitutions() {
        assert!((benefit(&stats(80.0, 5, 4, 1.0)) - 576.0).abs() < 1e-9);
        assert!((benefit(&stats(80.0, 3, 0, 2.0)) - 80.0).abs() < 1e-9);
        assert_eq!(benefit(&stats(80.0, 1, 1, 1.0)), 0.0);
        assert_eq!(benefit(&stats(3.0, 1, 0, 7.0)), 0.0);
    }

    #[test]
    fn page_counts() {
        let t = Trace::new(vec![
            IoRequest::new(0, 1, 1, Op::Read),
            IoRequest::new(1, 1, 1, Op::Write),
            IoRequest::new(2, 1, 1, Op::Read),
            IoRequest::new(3, 5, 2, Op::Read),
        ], None)
        .unwrap();
        let model = DeviceModel::default();
        let s = aggregate_page_stats(&t, &model);
        assert_eq!((s[&1].n_acc, s[&1].n_reads), (3, 2));
        assert_eq!((s[&5].n_acc, s[&6].n_acc), (1, 1));
        assert_eq!(s[&6].mean_size_pages, 2.0);
        assert_eq!(s.len(), 3);
        // No access to page 1 starts where its predecessor ended.
        let r = IoRequest::new(0, 1, 1, Op::Read);
        let hdd = model.response_time(&r, Device::Hdd, false);
        assert!((s[&1].t_hdd_ms - hdd).abs() < 1e-12);
        let ssd = (2.0 * model.response_time(&r, Device::Ssd, false)
            + model.response_time(&IoRequest::new(0, 1, 1, Op::Write), Device::Ssd, false))
            / 3.0;
        assert!((s[&1].t_ssd_ms - ssd).abs() < 1e-12);
    }

    #[test]
    fn sequential_requests_use_transfer_time() {
        let t = Trace::new(vec![IoRequest::new(0, 0, 1, Op::Read), IoRequest::new(1, 1, 1, Op::Read)], None).unwrap();
        let model = DeviceModel::default();
        let s = aggregate_page_stats(&t, &model);
        assert!(s[&1].t_hdd_ms < 1.0);
        assert!(s[&0].t_hdd_ms > 8.0);
    }

    #[test]
    fn table_boundaries() {
        assert_eq!(label_duration(50, 100), DurationLabel::Soon);
        assert_eq!(label_duration(100, 100), DurationLabel::Soon);
        assert_eq!(label_duration(101, 100), DurationLabel::Mean);
        assert_eq!(label_duration(300, 100), DurationLabel::Mean);
        assert_eq!(label_duration(500, 100), DurationLabel::Mean);
        assert_eq!(label_duration(501, 100), DurationLabel::Late);
        assert_eq!(label_duration(600, 100), DurationLabel::Late);
        assert_eq!(label_duration(0, 1), DurationLabel::Soon);
    }

    #[test]
    fn labels_parse() {
        for l in DurationLabel::ALL {
            assert_eq!(l.name().parse::<DurationLabel>().unwrap(), l);
            assert_eq!(DurationLabel::from_index(l.index()), Some(l));
        }
        assert!("never".parse::<DurationLabel>().is_err());
    }

    fn arb_stats() -> impl Strategy<Value = PageStats> {
        (1.01f64..200.0, 1u64..1000, 0.0f64..=1.0, 1.0f64..64.0).prop_map(|(ratio, n, frac, size)| PageStats {
            n_acc: n,
            n_reads: ((n as f64) * frac).floor() as u64,
            mean_size_pages: size,
            t_hdd_ms: ratio,
            t_ssd_ms: 1.0,
        })
    }

    proptest! {
        #[test]
        fn benefit_non_negative(s in arb_stats()) {
            prop_assert!(benefit(&s) >= 0.0);
        }

        #[test]
        fn monotone_in_accesses(s in arb_stats(), k in 2u64..5) {
            let scaled = PageStats { n_acc: s.n_acc * k, n_reads: s.n_reads * k, ..s };
            prop_assert!(benefit(&scaled) >= benefit(&s));
        }

        #[test]
        fn antitone_in_size(s in arb_stats(), extra in 0.01f64..10.0) {
            let bigger = PageStats { mean_size_pages: s.mean_size_pages + extra, ..s };
            prop_assert!(benefit(&bigger) <= benefit(&s));
        }

        #[test]
        fn increasing_in_speed_ratio(s in arb_stats(), extra in 0.01f64..10.0) {
            prop_assume!(s.n_acc > 1);
            let slower = PageStats { t_hdd_ms: s.t_hdd_ms + extra, ..s };
            prop_assert!(benefit(&slower) > benefit(&s));
        }

        #[test]
        fn increasing_in_read_fraction(s in arb_stats()) {
            prop_assume!(s.n_acc > 1 && s.n_reads < s.n_acc);
            let more = PageStats { n_reads: s.n_reads + 1, ..s };
            prop_assert!(benefit(&more) > benefit(&s));
        }

        #[test]
        fn label_total(d in 0usize..100_000, c in 1usize..5_000) {
            let l = label_duration(d, c);
            let expected = [d <= c, c < d && d <= 5 * c, d > 5 * c];
            prop_assert_eq!(expected.iter().filter(|x| **x).count(), 1);
            prop_assert!(expected[l.index()]);
        }
    }
}
