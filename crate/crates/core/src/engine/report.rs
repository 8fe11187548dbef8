use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::metrics::Metrics;
use super::monitor::SwitchEvent;
use super::simulate::{simulate_detailed, ModelRegistry, SimulationConfig};
use crate::error::{Error, Result};
use crate::policies::PolicyKind;
use crate::trace::Trace;

/// Relative gain of the product of two accuracies over a baseline's
/// product, in whole percent.
pub fn improvement_metric(rcrnn_cached: f64, rcrnn_dur: f64, base_cached: f64, base_dur: f64) -> Result<i64> {
    Ok(improvement_percent(rcrnn_cached, rcrnn_dur, base_cached, base_dur)?.round() as i64)
}

/// Unrounded form of [`improvement_metric`].
pub fn improvement_percent(rcrnn_cached: f64, rcrnn_dur: f64, base_cached: f64, base_dur: f64) -> Result<f64> {
    let den = base_cached * base_dur;
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    for (name, v) in [
        ("rcrnn_cached", rcrnn_cached),
        ("rcrnn_dur", rcrnn_dur),
        ("base_cached", base_cached),
        ("base_dur", base_dur),
    ] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidArgument(format!("{name} must be in (0, 1], got {v}")));
        }
    }
    Ok(100.0 * ((rcrnn_cached * rcrnn_dur) / den - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    pub policy: PolicyKind,
    pub metrics: Metrics,
    /// Hit ratio divided by belady's; `None` when belady scores no hits.
    pub normalized_hit_ratio: Option<f64>,
    pub switches: Vec<SwitchEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub trace_len: usize,
    pub rows: Vec<PolicyRow>,
}

impl SimulationReport {
    pub fn row(&self, policy: PolicyKind) -> Option<&PolicyRow> {
        self.rows.iter().find(|r| r.policy == policy)
    }
}

/// Runs every listed policy on the same trace. Belady is always simulated
/// for normalization, even when not listed.
pub fn compare_report(
    trace: &Trace,
    policies: &[PolicyKind],
    config: &SimulationConfig,
    models: &ModelRegistry,
) -> Result<SimulationReport> {
    if policies.is_empty() {
        return Err(Error::InvalidArgument("policy list is empty".into()));
    }
    let mut runs = Vec::with_capacity(policies.len());
    for &p in policies {
        if runs.iter().any(|(q, _, _)| *q == p) {
            continue;
        }
        let (m, ev) = simulate_detailed(trace, p, config, models)?;
        runs.push((p, m, ev));
    }
    let belady_ratio = match runs.iter().find(|(p, _, _)| *p == PolicyKind::Belady) {
        Some((_, m, _)) => m.hit_ratio(),
        None => simulate_detailed(trace, PolicyKind::Belady, config, models)?.0.hit_ratio(),
    };
    let rows = runs
        .into_iter()
        .map(|(policy, metrics, switches)| PolicyRow {
            normalized_hit_ratio: (belady_ratio > 0.0).then(|| metrics.hit_ratio() / belady_ratio),
            policy,
            metrics,
            switches,
        })
        .collect();
    Ok(SimulationReport {
        config: config.clone(),
        trace_len: trace.len(),
        rows,
    })
}

pub const REPORT_HEADER: &str = "policy,requests,hits,misses,admissions,bypasses,replacements,evicted_pages,\
write_hits,ssd_writes,hit_ratio,normalized_hit_ratio,replacements_per_100,ssd_writes_per_100,\
mean_latency_ms,total_latency_ms,model_switches";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

/// One row per policy.
pub fn report_csv(report: &SimulationReport) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for r in &report.rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{:.6},{},{:.6},{:.6},{:.6},{:.3},{}",
            r.policy,
            m.requests,
            m.hits,
            m.misses,
            m.admissions,
            m.bypasses,
            m.replacements,
            m.evicted_pages,
            m.write_hits,
            m.ssd_writes,
            m.hit_ratio(),
            opt(r.normalized_hit_ratio),
            m.replacements_per_100(),
            m.ssd_writes_per_100(),
            m.mean_latency_ms(),
            m.modeled_latency_ms_total,
            r.switches.len(),
        );
    }
    out
}

/// `policy.metric = value` lines preceded by the configuration echo.
pub fn report_text(report: &SimulationReport) -> String {
    let c = &report.config;
    let mut out = String::new();
    let _ = writeln!(out, "config.capacity_pages = {}", c.capacity_pages);
    let _ = writeln!(out, "config.seed = {}", c.seed);
    let _ = writeln!(out, "config.monitor = {}", c.monitor);
    let _ = writeln!(out, "config.rcrnn_overhead_ms = {}", c.rcrnn_overhead_ms);
    let _ = writeln!(out, "config.device.ssd_read_base_ms = {}", c.device.ssd_read_base_ms);
    let _ = writeln!(out, "config.device.ssd_write_base_ms = {}", c.device.ssd_write_base_ms);
    let _ = writeln!(out, "config.device.hdd_random_base_ms = {}", c.device.hdd_random_base_ms);
    let _ = writeln!(out, "config.device.hdd_seq_mb_per_s = {}", c.device.hdd_seq_mb_per_s);
    let _ = writeln!(out, "config.device.ssd_mb_per_s = {}", c.device.ssd_mb_per_s);
    let _ = writeln!(out, "trace.requests = {}", report.trace_len);
    for r in &report.rows {
        let m = &r.metrics;
        let p = r.policy;
        let ints = [
            ("hits", m.hits),
            ("misses", m.misses),
            ("admissions", m.admissions),
            ("bypasses", m.bypasses),
            ("replacements", m.replacements),
            ("evicted_pages", m.evicted_pages),
            ("write_hits", m.write_hits),
            ("ssd_writes", m.ssd_writes),
        ];
        for (k, v) in ints {
            let _ = writeln!(out, "{p}.{k} = {v}");
        }
        let _ = writeln!(out, "{p}.hit_ratio = {:.6}", m.hit_ratio());
        let _ = writeln!(out, "{p}.normalized_hit_ratio = {}", opt(r.normalized_hit_ratio));
        let _ = writeln!(out, "{p}.replacements_per_100 = {:.6}", m.replacements_per_100());
        let _ = writeln!(out, "{p}.ssd_writes_per_100 = {:.6}", m.ssd_writes_per_100());
        let _ = writeln!(out, "{p}.mean_latency_ms = {:.6}", m.mean_latency_ms());
        for ev in &r.switches {
            let _ = writeln!(out, "{p}.switch = {} {} -> {}", ev.at_request, ev.from, ev.to);
        }
    }
    out
}

/// Per-window hit ratios, one column per policy.
pub fn series_csv(report: &SimulationReport) -> String {
    let mut out = String::from("window,end_request");
    for r in &report.rows {
        let _ = write!(out, ",{}", r.policy);
    }
    out.push('\n');
    let n = report.rows.iter().map(|r| r.metrics.window_hit_ratios.len()).max().unwrap_or(0);
    for w in 0..n {
        let _ = write!(out, "{},{}", w, (w + 1) * super::SERIES_WINDOW);
        for r in &report.rows {
            match r.metrics.window_hit_ratios.get(w) {
                Some(v) => {
                    let _ = write!(out, ",{v:.6}");
                }
                None => out.push_str(",-"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_report_files(
    report: &SimulationReport,
    csv: Option<&Path>,
    text: Option<&Path>,
    series: Option<&Path>,
) -> Result<()> {
    let outputs = [(csv, report_csv as fn(&SimulationReport) -> String), (text, report_text), (series, series_csv)];
    for (path, render) in outputs {
        if let Some(p) = path {
            fs::write(p, render(report)).map_err(|e| Error::io(p, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::testing::reads;
    use crate::trace::{Trace, WorkloadCategory};

    #[test]
    fn improvement_examples() {
        assert_eq!(improvement_metric(0.9123, 0.9365, 0.6269, 0.4774).unwrap(), 185);
        // Exact value 112.66 rounds up; the published figure is 112.
        let v = improvement_metric(0.9793, 0.9517, 0.7263, 0.6034).unwrap();
        assert_eq!(v, 113);
        assert!((v - 112).abs() <= 1);
        assert_eq!(improvement_metric(0.8, 0.5, 0.5, 0.8).unwrap(), 0);
        assert!(matches!(improvement_metric(0.9, 0.9, 0.0, 0.5), Err(Error::ZeroDenominator)));
        assert!(improvement_metric(1.2, 0.9, 0.5, 0.5).is_err());
    }

    fn report(policies: &[PolicyKind]) -> SimulationReport {
        let t = Trace::synthetic(WorkloadCategory::FileServer, 3000, 5).unwrap();
        compare_report(&t, policies, &SimulationConfig::new(64), &ModelRegistry::new()).unwrap()
    }

    #[test]
    fn belady_normalizes_to_one() {
        let r = report(&[PolicyKind::Lru, PolicyKind::Larc, PolicyKind::Access, PolicyKind::Belady]);
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.row(PolicyKind::Belady).unwrap().normalized_hit_ratio, Some(1.0));
        for row in &r.rows {
            assert!(row.normalized_hit_ratio.unwrap() <= 1.0);
        }
        assert_eq!(report_csv(&r).lines().count(), 5);
    }

    #[test]
    fn deterministic_outputs() {
        let a = report(&[PolicyKind::Lru, PolicyKind::OracleBenefit]);
        let b = report(&[PolicyKind::Lru, PolicyKind::OracleBenefit]);
        assert_eq!(a, b);
        assert_eq!(report_csv(&a), report_csv(&b));
        assert_eq!(report_text(&a), report_text(&b));
        assert!(report_text(&a).contains("lru.hit_ratio = "));
        let series = series_csv(&a);
        assert_eq!(series.lines().count(), 4);
        assert!(series.starts_with("window,end_request,lru,oracle-benefit\n"));
    }

    #[test]
    fn per_hundred_arithmetic() {
        let mut m = Metrics::new();
        m.requests = 10_000;
        m.replacements = 50;
        assert!((m.replacements_per_100() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_policy_list_rejected() {
        let t = Trace::new(reads(&[1]), None).unwrap();
        assert!(compare_report(&t, &[], &SimulationConfig::new(1), &ModelRegistry::new()).is_err());
    }
}
