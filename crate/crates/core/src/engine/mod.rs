//! Simulation loop, workload monitoring with model switching, and
//! comparison reports.

mod metrics;
mod monitor;
mod report;
mod simulate;

pub use metrics::{request_latency, run_policy, Metrics, SERIES_WINDOW};
pub use monitor::{monitor_and_reconfigure, plurality, reevaluate_residents, MonitorState, SwitchEvent, MONITOR_PERIOD};
pub use report::{
    compare_report, improvement_metric, improvement_percent, report_csv, report_text, series_csv, write_report_files,
    PolicyRow, SimulationReport, REPORT_HEADER,
};
pub use simulate::{simulate, simulate_detailed, ModelRegistry, SimulationConfig};
