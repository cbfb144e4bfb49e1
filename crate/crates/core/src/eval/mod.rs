//! Error metrics, paired significance tests and the sparsity sweep.

mod metrics;
mod report;
mod stats;
mod sweep;

pub use metrics::{improvement_pct, mae, rmse};
pub use report::{EvalReport, ReportRow};
pub use stats::{paired_t_test, TTest};
pub use sweep::{run_sweep, run_sweep_with, SweepConfig, DEFAULT_FRACTIONS};
