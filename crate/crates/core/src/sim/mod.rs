//! Fixed-step closed-loop simulation, measurement generation and run metrics.

mod batch;
mod engine;
mod measure;
mod metrics;
mod trajectory;

pub(crate) use batch::thresholds;
pub use batch::{run_batch, run_cells, BatchOutcome};
pub use engine::{simulate, LoopState, RunStatus, Simulator};
pub use measure::{measure, Measurement};
pub use metrics::{median, metrics, RunMetrics, Thresholds};
pub use trajectory::{format_sig9, Record, Trajectory, CSV_HEADER};
