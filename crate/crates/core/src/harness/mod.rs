//! Scenarios, the episode runner, metrics, experiment sweeps and file export.

pub mod export;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod sweeps;

pub use export::{read_trace, write_trace, AllocatorPoint, CurvePoint, GridCell, SummaryRow, TimePoint};
pub use metrics::{jain_index, summarize, MetricsSummary};
pub use runner::{run_episode, EpisodeTrace, OnInfeasible, PolicyChoice, SlotRecord, UserRecord};
pub use scenario::{load_scenario, AllocatorKind, ScenarioConfig};
pub use sweeps::{compare_allocators, sweep_altitude_speed, sweep_time_series, AllocatorComparison, TimeVariable};
