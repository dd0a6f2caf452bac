//! Scenario ingestion, the end-to-end event loop, and metrics emission.
//!
//! A scenario file declares the node layout, per-node scripts, the friendly
//! id registry and every module's parameters; the runner wires the pipeline
//! (sense → track → admit → detect → respond) and produces a run report
//! whose CSV rendering is byte-identical across runs of the same scenario.

mod metrics;
mod runner;
mod scenario;

pub use metrics::{
    compute_summary, emit_metrics, parse_csv, render_csv, MetricsRow, RunReport, Summary,
};
pub use runner::run_scenario;
pub use scenario::{
    load_scenario, parse_scenario, AdmissionBlock, AisBlock, AreaBounds, HarnessError, NodeSpec,
    OptimizerBlock, ResponseBlock, RoleSpec, ScenarioConfig, ScriptSpec, TrackingBlock,
};
