//! One (trace, engine, policy) cell, start to finish.

use std::sync::Arc;

use crate::baselines::{build_policy, PolicyKind, PolicySettings};
use crate::engine::{EngineConfig, PreparedTrace, RunOutput, Simulator};
use crate::error::Result;
use crate::workloads::{generate_trace, WorkloadSpec};

pub fn run_policy(
    trace: &Arc<PreparedTrace>,
    engine: &EngineConfig,
    kind: PolicyKind,
    settings: &PolicySettings,
) -> Result<RunOutput> {
    let mut sim = Simulator::new(engine.clone(), Arc::clone(trace))?;
    sim.register_policy(build_policy(kind, settings, trace, engine)?)?;
    sim.run()
}

/// Engine settings a workload spec is paired with.
pub fn engine_for(spec: &WorkloadSpec) -> EngineConfig {
    EngineConfig { budget: spec.budget, concurrency: spec.concurrency, ..EngineConfig::default() }
}

/// Generates and prepares the trace of `spec` for `engine`.
pub fn prepare_workload(
    spec: &WorkloadSpec,
    engine: &EngineConfig,
    settings: &PolicySettings,
) -> Result<Arc<PreparedTrace>> {
    let trace = generate_trace(spec)?;
    Ok(Arc::new(PreparedTrace::build(&trace, engine.block_size, &settings.cachesage.identity())?))
}
