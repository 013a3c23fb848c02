use super::{AgentSpec, TurnRange, WorkloadSpec};
use crate::error::{Error, Result};

const SUPERVISOR_AGENTS: [(&str, usize); 6] =
    [("planner", 160), ("researcher", 144), ("coder", 160), ("tester", 128), ("critic", 128), ("writer", 144)];

/// Rows: planner, researcher, coder, tester, critic, writer. Workers mostly
/// hand off along researcher, coder, tester, critic, writer and otherwise
/// report back to the planner.
type Matrix6 = [[f64; 6]; 6];

const SUPERVISOR_A: Matrix6 = [
    [0.00, 0.40, 0.40, 0.08, 0.06, 0.06],
    [0.25, 0.00, 0.69, 0.02, 0.02, 0.02],
    [0.25, 0.02, 0.00, 0.69, 0.02, 0.02],
    [0.53, 0.02, 0.02, 0.00, 0.41, 0.02],
    [0.25, 0.02, 0.02, 0.02, 0.00, 0.69],
    [0.92, 0.02, 0.02, 0.02, 0.02, 0.00],
];

const SUPERVISOR_B: Matrix6 = [
    [0.00, 0.30, 0.30, 0.10, 0.15, 0.15],
    [0.22, 0.00, 0.72, 0.02, 0.02, 0.02],
    [0.22, 0.02, 0.00, 0.72, 0.02, 0.02],
    [1.00, 0.00, 0.00, 0.00, 0.00, 0.00],
    [0.22, 0.02, 0.02, 0.02, 0.00, 0.72],
    [0.92, 0.02, 0.02, 0.02, 0.02, 0.00],
];

const SUPERVISOR_C: Matrix6 = [
    [0.00, 0.55, 0.25, 0.08, 0.06, 0.06],
    [0.25, 0.00, 0.69, 0.02, 0.02, 0.02],
    [0.25, 0.02, 0.00, 0.69, 0.02, 0.02],
    [0.75, 0.02, 0.02, 0.00, 0.19, 0.02],
    [0.25, 0.02, 0.02, 0.02, 0.00, 0.69],
    [0.92, 0.02, 0.02, 0.02, 0.02, 0.00],
];

const SUPERVISOR_D: Matrix6 = [
    [0.00, 0.30, 0.30, 0.10, 0.15, 0.15],
    [0.15, 0.00, 0.79, 0.02, 0.02, 0.02],
    [0.15, 0.02, 0.00, 0.79, 0.02, 0.02],
    [0.88, 0.02, 0.02, 0.00, 0.06, 0.02],
    [0.15, 0.02, 0.02, 0.02, 0.00, 0.79],
    [0.92, 0.02, 0.02, 0.02, 0.02, 0.00],
];

fn supervisor(name: &str, m: &Matrix6, task_tokens: u32, decode_tokens: u32, seed: u64) -> WorkloadSpec {
    WorkloadSpec {
        name: name.into(),
        agents: SUPERVISOR_AGENTS.iter().map(|&(l, n)| AgentSpec { label: l.into(), anchor_tokens: n }).collect(),
        transition: m.iter().map(|r| r.to_vec()).collect(),
        supervisor: Some("planner".into()),
        turns_per_session: TurnRange { min: 8, max: 32 },
        sessions: 50,
        task_tokens,
        history_growth: 8,
        template_tokens: 16,
        decode_tokens,
        tool_ms: TurnRange { min: 1000, max: 4000 },
        concurrency: 4,
        budget: 120,
        seed,
    }
}

fn synthetic_chain() -> WorkloadSpec {
    let n = 12;
    WorkloadSpec {
        name: "synthetic-chain".into(),
        agents: (0..n)
            .map(|i| AgentSpec { label: format!("stage-{i:02}"), anchor_tokens: 128 + 16 * (i % 3) })
            .collect(),
        transition: (0..n).map(|i| (0..n).map(|j| if j == (i + 1) % n { 1.0 } else { 0.0 }).collect()).collect(),
        supervisor: None,
        turns_per_session: TurnRange { min: 8, max: 32 },
        sessions: 50,
        task_tokens: 176,
        history_growth: 8,
        template_tokens: 16,
        decode_tokens: 16,
        tool_ms: TurnRange { min: 200, max: 2000 },
        concurrency: 1,
        budget: 250,
        seed: 5,
    }
}

/// The four supervisor workloads and the synthetic chain.
pub fn preset_workloads() -> Vec<WorkloadSpec> {
    vec![
        supervisor("supervisor-a", &SUPERVISOR_A, 224, 48, 1),
        supervisor("supervisor-b", &SUPERVISOR_B, 176, 32, 2),
        supervisor("supervisor-c", &SUPERVISOR_C, 272, 64, 3),
        supervisor("supervisor-d", &SUPERVISOR_D, 176, 40, 4),
        synthetic_chain(),
    ]
}

pub fn preset_names() -> Vec<String> {
    preset_workloads().into_iter().map(|w| w.name).collect()
}

pub fn preset(name: &str) -> Result<WorkloadSpec> {
    preset_workloads().into_iter().find(|w| w.name == name).ok_or_else(|| {
        Error::InvalidArgument(format!("unknown preset {name}; valid presets: {}", preset_names().join(", ")))
    })
}

/// Every agent equally likely after every agent: no routing structure.
pub fn uniform_workload(agents: usize, sessions: u32, seed: u64) -> WorkloadSpec {
    let p = 1.0 / agents as f64;
    let mut transition = vec![vec![p; agents]; agents];
    for row in &mut transition {
        // Push rounding error into one entry so the row sums to 1.
        let s: f64 = row[1..].iter().sum();
        row[0] = 1.0 - s;
    }
    WorkloadSpec {
        name: format!("uniform-{agents}"),
        agents: (0..agents).map(|i| AgentSpec { label: format!("agent-{i:02}"), anchor_tokens: 144 }).collect(),
        transition,
        supervisor: None,
        turns_per_session: TurnRange { min: 8, max: 32 },
        sessions,
        task_tokens: 192,
        history_growth: 8,
        template_tokens: 16,
        decode_tokens: 32,
        tool_ms: TurnRange { min: 200, max: 2000 },
        concurrency: 4,
        budget: 120,
        seed,
    }
}
