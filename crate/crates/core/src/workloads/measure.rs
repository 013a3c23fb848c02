use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Trace, Turn};
use crate::error::{Error, Result};

/// Share of the prompt taken by the agent anchor.
pub fn compute_phi(turn: &Turn) -> Result<f64> {
    let p = turn.prompt_tokens();
    if p == 0 {
        return Err(Error::InvalidArgument("phi of an empty prompt".into()));
    }
    Ok(f64::from(turn.anchor_tokens) / p as f64)
}

fn entropy(counts: impl Iterator<Item = u64>, total: u64) -> f64 {
    let t = total as f64;
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum()
}

/// `1 - H(next | current) / H(next)` over adjacent turns within sessions.
pub fn compute_entropy_reduction(trace: &Trace) -> Result<f64> {
    if trace.num_turns() < 2 {
        return Err(Error::InvalidArgument("entropy reduction needs at least two turns".into()));
    }
    let n = trace.agents.len();
    let mut pairs = vec![vec![0u64; n]; n];
    let mut total = 0u64;
    for s in &trace.sessions {
        for w in s.turns.windows(2) {
            pairs[w[0].agent][w[1].agent] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidArgument("no session has two consecutive turns".into()));
    }
    let next: Vec<u64> = (0..n).map(|b| pairs.iter().map(|r| r[b]).sum()).collect();
    let h_next = entropy(next.iter().copied(), total);
    if h_next == 0.0 {
        return Ok(0.0);
    }
    let h_cond: f64 = pairs
        .iter()
        .map(|row| {
            let rt: u64 = row.iter().sum();
            if rt == 0 {
                0.0
            } else {
                rt as f64 / total as f64 * entropy(row.iter().copied(), rt)
            }
        })
        .sum();
    Ok(1.0 - h_cond / h_next)
}

/// Row-normalized within-session transition frequencies. Rows of agents
/// never followed by another turn are all zero.
pub fn empirical_transitions(trace: &Trace) -> Vec<Vec<f64>> {
    let n = trace.agents.len();
    let mut c = vec![vec![0u64; n]; n];
    for s in &trace.sessions {
        for w in s.turns.windows(2) {
            c[w[0].agent][w[1].agent] += 1;
        }
    }
    c.into_iter()
        .map(|row| {
            let t: u64 = row.iter().sum();
            row.into_iter().map(|x| if t == 0 { 0.0 } else { x as f64 / t as f64 }).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub name: String,
    pub sessions: usize,
    pub turns: usize,
    /// Mean over sessions of the first turn's phi.
    pub first_turn_phi: f64,
    pub first_turn_phi_min: f64,
    pub first_turn_phi_max: f64,
    /// Mean phi at each turn index, in depth order.
    pub phi_by_depth: Vec<f64>,
    pub entropy_reduction: f64,
    /// Turn counts per agent label.
    pub agent_turns: BTreeMap<String, u64>,
}

pub fn measure_trace(trace: &Trace) -> Result<TraceReport> {
    let r = compute_entropy_reduction(trace)?;
    let mut first = Vec::new();
    let mut by_depth: Vec<(f64, u64)> = Vec::new();
    let mut agent_turns = BTreeMap::new();
    for s in &trace.sessions {
        for t in &s.turns {
            let phi = compute_phi(t)?;
            if t.turn_index == 0 {
                first.push(phi);
            }
            let d = t.turn_index as usize;
            if by_depth.len() <= d {
                by_depth.resize(d + 1, (0.0, 0));
            }
            by_depth[d].0 += phi;
            by_depth[d].1 += 1;
            *agent_turns.entry(trace.agents[t.agent].label.clone()).or_insert(0) += 1;
        }
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(TraceReport {
        name: trace.name.clone(),
        sessions: trace.sessions.len(),
        turns: trace.num_turns(),
        first_turn_phi: mean(&first),
        first_turn_phi_min: first.iter().copied().fold(f64::INFINITY, f64::min),
        first_turn_phi_max: first.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        phi_by_depth: by_depth.into_iter().filter(|d| d.1 > 0).map(|(s, n)| s / n as f64).collect(),
        entropy_reduction: r,
        agent_turns,
    })
}
