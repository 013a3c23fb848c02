//! Per-turn records and run aggregates.

use serde::{Deserialize, Serialize};

use crate::types::{AgentId, RequestId, SimTime};

/// One served turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn_id: RequestId,
    pub session: u32,
    pub turn_index: u32,
    pub agent: AgentId,
    pub agent_label: String,
    pub prompt_tokens: u64,
    pub cached_tokens: u64,
    /// Simulated time to first token, milliseconds.
    pub ttft_ms: f64,
    /// Queueing + prefill + decode, milliseconds.
    pub e2e_ms: f64,
    pub start_us: SimTime,
    pub finish_us: SimTime,
    pub admission_error: bool,
}

/// Background work spent on warmups.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WarmupStats {
    pub issued: u64,
    pub executed: u64,
    pub dropped_unknown_agent: u64,
    pub dropped_no_space: u64,
    /// Uncached prompt tokens prefilled by warmups.
    pub prefill_tokens: u64,
    pub blocks_admitted: u64,
    /// Time the background lane spent on warmups, milliseconds.
    pub background_ms: f64,
}

/// Aggregates over one (workload, policy) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub turns: u64,
    pub prompt_tokens: u64,
    pub cached_tokens: u64,
    /// `cached_tokens / prompt_tokens`.
    pub hit_rate: f64,
    pub mean_ttft_ms: f64,
    pub mean_e2e_ms: f64,
    /// Turns per simulated second.
    pub throughput: f64,
    pub makespan_s: f64,
    pub evictions: u64,
    pub admission_errors: u64,
    pub events: u64,
    pub warmups: WarmupStats,
}

impl RunMetrics {
    pub fn from_turns(
        turns: &[TurnRecord],
        makespan_us: SimTime,
        evictions: u64,
        events: u64,
        warmups: WarmupStats,
    ) -> Self {
        let n = turns.len() as u64;
        let prompt: u64 = turns.iter().map(|t| t.prompt_tokens).sum();
        let cached: u64 = turns.iter().map(|t| t.cached_tokens).sum();
        let mean = |f: fn(&TurnRecord) -> f64| {
            if n == 0 {
                0.0
            } else {
                turns.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let makespan_s = makespan_us as f64 / 1e6;
        Self {
            turns: n,
            prompt_tokens: prompt,
            cached_tokens: cached,
            hit_rate: if prompt == 0 { 0.0 } else { cached as f64 / prompt as f64 },
            mean_ttft_ms: mean(|t| t.ttft_ms),
            mean_e2e_ms: mean(|t| t.e2e_ms),
            throughput: if makespan_s > 0.0 { n as f64 / makespan_s } else { 0.0 },
            makespan_s,
            evictions,
            admission_errors: turns.iter().filter(|t| t.admission_error).count() as u64,
            events,
            warmups,
        }
    }
}
