//! Synthetic multi-agent traces and the locality measurements taken on them.

mod io;
mod measure;
mod presets;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Token;

pub use io::{read_trace, write_trace, TRACE_SCHEMA_VERSION};
pub use measure::{compute_entropy_reduction, compute_phi, empirical_transitions, measure_trace, TraceReport};
pub use presets::{preset, preset_names, preset_workloads, uniform_workload};

/// Row sums must be within this of 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

const HISTORY_TOKEN_BASE: u32 = 0x4000_0000;
const HISTORY_TOKENS_PER_SESSION: u32 = 1 << 16;
const MAX_SESSIONS: u32 = (u32::MAX - HISTORY_TOKEN_BASE) / HISTORY_TOKENS_PER_SESSION;
/// Anchor and template token ids are drawn from this range.
const ANCHOR_VOCAB: std::ops::Range<u32> = 1000..1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub label: String,
    pub anchor_tokens: usize,
}

/// Inclusive uniform integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRange {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub name: String,
    pub agents: Vec<AgentSpec>,
    /// Row-stochastic routing matrix, indexed like `agents`.
    pub transition: Vec<Vec<f64>>,
    /// Label of the hub agent every session starts at. Defaults to the
    /// first agent.
    #[serde(default)]
    pub supervisor: Option<String>,
    pub turns_per_session: TurnRange,
    pub sessions: u32,
    /// Session-specific tokens present from the first turn.
    #[serde(default)]
    pub task_tokens: u32,
    /// History tokens added per turn.
    pub history_growth: u32,
    #[serde(default = "default_template_tokens")]
    pub template_tokens: usize,
    #[serde(default = "default_decode_tokens")]
    pub decode_tokens: u32,
    /// Simulated milliseconds of tool work between consecutive turns of a
    /// session, drawn uniformly per turn.
    #[serde(default = "default_tool_ms")]
    pub tool_ms: TurnRange,
    /// Suggested engine pairing.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_template_tokens() -> usize {
    16
}
fn default_decode_tokens() -> u32 {
    32
}
fn default_tool_ms() -> TurnRange {
    TurnRange { min: 0, max: 0 }
}
fn default_concurrency() -> usize {
    4
}
fn default_budget() -> usize {
    120
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.agents.len();
        if n == 0 {
            return Err(Error::Validation(format!("workload {}: no agents", self.name)));
        }
        if self.transition.len() != n {
            return Err(Error::Validation(format!(
                "workload {}: transition has {} rows for {} agents",
                self.name,
                self.transition.len(),
                n
            )));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!(
                    "workload {}: row {} has {} entries, expected {}",
                    self.name,
                    self.agents[i].label,
                    row.len(),
                    n
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Validation(format!(
                    "workload {}: row {} has a negative or non-finite entry",
                    self.name, self.agents[i].label
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Validation(format!(
                    "workload {}: row {} sums to {s}",
                    self.name, self.agents[i].label
                )));
            }
        }
        let mut labels: Vec<&str> = self.agents.iter().map(|a| a.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("workload {}: duplicate agent labels", self.name)));
        }
        if self.agents.iter().any(|a| a.anchor_tokens == 0) {
            return Err(Error::Validation(format!("workload {}: empty anchor", self.name)));
        }
        if self.turns_per_session.min == 0 || self.turns_per_session.min > self.turns_per_session.max {
            return Err(Error::Validation(format!("workload {}: bad turns_per_session range", self.name)));
        }
        if self.sessions == 0 || self.sessions > MAX_SESSIONS {
            return Err(Error::Validation(format!("workload {}: sessions must be in 1..={MAX_SESSIONS}", self.name)));
        }
        let longest =
            u64::from(self.task_tokens) + u64::from(self.turns_per_session.max - 1) * u64::from(self.history_growth);
        if longest >= u64::from(HISTORY_TOKENS_PER_SESSION) {
            return Err(Error::Validation(format!(
                "workload {}: session history reaches {longest} tokens, limit is {}",
                self.name, HISTORY_TOKENS_PER_SESSION
            )));
        }
        if self.tool_ms.min > self.tool_ms.max {
            return Err(Error::Validation(format!("workload {}: bad tool_ms range", self.name)));
        }
        if self.decode_tokens == 0 {
            return Err(Error::Validation(format!("workload {}: decode_tokens must be positive", self.name)));
        }
        self.start_agent()?;
        Ok(())
    }

    pub fn start_agent(&self) -> Result<usize> {
        match &self.supervisor {
            None => Ok(0),
            Some(l) => self
                .agents
                .iter()
                .position(|a| &a.label == l)
                .ok_or_else(|| Error::Validation(format!("workload {}: unknown supervisor {l}", self.name))),
        }
    }

    /// Agents whose anchor is shorter than the identity window.
    pub fn short_anchors(&self, block_size: usize, window_blocks: usize) -> Vec<&str> {
        self.agents.iter().filter(|a| a.anchor_tokens < block_size * window_blocks).map(|a| a.label.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceAgent {
    pub label: String,
    pub anchor: Vec<Token>,
}

/// One agent invocation inside a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub session: u32,
    pub turn_index: u32,
    /// Index into `Trace::agents`.
    pub agent: usize,
    pub template_tokens: u32,
    pub anchor_tokens: u32,
    pub history_tokens: u32,
    pub decode_tokens: u32,
    /// Tool time after the previous turn of the session before this one
    /// can start, milliseconds. Zero for first turns.
    #[serde(default)]
    pub tool_ms: u32,
}

impl Turn {
    pub fn prompt_tokens(&self) -> u64 {
        u64::from(self.template_tokens) + u64::from(self.anchor_tokens) + u64::from(self.history_tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: u32,
    pub turns: Vec<Turn>,
}

/// A replayable sequence of sessions. Token content is implicit: every
/// prompt is the shared template, the agent's anchor, then the session's
/// private history tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub name: String,
    pub template: Vec<Token>,
    pub agents: Vec<TraceAgent>,
    pub sessions: Vec<Session>,
}

/// `i`-th history token of session `s`. Unique per session.
pub fn history_token(session: u32, i: u32) -> Token {
    Token(HISTORY_TOKEN_BASE + session * HISTORY_TOKENS_PER_SESSION + i)
}

impl Trace {
    pub fn num_turns(&self) -> usize {
        self.sessions.iter().map(|s| s.turns.len()).sum()
    }

    pub fn turns(&self) -> impl Iterator<Item = &Turn> + '_ {
        self.sessions.iter().flat_map(|s| s.turns.iter())
    }

    /// Agent label sequence of every session.
    pub fn agent_sequences(&self) -> Vec<Vec<&str>> {
        self.sessions.iter().map(|s| s.turns.iter().map(|t| self.agents[t.agent].label.as_str()).collect()).collect()
    }

    pub fn prompt_tokens(&self, turn: &Turn) -> Vec<Token> {
        let mut v = Vec::with_capacity(turn.prompt_tokens() as usize);
        v.extend_from_slice(&self.template);
        v.extend_from_slice(&self.agents[turn.agent].anchor);
        v.extend((0..turn.history_tokens).map(|i| history_token(turn.session, i)));
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.sessions.len() as u64 > u64::from(MAX_SESSIONS) {
            return Err(Error::Validation(format!("trace has more than {MAX_SESSIONS} sessions")));
        }
        for s in &self.sessions {
            for t in &s.turns {
                if t.session != s.id {
                    return Err(Error::Validation(format!("turn in session {} claims session {}", s.id, t.session)));
                }
                let Some(a) = self.agents.get(t.agent) else {
                    return Err(Error::Validation(format!("session {} uses unknown agent {}", s.id, t.agent)));
                };
                if t.anchor_tokens as usize != a.anchor.len() || t.template_tokens as usize != self.template.len() {
                    return Err(Error::Validation(format!(
                        "session {} turn {}: token counts disagree with the agent catalog",
                        s.id, t.turn_index
                    )));
                }
                if t.history_tokens >= HISTORY_TOKENS_PER_SESSION || s.id >= MAX_SESSIONS {
                    return Err(Error::Validation(format!(
                        "session {} turn {}: history out of range",
                        s.id, t.turn_index
                    )));
                }
                if t.prompt_tokens() == 0 {
                    return Err(Error::Validation(format!("session {} turn {}: empty prompt", s.id, t.turn_index)));
                }
            }
        }
        Ok(())
    }
}

fn random_tokens(rng: &mut ChaCha8Rng, n: usize) -> Vec<Token> {
    (0..n).map(|_| Token(rng.random_range(ANCHOR_VOCAB))).collect()
}

/// Seeded trace: template and anchors drawn once, then every session walks
/// the routing matrix from the start agent.
pub fn generate_trace(spec: &WorkloadSpec) -> Result<Trace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let template = random_tokens(&mut rng, spec.template_tokens);
    let agents: Vec<TraceAgent> = spec
        .agents
        .iter()
        .map(|a| TraceAgent { label: a.label.clone(), anchor: random_tokens(&mut rng, a.anchor_tokens) })
        .collect();
    let rows: Vec<WeightedIndex<f64>> = spec
        .transition
        .iter()
        .map(|r| WeightedIndex::new(r).map_err(|e| Error::Validation(format!("workload {}: {e}", spec.name))))
        .collect::<Result<_>>()?;
    let start = spec.start_agent()?;
    let mut sessions = Vec::with_capacity(spec.sessions as usize);
    for s in 0..spec.sessions {
        let n = rng.random_range(spec.turns_per_session.min..=spec.turns_per_session.max);
        let mut agent = start;
        let mut turns = Vec::with_capacity(n as usize);
        for i in 0..n {
            let mut tool_ms = 0;
            if i > 0 {
                agent = rows[agent].sample(&mut rng);
                tool_ms = rng.random_range(spec.tool_ms.min..=spec.tool_ms.max);
            }
            turns.push(Turn {
                session: s,
                turn_index: i,
                agent,
                template_tokens: spec.template_tokens as u32,
                anchor_tokens: spec.agents[agent].anchor_tokens as u32,
                history_tokens: spec.task_tokens + i * spec.history_growth,
                decode_tokens: spec.decode_tokens,
                tool_ms,
            });
        }
        sessions.push(Session { id: s, turns });
    }
    Ok(Trace { name: spec.name.clone(), template, agents, sessions })
}
