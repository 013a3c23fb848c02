//! Block-level view of a token trace for one block size.

use std::collections::BTreeMap;

use crate::cachesage::{derive_agent_identity, IdentityConfig};
use crate::engine::cost::CostModel;
use crate::error::Result;
use crate::hash::block_keys;
use crate::types::{AgentId, BlockKey, RequestId, Token};
use crate::workloads::Trace;

/// User-message token appended to warmup requests.
pub const WARMUP_USER_TOKEN: Token = Token(1);

/// A trace turn turned into blocks and an agent identity.
#[derive(Debug, Clone)]
pub struct PreparedTurn {
    pub id: RequestId,
    pub session: u32,
    pub turn_index: u32,
    pub agent: AgentId,
    pub label: usize,
    pub blocks: Vec<(BlockKey, u32)>,
    pub prompt_tokens: u64,
    /// Leading blocks fully inside the template + anchor region. These are
    /// the blocks that receive the agent identity on first touch.
    pub anchor_blocks: usize,
    pub decode_tokens: u32,
    /// Delay between the previous turn's completion and this turn's
    /// readiness, microseconds.
    pub tool_us: u64,
}

/// What the engine needs to synthesize a warmup for one agent.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub label: String,
    pub anchor_tokens: usize,
    /// Template + anchor + one user token.
    pub warmup_blocks: Vec<(BlockKey, u32)>,
    pub anchor_blocks: usize,
}

#[derive(Debug, Clone)]
pub struct PreparedTrace {
    pub name: String,
    pub block_size: usize,
    pub turns: Vec<PreparedTurn>,
    /// Turn indices of each session, in order.
    pub sessions: Vec<Vec<usize>>,
    pub labels: Vec<String>,
    pub catalog: BTreeMap<AgentId, CatalogEntry>,
}

impl PreparedTrace {
    pub fn build(trace: &Trace, block_size: usize, identity: &IdentityConfig) -> Result<Self> {
        let mut turns = Vec::with_capacity(trace.num_turns());
        let mut sessions = Vec::with_capacity(trace.sessions.len());
        let mut catalog = BTreeMap::new();
        for session in &trace.sessions {
            let mut ids = Vec::with_capacity(session.turns.len());
            for turn in &session.turns {
                let tokens = trace.prompt_tokens(turn);
                let blocks = block_keys(&tokens, block_size)?;
                let keys: Vec<BlockKey> = blocks.iter().map(|b| b.0).collect();
                let agent = derive_agent_identity(&keys, identity)?;
                let region = trace.template.len() + trace.agents[turn.agent].anchor.len();
                let anchor_blocks = region / block_size;
                catalog.entry(agent).or_insert_with(|| {
                    let mut w = tokens[..region].to_vec();
                    w.push(WARMUP_USER_TOKEN);
                    CatalogEntry {
                        label: trace.agents[turn.agent].label.clone(),
                        anchor_tokens: region,
                        warmup_blocks: block_keys(&w, block_size).expect("non-empty warmup"),
                        anchor_blocks,
                    }
                });
                ids.push(turns.len());
                turns.push(PreparedTurn {
                    id: RequestId(turns.len() as u64),
                    session: session.id,
                    turn_index: turn.turn_index,
                    agent,
                    label: turn.agent,
                    prompt_tokens: tokens.len() as u64,
                    blocks,
                    anchor_blocks,
                    decode_tokens: turn.decode_tokens,
                    tool_us: u64::from(turn.tool_ms) * 1000,
                });
            }
            sessions.push(ids);
        }
        Ok(Self {
            name: trace.name.clone(),
            block_size,
            turns,
            sessions,
            labels: trace.agents.iter().map(|a| a.label.clone()).collect(),
            catalog,
        })
    }

    pub fn label(&self, turn: &PreparedTurn) -> &str {
        &self.labels[turn.label]
    }

    /// Expected start order of every turn under FIFO session admission with
    /// `concurrency` slots, assuming every turn pays full prefill. Returns
    /// the position of each turn (indexed by turn id).
    pub fn estimate_start_order(&self, concurrency: usize, cost: &CostModel) -> Vec<u32> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        const FINISH: u8 = 0;
        const READY: u8 = 1;
        let mut pos = vec![0u32; self.turns.len()];
        let mut next_pos = 0u32;
        // (time, event, session, index of the turn within the session);
        // completions sort before tool returns at the same instant.
        let mut heap: BinaryHeap<Reverse<(u64, u8, usize, usize)>> = BinaryHeap::new();
        let mut next_session = 0;
        let mut start = |s: usize, i: usize, now: u64, heap: &mut BinaryHeap<_>| {
            let t = &self.turns[self.sessions[s][i]];
            pos[t.id.0 as usize] = next_pos;
            next_pos += 1;
            let dur = cost.ttft_us(t.prompt_tokens) + cost.decode_us(u64::from(t.decode_tokens));
            heap.push(Reverse((now + dur, FINISH, s, i)));
        };
        let mut active = 0;
        while next_session < self.sessions.len() && active < concurrency.max(1) {
            if !self.sessions[next_session].is_empty() {
                start(next_session, 0, 0, &mut heap);
                active += 1;
            }
            next_session += 1;
        }
        while let Some(Reverse((now, ev, s, i))) = heap.pop() {
            if ev == READY {
                start(s, i, now, &mut heap);
            } else if i + 1 < self.sessions[s].len() {
                let tool = self.turns[self.sessions[s][i + 1]].tool_us;
                heap.push(Reverse((now + tool, READY, s, i + 1)));
            } else {
                while next_session < self.sessions.len() {
                    let ns = next_session;
                    next_session += 1;
                    if !self.sessions[ns].is_empty() {
                        start(ns, 0, now, &mut heap);
                        break;
                    }
                }
            }
        }
        pos
    }
}
