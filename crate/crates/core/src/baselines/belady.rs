use std::collections::HashMap;
use std::sync::Arc;

use crate::engine::{CostModel, PreparedTrace};
use crate::runtime::{Forecast, Policy, ScoreContext, SideEffect, SideEffectKind};
use crate::types::{Block, BlockKey, Event, EventKind};

/// Future uses of every block key, in expected start order.
#[derive(Debug, Clone)]
pub struct FutureIndex {
    /// Expected position of each turn, indexed by turn id.
    position: Vec<u32>,
    /// Turn id at each position.
    by_position: Vec<u32>,
    /// Sorted positions at which each key is used.
    uses: HashMap<BlockKey, Vec<u32>>,
    /// Index of each key within its prompt. Prefix chaining makes it the
    /// same in every prompt that contains the key.
    depth: HashMap<BlockKey, u32>,
    turn_keys: Vec<Vec<BlockKey>>,
}

impl FutureIndex {
    /// `position[t]` is the expected start position of turn `t`; it must be
    /// a permutation of `0..turns`.
    pub fn new(trace: &PreparedTrace, position: Vec<u32>) -> Self {
        assert_eq!(position.len(), trace.turns.len());
        let mut by_position = vec![0u32; position.len()];
        for (t, &p) in position.iter().enumerate() {
            by_position[p as usize] = t as u32;
        }
        let mut uses: HashMap<BlockKey, Vec<u32>> = HashMap::new();
        let mut depth = HashMap::new();
        for &t in &by_position {
            for (i, &(k, _)) in trace.turns[t as usize].blocks.iter().enumerate() {
                uses.entry(k).or_default().push(position[t as usize]);
                depth.insert(k, i as u32);
            }
        }
        let turn_keys = trace.turns.iter().map(|t| t.blocks.iter().map(|b| b.0).collect()).collect();
        Self { position, by_position, uses, depth, turn_keys }
    }

    /// Start order estimated from the trace, the engine's concurrency and
    /// the cost model.
    pub fn estimate(trace: &PreparedTrace, concurrency: usize, cost: &CostModel) -> Self {
        Self::new(trace, trace.estimate_start_order(concurrency, cost))
    }

    pub fn turns(&self) -> usize {
        self.position.len()
    }
}

/// Clairvoyant scorer: the sooner a block is needed again, the higher its
/// score. Blocks with no future use score 0. It also warms the anchor of
/// every dispatched agent, the prefetch an exact predictor would issue.
#[derive(Debug, Clone)]
pub struct Belady {
    index: Arc<FutureIndex>,
    started: Vec<bool>,
    /// Smallest position whose turn has not started.
    frontier: usize,
    /// Per key, index into its use list of the first use not yet skipped.
    cursor: HashMap<BlockKey, usize>,
    pending: Vec<SideEffect>,
}

impl Belady {
    pub fn new(index: Arc<FutureIndex>) -> Self {
        let n = index.turns();
        Self { index, started: vec![false; n], frontier: 0, cursor: HashMap::new(), pending: Vec::new() }
    }

    /// Position of the next use of `key` by a turn that has not started.
    pub fn next_use(&self, key: BlockKey) -> Option<u32> {
        let uses = self.index.uses.get(&key)?;
        let c = self.cursor.get(&key).copied().unwrap_or(0);
        uses[c..].iter().copied().find(|&p| !self.started[self.index.by_position[p as usize] as usize])
    }

    fn on_start(&mut self, turn: usize) {
        if turn >= self.started.len() || self.started[turn] {
            return;
        }
        self.started[turn] = true;
        for &k in &self.index.turn_keys[turn] {
            let uses = &self.index.uses[&k];
            let c = self.cursor.entry(k).or_insert(0);
            while *c < uses.len() && self.started[self.index.by_position[uses[*c] as usize] as usize] {
                *c += 1;
            }
        }
        while self.frontier < self.started.len() && self.started[self.index.by_position[self.frontier] as usize] {
            self.frontier += 1;
        }
    }
}

/// Among blocks needed by the same turn, the one deeper in the prompt
/// scores lower: losing a prefix head makes every later block useless.
/// The perturbation is far below the gap between adjacent distances.
pub fn belady_score(next_use: Option<u32>, frontier: usize, depth: u32) -> f64 {
    match next_use {
        None => 0.0,
        Some(p) => {
            let base = 1.0 / (1.0 + (p as usize).saturating_sub(frontier) as f64);
            base * (1.0 + 1e-9 / (1.0 + f64::from(depth)))
        }
    }
}

impl Policy for Belady {
    fn name(&self) -> &str {
        "belady"
    }

    fn observe(&mut self, event: &Event) {
        match event.kind {
            EventKind::RequestArrival { request, .. } if !request.is_warmup() => self.on_start(request.0 as usize),
            EventKind::AgentDispatch { next, .. } => {
                let kind = SideEffectKind::Warmup(next);
                if !self.pending.iter().any(|e| e.kind == kind) {
                    self.pending.push(SideEffect { kind, issued_tick: event.tick });
                }
            }
            _ => {}
        }
    }

    fn score(&self, block: &Block, _: &ScoreContext) -> f64 {
        let depth = self.index.depth.get(&block.key).copied().unwrap_or(0);
        belady_score(self.next_use(block.key), self.frontier, depth)
    }

    fn predict(&self, horizon: u32) -> Forecast {
        Forecast::empty(horizon)
    }

    fn poll_actions(&mut self) -> Vec<SideEffect> {
        std::mem::take(&mut self.pending)
    }
}
