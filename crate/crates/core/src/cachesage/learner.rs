//! Sliding-window first-order Markov estimate of agent-to-agent dispatch.

use std::collections::{HashMap, VecDeque};

use crate::types::AgentId;

pub const DEFAULT_WINDOW: usize = 2048;

/// Pairwise transition counts over the last `capacity` observed transitions.
///
/// Agents are interned into dense indices in first-seen order; every
/// index-keyed vector below is indexed the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionLearner {
    agents: Vec<AgentId>,
    index: HashMap<AgentId, u16>,
    /// `counts[a][b]`; every row has `agents.len()` entries.
    counts: Vec<Vec<u64>>,
    row_totals: Vec<u64>,
    window: VecDeque<(u16, u16)>,
    capacity: usize,
    observed: u64,
}

impl Default for TransitionLearner {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW)
    }
}

impl TransitionLearner {
    pub fn new(capacity: usize) -> Self {
        Self {
            agents: Vec::new(),
            index: HashMap::new(),
            counts: Vec::new(),
            row_totals: Vec::new(),
            window: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity: capacity.max(1),
            observed: 0,
        }
    }

    /// Dense index of `agent`, adding it to the alphabet on first sight.
    pub fn intern(&mut self, agent: AgentId) -> usize {
        if let Some(&i) = self.index.get(&agent) {
            return i as usize;
        }
        let i = self.agents.len();
        assert!(i < u16::MAX as usize, "agent alphabet overflow");
        self.agents.push(agent);
        self.index.insert(agent, i as u16);
        for row in &mut self.counts {
            row.push(0);
        }
        self.counts.push(vec![0; i + 1]);
        self.row_totals.push(0);
        i
    }

    #[inline]
    pub fn index_of(&self, agent: AgentId) -> Option<usize> {
        self.index.get(&agent).map(|&i| i as usize)
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Transitions observed over the learner's lifetime, including expired ones.
    pub fn observed(&self) -> u64 {
        self.observed
    }

    pub fn record_transition(&mut self, prev: AgentId, next: AgentId) {
        let a = self.intern(prev);
        let b = self.intern(next);
        self.counts[a][b] += 1;
        self.row_totals[a] += 1;
        self.window.push_back((a as u16, b as u16));
        self.observed += 1;
        if self.window.len() > self.capacity {
            let (oa, ob) = self.window.pop_front().expect("window non-empty");
            self.counts[oa as usize][ob as usize] -= 1;
            self.row_totals[oa as usize] -= 1;
        }
    }

    pub fn count(&self, a: AgentId, b: AgentId) -> u64 {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    pub fn row_total(&self, a: AgentId) -> u64 {
        self.index_of(a).map_or(0, |i| self.row_totals[i])
    }

    /// MLE `n(a, b) / n(a)`; zero for an unseen row.
    pub fn transition_prob(&self, a: AgentId, b: AgentId) -> f64 {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.prob_idx(i, j),
            _ => 0.0,
        }
    }

    #[inline]
    pub(crate) fn prob_idx(&self, i: usize, j: usize) -> f64 {
        let n = self.row_totals[i];
        if n == 0 {
            0.0
        } else {
            self.counts[i][j] as f64 / n as f64
        }
    }

    #[inline]
    pub(crate) fn count_idx(&self, i: usize, j: usize) -> u64 {
        self.counts[i][j]
    }

    #[inline]
    pub(crate) fn row_total_idx(&self, i: usize) -> u64 {
        self.row_totals[i]
    }

    /// Nonzero `(successor, probability)` pairs of `a`'s row, in index order.
    pub fn row(&self, a: AgentId) -> Vec<(AgentId, f64)> {
        let Some(i) = self.index_of(a) else { return Vec::new() };
        (0..self.agents.len())
            .filter(|&j| self.counts[i][j] > 0)
            .map(|j| (self.agents[j], self.prob_idx(i, j)))
            .collect()
    }

    /// Most likely successor of `a` with its probability. Ties go to the
    /// agent seen first.
    pub fn argmax(&self, a: AgentId) -> Option<(AgentId, f64)> {
        let i = self.index_of(a)?;
        if self.row_totals[i] == 0 {
            return None;
        }
        let mut best = 0;
        for j in 1..self.agents.len() {
            if self.counts[i][j] > self.counts[i][best] {
                best = j;
            }
        }
        Some((self.agents[best], self.prob_idx(i, best)))
    }

    /// Pairs in the window, oldest first.
    pub fn window_pairs(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.window.iter().map(|&(a, b)| (self.agents[a as usize], self.agents[b as usize]))
    }

    /// Nonzero counts as `(a, b, n)` in index order.
    pub fn nonzero_counts(&self) -> impl Iterator<Item = (AgentId, AgentId, u64)> + '_ {
        self.counts.iter().enumerate().flat_map(move |(i, row)| {
            row.iter().enumerate().filter(|(_, &n)| n > 0).map(move |(j, &n)| (self.agents[i], self.agents[j], n))
        })
    }

    pub(crate) fn row_totals_idx(&self) -> &[u64] {
        &self.row_totals
    }

    pub(crate) fn window_idx(&self) -> impl Iterator<Item = (u16, u16)> + '_ {
        self.window.iter().copied()
    }
}
