//! Agent-aware KV-cache policy.
//!
//! Three parts sit behind the runtime's four primitives:
//!
//! - **Transition learner** (`observe`): sliding-window pairwise counts of
//!   agent dispatches, giving the MLE `P(b | a) = n(a, b) / n(a)`.
//! - **Survival scorer** (`score`): `w_pred * p_surv(agent) + rho`, where
//!   `p_surv` is the hop-count proxy rebuilt on every agent change and `rho`
//!   is the engine's normalized recency. Blocks without an agent identity
//!   compete on recency alone.
//! - **Prefetcher** (`predict` + `act`): after each dispatch, a gated warmup
//!   of the most likely next agent, queued until the engine drains it between
//!   scheduler steps.

mod identity;
mod learner;
mod oracle;
mod prefetch;
mod survival;

pub use identity::{derive_agent_identity, IdentityConfig};
pub use learner::{TransitionLearner, DEFAULT_WINDOW};
pub use oracle::{exact_survival_prob, ORACLE_MAX_AGENTS, ORACLE_MAX_STEPS};
pub use prefetch::{prefetch_target, PrefetchGate};
pub use survival::{rebuild_reachability, survival_proxy, ReachabilityState, DEFAULT_E_MAX, DEFAULT_TAU};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::runtime::{recency_residual, Forecast, Policy, ScoreContext, SideEffect, SideEffectKind};
use crate::types::{AgentId, Block, Event, EventKind, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheSageConfig {
    pub skip: usize,
    pub take: usize,
    pub tau: f64,
    pub e_max: u32,
    pub w_pred: f64,
    pub window: usize,
    pub gate: PrefetchGate,
}

impl Default for CacheSageConfig {
    fn default() -> Self {
        let id = IdentityConfig::default();
        Self {
            skip: id.skip,
            take: id.take,
            tau: DEFAULT_TAU,
            e_max: DEFAULT_E_MAX,
            w_pred: 1.0,
            window: DEFAULT_WINDOW,
            gate: PrefetchGate::default(),
        }
    }
}

impl CacheSageConfig {
    pub fn identity(&self) -> IdentityConfig {
        IdentityConfig { skip: self.skip, take: self.take }
    }

    pub fn validate(&self) -> Result<()> {
        self.identity().validate()?;
        survival::validate_params(self.tau, self.e_max)?;
        self.gate.validate()?;
        if self.window == 0 {
            return Err(Error::Validation("window must hold at least one transition".into()));
        }
        if !(self.w_pred.is_finite() && self.w_pred >= 0.0) {
            return Err(Error::Validation("w_pred must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CacheSageStats {
    pub dispatches: u64,
    pub agent_changes: u64,
    pub rebuilds: u64,
    pub warmups_issued: u64,
}

#[derive(Debug, Clone)]
pub struct CacheSage {
    cfg: CacheSageConfig,
    learner: TransitionLearner,
    reach: Option<ReachabilityState>,
    current: Option<AgentId>,
    pending: Vec<SideEffect>,
    issued_this_step: u32,
    stats: CacheSageStats,
}

impl Default for CacheSage {
    fn default() -> Self {
        Self::new(CacheSageConfig::default()).expect("default config is valid")
    }
}

impl CacheSage {
    pub fn new(cfg: CacheSageConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            learner: TransitionLearner::new(cfg.window),
            reach: None,
            current: None,
            pending: Vec::new(),
            issued_this_step: 0,
            stats: CacheSageStats::default(),
        })
    }

    pub fn config(&self) -> &CacheSageConfig {
        &self.cfg
    }

    pub fn learner(&self) -> &TransitionLearner {
        &self.learner
    }

    pub fn reachability(&self) -> Option<&ReachabilityState> {
        self.reach.as_ref()
    }

    pub fn current_agent(&self) -> Option<AgentId> {
        self.current
    }

    pub fn cache_stats(&self) -> &CacheSageStats {
        &self.stats
    }

    pub fn record_transition(&mut self, prev: AgentId, next: AgentId) {
        self.learner.record_transition(prev, next);
    }

    pub fn transition_prob(&self, a: AgentId, b: AgentId) -> f64 {
        self.learner.transition_prob(a, b)
    }

    /// Recompute hop counts and survival proxies around `current`.
    pub fn rebuild_reachability(&mut self, current: AgentId) -> &ReachabilityState {
        self.stats.rebuilds += 1;
        self.learner.intern(current);
        self.current = Some(current);
        self.reach = Some(rebuild_reachability(&self.learner, current, self.cfg.tau, self.cfg.e_max));
        self.reach.as_ref().expect("just set")
    }

    /// Survival proxy of `agent` under the last rebuild; zero when unknown.
    pub fn p_surv(&self, agent: AgentId) -> f64 {
        match (&self.reach, self.learner.index_of(agent)) {
            (Some(r), Some(i)) => r.p_surv_idx(i),
            _ => 0.0,
        }
    }

    /// MLE row of `current` for horizon 1; the `h`-step marginal otherwise.
    /// Rows without data keep their mass in place.
    pub fn predict_next(&self, current: AgentId, horizon: u32) -> Forecast {
        let mut f = Forecast::empty(horizon);
        let Some(c) = self.learner.index_of(current) else { return f };
        if horizon == 0 || self.learner.row_total_idx(c) == 0 {
            return f;
        }
        let n = self.learner.num_agents();
        let mut dist = vec![0.0; n];
        dist[c] = 1.0;
        for _ in 0..horizon {
            let mut next = vec![0.0; n];
            for (a, &m) in dist.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                if self.learner.row_total_idx(a) == 0 {
                    next[a] += m;
                    continue;
                }
                for (b, slot) in next.iter_mut().enumerate() {
                    *slot += m * self.learner.prob_idx(a, b);
                }
            }
            dist = next;
        }
        let agents = self.learner.agents();
        for (i, &p) in dist.iter().enumerate() {
            if p > 0.0 {
                f.distribution.insert(agents[i], p);
            }
        }
        f
    }

    /// Queue a warmup of the argmax successor of `current` if the gate allows.
    pub fn maybe_prefetch(&mut self, current: AgentId, tick: Tick) -> Option<SideEffect> {
        let target = prefetch_target(&self.learner, current, &self.cfg.gate, self.issued_this_step)?;
        if self.pending.iter().any(|e| e.kind == SideEffectKind::Warmup(target)) {
            return None;
        }
        let effect = SideEffect { kind: SideEffectKind::Warmup(target), issued_tick: tick };
        self.pending.push(effect);
        self.issued_this_step += 1;
        self.stats.warmups_issued += 1;
        Some(effect)
    }

    fn on_dispatch(&mut self, prev: Option<AgentId>, next: AgentId, tick: Tick) {
        self.stats.dispatches += 1;
        if let Some(p) = prev {
            self.learner.record_transition(p, next);
        } else {
            self.learner.intern(next);
        }
        if self.current != Some(next) {
            self.stats.agent_changes += 1;
            self.rebuild_reachability(next);
        }
        self.maybe_prefetch(next, tick);
    }

    /// Compact little-endian encoding of learner + reachability state, used
    /// for byte accounting. Counts are 64-bit; agent indices are 16-bit.
    pub fn encoded_state(&self) -> Vec<u8> {
        let l = &self.learner;
        let n = l.num_agents();
        let mut out = Vec::new();
        out.extend_from_slice(b"CSG1");
        out.extend_from_slice(&(n as u16).to_le_bytes());
        out.extend_from_slice(&(l.capacity() as u32).to_le_bytes());
        for a in l.agents() {
            out.extend_from_slice(&a.0.to_le_bytes());
        }
        for t in l.row_totals_idx() {
            out.extend_from_slice(&t.to_le_bytes());
        }
        let mut nnz = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let c = l.count_idx(i, j);
                if c > 0 {
                    nnz.push((i as u16, j as u16, c));
                }
            }
        }
        out.extend_from_slice(&(nnz.len() as u32).to_le_bytes());
        for (i, j, c) in nnz {
            out.extend_from_slice(&i.to_le_bytes());
            out.extend_from_slice(&j.to_le_bytes());
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&(l.window_len() as u32).to_le_bytes());
        for (a, b) in l.window_idx() {
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&b.to_le_bytes());
        }
        match &self.reach {
            None => out.push(0),
            Some(r) => {
                out.push(1);
                out.extend_from_slice(&r.anchor_agent.0.to_le_bytes());
                out.extend_from_slice(&r.tau.to_le_bytes());
                out.extend_from_slice(&r.e_max.to_le_bytes());
                out.extend_from_slice(&(r.hop_counts.len() as u16).to_le_bytes());
                for &h in &r.hop_counts {
                    out.extend_from_slice(&(h.min(u16::MAX as u32) as u16).to_le_bytes());
                }
                for &p in &r.p_surv {
                    out.extend_from_slice(&p.to_le_bytes());
                }
            }
        }
        out
    }
}

impl Policy for CacheSage {
    fn name(&self) -> &str {
        "cachesage"
    }

    fn observe(&mut self, event: &Event) {
        match &event.kind {
            EventKind::BlockTouch { agent: Some(a), .. } => {
                self.learner.intern(*a);
            }
            EventKind::AgentDispatch { prev, next } => self.on_dispatch(*prev, *next, event.tick),
            _ => {}
        }
    }

    fn score(&self, block: &Block, ctx: &ScoreContext) -> f64 {
        let p = block.agent.map_or(0.0, |a| self.p_surv(a));
        self.cfg.w_pred * p + recency_residual(block.last_touch, ctx)
    }

    fn predict(&self, horizon: u32) -> Forecast {
        match self.current {
            Some(c) => self.predict_next(c, horizon),
            None => Forecast::empty(horizon),
        }
    }

    fn poll_actions(&mut self) -> Vec<SideEffect> {
        self.issued_this_step = 0;
        std::mem::take(&mut self.pending)
    }

    fn state_json(&self) -> serde_json::Value {
        let l = &self.learner;
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for (a, b, n) in l.nonzero_counts() {
            counts.entry(a.to_string()).or_default().insert(b.to_string(), n);
        }
        let row_totals: BTreeMap<String, u64> = l.agents().iter().map(|a| (a.to_string(), l.row_total(*a))).collect();
        let window: Vec<[String; 2]> = l.window_pairs().map(|(a, b)| [a.to_string(), b.to_string()]).collect();
        let reach = self.reach.as_ref().map(|r| {
            let hops: BTreeMap<String, u32> =
                l.agents().iter().enumerate().map(|(i, a)| (a.to_string(), r.hops_idx(i))).collect();
            let p: BTreeMap<String, f64> =
                l.agents().iter().enumerate().map(|(i, a)| (a.to_string(), r.p_surv_idx(i))).collect();
            json!({
                "anchor_agent": r.anchor_agent,
                "tau": r.tau,
                "e_max": r.e_max,
                "hop_counts": hops,
                "p_surv": p,
            })
        });
        json!({
            "agents": l.agents(),
            "counts": counts,
            "row_totals": row_totals,
            "window_capacity": l.capacity(),
            "window": window,
            "current": self.current,
            "reachability": reach,
            "pending": self.pending,
        })
    }

    fn stats(&self) -> serde_json::Value {
        serde_json::to_value(&self.stats).unwrap_or_default()
    }
}
