//! The agent runtime layer: a policy-agnostic contract of four primitives
//! (observe, score, predict, act) and a registry through which the engine
//! forwards events and consults the active eviction scorer.
//!
//! The engine talks to the runtime through exactly two hooks on the hot
//! path: [`Runtime::dispatch_event`] for every policy-relevant event and
//! [`Runtime::score`] when it needs an eviction victim. Side-effects that a
//! policy wants executed (the `act` primitive) are queued during `observe`
//! and collected with [`Runtime::drain_side_effects`] between scheduler steps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AgentId, Block, Event, SimTime, Tick};

/// Probabilistic forecast over future agent activity.
///
/// The distribution is either empty (no data) or sums to one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub horizon: u32,
    pub distribution: BTreeMap<AgentId, f64>,
}

impl Forecast {
    pub fn empty(horizon: u32) -> Self {
        Self { horizon, distribution: BTreeMap::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.distribution.is_empty()
    }

    /// Most likely agent; ties go to the smaller id.
    pub fn argmax(&self) -> Option<(AgentId, f64)> {
        let mut best: Option<(AgentId, f64)> = None;
        for (&a, &p) in &self.distribution {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((a, p));
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "agent", rename_all = "snake_case")]
pub enum SideEffectKind {
    /// Populate the agent's anchor blocks with a minimal request.
    Warmup(AgentId),
}

/// An off-critical-path action a policy asks a neighbor to perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideEffect {
    #[serde(flatten)]
    pub kind: SideEffectKind,
    pub issued_tick: Tick,
}

/// What the engine knows at the moment it asks for a score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreContext {
    /// Latest tick issued.
    pub current_tick: Tick,
    /// Smallest `last_touch` among resident blocks.
    pub oldest_live_tick: Tick,
    pub now: SimTime,
}

/// Normalized recency residual in `[0, 1]`: 1 for the most recent touch,
/// 0 for the oldest live block, 1 for everything when all ticks are equal.
#[inline]
pub fn recency_residual(last_touch: Tick, ctx: &ScoreContext) -> f64 {
    if ctx.current_tick <= ctx.oldest_live_tick {
        return 1.0;
    }
    let span = (ctx.current_tick - ctx.oldest_live_tick) as f64;
    let off = last_touch.saturating_sub(ctx.oldest_live_tick) as f64;
    (off / span).clamp(0.0, 1.0)
}

/// The four primitives every hosted policy implements.
///
/// `observe` is the only state-mutating entry point besides `poll_actions`,
/// which drains the queue `observe` fills. `score` and `predict` are reads.
pub trait Policy: Send {
    fn name(&self) -> &str;

    fn observe(&mut self, event: &Event);

    /// Eviction priority; the engine evicts the lowest score.
    fn score(&self, block: &Block, ctx: &ScoreContext) -> f64;

    fn predict(&self, horizon: u32) -> Forecast;

    fn poll_actions(&mut self) -> Vec<SideEffect>;

    /// Whether the engine should consult `score` on eviction. At most one
    /// scoring policy may be registered per runtime.
    fn is_scorer(&self) -> bool {
        true
    }

    /// Time a freshly admitted block stays ineligible for eviction, if the
    /// policy pins blocks.
    fn pin_horizon(&self) -> Option<SimTime> {
        None
    }

    /// Inspectable state. Maps are keyed by agent identity.
    fn state_json(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    /// Policy-specific counters for the run report.
    fn stats(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolicyHandle(pub usize);

/// Registry that fans events out to policies and forwards score consults.
#[derive(Default)]
pub struct Runtime {
    policies: Vec<Box<dyn Policy>>,
    scorer: Option<usize>,
    last_tick: Option<Tick>,
}

impl std::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = self.policies.iter().map(|p| p.name()).collect();
        f.debug_struct("Runtime")
            .field("policies", &names)
            .field("scorer", &self.scorer)
            .field("last_tick", &self.last_tick)
            .finish()
    }
}

impl Runtime {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_policy(&mut self, policy: Box<dyn Policy>) -> Result<PolicyHandle> {
        if policy.is_scorer() {
            if let Some(i) = self.scorer {
                return Err(Error::Conflict(format!(
                    "scoring policy '{}' already registered; cannot add '{}'",
                    self.policies[i].name(),
                    policy.name()
                )));
            }
            self.scorer = Some(self.policies.len());
        }
        self.policies.push(policy);
        Ok(PolicyHandle(self.policies.len() - 1))
    }

    pub fn dispatch_event(&mut self, event: &Event) -> Result<()> {
        if let Some(last) = self.last_tick {
            if event.tick < last {
                return Err(Error::Ordering { last, got: event.tick });
            }
        }
        self.last_tick = Some(event.tick);
        for p in &mut self.policies {
            p.observe(event);
        }
        Ok(())
    }

    /// All queued side-effects of all policies, in registration then issue order.
    pub fn drain_side_effects(&mut self) -> Vec<SideEffect> {
        let mut out = Vec::new();
        for p in &mut self.policies {
            out.extend(p.poll_actions());
        }
        out
    }

    /// Score from the registered scorer, or plain recency when none is registered.
    pub fn score(&self, block: &Block, ctx: &ScoreContext) -> f64 {
        match self.scorer {
            Some(i) => self.policies[i].score(block, ctx),
            None => recency_residual(block.last_touch, ctx),
        }
    }

    pub fn predict(&self, horizon: u32) -> Forecast {
        match self.scorer {
            Some(i) => self.policies[i].predict(horizon),
            None => Forecast::empty(horizon),
        }
    }

    pub fn pin_horizon(&self) -> Option<SimTime> {
        self.scorer.and_then(|i| self.policies[i].pin_horizon())
    }

    pub fn policy(&self, handle: PolicyHandle) -> Option<&dyn Policy> {
        self.policies.get(handle.0).map(|p| p.as_ref())
    }

    pub fn scorer(&self) -> Option<&dyn Policy> {
        self.scorer.map(|i| self.policies[i].as_ref())
    }

    pub fn scorer_name(&self) -> &str {
        self.scorer().map_or("lru", |p| p.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BlockKey, EventKind};

    struct Recorder {
        scorer: bool,
        seen: Vec<Tick>,
    }

    impl Policy for Recorder {
        fn name(&self) -> &str {
            "recorder"
        }
        fn observe(&mut self, event: &Event) {
            self.seen.push(event.tick);
        }
        fn score(&self, _: &Block, _: &ScoreContext) -> f64 {
            0.5
        }
        fn predict(&self, horizon: u32) -> Forecast {
            Forecast::empty(horizon)
        }
        fn poll_actions(&mut self) -> Vec<SideEffect> {
            Vec::new()
        }
        fn is_scorer(&self) -> bool {
            self.scorer
        }
        fn state_json(&self) -> serde_json::Value {
            serde_json::json!(self.seen)
        }
    }

    fn touch(tick: Tick) -> Event {
        Event::new(tick, 0, EventKind::BlockTouch { block: BlockKey(tick), agent: None })
    }

    #[test]
    fn second_scorer_conflicts() {
        let mut rt = Runtime::new();
        rt.register_policy(Box::new(Recorder { scorer: true, seen: vec![] })).unwrap();
        let err = rt.register_policy(Box::new(Recorder { scorer: true, seen: vec![] }));
        assert!(matches!(err, Err(Error::Conflict(_))));
        // Observers that do not score may share the stream.
        rt.register_policy(Box::new(Recorder { scorer: false, seen: vec![] })).unwrap();
    }

    #[test]
    fn tick_regression_rejected() {
        let mut rt = Runtime::new();
        let h = rt.register_policy(Box::new(Recorder { scorer: false, seen: vec![] })).unwrap();
        rt.dispatch_event(&touch(3)).unwrap();
        rt.dispatch_event(&touch(3)).unwrap();
        assert_eq!(rt.dispatch_event(&touch(2)), Err(Error::Ordering { last: 3, got: 2 }));
        assert_eq!(rt.policy(h).unwrap().state_json(), serde_json::json!([3, 3]));
    }

    #[test]
    fn no_scorer_falls_back_to_recency() {
        let rt = Runtime::new();
        let ctx = ScoreContext { current_tick: 10, oldest_live_tick: 0, now: 0 };
        let b = Block { key: BlockKey(1), agent: None, last_touch: 5, token_count: 16, pinned_until: None };
        assert_eq!(rt.score(&b, &ctx), 0.5);
        assert_eq!(rt.scorer_name(), "lru");
        assert!(rt.predict(1).is_empty());
    }

    #[test]
    fn residual_bounds() {
        let ctx = ScoreContext { current_tick: 20, oldest_live_tick: 10, now: 0 };
        assert_eq!(recency_residual(20, &ctx), 1.0);
        assert_eq!(recency_residual(10, &ctx), 0.0);
        let flat = ScoreContext { current_tick: 10, oldest_live_tick: 10, now: 0 };
        assert_eq!(recency_residual(10, &flat), 1.0);
    }

    #[test]
    fn forecast_argmax_tie_goes_to_smaller_id() {
        let mut f = Forecast::empty(1);
        f.distribution.insert(AgentId(9), 0.5);
        f.distribution.insert(AgentId(3), 0.5);
        assert_eq!(f.argmax(), Some((AgentId(3), 0.5)));
    }
}
