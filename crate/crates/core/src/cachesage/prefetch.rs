use serde::{Deserialize, Serialize};

use super::learner::TransitionLearner;
use crate::error::{Error, Result};
use crate::types::AgentId;

/// Conditions under which a warmup of the predicted next agent is issued.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrefetchGate {
    /// Minimum `P(a* | current)` of the argmax successor.
    pub min_confidence: f64,
    /// Minimum row count `n(current)` before the row is trusted.
    pub min_row_count: u64,
    /// Warmups allowed between two scheduler steps; 0 disables prefetch.
    pub budget_per_step: u32,
}

impl Default for PrefetchGate {
    fn default() -> Self {
        Self { min_confidence: 0.5, min_row_count: 5, budget_per_step: 1 }
    }
}

impl PrefetchGate {
    pub fn disabled() -> Self {
        Self { budget_per_step: 0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_confidence >= 0.0 && self.min_confidence.is_finite()) {
            return Err(Error::Validation("gate min_confidence must be a finite non-negative number".into()));
        }
        Ok(())
    }
}

/// Agent to warm after a dispatch to `current`, if the gate lets it through.
pub fn prefetch_target(
    learner: &TransitionLearner,
    current: AgentId,
    gate: &PrefetchGate,
    issued_this_step: u32,
) -> Option<AgentId> {
    if issued_this_step >= gate.budget_per_step {
        return None;
    }
    if learner.row_total(current) < gate.min_row_count {
        return None;
    }
    let (next, p) = learner.argmax(current)?;
    (p >= gate.min_confidence).then_some(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_chain_passes() {
        let (a, b) = (AgentId(1), AgentId(2));
        let mut l = TransitionLearner::new(64);
        for _ in 0..5 {
            l.record_transition(a, b);
        }
        assert_eq!(prefetch_target(&l, a, &PrefetchGate::default(), 0), Some(b));
        assert_eq!(prefetch_target(&l, a, &PrefetchGate::default(), 1), None);
    }

    #[test]
    fn row_count_gate() {
        let (a, b) = (AgentId(1), AgentId(2));
        let mut l = TransitionLearner::new(64);
        for _ in 0..4 {
            l.record_transition(a, b);
        }
        assert_eq!(prefetch_target(&l, a, &PrefetchGate::default(), 0), None);
    }

    #[test]
    fn uniform_six_below_confidence() {
        let agents: Vec<AgentId> = (0..6).map(AgentId).collect();
        let mut l = TransitionLearner::new(1024);
        for _ in 0..10 {
            for &x in &agents {
                for &y in &agents {
                    l.record_transition(x, y);
                }
            }
        }
        for &x in &agents {
            assert_eq!(prefetch_target(&l, x, &PrefetchGate::default(), 0), None);
        }
    }

    #[test]
    fn zero_budget_never_fires() {
        let (a, b) = (AgentId(1), AgentId(2));
        let mut l = TransitionLearner::new(64);
        for _ in 0..50 {
            l.record_transition(a, b);
        }
        assert_eq!(prefetch_target(&l, a, &PrefetchGate::disabled(), 0), None);
    }
}
