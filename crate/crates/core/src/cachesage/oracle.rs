//! Exact k-step survival probability under the learned chain. Test-scale
//! only: the hot path uses the hop-count proxy instead.

use super::learner::TransitionLearner;
use crate::error::{Error, Result};
use crate::types::AgentId;

pub const ORACLE_MAX_AGENTS: usize = 64;
pub const ORACLE_MAX_STEPS: u32 = 32;

/// Probability that a first-order chain started at `current` visits `target`
/// within `k` steps. Rows with no data keep their mass in place.
///
/// Propagates the state distribution with `target` made absorbing, so the
/// answer is the mass absorbed after `k` steps.
pub fn exact_survival_prob(target: AgentId, k: u32, learner: &TransitionLearner, current: AgentId) -> Result<f64> {
    let n = learner.num_agents();
    if n > ORACLE_MAX_AGENTS || k > ORACLE_MAX_STEPS {
        return Err(Error::Refused(format!(
            "oracle limited to {ORACLE_MAX_AGENTS} agents and {ORACLE_MAX_STEPS} steps (got {n}, {k})"
        )));
    }
    if target == current {
        return Ok(1.0);
    }
    let (Some(t), Some(c)) = (learner.index_of(target), learner.index_of(current)) else {
        return Ok(0.0);
    };
    let mut dist = vec![0.0; n];
    dist[c] = 1.0;
    let mut absorbed = 0.0;
    for _ in 0..k {
        let mut next = vec![0.0; n];
        for (a, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            if learner.row_total_idx(a) == 0 {
                next[a] += mass;
                continue;
            }
            for (b, slot) in next.iter_mut().enumerate() {
                *slot += mass * learner.prob_idx(a, b);
            }
        }
        absorbed += next[t];
        next[t] = 0.0;
        dist = next;
    }
    Ok(absorbed.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: u64) -> (TransitionLearner, Vec<AgentId>) {
        let a: Vec<AgentId> = (0..n).map(AgentId).collect();
        let mut l = TransitionLearner::new(256);
        for w in a.windows(2) {
            l.record_transition(w[0], w[1]);
        }
        (l, a)
    }

    #[test]
    fn deterministic_chain_hops() {
        let (l, a) = chain(4);
        assert_eq!(exact_survival_prob(a[2], 2, &l, a[0]).unwrap(), 1.0);
        assert_eq!(exact_survival_prob(a[2], 1, &l, a[0]).unwrap(), 0.0);
        assert_eq!(exact_survival_prob(a[0], 0, &l, a[0]).unwrap(), 1.0);
        // Terminal agent keeps its mass; nothing flows backwards.
        assert_eq!(exact_survival_prob(a[0], 10, &l, a[3]).unwrap(), 0.0);
    }

    #[test]
    fn two_state_geometric() {
        // a stays with 0.5, moves to b with 0.5: P(visit b within k) = 1 - 0.5^k.
        let (a, b) = (AgentId(1), AgentId(2));
        let mut l = TransitionLearner::new(16);
        l.record_transition(a, a);
        l.record_transition(a, b);
        for k in 0..6 {
            let p = exact_survival_prob(b, k, &l, a).unwrap();
            assert!((p - (1.0 - 0.5f64.powi(k as i32))).abs() < 1e-12);
        }
    }

    #[test]
    fn refuses_large_problems() {
        let (l, a) = chain(3);
        assert!(matches!(exact_survival_prob(a[1], 33, &l, a[0]), Err(Error::Refused(_))));
        let (big, b) = chain(65);
        assert!(matches!(exact_survival_prob(b[1], 2, &big, b[0]), Err(Error::Refused(_))));
    }
}
