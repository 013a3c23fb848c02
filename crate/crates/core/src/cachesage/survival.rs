//! Hop-count survival proxy on the thresholded transition graph.
//!
//! Edges keep every transition whose MLE probability reaches `tau`. One BFS
//! from the current agent gives hop counts `E[a]`, and
//! `p_surv(a) = 1 - min(E[a], e_max) / e_max`. Agents the BFS does not reach
//! sit at `e_max` and score zero. The graph may contain cycles; BFS does not
//! care.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::learner::TransitionLearner;
use crate::error::{Error, Result};
use crate::types::AgentId;

pub const DEFAULT_TAU: f64 = 0.01;
pub const DEFAULT_E_MAX: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityState {
    pub tau: f64,
    pub e_max: u32,
    pub anchor_agent: AgentId,
    /// Indexed like the learner's alphabet at rebuild time.
    pub hop_counts: Vec<u32>,
    pub p_surv: Vec<f64>,
}

impl ReachabilityState {
    /// Proxy for the agent at learner index `i`; agents added after the last
    /// rebuild count as unreachable.
    #[inline]
    pub fn p_surv_idx(&self, i: usize) -> f64 {
        self.p_surv.get(i).copied().unwrap_or(0.0)
    }

    pub fn hops_idx(&self, i: usize) -> u32 {
        self.hop_counts.get(i).copied().unwrap_or(self.e_max)
    }
}

/// `1 - min(hops, e_max) / e_max`.
#[inline]
pub fn survival_proxy(hops: u32, e_max: u32) -> f64 {
    1.0 - f64::from(hops.min(e_max)) / f64::from(e_max)
}

pub fn validate_params(tau: f64, e_max: u32) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Validation(format!("tau must lie in [0, 1], got {tau}")));
    }
    if e_max == 0 {
        return Err(Error::Validation("e_max must be at least 1".into()));
    }
    Ok(())
}

/// BFS from `current` over edges with `P(b|a) >= tau`. O(|A|^2) on the dense
/// count matrix, which is O(|A| + |E|) for the dense graphs it sees.
pub fn rebuild_reachability(learner: &TransitionLearner, current: AgentId, tau: f64, e_max: u32) -> ReachabilityState {
    let n = learner.num_agents();
    let mut hops = vec![e_max; n];
    if let Some(src) = learner.index_of(current) {
        hops[src] = 0;
        let mut queue = VecDeque::with_capacity(n);
        queue.push_back(src);
        while let Some(a) = queue.pop_front() {
            let next_hop = hops[a] + 1;
            if next_hop >= e_max {
                // Anything further would land on the cap anyway.
                continue;
            }
            let total = learner.row_total_idx(a);
            if total == 0 {
                continue;
            }
            for (b, hop) in hops.iter_mut().enumerate() {
                let c = learner.count_idx(a, b);
                if c == 0 || *hop <= next_hop {
                    continue;
                }
                if c as f64 / total as f64 >= tau {
                    *hop = next_hop;
                    queue.push_back(b);
                }
            }
        }
    }
    let p_surv = hops.iter().map(|&h| survival_proxy(h, e_max)).collect();
    ReachabilityState { tau, e_max, anchor_agent: current, hop_counts: hops, p_surv }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: u64) -> Vec<AgentId> {
        (0..n).map(|i| AgentId(100 + i)).collect()
    }

    #[test]
    fn three_cycle() {
        let a = ids(3);
        let mut l = TransitionLearner::new(64);
        for _ in 0..4 {
            l.record_transition(a[0], a[1]);
            l.record_transition(a[1], a[2]);
            l.record_transition(a[2], a[0]);
        }
        let r = rebuild_reachability(&l, a[0], DEFAULT_TAU, 8);
        assert_eq!(r.p_surv, vec![1.0, 0.875, 0.75]);
        assert_eq!(r.hop_counts, vec![0, 1, 2]);
    }

    #[test]
    fn no_data_only_current_survives() {
        let a = ids(3);
        let mut l = TransitionLearner::new(64);
        for &x in &a {
            l.intern(x);
        }
        let r = rebuild_reachability(&l, a[1], DEFAULT_TAU, 8);
        assert_eq!(r.p_surv, vec![0.0, 1.0, 0.0]);
        assert_eq!(r.hop_counts, vec![8, 0, 8]);
    }

    #[test]
    fn uniform_four_agents_all_one_hop() {
        // Complete graph: every non-current agent is one hop away.
        let a = ids(4);
        let mut l = TransitionLearner::new(1024);
        for _ in 0..5 {
            for &x in &a {
                for &y in &a {
                    l.record_transition(x, y);
                }
            }
        }
        let r = rebuild_reachability(&l, a[2], DEFAULT_TAU, 8);
        for (i, &p) in r.p_surv.iter().enumerate() {
            assert_eq!(p, if i == 2 { 1.0 } else { 0.875 });
        }
    }

    #[test]
    fn threshold_drops_rare_edges() {
        let a = ids(3);
        let mut l = TransitionLearner::new(1024);
        for _ in 0..199 {
            l.record_transition(a[0], a[1]);
        }
        l.record_transition(a[0], a[2]); // 0.005 < tau
        let r = rebuild_reachability(&l, a[0], DEFAULT_TAU, 8);
        assert_eq!(r.hop_counts, vec![0, 1, 8]);
        let r = rebuild_reachability(&l, a[0], 0.001, 8);
        assert_eq!(r.hop_counts, vec![0, 1, 1]);
    }

    #[test]
    fn unknown_current_leaves_everything_unreachable() {
        let a = ids(2);
        let mut l = TransitionLearner::new(8);
        l.record_transition(a[0], a[1]);
        let r = rebuild_reachability(&l, AgentId(5), DEFAULT_TAU, 8);
        assert_eq!(r.p_surv, vec![0.0, 0.0]);
    }

    #[test]
    fn proxy_monotone_and_bounded() {
        let mut prev = f64::INFINITY;
        for h in 0..=8 {
            let p = survival_proxy(h, 8);
            assert!((0.0..=1.0).contains(&p));
            assert!(p < prev);
            prev = p;
        }
        assert_eq!(survival_proxy(20, 8), 0.0);
    }
}
