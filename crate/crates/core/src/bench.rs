//! Hot-path microbenchmark of the agent-aware policy.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cachesage::{CacheSage, CacheSageConfig};
use crate::runtime::{Policy, ScoreContext};
use crate::types::{AgentId, Block, BlockKey, Event, EventKind};

/// Agent-dispatch pairs of a supervisor-style walk: agent 0 is the hub, the
/// others mostly return to it and occasionally hand off to a neighbor.
pub fn hub_dispatches(agents: usize, count: usize, seed: u64) -> Vec<(AgentId, AgentId)> {
    assert!(agents >= 2);
    let id = |i: usize| AgentId(0x1000 + i as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = 0usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let next = if cur == 0 {
            rng.random_range(1..agents)
        } else if rng.random_bool(0.8) {
            0
        } else {
            1 + cur % (agents - 1)
        };
        out.push((id(cur), id(next)));
        cur = next;
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub agents: usize,
    pub touch_calls: u64,
    pub dispatch_calls: u64,
    pub score_calls: u64,
    /// Mean over all observe calls, block touches and dispatches mixed.
    pub observe_ns_mean: f64,
    pub observe_touch_ns_mean: f64,
    pub observe_dispatch_ns_mean: f64,
    pub score_ns_mean: f64,
    pub rebuilds: u64,
    pub agent_changes: u64,
    pub state_bytes: usize,
}

/// Replays a hub walk over `agents` agents, `touches_per_dispatch` block
/// touches after every dispatch, and scores a pool of resident blocks.
pub fn run_bench(agents: usize, dispatches: usize, touches_per_dispatch: usize, seed: u64) -> BenchReport {
    let mut cs = CacheSage::new(CacheSageConfig::default()).expect("default config is valid");
    let walk = hub_dispatches(agents, dispatches, seed);
    let mut tick = 0u64;
    let (mut t_touch, mut t_disp) = (0u128, 0u128);
    let mut n_touch = 0u64;
    for (i, &(prev, next)) in walk.iter().enumerate() {
        tick += 1;
        let ev = Event::new(tick, tick, EventKind::AgentDispatch { prev: (i > 0).then_some(prev), next });
        let s = Instant::now();
        cs.observe(black_box(&ev));
        t_disp += s.elapsed().as_nanos();
        let _ = cs.poll_actions();
        for j in 0..touches_per_dispatch {
            tick += 1;
            let agent = (j < touches_per_dispatch / 2).then_some(next);
            let ev = Event::new(tick, tick, EventKind::BlockTouch { block: BlockKey(tick), agent });
            let s = Instant::now();
            cs.observe(black_box(&ev));
            t_touch += s.elapsed().as_nanos();
            n_touch += 1;
        }
    }
    let pool: Vec<Block> = (0..512u64)
        .map(|i| Block {
            key: BlockKey(i),
            agent: (i % 3 != 0).then(|| AgentId(0x1000 + i % agents as u64)),
            last_touch: tick.saturating_sub(i * 7),
            token_count: 16,
            pinned_until: None,
        })
        .collect();
    let ctx = ScoreContext { current_tick: tick, oldest_live_tick: tick.saturating_sub(4000), now: tick };
    let rounds = 200;
    let s = Instant::now();
    let mut acc = 0.0;
    for _ in 0..rounds {
        for b in &pool {
            acc += cs.score(black_box(b), &ctx);
        }
    }
    black_box(acc);
    let t_score = s.elapsed().as_nanos();
    let n_score = (rounds * pool.len()) as u64;
    let n_disp = walk.len() as u64;
    let stats = cs.cache_stats();
    BenchReport {
        agents,
        touch_calls: n_touch,
        dispatch_calls: n_disp,
        score_calls: n_score,
        observe_ns_mean: (t_touch + t_disp) as f64 / (n_touch + n_disp).max(1) as f64,
        observe_touch_ns_mean: t_touch as f64 / n_touch.max(1) as f64,
        observe_dispatch_ns_mean: t_disp as f64 / n_disp.max(1) as f64,
        score_ns_mean: t_score as f64 / n_score as f64,
        rebuilds: stats.rebuilds,
        agent_changes: stats.agent_changes,
        state_bytes: cs.encoded_state().len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hub_walk_shape() {
        let w = hub_dispatches(10, 1000, 1);
        assert!(w.windows(2).all(|p| p[0].1 == p[1].0));
        assert!(w.iter().all(|&(a, b)| a != b));
    }

    #[test]
    fn small_run() {
        let r = run_bench(8, 200, 4, 3);
        assert_eq!(r.dispatch_calls, 200);
        assert_eq!(r.rebuilds, r.agent_changes);
        assert!(r.state_bytes > 0);
    }
}
