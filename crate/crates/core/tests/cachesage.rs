use std::collections::VecDeque;

use cachesage::baselines::Lru;
use cachesage::bench::hub_dispatches;
use cachesage::cachesage::{exact_survival_prob, rebuild_reachability, TransitionLearner, DEFAULT_TAU};
use cachesage::engine::CacheState;
use cachesage::{
    AgentId, Block, BlockKey, CacheSage, CacheSageConfig, Event, EventKind, Policy, Runtime, SideEffectKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ids(n: usize) -> Vec<AgentId> {
    (0..n).map(|i| AgentId(0x500 + i as u64)).collect()
}

fn dispatch(tick: u64, prev: Option<AgentId>, next: AgentId) -> Event {
    Event::new(tick, tick, EventKind::AgentDispatch { prev, next })
}

/// Fraction of rollouts from `current` that hit `target` within `k` steps.
fn rollout_estimate(
    l: &TransitionLearner,
    target: AgentId,
    k: u32,
    current: AgentId,
    samples: usize,
    seed: u64,
) -> f64 {
    let agents = l.agents().to_vec();
    let rows: Vec<Vec<f64>> =
        agents.iter().map(|&a| agents.iter().map(|&b| l.transition_prob(a, b)).collect()).collect();
    let idx = |a: AgentId| agents.iter().position(|&x| x == a).unwrap();
    let t = idx(target);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..samples {
        let mut s = idx(current);
        if s == t {
            hits += 1;
            continue;
        }
        for _ in 0..k {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut next = s;
            for (j, &p) in rows[s].iter().enumerate() {
                acc += p;
                if u < acc {
                    next = j;
                    break;
                }
            }
            s = next;
            if s == t {
                hits += 1;
                break;
            }
        }
    }
    hits as f64 / samples as f64
}

#[test]
fn exact_survival_matches_rollouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..8 {
        let n = 3 + trial % 4;
        let a = ids(n);
        let mut l = TransitionLearner::new(1 << 20);
        for &x in &a {
            for &y in &a {
                for _ in 0..rng.random_range(0..12) {
                    l.record_transition(x, y);
                }
            }
            l.record_transition(x, a[rng.random_range(0..n)]);
        }
        let target = a[rng.random_range(1..n)];
        let k = rng.random_range(1..=8);
        let exact = exact_survival_prob(target, k, &l, a[0]).unwrap();
        let mc = rollout_estimate(&l, target, k, a[0], 100_000, trial as u64);
        assert!((exact - mc).abs() <= 0.01, "n={n} k={k}: exact {exact} mc {mc}");
    }
}

fn chain_learner(a: &[AgentId], cyclic: bool) -> TransitionLearner {
    let mut l = TransitionLearner::new(1 << 12);
    for _ in 0..3 {
        for w in a.windows(2) {
            l.record_transition(w[0], w[1]);
        }
        if cyclic {
            l.record_transition(a[a.len() - 1], a[0]);
        }
    }
    for &x in a {
        l.intern(x);
    }
    l
}

/// Exact survival summed over horizons `0..=k`: the number of horizons in
/// which the agent has already fired.
fn cumulative_exact(l: &TransitionLearner, target: AgentId, k: u32, current: AgentId) -> f64 {
    (0..=k).map(|h| exact_survival_prob(target, h, l, current).unwrap()).sum()
}

#[test]
fn proxy_order_agrees_with_exact_on_deterministic_chains() {
    for n in 2..=12usize {
        let a = ids(n);
        for cyclic in [true, false] {
            let l = chain_learner(&a, cyclic);
            for &cur in &a {
                let k = n as u32;
                // Default cap: the proxy never inverts the exact order.
                let r = rebuild_reachability(&l, cur, DEFAULT_TAU, 8);
                let p: Vec<f64> = a.iter().map(|&x| r.p_surv[l.index_of(x).unwrap()]).collect();
                let e: Vec<f64> = a.iter().map(|&x| exact_survival_prob(x, k, &l, cur).unwrap()).collect();
                for i in 0..n {
                    for j in 0..n {
                        if p[i] > p[j] {
                            assert!(e[i] >= e[j], "n={n} cyclic={cyclic}: inversion {i} {j}");
                        }
                    }
                }
                // Cap at |A|: strict order equality with the horizon-summed exact value.
                let r = rebuild_reachability(&l, cur, DEFAULT_TAU, n as u32);
                let mut by_proxy: Vec<usize> = (0..n).collect();
                by_proxy.sort_by(|&i, &j| {
                    r.p_surv[l.index_of(a[j]).unwrap()].total_cmp(&r.p_surv[l.index_of(a[i]).unwrap()]).then(i.cmp(&j))
                });
                let c: Vec<f64> = a.iter().map(|&x| cumulative_exact(&l, x, k, cur)).collect();
                let mut by_exact: Vec<usize> = (0..n).collect();
                by_exact.sort_by(|&i, &j| c[j].total_cmp(&c[i]).then(i.cmp(&j)));
                assert_eq!(by_proxy, by_exact, "n={n} cyclic={cyclic}");
            }
        }
    }
}

#[test]
fn twelve_stage_chain_predicts_and_warms_successor() {
    let a = ids(12);
    let mut cs = CacheSage::default();
    let mut tick = 0;
    let mut prev = None;
    for round in 0..7 {
        for &x in &a {
            tick += 1;
            cs.observe(&dispatch(tick, prev, x));
            prev = Some(x);
            if round == 6 {
                let succ = a[(a.iter().position(|&y| y == x).unwrap() + 1) % 12];
                let f = cs.predict(1);
                assert_eq!(f.distribution.len(), 1);
                assert_eq!(f.distribution[&succ], 1.0);
                let fx = cs.poll_actions();
                assert_eq!(fx.len(), 1);
                assert_eq!(fx[0].kind, SideEffectKind::Warmup(succ));
            } else {
                cs.poll_actions();
            }
        }
    }
}

fn random_blocks(rng: &mut ChaCha8Rng, agents: &[Option<AgentId>], n: usize) -> Vec<Block> {
    let mut ticks: Vec<u64> = (1..=4 * n as u64).collect();
    for i in (1..ticks.len()).rev() {
        ticks.swap(i, rng.random_range(0..=i));
    }
    (0..n)
        .map(|i| Block {
            key: BlockKey(rng.random()),
            agent: agents[rng.random_range(0..agents.len())],
            last_touch: ticks[i],
            token_count: 16,
            pinned_until: None,
        })
        .collect()
}

fn victim(runtime: &Runtime, blocks: &[Block], now_tick: u64, pinned: &[BlockKey]) -> BlockKey {
    let mut c = CacheState::new(blocks.len() + 1);
    for b in blocks {
        c.insert(b.clone());
    }
    for &k in pinned {
        c.pin(k);
    }
    c.choose_victim(runtime, &c.score_context(now_tick, 0)).unwrap().0
}

#[test]
fn equal_survival_picks_the_lru_victim() {
    let a = ids(6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..400 {
        // Either a uniform learned graph (every non-current agent one hop
        // away) or no structure at all (everything but the current agent at 0).
        let mut cs = CacheSage::default();
        let mut tick = 0;
        let uniform = case % 2 == 0;
        if uniform {
            for _ in 0..4 {
                for &x in &a {
                    for &y in &a {
                        tick += 1;
                        cs.observe(&dispatch(tick, Some(x), y));
                    }
                }
            }
        }
        tick += 1;
        cs.observe(&dispatch(tick, None, a[0]));
        let pool: Vec<Option<AgentId>> = if uniform {
            a[1..].iter().copied().map(Some).collect()
        } else {
            vec![None, Some(AgentId(0xdead)), Some(AgentId(0xbeef))]
        };
        let surv: Vec<f64> = pool.iter().map(|x| x.map_or(0.0, |y| cs.p_surv(y))).collect();
        assert!(surv.windows(2).all(|w| w[0] == w[1]), "{surv:?}");

        let mut with_cs = Runtime::new();
        with_cs.register_policy(Box::new(cs)).unwrap();
        let mut with_lru = Runtime::new();
        with_lru.register_policy(Box::new(Lru)).unwrap();

        let n = rng.random_range(2..64);
        let blocks = random_blocks(&mut rng, &pool, n);
        let pinned: Vec<BlockKey> = blocks.iter().filter(|_| rng.random_bool(0.2)).map(|b| b.key).take(n - 1).collect();
        let now = 4 * n as u64 + 1;
        assert_eq!(victim(&with_cs, &blocks, now, &pinned), victim(&with_lru, &blocks, now, &pinned), "case {case}");
    }
}

fn hub_state_bytes(agents: usize) -> usize {
    let mut cs = CacheSage::default();
    for (i, (p, n)) in hub_dispatches(agents, 20_000, 5).into_iter().enumerate() {
        cs.observe(&dispatch(i as u64 + 1, (i > 0).then_some(p), n));
    }
    cs.encoded_state().len()
}

#[test]
fn state_stays_within_bounds() {
    let at50 = hub_state_bytes(50);
    let at24 = hub_state_bytes(24);
    assert!(at50 <= 20 * 1024, "{at50} bytes at 50 agents");
    assert!(at24 <= 25 * 1024, "{at24} bytes at 24 agents");
}

#[test]
fn state_accounting_matches_layout() {
    let mut cs = CacheSage::default();
    let a = ids(3);
    cs.observe(&dispatch(1, None, a[0]));
    cs.observe(&dispatch(2, Some(a[0]), a[1]));
    cs.observe(&dispatch(3, Some(a[1]), a[2]));
    // magic + n + capacity, agents, totals, nnz header + 2 entries,
    // window header + 2 pairs, reach tag + anchor + tau + e_max + len + hops + p_surv.
    let want = 4 + 2 + 4 + 3 * 8 + 3 * 8 + 4 + 2 * 12 + 4 + 2 * 4 + 1 + 8 + 8 + 4 + 2 + 3 * 2 + 3 * 8;
    assert_eq!(cs.encoded_state().len(), want);
}

proptest! {
    #[test]
    fn window_counts_match_recount(
        cap in 1usize..40,
        seq in prop::collection::vec((0u64..5, 0u64..5), 0..200),
    ) {
        let mut l = TransitionLearner::new(cap);
        let mut shadow: VecDeque<(AgentId, AgentId)> = VecDeque::new();
        for &(x, y) in &seq {
            let (x, y) = (AgentId(x), AgentId(y));
            l.record_transition(x, y);
            shadow.push_back((x, y));
            if shadow.len() > cap {
                shadow.pop_front();
            }
        }
        for i in 0..5 {
            let a = AgentId(i);
            let total = shadow.iter().filter(|p| p.0 == a).count() as u64;
            prop_assert_eq!(l.row_total(a), total);
            for j in 0..5 {
                let b = AgentId(j);
                let n = shadow.iter().filter(|&&p| p == (a, b)).count() as u64;
                prop_assert_eq!(l.count(a, b), n);
            }
        }
        let window: Vec<_> = l.window_pairs().collect();
        prop_assert_eq!(window, shadow.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn proxy_bounded_and_strictly_decreasing(e_max in 1u32..20) {
        use cachesage::cachesage::survival_proxy;
        for h in 0..40 {
            let p = survival_proxy(h, e_max);
            prop_assert!((0.0..=1.0).contains(&p));
            if h < e_max {
                prop_assert!(survival_proxy(h + 1, e_max) < p);
            } else {
                prop_assert_eq!(p, 0.0);
            }
        }
    }
}

#[test]
fn config_defaults() {
    let c = CacheSageConfig::default();
    assert_eq!(c.tau, 0.01);
    assert_eq!(c.e_max, 8);
    assert_eq!(c.w_pred, 1.0);
    assert_eq!(c.window, 2048);
}
