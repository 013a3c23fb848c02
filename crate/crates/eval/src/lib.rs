//! End-to-end acceptance checks over the preset workloads. Each check
//! returns a verdict with the measured numbers behind it.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use cachesage::baselines::{lru_score, PolicyKind, PolicySettings};
use cachesage::bench::{hub_dispatches, run_bench};
use cachesage::cachesage::{exact_survival_prob, rebuild_reachability, TransitionLearner, DEFAULT_TAU};
use cachesage::engine::Simulator;
use cachesage::experiment::{engine_for, prepare_workload, run_policy};
use cachesage::metrics::RunMetrics;
use cachesage::workloads::{
    compute_entropy_reduction, generate_trace, measure_trace, preset, preset_workloads, uniform_workload, WorkloadSpec,
};
use cachesage::{AgentId, Block, BlockKey, CacheSage, Event, EventKind, Forecast, Policy, ScoreContext, SideEffect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const SUPERVISORS: [&str; 4] = ["supervisor-a", "supervisor-b", "supervisor-c", "supervisor-d"];

pub struct Verdict {
    pub ok: bool,
    pub detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

/// Every preset under every policy at its paired engine settings.
struct Grid {
    specs: Vec<WorkloadSpec>,
    /// `cells[w][p]` follows `PolicyKind::ALL`.
    cells: Vec<Vec<RunMetrics>>,
    slowest_cell_s: f64,
}

impl Grid {
    fn get(&self, w: usize, kind: PolicyKind) -> &RunMetrics {
        &self.cells[w][PolicyKind::ALL.iter().position(|&k| k == kind).unwrap()]
    }
}

fn run_grid() -> Grid {
    let specs = preset_workloads();
    let settings = PolicySettings::default();
    let timed: Vec<Vec<(RunMetrics, f64)>> = specs
        .par_iter()
        .map(|spec| {
            let e = engine_for(spec);
            let p = prepare_workload(spec, &e, &settings).unwrap();
            PolicyKind::ALL
                .par_iter()
                .map(|&k| {
                    let t = Instant::now();
                    let m = run_policy(&p, &e, k, &settings).unwrap().metrics;
                    (m, t.elapsed().as_secs_f64())
                })
                .collect()
        })
        .collect();
    let slowest_cell_s = timed.iter().flatten().map(|c| c.1).fold(0.0, f64::max);
    let cells = timed.into_iter().map(|row| row.into_iter().map(|c| c.0).collect()).collect();
    Grid { specs, cells, slowest_cell_s }
}

fn lift(g: &Grid) -> Verdict {
    let mut ok = g.slowest_cell_s < 60.0;
    let mut parts = Vec::new();
    for (w, spec) in g.specs.iter().enumerate() {
        let d = 100.0 * (g.get(w, PolicyKind::CacheSage).hit_rate - g.get(w, PolicyKind::Lru).hit_rate);
        ok &= d >= 10.0;
        parts.push(format!("{} {:+.1}pp", spec.name, d));
    }
    verdict(ok, format!("{}; slowest cell {:.1}s", parts.join(", "), g.slowest_cell_s))
}

fn sandwich(g: &Grid) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (w, spec) in g.specs.iter().enumerate() {
        let (l, c, b) = (
            g.get(w, PolicyKind::Lru).hit_rate,
            g.get(w, PolicyKind::CacheSage).hit_rate,
            g.get(w, PolicyKind::Belady).hit_rate,
        );
        ok &= l <= c && c <= b;
        parts.push(format!("{} {:.3}<={:.3}<={:.3}", spec.name, l, c, b));
    }
    verdict(ok, parts.join(", "))
}

fn ttft(g: &Grid) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (w, spec) in g.specs.iter().enumerate() {
        let (l, c) = (g.get(w, PolicyKind::Lru), g.get(w, PolicyKind::CacheSage));
        let per_token_ms = engine_for(spec).cost.prefill_per_token_us as f64 / 1e3;
        let mean_prompt = l.prompt_tokens as f64 / l.turns as f64;
        let slope = (l.mean_ttft_ms - c.mean_ttft_ms) / (c.hit_rate - l.hit_rate);
        let model = per_token_ms * mean_prompt;
        let err = (slope / model - 1.0).abs();
        ok &= c.mean_ttft_ms <= l.mean_ttft_ms && err <= 0.10;
        parts.push(format!(
            "{} {:.1}->{:.1}ms slope/model {:.3}",
            spec.name,
            l.mean_ttft_ms,
            c.mean_ttft_ms,
            slope / model
        ));
    }
    verdict(ok, parts.join(", "))
}

fn ttl_direction(g: &Grid) -> Verdict {
    let horizon_ms = PolicySettings::default().ttl.pin_horizon_ms;
    let mut below = 0;
    let mut parts = Vec::new();
    let mut horizon_ok = true;
    for name in SUPERVISORS {
        let w = g.specs.iter().position(|s| s.name == name).unwrap();
        horizon_ok &= horizon_ms > f64::from(g.specs[w].tool_ms.max);
        let (l, t) = (g.get(w, PolicyKind::Lru).hit_rate, g.get(w, PolicyKind::Ttl).hit_rate);
        if t <= l {
            below += 1;
        }
        parts.push(format!("{name} {:+.1}pp", 100.0 * (t - l)));
    }
    verdict(horizon_ok && below >= 3, format!("ttl-lru {}; {below}/4 at or below lru", parts.join(", ")))
}

/// One scored candidate: block, survival term, cachesage score, LRU score.
type Scored = (Block, f64, f64, f64);
type Rounds = Arc<Mutex<Vec<(ScoreContext, Vec<Scored>)>>>;

/// Scores every eviction consult, so victims can be compared with LRU's.
struct Recording {
    inner: CacheSage,
    rounds: Rounds,
}

impl Policy for Recording {
    fn name(&self) -> &str {
        "cachesage"
    }
    fn observe(&mut self, event: &Event) {
        self.inner.observe(event)
    }
    fn score(&self, block: &Block, ctx: &ScoreContext) -> f64 {
        let s = self.inner.score(block, ctx);
        let p = block.agent.map_or(0.0, |a| self.inner.p_surv(a));
        let mut r = self.rounds.lock().unwrap();
        if r.last().is_none_or(|(c, _)| c != ctx) {
            r.push((*ctx, Vec::new()));
        }
        r.last_mut().unwrap().1.push((block.clone(), p, s, lru_score(block, ctx)));
        s
    }
    fn predict(&self, horizon: u32) -> Forecast {
        self.inner.predict(horizon)
    }
    fn poll_actions(&mut self) -> Vec<SideEffect> {
        self.inner.poll_actions()
    }
}

fn first_min(xs: &[Scored], by: impl Fn(&Scored) -> f64) -> BlockKey {
    let mut best = 0;
    for i in 1..xs.len() {
        if by(&xs[i]) < by(&xs[best]) {
            best = i;
        }
    }
    xs[best].0.key
}

fn lru_fallback() -> Verdict {
    let spec = uniform_workload(6, 50, 1);
    let e = engine_for(&spec);
    let settings = PolicySettings::default();
    let p = prepare_workload(&spec, &e, &settings).unwrap();
    let rounds = Arc::new(Mutex::new(Vec::new()));
    let mut sim = Simulator::new(e.clone(), Arc::clone(&p)).unwrap();
    sim.register_policy(Box::new(Recording {
        inner: CacheSage::new(settings.cachesage).unwrap(),
        rounds: Arc::clone(&rounds),
    }))
    .unwrap();
    let out = sim.run().unwrap();
    let rounds = rounds.lock().unwrap();
    let mut consistent = rounds.len() == out.victims.len();
    let (mut equal_cases, mut equal_match) = (0, 0);
    for ((_, cands), &victim) in rounds.iter().zip(&out.victims) {
        consistent &= first_min(cands, |c| c.2) == victim;
        if cands.iter().all(|c| c.1 == cands[0].1) {
            equal_cases += 1;
            if first_min(cands, |c| c.3) == victim {
                equal_match += 1;
            }
        }
    }
    let lru = run_policy(&p, &e, PolicyKind::Lru, &settings).unwrap().metrics.hit_rate;
    let gap = 100.0 * (out.metrics.hit_rate - lru);
    let r = compute_entropy_reduction(&generate_trace(&spec).unwrap()).unwrap();
    verdict(
        consistent && equal_match == equal_cases && gap.abs() <= 1.0,
        format!(
            "uniform-6 R={r:.3}: equal-survival evictions matching lru {equal_match}/{equal_cases}; hit rate {:.3} vs lru {:.3} ({gap:+.1}pp, bound 1pp)",
            out.metrics.hit_rate, lru
        ),
    )
}

fn chain(n: usize, cyclic: bool) -> (TransitionLearner, Vec<AgentId>) {
    let a: Vec<AgentId> = (0..n as u64).map(|i| AgentId(0x900 + i)).collect();
    let mut l = TransitionLearner::new(1 << 12);
    for w in a.windows(2) {
        l.record_transition(w[0], w[1]);
    }
    if cyclic {
        l.record_transition(a[n - 1], a[0]);
    }
    for &x in &a {
        l.intern(x);
    }
    (l, a)
}

fn proxy_correctness() -> Verdict {
    // On a deterministic chain every reachable agent fires within |A| steps,
    // so the exact values at k = |A| only separate reachable from not. The
    // strict order is compared against exact survival summed over 0..=k.
    let mut order_ok = true;
    for n in 2..=12 {
        for cyclic in [true, false] {
            let (l, a) = chain(n, cyclic);
            let k = n as u32;
            for &cur in &a {
                let r = rebuild_reachability(&l, cur, DEFAULT_TAU, 8);
                let p: Vec<f64> = a.iter().map(|&x| r.p_surv[l.index_of(x).unwrap()]).collect();
                let e: Vec<f64> = a.iter().map(|&x| exact_survival_prob(x, k, &l, cur).unwrap()).collect();
                for i in 0..n {
                    for j in 0..n {
                        order_ok &= !(p[i] > p[j] && e[i] < e[j]);
                    }
                }
                let r = rebuild_reachability(&l, cur, DEFAULT_TAU, k);
                let c: Vec<f64> =
                    a.iter().map(|&x| (0..=k).map(|h| exact_survival_prob(x, h, &l, cur).unwrap()).sum()).collect();
                let mut by_proxy: Vec<usize> = (0..n).collect();
                by_proxy.sort_by(|&i, &j| {
                    r.p_surv[l.index_of(a[j]).unwrap()].total_cmp(&r.p_surv[l.index_of(a[i]).unwrap()]).then(i.cmp(&j))
                });
                let mut by_exact: Vec<usize> = (0..n).collect();
                by_exact.sort_by(|&i, &j| c[j].total_cmp(&c[i]).then(i.cmp(&j)));
                order_ok &= by_proxy == by_exact;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..8 {
        let n = 3 + trial % 4;
        let a: Vec<AgentId> = (0..n as u64).map(AgentId).collect();
        let mut l = TransitionLearner::new(1 << 20);
        let mut rows = vec![vec![0u32; n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            for c in row.iter_mut() {
                *c = rng.random_range(0..10);
            }
            row[rng.random_range(0..n)] += 1;
            for (j, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    l.record_transition(a[i], a[j]);
                }
            }
        }
        let target = rng.random_range(1..n);
        let k = rng.random_range(1..=8u32);
        let exact = exact_survival_prob(a[target], k, &l, a[0]).unwrap();
        let samples = 100_000;
        let mut hits = 0;
        for _ in 0..samples {
            let mut s = 0;
            for _ in 0..k {
                let total: u32 = rows[s].iter().sum();
                let mut u = rng.random_range(0..total);
                let mut next = 0;
                while u >= rows[s][next] {
                    u -= rows[s][next];
                    next += 1;
                }
                s = next;
                if s == target {
                    hits += 1;
                    break;
                }
            }
        }
        worst = worst.max((exact - hits as f64 / samples as f64).abs());
    }
    verdict(
        order_ok && worst <= 0.01,
        format!("chains 2..12 order agreement {order_ok}; worst rollout gap {worst:.4} (bound 0.01)"),
    )
}

fn measurement() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [2, 5, 12] {
        let mut spec = preset("synthetic-chain").unwrap();
        spec.agents.truncate(n);
        spec.transition = (0..n).map(|i| (0..n).map(|j| if j == (i + 1) % n { 1.0 } else { 0.0 }).collect()).collect();
        let r = compute_entropy_reduction(&generate_trace(&spec).unwrap()).unwrap();
        ok &= r == 1.0;
    }
    parts.push("cycles R=1".to_string());
    let uni = generate_trace(&uniform_workload(6, 600, 7)).unwrap();
    let r = compute_entropy_reduction(&uni).unwrap();
    ok &= uni.num_turns() >= 10_000 && r <= 0.02;
    parts.push(format!("uniform {} turns R={r:.4}", uni.num_turns()));
    for spec in preset_workloads() {
        let m = measure_trace(&generate_trace(&spec).unwrap()).unwrap();
        ok &= (0.34..=0.52).contains(&m.first_turn_phi);
        if SUPERVISORS.contains(&spec.name.as_str()) {
            ok &= (0.37..=0.51).contains(&m.entropy_reduction);
        }
        parts.push(format!("{} phi={:.3} R={:.3}", spec.name, m.first_turn_phi, m.entropy_reduction));
    }
    verdict(ok, parts.join(", "))
}

fn state_bytes(agents: usize) -> usize {
    let mut cs = CacheSage::default();
    for (i, (p, n)) in hub_dispatches(agents, 20_000, 1).into_iter().enumerate() {
        cs.observe(&Event::new(i as u64 + 1, 0, EventKind::AgentDispatch { prev: (i > 0).then_some(p), next: n }));
    }
    cs.encoded_state().len()
}

fn state_bound() -> Verdict {
    let (b50, b24) = (state_bytes(50), state_bytes(24));
    verdict(
        b50 <= 20 * 1024 && b24 <= 25 * 1024,
        format!("{b50} B at 50 agents (bound 20 KB), {b24} B at 24 (bound 25 KB)"),
    )
}

fn hot_path() -> Verdict {
    let r = run_bench(50, 20_000, 8, 1);
    let (obs, score) = (r.observe_ns_mean / 1e3, r.score_ns_mean / 1e3);
    verdict(
        obs <= 10.0 && score <= 10.0 && r.rebuilds == r.agent_changes,
        format!(
            "observe {obs:.3}us, score {score:.3}us, rebuilds {} for {} agent changes",
            r.rebuilds, r.agent_changes
        ),
    )
}

/// Serialized output of one cell: metrics, per-turn records, event log,
/// victims and policy stats.
fn cell_bytes(spec: &WorkloadSpec, kind: PolicyKind) -> Vec<u8> {
    let settings = PolicySettings::default();
    let mut e = engine_for(spec);
    e.record_events = true;
    let p = prepare_workload(spec, &e, &settings).unwrap();
    let out = run_policy(&p, &e, kind, &settings).unwrap();
    let mut b = serde_json::to_vec(&out.metrics).unwrap();
    for t in &out.turns {
        b.extend(serde_json::to_vec(t).unwrap());
    }
    for r in &out.log {
        b.extend(serde_json::to_vec(r).unwrap());
    }
    b.extend(out.victims.iter().flat_map(|k| k.0.to_le_bytes()));
    b.extend(serde_json::to_vec(&out.policy_stats).unwrap());
    b
}

fn determinism() -> Verdict {
    let cells: Vec<(WorkloadSpec, PolicyKind)> =
        preset_workloads().into_iter().flat_map(|s| PolicyKind::ALL.map(|k| (s.clone(), k))).collect();
    let same: Vec<bool> = cells.par_iter().map(|(s, k)| cell_bytes(s, *k) == cell_bytes(s, *k)).collect();
    let n = same.iter().filter(|&&x| x).count();
    verdict(n == cells.len(), format!("{n}/{} cells reproduce byte for byte from a fresh trace", cells.len()))
}

/// Runs every check in criterion order.
pub fn run_all() -> Vec<(&'static str, Verdict)> {
    let grid = run_grid();
    vec![
        ("hit-rate lift >= 10pp on every preset", lift(&grid)),
        ("lru <= cachesage <= belady", sandwich(&grid)),
        ("lru fallback on uniform routing", lru_fallback()),
        ("ttft follows the cost model", ttft(&grid)),
        ("ttl at or below lru", ttl_direction(&grid)),
        ("survival proxy correctness", proxy_correctness()),
        ("measurement ops and preset bands", measurement()),
        ("state bound", state_bound()),
        ("hot-path cost", hot_path()),
        ("determinism", determinism()),
    ]
}
