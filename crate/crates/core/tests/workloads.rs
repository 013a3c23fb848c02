use cachesage::cachesage::{TransitionLearner, DEFAULT_TAU};
use cachesage::types::AgentId;
use cachesage::workloads::{
    compute_entropy_reduction, empirical_transitions, generate_trace, measure_trace, preset, preset_workloads,
    read_trace, uniform_workload, write_trace, AgentSpec, Trace, TurnRange, WorkloadSpec,
};

const SUPERVISORS: [&str; 4] = ["supervisor-a", "supervisor-b", "supervisor-c", "supervisor-d"];

fn two_state(stay: f64, sessions: u32) -> WorkloadSpec {
    WorkloadSpec {
        name: "two-state".into(),
        agents: vec![
            AgentSpec { label: "a".into(), anchor_tokens: 64 },
            AgentSpec { label: "b".into(), anchor_tokens: 64 },
        ],
        transition: vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]],
        supervisor: None,
        turns_per_session: TurnRange { min: 50, max: 50 },
        sessions,
        task_tokens: 16,
        history_growth: 4,
        template_tokens: 16,
        decode_tokens: 4,
        tool_ms: TurnRange { min: 0, max: 0 },
        concurrency: 1,
        budget: 64,
        seed: 17,
    }
}

/// Plug-in conditional-entropy estimate straight from adjacent label pairs.
fn entropy_reduction_from_pairs(trace: &Trace) -> f64 {
    use std::collections::HashMap;
    let mut pairs: HashMap<(&str, &str), f64> = HashMap::new();
    let mut next: HashMap<&str, f64> = HashMap::new();
    let mut cur: HashMap<&str, f64> = HashMap::new();
    let mut n = 0.0;
    for seq in trace.agent_sequences() {
        for w in seq.windows(2) {
            *pairs.entry((w[0], w[1])).or_default() += 1.0;
            *next.entry(w[1]).or_default() += 1.0;
            *cur.entry(w[0]).or_default() += 1.0;
            n += 1.0;
        }
    }
    let h_next: f64 = next.values().map(|c| -(c / n) * (c / n).log2()).sum();
    let h_cond: f64 = pairs.iter().map(|((a, _), c)| -(c / n) * (c / cur[a]).log2()).sum();
    1.0 - h_cond / h_next
}

#[test]
fn chain_follows_its_cycle() {
    let t = generate_trace(&preset("synthetic-chain").unwrap()).unwrap();
    let n = t.agents.len();
    for s in &t.sessions {
        assert_eq!(s.turns[0].agent, 0);
        for w in s.turns.windows(2) {
            assert_eq!(w[1].agent, (w[0].agent + 1) % n);
        }
    }
    assert_eq!(compute_entropy_reduction(&t).unwrap(), 1.0);
}

#[test]
fn uniform_routing_carries_no_information() {
    let spec = uniform_workload(6, 500, 3);
    let t = generate_trace(&spec).unwrap();
    assert!(t.num_turns() >= 10_000, "{} turns", t.num_turns());
    let r = compute_entropy_reduction(&t).unwrap();
    assert!(r <= 0.02, "R = {r}");
}

#[test]
fn two_state_matches_pair_count_estimate() {
    let t = generate_trace(&two_state(0.9, 200)).unwrap();
    let got = compute_entropy_reduction(&t).unwrap();
    let want = entropy_reduction_from_pairs(&t);
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    // Closed form for the symmetric chain: 1 - H_b(0.9) bits.
    let hb = -(0.9f64 * 0.9f64.log2() + 0.1 * 0.1f64.log2());
    assert!((got - (1.0 - hb)).abs() < 0.02, "{got} vs {}", 1.0 - hb);
}

#[test]
fn phi_falls_with_depth() {
    for name in SUPERVISORS.iter().chain(["synthetic-chain"].iter()) {
        let r = measure_trace(&generate_trace(&preset(name).unwrap()).unwrap()).unwrap();
        assert!(r.phi_by_depth.windows(2).all(|w| w[1] < w[0] + 0.02), "{name}: {:?}", r.phi_by_depth);
        assert!(r.phi_by_depth.last().unwrap() < &(r.phi_by_depth[0] * 0.7), "{name}");
    }
}

#[test]
fn supervisor_presets_land_in_measured_bands() {
    for name in SUPERVISORS {
        let r = measure_trace(&generate_trace(&preset(name).unwrap()).unwrap()).unwrap();
        assert!((0.34..=0.52).contains(&r.first_turn_phi), "{name}: phi {}", r.first_turn_phi);
        assert!((0.37..=0.51).contains(&r.entropy_reduction), "{name}: R {}", r.entropy_reduction);
    }
}

#[test]
fn some_edge_varies_across_supervisor_presets() {
    let mats: Vec<Vec<Vec<f64>>> = SUPERVISORS.iter().map(|n| preset(n).unwrap().transition).collect();
    let n = mats[0].len();
    let widest = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let v: Vec<f64> = mats.iter().map(|m| m[i][j]).collect();
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        })
        .fold(0.0, f64::max);
    assert!(widest >= 0.4, "widest spread {widest}");
}

#[test]
fn empirical_rows_converge_to_spec() {
    for name in SUPERVISORS {
        let mut spec = preset(name).unwrap();
        spec.sessions = 4000;
        let emp = empirical_transitions(&generate_trace(&spec).unwrap());
        for (i, (row, want)) in emp.iter().zip(&spec.transition).enumerate() {
            let tv: f64 = row.iter().zip(want).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            assert!(tv <= 0.02, "{name} row {i}: TV {tv}");
        }
    }
}

#[test]
fn threshold_keeps_almost_all_transition_mass() {
    for spec in preset_workloads() {
        let t = generate_trace(&spec).unwrap();
        let mut l = TransitionLearner::new(usize::MAX >> 8);
        for s in &t.sessions {
            for w in s.turns.windows(2) {
                l.record_transition(AgentId(w[0].agent as u64), AgentId(w[1].agent as u64));
            }
        }
        for &a in l.agents() {
            let kept: f64 = l.row(a).iter().map(|&(_, p)| p).filter(|&p| p >= DEFAULT_TAU).sum();
            assert!(kept >= 0.99, "{}: agent {a} keeps {kept}", spec.name);
        }
    }
}

#[test]
fn trace_file_round_trip() {
    let mut spec = preset("supervisor-b").unwrap();
    spec.sessions = 5;
    let t = generate_trace(&spec).unwrap();
    let mut buf = Vec::new();
    write_trace(&t, &mut buf).unwrap();
    assert_eq!(read_trace(buf.as_slice()).unwrap(), t);
}
