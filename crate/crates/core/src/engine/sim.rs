use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cache::CacheState;
use super::cost::CostModel;
use super::log::{EngineRecord, LogRecord, WarmupOutcome};
use super::prepared::PreparedTrace;
use crate::error::{Error, Result};
use crate::metrics::{RunMetrics, TurnRecord, WarmupStats};
use crate::runtime::{Policy, PolicyHandle, Runtime, SideEffect, SideEffectKind};
use crate::types::{AgentId, Block, BlockKey, Event, EventKind, RequestId, SimTime, Tick};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Resident block capacity.
    pub budget: usize,
    pub block_size: usize,
    /// Sessions served at once.
    pub concurrency: usize,
    pub cost: CostModel,
    /// Keep every event in memory for `events.jsonl`.
    pub record_events: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { budget: 120, block_size: 16, concurrency: 4, cost: CostModel::default(), record_events: false }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Validation("engine budget must be at least one block".into()));
        }
        if self.block_size == 0 {
            return Err(Error::Validation("block_size must be positive".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Validation("concurrency must be positive".into()));
        }
        self.cost.validate()
    }
}

#[derive(Debug, Clone)]
struct Ready {
    turn: usize,
    ready_at: SimTime,
}

#[derive(Debug, Clone)]
struct InFlight {
    turn: usize,
    ready_at: SimTime,
    start: SimTime,
    finish: SimTime,
    ttft_us: SimTime,
    cached_tokens: u64,
    admission_error: bool,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub policy: String,
    pub metrics: RunMetrics,
    pub turns: Vec<TurnRecord>,
    /// Empty unless `record_events` was set.
    pub log: Vec<LogRecord>,
    /// Evicted keys in eviction order.
    pub victims: Vec<BlockKey>,
    pub policy_stats: serde_json::Value,
}

/// Discrete-event prefix-cache serving simulator.
pub struct Simulator {
    cfg: EngineConfig,
    trace: Arc<PreparedTrace>,
    runtime: Runtime,
    cache: CacheState,
    now: SimTime,
    tick: Tick,
    started: bool,
    next_session: usize,
    active_sessions: usize,
    /// Position of each active session's next turn, by session index.
    cursor: Vec<usize>,
    ready: VecDeque<Ready>,
    /// Sessions whose next turn waits on tool work.
    tooling: Vec<Ready>,
    in_flight: Vec<InFlight>,
    records: Vec<TurnRecord>,
    log: Vec<LogRecord>,
    victims: Vec<BlockKey>,
    evictions: u64,
    events: u64,
    warmups: WarmupStats,
    warmup_seq: u64,
    background_us: SimTime,
}

impl Simulator {
    pub fn new(cfg: EngineConfig, trace: Arc<PreparedTrace>) -> Result<Self> {
        cfg.validate()?;
        if trace.block_size != cfg.block_size {
            return Err(Error::InvalidArgument(format!(
                "trace prepared with block size {}, engine uses {}",
                trace.block_size, cfg.block_size
            )));
        }
        let n = trace.sessions.len();
        Ok(Self {
            cache: CacheState::new(cfg.budget),
            cfg,
            trace,
            runtime: Runtime::new(),
            now: 0,
            tick: 0,
            started: false,
            next_session: 0,
            active_sessions: 0,
            cursor: vec![0; n],
            ready: VecDeque::new(),
            tooling: Vec::new(),
            in_flight: Vec::new(),
            records: Vec::new(),
            log: Vec::new(),
            victims: Vec::new(),
            evictions: 0,
            events: 0,
            warmups: WarmupStats::default(),
            warmup_seq: 0,
            background_us: 0,
        })
    }

    pub fn register_policy(&mut self, policy: Box<dyn Policy>) -> Result<PolicyHandle> {
        self.runtime.register_policy(policy)
    }

    pub fn runtime(&self) -> &Runtime {
        &self.runtime
    }

    pub fn cache(&self) -> &CacheState {
        &self.cache
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn tick(&self) -> Tick {
        self.tick
    }

    pub fn warmup_stats(&self) -> &WarmupStats {
        &self.warmups
    }

    pub fn victims(&self) -> &[BlockKey] {
        &self.victims
    }

    pub fn is_done(&self) -> bool {
        self.started
            && self.in_flight.is_empty()
            && self.ready.is_empty()
            && self.tooling.is_empty()
            && self.next_session == self.trace.sessions.len()
    }

    fn emit(&mut self, kind: EventKind) -> Result<Tick> {
        self.tick += 1;
        let ev = Event::new(self.tick, self.now, kind);
        self.runtime.dispatch_event(&ev)?;
        self.events += 1;
        if self.cfg.record_events {
            self.log.push(LogRecord::Event(ev));
        }
        Ok(self.tick)
    }

    fn engine_log(&mut self, rec: EngineRecord) {
        if self.cfg.record_events {
            self.log.push(LogRecord::Engine(rec));
        }
    }

    fn touch_resident(&mut self, key: BlockKey) -> Result<()> {
        let agent = self.cache.get(key).and_then(|b| b.agent);
        let t = self.emit(EventKind::BlockTouch { block: key, agent })?;
        self.cache.touch(key, t);
        Ok(())
    }

    /// Longest resident prefix of `blocks`, touching every hit block in
    /// order. Returns the cached token count and the first miss index.
    pub fn lookup(&mut self, blocks: &[(BlockKey, u32)]) -> Result<(u64, usize)> {
        let (cached, first_miss) = self.cache.peek_prefix(blocks);
        for &(key, _) in &blocks[..first_miss] {
            self.touch_resident(key)?;
        }
        Ok((cached, first_miss))
    }

    /// Makes every block of `blocks` resident, evicting by score as needed.
    /// The first `anchor_blocks` new blocks are tagged with `agent`.
    pub fn admit(&mut self, blocks: &[(BlockKey, u32)], agent: Option<AgentId>, anchor_blocks: usize) -> Result<u32> {
        if blocks.len() > self.cache.budget() {
            return Err(Error::Refused(format!(
                "prompt of {} blocks exceeds budget of {}",
                blocks.len(),
                self.cache.budget()
            )));
        }
        self.pin_resident(blocks);
        let res = self.admit_pinned(blocks, 0, agent, anchor_blocks);
        for &(k, _) in blocks {
            if self.cache.contains(k) {
                self.cache.unpin(k);
            }
        }
        res
    }

    fn pin_resident(&mut self, blocks: &[(BlockKey, u32)]) {
        for &(k, _) in blocks {
            if self.cache.contains(k) {
                self.cache.pin(k);
            }
        }
    }

    /// Resident blocks of `blocks` must already be pinned by the caller;
    /// new blocks are pinned as they are inserted.
    fn admit_pinned(
        &mut self,
        blocks: &[(BlockKey, u32)],
        from: usize,
        agent: Option<AgentId>,
        anchor_blocks: usize,
    ) -> Result<u32> {
        let mut admitted = 0;
        for (i, &(key, n)) in blocks.iter().enumerate().skip(from) {
            if self.cache.contains(key) {
                self.touch_resident(key)?;
                continue;
            }
            while self.cache.len() >= self.cache.budget() {
                self.evict_one()?;
            }
            let tag = if i < anchor_blocks { agent } else { None };
            let t = self.emit(EventKind::BlockTouch { block: key, agent: tag })?;
            let pinned_until = self.runtime.pin_horizon().map(|h| self.now + h);
            self.cache.insert(Block { key, agent: tag, last_touch: t, token_count: n, pinned_until });
            self.cache.pin(key);
            admitted += 1;
        }
        assert!(
            self.cache.len() <= self.cache.budget(),
            "resident blocks {} exceed budget {}",
            self.cache.len(),
            self.cache.budget()
        );
        Ok(admitted)
    }

    fn evict_one(&mut self) -> Result<()> {
        let ctx = self.cache.score_context(self.tick, self.now);
        let (key, score) = self
            .cache
            .choose_victim(&self.runtime, &ctx)
            .ok_or_else(|| Error::Refused("every resident block is referenced by an in-flight request".into()))?;
        let b = self.cache.remove(key).expect("victim is resident");
        self.evictions += 1;
        self.victims.push(key);
        self.engine_log(EngineRecord::Evict { tick: self.tick, time_us: self.now, block: key, agent: b.agent, score });
        Ok(())
    }

    /// Blocks that would have to be pinned to run `blocks` now: resident
    /// ones not yet pinned plus the ones that must be admitted.
    fn extra_pins(&self, blocks: &[(BlockKey, u32)]) -> usize {
        blocks.iter().filter(|&&(k, _)| !self.cache.contains(k) || !self.cache.is_pinned(k)).count()
    }

    fn fits(&self, blocks: &[(BlockKey, u32)]) -> bool {
        self.cache.pinned_count() + self.extra_pins(blocks) <= self.cache.budget()
    }

    fn activate_sessions(&mut self) -> Result<()> {
        while self.active_sessions < self.cfg.concurrency && self.next_session < self.trace.sessions.len() {
            let s = self.next_session;
            self.next_session += 1;
            let Some(&first) = self.trace.sessions[s].first() else { continue };
            self.active_sessions += 1;
            let agent = self.trace.turns[first].agent;
            self.emit(EventKind::AgentDispatch { prev: None, next: agent })?;
            self.ready.push_back(Ready { turn: first, ready_at: self.now });
        }
        Ok(())
    }

    fn start_ready(&mut self) -> Result<()> {
        let trace = Arc::clone(&self.trace);
        while let Some(front) = self.ready.front() {
            let turn = &trace.turns[front.turn];
            let oversized = turn.blocks.len() > self.cache.budget();
            if oversized {
                if !self.in_flight.is_empty() {
                    break;
                }
            } else if !self.fits(&turn.blocks) {
                break;
            }
            let r = self.ready.pop_front().expect("front exists");
            self.emit(EventKind::RequestArrival { request: turn.id, agent: turn.agent })?;
            let cached = if oversized {
                self.engine_log(EngineRecord::AdmissionError {
                    tick: self.tick,
                    time_us: self.now,
                    request: turn.id,
                    prompt_blocks: turn.blocks.len() as u32,
                    budget: self.cache.budget() as u32,
                });
                0
            } else {
                let (cached, first_miss) = self.lookup(&turn.blocks)?;
                self.pin_resident(&turn.blocks);
                self.admit_pinned(&turn.blocks, first_miss, Some(turn.agent), turn.anchor_blocks)?;
                cached
            };
            let ttft = self.cfg.cost.ttft_us(turn.prompt_tokens - cached);
            let finish = self.now + ttft + self.cfg.cost.decode_us(u64::from(turn.decode_tokens));
            self.in_flight.push(InFlight {
                turn: r.turn,
                ready_at: r.ready_at,
                start: self.now,
                finish,
                ttft_us: ttft,
                cached_tokens: cached,
                admission_error: oversized,
            });
        }
        Ok(())
    }

    /// Jumps to the next completion or tool return and processes every
    /// one due at that instant, completions first.
    fn advance(&mut self) -> Result<Vec<TurnRecord>> {
        let next_finish = self.in_flight.iter().map(|f| f.finish).min();
        let next_return = self.tooling.iter().map(|w| w.ready_at).min();
        let Some(t) = next_finish.into_iter().chain(next_return).min() else {
            return Ok(Vec::new());
        };
        self.now = t;
        let (mut done, rest): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.in_flight).into_iter().partition(|f| f.finish == t);
        self.in_flight = rest;
        done.sort_by_key(|f| f.turn);
        let trace = Arc::clone(&self.trace);
        let mut out = Vec::with_capacity(done.len());
        for f in done {
            let turn = &trace.turns[f.turn];
            if !f.admission_error {
                for &(k, _) in &turn.blocks {
                    self.cache.unpin(k);
                }
            }
            self.emit(EventKind::TurnComplete { request: turn.id })?;
            let rec = TurnRecord {
                turn_id: turn.id,
                session: turn.session,
                turn_index: turn.turn_index,
                agent: turn.agent,
                agent_label: trace.label(turn).to_string(),
                prompt_tokens: turn.prompt_tokens,
                cached_tokens: f.cached_tokens,
                ttft_ms: f.ttft_us as f64 / 1e3,
                e2e_ms: (f.finish - f.ready_at) as f64 / 1e3,
                start_us: f.start,
                finish_us: f.finish,
                admission_error: f.admission_error,
            };
            self.records.push(rec.clone());
            out.push(rec);

            let s = self.session_index(f.turn);
            self.cursor[s] += 1;
            if let Some(&next) = trace.sessions[s].get(self.cursor[s]) {
                self.emit(EventKind::AgentDispatch { prev: Some(turn.agent), next: trace.turns[next].agent })?;
                self.tooling.push(Ready { turn: next, ready_at: self.now + trace.turns[next].tool_us });
            } else {
                self.active_sessions -= 1;
                self.activate_sessions()?;
            }
        }
        let (mut back, waiting): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.tooling).into_iter().partition(|w| w.ready_at == t);
        self.tooling = waiting;
        back.sort_by_key(|w| w.turn);
        for w in back {
            let prev = trace.turns[w.turn - 1].agent;
            self.emit(EventKind::ToolReturn { agent: prev })?;
            self.ready.push_back(w);
        }
        Ok(out)
    }

    fn session_index(&self, turn: usize) -> usize {
        // Sessions are laid out contiguously in turn order.
        self.trace.sessions.partition_point(|ids| ids.last().is_some_and(|&l| l < turn))
    }

    fn run_side_effects(&mut self) -> Result<()> {
        for fx in self.runtime.drain_side_effects() {
            self.execute_warmup(fx)?;
        }
        Ok(())
    }

    /// Serves a warmup on the background lane: the agent's template and
    /// anchor plus one user token, decoding a single token.
    pub fn execute_warmup(&mut self, effect: SideEffect) -> Result<()> {
        let SideEffectKind::Warmup(agent) = effect.kind;
        self.warmups.issued += 1;
        self.warmup_seq += 1;
        let trace = Arc::clone(&self.trace);
        let Some(entry) = trace.catalog.get(&agent) else {
            self.warmups.dropped_unknown_agent += 1;
            self.warmup_log(agent, WarmupOutcome::UnknownAgent, 0);
            return Ok(());
        };
        let blocks = &entry.warmup_blocks;
        if blocks.len() > self.cache.budget() || !self.fits(blocks) {
            self.warmups.dropped_no_space += 1;
            self.warmup_log(agent, WarmupOutcome::NoSpace, 0);
            return Ok(());
        }
        let (cached, first_miss) = self.lookup(blocks)?;
        self.pin_resident(blocks);
        let admitted = self.admit_pinned(blocks, first_miss, Some(agent), entry.anchor_blocks)?;
        for &(k, _) in blocks {
            self.cache.unpin(k);
        }
        let tokens: u64 = blocks.iter().map(|&(_, n)| u64::from(n)).sum();
        let prefill = tokens - cached;
        self.warmups.executed += 1;
        self.warmups.prefill_tokens += prefill;
        self.warmups.blocks_admitted += u64::from(admitted);
        self.background_us += self.cfg.cost.ttft_us(prefill) + self.cfg.cost.decode_us(1);
        self.warmups.background_ms = self.background_us as f64 / 1e3;
        self.warmup_log(agent, WarmupOutcome::Executed, admitted);
        Ok(())
    }

    fn warmup_log(&mut self, agent: AgentId, outcome: WarmupOutcome, blocks_admitted: u32) {
        let request = RequestId::warmup(self.warmup_seq);
        self.engine_log(EngineRecord::Warmup {
            tick: self.tick,
            time_us: self.now,
            request,
            agent,
            outcome,
            blocks_admitted,
        });
    }

    /// Starts whatever fits, advances the clock to the next completion or
    /// tool return, then runs queued warmups.
    pub fn step(&mut self) -> Result<Vec<TurnRecord>> {
        if !self.started {
            self.started = true;
            self.activate_sessions()?;
            self.run_side_effects()?;
        }
        self.start_ready()?;
        let done = self.advance()?;
        self.run_side_effects()?;
        Ok(done)
    }

    pub fn run(mut self) -> Result<RunOutput> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.into_output())
    }

    pub fn into_output(self) -> RunOutput {
        let policy = self.runtime.scorer_name().to_string();
        let metrics = RunMetrics::from_turns(&self.records, self.now, self.evictions, self.events, self.warmups);
        let mut log = Vec::new();
        if self.cfg.record_events {
            log.reserve(self.log.len() + 1);
            log.push(LogRecord::header(&self.trace.name, &policy));
            log.extend(self.log);
        }
        let policy_stats = self.runtime.scorer().map(|p| p.stats()).unwrap_or(serde_json::Value::Null);
        RunOutput { policy, metrics, turns: self.records, log, victims: self.victims, policy_stats }
    }
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("now", &self.now)
            .field("tick", &self.tick)
            .field("resident", &self.cache.len())
            .field("policy", &self.runtime.scorer_name())
            .finish()
    }
}
