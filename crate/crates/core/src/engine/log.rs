use serde::{Deserialize, Serialize};

use crate::types::{AgentId, BlockKey, Event, RequestId, SimTime, Tick};

pub const EVENTS_SCHEMA_VERSION: u32 = 1;

/// Engine-side entries that are not policy events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineRecord {
    Header {
        schema: String,
        version: u32,
        workload: String,
        policy: String,
    },
    Evict {
        tick: Tick,
        time_us: SimTime,
        block: BlockKey,
        agent: Option<AgentId>,
        score: f64,
    },
    Warmup {
        tick: Tick,
        time_us: SimTime,
        request: RequestId,
        agent: AgentId,
        outcome: WarmupOutcome,
        blocks_admitted: u32,
    },
    AdmissionError {
        tick: Tick,
        time_us: SimTime,
        request: RequestId,
        prompt_blocks: u32,
        budget: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmupOutcome {
    Executed,
    UnknownAgent,
    NoSpace,
}

/// One line of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogRecord {
    Event(Event),
    Engine(EngineRecord),
}

impl LogRecord {
    pub fn header(workload: &str, policy: &str) -> Self {
        LogRecord::Engine(EngineRecord::Header {
            schema: "cachesage.events".into(),
            version: EVENTS_SCHEMA_VERSION,
            workload: workload.into(),
            policy: policy.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EventKind;

    #[test]
    fn round_trip() {
        let recs = vec![
            LogRecord::header("w", "lru"),
            LogRecord::Event(Event::new(3, 10, EventKind::TurnComplete { request: RequestId(4) })),
            LogRecord::Engine(EngineRecord::Evict {
                tick: 4,
                time_us: 10,
                block: BlockKey(9),
                agent: None,
                score: 0.25,
            }),
        ];
        for r in recs {
            let s = serde_json::to_string(&r).unwrap();
            assert_eq!(serde_json::from_str::<LogRecord>(&s).unwrap(), r, "{s}");
        }
    }
}
