//! Domain types shared by the runtime, the policies and the simulator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Logical event counter. One tick per dispatched event.
pub type Tick = u64;

/// Simulated wall time in microseconds.
pub type SimTime = u64;

/// Synthetic vocabulary token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub u32);

macro_rules! hex_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:016x}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                u64::from_str_radix(s, 16).map($name)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_id!(
    /// Prefix-chained content hash of a token block; the storage key.
    BlockKey
);
hex_id!(
    /// Content-derived identity of an agent's anchor region; the prediction key.
    AgentId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u64);

impl RequestId {
    const WARMUP_BIT: u64 = 1 << 63;

    pub fn warmup(seq: u64) -> Self {
        RequestId(seq | Self::WARMUP_BIT)
    }

    pub fn is_warmup(self) -> bool {
        self.0 & Self::WARMUP_BIT != 0
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_warmup() {
            write!(f, "w{}", self.0 & !Self::WARMUP_BIT)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// A resident KV block as the cache and the policies see it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub key: BlockKey,
    /// Assigned at first touch, never changed afterwards.
    pub agent: Option<AgentId>,
    pub last_touch: Tick,
    pub token_count: u32,
    /// Simulated time before which the TTL baseline refuses to evict the block.
    pub pinned_until: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    BlockTouch { block: BlockKey, agent: Option<AgentId> },
    RequestArrival { request: RequestId, agent: AgentId },
    AgentDispatch { prev: Option<AgentId>, next: AgentId },
    ToolReturn { agent: AgentId },
    TurnComplete { request: RequestId },
}

/// A policy-relevant occurrence, stamped with its tick and simulated time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: Tick,
    pub time_us: SimTime,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn new(tick: Tick, time_us: SimTime, kind: EventKind) -> Self {
        Self { tick, time_us, kind }
    }
}
