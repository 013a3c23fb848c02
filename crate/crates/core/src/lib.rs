//! Agent-aware KV-cache management for multi-agent LLM serving, with a
//! discrete-event prefix-cache simulator, synthetic workloads and reference
//! eviction policies.

pub mod baselines;
pub mod bench;
pub mod cachesage;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod hash;
pub mod metrics;
pub mod runtime;
pub mod types;
pub mod workloads;

pub use cachesage::{CacheSage, CacheSageConfig};
pub use error::{Error, Result};
pub use runtime::{Forecast, Policy, PolicyHandle, Runtime, ScoreContext, SideEffect, SideEffectKind};
pub use types::{AgentId, Block, BlockKey, Event, EventKind, RequestId, SimTime, Tick, Token};
