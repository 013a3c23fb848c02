//! Block-granular prefix-cache serving simulator.

mod cache;
mod cost;
mod log;
mod prepared;
mod sim;

pub use cache::CacheState;
pub use cost::CostModel;
pub use log::{EngineRecord, LogRecord, WarmupOutcome, EVENTS_SCHEMA_VERSION};
pub use prepared::{CatalogEntry, PreparedTrace, PreparedTurn, WARMUP_USER_TOKEN};
pub use sim::{EngineConfig, RunOutput, Simulator};
