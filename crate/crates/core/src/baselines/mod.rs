//! Reference eviction policies hosted on the same runtime contract.

mod belady;
mod lru;
mod ttl;

pub use belady::{belady_score, Belady, FutureIndex};
pub use lru::{lru_score, Lru};
pub use ttl::{ttl_score, Ttl, TtlConfig, PIN_SENTINEL};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cachesage::{CacheSage, CacheSageConfig};
use crate::engine::{EngineConfig, PreparedTrace};
use crate::error::{Error, Result};
use crate::runtime::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Lru,
    Ttl,
    CacheSage,
    Belady,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::Lru, PolicyKind::Ttl, PolicyKind::CacheSage, PolicyKind::Belady];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Lru => "lru",
            PolicyKind::Ttl => "ttl",
            PolicyKind::CacheSage => "cachesage",
            PolicyKind::Belady => "belady",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(|p| p.as_str()).join(", ")
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown policy {s:?}; valid policies: {}", Self::valid_names()))
        })
    }
}

/// Per-policy knobs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySettings {
    pub cachesage: CacheSageConfig,
    pub ttl: TtlConfig,
}

/// Builds a ready-to-register policy. Belady needs the trace it will see.
pub fn build_policy(
    kind: PolicyKind,
    settings: &PolicySettings,
    trace: &PreparedTrace,
    engine: &EngineConfig,
) -> Result<Box<dyn Policy>> {
    Ok(match kind {
        PolicyKind::Lru => Box::new(Lru),
        PolicyKind::Ttl => Box::new(Ttl::new(settings.ttl)?),
        PolicyKind::CacheSage => Box::new(CacheSage::new(settings.cachesage)?),
        PolicyKind::Belady => {
            Box::new(Belady::new(Arc::new(FutureIndex::estimate(trace, engine.concurrency, &engine.cost))))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.as_str().parse::<PolicyKind>().unwrap(), p);
        }
        let e = "lur".parse::<PolicyKind>().unwrap_err().to_string();
        assert!(e.contains("lru, ttl, cachesage, belady"));
    }
}
