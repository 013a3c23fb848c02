use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::{recency_residual, Forecast, Policy, ScoreContext, SideEffect};
use crate::types::{Block, Event, SimTime};

/// Added to the score of a block inside its pin window. Larger than any
/// unpinned score, so pinned blocks go only when nothing else can.
pub const PIN_SENTINEL: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtlConfig {
    /// Simulated milliseconds a newly admitted block stays pinned.
    pub pin_horizon_ms: f64,
}

impl Default for TtlConfig {
    fn default() -> Self {
        Self { pin_horizon_ms: 5_000.0 }
    }
}

impl TtlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pin_horizon_ms.is_finite() && self.pin_horizon_ms >= 0.0) {
            return Err(Error::Validation("ttl pin_horizon_ms must be a finite non-negative number".into()));
        }
        Ok(())
    }

    pub fn horizon_us(&self) -> SimTime {
        (self.pin_horizon_ms * 1e3).round() as SimTime
    }
}

pub fn ttl_score(block: &Block, ctx: &ScoreContext) -> f64 {
    let rho = recency_residual(block.last_touch, ctx);
    match block.pinned_until {
        Some(until) if ctx.now < until => PIN_SENTINEL + rho,
        _ => rho,
    }
}

/// Recency eviction with a fixed pin window starting at admission.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ttl {
    cfg: TtlConfig,
}

impl Ttl {
    pub fn new(cfg: TtlConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

impl Policy for Ttl {
    fn name(&self) -> &str {
        "ttl"
    }

    fn observe(&mut self, _: &Event) {}

    fn score(&self, block: &Block, ctx: &ScoreContext) -> f64 {
        ttl_score(block, ctx)
    }

    fn predict(&self, horizon: u32) -> Forecast {
        Forecast::empty(horizon)
    }

    fn poll_actions(&mut self) -> Vec<SideEffect> {
        Vec::new()
    }

    fn pin_horizon(&self) -> Option<SimTime> {
        Some(self.cfg.horizon_us())
    }

    fn stats(&self) -> serde_json::Value {
        serde_json::json!({ "pin_horizon_ms": self.cfg.pin_horizon_ms })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BlockKey;

    #[test]
    fn pinned_outranks_unpinned() {
        let ctx = ScoreContext { current_tick: 10, oldest_live_tick: 0, now: 500 };
        let old_pinned =
            Block { key: BlockKey(1), agent: None, last_touch: 0, token_count: 16, pinned_until: Some(501) };
        let new_free =
            Block { key: BlockKey(2), agent: None, last_touch: 10, token_count: 16, pinned_until: Some(500) };
        assert!(ttl_score(&old_pinned, &ctx) > ttl_score(&new_free, &ctx));
        assert_eq!(ttl_score(&new_free, &ctx), 1.0);
    }

    #[test]
    fn negative_horizon_rejected() {
        assert!(Ttl::new(TtlConfig { pin_horizon_ms: -1.0 }).is_err());
        assert_eq!(TtlConfig { pin_horizon_ms: 1.5 }.horizon_us(), 1500);
    }
}
