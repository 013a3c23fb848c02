use crate::runtime::{recency_residual, Forecast, Policy, ScoreContext, SideEffect};
use crate::types::{Block, Event};

/// Normalized recency, the same residual the agent-aware scorer adds.
pub fn lru_score(block: &Block, ctx: &ScoreContext) -> f64 {
    recency_residual(block.last_touch, ctx)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Lru;

impl Policy for Lru {
    fn name(&self) -> &str {
        "lru"
    }

    fn observe(&mut self, _: &Event) {}

    fn score(&self, block: &Block, ctx: &ScoreContext) -> f64 {
        lru_score(block, ctx)
    }

    fn predict(&self, horizon: u32) -> Forecast {
        Forecast::empty(horizon)
    }

    fn poll_actions(&mut self) -> Vec<SideEffect> {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BlockKey;

    fn b(t: u64) -> Block {
        Block { key: BlockKey(t), agent: None, last_touch: t, token_count: 16, pinned_until: None }
    }

    #[test]
    fn extremes() {
        let ctx = ScoreContext { current_tick: 10, oldest_live_tick: 2, now: 0 };
        assert_eq!(lru_score(&b(10), &ctx), 1.0);
        assert_eq!(lru_score(&b(2), &ctx), 0.0);
        assert_eq!(lru_score(&b(6), &ctx), 0.5);
    }
}
