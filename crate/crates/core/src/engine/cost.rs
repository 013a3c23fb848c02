use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SimTime;

/// Linear latency model standing in for real prefill/decode measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub prefill_per_token_us: u64,
    pub prefill_base_us: u64,
    pub decode_per_token_us: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { prefill_per_token_us: 50, prefill_base_us: 1000, decode_per_token_us: 20_000 }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if self.prefill_per_token_us == 0 || self.prefill_base_us == 0 || self.decode_per_token_us == 0 {
            return Err(Error::Validation("cost model parameters must all be positive".into()));
        }
        Ok(())
    }

    /// Time to first token when `uncached_tokens` must be prefilled.
    pub fn ttft_us(&self, uncached_tokens: u64) -> SimTime {
        self.prefill_base_us + self.prefill_per_token_us * uncached_tokens
    }

    pub fn decode_us(&self, tokens: u64) -> SimTime {
        self.decode_per_token_us * tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear() {
        let c = CostModel::default();
        assert_eq!(c.ttft_us(0), 1000);
        assert_eq!(c.ttft_us(100), 6000);
        assert_eq!(c.decode_us(3), 60_000);
    }

    #[test]
    fn zero_rejected() {
        assert!(CostModel { prefill_base_us: 0, ..Default::default() }.validate().is_err());
    }
}
