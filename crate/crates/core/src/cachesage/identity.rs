use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::hash_keys;
use crate::types::{AgentId, BlockKey};

/// Which block hashes feed the agent identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentityConfig {
    /// Leading blocks to skip (the chat-template prefix).
    pub skip: usize,
    /// Blocks hashed after the skipped prefix.
    pub take: usize,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self { skip: 4, take: 4 }
    }
}

impl IdentityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.take == 0 {
            return Err(Error::Validation("identity take must be at least 1".into()));
        }
        Ok(())
    }

    /// Blocks a prompt needs for the full identity window.
    pub fn window_blocks(&self) -> usize {
        self.skip + self.take
    }
}

/// Hash of `block_keys[skip .. skip + take]`.
///
/// Short prompts degrade instead of failing: with fewer than `skip + take`
/// blocks the hash covers every block after `skip`, and with `skip` blocks or
/// fewer it covers the whole list.
pub fn derive_agent_identity(block_keys: &[BlockKey], cfg: &IdentityConfig) -> Result<AgentId> {
    if block_keys.is_empty() {
        return Err(Error::InvalidArgument("agent identity needs at least one block".into()));
    }
    let n = block_keys.len();
    let window = if n >= cfg.skip + cfg.take {
        &block_keys[cfg.skip..cfg.skip + cfg.take]
    } else if n > cfg.skip {
        &block_keys[cfg.skip..]
    } else {
        block_keys
    };
    Ok(hash_keys(window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::block_keys;
    use crate::types::Token;

    fn keys(tokens: &[u32], bs: usize) -> Vec<BlockKey> {
        let t: Vec<Token> = tokens.iter().map(|&x| Token(x)).collect();
        block_keys(&t, bs).unwrap().into_iter().map(|(k, _)| k).collect()
    }

    fn prompt(anchor: &[u32], history: &[u32]) -> Vec<u32> {
        let mut v = vec![1, 2, 3, 4]; // template
        v.extend_from_slice(anchor);
        v.extend_from_slice(history);
        v
    }

    #[test]
    fn same_anchor_different_history() {
        let anchor: Vec<u32> = (100..132).collect();
        let a = keys(&prompt(&anchor, &[900, 901, 902, 903, 904]), 4);
        let b = keys(&prompt(&anchor, &[700; 23]), 4);
        let cfg = IdentityConfig::default();
        assert_eq!(derive_agent_identity(&a, &cfg).unwrap(), derive_agent_identity(&b, &cfg).unwrap());
    }

    #[test]
    fn anchor_token_change_changes_identity() {
        let anchor: Vec<u32> = (100..132).collect();
        let mut other = anchor.clone();
        other[2] = 5555;
        let cfg = IdentityConfig::default();
        let a = derive_agent_identity(&keys(&prompt(&anchor, &[]), 4), &cfg).unwrap();
        let b = derive_agent_identity(&keys(&prompt(&other, &[]), 4), &cfg).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn short_prompt_fallbacks() {
        let cfg = IdentityConfig::default();
        let ks: Vec<BlockKey> = (1..=5).map(BlockKey).collect();
        assert_eq!(derive_agent_identity(&ks, &cfg).unwrap(), hash_keys(&ks[4..5]));
        let three: Vec<BlockKey> = (1..=3).map(BlockKey).collect();
        assert_eq!(derive_agent_identity(&three, &cfg).unwrap(), hash_keys(&three));
        let four: Vec<BlockKey> = (1..=4).map(BlockKey).collect();
        assert_eq!(derive_agent_identity(&four, &cfg).unwrap(), hash_keys(&four));
        assert!(derive_agent_identity(&[], &cfg).is_err());
    }

    #[test]
    fn take_zero_invalid() {
        assert!(IdentityConfig { skip: 0, take: 0 }.validate().is_err());
    }
}
