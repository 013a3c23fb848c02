//! Fixed-seed 64-bit hashing for block keys and agent identities.
//!
//! Every input word is folded into the state with `state = mix(state ^ word)`
//! where `mix` is the splitmix64 finalizer. The function is not
//! cryptographic; it only has to be fast, stable across runs and platforms,
//! and sensitive to every input word.

use crate::error::{Error, Result};
use crate::types::{AgentId, BlockKey, Token};

/// Seed for prefix-chained block keys.
pub const BLOCK_HASH_SEED: u64 = 0x6b76_2d62_6c6f_636b;
/// Seed for agent identities (distinct from the block seed so an identity
/// never equals the key of a single-block list).
pub const AGENT_HASH_SEED: u64 = 0x6167_656e_742d_6964;

const NO_PARENT: u64 = 0x9e37_79b9_7f4a_7c15;
const HAS_PARENT: u64 = 0xc2b2_ae3d_27d4_eb4f;

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of the block holding `tokens`, chained on the key of the block before it.
pub fn chain_hash(parent: Option<BlockKey>, tokens: &[Token]) -> Result<BlockKey> {
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("chain_hash needs at least one token".into()));
    }
    let mut h = BLOCK_HASH_SEED;
    match parent {
        None => h = mix(h ^ NO_PARENT),
        Some(p) => {
            h = mix(h ^ HAS_PARENT);
            h = mix(h ^ p.0);
        }
    }
    for t in tokens {
        h = mix(h ^ u64::from(t.0));
    }
    h = mix(h ^ tokens.len() as u64);
    Ok(BlockKey(h))
}

/// Split `tokens` into `block_size` chunks and chain-hash them in order.
/// The last chunk may be short.
pub fn block_keys(tokens: &[Token], block_size: usize) -> Result<Vec<(BlockKey, u32)>> {
    if block_size == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    let mut out = Vec::with_capacity(tokens.len().div_ceil(block_size));
    let mut parent = None;
    for chunk in tokens.chunks(block_size) {
        let key = chain_hash(parent, chunk)?;
        out.push((key, chunk.len() as u32));
        parent = Some(key);
    }
    Ok(out)
}

pub(crate) fn hash_keys(keys: &[BlockKey]) -> AgentId {
    let mut h = AGENT_HASH_SEED;
    for k in keys {
        h = mix(h ^ k.0);
    }
    AgentId(mix(h ^ keys.len() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[u32]) -> Vec<Token> {
        v.iter().map(|&t| Token(t)).collect()
    }

    #[test]
    fn deterministic() {
        let a = chain_hash(None, &toks(&[1, 2, 3])).unwrap();
        let b = chain_hash(None, &toks(&[1, 2, 3])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn content_sensitive() {
        let a = chain_hash(None, &toks(&[1, 2, 3])).unwrap();
        let b = chain_hash(None, &toks(&[1, 2, 4])).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn parent_sensitive() {
        let ka = chain_hash(None, &toks(&[7])).unwrap();
        let kb = chain_hash(None, &toks(&[8])).unwrap();
        assert_ne!(ka, kb);
        let a = chain_hash(Some(ka), &toks(&[5])).unwrap();
        let b = chain_hash(Some(kb), &toks(&[5])).unwrap();
        assert_ne!(a, b);
        assert_ne!(chain_hash(None, &toks(&[5])).unwrap(), a);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(chain_hash(None, &[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn known_value_is_stable() {
        // Values from an independent reimplementation; a change here
        // invalidates every stored trace and event log.
        assert_eq!(mix(0), 0xe220_a839_7b1d_cdaf);
        let k = chain_hash(None, &toks(&[1, 2, 3])).unwrap();
        assert_eq!(k, BlockKey(0x60c1_cb20_bc08_58ca));
        assert_eq!(chain_hash(Some(k), &toks(&[5])).unwrap(), BlockKey(0x7d88_3467_7326_942d));
        assert_eq!(format!("{k}"), "60c1cb20bc0858ca");
    }
}
