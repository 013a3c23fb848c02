//! Resident block set with a recency index and in-flight reference counts.

use std::collections::{BTreeSet, HashMap};

use crate::runtime::{Runtime, ScoreContext};
use crate::types::{Block, BlockKey, SimTime, Tick};

#[derive(Debug, Clone)]
pub struct CacheState {
    budget: usize,
    resident: HashMap<BlockKey, Block>,
    /// `(last_touch, key)` of every resident block; first entry is the
    /// oldest live touch.
    by_touch: BTreeSet<(Tick, BlockKey)>,
    refs: HashMap<BlockKey, u32>,
}

impl CacheState {
    pub fn new(budget: usize) -> Self {
        Self { budget, resident: HashMap::new(), by_touch: BTreeSet::new(), refs: HashMap::new() }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.resident.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resident.is_empty()
    }

    pub fn contains(&self, key: BlockKey) -> bool {
        self.resident.contains_key(&key)
    }

    pub fn get(&self, key: BlockKey) -> Option<&Block> {
        self.resident.get(&key)
    }

    /// Number of distinct blocks referenced by in-flight requests.
    pub fn pinned_count(&self) -> usize {
        self.refs.len()
    }

    pub fn is_pinned(&self, key: BlockKey) -> bool {
        self.refs.contains_key(&key)
    }

    pub fn oldest_touch(&self) -> Option<Tick> {
        self.by_touch.first().map(|&(t, _)| t)
    }

    /// Resident blocks from least to most recently touched.
    pub fn iter_by_recency(&self) -> impl Iterator<Item = &Block> + '_ {
        self.by_touch.iter().map(move |(_, k)| &self.resident[k])
    }

    /// Token count of the longest resident prefix and the index of the first
    /// block that is not resident. Touches nothing.
    pub fn peek_prefix(&self, blocks: &[(BlockKey, u32)]) -> (u64, usize) {
        let mut tokens = 0;
        for (i, (k, n)) in blocks.iter().enumerate() {
            if !self.resident.contains_key(k) {
                return (tokens, i);
            }
            tokens += u64::from(*n);
        }
        (tokens, blocks.len())
    }

    pub fn touch(&mut self, key: BlockKey, tick: Tick) {
        let b = self.resident.get_mut(&key).expect("touch of non-resident block");
        self.by_touch.remove(&(b.last_touch, key));
        b.last_touch = tick;
        self.by_touch.insert((tick, key));
    }

    pub fn insert(&mut self, block: Block) {
        debug_assert!(!self.resident.contains_key(&block.key));
        self.by_touch.insert((block.last_touch, block.key));
        self.resident.insert(block.key, block);
    }

    pub fn remove(&mut self, key: BlockKey) -> Option<Block> {
        let b = self.resident.remove(&key)?;
        self.by_touch.remove(&(b.last_touch, key));
        Some(b)
    }

    pub fn pin(&mut self, key: BlockKey) {
        *self.refs.entry(key).or_insert(0) += 1;
    }

    pub fn unpin(&mut self, key: BlockKey) {
        if let Some(n) = self.refs.get_mut(&key) {
            *n -= 1;
            if *n == 0 {
                self.refs.remove(&key);
            }
        }
    }

    pub fn score_context(&self, current_tick: Tick, now: SimTime) -> ScoreContext {
        ScoreContext { current_tick, oldest_live_tick: self.oldest_touch().unwrap_or(current_tick), now }
    }

    /// Unpinned block with the lowest score. Equal scores go to the smaller
    /// `last_touch`, then the smaller key.
    pub fn choose_victim(&self, runtime: &Runtime, ctx: &ScoreContext) -> Option<(BlockKey, f64)> {
        let mut best: Option<(BlockKey, f64)> = None;
        for (_, key) in &self.by_touch {
            if self.refs.contains_key(key) {
                continue;
            }
            let s = runtime.score(&self.resident[key], ctx);
            if best.is_none_or(|(_, bs)| s < bs) {
                best = Some((*key, s));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blk(k: u64, t: Tick) -> Block {
        Block { key: BlockKey(k), agent: None, last_touch: t, token_count: 16, pinned_until: None }
    }

    #[test]
    fn lru_victim_skips_pinned() {
        let mut c = CacheState::new(4);
        for (k, t) in [(1, 1), (2, 2), (3, 3)] {
            c.insert(blk(k, t));
        }
        let rt = Runtime::new();
        let ctx = c.score_context(3, 0);
        assert_eq!(c.choose_victim(&rt, &ctx).unwrap().0, BlockKey(1));
        c.pin(BlockKey(1));
        assert_eq!(c.choose_victim(&rt, &ctx).unwrap().0, BlockKey(2));
        c.pin(BlockKey(1));
        c.unpin(BlockKey(1));
        assert!(c.is_pinned(BlockKey(1)));
        c.unpin(BlockKey(1));
        assert!(!c.is_pinned(BlockKey(1)));
    }

    #[test]
    fn touch_reorders() {
        let mut c = CacheState::new(4);
        c.insert(blk(1, 1));
        c.insert(blk(2, 2));
        c.touch(BlockKey(1), 5);
        assert_eq!(c.oldest_touch(), Some(2));
        let order: Vec<u64> = c.iter_by_recency().map(|b| b.key.0).collect();
        assert_eq!(order, vec![2, 1]);
    }

    #[test]
    fn prefix_stops_at_first_miss() {
        let mut c = CacheState::new(4);
        c.insert(blk(1, 1));
        c.insert(blk(3, 2));
        let p = [(BlockKey(1), 16), (BlockKey(2), 16), (BlockKey(3), 16)];
        assert_eq!(c.peek_prefix(&p), (16, 1));
        assert_eq!(CacheState::new(2).peek_prefix(&p), (0, 0));
    }
}
