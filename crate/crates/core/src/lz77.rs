//! Block-local greedy LZ77 with a single-slot hash match finder.
//!
//! Two compressors share the match finder:
//!
//! * [`compress_block`] is the unconstrained baseline. Its dictionary always
//!   keeps the most recent position for a key.
//! * [`compress_block_de`] performs dependency elimination: it tracks a
//!   warp high-water mark per group of 32 sequences and only accepts matches
//!   whose source ends at or below it, so a warp can resolve every
//!   back-reference of a group in a single round. Its dictionary only
//!   replaces an entry once the stored position is more than
//!   `min_staleness` bytes behind the cursor, which keeps older (and
//!   therefore admissible) positions alive for longer.
//!
//! The high-water mark of a group is the output position at which the
//! group's first back-reference starts: while lane 0 is still collecting
//! literals it follows the cursor, and it freezes once lane 0 emits its
//! match. When the warp decompresses the group, every literal is written
//! first, so everything below that position is already gap-free.

use crate::types::{BackRef, Block, Params, WARP_SIZE};

const HASH_BITS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplacePolicy {
    /// Every insertion overwrites the slot.
    MostRecent,
    /// A slot is overwritten only when its position is more than this many
    /// bytes behind the inserted one.
    MinStaleness(usize),
}

/// Hash table from the leading `min(min_match, 4)` bytes at a position to a
/// previous position with the same key.
#[derive(Clone, Debug)]
pub struct MatchDict {
    // position + 1; zero marks an empty slot
    table: Vec<u32>,
    key_len: usize,
    min_match: usize,
    lookahead: usize,
    window_size: usize,
    policy: ReplacePolicy,
}

impl MatchDict {
    pub fn new(params: &Params, policy: ReplacePolicy) -> Self {
        assert!(params.min_match >= 3, "keys need at least three bytes");
        MatchDict {
            table: vec![0; 1 << HASH_BITS],
            key_len: params.min_match.min(4),
            min_match: params.min_match,
            lookahead: params.lookahead,
            window_size: params.window_size,
            policy,
        }
    }

    pub fn policy(&self) -> ReplacePolicy {
        self.policy
    }

    #[inline]
    fn slot(&self, input: &[u8], pos: usize) -> Option<usize> {
        let bytes = input.get(pos..pos + self.key_len)?;
        let key = bytes
            .iter()
            .enumerate()
            .fold(0u32, |k, (i, &b)| k | (b as u32) << (8 * i));
        Some((key.wrapping_mul(0x9E37_79B1) >> (32 - HASH_BITS)) as usize)
    }

    /// Stored position for the key at `pos`, if it is behind `pos` and
    /// inside the window.
    #[inline]
    pub fn candidate(&self, input: &[u8], pos: usize) -> Option<usize> {
        let stored = self.table[self.slot(input, pos)?] as usize;
        if stored == 0 {
            return None;
        }
        let cand = stored - 1;
        (cand < pos && pos - cand <= self.window_size).then_some(cand)
    }

    /// Records `pos` under its key, subject to the replacement policy.
    #[inline]
    pub fn insert(&mut self, input: &[u8], pos: usize) {
        let Some(slot) = self.slot(input, pos) else {
            return;
        };
        let entry = &mut self.table[slot];
        let replace = match self.policy {
            ReplacePolicy::MostRecent => true,
            ReplacePolicy::MinStaleness(min) => *entry == 0 || pos - (*entry as usize - 1) > min,
        };
        if replace {
            *entry = pos as u32 + 1;
        }
    }

    #[inline]
    fn extend(&self, input: &[u8], cand: usize, cursor: usize, limit: usize) -> usize {
        let mut n = 0;
        while n < limit && input[cand + n] == input[cursor + n] {
            n += 1;
        }
        n
    }
}

/// Unconstrained lookup. The source may overlap the bytes being produced.
pub fn find_match(dict: &MatchDict, input: &[u8], cursor: usize) -> Option<BackRef> {
    let cand = dict.candidate(input, cursor)?;
    let limit = dict.lookahead.min(input.len() - cursor);
    let len = dict.extend(input, cand, cursor, limit);
    (len >= dict.min_match).then(|| BackRef::new(cursor - cand, len))
}

/// Lookup restricted to sources that end at or below `hwm`; a longer
/// candidate is truncated at the mark when the remainder still reaches
/// `min_match`.
pub fn find_match_below_hwm(dict: &MatchDict, input: &[u8], cursor: usize, hwm: usize) -> Option<BackRef> {
    debug_assert!(hwm <= cursor);
    let cand = dict.candidate(input, cursor)?;
    if cand >= hwm {
        return None;
    }
    let limit = dict.lookahead.min(input.len() - cursor).min(hwm - cand);
    let len = dict.extend(input, cand, cursor, limit);
    (len >= dict.min_match).then(|| BackRef::new(cursor - cand, len))
}

/// Baseline greedy compressor.
pub fn compress_block(input: &[u8], params: &Params) -> Block {
    let mut dict = MatchDict::new(params, ReplacePolicy::MostRecent);
    let mut block = Block::new(0);
    let mut lit_start = 0;
    let mut pos = 0;
    while pos + params.min_match <= input.len() {
        let found = find_match(&dict, input, pos);
        dict.insert(input, pos);
        match found {
            Some(m) => {
                block.push(&input[lit_start..pos], Some(m));
                pos += m.length;
                lit_start = pos;
            }
            None => pos += 1,
        }
    }
    if lit_start < input.len() {
        block.push(&input[lit_start..], None);
    }
    block
}

// Literal run after which a stalled group is abandoned, at minimum.
const STALL_MIN: usize = 64;

/// Greedy compressor with dependency elimination.
///
/// Sequences of the open group are buffered until the group has 32 of
/// them. If the cursor then runs into a stretch with no admissible match
/// (the literal run grows past both [`STALL_MIN`] and the bytes the group's
/// matches cover), the group is abandoned: its bytes become lane 0's
/// literal and the group restarts at the cursor with a fresh mark.
pub fn compress_block_de(input: &[u8], params: &Params) -> Block {
    let mut dict = MatchDict::new(params, ReplacePolicy::MinStaleness(params.min_staleness));
    let mut block = Block::new(0);
    // (literal start, match start, match) per buffered sequence
    let mut group: Vec<(usize, usize, BackRef)> = Vec::with_capacity(WARP_SIZE);
    let mut matched = 0;
    let mut lit_start = 0;
    let mut pos = 0;
    let flush = |block: &mut Block, group: &mut Vec<(usize, usize, BackRef)>| {
        for &(ls, ms, m) in group.iter() {
            block.push(&input[ls..ms], Some(m));
        }
        group.clear();
    };
    while pos + params.min_match <= input.len() {
        let hwm = group.first().map_or(pos, |g| g.1);
        let found = find_match_below_hwm(&dict, input, pos, hwm);
        dict.insert(input, pos);
        match found {
            Some(m) => {
                group.push((lit_start, pos, m));
                matched += m.length;
                pos += m.length;
                lit_start = pos;
                if group.len() == WARP_SIZE {
                    flush(&mut block, &mut group);
                    matched = 0;
                }
            }
            None => {
                pos += 1;
                if !group.is_empty() && pos - lit_start > STALL_MIN.max(matched) {
                    lit_start = group[0].0;
                    group.clear();
                    matched = 0;
                }
            }
        }
    }
    flush(&mut block, &mut group);
    if lit_start < input.len() {
        block.push(&input[lit_start..], None);
    }
    block
}

/// True iff, in every group of 32 sequences, every back-reference's source
/// interval ends at or below the position where the group's first
/// back-reference is written.
pub fn verify_de(block: &Block) -> bool {
    let mut group_start = 0usize;
    for group in block.records().chunks(WARP_SIZE) {
        let hwm = group_start + group[0].lit_len as usize;
        let mut pos = group_start;
        for r in group {
            pos += r.lit_len as usize;
            if let Some(b) = r.backref() {
                if b.distance > pos || pos - b.distance + b.length > hwm {
                    return false;
                }
            }
            pos += r.match_len as usize;
        }
        group_start = pos;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{sequences_to_bytes, Sequence};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params_min3() -> Params {
        Params {
            min_match: 3,
            ..Params::default()
        }
    }

    fn random_bytes(len: usize, alphabet: u8, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(0..alphabet)).collect()
    }

    /// Longest match for `cursor` over every source in the window whose end
    /// stays at or below `hwm`.
    fn brute_force_longest(input: &[u8], cursor: usize, hwm: usize, p: &Params) -> usize {
        let lo = cursor.saturating_sub(p.window_size);
        (lo..hwm.min(cursor))
            .map(|src| {
                let limit = p.lookahead.min(input.len() - cursor).min(hwm - src);
                (0..limit).take_while(|&i| input[src + i] == input[cursor + i]).count()
            })
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn empty_input_gives_empty_block() {
        assert!(compress_block(b"", &Params::default()).is_empty());
        assert!(compress_block_de(b"", &Params::default()).is_empty());
    }

    #[test]
    fn textbook_trace_with_three_byte_matches() {
        // "aa" is in the window, 'c' has no match and is emitted as a literal,
        // then "aac" is found at position 0: a 3-byte copy from 3 bytes back.
        let block = compress_block(b"aacaacb", &params_min3());
        assert_eq!(
            block.to_sequences(),
            vec![
                Sequence::new(*b"aac", Some(BackRef::new(3, 3))),
                Sequence::new(*b"b", None)
            ]
        );
        // With the default four-byte minimum the same input is all literals.
        let block = compress_block(b"aacaacb", &Params::default());
        assert_eq!(block.to_sequences(), vec![Sequence::new(*b"aacaacb", None)]);
    }

    #[test]
    fn random_block_round_trips() {
        let p = Params::default();
        for (alphabet, seed) in [(4u8, 1u64), (16, 2), (255, 3)] {
            let input = random_bytes(64 * 1024, alphabet, seed);
            for block in [compress_block(&input, &p), compress_block_de(&input, &p)] {
                assert_eq!(sequences_to_bytes(&block).unwrap(), input);
                assert!(block.alternation_holds());
            }
        }
    }

    #[test]
    fn de_matches_baseline_without_repeats() {
        let input: Vec<u8> = (0..=255u8).collect();
        let p = Params::default();
        assert_eq!(compress_block(&input, &p), compress_block_de(&input, &p));
        assert_eq!(compress_block(&input, &p).to_sequences(), vec![Sequence::new(input.clone(), None)]);
    }

    #[test]
    fn hwm_zero_finds_nothing() {
        let p = Params::default();
        let input = b"abcdabcdabcd".to_vec();
        let mut dict = MatchDict::new(&p, ReplacePolicy::MostRecent);
        for pos in 0..8 {
            dict.insert(&input, pos);
        }
        assert!(find_match(&dict, &input, 8).is_some());
        assert_eq!(find_match_below_hwm(&dict, &input, 8, 0), None);
    }

    #[test]
    fn match_is_truncated_at_the_mark() {
        // "ABCDEFGH" at 2..10 reappears at 20; the mark sits 3 bytes into it.
        let mut input = b"zzABCDEFGHyyyyyyyyyy".to_vec();
        input.extend_from_slice(b"ABCDEFGH");
        for (p, expect) in [(params_min3(), Some(BackRef::new(18, 3))), (Params::default(), None)] {
            let mut dict = MatchDict::new(&p, ReplacePolicy::MostRecent);
            dict.insert(&input, 2);
            assert_eq!(find_match(&dict, &input, 20), Some(BackRef::new(18, 8)));
            assert_eq!(find_match_below_hwm(&dict, &input, 20, 5), expect);
            assert_eq!(brute_force_longest(&input, 20, 5, &p), 3);
        }
    }

    #[test]
    fn verify_de_examples() {
        let literal_only = Block::from_sequences(0, [Sequence::new(*b"hello world", None)]);
        assert!(verify_de(&literal_only));

        // Sequence 1 writes "abcd" + a copy of it; sequences 2 and 3 copy
        // from the bytes sequence 1's back-reference produces.
        let nested = Block::from_sequences(
            0,
            [
                Sequence::new(*b"abcd", Some(BackRef::new(4, 4))),
                Sequence::new(*b"x", Some(BackRef::new(5, 4))),
                Sequence::new(*b"y", Some(BackRef::new(10, 4))),
            ],
        );
        assert_eq!(sequences_to_bytes(&nested).unwrap(), b"abcdabcdxabcdyabcd");
        assert!(!verify_de(&nested));

        // Same bytes, but every copy reads from sequence 1's literal.
        let flat = Block::from_sequences(
            0,
            [
                Sequence::new(*b"abcd", Some(BackRef::new(4, 4))),
                Sequence::new(*b"x", Some(BackRef::new(9, 4))),
                Sequence::new(*b"y", Some(BackRef::new(14, 4))),
            ],
        );
        assert_eq!(sequences_to_bytes(&flat).unwrap(), b"abcdabcdxabcdyabcd");
        assert!(verify_de(&flat));
    }

    #[test]
    fn de_replaces_a_nested_match_with_a_shorter_one() {
        let input = b"abcdefgh".repeat(40);
        let p = Params::default();
        let plain = compress_block(&input, &p).to_sequences();
        let de = compress_block_de(&input, &p).to_sequences();
        // Baseline: one literal, then a self-overlapping 64-byte copy; the
        // second sequence reads bytes the first sequence's copy produces.
        assert_eq!(plain[0], Sequence::new(*b"abcdefgh", Some(BackRef::new(8, 64))));
        assert_eq!(plain[1].backref, Some(BackRef::new(64, 64)));
        assert!(!verify_de(&compress_block(&input, &p)));
        // DE: the second sequence settles for a shorter copy that ends at the
        // group's mark (position 8).
        assert_eq!(de[0], Sequence::new(*b"abcdefgh", Some(BackRef::new(8, 8))));
        let second = de[1].backref.unwrap();
        assert!(second.length < plain[1].backref.unwrap().length);
        assert_eq!(second, BackRef::new(16, 8));
        assert!(verify_de(&compress_block_de(&input, &p)));
    }

    #[test]
    fn repetitive_text_nests_without_de() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let words: Vec<&[u8]> = vec![b"the ", b"warp ", b"lane ", b"copies ", b"bytes ", b"again "];
        let mut input = Vec::new();
        while input.len() < 200_000 {
            input.extend_from_slice(words[rng.random_range(0..words.len())]);
        }
        let p = Params::default();
        assert!(!verify_de(&compress_block(&input, &p)));
        let de = compress_block_de(&input, &p);
        assert!(verify_de(&de));
        assert_eq!(sequences_to_bytes(&de).unwrap(), input);
        assert!(de.token_count() >= compress_block(&input, &p).token_count());
    }

    #[test]
    fn staleness_policy_keeps_old_entries() {
        let p = Params::default();
        let input = b"abcdXabcdYabcd".to_vec();
        let mut recent = MatchDict::new(&p, ReplacePolicy::MostRecent);
        let mut stale = MatchDict::new(&p, ReplacePolicy::MinStaleness(1024));
        for pos in [0, 5] {
            recent.insert(&input, pos);
            stale.insert(&input, pos);
        }
        assert_eq!(recent.candidate(&input, 10), Some(5));
        assert_eq!(stale.candidate(&input, 10), Some(0));
        let mut stale = MatchDict::new(&p, ReplacePolicy::MinStaleness(4));
        stale.insert(&input, 0);
        stale.insert(&input, 5);
        assert_eq!(stale.candidate(&input, 10), Some(5));
    }

    #[test]
    fn candidates_outside_the_window_are_ignored() {
        let p = Params {
            window_size: 16,
            block_size: 1024,
            ..Params::default()
        };
        let mut input = b"abcd".to_vec();
        input.extend(std::iter::repeat_n(b'.', 20));
        input.extend_from_slice(b"abcd");
        let mut dict = MatchDict::new(&p, ReplacePolicy::MostRecent);
        dict.insert(&input, 0);
        assert_eq!(dict.candidate(&input, 24), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn compressors_round_trip_and_respect_bounds(
            input in prop::collection::vec(0u8..6, 0..6000),
            window in 16usize..2048,
            lookahead in 4usize..=64,
        ) {
            let p = Params { window_size: window, block_size: 8192, lookahead, ..Params::default() };
            for block in [compress_block(&input, &p), compress_block_de(&input, &p)] {
                prop_assert_eq!(sequences_to_bytes(&block).unwrap(), input.clone());
                prop_assert!(block.alternation_holds());
                for s in block.sequences() {
                    if let Some(b) = s.backref {
                        prop_assert!(b.distance >= 1 && b.distance <= window);
                        prop_assert!(b.length >= p.min_match && b.length <= lookahead);
                    }
                }
            }
            prop_assert!(verify_de(&compress_block_de(&input, &p)));
        }

        #[test]
        fn below_hwm_lookup_is_admissible(
            input in prop::collection::vec(0u8..3, 64..400),
            cursor_frac in 0.1f64..0.9,
            hwm_frac in 0.0f64..=1.0,
        ) {
            let p = Params::default();
            let cursor = ((input.len() as f64 * cursor_frac) as usize).min(input.len() - 4);
            let hwm = (cursor as f64 * hwm_frac) as usize;
            let mut dict = MatchDict::new(&p, ReplacePolicy::MostRecent);
            for pos in 0..cursor {
                dict.insert(&input, pos);
            }
            let best = brute_force_longest(&input, cursor, hwm, &p);
            match find_match_below_hwm(&dict, &input, cursor, hwm) {
                Some(m) => {
                    prop_assert!(m.length >= p.min_match && m.length <= best);
                    prop_assert!(cursor - m.distance + m.length <= hwm);
                    prop_assert_eq!(&input[cursor - m.distance..][..m.length], &input[cursor..][..m.length]);
                }
                None => {
                    let short = dict.candidate(&input, cursor).is_none_or(|c| {
                        let limit = p.lookahead.min(input.len() - cursor).min(hwm.saturating_sub(c));
                        (0..limit).take_while(|&i| input[c + i] == input[cursor + i]).count() < p.min_match
                    });
                    prop_assert!(hwm == 0 || short);
                }
            }
            // At hwm == cursor the constrained finder is the unconstrained one
            // clipped to non-overlapping sources.
            let free = find_match(&dict, &input, cursor);
            let clipped = free.and_then(|m| {
                let len = m.length.min(m.distance);
                (len >= p.min_match).then(|| BackRef::new(m.distance, len))
            });
            prop_assert_eq!(find_match_below_hwm(&dict, &input, cursor, cursor), clipped);
        }
    }
}
