//! Synthetic inputs: streams with a prescribed back-reference nesting depth,
//! and Zipfian pseudo-text.
//!
//! A nested stream is built block by block out of groups. A group with
//! depth `D` uses `m = 32 / D` fresh random strings. It starts with an
//! intro of `m` units that the compressor can only emit as literals,
//! followed by 32 units whose strings cycle through the `m` strings:
//!
//! ```text
//! unit = [separator][counter][string]
//! ```
//!
//! Unit `j` of the 32 matches unit `j - m` (or intro unit `j` for `j < m`)
//! on its string only, so lane `j` copies bytes that lane `j - m` writes.
//! The chains have `D` links, which makes multi-round resolution take
//! exactly `D` rounds. Separators come from 0xF0..=0xFF and never occur in
//! payload bytes, so matches cannot run across units.
//!
//! The single-slot hash of the compressor can lose a candidate to a
//! collision. Each block is therefore compressed after generation and
//! compared with the intended parse; groups from the first mismatch on
//! are regenerated with fresh random strings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::{Error, Result};
use crate::lz77::compress_block;
use crate::types::{BackRef, Block, Params, MAX_MATCH, MIN_MATCH, WARP_SIZE};

pub const SEPARATORS: [u8; 16] = [
    0xF0, 0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8, 0xF9, 0xFA, 0xFB, 0xFC, 0xFD, 0xFE, 0xFF,
];
/// Payload bytes are drawn from `0..PAYLOAD_LIMIT`.
pub const PAYLOAD_LIMIT: u8 = 0xF0;

const MAX_REPAIRS_PER_BLOCK: u32 = 20_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestingSpec {
    pub depth: u32,
    /// Counter byte plus repeated string.
    pub unit_len: usize,
    pub total_len: usize,
    /// Must match the block size used to compress the stream.
    pub block_size: usize,
    pub seed: u64,
}

impl NestingSpec {
    pub fn new(depth: u32, total_len: usize) -> Self {
        NestingSpec {
            depth,
            unit_len: 16,
            total_len,
            block_size: Params::default().block_size,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.depth, 1 | 2 | 4 | 8 | 16 | 32) {
            return Err(Error::InvalidDepth(self.depth));
        }
        if self.unit_len <= MIN_MATCH || self.unit_len > MAX_MATCH + 1 {
            return Err(Error::InvalidParams(format!(
                "unit_len must be in {}..={}",
                MIN_MATCH + 1,
                MAX_MATCH + 1
            )));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidParams("block_size must be positive".into()));
        }
        Ok(())
    }

    /// Strings per group.
    pub fn strings(&self) -> usize {
        WARP_SIZE / self.depth as usize
    }

    /// Bytes of one unit including its separator.
    fn stride(&self) -> usize {
        self.unit_len + 1
    }

    pub fn group_len(&self) -> usize {
        self.stride() * (WARP_SIZE + self.strings())
    }
}

fn separator(unit: usize) -> u8 {
    SEPARATORS[(unit + unit / 16) % 16]
}

fn payload(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..PAYLOAD_LIMIT)).collect()
}

struct BlockBuilder<'a> {
    spec: &'a NestingSpec,
    groups: Vec<Vec<u8>>,
    tail: Vec<u8>,
}

impl BlockBuilder<'_> {
    fn group(&self, rng: &mut ChaCha8Rng, g: usize) -> Vec<u8> {
        let spec = self.spec;
        let m = spec.strings();
        let strings: Vec<Vec<u8>> = (0..m).map(|_| payload(rng, spec.unit_len - 1)).collect();
        let mut out = Vec::with_capacity(spec.group_len());
        let first_unit = g * (WARP_SIZE + m);
        for k in 0..WARP_SIZE + m {
            let unit = first_unit + k;
            out.push(separator(unit));
            out.push((unit % PAYLOAD_LIMIT as usize) as u8);
            out.extend_from_slice(&strings[k % m]);
        }
        out
    }

    fn bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.groups.concat();
        out.extend_from_slice(&self.tail);
        out
    }

    fn expected(&self) -> Block {
        let spec = self.spec;
        let m = spec.strings();
        let stride = spec.stride();
        let backref = BackRef::new(stride * m, spec.unit_len - 1);
        let mut block = Block::new(0);
        for g in &self.groups {
            // lane 0 carries the intro in its literal
            let intro = stride * m;
            block.push(&g[..intro + 2], Some(backref));
            for lane in 1..WARP_SIZE {
                let at = intro + lane * stride;
                block.push(&g[at..at + 2], Some(backref));
            }
        }
        if !self.tail.is_empty() {
            block.push(&self.tail, None);
        }
        block
    }
}

/// Index of the first group whose sequences differ, or `groups` when only
/// the tail differs.
fn first_mismatch(expected: &Block, actual: &Block) -> Option<usize> {
    let pairs = expected.sequences().zip(actual.sequences());
    for (i, (e, a)) in pairs.enumerate() {
        if e != a {
            return Some(i / WARP_SIZE);
        }
    }
    (expected.len() != actual.len()).then(|| expected.len().min(actual.len()) / WARP_SIZE)
}

fn generate_block(spec: &NestingSpec, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u8>> {
    let n_groups = len / spec.group_len();
    let mut b = BlockBuilder {
        spec,
        groups: Vec::with_capacity(n_groups),
        tail: Vec::new(),
    };
    for g in 0..n_groups {
        let group = b.group(rng, g);
        b.groups.push(group);
    }
    b.tail = payload(rng, len - n_groups * spec.group_len());
    let params = Params {
        block_size: spec.block_size.max(len),
        ..Params::default()
    };
    let mut expected_bytes = b.bytes();
    for _ in 0..MAX_REPAIRS_PER_BLOCK {
        let actual = compress_block(&expected_bytes, &params);
        let Some(g) = first_mismatch(&b.expected(), &actual) else {
            return Ok(expected_bytes);
        };
        for k in g..n_groups {
            b.groups[k] = b.group(rng, k);
        }
        b.tail = payload(rng, b.tail.len());
        expected_bytes = b.bytes();
    }
    Err(Error::GenerationFailed {
        attempts: MAX_REPAIRS_PER_BLOCK,
    })
}

/// A stream whose full groups each need exactly `spec.depth` MRR rounds
/// when compressed by the baseline compressor with `spec.block_size`.
pub fn generate_nested(spec: &NestingSpec) -> Result<Vec<u8>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.total_len);
    let mut start = 0;
    let mut index = 0u64;
    while start < spec.total_len {
        let len = spec.block_size.min(spec.total_len - start);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        out.extend(generate_block(spec, len, &mut rng)?);
        start += len;
        index += 1;
    }
    Ok(out)
}

// Relative letter frequencies of English text, a..z.
const LETTER_WEIGHTS: [u32; 26] = [
    82, 15, 28, 43, 127, 22, 20, 61, 70, 2, 8, 40, 24, 67, 75, 19, 1, 60, 63, 91, 28, 10, 24, 2, 20, 1,
];

fn letter(rng: &mut ChaCha8Rng) -> u8 {
    let total: u32 = LETTER_WEIGHTS.iter().sum();
    let mut x = rng.random_range(0..total);
    for (i, &w) in LETTER_WEIGHTS.iter().enumerate() {
        if x < w {
            return b'a' + i as u8;
        }
        x -= w;
    }
    b'e'
}

const VOCABULARY: usize = 8000;
const ZIPF_EXPONENT: f64 = 1.1;
// Chance that the next words repeat a phrase from the recent past.
const PHRASE_REUSE: f64 = 0.12;
const HISTORY: usize = 4096;

/// Deterministic pseudo-text: Zipf-distributed words from a random
/// vocabulary, recurring phrases, sentences, punctuation and paragraphs.
pub fn generate_text_like(len: usize, seed: u64) -> Vec<u8> {
    if len == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<Vec<u8>> = (0..VOCABULARY)
        .map(|rank| {
            // frequent words are short
            let base = 2 + (rank as f64).log2() as usize / 3;
            let n = (base + rng.random_range(0..5)).clamp(1, 14);
            (0..n).map(|_| letter(&mut rng)).collect()
        })
        .collect();
    let zipf = Zipf::new(VOCABULARY as f64, ZIPF_EXPONENT).expect("valid Zipf parameters");
    let mut history: Vec<usize> = Vec::with_capacity(2 * HISTORY);
    let mut phrase: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(len + 32);
    let mut sentence_left = 0usize;
    let mut sentences_in_paragraph = 0usize;
    while out.len() < len {
        if phrase.is_empty() && history.len() > 16 && rng.random_bool(PHRASE_REUSE) {
            let n = rng.random_range(3..10);
            let start = rng.random_range(0..history.len() - n);
            phrase.extend(history[start..start + n].iter().rev());
        }
        let id = phrase.pop().unwrap_or_else(|| zipf.sample(&mut rng) as usize - 1);
        history.push(id);
        if history.len() == 2 * HISTORY {
            history.drain(..HISTORY);
        }
        let w = &vocab[id];
        if sentence_left == 0 {
            sentence_left = rng.random_range(4..24);
            let mut cap = w.clone();
            cap[0] = cap[0].to_ascii_uppercase();
            out.extend_from_slice(&cap);
        } else {
            out.extend_from_slice(w);
        }
        sentence_left -= 1;
        if sentence_left == 0 {
            out.push(if rng.random_bool(0.1) { b'?' } else { b'.' });
            sentences_in_paragraph += 1;
            if sentences_in_paragraph >= 6 && rng.random_bool(0.3) {
                out.push(b'\n');
                sentences_in_paragraph = 0;
            } else {
                out.push(b' ');
            }
        } else if rng.random_bool(0.06) {
            out.extend_from_slice(b", ");
        } else {
            out.push(b' ');
        }
    }
    out.truncate(len);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::decompress_block;
    use crate::types::Strategy;
    use std::collections::BTreeMap;

    fn rounds(data: &[u8], block_size: usize) -> BTreeMap<u32, u64> {
        let p = Params {
            block_size,
            ..Params::default()
        };
        let mut hist = BTreeMap::new();
        for chunk in data.chunks(block_size) {
            let block = compress_block(chunk, &p);
            let mut out = vec![0; chunk.len()];
            let stats = decompress_block(&block, &mut out, Strategy::Mrr).unwrap();
            assert_eq!(out, chunk);
            for (k, v) in stats.full_group_rounds_histogram {
                *hist.entry(k).or_default() += v;
            }
        }
        hist
    }

    #[test]
    fn invalid_depth_is_rejected() {
        for d in [0, 3, 5, 64] {
            assert!(matches!(generate_nested(&NestingSpec::new(d, 100)), Err(Error::InvalidDepth(_))));
        }
    }

    #[test]
    fn every_depth_yields_a_point_mass() {
        for depth in [1, 2, 4, 8, 16, 32] {
            let mut spec = NestingSpec::new(depth, 150_000);
            spec.block_size = 64 * 1024;
            let data = generate_nested(&spec).unwrap();
            assert_eq!(data.len(), 150_000);
            let hist = rounds(&data, spec.block_size);
            assert_eq!(hist.keys().copied().collect::<Vec<_>>(), vec![depth], "depth {depth}");
            assert!(hist[&depth] > 10);
        }
    }

    #[test]
    fn separators_stay_out_of_payload() {
        let spec = NestingSpec::new(16, 20_000);
        let data = generate_nested(&spec).unwrap();
        let stride = spec.stride();
        for (i, &b) in data.iter().enumerate() {
            if b >= PAYLOAD_LIMIT {
                // only unit starts carry separators
                assert_eq!(i % spec.block_size % spec.group_len() % stride, 0, "byte {i}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = NestingSpec::new(8, 30_000);
        assert_eq!(generate_nested(&spec).unwrap(), generate_nested(&spec).unwrap());
        assert_eq!(generate_text_like(10_000, 7), generate_text_like(10_000, 7));
        assert_ne!(generate_text_like(10_000, 7), generate_text_like(10_000, 8));
        assert!(generate_text_like(0, 7).is_empty());
        assert_eq!(generate_text_like(12_345, 1).len(), 12_345);
    }
}
