//! Two-tree Huffman coding of a block, framed in sub-blocks.
//!
//! A sequence is its literal bytes as litlen codes, closed by either a
//! length-bin code (plus extra bits, a dist code and its extra bits) or the
//! end-of-block code. Sub-block `k` holds sequences `[k*S, (k+1)*S)`; their
//! bit strings are concatenated without padding and the payload is padded
//! to a byte once at the end.

use super::bins::{self, DIST_SYMBOLS, END_OF_BLOCK, FIRST_LENGTH_SYMBOL, LITLEN_SYMBOLS};
use super::bits::{BitReader, BitWriter};
use super::huffman::{build_limited_huffman, HuffmanTable};
use crate::error::{Error, Result};
use crate::types::{BackRef, Block, Params, Sequence, SequenceRef, MAX_MATCH, MIN_MATCH};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitBlock {
    pub litlen: HuffmanTable,
    pub dist: HuffmanTable,
    pub payload: Vec<u8>,
    pub sub_block_bits: Vec<u32>,
    pub seq_count: usize,
}

impl BitBlock {
    /// Start bit of every sub-block (exclusive prefix sum of the sizes).
    pub fn sub_block_offsets(&self) -> Vec<u64> {
        sub_block_offsets(&self.sub_block_bits)
    }

    pub fn total_bits(&self) -> u64 {
        self.sub_block_bits.iter().map(|&b| b as u64).sum()
    }
}

pub fn sub_block_offsets(sizes: &[u32]) -> Vec<u64> {
    let mut acc = 0u64;
    sizes
        .iter()
        .map(|&s| {
            let start = acc;
            acc += s as u64;
            start
        })
        .collect()
}

/// Sequences in sub-block `k` of a block with `seq_count` sequences.
pub fn sub_block_len(seq_count: usize, sub_block_seqs: usize, k: usize) -> usize {
    seq_count.saturating_sub(k * sub_block_seqs).min(sub_block_seqs)
}

fn check_backref(b: BackRef) -> Result<()> {
    if !(MIN_MATCH..=MAX_MATCH).contains(&b.length) {
        return Err(Error::InvalidParams(format!("bit mode cannot code a match of {} bytes", b.length)));
    }
    if !(1..=bins::MAX_DISTANCE).contains(&b.distance) {
        return Err(Error::InvalidParams(format!("bit mode cannot code distance {}", b.distance)));
    }
    Ok(())
}

/// Empty table, used for an alphabet with no occurrences.
fn unused_table(symbols: usize, cwl_max: u8) -> Result<HuffmanTable> {
    HuffmanTable::from_lengths(&vec![0; symbols], cwl_max)
}

fn table_for(freqs: &[u64], cwl_max: u8) -> Result<HuffmanTable> {
    if freqs.iter().all(|&f| f == 0) {
        unused_table(freqs.len(), cwl_max)
    } else {
        build_limited_huffman(freqs, cwl_max)
    }
}

fn encode_sequence(w: &mut BitWriter, seq: SequenceRef<'_>, litlen: &HuffmanTable, dist: &HuffmanTable) {
    for &b in seq.literal {
        litlen.encode(w, b as usize);
    }
    match seq.backref {
        Some(b) => {
            let (bin, n, v) = bins::length_bin(b.length);
            litlen.encode(w, FIRST_LENGTH_SYMBOL + bin);
            w.write_lsb_first(v, n);
            let (code, n, v) = bins::dist_bin(b.distance);
            dist.encode(w, code);
            w.write_lsb_first(v, n);
        }
        None => litlen.encode(w, END_OF_BLOCK),
    }
}

pub fn encode_block_bit(block: &Block, params: &Params) -> Result<BitBlock> {
    let s = params.sub_block_seqs;
    if s == 0 {
        return Err(Error::InvalidParams("sub_block_seqs must be positive".into()));
    }
    let mut litlen_freq = vec![0u64; LITLEN_SYMBOLS];
    let mut dist_freq = vec![0u64; DIST_SYMBOLS];
    for seq in block.sequences() {
        for &b in seq.literal {
            litlen_freq[b as usize] += 1;
        }
        match seq.backref {
            Some(b) => {
                check_backref(b)?;
                litlen_freq[FIRST_LENGTH_SYMBOL + bins::length_bin(b.length).0] += 1;
                dist_freq[bins::dist_bin(b.distance).0] += 1;
            }
            None => litlen_freq[END_OF_BLOCK] += 1,
        }
    }
    let litlen = table_for(&litlen_freq, params.cwl_max)?;
    let dist = table_for(&dist_freq, params.cwl_max)?;

    let mut w = BitWriter::new();
    let mut sub_block_bits = Vec::with_capacity(block.len().div_ceil(s));
    let mut start = 0u64;
    for (i, seq) in block.sequences().enumerate() {
        encode_sequence(&mut w, seq, &litlen, &dist);
        if (i + 1) % s == 0 || i + 1 == block.len() {
            let size = u32::try_from(w.bit_len() - start).map_err(|_| Error::Overflow)?;
            sub_block_bits.push(size);
            start = w.bit_len();
        }
    }
    Ok(BitBlock {
        litlen,
        dist,
        payload: w.finish(),
        sub_block_bits,
        seq_count: block.len(),
    })
}

/// Decodes `max_seqs` sequences from exactly `bit_len` bits at `start_bit`,
/// appending them to `out`. The block may not grow past `max_output` bytes.
#[allow(clippy::too_many_arguments)]
pub fn decode_sub_block_into(
    payload: &[u8],
    start_bit: u64,
    bit_len: u64,
    litlen: &HuffmanTable,
    dist: &HuffmanTable,
    max_seqs: usize,
    max_output: usize,
    out: &mut Block,
) -> Result<()> {
    let mut r = BitReader::with_range(payload, start_bit, bit_len)?;
    let mut literal = Vec::new();
    for _ in 0..max_seqs {
        literal.clear();
        let backref = loop {
            let sym = litlen.decode(&mut r)?;
            if sym < 256 {
                if out.uncompressed_len() + literal.len() >= max_output {
                    return Err(Error::CorruptStream("sequences exceed the block length"));
                }
                literal.push(sym as u8);
            } else if sym == END_OF_BLOCK {
                break None;
            } else {
                let bin = sym - FIRST_LENGTH_SYMBOL;
                let length = bins::length_from_bin(bin, r.read_lsb_first(bins::length_extra_bits(bin))?);
                let code = dist.decode(&mut r)?;
                let distance = bins::dist_from_bin(code, r.read_lsb_first(bins::dist_extra_bits(code))?);
                if distance > crate::types::MAX_WINDOW {
                    return Err(Error::CorruptStream("distance beyond the window"));
                }
                break Some(BackRef::new(distance, length));
            }
        };
        let grows = literal.len() + backref.map_or(0, |b| b.length);
        if out.uncompressed_len() + grows > max_output {
            return Err(Error::CorruptStream("sequences exceed the block length"));
        }
        out.push(&literal, backref);
    }
    if r.remaining() != 0 {
        return Err(Error::CorruptStream("sub-block leaves unread bits"));
    }
    Ok(())
}

/// Decodes one sub-block on its own.
pub fn decode_sub_block(
    payload: &[u8],
    start_bit: u64,
    bit_len: u64,
    litlen: &HuffmanTable,
    dist: &HuffmanTable,
    max_seqs: usize,
) -> Result<Vec<Sequence>> {
    let mut b = Block::new(0);
    decode_sub_block_into(payload, start_bit, bit_len, litlen, dist, max_seqs, usize::MAX, &mut b)?;
    Ok(b.to_sequences())
}

/// Decodes every sub-block of `bb` into one block.
pub fn decode_block_bit(bb: &BitBlock, sub_block_seqs: usize, index: u32, max_output: usize) -> Result<Block> {
    let expected = bb.seq_count.div_ceil(sub_block_seqs.max(1));
    if bb.sub_block_bits.len() != expected {
        return Err(Error::HeaderInconsistent("sub_block_count"));
    }
    let mut block = Block::new(index);
    let mut start = 0u64;
    for (k, &bits) in bb.sub_block_bits.iter().enumerate() {
        let n = sub_block_len(bb.seq_count, sub_block_seqs, k);
        decode_sub_block_into(&bb.payload, start, bits as u64, &bb.litlen, &bb.dist, n, max_output, &mut block)?;
        start += bits as u64;
    }
    if start.div_ceil(8) != bb.payload.len() as u64 {
        return Err(Error::HeaderInconsistent("sub_block_bit_sizes"));
    }
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::MAX_WINDOW;
    use proptest::prelude::*;

    fn params(s: usize) -> Params {
        Params {
            sub_block_seqs: s,
            ..Params::default()
        }
    }

    fn round_trip(block: &Block, s: usize) -> Block {
        let bb = encode_block_bit(block, &params(s)).unwrap();
        assert_eq!(bb.total_bits().div_ceil(8), bb.payload.len() as u64);
        decode_block_bit(&bb, s, block.index, block.uncompressed_len()).unwrap()
    }

    #[test]
    fn empty_block_has_no_sub_blocks() {
        let bb = encode_block_bit(&Block::new(0), &params(16)).unwrap();
        assert!(bb.sub_block_bits.is_empty());
        assert!(bb.payload.is_empty());
        assert!(decode_block_bit(&bb, 16, 0, 0).unwrap().is_empty());
    }

    #[test]
    fn seventeen_sequences_make_two_sub_blocks() {
        let mut b = Block::new(0);
        for i in 0..16u8 {
            b.push(&[i], Some(BackRef::new(1, 4)));
        }
        b.push(b"end", None);
        let bb = encode_block_bit(&b, &params(16)).unwrap();
        assert_eq!(bb.sub_block_bits.len(), 2);
        assert_eq!(sub_block_len(17, 16, 0), 16);
        assert_eq!(sub_block_len(17, 16, 1), 1);
        assert_eq!(round_trip(&b, 16), b);
    }

    #[test]
    fn literal_only_final_sequence() {
        let b = Block::from_sequences(0, [Sequence::new(*b"z", None)]);
        let bb = encode_block_bit(&b, &params(16)).unwrap();
        let seqs = decode_sub_block(&bb.payload, 0, bb.sub_block_bits[0] as u64, &bb.litlen, &bb.dist, 1).unwrap();
        assert_eq!(seqs, vec![Sequence::new(*b"z", None)]);
    }

    #[test]
    fn bare_backref_uses_both_trees() {
        let b = Block::from_sequences(
            0,
            [Sequence::new(*b"abc", None), Sequence::new(Vec::new(), Some(BackRef::new(3, 4)))],
        );
        // literal-only first sequence is legal for the bit codec
        let bb = encode_block_bit(&b, &params(1)).unwrap();
        let offs = bb.sub_block_offsets();
        let seqs = decode_sub_block(&bb.payload, offs[1], bb.sub_block_bits[1] as u64, &bb.litlen, &bb.dist, 1).unwrap();
        assert_eq!(seqs, vec![Sequence::new(Vec::new(), Some(BackRef::new(3, 4)))]);
        let len_sym = FIRST_LENGTH_SYMBOL + bins::length_bin(4).0;
        let expect = bb.litlen.code(len_sym).1 as u32 + bb.dist.code(bins::dist_bin(3).0).1 as u32;
        assert_eq!(bb.sub_block_bits[1], expect);
    }

    #[test]
    fn wrong_budget_is_corrupt() {
        let mut b = Block::new(0);
        for i in 0..40u8 {
            b.push(&[i, i / 2], Some(BackRef::new(2, 4 + i as usize)));
        }
        let mut bb = encode_block_bit(&b, &params(16)).unwrap();
        bb.sub_block_bits[0] += 1;
        bb.sub_block_bits[1] -= 1;
        assert!(decode_block_bit(&bb, 16, 0, usize::MAX).is_err());
    }

    #[test]
    fn output_limit_is_enforced() {
        let b = Block::from_sequences(0, [Sequence::new(*b"abcdef", Some(BackRef::new(6, 60)))]);
        let bb = encode_block_bit(&b, &params(16)).unwrap();
        assert!(decode_block_bit(&bb, 16, 0, 65).is_err());
        assert!(decode_block_bit(&bb, 16, 0, 66).is_ok());
    }

    fn arb_block() -> impl Strategy<Value = Block> {
        let seq = (prop::collection::vec(0u8..8, 0..40), 1usize..=MAX_WINDOW, MIN_MATCH..=MAX_MATCH);
        (prop::collection::vec(seq, 0..80), prop::collection::vec(any::<u8>(), 0..10), any::<bool>()).prop_map(
            |(seqs, tail, with_tail)| {
                let mut b = Block::new(0);
                for (lit, d, l) in seqs {
                    b.push(&lit, Some(BackRef::new(d, l)));
                }
                if with_tail {
                    b.push(&tail, None);
                }
                b
            },
        )
    }

    proptest! {
        #[test]
        fn round_trip_any_sub_block_size(block in arb_block(), s in 1usize..40) {
            prop_assert_eq!(round_trip(&block, s), block);
        }

        #[test]
        fn sub_blocks_decode_independently(block in arb_block(), s in 1usize..10) {
            let bb = encode_block_bit(&block, &params(s)).unwrap();
            let all = block.to_sequences();
            for (k, off) in bb.sub_block_offsets().into_iter().enumerate() {
                let n = sub_block_len(block.len(), s, k);
                let seqs = decode_sub_block(&bb.payload, off, bb.sub_block_bits[k] as u64, &bb.litlen, &bb.dist, n).unwrap();
                prop_assert_eq!(&seqs[..], &all[k * s..k * s + n]);
            }
        }
    }
}
