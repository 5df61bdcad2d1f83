//! Warp-level decompression of blocks.
//!
//! Each block is handled by one warp, 32 sequences at a time. A group goes
//! through three phases: two exclusive prefix sums place every lane's
//! literal and output, all literals are copied, then back-references are
//! resolved either lane by lane (SC) or by multi-round resolution (MRR).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{decode_block_bit, decode_block_byte};
use crate::error::{Error, Result};
use crate::format::{BlockRecord, FileHeader, FileReader};
use crate::types::{Block, Mode, SeqRecord, Strategy, WARP_SIZE};
use crate::warp::{Lanes, Warp};

/// Round statistics of one or more blocks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompStats {
    pub groups: u64,
    pub full_groups: u64,
    /// Rounds per group over every group.
    pub rounds_histogram: BTreeMap<u32, u64>,
    /// Rounds per group over groups of 32 sequences only.
    pub full_group_rounds_histogram: BTreeMap<u32, u64>,
    /// Entry `r` is the number of bytes copied in round `r + 1`.
    pub bytes_per_round: Vec<u64>,
    pub backrefs_per_round: Vec<u64>,
}

impl DecompStats {
    fn record_group(&mut self, lanes: usize, rounds: u32) {
        self.groups += 1;
        *self.rounds_histogram.entry(rounds).or_default() += 1;
        if lanes == WARP_SIZE {
            self.full_groups += 1;
            *self.full_group_rounds_histogram.entry(rounds).or_default() += 1;
        }
    }

    fn record_round(&mut self, round: u32, bytes: u64, backrefs: u64) {
        let r = round as usize - 1;
        if self.bytes_per_round.len() <= r {
            self.bytes_per_round.resize(r + 1, 0);
            self.backrefs_per_round.resize(r + 1, 0);
        }
        self.bytes_per_round[r] += bytes;
        self.backrefs_per_round[r] += backrefs;
    }

    pub fn merge(&mut self, other: &DecompStats) {
        self.groups += other.groups;
        self.full_groups += other.full_groups;
        for (&k, &v) in &other.rounds_histogram {
            *self.rounds_histogram.entry(k).or_default() += v;
        }
        for (&k, &v) in &other.full_group_rounds_histogram {
            *self.full_group_rounds_histogram.entry(k).or_default() += v;
        }
        let n = self.bytes_per_round.len().max(other.bytes_per_round.len());
        self.bytes_per_round.resize(n, 0);
        self.backrefs_per_round.resize(n, 0);
        for (i, (&b, &c)) in other.bytes_per_round.iter().zip(&other.backrefs_per_round).enumerate() {
            self.bytes_per_round[i] += b;
            self.backrefs_per_round[i] += c;
        }
    }

    pub fn total_rounds(&self) -> u64 {
        self.rounds_histogram.iter().map(|(&r, &n)| r as u64 * n).sum()
    }

    pub fn mean_rounds_per_group(&self) -> f64 {
        if self.groups == 0 {
            0.0
        } else {
            self.total_rounds() as f64 / self.groups as f64
        }
    }

    pub fn max_rounds(&self) -> u32 {
        self.rounds_histogram.keys().next_back().copied().unwrap_or(0)
    }
}

/// Where each lane of a group reads its literal and writes its output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupLayout {
    pub lanes: usize,
    /// Literal offset per lane in the block's literal arena.
    pub lit_offsets: Lanes<usize>,
    /// Output offset per lane within the block.
    pub out_offsets: Lanes<usize>,
    pub lit_base: usize,
    pub out_base: usize,
    pub out_end: usize,
}

impl GroupLayout {
    /// Runs the two exclusive prefix sums for `records` (at most 32).
    pub fn compute(warp: &Warp, records: &[SeqRecord], lit_base: usize, out_base: usize) -> Result<Self> {
        let lanes = records.len();
        debug_assert!(lanes <= WARP_SIZE && warp.active_lanes() == lanes);
        let mut lit_lens = [0u32; WARP_SIZE];
        let mut out_lens = [0u32; WARP_SIZE];
        for (lane, r) in records.iter().enumerate() {
            lit_lens[lane] = r.lit_len;
            out_lens[lane] = u32::try_from(r.output_len()).map_err(|_| Error::Overflow)?;
        }
        let lit = warp.exclusive_prefix_sum(&lit_lens)?;
        let out = warp.exclusive_prefix_sum(&out_lens)?;
        let group_out = lanes.checked_sub(1).map_or(0, |l| out[l] as usize + out_lens[l] as usize);
        Ok(GroupLayout {
            lanes,
            lit_offsets: std::array::from_fn(|l| lit_base + lit[l] as usize),
            out_offsets: std::array::from_fn(|l| out_base + out[l] as usize),
            lit_base,
            out_base,
            out_end: out_base + group_out,
        })
    }
}

/// Phase (b): every lane copies its literal to its output offset.
pub fn copy_literals_group(records: &[SeqRecord], literals: &[u8], layout: &GroupLayout, out: &mut [u8]) {
    for (lane, r) in records.iter().enumerate() {
        let n = r.lit_len as usize;
        let src = layout.lit_offsets[lane];
        let dst = layout.out_offsets[lane];
        out[dst..dst + n].copy_from_slice(&literals[src..src + n]);
    }
}

/// Front-to-back copy, so overlapping sources replicate bytes.
#[inline]
fn copy_backref(out: &mut [u8], read_pos: usize, write_pos: usize, length: usize) {
    if read_pos + length <= write_pos {
        out.copy_within(read_pos..read_pos + length, write_pos);
    } else {
        for i in 0..length {
            out[write_pos + i] = out[read_pos + i];
        }
    }
}

/// Per-lane back-reference work of a group under MRR.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MrrState {
    pub pending: Lanes<bool>,
    pub read_pos: Lanes<usize>,
    pub write_pos: Lanes<usize>,
    pub length: Lanes<usize>,
    pub hwm: usize,
    pub group_end: usize,
    pub rounds: u32,
}

impl MrrState {
    /// Lanes with a back-reference start pending; the mark starts at the
    /// first pending write position (all literals are already in place).
    pub fn new(warp: &Warp, records: &[SeqRecord], layout: &GroupLayout) -> Result<Self> {
        let mut s = MrrState {
            pending: [false; WARP_SIZE],
            read_pos: [0; WARP_SIZE],
            write_pos: [0; WARP_SIZE],
            length: [0; WARP_SIZE],
            hwm: layout.out_base,
            group_end: layout.out_end,
            rounds: 0,
        };
        for (lane, r) in records.iter().enumerate() {
            if let Some(b) = r.backref() {
                let write = layout.out_offsets[lane] + r.lit_len as usize;
                if b.distance > write {
                    return Err(Error::MalformedBackRef {
                        position: write,
                        distance: b.distance,
                    });
                }
                s.pending[lane] = true;
                s.read_pos[lane] = write - b.distance;
                s.write_pos[lane] = write;
                s.length[lane] = b.length;
            }
        }
        s.hwm = s.gap_free_mark(warp)?;
        Ok(s)
    }

    /// Write position of the lowest pending lane, or the group's end.
    fn gap_free_mark(&self, warp: &Warp) -> Result<usize> {
        match warp.ballot(&self.pending).lowest() {
            Some(lane) => Ok(warp.shuffle(&self.write_pos, lane)?[0]),
            None => Ok(self.group_end),
        }
    }

    #[inline]
    fn resolvable(&self, lane: usize) -> bool {
        self.pending[lane] && (self.read_pos[lane] + self.length[lane]).min(self.write_pos[lane]) <= self.hwm
    }
}

/// Resolves all pending back-references of a group; returns the rounds used.
pub fn mrr_resolve_group(state: &mut MrrState, warp: &Warp, out: &mut [u8], stats: &mut DecompStats) -> Result<u32> {
    loop {
        let votes = warp.ballot(&state.pending);
        if !votes.any() {
            return Ok(state.rounds);
        }
        state.rounds += 1;
        let ready: Lanes<bool> = std::array::from_fn(|lane| state.resolvable(lane));
        let ready = warp.ballot(&ready);
        if !ready.any() {
            return Err(Error::NoProgress { round: state.rounds });
        }
        let mut bytes = 0u64;
        for lane in (0..WARP_SIZE).filter(|&l| ready.is_set(l)) {
            copy_backref(out, state.read_pos[lane], state.write_pos[lane], state.length[lane]);
            state.pending[lane] = false;
            bytes += state.length[lane] as u64;
        }
        stats.record_round(state.rounds, bytes, ready.count() as u64);
        let next = state.gap_free_mark(warp)?;
        debug_assert!(next > state.hwm || !warp.ballot(&state.pending).any());
        state.hwm = next;
    }
}

/// SC: lanes copy their back-references one after another in lane order.
/// Each copy counts as one round.
fn sc_resolve_group(records: &[SeqRecord], layout: &GroupLayout, out: &mut [u8], stats: &mut DecompStats) -> Result<u32> {
    let mut rounds = 0;
    for (lane, r) in records.iter().enumerate() {
        if let Some(b) = r.backref() {
            let write = layout.out_offsets[lane] + r.lit_len as usize;
            if b.distance > write {
                return Err(Error::MalformedBackRef {
                    position: write,
                    distance: b.distance,
                });
            }
            copy_backref(out, write - b.distance, write, b.length);
            rounds += 1;
            stats.record_round(rounds, b.length as u64, 1);
        }
    }
    Ok(rounds)
}

/// Expands `block` into `out`, which must be exactly the block's length.
pub fn decompress_block(block: &Block, out: &mut [u8], strategy: Strategy) -> Result<DecompStats> {
    if out.len() != block.uncompressed_len() {
        return Err(Error::CorruptStream("output region does not match the block length"));
    }
    let mut stats = DecompStats::default();
    let literals = block.literals();
    let (mut lit_base, mut out_base) = (0usize, 0usize);
    for group in block.records().chunks(WARP_SIZE) {
        let warp = Warp::with_active_lanes(group.len());
        let layout = GroupLayout::compute(&warp, group, lit_base, out_base)?;
        copy_literals_group(group, literals, &layout, out);
        let rounds = match strategy {
            Strategy::Sc => sc_resolve_group(group, &layout, out, &mut stats)?,
            Strategy::Mrr => {
                let mut state = MrrState::new(&warp, group, &layout)?;
                mrr_resolve_group(&mut state, &warp, out, &mut stats)?
            }
        };
        stats.record_group(group.len(), rounds);
        lit_base = layout.lit_offsets[group.len() - 1] + group[group.len() - 1].lit_len as usize;
        out_base = layout.out_end;
    }
    Ok(stats)
}

/// Decodes the tokens of one container block.
pub fn decode_record(header: &FileHeader, index: u32, rec: BlockRecord) -> Result<Block> {
    let expect = header.block_len(index);
    let seq_count = rec.header.seq_count as usize;
    let block = match header.mode {
        Mode::Byte => decode_block_byte(&rec.payload, index, expect)?,
        Mode::Bit => {
            let bb = rec.into_bit_block(header.cwl_max)?;
            decode_block_bit(&bb, header.sub_block_seqs as usize, index, expect)?
        }
    };
    if block.len() != seq_count {
        return Err(Error::HeaderInconsistent("seq_count"));
    }
    if block.uncompressed_len() != expect {
        return Err(Error::CorruptStream("sequences do not fill the block"));
    }
    Ok(block)
}

/// Decodes and expands one container block.
pub fn decompress_record(header: &FileHeader, index: u32, rec: BlockRecord, strategy: Strategy) -> Result<(Vec<u8>, DecompStats)> {
    let block = decode_record(header, index, rec)?;
    let mut out = vec![0u8; block.uncompressed_len()];
    let stats = decompress_block(&block, &mut out, strategy)?;
    Ok((out, stats))
}

/// Statistics of a whole file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileStats {
    pub total: DecompStats,
    pub blocks: Vec<DecompStats>,
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot start {workers} workers: {e}")))
}

/// Streams a container from `src` to `sink`, decoding `workers` blocks at a
/// time in parallel. Output is written in block order, so a failure leaves
/// a correct prefix in the sink.
pub fn decompress_file<R: Read, W: Write>(src: R, sink: &mut W, strategy: Strategy, workers: usize) -> Result<FileStats> {
    let mut reader = FileReader::new(src)?;
    let header = reader.header().clone();
    let pool = thread_pool(workers)?;
    let batch = workers.max(1);
    let mut stats = FileStats::default();
    let mut crc = crc32fast::Hasher::new();
    let mut written = 0u64;
    let mut index = 0u32;
    loop {
        let mut recs = Vec::with_capacity(batch);
        for rec in reader.by_ref().take(batch) {
            recs.push((index, rec?));
            index += 1;
        }
        if recs.is_empty() {
            break;
        }
        let results: Vec<_> = pool.install(|| {
            recs.into_par_iter()
                .map(|(i, rec)| decompress_record(&header, i, rec, strategy).map_err(|e| e.in_block(i)))
                .collect()
        });
        for r in results {
            let (out, s) = r?;
            crc.update(&out);
            sink.write_all(&out)?;
            written += out.len() as u64;
            stats.total.merge(&s);
            stats.blocks.push(s);
        }
    }
    reader.finish()?;
    if written != header.total_len {
        return Err(Error::HeaderInconsistent("total_len"));
    }
    let actual = crc.finalize();
    if actual != header.crc32 {
        return Err(Error::ChecksumMismatch {
            expected: header.crc32,
            actual,
        });
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{sequences_to_bytes, BackRef, Sequence, Strategy};
    use proptest::prelude::{any, prop, proptest, prop_assert, prop_assert_eq, Strategy as _};

    fn run(block: &Block, strategy: Strategy) -> Result<(Vec<u8>, DecompStats)> {
        let mut out = vec![0u8; block.uncompressed_len()];
        let stats = decompress_block(block, &mut out, strategy)?;
        Ok((out, stats))
    }

    #[test]
    fn literal_only_block_takes_no_rounds() {
        let block = Block::from_sequences(0, [Sequence::new(*b"hello", None)]);
        let (out, stats) = run(&block, Strategy::Mrr).unwrap();
        assert_eq!(out, b"hello");
        assert_eq!(stats.rounds_histogram, BTreeMap::from([(0, 1)]));
    }

    #[test]
    fn conflict_example_takes_two_rounds() {
        // Lane 1 and lane 2 both copy from bytes that lane 0's reference
        // writes; lane 0 reads only literal bytes.
        let block = Block::from_sequences(
            0,
            [
                Sequence::new(*b"abcd", Some(BackRef::new(4, 4))),
                Sequence::new(*b"x", Some(BackRef::new(5, 4))),
                Sequence::new(*b"y", Some(BackRef::new(10, 4))),
            ],
        );
        let oracle = sequences_to_bytes(&block).unwrap();
        let (out, stats) = run(&block, Strategy::Mrr).unwrap();
        assert_eq!(out, oracle);
        assert_eq!(stats.rounds_histogram, BTreeMap::from([(2, 1)]));
        assert_eq!(stats.backrefs_per_round, vec![1, 2]);
        assert_eq!(stats.bytes_per_round, vec![4, 8]);
        assert_eq!(run(&block, Strategy::Sc).unwrap().0, oracle);
    }

    #[test]
    fn references_below_the_group_take_one_round() {
        let mut second = Block::new(0);
        second.push(&[1u8; 4000], Some(BackRef::new(4000, 4)));
        for _ in 0..40 {
            second.push(b"z", Some(BackRef::new(3000, 8)));
        }
        let (out, stats) = run(&second, Strategy::Mrr).unwrap();
        assert_eq!(out, sequences_to_bytes(&second).unwrap());
        assert_eq!(stats.full_group_rounds_histogram, BTreeMap::from([(1, 1)]));
    }

    #[test]
    fn chain_of_32_takes_32_rounds() {
        // Lane i copies the bytes lane i-1 just produced.
        let mut block = Block::new(0);
        block.push(b"seed", Some(BackRef::new(4, 4)));
        for _ in 1..32 {
            block.push(b"", Some(BackRef::new(4, 4)));
        }
        let (out, stats) = run(&block, Strategy::Mrr).unwrap();
        assert_eq!(out, b"seed".repeat(33));
        assert_eq!(stats.full_group_rounds_histogram, BTreeMap::from([(32, 1)]));
        assert_eq!(stats.backrefs_per_round, vec![1; 32]);
    }

    #[test]
    fn overlapping_self_reference_resolves() {
        let block = Block::from_sequences(
            0,
            [
                Sequence::new(*b"ab", Some(BackRef::new(2, 30))),
                Sequence::new(*b"c", Some(BackRef::new(1, 5))),
            ],
        );
        assert_eq!(run(&block, Strategy::Mrr).unwrap().0, sequences_to_bytes(&block).unwrap());
    }

    #[test]
    fn reference_before_block_is_malformed() {
        let block = Block::from_sequences(0, [Sequence::new(*b"ab", Some(BackRef::new(3, 4)))]);
        for s in [Strategy::Sc, Strategy::Mrr] {
            assert!(matches!(run(&block, s), Err(Error::MalformedBackRef { position: 2, distance: 3 })));
        }
    }

    #[test]
    fn literal_offsets_match_a_sequential_scan() {
        let block = Block::from_sequences(
            0,
            [
                Sequence::new(*b"a", Some(BackRef::new(1, 5))),
                Sequence::new(*b"bb", Some(BackRef::new(2, 6))),
                Sequence::new(*b"ccc", None),
            ],
        );
        let warp = Warp::with_active_lanes(3);
        let layout = GroupLayout::compute(&warp, block.records(), 0, 0).unwrap();
        assert_eq!(&layout.out_offsets[..3], &[0, 1 + 5, 3 + 5 + 6]);
        assert_eq!(&layout.lit_offsets[..3], &[0, 1, 3]);
        let mut out = vec![b'.'; block.uncompressed_len()];
        copy_literals_group(block.records(), block.literals(), &layout, &mut out);
        assert_eq!(out, b"a.....bb......ccc");
    }

    #[test]
    fn stats_merge_adds_up() {
        let mut a = DecompStats::default();
        a.record_group(32, 2);
        a.record_round(1, 10, 1);
        a.record_round(2, 5, 1);
        let mut b = DecompStats::default();
        b.record_group(7, 1);
        b.record_round(1, 3, 1);
        a.merge(&b);
        assert_eq!(a.groups, 2);
        assert_eq!(a.full_groups, 1);
        assert_eq!(a.bytes_per_round, vec![13, 5]);
        assert_eq!(a.total_rounds(), 3);
        assert_eq!(a.rounds_histogram.values().sum::<u64>(), a.groups);
    }

    fn arb_block() -> impl proptest::strategy::Strategy<Value = Block> {
        let seq = (prop::collection::vec(any::<u8>(), 0..12), 1usize..200, 4usize..70);
        prop::collection::vec(seq, 1..150).prop_map(|seqs| {
            let mut b = Block::new(0);
            for (lit, d, l) in seqs {
                let pos = b.uncompressed_len() + lit.len();
                if pos == 0 {
                    b.push(&[0], None);
                    continue;
                }
                b.push(&lit, Some(BackRef::new(d.min(pos), l)));
            }
            b
        })
    }

    proptest! {
        #[test]
        fn sc_mrr_and_oracle_agree(block in arb_block()) {
            let oracle = sequences_to_bytes(&block).unwrap();
            let (sc, _) = run(&block, Strategy::Sc).unwrap();
            let (mrr, stats) = run(&block, Strategy::Mrr).unwrap();
            prop_assert_eq!(&sc, &oracle);
            prop_assert_eq!(&mrr, &oracle);
            prop_assert!(stats.max_rounds() <= 32);
            prop_assert_eq!(stats.rounds_histogram.values().sum::<u64>(), stats.groups);
        }
    }
}
