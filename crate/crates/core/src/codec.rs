//! Whole-buffer compression and decompression.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::{decompress_file, thread_pool, FileStats};
use crate::entropy::{encode_block_bit, encode_block_byte};
use crate::error::Result;
use crate::format::{write_block, write_file_header, BlockRecord, FileHeader};
use crate::lz77::{compress_block, compress_block_de};
use crate::types::{Block, Mode, Params, Strategy};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressSummary {
    pub input_len: u64,
    pub output_len: u64,
    pub blocks: u64,
    pub sequences: u64,
    pub backrefs: u64,
    pub literal_bytes: u64,
}

impl CompressSummary {
    pub fn ratio(&self) -> f64 {
        if self.output_len == 0 {
            0.0
        } else {
            self.input_len as f64 / self.output_len as f64
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// LZ77 stage for one block, honouring `params.de_enabled`.
pub fn tokenize_block(input: &[u8], index: u32, params: &Params) -> Block {
    let mut block = if params.de_enabled {
        compress_block_de(input, params)
    } else {
        compress_block(input, params)
    };
    block.index = index;
    block
}

/// Entropy stage for one block.
pub fn encode_record(block: &Block, params: &Params) -> Result<BlockRecord> {
    Ok(match params.mode {
        Mode::Byte => BlockRecord::from_byte_payload(encode_block_byte(block)?, block.uncompressed_len(), block.len()),
        Mode::Bit => BlockRecord::from_bit_block(encode_block_bit(block, params)?, block.uncompressed_len()),
    })
}

/// Compresses `input` into a container written to `sink`. Blocks are
/// compressed in parallel and written in order.
pub fn compress_to<W: Write>(input: &[u8], params: &Params, workers: usize, sink: &mut W) -> Result<CompressSummary> {
    let header = FileHeader::new(params, input.len() as u64, crc32fast::hash(input))?;
    let pool = thread_pool(workers)?;
    let mut summary = CompressSummary {
        input_len: input.len() as u64,
        output_len: write_file_header(&header, sink)?,
        ..Default::default()
    };
    let chunks: Vec<&[u8]> = input.chunks(params.block_size).collect();
    let batch = 4 * workers.max(1);
    for (b, group) in chunks.chunks(batch).enumerate() {
        let encoded: Vec<Result<(BlockRecord, u64, u64, u64)>> = pool.install(|| {
            group
                .par_iter()
                .enumerate()
                .map(|(i, chunk)| {
                    let block = tokenize_block(chunk, (b * batch + i) as u32, params);
                    let rec = encode_record(&block, params)?;
                    Ok((rec, block.len() as u64, block.backref_count() as u64, block.literal_bytes() as u64))
                })
                .collect()
        });
        for r in encoded {
            let (rec, seqs, refs, lits) = r?;
            summary.output_len += write_block(&rec, sink)?;
            summary.blocks += 1;
            summary.sequences += seqs;
            summary.backrefs += refs;
            summary.literal_bytes += lits;
        }
    }
    Ok(summary)
}

pub fn compress(input: &[u8], params: &Params) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(input.len() / 2 + 64);
    compress_to(input, params, default_workers(), &mut out)?;
    Ok(out)
}

pub fn decompress_with(data: &[u8], strategy: Strategy, workers: usize) -> Result<(Vec<u8>, FileStats)> {
    let mut out = Vec::new();
    let stats = decompress_file(data, &mut out, strategy, workers)?;
    Ok((out, stats))
}

pub fn decompress(data: &[u8]) -> Result<Vec<u8>> {
    Ok(decompress_with(data, Strategy::Mrr, default_workers())?.0)
}
