//! Container layout. All integers are little-endian.
//!
//! ```text
//! file header (36 bytes)
//!   magic "WRPZ" | version u8 | mode u8 | flags u8 | cwl_max u8
//!   block_size u32 | window_size u32 | sub_block_seqs u16 | reserved u16
//!   total_len u64 | block_count u32 | crc32 u32
//! block, repeated block_count times
//!   compressed_len u32 | uncompressed_len u32 | seq_count u32
//!   sub_block_count u32 | sub_block_bit_sizes u32 * sub_block_count
//!   bit mode only: litlen lengths, dist lengths as (run u8, length u8) pairs
//!   payload (compressed_len bytes)
//! ```
//!
//! `mode` is 0 for byte, 1 for bit. `flags` bit 0 records dependency
//! elimination. `crc32` covers the uncompressed data.

use std::io::{Read, Write};

use serde::Serialize;

use crate::entropy::bins::{DIST_SYMBOLS, LITLEN_SYMBOLS};
use crate::entropy::bit_codec::{sub_block_offsets, BitBlock};
use crate::entropy::HuffmanTable;
use crate::error::{Error, Result};
use crate::types::{Mode, Params, MAX_BLOCK_SIZE, MAX_CWL, MAX_WINDOW, MIN_BIT_MODE_CWL, MIN_MATCH};

pub const MAGIC: [u8; 4] = *b"WRPZ";
pub const VERSION: u8 = 1;
pub const FILE_HEADER_LEN: usize = 36;
const FLAG_DE: u8 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileHeader {
    pub version: u8,
    pub mode: Mode,
    pub de_enabled: bool,
    pub cwl_max: u8,
    pub block_size: u32,
    pub window_size: u32,
    pub sub_block_seqs: u16,
    pub total_len: u64,
    pub block_count: u32,
    pub crc32: u32,
}

impl FileHeader {
    pub fn new(params: &Params, total_len: u64, crc32: u32) -> Result<Self> {
        params.validate()?;
        let block_count = u32::try_from(total_len.div_ceil(params.block_size as u64))
            .map_err(|_| Error::InvalidParams("input has too many blocks".into()))?;
        Ok(FileHeader {
            version: VERSION,
            mode: params.mode,
            de_enabled: params.de_enabled,
            cwl_max: params.cwl_max,
            block_size: params.block_size as u32,
            window_size: params.window_size as u32,
            sub_block_seqs: params.sub_block_seqs as u16,
            total_len,
            block_count,
            crc32,
        })
    }

    /// Uncompressed length of block `index`.
    pub fn block_len(&self, index: u32) -> usize {
        let start = index as u64 * self.block_size as u64;
        (self.total_len - start).min(self.block_size as u64) as usize
    }

    /// The decoding-relevant parameters recorded in the header.
    pub fn params(&self) -> Params {
        Params {
            block_size: self.block_size as usize,
            window_size: self.window_size as usize,
            sub_block_seqs: self.sub_block_seqs as usize,
            cwl_max: self.cwl_max,
            mode: self.mode,
            de_enabled: self.de_enabled,
            ..Params::default()
        }
    }

    pub fn to_bytes(&self) -> [u8; FILE_HEADER_LEN] {
        let mut b = [0u8; FILE_HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4] = self.version;
        b[5] = match self.mode {
            Mode::Byte => 0,
            Mode::Bit => 1,
        };
        b[6] = if self.de_enabled { FLAG_DE } else { 0 };
        b[7] = self.cwl_max;
        b[8..12].copy_from_slice(&self.block_size.to_le_bytes());
        b[12..16].copy_from_slice(&self.window_size.to_le_bytes());
        b[16..18].copy_from_slice(&self.sub_block_seqs.to_le_bytes());
        b[20..28].copy_from_slice(&self.total_len.to_le_bytes());
        b[28..32].copy_from_slice(&self.block_count.to_le_bytes());
        b[32..36].copy_from_slice(&self.crc32.to_le_bytes());
        b
    }

    pub fn parse(b: &[u8; FILE_HEADER_LEN]) -> Result<Self> {
        let magic = [b[0], b[1], b[2], b[3]];
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if b[4] != VERSION {
            return Err(Error::UnsupportedVersion(b[4]));
        }
        let mode = match b[5] {
            0 => Mode::Byte,
            1 => Mode::Bit,
            _ => return Err(Error::HeaderInconsistent("mode")),
        };
        if b[6] & !FLAG_DE != 0 {
            return Err(Error::HeaderInconsistent("flags"));
        }
        let u32_at = |i: usize| u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]);
        let h = FileHeader {
            version: b[4],
            mode,
            de_enabled: b[6] & FLAG_DE != 0,
            cwl_max: b[7],
            block_size: u32_at(8),
            window_size: u32_at(12),
            sub_block_seqs: u16::from_le_bytes([b[16], b[17]]),
            total_len: u64::from_le_bytes(b[20..28].try_into().unwrap()),
            block_count: u32_at(28),
            crc32: u32_at(32),
        };
        if b[18] != 0 || b[19] != 0 {
            return Err(Error::HeaderInconsistent("reserved"));
        }
        let min_cwl = if mode == Mode::Bit { MIN_BIT_MODE_CWL } else { 1 };
        if !(min_cwl..=MAX_CWL).contains(&h.cwl_max) {
            return Err(Error::HeaderInconsistent("cwl_max"));
        }
        if h.block_size == 0 || h.block_size as usize > MAX_BLOCK_SIZE {
            return Err(Error::HeaderInconsistent("block_size"));
        }
        if h.window_size == 0 || h.window_size as usize > MAX_WINDOW {
            return Err(Error::HeaderInconsistent("window_size"));
        }
        if h.sub_block_seqs == 0 {
            return Err(Error::HeaderInconsistent("sub_block_seqs"));
        }
        if h.total_len.div_ceil(h.block_size as u64) != h.block_count as u64 {
            return Err(Error::HeaderInconsistent("block_count"));
        }
        Ok(h)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BlockHeader {
    pub compressed_len: u32,
    pub uncompressed_len: u32,
    pub seq_count: u32,
    pub sub_block_bit_sizes: Vec<u32>,
    /// Empty in byte mode.
    pub litlen_lengths: Vec<u8>,
    pub dist_lengths: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockRecord {
    pub header: BlockHeader,
    pub payload: Vec<u8>,
}

impl BlockRecord {
    pub fn from_byte_payload(payload: Vec<u8>, uncompressed_len: usize, seq_count: usize) -> Self {
        BlockRecord {
            header: BlockHeader {
                compressed_len: payload.len() as u32,
                uncompressed_len: uncompressed_len as u32,
                seq_count: seq_count as u32,
                ..Default::default()
            },
            payload,
        }
    }

    pub fn from_bit_block(bb: BitBlock, uncompressed_len: usize) -> Self {
        BlockRecord {
            header: BlockHeader {
                compressed_len: bb.payload.len() as u32,
                uncompressed_len: uncompressed_len as u32,
                seq_count: bb.seq_count as u32,
                sub_block_bit_sizes: bb.sub_block_bits,
                litlen_lengths: bb.litlen.lengths().to_vec(),
                dist_lengths: bb.dist.lengths().to_vec(),
            },
            payload: bb.payload,
        }
    }

    /// Rebuilds the Huffman tables of a bit-mode record.
    pub fn into_bit_block(self, cwl_max: u8) -> Result<BitBlock> {
        Ok(BitBlock {
            litlen: HuffmanTable::from_lengths(&self.header.litlen_lengths, cwl_max)?,
            dist: HuffmanTable::from_lengths(&self.header.dist_lengths, cwl_max)?,
            seq_count: self.header.seq_count as usize,
            sub_block_bits: self.header.sub_block_bit_sizes,
            payload: self.payload,
        })
    }

    pub fn serialized_len(&self) -> usize {
        let h = &self.header;
        16 + 4 * h.sub_block_bit_sizes.len() + 2 * (rle(&h.litlen_lengths).len() + rle(&h.dist_lengths).len()) + self.payload.len()
    }
}

fn rle(lengths: &[u8]) -> Vec<(u8, u8)> {
    let mut runs: Vec<(u8, u8)> = Vec::new();
    for &l in lengths {
        match runs.last_mut() {
            Some((n, v)) if *v == l && *n < u8::MAX => *n += 1,
            _ => runs.push((1, l)),
        }
    }
    runs
}

pub fn write_file_header<W: Write>(header: &FileHeader, sink: &mut W) -> Result<u64> {
    sink.write_all(&header.to_bytes())?;
    Ok(FILE_HEADER_LEN as u64)
}

pub fn write_block<W: Write>(block: &BlockRecord, sink: &mut W) -> Result<u64> {
    let h = &block.header;
    let mut buf = Vec::with_capacity(block.serialized_len() - block.payload.len());
    buf.extend_from_slice(&h.compressed_len.to_le_bytes());
    buf.extend_from_slice(&h.uncompressed_len.to_le_bytes());
    buf.extend_from_slice(&h.seq_count.to_le_bytes());
    buf.extend_from_slice(&(h.sub_block_bit_sizes.len() as u32).to_le_bytes());
    for s in &h.sub_block_bit_sizes {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    for (n, l) in rle(&h.litlen_lengths).into_iter().chain(rle(&h.dist_lengths)) {
        buf.extend_from_slice(&[n, l]);
    }
    sink.write_all(&buf)?;
    sink.write_all(&block.payload)?;
    Ok((buf.len() + block.payload.len()) as u64)
}

/// Writes a whole container and returns the number of bytes written.
pub fn write_file<W: Write>(header: &FileHeader, blocks: &[BlockRecord], sink: &mut W) -> Result<u64> {
    if blocks.len() != header.block_count as usize {
        return Err(Error::HeaderInconsistent("block_count"));
    }
    let mut n = write_file_header(header, sink)?;
    for b in blocks {
        n += write_block(b, sink)?;
    }
    Ok(n)
}

/// Streaming reader; yields block records in file order.
pub struct FileReader<R> {
    src: R,
    header: FileHeader,
    next_index: u32,
    failed: bool,
}

fn read_exact_or<R: Read>(src: &mut R, buf: &mut [u8], field: &'static str) -> Result<()> {
    src.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Truncated(field),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(src: &mut R, field: &'static str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or(src, &mut b, field)?;
    Ok(u32::from_le_bytes(b))
}

/// Largest payload a block of `uncompressed_len` bytes can legitimately need.
pub fn max_payload_len(uncompressed_len: usize) -> usize {
    2 * uncompressed_len + 64
}

impl<R: Read> FileReader<R> {
    pub fn new(mut src: R) -> Result<Self> {
        let mut b = [0u8; FILE_HEADER_LEN];
        read_exact_or(&mut src, &mut b[..4], "magic")?;
        if b[..4] != MAGIC {
            return Err(Error::BadMagic([b[0], b[1], b[2], b[3]]));
        }
        read_exact_or(&mut src, &mut b[4..], "file header")?;
        let header = FileHeader::parse(&b)?;
        Ok(FileReader {
            src,
            header,
            next_index: 0,
            failed: false,
        })
    }

    pub fn header(&self) -> &FileHeader {
        &self.header
    }

    fn read_lengths(&mut self, symbols: usize, field: &'static str) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(symbols);
        while out.len() < symbols {
            let mut pair = [0u8; 2];
            read_exact_or(&mut self.src, &mut pair, field)?;
            let (n, l) = (pair[0] as usize, pair[1]);
            if n == 0 || out.len() + n > symbols || l > self.header.cwl_max {
                return Err(Error::HeaderInconsistent(field));
            }
            out.resize(out.len() + n, l);
        }
        let cwl = self.header.cwl_max;
        let kraft: u64 = out.iter().filter(|&&l| l > 0).map(|&l| 1u64 << (cwl - l)).sum();
        if kraft > 1 << cwl {
            return Err(Error::HeaderInconsistent(field));
        }
        Ok(out)
    }

    fn read_block(&mut self) -> Result<BlockRecord> {
        let h = &self.header;
        let expect_len = h.block_len(self.next_index);
        let (mode, s) = (h.mode, h.sub_block_seqs as usize);
        let compressed_len = read_u32(&mut self.src, "compressed_len")?;
        let uncompressed_len = read_u32(&mut self.src, "uncompressed_len")?;
        let seq_count = read_u32(&mut self.src, "seq_count")?;
        let sub_block_count = read_u32(&mut self.src, "sub_block_count")?;
        if uncompressed_len as usize != expect_len {
            return Err(Error::HeaderInconsistent("uncompressed_len"));
        }
        if seq_count as usize > expect_len / MIN_MATCH + 1 || (expect_len > 0 && seq_count == 0) {
            return Err(Error::HeaderInconsistent("seq_count"));
        }
        if compressed_len as usize > max_payload_len(expect_len) {
            return Err(Error::HeaderInconsistent("compressed_len"));
        }
        let expect_sub_blocks = match mode {
            Mode::Byte => 0,
            Mode::Bit => (seq_count as usize).div_ceil(s),
        };
        if sub_block_count as usize != expect_sub_blocks {
            return Err(Error::HeaderInconsistent("sub_block_count"));
        }
        let mut sizes = Vec::with_capacity(expect_sub_blocks);
        let mut total_bits = 0u64;
        for _ in 0..sub_block_count {
            let s = read_u32(&mut self.src, "sub_block_bit_sizes")?;
            total_bits += s as u64;
            sizes.push(s);
        }
        let (litlen_lengths, dist_lengths) = match mode {
            Mode::Byte => (Vec::new(), Vec::new()),
            Mode::Bit => {
                if total_bits.div_ceil(8) != compressed_len as u64 {
                    return Err(Error::HeaderInconsistent("sub_block_bit_sizes"));
                }
                (
                    self.read_lengths(LITLEN_SYMBOLS, "litlen_lengths")?,
                    self.read_lengths(DIST_SYMBOLS, "dist_lengths")?,
                )
            }
        };
        // grows with the bytes actually present, so a lying length field
        // cannot reserve memory the file does not back
        let mut payload = Vec::with_capacity((compressed_len as usize).min(1 << 16));
        (&mut self.src).take(compressed_len as u64).read_to_end(&mut payload)?;
        if payload.len() != compressed_len as usize {
            return Err(Error::Truncated("payload"));
        }
        Ok(BlockRecord {
            header: BlockHeader {
                compressed_len,
                uncompressed_len,
                seq_count,
                sub_block_bit_sizes: sizes,
                litlen_lengths,
                dist_lengths,
            },
            payload,
        })
    }

    /// Checks that nothing follows the last block.
    pub fn finish(mut self) -> Result<()> {
        if self.next_index != self.header.block_count {
            return Err(Error::Truncated("blocks"));
        }
        let mut probe = [0u8; 1];
        loop {
            match self.src.read(&mut probe) {
                Ok(0) => return Ok(()),
                Ok(_) => return Err(Error::HeaderInconsistent("trailing data")),
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }
}

impl<R: Read> Iterator for FileReader<R> {
    type Item = Result<BlockRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next_index >= self.header.block_count {
            return None;
        }
        let index = self.next_index;
        let r = self.read_block().map_err(|e| e.in_block(index));
        self.next_index += 1;
        self.failed = r.is_err();
        Some(r)
    }
}

/// Reads a whole container into memory.
pub fn read_file<R: Read>(src: R) -> Result<(FileHeader, Vec<BlockRecord>)> {
    let mut reader = FileReader::new(src)?;
    let blocks = reader.by_ref().collect::<Result<Vec<_>>>()?;
    let header = reader.header().clone();
    reader.finish()?;
    Ok((header, blocks))
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockSummary {
    pub index: u32,
    pub compressed_len: u32,
    pub uncompressed_len: u32,
    pub seq_count: u32,
    pub sub_block_count: usize,
    pub sub_block_bit_sizes: Vec<u32>,
    pub sub_block_offsets: Vec<u64>,
    pub litlen_lengths: Vec<u8>,
    pub dist_lengths: Vec<u8>,
    pub max_code_len: u8,
}

#[derive(Clone, Debug, Serialize)]
pub struct Inspection {
    pub header: FileHeader,
    pub compressed_file_len: u64,
    pub blocks: Vec<BlockSummary>,
}

/// Parses every header of a container without decoding payloads.
pub fn inspect<R: Read>(src: R) -> Result<Inspection> {
    let mut reader = FileReader::new(src)?;
    let mut blocks = Vec::new();
    let mut len = FILE_HEADER_LEN as u64;
    for (index, rec) in reader.by_ref().enumerate() {
        let rec = rec?;
        len += rec.serialized_len() as u64;
        let h = rec.header;
        let max_code_len = h.litlen_lengths.iter().chain(&h.dist_lengths).copied().max().unwrap_or(0);
        blocks.push(BlockSummary {
            index: index as u32,
            compressed_len: h.compressed_len,
            uncompressed_len: h.uncompressed_len,
            seq_count: h.seq_count,
            sub_block_count: h.sub_block_bit_sizes.len(),
            sub_block_offsets: sub_block_offsets(&h.sub_block_bit_sizes),
            sub_block_bit_sizes: h.sub_block_bit_sizes,
            litlen_lengths: h.litlen_lengths,
            dist_lengths: h.dist_lengths,
            max_code_len,
        });
    }
    let header = reader.header().clone();
    reader.finish()?;
    Ok(Inspection {
        header,
        compressed_file_len: len,
        blocks,
    })
}
