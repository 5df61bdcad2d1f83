//! Canonical length-limited Huffman codes.
//!
//! Code lengths come from package-merge, which is optimal under the length
//! limit. Codes are assigned canonically by (length, symbol), so a table is
//! fully described by its length vector. Decoding uses a flat lookup table
//! of `2^cwl_max` entries indexed by the next `cwl_max` bits.

use super::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuffmanTable {
    cwl_max: u8,
    lengths: Vec<u8>,
    codes: Vec<u16>,
    // (symbol << 4) | length; zero marks a bit pattern that starts no code
    lut: Vec<u16>,
}

impl HuffmanTable {
    /// Rebuilds the canonical table from code lengths (0 = unused symbol).
    pub fn from_lengths(lengths: &[u8], cwl_max: u8) -> Result<Self> {
        if cwl_max == 0 || cwl_max > 15 {
            return Err(Error::CorruptStream("code length limit out of range"));
        }
        if lengths.len() > 1 << 12 {
            return Err(Error::CorruptStream("alphabet too large"));
        }
        if lengths.iter().any(|&l| l > cwl_max) {
            return Err(Error::CorruptStream("code length above limit"));
        }
        let budget = 1u32 << cwl_max;
        let kraft: u32 = lengths
            .iter()
            .filter(|&&l| l > 0)
            .map(|&l| 1u32 << (cwl_max - l))
            .sum();
        if kraft > budget {
            return Err(Error::CorruptStream("code lengths oversubscribe the code space"));
        }

        let mut bl_count = [0u16; 16];
        for &l in lengths {
            bl_count[l as usize] += 1;
        }
        bl_count[0] = 0;
        let mut next_code = [0u16; 16];
        let mut code = 0u16;
        for bits in 1..=15 {
            code = (code + bl_count[bits - 1]) << 1;
            next_code[bits] = code;
        }
        let mut codes = vec![0u16; lengths.len()];
        let mut lut = vec![0u16; budget as usize];
        for (sym, &len) in lengths.iter().enumerate() {
            if len == 0 {
                continue;
            }
            let c = next_code[len as usize];
            next_code[len as usize] += 1;
            codes[sym] = c;
            let shift = cwl_max - len;
            let first = (c as usize) << shift;
            let entry = ((sym as u16) << 4) | len as u16;
            lut[first..first + (1 << shift)].fill(entry);
        }
        Ok(HuffmanTable {
            cwl_max,
            lengths: lengths.to_vec(),
            codes,
            lut,
        })
    }

    pub fn cwl_max(&self) -> u8 {
        self.cwl_max
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    pub fn alphabet_len(&self) -> usize {
        self.lengths.len()
    }

    /// Canonical code and its length for `symbol`; length 0 if unused.
    pub fn code(&self, symbol: usize) -> (u16, u8) {
        (self.codes[symbol], self.lengths[symbol])
    }

    pub fn used_symbols(&self) -> usize {
        self.lengths.iter().filter(|&&l| l > 0).count()
    }

    /// `Σ 2^(cwl_max - len)` over used symbols; equals `2^cwl_max` for a
    /// complete code.
    pub fn kraft_numerator(&self) -> u32 {
        self.lengths
            .iter()
            .filter(|&&l| l > 0)
            .map(|&l| 1u32 << (self.cwl_max - l))
            .sum()
    }

    pub fn is_complete(&self) -> bool {
        self.kraft_numerator() == 1 << self.cwl_max
    }

    #[inline]
    pub fn encode(&self, w: &mut BitWriter, symbol: usize) {
        let (code, len) = self.code(symbol);
        debug_assert!(len > 0, "symbol {symbol} has no code");
        w.write_bits(code as u32, len as u32);
    }

    /// One lookup of `cwl_max` bits.
    #[inline]
    pub fn decode(&self, r: &mut BitReader<'_>) -> Result<usize> {
        let entry = self.lut[r.peek(self.cwl_max as u32) as usize];
        let len = entry & 0xF;
        if len == 0 {
            return Err(Error::CorruptStream("bit pattern matches no code"));
        }
        r.consume(len as u32)?;
        Ok((entry >> 4) as usize)
    }
}

/// Optimal code lengths with every length at most `max_len` (package-merge).
///
/// Symbols with zero frequency get length 0. A lone symbol gets length 1 so
/// that decoding stays a total function of the next bits.
pub fn package_merge_lengths(freqs: &[u64], max_len: u8) -> Result<Vec<u8>> {
    let mut leaves: Vec<(u64, usize)> = freqs
        .iter()
        .enumerate()
        .filter(|&(_, &f)| f > 0)
        .map(|(s, &f)| (f, s))
        .collect();
    let n = leaves.len();
    if n == 0 {
        return Err(Error::EmptyAlphabet);
    }
    if max_len == 0 || max_len > 32 || (max_len < 32 && n > 1usize << max_len) {
        return Err(Error::TooManySymbols {
            symbols: n,
            cwl_max: max_len,
        });
    }
    let mut lengths = vec![0u8; freqs.len()];
    if n == 1 {
        lengths[leaves[0].1] = 1;
        return Ok(lengths);
    }
    leaves.sort_unstable();

    #[derive(Clone, Copy)]
    enum Node {
        Leaf(usize),
        Package(u32, u32),
    }
    let mut nodes: Vec<Node> = leaves.iter().map(|&(_, s)| Node::Leaf(s)).collect();
    let leaf_items: Vec<(u64, u32)> = leaves.iter().enumerate().map(|(i, &(f, _))| (f, i as u32)).collect();
    let keep = 2 * n - 2;

    let mut list = leaf_items.clone();
    for _ in 1..max_len {
        let mut packages = Vec::with_capacity(list.len() / 2);
        for pair in list.chunks_exact(2) {
            nodes.push(Node::Package(pair[0].1, pair[1].1));
            packages.push((pair[0].0 + pair[1].0, nodes.len() as u32 - 1));
        }
        let mut merged = Vec::with_capacity(leaf_items.len() + packages.len());
        let (mut i, mut j) = (0, 0);
        while i < leaf_items.len() || j < packages.len() {
            let take_leaf = j >= packages.len() || (i < leaf_items.len() && leaf_items[i].0 <= packages[j].0);
            if take_leaf {
                merged.push(leaf_items[i]);
                i += 1;
            } else {
                merged.push(packages[j]);
                j += 1;
            }
        }
        list = merged;
    }

    let mut stack = Vec::new();
    for &(_, root) in &list[..keep] {
        stack.push(root);
        while let Some(id) = stack.pop() {
            match nodes[id as usize] {
                Node::Leaf(sym) => lengths[sym] += 1,
                Node::Package(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
    }
    Ok(lengths)
}

/// Builds the canonical table for `freqs` under the `cwl_max` limit.
pub fn build_limited_huffman(freqs: &[u64], cwl_max: u8) -> Result<HuffmanTable> {
    if cwl_max == 0 || cwl_max > 15 {
        return Err(Error::TooManySymbols {
            symbols: freqs.iter().filter(|&&f| f > 0).count(),
            cwl_max,
        });
    }
    let lengths = package_merge_lengths(freqs, cwl_max)?;
    HuffmanTable::from_lengths(&lengths, cwl_max)
}

/// Total coded size of `freqs` under `lengths`.
pub fn encoded_bits(freqs: &[u64], lengths: &[u8]) -> u64 {
    freqs.iter().zip(lengths).map(|(&f, &l)| f * l as u64).sum()
}
