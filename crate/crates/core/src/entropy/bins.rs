//! Symbol alphabets of the Bit codec.
//!
//! litlen: 0..=255 literal bytes, 256 end-of-block, 257..=282 match-length
//! bins covering 4..=64. dist: 32 bins covering 1..=65536.
//!
//! | length   | bins | extra bits |
//! |----------|------|------------|
//! | 4..=11   | 8    | 0          |
//! | 12..=27  | 8    | 1          |
//! | 28..=59  | 8    | 2          |
//! | 60..=63  | 1    | 2          |
//! | 64       | 1    | 0          |
//!
//! Distance bin `c` has `max(0, c/2 - 1)` extra bits; bins 0..=29 match the
//! DEFLATE table and 30, 31 extend it to 65536.

use crate::types::{MAX_MATCH, MIN_MATCH};

pub const END_OF_BLOCK: usize = 256;
pub const FIRST_LENGTH_SYMBOL: usize = 257;
pub const LENGTH_BINS: usize = 26;
pub const LITLEN_SYMBOLS: usize = FIRST_LENGTH_SYMBOL + LENGTH_BINS;
pub const DIST_SYMBOLS: usize = 32;
pub const MAX_DISTANCE: usize = 65536;

/// (base, extra bits) per length bin.
pub const LENGTH_BINS_TABLE: [(u16, u8); LENGTH_BINS] = build_length_bins();

const fn build_length_bins() -> [(u16, u8); LENGTH_BINS] {
    let mut t = [(0u16, 0u8); LENGTH_BINS];
    let mut i = 0;
    while i < 8 {
        t[i] = (4 + i as u16, 0);
        t[8 + i] = (12 + 2 * i as u16, 1);
        t[16 + i] = (28 + 4 * i as u16, 2);
        i += 1;
    }
    t[24] = (60, 2);
    t[25] = (64, 0);
    t
}

// bin index for every length 0..=64 (entries below 4 unused)
const LENGTH_TO_BIN: [u8; MAX_MATCH + 1] = {
    let mut t = [0u8; MAX_MATCH + 1];
    let mut bin = 0;
    while bin < LENGTH_BINS {
        let (base, extra) = LENGTH_BINS_TABLE[bin];
        let mut k = 0;
        while k < 1 << extra {
            t[base as usize + k] = bin as u8;
            k += 1;
        }
        bin += 1;
    }
    t
};

/// Bin, extra-bit count and extra value for a match length in `4..=64`.
#[inline]
pub fn length_bin(length: usize) -> (usize, u32, u32) {
    debug_assert!((MIN_MATCH..=MAX_MATCH).contains(&length));
    let bin = LENGTH_TO_BIN[length] as usize;
    let (base, extra) = LENGTH_BINS_TABLE[bin];
    (bin, extra as u32, (length - base as usize) as u32)
}

#[inline]
pub fn length_from_bin(bin: usize, extra_value: u32) -> usize {
    LENGTH_BINS_TABLE[bin].0 as usize + extra_value as usize
}

#[inline]
pub fn length_extra_bits(bin: usize) -> u32 {
    LENGTH_BINS_TABLE[bin].1 as u32
}

#[inline]
pub fn dist_extra_bits(code: usize) -> u32 {
    if code < 4 {
        0
    } else {
        (code / 2 - 1) as u32
    }
}

#[inline]
pub fn dist_base(code: usize) -> usize {
    if code < 4 {
        code + 1
    } else {
        ((2 + (code & 1)) << dist_extra_bits(code)) + 1
    }
}

/// Code, extra-bit count and extra value for a distance in `1..=65536`.
#[inline]
pub fn dist_bin(distance: usize) -> (usize, u32, u32) {
    debug_assert!((1..=MAX_DISTANCE).contains(&distance));
    let v = (distance - 1) as u32;
    if v < 4 {
        return (v as usize, 0, 0);
    }
    let top = 31 - v.leading_zeros();
    let code = (2 * top + ((v >> (top - 1)) & 1)) as usize;
    let extra = top - 1;
    (code, extra, v & ((1 << extra) - 1))
}

#[inline]
pub fn dist_from_bin(code: usize, extra_value: u32) -> usize {
    dist_base(code) + extra_value as usize
}
