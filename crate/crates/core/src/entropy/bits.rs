//! MSB-first bit I/O.

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    buf: Vec<u8>,
    acc: u64,
    nbits: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bits written so far.
    pub fn bit_len(&self) -> u64 {
        self.buf.len() as u64 * 8 + self.nbits as u64
    }

    /// Writes the low `n` bits of `value`, most significant first.
    #[inline]
    pub fn write_bits(&mut self, value: u32, n: u32) {
        debug_assert!(n <= 32);
        if n == 0 {
            return;
        }
        self.acc = (self.acc << n) | (value as u64 & ((1u64 << n) - 1));
        self.nbits += n;
        while self.nbits >= 8 {
            self.nbits -= 8;
            self.buf.push((self.acc >> self.nbits) as u8);
        }
    }

    /// Writes `n` raw bits of `value` least significant first.
    #[inline]
    pub fn write_lsb_first(&mut self, value: u32, n: u32) {
        if n > 0 {
            self.write_bits(value.reverse_bits() >> (32 - n), n);
        }
    }

    /// Pads the last byte with zero bits.
    pub fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            self.buf.push((self.acc << (8 - self.nbits)) as u8);
        }
        self.buf
    }
}

/// Reads a bit range `[start, end)` of a byte slice.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: u64,
    end: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        BitReader {
            data,
            pos: 0,
            end: data.len() as u64 * 8,
        }
    }

    /// A reader over `len` bits starting at bit `start`.
    pub fn with_range(data: &'a [u8], start: u64, len: u64) -> Result<Self> {
        let end = start.checked_add(len).ok_or(Error::CorruptStream("bit range overflow"))?;
        if end > data.len() as u64 * 8 {
            return Err(Error::CorruptStream("sub-block extends past the payload"));
        }
        Ok(BitReader { data, pos: start, end })
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.end - self.pos
    }

    /// Next `n ≤ 25` bits without consuming them; bits past the range read as zero.
    #[inline]
    pub fn peek(&self, n: u32) -> u32 {
        debug_assert!(n <= 25);
        let byte = (self.pos >> 3) as usize;
        let shift = (self.pos & 7) as u32;
        let word = match self.data.get(byte..byte + 4) {
            Some(s) => u32::from_be_bytes([s[0], s[1], s[2], s[3]]),
            None => {
                let mut w = [0u8; 4];
                if byte < self.data.len() {
                    let avail = &self.data[byte..];
                    w[..avail.len()].copy_from_slice(avail);
                }
                u32::from_be_bytes(w)
            }
        };
        let bits = (word << shift) >> (32 - n);
        // mask anything beyond the range
        let remaining = self.remaining();
        if remaining < n as u64 {
            let keep = remaining as u32;
            if keep == 0 {
                0
            } else {
                bits & !((1u32 << (n - keep)) - 1)
            }
        } else {
            bits
        }
    }

    #[inline]
    pub fn consume(&mut self, n: u32) -> Result<()> {
        if (n as u64) > self.remaining() {
            return Err(Error::CorruptStream("sub-block overruns its bit budget"));
        }
        self.pos += n as u64;
        Ok(())
    }

    #[inline]
    pub fn read_bits(&mut self, n: u32) -> Result<u32> {
        if n == 0 {
            return Ok(0);
        }
        let v = self.peek(n);
        self.consume(n)?;
        Ok(v)
    }

    #[inline]
    pub fn read_lsb_first(&mut self, n: u32) -> Result<u32> {
        if n == 0 {
            return Ok(0);
        }
        Ok(self.read_bits(n)?.reverse_bits() >> (32 - n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_first_packing() {
        let mut w = BitWriter::new();
        w.write_bits(0b1, 1);
        w.write_bits(0b011, 3);
        w.write_lsb_first(0b0001, 4);
        assert_eq!(w.bit_len(), 8);
        assert_eq!(w.finish(), vec![0b1011_1000]);
    }

    #[test]
    fn peek_past_range_reads_zero() {
        let data = [0xFF, 0xFF];
        let r = BitReader::with_range(&data, 4, 6).unwrap();
        assert_eq!(r.peek(10), 0b11_1111_0000);
        assert!(BitReader::with_range(&data, 10, 7).is_err());
    }

    proptest! {
        #[test]
        fn write_read_round_trip(fields in prop::collection::vec((any::<u32>(), 0u32..=25, any::<bool>()), 0..200)) {
            let mut w = BitWriter::new();
            for &(v, n, lsb) in &fields {
                if lsb { w.write_lsb_first(v, n) } else { w.write_bits(v, n) }
            }
            let total = w.bit_len();
            let bytes = w.finish();
            let mut r = BitReader::with_range(&bytes, 0, total).unwrap();
            for &(v, n, lsb) in &fields {
                let mask = if n == 0 { 0 } else { u32::MAX >> (32 - n) };
                let got = if lsb { r.read_lsb_first(n).unwrap() } else { r.read_bits(n).unwrap() };
                prop_assert_eq!(got, v & mask);
            }
            prop_assert_eq!(r.remaining(), 0);
        }
    }
}
