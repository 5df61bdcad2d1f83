//! LZ4-style byte-aligned sequence layout.
//!
//! Per sequence: token `(min(lit, 15) << 4) | min(len - 4, 15)`, literal
//! length continuation bytes, literal bytes, distance (u16 LE), match length
//! continuation bytes. Continuation is a run of 255s closed by a byte < 255.
//! A sequence whose literals end exactly at the end of the payload has no
//! back-reference.

use crate::error::{Error, Result};
use crate::types::{BackRef, Block, MIN_MATCH};

fn push_ext(out: &mut Vec<u8>, mut rest: usize) {
    while rest >= 255 {
        out.push(255);
        rest -= 255;
    }
    out.push(rest as u8);
}

/// Serializes a block. Only the final sequence may lack a back-reference.
pub fn encode_block_byte(block: &Block) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(block.literal_bytes() + 3 * block.len() + 16);
    let n = block.len();
    for (i, seq) in block.sequences().enumerate() {
        let lit = seq.literal.len();
        let lit_nib = lit.min(15);
        let (len_nib, len_rest) = match seq.backref {
            Some(b) => {
                if b.length < MIN_MATCH {
                    return Err(Error::InvalidParams(format!(
                        "byte mode cannot code a match of {} bytes",
                        b.length
                    )));
                }
                let l = b.length - MIN_MATCH;
                (l.min(15), l.checked_sub(15))
            }
            None if i + 1 == n => (0, None),
            None => {
                return Err(Error::InvalidParams(
                    "byte mode needs a back-reference on every sequence but the last".into(),
                ))
            }
        };
        out.push(((lit_nib as u8) << 4) | len_nib as u8);
        if lit >= 15 {
            push_ext(&mut out, lit - 15);
        }
        out.extend_from_slice(seq.literal);
        if let Some(b) = seq.backref {
            out.extend_from_slice(&(b.distance as u16).to_le_bytes());
            if let Some(rest) = len_rest {
                push_ext(&mut out, rest);
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn byte(&mut self) -> Result<u8> {
        let b = *self.data.get(self.pos).ok_or(Error::CorruptStream("byte payload truncated"))?;
        self.pos += 1;
        Ok(b)
    }

    fn ext(&mut self, limit: usize) -> Result<usize> {
        let mut total = 0usize;
        loop {
            let b = self.byte()?;
            total += b as usize;
            if total > limit {
                return Err(Error::CorruptStream("length exceeds the block"));
            }
            if b < 255 {
                return Ok(total);
            }
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or(Error::CorruptStream("byte payload truncated"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

/// Parses a byte-mode payload, refusing to describe more than `max_output`
/// bytes.
pub fn decode_block_byte(payload: &[u8], index: u32, max_output: usize) -> Result<Block> {
    let mut block = Block::new(index);
    let mut c = Cursor { data: payload, pos: 0 };
    let mut produced = 0usize;
    while c.pos < payload.len() {
        let token = c.byte()?;
        let mut lit = (token >> 4) as usize;
        if lit == 15 {
            lit += c.ext(max_output)?;
        }
        if produced + lit > max_output {
            return Err(Error::CorruptStream("sequences exceed the block length"));
        }
        let literal = c.take(lit)?;
        produced += lit;
        if c.pos == payload.len() {
            if token & 0x0F != 0 {
                return Err(Error::CorruptStream("byte payload truncated"));
            }
            block.push(literal, None);
            break;
        }
        let d = c.take(2)?;
        let distance = u16::from_le_bytes([d[0], d[1]]) as usize;
        let mut length = (token & 0x0F) as usize + MIN_MATCH;
        if token & 0x0F == 15 {
            length += c.ext(max_output)?;
        }
        if distance == 0 {
            return Err(Error::CorruptStream("zero distance"));
        }
        if length > u16::MAX as usize || produced + length > max_output {
            return Err(Error::CorruptStream("sequences exceed the block length"));
        }
        produced += length;
        block.push(literal, Some(BackRef::new(distance, length)));
    }
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Sequence, MAX_WINDOW};
    use proptest::prelude::*;

    #[test]
    fn hand_encoded_sequence() {
        let block = Block::from_sequences(0, [Sequence::new(*b"abc", Some(BackRef::new(7, 4)))]);
        let bytes = encode_block_byte(&block).unwrap();
        assert_eq!(bytes, [0x30, b'a', b'b', b'c', 0x07, 0x00]);
        let back = decode_block_byte(&bytes, 0, 7).unwrap();
        assert_eq!(back, block);
    }

    #[test]
    fn empty_block_is_empty_payload() {
        assert!(encode_block_byte(&Block::new(0)).unwrap().is_empty());
        assert!(decode_block_byte(&[], 0, 0).unwrap().is_empty());
    }

    #[test]
    fn long_fields_use_continuation_bytes() {
        let lit = vec![b'x'; 15 + 255 + 3];
        let block = Block::from_sequences(
            0,
            [
                Sequence::new(lit.clone(), Some(BackRef::new(1, 4 + 15 + 255))),
                Sequence::new(*b"tail", None),
            ],
        );
        let bytes = encode_block_byte(&block).unwrap();
        assert_eq!(bytes[0], 0xFF);
        assert_eq!(&bytes[1..3], &[255, 3]);
        let n = lit.len();
        assert_eq!(&bytes[3 + n..3 + n + 4], &[1, 0, 255, 0]);
        assert_eq!(decode_block_byte(&bytes, 0, usize::MAX).unwrap(), block);
    }

    #[test]
    fn truncation_is_corrupt() {
        let block = Block::from_sequences(0, [Sequence::new(*b"abc", Some(BackRef::new(3, 20)))]);
        let bytes = encode_block_byte(&block).unwrap();
        for cut in 1..bytes.len() {
            assert!(decode_block_byte(&bytes[..cut], 0, 100).is_err(), "cut {cut}");
        }
        assert!(decode_block_byte(&bytes, 0, 22).is_err());
    }

    #[test]
    fn inner_literal_only_sequence_is_rejected() {
        let block = Block::from_sequences(0, [Sequence::new(*b"a", None), Sequence::new(*b"b", None)]);
        assert!(encode_block_byte(&block).is_err());
    }

    fn arb_block() -> impl Strategy<Value = Block> {
        let seq = (prop::collection::vec(any::<u8>(), 0..300), 1usize..=MAX_WINDOW, 4usize..600);
        (prop::collection::vec(seq, 0..20), prop::collection::vec(any::<u8>(), 0..40), any::<bool>()).prop_map(
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
        fn round_trip(block in arb_block()) {
            let bytes = encode_block_byte(&block).unwrap();
            let back = decode_block_byte(&bytes, 0, block.uncompressed_len()).unwrap();
            prop_assert_eq!(back, block);
        }
    }
}
