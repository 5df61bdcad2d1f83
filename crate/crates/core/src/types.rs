//! Domain model shared by the compressor, the entropy coders and the
//! decompression engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lanes per warp. Fixed by the execution model.
pub const WARP_SIZE: usize = 32;
/// Shortest back-reference the codec emits.
pub const MIN_MATCH: usize = 4;
/// Longest back-reference the entropy alphabets can describe.
pub const MAX_MATCH: usize = 64;
/// Largest sliding window; distances are stored in 16 bits.
pub const MAX_WINDOW: usize = u16::MAX as usize;
/// Largest block accepted by the container.
pub const MAX_BLOCK_SIZE: usize = 1 << 26;
/// Bit mode needs room for every litlen symbol under the length limit.
pub const MIN_BIT_MODE_CWL: u8 = 9;
/// Upper bound on the length limit of any Huffman table.
pub const MAX_CWL: u8 = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// LZ4-style byte-aligned sequences.
    Byte,
    /// Two canonical length-limited Huffman trees per block, sub-block framed.
    Bit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Sequential copying of back-references, lane after lane.
    Sc,
    /// Multi-round resolution driven by a gap-free high-water mark.
    Mrr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub block_size: usize,
    pub window_size: usize,
    /// Longest match the compressor will try to extend to.
    pub lookahead: usize,
    pub sub_block_seqs: usize,
    pub min_match: usize,
    pub cwl_max: u8,
    pub min_staleness: usize,
    pub mode: Mode,
    pub de_enabled: bool,
    pub strategy: Strategy,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            block_size: 256 * 1024,
            window_size: 8 * 1024,
            lookahead: 64,
            sub_block_seqs: 16,
            min_match: MIN_MATCH,
            cwl_max: 10,
            min_staleness: 1024,
            mode: Mode::Bit,
            de_enabled: false,
            strategy: Strategy::Mrr,
        }
    }
}

impl Params {
    pub const fn warp_size(&self) -> usize {
        WARP_SIZE
    }

    /// Checks the parameter set against what the container and the coders
    /// can represent.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if self.block_size == 0 || self.block_size > MAX_BLOCK_SIZE {
            return fail(format!("block_size must be in 1..={MAX_BLOCK_SIZE}"));
        }
        if self.window_size == 0 || self.window_size > MAX_WINDOW {
            return fail(format!("window_size must be in 1..={MAX_WINDOW}"));
        }
        if self.block_size < self.window_size {
            return fail("block_size must be at least window_size".into());
        }
        if self.min_match != MIN_MATCH {
            return fail(format!("min_match is fixed at {MIN_MATCH}"));
        }
        if self.lookahead < self.min_match || self.lookahead > MAX_MATCH {
            return fail(format!("lookahead must be in {}..={MAX_MATCH}", self.min_match));
        }
        if self.sub_block_seqs == 0 || self.sub_block_seqs > u16::MAX as usize {
            return fail("sub_block_seqs must be in 1..=65535".into());
        }
        if self.cwl_max == 0 || self.cwl_max > MAX_CWL {
            return fail(format!("cwl_max must be in 1..={MAX_CWL}"));
        }
        if self.mode == Mode::Bit && self.cwl_max < MIN_BIT_MODE_CWL {
            return fail(format!("bit mode needs cwl_max >= {MIN_BIT_MODE_CWL}"));
        }
        Ok(())
    }
}

/// A copy of `length` bytes starting `distance` bytes behind the cursor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BackRef {
    pub distance: usize,
    pub length: usize,
}

impl BackRef {
    pub const fn new(distance: usize, length: usize) -> Self {
        BackRef { distance, length }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Token {
    Literal(u8),
    BackRef(BackRef),
}

/// A literal string followed by the back-reference that closes it.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Sequence {
    pub literal: Vec<u8>,
    pub backref: Option<BackRef>,
}

impl Sequence {
    pub fn new(literal: impl Into<Vec<u8>>, backref: Option<BackRef>) -> Self {
        Sequence {
            literal: literal.into(),
            backref,
        }
    }
}

/// Borrowed view of one sequence inside a [`Block`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SequenceRef<'a> {
    pub literal: &'a [u8],
    pub backref: Option<BackRef>,
}

impl SequenceRef<'_> {
    pub fn to_owned(&self) -> Sequence {
        Sequence::new(self.literal, self.backref)
    }

    /// Bytes this sequence contributes to the output.
    pub fn output_len(&self) -> usize {
        self.literal.len() + self.backref.map_or(0, |b| b.length)
    }
}

/// Packed per-sequence record. `match_len == 0` marks a missing back-reference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SeqRecord {
    pub lit_len: u32,
    pub match_len: u16,
    pub distance: u16,
}

impl SeqRecord {
    pub fn backref(&self) -> Option<BackRef> {
        (self.match_len > 0).then(|| BackRef::new(self.distance as usize, self.match_len as usize))
    }

    pub fn output_len(&self) -> usize {
        self.lit_len as usize + self.match_len as usize
    }
}

/// The sequences of one independently compressed block.
///
/// Literal strings live back to back in one arena so that a lane can locate
/// its literal from a prefix sum of the literal lengths, the same way the
/// decoder's token arena is laid out.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Block {
    pub index: u32,
    uncompressed_len: usize,
    literals: Vec<u8>,
    records: Vec<SeqRecord>,
}

impl Block {
    pub fn new(index: u32) -> Self {
        Block {
            index,
            ..Default::default()
        }
    }

    pub fn from_sequences<I>(index: u32, seqs: I) -> Self
    where
        I: IntoIterator<Item = Sequence>,
    {
        let mut block = Block::new(index);
        for s in seqs {
            block.push(&s.literal, s.backref);
        }
        block
    }

    /// Appends a sequence.
    ///
    /// Panics if the back-reference cannot be represented (zero length or
    /// distance, distance above [`MAX_WINDOW`], length above `u16::MAX`).
    pub fn push(&mut self, literal: &[u8], backref: Option<BackRef>) {
        let (match_len, distance) = match backref {
            Some(b) => {
                assert!(b.length > 0 && b.length <= u16::MAX as usize, "bad match length {}", b.length);
                assert!(b.distance > 0 && b.distance <= MAX_WINDOW, "bad distance {}", b.distance);
                (b.length as u16, b.distance as u16)
            }
            None => (0, 0),
        };
        self.literals.extend_from_slice(literal);
        self.records.push(SeqRecord {
            lit_len: u32::try_from(literal.len()).expect("literal longer than 4 GiB"),
            match_len,
            distance,
        });
        self.uncompressed_len += literal.len() + match_len as usize;
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn uncompressed_len(&self) -> usize {
        self.uncompressed_len
    }

    pub fn literal_bytes(&self) -> usize {
        self.literals.len()
    }

    pub fn backref_count(&self) -> usize {
        self.records.iter().filter(|r| r.match_len > 0).count()
    }

    /// Literal bytes plus back-references.
    pub fn token_count(&self) -> usize {
        self.literals.len() + self.backref_count()
    }

    pub fn sequences(&self) -> impl ExactSizeIterator<Item = SequenceRef<'_>> + '_ {
        let mut offset = 0usize;
        self.records.iter().map(move |r| {
            let literal = &self.literals[offset..offset + r.lit_len as usize];
            offset += r.lit_len as usize;
            SequenceRef {
                literal,
                backref: r.backref(),
            }
        })
    }

    pub fn to_sequences(&self) -> Vec<Sequence> {
        self.sequences().map(|s| s.to_owned()).collect()
    }

    pub fn tokens(&self) -> impl Iterator<Item = Token> + '_ {
        self.sequences().flat_map(|s| {
            s.literal
                .iter()
                .map(|&b| Token::Literal(b))
                .chain(s.backref.map(Token::BackRef))
        })
    }

    /// Every sequence except possibly the last carries a back-reference.
    pub fn alternation_holds(&self) -> bool {
        let n = self.records.len();
        self.records.iter().take(n.saturating_sub(1)).all(|r| r.match_len > 0)
    }

    pub fn literals(&self) -> &[u8] {
        &self.literals
    }

    pub fn records(&self) -> &[SeqRecord] {
        &self.records
    }
}

/// Sequential reference expansion of a block.
///
/// Overlapping copies (distance < length) replicate bytes front to back.
pub fn sequences_to_bytes(block: &Block) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(block.uncompressed_len());
    for seq in block.sequences() {
        out.extend_from_slice(seq.literal);
        if let Some(b) = seq.backref {
            let position = out.len();
            if b.distance == 0 || b.distance > position {
                return Err(Error::MalformedBackRef {
                    position,
                    distance: b.distance,
                });
            }
            let start = position - b.distance;
            for i in 0..b.length {
                let byte = out[start + i];
                out.push(byte);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_only_block_is_identity() {
        let block = Block::from_sequences(0, [Sequence::new(*b"abc", None)]);
        assert_eq!(sequences_to_bytes(&block).unwrap(), b"abc");
    }

    #[test]
    fn backref_reproduces_earlier_output() {
        // "aa" then literal "c", then a copy of "aac" three bytes back.
        let block = Block::from_sequences(
            0,
            [
                Sequence::new(*b"aac", Some(BackRef::new(3, 3))),
                Sequence::new(*b"b", None),
            ],
        );
        assert_eq!(sequences_to_bytes(&block).unwrap(), b"aacaacb");
    }

    #[test]
    fn overlapping_copy_replicates_front_to_back() {
        let block = Block::from_sequences(0, [Sequence::new(*b"a", Some(BackRef::new(1, 5)))]);
        // Byte-by-byte oracle.
        let mut expect = vec![b'a'];
        for _ in 0..5 {
            expect.push(expect[expect.len() - 1]);
        }
        assert_eq!(sequences_to_bytes(&block).unwrap(), expect);
        assert_eq!(expect, b"aaaaaa");
    }

    #[test]
    fn reference_before_block_start_is_malformed() {
        let block = Block::from_sequences(0, [Sequence::new(*b"ab", Some(BackRef::new(3, 4)))]);
        assert!(matches!(
            sequences_to_bytes(&block),
            Err(Error::MalformedBackRef { position: 2, distance: 3 })
        ));
    }

    #[test]
    fn block_bookkeeping() {
        let seqs = vec![
            Sequence::new(*b"xy", Some(BackRef::new(2, 4))),
            Sequence::new(Vec::new(), Some(BackRef::new(1, 4))),
            Sequence::new(*b"z", None),
        ];
        let block = Block::from_sequences(3, seqs.clone());
        assert_eq!(block.len(), 3);
        assert_eq!(block.uncompressed_len(), 2 + 4 + 4 + 1);
        assert_eq!(block.to_sequences(), seqs);
        assert_eq!(block.token_count(), 3 + 2);
        assert!(block.alternation_holds());
        let broken = Block::from_sequences(0, [Sequence::new(*b"a", None), Sequence::new(*b"b", None)]);
        assert!(!broken.alternation_holds());
    }

    #[test]
    fn default_params_validate() {
        Params::default().validate().unwrap();
        let small = Params {
            block_size: 4096,
            ..Params::default()
        };
        assert!(small.validate().is_err());
        let mut p = Params {
            cwl_max: 8,
            ..Params::default()
        };
        assert!(p.validate().is_err());
        p.mode = Mode::Byte;
        p.validate().unwrap();
    }
}
