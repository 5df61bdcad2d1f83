//! Token coding: the byte-aligned codec and the two-tree Huffman codec.

pub mod bins;
pub mod bit_codec;
pub mod bits;
pub mod byte_codec;
pub mod huffman;

pub use bit_codec::{decode_block_bit, decode_sub_block, encode_block_bit, BitBlock};
pub use byte_codec::{decode_block_byte, encode_block_byte};
pub use huffman::{build_limited_huffman, HuffmanTable};
