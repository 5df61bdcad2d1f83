pub mod entropy;
pub mod codec;
pub mod datagen;
pub mod decomp;
pub mod error;
pub mod format;
pub mod lz77;
pub mod types;
pub mod warp;

pub use error::{Error, Result};
pub use types::*;
pub use codec::{compress, compress_to, decompress, decompress_with, CompressSummary};
pub use decomp::{decompress_block, decompress_file, DecompStats, FileStats};
