//! Inputs shared by the benchmarks.

use warpzip::datagen::{generate_nested, generate_text_like, NestingSpec};
use warpzip::{compress, Mode, Params};

#[derive(Clone, Copy, Debug)]
pub enum Corpus {
    Text,
    /// Nested back-references of the given depth.
    Nested(u32),
}

impl Corpus {
    pub fn name(self) -> String {
        match self {
            Corpus::Text => "text".into(),
            Corpus::Nested(d) => format!("nested{d}"),
        }
    }

    pub fn generate(self, len: usize) -> Vec<u8> {
        match self {
            Corpus::Text => generate_text_like(len, 1),
            Corpus::Nested(depth) => generate_nested(&NestingSpec::new(depth, len)).expect("valid depth"),
        }
    }
}

pub fn params(mode: Mode, de: bool) -> Params {
    Params {
        mode,
        de_enabled: de,
        ..Params::default()
    }
}

pub fn packed(data: &[u8], mode: Mode, de: bool) -> Vec<u8> {
    compress(data, &params(mode, de)).expect("compressible")
}
