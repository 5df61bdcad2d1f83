//! JSON reports. Every report carries `schema_version`; bump it when a
//! field changes meaning or disappears.

use std::collections::BTreeMap;

use serde::Serialize;
use warpzip::{DecompStats, Mode, Params, Strategy};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct ParamsEcho {
    pub block_size: usize,
    pub window_size: usize,
    pub lookahead: usize,
    pub sub_block_seqs: usize,
    pub min_match: usize,
    pub cwl_max: u8,
    pub min_staleness: usize,
}

impl From<&Params> for ParamsEcho {
    fn from(p: &Params) -> Self {
        ParamsEcho {
            block_size: p.block_size,
            window_size: p.window_size,
            lookahead: p.lookahead,
            sub_block_seqs: p.sub_block_seqs,
            min_match: p.min_match,
            cwl_max: p.cwl_max,
            min_staleness: p.min_staleness,
        }
    }
}

/// Aggregated round statistics in a form that reads well as JSON.
#[derive(Debug, Serialize)]
pub struct RoundSummary {
    pub groups: u64,
    pub full_groups: u64,
    pub mean_rounds_per_group: f64,
    pub max_rounds: u32,
    pub rounds_histogram: BTreeMap<u32, u64>,
    pub full_group_rounds_histogram: BTreeMap<u32, u64>,
    pub per_round: Vec<RoundRow>,
}

#[derive(Debug, Serialize)]
pub struct RoundRow {
    pub round: u32,
    pub bytes: u64,
    pub backrefs: u64,
}

impl From<&DecompStats> for RoundSummary {
    fn from(s: &DecompStats) -> Self {
        RoundSummary {
            groups: s.groups,
            full_groups: s.full_groups,
            mean_rounds_per_group: s.mean_rounds_per_group(),
            max_rounds: s.max_rounds(),
            rounds_histogram: s.rounds_histogram.clone(),
            full_group_rounds_histogram: s.full_group_rounds_histogram.clone(),
            per_round: s
                .bytes_per_round
                .iter()
                .zip(&s.backrefs_per_round)
                .enumerate()
                .map(|(i, (&bytes, &backrefs))| RoundRow {
                    round: i as u32 + 1,
                    bytes,
                    backrefs,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub mode: Mode,
    pub strategy: Option<Strategy>,
    pub de_enabled: bool,
    pub params: ParamsEcho,
    pub workers: usize,
    pub uncompressed_bytes: u64,
    pub compressed_bytes: u64,
    /// Uncompressed over compressed size.
    pub ratio: f64,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<&'static str, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<RoundSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bench: Vec<BenchRow>,
}

impl RunReport {
    pub fn new(command: &'static str, params: &Params, workers: usize, uncompressed: u64, compressed: u64) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command,
            mode: params.mode,
            strategy: None,
            de_enabled: params.de_enabled,
            params: params.into(),
            workers,
            uncompressed_bytes: uncompressed,
            compressed_bytes: compressed,
            ratio: if compressed == 0 {
                0.0
            } else {
                uncompressed as f64 / compressed as f64
            },
            timings: BTreeMap::new(),
            blocks: None,
            rounds: None,
            bench: Vec::new(),
        }
    }
}

/// Decompression timings of one strategy.
#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub strategy: Strategy,
    /// Seconds per measured run; the warm-up run is not included.
    pub runs: Vec<f64>,
    pub median_seconds: f64,
    /// Uncompressed bytes per second at the median.
    pub median_throughput: f64,
    pub rounds: RoundSummary,
}

#[derive(Debug, Serialize)]
pub struct GenReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub bytes: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_size: Option<usize>,
    pub seconds: f64,
}
