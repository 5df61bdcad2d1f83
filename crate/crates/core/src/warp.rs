//! Software model of a 32-lane lock-step warp.
//!
//! Lanes are simulated by phase-ordered loops: every primitive finishes for
//! all lanes before the caller sees any result, which is the only property
//! the decompression algorithms rely on. Inactive lanes (a group shorter than
//! 32 sequences at the tail of a block) vote false and contribute zero to
//! scans.

use crate::error::{Error, Result};
use crate::types::WARP_SIZE;

/// Per-lane values held by a warp.
pub type Lanes<T> = [T; WARP_SIZE];

/// Combined vote of all lanes: bit `i` is lane `i`'s vote.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Ballot(pub u32);

impl Ballot {
    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn is_set(self, lane: usize) -> bool {
        lane < WARP_SIZE && self.0 >> lane & 1 == 1
    }

    pub fn any(self) -> bool {
        self.0 != 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    /// Lowest lane that voted true.
    pub fn lowest(self) -> Option<usize> {
        self.any().then(|| self.0.trailing_zeros() as usize)
    }

    pub fn unpack(self) -> Lanes<bool> {
        std::array::from_fn(|lane| self.is_set(lane))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Warp {
    active_mask: u32,
}

impl Default for Warp {
    fn default() -> Self {
        Warp::new()
    }
}

impl Warp {
    /// A warp with all 32 lanes active.
    pub const fn new() -> Self {
        Warp { active_mask: u32::MAX }
    }

    /// A warp whose lanes `0..lanes` are active.
    pub fn with_active_lanes(lanes: usize) -> Self {
        let mut w = Warp::new();
        w.set_active_lanes(lanes);
        w
    }

    pub fn set_active_lanes(&mut self, lanes: usize) {
        assert!(lanes <= WARP_SIZE, "a warp has {WARP_SIZE} lanes");
        self.active_mask = if lanes == WARP_SIZE {
            u32::MAX
        } else {
            (1u32 << lanes) - 1
        };
    }

    pub fn active_mask(&self) -> u32 {
        self.active_mask
    }

    pub fn active_lanes(&self) -> usize {
        self.active_mask.count_ones() as usize
    }

    pub fn is_active(&self, lane: usize) -> bool {
        lane < WARP_SIZE && self.active_mask >> lane & 1 == 1
    }

    /// `b31·2^31 + … + b1·2 + b0` over the active lanes' votes.
    pub fn ballot(&self, votes: &Lanes<bool>) -> Ballot {
        let bits = votes
            .iter()
            .enumerate()
            .fold(0u32, |acc, (lane, &v)| acc | (u32::from(v) << lane));
        Ballot(bits & self.active_mask)
    }

    /// Broadcasts `values[src_lane]` to every lane.
    pub fn shuffle<T: Copy>(&self, values: &Lanes<T>, src_lane: usize) -> Result<Lanes<T>> {
        if src_lane >= WARP_SIZE {
            return Err(Error::InvalidLane(src_lane));
        }
        let v = values[src_lane];
        Ok([v; WARP_SIZE])
    }

    /// Lane `i` receives `values[i - delta]`; lanes below `delta` keep their
    /// own value.
    fn shuffle_up(values: &Lanes<u32>, delta: usize) -> Lanes<u32> {
        std::array::from_fn(|lane| if lane >= delta { values[lane - delta] } else { values[lane] })
    }

    fn masked(&self, values: &Lanes<u32>) -> Lanes<u32> {
        std::array::from_fn(|lane| if self.is_active(lane) { values[lane] } else { 0 })
    }

    /// Inclusive scan in log2(32) shuffle-up steps.
    pub fn inclusive_prefix_sum(&self, values: &Lanes<u32>) -> Result<Lanes<u32>> {
        let mut acc = self.masked(values);
        let mut delta = 1;
        while delta < WARP_SIZE {
            let shifted = Self::shuffle_up(&acc, delta);
            for lane in delta..WARP_SIZE {
                acc[lane] = acc[lane].checked_add(shifted[lane]).ok_or(Error::Overflow)?;
            }
            delta <<= 1;
        }
        Ok(acc)
    }

    /// `out[i] = Σ_{j<i} values[j]`, `out[0] = 0`.
    ///
    /// Fails with [`Error::Overflow`] when the sum over all active lanes does
    /// not fit in 32 bits.
    pub fn exclusive_prefix_sum(&self, values: &Lanes<u32>) -> Result<Lanes<u32>> {
        let inclusive = self.inclusive_prefix_sum(values)?;
        let mut out = Self::shuffle_up(&inclusive, 1);
        out[0] = 0;
        Ok(out)
    }
}
