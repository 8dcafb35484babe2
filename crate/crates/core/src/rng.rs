//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a stream keyed by
//! `(master seed, replication index, detector index, purpose)`. Streams are
//! derived by hashing the key with SplitMix64, so parallel execution is
//! bitwise reproducible regardless of thread scheduling: a worker never
//! shares generator state with another worker.

use rand::SeedableRng;

/// The generator behind every stream.
pub type StreamRng = rand_pcg::Pcg64Mcg;

/// What a stream is consumed for; keeps independent uses of the same
/// `(seed, detector)` pair from colliding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Simulate = 1,
    Thin = 2,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn absorb(h: u64, v: u64) -> u64 {
    let mut state = h ^ v.wrapping_mul(0xA076_1D64_78BD_642F);
    splitmix64(&mut state)
}

/// Per-replication seed derived from the experiment master seed. The CSV of
/// an experiment records this value so any single replication can be rerun
/// in isolation.
pub fn replication_seed(master: u64, rep: u64) -> u64 {
    absorb(absorb(master, 0x5245_504C), rep) // "REPL"
}

/// Stream for detector `detector` under `seed`, tagged by purpose.
pub fn detector_stream(seed: u64, detector: usize, purpose: StreamPurpose) -> StreamRng {
    let mut h = absorb(seed, 0x5354_5245_414D); // "STREAM"
    h = absorb(h, detector as u64);
    h = absorb(h, purpose as u64);
    let mut state = h;
    let mut bytes = [0u8; 16];
    bytes[..8].copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    bytes[8..].copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    StreamRng::from_seed(bytes)
}
