//! Counter-based random streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream addressed by
//! `(seed, purpose, agent, iteration)`. The purpose selects the key, the agent
//! selects the ChaCha stream id and the iteration selects a disjoint block
//! range, so changing how many numbers one mechanism consumes never shifts the
//! draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent named streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Compression = 1,
    Zeta = 2,
    Init = 3,
    Graph = 4,
    Bench = 5,
    Sweep = 6,
}

/// Words reserved per (agent, iteration) cell.
const WORDS_PER_CELL: u32 = 32;

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Returns the generator for one `(seed, purpose, agent, iteration)` cell.
pub fn stream(seed: u64, purpose: Purpose, agent: u64, iteration: u64) -> ChaCha8Rng {
    let key = mix(seed ^ mix(purpose as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(agent);
    rng.set_word_pos(u128::from(iteration) << WORDS_PER_CELL);
    rng
}
