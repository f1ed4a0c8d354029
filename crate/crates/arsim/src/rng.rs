//! Seeded random-number streams.
//!
//! Every source of randomness in a run is drawn from a named substream of the
//! master seed, so two runs that share a seed consume identical values until
//! the first point where their configuration actually makes them diverge.
//! Stream assignment:
//!
//! | stream            | consumer                                         |
//! |-------------------|--------------------------------------------------|
//! | `EXPLORATION + i` | waypoint sampling of robot `i`                   |
//! | `ESTIMATE + i`    | onboard estimate drift of robot `i`              |
//! | `MEASUREMENT`     | odometry / inter-robot measurement noise         |
//! | `CHANNEL`         | CSI snapshot noise and heading jitter            |
//! | `SHADOWING`       | log-normal shadowing of ESNR queries             |
//! | `OUTLIERS`        | outlier selection and injected offsets           |

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG handed to every sampling operation in the library.
pub type RandomStream = ChaCha8Rng;

/// Substream families. Per-robot streams add the robot id to the base.
pub mod stream {
    pub const EXPLORATION: u64 = 1_000;
    pub const ESTIMATE: u64 = 2_000;
    pub const MEASUREMENT: u64 = 3_000;
    pub const CHANNEL: u64 = 4_000;
    pub const SHADOWING: u64 = 5_000;
    pub const OUTLIERS: u64 = 6_000;
}

/// Create the substream `id` of `master_seed`.
pub fn substream(master_seed: u64, id: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(id);
    rng
}
