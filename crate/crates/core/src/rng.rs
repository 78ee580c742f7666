//! Counter-based random number streams for reproducible replications.
//!
//! Every stream is keyed by `(seed, replication, source, purpose)` and the
//! i-th draw of a stream is a pure function of the key and `i`. Results are
//! therefore bit-identical no matter how replications are scheduled across
//! threads, and streams can be handed out without any shared state.

/// Weyl increment used by the splitmix64 generator.
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Splitmix64 finalizer: full-avalanche 64-bit mix.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// What a stream is consumed for. Widens the key space so that, e.g., the
/// generation process and the marking coin of the same source never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Packet inter-generation draws.
    Generation,
    /// Transmission/service time draws.
    Service,
    /// Bernoulli marking coins.
    Mark,
    /// Source-selection draws.
    Select,
    /// Idle-duration draws.
    Idle,
    /// Per-slot success coins (discrete engine).
    Success,
    /// Anything else (threshold searches, tests).
    Aux,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Generation => 1,
            StreamPurpose::Service => 2,
            StreamPurpose::Mark => 3,
            StreamPurpose::Select => 4,
            StreamPurpose::Idle => 5,
            StreamPurpose::Success => 6,
            StreamPurpose::Aux => 7,
        }
    }
}

/// A deterministic counter-based stream of uniform variates.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64, replication: u64, source: u64, purpose: StreamPurpose) -> Self {
        // Absorb each key component through the full mixer so that nearby
        // (seed, replication, source) tuples land on unrelated keys.
        let mut key = mix64(seed ^ 0xa076_1d64_78bd_642f);
        key = mix64(key ^ replication.wrapping_mul(GOLDEN) ^ 0xe703_7ed1_a0b4_28db);
        key = mix64(key ^ source.wrapping_mul(GOLDEN) ^ 0x8ebc_6af0_9c88_c6e3);
        key = mix64(key ^ purpose.tag().wrapping_mul(GOLDEN) ^ 0x5895_89bc_a5fe_25eb);
        RngStream { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform on `(0, 1]`; safe to pass through `ln`.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Bernoulli coin.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}
