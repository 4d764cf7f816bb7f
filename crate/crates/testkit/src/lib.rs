//! Reference oracles and seeded generators.
//!
//! The oracles reimplement matching and simulation semantics from the
//! written definitions, independently of the production code paths, so
//! the two routes can be checked against each other over large random
//! suites. Generators are deterministic given a seed.

pub mod gen;
pub mod match_oracle;
pub mod sim_oracle;

pub use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

/// The seeded RNG used everywhere in the verification suites.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
