//! Seeded generators. ChaCha is used everywhere so results do not depend
//! on the platform or on `rand`'s choice of `StdRng`.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as SeededRng;

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Independent child generator for item `index` of a seeded batch.
pub fn child(seed: u64, index: u64) -> SeededRng {
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
