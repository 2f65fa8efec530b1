//! Seeded, independent random streams. Each consumer of randomness gets its
//! own ChaCha stream derived from one experiment seed, so adding draws in one
//! place never shifts the values seen elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Matrix = 1,
    Spectrum = 2,
    Linear = 3,
    Updates = 4,
    Transmissions = 5,
    Delays = 6,
    Init = 7,
    Stepsizes = 8,
    Regularization = 9,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
