//! Seeded random streams.
//!
//! Every disorder realization draws from its own ChaCha8 stream, addressed by
//! `(master_seed, stream)`. Streams never overlap, so realizations can be
//! generated in any order (or in parallel) and still reproduce bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for stream `stream` of the family seeded by `master`.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in `[-0.5, 0.5)`.
pub fn centered_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen::<f64>() - 0.5
}

pub fn centered_uniforms<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| centered_uniform(rng)).collect()
}
