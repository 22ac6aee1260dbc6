//! Synthetic data: n-gram vocabularies from transcripts, glyph-composed
//! text lines with ground truth, and a noisy detector simulator.
//!
//! All randomness comes from ChaCha8 streams keyed by a 64-bit seed, with the
//! stream number derived from the line index (composition) or from the
//! modality and line id (simulation).

mod compose;
mod glyphs;
mod simulate;
mod vocab;

pub use compose::{compose_line, generate_corpus, ComposedLine, LineSpec, SynthLine};
pub use glyphs::GlyphSet;
pub use simulate::{simulate_corpus, simulate_detector, NoiseModel};
pub use vocab::build_vocabulary;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// 64-bit FNV-1a, used to turn names into stream numbers.
pub(crate) fn fnv1a(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0xff;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        for b in part.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}
