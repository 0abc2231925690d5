//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream derived from the
//! experiment seed, so results never depend on the order in which independent
//! consumers (particles, the shuffler, the splitter) draw numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream used to draw synthetic datasets.
pub const STREAM_DATA: u64 = 0;
/// Stream used for the train/validation split.
pub const STREAM_SPLIT: u64 = 1;
/// Stream used for parameter initialisation.
pub const STREAM_INIT: u64 = 2;
/// Stream used to shuffle minibatches.
pub const STREAM_SHUFFLE: u64 = 3;
/// Particle `i` of the training population uses stream `STREAM_PARTICLES + i`.
pub const STREAM_PARTICLES: u64 = 1 << 32;
/// Particles drawn by `eval` use a disjoint block of streams.
pub const STREAM_EVAL_PARTICLES: u64 = 1 << 48;

/// Creates stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Complete, serialisable position of a ChaCha8 generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    /// 32-byte key, hex encoded.
    pub key: String,
    pub stream: u64,
    /// Word position; u128 does not fit in a JSON number, so it is kept as text.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        let key = rng
            .get_seed()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        Self {
            key,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng, String> {
        if self.key.len() != 64 {
            return Err(format!("rng key must be 64 hex digits, got {}", self.key.len()));
        }
        let mut seed = [0u8; 32];
        for (i, byte) in seed.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&self.key[2 * i..2 * i + 2], 16)
                .map_err(|e| format!("bad rng key: {e}"))?;
        }
        let word_pos: u128 = self
            .word_pos
            .parse()
            .map_err(|e| format!("bad rng word position: {e}"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}
