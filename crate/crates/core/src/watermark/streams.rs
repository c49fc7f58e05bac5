use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::config::{CodecConfig, Method, SecretKey};

/// Mid-band coefficients per 4x4 block (zig-zag positions 3..=10).
pub const MID_BAND_LEN: usize = 8;
/// Upper bound on pilot slots.
pub const MAX_PILOTS: usize = 32;

/// Keyed pseudorandom material for one (key, image shape, config) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyStreams {
    /// Permutation of all embeddable blocks; bit `j` uses slots `j*k .. (j+1)*k`.
    pub block_order: Vec<usize>,
    /// Balanced, mutually orthogonal +-1 sequences for bit 0 and bit 1.
    pub pn: [[f64; MID_BAND_LEN]; 2],
    /// Per-slot QIM dither as a fraction of the step, in `[0, 1)`; pilot slots follow the data slots.
    pub dither: Vec<f64>,
    /// Known keyed bits for the pilot slots (`dwt-dct-svd` only, in blocks the payload leaves free).
    pub pilots: Vec<bool>,
}

impl KeyStreams {
    /// Block index used by slot `slot`.
    pub fn block(&self, slot: usize) -> usize {
        self.block_order[slot]
    }
}

fn seed_for(key: &SecretKey, shape: (usize, usize), config: &CodecConfig) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"mimicguard/streams/v1");
    h.update(key.0);
    h.update((shape.0 as u64).to_le_bytes());
    h.update((shape.1 as u64).to_le_bytes());
    h.update(config.method.as_str().as_bytes());
    h.update((config.payload_length as u64).to_le_bytes());
    h.update((config.redundancy as u64).to_le_bytes());
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    seed
}

// Fisher-Yates on raw u64 draws so the order only depends on the ChaCha stream.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha20Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Derives the block permutation, PN pair and dither for `key` on an image of `shape` (width, height).
pub fn derive_streams(key: &SecretKey, shape: (usize, usize), config: &CodecConfig) -> KeyStreams {
    let mut rng = ChaCha20Rng::from_seed(seed_for(key, shape, config));
    let blocks = config.method.capacity_blocks(shape.0, shape.1);
    let mut block_order: Vec<usize> = (0..blocks).collect();
    shuffle(&mut block_order, &mut rng);

    let mut p0 = [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
    shuffle(&mut p0, &mut rng);
    // p1 takes +1 on two of p0's +1 positions and two of its -1 positions:
    // balanced and orthogonal to p0 by construction
    let mut plus: Vec<usize> = (0..MID_BAND_LEN).filter(|&i| p0[i] > 0.0).collect();
    let mut minus: Vec<usize> = (0..MID_BAND_LEN).filter(|&i| p0[i] < 0.0).collect();
    shuffle(&mut plus, &mut rng);
    shuffle(&mut minus, &mut rng);
    let mut p1 = [-1.0; MID_BAND_LEN];
    for &i in plus.iter().take(2).chain(minus.iter().take(2)) {
        p1[i] = 1.0;
    }

    let needed = config.blocks_needed().min(blocks);
    let n_pilots = match config.method {
        Method::DwtDctSvd => (blocks - needed).min(MAX_PILOTS),
        Method::DwtDct => 0,
    };
    let dither = (0..needed + n_pilots).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64).collect();
    let pilots = (0..n_pilots).map(|_| rng.next_u64() >> 63 == 1).collect();
    KeyStreams { block_order, pn: [p0, p1], dither, pilots }
}
