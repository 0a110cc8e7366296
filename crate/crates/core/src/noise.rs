//! Counter-based random streams.
//!
//! A [`NoiseStream`] maps an address to a fixed block of the ChaCha8
//! keystream, so any deviate can be regenerated in isolation:
//!
//! * key: derived from `(seed, domain)`;
//! * stream id: `(player << 40) | label`;
//! * word position: `step * words_per_step`.
//!
//! Normals are produced by Box–Muller from a fixed number of words per step,
//! which keeps the addressing exact regardless of the values drawn.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose tag separating independent families of random draws under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Diffusion = 1,
    Initial = 2,
    Probe = 3,
    Sampling = 4,
    Oracle = 5,
    Measures = 6,
}

const LABEL_BITS: u32 = 40;

fn stream_id(player: usize, label: u64) -> u64 {
    debug_assert!(label < (1 << LABEL_BITS));
    ((player as u64) << LABEL_BITS) | label
}

/// SplitMix64 finalizer, used to spread `(seed, domain)` into a key seed.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root of every random draw: a seed plus a domain.
#[derive(Clone)]
pub struct Streams {
    seed: u64,
    domain: Domain,
    base: ChaCha8Rng,
}

impl std::fmt::Debug for Streams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Streams")
            .field("seed", &self.seed)
            .field("domain", &self.domain)
            .finish()
    }
}

impl Streams {
    pub fn new(seed: u64, domain: Domain) -> Self {
        let base = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(domain as u64)));
        Self { seed, domain, base }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for `(player, label)`, positioned at `word`.
    pub fn rng_at(&self, player: usize, label: u64, word: u128) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(stream_id(player, label));
        rng.set_word_pos(word);
        rng
    }

    pub fn rng(&self, player: usize, label: u64) -> ChaCha8Rng {
        self.rng_at(player, label, 0)
    }
}

/// Standard normal deviates addressed by `(player, label, step, coordinate)`.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    streams: Streams,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self {
            streams: Streams::new(seed, Domain::Diffusion),
        }
    }

    pub fn seed(&self) -> u64 {
        self.streams.seed()
    }

    fn words_per_step(dim: usize) -> u128 {
        // two u64 (four u32 words) per Box–Muller pair
        (4 * dim.div_ceil(2)) as u128
    }

    /// Fills `out` with the `out.len()` deviates of step `step`.
    pub fn fill(&self, player: usize, label: u64, step: usize, out: &mut [f64]) {
        let dim = out.len();
        let mut rng =
            self.streams
                .rng_at(player, label, step as u128 * Self::words_per_step(dim));
        for pair in out.chunks_mut(2) {
            let (z0, z1) = box_muller(&mut rng);
            pair[0] = z0;
            if pair.len() > 1 {
                pair[1] = z1;
            }
        }
    }

    /// Single deviate; identical to the matching entry of [`Self::fill`] with
    /// `dim` coordinates.
    pub fn deviate(&self, player: usize, label: u64, step: usize, coord: usize, dim: usize) -> f64 {
        assert!(coord < dim);
        let mut buf = vec![0.0; dim];
        self.fill(player, label, step, &mut buf);
        buf[coord]
    }
}

/// Uniform in [0, 1) with 53 random bits.
pub fn unit_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller<R: RngCore>(rng: &mut R) -> (f64, f64) {
    let u1 = 1.0 - unit_f64(rng); // (0, 1]
    let u2 = unit_f64(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}
