//! Hash-expander PRG and Bernoulli keep-mask generation.
//!
//! Block `i` of the stream is `sha256(seed || le64(i))`, counting from zero.
//! Each block yields eight `u32` words, decoded little-endian in ascending
//! byte order. An element is kept when its word is at least
//! `floor(p_num * 2^32 / p_den)`.

use sha2::{Digest as _, Sha256};

use crate::crypto::Digest32;
use crate::error::{Error, Result};

pub const SEED_LEN: usize = 32;
const WORDS_PER_BLOCK: usize = 8;

pub const MASK_KEEP: u8 = 0x01;
pub const MASK_DROP: u8 = 0x00;

/// The 32-byte dropout seed `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Seed(pub [u8; SEED_LEN]);

impl Seed {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        crate::crypto::decode_fixed_hex(s).map(Self)
    }
}

impl From<Digest32> for Seed {
    fn from(d: Digest32) -> Self {
        Seed(d.0)
    }
}

/// Dropout probability as an exact rational `p_num / p_den`, with `0 <= p < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DropoutParams {
    p_num: u32,
    p_den: u32,
}

impl DropoutParams {
    pub fn new(p_num: u32, p_den: u32) -> Result<Self> {
        if p_den == 0 || p_num >= p_den {
            return Err(Error::InvalidProbability { p_num, p_den });
        }
        Ok(Self { p_num, p_den })
    }

    pub fn p_num(&self) -> u32 {
        self.p_num
    }

    pub fn p_den(&self) -> u32 {
        self.p_den
    }

    /// `p_den - p_num`, never zero.
    pub fn keep_den(&self) -> u32 {
        self.p_den - self.p_num
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.p_num) / f64::from(self.p_den)
    }

    pub fn threshold(&self) -> u32 {
        threshold(*self)
    }
}

/// `floor(p_num * 2^32 / p_den)` in exact integer arithmetic.
pub fn threshold(params: DropoutParams) -> u32 {
    let t = (u64::from(params.p_num) << 32) / u64::from(params.p_den);
    // p_num < p_den keeps t below 2^32.
    t as u32
}

/// Unbounded stream of little-endian words drawn from successive hash blocks.
#[derive(Clone, Debug)]
pub struct PrgStream {
    seed: Seed,
    counter: u64,
    block: [u8; 32],
    next_word: usize,
}

impl PrgStream {
    pub fn new(seed: Seed) -> Self {
        Self {
            seed,
            counter: 0,
            block: [0; 32],
            next_word: WORDS_PER_BLOCK,
        }
    }

    /// Index of the next block to be hashed.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.next_word == WORDS_PER_BLOCK {
            self.block = expand_block(&self.seed, self.counter);
            self.counter += 1;
            self.next_word = 0;
        }
        let at = 4 * self.next_word;
        self.next_word += 1;
        u32::from_le_bytes(self.block[at..at + 4].try_into().unwrap())
    }
}

impl Iterator for PrgStream {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        Some(self.next_u32())
    }
}

fn expand_block(seed: &Seed, counter: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.0);
    h.update(counter.to_le_bytes());
    h.finalize().into()
}

/// Per-element keep/drop bytes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KeepMask(Vec<u8>);

impl KeepMask {
    /// Wraps raw mask bytes; every byte must be `0x00` or `0x01`.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        if let Some(at) = bytes.iter().position(|&b| b > MASK_KEEP) {
            return Err(Error::Malformed(format!(
                "mask byte {at} is {:#04x}, expected 0x00 or 0x01",
                bytes[at]
            )));
        }
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_kept(&self, index: usize) -> bool {
        self.0[index] == MASK_KEEP
    }

    pub fn kept_count(&self) -> usize {
        self.0.iter().filter(|&&b| b == MASK_KEEP).count()
    }
}

/// Draws one word per element, in order, and keeps the element when `word >= threshold`.
pub fn generate_mask(seed: Seed, params: DropoutParams, n: usize) -> KeepMask {
    let t = threshold(params);
    let mut out = Vec::with_capacity(n);
    let mut counter = 0u64;
    while out.len() < n {
        let block = expand_block(&seed, counter);
        counter += 1;
        let take = (n - out.len()).min(WORDS_PER_BLOCK);
        out.extend(block.chunks_exact(4).take(take).map(|w| {
            let u = u32::from_le_bytes(w.try_into().unwrap());
            if u >= t {
                MASK_KEEP
            } else {
                MASK_DROP
            }
        }));
    }
    KeepMask(out)
}
