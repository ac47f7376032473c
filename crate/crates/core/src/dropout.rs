//! Inverted dropout over quantized and float activations, and the committed journal.
//!
//! The quantized path is the computation that gets attested. The float path
//! is what training consumes; both take the same [`KeepMask`].

use crate::crypto::{sha256, Digest32};
use crate::error::{Error, Result};
use crate::prg::{DropoutParams, KeepMask};
use crate::quantize::{scale_round_div, FloatTensor, QuantizedTensor};

pub const JOURNAL_TAG: &[u8] = b"VDO-JRN-v1";
pub const JOURNAL_ENCODED_LEN: usize = 10 + 32 + 32 + 8;

/// Compact commitment to one dropout invocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Journal {
    pub mask_hash: Digest32,
    pub output_hash: Digest32,
    pub element_count: u64,
}

impl Journal {
    /// `"VDO-JRN-v1" || mask_hash || output_hash || le64(n)`, the bytes an attestor signs.
    pub fn canonical_bytes(&self) -> [u8; JOURNAL_ENCODED_LEN] {
        let mut out = [0u8; JOURNAL_ENCODED_LEN];
        out[..10].copy_from_slice(JOURNAL_TAG);
        out[10..42].copy_from_slice(&self.mask_hash.0);
        out[42..74].copy_from_slice(&self.output_hash.0);
        out[74..].copy_from_slice(&self.element_count.to_le_bytes());
        out
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// Kept elements become `round(q * p_den / (p_den - p_num))`; dropped elements become 0.
pub fn apply_quantized_dropout(q: &QuantizedTensor, mask: &KeepMask, params: DropoutParams) -> Result<QuantizedTensor> {
    check_len(q.len(), mask.len())?;
    let (num, den) = (params.p_den(), params.keep_den());
    let out = q
        .values()
        .iter()
        .zip(mask.as_bytes())
        // every element pays for the division so cost does not depend on p
        .map(|(&v, &m)| scale_round_div(i64::from(v), num, den) * i32::from(m == crate::prg::MASK_KEEP))
        .collect();
    Ok(q.with_values(out))
}

/// Float-path inverted dropout, `x * p_den / (p_den - p_num)` for kept elements.
pub fn apply_float_dropout(x: &FloatTensor, mask: &KeepMask, params: DropoutParams) -> Result<FloatTensor> {
    check_len(x.len(), mask.len())?;
    let factor = f64::from(params.p_den()) / f64::from(params.keep_den());
    let data = x
        .data()
        .iter()
        .zip(mask.as_bytes())
        .map(|(&v, &m)| if m == crate::prg::MASK_KEEP { v * factor } else { 0.0 })
        .collect();
    FloatTensor::new(x.shape().to_vec(), data)
}

pub fn compute_journal(mask: &KeepMask, q_out: &QuantizedTensor) -> Result<Journal> {
    check_len(mask.len(), q_out.len())?;
    Ok(Journal {
        mask_hash: sha256(mask.as_bytes()),
        output_hash: sha256(&q_out.to_le_bytes()),
        element_count: mask.len() as u64,
    })
}
