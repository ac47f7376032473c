//! Public training context that binds dropout randomness to one layer invocation.

use crate::crypto::{sha256, Digest32};
use crate::error::{Error, Result};

pub const CONTEXT_TAG: &[u8] = b"VDO-CTX-v1";
pub const MAX_ID_LEN: usize = 256;
pub const NONCE_LEN: usize = 32;

/// Metadata known to both trainer and verifier. The nonce is issued by the
/// verifier once per job; step and layer make each invocation unique.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Context {
    pub model_id: String,
    pub step: u64,
    pub batch_id: u64,
    pub nonce: [u8; NONCE_LEN],
    pub layer_id: String,
}

impl Context {
    pub fn new(
        model_id: impl Into<String>,
        step: u64,
        batch_id: u64,
        nonce: [u8; NONCE_LEN],
        layer_id: impl Into<String>,
    ) -> Result<Self> {
        let ctx = Self {
            model_id: model_id.into(),
            step,
            batch_id,
            nonce,
            layer_id: layer_id.into(),
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        check_id("model_id", &self.model_id)?;
        check_id("layer_id", &self.layer_id)
    }

    /// Canonical encoding:
    /// `"VDO-CTX-v1" || lp(model_id) || le64(step) || le64(batch_id) || nonce || lp(layer_id)`
    /// where `lp(s) = le32(len(s)) || s`.
    pub fn pack(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out =
            Vec::with_capacity(CONTEXT_TAG.len() + 8 + self.model_id.len() + self.layer_id.len() + 16 + NONCE_LEN);
        out.extend_from_slice(CONTEXT_TAG);
        put_prefixed(&mut out, &self.model_id);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.batch_id.to_le_bytes());
        out.extend_from_slice(&self.nonce);
        put_prefixed(&mut out, &self.layer_id);
        Ok(out)
    }

    /// The message the trainer signs: `sha256(pack(ctx))`.
    pub fn vrf_input(&self) -> Result<Digest32> {
        Ok(sha256(&self.pack()?))
    }

    pub fn nonce_hex(&self) -> String {
        hex::encode(self.nonce)
    }
}

pub fn parse_nonce_hex(s: &str) -> Result<[u8; NONCE_LEN]> {
    crate::crypto::decode_fixed_hex(s)
        .map_err(|e| Error::InvalidContext(format!("nonce must be 64 lowercase hex characters ({e})")))
}

fn check_id(name: &str, value: &str) -> Result<()> {
    if value.is_empty() {
        return Err(Error::InvalidContext(format!("{name} is empty")));
    }
    if value.len() > MAX_ID_LEN {
        return Err(Error::InvalidContext(format!(
            "{name} is {} bytes, limit is {MAX_ID_LEN}",
            value.len()
        )));
    }
    Ok(())
}

fn put_prefixed(out: &mut Vec<u8>, s: &str) {
    // Length is bounded by MAX_ID_LEN, so the cast is lossless.
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minimal() -> Context {
        Context::new("m", 0, 0, [0u8; 32], "l").unwrap()
    }

    #[test]
    fn minimal_context_packs_to_68_bytes() {
        let bytes = minimal().pack().unwrap();
        assert_eq!(bytes.len(), 68);
        assert_eq!(&bytes[..10], b"VDO-CTX-v1");
        assert_eq!(&bytes[10..15], &[1, 0, 0, 0, b'm']);
        assert_eq!(&bytes[63..], &[1, 0, 0, 0, b'l']);
    }

    #[test]
    fn layer_id_changes_packing() {
        let a = minimal();
        let mut b = a.clone();
        b.layer_id = "k".into();
        assert_ne!(a.pack().unwrap(), b.pack().unwrap());
        assert_eq!(a.pack().unwrap(), a.pack().unwrap());
    }

    #[test]
    fn nonce_byte_changes_vrf_input() {
        let a = minimal();
        for i in 0..NONCE_LEN {
            let mut b = a.clone();
            b.nonce[i] ^= 0x80;
            assert_ne!(a.vrf_input().unwrap(), b.vrf_input().unwrap());
        }
        assert_eq!(a.vrf_input().unwrap(), minimal().vrf_input().unwrap());
    }

    #[test]
    fn invalid_ids_are_rejected() {
        assert!(Context::new("", 0, 0, [0; 32], "l").is_err());
        assert!(Context::new("m", 0, 0, [0; 32], "").is_err());
        assert!(Context::new("m".repeat(257), 0, 0, [0; 32], "l").is_err());
        assert!(Context::new("m".repeat(256), 0, 0, [0; 32], "l").is_ok());
        let mut ctx = minimal();
        ctx.layer_id.clear();
        assert!(matches!(ctx.pack(), Err(Error::InvalidContext(_))));
        assert!(ctx.vrf_input().is_err());
    }

    #[test]
    fn nonce_hex_parsing() {
        assert_eq!(parse_nonce_hex(&"00".repeat(32)).unwrap(), [0u8; 32]);
        assert!(parse_nonce_hex(&"00".repeat(31)).is_err());
        assert!(parse_nonce_hex("not hex").is_err());
    }

    fn arb_context() -> impl Strategy<Value = Context> {
        (
            "[a-z/.]{1,12}",
            0u64..4,
            0u64..4,
            prop::array::uniform32(0u8..2),
            "[a-z/.]{1,12}",
        )
            .prop_map(|(m, s, b, n, l)| Context::new(m, s, b, n, l).unwrap())
    }

    proptest! {
        // Small alphabets and ranges force many near-collisions, e.g. ("ab","c") vs ("a","bc").
        #[test]
        fn pack_is_injective(a in arb_context(), b in arb_context()) {
            prop_assert_eq!(a == b, a.pack().unwrap() == b.pack().unwrap());
        }
    }
}
