//! SHA-256 and deterministic Ed25519 (RFC 8032, pure variant).
//!
//! Verification is strict: small-order keys or nonce points and any
//! non-canonical point encoding are rejected, so every implementation agrees
//! on accept/reject for a given byte string.

use std::fmt;

use ed25519_dalek::{SigningKey, VerifyingKey};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};

pub const DIGEST_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SECRET_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

/// A SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest32(pub [u8; DIGEST_LEN]);

impl Digest32 {
    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        decode_fixed_hex(s).map(Self)
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest32({})", self.to_hex())
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// An Ed25519 public key in its 32-byte compressed encoding.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        decode_fixed_hex(s).map(Self)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

/// A 64-byte Ed25519 signature `R || S`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        decode_fixed_hex(s).map(Self)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

/// Signing key plus its derived public key.
///
/// The secret half is never serialized by this crate except through
/// [`VrfKeyPair::secret_bytes`], which the key-file helpers use.
#[derive(Clone)]
pub struct VrfKeyPair {
    signing: SigningKey,
    public: PublicKey,
}

impl VrfKeyPair {
    pub fn public_key(&self) -> PublicKey {
        self.public
    }

    pub fn secret_bytes(&self) -> [u8; SECRET_KEY_LEN] {
        self.signing.to_bytes()
    }
}

impl fmt::Debug for VrfKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VrfKeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

pub fn sha256(data: &[u8]) -> Digest32 {
    Digest32(Sha256::digest(data).into())
}

/// Derives a key pair from a 32-byte secret seed as defined by RFC 8032.
pub fn keygen(seed: &[u8]) -> Result<VrfKeyPair> {
    let seed: [u8; SECRET_KEY_LEN] = seed.try_into().map_err(|_| {
        Error::InvalidKey(format!(
            "secret seed must be {SECRET_KEY_LEN} bytes, got {}",
            seed.len()
        ))
    })?;
    let signing = SigningKey::from_bytes(&seed);
    let public = PublicKey(signing.verifying_key().to_bytes());
    Ok(VrfKeyPair { signing, public })
}

pub fn sign_deterministic(keys: &VrfKeyPair, message: &[u8]) -> Signature {
    use ed25519_dalek::Signer;
    Signature(keys.signing.sign(message).to_bytes())
}

pub fn verify_signature(pk: &PublicKey, message: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(pk.as_bytes()) else {
        return false;
    };
    // Decompression accepts y >= p; require the canonical re-encoding.
    if vk.to_edwards().compress().to_bytes() != pk.0 {
        return false;
    }
    let sig = ed25519_dalek::Signature::from_bytes(sig.as_bytes());
    vk.verify_strict(message, &sig).is_ok()
}

/// Like [`verify_signature`] but over raw byte slices; wrong lengths verify as false.
pub fn verify_signature_bytes(pk: &[u8], message: &[u8], sig: &[u8]) -> bool {
    match (<[u8; 32]>::try_from(pk), <[u8; 64]>::try_from(sig)) {
        (Ok(pk), Ok(sig)) => verify_signature(&PublicKey(pk), message, &Signature(sig)),
        _ => false,
    }
}

pub(crate) fn decode_fixed_hex<const N: usize>(s: &str) -> Result<[u8; N]> {
    if s.len() != 2 * N {
        return Err(Error::Malformed(format!(
            "expected {} hex characters, got {}",
            2 * N,
            s.len()
        )));
    }
    if s.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(Error::Malformed("hex must be lowercase".into()));
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(s, &mut out).map_err(|e| Error::Malformed(format!("bad hex: {e}")))?;
    Ok(out)
}
