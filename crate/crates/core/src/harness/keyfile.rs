//! Key files: `<name>.key` holds the 32-byte secret seed as 64 lowercase hex
//! characters, `<name>.pub` the derived public key in the same form.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::crypto::{keygen, PublicKey, VrfKeyPair};
use crate::error::{Error, Result};

pub const TRAINER_KEY_NAME: &str = "trainer";
pub const ATTESTOR_KEY_NAME: &str = "attestor";

pub fn secret_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.key"))
}

pub fn public_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.pub"))
}

/// Writes `<name>.key` and `<name>.pub`; fails if either file already exists.
pub fn write_keypair(dir: &Path, name: &str, keys: &VrfKeyPair) -> Result<(PathBuf, PathBuf)> {
    let sk = secret_path(dir, name);
    let pk = public_path(dir, name);
    for p in [&sk, &pk] {
        if p.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} already exists", p.display()),
            )));
        }
    }
    create_new(&sk, &hex::encode(keys.secret_bytes()))?;
    create_new(&pk, &keys.public_key().to_hex())?;
    Ok((sk, pk))
}

fn create_new(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new().write(true).create_new(true).open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}

pub fn generate_keypair() -> Result<VrfKeyPair> {
    use rand::TryRngCore;
    let mut seed = [0u8; 32];
    rand::rngs::OsRng
        .try_fill_bytes(&mut seed)
        .map_err(|e| Error::Io(std::io::Error::other(format!("no system entropy: {e}"))))?;
    keygen(&seed)
}

pub fn parse_secret(text: &str) -> Result<VrfKeyPair> {
    let seed = hex::decode(text.trim()).map_err(|e| Error::InvalidKey(format!("secret key is not hex: {e}")))?;
    keygen(&seed)
}

pub fn parse_public(text: &str) -> Result<PublicKey> {
    PublicKey::from_hex(text.trim()).map_err(|e| Error::InvalidKey(e.to_string()))
}

pub fn read_secret(path: &Path) -> Result<VrfKeyPair> {
    parse_secret(&std::fs::read_to_string(path)?)
}

pub fn read_public(path: &Path) -> Result<PublicKey> {
    parse_public(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read_and_refuse_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let keys = keygen(&[3; 32]).unwrap();
        let (sk, pk) = write_keypair(dir.path(), "trainer", &keys).unwrap();
        let back = read_secret(&sk).unwrap();
        assert_eq!(back.public_key(), keys.public_key());
        assert_eq!(read_public(&pk).unwrap(), keys.public_key());
        assert!(matches!(
            write_keypair(dir.path(), "trainer", &keys),
            Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::AlreadyExists
        ));
    }

    #[test]
    fn bad_key_text() {
        assert!(parse_secret("00").is_err());
        assert!(parse_secret("xyz").is_err());
        assert!(parse_public(&"0".repeat(63)).is_err());
        assert!(generate_keypair().is_ok());
    }
}
