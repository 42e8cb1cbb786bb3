//! Hash selection and truncated digests, shared by the coded letter and the
//! QKD digest check.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256, Sha512};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HashAlg {
    #[default]
    Sha256,
    Sha512,
}

impl HashAlg {
    pub fn id(self) -> &'static str {
        match self {
            HashAlg::Sha256 => "sha256",
            HashAlg::Sha512 => "sha512",
        }
    }

    pub fn output_bits(self) -> u32 {
        match self {
            HashAlg::Sha256 => 256,
            HashAlg::Sha512 => 512,
        }
    }

    /// Hash of the concatenation of `parts`.
    pub fn hash_parts(self, parts: &[&[u8]]) -> Vec<u8> {
        match self {
            HashAlg::Sha256 => {
                let mut h = Sha256::new();
                parts.iter().for_each(|p| h.update(p));
                h.finalize().to_vec()
            }
            HashAlg::Sha512 => {
                let mut h = Sha512::new();
                parts.iter().for_each(|p| h.update(p));
                h.finalize().to_vec()
            }
        }
    }

    pub fn hash(self, data: &[u8]) -> Vec<u8> {
        self.hash_parts(&[data])
    }
}

impl fmt::Display for HashAlg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for HashAlg {
    type Err = DigestConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "sha256" => Ok(HashAlg::Sha256),
            "sha512" => Ok(HashAlg::Sha512),
            _ => Err(DigestConfigError::UnknownHash(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DigestConfigError {
    #[error("unknown hash `{0}` (sha256, sha512)")]
    UnknownHash(String),
    #[error("truncate_bits = {bits} outside [32, {max}]")]
    Truncation { bits: u32, max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DigestConfig {
    pub hash: HashAlg,
    pub truncate_bits: u32,
}

impl Default for DigestConfig {
    fn default() -> Self {
        Self {
            hash: HashAlg::Sha256,
            truncate_bits: 256,
        }
    }
}

impl DigestConfig {
    pub fn new(hash: HashAlg, truncate_bits: u32) -> Result<Self, DigestConfigError> {
        let cfg = Self { hash, truncate_bits };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DigestConfigError> {
        let max = self.hash.output_bits();
        if self.truncate_bits < 32 || self.truncate_bits > max {
            return Err(DigestConfigError::Truncation {
                bits: self.truncate_bits,
                max,
            });
        }
        Ok(())
    }

    pub fn digest_len(&self) -> usize {
        self.truncate_bits.div_ceil(8) as usize
    }

    /// First `truncate_bits` bits of the hash; unused low bits of the last
    /// byte are zeroed.
    pub fn digest(&self, data: &[u8]) -> Vec<u8> {
        let mut out = self.hash.hash(data);
        out.truncate(self.digest_len());
        let spare = self.digest_len() as u32 * 8 - self.truncate_bits;
        if spare > 0 {
            if let Some(last) = out.last_mut() {
                *last &= 0xffu8 << spare;
            }
        }
        out
    }
}
