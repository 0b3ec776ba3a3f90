//! Secret keys and watermark signals.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Watermark key: raw key material plus the security parameter it was
/// generated for.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    material: Vec<u8>,
    lambda: u32,
}

impl SecretKey {
    /// Wraps existing key material. The material must carry at least
    /// `lambda` bits.
    pub fn new(material: Vec<u8>, lambda: u32) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::InvalidLambda { lambda, min: 1 });
        }
        if material.len() * 8 < lambda as usize {
            return Err(Error::InsufficientEntropy {
                needed: lambda as usize,
                got: material.len() * 8,
            });
        }
        Ok(Self { material, lambda })
    }

    pub fn material(&self) -> &[u8] {
        &self.material
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn bit_len(&self) -> usize {
        self.material.len() * 8
    }

    /// First 8 bytes of SHA-256 over the key material, hex encoded. Safe to
    /// print in reports.
    pub fn fingerprint(&self) -> String {
        hex::encode(&Sha256::digest(&self.material)[..8])
    }

    /// Key file body: hex key material, then decimal lambda, one per line.
    pub fn to_file_string(&self) -> String {
        format!("{}\n{}\n", hex::encode(&self.material), self.lambda)
    }

    pub fn parse_file(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (n, hex_line) = lines.next().ok_or_else(|| Error::parse(1, "missing key material"))?;
        let material =
            hex::decode(hex_line.trim()).map_err(|e| Error::parse(n + 1, format!("bad hex: {e}")))?;
        let (n, lambda_line) = lines.next().ok_or_else(|| Error::parse(n + 2, "missing lambda"))?;
        let lambda = lambda_line
            .trim()
            .parse::<u32>()
            .map_err(|e| Error::parse(n + 1, format!("bad lambda: {e}")))?;
        if let Some((n, _)) = lines.next() {
            return Err(Error::parse(n + 1, "trailing content after lambda"));
        }
        SecretKey::new(material, lambda)
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecretKey")
            .field("fingerprint", &self.fingerprint())
            .field("lambda", &self.lambda)
            .finish()
    }
}

/// Three-valued watermark signal. `Bottom` means "no watermark found" and
/// only ever comes out of detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WatermarkSignal {
    Zero,
    One,
    Bottom,
}

impl WatermarkSignal {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            WatermarkSignal::Zero
        } else {
            WatermarkSignal::One
        }
    }

    pub fn bit(self) -> Option<u8> {
        match self {
            WatermarkSignal::Zero => Some(0),
            WatermarkSignal::One => Some(1),
            WatermarkSignal::Bottom => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            WatermarkSignal::Zero => '0',
            WatermarkSignal::One => '1',
            WatermarkSignal::Bottom => '_',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(WatermarkSignal::Zero),
            '1' => Some(WatermarkSignal::One),
            '_' => Some(WatermarkSignal::Bottom),
            _ => None,
        }
    }
}

impl fmt::Display for WatermarkSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}
