use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CodecError;

/// Payload lengths the codecs accept.
pub const SUPPORTED_LENGTHS: [usize; 4] = [16, 32, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PayloadRole {
    Authorized,
    #[default]
    Unauthorized,
}

impl std::fmt::Display for PayloadRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Authorized => "authorized",
            Self::Unauthorized => "unauthorized",
        })
    }
}

impl std::str::FromStr for PayloadRole {
    type Err = CodecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "authorized" => Ok(Self::Authorized),
            "unauthorized" => Ok(Self::Unauthorized),
            other => Err(CodecError::InvalidPayload(format!("unknown role '{other}'"))),
        }
    }
}

/// The artist's bitstream.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WatermarkPayload {
    bits: Vec<bool>,
    pub role: PayloadRole,
}

impl WatermarkPayload {
    pub fn new(bits: Vec<bool>, role: PayloadRole) -> Result<Self, CodecError> {
        if !SUPPORTED_LENGTHS.contains(&bits.len()) {
            return Err(CodecError::InvalidPayload(format!(
                "payload length {} not in {SUPPORTED_LENGTHS:?}",
                bits.len()
            )));
        }
        Ok(Self { bits, role })
    }

    /// Parses hex, most significant bit first (`"deadbeef"` is 32 bits).
    pub fn from_hex(hex: &str, role: PayloadRole) -> Result<Self, CodecError> {
        let hex = hex.trim().trim_start_matches("0x");
        let bits = hex
            .chars()
            .map(|c| c.to_digit(16).ok_or_else(|| CodecError::InvalidPayload(format!("'{c}' is not a hex digit"))))
            .collect::<Result<Vec<u32>, _>>()?
            .into_iter()
            .flat_map(|nibble| (0..4).rev().map(move |i| (nibble >> i) & 1 == 1))
            .collect();
        Self::new(bits, role)
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bit_string(s: &str, role: PayloadRole) -> Result<Self, CodecError> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(CodecError::InvalidPayload(format!("'{other}' is not a bit"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(bits, role)
    }

    /// Accepts either a bit string (only `0`/`1`, supported length) or hex.
    pub fn parse(s: &str, role: PayloadRole) -> Result<Self, CodecError> {
        let t = s.trim();
        if t.chars().all(|c| c == '0' || c == '1') && SUPPORTED_LENGTHS.contains(&t.len()) {
            Self::from_bit_string(t, role)
        } else {
            Self::from_hex(t, role)
        }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, role: PayloadRole, rng: &mut R) -> Result<Self, CodecError> {
        Self::new((0..len).map(|_| rng.random::<bool>()).collect(), role)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_hex(&self) -> String {
        self.bits
            .chunks(4)
            .map(|nib| {
                let v = nib.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
                char::from_digit(v, 16).expect("nibble")
            })
            .collect()
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct PayloadRepr {
    hex: String,
    role: PayloadRole,
}

impl Serialize for WatermarkPayload {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PayloadRepr { hex: self.to_hex(), role: self.role }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for WatermarkPayload {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = PayloadRepr::deserialize(d)?;
        Self::from_hex(&repr.hex, repr.role).map_err(serde::de::Error::custom)
    }
}

/// Correct-bit count against a reference payload: `acc = correct / total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitAccuracy {
    pub correct_bits: usize,
    pub total_bits: usize,
    pub acc: f64,
}

pub fn bit_accuracy(extracted: &[bool], reference: &WatermarkPayload) -> Result<BitAccuracy, CodecError> {
    if extracted.len() != reference.len() {
        return Err(CodecError::LengthMismatch { got: extracted.len(), expected: reference.len() });
    }
    let correct = extracted.iter().zip(reference.bits()).filter(|(a, b)| a == b).count();
    Ok(BitAccuracy { correct_bits: correct, total_bits: reference.len(), acc: correct as f64 / reference.len() as f64 })
}
