use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::payload::SUPPORTED_LENGTHS;
use super::CodecError;

/// Default additive PN gain for `dwt-dct` (orthonormal coefficient units).
pub const DEFAULT_PN_GAIN: f64 = 2.0;
/// Default QIM step on the leading singular value for `dwt-dct-svd`.
pub const DEFAULT_QIM_STEP: f64 = 64.0;
pub const DEFAULT_PAYLOAD_LENGTH: usize = 32;
pub const DEFAULT_REDUNDANCY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Haar HL subband, 4x4 DCT, additive PN pair on eight mid-band coefficients.
    #[serde(rename = "dwt-dct")]
    DwtDct,
    /// Haar LL subband, 8x8 DCT, QIM on the leading singular value.
    #[serde(rename = "dwt-dct-svd")]
    DwtDctSvd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::DwtDct => "dwt-dct",
            Self::DwtDctSvd => "dwt-dct-svd",
        }
    }

    pub(crate) fn block_size(&self) -> usize {
        match self {
            Self::DwtDct => 4,
            Self::DwtDctSvd => 8,
        }
    }

    pub fn default_strength(&self) -> f64 {
        match self {
            Self::DwtDct => DEFAULT_PN_GAIN,
            Self::DwtDctSvd => DEFAULT_QIM_STEP,
        }
    }

    /// Embeddable blocks for an image of the given size.
    pub fn capacity_blocks(&self, width: usize, height: usize) -> usize {
        let b = self.block_size();
        (width / 2 / b) * (height / 2 / b)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = CodecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dwt-dct" | "dwtdct" => Ok(Self::DwtDct),
            "dwt-dct-svd" | "dwtdctsvd" => Ok(Self::DwtDctSvd),
            other => Err(CodecError::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// 128-bit codec secret, serialized as 32 hex digits.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SecretKey(pub [u8; 16]);

impl SecretKey {
    pub fn from_hex(s: &str) -> Result<Self, CodecError> {
        let bytes = hex::decode(s.trim()).map_err(|e| CodecError::InvalidConfig(format!("bad key hex: {e}")))?;
        let arr: [u8; 16] = bytes
            .try_into()
            .map_err(|v: Vec<u8>| CodecError::InvalidConfig(format!("key must be 16 bytes, got {}", v.len())))?;
        Ok(Self(arr))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(rng.random())
    }

    /// Key with bit `bit` (0..128) flipped.
    pub fn with_flipped_bit(&self, bit: usize) -> Self {
        let mut k = self.0;
        k[bit / 8] ^= 1 << (bit % 8);
        Self(k)
    }
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl Serialize for SecretKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for SecretKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Everything the embedder and the blind extractor must agree on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub method: Method,
    pub key: SecretKey,
    /// PN gain for `dwt-dct`, QIM step for `dwt-dct-svd`.
    pub strength: f64,
    pub payload_length: usize,
    /// Blocks per bit; odd so the majority vote never ties.
    pub redundancy: usize,
}

impl CodecConfig {
    pub fn new(method: Method, key: SecretKey) -> Self {
        Self {
            method,
            key,
            strength: method.default_strength(),
            payload_length: DEFAULT_PAYLOAD_LENGTH,
            redundancy: DEFAULT_REDUNDANCY,
        }
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.strength = strength;
        self
    }

    pub fn with_payload_length(mut self, len: usize) -> Self {
        self.payload_length = len;
        self
    }

    pub fn with_redundancy(mut self, k: usize) -> Self {
        self.redundancy = k;
        self
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if !(self.strength.is_finite() && self.strength > 0.0) {
            return Err(CodecError::InvalidConfig(format!("strength must be positive, got {}", self.strength)));
        }
        if self.redundancy < 3 || self.redundancy.is_multiple_of(2) {
            return Err(CodecError::InvalidConfig(format!("redundancy must be odd and >= 3, got {}", self.redundancy)));
        }
        if !SUPPORTED_LENGTHS.contains(&self.payload_length) {
            return Err(CodecError::InvalidConfig(format!(
                "payload length {} not in {SUPPORTED_LENGTHS:?}",
                self.payload_length
            )));
        }
        Ok(())
    }

    pub fn blocks_needed(&self) -> usize {
        self.payload_length * self.redundancy
    }
}
