use serde::{Deserialize, Serialize};

use super::VerifyError;
use crate::watermark::{bit_accuracy, BitAccuracy, WatermarkPayload};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ruling {
    Authorized,
    Unauthorized,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorizationMatch {
    pub acc_vs_authorized: BitAccuracy,
    pub acc_vs_unauthorized: BitAccuracy,
    pub ruling: Ruling,
}

/// Decides which of an artist's two registered payloads the extracted bits carry.
pub fn match_authorization(
    extracted: &[bool],
    authorized: &WatermarkPayload,
    unauthorized: &WatermarkPayload,
    threshold: f64,
) -> Result<AuthorizationMatch, VerifyError> {
    if extracted.len() != authorized.len() || extracted.len() != unauthorized.len() {
        return Err(VerifyError::LengthMismatch {
            extracted: extracted.len(),
            authorized: authorized.len(),
            unauthorized: unauthorized.len(),
        });
    }
    if authorized.bits() == unauthorized.bits() {
        return Err(VerifyError::IdenticalPayloads);
    }
    let a = bit_accuracy(extracted, authorized)?;
    let u = bit_accuracy(extracted, unauthorized)?;
    let ruling = match (a.acc >= threshold, u.acc >= threshold) {
        (false, false) => Ruling::Indeterminate,
        (true, false) => Ruling::Authorized,
        (false, true) => Ruling::Unauthorized,
        // close payloads can both clear a low threshold; the nearer one wins
        (true, true) if a.correct_bits > u.correct_bits => Ruling::Authorized,
        (true, true) if u.correct_bits > a.correct_bits => Ruling::Unauthorized,
        (true, true) => Ruling::Indeterminate,
    };
    Ok(AuthorizationMatch { acc_vs_authorized: a, acc_vs_unauthorized: u, ruling })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::watermark::PayloadRole;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(seed: u64) -> (WatermarkPayload, WatermarkPayload) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (
            WatermarkPayload::random(32, PayloadRole::Authorized, &mut rng).unwrap(),
            WatermarkPayload::random(32, PayloadRole::Unauthorized, &mut rng).unwrap(),
        )
    }

    #[test]
    fn exact_authorized_match() {
        let (a, u) = pair(1);
        let m = match_authorization(a.bits(), &a, &u, DEFAULT_MATCH_THRESHOLD).unwrap();
        assert_eq!(m.ruling, Ruling::Authorized);
        assert_eq!(m.acc_vs_authorized.acc, 1.0);
    }

    #[test]
    fn two_flips_of_unauthorized() {
        let (a, u) = pair(2);
        let mut bits = u.bits().to_vec();
        bits[3] = !bits[3];
        bits[17] = !bits[17];
        let m = match_authorization(&bits, &a, &u, DEFAULT_MATCH_THRESHOLD).unwrap();
        assert_eq!(m.ruling, Ruling::Unauthorized);
        assert_eq!(m.acc_vs_unauthorized.acc, 0.9375);
    }

    #[test]
    fn random_bits_are_mostly_indeterminate() {
        let (a, u) = pair(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let indeterminate = (0..1000)
            .filter(|_| {
                let bits: Vec<bool> = (0..32).map(|_| rng.random()).collect();
                match_authorization(&bits, &a, &u, DEFAULT_MATCH_THRESHOLD).unwrap().ruling == Ruling::Indeterminate
            })
            .count();
        // P(acc >= 0.75) is about 3.5e-3 per payload at 32 bits
        assert!(indeterminate >= 980, "{indeterminate}");
    }

    #[test]
    fn errors() {
        let (a, u) = pair(5);
        assert!(matches!(match_authorization(a.bits(), &a, &a, 0.75), Err(VerifyError::IdenticalPayloads)));
        assert!(matches!(match_authorization(&a.bits()[..16], &a, &u, 0.75), Err(VerifyError::LengthMismatch { .. })));
    }
}
