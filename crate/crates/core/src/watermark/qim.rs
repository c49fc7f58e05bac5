//! `dwt-dct-svd`: dithered QIM on the leading singular value of 8x8 DCT blocks
//! of the Haar LL subband.
//!
//! Valumetric attacks (global luma gain, or gain about the mean) slide every
//! sigma off its lattice. Before decoding, the extractor scores lattice
//! alignment over a gain grid and undoes the best gain when it is clearly
//! better aligned than the identity.

use std::f64::consts::PI;

use super::streams::KeyStreams;
use super::{majority, CodecConfig, CodecError};
use crate::imagecore::PlanarF64;
use crate::transforms::{dct2_block, dwt2_haar, idct2_block, idwt2_haar, svd_block, BlockGrid};

const BLOCK: usize = 8;

// alignment thresholds for the gain search (mean resultant length, 0..1)
const KEEP_IDENTITY: f64 = 0.5;
const ACCEPT_GAIN: f64 = 0.6;
const MIN_IMPROVEMENT: f64 = 0.2;
const GAIN_RANGE: (f64, f64) = (0.5, 2.0);

/// Nearest point of the bit-`bit` lattice `step * (m + bit/2 + dither)`.
fn quantize(sigma: f64, bit: bool, step: f64, dither: f64) -> f64 {
    let offset = step * (dither + if bit { 0.5 } else { 0.0 });
    let q = ((sigma - offset) / step).round() * step + offset;
    if q < 0.0 {
        q + step
    } else {
        q
    }
}

/// Signed margin in `[-1, 1]`: positive when `sigma` sits nearer the bit-1 lattice.
fn decide(sigma: f64, step: f64, dither: f64) -> f64 {
    let d0 = (sigma - quantize(sigma, false, step, dither)).abs();
    let d1 = (sigma - quantize(sigma, true, step, dither)).abs();
    (d0 - d1) / (step / 2.0)
}

pub(super) fn embed_plane(
    y: &PlanarF64,
    bits: &[bool],
    config: &CodecConfig,
    streams: &KeyStreams,
) -> Result<PlanarF64, CodecError> {
    let mut bands = dwt2_haar(y)?;
    let grid = BlockGrid::for_plane(&bands.ll, BLOCK)?;
    let k = config.redundancy;
    let data = bits.iter().enumerate().flat_map(|(j, &bit)| (j * k..(j + 1) * k).map(move |slot| (slot, bit)));
    let pilots = streams.pilots.iter().enumerate().map(|(i, &bit)| (bits.len() * k + i, bit));
    for (slot, bit) in data.chain(pilots) {
        let block = streams.block(slot);
        let mut coeffs = dct2_block(&grid.read(&bands.ll, block), BLOCK)?;
        let svd = svd_block(&coeffs, BLOCK)?;
        let sigma = svd.s[0];
        let delta = quantize(sigma, bit, config.strength, streams.dither[slot]) - sigma;
        let (u, v) = svd.leading();
        for r in 0..BLOCK {
            for c in 0..BLOCK {
                coeffs[r * BLOCK + c] += delta * u[r] * v[c];
            }
        }
        grid.write(&mut bands.ll, block, &idct2_block(&coeffs, BLOCK)?);
    }
    Ok(idwt2_haar(&bands)?)
}

struct SlotSigma {
    sigma: f64,
    // u1[0] * v1[0]: first-order sensitivity of sigma to the DC coefficient
    dc_weight: f64,
}

fn slot_sigmas(y: &PlanarF64, streams: &KeyStreams) -> Result<Vec<SlotSigma>, CodecError> {
    let bands = dwt2_haar(y)?;
    let grid = BlockGrid::for_plane(&bands.ll, BLOCK)?;
    (0..streams.dither.len())
        .map(|slot| {
            let coeffs = dct2_block(&grid.read(&bands.ll, streams.block(slot)), BLOCK)?;
            let svd = svd_block(&coeffs, BLOCK)?;
            let (u, v) = svd.leading();
            Ok(SlotSigma { sigma: svd.s[0], dc_weight: u[0] * v[0] })
        })
        .collect()
}

/// Lattice agreement in `[-1, 1]` after undoing `y -> gain * (y - pivot) + pivot`.
///
/// Data slots are scored on the combined (step/2) lattice, which cannot tell a
/// half-step shift from the truth; pilot slots carry known bits and are scored
/// on their own lattice, which pins that ambiguity.
fn alignment(sigmas: &[SlotSigma], streams: &KeyStreams, step: f64, gain: f64, pivot: f64) -> f64 {
    // a luma offset c shifts the LL DC coefficient of an 8x8 block by 2 * 8 * c
    let dc_shift = 16.0 * (1.0 - gain) * pivot;
    let restore = |s: &SlotSigma| (s.sigma - dc_shift * s.dc_weight) / gain;
    let n_data = sigmas.len() - streams.pilots.len();
    let data = sigmas[..n_data]
        .iter()
        .zip(&streams.dither)
        .map(|(s, &d)| (4.0 * PI * (restore(s) / step - d)).cos())
        .sum::<f64>()
        / n_data as f64;
    if streams.pilots.is_empty() {
        return data;
    }
    let pilot = sigmas[n_data..]
        .iter()
        .zip(&streams.dither[n_data..])
        .zip(&streams.pilots)
        .map(|((s, &d), &b)| (2.0 * PI * (restore(s) / step - d - if b { 0.5 } else { 0.0 })).cos())
        .sum::<f64>()
        / streams.pilots.len() as f64;
    0.5 * (data + pilot)
}

/// Best (gain, pivot) for the observed sigmas, or `None` when the identity is adequate.
fn estimate_luma_map(sigmas: &[SlotSigma], streams: &KeyStreams, step: f64, mean_luma: f64) -> Option<(f64, f64)> {
    let identity = alignment(sigmas, streams, step, 1.0, 0.0);
    if identity >= KEEP_IDENTITY {
        return None;
    }
    let sigma_max = sigmas.iter().map(|s| s.sigma).fold(1.0, f64::max) + 16.0 * 255.0;
    // multiplicative grid fine enough that the largest sigma moves < 0.3 rad per step
    let ratio = (0.3 * step / (4.0 * PI * sigma_max)).min(2e-3);
    let mut best = (identity, 1.0, 0.0);
    for pivot in [0.0, mean_luma] {
        let mut g = GAIN_RANGE.0;
        while g <= GAIN_RANGE.1 {
            let score = alignment(sigmas, streams, step, g, pivot);
            if score > best.0 {
                best = (score, g, pivot);
            }
            g *= 1.0 + ratio;
        }
    }
    let (mut score, mut gain, pivot) = best;
    // local refinement
    let mut h = gain * ratio;
    for _ in 0..30 {
        for cand in [gain - h, gain + h] {
            let s = alignment(sigmas, streams, step, cand, pivot);
            if s > score {
                score = s;
                gain = cand;
            }
        }
        h *= 0.7;
    }
    (score >= ACCEPT_GAIN && score >= identity + MIN_IMPROVEMENT).then_some((gain, pivot))
}

pub(super) fn extract_plane(
    y: &PlanarF64,
    config: &CodecConfig,
    streams: &KeyStreams,
) -> Result<(Vec<(bool, f64)>, f64), CodecError> {
    let step = config.strength;
    let mut sigmas = slot_sigmas(y, streams)?;
    let mean_luma = y.data.iter().sum::<f64>() / y.data.len() as f64;
    let mut luma_gain = 1.0;
    if let Some((gain, pivot)) = estimate_luma_map(&sigmas, streams, step, mean_luma) {
        let restored = PlanarF64 {
            width: y.width,
            height: y.height,
            data: y.data.iter().map(|&v| (v - (1.0 - gain) * pivot) / gain).collect(),
        };
        sigmas = slot_sigmas(&restored, streams)?;
        luma_gain = gain;
    }

    let k = config.redundancy;
    let out = (0..config.payload_length)
        .map(|j| {
            let margins: Vec<f64> =
                (j * k..(j + 1) * k).map(|slot| decide(sigmas[slot].sigma, step, streams.dither[slot])).collect();
            let decisions: Vec<bool> = margins.iter().map(|&m| m > 0.0).collect();
            let (bit, _) = majority(&decisions);
            let confidence = (margins.iter().sum::<f64>() / k as f64).abs().min(1.0);
            (bit, confidence)
        })
        .collect();
    Ok((out, luma_gain))
}
