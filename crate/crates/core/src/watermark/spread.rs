//! `dwt-dct`: additive PN pair on mid-band 4x4 DCT coefficients of the Haar HL subband.

use std::sync::OnceLock;

use super::streams::{KeyStreams, MID_BAND_LEN};
use super::{majority, CodecConfig, CodecError};
use crate::imagecore::PlanarF64;
use crate::transforms::{dct2_block, dwt2_haar, idct2_block, idwt2_haar, zigzag_order, BlockGrid};

const BLOCK: usize = 4;

fn mid_band() -> &'static [usize] {
    static MID: OnceLock<Vec<usize>> = OnceLock::new();
    MID.get_or_init(|| zigzag_order(BLOCK)[3..3 + MID_BAND_LEN].to_vec())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adds `gain * pn[bit]`, then tops up along `pn[bit] - pn[!bit]` when host
/// interference would leave the correlation margin below the clean-host margin.
fn embed_coeffs(mid: &mut [f64], bit: bool, gain: f64, pn: &[[f64; MID_BAND_LEN]; 2]) {
    let (want, other) = (&pn[usize::from(bit)], &pn[usize::from(!bit)]);
    for (c, p) in mid.iter_mut().zip(want) {
        *c += gain * p;
    }
    let diff: Vec<f64> = want.iter().zip(other).map(|(a, b)| a - b).collect();
    let target = gain * dot(want, &diff);
    let margin = dot(mid, &diff);
    if margin < target {
        let step = (target - margin) / dot(&diff, &diff);
        for (c, d) in mid.iter_mut().zip(&diff) {
            *c += step * d;
        }
    }
}

pub(super) fn embed_plane(
    y: &PlanarF64,
    bits: &[bool],
    config: &CodecConfig,
    streams: &KeyStreams,
) -> Result<PlanarF64, CodecError> {
    let mut bands = dwt2_haar(y)?;
    let grid = BlockGrid::for_plane(&bands.hl, BLOCK)?;
    let k = config.redundancy;
    let mut mid = [0.0; MID_BAND_LEN];
    for (j, &bit) in bits.iter().enumerate() {
        for slot in j * k..(j + 1) * k {
            let block = streams.block(slot);
            let mut coeffs = dct2_block(&grid.read(&bands.hl, block), BLOCK)?;
            for (m, &i) in mid.iter_mut().zip(mid_band()) {
                *m = coeffs[i];
            }
            embed_coeffs(&mut mid, bit, config.strength, &streams.pn);
            for (&m, &i) in mid.iter().zip(mid_band()) {
                coeffs[i] = m;
            }
            grid.write(&mut bands.hl, block, &idct2_block(&coeffs, BLOCK)?);
        }
    }
    Ok(idwt2_haar(&bands)?)
}

pub(super) fn extract_plane(
    y: &PlanarF64,
    config: &CodecConfig,
    streams: &KeyStreams,
) -> Result<Vec<(bool, f64)>, CodecError> {
    let bands = dwt2_haar(y)?;
    let grid = BlockGrid::for_plane(&bands.hl, BLOCK)?;
    let k = config.redundancy;
    let mut out = Vec::with_capacity(config.payload_length);
    let mut decisions = vec![false; k];
    for j in 0..config.payload_length {
        for (r, d) in decisions.iter_mut().enumerate() {
            let coeffs = dct2_block(&grid.read(&bands.hl, streams.block(j * k + r)), BLOCK)?;
            let mid: Vec<f64> = mid_band().iter().map(|&i| coeffs[i]).collect();
            *d = dot(&mid, &streams.pn[1]) > dot(&mid, &streams.pn[0]);
        }
        out.push(majority(&decisions));
    }
    Ok(out)
}
