use super::TransformError;
use crate::imagecore::PlanarF64;

/// One-level orthonormal 2-D Haar decomposition.
///
/// For a 2x2 cell `[a b; c d]` (top row `a b`):
/// `ll = (a+b+c+d)/2`, `lh = (a-b+c-d)/2` (horizontal high-pass),
/// `hl = (a+b-c-d)/2` (vertical high-pass), `hh = (a-b-c+d)/2`.
/// A trailing odd row/column is carried unchanged and reattached on inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub ll: PlanarF64,
    pub lh: PlanarF64,
    pub hl: PlanarF64,
    pub hh: PlanarF64,
    width: usize,
    height: usize,
    last_col: Option<Vec<f64>>,
    last_row: Option<Vec<f64>>,
}

impl Subbands {
    /// Source plane dimensions.
    pub fn source_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn energy(&self) -> f64 {
        self.ll.energy()
            + self.lh.energy()
            + self.hl.energy()
            + self.hh.energy()
            + self.last_col.iter().flatten().map(|v| v * v).sum::<f64>()
            + self.last_row.iter().flatten().map(|v| v * v).sum::<f64>()
    }
}

pub fn dwt2_haar(plane: &PlanarF64) -> Result<Subbands, TransformError> {
    let (w, h) = (plane.width, plane.height);
    if w < 2 || h < 2 || plane.data.len() != w * h {
        return Err(TransformError::EmptyPlane);
    }
    let (hw, hh_) = (w / 2, h / 2);
    let mut ll = PlanarF64::zeros(hw, hh_);
    let mut lh = PlanarF64::zeros(hw, hh_);
    let mut hl = PlanarF64::zeros(hw, hh_);
    let mut hh = PlanarF64::zeros(hw, hh_);
    for y in 0..hh_ {
        for x in 0..hw {
            let a = plane.get(2 * x, 2 * y);
            let b = plane.get(2 * x + 1, 2 * y);
            let c = plane.get(2 * x, 2 * y + 1);
            let d = plane.get(2 * x + 1, 2 * y + 1);
            ll.set(x, y, (a + b + c + d) * 0.5);
            lh.set(x, y, (a - b + c - d) * 0.5);
            hl.set(x, y, (a + b - c - d) * 0.5);
            hh.set(x, y, (a - b - c + d) * 0.5);
        }
    }
    let last_col = (w % 2 == 1).then(|| (0..h).map(|y| plane.get(w - 1, y)).collect());
    let last_row = (h % 2 == 1).then(|| (0..w - w % 2).map(|x| plane.get(x, h - 1)).collect());
    Ok(Subbands { ll, lh, hl, hh, width: w, height: h, last_col, last_row })
}

pub fn idwt2_haar(s: &Subbands) -> Result<PlanarF64, TransformError> {
    let (hw, hh_) = (s.width / 2, s.height / 2);
    for (name, band) in [("ll", &s.ll), ("lh", &s.lh), ("hl", &s.hl), ("hh", &s.hh)] {
        if band.width != hw || band.height != hh_ || band.data.len() != hw * hh_ {
            return Err(TransformError::DimensionMismatch(format!(
                "{name} is {}x{}, expected {hw}x{hh_}",
                band.width, band.height
            )));
        }
    }
    let mut out = PlanarF64::zeros(s.width, s.height);
    for y in 0..hh_ {
        for x in 0..hw {
            let (ll, lh, hl, hh) = (s.ll.get(x, y), s.lh.get(x, y), s.hl.get(x, y), s.hh.get(x, y));
            out.set(2 * x, 2 * y, (ll + lh + hl + hh) * 0.5);
            out.set(2 * x + 1, 2 * y, (ll - lh + hl - hh) * 0.5);
            out.set(2 * x, 2 * y + 1, (ll + lh - hl - hh) * 0.5);
            out.set(2 * x + 1, 2 * y + 1, (ll - lh - hl + hh) * 0.5);
        }
    }
    if let Some(col) = &s.last_col {
        for (y, &v) in col.iter().enumerate() {
            out.set(s.width - 1, y, v);
        }
    }
    if let Some(row) = &s.last_row {
        for (x, &v) in row.iter().enumerate() {
            out.set(x, s.height - 1, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(w: usize, h: usize, seed: u64) -> PlanarF64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PlanarF64::new(w, h, (0..w * h).map(|_| rng.random_range(-300.0..300.0)).collect()).unwrap()
    }

    fn max_abs_diff(a: &PlanarF64, b: &PlanarF64) -> f64 {
        a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn constant_plane() {
        let s = dwt2_haar(&PlanarF64::filled(16, 16, 7.0)).unwrap();
        assert!(s.ll.data.iter().all(|&v| (v - 14.0).abs() < 1e-12));
        for band in [&s.lh, &s.hl, &s.hh] {
            assert!(band.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn round_trip_random_128() {
        let p = random_plane(128, 128, 1);
        let back = idwt2_haar(&dwt2_haar(&p).unwrap()).unwrap();
        assert!(max_abs_diff(&p, &back) <= 1e-9);
    }

    #[test]
    fn odd_dimensions_reattach_margins() {
        let p = random_plane(17, 11, 2);
        let s = dwt2_haar(&p).unwrap();
        assert_eq!((s.ll.width, s.ll.height), (8, 5));
        let back = idwt2_haar(&s).unwrap();
        assert!(max_abs_diff(&p, &back) <= 1e-9);
        assert!((s.energy() - p.energy()).abs() <= 1e-6 * p.energy());
    }

    #[test]
    fn horizontal_edge_lands_in_hl() {
        // rows 0..=4 dark, rows 5.. bright: the transition sits inside the 2x2 cells of rows 4/5
        let mut p = PlanarF64::zeros(8, 8);
        for y in 5..8 {
            for x in 0..8 {
                p.set(x, y, 100.0);
            }
        }
        let s = dwt2_haar(&p).unwrap();
        assert!(s.hl.data.iter().any(|&v| v.abs() > 1.0));
        assert!(s.lh.data.iter().all(|&v| v == 0.0));
        // inverse direction
        let back = idwt2_haar(&s).unwrap();
        assert!(max_abs_diff(&p, &back) <= 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(dwt2_haar(&PlanarF64::zeros(1, 5)), Err(TransformError::EmptyPlane));
        let mut s = dwt2_haar(&PlanarF64::zeros(8, 8)).unwrap();
        s.hh = PlanarF64::zeros(3, 4);
        assert!(matches!(idwt2_haar(&s), Err(TransformError::DimensionMismatch(_))));
    }

    proptest! {
        #[test]
        fn energy_preserved(seed in any::<u64>(), w in 2usize..40, h in 2usize..40) {
            let p = random_plane(w, h, seed);
            let s = dwt2_haar(&p).unwrap();
            prop_assert!((s.energy() - p.energy()).abs() <= 1e-6 * p.energy().max(1.0));
        }

        #[test]
        fn linear(seed in any::<u64>(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let x = random_plane(16, 12, seed);
            let y = random_plane(16, 12, seed.wrapping_add(1));
            let combo = PlanarF64::new(16, 12, x.data.iter().zip(&y.data).map(|(p, q)| a * p + b * q).collect()).unwrap();
            let (tx, ty, tc) = (dwt2_haar(&x).unwrap(), dwt2_haar(&y).unwrap(), dwt2_haar(&combo).unwrap());
            for (bx, by, bc) in [(&tx.ll, &ty.ll, &tc.ll), (&tx.lh, &ty.lh, &tc.lh), (&tx.hl, &ty.hl, &tc.hl), (&tx.hh, &ty.hh, &tc.hh)] {
                for i in 0..bc.data.len() {
                    prop_assert!((a * bx.data[i] + b * by.data[i] - bc.data[i]).abs() <= 1e-9);
                }
            }
        }
    }
}
