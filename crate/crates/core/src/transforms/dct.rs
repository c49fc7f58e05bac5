use std::sync::OnceLock;

use super::TransformError;

fn basis(n: usize) -> &'static [f64] {
    static B4: OnceLock<Vec<f64>> = OnceLock::new();
    static B8: OnceLock<Vec<f64>> = OnceLock::new();
    let cell = if n == 4 { &B4 } else { &B8 };
    cell.get_or_init(|| {
        // row k, column i: c_k cos(pi (2i+1) k / 2n)
        let mut m = vec![0.0; n * n];
        for k in 0..n {
            let ck = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                m[k * n + i] = ck * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
            }
        }
        m
    })
}

fn check(tile: &[f64], n: usize) -> Result<(), TransformError> {
    if n != 4 && n != 8 {
        return Err(TransformError::BadBlockSize(n));
    }
    if tile.len() != n * n {
        return Err(TransformError::DimensionMismatch(format!("tile of {} values for block size {n}", tile.len())));
    }
    Ok(())
}

// out = a * t * b, all n x n
fn triple(a: &[f64], t: &[f64], b: &[f64], n: usize, transpose_a: bool, transpose_b: bool) -> Vec<f64> {
    let at = |r: usize, c: usize| if transpose_a { a[c * n + r] } else { a[r * n + c] };
    let bt = |r: usize, c: usize| if transpose_b { b[c * n + r] } else { b[r * n + c] };
    let mut tmp = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            tmp[r * n + c] = (0..n).map(|k| at(r, k) * t[k * n + c]).sum();
        }
    }
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = (0..n).map(|k| tmp[r * n + k] * bt(k, c)).sum();
        }
    }
    out
}

/// Orthonormal 2-D DCT-II of a row-major `n x n` tile, `n` in {4, 8}.
pub fn dct2_block(tile: &[f64], n: usize) -> Result<Vec<f64>, TransformError> {
    check(tile, n)?;
    let c = basis(n);
    Ok(triple(c, tile, c, n, false, true))
}

pub fn idct2_block(coeffs: &[f64], n: usize) -> Result<Vec<f64>, TransformError> {
    check(coeffs, n)?;
    let c = basis(n);
    Ok(triple(c, coeffs, c, n, true, false))
}

/// JPEG-style zig-zag scan of an `n x n` block as row-major indices.
pub fn zigzag_order(n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n * n);
    for s in 0..(2 * n - 1) {
        let cells: Vec<(usize, usize)> = (0..n)
            .filter_map(|r| s.checked_sub(r).filter(|&c| c < n).map(|c| (r, c)))
            .collect();
        // even diagonals run bottom-left to top-right
        if s % 2 == 0 {
            order.extend(cells.iter().rev().map(|&(r, c)| r * n + c));
        } else {
            order.extend(cells.iter().map(|&(r, c)| r * n + c));
        }
    }
    order
}
