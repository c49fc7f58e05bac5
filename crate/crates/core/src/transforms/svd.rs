use super::TransformError;

/// `tile = u * diag(s) * v^T`, matrices row-major `n x n`, `s` nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub n: usize,
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = (0..n).map(|k| self.u[r * n + k] * self.s[k] * self.v[c * n + k]).sum();
            }
        }
        out
    }

    /// Leading left and right singular vectors.
    pub fn leading(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        ((0..n).map(|r| self.u[r * n]).collect(), (0..n).map(|r| self.v[r * n]).collect())
    }
}

const MAX_SWEEPS: usize = 60;

/// One-sided (Hestenes) Jacobi SVD of a square row-major tile.
pub fn svd_block(tile: &[f64], n: usize) -> Result<Svd, TransformError> {
    if n == 0 || tile.len() != n * n {
        return Err(TransformError::DimensionMismatch(format!("{} values for a {n}x{n} tile", tile.len())));
    }
    if tile.iter().any(|v| !v.is_finite()) {
        return Err(TransformError::NonFiniteInput);
    }
    // columns of `a` are rotated until mutually orthogonal; `v` accumulates the rotations
    let mut a = tile.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = tile.iter().map(|x| x * x).sum::<f64>();
    let tol = f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for r in 0..n {
                    let (x, y) = (a[r * n + p], a[r * n + q]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma.abs() <= tol * tol * scale {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut a, &mut v] {
                    for r in 0..n {
                        let (x, y) = (m[r * n + p], m[r * n + q]);
                        m[r * n + p] = c * x - s * y;
                        m[r * n + q] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|c| (0..n).map(|r| a[r * n + c].powi(2)).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = vec![0.0; n * n];
    let mut vs = vec![0.0; n * n];
    let mut s = vec![0.0; n];
    let floor = norms.iter().cloned().fold(0.0, f64::max) * (n as f64) * f64::EPSILON;
    let mut filled = vec![false; n];
    for (k, &col) in order.iter().enumerate() {
        s[k] = norms[col];
        for r in 0..n {
            vs[r * n + k] = v[r * n + col];
        }
        if norms[col] > floor && norms[col] > 0.0 {
            for r in 0..n {
                u[r * n + k] = a[r * n + col] / norms[col];
            }
            filled[k] = true;
        }
    }
    complete_basis(&mut u, &filled, n);
    Ok(Svd { n, u, s, v: vs })
}

// Gram-Schmidt fill of the columns of `u` that belong to zero singular values.
fn complete_basis(u: &mut [f64], filled: &[bool], n: usize) {
    let mut candidate = 0;
    for k in 0..n {
        if filled[k] {
            continue;
        }
        loop {
            let mut col = vec![0.0; n];
            col[candidate % n] = 1.0;
            candidate += 1;
            for j in 0..n {
                if filled[j] || j < k {
                    let dot: f64 = (0..n).map(|r| u[r * n + j] * col[r]).sum();
                    for r in 0..n {
                        col[r] -= dot * u[r * n + j];
                    }
                }
            }
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for r in 0..n {
                    u[r * n + k] = col[r] / norm;
                }
                break;
            }
        }
    }
}
