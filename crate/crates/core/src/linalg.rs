//! Small fixed-size helpers for per-node tensor algebra (n ≤ 4).

pub type Mat = [[f64; 4]; 4];

pub const ZERO: Mat = [[0.0; 4]; 4];

/// Number of independent components of a symmetric n×n tensor.
pub const fn nsym(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Storage slot of (i, j) in the packed upper triangle (row-major).
#[inline]
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Unpacks a packed symmetric tensor.
#[inline]
pub fn unpack(n: usize, packed: &[f64]) -> Mat {
    let mut m = ZERO;
    let mut s = 0;
    for i in 0..n {
        for j in i..n {
            m[i][j] = packed[s];
            m[j][i] = packed[s];
            s += 1;
        }
    }
    m
}

#[inline]
pub fn pack(n: usize, m: &Mat, out: &mut [f64]) {
    let mut s = 0;
    for i in 0..n {
        for j in i..n {
            out[s] = 0.5 * (m[i][j] + m[j][i]);
            s += 1;
        }
    }
}

/// Inverse and determinant by Gauss-Jordan with partial pivoting.
pub fn inverse(n: usize, m: &Mat) -> Option<(Mat, f64)> {
    let mut a = *m;
    let mut inv = ZERO;
    for (i, row) in inv.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    let mut det = 1.0;
    for c in 0..n {
        let mut p = c;
        for r in c + 1..n {
            if a[r][c].abs() > a[p][c].abs() {
                p = r;
            }
        }
        if a[p][c] == 0.0 || !a[p][c].is_finite() {
            return None;
        }
        if p != c {
            a.swap(p, c);
            inv.swap(p, c);
            det = -det;
        }
        let d = a[c][c];
        det *= d;
        for k in 0..n {
            a[c][k] /= d;
            inv[c][k] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for k in 0..n {
                        a[r][k] -= f * a[c][k];
                        inv[r][k] -= f * inv[c][k];
                    }
                }
            }
        }
    }
    Some((inv, det))
}

/// Contraction tr(g⁻¹ a g⁻¹ b) of two symmetric 2-tensors.
pub fn inner(n: usize, ginv: &Mat, a: &Mat, b: &Mat) -> f64 {
    let ma = mul(n, ginv, a);
    let mb = mul(n, ginv, b);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += ma[i][j] * mb[j][i];
        }
    }
    s
}

pub fn mul(n: usize, a: &Mat, b: &Mat) -> Mat {
    let mut c = ZERO;
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn trace(n: usize, a: &Mat) -> f64 {
    (0..n).map(|i| a[i][i]).sum()
}

/// Metric trace g^{ij} a_ij.
pub fn trace_with(n: usize, ginv: &Mat, a: &Mat) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += ginv[i][j] * a[i][j];
        }
    }
    s
}

/// `L⁻¹ a L⁻ᵀ` with `g = L Lᵀ`: the components of `a` in a `g`-orthonormal
/// frame. `None` unless `g` is positive definite.
pub fn symmetrize(n: usize, a: &Mat, g: &Mat) -> Option<Mat> {
    let l = cholesky(n, g)?;
    let mut y = ZERO;
    for c in 0..n {
        for i in 0..n {
            let mut s = a[i][c];
            for k in 0..i {
                s -= l[i][k] * y[k][c];
            }
            y[i][c] = s / l[i][i];
        }
    }
    let mut m = ZERO;
    for r in 0..n {
        for i in 0..n {
            let mut s = y[r][i];
            for k in 0..i {
                s -= l[i][k] * m[r][k];
            }
            m[r][i] = s / l[i][i];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Some(m)
}

/// Eigenvalues of a symmetric matrix in descending order.
pub fn symmetric_eigenvalues(n: usize, a: &Mat) -> Vec<f64> {
    let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Eigenvalues of the pencil (a, g), i.e. of g⁻¹a, in descending order.
pub fn pencil_eigenvalues(n: usize, a: &Mat, g: &Mat) -> Option<Vec<f64>> {
    symmetrize(n, a, g).map(|m| symmetric_eigenvalues(n, &m))
}

/// Lower Cholesky factor, `None` unless strictly positive definite.
pub fn cholesky(n: usize, g: &Mat) -> Option<Mat> {
    let mut l = ZERO;
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(n: usize, a: &Mat) -> f64 {
    symmetric_eigenvalues(n, a).last().copied().unwrap_or(f64::NAN)
}
