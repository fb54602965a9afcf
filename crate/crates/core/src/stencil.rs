//! Finite-difference weights and quadrature weights on uniform 1-D node sets.

/// Half-width of the centered difference stencils (9 points, 8th order).
pub const STENCIL_RADIUS: usize = 4;

/// Number of points in a full stencil.
pub const STENCIL_WIDTH: usize = 2 * STENCIL_RADIUS + 1;

/// Finite-difference weights for derivatives of order `0..=max_order` at `z`
/// from samples at `xs` (Fornberg's recursion). Returns `w[order][point]`.
pub fn fornberg(z: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    assert!(n > max_order, "need more points than the derivative order");
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Weights of the centered 9-point stencil for derivative `order` (1 or 2) on
/// unit spacing, indexed by offset `-4..=4`.
pub fn centered_weights(order: usize) -> [f64; STENCIL_WIDTH] {
    let xs: Vec<f64> = (0..STENCIL_WIDTH)
        .map(|i| i as f64 - STENCIL_RADIUS as f64)
        .collect();
    let w = fornberg(0.0, &xs, order);
    let mut out = [0.0; STENCIL_WIDTH];
    out.copy_from_slice(&w[order]);
    // The centered first-derivative weight at offset 0 is exactly zero.
    if order == 1 {
        out[STENCIL_RADIUS] = 0.0;
    }
    out
}

// Endpoint corrections for the midpoint rule: the composite rule with weights
// h * (1 + c_i) on the first six cells (mirrored at the far end) is exact for
// polynomials up to degree 5 near each end.
const END_CORRECTIONS_6: [f64; 6] = [
    184831.0 / 967680.0,
    -532379.0 / 967680.0,
    68155.0 / 96768.0,
    -248543.0 / 483840.0,
    195203.0 / 967680.0,
    -32119.0 / 967680.0,
];

const END_CORRECTIONS_4: [f64; 4] = [
    703.0 / 5760.0,
    -463.0 / 1920.0,
    101.0 / 640.0,
    -223.0 / 5760.0,
];

/// Quadrature weights for `n` cell-centered nodes on an interval of width
/// `n * h`, with end corrections at both ends.
pub fn corrected_midpoint_weights(n: usize, h: f64) -> Vec<f64> {
    let corr: &[f64] = if n >= 2 * END_CORRECTIONS_6.len() {
        &END_CORRECTIONS_6
    } else {
        &END_CORRECTIONS_4
    };
    let mut w = vec![1.0; n];
    for (i, c) in corr.iter().enumerate().take(n) {
        w[i] += c;
        w[n - 1 - i] += c;
    }
    w.iter_mut().for_each(|x| *x *= h);
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_first_derivative_is_antisymmetric_and_exact_on_polynomials() {
        let w = centered_weights(1);
        for k in 0..STENCIL_WIDTH {
            assert!((w[k] + w[STENCIL_WIDTH - 1 - k]).abs() < 1e-15);
        }
        // exact on x^7 at x = 0.3 with spacing 1
        let f = |x: f64| x.powi(7);
        let d: f64 = (0..STENCIL_WIDTH)
            .map(|k| w[k] * f(0.3 + k as f64 - 4.0))
            .sum();
        assert!((d - 7.0 * 0.3f64.powi(6)).abs() < 1e-9);
    }

    #[test]
    fn one_sided_weights_differentiate_quadratics() {
        let xs: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let w = fornberg(8.5, &xs, 2);
        let f = |x: f64| 3.0 * x * x - x + 2.0;
        let d1: f64 = xs.iter().zip(&w[1]).map(|(x, c)| c * f(*x)).sum();
        let d2: f64 = xs.iter().zip(&w[2]).map(|(x, c)| c * f(*x)).sum();
        let d0: f64 = xs.iter().zip(&w[0]).map(|(x, c)| c * f(*x)).sum();
        assert!((d0 - f(8.5)).abs() < 1e-9);
        assert!((d1 - (6.0 * 8.5 - 1.0)).abs() < 1e-9);
        assert!((d2 - 6.0).abs() < 1e-8);
    }

    #[test]
    fn corrected_midpoint_integrates_sine() {
        for &n in &[16usize, 64] {
            let h = std::f64::consts::PI / n as f64;
            let w = corrected_midpoint_weights(n, h);
            let s: f64 = (0..n)
                .map(|i| w[i] * ((i as f64 + 0.5) * h).sin())
                .sum();
            assert!((s - 2.0).abs() < 1e-6, "n={n} s={s}");
        }
    }

    #[test]
    fn small_grids_fall_back_to_short_corrections() {
        let w = corrected_midpoint_weights(8, 0.125);
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
}
