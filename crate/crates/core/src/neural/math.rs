//! Dense f64 helpers for the tagger. Matrices are flat row-major slices.

/// y += A·x, A is rows×cols.
pub fn matvec_acc(a: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for (r, yr) in y.iter_mut().enumerate() {
        let row = &a[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (w, xi) in row.iter().zip(x) {
            acc += w * xi;
        }
        *yr += acc;
    }
}

/// y += Aᵀ·x, A is rows×cols, x has rows entries, y has cols entries.
pub fn matvec_t_acc(a: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(y.len(), cols);
    for (r, xr) in x.iter().enumerate() {
        if *xr == 0.0 {
            continue;
        }
        let row = &a[r * cols..(r + 1) * cols];
        for (yc, w) in y.iter_mut().zip(row) {
            *yc += xr * w;
        }
    }
}

/// A += u ⊗ v (outer product), A is |u|×|v|.
pub fn outer_acc(a: &mut [f64], u: &[f64], v: &[f64]) {
    debug_assert_eq!(a.len(), u.len() * v.len());
    let cols = v.len();
    for (r, ur) in u.iter().enumerate() {
        if *ur == 0.0 {
            continue;
        }
        let row = &mut a[r * cols..(r + 1) * cols];
        for (ar, vc) in row.iter_mut().zip(v) {
            *ar += ur * vc;
        }
    }
}

pub fn add_assign(y: &mut [f64], x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// log Σ exp(xᵢ), stable under large magnitudes.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_against_hand_computation() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2×3
        let x = [1.0, 0.5, -1.0];
        let mut y = [0.0, 10.0];
        matvec_acc(&a, 2, 3, &x, &mut y);
        assert_eq!(y, [1.0 + 1.0 - 3.0, 10.0 + 4.0 + 2.5 - 6.0]);
    }

    #[test]
    fn matvec_t_is_transpose_of_matvec() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2×3
        let x = [2.0, -1.0];
        let mut y = [0.0; 3];
        matvec_t_acc(&a, 2, 3, &x, &mut y);
        assert_eq!(y, [2.0 - 4.0, 4.0 - 5.0, 6.0 - 6.0]);
    }

    #[test]
    fn log_sum_exp_matches_naive_and_survives_extremes() {
        let xs = [1.0, 2.0, 3.0];
        let naive: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-12);
        let big = [1000.0, 1000.0];
        assert!((log_sum_exp(&big) - (1000.0 + 2.0f64.ln())).abs() < 1e-9);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
