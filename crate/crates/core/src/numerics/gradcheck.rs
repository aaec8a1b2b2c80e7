//! Central finite differences, used as the independent oracle for tape gradients.

use super::matrix::Matrix;

pub const FD_STEP: f64 = 1e-5;

/// Floor on the denominator of [`relative_error`], so tensors whose true
/// gradient is ~0 are compared on an absolute scale.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Entrywise central-difference gradient of `f` at `x` with step 1e-5.
pub fn finite_diff_grad(mut f: impl FnMut(&Matrix) -> f64, x: &Matrix) -> Matrix {
    let mut probe = x.clone();
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + FD_STEP;
        let up = f(&probe);
        probe.as_mut_slice()[i] = orig - FD_STEP;
        let down = f(&probe);
        probe.as_mut_slice()[i] = orig;
        out.as_mut_slice()[i] = (up - down) / (2.0 * FD_STEP);
    }
    out
}

/// `max|a − b| / max(‖a‖∞, ‖b‖∞, 1e-6)`.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let denom = a.max_abs().max(b.max_abs()).max(REL_ERR_FLOOR);
    a.max_abs_diff(b) / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_ones() {
        let x = Matrix::from_fn(2, 3, |r, c| r as f64 - c as f64);
        let g = finite_diff_grad(|m| m.sum(), &x);
        assert!(g.max_abs_diff(&Matrix::filled(2, 3, 1.0)) < 1e-9);
    }

    #[test]
    fn squared_norm_gives_twice_input() {
        let x = Matrix::from_fn(3, 2, |r, c| 0.3 * r as f64 - 0.7 * c as f64 + 0.1);
        let g = finite_diff_grad(|m| m.frobenius_norm().powi(2), &x);
        assert!(g.max_abs_diff(&x.scale(2.0)) < 1e-6);
    }
}
