//! Numerical kernels shared by the analytic and cumulant solvers.

mod quad;
mod roots;
mod sum;

pub use quad::{integrate, integrate_to_infinity, Quadrature, Tolerance};
pub use roots::{brent, Root, RootTolerance};
pub use sum::CompensatedSum;

/// Richardson extrapolation of a sequence of estimates taken at steps
/// `h, h/2, h/4, ...` whose error expands in powers `h^p, h^(p+step), ...`.
///
/// Returns the top of the Neville tableau.
pub fn richardson(estimates: &[f64], order: u32, order_step: u32) -> f64 {
    assert!(!estimates.is_empty());
    let mut table = estimates.to_vec();
    let mut p = order;
    for level in 1..estimates.len() {
        let factor = 2f64.powi(p as i32);
        for i in (level..estimates.len()).rev() {
            table[i] = (factor * table[i] - table[i - 1]) / (factor - 1.0);
        }
        p += order_step;
    }
    table[estimates.len() - 1]
}

/// Extrapolates `values[i] ≈ c + Σ_k a_k terms[k](steps[i])` to the limit `c`
/// by solving the square linear system for `c` and the `a_k`.
///
/// Needed when the error expansion contains terms such as `h ln h` that plain
/// Richardson extrapolation does not remove.
pub fn extrapolate(steps: &[f64], values: &[f64], terms: &[fn(f64) -> f64]) -> Option<f64> {
    let n = steps.len();
    if values.len() != n || terms.len() + 1 != n {
        return None;
    }
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| if j == 0 { 1.0 } else { terms[j - 1](steps[i]) });
    let b = nalgebra::DVector::from_column_slice(values);
    a.lu().solve(&b).map(|x| x[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrapolate_removes_log_terms() {
        let d = |h: f64| 0.5 + 2.0 * h * h.ln() - 3.0 * h;
        let steps = [1e-2, 5e-3, 2.5e-3];
        let values: Vec<f64> = steps.iter().map(|&h| d(h)).collect();
        let c = extrapolate(&steps, &values, &[|h| h * h.ln(), |h| h]).unwrap();
        assert!((c - 0.5).abs() < 1e-13);
        assert!(extrapolate(&steps, &values, &[|h| h]).is_none());
    }

    #[test]
    fn richardson_removes_polynomial_error() {
        // D(h) = 2 + 3h + 5h^2 exactly.
        let d = |h: f64| 2.0 + 3.0 * h + 5.0 * h * h;
        let h = 0.1;
        let est = [d(h), d(h / 2.0), d(h / 4.0)];
        assert!((richardson(&est, 1, 1) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn richardson_even_powers() {
        let d = |h: f64| 1.0 + h * h - 0.5 * h.powi(4);
        let est = [d(0.2), d(0.1), d(0.05)];
        assert!((richardson(&est, 2, 2) - 1.0).abs() < 1e-14);
    }
}
