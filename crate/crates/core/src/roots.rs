//! Floating-point polynomial roots from companion-matrix eigenvalues.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// All complex roots of a polynomial given in descending powers.
///
/// Leading zeros are ignored. Each eigenvalue is refined with a few Newton
/// steps, keeping a step only when it reduces the residual.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let start = coeffs.iter().position(|c| *c != 0.0).unwrap_or(coeffs.len());
    let p = &coeffs[start..];
    if p.len() <= 1 {
        return Vec::new();
    }
    let n = p.len() - 1;
    let lead = p[0];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        companion[(0, j)] = -p[j + 1] / lead;
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| polish(p, *z))
        .collect()
}

fn eval_with_derivative(p: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut value = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    for c in p {
        deriv = deriv * z + value;
        value = value * z + c;
    }
    (value, deriv)
}

fn polish(p: &[f64], mut z: Complex64) -> Complex64 {
    let (mut value, mut deriv) = eval_with_derivative(p, z);
    for _ in 0..3 {
        if deriv.norm() == 0.0 {
            break;
        }
        let next = z - value / deriv;
        let (v, d) = eval_with_derivative(p, next);
        // NaN stops the polish too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(v.norm() < value.norm()) {
            break;
        }
        z = next;
        value = v;
        deriv = d;
    }
    z
}

/// Largest root modulus; 0 for constants.
pub fn max_root_modulus(coeffs: &[f64]) -> f64 {
    poly_roots(coeffs).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
