//! Truncated Taylor arithmetic on packed coefficient slices.
//!
//! Every function works on `&[f64]` slices of length `n_coeffs(dim, order)`.
//! The same product table drives both the forward product and its transpose
//! (the adjoint accumulation used by the reverse sweep).

use super::index::{mul_table, MulEntry, MAX_COEFFS};

/// Truncated product: `out[k] += a[i] * b[j]` over the table.
/// `out` must be zeroed (or hold a partial sum to accumulate into).
#[inline]
pub fn mul_acc(table: &[MulEntry], a: &[f64], b: &[f64], out: &mut [f64]) {
    for &(i, j, k) in table {
        out[k as usize] += a[i as usize] * b[j as usize];
    }
}

/// Adjoint of `c = a * b` with respect to `a`: `adj_a[i] += adj_c[k] * b[j]`.
#[inline]
pub fn mul_adjoint_acc(table: &[MulEntry], adj_c: &[f64], b: &[f64], adj_a: &mut [f64]) {
    for &(i, j, k) in table {
        adj_a[i as usize] += adj_c[k as usize] * b[j as usize];
    }
}

/// Composition of a univariate smooth function through a jet.
///
/// `derivs[m]` holds f^(m) evaluated at `a[0]`; the result is
/// `sum_m derivs[m]/m! * (a - a[0])^m` truncated at the jet order.
/// `derivs` must supply at least `order + 1` entries.
pub fn compose(dim: usize, order: usize, a: &[f64], derivs: &[f64], out: &mut [f64]) {
    let nc = a.len();
    out[..nc].fill(0.0);
    out[0] = derivs[0];
    if order == 0 {
        return;
    }
    let table = mul_table(dim, order);
    // ahat = a with the constant term removed; powers built by repeated product.
    let mut ahat = [0.0f64; MAX_COEFFS];
    ahat[..nc].copy_from_slice(&a[..nc]);
    ahat[0] = 0.0;
    let mut pow = [0.0f64; MAX_COEFFS];
    pow[..nc].copy_from_slice(&ahat[..nc]);
    const INV_FACT: [f64; 4] = [1.0, 1.0, 0.5, 1.0 / 6.0];
    for m in 1..=order {
        let scale = derivs[m] * INV_FACT[m];
        for c in 0..nc {
            out[c] += scale * pow[c];
        }
        if m < order {
            let mut next = [0.0f64; MAX_COEFFS];
            mul_acc(table, &pow[..nc], &ahat[..nc], &mut next[..nc]);
            pow = next;
        }
    }
}

/// Smooth univariate primitives the engine composes through jets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Exp,
    Sin,
    Cos,
}

impl Activation {
    /// f^(0)..f^(4) at `v`. Four derivatives cover order-3 jets plus one more
    /// for the adjoint of the composition.
    pub fn derivs(self, v: f64) -> [f64; 5] {
        match self {
            Activation::Tanh => {
                let t = v.tanh();
                let f1 = 1.0 - t * t;
                let f2 = -2.0 * t * f1;
                let f3 = -2.0 * (f1 * f1 + t * f2);
                let f4 = -2.0 * (3.0 * f1 * f2 + t * f3);
                [t, f1, f2, f3, f4]
            }
            Activation::Exp => {
                let e = v.exp();
                [e, e, e, e, e]
            }
            Activation::Sin => {
                let (s, c) = v.sin_cos();
                [s, c, -s, -c, s]
            }
            Activation::Cos => {
                let (s, c) = v.sin_cos();
                [c, -s, -c, s, c]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::index::n_coeffs;
    use approx::assert_relative_eq;

    #[test]
    fn truncated_product_bilinear() {
        // Jets for x and y at (2, 3), order 2: product must carry value 6,
        // dx 3, dy 2, dxdy 1 and zero pure second-order terms.
        let nc = n_coeffs(2, 2);
        let x = [2.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let y = [3.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let mut out = vec![0.0; nc];
        mul_acc(mul_table(2, 2), &x, &y, &mut out);
        assert_eq!(out, vec![6.0, 3.0, 2.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn compose_exp_series() {
        // exp of the identity jet at 0 (1-D, order 3): coeffs 1, 1, 1/2, 1/6.
        let a = [0.0, 1.0, 0.0, 0.0];
        let d = Activation::Exp.derivs(0.0);
        let mut out = [0.0; 4];
        compose(1, 3, &a, &d, &mut out);
        for (got, want) in out.iter().zip([1.0, 1.0, 0.5, 1.0 / 6.0]) {
            assert_relative_eq!(got, &want, epsilon = 1e-15);
        }
    }

    #[test]
    fn compose_tanh_at_zero() {
        // tanh seed jet at 0, order 3: value 0, first 1, second 0, third -2
        // stored as -2/3! = -1/3.
        let a = [0.0, 1.0, 0.0, 0.0];
        let d = Activation::Tanh.derivs(0.0);
        let mut out = [0.0; 4];
        compose(1, 3, &a, &d, &mut out);
        assert_relative_eq!(out[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(out[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(out[2], 0.0, epsilon = 1e-15);
        assert_relative_eq!(out[3], -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn compose_sin_at_half_pi() {
        // sin of the identity jet at pi/2, order 2: value 1, first 0, second -1/2.
        let a = [std::f64::consts::FRAC_PI_2, 1.0, 0.0];
        let d = Activation::Sin.derivs(std::f64::consts::FRAC_PI_2);
        let mut out = [0.0; 3];
        compose(1, 2, &a, &d, &mut out);
        assert_relative_eq!(out[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(out[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(out[2], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn tanh_saturates() {
        let d = Activation::Tanh.derivs(1000.0);
        assert!((d[0] - 1.0).abs() < 1e-12);
        for f in &d[1..] {
            assert!(f.abs() < 1e-12);
        }
    }

    #[test]
    fn tanh_derivative_matches_finite_difference() {
        let v = 0.5;
        let d = Activation::Tanh.derivs(v);
        let h = 1e-6;
        let fd = ((v + h).tanh() - (v - h).tanh()) / (2.0 * h);
        assert_relative_eq!(d[1], fd, max_relative = 1e-8);
        assert_relative_eq!(d[1], 0.786448, max_relative = 1e-6);
    }

    #[test]
    fn activation_higher_derivs_match_finite_differences() {
        let h = 1e-3;
        for act in [Activation::Tanh, Activation::Exp, Activation::Sin, Activation::Cos] {
            for v in [-1.2, -0.3, 0.0, 0.7, 1.5] {
                let d = act.derivs(v);
                let f = |x: f64| act.derivs(x)[0];
                let fd2 = (f(v + h) - 2.0 * f(v) + f(v - h)) / (h * h);
                let fd3 = (f(v + 2.0 * h) - 2.0 * f(v + h) + 2.0 * f(v - h) - f(v - 2.0 * h))
                    / (2.0 * h * h * h);
                let fd4 = (f(v + 2.0 * h) - 4.0 * f(v + h) + 6.0 * f(v) - 4.0 * f(v - h)
                    + f(v - 2.0 * h))
                    / (h * h * h * h);
                assert_relative_eq!(d[2], fd2, max_relative = 1e-5, epsilon = 1e-6);
                assert_relative_eq!(d[3], fd3, max_relative = 1e-4, epsilon = 1e-5);
                assert_relative_eq!(d[4], fd4, max_relative = 1e-2, epsilon = 1e-2);
            }
        }
    }
}
