//! Exact univariate power-series division and the linear recurrence that the
//! tail of a rational function's Maclaurin coefficients obeys.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::poly::rat_to_f64;

/// Drops trailing zero coefficients.
pub fn trim(coeffs: &[BigRational]) -> &[BigRational] {
    let len = coeffs
        .iter()
        .rposition(|c| !c.is_zero())
        .map_or(0, |i| i + 1);
    &coeffs[..len]
}

/// Degree of a coefficient list after trimming; 0 for the zero polynomial.
pub fn degree(coeffs: &[BigRational]) -> usize {
    trim(coeffs).len().saturating_sub(1)
}

/// First `n_terms` Maclaurin coefficients of `num / den` by long division.
///
/// `den[0]` must be nonzero.
pub fn divide(num: &[BigRational], den: &[BigRational], n_terms: usize) -> Result<Vec<BigRational>> {
    let den = trim(den);
    if den.first().is_none_or(Zero::is_zero) {
        return Err(Error::config("denominator", "constant coefficient must be nonzero"));
    }
    let mut out: Vec<BigRational> = Vec::with_capacity(n_terms);
    for n in 0..n_terms {
        let mut acc = num.get(n).cloned().unwrap_or_else(BigRational::zero);
        for j in 1..den.len().min(n + 1) {
            acc -= &den[j] * &out[n - j];
        }
        out.push(acc / &den[0]);
    }
    Ok(out)
}

/// Recurrence weights `w_j = -den_j / den_0`, `j = 1..=deg(den)`, so that
/// `c_n = sum_j w_j c_{n-j}` for `n > max(deg num, deg den)`.
pub fn recurrence_weights(den: &[BigRational]) -> Result<Vec<BigRational>> {
    let den = trim(den);
    let g0 = den
        .first()
        .filter(|g| !g.is_zero())
        .ok_or_else(|| Error::config("denominator", "constant coefficient must be nonzero"))?;
    Ok(den[1..].iter().map(|g| -(g / g0)).collect())
}

/// Extends `seed` to `n_terms` coefficients using the recurrence alone.
pub fn extend_by_recurrence(
    seed: &[BigRational],
    weights: &[BigRational],
    n_terms: usize,
) -> Vec<BigRational> {
    let mut out = seed[..seed.len().min(n_terms)].to_vec();
    while out.len() < n_terms {
        let n = out.len();
        let next = weights
            .iter()
            .enumerate()
            .filter(|(j, _)| *j < n)
            .fold(BigRational::zero(), |acc, (j, w)| acc + w * &out[n - 1 - j]);
        out.push(next);
    }
    out
}

/// Companion matrix of the recurrence: it maps the window
/// `(c_n, .., c_{n+r-1})` to `(c_{n+1}, .., c_{n+r})`.
pub fn companion_matrix(weights: &[f64]) -> Vec<Vec<f64>> {
    let r = weights.len();
    let mut c = vec![vec![0.0; r]; r];
    for (i, row) in c.iter_mut().enumerate().take(r.saturating_sub(1)) {
        row[i + 1] = 1.0;
    }
    if r > 0 {
        // Last row: c_{n+r} = w_1 c_{n+r-1} + ... + w_r c_n.
        for (j, w) in weights.iter().enumerate() {
            c[r - 1][r - 1 - j] = *w;
        }
    }
    c
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Converts exact weights to floats.
pub fn weights_f64(weights: &[BigRational]) -> Vec<f64> {
    weights.iter().map(rat_to_f64).collect()
}

/// Largest absolute value in a slice of rationals, as f64.
pub fn max_abs(coeffs: &[BigRational]) -> f64 {
    coeffs
        .iter()
        .map(|c| rat_to_f64(&c.abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigRational> {
        v.iter().map(|&x| BigRational::from_integer(x.into())).collect()
    }

    #[test]
    fn geometric_series() {
        let c = divide(&ints(&[1]), &ints(&[1, -1]), 6).unwrap();
        assert_eq!(c, ints(&[1, 1, 1, 1, 1, 1]));
        assert_eq!(recurrence_weights(&ints(&[1, -1])).unwrap(), ints(&[1]));
    }

    #[test]
    fn fibonacci_series() {
        let c = divide(&ints(&[1]), &ints(&[1, -1, -1]), 11).unwrap();
        assert_eq!(c, ints(&[1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89]));
        let w = recurrence_weights(&ints(&[1, -1, -1])).unwrap();
        assert_eq!(extend_by_recurrence(&c[..3], &w, 11), c);
    }

    #[test]
    fn division_needs_nonzero_constant_term() {
        assert!(divide(&ints(&[1]), &ints(&[0, 1]), 3).is_err());
        assert!(recurrence_weights(&ints(&[0, 0])).is_err());
    }

    #[test]
    fn polynomial_quotient_terminates() {
        // (1 + t)^2 / 1: finite series, no recurrence.
        let c = divide(&ints(&[1, 2, 1]), &ints(&[1]), 5).unwrap();
        assert_eq!(c, ints(&[1, 2, 1, 0, 0]));
        assert!(recurrence_weights(&ints(&[1])).unwrap().is_empty());
    }

    #[test]
    fn companion_norms() {
        assert_eq!(inf_norm(&companion_matrix(&[1.0])), 1.0);
        assert_eq!(inf_norm(&companion_matrix(&[1.0, 1.0])), 2.0);
        let c = companion_matrix(&[0.5, -3.0, 0.25]);
        assert_eq!(c[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(c[2], vec![0.25, -3.0, 0.5]);
        assert_eq!(inf_norm(&c), 3.75);
        assert_eq!(inf_norm(&companion_matrix(&[])), 0.0);
    }

    #[test]
    fn trimming() {
        assert_eq!(trim(&ints(&[1, 0, 2, 0, 0])).len(), 3);
        assert_eq!(degree(&ints(&[0, 0])), 0);
        assert_eq!(degree(&ints(&[3, 0, 5])), 2);
    }
}
