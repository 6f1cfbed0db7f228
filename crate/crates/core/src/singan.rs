//! Singularity analysis at a candidate cluster point `x*`.
//!
//! Restricting `f = p / q` to the lines `t -> x* + t d` turns numerator and
//! denominator into polynomials in `t` whose coefficients are polynomials in
//! the direction `d` (the *pencil*). The first coefficient of the denominator
//! that is not identically zero, `f_{n_min}`, decides which directions are
//! safe: along `d` with `f_{n_min}(d) != 0` the restriction is analytic at
//! `t = 0` after cancelling `t^{n_min}`, and its Maclaurin coefficients obey a
//! linear recurrence whose companion matrix gives a convergence radius bound.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::poly::{f64_to_rat, format_rational, rat_to_f64, Polynomial};
use crate::rational::RationalFunction;
use crate::series;

/// Relative margin for deciding safe-set membership of float directions:
/// `|f_{n_min}(d)| > SAFE_MARGIN * |d|^{n_min}`.
pub const SAFE_MARGIN: f64 = 1e-9;

/// Default number of Taylor coefficients computed along a line.
pub const DEFAULT_TERMS: usize = 64;

/// `k` in the radius bound `k / max(1, |C|_inf)`.
pub const RADIUS_K: f64 = 0.5;

/// Coefficients of numerator and denominator along lines through `base`.
#[derive(Clone, Debug)]
pub struct LinePencil {
    base: Vec<BigRational>,
    base_point: Point,
    denom_coeffs: Vec<Polynomial>,
    numer_coeffs: Vec<Polynomial>,
    n_min: usize,
}

impl LinePencil {
    pub fn base(&self) -> &[BigRational] {
        &self.base
    }

    pub fn base_point(&self) -> &Point {
        &self.base_point
    }

    pub fn denom_coeffs(&self) -> &[Polynomial] {
        &self.denom_coeffs
    }

    pub fn numer_coeffs(&self) -> &[Polynomial] {
        &self.numer_coeffs
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    /// `f_{n_min}`, the polynomial whose nonvanishing locus is the safe set.
    pub fn pencil_polynomial(&self) -> &Polynomial {
        &self.denom_coeffs[self.n_min]
    }

    /// Numerator coefficient of order `n_min`; zero if the numerator has lower degree.
    pub fn numer_leading(&self) -> Polynomial {
        self.numer_coeffs
            .get(self.n_min)
            .cloned()
            .unwrap_or_else(|| Polynomial::zero(self.base.len()))
    }

    /// True when the denominator does not vanish at the base point.
    pub fn is_regular(&self) -> bool {
        self.n_min == 0
    }
}

/// Builds the pencil of `f` at an exact point and checks that the numerator
/// vanishes to at least the same order as the denominator.
pub fn analyze_singularity(f: &RationalFunction, x_star: &[BigRational]) -> Result<LinePencil> {
    let denom_coeffs = f.denom().compose_line(x_star)?;
    let numer_coeffs = f.numer().compose_line(x_star)?;
    let n_min = denom_coeffs
        .iter()
        .position(|p| !p.is_zero())
        .ok_or(Error::ZeroDenominator)?;
    if let Some(order) = numer_coeffs.iter().position(|p| !p.is_zero()) {
        if order < n_min {
            return Err(Error::Unbounded {
                point: format_exact(x_star),
                numer_order: order,
                n_min,
            });
        }
    }
    let base_point = Point::new(x_star.iter().map(rat_to_f64).collect())?;
    Ok(LinePencil {
        base: x_star.to_vec(),
        base_point,
        denom_coeffs,
        numer_coeffs,
        n_min,
    })
}

pub(crate) fn format_exact(x: &[BigRational]) -> String {
    let parts: Vec<String> = x.iter().map(format_rational).collect();
    format!("({})", parts.join(", "))
}

/// Safe-set verdict for one direction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionVerdict {
    pub direction: Point,
    pub in_safe_set: bool,
    /// `f_{n_min}(direction)`.
    pub pencil_value: f64,
    /// `lim_{t -> 0} f(x* + t d)` when the direction is safe.
    pub limit_value: Option<f64>,
}

fn check_direction(pencil: &LinePencil, d: &Point) -> Result<()> {
    if d.dim() != pencil.base.len() {
        return Err(Error::Dimension {
            expected: pencil.base.len(),
            found: d.dim(),
        });
    }
    if d.is_zero() {
        return Err(Error::InvalidDirection {
            direction: d.to_string(),
            reason: "zero vector".into(),
        });
    }
    Ok(())
}

/// Verdict for a floating-point direction, using the relative [`SAFE_MARGIN`].
pub fn direction_verdict(pencil: &LinePencil, d: &Point) -> Result<DirectionVerdict> {
    check_direction(pencil, d)?;
    let value = pencil.pencil_polynomial().eval(d)?;
    let scale = d.norm().powi(pencil.n_min as i32);
    let in_safe_set = value.abs() > SAFE_MARGIN * scale;
    let limit_value = if in_safe_set {
        Some(pencil.numer_leading().eval(d)? / value)
    } else {
        None
    };
    Ok(DirectionVerdict {
        direction: d.clone(),
        in_safe_set,
        pencil_value: value,
        limit_value,
    })
}

/// Verdict for an exact direction; membership is decided exactly.
pub fn direction_verdict_exact(pencil: &LinePencil, d: &[BigRational]) -> Result<DirectionVerdict> {
    let point = Point::new(d.iter().map(rat_to_f64).collect())?;
    if d.iter().all(Zero::is_zero) {
        return Err(Error::InvalidDirection {
            direction: format_exact(d),
            reason: "zero vector".into(),
        });
    }
    check_direction(pencil, &point)?;
    let value = pencil.pencil_polynomial().eval_exact(d)?;
    let in_safe_set = !value.is_zero();
    let limit_value = if in_safe_set {
        Some(rat_to_f64(&(pencil.numer_leading().eval_exact(d)? / &value)))
    } else {
        None
    };
    Ok(DirectionVerdict {
        direction: point,
        in_safe_set,
        pencil_value: rat_to_f64(&value),
        limit_value,
    })
}

/// Maclaurin expansion of `t -> f(x* + t d)` (with `t^{n_min}` cancelled from
/// numerator and denominator) and its recurrence data.
#[derive(Clone, Debug)]
pub struct TaylorLine {
    pub direction: Point,
    /// Exact coefficients `c_0 .. c_{N-1}`.
    pub exact_coeffs: Vec<BigRational>,
    pub coeffs: Vec<f64>,
    /// Shifted numerator and denominator along the line, in powers of `t`.
    pub numer_line: Vec<BigRational>,
    pub denom_line: Vec<BigRational>,
    pub recurrence_order: usize,
    pub exact_weights: Vec<BigRational>,
    pub recurrence_weights: Vec<f64>,
    /// The recurrence holds for every `n >= recurrence_start`.
    pub recurrence_start: usize,
    pub radius_lower_bound: f64,
}

impl TaylorLine {
    /// Companion matrix infinity norm.
    pub fn companion_norm(&self) -> f64 {
        series::inf_norm(&series::companion_matrix(&self.recurrence_weights))
    }

    /// Partial sum `sum_{n < N} c_n t^n`.
    pub fn partial_sum(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// Rigorous upper bound on `sum_{n >= N} |c_n t^n|` from the companion
    /// matrix: the window `v_m = (c_m, .., c_{m+r-1})` satisfies
    /// `|v_m| <= |C|^(m - m0) |v_{m0}|`, so with `K = max(1, |C|)` and
    /// `k = K |t| < 1` the tail is at most `M K^{-m0} k^N / (1 - k)`.
    /// Returns infinity when `k >= 1`.
    pub fn tail_bound(&self, t: f64) -> f64 {
        let n = self.coeffs.len();
        let r = self.recurrence_order;
        if r == 0 {
            // Finite series: the quotient is a polynomial of degree < recurrence_start.
            return if n >= self.recurrence_start { 0.0 } else { f64::INFINITY };
        }
        if n < self.recurrence_start.max(r) {
            return f64::INFINITY;
        }
        let big_k = self.companion_norm().max(1.0);
        let k = big_k * t.abs();
        if k >= 1.0 {
            return f64::INFINITY;
        }
        let m0 = n - r;
        let m = series::max_abs(&self.exact_coeffs[m0..]);
        if m == 0.0 {
            return 0.0;
        }
        let log = m.ln() - (m0 as f64) * big_k.ln() + (n as f64) * k.ln() - (1.0 - k).ln();
        log.exp()
    }

    /// `sum_{n = N}^{N + extra - 1} |c_n t^n|`, continuing the coefficients
    /// with the recurrence in floating point.
    pub fn empirical_tail(&self, t: f64, extra: usize) -> f64 {
        let mut c = self.coeffs.clone();
        let n0 = c.len();
        let w = &self.recurrence_weights;
        let mut sum = 0.0;
        for n in n0..n0 + extra {
            let next: f64 = w
                .iter()
                .enumerate()
                .filter(|(j, _)| *j < n)
                .map(|(j, wj)| wj * c[n - 1 - j])
                .sum();
            c.push(next);
            sum += (next * t.powi(n as i32)).abs();
        }
        sum
    }
}

/// Taylor coefficients of `f` along `d` from `x*`, by exact power-series
/// division of the shifted numerator by the shifted denominator.
pub fn taylor_line(
    f: &RationalFunction,
    x_star: &[BigRational],
    d: &Point,
    n_terms: usize,
) -> Result<TaylorLine> {
    let pencil = analyze_singularity(f, x_star)?;
    taylor_line_from_pencil(&pencil, d, n_terms)
}

pub fn taylor_line_from_pencil(pencil: &LinePencil, d: &Point, n_terms: usize) -> Result<TaylorLine> {
    check_direction(pencil, d)?;
    let exact_d = d.iter().map(|&v| f64_to_rat(v)).collect::<Result<Vec<_>>>()?;
    let n_min = pencil.n_min;
    let eval_all = |coeffs: &[Polynomial]| -> Result<Vec<BigRational>> {
        coeffs
            .iter()
            .skip(n_min)
            .map(|p| p.eval_exact(&exact_d))
            .collect()
    };
    let denom_line = eval_all(&pencil.denom_coeffs)?;
    let numer_line = eval_all(&pencil.numer_coeffs)?;
    if denom_line.first().is_none_or(Zero::is_zero) {
        let value = pencil.pencil_polynomial().eval(d)?;
        return Err(Error::UnsafeDirection {
            direction: d.to_string(),
            n_min,
            value,
        });
    }
    let d_f = series::degree(&numer_line);
    let d_g = series::degree(&denom_line);
    let recurrence_start = d_f.max(d_g) + 1;
    if n_terms < d_f.max(d_g) + d_g {
        return Err(Error::config(
            "terms",
            format!("need at least {} coefficients, got {n_terms}", d_f.max(d_g) + d_g),
        ));
    }
    let exact_coeffs = series::divide(&numer_line, &denom_line, n_terms)?;
    let exact_weights = series::recurrence_weights(&denom_line)?;
    let recurrence_weights = series::weights_f64(&exact_weights);
    let mut line = TaylorLine {
        direction: d.clone(),
        coeffs: exact_coeffs.iter().map(rat_to_f64).collect(),
        exact_coeffs,
        numer_line,
        denom_line,
        recurrence_order: exact_weights.len(),
        exact_weights,
        recurrence_weights,
        recurrence_start,
        radius_lower_bound: 0.0,
    };
    line.radius_lower_bound = radius_lower_bound(&line);
    Ok(line)
}

/// `k / max(1, |C|_inf)` with `k = 1/2`, where `C` is the companion matrix of
/// the line's recurrence.
pub fn radius_lower_bound(line: &TaylorLine) -> f64 {
    RADIUS_K / line.companion_norm().max(1.0)
}
