//! Exact sparse multivariate polynomials over the rationals.
//!
//! Coefficients are arbitrary-precision rationals so that "is this polynomial
//! identically zero" is a decision rather than a floating-point guess. Every
//! constructor and operation returns a canonical form: no stored coefficient
//! is zero, so structural equality is mathematical equality.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a single term, one entry per variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial(exps)
    }

    pub fn one(n_vars: usize) -> Self {
        Monomial(vec![0; n_vars])
    }

    pub fn exps(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Exact sparse polynomial in `n_vars` positional variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Polynomial {
    n_vars: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

/// One term of the polynomial text format: `{"coeff": "num/den", "exps": [..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub coeff: String,
    pub exps: Vec<u32>,
}

impl Polynomial {
    pub fn zero(n_vars: usize) -> Self {
        Polynomial {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: BigRational) -> Self {
        let mut p = Polynomial::zero(n_vars);
        p.add_term(Monomial::one(n_vars), c);
        p
    }

    pub fn from_int(n_vars: usize, c: i64) -> Self {
        Polynomial::constant(n_vars, BigRational::from_integer(c.into()))
    }

    /// The coordinate function `x_i`.
    pub fn var(n_vars: usize, i: usize) -> Result<Self> {
        if i >= n_vars {
            return Err(Error::VariableIndex { index: i, n_vars });
        }
        let mut exps = vec![0; n_vars];
        exps[i] = 1;
        let mut p = Polynomial::zero(n_vars);
        p.add_term(Monomial(exps), BigRational::one());
        Ok(p)
    }

    /// Builds a polynomial from `(coefficient, exponents)` pairs, summing
    /// repeated monomials and dropping zeros.
    pub fn from_terms<I>(n_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BigRational, Vec<u32>)>,
    {
        let mut p = Polynomial::zero(n_vars);
        for (c, exps) in terms {
            if exps.len() != n_vars {
                return Err(Error::Dimension {
                    expected: n_vars,
                    found: exps.len(),
                });
            }
            p.add_term(Monomial(exps), c);
        }
        Ok(p)
    }

    /// Convenience constructor from small integer coefficients.
    pub fn from_int_terms(n_vars: usize, terms: &[(i64, &[u32])]) -> Result<Self> {
        Polynomial::from_terms(
            n_vars,
            terms
                .iter()
                .map(|(c, e)| (BigRational::from_integer((*c).into()), e.to_vec())),
        )
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Iterates over `(monomial, coefficient)` in canonical (lexicographic) order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, exps: &[u32]) -> BigRational {
        self.terms
            .get(&Monomial(exps.to_vec()))
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Exact identically-zero test: true iff the canonical term map is empty.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// True when every term has total degree `d`.
    pub fn is_homogeneous_of(&self, d: u32) -> bool {
        self.terms.keys().all(|m| m.degree() == d)
    }

    fn check_same(&self, other: &Polynomial) -> Result<()> {
        if self.n_vars != other.n_vars {
            return Err(Error::Dimension {
                expected: self.n_vars,
                found: other.n_vars,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut out = Polynomial::zero(self.n_vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.n_vars);
        }
        Polynomial {
            n_vars: self.n_vars,
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.clone(), a * c))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::from_int(self.n_vars, 1);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                out = &out * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        out
    }

    /// Formal partial derivative with respect to variable `i`.
    pub fn partial(&self, i: usize) -> Result<Polynomial> {
        if i >= self.n_vars {
            return Err(Error::VariableIndex {
                index: i,
                n_vars: self.n_vars,
            });
        }
        let mut out = Polynomial::zero(self.n_vars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[i] -= 1;
            out.add_term(Monomial(exps), c * BigRational::from_integer(e.into()));
        }
        Ok(out)
    }

    /// All first partials, in variable order.
    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.n_vars)
            .map(|i| self.partial(i).expect("index in range"))
            .collect()
    }

    fn check_point_len(&self, len: usize) -> Result<()> {
        if len != self.n_vars {
            return Err(Error::Dimension {
                expected: self.n_vars,
                found: len,
            });
        }
        Ok(())
    }

    /// Floating-point evaluation.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point_len(x.len())?;
        Ok(self
            .terms
            .iter()
            .map(|(m, c)| {
                m.0.iter()
                    .zip(x)
                    .fold(rat_to_f64(c), |acc, (&e, &xi)| acc * xi.powi(e as i32))
            })
            .sum())
    }

    /// Exact evaluation at rational coordinates.
    pub fn eval_exact(&self, x: &[BigRational]) -> Result<BigRational> {
        self.check_point_len(x.len())?;
        let mut sum = BigRational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (&e, xi) in m.0.iter().zip(x) {
                if e > 0 {
                    term *= num_traits::pow(xi.clone(), e as usize);
                }
            }
            sum += term;
        }
        Ok(sum)
    }

    /// Restriction to the line `t -> base + t * d`, returned as the Maclaurin
    /// coefficients in `t`. Entry `n` is a polynomial in the `n_vars`
    /// direction variables `d`, homogeneous of degree `n`, with
    /// `p(base + t d) = sum_n f_n(d) t^n`. The sequence has `deg(p) + 1`
    /// entries (one entry for the zero polynomial).
    pub fn compose_line(&self, base: &[BigRational]) -> Result<Vec<Polynomial>> {
        self.check_point_len(base.len())?;
        let deg = self.total_degree().unwrap_or(0) as usize;
        let mut out = vec![Polynomial::zero(self.n_vars); deg + 1];
        for (m, c) in &self.terms {
            // Per variable: the binomial expansion of (b_i + t d_i)^e_i as
            // (k, C(e,k) b_i^(e-k)) pairs, skipping vanishing coefficients.
            let factors: Vec<Vec<(u32, BigRational)>> = m
                .0
                .iter()
                .zip(base)
                .map(|(&e, b)| {
                    (0..=e)
                        .filter_map(|k| {
                            let coef = BigRational::from_integer(binomial(e, k))
                                * num_traits::pow(b.clone(), (e - k) as usize);
                            (!coef.is_zero()).then_some((k, coef))
                        })
                        .collect()
                })
                .collect();
            let mut partial: Vec<(Vec<u32>, BigRational)> = vec![(Vec::new(), c.clone())];
            for f in &factors {
                let mut next = Vec::with_capacity(partial.len() * f.len());
                for (exps, coef) in &partial {
                    for (k, fc) in f {
                        let mut e = exps.clone();
                        e.push(*k);
                        next.push((e, coef * fc));
                    }
                }
                partial = next;
            }
            for (exps, coef) in partial {
                let n: u32 = exps.iter().sum();
                out[n as usize].add_term(Monomial(exps), coef);
            }
        }
        Ok(out)
    }

    /// Substitutes `x_i -> x_i - shift_i` exactly, i.e. returns `q` with
    /// `q(x) = p(x - shift)`.
    pub fn translate(&self, shift: &[BigRational]) -> Result<Polynomial> {
        self.check_point_len(shift.len())?;
        let neg: Vec<BigRational> = shift.iter().map(|s| -s.clone()).collect();
        // p(x - s) = sum_n f_n(x) with f_n from the line through -s with unit t.
        Ok(self
            .compose_line(&neg)?
            .into_iter()
            .fold(Polynomial::zero(self.n_vars), |acc, f| &acc + &f))
    }

    /// Serializes into the positional text format, in canonical term order.
    pub fn to_records(&self) -> Vec<TermRecord> {
        self.terms
            .iter()
            .map(|(m, c)| TermRecord {
                coeff: format_rational(c),
                exps: m.0.clone(),
            })
            .collect()
    }

    pub fn from_records(n_vars: usize, records: &[TermRecord]) -> Result<Polynomial> {
        let terms = records
            .iter()
            .map(|r| Ok((parse_rational(&r.coeff)?, r.exps.clone())))
            .collect::<Result<Vec<_>>>()?;
        Polynomial::from_terms(n_vars, terms)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    /// Panics on mismatched `n_vars`; use [`Polynomial::try_add`] to get an error.
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial n_vars mismatch")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial n_vars mismatch")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.try_mul(rhs).expect("polynomial n_vars mismatch")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(&-BigRational::one())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        // Highest total degree first reads more naturally.
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|a, b| b.0.degree().cmp(&a.0.degree()).then(b.0.cmp(a.0)));
        for (i, (m, c)) in terms.into_iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let is_const = m.degree() == 0;
            if !abs.is_one() || is_const {
                write!(f, "{}", format_rational(&abs))?;
                if !is_const {
                    write!(f, "*")?;
                }
            }
            let mut first = true;
            for (v, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                write!(f, "x{}", v + 1)?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn binomial(n: u32, k: u32) -> BigInt {
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Nearest double to an exact rational.
pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite double.
pub fn f64_to_rat(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::parse("coordinate", format!("{x} is not finite")))
}

/// `"n"` for integers, `"n/d"` otherwise.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `"n"`, `"n/d"` or a plain decimal such as `"-0.125"` or `"1e-3"`
/// into an exact rational. Decimals are read exactly as written, not via f64.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let err = |why: &str| Error::parse(s.to_string(), why);
    if s.is_empty() {
        return Err(err("empty number"));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err("bad numerator"))?;
        let d: BigInt = d.trim().parse().map_err(|_| err("bad denominator"))?;
        if d.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = s[i + 1..].parse().map_err(|_| err("bad exponent"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err("not a number"));
    }
    let all: BigInt = format!("{int_part}{frac_part}0")
        .parse::<BigInt>()
        .map_err(|_| err("not a number"))?
        / BigInt::from(10);
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        BigRational::from_integer(all * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(all, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        value = -value;
    }
    Ok(value)
}

/// Floating-point image of a polynomial, laid out for repeated evaluation.
///
/// Alongside the `f64` coefficients it keeps an integer image
/// (`coeff = int_coeff / common_denom`) so that a point with `f64`
/// coordinates can also be evaluated exactly when the float sum cancels badly.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    n_vars: usize,
    coeffs: Vec<f64>,
    exps: Vec<u32>,
    degrees: Vec<u32>,
    max_exp: Vec<u32>,
    max_degree: u32,
    int_coeffs: Vec<BigInt>,
    common_denom: BigInt,
}

impl CompiledPoly {
    pub fn new(p: &Polynomial) -> Self {
        let n = p.n_vars;
        let mut max_exp = vec![0; n];
        let mut coeffs = Vec::with_capacity(p.n_terms());
        let mut exps = Vec::with_capacity(p.n_terms() * n);
        let mut degrees = Vec::with_capacity(p.n_terms());
        let common_denom = p
            .terms
            .values()
            .fold(BigInt::one(), |acc, c| num_integer::Integer::lcm(&acc, c.denom()));
        let mut int_coeffs = Vec::with_capacity(p.n_terms());
        for (m, c) in p.terms() {
            coeffs.push(rat_to_f64(c));
            int_coeffs.push(c.numer() * (&common_denom / c.denom()));
            degrees.push(m.degree());
            for (i, &e) in m.exps().iter().enumerate() {
                max_exp[i] = max_exp[i].max(e);
                exps.push(e);
            }
        }
        CompiledPoly {
            n_vars: n,
            max_degree: degrees.iter().copied().max().unwrap_or(0),
            coeffs,
            exps,
            degrees,
            max_exp,
            int_coeffs,
            common_denom,
        }
    }

    /// Power table: `table[i][e] = x_i^e`.
    pub fn powers(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.max_exp
            .iter()
            .zip(x)
            .map(|(&m, &xi)| {
                let mut row = Vec::with_capacity(m as usize + 1);
                let mut acc = 1.0;
                row.push(acc);
                for _ in 0..m {
                    acc *= xi;
                    row.push(acc);
                }
                row
            })
            .collect()
    }

    /// Returns the float value together with the sum of absolute term values;
    /// their ratio bounds the relative rounding error of the value.
    pub fn eval_with_magnitude(&self, powers: &[Vec<f64>]) -> (f64, f64) {
        let n = self.n_vars;
        let mut sum = 0.0;
        let mut abs = 0.0;
        for (t, &c) in self.coeffs.iter().enumerate() {
            let v = self.exps[t * n..(t + 1) * n]
                .iter()
                .enumerate()
                .fold(c, |acc, (i, &e)| if e == 0 { acc } else { acc * powers[i][e as usize] });
            sum += v;
            abs += v.abs();
        }
        (sum, abs)
    }

    pub fn eval_with(&self, powers: &[Vec<f64>]) -> f64 {
        self.eval_with_magnitude(powers).0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_with(&self.powers(x))
    }

    /// Exact value at the point encoded by `table`.
    pub fn eval_exact_with(&self, table: &DyadicPowers) -> BigRational {
        let n = self.n_vars;
        let top = self.max_degree;
        let mut sum = BigInt::zero();
        for (t, c) in self.int_coeffs.iter().enumerate() {
            let mut term = c.clone();
            for (i, &e) in self.exps[t * n..(t + 1) * n].iter().enumerate() {
                if e > 0 {
                    term *= &table.powers[i][e as usize];
                }
            }
            // Bring every term onto the common denominator 2^(shift * top).
            let pad = (top - self.degrees[t]) as usize * table.shift;
            sum += term << pad;
        }
        let denom = &self.common_denom << (table.shift * top as usize);
        BigRational::new(sum, denom)
    }

    pub fn max_exponents(&self) -> &[u32] {
        &self.max_exp
    }
}

/// A point with `f64` coordinates written exactly as `X_i / 2^shift` with
/// integer `X_i`, plus integer powers of each `X_i`.
#[derive(Clone, Debug)]
pub struct DyadicPowers {
    shift: usize,
    powers: Vec<Vec<BigInt>>,
}

impl DyadicPowers {
    pub fn new(x: &[f64], max_exp: &[u32]) -> Result<Self> {
        let rats = x.iter().map(|&v| f64_to_rat(v)).collect::<Result<Vec<_>>>()?;
        // Every finite double is an integer times a power of two.
        let shift = rats
            .iter()
            .map(|r| r.denom().trailing_zeros().unwrap_or(0) as usize)
            .max()
            .unwrap_or(0);
        let powers = rats
            .iter()
            .zip(max_exp)
            .map(|(r, &m)| {
                let k = r.denom().trailing_zeros().unwrap_or(0) as usize;
                let base = r.numer() << (shift - k);
                let mut row = Vec::with_capacity(m as usize + 1);
                let mut acc = BigInt::one();
                row.push(acc.clone());
                for _ in 0..m {
                    acc = &acc * &base;
                    row.push(acc.clone());
                }
                row
            })
            .collect();
        Ok(DyadicPowers { shift, powers })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn xy() -> (Polynomial, Polynomial) {
        (
            Polynomial::var(2, 0).unwrap(),
            Polynomial::var(2, 1).unwrap(),
        )
    }

    /// (x^2 + y^2)(1 + x^2 + y^2)
    fn fig1_denom() -> Polynomial {
        let (x, y) = xy();
        let r2 = &(&x * &x) + &(&y * &y);
        &r2 * &(&Polynomial::from_int(2, 1) + &r2)
    }

    #[test]
    fn difference_of_squares() {
        let (x, y) = xy();
        let p = &(&x + &y) * &(&x - &y);
        let expect = Polynomial::from_int_terms(2, &[(1, &[2, 0]), (-1, &[0, 2])]).unwrap();
        assert_eq!(p, expect);
    }

    #[test]
    fn multiply_by_zero_is_empty() {
        let (x, _) = xy();
        let p = &x * &Polynomial::zero(2);
        assert!(p.is_zero());
        assert_eq!(p.n_terms(), 0);
        assert!(x.scale(&BigRational::zero()).is_zero());
    }

    #[test]
    fn fig1_denominator_expansion() {
        // Hand expansion: x^2 + y^2 + x^4 + 2x^2y^2 + y^4.
        let expect = Polynomial::from_int_terms(
            2,
            &[
                (1, &[2, 0]),
                (1, &[0, 2]),
                (1, &[4, 0]),
                (2, &[2, 2]),
                (1, &[0, 4]),
            ],
        )
        .unwrap();
        assert_eq!(fig1_denom(), expect);
    }

    #[test]
    fn mismatched_dims_error() {
        let a = Polynomial::var(2, 0).unwrap();
        let b = Polynomial::var(3, 0).unwrap();
        assert_eq!(
            a.try_mul(&b),
            Err(Error::Dimension {
                expected: 2,
                found: 3
            })
        );
        assert!(a.try_add(&b).is_err());
        assert!(a.eval(&[1.0]).is_err());
    }

    #[test]
    fn evaluation_examples() {
        let (x, y) = xy();
        let p = &(&x * &x) - &(&y * &y);
        assert_eq!(p.eval(&[3.0, 2.0]).unwrap(), 5.0);
        assert_eq!(Polynomial::zero(2).eval(&[1.7, -3.0]).unwrap(), 0.0);
        assert_eq!(fig1_denom().eval(&[1.0, 1.0]).unwrap(), 6.0);
        assert_eq!(
            fig1_denom().eval_exact(&[q(1, 1), q(1, 1)]).unwrap(),
            q(6, 1)
        );
        assert_eq!(CompiledPoly::new(&fig1_denom()).eval(&[1.0, 1.0]), 6.0);
    }

    #[test]
    fn partial_derivatives() {
        let (x, y) = xy();
        let x2y = &(&x * &x) * &y;
        let two_xy = (&x * &y).scale(&q(2, 1));
        assert_eq!(x2y.partial(0).unwrap(), two_xy);
        assert!((&(&y * &y) * &y).partial(0).unwrap().is_zero());
        assert_eq!(
            x.partial(2),
            Err(Error::VariableIndex {
                index: 2,
                n_vars: 2
            })
        );
        // d/dy (x^2+y^2)(1+x^2+y^2) = 2y + 4y(x^2+y^2)
        let r2 = &(&x * &x) + &(&y * &y);
        let expect = &y.scale(&q(2, 1)) + &(&y * &r2).scale(&q(4, 1));
        assert_eq!(fig1_denom().partial(1).unwrap(), expect);
    }

    #[test]
    fn partial_matches_finite_differences() {
        let d = fig1_denom();
        let dy = d.partial(1).unwrap();
        for &(a, b) in &[(0.3, -1.2), (1.1, 0.7), (-0.4, 0.25)] {
            let h = 1e-6;
            let fd = (d.eval(&[a, b + h]).unwrap() - d.eval(&[a, b - h]).unwrap()) / (2.0 * h);
            let exact = dy.eval(&[a, b]).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn compose_line_fig1_at_origin() {
        let f = fig1_denom().compose_line(&[q(0, 1), q(0, 1)]).unwrap();
        assert_eq!(f.len(), 5);
        assert!(f[0].is_zero() && f[1].is_zero() && f[3].is_zero());
        let (x, y) = xy();
        let r2 = &(&x * &x) + &(&y * &y);
        assert_eq!(f[2], r2);
        assert_eq!(f[4], r2.pow(2));
        assert!(!f[2].is_zero());
    }

    #[test]
    fn compose_line_trivial_cases() {
        let c = Polynomial::from_int(2, 7);
        let f = c.compose_line(&[q(3, 1), q(-1, 2)]).unwrap();
        assert_eq!(f, vec![Polynomial::from_int(2, 7)]);

        let x = Polynomial::var(1, 0).unwrap();
        let f = x.compose_line(&[q(1, 1)]).unwrap();
        assert_eq!(f, vec![Polynomial::from_int(1, 1), x.clone()]);
        assert_eq!(Polynomial::zero(1).compose_line(&[q(0, 1)]).unwrap().len(), 1);
    }

    #[test]
    fn identically_zero_checks() {
        let (x, y) = xy();
        assert!((&x - &x).is_zero());
        let sq = (&x + &y).pow(2);
        let rest = &(&(&x * &x) + &(&x * &y).scale(&q(2, 1))) + &(&y * &y);
        assert!((&sq - &rest).is_zero());
    }

    #[test]
    fn translate_shifts_argument() {
        let x = Polynomial::var(1, 0).unwrap();
        let p = &x * &x;
        let shifted = p.translate(&[q(3, 1)]).unwrap();
        // (x - 3)^2 = x^2 - 6x + 9
        let expect = Polynomial::from_int_terms(1, &[(1, &[2]), (-6, &[1]), (9, &[0])]).unwrap();
        assert_eq!(shifted, expect);
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("3").unwrap(), q(3, 1));
        assert_eq!(parse_rational("-6/4").unwrap(), q(-3, 2));
        assert_eq!(parse_rational("-0.125").unwrap(), q(-1, 8));
        assert_eq!(parse_rational("2.5e-1").unwrap(), q(1, 4));
        assert_eq!(parse_rational("1e3").unwrap(), q(1000, 1));
        assert_eq!(parse_rational(".5").unwrap(), q(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
        assert_eq!(format_rational(&q(-3, 2)), "-3/2");
        assert_eq!(format_rational(&q(4, 1)), "4");
    }

    #[test]
    fn records_round_trip_and_merge_duplicates() {
        let recs = vec![
            TermRecord { coeff: "1/2".into(), exps: vec![1, 0] },
            TermRecord { coeff: "1/2".into(), exps: vec![1, 0] },
            TermRecord { coeff: "0".into(), exps: vec![0, 3] },
        ];
        let p = Polynomial::from_records(2, &recs).unwrap();
        assert_eq!(p, Polynomial::var(2, 0).unwrap());
        assert_eq!(Polynomial::from_records(2, &p.to_records()).unwrap(), p);
        let bad = vec![TermRecord { coeff: "1".into(), exps: vec![1] }];
        assert!(Polynomial::from_records(2, &bad).is_err());
    }

    #[test]
    fn display_is_readable() {
        let (x, y) = xy();
        let p = &(&(&x * &x) + &(&y * &y)) - &Polynomial::from_int(2, 1);
        assert_eq!(p.to_string(), "x1^2 + x2^2 - 1");
        assert_eq!(Polynomial::zero(2).to_string(), "0");
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        assert_eq!(binomial(4, 0), BigInt::from(1));
        assert_eq!(binomial(6, 6), BigInt::from(1));
    }
}
