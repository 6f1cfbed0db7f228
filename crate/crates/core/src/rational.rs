use num_traits::Zero;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::poly::{rat_to_f64, CompiledPoly, DyadicPowers, Polynomial};

/// Evaluations with `|denominator| < DENOM_FLOOR` are treated as leaving the domain.
pub const DENOM_FLOOR: f64 = 1e-300;

/// A rational function `p / q` with exact coefficients.
///
/// Symbolic partials of numerator and denominator are built once at
/// construction, together with floating-point images used by evaluation.
#[derive(Clone, Debug)]
pub struct RationalFunction {
    numer: Polynomial,
    denom: Polynomial,
    compiled: Compiled,
}

#[derive(Clone, Debug)]
struct Compiled {
    numer: CompiledPoly,
    denom: CompiledPoly,
    d_numer: Vec<CompiledPoly>,
    d_denom: Vec<CompiledPoly>,
    max_exp: Vec<u32>,
}

/// Float sums whose absolute term mass exceeds the value by this factor are
/// re-evaluated exactly.
const CANCELLATION_LIMIT: f64 = 1e6;

fn ill_conditioned((value, mass): (f64, f64)) -> bool {
    mass > CANCELLATION_LIMIT * value.abs()
}

impl RationalFunction {
    pub fn new(numer: Polynomial, denom: Polynomial) -> Result<Self> {
        if numer.n_vars() != denom.n_vars() {
            return Err(Error::Dimension {
                expected: numer.n_vars(),
                found: denom.n_vars(),
            });
        }
        if denom.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let numer_c = CompiledPoly::new(&numer);
        let denom_c = CompiledPoly::new(&denom);
        let max_exp = numer_c
            .max_exponents()
            .iter()
            .zip(denom_c.max_exponents())
            .map(|(a, b)| *a.max(b))
            .collect();
        let compiled = Compiled {
            numer: numer_c,
            denom: denom_c,
            d_numer: numer.gradient().iter().map(CompiledPoly::new).collect(),
            d_denom: denom.gradient().iter().map(CompiledPoly::new).collect(),
            max_exp,
        };
        Ok(RationalFunction {
            numer,
            denom,
            compiled,
        })
    }

    /// A polynomial viewed as a rational function with denominator 1.
    pub fn from_polynomial(p: Polynomial) -> Self {
        let n = p.n_vars();
        RationalFunction::new(p, Polynomial::from_int(n, 1)).expect("denominator is 1")
    }

    pub fn n_vars(&self) -> usize {
        self.numer.n_vars()
    }

    pub fn numer(&self) -> &Polynomial {
        &self.numer
    }

    pub fn denom(&self) -> &Polynomial {
        &self.denom
    }

    fn check(&self, x: &Point) -> Result<()> {
        if x.dim() != self.n_vars() {
            return Err(Error::Dimension {
                expected: self.n_vars(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    fn domain_error(x: &Point, q: f64) -> Error {
        Error::DomainViolation {
            point: x.clone(),
            denom_abs: q.abs(),
        }
    }

    fn denom_checked(&self, x: &Point, q: f64) -> Result<()> {
        if !(q.abs() >= DENOM_FLOOR) {
            return Err(Self::domain_error(x, q));
        }
        Ok(())
    }

    fn dyadic(&self, x: &Point) -> Result<DyadicPowers> {
        DyadicPowers::new(x, &self.compiled.max_exp)
    }

    /// `f(x)`. Falls back to exact arithmetic when the float sums cancel.
    pub fn eval(&self, x: &Point) -> Result<f64> {
        self.check(x)?;
        let c = &self.compiled;
        let pn = c.numer.powers(x);
        let pd = c.denom.powers(x);
        let qn = c.denom.eval_with_magnitude(&pd);
        let pv = c.numer.eval_with_magnitude(&pn);
        if ill_conditioned(qn) || ill_conditioned(pv) {
            let table = self.dyadic(x)?;
            let q = c.denom.eval_exact_with(&table);
            if q.is_zero() {
                return Err(Self::domain_error(x, 0.0));
            }
            self.denom_checked(x, rat_to_f64(&q))?;
            return Ok(rat_to_f64(&(c.numer.eval_exact_with(&table) / q)));
        }
        self.denom_checked(x, qn.0)?;
        Ok(pv.0 / qn.0)
    }

    /// `f(x)` together with the gradient `(grad p - f grad q) / q`, which is
    /// the quotient rule `(q grad p - p grad q) / q^2` rearranged so that `q^2`
    /// is never formed in floating point. When any float sum cancels badly the
    /// whole evaluation is redone exactly and rounded once per output.
    pub fn eval_and_grad(&self, x: &Point) -> Result<(f64, Point)> {
        self.check(x)?;
        let c = &self.compiled;
        let pows_n = c.numer.powers(x);
        let pows_d = c.denom.powers(x);
        let q = c.denom.eval_with_magnitude(&pows_d);
        let p = c.numer.eval_with_magnitude(&pows_n);
        let mut exact = ill_conditioned(q) || ill_conditioned(p);
        let mut grad = Vec::with_capacity(x.dim());
        if !exact {
            self.denom_checked(x, q.0)?;
            let f = p.0 / q.0;
            for (dp, dq) in c.d_numer.iter().zip(&c.d_denom) {
                let a = dp.eval_with_magnitude(&pows_n);
                let b = dq.eval_with_magnitude(&pows_d);
                let diff = a.0 - f * b.0;
                let mass = a.1 + (f * b.1).abs();
                if ill_conditioned(a) || ill_conditioned(b) || ill_conditioned((diff, mass)) {
                    exact = true;
                    break;
                }
                grad.push(diff / q.0);
            }
            if !exact {
                let grad = Point::new(grad).map_err(|_| Self::domain_error(x, q.0))?;
                return Ok((f, grad));
            }
            // Only the gradient cancelled; keep the value identical to `eval`.
            let (_, grad) = self.eval_and_grad_exact(x)?;
            return Ok((f, grad));
        }
        self.eval_and_grad_exact(x)
    }

    fn eval_and_grad_exact(&self, x: &Point) -> Result<(f64, Point)> {
        let c = &self.compiled;
        let table = self.dyadic(x)?;
        let q = c.denom.eval_exact_with(&table);
        if q.is_zero() {
            return Err(Self::domain_error(x, 0.0));
        }
        self.denom_checked(x, rat_to_f64(&q))?;
        let f = c.numer.eval_exact_with(&table) / &q;
        let grad = c
            .d_numer
            .iter()
            .zip(&c.d_denom)
            .map(|(dp, dq)| {
                rat_to_f64(&((dp.eval_exact_with(&table) - &f * dq.eval_exact_with(&table)) / &q))
            })
            .collect();
        let grad = Point::new(grad).map_err(|_| Self::domain_error(x, rat_to_f64(&q)))?;
        Ok((rat_to_f64(&f), grad))
    }

    /// Exact symbolic partial as a new rational function, `(q p_i - p q_i) / q^2`.
    pub fn partial(&self, i: usize) -> Result<RationalFunction> {
        let dp = self.numer.partial(i)?;
        let dq = self.denom.partial(i)?;
        let num = &(&self.denom * &dp) - &(&self.numer * &dq);
        RationalFunction::new(num, &self.denom * &self.denom)
    }

    /// Sum of two rational functions over the product denominator.
    pub fn try_add(&self, other: &RationalFunction) -> Result<RationalFunction> {
        let num = self
            .numer
            .try_mul(&other.denom)?
            .try_add(&(&other.numer * &self.denom))?;
        RationalFunction::new(num, &self.denom * &other.denom)
    }

    /// `x -> f(x - shift)`.
    pub fn translate(&self, shift: &[num_rational::BigRational]) -> Result<RationalFunction> {
        RationalFunction::new(self.numer.translate(shift)?, self.denom.translate(shift)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn fig1() -> RationalFunction {
        let x = Polynomial::var(2, 0).unwrap();
        let y = Polynomial::var(2, 1).unwrap();
        let r2 = &(&x * &x) + &(&y * &y);
        RationalFunction::new(&x * &y, &r2 * &(&Polynomial::from_int(2, 1) + &r2)).unwrap()
    }

    fn central_fd(f: &RationalFunction, x: &Point, h: f64) -> Vec<f64> {
        (0..x.dim())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f.eval(&pt(&xp)).unwrap() - f.eval(&pt(&xm)).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn one_over_one_plus_x_squared() {
        let x = Polynomial::var(1, 0).unwrap();
        let f = RationalFunction::new(
            Polynomial::from_int(1, 1),
            &Polynomial::from_int(1, 1) + &(&x * &x),
        )
        .unwrap();
        let (v, g) = f.eval_and_grad(&pt(&[1.0])).unwrap();
        assert_eq!(v, 0.5);
        assert!((g[0] + 0.5).abs() < 1e-15);
        let fd = central_fd(&f, &pt(&[1.0]), 1e-6);
        assert!((fd[0] + 0.5).abs() < 1e-8);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let f = RationalFunction::from_polynomial(Polynomial::from_int(3, -4));
        let (v, g) = f.eval_and_grad(&pt(&[0.3, 1.0, -2.0])).unwrap();
        assert_eq!(v, -4.0);
        assert!(g.is_zero());
    }

    #[test]
    fn fig1_value_and_gradient() {
        let f = fig1();
        let x = pt(&[1.0, -1.0]);
        let (v, g) = f.eval_and_grad(&x).unwrap();
        assert!((v + 1.0 / 6.0).abs() < 1e-15);
        let fd = central_fd(&f, &x, 1e-6);
        for i in 0..2 {
            assert!((g[i] - fd[i]).abs() <= 1e-6 * g.norm());
        }
    }

    #[test]
    fn domain_violation_at_singularity() {
        let f = fig1();
        match f.eval_and_grad(&pt(&[0.0, 0.0])) {
            Err(Error::DomainViolation { point, .. }) => assert_eq!(point, pt(&[0.0, 0.0])),
            other => panic!("expected domain violation, got {other:?}"),
        }
        assert!(f.eval(&pt(&[1e-200, 0.0])).is_err());
    }

    #[test]
    fn rejects_zero_denominator_and_bad_dims() {
        assert_eq!(
            RationalFunction::new(Polynomial::from_int(1, 1), Polynomial::zero(1)).unwrap_err(),
            Error::ZeroDenominator
        );
        assert!(RationalFunction::new(Polynomial::zero(1), Polynomial::from_int(2, 1)).is_err());
        assert!(fig1().eval(&pt(&[1.0])).is_err());
    }

    #[test]
    fn symbolic_partial_agrees_with_numeric_gradient() {
        let f = fig1();
        let x = pt(&[0.7, -0.2]);
        let (_, g) = f.eval_and_grad(&x).unwrap();
        for i in 0..2 {
            let gi = f.partial(i).unwrap().eval(&x).unwrap();
            assert!((gi - g[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn translate_moves_singularity() {
        let f = fig1();
        let shift = [BigRational::from_integer(3.into()), BigRational::from_integer(0.into())];
        let g = f.translate(&shift).unwrap();
        let a = f.eval(&pt(&[0.4, -0.3])).unwrap();
        let b = g.eval(&pt(&[3.4, -0.3])).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        assert!(g.eval(&pt(&[3.0, 0.0])).is_err());
    }

    #[test]
    fn cancellation_falls_back_to_exact_arithmetic() {
        // Near a translated singularity the expanded polynomials cancel almost
        // completely; the result must still match the untranslated function.
        let f = fig1();
        let shift = [BigRational::from_integer(3.into()), BigRational::from_integer(0.into())];
        let g = f.translate(&shift).unwrap();
        let prod = g.try_add(&f).unwrap();
        for &r in &[1e-4, 1e-7, 1e-12] {
            let moved = pt(&[3.0 + r * 0.6, -r * 0.8]);
            // Exact (Sterbenz) so both points describe the same offset.
            let local = pt(&[moved[0] - 3.0, moved[1]]);
            let (a, ga) = f.eval_and_grad(&local).unwrap();
            let (b, gb) = g.eval_and_grad(&moved).unwrap();
            assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b} at r={r}");
            assert!(ga.distance(&gb) <= 1e-6 * ga.norm(), "{ga} vs {gb}");
            // Sum of both copies: value near the shifted center is dominated by g.
            let s = prod.eval(&moved).unwrap();
            let direct = b + f.eval(&moved).unwrap();
            assert!((s - direct).abs() <= 1e-9, "{s} vs {direct}");
        }
    }
}
