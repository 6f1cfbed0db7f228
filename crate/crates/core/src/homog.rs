//! Scale-invariant objectives: normalization, the CP-tensor objective
//! `f̂(x) = |T|² - <τ(x), T>² / |τ(x)|²` as an explicit rational function,
//! and checks of degree-0 homogeneity along traces.

use num_rational::BigRational;
use num_traits::Zero;
use serde_json::Value;

use crate::descent::{check_conditions, ConditionReport, DescentTrace};
use crate::error::{Error, Result};
use crate::point::Point;
use crate::poly::{f64_to_rat, rat_to_f64, Polynomial};
use crate::rational::RationalFunction;

/// Largest `rank * sum(dims)` expanded symbolically by default.
pub const SYMBOLIC_BUDGET: usize = 12;
/// Relative tolerance of the Euler identity `<grad f, x> = 0`.
pub const EULER_TOL: f64 = 1e-8;
/// Unit vectors may deviate from norm one by this much.
pub const UNIT_TOL: f64 = 1e-12;

/// `v / |v|` with a scaled norm, so tiny and huge vectors are fine.
pub fn normalize(v: &Point) -> Result<Point> {
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    if n == 1.0 {
        return Ok(v.clone());
    }
    // Entries never exceed the norm, so the quotients cannot overflow.
    Point::new(v.iter().map(|x| x / n).collect())
}

/// Both sides of `|u - v/|v|| <= 2 |u - v|` for a unit `u`.
pub fn normalization_bound_check(u: &Point, v: &Point) -> Result<(f64, f64)> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    let un = u.norm();
    if (un - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidDirection {
            direction: u.to_string(),
            reason: format!("expected a unit vector, norm is {un}"),
        });
    }
    let vn = normalize(v)?;
    Ok((u.distance(&vn), 2.0 * u.distance(v)))
}

/// Dense real tensor in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) || len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "dims {dims:?} need {len} entries, got {}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Tensor { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Reads nested JSON arrays of numbers; the shape is inferred and must
    /// be rectangular.
    pub fn from_json(v: &Value) -> Result<Self> {
        let mut dims = Vec::new();
        let mut cur = v;
        while let Value::Array(items) = cur {
            if items.is_empty() {
                return Err(Error::parse("target", "empty array"));
            }
            dims.push(items.len());
            cur = &items[0];
        }
        if dims.is_empty() {
            return Err(Error::parse("target", "expected nested arrays"));
        }
        let mut data = Vec::new();
        flatten(v, &dims, 0, &mut data)?;
        Tensor::new(dims, data)
    }

    pub fn to_json(&self) -> Value {
        fn build(dims: &[usize], data: &[f64]) -> Value {
            if dims.len() == 1 {
                return Value::Array(data.iter().map(|v| Value::from(*v)).collect());
            }
            let stride = data.len() / dims[0];
            Value::Array(data.chunks(stride).map(|c| build(&dims[1..], c)).collect())
        }
        build(&self.dims, &self.data)
    }
}

fn flatten(v: &Value, dims: &[usize], depth: usize, out: &mut Vec<f64>) -> Result<()> {
    match v {
        Value::Array(items) if depth < dims.len() => {
            if items.len() != dims[depth] {
                return Err(Error::ShapeMismatch(format!(
                    "ragged target: expected {} entries at depth {depth}, found {}",
                    dims[depth],
                    items.len()
                )));
            }
            items.iter().try_for_each(|it| flatten(it, dims, depth + 1, out))
        }
        Value::Number(n) if depth == dims.len() => {
            out.push(n.as_f64().ok_or_else(|| Error::parse("target", format!("{n} is not a float")))?);
            Ok(())
        }
        other => Err(Error::parse("target", format!("unexpected value {other} at depth {depth}"))),
    }
}

/// Rank-`r` CP parameterization `τ(x) = sum_r a_r^(1) ⊗ ... ⊗ a_r^(d)`.
///
/// Parameters are laid out term by term, and within a term mode by mode:
/// `x = (a_1^(1), .., a_1^(d), a_2^(1), ..)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CPModel {
    dims: Vec<usize>,
    rank: usize,
}

impl CPModel {
    pub fn new(dims: Vec<usize>, rank: usize) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::config("dims", "a CP model needs order at least 2"));
        }
        if dims.contains(&0) {
            return Err(Error::config("dims", "every mode needs a positive size"));
        }
        if rank == 0 {
            return Err(Error::config("rank", "must be positive"));
        }
        Ok(CPModel { dims, rank })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `rank * sum(dims)`, the number of parameters.
    pub fn n_params(&self) -> usize {
        self.rank * self.dims.iter().sum::<usize>()
    }

    /// Flat index of entry `i` of factor `(term, mode)`.
    pub fn param_index(&self, term: usize, mode: usize, i: usize) -> usize {
        term * self.dims.iter().sum::<usize>() + self.dims[..mode].iter().sum::<usize>() + i
    }

    /// Multi-indices of all tensor entries in row-major order.
    fn entries(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for &d in &self.dims {
            out = out
                .into_iter()
                .flat_map(|idx| {
                    (0..d).map(move |i| {
                        let mut v = idx.clone();
                        v.push(i);
                        v
                    })
                })
                .collect();
        }
        out
    }

    /// Numeric `τ(x)`.
    pub fn tau(&self, x: &[f64]) -> Result<Tensor> {
        if x.len() != self.n_params() {
            return Err(Error::Dimension {
                expected: self.n_params(),
                found: x.len(),
            });
        }
        let data = self
            .entries()
            .iter()
            .map(|idx| {
                (0..self.rank)
                    .map(|r| {
                        idx.iter()
                            .enumerate()
                            .map(|(m, &i)| x[self.param_index(r, m, i)])
                            .product::<f64>()
                    })
                    .sum()
            })
            .collect();
        Tensor::new(self.dims.clone(), data)
    }

    /// Entries of `τ` as polynomials in the parameters.
    fn tau_polys(&self) -> Vec<Polynomial> {
        let n = self.n_params();
        self.entries()
            .iter()
            .map(|idx| {
                let mut entry = Polynomial::zero(n);
                for r in 0..self.rank {
                    let mut exps = vec![0u32; n];
                    for (m, &i) in idx.iter().enumerate() {
                        exps[self.param_index(r, m, i)] += 1;
                    }
                    entry = &entry + &Polynomial::from_int_terms(n, &[(1, &exps)]).expect("valid monomial");
                }
                entry
            })
            .collect()
    }
}

/// `f̂` stored as `(|T|² S² - P² S) / S²` with `S = |τ|²` and `P = <τ, T>`.
#[derive(Clone, Debug)]
pub struct HomogenizedObjective {
    pub model: CPModel,
    pub target: Tensor,
    pub f_hat: RationalFunction,
    pub target_norm_sq: f64,
    /// `|τ|²` as a polynomial.
    pub tau_norm_sq: Polynomial,
    /// `<τ, T>` as a polynomial.
    pub inner: Polynomial,
}

impl HomogenizedObjective {
    /// `|T|² - <τ, T>² / |τ|²` computed from `τ(x)` directly.
    pub fn eval_direct(&self, x: &[f64]) -> Result<f64> {
        let tau = self.model.tau(x)?;
        let s: f64 = tau.data().iter().map(|v| v * v).sum();
        if s == 0.0 {
            return Err(Error::DomainViolation {
                point: Point::new(x.to_vec())?,
                denom_abs: 0.0,
            });
        }
        let p: f64 = tau.data().iter().zip(self.target.data()).map(|(a, b)| a * b).sum();
        Ok(self.target_norm_sq - p * p / s)
    }
}

pub fn build_cp_objective(model: &CPModel, target: &Tensor) -> Result<HomogenizedObjective> {
    build_cp_objective_with_budget(model, target, SYMBOLIC_BUDGET)
}

pub fn build_cp_objective_with_budget(model: &CPModel, target: &Tensor, budget: usize) -> Result<HomogenizedObjective> {
    if target.dims() != model.dims() {
        return Err(Error::ShapeMismatch(format!(
            "target has dims {:?}, model expects {:?}",
            target.dims(),
            model.dims()
        )));
    }
    let size = model.n_params();
    if size > budget {
        return Err(Error::SymbolicBudget { size, budget });
    }
    let n = size;
    let tau = model.tau_polys();
    let mut s = Polynomial::zero(n);
    let mut p = Polynomial::zero(n);
    let mut t_sq = BigRational::zero();
    for (entry, &t) in tau.iter().zip(target.data()) {
        let t = f64_to_rat(t)?;
        s = &s + &(entry * entry);
        p = &p + &entry.scale(&t);
        t_sq += &t * &t;
    }
    let s2 = &s * &s;
    let numer = &s2.scale(&t_sq) - &(&(&p * &p) * &s);
    let f_hat = RationalFunction::new(numer, s2)?;
    Ok(HomogenizedObjective {
        model: model.clone(),
        target: target.clone(),
        f_hat,
        target_norm_sq: rat_to_f64(&t_sq),
        tau_norm_sq: s,
        inner: p,
    })
}

/// `<grad f(x), x>`, which vanishes for a degree-0 homogeneous `f`.
pub fn euler_check(f: &RationalFunction, x: &Point) -> Result<f64> {
    let (_, g) = f.eval_and_grad(x)?;
    Ok(g.dot(x))
}

/// Euler residual and whether it is within `1e-8 (1 + |grad f| |x|)`.
pub fn euler_within_tolerance(f: &RationalFunction, x: &Point) -> Result<(f64, bool)> {
    let (_, g) = f.eval_and_grad(x)?;
    let r = g.dot(x);
    Ok((r, r.abs() <= EULER_TOL * (1.0 + g.norm() * x.norm())))
}

/// Descent constants of the normalized sequence `u_k = x_k / |x_k|`, with
/// f and its gradient recomputed at each `u_k`.
///
/// Every iterate must pass the Euler test first. For a degree-0 homogeneous
/// objective the normalized `sigma_hat` is at least half the original one.
pub fn normalized_a1_check(f: &RationalFunction, trace: &DescentTrace, tail_start: usize) -> Result<ConditionReport> {
    trace.validate()?;
    let mut units = Vec::with_capacity(trace.len());
    for x in &trace.iterates {
        let u = normalize(x)?;
        let (residual, ok) = euler_within_tolerance(f, x)?;
        if !ok {
            return Err(Error::NotHomogeneous {
                point: x.clone(),
                residual,
            });
        }
        units.push(u);
    }
    let normalized = DescentTrace::from_iterates(f, units)?;
    check_conditions(&normalized, tail_start)
}
