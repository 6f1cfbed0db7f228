//! Steepest descent with Armijo backtracking, and post-hoc certification of
//! the descent conditions on the produced trace:
//!
//! * sufficient decrease: `f_k - f_{k+1} >= sigma |grad f(x_k)| |x_{k+1} - x_k|`
//! * no zero-progress moves: `f_k = f_{k+1}` implies `x_k = x_{k+1}`
//! * step lengths bounded below: `|x_{k+1} - x_k| >= kappa |grad f(x_k)|`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::rational::RationalFunction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentConfig {
    /// Armijo sufficient-decrease constant, in (0, 1).
    pub sigma_armijo: f64,
    /// Step contraction per backtrack, in (0, 1).
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Two consecutive f-values this close count as equal; the run stops
    /// instead of recording a zero-progress step.
    pub f_equal_tol: f64,
    pub max_backtracks: usize,
    /// First trial step of each line search after the first iteration.
    pub trial_step: TrialStep,
}

/// How the line search picks its first trial step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStep {
    /// Always start from `initial_step`.
    Fixed,
    /// Start from `s.y / y.y` for the previous step `s` and gradient change
    /// `y`, falling back to `initial_step` when `s.y <= 0`.
    BarzilaiBorwein,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            sigma_armijo: 0.1,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            max_iters: 100_000,
            grad_tol: 1e-12,
            f_equal_tol: 0.0,
            max_backtracks: 60,
            trial_step: TrialStep::BarzilaiBorwein,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.sigma_armijo) {
            return Err(Error::config("sigma_armijo", "must lie in (0, 1)"));
        }
        if !open_unit(self.backtrack_factor) {
            return Err(Error::config("backtrack_factor", "must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::config("initial_step", "must be positive and finite"));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::config("grad_tol", "must be non-negative"));
        }
        if !(self.f_equal_tol >= 0.0) {
            return Err(Error::config("f_equal_tol", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    FStationary,
    MaxIters,
    DomainViolation,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::GradTol => "grad_tol",
            StopReason::FStationary => "f_stationary",
            StopReason::MaxIters => "max_iters",
            StopReason::DomainViolation => "domain_violation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "grad_tol" => StopReason::GradTol,
            "f_stationary" => StopReason::FStationary,
            "max_iters" => StopReason::MaxIters,
            "domain_violation" => StopReason::DomainViolation,
            _ => return None,
        })
    }
}

/// Iterates of a run with per-iterate values and per-step data.
///
/// `step_norms[k]` and `alphas[k]` describe the move from `iterates[k]` to
/// `iterates[k + 1]`, so both are one shorter than `iterates`.
#[derive(Clone, Debug, PartialEq)]
pub struct DescentTrace {
    pub iterates: Vec<Point>,
    pub f_values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub alphas: Vec<f64>,
    /// `None` for traces that were not produced by [`optimize`] (synthetic or re-read).
    pub stop_reason: Option<StopReason>,
    pub diagnostic: Option<String>,
}

impl DescentTrace {
    /// Builds a trace from iterates by evaluating `f` at each of them. Step
    /// norms are recomputed; `alphas` are left as NaN.
    pub fn from_iterates(f: &RationalFunction, iterates: Vec<Point>) -> Result<Self> {
        let mut f_values = Vec::with_capacity(iterates.len());
        let mut grad_norms = Vec::with_capacity(iterates.len());
        for x in &iterates {
            let (v, g) = f.eval_and_grad(x)?;
            f_values.push(v);
            grad_norms.push(g.norm());
        }
        let step_norms = step_norms_of(&iterates);
        let alphas = vec![f64::NAN; step_norms.len()];
        let trace = DescentTrace {
            iterates,
            f_values,
            grad_norms,
            step_norms,
            alphas,
            stop_reason: None,
            diagnostic: None,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn last(&self) -> Option<&Point> {
        self.iterates.last()
    }

    pub fn final_value(&self) -> Option<f64> {
        self.f_values.last().copied()
    }

    pub fn dim(&self) -> usize {
        self.iterates.first().map_or(0, Point::dim)
    }

    /// Checks the length and dimension invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.iterates.len();
        if n == 0 {
            return Err(Error::InvalidTrace("trace has no iterates".into()));
        }
        if self.f_values.len() != n || self.grad_norms.len() != n {
            return Err(Error::InvalidTrace(format!(
                "{n} iterates but {} f-values and {} gradient norms",
                self.f_values.len(),
                self.grad_norms.len()
            )));
        }
        if self.step_norms.len() != n - 1 || self.alphas.len() != n - 1 {
            return Err(Error::InvalidTrace(format!(
                "{n} iterates need {} step entries, found {} step norms and {} alphas",
                n - 1,
                self.step_norms.len(),
                self.alphas.len()
            )));
        }
        let dim = self.iterates[0].dim();
        if let Some(k) = self.iterates.iter().position(|x| x.dim() != dim) {
            return Err(Error::InvalidTrace(format!(
                "iterate {k} has dimension {} instead of {dim}",
                self.iterates[k].dim()
            )));
        }
        Ok(())
    }
}

pub(crate) fn step_norms_of(iterates: &[Point]) -> Vec<f64> {
    iterates.windows(2).map(|w| w[1].sub(&w[0]).norm()).collect()
}

enum TrialFailure {
    Armijo,
    Domain,
}

struct Step {
    point: Point,
    f: f64,
    norm: f64,
    alpha: f64,
}

/// Both sufficient-decrease tests: the textbook one in terms of `alpha`, and
/// the same inequality for the step actually realized in floating point.
fn armijo_ok(fx: f64, ft: f64, sigma: f64, alpha: f64, gn: f64, step: f64) -> bool {
    ft <= fx - sigma * alpha * gn * gn && fx - ft >= sigma * gn * step
}

/// Backtracking Armijo search along `-g` from the trial step `alpha`.
fn line_search(
    f: &RationalFunction,
    x: &Point,
    fx: f64,
    g: &Point,
    mut alpha: f64,
    cfg: &DescentConfig,
) -> Result<std::result::Result<Step, TrialFailure>> {
    let gn = g.norm();
    let mut failure = TrialFailure::Armijo;
    for _ in 0..=cfg.max_backtracks {
        let trial = x.axpy(-alpha, g);
        match f.eval(&trial) {
            Ok(ft) if ft.is_finite() => {
                let norm = trial.sub(x).norm();
                if norm == 0.0 {
                    // The step vanished in floating point; smaller ones will too.
                    break;
                }
                if armijo_ok(fx, ft, cfg.sigma_armijo, alpha, gn, norm) {
                    return Ok(Ok(Step {
                        point: trial,
                        f: ft,
                        norm,
                        alpha,
                    }));
                }
                failure = TrialFailure::Armijo;
            }
            Ok(_) | Err(Error::DomainViolation { .. }) => failure = TrialFailure::Domain,
            Err(e) => return Err(e),
        }
        alpha *= cfg.backtrack_factor;
    }
    Ok(Err(failure))
}

fn barzilai_borwein(s: &Point, y: &Point) -> Option<f64> {
    let sy = s.dot(y);
    let yy = y.dot(y);
    let a = sy / yy;
    (sy > 0.0 && a.is_finite() && a > 0.0).then_some(a)
}

/// Steepest descent from `x0` with Armijo backtracking.
///
/// A trial step `x - alpha g` is accepted when
/// `f(x - alpha g) <= f(x) - sigma alpha |g|^2` and, for the step actually
/// realized in floating point, `f(x) - f(x_new) >= sigma |g| |x_new - x|`.
/// The second test is the first one up to rounding; requiring both makes
/// the sufficient-decrease constant re-verifiable from the recorded trace.
/// Trial points outside the domain are rejected like failed Armijo tests.
/// The search direction is always `-grad f`; [`TrialStep`] only chooses
/// where backtracking starts.
pub fn optimize(f: &RationalFunction, x0: &Point, cfg: &DescentConfig) -> Result<DescentTrace> {
    cfg.validate()?;
    let (mut fx, mut g) = f.eval_and_grad(x0)?;
    let mut x = x0.clone();
    let mut trace = DescentTrace {
        iterates: vec![x.clone()],
        f_values: vec![fx],
        grad_norms: vec![g.norm()],
        step_norms: Vec::new(),
        alphas: Vec::new(),
        stop_reason: None,
        diagnostic: None,
    };
    let mut stop = StopReason::MaxIters;
    let mut alpha0 = cfg.initial_step;
    for _ in 0..cfg.max_iters {
        if g.norm() <= cfg.grad_tol {
            stop = StopReason::GradTol;
            break;
        }
        let step = match line_search(f, &x, fx, &g, alpha0, cfg)? {
            Ok(step) => step,
            Err(failure) => {
                stop = match failure {
                    TrialFailure::Domain => StopReason::DomainViolation,
                    TrialFailure::Armijo => StopReason::FStationary,
                };
                trace.diagnostic = Some(format!(
                    "line search failed after {} halvings at iterate {}",
                    cfg.max_backtracks,
                    trace.len() - 1
                ));
                break;
            }
        };
        if (fx - step.f).abs() <= cfg.f_equal_tol {
            stop = StopReason::FStationary;
            trace.diagnostic = Some(format!(
                "accepted step from iterate {} does not change f; stopping",
                trace.len() - 1
            ));
            break;
        }
        match f.eval_and_grad(&step.point) {
            Ok((v, gv)) => {
                alpha0 = match cfg.trial_step {
                    TrialStep::Fixed => cfg.initial_step,
                    TrialStep::BarzilaiBorwein => {
                        barzilai_borwein(&step.point.sub(&x), &gv.sub(&g)).unwrap_or(cfg.initial_step)
                    }
                };
                fx = v;
                g = gv;
            }
            Err(Error::DomainViolation { .. }) => {
                stop = StopReason::DomainViolation;
                trace.diagnostic = Some(format!("gradient undefined at {}", step.point));
                break;
            }
            Err(e) => return Err(e),
        }
        x = step.point;
        trace.iterates.push(x.clone());
        trace.f_values.push(fx);
        trace.grad_norms.push(g.norm());
        trace.step_norms.push(step.norm);
        trace.alphas.push(step.alpha);
    }
    trace.stop_reason = Some(stop);
    Ok(trace)
}

/// Empirical descent-condition constants over the steps `k >= tail_start`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `min (f_k - f_{k+1}) / (|grad f(x_k)| |x_{k+1} - x_k|)`; `None` without usable steps.
    pub sigma_hat: Option<f64>,
    /// `min |x_{k+1} - x_k| / |grad f(x_k)|`.
    pub kappa_hat: Option<f64>,
    /// Steps with equal f-values but distinct iterates.
    pub a2_violations: usize,
    /// Steps excluded from the minima because the step or the gradient is zero.
    pub degenerate_steps: usize,
    pub steps_checked: usize,
    pub tail_start: usize,
}

impl ConditionReport {
    /// Positive constants and no zero-progress moves.
    pub fn certifies(&self) -> bool {
        matches!(self.sigma_hat, Some(s) if s > 0.0)
            && matches!(self.kappa_hat, Some(k) if k > 0.0)
            && self.a2_violations == 0
    }
}

/// Recomputes the descent constants from the recorded trace.
pub fn check_conditions(trace: &DescentTrace, tail_start: usize) -> Result<ConditionReport> {
    trace.validate()?;
    let n_steps = trace.n_steps();
    if n_steps == 0 {
        return Ok(ConditionReport {
            sigma_hat: None,
            kappa_hat: None,
            a2_violations: 0,
            degenerate_steps: 0,
            steps_checked: 0,
            tail_start,
        });
    }
    if tail_start >= n_steps {
        return Err(Error::config(
            "tail_start",
            format!("{tail_start} leaves no steps in a trace of {} iterates", trace.len()),
        ));
    }
    let mut sigma_hat: Option<f64> = None;
    let mut kappa_hat: Option<f64> = None;
    let mut a2_violations = 0;
    let mut degenerate = 0;
    for k in tail_start..n_steps {
        let step = trace.iterates[k + 1].sub(&trace.iterates[k]).norm();
        let gn = trace.grad_norms[k];
        let df = trace.f_values[k] - trace.f_values[k + 1];
        if df == 0.0 && step > 0.0 {
            a2_violations += 1;
        }
        if step == 0.0 || gn == 0.0 {
            degenerate += 1;
            continue;
        }
        let s = df / (gn * step);
        let kap = step / gn;
        sigma_hat = Some(sigma_hat.map_or(s, |m| m.min(s)));
        kappa_hat = Some(kappa_hat.map_or(kap, |m| m.min(kap)));
    }
    Ok(ConditionReport {
        sigma_hat,
        kappa_hat,
        a2_violations,
        degenerate_steps: degenerate,
        steps_checked: n_steps - tail_start,
        tail_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn x_squared() -> RationalFunction {
        let x = Polynomial::var(1, 0).unwrap();
        RationalFunction::from_polynomial(&x * &x)
    }

    #[test]
    fn config_validation() {
        assert!(DescentConfig::default().validate().is_ok());
        let bad = DescentConfig {
            sigma_armijo: 1.0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig { field, .. }) if field == "sigma_armijo"));
        let bad = DescentConfig {
            backtrack_factor: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DescentConfig {
            initial_step: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn stationary_start_stops_immediately() {
        // ((x-1)^2 + (y-1)^2) / (1 + x^2 + y^2) has zero gradient at (1, 1).
        let x = Polynomial::var(2, 0).unwrap();
        let y = Polynomial::var(2, 1).unwrap();
        let one = Polynomial::from_int(2, 1);
        let num = &(&x - &one).pow(2) + &(&y - &one).pow(2);
        let den = &(&one + &(&x * &x)) + &(&y * &y);
        let f = RationalFunction::new(num, den).unwrap();
        let tr = optimize(&f, &pt(&[1.0, 1.0]), &DescentConfig::default()).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.stop_reason, Some(StopReason::GradTol));
    }

    #[test]
    fn start_outside_domain_is_an_error() {
        let x = Polynomial::var(1, 0).unwrap();
        let f = RationalFunction::new(Polynomial::from_int(1, 1), x).unwrap();
        assert!(matches!(
            optimize(&f, &pt(&[0.0]), &DescentConfig::default()),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn quadratic_converges_and_certifies() {
        let tr = optimize(&x_squared(), &pt(&[3.0]), &DescentConfig::default()).unwrap();
        assert!(tr.last().unwrap()[0].abs() < 1e-6);
        let rep = check_conditions(&tr, 0).unwrap();
        assert!(rep.sigma_hat.unwrap() >= 0.1);
        assert!(rep.certifies());
        for w in tr.f_values.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn synthetic_halving_trace_constants() {
        // x_k = 2^-k on f = x^2: f_k - f_{k+1} = 3 * 4^{-k-1}, |grad| = 2^{1-k},
        // step = 2^{-k-1}, so every ratio is 3/4 and 1/4 exactly.
        let iterates = (0..20).map(|k| pt(&[2f64.powi(-k)])).collect();
        let tr = DescentTrace::from_iterates(&x_squared(), iterates).unwrap();
        let rep = check_conditions(&tr, 0).unwrap();
        assert_eq!(rep.sigma_hat, Some(0.75));
        assert_eq!(rep.kappa_hat, Some(0.25));
        assert_eq!(rep.a2_violations, 0);
        assert_eq!(rep.steps_checked, 19);
    }

    #[test]
    fn single_point_report_is_empty() {
        let tr = DescentTrace::from_iterates(&x_squared(), vec![pt(&[1.0])]).unwrap();
        let rep = check_conditions(&tr, 0).unwrap();
        assert_eq!(rep.sigma_hat, None);
        assert_eq!(rep.kappa_hat, None);
        assert_eq!(rep.steps_checked, 0);
        assert!(!rep.certifies());
    }

    #[test]
    fn a2_violation_and_degenerate_steps_are_counted() {
        // x and -x have equal f-values under x^2.
        let tr = DescentTrace::from_iterates(
            &x_squared(),
            vec![pt(&[2.0]), pt(&[1.0]), pt(&[-1.0]), pt(&[-1.0])],
        )
        .unwrap();
        let rep = check_conditions(&tr, 0).unwrap();
        assert_eq!(rep.a2_violations, 1);
        assert_eq!(rep.degenerate_steps, 1);
        assert!(!rep.certifies());
        assert!(check_conditions(&tr, 3).is_err());
    }

    #[test]
    fn trace_validation() {
        let mut tr = DescentTrace::from_iterates(&x_squared(), vec![pt(&[1.0]), pt(&[0.5])]).unwrap();
        tr.step_norms.clear();
        assert!(matches!(tr.validate(), Err(Error::InvalidTrace(_))));
    }

    #[test]
    fn stop_reason_names_round_trip() {
        for s in [
            StopReason::GradTol,
            StopReason::FStationary,
            StopReason::MaxIters,
            StopReason::DomainViolation,
        ] {
            assert_eq!(StopReason::parse(s.as_str()), Some(s));
        }
        assert_eq!(StopReason::parse("bogus"), None);
    }

    fn fig1() -> RationalFunction {
        let x = Polynomial::var(2, 0).unwrap();
        let y = Polynomial::var(2, 1).unwrap();
        let r2 = &(&x * &x) + &(&y * &y);
        let den = &r2 * &(&Polynomial::from_int(2, 1) + &r2);
        RationalFunction::new(&x * &y, den).unwrap()
    }

    fn bump() -> RationalFunction {
        let x = Polynomial::var(2, 0).unwrap();
        let y = Polynomial::var(2, 1).unwrap();
        let den = &(&Polynomial::from_int(2, 1) + &(&x * &x)) + &(&y * &y);
        RationalFunction::new(Polynomial::from_int(2, 1), den).unwrap()
    }

    #[test]
    fn every_step_passes_the_logged_armijo_test() {
        let f = fig1();
        let cfg = DescentConfig::default();
        let tr = optimize(&f, &pt(&[2.0, -0.1]), &cfg).unwrap();
        assert!(tr.n_steps() > 10);
        for k in 0..tr.n_steps() {
            let (fk, g) = f.eval_and_grad(&tr.iterates[k]).unwrap();
            assert_eq!(fk, tr.f_values[k]);
            let trial = tr.iterates[k].axpy(-tr.alphas[k], &g);
            assert_eq!(trial, tr.iterates[k + 1]);
            let gn = g.norm();
            assert!(tr.f_values[k + 1] <= fk - cfg.sigma_armijo * tr.alphas[k] * gn * gn);
            assert!(tr.f_values[k + 1] < fk);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = DescentConfig::default();
        let a = optimize(&fig1(), &pt(&[2.0, -0.1]), &cfg).unwrap();
        let b = optimize(&fig1(), &pt(&[2.0, -0.1]), &cfg).unwrap();
        let bits = |t: &DescentTrace| -> Vec<u64> {
            t.iterates.iter().flat_map(|p| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.stop_reason, b.stop_reason);
    }

    #[test]
    fn unbounded_below_sublevel_runs_off_to_infinity() {
        // 1/(1 + |x|^2) has no minimizer: iterates grow while f decreases to 0.
        let cfg = DescentConfig {
            trial_step: TrialStep::Fixed,
            max_iters: 2_000,
            ..Default::default()
        };
        let tr = optimize(&bump(), &pt(&[1.0, 1.0]), &cfg).unwrap();
        assert_eq!(tr.stop_reason, Some(StopReason::MaxIters));
        assert_eq!(tr.len(), 2_001);
        let norms: Vec<f64> = tr.iterates.iter().map(Point::norm).collect();
        assert!(norms.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.final_value().unwrap() < 0.02);

        let tr = optimize(&bump(), &pt(&[1.0, 1.0]), &DescentConfig::default()).unwrap();
        assert!(tr.last().unwrap().norm() > 1e3);
        assert!(tr.final_value().unwrap() < 1e-6);
    }

    #[test]
    fn fixed_trial_step_also_certifies() {
        let cfg = DescentConfig {
            trial_step: TrialStep::Fixed,
            ..Default::default()
        };
        let tr = optimize(&x_squared(), &pt(&[3.0]), &cfg).unwrap();
        assert!(tr.last().unwrap()[0].abs() < 1e-6);
        assert!(check_conditions(&tr, 0).unwrap().sigma_hat.unwrap() >= 0.1);
    }
}
