//! Post-hoc convergence diagnostics on descent traces: cluster points,
//! approach directions relative to the safe set, sequence-level Łojasiewicz
//! certificates and convergence-rate classification.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::descent::DescentTrace;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::singan::{LinePencil, SAFE_MARGIN};

/// Fraction of the trace used as the trailing cluster window.
pub const CLUSTER_WINDOW: f64 = 0.1;
/// Window points must lie this close to their mean.
pub const CLUSTER_TOL: f64 = 1e-8;
/// A fast final approach must start this close (relative) to its limit.
pub const APPROACH_TOL: f64 = 1e-3;
/// Largest denominator tried when snapping to a lattice point.
pub const SNAP_MAX_DENOM: i64 = 16;
/// Points used by the geometric extrapolation of the f-limit.
pub const LIMIT_FIT_POINTS: usize = 20;
/// Minimal R² for accepting the geometric extrapolation.
pub const LIMIT_FIT_MIN_R2: f64 = 0.99;
/// Below this R² for both fits the rate is inconclusive.
pub const RATE_MIN_R2: f64 = 0.95;

/// `{0.05, 0.10, ..., 0.50}`.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 20.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterPoint {
    pub point: Point,
    /// Exact coordinates when the point was snapped to a lattice point.
    #[serde(skip)]
    pub exact: Option<Vec<BigRational>>,
    /// Number of trailing iterates inspected.
    pub window: usize,
    /// Largest distance from a window iterate to `point`.
    pub spread: f64,
}

impl ClusterPoint {
    /// Exact coordinates as `n/d` strings, if snapped.
    pub fn exact_strings(&self) -> Option<Vec<String>> {
        self.exact
            .as_ref()
            .map(|v| v.iter().map(crate::poly::format_rational).collect())
    }
}

/// Nearest `p/q` with `q <= max_denom`, if within `tol` of `x`.
pub fn snap_rational(x: f64, max_denom: i64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() || x.abs() > 1e15 {
        return None;
    }
    let mut best: Option<(f64, i64, i64)> = None;
    for q in 1..=max_denom {
        let p = (x * q as f64).round();
        let err = (x - p / q as f64).abs();
        if err <= tol && best.is_none_or(|(e, _, _)| err < e) {
            best = Some((err, p as i64, q));
        }
    }
    best.map(|(_, p, q)| BigRational::new(BigInt::from(p), BigInt::from(q)))
}

fn snap_point(x: &Point) -> Option<Vec<BigRational>> {
    x.iter()
        .map(|&v| snap_rational(v, SNAP_MAX_DENOM, CLUSTER_TOL))
        .collect()
}

fn exact_to_point(v: &[BigRational]) -> Point {
    Point::new(v.iter().map(crate::poly::rat_to_f64).collect()).expect("snapped coordinates are finite")
}

/// Detects the limit of the trailing window of a trace.
///
/// The window is the last 10% of iterates (at least one). The mean is
/// returned when every window iterate lies within `1e-8` of it. A trace
/// that reaches its limit in a few fast steps has a wide window; it is
/// still accepted when the final iterate snaps to a lattice point and the
/// window approaches that point monotonically from within
/// `1e-3 (1 + |point|)`. Returned points are snapped
/// to exact rationals (denominator at most 16) when within `1e-8`.
pub fn find_cluster_point(trace: &DescentTrace) -> Option<ClusterPoint> {
    let n = trace.len();
    if n == 0 {
        return None;
    }
    let window = ((n as f64 * CLUSTER_WINDOW).ceil() as usize).clamp(1, n);
    let tail = &trace.iterates[n - window..];
    let dim = tail[0].dim();
    let mut mean = vec![0.0; dim];
    for x in tail {
        for (m, v) in mean.iter_mut().zip(x.iter()) {
            *m += v / window as f64;
        }
    }
    let mean = Point::new(mean).ok()?;
    let spread = tail.iter().map(|x| x.distance(&mean)).fold(0.0, f64::max);
    if spread <= CLUSTER_TOL {
        let exact = snap_point(&mean);
        let point = exact.as_deref().map_or(mean, exact_to_point);
        return Some(ClusterPoint {
            point,
            exact,
            window,
            spread,
        });
    }
    let exact = snap_point(trace.last()?)?;
    let target = exact_to_point(&exact);
    let dists: Vec<f64> = tail.iter().map(|x| x.distance(&target)).collect();
    let widest = dists.iter().copied().fold(0.0, f64::max);
    if widest <= APPROACH_TOL * (1.0 + target.norm()) && dists.windows(2).all(|w| w[1] <= w[0]) {
        return Some(ClusterPoint {
            point: target,
            exact: Some(exact),
            window,
            spread: widest,
        });
    }
    None
}

/// Unit approach directions of a trace towards a pencil's base point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionTrail {
    pub center: Point,
    /// Trace index of each entry.
    pub indices: Vec<usize>,
    pub unit_directions: Vec<Point>,
    /// `f_{n_min}(u)` for each unit direction `u`.
    pub pencil_values: Vec<f64>,
    /// Directional limit `c_0(u)` where the pencil does not vanish.
    pub limit_values: Vec<Option<f64>>,
    /// Iterates equal to the center, skipped.
    pub skipped: usize,
    pub tail_start: usize,
    /// Smallest `|f_{n_min}(u)|` over entries with index `>= tail_start`.
    pub min_tail_pencil: Option<f64>,
}

impl DirectionTrail {
    /// Tail directions stay a fixed margin inside the safe set.
    pub fn a4_certified(&self, margin: f64) -> bool {
        matches!(self.min_tail_pencil, Some(m) if m > margin)
    }

    /// `a4_certified` with the default safe-set margin.
    pub fn a4_certified_default(&self) -> bool {
        self.a4_certified(SAFE_MARGIN)
    }

    /// Largest minus smallest directional limit over the tail; a large
    /// spread means f has no single limit along the trace.
    pub fn tail_limit_spread(&self) -> Option<f64> {
        let vals: Vec<f64> = self
            .indices
            .iter()
            .zip(&self.limit_values)
            .filter(|(k, _)| **k >= self.tail_start)
            .filter_map(|(_, v)| *v)
            .collect();
        if vals.is_empty() {
            return None;
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(hi - lo)
    }
}

pub fn direction_trail(trace: &DescentTrace, pencil: &LinePencil, tail_start: usize) -> Result<DirectionTrail> {
    trace.validate()?;
    let center = pencil.base_point().clone();
    if trace.dim() != center.dim() {
        return Err(Error::Dimension {
            expected: center.dim(),
            found: trace.dim(),
        });
    }
    let lead = pencil.pencil_polynomial();
    let numer = pencil.numer_leading();
    let mut trail = DirectionTrail {
        center: center.clone(),
        indices: Vec::new(),
        unit_directions: Vec::new(),
        pencil_values: Vec::new(),
        limit_values: Vec::new(),
        skipped: 0,
        tail_start,
        min_tail_pencil: None,
    };
    for (k, x) in trace.iterates.iter().enumerate() {
        let diff = x.sub(&center);
        let r = diff.norm();
        if r == 0.0 {
            trail.skipped += 1;
            continue;
        }
        let u = diff.scaled(1.0 / r);
        let pv = lead.eval(&u)?;
        let limit = if pv.abs() > SAFE_MARGIN {
            Some(numer.eval(&u)? / pv)
        } else {
            None
        };
        if k >= tail_start {
            let a = pv.abs();
            trail.min_tail_pencil = Some(trail.min_tail_pencil.map_or(a, |m: f64| m.min(a)));
        }
        trail.indices.push(k);
        trail.unit_directions.push(u);
        trail.pencil_values.push(pv);
        trail.limit_values.push(limit);
    }
    Ok(trail)
}

/// How the limit `L` of the f-values was obtained.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum LimitEstimate {
    /// `f_k - L` fitted as `C rho^k` over the trailing points.
    Extrapolated { value: f64, rho: f64, r2: f64 },
    LastValue { value: f64 },
}

impl LimitEstimate {
    pub fn value(&self) -> f64 {
        match self {
            LimitEstimate::Extrapolated { value, .. } | LimitEstimate::LastValue { value } => *value,
        }
    }
}

/// Estimates `lim f_k` from a non-increasing sequence of f-values.
///
/// The successive decreases `f_k - f_{k+1}` of the last 20 points are
/// fitted as a geometric sequence; with `R² >= 0.99` and ratio below one the
/// geometric tail sum is subtracted from the last value.
pub fn estimate_limit(f_values: &[f64]) -> LimitEstimate {
    let last = match f_values.last() {
        Some(v) => *v,
        None => return LimitEstimate::LastValue { value: f64::NAN },
    };
    let start = f_values.len().saturating_sub(LIMIT_FIT_POINTS);
    let tail = &f_values[start..];
    let diffs: Vec<f64> = tail.windows(2).map(|w| w[0] - w[1]).collect();
    if diffs.len() < 3 || diffs.iter().any(|d| !(*d > 0.0)) {
        return LimitEstimate::LastValue { value: last };
    }
    let xs: Vec<f64> = (0..diffs.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = diffs.iter().map(|d| d.ln()).collect();
    let Some(fit) = linear_fit(&xs, &ys) else {
        return LimitEstimate::LastValue { value: last };
    };
    let rho = fit.slope.exp();
    if fit.r2 < LIMIT_FIT_MIN_R2 || !(rho < 1.0) {
        return LimitEstimate::LastValue { value: last };
    }
    let last_diff = (fit.intercept + fit.slope * (diffs.len() - 1) as f64).exp();
    let value = last - last_diff * rho / (1.0 - rho);
    if !value.is_finite() {
        return LimitEstimate::LastValue { value: last };
    }
    LimitEstimate::Extrapolated { value, rho, r2: fit.r2 }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LojasiewiczCertificate {
    pub theta: f64,
    /// `max |f_k - L|^{1-theta} / |grad f(x_k)|`; `None` when unbounded.
    pub c: Option<f64>,
    #[serde(rename = "L")]
    pub l_value: f64,
    pub tail_start: usize,
    pub feasible: bool,
    /// Index attaining `c`, or the first zero-gradient index with a nonzero residual.
    pub witness: Option<usize>,
}

impl LojasiewiczCertificate {
    /// Pointwise re-check over the tail; returns the number of violations.
    pub fn violations(&self, trace: &DescentTrace) -> usize {
        let Some(c) = self.c else {
            return trace.len().saturating_sub(self.tail_start);
        };
        (self.tail_start..trace.len())
            .filter(|&k| {
                let lhs = (trace.f_values[k] - self.l_value).abs().powf(1.0 - self.theta);
                let g = trace.grad_norms[k];
                if g == 0.0 {
                    lhs > 0.0
                } else {
                    lhs / g > c
                }
            })
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub limit: LimitEstimate,
    /// Certificates for each grid value, sorted by θ.
    pub certificates: Vec<LojasiewiczCertificate>,
    /// The same certificates recomputed with `L` = last f-value.
    pub sensitivity: Vec<LojasiewiczCertificate>,
    /// f-values non-increasing on the tail.
    pub monotone: bool,
}

impl ProbeReport {
    pub fn feasible_thetas(&self) -> Vec<f64> {
        self.certificates.iter().filter(|c| c.feasible).map(|c| c.theta).collect()
    }

    pub fn any_feasible(&self) -> bool {
        self.certificates.iter().any(|c| c.feasible)
    }
}

fn certificate(trace: &DescentTrace, tail_start: usize, theta: f64, l: f64) -> LojasiewiczCertificate {
    let mut c: Option<f64> = Some(0.0);
    let mut witness = None;
    for k in tail_start..trace.len() {
        let resid = (trace.f_values[k] - l).abs();
        let g = trace.grad_norms[k];
        if g == 0.0 {
            if resid > 0.0 {
                c = None;
                witness = Some(k);
                break;
            }
            continue;
        }
        let ratio = resid.powf(1.0 - theta) / g;
        if !ratio.is_finite() {
            c = None;
            witness = Some(k);
            break;
        }
        if ratio > c.unwrap_or(0.0) || witness.is_none() {
            c = Some(ratio.max(c.unwrap_or(0.0)));
            if ratio >= c.unwrap_or(0.0) {
                witness = Some(k);
            }
        }
    }
    LojasiewiczCertificate {
        theta,
        c,
        l_value: l,
        tail_start,
        feasible: c.is_some(),
        witness,
    }
}

fn check_probe_args(trace: &DescentTrace, tail_start: usize, grid: &[f64]) -> Result<()> {
    trace.validate()?;
    if tail_start >= trace.len() {
        return Err(Error::config(
            "tail_start",
            format!("{tail_start} is past the last of {} iterates", trace.len()),
        ));
    }
    if let Some(t) = grid.iter().find(|t| !(**t > 0.0 && **t <= 0.5)) {
        return Err(Error::config("theta_grid", format!("{t} is outside (0, 1/2]")));
    }
    Ok(())
}

/// Sequence-level Łojasiewicz certificates on the tail `k >= tail_start`.
///
/// Requires the tail f-values to be non-increasing; see [`lojasiewicz_scan`]
/// for traces that are not.
pub fn lojasiewicz_probe(trace: &DescentTrace, tail_start: usize, theta_grid: &[f64]) -> Result<ProbeReport> {
    check_probe_args(trace, tail_start, theta_grid)?;
    if let Some(k) = (tail_start..trace.len().saturating_sub(1)).find(|&k| trace.f_values[k + 1] > trace.f_values[k]) {
        return Err(Error::NonMonotoneTail { index: k + 1 });
    }
    Ok(scan(trace, tail_start, theta_grid, true))
}

/// [`lojasiewicz_probe`] without the monotonicity precondition. For a
/// non-monotone tail `L` is the last f-value and `monotone` is false.
pub fn lojasiewicz_scan(trace: &DescentTrace, tail_start: usize, theta_grid: &[f64]) -> Result<ProbeReport> {
    check_probe_args(trace, tail_start, theta_grid)?;
    let monotone = trace.f_values[tail_start..].windows(2).all(|w| w[1] <= w[0]);
    Ok(scan(trace, tail_start, theta_grid, monotone))
}

fn scan(trace: &DescentTrace, tail_start: usize, grid: &[f64], monotone: bool) -> ProbeReport {
    let last = *trace.f_values.last().expect("validated trace is nonempty");
    let limit = if monotone {
        estimate_limit(&trace.f_values[tail_start..])
    } else {
        LimitEstimate::LastValue { value: last }
    };
    let mut thetas = grid.to_vec();
    thetas.sort_by(f64::total_cmp);
    let certificates = thetas
        .iter()
        .map(|&t| certificate(trace, tail_start, t, limit.value()))
        .collect();
    let sensitivity = thetas.iter().map(|&t| certificate(trace, tail_start, t, last)).collect();
    ProbeReport {
        limit,
        certificates,
        sensitivity,
        monotone,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Linear,
    Sublinear,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub regime: Regime,
    /// Contraction factor of `r_k ~ q^k`.
    pub q: Option<f64>,
    /// Power of `r_k ~ k^{-p}`.
    pub p: Option<f64>,
    /// `p / (1 + 2p)`, the exponent whose sublinear rate is `k^{-p}`.
    pub theta_from_p: Option<f64>,
    /// R² of the chosen fit (the better of the two when inconclusive).
    pub fit_quality: f64,
    pub linear_r2: Option<f64>,
    pub sublinear_r2: Option<f64>,
    pub diagnostic: Option<String>,
}

impl RateEstimate {
    fn inconclusive(reason: impl Into<String>) -> Self {
        RateEstimate {
            regime: Regime::Inconclusive,
            q: None,
            p: None,
            theta_from_p: None,
            fit_quality: 0.0,
            linear_r2: None,
            sublinear_r2: None,
            diagnostic: Some(reason.into()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        0.0
    } else {
        let sse: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (1.0 - sse / syy).max(0.0)
    };
    Some(LinearFit { slope, intercept, r2 })
}

/// Classifies distances `radii[i] = r_{first_index + i}`.
///
/// Fits `log r` against `k` (linear regime, `q = e^slope`) and against
/// `log k` (sublinear regime, `p = -slope`) over indices `k >= 1` and keeps
/// the better fit; below `R² = 0.95` for both the result is inconclusive.
pub fn classify_radii(radii: &[f64], first_index: usize) -> RateEstimate {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .enumerate()
        .map(|(i, r)| ((first_index + i) as f64, *r))
        .filter(|(k, _)| *k >= 1.0)
        .collect();
    if pts.len() < 3 {
        return RateEstimate::inconclusive("fewer than three usable distances");
    }
    if let Some((k, _)) = pts.iter().find(|(_, r)| !(*r > 0.0 && r.is_finite())) {
        return RateEstimate::inconclusive(format!("distance at k = {k} is not positive"));
    }
    if pts.last().unwrap().1 >= pts[0].1 {
        return RateEstimate::inconclusive("distances do not decrease over the tail");
    }
    let ks: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let logk: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let logr: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let lin = linear_fit(&ks, &logr);
    let sub = linear_fit(&logk, &logr);
    let lin_r2 = lin.map(|f| f.r2);
    let sub_r2 = sub.map(|f| f.r2);
    let best = lin_r2.unwrap_or(0.0).max(sub_r2.unwrap_or(0.0));
    let mut est = RateEstimate {
        regime: Regime::Inconclusive,
        q: None,
        p: None,
        theta_from_p: None,
        fit_quality: best,
        linear_r2: lin_r2,
        sublinear_r2: sub_r2,
        diagnostic: None,
    };
    if best < RATE_MIN_R2 {
        est.diagnostic = Some(format!("best fit R² {best:.4} is below {RATE_MIN_R2}"));
        return est;
    }
    if lin_r2.unwrap_or(0.0) >= sub_r2.unwrap_or(0.0) {
        let fit = lin.unwrap();
        est.regime = Regime::Linear;
        est.q = Some(fit.slope.exp());
    } else {
        let p = -sub.unwrap().slope;
        est.regime = Regime::Sublinear;
        est.p = Some(p);
        est.theta_from_p = Some(p / (1.0 + 2.0 * p));
    }
    est
}

/// Rate of `|x_k - x_star|` over the tail `k >= tail_start`.
pub fn rate_classify(trace: &DescentTrace, x_star: &Point, tail_start: usize) -> Result<RateEstimate> {
    trace.validate()?;
    if x_star.dim() != trace.dim() {
        return Err(Error::Dimension {
            expected: trace.dim(),
            found: x_star.dim(),
        });
    }
    if tail_start >= trace.len() {
        return Ok(RateEstimate::inconclusive("empty tail"));
    }
    let radii: Vec<f64> = trace.iterates[tail_start..].iter().map(|x| x.distance(x_star)).collect();
    Ok(classify_radii(&radii, tail_start))
}

/// Gradient norm (relative to `1 + |f|`) below which a limit counts as a
/// regular stationary point. Loose on purpose: at an ill-conditioned
/// minimum with curvature ~1e4, f64 stops resolving progress while the
/// gradient is still ~1e-4.
pub const STATIONARY_GRAD_TOL: f64 = 1e-4;

/// Where a descent run ended up.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitVerdict {
    /// Converges to `singular_points[index]`.
    Singular { index: usize, point: Point, distance: f64 },
    /// Converges to a point where `f` is defined and the gradient vanishes.
    Regular { point: Point, grad_norm: f64 },
    /// Neither could be established.
    Unresolved { reason: String },
}

/// Classify the limit of a trace against known singular points.
///
/// The trailing-window test of [`find_cluster_point`] is tried first. When it
/// fails but the run stopped because f64 could no longer resolve progress
/// (`grad_tol` or `f_stationary`), the last iterate stands in for the limit:
/// near an ill-conditioned minimum, or deep inside the valley of a singular
/// point, the per-step decrease drops below one ulp of `f` long before the
/// iterates agree to `CLUSTER_TOL`. Singular points are then matched within
/// `APPROACH_TOL` (relative) instead of `CLUSTER_TOL`. A run that hit
/// `max_iters` without a cluster stays unresolved.
pub fn classify_limit(
    f: &crate::rational::RationalFunction,
    trace: &DescentTrace,
    singular_points: &[Point],
) -> Result<LimitVerdict> {
    trace.validate()?;
    let cluster = find_cluster_point(trace);
    let resolution_stop = matches!(
        trace.stop_reason,
        Some(crate::descent::StopReason::GradTol) | Some(crate::descent::StopReason::FStationary)
    );
    let point = match (&cluster, resolution_stop) {
        (Some(c), _) => c.point.clone(),
        (None, true) => trace.last().expect("validated trace is nonempty").clone(),
        (None, false) => {
            return Ok(LimitVerdict::Unresolved {
                reason: format!(
                    "no cluster point and the run stopped with {}",
                    trace.stop_reason.map_or("no stop reason", |r| r.as_str())
                ),
            })
        }
    };
    for s in singular_points {
        if s.dim() != point.dim() {
            return Err(Error::Dimension {
                expected: point.dim(),
                found: s.dim(),
            });
        }
    }
    let nearest = singular_points
        .iter()
        .enumerate()
        .map(|(i, s)| (i, point.distance(s)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((index, distance)) = nearest {
        let s = &singular_points[index];
        // Inside the valley of a singular point the per-step decrease falls
        // below one ulp while the iterates are still ~1e-4 away.
        let tol = if resolution_stop { APPROACH_TOL } else { CLUSTER_TOL };
        if distance <= tol * (1.0 + s.norm()) {
            return Ok(LimitVerdict::Singular {
                index,
                point: s.clone(),
                distance,
            });
        }
    }
    match f.eval_and_grad(&point) {
        Ok((v, g)) if g.norm() <= STATIONARY_GRAD_TOL * (1.0 + v.abs()) => Ok(LimitVerdict::Regular {
            grad_norm: g.norm(),
            point,
        }),
        Ok((_, g)) => Ok(LimitVerdict::Unresolved {
            reason: format!("gradient norm {:.3e} at {point} is not small", g.norm()),
        }),
        Err(Error::DomainViolation { .. }) => Ok(LimitVerdict::Unresolved {
            reason: format!("{point} is outside the domain but not a listed singular point"),
        }),
        Err(e) => Err(e),
    }
}

/// Sequence of neighborhoods (balls of `radius` around `centers`) visited by
/// the trace, with consecutive repeats and time spent outside all balls
/// removed.
pub fn neighborhood_visits(trace: &DescentTrace, centers: &[Point], radius: f64) -> Vec<usize> {
    let mut visits: Vec<usize> = Vec::new();
    for x in &trace.iterates {
        if let Some(i) = centers.iter().position(|c| c.dim() == x.dim() && x.distance(c) < radius) {
            if visits.last() != Some(&i) {
                visits.push(i);
            }
        }
    }
    visits
}

/// True when the trace enters a second neighborhood after its first entry
/// into some neighborhood.
pub fn alternates(trace: &DescentTrace, centers: &[Point], radius: f64) -> bool {
    neighborhood_visits(trace, centers, radius).len() > 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descent::{optimize, DescentConfig};
    use crate::poly::Polynomial;
    use crate::rational::RationalFunction;
    use crate::singan::analyze_singularity;
    use num_traits::Zero;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn x_squared() -> RationalFunction {
        let x = Polynomial::var(1, 0).unwrap();
        RationalFunction::from_polynomial(&x * &x)
    }

    fn origin(n: usize) -> Vec<BigRational> {
        vec![BigRational::zero(); n]
    }

    fn fig1() -> RationalFunction {
        let x = Polynomial::var(2, 0).unwrap();
        let y = Polynomial::var(2, 1).unwrap();
        let r2 = &(&x * &x) + &(&y * &y);
        RationalFunction::new(&x * &y, &r2 * &(&Polynomial::from_int(2, 1) + &r2)).unwrap()
    }

    #[test]
    fn snapping() {
        assert_eq!(snap_rational(0.25 + 1e-10, 16, 1e-8), Some(BigRational::new(1.into(), 4.into())));
        assert_eq!(snap_rational(3.0, 16, 1e-8), Some(BigRational::from_integer(3.into())));
        assert_eq!(snap_rational(0.123, 16, 1e-8), None);
        assert_eq!(snap_rational(-1.0 / 3.0, 16, 1e-8), Some(BigRational::new((-1).into(), 3.into())));
    }

    #[test]
    fn cluster_of_constant_trace_is_its_point() {
        let it = vec![pt(&[0.3141, 0.7]); 5];
        let tr = DescentTrace::from_iterates(&fig1(), it).unwrap();
        let c = find_cluster_point(&tr).unwrap();
        assert!(c.point.distance(&pt(&[0.3141, 0.7])) < 1e-15);
        assert!(c.exact.is_none());
    }

    #[test]
    fn divergent_trace_has_no_cluster_point() {
        let it = (0..50).map(|k| pt(&[2f64.powi(k), 0.0])).collect();
        let tr = DescentTrace::from_iterates(&x_squared_2d(), it).unwrap();
        assert!(find_cluster_point(&tr).is_none());
    }

    fn x_squared_2d() -> RationalFunction {
        let x = Polynomial::var(2, 0).unwrap();
        RationalFunction::from_polynomial(&x * &x)
    }

    #[test]
    fn fig1_run_clusters_at_origin() {
        let tr = optimize(&fig1(), &pt(&[2.0, -0.1]), &DescentConfig::default()).unwrap();
        let c = find_cluster_point(&tr).unwrap();
        assert_eq!(c.exact, Some(origin(2)));
        assert_eq!(c.point, pt(&[0.0, 0.0]));
    }

    #[test]
    fn fig1_trail_sits_on_the_unit_circle() {
        let f = fig1();
        let tr = optimize(&f, &pt(&[2.0, -0.1]), &DescentConfig::default()).unwrap();
        let pencil = analyze_singularity(&f, &origin(2)).unwrap();
        let trail = direction_trail(&tr, &pencil, tr.len() / 2).unwrap();
        for (u, v) in trail.unit_directions.iter().zip(&trail.pencil_values) {
            assert!((u.norm() - 1.0).abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-9);
        }
        assert!((trail.min_tail_pencil.unwrap() - 1.0).abs() < 1e-9);
        assert!(trail.a4_certified_default());
    }

    #[test]
    fn alternating_axes_expose_distinct_limits() {
        // x^2/(x^2+y^2) along e1, e2/2, e1/4, ...
        let x = Polynomial::var(2, 0).unwrap();
        let y = Polynomial::var(2, 1).unwrap();
        let f = RationalFunction::new(&x * &x, &(&x * &x) + &(&y * &y)).unwrap();
        let it: Vec<Point> = (0..12)
            .map(|k| {
                let s = 2f64.powi(-k);
                if k % 2 == 0 {
                    pt(&[s, 0.0])
                } else {
                    pt(&[0.0, s])
                }
            })
            .collect();
        let tr = DescentTrace::from_iterates(&f, it).unwrap();
        let pencil = analyze_singularity(&f, &origin(2)).unwrap();
        let trail = direction_trail(&tr, &pencil, 0).unwrap();
        assert!(trail.pencil_values.iter().all(|v| *v == 1.0));
        assert_eq!(trail.limit_values[0], Some(1.0));
        assert_eq!(trail.limit_values[1], Some(0.0));
        assert_eq!(trail.tail_limit_spread(), Some(1.0));
        assert!(tr.f_values.windows(2).any(|w| w[1] > w[0]));
    }

    #[test]
    fn trail_skips_center_and_handles_one_point() {
        let f = fig1();
        let pencil = analyze_singularity(&f, &origin(2)).unwrap();
        let tr = DescentTrace::from_iterates(&f, vec![pt(&[1.0, 1.0])]).unwrap();
        let trail = direction_trail(&tr, &pencil, 0).unwrap();
        assert_eq!(trail.unit_directions.len(), 1);
        assert_eq!(trail.skipped, 0);
    }

    #[test]
    fn halving_trace_certificate() {
        let it = (0..30).map(|k| pt(&[2f64.powi(-k)])).collect();
        let tr = DescentTrace::from_iterates(&x_squared(), it).unwrap();
        let rep = lojasiewicz_probe(&tr, 0, &[0.5]).unwrap();
        // f_k - f_{k+1} is geometric with ratio 1/4, so L extrapolates to 0.
        assert!(rep.limit.value().abs() < 1e-20);
        let cert = &rep.certificates[0];
        assert!(cert.feasible);
        assert!((cert.c.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(cert.violations(&tr), 0);
    }

    #[test]
    fn zero_gradient_with_residual_is_infeasible() {
        let mut tr = DescentTrace::from_iterates(&x_squared(), vec![pt(&[2.0]), pt(&[1.0]), pt(&[0.5])]).unwrap();
        tr.grad_norms[1] = 0.0;
        let rep = lojasiewicz_probe(&tr, 0, &default_theta_grid()).unwrap();
        assert!(!rep.any_feasible());
        assert!(rep.certificates.iter().all(|c| c.witness == Some(1) && c.c.is_none()));
    }

    #[test]
    fn non_monotone_tail() {
        let tr = DescentTrace::from_iterates(&x_squared(), vec![pt(&[1.0]), pt(&[2.0]), pt(&[0.5])]).unwrap();
        assert!(matches!(
            lojasiewicz_probe(&tr, 0, &[0.5]),
            Err(Error::NonMonotoneTail { index: 1 })
        ));
        let rep = lojasiewicz_scan(&tr, 0, &[0.5]).unwrap();
        assert!(!rep.monotone);
        assert_eq!(rep.limit, LimitEstimate::LastValue { value: 0.25 });
        assert!(lojasiewicz_probe(&tr, 3, &[0.5]).is_err());
        assert!(lojasiewicz_probe(&tr, 0, &[0.7]).is_err());
    }

    #[test]
    fn certificates_are_sorted_and_c_grows_with_theta() {
        let f = fig1();
        let tr = optimize(&f, &pt(&[2.0, -0.1]), &DescentConfig::default()).unwrap();
        let mut grid = default_theta_grid();
        grid.reverse();
        let rep = lojasiewicz_probe(&tr, tr.len() / 2, &grid).unwrap();
        assert!(rep.certificates.windows(2).all(|w| w[0].theta < w[1].theta));
        assert!(rep.any_feasible());
        let cs: Vec<f64> = rep.certificates.iter().filter_map(|c| c.c).collect();
        assert!(cs.windows(2).all(|w| w[1] >= w[0]));
        for c in rep.certificates.iter().filter(|c| c.feasible) {
            assert_eq!(c.violations(&tr), 0);
        }
    }

    #[test]
    fn limit_estimation() {
        let f: Vec<f64> = (0..40).map(|k| 1.0 + 0.9f64.powi(k)).collect();
        match estimate_limit(&f) {
            LimitEstimate::Extrapolated { value, rho, .. } => {
                assert!((value - 1.0).abs() < 1e-9);
                assert!((rho - 0.9).abs() < 1e-9);
            }
            other => panic!("expected extrapolation, got {other:?}"),
        }
        assert_eq!(estimate_limit(&[3.0, 2.0]), LimitEstimate::LastValue { value: 2.0 });
        assert_eq!(estimate_limit(&[1.0; 5]), LimitEstimate::LastValue { value: 1.0 });
    }

    #[test]
    fn planted_rates() {
        let geo: Vec<f64> = (0..60).map(|k| 0.8f64.powi(k)).collect();
        let est = classify_radii(&geo, 0);
        assert_eq!(est.regime, Regime::Linear);
        assert!((est.q.unwrap() - 0.8).abs() < 1e-6);

        let pow: Vec<f64> = (1..200).map(|k| (k as f64).powi(-2)).collect();
        let est = classify_radii(&pow, 1);
        assert_eq!(est.regime, Regime::Sublinear);
        assert!((est.p.unwrap() - 2.0).abs() < 1e-6);
        assert!((est.theta_from_p.unwrap() - 0.4).abs() < 1e-6);

        let est = classify_radii(&[1.0; 20], 0);
        assert_eq!(est.regime, Regime::Inconclusive);
        assert!(est.diagnostic.is_some());
    }

    #[test]
    fn linear_fit_exact_line() {
        let fit = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert_eq!((fit.slope, fit.intercept, fit.r2), (2.0, 1.0, 1.0));
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn classify_fig1_run_as_singular() {
        let f = fig1();
        let tr = optimize(&f, &pt(&[2.0, -0.1]), &DescentConfig::default()).unwrap();
        let centers = [pt(&[0.0, 0.0]), pt(&[5.0, 5.0])];
        match classify_limit(&f, &tr, &centers).unwrap() {
            LimitVerdict::Singular { index, .. } => assert_eq!(index, 0),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn classify_regular_minimum() {
        // (x - 1)^2 + y^2 has its minimum at (1, 0), far from the listed point.
        let x = Polynomial::var(2, 0).unwrap();
        let y = Polynomial::var(2, 1).unwrap();
        let one = Polynomial::from_int(2, 1);
        let xm = &x - &one;
        let f = RationalFunction::from_polynomial(&(&xm * &xm) + &(&y * &y));
        let tr = optimize(&f, &pt(&[3.0, 2.0]), &DescentConfig::default()).unwrap();
        match classify_limit(&f, &tr, &[pt(&[0.0, 0.0])]).unwrap() {
            LimitVerdict::Regular { point, grad_norm } => {
                assert!(point.distance(&pt(&[1.0, 0.0])) < 1e-8);
                assert!(grad_norm < 1e-8);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn unfinished_run_without_cluster_is_unresolved() {
        let it = (0..50).map(|k| pt(&[2f64.powi(k), 0.0])).collect();
        let mut tr = DescentTrace::from_iterates(&x_squared_2d(), it).unwrap();
        tr.stop_reason = Some(crate::descent::StopReason::MaxIters);
        assert!(matches!(
            classify_limit(&x_squared_2d(), &tr, &[]).unwrap(),
            LimitVerdict::Unresolved { .. }
        ));
    }

    #[test]
    fn neighborhood_sequence() {
        let centers = [pt(&[0.0, 0.0]), pt(&[3.0, 0.0])];
        let it = vec![
            pt(&[1.5, 0.0]),
            pt(&[0.1, 0.0]),
            pt(&[0.05, 0.0]),
            pt(&[1.5, 0.0]),
            pt(&[2.9, 0.0]),
            pt(&[0.2, 0.0]),
        ];
        let tr = DescentTrace::from_iterates(&x_squared_2d(), it).unwrap();
        assert_eq!(neighborhood_visits(&tr, &centers, 0.5), vec![0, 1, 0]);
        assert!(alternates(&tr, &centers, 0.5));
        let settled = DescentTrace::from_iterates(&x_squared_2d(), vec![pt(&[1.5, 0.0]), pt(&[0.1, 0.0])]).unwrap();
        assert!(!alternates(&settled, &centers, 0.5));
    }
}
