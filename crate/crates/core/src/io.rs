//! File formats: JSON problem files, the bundled examples, and trace CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::descent::{DescentTrace, StopReason};
use crate::error::{Error, Result};
use crate::point::Point;
use crate::poly::{format_rational, parse_rational, Polynomial, TermRecord};
use crate::rational::RationalFunction;

/// A rational objective `numer / denom` with optional metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n_vars: usize,
    pub numer: Vec<TermRecord>,
    pub denom: Vec<TermRecord>,
    /// Known singular points, coordinates as exact rationals (`"n"` or `"n/d"`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub singular_points: Vec<Vec<String>>,
}

impl ProblemFile {
    pub fn from_function(name: Option<&str>, f: &RationalFunction, singular_points: &[Vec<BigRational>]) -> Self {
        ProblemFile {
            name: name.map(str::to_string),
            n_vars: f.n_vars(),
            numer: f.numer().to_records(),
            denom: f.denom().to_records(),
            singular_points: singular_points
                .iter()
                .map(|p| p.iter().map(format_rational).collect())
                .collect(),
        }
    }

    pub fn function(&self) -> Result<RationalFunction> {
        if self.n_vars == 0 {
            return Err(Error::parse("n_vars", "must be positive"));
        }
        let numer = Polynomial::from_records(self.n_vars, &self.numer).map_err(|e| wrap("numer", e))?;
        let denom = Polynomial::from_records(self.n_vars, &self.denom).map_err(|e| wrap("denom", e))?;
        if denom.is_zero() {
            return Err(Error::parse("denom", "the zero polynomial is not a denominator"));
        }
        RationalFunction::new(numer, denom)
    }

    pub fn singular_points(&self) -> Result<Vec<Vec<BigRational>>> {
        self.singular_points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.len() != self.n_vars {
                    return Err(Error::parse(
                        format!("singular_points[{i}]"),
                        format!("has {} coordinates, expected {}", p.len(), self.n_vars),
                    ));
                }
                p.iter().map(|c| parse_rational(c)).collect()
            })
            .collect()
    }

    /// Parses and validates; the result is in canonical form.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: ProblemFile = serde_json::from_str(text).map_err(|e| Error::parse("problem", e))?;
        let f = raw.function()?;
        let points = raw.singular_points()?;
        Ok(ProblemFile::from_function(raw.name.as_deref(), &f, &points))
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem files always serialize");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        ProblemFile::parse(&read_text(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json())
    }
}

fn wrap(field: &str, e: Error) -> Error {
    match e {
        Error::Parse { field: inner, reason } => Error::parse(field, format!("{inner}: {reason}")),
        Error::Dimension { expected, found } => {
            Error::parse(field, format!("term has {found} exponents, expected {expected}"))
        }
        other => Error::parse(field, other),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// `xy / ((x² + y²)(1 + x² + y²))`, bounded with an essential singularity at 0.
pub fn fig1_function() -> RationalFunction {
    let x = Polynomial::var(2, 0).expect("2 variables");
    let y = Polynomial::var(2, 1).expect("2 variables");
    let r2 = &(&x * &x) + &(&y * &y);
    let den = &r2 * &(&Polynomial::from_int(2, 1) + &r2);
    RationalFunction::new(&x * &y, den).expect("nonzero denominator")
}

/// Centers of the three copies in `multi3`.
pub const MULTI3_CENTERS: [(i64, i64); 3] = [(0, 0), (3, 0), (0, 3)];

/// Sum of three translated copies of the `fig1` function, unit weights.
pub fn multi3_function() -> RationalFunction {
    let base = fig1_function();
    let mut sum: Option<RationalFunction> = None;
    for &(u, v) in &MULTI3_CENTERS {
        let shift = [BigRational::from_integer(u.into()), BigRational::from_integer(v.into())];
        let copy = base.translate(&shift).expect("2 variables");
        sum = Some(match sum {
            None => copy,
            Some(acc) => acc.try_add(&copy).expect("2 variables"),
        });
    }
    sum.expect("three copies")
}

/// `(y² - x²) / (x² + y²)`.
pub fn counterex_function() -> RationalFunction {
    let x = Polynomial::var(2, 0).expect("2 variables");
    let y = Polynomial::var(2, 1).expect("2 variables");
    let num = &(&y * &y) - &(&x * &x);
    let den = &(&x * &x) + &(&y * &y);
    RationalFunction::new(num, den).expect("nonzero denominator")
}

fn int_point(p: &[i64]) -> Vec<BigRational> {
    p.iter().map(|&c| BigRational::from_integer(c.into())).collect()
}

/// Names of the bundled problems.
pub const BUNDLED: [&str; 3] = ["fig1", "multi3", "counterex"];

/// A bundled problem by name.
pub fn bundled(name: &str) -> Option<ProblemFile> {
    let (f, pts) = match name {
        "fig1" => (fig1_function(), vec![int_point(&[0, 0])]),
        "multi3" => (
            multi3_function(),
            MULTI3_CENTERS.iter().map(|&(u, v)| int_point(&[u, v])).collect(),
        ),
        "counterex" => (counterex_function(), vec![int_point(&[0, 0])]),
        _ => return None,
    };
    Some(ProblemFile::from_function(Some(name), &f, &pts))
}

/// The points `e1, e2/2, e1/4, e2/8, ..` along which the counterexample
/// alternates between -1 and 1 with zero gradient.
pub fn counterex_sequence(n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let s = 0.5f64.powi(k as i32);
            let v = if k % 2 == 0 { vec![s, 0.0] } else { vec![0.0, s] };
            Point::new(v).expect("finite")
        })
        .collect()
}

/// Exact rational value of a coordinate list such as `"0,0"` or `"1/2, -3"`.
pub fn parse_exact_csv(field: &str, s: &str) -> Result<Vec<BigRational>> {
    s.split(',')
        .map(|c| parse_rational(c).map_err(|e| Error::parse(field, e)))
        .collect()
}

/// Floating-point coordinates from a list such as `"2,-0.1"`.
pub fn parse_point_csv(field: &str, s: &str) -> Result<Point> {
    let coords = s
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(field, format!("`{}` is not a number", c.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    Point::new(coords).map_err(|_| Error::parse(field, "coordinates must be finite"))
}

const STOP_PREFIX: &str = "# stop_reason: ";
const DIAG_PREFIX: &str = "# diagnostic: ";

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trace CSV: header `k,x_1..x_n,f,grad_norm,step_norm,alpha`, one row per
/// iterate (the last row has empty step fields), then comment lines with
/// the stop reason and diagnostic when present.
pub fn trace_to_csv(trace: &DescentTrace) -> String {
    let n = trace.dim();
    let mut out = String::from("k");
    for i in 1..=n {
        let _ = write!(out, ",x_{i}");
    }
    out.push_str(",f,grad_norm,step_norm,alpha\n");
    for k in 0..trace.len() {
        let _ = write!(out, "{k}");
        for v in trace.iterates[k].iter() {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        let _ = write!(out, ",{},{}", fmt_f64(trace.f_values[k]), fmt_f64(trace.grad_norms[k]));
        if k + 1 < trace.len() {
            let _ = write!(out, ",{},{}", fmt_f64(trace.step_norms[k]), fmt_f64(trace.alphas[k]));
        } else {
            out.push_str(",,");
        }
        out.push('\n');
    }
    if let Some(s) = trace.stop_reason {
        let _ = writeln!(out, "{STOP_PREFIX}{}", s.as_str());
    }
    if let Some(d) = &trace.diagnostic {
        let _ = writeln!(out, "{DIAG_PREFIX}{}", d.replace('\n', " "));
    }
    out
}

/// Reads a trace written by [`trace_to_csv`].
pub fn trace_from_csv(text: &str) -> Result<DescentTrace> {
    let mut stop_reason = None;
    let mut diagnostic = None;
    for line in text.lines() {
        if let Some(s) = line.strip_prefix(STOP_PREFIX) {
            stop_reason = Some(
                StopReason::parse(s.trim())
                    .ok_or_else(|| Error::InvalidTrace(format!("unknown stop reason `{}`", s.trim())))?,
            );
        } else if let Some(d) = line.strip_prefix(DIAG_PREFIX) {
            diagnostic = Some(d.to_string());
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::InvalidTrace(format!("header: {e}")))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    let n = cols.len().checked_sub(5).filter(|&n| n > 0).ok_or_else(|| {
        Error::InvalidTrace(format!("header has {} columns, need at least 6", cols.len()))
    })?;
    let mut expected = vec!["k".to_string()];
    expected.extend((1..=n).map(|i| format!("x_{i}")));
    expected.extend(["f", "grad_norm", "step_norm", "alpha"].map(String::from));
    if cols != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::InvalidTrace(format!("unexpected header `{}`", cols.join(","))));
    }
    let mut trace = DescentTrace {
        iterates: Vec::new(),
        f_values: Vec::new(),
        grad_norms: Vec::new(),
        step_norms: Vec::new(),
        alphas: Vec::new(),
        stop_reason,
        diagnostic,
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec.map_err(|e| Error::InvalidTrace(e.to_string()))?);
    }
    let last = rows.len().saturating_sub(1);
    for (row, rec) in rows.iter().enumerate() {
        let line = row + 2;
        let num = |j: usize| -> Result<f64> {
            let s = rec.get(j).unwrap_or("").trim();
            s.parse::<f64>().map_err(|_| {
                Error::InvalidTrace(format!("line {line}, column `{}`: `{s}` is not a number", cols[j]))
            })
        };
        let k: usize = rec
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::InvalidTrace(format!("line {line}: bad iteration index")))?;
        if k != row {
            return Err(Error::InvalidTrace(format!("line {line}: index {k}, expected {row}")));
        }
        let coords = (1..=n).map(num).collect::<Result<Vec<_>>>()?;
        let x = Point::new(coords)
            .map_err(|_| Error::InvalidTrace(format!("line {line}: non-finite coordinate")))?;
        trace.iterates.push(x);
        trace.f_values.push(num(n + 1)?);
        trace.grad_norms.push(num(n + 2)?);
        if row < last {
            trace.step_norms.push(num(n + 3)?);
            trace.alphas.push(num(n + 4)?);
        } else if !rec.get(n + 3).unwrap_or("").is_empty() || !rec.get(n + 4).unwrap_or("").is_empty() {
            return Err(Error::InvalidTrace(format!("line {line}: last row must leave step fields empty")));
        }
    }
    trace.validate()?;
    Ok(trace)
}

/// `[0, 1]` grid of `n` points, both ends included.
pub(crate) fn unit_grid(n: usize) -> impl Iterator<Item = f64> {
    let d = if n > 1 { (n - 1) as f64 } else { 1.0 };
    (0..n).map(move |i| i as f64 / d)
}

/// Level-set samples of `f` on a rectangle as CSV `x,y,f`, row by row;
/// undefined points get an empty `f`.
pub fn level_grid_csv(f: &RationalFunction, lo: (f64, f64), hi: (f64, f64), n: usize) -> Result<String> {
    if f.n_vars() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            found: f.n_vars(),
        });
    }
    let mut out = String::from("x,y,f\n");
    for sy in unit_grid(n) {
        let y = lo.1 + sy * (hi.1 - lo.1);
        for sx in unit_grid(n) {
            let x = lo.0 + sx * (hi.0 - lo.0);
            let p = Point::new(vec![x, y])?;
            match f.eval(&p) {
                Ok(v) => {
                    let _ = writeln!(out, "{},{},{}", fmt_f64(x), fmt_f64(y), fmt_f64(v));
                }
                Err(Error::DomainViolation { .. }) => {
                    let _ = writeln!(out, "{},{},", fmt_f64(x), fmt_f64(y));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
