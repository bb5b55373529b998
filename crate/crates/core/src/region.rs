//! Exact memory-rate region for demand privacy with two files and two users.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lift::{dual_example_scheme, example1_scheme, theorem1_scheme};
use crate::model::{Rational, SchemeInstance};
use crate::schemes::memory_share;
use crate::verifier::measure_rates;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    TwoMPlusR,
    ThreeMPlusThreeR,
    MPlusTwoR,
}

impl Constraint {
    pub const ALL: [Constraint; 3] = [
        Constraint::TwoMPlusR,
        Constraint::ThreeMPlusThreeR,
        Constraint::MPlusTwoR,
    ];

    /// `(a, b, c)` with the constraint reading `aM + bR >= c`.
    pub fn coefficients(self) -> (i64, i64, i64) {
        match self {
            Constraint::TwoMPlusR => (2, 1, 2),
            Constraint::ThreeMPlusThreeR => (3, 3, 5),
            Constraint::MPlusTwoR => (1, 2, 2),
        }
    }

    pub fn slack(self, memory: Rational, rate: Rational) -> Rational {
        let (a, b, c) = self.coefficients();
        memory * a + rate * b - c
    }

    /// Smallest rate this constraint allows at `memory`.
    pub fn rate_bound(self, memory: Rational) -> Rational {
        let (a, b, c) = self.coefficients();
        (Rational::from_integer(c) - memory * a) / b
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b, c) = self.coefficients();
        let term = |k: i64, v: &str| if k == 1 { v.to_string() } else { format!("{k}{v}") };
        write!(f, "{}+{}>={c}", term(a, "M"), term(b, "R"))
    }
}

/// Constraints violated by `(memory, rate)`; empty means achievable.
pub fn check_inequalities(memory: Rational, rate: Rational) -> Vec<Constraint> {
    Constraint::ALL
        .into_iter()
        .filter(|c| c.slack(memory, rate) < Rational::zero())
        .collect()
}

pub fn is_achievable(memory: Rational, rate: Rational) -> bool {
    memory >= Rational::zero() && rate >= Rational::zero() && check_inequalities(memory, rate).is_empty()
}

/// `R*(M)` for two files and two users under demand privacy, `0 <= M <= 2`.
pub fn optimal_private_rate_2x2(memory: Rational) -> Result<Rational> {
    if memory < Rational::zero() || memory > Rational::from_integer(2) {
        return Err(Error::ParameterMismatch(format!("memory {memory} outside [0, 2]")));
    }
    Ok(Constraint::ALL
        .into_iter()
        .map(|c| c.rate_bound(memory))
        .fold(Rational::zero(), Rational::max))
}

/// Constraints met with equality at `(memory, rate)`.
pub fn tight_constraints(memory: Rational, rate: Rational) -> Vec<Constraint> {
    Constraint::ALL
        .into_iter()
        .filter(|c| c.slack(memory, rate).is_zero())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatePoint {
    pub memory: Rational,
    pub rate: Rational,
    pub source: String,
}

pub fn corner_points_2x2() -> Vec<RatePoint> {
    [
        (r(0, 1), r(2, 1), "thm1:2,2,0"),
        (r(1, 3), r(4, 3), "example1"),
        (r(4, 3), r(1, 3), "dual"),
        (r(2, 1), r(0, 1), "thm1:2,2,2"),
    ]
    .into_iter()
    .map(|(memory, rate, source)| RatePoint {
        memory,
        rate,
        source: source.into(),
    })
    .collect()
}

/// Schemes implemented in this crate whose measured points sit on the
/// two-user boundary.
pub fn implemented_schemes_2x2() -> Result<Vec<SchemeInstance>> {
    let ex = example1_scheme();
    let dual = dual_example_scheme();
    Ok(vec![
        theorem1_scheme(2, 2, r(0, 1))?,
        ex.clone(),
        memory_share(ex.clone(), dual.clone(), r(1, 3))?,
        memory_share(ex, dual.clone(), r(2, 3))?,
        dual,
        theorem1_scheme(2, 2, r(2, 1))?,
    ])
}

pub fn measured_points(schemes: &[SchemeInstance]) -> Result<Vec<RatePoint>> {
    schemes
        .iter()
        .map(|s| {
            let m = measure_rates(s.as_ref(), 1)?;
            Ok(RatePoint {
                memory: m.memory,
                rate: m.rate,
                source: s.name(),
            })
        })
        .collect()
}

/// Memory grid `0, step, 2 step, ...` closed off at 2.
pub fn boundary(step: Rational) -> Result<Vec<(Rational, Rational)>> {
    if step <= Rational::zero() {
        return Err(Error::ParameterMismatch(format!("step {step} must be positive")));
    }
    let two = Rational::from_integer(2);
    let mut out = Vec::new();
    let mut m = Rational::zero();
    while m < two {
        out.push((m, optimal_private_rate_2x2(m)?));
        m += step;
    }
    out.push((two, Rational::zero()));
    Ok(out)
}

pub fn fmt_rational(x: Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::ParameterMismatch(format!("not a rational: {s:?}"));
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: i64 = n.parse().map_err(|_| bad())?;
    let d: i64 = d.parse().map_err(|_| bad())?;
    if d == 0 {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

fn region_csv(bound: &[(Rational, Rational)], points: &[RatePoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["M", "R_optimal", "scheme", "label"]).map_err(io)?;
    for (m, rate) in bound {
        w.write_record([fmt_rational(*m), fmt_rational(*rate), "boundary".into(), String::new()])
            .map_err(io)?;
    }
    for p in points {
        let opt = optimal_private_rate_2x2(p.memory).map_or(String::new(), fmt_rational);
        w.write_record([
            fmt_rational(p.memory),
            opt,
            p.source.clone(),
            format!("R={}", fmt_rational(p.rate)),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn svg_id(source: &str) -> String {
    source
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn to_f64(x: Rational) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn region_svg(bound: &[(Rational, Rational)], points: &[RatePoint]) -> String {
    let (left, top, size) = (60.0, 20.0, 400.0);
    let x = |m: Rational| left + to_f64(m) / 2.0 * size;
    let y = |rate: Rational| top + size - to_f64(rate) / 2.0 * size;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = left + size + 20.0,
        h = top + size + 50.0
    ));
    out.push_str(&format!(
        "<g id=\"axes\" stroke=\"black\" fill=\"none\"><line x1=\"{left}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\"/><line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{b}\"/></g>\n",
        b = top + size,
        r = left + size
    ));
    for k in 0..=4 {
        let v = r(k, 2);
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            x(v),
            top + size + 15.0,
            v
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            left - 5.0,
            y(v) + 4.0,
            v
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">M</text>\n",
        left + size / 2.0,
        top + size + 35.0
    ));
    out.push_str(&format!(
        "<text x=\"15\" y=\"{:.1}\" font-size=\"12\">R</text>\n",
        top + size / 2.0
    ));
    let pts: Vec<String> = bound
        .iter()
        .map(|(m, rate)| format!("{:.3},{:.3}", x(*m), y(*rate)))
        .collect();
    out.push_str(&format!(
        "<polyline id=\"boundary\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{}\"/>\n",
        pts.join(" ")
    ));
    for p in points {
        out.push_str(&format!(
            "<circle id=\"point-{}\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" fill=\"firebrick\"><title>{} M={} R={}</title></circle>\n",
            svg_id(&p.source),
            x(p.memory),
            y(p.rate),
            p.source,
            p.memory,
            p.rate
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Writes `<out>.csv` and `<out>.svg`.
pub fn emit_region(out: &Path, step: Rational, points: &[RatePoint]) -> Result<(PathBuf, PathBuf)> {
    let bound = boundary(step)?;
    let csv = out.with_extension("csv");
    let svg = out.with_extension("svg");
    fs::write(&csv, region_csv(&bound, points)?)?;
    fs::write(&svg, region_svg(&bound, points))?;
    Ok((csv, svg))
}
