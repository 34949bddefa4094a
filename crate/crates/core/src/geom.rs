//! Solutions as space curves `(t, s(t), x(t))`, and their distance from
//! the surface `-t + s + g(x) = 0` and from planes `-t + s + a x + b = 0`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SddError};
use crate::model::DelaySpec;
use crate::solution::{linspace, CurveSource, SolutionCurve};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row3 {
    pub t: f64,
    pub s: f64,
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve3D {
    pub label: String,
    pub source: CurveSource,
    pub rows: Vec<Row3>,
}

/// Samples `curve` at `grid` equispaced times of its span.
pub fn lift<C: SolutionCurve + ?Sized>(curve: &C, delay: &DelaySpec, grid: usize) -> Result<Curve3D> {
    let (lo, hi) = curve.span();
    if !hi.is_finite() {
        return Err(SddError::param("span", hi, "cap an unbounded window before lifting"));
    }
    lift_on(curve, delay, lo, hi, grid)
}

/// Samples `curve` at `grid` equispaced times of `[lo, hi]`.
pub fn lift_on<C: SolutionCurve + ?Sized>(
    curve: &C,
    delay: &DelaySpec,
    lo: f64,
    hi: f64,
    grid: usize,
) -> Result<Curve3D> {
    if grid < 2 {
        return Err(SddError::param("grid", grid as f64, "must be at least 2"));
    }
    if !(hi > lo) {
        return Err(SddError::param("hi", hi, "must exceed the lower end"));
    }
    let rows = linspace(lo, hi, grid)
        .into_iter()
        .map(|t| {
            let x = curve.value(t)?;
            Ok(Row3 {
                t,
                s: t - delay.eval(x)?,
                x,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Curve3D {
        label: curve.label(),
        source: curve.source(),
        rows,
    })
}

impl Curve3D {
    /// `max |-t + s + g(x)|` over the rows.
    pub fn surface_residual(&self, delay: &DelaySpec) -> Result<f64> {
        self.rows
            .iter()
            .try_fold(0.0f64, |acc, r| Ok(acc.max((-r.t + r.s + delay.eval(r.x)?).abs())))
    }

    /// `max |-t + s + a x + b|` over the rows.
    pub fn plane_residual(&self, a: f64, b: f64) -> f64 {
        self.rows
            .iter()
            .fold(0.0f64, |acc, r| acc.max((-r.t + r.s + a * r.x + b).abs()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "s", "x"])?;
        for r in &self.rows {
            w.serialize((r.t, r.s, r.x))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
