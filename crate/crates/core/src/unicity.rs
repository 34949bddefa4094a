//! Sufficient conditions for uniqueness, and integration in the delayed
//! argument `s` instead of `t`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SddError};
use crate::model::{DelaySpec, SddProblem};
use crate::solution::linspace;

pub const DEFAULT_MARGIN: f64 = 1e-9;
/// Denominators of the transformed system below this are singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UniquenessVerdict {
    Unique,
    /// No conclusion. Never means non-unique.
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessCertificate {
    /// `g'(φ(0)) F(φ(0), φ(-g(φ(0))))`.
    pub q: f64,
    pub margin: f64,
    pub verdict: UniquenessVerdict,
}

/// Solutions are unique when `q` differs from 1 by more than `margin`.
pub fn slope_certificate(p: &SddProblem, margin: f64) -> Result<UniquenessCertificate> {
    if !(margin > 0.0) {
        return Err(SddError::param("margin", margin, "must be positive"));
    }
    let x0 = p.phi.eval(0.0)?;
    let slope = p.delay.derivative(x0)?;
    let s0 = p.initial_delayed_argument()?;
    let q = slope * p.rhs.eval(x0, p.phi.eval(s0)?);
    Ok(UniquenessCertificate {
        q,
        margin,
        verdict: if (q - 1.0).abs() > margin {
            UniquenessVerdict::Unique
        } else {
            UniquenessVerdict::Inconclusive
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionCheck {
    pub eta: f64,
    pub grid: usize,
    pub x_range: (f64, f64),
    pub max_value: f64,
    pub holds: bool,
    /// Always false: only grid points are inspected.
    pub exhaustive: bool,
}

/// One-sided slopes of `g` at `x`; two of them at a kink.
fn slopes(delay: &DelaySpec, x: f64) -> Vec<f64> {
    match delay.derivative(x) {
        Ok(d) => vec![d],
        Err(_) => [x - 1e-9, x + 1e-9]
            .iter()
            .filter_map(|&y| delay.derivative(y).ok())
            .collect(),
    }
}

/// Samples `g'(x) F(x, y) < 1` with `x` over the range of `φ` and
/// `|y| < η`.
pub fn lipschitz_region_check(p: &SddProblem, eta: f64, grid: usize) -> Result<RegionCheck> {
    if !(eta > 0.0) {
        return Err(SddError::param("eta", eta, "must be positive"));
    }
    if grid < 10 {
        return Err(SddError::param("grid", grid as f64, "must be at least 10"));
    }
    let (lo, hi) = p.phi.range_hull(grid)?;
    // open interval: cell midpoints
    let ys: Vec<f64> = (0..grid)
        .map(|j| -eta + 2.0 * eta * (j as f64 + 0.5) / grid as f64)
        .collect();
    let mut max_value = f64::NEG_INFINITY;
    for x in linspace(lo, hi, grid) {
        for d in slopes(&p.delay, x) {
            for &y in &ys {
                max_value = max_value.max(d * p.rhs.eval(x, y));
            }
        }
    }
    Ok(RegionCheck {
        eta,
        grid,
        x_range: (lo, hi),
        max_value,
        holds: max_value < 1.0,
        exhaustive: false,
    })
}

/// `(dw/ds, dt/ds)` at `(s, w)`.
fn transformed_system(p: &SddProblem, s: f64, w: f64) -> Result<(f64, f64)> {
    let f = p.rhs.eval(w, p.phi.eval(s)?);
    let denominator = 1.0 - p.delay.derivative(w)? * f;
    if denominator.abs() < SINGULAR_TOL {
        return Err(SddError::Singular { s, w, denominator });
    }
    Ok((f / denominator, 1.0 / denominator))
}

/// `G(s, w) = F(w, φ(s)) / (1 - g'(w) F(w, φ(s)))`.
pub fn transformed_rhs(p: &SddProblem, s: f64, w: f64) -> Result<f64> {
    transformed_system(p, s, w).map(|(g, _)| g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformedSample {
    pub s: f64,
    pub t: f64,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformedTrajectory {
    pub problem: String,
    pub samples: Vec<TransformedSample>,
}

impl TransformedTrajectory {
    /// `(t, x)` pairs ordered by increasing `t`.
    pub fn time_series(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.samples.iter().map(|r| (r.t, r.w)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// `Some(true)` when `t(s)` is strictly increasing in `s` over the
    /// samples, `Some(false)` when strictly decreasing, `None` otherwise.
    pub fn t_monotone(&self) -> Option<bool> {
        let q: Vec<f64> = self
            .samples
            .windows(2)
            .map(|w| (w[1].t - w[0].t) / (w[1].s - w[0].s))
            .collect();
        if q.iter().all(|d| *d > 0.0) {
            Some(true)
        } else if q.iter().all(|d| *d < 0.0) {
            Some(false)
        } else {
            None
        }
    }

    pub fn end(&self) -> TransformedSample {
        self.samples[self.samples.len() - 1]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "t", "w"])?;
        for r in &self.samples {
            w.serialize((r.s, r.t, r.w))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates `dw/ds = G`, `dt/ds = 1/(1 - g'F)` with classical RK4 from
/// `(s0, t = 0, w = φ(0))` to `s_end`, in either direction of `s`.
pub fn integrate_transformed(p: &SddProblem, s_end: f64, step: f64) -> Result<TransformedTrajectory> {
    if !(step > 0.0) {
        return Err(SddError::param("step", step, "must be positive"));
    }
    let cert = slope_certificate(p, DEFAULT_MARGIN)?;
    if cert.verdict != UniquenessVerdict::Unique {
        return Err(SddError::Inapplicable(format!(
            "{}: q = {} is too close to 1 for the change of variables",
            p.name, cert.q
        )));
    }
    let lo = p.phi.lo();
    if !(s_end >= lo && s_end <= 0.0) {
        return Err(SddError::param("s_end", s_end, "must lie in [-h, 0]"));
    }
    let s0 = p.initial_delayed_argument()?;
    let mut cur = TransformedSample {
        s: s0,
        t: 0.0,
        w: p.phi.eval(0.0)?,
    };
    let mut traj = TransformedTrajectory {
        problem: p.name.clone(),
        samples: vec![cur],
    };
    let span = s_end - s0;
    if span == 0.0 {
        return Ok(traj);
    }
    let n = (span.abs() / step - 1e-9).ceil().max(1.0) as usize;
    let h = span / n as f64;
    for i in 0..n {
        let stages = (|| -> Result<((f64, f64), (f64, f64), (f64, f64), (f64, f64))> {
            let k1 = transformed_system(p, cur.s, cur.w)?;
            let k2 = transformed_system(p, cur.s + 0.5 * h, cur.w + 0.5 * h * k1.0)?;
            let k3 = transformed_system(p, cur.s + 0.5 * h, cur.w + 0.5 * h * k2.0)?;
            let k4 = transformed_system(p, cur.s + h, cur.w + h * k3.0)?;
            Ok((k1, k2, k3, k4))
        })();
        let (k1, k2, k3, k4) = match stages {
            Ok(k) => k,
            Err(cause) => {
                return Err(SddError::TransformedAborted {
                    s: cur.s,
                    cause: Box::new(cause),
                    partial: Box::new(traj),
                })
            }
        };
        cur = TransformedSample {
            s: if i + 1 == n { s_end } else { s0 + (i + 1) as f64 * h },
            w: cur.w + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            t: cur.t + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        };
        traj.samples.push(cur);
    }
    Ok(traj)
}
