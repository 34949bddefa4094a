//! Coloring by the delayed argument, and one-sided Hölder behaviour of `φ`.

use serde::{Deserialize, Serialize};

use crate::color::Color;
use crate::error::{Result, SddError};
use crate::model::{DelaySpec, InitialFunction};
use crate::solution::SolutionCurve;
use crate::steps::Trajectory;

pub const DEFAULT_TOL_RED: f64 = 1e-8;

/// Red tolerance for closed forms rendered with exact derivatives. Branches
/// leave the red line tangentially, `ṡ ~ (t-τ)^{q-1}`, so near `τ` they
/// fall under [`DEFAULT_TOL_RED`] for a while.
pub const EXACT_TOL_RED: f64 = 1e-14;

/// Difference-quotient scales probed by [`find_nonlipschitz`].
const QUOTIENT_SCALES: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Growth of the difference quotient across [`QUOTIENT_SCALES`] that counts
/// as blow-up. A Hölder exponent `α` grows it by `10^{4(1-α)}`, so points with
/// `α` up to about 0.92 are caught; Lipschitz points stay near 1.
const BLOWUP_RATIO: f64 = 2.0;

/// Minimum number of samples in a Hölder fit.
pub const HOLDER_MIN_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub color: Color,
}

/// `ṡ(t) = 1 - g'(x(t)) ẋ(t)`.
pub fn s_dot<C: SolutionCurve + ?Sized>(curve: &C, delay: &DelaySpec, t: f64) -> Result<f64> {
    let x = curve.value(t)?;
    Ok(1.0 - delay.derivative(x)? * curve.derivative(t)?)
}

pub fn color_of(s_dot: f64, tol_red: f64) -> Color {
    if s_dot.abs() <= tol_red {
        Color::Red
    } else if s_dot > 0.0 {
        Color::Yellow
    } else {
        Color::Blue
    }
}

/// Partitions the time range of `traj` into maximal single-color runs.
///
/// Each node is colored by `ṡ` there; the interval `(t_i, t_{i+1}]` takes the
/// color of its right node, matching the right-hand derivative convention,
/// so a branch leaving the red line at a node `τ` is split exactly at `τ`.
pub fn classify(traj: &Trajectory, delay: &DelaySpec, tol_red: f64) -> Result<Vec<ColorSegment>> {
    if !(tol_red > 0.0) {
        return Err(SddError::param("tol_red", tol_red, "must be positive"));
    }
    let nodes = traj.nodes();
    if nodes.len() < 2 {
        return Err(SddError::param(
            "nodes",
            nodes.len() as f64,
            "need at least two nodes to color an interval",
        ));
    }
    let mut out: Vec<ColorSegment> = Vec::new();
    for pair in nodes.windows(2) {
        let right = &pair[1];
        let sd = 1.0 - delay.derivative(right.x)? * right.xdot;
        let color = color_of(sd, tol_red);
        match out.last_mut() {
            Some(last) if last.color == color => last.t_end = right.t,
            _ => out.push(ColorSegment {
                t_start: pair[0].t,
                t_end: right.t,
                color,
            }),
        }
    }
    Ok(out)
}

pub fn color_sequence(segments: &[ColorSegment]) -> Vec<Color> {
    segments.iter().map(|s| s.color).collect()
}

fn quotients(phi: &InitialFunction, at: f64, dir: f64) -> Option<Vec<f64>> {
    let base = phi.eval(at).ok()?;
    QUOTIENT_SCALES
        .iter()
        .map(|&d| phi.eval(at + dir * d).ok().map(|v| (v - base).abs() / d))
        .collect()
}

fn blows_up(q: &[f64]) -> bool {
    q[0] > 0.0 && q.windows(2).all(|w| w[1] > w[0]) && q[q.len() - 1] / q[0] >= BLOWUP_RATIO
}

/// Junctions and anchors of `φ` where a one-sided difference quotient grows
/// without bound as the scale shrinks from `1e-2` to `1e-6`. Sorted.
pub fn find_nonlipschitz(phi: &InitialFunction) -> Vec<f64> {
    let lo = phi.lo();
    let mut candidates: Vec<f64> = phi
        .junctions()
        .into_iter()
        .chain(phi.segments().iter().filter_map(|s| s.shape.anchor()))
        .filter(|c| *c >= lo && *c <= 0.0)
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    candidates
        .into_iter()
        .filter(|&c| {
            [-1.0, 1.0]
                .iter()
                .filter_map(|&dir| quotients(phi, c, dir))
                .any(|q| blows_up(&q))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

/// Fitted `|φ(s0 ± d) - φ(s0)| ≈ coeff d^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub side: Side,
    pub coeff: f64,
    /// Capped at 1: a steeper fit only says the point is Lipschitz there.
    pub exponent: f64,
    /// Root-mean-square residual of the log-log fit.
    pub fit_residual: f64,
    pub samples: usize,
}

/// Least-squares fit of `log|φ(s0 ± d_k) - φ(s0)|` against `log d_k` over
/// half-decade scales `d_k = 10^{-1}, 10^{-1.5}, …, 10^{-5}`.
pub fn estimate_holder(phi: &InitialFunction, s0: f64, side: Side) -> Result<HolderEstimate> {
    let lo = phi.lo();
    if !(s0 > lo && s0 < 0.0) {
        return Err(SddError::OutOfDomain { theta: s0, lo });
    }
    let base = phi.eval(s0)?;
    let mut pts = Vec::new();
    for k in 0..9 {
        let d = 10f64.powf(-1.0 - 0.5 * k as f64);
        let theta = s0 + side.sign() * d;
        if theta < lo || theta > 0.0 {
            continue;
        }
        let diff = (phi.eval(theta)? - base).abs();
        if diff == 0.0 {
            return Err(SddError::DegenerateFit(format!(
                "φ is locally constant on the {side:?} of {s0}"
            )));
        }
        pts.push((d.ln(), diff.ln()));
    }
    if pts.len() < HOLDER_MIN_SAMPLES {
        return Err(SddError::DegenerateFit(format!(
            "only {} scales fit inside [-h, 0] on the {side:?} of {s0}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(HolderEstimate {
        side,
        coeff: intercept.exp(),
        exponent: slope.min(1.0),
        fit_residual: (rss / n).sqrt(),
        samples: pts.len(),
    })
}
