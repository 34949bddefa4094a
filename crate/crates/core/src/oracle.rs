//! Exact solution families and the residual check that certifies them.
//!
//! Every closed form used here has the shape
//!
//! ```text
//! x(t) = intercept + slope * t + bend * max(t - τ, 0)^exponent
//! ```
//!
//! with `bend = 0` for red solutions, `bend < 0` for the yellow families and
//! `bend > 0` for the blue ones.

use std::collections::BTreeMap;

use serde::Serialize;
use twofloat::TwoFloat;

use crate::color::Color;
use crate::error::{Result, SddError};
use crate::model::{collapse, SddProblem};
use crate::solution::{linspace, SolutionCurve};

/// Upper end used when sampling a window that is unbounded above.
pub const WORKING_HORIZON: f64 = 2.0;

/// Residual bar for a verified closed form.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Points per window in residual sweeps.
pub const RESIDUAL_SAMPLES: usize = 100;

/// Working window of the Driver solutions (the yellow one stops at `t = 2`).
pub const DRIVER_HORIZON: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_finite()
    }

    pub fn capped(&self, cap: f64) -> Window {
        Window::new(self.lo, self.hi.min(cap))
    }

    pub fn intersect(&self, other: &Window) -> Window {
        Window::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosedFormSolution {
    pub label: String,
    pub family: Color,
    /// Length of the common red prefix.
    pub tau: f64,
    pub intercept: f64,
    pub slope: f64,
    pub bend: f64,
    pub exponent: f64,
    pub window: Window,
    /// Parameters the solution was instantiated from.
    pub params: BTreeMap<String, f64>,
}

impl ClosedFormSolution {
    pub fn line(label: impl Into<String>, family: Color, intercept: f64, slope: f64, window: Window) -> Self {
        Self {
            label: label.into(),
            family,
            tau: 0.0,
            intercept,
            slope,
            bend: 0.0,
            exponent: 1.0,
            window,
            params: BTreeMap::new(),
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.window.contains(t) {
            Ok(())
        } else {
            Err(SddError::OutsideRange {
                t,
                lo: self.window.lo,
                hi: self.window.hi,
            })
        }
    }

    fn power_term(&self, t: f64) -> f64 {
        if self.bend == 0.0 {
            return 0.0;
        }
        let sigma = collapse(TwoFloat::new_sub(t, self.tau));
        if sigma <= 0.0 {
            0.0
        } else {
            self.bend * sigma.powf(self.exponent)
        }
    }

    /// `x(t)` in compensated arithmetic; the red part `intercept + slope t`
    /// is exact.
    pub fn value_dd(&self, t: f64) -> Result<TwoFloat> {
        self.check(t)?;
        Ok(TwoFloat::new_mul(self.slope, t) + self.intercept + self.power_term(t))
    }

    /// Right-hand derivative, from the hand-coded formula.
    pub fn derivative_at(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let sigma = collapse(TwoFloat::new_sub(t, self.tau));
        if self.bend == 0.0 || sigma <= 0.0 {
            return Ok(self.slope);
        }
        Ok(self.slope + self.bend * self.exponent * sigma.powf(self.exponent - 1.0))
    }

    /// Declared color sequence: an optional red prefix of length `τ`
    /// followed by the family color.
    pub fn colors(&self) -> Vec<Color> {
        if self.family != Color::Red && self.tau > 0.0 && self.bend != 0.0 {
            vec![Color::Red, self.family]
        } else {
            vec![self.family]
        }
    }

    /// The solution rendered as exact nodes `(t, x, ẋ)` over its window
    /// (capped at `cap`), with `τ` inserted as a node when it is interior.
    pub fn render(&self, n: usize, cap: f64) -> Result<crate::steps::Trajectory> {
        let w = self.window.capped(cap);
        let mut ts = linspace(w.lo, w.hi, n.max(2));
        if self.tau > w.lo && self.tau < w.hi && !ts.contains(&self.tau) {
            ts.push(self.tau);
            ts.sort_by(f64::total_cmp);
        }
        let nodes = ts
            .into_iter()
            .map(|t| {
                Ok(crate::steps::Node {
                    t,
                    x: self.value(t)?,
                    xdot: self.derivative_at(t)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        crate::steps::Trajectory::from_nodes(self.label.clone(), nodes)
    }
}

impl SolutionCurve for ClosedFormSolution {
    fn span(&self) -> (f64, f64) {
        (self.window.lo, self.window.hi)
    }

    fn value(&self, t: f64) -> Result<f64> {
        Ok(collapse(self.value_dd(t)?))
    }

    fn derivative(&self, t: f64) -> Result<f64> {
        self.derivative_at(t)
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn source(&self) -> crate::solution::CurveSource {
        crate::solution::CurveSource::ClosedForm
    }
}

fn check_exponent(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(SddError::param(name, value, "must lie in (0, 1)"))
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SddError::param(name, value, "must be positive"))
    }
}

/// The two solutions of the 1963 Driver problem
/// `y' = -2 y(t - y) + 5`, `φ(θ) = |4 + θ|^{1/2} + 2`.
pub fn driver_solutions() -> Vec<ClosedFormSolution> {
    let window = Window::new(0.0, DRIVER_HORIZON);
    let red = ClosedFormSolution::line("driver-red", Color::Red, 4.0, 1.0, window);
    let yellow = ClosedFormSolution {
        label: "driver-yellow".into(),
        bend: -1.0,
        exponent: 2.0,
        family: Color::Yellow,
        ..red.clone()
    };
    vec![red, yellow]
}

/// The three solutions `t + 1`, `t + 1 ∓ t^{1/(1-α)}` of the 2010 example.
/// Each window keeps the delayed argument inside `[-2, 0]`, which ends at
/// `t = 1` for both power branches.
pub fn example2_solutions(alpha: f64) -> Result<Vec<ClosedFormSolution>> {
    check_exponent("alpha", alpha)?;
    let exponent = 1.0 / (1.0 - alpha);
    let window = Window::new(0.0, 1.0);
    let params = BTreeMap::from([("alpha".to_string(), alpha)]);
    let red = ClosedFormSolution {
        params,
        ..ClosedFormSolution::line("example2-red", Color::Red, 1.0, 1.0, window)
    };
    let yellow = ClosedFormSolution {
        label: "example2-yellow".into(),
        family: Color::Yellow,
        bend: -1.0,
        exponent,
        ..red.clone()
    };
    let blue = ClosedFormSolution {
        label: "example2-blue".into(),
        family: Color::Blue,
        bend: 1.0,
        exponent,
        ..red.clone()
    };
    Ok(vec![red, yellow, blue])
}

/// Parameters of the key example: `φ` is `-1 - B(-1-θ)^β` left of `-1`,
/// `-1 + A(θ+1)^α` on `(-1, -δ]`, and a linear connector to `φ(0) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KeyParams {
    /// `A`
    pub right_coeff: f64,
    /// `α`
    pub right_exponent: f64,
    /// `B`
    pub left_coeff: f64,
    /// `β`
    pub left_exponent: f64,
    /// `δ`: the connector starts at `-δ`.
    pub connector_width: f64,
    /// `h`
    pub horizon: f64,
}

impl Default for KeyParams {
    fn default() -> Self {
        Self {
            right_coeff: 1.0,
            right_exponent: 0.5,
            left_coeff: 1.0,
            left_exponent: 0.5,
            connector_width: 0.5,
            horizon: 2.0,
        }
    }
}

impl KeyParams {
    pub fn new(right_coeff: f64, right_exponent: f64, left_coeff: f64, left_exponent: f64) -> Self {
        Self {
            right_coeff,
            right_exponent,
            left_coeff,
            left_exponent,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("A", self.right_coeff)?;
        check_positive("B", self.left_coeff)?;
        check_exponent("alpha", self.right_exponent)?;
        check_exponent("beta", self.left_exponent)?;
        check_exponent("delta", self.connector_width)?;
        if !(self.horizon > 1.0) || !self.horizon.is_finite() {
            return Err(SddError::param("h", self.horizon, "must exceed 1 so that -1 is interior"));
        }
        Ok(())
    }

    /// `C = (A (1-α))^{1/(1-α)}`.
    pub fn yellow_coeff(&self) -> f64 {
        let p = 1.0 / (1.0 - self.right_exponent);
        (self.right_coeff * (1.0 - self.right_exponent)).powf(p)
    }

    /// `D = (B (1-β))^{1/(1-β)}`.
    pub fn blue_coeff(&self) -> f64 {
        let q = 1.0 / (1.0 - self.left_exponent);
        (self.left_coeff * (1.0 - self.left_exponent)).powf(q)
    }

    pub fn yellow_exponent(&self) -> f64 {
        1.0 / (1.0 - self.right_exponent)
    }

    pub fn blue_exponent(&self) -> f64 {
        1.0 / (1.0 - self.left_exponent)
    }

    fn as_map(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("A".to_string(), self.right_coeff),
            ("alpha".to_string(), self.right_exponent),
            ("B".to_string(), self.left_coeff),
            ("beta".to_string(), self.left_exponent),
            ("delta".to_string(), self.connector_width),
            ("h".to_string(), self.horizon),
        ])
    }
}

/// Largest validity window of a key-example family member. The yellow
/// branch keeps `s(t) = -1 + C(t-τ)^p` inside `(-1, -δ]`, the blue branch
/// keeps `s(t) = -1 - D(t-τ)^q` inside `[-h, -1)`; the red line has
/// `s ≡ -1` and never leaves.
pub fn family_window(params: &KeyParams, family: Color, tau: f64) -> Window {
    let (coeff, exponent, room) = match family {
        Color::Red => return Window::new(0.0, f64::INFINITY),
        Color::Yellow => (
            params.yellow_coeff(),
            params.yellow_exponent(),
            1.0 - params.connector_width,
        ),
        Color::Blue => (params.blue_coeff(), params.blue_exponent(), params.horizon - 1.0),
    };
    let mut hi = tau + (room / coeff).powf(1.0 / exponent);
    // rounding in the power and in `tau + span` can overshoot by an ulp
    while coeff * collapse(TwoFloat::new_sub(hi, tau)).powf(exponent) > room {
        hi = f64::from_bits(hi.to_bits() - 1);
    }
    Window::new(0.0, hi)
}

/// One member of the key-example solution set: the red line `1 + t`, or the
/// yellow / blue family member branching off it at `τ`.
pub fn key_family(params: &KeyParams, family: Color, tau: f64) -> Result<ClosedFormSolution> {
    params.validate()?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(SddError::param("tau", tau, "must be a finite non-negative time"));
    }
    let mut map = params.as_map();
    map.insert("tau".into(), tau);
    let window = family_window(params, family, tau);
    let (label, bend, exponent) = match family {
        Color::Red => ("key-red".to_string(), 0.0, 1.0),
        Color::Yellow => {
            map.insert("C".into(), params.yellow_coeff());
            (format!("key-yellow-tau{tau}"), -params.yellow_coeff(), params.yellow_exponent())
        }
        Color::Blue => {
            map.insert("D".into(), params.blue_coeff());
            (format!("key-blue-tau{tau}"), params.blue_coeff(), params.blue_exponent())
        }
    };
    Ok(ClosedFormSolution {
        label,
        family,
        tau: if family == Color::Red { 0.0 } else { tau },
        intercept: 1.0,
        slope: 1.0,
        bend,
        exponent,
        window,
        params: map,
    })
}

/// The red line and both families for every `τ` in `taus`.
pub fn key_solutions(params: &KeyParams, taus: &[f64]) -> Result<Vec<ClosedFormSolution>> {
    let mut out = vec![key_family(params, Color::Red, 0.0)?];
    for &tau in taus {
        out.push(key_family(params, Color::Yellow, tau)?);
        out.push(key_family(params, Color::Blue, tau)?);
    }
    Ok(out)
}

/// `ẋ(t) - RHS(t)` for a candidate. The delayed argument is formed in
/// compensated arithmetic and read from `φ` when `s <= 0`, otherwise from
/// the candidate itself.
pub fn residual(p: &SddProblem, candidate: &ClosedFormSolution, t: f64) -> Result<f64> {
    let x = candidate.value_dd(t)?;
    let s = TwoFloat::from(t) - p.delay.eval_dd(x)?;
    let lo = p.phi.lo();
    let delayed = if s < lo {
        return Err(SddError::BelowHorizon { s: collapse(s), lo });
    } else if s <= 0.0 {
        p.phi.eval_dd(s)?
    } else {
        candidate.value(collapse(s))?
    };
    Ok(candidate.derivative_at(t)? - p.rhs.eval(collapse(x), delayed))
}

/// Largest `|residual|` over `n` equispaced points of the candidate's window
/// (capped at `cap` when the window is unbounded).
pub fn max_residual(p: &SddProblem, candidate: &ClosedFormSolution, n: usize, cap: f64) -> Result<f64> {
    let w = candidate.window.capped(cap);
    linspace(w.lo, w.hi, n)
        .into_iter()
        .try_fold(0.0f64, |acc, t| Ok(acc.max(residual(p, candidate, t)?.abs())))
}
