//! Problems, delays and piecewise initial functions.
//!
//! Every evaluation has two flavours: a plain `f64` one and a compensated one
//! taking a [`TwoFloat`] argument. The compensated path matters near a
//! non-Lipschitz point `s0` of `φ`: the delayed argument `t - g(x(t))` is
//! formed by cancellation, and with a Hölder exponent of 1/4 a single ulp of
//! error in `s - s0` already moves `φ(s)` by about `1e-4`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use twofloat::TwoFloat;

use crate::error::{Result, SddError};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PairFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Step of the central difference used when a delay has no analytic derivative.
pub const FD_STEP: f64 = 1e-7;

/// Continuity tolerance at segment junctions.
pub const JUNCTION_TOL: f64 = 1e-12;

pub(crate) fn collapse(x: TwoFloat) -> f64 {
    x.hi() + x.lo()
}

#[derive(Clone)]
pub enum DelayKind {
    /// `g(x) = |x|`, kink at 0.
    Abs,
    /// `g(x) = slope * x + offset`; a constant delay has `slope = 0`.
    Linear { slope: f64, offset: f64 },
    /// `g(x) = x^2`.
    Quadratic,
    /// Piecewise-linear interpolation through `(x, g)` knots, extended
    /// linearly beyond the outer knots. Knots are kinks.
    Table { knots: Vec<(f64, f64)> },
    /// Library-only delay given by closures.
    Custom {
        name: String,
        eval: ScalarFn,
        derivative: Option<ScalarFn>,
    },
}

impl fmt::Debug for DelayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayKind::Abs => write!(f, "Abs"),
            DelayKind::Linear { slope, offset } => write!(f, "Linear({slope}, {offset})"),
            DelayKind::Quadratic => write!(f, "Quadratic"),
            DelayKind::Table { knots } => write!(f, "Table({} knots)", knots.len()),
            DelayKind::Custom {
                name, derivative, ..
            } => write!(f, "Custom({name}, analytic derivative: {})", derivative.is_some()),
        }
    }
}

/// The state-dependent delay `g` together with its admissible range `[0, bound]`.
///
/// `bound` may be infinite: for delays such as `|x|` the meaningful limit is
/// that the delayed argument stays above `-h`, which is enforced wherever the
/// history is read.
#[derive(Clone, Debug)]
pub struct DelaySpec {
    pub kind: DelayKind,
    pub bound: f64,
}

impl DelaySpec {
    pub fn new(kind: DelayKind, bound: f64) -> Self {
        Self { kind, bound }
    }

    pub fn abs() -> Self {
        Self::new(DelayKind::Abs, f64::INFINITY)
    }

    pub fn linear(slope: f64, offset: f64) -> Self {
        Self::new(DelayKind::Linear { slope, offset }, f64::INFINITY)
    }

    pub fn constant(r: f64) -> Self {
        Self::new(DelayKind::Linear { slope: 0.0, offset: r }, r)
    }

    pub fn quadratic() -> Self {
        Self::new(DelayKind::Quadratic, f64::INFINITY)
    }

    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(SddError::param("knots", knots.len() as f64, "need at least two knots"));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(SddError::param("knots", 0.0, "abscissae must be strictly increasing"));
        }
        Ok(Self::new(DelayKind::Table { knots }, f64::INFINITY))
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: Option<ScalarFn>,
    ) -> Self {
        Self::new(
            DelayKind::Custom {
                name: name.into(),
                eval: Arc::new(eval),
                derivative,
            },
            f64::INFINITY,
        )
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    fn raw(&self, x: f64) -> f64 {
        match &self.kind {
            DelayKind::Abs => x.abs(),
            DelayKind::Linear { slope, offset } => slope * x + offset,
            DelayKind::Quadratic => x * x,
            DelayKind::Table { knots } => table_eval(knots, x),
            DelayKind::Custom { eval, .. } => eval(x),
        }
    }

    fn check_range(&self, x: f64, value: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 || value > self.bound {
            return Err(SddError::DelayRange {
                x,
                value,
                bound: self.bound,
            });
        }
        Ok(())
    }

    /// `g(x)`, checked against `[0, bound]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let value = self.raw(x);
        self.check_range(x, value)?;
        Ok(value)
    }

    /// `g(x)` for a compensated argument. Closed-form kinds keep the low
    /// word; tables and closures are evaluated at the rounded argument.
    pub fn eval_dd(&self, x: TwoFloat) -> Result<TwoFloat> {
        let value = match &self.kind {
            DelayKind::Abs => x.abs(),
            DelayKind::Linear { slope, offset } => x * *slope + *offset,
            DelayKind::Quadratic => x * x,
            DelayKind::Table { .. } | DelayKind::Custom { .. } => {
                TwoFloat::from(self.raw(collapse(x)))
            }
        };
        self.check_range(collapse(x), collapse(value))?;
        Ok(value)
    }

    /// `g'(x)`: analytic where known, otherwise a central difference with
    /// step [`FD_STEP`]. Evaluation at a kink is an error.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        match &self.kind {
            DelayKind::Abs => {
                if x == 0.0 {
                    Err(SddError::NonDifferentiable { x })
                } else {
                    Ok(x.signum())
                }
            }
            DelayKind::Linear { slope, .. } => Ok(*slope),
            DelayKind::Quadratic => Ok(2.0 * x),
            DelayKind::Table { knots } => {
                if knots.iter().any(|&(k, _)| k == x) {
                    Err(SddError::NonDifferentiable { x })
                } else {
                    // piecewise linear: the slope of the containing piece is exact
                    Ok(table_slope(knots, x))
                }
            }
            DelayKind::Custom { derivative, .. } => match derivative {
                Some(d) => Ok(d(x)),
                None => self.fd_derivative(x),
            },
        }
    }

    /// Central-difference derivative, independent of any analytic formula.
    pub fn fd_derivative(&self, x: f64) -> Result<f64> {
        if self.kinks().iter().any(|&k| (k - x).abs() <= FD_STEP) {
            return Err(SddError::NonDifferentiable { x });
        }
        Ok((self.raw(x + FD_STEP) - self.raw(x - FD_STEP)) / (2.0 * FD_STEP))
    }

    pub fn has_analytic_derivative(&self) -> bool {
        !matches!(
            self.kind,
            DelayKind::Custom {
                derivative: None,
                ..
            }
        )
    }

    /// Known points of non-differentiability.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.kind {
            DelayKind::Abs => vec![0.0],
            DelayKind::Table { knots } => knots.iter().map(|k| k.0).collect(),
            _ => Vec::new(),
        }
    }

    /// Coefficients `(a, b)` with `g(x) = a x + b` on `[lo, hi]`, when `g`
    /// is affine there.
    pub fn affine_on(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        match &self.kind {
            DelayKind::Abs if lo >= 0.0 => Some((1.0, 0.0)),
            DelayKind::Abs if hi <= 0.0 => Some((-1.0, 0.0)),
            DelayKind::Linear { slope, offset } => Some((*slope, *offset)),
            DelayKind::Table { knots } => {
                let inside = knots.iter().any(|&(k, _)| k > lo && k < hi);
                (!inside).then(|| {
                    let a = table_slope(knots, 0.5 * (lo + hi));
                    (a, table_eval(knots, lo) - a * lo)
                })
            }
            _ => None,
        }
    }
}

fn table_piece(knots: &[(f64, f64)], x: f64) -> usize {
    let i = knots.partition_point(|k| k.0 <= x);
    i.clamp(1, knots.len() - 1) - 1
}

fn table_slope(knots: &[(f64, f64)], x: f64) -> f64 {
    let i = table_piece(knots, x);
    let (x0, g0) = knots[i];
    let (x1, g1) = knots[i + 1];
    (g1 - g0) / (x1 - x0)
}

fn table_eval(knots: &[(f64, f64)], x: f64) -> f64 {
    let i = table_piece(knots, x);
    let (x0, g0) = knots[i];
    g0 + table_slope(knots, x) * (x - x0)
}

/// Shape of one piece of an initial function.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    /// `value - coeff * (anchor - θ)^exponent`, for `θ <= anchor`.
    PowerLeft {
        anchor: f64,
        value: f64,
        coeff: f64,
        exponent: f64,
    },
    /// `value + coeff * (θ - anchor)^exponent`, for `θ >= anchor`.
    PowerRight {
        anchor: f64,
        value: f64,
        coeff: f64,
        exponent: f64,
    },
    /// `value + coeff * |θ - anchor|^exponent`, anchor possibly interior.
    AbsPower {
        anchor: f64,
        value: f64,
        coeff: f64,
        exponent: f64,
    },
    Linear {
        intercept: f64,
        slope: f64,
    },
    Constant {
        value: f64,
    },
    /// Coefficients in ascending powers of `θ`.
    Polynomial {
        coeffs: Vec<f64>,
    },
}

impl Shape {
    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_dd(TwoFloat::from(theta))
    }

    /// Evaluates with the offset from the anchor formed in compensated
    /// arithmetic, so `θ` just beside the anchor keeps its distance.
    pub fn eval_dd(&self, theta: TwoFloat) -> f64 {
        match self {
            Shape::PowerLeft {
                anchor,
                value,
                coeff,
                exponent,
            } => {
                let d = collapse(*anchor - theta).max(0.0);
                value - coeff * d.powf(*exponent)
            }
            Shape::PowerRight {
                anchor,
                value,
                coeff,
                exponent,
            } => {
                let d = collapse(theta - *anchor).max(0.0);
                value + coeff * d.powf(*exponent)
            }
            Shape::AbsPower {
                anchor,
                value,
                coeff,
                exponent,
            } => {
                let d = collapse(theta - *anchor).abs();
                value + coeff * d.powf(*exponent)
            }
            Shape::Linear { intercept, slope } => collapse(theta * *slope + *intercept),
            Shape::Constant { value } => *value,
            Shape::Polynomial { coeffs } => {
                let acc = coeffs
                    .iter()
                    .rev()
                    .fold(TwoFloat::from(0.0), |acc, &c| acc * theta + c);
                collapse(acc)
            }
        }
    }

    pub fn anchor(&self) -> Option<f64> {
        match self {
            Shape::PowerLeft { anchor, .. }
            | Shape::PowerRight { anchor, .. }
            | Shape::AbsPower { anchor, .. } => Some(*anchor),
            _ => None,
        }
    }

    fn power_params(&self) -> Option<(f64, f64)> {
        match self {
            Shape::PowerLeft { coeff, exponent, .. }
            | Shape::PowerRight { coeff, exponent, .. }
            | Shape::AbsPower { coeff, exponent, .. } => Some((*coeff, *exponent)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub shape: Shape,
}

impl Segment {
    pub fn new(lo: f64, hi: f64, shape: Shape) -> Self {
        Self { lo, hi, shape }
    }
}

/// A violated invariant of a problem or initial function.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum Violation {
    NoSegments,
    BeyondHorizon { lo: f64 },
    EmptySegment { index: usize, lo: f64, hi: f64 },
    Gap { from: f64, to: f64 },
    Overlap { from: f64, to: f64 },
    DoesNotEndAtZero { end: f64 },
    Discontinuity { at: f64, jump: f64 },
    Exponent { index: usize, value: f64 },
    Coefficient { index: usize, value: f64 },
    PowerSide { index: usize, anchor: f64 },
    DelayRange { theta: f64, x: f64, detail: String },
    InitialDelayedArgument { s0: f64, lo: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoSegments => write!(f, "no segments"),
            Violation::BeyondHorizon { lo } => write!(f, "coverage starts at {lo}, below -h"),
            Violation::EmptySegment { index, lo, hi } => {
                write!(f, "segment {index} has empty interval [{lo}, {hi}]")
            }
            Violation::Gap { from, to } => write!(f, "gap: ({from}, {to}) is not covered"),
            Violation::Overlap { from, to } => write!(f, "overlap on ({from}, {to})"),
            Violation::DoesNotEndAtZero { end } => write!(f, "coverage ends at {end}, not 0"),
            Violation::Discontinuity { at, jump } => write!(f, "jump of {jump} at {at}"),
            Violation::Exponent { index, value } => {
                write!(f, "segment {index}: exponent {value} not in (0, 1)")
            }
            Violation::Coefficient { index, value } => {
                write!(f, "segment {index}: coefficient {value} not positive")
            }
            Violation::PowerSide { index, anchor } => {
                write!(f, "segment {index} extends to the wrong side of its anchor {anchor}")
            }
            Violation::DelayRange { theta, x, detail } => {
                write!(f, "g(φ({theta})) = g({x}): {detail}")
            }
            Violation::InitialDelayedArgument { s0, lo } => {
                write!(f, "initial delayed argument {s0} below -h = {lo}")
            }
        }
    }
}

/// Continuous initial function on `[-h, 0]`, stored as ordered segments.
/// At a junction the right-hand segment is used.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitialFunction {
    horizon: f64,
    segments: Vec<Segment>,
}

impl InitialFunction {
    /// Builds and validates.
    pub fn new(horizon: f64, segments: Vec<Segment>) -> Result<Self> {
        let phi = Self::from_segments_unchecked(horizon, segments);
        match phi.violations().first() {
            None => Ok(phi),
            Some(v) => Err(SddError::InvalidInitialFunction(v.to_string())),
        }
    }

    /// Keeps the segments as given (sorted by left end) so that defects can
    /// be reported by [`InitialFunction::violations`].
    pub fn from_segments_unchecked(horizon: f64, mut segments: Vec<Segment>) -> Self {
        segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        Self { horizon, segments }
    }

    pub fn constant(h: f64, value: f64) -> Result<Self> {
        Self::new(h, vec![Segment::new(-h, 0.0, Shape::Constant { value })])
    }

    pub fn linear(h: f64, intercept: f64, slope: f64) -> Result<Self> {
        Self::new(h, vec![Segment::new(-h, 0.0, Shape::Linear { intercept, slope })])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Length of the initial interval.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn lo(&self) -> f64 {
        -self.horizon()
    }

    fn locate(&self, theta: TwoFloat) -> Result<&Segment> {
        let t = collapse(theta);
        let lo = self.lo();
        if self.segments.is_empty() || theta < lo || theta > 0.0 {
            return Err(SddError::OutOfDomain { theta: t, lo });
        }
        let i = self.segments.partition_point(|s| s.lo <= theta);
        let seg = &self.segments[i.max(1) - 1];
        if theta > seg.hi {
            return Err(SddError::NotCovered { theta: t });
        }
        Ok(seg)
    }

    /// `φ(θ)` for `θ ∈ [-h, 0]`.
    pub fn eval(&self, theta: f64) -> Result<f64> {
        self.eval_dd(TwoFloat::from(theta))
    }

    pub fn eval_dd(&self, theta: TwoFloat) -> Result<f64> {
        Ok(self.locate(theta)?.shape.eval_dd(theta))
    }

    /// Interior junctions between consecutive segments.
    pub fn junctions(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.lo).collect()
    }

    /// Smallest and largest sampled value of `φ`.
    pub fn range_hull(&self, samples: usize) -> Result<(f64, f64)> {
        let lo = self.lo();
        let n = samples.max(2);
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut points: Vec<f64> = (0..n).map(|i| lo + (0.0 - lo) * i as f64 / (n - 1) as f64).collect();
        points.extend(self.junctions());
        points.extend(self.segments.iter().filter_map(|s| s.shape.anchor()));
        for theta in points.into_iter().filter(|t| *t >= lo && *t <= 0.0) {
            let v = self.eval(theta)?;
            min = min.min(v);
            max = max.max(v);
        }
        Ok((min, max))
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let segs = &self.segments;
        if segs.is_empty() {
            out.push(Violation::NoSegments);
            return out;
        }
        let lo = self.lo();
        if segs[0].lo > lo {
            out.push(Violation::Gap {
                from: lo,
                to: segs[0].lo,
            });
        } else if segs[0].lo < lo {
            out.push(Violation::BeyondHorizon { lo: segs[0].lo });
        }
        for (index, seg) in segs.iter().enumerate() {
            if !(seg.lo < seg.hi) {
                out.push(Violation::EmptySegment {
                    index,
                    lo: seg.lo,
                    hi: seg.hi,
                });
            }
            if let Some((coeff, exponent)) = seg.shape.power_params() {
                if !(exponent > 0.0 && exponent < 1.0) {
                    out.push(Violation::Exponent {
                        index,
                        value: exponent,
                    });
                }
                if !(coeff > 0.0) {
                    out.push(Violation::Coefficient { index, value: coeff });
                }
            }
            match seg.shape {
                Shape::PowerLeft { anchor, .. } if seg.hi > anchor => {
                    out.push(Violation::PowerSide { index, anchor })
                }
                Shape::PowerRight { anchor, .. } if seg.lo < anchor => {
                    out.push(Violation::PowerSide { index, anchor })
                }
                _ => {}
            }
        }
        for pair in segs.windows(2) {
            let (left, right) = (&pair[0], &pair[1]);
            if right.lo > left.hi {
                out.push(Violation::Gap {
                    from: left.hi,
                    to: right.lo,
                });
            } else if right.lo < left.hi {
                out.push(Violation::Overlap {
                    from: right.lo,
                    to: left.hi,
                });
            } else {
                let jump = (left.shape.eval(left.hi) - right.shape.eval(right.lo)).abs();
                if !(jump <= JUNCTION_TOL) {
                    out.push(Violation::Discontinuity { at: right.lo, jump });
                }
            }
        }
        let end = segs.last().map_or(0.0, |s| s.hi);
        if end != 0.0 {
            if end < 0.0 {
                out.push(Violation::Gap { from: end, to: 0.0 });
            } else {
                out.push(Violation::DoesNotEndAtZero { end });
            }
        }
        out
    }
}

#[derive(Clone)]
pub enum Rhs {
    /// `x' = f(x(s))`.
    PureDelay(ScalarFn),
    /// `x' = F(x(t), x(s))`.
    Full(PairFn),
}

impl Rhs {
    pub fn pure(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Rhs::PureDelay(Arc::new(f))
    }

    pub fn full(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Rhs::Full(Arc::new(f))
    }

    /// `F(x, y)`; a pure-delay right-hand side ignores `x`.
    pub fn eval(&self, x: f64, delayed: f64) -> f64 {
        match self {
            Rhs::PureDelay(f) => f(delayed),
            Rhs::Full(f) => f(x, delayed),
        }
    }

    pub fn is_pure_delay(&self) -> bool {
        matches!(self, Rhs::PureDelay(_))
    }
}

impl fmt::Debug for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rhs::PureDelay(_) => write!(f, "PureDelay(..)"),
            Rhs::Full(_) => write!(f, "Full(..)"),
        }
    }
}

/// A complete Cauchy problem.
#[derive(Clone, Debug)]
pub struct SddProblem {
    pub name: String,
    pub delay: DelaySpec,
    pub rhs: Rhs,
    pub phi: InitialFunction,
    /// Whether `F` is declared locally Lipschitz in its first argument.
    /// Always true for pure-delay right-hand sides.
    pub lipschitz_in_state: bool,
}

impl SddProblem {
    pub fn new(name: impl Into<String>, delay: DelaySpec, rhs: Rhs, phi: InitialFunction) -> Self {
        let lipschitz_in_state = rhs.is_pure_delay();
        Self {
            name: name.into(),
            delay,
            rhs,
            phi,
            lipschitz_in_state,
        }
    }

    pub fn declare_lipschitz(mut self) -> Self {
        self.lipschitz_in_state = true;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.phi.horizon()
    }

    /// `s0 = -g(φ(0))`.
    pub fn initial_delayed_argument(&self) -> Result<f64> {
        Ok(-self.delay.eval(self.phi.eval(0.0)?)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Number of `θ` samples used when checking the delay on `φ`.
const VALIDATION_SAMPLES: usize = 201;

/// Lists violated invariants; an empty report means the problem is usable.
pub fn validate_problem(p: &SddProblem) -> ValidationReport {
    let mut violations = p.phi.violations();
    if violations.iter().any(|v| matches!(v, Violation::NoSegments)) {
        return ValidationReport { violations };
    }
    let lo = p.phi.lo();
    for i in 0..VALIDATION_SAMPLES {
        let theta = lo + (0.0 - lo) * i as f64 / (VALIDATION_SAMPLES - 1) as f64;
        let Ok(x) = p.phi.eval(theta) else { continue };
        if let Err(e) = p.delay.eval(x) {
            violations.push(Violation::DelayRange {
                theta,
                x,
                detail: e.to_string(),
            });
        }
    }
    if let Ok(s0) = p.initial_delayed_argument() {
        if s0 < lo {
            violations.push(Violation::InitialDelayedArgument { s0, lo });
        }
    }
    ValidationReport { violations }
}
