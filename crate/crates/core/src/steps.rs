//! Fixed-step method of steps with cubic-Hermite dense output.
//!
//! The state is advanced in compensated (double-double) arithmetic. Near a
//! branch point the distance between branches starts far below one ulp of
//! `x`, e.g. `C ε^4 ≈ 2e-20` for `ε = 1e-4`; with a plain `f64` state the seed
//! is rounded away and the integrator drifts onto whichever branch the
//! rounding noise favours.

use std::fmt;
use std::io::Write;

use serde::Serialize;
use twofloat::TwoFloat;

use crate::color::Color;
use crate::error::{Result, SddError};
use crate::model::{collapse, DelaySpec, InitialFunction, SddProblem};
use crate::oracle::{family_window, KeyParams};
use crate::solution::SolutionCurve;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Node {
    pub t: f64,
    pub x: f64,
    /// Right-hand derivative, i.e. the right-hand side at `(t, x)`.
    pub xdot: f64,
}

fn hermite(a: &Node, b: &Node, t: f64) -> (f64, f64) {
    let h = b.t - a.t;
    let u = (t - a.t) / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    let value = h00 * a.x + h10 * h * a.xdot + h01 * b.x + h11 * h * b.xdot;
    let d00 = (6.0 * u2 - 6.0 * u) / h;
    let d10 = 3.0 * u2 - 4.0 * u + 1.0;
    let d01 = (-6.0 * u2 + 6.0 * u) / h;
    let d11 = 3.0 * u2 - 2.0 * u;
    let slope = d00 * a.x + d10 * a.xdot + d01 * b.x + d11 * b.xdot;
    (value, slope)
}

/// Dense numerical solution. Arguments `<= 0` are served by `φ`.
#[derive(Clone)]
pub struct Trajectory {
    problem: String,
    nodes: Vec<Node>,
    step: f64,
    extrapolations: usize,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("problem", &self.problem)
            .field("nodes", &self.nodes.len())
            .field("span", &self.span())
            .field("extrapolations", &self.extrapolations)
            .finish()
    }
}

impl Trajectory {
    /// Builds a trajectory from explicit nodes, e.g. an exact solution
    /// rendered on a grid. Times must be strictly increasing.
    pub fn from_nodes(problem: impl Into<String>, nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(SddError::param("nodes", 0.0, "a trajectory needs at least one node"));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1].t > w[0].t)) {
            return Err(SddError::param("t", w[1].t, "node times must be strictly increasing"));
        }
        let step = nodes
            .windows(2)
            .map(|w| w[1].t - w[0].t)
            .fold(0.0, f64::max);
        Ok(Self {
            problem: problem.into(),
            nodes,
            step,
            extrapolations: 0,
        })
    }

    pub fn problem(&self) -> &str {
        &self.problem
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0].t
    }

    pub fn t_last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].t
    }

    /// Number of stage evaluations that had to extrapolate the last
    /// committed Hermite piece (vanishing delay).
    pub fn extrapolations(&self) -> usize {
        self.extrapolations
    }

    fn piece(&self, t: f64) -> (&Node, &Node) {
        let i = self.nodes.partition_point(|n| n.t <= t);
        let i = i.clamp(1, self.nodes.len() - 1);
        (&self.nodes[i - 1], &self.nodes[i])
    }

    /// Hermite value and slope on `[t0, t_last]`, or on the extrapolated
    /// last piece when `extrapolate` is set.
    fn interpolate(&self, t: f64) -> (f64, f64) {
        if self.nodes.len() == 1 {
            let n = &self.nodes[0];
            return (n.x + n.xdot * (t - n.t), n.xdot);
        }
        if let Some(n) = self.nodes.iter().find(|n| n.t == t) {
            return (n.x, n.xdot);
        }
        let (a, b) = self.piece(t);
        hermite(a, b, t)
    }

    /// Writes `t,x,xdot,s` rows with `s = t - g(x)`.
    pub fn write_csv<W: Write>(&self, delay: &DelaySpec, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            t: f64,
            x: f64,
            xdot: f64,
            s: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for n in &self.nodes {
            w.serialize(Row {
                t: n.t,
                x: n.x,
                xdot: n.xdot,
                s: n.t - delay.eval(n.x)?,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

impl SolutionCurve for Trajectory {
    fn span(&self) -> (f64, f64) {
        (self.t0(), self.t_last())
    }

    fn value(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.interpolate(t).0)
    }

    fn derivative(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.interpolate(t).1)
    }

    fn label(&self) -> String {
        self.problem.clone()
    }

    fn source(&self) -> crate::solution::CurveSource {
        crate::solution::CurveSource::Trajectory
    }
}

impl Trajectory {
    fn check(&self, t: f64) -> Result<()> {
        if t >= self.t0() && t <= self.t_last() {
            Ok(())
        } else {
            Err(SddError::OutsideRange {
                t,
                lo: self.t0(),
                hi: self.t_last(),
            })
        }
    }
}

/// Value of the combined history at a delayed argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryValue {
    pub value: f64,
    /// The last Hermite piece was extrapolated past the last node.
    pub extrapolated: bool,
}

/// History `x(s)`: `φ(s)` for `s <= 0`, the Hermite interpolant on
/// `(t0, t_last]`, and the last piece extrapolated by at most one step
/// beyond `t_last` (flagged).
pub fn history_eval(traj: &Trajectory, phi: &InitialFunction, s: f64) -> Result<HistoryValue> {
    lookup(traj, phi, TwoFloat::from(s))
}

fn lookup(traj: &Trajectory, phi: &InitialFunction, s: TwoFloat) -> Result<HistoryValue> {
    let lo = phi.lo();
    let sv = collapse(s);
    if s < lo {
        return Err(SddError::BelowHorizon { s: sv, lo });
    }
    if s <= 0.0 {
        return Ok(HistoryValue {
            value: phi.eval_dd(s)?,
            extrapolated: false,
        });
    }
    let (t0, last) = (traj.t0(), traj.t_last());
    let unavailable = SddError::HistoryUnavailable {
        s: sv,
        t0,
        t_last: last,
    };
    if sv <= t0 {
        // seeded trajectories carry no history on (0, t0]
        return Err(unavailable);
    }
    if sv <= last {
        return Ok(HistoryValue {
            value: traj.interpolate(sv).0,
            extrapolated: false,
        });
    }
    if sv <= last + traj.step {
        let value = if traj.nodes.len() == 1 {
            traj.interpolate(sv).0
        } else {
            let (a, b) = (&traj.nodes[traj.nodes.len() - 2], &traj.nodes[traj.nodes.len() - 1]);
            hermite(a, b, sv).0
        };
        return Ok(HistoryValue {
            value,
            extrapolated: true,
        });
    }
    Err(unavailable)
}

/// Delayed argument `s(t) = t - g(x(t))` along a trajectory.
pub fn delayed_arg(traj: &Trajectory, delay: &DelaySpec, t: f64) -> Result<f64> {
    Ok(t - delay.eval(traj.value(t)?)?)
}

/// Starting point of an integration. `x_tail` is the low-order part of the
/// state, so that perturbations far below one ulp of `x` survive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Seed {
    pub t: f64,
    pub x: f64,
    pub x_tail: f64,
}

impl Seed {
    pub fn new(t: f64, x: f64) -> Self {
        Self { t, x, x_tail: 0.0 }
    }

    fn from_dd(t: f64, x: TwoFloat) -> Self {
        Self {
            t,
            x: x.hi(),
            x_tail: x.lo(),
        }
    }

    fn state(&self) -> TwoFloat {
        TwoFloat::new_add(self.x, self.x_tail)
    }

    pub fn value(&self) -> f64 {
        self.x + self.x_tail
    }
}

fn stage_rhs(p: &SddProblem, traj: &Trajectory, t: TwoFloat, x: TwoFloat) -> Result<(f64, bool)> {
    let s = t - p.delay.eval_dd(x)?;
    let delayed = lookup(traj, &p.phi, s)?;
    Ok((p.rhs.eval(collapse(x), delayed.value), delayed.extrapolated))
}

/// Integrates `p` with classical RK4 at fixed `step` from `seed` (default
/// `(0, φ(0))`) to `t_end`; the last step is shortened to land on `t_end`.
///
/// On failure mid-way the error carries the partial trajectory.
pub fn integrate(p: &SddProblem, t_end: f64, step: f64, seed: Option<Seed>) -> Result<Trajectory> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(SddError::param("step", step, "must be positive"));
    }
    let seed = match seed {
        Some(s) => s,
        None => Seed::new(0.0, p.phi.eval(0.0)?),
    };
    if !(seed.t >= 0.0) {
        return Err(SddError::param("t_start", seed.t, "must be non-negative"));
    }
    if !(t_end > seed.t) || !t_end.is_finite() {
        return Err(SddError::param("t_end", t_end, "must exceed the start time"));
    }
    if seed.t == 0.0 {
        let phi0 = p.phi.eval(0.0)?;
        if (seed.value() - phi0).abs() > 1e-12 {
            return Err(SddError::param("x_start", seed.value(), "must equal phi(0) at t = 0"));
        }
    }

    let mut x = seed.state();
    let mut traj = Trajectory {
        problem: p.name.clone(),
        nodes: Vec::new(),
        step,
        extrapolations: 0,
    };
    let first = Node {
        t: seed.t,
        x: collapse(x),
        xdot: 0.0,
    };
    traj.nodes.push(first);
    let abort = |traj: Trajectory, t: f64, cause: SddError| SddError::Aborted {
        t,
        cause: Box::new(cause),
        partial: Box::new(traj),
    };
    match stage_rhs(p, &traj, TwoFloat::from(seed.t), x) {
        Ok((k, _)) => traj.nodes[0].xdot = k,
        Err(e) => return Err(abort(traj, seed.t, e)),
    }

    let steps = ((t_end - seed.t) / step - 1e-9).ceil().max(1.0) as usize;
    for i in 0..steps {
        let node = traj.nodes[traj.nodes.len() - 1];
        let t_next = if i + 1 == steps {
            t_end
        } else {
            seed.t + (i + 1) as f64 * step
        };
        // exact: consecutive node times are within a factor of two
        let h = t_next - node.t;
        let t_mid = TwoFloat::new_add(node.t, 0.5 * h);
        let k1 = node.xdot;
        let mut extrapolated = false;
        let mut stage = |t: TwoFloat, x: TwoFloat| -> Result<f64> {
            let (k, e) = stage_rhs(p, &traj, t, x)?;
            extrapolated |= e;
            Ok(k)
        };
        let ks = (|| -> Result<(f64, f64, f64)> {
            let k2 = stage(t_mid, x + TwoFloat::new_mul(0.5 * h, k1))?;
            let k3 = stage(t_mid, x + TwoFloat::new_mul(0.5 * h, k2))?;
            let k4 = stage(TwoFloat::from(t_next), x + TwoFloat::new_mul(h, k3))?;
            Ok((k2, k3, k4))
        })();
        let (k2, k3, k4) = match ks {
            Ok(k) => k,
            Err(e) => return Err(abort(traj, node.t, e)),
        };
        if extrapolated {
            traj.extrapolations += 1;
        }
        let incr = (TwoFloat::from(k1) + k2 * 2.0 + k3 * 2.0 + k4) / 6.0;
        x += incr * h;
        let xdot = match stage_rhs(p, &traj, TwoFloat::from(t_next), x) {
            Ok((k, _)) => k,
            Err(e) => return Err(abort(traj, node.t, e)),
        };
        traj.nodes.push(Node {
            t: t_next,
            x: collapse(x),
            xdot,
        });
    }
    Ok(traj)
}

/// A branch to follow from the red line: its family, the branching time `τ`
/// and the local power term `±coeff (t-τ)^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchSpec {
    pub family: Color,
    pub tau: f64,
    pub coeff: f64,
    pub exponent: f64,
    /// Length of the validity window after `τ` (infinite for red).
    pub span: f64,
}

impl BranchSpec {
    pub fn red(tau: f64) -> Self {
        Self {
            family: Color::Red,
            tau,
            coeff: 0.0,
            exponent: 1.0,
            span: f64::INFINITY,
        }
    }

    /// Branch of the key example.
    pub fn key(params: &KeyParams, family: Color, tau: f64) -> Self {
        let (coeff, exponent) = match family {
            Color::Red => return Self::red(tau),
            Color::Yellow => (params.yellow_coeff(), params.yellow_exponent()),
            Color::Blue => (params.blue_coeff(), params.blue_exponent()),
        };
        Self {
            family,
            tau,
            coeff,
            exponent,
            span: family_window(params, family, tau).hi - tau,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) {
            return Err(SddError::param("tau", self.tau, "must be non-negative"));
        }
        if self.family != Color::Red {
            if !(self.coeff > 0.0) {
                return Err(SddError::param("coeff", self.coeff, "must be positive"));
            }
            if !(self.exponent > 1.0) {
                return Err(SddError::param("exponent", self.exponent, "must exceed 1"));
            }
        }
        Ok(())
    }
}

/// Seed on branch `b` at `τ + ε`: the red line `φ(0) + t F(φ(0), φ(s0))`
/// minus (yellow) or plus (blue) `coeff ε^exponent`.
pub fn seed_branch(p: &SddProblem, b: &BranchSpec, eps: f64) -> Result<Seed> {
    b.validate()?;
    if !(eps > 0.0) || eps > b.span {
        return Err(SddError::param(
            "eps",
            eps,
            format!("must lie in (0, {}] for this branch", b.span),
        ));
    }
    let x0 = p.phi.eval(0.0)?;
    let s0 = p.initial_delayed_argument()?;
    let slope = p.rhs.eval(x0, p.phi.eval(s0)?);
    let t = b.tau + eps;
    let sigma = collapse(TwoFloat::new_sub(t, b.tau));
    let bend = match b.family {
        Color::Red => 0.0,
        Color::Yellow => -b.coeff * sigma.powf(b.exponent),
        Color::Blue => b.coeff * sigma.powf(b.exponent),
    };
    Ok(Seed::from_dd(t, TwoFloat::new_mul(slope, t) + x0 + bend))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Rhs, SddProblem};
    use crate::registry;

    #[test]
    fn hermite_reproduces_nodes_and_cubics() {
        // x = t^3 - t has exact cubic Hermite interpolant
        let f = |t: f64| t * t * t - t;
        let df = |t: f64| 3.0 * t * t - 1.0;
        let nodes: Vec<Node> = [0.0, 0.5, 1.25]
            .iter()
            .map(|&t| Node {
                t,
                x: f(t),
                xdot: df(t),
            })
            .collect();
        let traj = Trajectory::from_nodes("cubic", nodes).unwrap();
        for t in [0.0, 0.1, 0.5, 0.9, 1.25] {
            assert!((traj.value(t).unwrap() - f(t)).abs() < 1e-14);
            assert!((traj.derivative(t).unwrap() - df(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn history_before_integration_reads_phi() {
        let p = registry::key2026(&KeyParams::default()).unwrap();
        let traj = integrate(&p, 0.01, 1e-3, None).unwrap();
        assert_eq!(history_eval(&traj, &p.phi, -1.0).unwrap().value, -1.0);
        assert_eq!(history_eval(&traj, &p.phi, 0.0).unwrap().value, traj.nodes()[0].x);
        assert!(matches!(
            history_eval(&traj, &p.phi, -2.5),
            Err(SddError::BelowHorizon { .. })
        ));
    }

    #[test]
    fn history_on_red_branch_is_linear() {
        let p = registry::key2026(&KeyParams::default()).unwrap();
        let traj = integrate(&p, 0.5, 1e-2, None).unwrap();
        for s in [0.0123, 0.2555, 0.4999] {
            let v = history_eval(&traj, &p.phi, s).unwrap();
            assert!(!v.extrapolated);
            assert!((v.value - (1.0 + s)).abs() < 1e-10);
        }
        let v = history_eval(&traj, &p.phi, 0.505).unwrap();
        assert!(v.extrapolated);
        assert!(history_eval(&traj, &p.phi, 0.6).is_err());
    }

    #[test]
    fn delayed_argument_values() {
        let p = registry::key2026(&KeyParams::default()).unwrap();
        let traj = integrate(&p, 1.0, 1e-3, None).unwrap();
        for t in [0.0, 0.25, 1.0] {
            assert!((delayed_arg(&traj, &p.delay, t).unwrap() + 1.0).abs() < 1e-12);
        }
        let driver = crate::oracle::driver_solutions()[1].render(201, 2.0).unwrap();
        let s = delayed_arg(&driver, &DelaySpec::linear(1.0, 0.0), 1.0).unwrap();
        assert!((s + 3.0).abs() < 1e-12);
        let constant = crate::oracle::ClosedFormSolution::line(
            "flat",
            Color::Yellow,
            0.0,
            0.0,
            crate::oracle::Window::new(0.0, 1.0),
        )
        .render(11, 1.0)
        .unwrap();
        let s = delayed_arg(&constant, &DelaySpec::constant(1.0), 0.5).unwrap();
        assert_eq!(s, 0.5 - 1.0);
    }

    #[test]
    fn key_red_branch_from_kink() {
        let p = registry::key2026(&KeyParams::default()).unwrap();
        let traj = integrate(&p, 1.0, 1e-3, None).unwrap();
        let err = traj
            .nodes()
            .iter()
            .map(|n| (n.x - (1.0 + n.t)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
        assert_eq!(traj.t_last(), 1.0);
    }

    #[test]
    fn const_phi_hand_solution() {
        let p = registry::const_phi();
        let traj = integrate(&p, 0.5, 1e-3, None).unwrap();
        assert!((traj.value(0.5).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_dynamics_stay_at_rest() {
        let p = SddProblem::new(
            "zero",
            DelaySpec::constant(1.0),
            Rhs::pure(|_| 0.0),
            InitialFunction::constant(1.0, 0.0).unwrap(),
        );
        let traj = integrate(&p, 3.0, 1e-2, None).unwrap();
        assert!(traj.nodes().iter().all(|n| n.x == 0.0 && n.xdot == 0.0));
        // a constant delay of 1 reads the trajectory itself after t = 1
        assert_eq!(traj.extrapolations(), 0);
    }

    #[test]
    fn below_horizon_aborts_with_partial_trajectory() {
        // g = |x| with x growing: s = t - x reaches -h
        let p = SddProblem::new(
            "runaway",
            DelaySpec::abs(),
            Rhs::pure(|_| 10.0),
            InitialFunction::constant(1.0, 0.5).unwrap(),
        );
        match integrate(&p, 1.0, 1e-2, None) {
            Err(SddError::Aborted { partial, cause, .. }) => {
                assert!(matches!(*cause, SddError::BelowHorizon { .. }));
                assert!(partial.nodes().len() > 1);
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let p = registry::const_phi();
        assert!(integrate(&p, 1.0, 0.0, None).is_err());
        assert!(integrate(&p, 0.0, 1e-3, None).is_err());
        assert!(integrate(&p, 1.0, 1e-3, Some(Seed::new(0.0, 2.0))).is_err());
    }

    #[test]
    fn seeds() {
        let p = registry::key2026(&KeyParams::default()).unwrap();
        let yellow = BranchSpec {
            family: Color::Yellow,
            tau: 0.0,
            coeff: 0.25,
            exponent: 2.0,
            span: 2f64.sqrt(),
        };
        let s = seed_branch(&p, &yellow, 1e-2).unwrap();
        assert_eq!(s.t, 0.01);
        assert!((s.value() - (1.01 - 2.5e-5)).abs() < 1e-15);
        let blue = BranchSpec {
            family: Color::Blue,
            tau: 0.3,
            ..yellow
        };
        let s = seed_branch(&p, &blue, 1e-2).unwrap();
        assert!((s.t - 0.31).abs() < 1e-15);
        assert!((s.value() - (1.31 + 2.5e-5)).abs() < 1e-14);
        let s = seed_branch(&p, &BranchSpec::red(0.7), 1e-3).unwrap();
        assert_eq!(s.t, 0.7 + 1e-3);
        assert!((s.value() - (1.0 + s.t)).abs() < 1e-15);
        assert!(seed_branch(&p, &yellow, 2.0).is_err());
        assert!(seed_branch(&p, &yellow, 0.0).is_err());
    }

    #[test]
    fn tiny_seed_perturbation_survives() {
        // C ε^p = 2.4e-4 * 1e-16: below one ulp of x = 1 + t
        let params = KeyParams::new(0.5, 0.75, 1.0, 0.5);
        let p = registry::key2026(&params).unwrap();
        let b = BranchSpec::key(&params, Color::Yellow, 0.0);
        let seed = seed_branch(&p, &b, 1e-4).unwrap();
        assert_eq!(seed.x, 1.0 + 1e-4);
        let bend = collapse(seed.state() - TwoFloat::new_add(1.0, 1e-4));
        let expected = -params.yellow_coeff() * 1e-16;
        assert!((bend - expected).abs() <= 1e-9 * expected.abs(), "{bend} vs {expected}");
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let p = registry::const_phi();
        let traj = integrate(&p, 0.1, 0.05, None).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&p.delay, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,xdot,s"));
        assert_eq!(lines.next(), Some("0.0,1.0,-1.0,-1.0"));
        assert_eq!(text.lines().count(), 4);
    }
}
