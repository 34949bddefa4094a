//! Numerical and closed-form exploration of non-unique continuous solutions
//! to scalar differential equations with one discrete state-dependent delay,
//!
//! ```text
//! x'(t) = F(x(t), x(t - g(x(t))))      or      x'(t) = f(x(t - g(x(t)))),
//! x(θ) = φ(θ),  θ ∈ [-h, 0].
//! ```
//!
//! The crate is organised around the delayed argument `s(t) = t - g(x(t))`:
//!
//! * [`model`] holds problems, delays and piecewise initial functions.
//! * [`registry`] builds the named problems exposed on the command line.
//! * [`oracle`] carries exact solution families and the residual checker.
//! * [`steps`] is a dense-output method-of-steps integrator with branch seeding.
//! * [`classify`] colors solutions by the monotonicity of `s(t)` and
//!   measures one-sided Hölder behaviour of initial functions.
//! * [`redcert`] and [`unicity`] produce red-solution and uniqueness certificates.
//! * [`geom`] lifts solutions to `(t, s, x)` space curves.

pub mod classify;
pub mod color;
pub mod error;
pub mod geom;
pub mod model;
pub mod oracle;
pub mod redcert;
pub mod registry;
pub mod solution;
pub mod steps;
pub mod unicity;

pub use color::Color;
pub use error::{Result, SddError};
pub use model::{DelayKind, DelaySpec, InitialFunction, Rhs, SddProblem, Segment, Shape};
pub use oracle::{ClosedFormSolution, KeyParams, Window};
pub use solution::SolutionCurve;
pub use steps::{integrate, Seed, Trajectory};
