//! Red solutions: the constant-delayed-argument test for pure-delay
//! equations, candidate verification, and the reduced problem for the
//! general right-hand side.

use serde::{Deserialize, Serialize};

use crate::color::Color;
use crate::error::{Result, SddError};
use crate::model::SddProblem;
use crate::oracle::{self, ClosedFormSolution, Window};
use crate::solution::linspace;

/// Tolerance on `g` matching the required linear profile.
pub const LINEARITY_TOL: f64 = 1e-9;
pub const LINEARITY_SAMPLES: usize = 50;
/// Sampled range of `t`; the `S` range is `q` times this.
pub const LINEARITY_SPAN: f64 = 0.1;
pub const VERIFY_SAMPLES: usize = 100;
/// Tolerance on `s(t) - s0` along a reduced solution.
pub const RED_S_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RedVerdict {
    ImpossibleCase1,
    ImpossibleNonlinearG,
    CandidateExists,
}

impl RedVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            RedVerdict::ImpossibleCase1 => "impossible-case1",
            RedVerdict::ImpossibleNonlinearG => "impossible-nonlinear-g",
            RedVerdict::CandidateExists => "candidate-exists",
        }
    }
}

/// `x̃(t) = x0 + slope t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedCandidate {
    pub x0: f64,
    pub slope: f64,
}

impl RedCandidate {
    pub fn to_closed_form(&self, horizon: f64) -> ClosedFormSolution {
        ClosedFormSolution::line("red-candidate", Color::Red, self.x0, self.slope, Window::new(0.0, horizon))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedCertificate {
    pub s0: f64,
    pub f_at_phi_s0: f64,
    pub verdict: RedVerdict,
    pub candidate: Option<RedCandidate>,
    /// Largest deviation of `g` from the required profile; absent when
    /// `f(φ(s0)) = 0` leaves nothing to sample.
    pub linearity_residual: Option<f64>,
}

/// Decides whether `ẋ = f(x(t - g(x)))` can have a solution with constant
/// delayed argument starting at `t = 0`.
///
/// Such a solution is `φ(0) + q t` with `q = f(φ(s0))`, which forces
/// `g(S) = (S - φ(0))/q - s0` on the side of `φ(0)` the line moves into.
pub fn red_certificate(p: &SddProblem) -> Result<RedCertificate> {
    if !p.rhs.is_pure_delay() {
        return Err(SddError::Inapplicable(format!(
            "{}: the red-solution test needs a pure-delay right-hand side",
            p.name
        )));
    }
    let x0 = p.phi.eval(0.0)?;
    let s0 = p.initial_delayed_argument()?;
    let q = p.rhs.eval(x0, p.phi.eval(s0)?);
    if q == 0.0 {
        return Ok(RedCertificate {
            s0,
            f_at_phi_s0: q,
            verdict: RedVerdict::ImpossibleCase1,
            candidate: None,
            linearity_residual: None,
        });
    }
    let mut dev = 0.0f64;
    for t in linspace(0.0, LINEARITY_SPAN, LINEARITY_SAMPLES) {
        let s = x0 + q * t;
        let required = (s - x0) / q - s0;
        dev = dev.max((p.delay.eval(s)? - required).abs());
    }
    let ok = dev <= LINEARITY_TOL;
    Ok(RedCertificate {
        s0,
        f_at_phi_s0: q,
        verdict: if ok {
            RedVerdict::CandidateExists
        } else {
            RedVerdict::ImpossibleNonlinearG
        },
        candidate: ok.then_some(RedCandidate { x0, slope: q }),
        linearity_residual: Some(dev),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RedVerification {
    pub horizon: f64,
    pub max_residual: f64,
    pub slope: f64,
    pub non_constant: bool,
    pub passed: bool,
}

/// Residual of the certificate's candidate on `[0, horizon]` plus the
/// requirement that it is not constant.
pub fn verify_red(p: &SddProblem, cert: &RedCertificate, horizon: f64) -> Result<RedVerification> {
    let cand = match (cert.verdict, cert.candidate) {
        (RedVerdict::CandidateExists, Some(c)) => c,
        _ => {
            return Err(SddError::Inapplicable(format!(
                "{}: certificate verdict is {}",
                p.name,
                cert.verdict.as_str()
            )))
        }
    };
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(SddError::param("horizon", horizon, "must be positive and finite"));
    }
    let line = cand.to_closed_form(horizon);
    let max_residual = oracle::max_residual(p, &line, VERIFY_SAMPLES, horizon)?;
    let non_constant = cand.slope != 0.0;
    Ok(RedVerification {
        horizon,
        max_residual,
        slope: cand.slope,
        non_constant,
        passed: non_constant && max_residual <= oracle::RESIDUAL_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RedUniquenessReport {
    pub s0: f64,
    pub phi_s0: f64,
    pub horizon: f64,
    /// Endpoint of the reduced solution `ẋ = F(x, φ(s0))`, `x(0) = φ(0)`.
    pub x_end: f64,
    /// `max |t - g(x(t)) - s0|` along the reduced solution.
    pub s_deviation: f64,
    /// 1 when the reduced solution keeps `s` constant, else 0; never more.
    pub red_candidates: usize,
}

/// Every red solution reads the history at the single point `s0`, so all
/// of them solve the same ODE `ẋ = F(x, φ(s0))`. With `F` Lipschitz in `x`
/// that ODE has one solution; it is red iff it keeps `s` constant.
pub fn red_uniqueness_check(p: &SddProblem, horizon: f64, step: f64) -> Result<RedUniquenessReport> {
    if !p.lipschitz_in_state {
        return Err(SddError::Inapplicable(format!(
            "{}: F is not declared Lipschitz in the state",
            p.name
        )));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(SddError::param("horizon", horizon, "must be positive and finite"));
    }
    if !(step > 0.0) {
        return Err(SddError::param("step", step, "must be positive"));
    }
    let s0 = p.initial_delayed_argument()?;
    let y = p.phi.eval(s0)?;
    let f = |x: f64| p.rhs.eval(x, y);
    let mut x = p.phi.eval(0.0)?;
    let n = (horizon / step).ceil().max(1.0) as usize;
    let h = horizon / n as f64;
    let mut dev = (0.0 - p.delay.eval(x)? - s0).abs();
    for i in 0..n {
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t = (i + 1) as f64 * h;
        dev = dev.max((t - p.delay.eval(x)? - s0).abs());
    }
    Ok(RedUniquenessReport {
        s0,
        phi_s0: y,
        horizon,
        x_end: x,
        s_deviation: dev,
        red_candidates: usize::from(dev <= RED_S_TOL),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelaySpec, InitialFunction, Rhs};
    use crate::oracle::KeyParams;
    use crate::registry;

    fn key() -> SddProblem {
        registry::key2026(&KeyParams::default()).unwrap()
    }

    #[test]
    fn key_candidate() {
        let c = red_certificate(&key()).unwrap();
        assert_eq!(c.verdict, RedVerdict::CandidateExists);
        assert_eq!(c.s0, -1.0);
        assert_eq!(c.f_at_phi_s0, 1.0);
        assert_eq!(c.candidate, Some(RedCandidate { x0: 1.0, slope: 1.0 }));
        assert!(c.linearity_residual.unwrap() <= 1e-12);
        let v = verify_red(&key(), &c, 1.0).unwrap();
        assert!(v.passed, "{v:?}");
    }

    #[test]
    fn linear_ic_same_candidate() {
        let p = registry::linear_ic();
        let c = red_certificate(&p).unwrap();
        assert_eq!(c.candidate, red_certificate(&key()).unwrap().candidate);
        assert!(verify_red(&p, &c, 1.0).unwrap().passed);
    }

    #[test]
    fn impossible_verdicts() {
        let q = registry::quadratic_delay(&KeyParams::default()).unwrap();
        let c = red_certificate(&q).unwrap();
        assert_eq!(c.verdict, RedVerdict::ImpossibleNonlinearG);
        assert!(c.candidate.is_none());
        assert!(verify_red(&q, &c, 1.0).is_err());

        let z = registry::zero_f().unwrap();
        let c = red_certificate(&z).unwrap();
        assert_eq!(c.verdict, RedVerdict::ImpossibleCase1);
        assert!(c.candidate.is_none());
    }

    #[test]
    fn full_rhs_is_inapplicable() {
        assert!(matches!(
            red_certificate(&registry::driver1963()),
            Err(SddError::Inapplicable(_))
        ));
    }

    #[test]
    fn constant_candidate_fails() {
        let p = key();
        let mut c = red_certificate(&p).unwrap();
        c.candidate = Some(RedCandidate { x0: 1.0, slope: 0.0 });
        let v = verify_red(&p, &c, 1.0).unwrap();
        assert!(!v.non_constant);
        assert!(!v.passed);
    }

    #[test]
    fn verify_bad_horizon() {
        let p = key();
        let c = red_certificate(&p).unwrap();
        assert!(verify_red(&p, &c, 0.0).is_err());
        assert!(verify_red(&p, &c, f64::INFINITY).is_err());
    }

    #[test]
    fn reduced_problems() {
        let d = red_uniqueness_check(&registry::driver1963(), 2.0, 1e-3).unwrap();
        assert_eq!(d.s0, -4.0);
        assert_eq!(d.phi_s0, 2.0);
        assert!((d.x_end - 6.0).abs() < 1e-12);
        assert_eq!(d.red_candidates, 1);

        let k = red_uniqueness_check(&key(), 1.0, 1e-3).unwrap();
        assert!((k.x_end - 2.0).abs() < 1e-12);
        assert_eq!(k.red_candidates, 1);

        let z = crate::model::SddProblem::new(
            "zero-F",
            DelaySpec::abs(),
            Rhs::full(|_, _| 0.0),
            InitialFunction::constant(2.0, 1.0).unwrap(),
        )
        .declare_lipschitz();
        let r = red_uniqueness_check(&z, 1.0, 1e-3).unwrap();
        assert_eq!(r.x_end, 1.0);
        assert_eq!(r.red_candidates, 0);

        let undeclared = crate::model::SddProblem::new(
            "undeclared",
            DelaySpec::abs(),
            Rhs::full(|_, y| -y),
            InitialFunction::constant(2.0, 1.0).unwrap(),
        );
        assert!(matches!(
            red_uniqueness_check(&undeclared, 1.0, 1e-3),
            Err(SddError::Inapplicable(_))
        ));
    }
}
