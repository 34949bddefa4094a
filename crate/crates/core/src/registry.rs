//! Named problems and their parameter schemas.
//!
//! Parameters arrive as a flat key-value document, e.g. `{"A": 2, "alpha": 0.25}`.
//! Missing keys take their defaults; unknown keys are rejected.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::color::Color;
use crate::error::{Result, SddError};
use crate::model::{DelaySpec, InitialFunction, Rhs, SddProblem, Segment, Shape};
use crate::oracle::{self, ClosedFormSolution, KeyParams, Window, WORKING_HORIZON};

pub type Params = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub meaning: &'static str,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Entry {
    pub key: &'static str,
    pub summary: &'static str,
    pub params: &'static [ParamSpec],
    /// Whether the problem carries the yellow/blue `τ` families.
    pub families: bool,
}

const KEY_PARAMS: &[ParamSpec] = &[
    ParamSpec {
        name: "A",
        default: 1.0,
        meaning: "coefficient of the right-side Hölder branch",
    },
    ParamSpec {
        name: "B",
        default: 1.0,
        meaning: "coefficient of the left-side Hölder branch",
    },
    ParamSpec {
        name: "alpha",
        default: 0.5,
        meaning: "right-side Hölder exponent in (0, 1)",
    },
    ParamSpec {
        name: "beta",
        default: 0.5,
        meaning: "left-side Hölder exponent in (0, 1)",
    },
    ParamSpec {
        name: "delta",
        default: 0.5,
        meaning: "the linear connector to phi(0) = 1 starts at -delta",
    },
];

const EXAMPLE2_PARAMS: &[ParamSpec] = &[ParamSpec {
    name: "alpha",
    default: 0.5,
    meaning: "Hölder exponent in (0, 1)",
}];

pub const ENTRIES: &[Entry] = &[
    Entry {
        key: "driver1963",
        summary: "y' = -2 y(t - y) + 5, phi = |4 + t|^(1/2) + 2 on [-5, 0]",
        params: &[],
        families: false,
    },
    Entry {
        key: "example2010",
        summary: "x' = x(t - |x|)/(alpha - 1) + 1, phi = -(-1-t)^alpha | (t+1)^alpha on [-2, 0]",
        params: EXAMPLE2_PARAMS,
        families: false,
    },
    Entry {
        key: "key2026",
        summary: "x' = -x(t - |x|), two-sided Hölder phi at -1 with linear connector, h = 2",
        params: KEY_PARAMS,
        families: true,
    },
    Entry {
        key: "linear-ic",
        summary: "x' = -x(t - |x|), phi = 2 theta + 1 on [-2, 0]",
        params: &[],
        families: false,
    },
    Entry {
        key: "const-phi",
        summary: "x' = -x(t - |x|), phi = 1 on [-2, 0]",
        params: &[],
        families: false,
    },
    Entry {
        key: "quadratic-delay",
        summary: "key2026 with g(x) = x^2",
        params: KEY_PARAMS,
        families: false,
    },
    Entry {
        key: "zero-f",
        summary: "x' = x(t - |x|) with the example2010 phi (alpha = 1/2), so f(phi(s0)) = 0",
        params: &[],
        families: false,
    },
];

pub fn entry(key: &str) -> Result<&'static Entry> {
    ENTRIES
        .iter()
        .find(|e| e.key == key)
        .ok_or_else(|| SddError::UnknownProblem(key.to_string()))
}

/// Parameters of `key` with defaults filled in.
pub fn resolve_params(key: &str, given: &Params) -> Result<Params> {
    let e = entry(key)?;
    if let Some(name) = given.keys().find(|k| !e.params.iter().any(|p| p.name == k.as_str())) {
        return Err(SddError::param(
            name.clone(),
            given[name],
            format!("not a parameter of `{key}`"),
        ));
    }
    Ok(e.params
        .iter()
        .map(|p| (p.name.to_string(), given.get(p.name).copied().unwrap_or(p.default)))
        .collect())
}

pub fn key_params(resolved: &Params) -> KeyParams {
    let get = |k: &str, d: f64| resolved.get(k).copied().unwrap_or(d);
    let d = KeyParams::default();
    KeyParams {
        right_coeff: get("A", d.right_coeff),
        right_exponent: get("alpha", d.right_exponent),
        left_coeff: get("B", d.left_coeff),
        left_exponent: get("beta", d.left_exponent),
        connector_width: get("delta", d.connector_width),
        horizon: d.horizon,
    }
}

pub fn build(key: &str, given: &Params) -> Result<SddProblem> {
    let params = resolve_params(key, given)?;
    match key {
        "driver1963" => Ok(driver1963()),
        "example2010" => example2010(params["alpha"]),
        "key2026" => key2026(&key_params(&params)),
        "linear-ic" => Ok(linear_ic()),
        "const-phi" => Ok(const_phi()),
        "quadratic-delay" => quadratic_delay(&key_params(&params)),
        "zero-f" => zero_f(),
        other => Err(SddError::UnknownProblem(other.to_string())),
    }
}

/// Closed forms attached to a registry problem; `taus` only matters for
/// problems with families.
pub fn closed_forms(key: &str, given: &Params, taus: &[f64]) -> Result<Vec<ClosedFormSolution>> {
    let params = resolve_params(key, given)?;
    match key {
        "driver1963" => Ok(oracle::driver_solutions()),
        "example2010" => oracle::example2_solutions(params["alpha"]),
        "key2026" => oracle::key_solutions(&key_params(&params), taus),
        "linear-ic" => Ok(vec![ClosedFormSolution::line(
            "linear-ic-red",
            Color::Red,
            1.0,
            1.0,
            Window::new(0.0, WORKING_HORIZON),
        )]),
        // x = 1 - t while s = 2t - 1 stays in the initial interval
        "const-phi" => Ok(vec![ClosedFormSolution::line(
            "const-phi-hand",
            Color::Yellow,
            1.0,
            -1.0,
            Window::new(0.0, 0.5),
        )]),
        "quadratic-delay" | "zero-f" => Ok(Vec::new()),
        other => Err(SddError::UnknownProblem(other.to_string())),
    }
}

/// `ẏ = -2 y(t - y) + 5` with `φ(θ) = |4 + θ|^{1/2} + 2` on `[-5, 0]`.
/// The right-hand side is kept in the full `F(x, y)` form.
pub fn driver1963() -> SddProblem {
    let phi = InitialFunction::new(
        5.0,
        vec![Segment::new(
            -5.0,
            0.0,
            Shape::AbsPower {
                anchor: -4.0,
                value: 2.0,
                coeff: 1.0,
                exponent: 0.5,
            },
        )],
    )
    .expect("driver initial function");
    SddProblem::new(
        "driver1963",
        DelaySpec::linear(1.0, 0.0),
        Rhs::full(|_x, y| -2.0 * y + 5.0),
        phi,
    )
    .declare_lipschitz()
}

fn example2_phi(alpha: f64) -> Result<InitialFunction> {
    InitialFunction::new(
        2.0,
        vec![
            Segment::new(
                -2.0,
                -1.0,
                Shape::PowerLeft {
                    anchor: -1.0,
                    value: 0.0,
                    coeff: 1.0,
                    exponent: alpha,
                },
            ),
            Segment::new(
                -1.0,
                0.0,
                Shape::PowerRight {
                    anchor: -1.0,
                    value: 0.0,
                    coeff: 1.0,
                    exponent: alpha,
                },
            ),
        ],
    )
}

pub fn example2010(alpha: f64) -> Result<SddProblem> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SddError::param("alpha", alpha, "must lie in (0, 1)"));
    }
    Ok(SddProblem::new(
        "example2010",
        DelaySpec::abs(),
        Rhs::pure(move |y| y / (alpha - 1.0) + 1.0),
        example2_phi(alpha)?,
    ))
}

/// Initial function of the key example with a linear connector on `[-δ, 0]`.
pub fn key_phi(params: &KeyParams) -> Result<InitialFunction> {
    params.validate()?;
    let h = params.horizon;
    let delta = params.connector_width;
    let right = Shape::PowerRight {
        anchor: -1.0,
        value: -1.0,
        coeff: params.right_coeff,
        exponent: params.right_exponent,
    };
    let at_connector = right.eval(-delta);
    InitialFunction::new(
        h,
        vec![
            Segment::new(
                -h,
                -1.0,
                Shape::PowerLeft {
                    anchor: -1.0,
                    value: -1.0,
                    coeff: params.left_coeff,
                    exponent: params.left_exponent,
                },
            ),
            Segment::new(-1.0, -delta, right),
            Segment::new(
                -delta,
                0.0,
                Shape::Linear {
                    intercept: 1.0,
                    slope: (1.0 - at_connector) / delta,
                },
            ),
        ],
    )
}

fn key_equation() -> Rhs {
    Rhs::pure(|y| -y)
}

pub fn key2026(params: &KeyParams) -> Result<SddProblem> {
    Ok(SddProblem::new(
        "key2026",
        DelaySpec::abs(),
        key_equation(),
        key_phi(params)?,
    ))
}

/// Same equation as the key example with the Lipschitz `φ(θ) = 2θ + 1`.
pub fn linear_ic() -> SddProblem {
    SddProblem::new(
        "linear-ic",
        DelaySpec::abs(),
        key_equation(),
        InitialFunction::linear(2.0, 1.0, 2.0).expect("linear initial function"),
    )
}

/// `ẋ = -x(t - |x|)`, `φ ≡ 1` on `[-2, 0]`: `x = 1 - t` while `t <= 1/2`.
pub fn const_phi() -> SddProblem {
    SddProblem::new(
        "const-phi",
        DelaySpec::abs(),
        key_equation(),
        InitialFunction::constant(2.0, 1.0).expect("constant initial function"),
    )
}

pub fn quadratic_delay(params: &KeyParams) -> Result<SddProblem> {
    Ok(SddProblem::new(
        "quadratic-delay",
        DelaySpec::quadratic(),
        key_equation(),
        key_phi(params)?,
    ))
}

/// `ẋ = x(t - |x|)` with the 2010 initial function: `φ(s0) = φ(-1) = 0`.
pub fn zero_f() -> Result<SddProblem> {
    Ok(SddProblem::new(
        "zero-f",
        DelaySpec::abs(),
        Rhs::pure(|y| y),
        example2_phi(0.5)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_problem;

    #[test]
    fn every_entry_builds_and_validates() {
        for e in ENTRIES {
            let p = build(e.key, &Params::new()).unwrap();
            let report = validate_problem(&p);
            assert!(report.is_valid(), "{}: {:?}", e.key, report.violations);
        }
    }

    #[test]
    fn phi_reference_values() {
        let driver = driver1963();
        assert_eq!(driver.phi.eval(-4.0).unwrap(), 2.0);
        assert_eq!(driver.phi.eval(0.0).unwrap(), 4.0);
        let key = key2026(&KeyParams::default()).unwrap();
        assert_eq!(key.phi.eval(-1.0).unwrap(), -1.0);
        assert_eq!(key.phi.eval(0.0).unwrap(), 1.0);
        assert_eq!(key.initial_delayed_argument().unwrap(), -1.0);
    }

    #[test]
    fn params_are_checked() {
        let mut given = Params::new();
        given.insert("gamma".into(), 1.0);
        assert!(build("key2026", &given).is_err());
        assert!(matches!(build("nope", &Params::new()), Err(SddError::UnknownProblem(_))));
        let mut given = Params::new();
        given.insert("alpha".into(), 1.2);
        assert!(build("example2010", &given).is_err());
        assert!(build("key2026", &given).is_err());
    }

    #[test]
    fn connector_is_continuous_for_parameter_grid() {
        for a in [0.5, 1.0, 2.0] {
            for alpha in [0.25, 0.5, 0.75] {
                let p = key2026(&KeyParams::new(a, alpha, 1.0, 0.5)).unwrap();
                assert!(validate_problem(&p).is_valid());
            }
        }
    }
}
