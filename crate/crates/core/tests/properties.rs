use proptest::prelude::*;

use sdd_core::classify::{
    classify, color_sequence, estimate_holder, find_nonlipschitz, s_dot, Side, DEFAULT_TOL_RED, EXACT_TOL_RED,
};
use sdd_core::oracle::{key_family, max_residual, KeyParams, RESIDUAL_SAMPLES, WORKING_HORIZON};
use sdd_core::redcert::{red_certificate, RedVerdict};
use sdd_core::registry::{self, Params, ENTRIES};
use sdd_core::solution::linspace;
use sdd_core::steps::{seed_branch, BranchSpec};
use sdd_core::unicity::{integrate_transformed, slope_certificate, DEFAULT_MARGIN};
use sdd_core::{integrate, Color, DelaySpec, InitialFunction, Rhs, SddProblem, SolutionCurve};

fn key_params() -> impl Strategy<Value = KeyParams> {
    (0.5f64..2.0, 0.2f64..0.8, 0.5f64..2.0, 0.2f64..0.8).prop_map(|(a, al, b, be)| KeyParams::new(a, al, b, be))
}

fn all_problems() -> Vec<SddProblem> {
    ENTRIES
        .iter()
        .map(|e| registry::build(e.key, &Params::new()).unwrap())
        .collect()
}

#[test]
fn phi_is_continuous_at_junctions() {
    for p in all_problems() {
        for pair in p.phi.segments().windows(2) {
            let left = pair[0].shape.eval(pair[0].hi);
            let right = pair[1].shape.eval(pair[1].lo);
            assert!((left - right).abs() <= 1e-12, "{} at {}", p.name, pair[1].lo);
        }
    }
}

#[test]
fn finite_difference_slope_matches_analytic() {
    for p in all_problems() {
        let (lo, hi) = p.phi.range_hull(200).unwrap();
        for x in linspace(lo - 0.5, hi + 0.5, 100) {
            if p.delay.kinks().iter().any(|k| (x - k).abs() < 1e-6) {
                continue;
            }
            let (Ok(a), Ok(fd)) = (p.delay.derivative(x), p.delay.fd_derivative(x)) else {
                continue;
            };
            assert!((a - fd).abs() <= 1e-5, "{} at {x}: {a} vs {fd}", p.name);
        }
    }
}

#[test]
fn integration_is_deterministic() {
    let params = KeyParams::new(0.5, 0.75, 2.0, 0.25);
    let p = registry::key2026(&params).unwrap();
    let b = BranchSpec::key(&params, Color::Blue, 0.3);
    let run = || {
        let seed = seed_branch(&p, &b, 1e-4).unwrap();
        integrate(&p, 0.3 + b.span / 2.0, 1e-3, Some(seed)).unwrap()
    };
    let (a, c) = (run(), run());
    assert_eq!(a.nodes().len(), c.nodes().len());
    for (x, y) in a.nodes().iter().zip(c.nodes()) {
        assert_eq!(x.t.to_bits(), y.t.to_bits());
        assert_eq!(x.x.to_bits(), y.x.to_bits());
        assert_eq!(x.xdot.to_bits(), y.xdot.to_bits());
    }
}

#[test]
fn fine_step_branch_fidelity() {
    for params in [KeyParams::default(), KeyParams::new(2.0, 0.25, 0.5, 0.75)] {
        let p = registry::key2026(&params).unwrap();
        for family in [Color::Yellow, Color::Blue] {
            let exact = key_family(&params, family, 0.3).unwrap();
            let b = BranchSpec::key(&params, family, 0.3);
            let seed = seed_branch(&p, &b, 1e-4).unwrap();
            let traj = integrate(&p, 0.3 + b.span / 2.0, 1e-4, Some(seed)).unwrap();
            for n in traj.nodes() {
                assert!((n.x - exact.value(n.t).unwrap()).abs() <= 1e-3);
            }
        }
    }
}

#[test]
fn s_dot_identity_along_trajectories() {
    for p in [registry::const_phi(), registry::key2026(&KeyParams::default()).unwrap()] {
        let traj = integrate(&p, 0.5, 1e-3, None).unwrap();
        // an f64 delayed argument next to a Hölder point of φ cannot
        // reproduce φ(s) to 1e-8
        let rough = find_nonlipschitz(&p.phi);
        for n in traj.nodes() {
            let s = n.t - p.delay.eval(n.x).unwrap();
            if s > 0.0 || rough.iter().any(|c| (s - c).abs() < 1e-6) {
                continue;
            }
            let want = 1.0 - p.delay.derivative(n.x).unwrap() * p.rhs.eval(n.x, p.phi.eval(s).unwrap());
            assert!((s_dot(&traj, &p.delay, n.t).unwrap() - want).abs() <= 1e-8);
        }
    }
}

#[test]
fn transformed_time_is_monotone() {
    let tr = integrate_transformed(&registry::const_phi(), 0.0, 1e-2).unwrap();
    assert_eq!(tr.t_monotone(), Some(true));

    let p = SddProblem::new(
        "q-above-one",
        DelaySpec::linear(0.5, 0.0).with_bound(10.0),
        Rhs::pure(|_| 3.0),
        InitialFunction::constant(2.0, 1.0).unwrap(),
    );
    assert!(slope_certificate(&p, DEFAULT_MARGIN).unwrap().q > 1.0);
    let tr = integrate_transformed(&p, -1.5, 1e-2).unwrap();
    assert_eq!(tr.t_monotone(), Some(false));
}

#[test]
fn certificates_ignore_phi_away_from_zero_and_s0() {
    let key = registry::key2026(&KeyParams::default()).unwrap();
    let lin = registry::linear_ic();
    assert_eq!(
        slope_certificate(&key, DEFAULT_MARGIN).unwrap().q,
        slope_certificate(&lin, DEFAULT_MARGIN).unwrap().q
    );
    assert_eq!(
        red_certificate(&key).unwrap().candidate,
        red_certificate(&lin).unwrap().candidate
    );
}

/// Linear candidates `φ(0) + m t`, `m ∈ [-10, 10]` in steps of 0.01, that keep
/// `s` constant and solve the equation to 1e-6 on `[0, 0.1]`.
fn brute_force_red(p: &SddProblem) -> usize {
    let x0 = p.phi.eval(0.0).unwrap();
    let ts = linspace(0.0, 0.1, 21);
    (-1000..=1000)
        .map(|k| k as f64 * 0.01)
        .filter(|&m| {
            let s: Option<Vec<f64>> = ts
                .iter()
                .map(|&t| p.delay.eval(x0 + m * t).ok().map(|g| t - g))
                .collect();
            let Some(s) = s else { return false };
            if s.iter().any(|v| (v - s[0]).abs() > 1e-9) {
                return false;
            }
            let Ok(y) = p.phi.eval(s[0]) else { return false };
            ts.iter().all(|&t| (m - p.rhs.eval(x0 + m * t, y)).abs() <= 1e-6)
        })
        .count()
}

#[test]
fn impossible_verdicts_are_corroborated() {
    for p in [
        registry::quadratic_delay(&KeyParams::default()).unwrap(),
        registry::zero_f().unwrap(),
    ] {
        assert_ne!(red_certificate(&p).unwrap().verdict, RedVerdict::CandidateExists);
        assert_eq!(brute_force_red(&p), 0, "{}", p.name);
    }
    let key = registry::key2026(&KeyParams::default()).unwrap();
    assert_eq!(brute_force_red(&key), 1);
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn family_members_solve_the_equation(params in key_params(), tau in 0.0f64..1.5) {
        let p = registry::key2026(&params).unwrap();
        for family in Color::ALL {
            let c = key_family(&params, family, tau).unwrap();
            let cap = if c.window.is_bounded() { f64::INFINITY } else { WORKING_HORIZON };
            let r = max_residual(&p, &c, RESIDUAL_SAMPLES, cap).unwrap();
            prop_assert!(r <= 1e-9, "{} residual {r}", c.label);
        }
    }

    #[test]
    fn families_join_the_red_line_smoothly(params in key_params(), tau in 0.0f64..1.5) {
        let red = key_family(&params, Color::Red, 0.0).unwrap();
        for family in [Color::Yellow, Color::Blue] {
            let c = key_family(&params, family, tau).unwrap();
            prop_assert!((c.value(tau).unwrap() - red.value(tau).unwrap()).abs() <= 1e-12);
            prop_assert_eq!(c.derivative(tau).unwrap(), red.derivative(tau).unwrap());
        }
    }

    #[test]
    fn blue_above_red_above_yellow(params in key_params(), tau in 0.0f64..1.5, frac in 0.01f64..1.0) {
        let red = key_family(&params, Color::Red, 0.0).unwrap();
        let y = key_family(&params, Color::Yellow, tau).unwrap();
        let b = key_family(&params, Color::Blue, tau).unwrap();
        let hi = y.window.hi.min(b.window.hi);
        let t = tau + frac * (hi - tau);
        prop_assert!(b.value(t).unwrap() > red.value(t).unwrap());
        prop_assert!(red.value(t).unwrap() > y.value(t).unwrap());
    }

    #[test]
    fn rendered_families_keep_their_colors(params in key_params(), tau_index in 0usize..3) {
        let tau = [0.0, 0.3, 1.0][tau_index];
        for family in [Color::Yellow, Color::Blue] {
            let c = key_family(&params, family, tau).unwrap();
            let traj = c.render(256, WORKING_HORIZON).unwrap();
            let segs = classify(&traj, &DelaySpec::abs(), EXACT_TOL_RED).unwrap();
            prop_assert_eq!(color_sequence(&segs), c.colors());
        }
    }

    #[test]
    fn first_color_is_stable_under_smaller_tolerance(slope in 0.1f64..3.0, k in -3.0f64..3.0) {
        // g = slope x, f(y) = k y, φ ≡ 1: ṡ(0) = 1 - slope k
        prop_assume!((1.0 - slope * k).abs() > 1e-3);
        let p = SddProblem::new(
            "linear-delay",
            DelaySpec::linear(slope, 0.0).with_bound(1e3),
            Rhs::pure(move |y| k * y),
            InitialFunction::constant(1.0 + 3.0 * slope, 1.0).unwrap(),
        );
        let traj = integrate(&p, 0.2, 1e-3, None).unwrap();
        let first = classify(&traj, &p.delay, DEFAULT_TOL_RED).unwrap()[0].color;
        for tol in [1e-9, 1e-10, 1e-11] {
            prop_assert_eq!(classify(&traj, &p.delay, tol).unwrap()[0].color, first);
        }
    }

    #[test]
    fn holder_fit_scales_with_the_coefficient(params in key_params()) {
        let doubled = KeyParams { right_coeff: 2.0 * params.right_coeff, ..params };
        let p1 = registry::key2026(&params).unwrap();
        let p2 = registry::key2026(&doubled).unwrap();
        let e1 = estimate_holder(&p1.phi, -1.0, Side::Right).unwrap();
        let e2 = estimate_holder(&p2.phi, -1.0, Side::Right).unwrap();
        prop_assert!((e2.coeff / e1.coeff - 2.0).abs() <= 0.1);
        prop_assert!((e2.exponent - e1.exponent).abs() < 0.01);
    }
}
