//! Randomized invariants across modules.

use proptest::prelude::*;

use blowup_core::blowdown::solve_blowdown;
use blowup_core::elliptic::{elliptic_comparison_check, solve_elliptic_capped, EllipticOptions, EllipticProblem};
use blowup_core::extrapolation::extrapolate;
use blowup_core::fv::NewtonOptions;
use blowup_core::geometry::Domain;
use blowup_core::karamata::{boundary_constant, phi, phi_inverse, AbsorptionWeight, WeightKernel};
use blowup_core::nonlinearity::{Absorption, Nonlinearity};
use blowup_core::parabolic::{parabolic_comparison_check, solve_capped, ParabolicOptions, ParabolicProblem, TimeGrid};

fn domain(which: u8) -> Domain {
    match which {
        0 => Domain::interval(0.0, 1.0).unwrap(),
        1 => Domain::ball(1.0, 2).unwrap(),
        _ => Domain::ball(1.0, 3).unwrap(),
    }
}

fn weight(dom: &Domain, gamma: f64, beta: f64) -> AbsorptionWeight {
    let mu = 2.0 * dom.diameter();
    AbsorptionWeight::constant(WeightKernel::power(gamma, mu).unwrap(), beta).unwrap()
}

fn tight() -> NewtonOptions {
    NewtonOptions { tol: 1e-12, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phi_inverts_its_tail(rho in 1.2f64..5.0, dp in 0.1f64..1.0, t in 1e-3f64..10.0) {
        let p = (rho + 1.0 - dp).clamp(1.1, 4.0);
        let nl = Nonlinearity::power(rho).unwrap();
        let s = phi(&nl, p, t).unwrap();
        let back = phi_inverse(&nl, p, s).unwrap();
        prop_assert!(((back - t) / t).abs() < 1e-8);
        prop_assert!(phi(&nl, p, 1.1 * t).unwrap() < s);
    }

    #[test]
    fn blowdown_time_rescaling(gamma in 1.3f64..4.0, c in 0.1f64..10.0, t in 1e-3f64..1.0) {
        // w' = -c g(w) is solved by w(ct)
        let g = Absorption::new("w^g + w", gamma, move |w| w.powf(gamma) + w);
        let cg = g.scaled(c);
        let a = solve_blowdown(&cg, t).unwrap();
        let b = solve_blowdown(&g, c * t).unwrap();
        prop_assert!(((a - b) / b).abs() < 1e-8);
    }

    #[test]
    fn boundary_constant_scales_with_beta(rho in 1.5f64..5.0, lambda in 0.1f64..10.0, beta in 0.2f64..5.0) {
        let p = 2.0;
        let r = (rho + 1.0) / (rho + 1.0 - p);
        let a = boundary_constant(rho, p, 1.0, beta).unwrap();
        let b = boundary_constant(rho, p, 1.0, lambda * beta).unwrap();
        prop_assert!((b / a - lambda.powf(-(r - 1.0) / p)).abs() < 1e-12);
    }

    #[test]
    fn aitken_recovers_geometric_limits(limit in -5.0f64..5.0, c in 0.1f64..3.0, q in 0.2f64..0.8) {
        let seq: Vec<f64> = (0..6).map(|k| limit + c * q.powi(k)).collect();
        let ex = extrapolate(&seq);
        prop_assert!((ex.limit - limit).abs() < 1e-9 * (1.0 + limit.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn elliptic_solutions_respect_ordered_data(
        which in 0u8..3,
        p in 1.6f64..3.0,
        extra in 0.3f64..2.0,
        gamma in prop_oneof![Just(0.0), Just(1.0)],
        beta in 1.0f64..4.0,
        shrink in 0.25f64..1.0,
        n in 5.0f64..80.0,
        grow in 1.0f64..2.0,
    ) {
        let dom = domain(which);
        let nl = Nonlinearity::power(1.0f64.max(p - 1.0) + extra).unwrap();
        let opts = EllipticOptions { n_cells: 30, grading: 2.0, newton: tight(), ..Default::default() };
        let upper = EllipticProblem::new(dom, p, nl.clone(), weight(&dom, gamma, shrink * beta)).unwrap().with_cap(grow * n);
        let lower = EllipticProblem::new(dom, p, nl, weight(&dom, gamma, beta)).unwrap().with_cap(n);
        let u1 = solve_elliptic_capped(&upper, &opts).unwrap();
        let u2 = solve_elliptic_capped(&lower, &opts).unwrap();
        let v = elliptic_comparison_check(&u1, &u2, 1e-8).unwrap();
        prop_assert!(v.passed, "{v:?}");
    }

    #[test]
    fn capped_parabolic_solutions_are_ordered_and_decrease(
        which in 0u8..3,
        p in 1.6f64..3.0,
        extra in 0.3f64..2.0,
        n in 5.0f64..80.0,
        grow in 1.0f64..2.0,
    ) {
        let dom = domain(which);
        let nl = Nonlinearity::power(1.0f64.max(p - 1.0) + extra).unwrap();
        let prob = ParabolicProblem::new(dom, p, nl, weight(&dom, 0.0, 1.0), 1.0).unwrap();
        let grid = TimeGrid::graded(0.2, 16, 2.0).unwrap();
        let opts = ParabolicOptions { n_cells: 24, grading: 2.0, newton: tight(), ..Default::default() };
        let lo = solve_capped(&prob.with_cap(n), &grid, &opts).unwrap();
        let hi = solve_capped(&prob.with_cap(grow * n), &grid, &opts).unwrap();
        prop_assert!(parabolic_comparison_check(&hi, &lo, 1e-8).unwrap().passed);
        for w in lo.values.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                prop_assert!(*b <= *a + 1e-8 * a.abs().max(1.0));
            }
        }
    }
}
