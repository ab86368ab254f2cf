use kink_core::coeffs::{transform_to_y, CoefficientProfile, Family, Field, Variable};
use kink_core::grid::derivative;
use kink_core::jost::{jost, solve_volterra, Direction, HalfLine, JostOptions, LinearOperator, VolterraProblem};
use kink_core::kink::{nonlinearity, KinkT};
use kink_core::model::{builtin_phi4, builtin_sine_gordon, Potential};
use kink_core::nlkg::{dq_distance, h1_l2_sq, Perturbation, PerturbationShape, Reference};
use kink_core::oracle::{discretize_parts, eigen_bottom};
use kink_core::spectral::{evans, find_eigenvalues, PerturbationData, SpectralOptions};
use kink_core::Grid;
use proptest::prelude::*;

fn models() -> [Potential; 3] {
    [Potential::phi4(), Potential::sine_gordon(), Potential::polynomial(vec![0.25, 0.0, -0.5, 0.0, 0.25], -1.0, 1.0).unwrap()]
}

const FAMILIES: [Family; 6] =
    [Family::Gaussian, Family::Sech2, Family::Exponential, Family::OddGaussian, Family::OddSech2, Family::OddExponential];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_derivatives_are_consistent(m in 0usize..3, u in -1.2f64..1.2) {
        let pot = &models()[m];
        let u = if m == 1 { 3.0 * u + std::f64::consts::PI } else { u };
        let h = 1e-4;
        let fd = |f: &dyn Fn(f64) -> f64| (f(u + h) - f(u - h)) / (2.0 * h);
        prop_assert!((fd(&|x| pot.f(x)) - pot.df(u)).abs() < 1e-6);
        prop_assert!((fd(&|x| pot.df(x)) - pot.d2f(u)).abs() < 1e-6);
        prop_assert!((fd(&|x| pot.d2f(x)) - pot.d3f(u)).abs() < 1e-6);
    }

    #[test]
    fn nonlinearity_is_quadratically_small(m in 0usize..2, y in -6.0f64..6.0, eta in -0.3f64..0.3) {
        let (pot, s) = if m == 0 { builtin_phi4() } else { builtin_sine_gordon() };
        let k = pot.third_derivative_bound();
        prop_assert!(nonlinearity(&pot, s.profile(y), eta).abs() <= k * eta * eta * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn coordinate_map_round_trips(fam in 0usize..6, amp in -0.05f64..0.05, width in 0.5f64..2.0, centre in -2.0f64..2.0) {
        let g = Grid::new(20.0, 2048).unwrap();
        let profile = CoefficientProfile {
            a_dev: Field::bump(FAMILIES[fam], amp, width, centre),
            b: Field::bump(Family::Gaussian, 0.01, 1.0, 0.0),
            c: Field::zero(),
            variable: Variable::X,
        };
        let tc = transform_to_y(&profile, &g).unwrap();
        for i in (0..g.len()).step_by(37) {
            let x = g.point(i);
            prop_assert!((tc.x_of_y(tc.y_of_x(x)) - x).abs() < 1e-9);
        }
        // ω'/ω = b_y, away from the derivative kink of the exponential family
        let h = 1e-4;
        for y in [-3.0f64, -0.5, 0.0, 1.0, 4.0].into_iter().filter(|y| (y - centre).abs() > 0.2) {
            let dlog = ((tc.omega(y + h)).ln() - (tc.omega(y - h)).ln()) / (2.0 * h);
            prop_assert!((dlog - tc.b(y)).abs() < 1e-7, "{} vs {}", dlog, tc.b(y));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn volterra_solution_obeys_the_exponential_bound(
        a in proptest::array::uniform4(-1.0f64..1.0),
        rate in 0.3f64..2.0,
        start in -3.0f64..3.0,
        left in any::<bool>(),
    ) {
        let g = Grid::new(8.0, 256).unwrap();
        let row = (a[0].abs() + a[1].abs()).max(a[2].abs() + a[3].abs());
        let p = VolterraProblem {
            kernel: Box::new(move |_, w| {
                let s = (-rate * w.abs()).exp();
                [[s * a[0], s * a[1]], [s * a[2], s * a[3]]]
            }),
            inhomogeneity: Box::new(|y| [y.cos(), 0.5]),
            halfline: if left { HalfLine::LeftFrom(start) } else { HalfLine::RightFrom(start) },
            mu_bound: 2.0 * row / rate,
        };
        let sol = solve_volterra(&p, &g, 1e-13, 500).unwrap();
        prop_assert!(sol.sup_norm() <= p.mu_bound.exp());
    }

    #[test]
    fn abel_invariant_holds_for_random_drifts(fam in 3usize..6, amp in -0.02f64..0.02, lambda in -0.5f64..1.99) {
        let (pot, s) = builtin_phi4();
        let g = Grid::new(20.0, 2048).unwrap();
        let b = Field::bump(FAMILIES[fam], amp, 1.0, 0.0);
        let pd = PerturbationData::from_parts(&pot, &s, &g, |y| b.value(y), |y| 0.01 * (-y * y).exp());
        let e = evans(&pd, lambda).unwrap();
        prop_assert!(e.abel_residual < 1e-7, "{}", e.abel_residual);
    }

    #[test]
    fn jost_solutions_decay_uniformly(lambda in -0.5f64..0.95, m in 0usize..2) {
        let (pot, s) = if m == 0 { builtin_phi4() } else { builtin_sine_gordon() };
        let lambda = lambda * pot.m_sq;
        let bound = |n: usize| {
            let g = Grid::new(20.0, n).unwrap();
            let op = LinearOperator::new(g, pot.m_sq, |y| pot.d2f(s.profile(y)) - pot.m_sq, |_| 0.0);
            jost(&op, lambda, Direction::PlusInfinity, &JostOptions::without_cross_check()).unwrap().decay_constant()
        };
        let (c1, c2) = (bound(1024), bound(2048));
        prop_assert!(c1.is_finite() && (c1 - c2).abs() < 1e-6 * c2);
    }

    #[test]
    fn sturm_count_matches_evans_count(amp in -0.02f64..0.02, level in -0.2f64..1.95) {
        let (pot, s) = builtin_phi4();
        let g = Grid::new(20.0, 2048).unwrap();
        let d = move |y: f64| amp * (-y * y).exp();
        let pd = PerturbationData::from_parts(&pot, &s, &g, |_| 0.0, d);
        let spec = find_eigenvalues(&pd, (-0.5, 1.99), &SpectralOptions { n_scan: 120, ..Default::default() }).unwrap();
        let dop = discretize_parts(&pot, &s, |_| 0.0, |_| 0.0, d, 20.0, 4096).unwrap();
        let evans_count = spec.eigenvalues.iter().filter(|e| e.lambda < level).count();
        // skip levels within the discretisation error of an eigenvalue
        let near = spec.eigenvalues.iter().any(|e| (e.lambda - level).abs() < 1e-4);
        prop_assume!(!near);
        prop_assert_eq!(dop.count_below(level), evans_count);
    }

    #[test]
    fn oracle_eigenvalues_are_sorted_and_decay(amp in -0.02f64..0.02) {
        let (pot, s) = builtin_phi4();
        let dop = discretize_parts(&pot, &s, |_| 0.0, |_| 0.0, move |y| amp / y.cosh(), 20.0, 2048).unwrap();
        let pairs = eigen_bottom(&dop, 2).unwrap();
        prop_assert!(pairs[0].lambda < pairs[1].lambda);
        let rate = kink_core::oracle::decay_rate(&dop, &pairs[1].vector);
        let k = (pot.m_sq - pairs[1].lambda).sqrt();
        prop_assert!((rate + k).abs() < 0.05 * k, "{} vs {}", rate, k);
    }

    #[test]
    fn dq_recovers_shifts(shift in -1.0f64..1.0) {
        let (pot, s) = builtin_phi4();
        let g = Grid::new(20.0, 2048).unwrap();
        let t = KinkT::unperturbed(&pot, &s, &g);
        let r = Reference::exact(&t, g);
        let d = dq_distance(&g.sample(|y| t.t(y + shift)), &r, 1.0, 0.0);
        prop_assert!(d.value < 1e-8 && (d.xi_star - shift).abs() < 1e-4, "{:?}", d);
    }

    #[test]
    fn perturbations_have_the_requested_norm(seed in any::<u64>(), eps in 1e-4f64..1e-1, share in 0.0f64..1.0) {
        let g = Grid::new(20.0, 1024).unwrap();
        let p = Perturbation { shape: PerturbationShape::Random { seed, bandwidth: 2.0, radius: 5.0, center: 0.0 }, eps, velocity_share: share };
        let (v1, v2) = p.build(&g).unwrap();
        let total = h1_l2_sq(&v1, g.step()).0 + h1_l2_sq(&v2, g.step()).1;
        prop_assert!((total.sqrt() - eps).abs() < 1e-12 * eps.max(1.0));
        prop_assert_eq!(p.build(&g).unwrap(), (v1, v2));
    }

    #[test]
    fn kink_derivative_matches_profile(m in 0usize..2) {
        let (_, s) = if m == 0 { builtin_phi4() } else { builtin_sine_gordon() };
        let g = Grid::new(10.0, 2048).unwrap();
        let prof = g.sample(|y| s.profile(y));
        let d = derivative(&prof, g.step());
        let err = (0..g.len()).map(|i| (d[i] - s.derivative(g.point(i))).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-8);
    }
}
