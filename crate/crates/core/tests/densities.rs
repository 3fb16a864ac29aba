use ncleaf::densities::{
    bump_integral, fit_to_lattice, Bump, Density, Domain, Factor, Submersion, BUMP_INTEGRAL_1D,
};
use ncleaf::quadrature::QuadConfig;
use ncleaf::{Error, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn interval(lo: f64, hi: f64) -> Factor {
    Factor::Interval { lo, hi }
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn profile(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn random_bumps(rng: &mut ChaCha8Rng, domain: &Domain, lows: &[f64], highs: &[f64], count: usize) -> Density {
    let bumps = (0..count)
        .map(|_| {
            let radius: Vec<f64> = lows.iter().zip(highs).map(|(l, h)| rng.gen_range(0.05..0.25 * (h - l))).collect();
            let center: Vec<f64> = lows.iter().zip(highs).zip(&radius).map(|((l, h), r)| rng.gen_range(l + r..h - r)).collect();
            Bump::new(center, radius, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        })
        .collect();
    Density::bumps(domain.clone(), bumps).unwrap()
}

#[test]
fn one_dimensional_bump_integral() {
    let oracle = simpson(profile, -1.0, 1.0, 200_000);
    assert!((oracle - BUMP_INTEGRAL_1D).abs() < 1e-12);
    assert!((bump_integral(1) - oracle).abs() < 1e-12);
    let quad = QuadConfig::default();
    for r in [0.05, 0.1, 0.3] {
        let d = Density::bumps(Domain::new(vec![interval(-1.0, 1.0)]), vec![Bump::new(vec![0.2], vec![r], ONE)]).unwrap();
        assert!((d.integrate(&quad) - r * oracle).norm() < 1e-12);
        assert!((d.integrate_by_values(&quad) - r * oracle).norm() < 1e-10);
    }
}

#[test]
fn two_dimensional_bump_integral() {
    // iterated Simpson on the square
    let inner = |x: f64| simpson(|y| if x * x + y * y < 1.0 { (-1.0 / (1.0 - x * x - y * y)).exp() } else { 0.0 }, -1.0, 1.0, 2000);
    let oracle = simpson(inner, -1.0, 1.0, 2000);
    assert!((bump_integral(2) - oracle).abs() < 1e-8);
}

#[test]
fn zero_density_integrates_to_zero() {
    let quad = QuadConfig::default();
    assert_eq!(Density::zero(Domain::chart(1)).integrate(&quad), C64::new(0.0, 0.0));
    assert_eq!(Density::zero(Domain::torus()).integrate_by_values(&quad), C64::new(0.0, 0.0));
}

#[test]
fn product_case_is_fubini() {
    let quad = QuadConfig::default();
    let g = Density::bumps(Domain::chart(0), vec![Bump::new(vec![0.3, 0.25], vec![0.15, 0.2], C64::new(0.5, 1.0))]).unwrap();
    let h_bump = Bump::new(vec![0.03], vec![0.1], ONE);
    let h_mass = h_bump.mass();
    let h = Density::bumps(Domain::new(vec![interval(-0.2, 0.2)]), vec![h_bump]).unwrap();
    let f = Density::tensor(&g, &h);
    let proj = Submersion::projection(f.domain().clone(), 1).unwrap();
    let pushed = Density::push(&proj, &f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..30 {
        let z = [rng.gen_range(0.15..0.45), rng.gen_range(0.05..0.45)];
        assert!((pushed.eval(&z, &quad) - g.eval(&z, &quad) * h_mass).norm() < 1e-10);
    }
}

#[test]
fn odd_fiber_cancels() {
    let quad = QuadConfig::default();
    let g = Density::bumps(Domain::chart(2), vec![Bump::new(vec![0.3, 0.8], vec![0.2, 0.2], ONE)]).unwrap();
    let odd = Density::bumps(
        Domain::new(vec![interval(-0.2, 0.2)]),
        vec![Bump::new(vec![0.1], vec![0.08], ONE), Bump::new(vec![-0.1], vec![0.08], -ONE)],
    )
    .unwrap();
    let f = Density::tensor(&g, &odd);
    let pushed = Density::push(&Submersion::projection(f.domain().clone(), 1).unwrap(), &f).unwrap();
    let mut sup: f64 = 0.0;
    for i in 0..20 {
        for j in 0..20 {
            let z = [0.01 + 0.58 * i as f64 / 19.0, 0.51 + 0.58 * j as f64 / 19.0];
            sup = sup.max(pushed.eval(&z, &quad).norm());
        }
    }
    assert!(sup <= 1e-12, "sup {sup:e}");
}

#[test]
fn nested_projections_compose() {
    let quad = QuadConfig::default();
    let domain = Domain::new(vec![Factor::chart(0), interval(-0.2, 0.2), interval(-0.3, 0.3)]);
    let to_oi = Submersion::projection(domain.clone(), 2).unwrap();
    let to_o = Submersion::projection(to_oi.target.clone(), 1).unwrap();
    let direct = to_oi.then(&to_o).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let f = random_bumps(&mut rng, &domain, &[0.0, 0.0, -0.2, -0.3], &[0.6, 0.6, 0.2, 0.3], 2);
        let nested = Density::push(&to_o, &Density::push(&to_oi, &f).unwrap()).unwrap();
        let once = Density::push(&direct, &f).unwrap();
        for _ in 0..4 {
            let z = [rng.gen_range(0.05..0.55), rng.gen_range(0.05..0.55)];
            assert!((nested.eval(&z, &quad) - once.eval(&z, &quad)).norm() < 1e-9);
        }
    }
}

#[test]
fn linear_change_of_variables_carries_the_jacobian() {
    let quad = QuadConfig::default();
    let f = Density::bumps(Domain::new(vec![interval(-1.0, 1.0)]), vec![Bump::new(vec![0.1], vec![0.4], ONE)]).unwrap();
    let stretch = Submersion::affine(f.domain().clone(), Domain::new(vec![interval(-2.5, 2.5)]), vec![vec![2.0]], vec![0.3]).unwrap();
    let g = Density::push(&stretch, &f).unwrap();
    for x in [-1.0, -0.2, 0.4, 0.55, 1.1] {
        let expected = f.eval(&[(x - 0.3) / 2.0], &quad) / 2.0;
        assert!((g.eval(&[x], &quad) - expected).norm() < 1e-14);
    }
    assert!((g.integrate(&quad) - f.integrate(&quad)).norm() < 1e-14);
}

#[test]
fn tensor_examples() {
    let quad = QuadConfig::default();
    let a = Density::bumps(Domain::chart(1), vec![Bump::new(vec![0.8, 0.3], vec![0.1, 0.2], C64::new(0.0, 2.0))]).unwrap();
    let b = Density::bumps(Domain::new(vec![interval(-0.2, 0.2)]), vec![Bump::new(vec![0.0], vec![0.15], ONE)]).unwrap();
    let t = Density::tensor(&a, &b);
    assert!((t.integrate(&quad) - a.integrate(&quad) * b.integrate(&quad)).norm() < 1e-14);
    assert!((t.integrate_by_values(&quad) - a.integrate(&quad) * b.integrate(&quad)).norm() < 1e-10);
    let zero = Density::tensor(&a, &Density::zero(b.domain().clone()));
    assert_eq!(zero.integrate(&quad), C64::new(0.0, 0.0));
    assert_eq!(zero.eval(&[0.8, 0.3, 0.0], &quad), C64::new(0.0, 0.0));
}

#[test]
fn trigonometric_coefficients_are_recovered() {
    let quad = QuadConfig::default();
    let f = Density::trig(vec![([1, -2], C64::new(0.5, 0.25)), ([0, 0], ONE)]);
    assert!((f.fourier([1, -2], &quad) - C64::new(0.5, 0.25)).norm() < 1e-15);
    assert!((f.fourier([0, 0], &quad) - ONE).norm() < 1e-15);
    assert!(f.fourier([2, 2], &quad).norm() < 1e-15);
    assert!((f.integrate_by_values(&quad) - ONE).norm() < 1e-12);
}

#[test]
fn degenerate_maps_are_rejected() {
    let domain = Domain::new(vec![Factor::chart(0), interval(-0.2, 0.2)]);
    let flat = Submersion::affine(domain, Domain::torus(), vec![vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]], vec![0.0, 0.0]);
    assert!(matches!(flat, Err(Error::NotSubmersion(_))));
}

#[test]
fn lattice_fit_examples() {
    let quad = QuadConfig::default();
    let lower = [0.0, 0.5];
    let pitch = 0.6 / 16.0;
    let exact = Density::bumps(
        Domain::chart(2),
        vec![Bump::new(vec![lower[0] + 7.0 * pitch, lower[1] + 5.0 * pitch], vec![2.0 * pitch, 2.0 * pitch], C64::new(1.5, -0.5))],
    )
    .unwrap();
    let fit = fit_to_lattice(&exact, 1e-8, &quad).unwrap();
    assert!(fit.residual < 1e-8);
    assert!((fit.density.integrate(&quad) - exact.integrate(&quad)).norm() < 1e-8);

    let narrow = Density::bumps(Domain::chart(2), vec![Bump::new(vec![0.31, 0.79], vec![0.01, 0.01], ONE)]).unwrap();
    assert!(matches!(fit_to_lattice(&narrow, 1e-3, &quad), Err(Error::FitResidualTooLarge { .. })));

    let line = Density::zero(Domain::new(vec![interval(0.0, 1.0)]));
    assert!(matches!(fit_to_lattice(&line, 1.0, &quad), Err(Error::PreconditionViolated(_))));
}

#[test]
fn mass_routes_agree_in_three_dimensions() {
    let quad = QuadConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let domain = Domain::new(vec![Factor::chart(3), interval(-0.2, 0.2)]);
    let f = random_bumps(&mut rng, &domain, &[0.5, 0.5, -0.2], &[1.1, 1.1, 0.2], 3);
    assert!((f.integrate(&quad) - f.integrate_by_values(&quad)).norm() < 1e-9);
}

#[test]
fn flowed_pushforward_mass_by_values() {
    let quad = QuadConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let domain = Domain::new(vec![Factor::chart(0), interval(-0.2, 0.2)]);
    let f = random_bumps(&mut rng, &domain, &[0.0, 0.0, -0.2], &[0.6, 0.6, 0.2], 2);
    let p = Submersion::flowed(domain, &[vec![1.0, 0.0], vec![0.0, 1.0]], [0.0, 0.0], 0.618).unwrap();
    let pushed = Density::push(&p, &f).unwrap();
    assert!((pushed.integrate_by_values(&quad) - f.integrate(&quad)).norm() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mass_routes_agree(seed in any::<u64>()) {
        let quad = QuadConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_bumps(&mut rng, &Domain::chart(1), &[0.5, 0.0], &[1.1, 0.6], 3);
        let exact = f.integrate(&quad);
        let coarse = (exact - f.integrate_by_values(&quad)).norm();
        let fine = (exact - f.integrate_by_values(&quad.refined())).norm();
        prop_assert!(coarse < 1e-6);
        prop_assert!(fine <= coarse / 4.0 || fine < 1e-12);
    }

    #[test]
    fn pushforward_preserves_mass(seed in any::<u64>(), lambda in 0.1f64..0.9) {
        let quad = QuadConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let domain = Domain::new(vec![Factor::chart(0), interval(-0.2, 0.2)]);
        let f = random_bumps(&mut rng, &domain, &[0.0, 0.0, -0.2], &[0.6, 0.6, 0.2], 2);
        let p = Submersion::flowed(domain, &[vec![1.0, 0.0], vec![0.0, 1.0]], [0.0, 0.0], lambda).unwrap();
        let pushed = Density::push(&p, &f).unwrap();
        prop_assert!((pushed.integrate(&quad) - f.integrate(&quad)).norm() < 1e-12);
    }

    #[test]
    fn composed_maps_apply_in_order(a in -2.0f64..2.0, b in -2.0f64..2.0, c in 0.5f64..2.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let src = Domain::new(vec![interval(-5.0, 5.0), interval(-5.0, 5.0)]);
        let mid = Domain::new(vec![interval(-50.0, 50.0), interval(-50.0, 50.0)]);
        let first = Submersion::affine(src, mid.clone(), vec![vec![c, a], vec![0.0, 1.0]], vec![b, 0.0]).unwrap();
        let second = Submersion::projection(mid, 1).unwrap();
        let both = first.then(&second).unwrap();
        prop_assert!((both.apply(&[x, y])[0] - second.apply(&first.apply(&[x, y]))[0]).abs() < 1e-12);
    }
}
