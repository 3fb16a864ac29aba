use ncleaf::config::Config;
use ncleaf::densities::{Bump, Density, Domain};
use ncleaf::diffeology::{q_chart, time_bump, DiffClass, IdealWitness};
use ncleaf::groupoid::{mode_frequency, GroupoidKernel, ModBump, TimeFn};
use ncleaf::phi::{
    diagram_deviations, evaluate_witness, injectivity_witness, phase_defect, phi, phi_fourier, phi_section, star_hom_check,
    PhiWitness, Structure,
};
use ncleaf::plot::Plot;
use ncleaf::{Error, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn simpson_c(f: impl Fn(f64) -> C64, a: f64, b: f64, n: usize) -> C64 {
    let h = (b - a) / n as f64;
    let inner: C64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * (h / 3.0)
}

fn random_kernel(rng: &mut ChaCha8Rng, lambda: f64) -> GroupoidKernel {
    let mut k = GroupoidKernel::zero(8, lambda);
    for mode in [[0, 0], [rng.gen_range(-2..=2), rng.gen_range(-2..=2)]] {
        let b = ModBump {
            center: rng.gen_range(-0.2..0.2),
            radius: rng.gen_range(0.1..0.3),
            amp: C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            freq: 0.0,
        };
        k.add_term(mode, TimeFn::bump(b)).unwrap();
    }
    k
}

#[test]
fn zero_maps_to_zero_both_ways() {
    let cfg = Config::default();
    let zero = GroupoidKernel::zero(8, cfg.lambda);
    assert!(phi(&zero, &cfg).unwrap().equals(&DiffClass::zero(&cfg), 0.0));
    assert_eq!(phi_section(&DiffClass::zero(&cfg)).modes().count(), 0);
}

#[test]
fn mass_of_the_image_is_the_integral_of_the_constant_mode() {
    let cfg = Config::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let k = random_kernel(&mut rng, cfg.lambda);
        let c0 = k.mode([0, 0]).unwrap();
        let oracle = simpson_c(|t| c0.eval(t), -0.6, 0.6, 20_000);
        assert!((phi(&k, &cfg).unwrap().mass().value - oracle).norm() < 1e-9);
    }
}

#[test]
fn fourier_coefficients_by_two_routes() {
    let cfg = Config::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let k = random_kernel(&mut rng, cfg.lambda);
    let image = phi(&k, &cfg).unwrap();
    for (mode, c) in k.modes() {
        let w = mode_frequency(*mode, cfg.lambda);
        let oracle = simpson_c(|t| c.eval(t) * C64::from_polar(1.0, -std::f64::consts::TAU * w * t), -0.6, 0.6, 20_000);
        assert!((phi_fourier(&k, *mode, &cfg.quad) - oracle).norm() < 1e-9);
        assert!((image.representative().fourier(*mode, &cfg.quad) - oracle).norm() < 1e-8);
    }
    assert_eq!(phi_fourier(&k, [7, 7], &cfg.quad), C64::new(0.0, 0.0));
}

#[test]
fn section_is_a_right_inverse() {
    let cfg = Config::default();
    let f = Density::bumps(Domain::chart(0), vec![Bump::new(vec![0.3, 0.3], vec![0.2, 0.2], C64::new(0.5, 0.5))]).unwrap();
    let c = q_chart(0, &f, &cfg).unwrap();
    let back = phi(&phi_section(&c), &cfg).unwrap();
    assert!(back.equals(&c, 1e-7), "{:e}", back.distance(&c));
}

#[test]
fn homomorphism_checks_on_zero_kernels() {
    let cfg = Config::default();
    let zero = GroupoidKernel::zero(8, cfg.lambda);
    for s in [Structure::Group, Structure::Groupoid] {
        for r in star_hom_check(&zero, &zero, s, &cfg).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }
}

#[test]
fn group_structure_is_intertwined() {
    let cfg = Config::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (a, b) = (random_kernel(&mut rng, cfg.lambda), random_kernel(&mut rng, cfg.lambda));
    let reports = star_hom_check(&a, &b, Structure::Group, &cfg).unwrap();
    assert_eq!(reports.len(), 4);
    for r in reports {
        assert!(r.passed(), "{r:?}");
    }
    let (inv, mul) = diagram_deviations(500, 9, cfg.lambda);
    assert!(inv <= 1e-12 && mul <= 1e-12);
}

#[test]
fn zero_witness_passes_every_identity() {
    let cfg = Config::default();
    let w = PhiWitness { ideal: IdealWitness::zero(0, &cfg).unwrap(), eps: cfg.eps, lambda: cfg.lambda };
    let report = injectivity_witness(&w, &cfg.quad).unwrap();
    assert!(report.passed());
    assert_eq!(report.checks.len(), 5);
}

#[test]
fn lifted_kernel_is_the_thickened_image() {
    // g ⊗ ℓ on a chart: every identity except the class of f is evaluated pointwise
    let cfg = Config::default();
    let a = Density::bumps(Domain::chart(1), vec![Bump::new(vec![0.8, 0.3], vec![0.2, 0.2], ONE)]).unwrap();
    let w = PhiWitness { ideal: IdealWitness::odd_fiber(1, &a, &cfg).unwrap(), eps: cfg.eps, lambda: cfg.lambda };
    let report = evaluate_witness(&w, &cfg.quad).unwrap();
    for name in ["q_!(g) = 0", "r o sigma = id", "f = p_hat_!(g_hat)", "q_hat_!(g_hat) = 0"] {
        let c = report.checks.iter().find(|c| c.identity == name).unwrap();
        assert!(c.passed, "{c:?}");
    }
    // its class is the mass, which is zero for an ideal witness
    let f = w.lifted_kernel().unwrap();
    assert!(f.integrate(&cfg.quad).norm() < 1e-12);
}

#[test]
fn corrupted_witness_is_reported() {
    let cfg = Config::default();
    let f = Density::bumps(Domain::chart(0), vec![Bump::new(vec![0.3, 0.3], vec![0.2, 0.2], ONE)]).unwrap();
    let b1 = time_bump(0.0, 0.9 * cfg.eps, cfg.eps);
    let b2 = time_bump(0.0, 0.5 * cfg.eps, cfg.eps).scale(C64::new(0.9, 0.0));
    let ideal = IdealWitness::two_factorizations(&Plot::restriction(0), &f, &b1, &b2, &cfg).unwrap();
    let w = PhiWitness { ideal, eps: cfg.eps, lambda: cfg.lambda };
    match injectivity_witness(&w, &cfg.quad) {
        Err(Error::WitnessInconsistent { identity, deviation }) => {
            assert_eq!(identity, "q_!(g) = 0");
            assert!(deviation > 1e-3);
        }
        other => panic!("expected an inconsistent witness, got {other:?}"),
    }
}

#[test]
fn phase_defect_examples() {
    assert!(phase_defect(0.0) < 1e-15);
    assert!(phase_defect(3.0) < 1e-12);
    assert!((phase_defect(0.5) - 2.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn phi_is_linear(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let cfg = Config::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_kernel(&mut rng, cfg.lambda), random_kernel(&mut rng, cfg.lambda));
        let z = C64::new(re, im);
        let lhs = phi(&a.scale(z).add(&b).unwrap(), &cfg).unwrap();
        let rhs = phi(&a, &cfg).unwrap().scale(z).add(&phi(&b, &cfg).unwrap()).unwrap();
        prop_assert!(lhs.equals(&rhs, 1e-12));
    }
}
