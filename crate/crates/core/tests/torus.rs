use ncleaf::densities::{Domain, Factor};
use ncleaf::periods::GOLDEN;
use ncleaf::plot::{fiber_product_plot, plot_inverse, plot_product, Plot, PlotKind};
use ncleaf::torus::{
    convergent_denominators, flow, orbit_density_horizon, orbit_distance_field, wrap_centered, Atlas, TorusPoint,
};
use ncleaf::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distance from each grid point to a dense sample of the orbit segment.
/// Sampling at step `h` overestimates the true distance by at most `h`.
fn sampled_orbit_distance(horizon: f64, n: usize, lambda: f64, h: f64) -> f64 {
    let steps = (horizon / h).ceil() as usize;
    let orbit: Vec<TorusPoint> = (0..=steps).map(|j| flow(TorusPoint::ORIGIN, (j as f64 * h).min(horizon), lambda)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for k in 0..n {
            let p = TorusPoint::new(i as f64 / n as f64, k as f64 / n as f64);
            let d = orbit.iter().map(|q| p.distance(*q)).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

/// Vertical spacing of the crossings of the orbit with each column `x`: the
/// orbit passes within half of the largest spacing of every grid point.
fn vertical_gap(horizon: f64, n: usize, lambda: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let x = i as f64 / n as f64;
        let mut ys: Vec<f64> = (0..).map(|j| x + j as f64).take_while(|t| *t <= horizon).map(|t| (lambda * t).rem_euclid(1.0)).collect();
        if ys.is_empty() {
            return f64::INFINITY;
        }
        ys.sort_by(f64::total_cmp);
        let mut gap = 1.0 - ys[ys.len() - 1] + ys[0];
        for w in ys.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        worst = worst.max(gap / 2.0);
    }
    worst
}

fn close(a: TorusPoint, b: TorusPoint, tol: f64) -> bool {
    a.distance(b) <= tol
}

#[test]
fn flow_examples() {
    assert_eq!(flow(TorusPoint::ORIGIN, 0.0, GOLDEN), TorusPoint::ORIGIN);
    let p = flow(TorusPoint::ORIGIN, 1.0, GOLDEN);
    assert_eq!(p.x, 0.0);
    assert!((p.y - GOLDEN).abs() < 1e-15);
}

#[test]
fn golden_convergents_are_fibonacci() {
    assert!(convergent_denominators(GOLDEN, 12).starts_with(&[1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144]));
}

#[test]
fn coarse_horizon_is_short_and_covers() {
    let t = orbit_density_horizon(0.5, GOLDEN).unwrap();
    assert!(t <= 4.0);
    assert!(sampled_orbit_distance(t, 100, GOLDEN, 1e-3) <= 0.5);
}

#[test]
fn fine_horizon_covers_on_a_200_grid() {
    let t = orbit_density_horizon(0.01, GOLDEN).unwrap();
    assert!(vertical_gap(t, 200, GOLDEN) <= 0.01);
    assert!(orbit_distance_field(t, 200, GOLDEN) <= 0.01);
}

#[test]
fn horizon_is_monotone_in_delta() {
    let deltas = [0.45, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.001];
    let horizons: Vec<f64> = deltas.iter().map(|&d| orbit_density_horizon(d, GOLDEN).unwrap()).collect();
    assert!(horizons.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn horizon_rejects_bad_delta() {
    for d in [0.0, 0.51, -0.1, 0.7, f64::NAN] {
        assert!(matches!(orbit_density_horizon(d, GOLDEN), Err(Error::InvalidDelta(_))));
    }
}

#[test]
fn field_examples() {
    assert!(orbit_distance_field(0.0, 50, GOLDEN) > 0.4);
    for delta in [0.2, 0.1, 0.05] {
        let t = orbit_density_horizon(delta, GOLDEN).unwrap();
        assert!(orbit_distance_field(t, 100, GOLDEN) <= delta);
        // the exact segment distance never exceeds a sampled one
        assert!(orbit_distance_field(t, 40, GOLDEN) <= sampled_orbit_distance(t, 40, GOLDEN, 2e-3) + 1e-12);
    }
}

#[test]
fn product_of_constants_is_constant() {
    let a = Plot::constant(Domain::chart(0), TorusPoint::new(0.2, 0.9));
    let b = Plot::constant(Domain::chart(1), TorusPoint::new(0.9, 0.3));
    let ab = plot_product(&a, &b);
    assert!(ab.is_constant());
    assert!(close(ab.eval(&[]), TorusPoint::new(0.1, 0.2), 1e-15));
    assert_eq!(ab.domain.dim(), 4);
}

#[test]
fn product_with_the_identity_plot_is_the_other_factor() {
    let chi = Plot::restriction(2);
    let unit = Plot::constant(Domain::new(vec![Factor::Interval { lo: -1.0, hi: 1.0 }]), TorusPoint::ORIGIN);
    let left = plot_product(&unit, &chi);
    let right = plot_product(&chi, &unit);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let (x, y, s) = (rng.gen_range(0.0..0.6), rng.gen_range(0.5..1.1), rng.gen_range(-1.0..1.0));
        assert!(close(left.eval(&[s, x, y]), chi.eval(&[x, y]), 1e-10));
        assert!(close(right.eval(&[x, y, s]), chi.eval(&[x, y]), 1e-10));
    }
}

#[test]
fn product_of_restrictions_adds_points() {
    let (a, b) = (Plot::restriction(1), Plot::restriction(3));
    let ab = plot_product(&a, &b);
    assert_eq!(ab.kind, PlotKind::Product);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let u = [rng.gen_range(0.5..1.1), rng.gen_range(0.0..0.6)];
        let v = [rng.gen_range(0.5..1.1), rng.gen_range(0.5..1.1)];
        let direct = TorusPoint::new(u[0] + v[0], u[1] + v[1]);
        assert!(close(ab.eval(&[u[0], u[1], v[0], v[1]]), direct, 1e-12));
    }
}

#[test]
fn inverse_examples() {
    let c = Plot::constant(Domain::chart(0), TorusPoint::new(0.25, 0.7));
    let ci = plot_inverse(&c);
    assert!(close(ci.eval(&[]), TorusPoint::new(0.75, 0.3), 1e-15));

    let chi = Plot::restriction(3).composed(Domain::chart(0), &[vec![1.0, 0.5], vec![0.0, 1.0]], &[0.5, 0.5]).unwrap();
    let inv = plot_inverse(&chi);
    let twice = plot_inverse(&inv);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let w = [rng.gen_range(0.0..0.6), rng.gen_range(0.0..0.6)];
        // χ⁻¹(-w) = χ(w)⁻¹
        assert!(close(inv.eval(&[-w[0], -w[1]]), chi.eval(&w).inverse(), 1e-12));
        assert!(close(twice.eval(&w), chi.eval(&w), 1e-12));
    }
}

#[test]
fn fiber_product_of_a_constant_plot_is_one_orbit() {
    let c = Plot::constant(Domain::chart(0), TorusPoint::ORIGIN);
    let fp = fiber_product_plot(&c, &[0.3, 0.3], 0.1, GOLDEN).unwrap();
    for s in [-0.09, -0.03, 0.0, 0.05, 0.09] {
        for y in [[0.1, 0.2], [0.4, 0.5]] {
            assert!(close(fp.p_eval(&[y[0], y[1], s]), flow(TorusPoint::ORIGIN, s, GOLDEN), 1e-15));
        }
    }
    assert!(matches!(fp.p(), Err(Error::NotSubmersion(_))));
}

#[test]
fn fiber_product_of_a_restriction_is_the_flow() {
    let fp = fiber_product_plot(&Plot::restriction(0), &[0.3, 0.3], 0.1, GOLDEN).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = fp.p().unwrap();
    for _ in 0..50 {
        let z: Vec<f64> = (0..3).map(|k| {
            let (lo, hi) = match fp.psi_domain.coords()[k] {
                ncleaf::densities::Coord::Periodic { lower, extent } => (lower, lower + extent),
                ncleaf::densities::Coord::Line { lo, hi } => (lo, hi),
            };
            rng.gen_range(lo..hi)
        }).collect();
        let direct = flow(TorusPoint::new(z[0], z[1]), z[2], GOLDEN);
        assert!(close(fp.p_eval(&z), direct, 1e-10));
        let pz = p.apply(&z);
        assert!(close(TorusPoint::new(pz[0], pz[1]), direct, 1e-10));
        assert_eq!(fp.q.apply(&z), vec![z[0], z[1]]);
    }
    let target = Atlas::standard().chart(fp.target_chart);
    assert!(target.contains(fp.p_eval(&[0.3, 0.3, 0.0])));
}

#[test]
fn oversized_flow_window_is_refused() {
    let chi = Plot::restriction(0);
    assert!(matches!(fiber_product_plot(&chi, &[0.3, 0.3], 0.8, GOLDEN), Err(Error::EpsilonTooLarge { .. })));
}

proptest! {
    #[test]
    fn flow_is_a_group_action(x in 0.0f64..1.0, y in 0.0f64..1.0, s in -5.0f64..5.0, t in -5.0f64..5.0, lambda in 0.01f64..0.99) {
        let p = TorusPoint::new(x, y);
        prop_assert!(close(flow(flow(p, s, lambda), t, lambda), flow(p, s + t, lambda), 1e-12));
        prop_assert!(close(flow(flow(p, t, lambda), -t, lambda), p, 1e-12));
    }

    #[test]
    fn partition_of_unity(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let atlas = Atlas::standard();
        let p = TorusPoint::new(x, y);
        let total: f64 = (0..4).map(|i| atlas.weight(i, p)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for i in 0..4 {
            let w = atlas.weight(i, p);
            prop_assert!(w >= 0.0);
            if w > 0.0 {
                prop_assert!(atlas.chart(i).contains(p));
            }
        }
    }

    #[test]
    fn wrap_centered_is_a_representative(x in -50.0f64..50.0) {
        let r = wrap_centered(x);
        prop_assert!(r.abs() <= 0.5);
        prop_assert!(((x - r) - (x - r).round()).abs() < 1e-12);
    }
}
