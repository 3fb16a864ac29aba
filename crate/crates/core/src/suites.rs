//! Seeded verification suites. Each check yields one [`CheckReport`]; the
//! command line and the integration tests share these.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::densities::{Bump, Density, Domain, Factor, Submersion};
use crate::diffeology::{
    convolve_diff, ideal_generator, involution_diff, q_chart, q_plot, q_plot_with_bump, time_bump, unit_time_bump, DiffClass, IdealWitness,
};
use crate::error::Result;
use crate::groupoid::{
    convolve_groupoid, group_convolve, group_involution, involution_groupoid, mollifier, operator_norm, regular_representation, GroupoidElement,
    GroupoidKernel, ModBump, TimeFn,
};
use crate::nc_torus::{
    default_smoothing, interior_defect, multiply, powers_rieffel_projection, represent, star, trace, NcElement, Projection,
};
use crate::phi::{evaluate_witness, phi, phi_section, phi_section_with, star_hom_check, PhiWitness, Structure};
use crate::plot::Plot;
use crate::report::{sort_reports, CheckReport};
use crate::torus::{flow, Atlas, TorusPoint};
use crate::{cis, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Algebra,
    Groupoid,
    Diffeology,
    Phi,
    Density,
    All,
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "algebra" => Suite::Algebra,
            "groupoid" => Suite::Groupoid,
            "diffeology" => Suite::Diffeology,
            "phi" => Suite::Phi,
            "density" => Suite::Density,
            "all" => Suite::All,
            other => return Err(crate::Error::Parse(format!("unknown suite {other}"))),
        })
    }
}

/// Runs a suite and returns its reports sorted by check name.
pub fn run_suite(suite: Suite, config: &Config) -> Vec<CheckReport> {
    let mut out = match suite {
        Suite::Algebra => algebra_suite(config),
        Suite::Groupoid => groupoid_suite(config),
        Suite::Diffeology => diffeology_suite(config),
        Suite::Phi => phi_suite(config),
        Suite::Density => density_suite(config),
        Suite::All => [Suite::Algebra, Suite::Groupoid, Suite::Diffeology, Suite::Phi, Suite::Density]
            .into_iter()
            .flat_map(|s| run_suite(s, config))
            .collect(),
    };
    sort_reports(&mut out);
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_complex(rng: &mut impl Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `terms` random monomials `u^m v^n` with `|m|, |n| ≤ radius`.
pub fn random_element(rng: &mut impl Rng, radius: i32, terms: usize) -> NcElement {
    NcElement::from_terms((0..terms).map(|_| ((rng.gen_range(-radius..=radius), rng.gen_range(-radius..=radius)), unit_complex(rng))))
}

/// Three modes with `|m|, |n| ≤ 2`, each carrying a bump in time near 0.
pub fn random_kernel(rng: &mut impl Rng, config: &Config) -> GroupoidKernel {
    let mut k = GroupoidKernel::zero(config.bandlimit, config.lambda);
    for _ in 0..3 {
        let mode = [rng.gen_range(-2..=2), rng.gen_range(-2..=2)];
        let b = ModBump { center: rng.gen_range(-0.3..0.3), radius: rng.gen_range(0.2..0.4), amp: unit_complex(rng), freq: 0.0 };
        k.add_term(mode, TimeFn::bump(b)).expect("modes within every bandlimit used");
    }
    k
}

/// Like [`random_kernel`] but always with a mass-carrying `(0, 0)` mode.
pub fn random_massive_kernel(rng: &mut impl Rng, config: &Config) -> GroupoidKernel {
    let mut k = random_kernel(rng, config);
    let b = ModBump::with_mass(rng.gen_range(-0.1..0.1), rng.gen_range(0.1..0.3), unit_complex(rng));
    k.add_term([0, 0], TimeFn::bump(b)).expect("mode (0,0)");
    k
}

/// One or two bumps inside chart `chart`, clear of its edges.
pub fn random_chart_density(rng: &mut impl Rng, chart: usize) -> Density {
    let ch = Atlas::standard().chart(chart);
    let bumps = (0..rng.gen_range(1..=2))
        .map(|_| {
            let r = [rng.gen_range(0.05..0.15), rng.gen_range(0.05..0.15)];
            let center = (0..2).map(|k| ch.lower[k] + r[k] + 0.01 + rng.gen_range(0.0..1.0) * (ch.side - 2.0 * r[k] - 0.02)).collect();
            Bump::new(center, r.to_vec(), unit_complex(rng))
        })
        .collect();
    Density::bumps(Domain::chart(chart), bumps).expect("bumps inside the chart")
}

/// Sum of two chart classes on random charts.
pub fn random_class(rng: &mut impl Rng, config: &Config) -> Result<DiffClass> {
    let (i, j) = (rng.gen_range(0..4), rng.gen_range(0..4));
    q_chart(i, &random_chart_density(rng, i), config)?.add(&q_chart(j, &random_chart_density(rng, j), config)?)
}

fn modes(n: i32) -> Vec<[i32; 2]> {
    (-n..=n).flat_map(|a| (-n..=n).map(move |b| [a, b])).collect()
}

/// Largest Fourier-coefficient difference of two torus densities on `|κ|∞ ≤ n`.
pub fn fourier_gap(a: &Density, b: &Density, n: i32, config: &Config) -> f64 {
    modes(n).iter().map(|m| (a.fourier(*m, &config.quad) - b.fourier(*m, &config.quad)).norm()).fold(0.0, f64::max)
}

/// Class distance and representative-level Fourier gap on `|κ|∞ ≤ 2`.
pub fn class_gap(a: &DiffClass, b: &DiffClass) -> f64 {
    a.distance(b).max(fourier_gap(a.representative(), b.representative(), 2, a.config()))
}

fn record(name: &str, tolerance: f64, config: &Config, value: Result<f64>) -> CheckReport {
    match value {
        Ok(v) => CheckReport::new(name, v, tolerance, config),
        Err(_) => CheckReport::errored(name, tolerance, config),
    }
}

// ---------------------------------------------------------------- algebra

/// Coefficientwise `‖uv - e^{2πiλ} vu‖`.
pub fn commutation_defect(lambda: f64) -> f64 {
    let (u, v) = (NcElement::u(), NcElement::v());
    multiply(&u, &v, lambda).sub(&multiply(&v, &u, lambda).scale(cis(lambda))).max_norm()
}

/// Maximal deviations of the *-algebra axioms over `trials` random triples:
/// `[associativity, antimultiplicativity, traciality, trace positivity]`.
/// The last entry is the most negative `Re trace(a*a)` clipped at 0.
pub fn star_algebra_defects(lambda: f64, trials: usize, seed: u64) -> [f64; 4] {
    let mut r = rng(seed);
    let triples: Vec<[NcElement; 3]> = (0..trials).map(|_| std::array::from_fn(|_| random_element(&mut r, 5, 12))).collect();
    let per = crate::par::map_slice(&triples, |[a, b, cc]| {
        let ab = multiply(a, b, lambda);
        let assoc = multiply(&ab, cc, lambda).sub(&multiply(a, &multiply(b, cc, lambda), lambda)).max_norm();
        let anti = star(&ab, lambda).sub(&multiply(&star(b, lambda), &star(a, lambda), lambda)).max_norm();
        let tracial = (trace(&ab) - trace(&multiply(b, a, lambda))).norm();
        let t = trace(&multiply(&star(a, lambda), a, lambda));
        [assoc, anti, tracial, (-t.re).max(0.0)]
    });
    per.into_iter().fold([0.0; 4], |acc, d| std::array::from_fn(|i| acc[i].max(d[i])))
}

/// `‖u u* - 1‖ + ‖u* u - 1‖ + ‖v v* - 1‖ + ‖v* v - 1‖`.
pub fn unitarity_defect(lambda: f64) -> f64 {
    let one = NcElement::one();
    [NcElement::u(), NcElement::v()]
        .iter()
        .map(|x| {
            let xs = star(x, lambda);
            multiply(x, &xs, lambda).sub(&one).max_norm() + multiply(&xs, x, lambda).sub(&one).max_norm()
        })
        .sum()
}

/// Interior mismatch of `ρ(ab)` and `ρ(a)ρ(b)` on random pairs.
pub fn representation_defect(lambda: f64, trials: usize, seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let (a, b) = (random_element(&mut r, 3, 8), random_element(&mut r, 3, 8));
        let n = 20;
        let lhs = represent(&multiply(&a, &b, lambda), n, lambda)?;
        let rhs = represent(&a, n, lambda)? * represent(&b, n, lambda)?;
        worst = worst.max(interior_defect(&lhs, &rhs, 7));
    }
    Ok(worst)
}

/// Projections at the given bandlimits with the default ramp width.
pub fn projection_sweep(lambda: f64, bandlimits: &[usize]) -> Result<Vec<Projection>> {
    bandlimits.iter().map(|&b| powers_rieffel_projection(lambda, default_smoothing(lambda), b, f64::INFINITY)).collect()
}

fn algebra_suite(cfg: &Config) -> Vec<CheckReport> {
    let l = cfg.lambda;
    let [assoc, anti, tracial, positive] = star_algebra_defects(l, 100, cfg.seed);
    let mut out = vec![
        CheckReport::new("algebra.commutation", commutation_defect(l), 1e-15, cfg),
        CheckReport::new("algebra.associativity", assoc, 1e-12, cfg),
        CheckReport::new("algebra.star_antimultiplicative", anti, 1e-14, cfg),
        CheckReport::new("algebra.trace_tracial", tracial, 1e-15, cfg),
        CheckReport::flag("algebra.trace_positive", positive == 0.0, cfg),
        CheckReport::new("algebra.unitarity", unitarity_defect(l), 0.0, cfg),
        record("algebra.representation", 1e-13, cfg, representation_defect(l, 10, cfg.seed)),
    ];
    match projection_sweep(l, &[16, 32, 48]) {
        Ok(ps) => {
            let e = &ps[2];
            let sa = star(&e.element, l).sub(&e.element).max_norm();
            out.push(CheckReport::new("algebra.projection_self_adjoint", sa, 1e-15, cfg));
            out.push(CheckReport::new("algebra.projection_residual", e.residual, 1e-3, cfg));
            out.push(CheckReport::flag("algebra.projection_monotone", ps.windows(2).all(|w| w[1].residual < w[0].residual), cfg));
            out.push(CheckReport::new("algebra.projection_trace", (e.trace - l).abs(), 1e-6, cfg));
        }
        Err(_) => out.push(CheckReport::errored("algebra.projection", 1e-3, cfg)),
    }
    out
}

// --------------------------------------------------------------- groupoid

/// Deviations of the groupoid product and involution axioms on random
/// kernels: `[associativity, antimultiplicativity, involutivity, bilinearity]`
/// for the groupoid structure, then associativity and antimultiplicativity
/// for the group structure of `T² × ℝ`.
pub fn groupoid_axiom_defects(config: &Config, trials: usize) -> Result<[f64; 6]> {
    let q = &config.quad;
    let mut r = rng(config.seed);
    let mut worst = [0.0f64; 6];
    for _ in 0..trials {
        let (a, b, cc) = (random_kernel(&mut r, config), random_kernel(&mut r, config), random_kernel(&mut r, config));
        let s = unit_complex(&mut r);
        let ab = convolve_groupoid(&a, &b, q)?;
        let assoc = convolve_groupoid(&ab, &cc, q)?.distance(&convolve_groupoid(&a, &convolve_groupoid(&b, &cc, q)?, q)?, q);
        let anti = involution_groupoid(&ab).distance(&convolve_groupoid(&involution_groupoid(&b), &involution_groupoid(&a), q)?, q);
        let invol = involution_groupoid(&involution_groupoid(&a)).distance(&a, q);
        let lin = convolve_groupoid(&a, &b.scale(s).add(&cc)?, q)?.distance(&ab.scale(s).add(&convolve_groupoid(&a, &cc, q)?)?, q);
        let gab = group_convolve(&a, &b, q)?;
        let g_assoc = group_convolve(&gab, &cc, q)?.distance(&group_convolve(&a, &group_convolve(&b, &cc, q)?, q)?, q);
        let g_anti = group_involution(&gab).distance(&group_convolve(&group_involution(&b), &group_involution(&a), q)?, q);
        let d = [assoc, anti, invol, lin, g_assoc, g_anti];
        worst = std::array::from_fn(|i| worst[i].max(d[i]));
    }
    Ok(worst)
}

/// `‖k ∗ e_η - k‖` for each `η`.
pub fn mollifier_errors(config: &Config, etas: &[f64]) -> Result<Vec<f64>> {
    let k = random_kernel(&mut rng(config.seed), config);
    etas.iter()
        .map(|&eta| Ok(convolve_groupoid(&k, &mollifier(eta, config.bandlimit, config.lambda), &config.quad)?.distance(&k, &config.quad)))
        .collect()
}

/// Pointwise defects over random arrows: `[r∘inv = s, composable products
/// have the right source and range]`.
pub fn groupoid_structure_defects(samples: usize, seed: u64, lambda: f64) -> Result<[f64; 2]> {
    let mut r = rng(seed);
    let (mut inv, mut comp) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let g = GroupoidElement::new(TorusPoint::new(r.gen(), r.gen()), r.gen_range(-1.0..1.0));
        inv = inv.max(g.inverse(lambda).range(lambda).distance(g.source()));
        let h = GroupoidElement::new(flow(g.base, -0.3, lambda), 0.3);
        let gh = crate::groupoid::groupoid_compose(&g, &h, lambda)?;
        comp = comp.max(gh.source().distance(h.source())).max(gh.range(lambda).distance(g.range(lambda)));
    }
    Ok([inv, comp])
}

/// `|‖ρ(k*∗k)‖ - ‖ρ(k)‖²| / ‖ρ(k)‖²` on the leaf through `p` for each
/// number of nodes in a fixed window.
pub fn cstar_gaps(k: &GroupoidKernel, config: &Config, resolutions: &[usize], window: f64) -> Result<Vec<f64>> {
    let kk = convolve_groupoid(&involution_groupoid(k), k, &config.quad)?;
    let p = TorusPoint::new(0.1, 0.2);
    Ok(resolutions
        .iter()
        .map(|&n| {
            let a = operator_norm(&regular_representation(k, p, n, window));
            let b = operator_norm(&regular_representation(&kk, p, n, window));
            (b - a * a).abs() / (a * a)
        })
        .collect())
}

fn groupoid_suite(cfg: &Config) -> Vec<CheckReport> {
    let mut out = Vec::new();
    match (groupoid_axiom_defects(cfg, 3), groupoid_axiom_defects(&cfg.refined(), 3)) {
        (Ok(coarse), Ok(fine)) => {
            out.push(CheckReport::new("groupoid.associativity", coarse[0], 1e-6, cfg));
            out.push(CheckReport::new("groupoid.involution_antimultiplicative", coarse[1], 1e-6, cfg));
            out.push(CheckReport::new("groupoid.involution_involutive", coarse[2], 1e-6, cfg));
            out.push(CheckReport::new("groupoid.bilinearity", coarse[3], 1e-6, cfg));
            out.push(CheckReport::new("groupoid.group_associativity", coarse[4], 1e-6, cfg));
            out.push(CheckReport::new("groupoid.group_involution_antimultiplicative", coarse[5], 1e-6, cfg));
            out.push(CheckReport::flag("groupoid.refinement_gain", converges(coarse[0], fine[0], 4.0) && converges(coarse[1], fine[1], 4.0), cfg));
        }
        _ => out.push(CheckReport::errored("groupoid.axioms", 1e-6, cfg)),
    }
    match mollifier_errors(cfg, &[0.2, 0.1, 0.05]) {
        Ok(e) => out.push(CheckReport::flag("groupoid.approximate_unit", e.windows(2).all(|w| w[1] < w[0]), cfg)),
        Err(_) => out.push(CheckReport::errored("groupoid.approximate_unit", 0.0, cfg)),
    }
    match groupoid_structure_defects(1000, cfg.seed, cfg.lambda) {
        Ok([inv, comp]) => {
            out.push(CheckReport::new("groupoid.range_of_inverse", inv, 1e-12, cfg));
            out.push(CheckReport::new("groupoid.composition_endpoints", comp, 1e-12, cfg));
        }
        Err(_) => out.push(CheckReport::errored("groupoid.structure", 1e-12, cfg)),
    }
    let k = random_kernel(&mut rng(cfg.seed.wrapping_add(1)), cfg);
    match cstar_gaps(&k, cfg, &[64, 128, 256], 4.0) {
        Ok(g) => out.push(CheckReport::flag("groupoid.cstar_trend", g.windows(2).all(|w| w[1] < w[0]), cfg)),
        Err(_) => out.push(CheckReport::errored("groupoid.cstar_trend", 0.0, cfg)),
    }
    out
}

/// Deviation roundoff cannot push below.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

/// `fine ≤ coarse / factor`, or both already at roundoff.
pub fn converges(coarse: f64, fine: f64, factor: f64) -> bool {
    fine <= coarse / factor || coarse.max(fine) <= ROUNDOFF_FLOOR
}

// ------------------------------------------------------------- diffeology

/// The eight algebra axioms on consecutive triples of `count` random
/// classes, in the order: associativity, left and right distributivity,
/// scalar compatibility, involutivity, antimultiplicativity, additivity
/// and conjugate homogeneity of the involution.
pub fn diffeology_axiom_defects(config: &Config, count: usize) -> Result<[f64; 8]> {
    let mut r = rng(config.seed);
    let classes = (0..count).map(|_| random_class(&mut r, config)).collect::<Result<Vec<_>>>()?;
    let scalars: Vec<C64> = (0..count).map(|_| unit_complex(&mut r)).collect();
    let idx: Vec<usize> = (0..count).collect();
    let per = crate::par::map_slice(&idx, |&i| -> Result<[f64; 8]> {
        let (a, b, cc) = (&classes[i], &classes[(i + 1) % count], &classes[(i + 2) % count]);
        let s = scalars[i];
        let ab = convolve_diff(a, b)?;
        let assoc = class_gap(&convolve_diff(&ab, cc)?, &convolve_diff(a, &convolve_diff(b, cc)?)?);
        let left = class_gap(&convolve_diff(a, &b.add(cc)?)?, &ab.add(&convolve_diff(a, cc)?)?);
        let right = class_gap(&convolve_diff(&a.add(b)?, cc)?, &convolve_diff(a, cc)?.add(&convolve_diff(b, cc)?)?);
        let scalar = class_gap(&ab.scale(s), &convolve_diff(&a.scale(s), b)?).max(class_gap(&ab.scale(s), &convolve_diff(a, &b.scale(s))?));
        let invol = class_gap(&involution_diff(&involution_diff(a)?)?, a);
        let anti = class_gap(&involution_diff(&ab)?, &convolve_diff(&involution_diff(b)?, &involution_diff(a)?)?);
        let additive = class_gap(&involution_diff(&a.add(b)?)?, &involution_diff(a)?.add(&involution_diff(b)?)?);
        let conj_hom = class_gap(&involution_diff(&a.scale(s))?, &involution_diff(a)?.scale(s.conj()));
        Ok([assoc, left, right, scalar, invol, anti, additive, conj_hom])
    });
    per.into_iter().try_fold([0.0f64; 8], |acc, d| {
        let d = d?;
        Ok(std::array::from_fn(|i| acc[i].max(d[i])))
    })
}

/// Largest sup of the canonical kernel over constructed ideal generators:
/// odd-in-time witnesses and differences of two factorisations, on every chart.
pub fn ideal_generator_sup(config: &Config) -> Result<f64> {
    let mut r = rng(config.seed);
    let mut worst: f64 = 0.0;
    for chart in 0..4 {
        let f = random_chart_density(&mut r, chart);
        let eps = config.eps;
        let witnesses = [
            IdealWitness::odd_fiber(chart, &f, config)?,
            IdealWitness::two_factorizations(&Plot::restriction(chart), &f, &unit_time_bump(eps), &time_bump(0.3 * eps, 0.5 * eps, eps), config)?,
            IdealWitness::zero(chart, config)?,
        ];
        for w in &witnesses {
            worst = worst.max(ideal_generator(w, config)?.canonical_kernel().sup_estimate(16));
        }
    }
    Ok(worst)
}

/// `Q_ψ(g)` against `Q_χ(q_!(g))` for `ψ = χ ∘ q` with `q(z, s) = z + s d`
/// from a square inside chart `i` times an interval.
pub fn q_coherence_defect(config: &Config, pairs: usize) -> Result<f64> {
    let mut r = rng(config.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let chart = r.gen_range(0..4);
        let ch = Atlas::standard().chart(chart);
        let lower = [ch.lower[0] + 0.1, ch.lower[1] + 0.1];
        let d = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let source = Domain::new(vec![Factor::Square { lower, side: 0.4 }, Factor::Interval { lo: -0.05, hi: 0.05 }]);
        let q = Submersion::affine(source.clone(), Domain::chart(chart), vec![vec![1.0, 0.0, d[0]], vec![0.0, 1.0, d[1]]], vec![0.0, 0.0])?;
        let chi = Plot::restriction(chart);
        let psi = chi.composed(source.clone(), &q.linear, &q.offset)?;
        let g = Density::bumps(
            source,
            vec![Bump::new(
                vec![lower[0] + r.gen_range(0.12..0.28), lower[1] + r.gen_range(0.12..0.28), r.gen_range(-0.02..0.02)],
                vec![r.gen_range(0.05..0.1), r.gen_range(0.05..0.1), 0.025],
                unit_complex(&mut r),
            )],
        )?;
        let lhs = q_plot(&psi, &g, config)?;
        let rhs = q_plot(&chi, &Density::push(&q, &g)?, config)?;
        worst = worst.max(class_gap(&lhs, &rhs));
    }
    Ok(worst)
}

/// `q_chart(i, f)` against `q_chart(j, f)` for `f` in the overlap of all charts.
pub fn chart_overlap_defect(config: &Config) -> Result<f64> {
    let mut r = rng(config.seed);
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let center = vec![0.55 + r.gen_range(-0.01..0.01), 0.55 + r.gen_range(-0.01..0.01)];
            let f = Density::bumps(Domain::chart(i), vec![Bump::new(center, vec![0.03, 0.03], unit_complex(&mut r))])?;
            let a = q_chart(i, &f, config)?;
            let b = q_chart(j, &f.rehome(Domain::chart(j))?, config)?;
            worst = worst.max(class_gap(&a, &b));
        }
    }
    Ok(worst)
}

/// `[q_plot(restriction_i, f) vs q_chart(i, f), two time bumps]`.
pub fn q_plot_defects(config: &Config) -> Result<[f64; 2]> {
    let mut r = rng(config.seed);
    let eps = config.eps;
    let (mut chart_gap, mut bump_gap) = (0.0f64, 0.0f64);
    for chart in 0..4 {
        let f = random_chart_density(&mut r, chart);
        let chi = Plot::restriction(chart);
        let via_plot = q_plot(&chi, &f, config)?;
        // the flow smears the representative, so only the classes agree
        chart_gap = chart_gap.max(via_plot.distance(&q_chart(chart, &f, config)?));
        let other = q_plot_with_bump(&chi, &f, &time_bump(-0.4 * eps, 0.5 * eps, eps), config)?;
        bump_gap = bump_gap.max(via_plot.distance(&other));
    }
    Ok([chart_gap, bump_gap])
}

fn diffeology_suite(cfg: &Config) -> Vec<CheckReport> {
    const NAMES: [&str; 8] = [
        "diffeology.product_associative",
        "diffeology.product_left_distributive",
        "diffeology.product_right_distributive",
        "diffeology.product_scalar",
        "diffeology.involution_involutive",
        "diffeology.involution_antimultiplicative",
        "diffeology.involution_additive",
        "diffeology.involution_conjugate_linear",
    ];
    let mut out = Vec::new();
    match diffeology_axiom_defects(cfg, 20) {
        Ok(d) => out.extend(NAMES.iter().zip(d).map(|(n, v)| CheckReport::new(*n, v, 1e-6, cfg))),
        Err(_) => out.push(CheckReport::errored("diffeology.axioms", 1e-6, cfg)),
    }
    out.push(record("diffeology.ideal_generators", 1e-6, cfg, ideal_generator_sup(cfg)));
    out.push(record("diffeology.q_coherence", 1e-7, cfg, q_coherence_defect(cfg, 20)));
    out.push(record("diffeology.chart_overlap", 1e-8, cfg, chart_overlap_defect(cfg)));
    match q_plot_defects(cfg) {
        Ok([a, b]) => {
            out.push(CheckReport::new("diffeology.q_plot_matches_chart", a, 1e-8, cfg));
            out.push(CheckReport::new("diffeology.q_plot_bump_independent", b, 1e-7, cfg));
        }
        Err(_) => out.push(CheckReport::errored("diffeology.q_plot", 1e-8, cfg)),
    }
    out
}

// -------------------------------------------------------------------- phi

/// `phi(phi_section(c))` against `c` over random classes: `[class
/// distance, Fourier gap inside the bandlimit]`.
pub fn section_roundtrip_defects(config: &Config, count: usize) -> Result<[f64; 2]> {
    let mut r = rng(config.seed);
    let mut worst = [0.0f64; 2];
    for _ in 0..count {
        let cl = random_class(&mut r, config)?;
        let back = phi(&phi_section(&cl), config)?;
        worst[0] = worst[0].max(cl.distance(&back));
        worst[1] = worst[1].max(fourier_gap(cl.representative(), back.representative(), 4, config));
    }
    Ok(worst)
}

/// Two section bumps give kernels with the same image.
pub fn section_bump_defect(config: &Config, count: usize) -> Result<f64> {
    let mut r = rng(config.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let cl = random_class(&mut r, config)?;
        let a = phi(&phi_section(&cl), config)?;
        let b = phi(&phi_section_with(&cl, ModBump::with_mass(0.03, config.eps / 4.0, c(1.0))), config)?;
        worst = worst.max(class_gap(&a, &b));
    }
    Ok(worst)
}

/// `phi(a k1 + k2)` against `a phi(k1) + phi(k2)`.
pub fn phi_linearity_defect(config: &Config, pairs: usize) -> Result<f64> {
    let mut r = rng(config.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let (k1, k2) = (random_massive_kernel(&mut r, config), random_massive_kernel(&mut r, config));
        let s = unit_complex(&mut r);
        let lhs = phi(&k1.scale(s).add(&k2)?, config)?;
        let rhs = phi(&k1, config)?.scale(s).add(&phi(&k2, config)?)?;
        worst = worst.max(class_gap(&lhs, &rhs));
    }
    Ok(worst)
}

/// Group-structure homomorphism deviations `[product, involution]` and the
/// two pointwise diagrams, maximised over random pairs.
pub fn hom_defects(config: &Config, pairs: usize) -> Result<[f64; 4]> {
    let mut r = rng(config.seed);
    let mut worst = [0.0f64; 4];
    for _ in 0..pairs {
        let (k1, k2) = (random_massive_kernel(&mut r, config), random_massive_kernel(&mut r, config));
        for (i, rep) in star_hom_check(&k1, &k2, Structure::Group, config)?.iter().enumerate() {
            worst[i] = worst[i].max(rep.max_deviation);
        }
    }
    Ok(worst)
}

/// Groupoid-structure transport deviations `[product, involution]`.
pub fn transport_defects(config: &Config, pairs: usize) -> Result<[f64; 2]> {
    let mut r = rng(config.seed);
    let mut worst = [0.0f64; 2];
    for _ in 0..pairs {
        let (k1, k2) = (random_massive_kernel(&mut r, config), random_massive_kernel(&mut r, config));
        for (i, rep) in star_hom_check(&k1, &k2, Structure::Groupoid, config)?.iter().enumerate() {
            worst[i] = worst[i].max(rep.max_deviation);
        }
    }
    Ok(worst)
}

/// Odd-in-time witness on a random chart density.
pub fn default_witness(config: &Config) -> Result<PhiWitness> {
    let mut r = rng(config.seed);
    let chart = r.gen_range(0..4);
    let ideal = IdealWitness::odd_fiber(chart, &random_chart_density(&mut r, chart), config)?;
    Ok(PhiWitness { ideal, eps: config.eps, lambda: config.lambda })
}

fn phi_suite(cfg: &Config) -> Vec<CheckReport> {
    let mut out = Vec::new();
    match section_roundtrip_defects(cfg, 20) {
        Ok([d, f]) => {
            out.push(CheckReport::new("phi.section_roundtrip", d, 1e-7, cfg));
            out.push(CheckReport::new("phi.section_roundtrip_fourier", f, 1e-7, cfg));
        }
        Err(_) => out.push(CheckReport::errored("phi.section_roundtrip", 1e-7, cfg)),
    }
    out.push(record("phi.section_bump_independent", 1e-7, cfg, section_bump_defect(cfg, 5)));
    out.push(record("phi.linearity", 1e-10, cfg, phi_linearity_defect(cfg, 50)));
    match (hom_defects(cfg, 5), hom_defects(&cfg.refined(), 5)) {
        (Ok(coarse), Ok(fine)) => {
            out.push(CheckReport::new("phi.group_product", coarse[0], 1e-6, cfg));
            out.push(CheckReport::new("phi.group_involution", coarse[1], 1e-6, cfg));
            out.push(CheckReport::new("phi.diagram_inversion", coarse[2], 1e-12, cfg));
            out.push(CheckReport::new("phi.diagram_multiplication", coarse[3], 1e-12, cfg));
            out.push(CheckReport::flag("phi.group_refinement_halves", converges(coarse[0], fine[0], 2.0) && converges(coarse[1], fine[1], 2.0), cfg));
        }
        _ => out.push(CheckReport::errored("phi.group_hom", 1e-6, cfg)),
    }
    match transport_defects(cfg, 3) {
        Ok([p, i]) => {
            out.push(CheckReport::new("phi.transport_product", p, 1e-6, cfg));
            out.push(CheckReport::new("phi.transport_involution", i, 1e-6, cfg));
        }
        Err(_) => out.push(CheckReport::errored("phi.transport", 1e-6, cfg)),
    }
    match default_witness(cfg).and_then(|w| evaluate_witness(&w, &cfg.quad)) {
        Ok(rep) => {
            for (i, chk) in rep.checks.iter().enumerate() {
                out.push(CheckReport::new(format!("phi.witness_{i}_{}", slug(&chk.identity)), chk.deviation, chk.tolerance, cfg));
            }
        }
        Err(_) => out.push(CheckReport::errored("phi.witness", 1e-7, cfg)),
    }
    out
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for ch in s.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

// ---------------------------------------------------------------- density

/// Nested pushforwards `chart × interval → chart → torus` with a random
/// shear: `[linearity (Fourier coefficients), functoriality (pointwise),
/// mass, support escapes]`.
pub fn density_defects(config: &Config, trials: usize) -> Result<[f64; 4]> {
    let q = &config.quad;
    let mut r = rng(config.seed);
    let mut worst = [0.0f64; 4];
    for _ in 0..trials {
        let chart = r.gen_range(0..4);
        let ch = Atlas::standard().chart(chart);
        let lower = [ch.lower[0] + 0.1, ch.lower[1] + 0.1];
        let source = Domain::new(vec![Factor::Square { lower, side: 0.4 }, Factor::Interval { lo: -0.05, hi: 0.05 }]);
        let d = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let psi = Submersion::affine(source.clone(), Domain::chart(chart), vec![vec![1.0, 0.0, d[0]], vec![0.0, 1.0, d[1]]], vec![0.0, 0.0])?;
        let phi_map = Submersion::into_torus(Domain::chart(chart))?;
        let composite = psi.then(&phi_map)?;
        let bump = |r: &mut ChaCha8Rng| {
            Bump::new(
                vec![lower[0] + r.gen_range(0.12..0.28), lower[1] + r.gen_range(0.12..0.28), r.gen_range(-0.02..0.02)],
                vec![r.gen_range(0.05..0.1), r.gen_range(0.05..0.1), 0.025],
                unit_complex(r),
            )
        };
        let f = Density::bumps(source.clone(), vec![bump(&mut r)])?;
        let g = Density::bumps(source.clone(), vec![bump(&mut r)])?;
        let s = unit_complex(&mut r);
        let combo = Density::combo(source, vec![(s, f.clone()), (c(1.0), g.clone())])?;
        let nested = Density::push(&phi_map, &Density::push(&psi, &f)?)?;
        let direct = Density::push(&composite, &f)?;
        let lin_lhs = Density::push(&composite, &combo)?;
        let lin_rhs = Density::combo(Domain::torus(), vec![(s, Density::push(&composite, &f)?), (c(1.0), Density::push(&composite, &g)?)])?;
        worst[0] = worst[0].max(fourier_gap(&lin_lhs, &lin_rhs, 2, config));
        let samples = crate::diffeology::domain_samples(&Domain::chart(chart), 12);

        let mass_in = f.integrate(q);
        let (lo, hi) = support_box(&f, &psi);
        for z in &samples {
            let v = direct.eval(z, q);
            worst[1] = worst[1].max((v - nested.eval(z, q)).norm());
            let inside = (0..2).all(|k| z[k] >= lo[k] - 1e-12 && z[k] <= hi[k] + 1e-12);
            if !inside && v.norm() > 1e-14 {
                worst[3] += 1.0;
            }
        }
        worst[2] = worst[2].max((direct.integrate_by_values(q) - mass_in).norm()).max((nested.integrate(q) - mass_in).norm());
    }
    Ok(worst)
}

/// Image of the bump box of `f` under the affine part of `map`.
fn support_box(f: &Density, map: &Submersion) -> ([f64; 2], [f64; 2]) {
    let bbox = f.bbox();
    let mut lo = [map.offset[0], map.offset[1]];
    let mut hi = lo;
    for i in 0..2 {
        for (j, a) in map.linear[i].iter().enumerate() {
            let (l, u) = bbox[j].expect("bump sums have bounded support");
            lo[i] += (a * l).min(a * u);
            hi[i] += (a * l).max(a * u);
        }
    }
    (lo, hi)
}

fn density_suite(cfg: &Config) -> Vec<CheckReport> {
    match density_defects(cfg, 6) {
        Ok([lin, func, mass, escapes]) => vec![
            CheckReport::new("density.linearity", lin, 1e-12, cfg),
            CheckReport::new("density.functoriality", func, 1e-9, cfg),
            CheckReport::new("density.mass_preserved", mass, 1e-9, cfg),
            CheckReport::new("density.support_contained", escapes, 0.0, cfg),
        ],
        Err(_) => vec![CheckReport::errored("density.pushforward", 1e-9, cfg)],
    }
}
