//! The map `Φ: C∞_c(T² ⋊_λ ℝ) → C∞_c(G)` induced by the range map, a
//! computable right inverse, and compatibility checks.

use serde::Serialize;

use crate::config::Config;
use crate::densities::{Density, Domain, Factor, Submersion};
use crate::diffeology::{convolve_diff, involution_diff, sampled_sup, DiffClass, IdealWitness};
use crate::error::{Error, Result};
use crate::groupoid::{convolve_groupoid, group_convolve, group_involution, hat_density, involution_groupoid, mode_frequency, GroupoidKernel, ModBump, TimeFn};
use crate::quadrature::QuadConfig;
use crate::torus::{flow, wrap_centered, TorusPoint};
use crate::{cis, C64};

/// `r(g, t) = g + (t, λt)` on `T² × (lo, hi)`.
pub fn range_submersion(time: (f64, f64), lambda: f64) -> Result<Submersion> {
    let domain = Domain::new(vec![Factor::Torus, Factor::Interval { lo: time.0, hi: time.1 }]);
    Submersion::flowed(domain, &[vec![1.0, 0.0], vec![0.0, 1.0]], [0.0, 0.0], lambda)
}

/// `Φ(k) = [r_!(k)]`.
pub fn phi(k: &GroupoidKernel, config: &Config) -> Result<DiffClass> {
    let Some(support) = k.time_support() else {
        return Ok(DiffClass::zero(config));
    };
    let r = range_submersion((support.0 - 1e-9, support.1 + 1e-9), k.lambda)?;
    DiffClass::from_representative(Density::push(&r, &Density::kernel(k.clone()))?, config)
}

/// Fourier coefficient of `r_!(k)` at `κ`: `∫ c_κ(t) e^{-2πi ω_κ t} dt`.
pub fn phi_fourier(k: &GroupoidKernel, mode: [i32; 2], quad: &QuadConfig) -> C64 {
    k.mode(mode).map_or(C64::new(0.0, 0.0), |f| f.fourier(mode_frequency(mode, k.lambda), quad))
}

/// Lifts a class along the section `x ↦ (x - (t, λt), t)` weighted by a
/// unit-mass bump of radius `ε/2`: `k(g, t) = F(flow(g, t)) b(t)`, with `F`
/// truncated to the configured bandlimit.
pub fn phi_section(c: &DiffClass) -> GroupoidKernel {
    let cfg = c.config();
    phi_section_with(c, ModBump::with_mass(0.0, cfg.eps / 2.0, C64::new(1.0, 0.0)))
}

pub fn phi_section_with(c: &DiffClass, bump: ModBump) -> GroupoidKernel {
    let cfg = c.config();
    let n = cfg.bandlimit;
    let modes: Vec<[i32; 2]> = (-n..=n).flat_map(|a| (-n..=n).map(move |b| [a, b])).collect();
    let coeffs = crate::par::map_slice(&modes, |m| c.representative().fourier(*m, &cfg.quad));
    let mut k = GroupoidKernel::zero(n, cfg.lambda);
    for (m, f) in modes.into_iter().zip(coeffs) {
        if f.norm() == 0.0 {
            continue;
        }
        let b = ModBump { amp: bump.amp * f, freq: bump.freq + mode_frequency(m, cfg.lambda), ..bump };
        k.add_term(m, TimeFn::bump(b)).expect("mode within bandlimit");
    }
    k
}

/// One line of a compatibility report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiReport {
    pub check: String,
    pub structure: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub status: String,
}

impl PhiReport {
    fn new(check: &str, structure: Structure, deviation: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            structure: structure.name().into(),
            max_deviation: deviation,
            tolerance,
            status: if deviation <= tolerance { "pass" } else { "fail" }.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == "pass"
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Structure {
    Group,
    Groupoid,
}

impl Structure {
    pub fn name(&self) -> &'static str {
        match self {
            Structure::Group => "group",
            Structure::Groupoid => "groupoid",
        }
    }
}

pub const HOM_TOLERANCE: f64 = 1e-6;
pub const DIAGRAM_TOLERANCE: f64 = 1e-12;

/// Largest difference of Fourier coefficients of two torus densities over
/// the modes `|κ|∞ ≤ n`, together with the total mass.
fn fourier_deviation(a: &Density, b: &Density, n: i32, quad: &QuadConfig) -> f64 {
    let modes: Vec<[i32; 2]> = (-n..=n).flat_map(|x| (-n..=n).map(move |y| [x, y])).collect();
    crate::par::map_slice(&modes, |m| (a.fourier(*m, quad) - b.fourier(*m, quad)).norm()).into_iter().fold(0.0, f64::max)
}

/// Checks that `Φ` intertwines products and involutions.
///
/// For the group structure of `T² × ℝ` the target product is the
/// torus-multiplication product of classes. For the groupoid structure the
/// target product is the one transported through `Φ` and its section.
pub fn star_hom_check(k1: &GroupoidKernel, k2: &GroupoidKernel, structure: Structure, config: &Config) -> Result<Vec<PhiReport>> {
    let quad = &config.quad;
    let n = 2 * config.bandlimit;
    let p1 = phi(k1, config)?;
    let p2 = phi(k2, config)?;
    let mut out = Vec::new();
    match structure {
        Structure::Group => {
            let lhs = phi(&group_convolve(k1, k2, quad)?, config)?;
            let rhs = convolve_diff(&p1, &p2)?;
            let dev = fourier_deviation(lhs.representative(), rhs.representative(), n, quad).max(lhs.distance(&rhs));
            out.push(PhiReport::new("phi_product", structure, dev, HOM_TOLERANCE));
            let lhs = phi(&group_involution(k1), config)?;
            let rhs = involution_diff(&p1)?;
            let dev = fourier_deviation(lhs.representative(), rhs.representative(), n, quad).max(lhs.distance(&rhs));
            out.push(PhiReport::new("phi_involution", structure, dev, HOM_TOLERANCE));
            let (inv, mul) = diagram_deviations(1000, config.seed, config.lambda);
            out.push(PhiReport::new("diagram_inversion", structure, inv, DIAGRAM_TOLERANCE));
            out.push(PhiReport::new("diagram_multiplication", structure, mul, DIAGRAM_TOLERANCE));
        }
        Structure::Groupoid => {
            let lhs = phi(&convolve_groupoid(k1, k2, quad)?, config)?;
            let transported = phi(&convolve_groupoid(&phi_section(&p1), &phi_section(&p2), quad)?, config)?;
            out.push(PhiReport::new("transport_product", structure, lhs.distance(&transported), HOM_TOLERANCE));
            let lhs = phi(&involution_groupoid(k1), config)?;
            let transported = phi(&involution_groupoid(&phi_section(&p1)), config)?;
            out.push(PhiReport::new("transport_involution", structure, lhs.distance(&transported), HOM_TOLERANCE));
        }
    }
    Ok(out)
}

/// Pointwise defects of `r(γ⁻¹) = -r(γ)` and `r(γ1 γ2) = r(γ1) + r(γ2)`
/// for the group structure of `T² × ℝ`.
pub fn diagram_deviations(samples: usize, seed: u64, lambda: f64) -> (f64, f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let r = |g: TorusPoint, t: f64| flow(g, t, lambda);
    let dist = |a: TorusPoint, b: TorusPoint| wrap_centered(a.x - b.x).abs().max(wrap_centered(a.y - b.y).abs());
    let (mut inv, mut mul) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let g1 = TorusPoint::new(rng.gen(), rng.gen());
        let g2 = TorusPoint::new(rng.gen(), rng.gen());
        let t1: f64 = rng.gen_range(-1.0..1.0);
        let t2: f64 = rng.gen_range(-1.0..1.0);
        inv = inv.max(dist(r(g1.inverse(), -t1), r(g1, t1).inverse()));
        mul = mul.max(dist(r(g1.add(g2), t1 + t2), r(g1, t1).add(r(g2, t2))));
    }
    (inv, mul)
}

/// Data of the injectivity argument: an ideal witness together with the
/// flow-time interval used to thicken it.
#[derive(Clone, Debug)]
pub struct PhiWitness {
    pub ideal: IdealWitness,
    pub eps: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub checks: Vec<IdentityCheck>,
}

impl WitnessReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const WITNESS_TOLERANCE: f64 = 1e-7;

impl PhiWitness {
    /// `p̂(z, t) = (p(z) - (t, λt), t)` from `ψ × (-ε, ε)` to `T² × ℝ`.
    pub fn p_hat(&self, p: &Submersion) -> Result<Submersion> {
        let n = p.source.dim();
        let source = p.source.product(&Domain::new(vec![Factor::Interval { lo: -self.eps, hi: self.eps }]));
        let mut linear = vec![vec![0.0; n + 1]; 3];
        for i in 0..2 {
            linear[i][..n].copy_from_slice(&p.linear[i]);
        }
        linear[0][n] = -1.0;
        linear[1][n] = -self.lambda;
        linear[2][n] = 1.0;
        let target = Domain::new(vec![Factor::Torus, Factor::Interval { lo: -self.eps, hi: self.eps }]);
        Submersion::affine(source, target, linear, vec![p.offset[0], p.offset[1], 0.0])
    }

    /// `q̂ = q × id`.
    pub fn q_hat(&self, q: &Submersion) -> Result<Submersion> {
        let (n, m) = (q.source.dim(), q.target.dim());
        let interval = Domain::new(vec![Factor::Interval { lo: -self.eps, hi: self.eps }]);
        let mut linear = vec![vec![0.0; n + 1]; m + 1];
        for i in 0..m {
            linear[i][..n].copy_from_slice(&q.linear[i]);
        }
        linear[m][n] = 1.0;
        let mut offset = q.offset.clone();
        offset.push(0.0);
        Submersion::affine(q.source.product(&interval), q.target.product(&interval), linear, offset)
    }

    /// `f = Σ coeff · p̂_!(ĝ)`, a kernel on `T² × (-ε, ε)`.
    pub fn lifted_kernel(&self) -> Result<Density> {
        let target = Domain::new(vec![Factor::Torus, Factor::Interval { lo: -self.eps, hi: self.eps }]);
        let terms = self
            .ideal
            .pieces
            .iter()
            .map(|pc| Ok((pc.coeff, Density::push(&self.p_hat(&pc.p)?, &hat_density(&pc.g, self.eps))?)))
            .collect::<Result<Vec<_>>>()?;
        Density::combo(target, terms)
    }
}

/// Evaluates every identity of the injectivity argument without stopping at
/// the first failure.
pub fn evaluate_witness(w: &PhiWitness, quad: &QuadConfig) -> Result<WitnessReport> {
    let mut checks = Vec::new();
    let mut push = |identity: &str, deviation: f64, tolerance: f64| {
        checks.push(IdentityCheck { identity: identity.into(), deviation, tolerance, passed: deviation <= tolerance });
    };
    push("q_!(g) = 0", sampled_sup(&w.ideal.q_image()?, 9, quad), crate::diffeology::IDEAL_PRECONDITION_TOLERANCE);

    // r ∘ σ = id for σ(x) = (x - (t, λt), t)
    let mut section_defect: f64 = 0.0;
    for i in 0..50 {
        let x = TorusPoint::new(0.37 * i as f64, 0.61 * i as f64);
        let t = w.eps * ((i as f64 * 0.73).fract() * 2.0 - 1.0);
        let back = flow(flow(x, -t, w.lambda), t, w.lambda);
        section_defect = section_defect.max(back.distance(x));
    }
    push("r o sigma = id", section_defect, DIAGRAM_TOLERANCE);

    // f = p̂_!(ĝ): the lazy pushforward against ℓ(t) · p_!(g)(flow(x, t))
    let f = w.lifted_kernel()?;
    let p_image = w.ideal.p_image()?;
    let ell = crate::diffeology::time_bump(0.0, 0.95 * w.eps, w.eps).scale(C64::new(2.0 * w.eps, 0.0));
    let samples = crate::diffeology::domain_samples(f.domain(), 7);
    let dev = crate::par::map_slice(&samples, |z| {
        let lhs = f.eval(z, quad);
        let x = flow(TorusPoint::new(z[0], z[1]), z[2], w.lambda);
        let rhs = ell.eval(&[z[2]], quad) * p_image.eval(&[x.x, x.y], quad);
        (lhs - rhs).norm()
    })
    .into_iter()
    .fold(0.0, f64::max);
    push("f = p_hat_!(g_hat)", dev, WITNESS_TOLERANCE);

    let q_terms = w
        .ideal
        .pieces
        .iter()
        .map(|pc| Ok((pc.coeff, Density::push(&w.q_hat(&pc.q)?, &hat_density(&pc.g, w.eps))?)))
        .collect::<Result<Vec<_>>>()?;
    let q_domain = q_terms.first().map(|t| t.1.domain().clone()).ok_or(Error::EmptyFiberedProduct)?;
    push("q_hat_!(g_hat) = 0", sampled_sup(&Density::combo(q_domain, q_terms)?, 7, quad), WITNESS_TOLERANCE);

    push("[f] = 0", sampled_sup(&f, 7, quad), WITNESS_TOLERANCE);
    Ok(WitnessReport { checks })
}

/// Runs the injectivity argument on a witness, failing with the first
/// identity that does not hold.
pub fn injectivity_witness(w: &PhiWitness, quad: &QuadConfig) -> Result<WitnessReport> {
    let report = evaluate_witness(w, quad)?;
    if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
        return Err(Error::WitnessInconsistent { identity: bad.identity.clone(), deviation: bad.deviation });
    }
    Ok(report)
}

/// Modulus of `e^{2πi x}` minus one, used to compare phases.
pub fn phase_defect(x: f64) -> f64 {
    (cis(x) - 1.0).norm()
}
