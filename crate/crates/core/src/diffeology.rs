//! The space `C∞_c(G)` of compactly supported densities on the leaf space
//! `G = T² / ℝ`, presented by densities on plots modulo the span of
//! `p_!(g)` with `q_!(g) = 0`.
//!
//! A class is carried by a representative density on the torus (the sum of
//! the chart slots, glued by the partition of unity). The ideal consists of
//! the zero-mean densities, so the total mass separates classes.

use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::config::Config;
use crate::densities::{Bump, Density, Domain, Estimate, Factor, Submersion};
use crate::error::{Error, Result};
use crate::groupoid::{GroupoidKernel, ModBump, TimeFn};
use crate::plot::Plot;
use crate::quadrature::QuadConfig;
use crate::C64;

#[derive(Clone, Debug)]
pub struct DiffClass {
    representative: Density,
    mass: Estimate,
    config: Config,
}

impl Serialize for DiffClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("DiffClass", 3)?;
        st.serialize_field("cover_tuple", &self.cover_tuple())?;
        st.serialize_field("canonical_kernel", &self.canonical_kernel())?;
        st.serialize_field("mass", &self.mass)?;
        st.end()
    }
}

impl DiffClass {
    /// The class of a density on the torus.
    pub fn from_representative(rep: Density, config: &Config) -> Result<Self> {
        if !rep.domain().compatible(&Domain::torus()) {
            return Err(Error::DomainMismatch(format!("class representatives live on the torus, got {:?}", rep.domain())));
        }
        let mass = rep.integrate_estimated(&config.quad);
        Ok(Self { representative: rep, mass, config: *config })
    }

    pub fn zero(config: &Config) -> Self {
        Self::from_representative(Density::zero(Domain::torus()), config).expect("zero lives on the torus")
    }

    pub fn representative(&self) -> &Density {
        &self.representative
    }

    pub fn mass(&self) -> Estimate {
        self.mass
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    /// Slot `j` is the representative times the partition weight of chart `j`.
    pub fn cover_tuple(&self) -> Vec<Density> {
        (0..4).map(|j| Density::weighted(j, self.representative.clone()).expect("torus density")).collect()
    }

    /// `mass · bump(t)` constant in space, with a unit-mass time bump of
    /// radius `ε/2`.
    pub fn canonical_kernel(&self) -> GroupoidKernel {
        let mut bump = ModBump::with_mass(0.0, self.config.eps / 2.0, C64::new(1.0, 0.0));
        bump.amp *= self.mass.value;
        GroupoidKernel::separable([0, 0], TimeFn::bump(bump), self.config.bandlimit, self.config.lambda).expect("mode (0,0)")
    }

    /// Distance between the canonical kernels (their masses).
    pub fn distance(&self, other: &Self) -> f64 {
        (self.mass.value - other.mass.value).norm()
    }

    /// Combined error estimate of the two canonical forms.
    pub fn combined_error(&self, other: &Self) -> f64 {
        self.mass.error + other.mass.error
    }

    pub fn equals(&self, other: &Self, tolerance: f64) -> bool {
        self.distance(other) <= tolerance + self.combined_error(other)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::from_representative(self.representative.add(&other.representative)?, &self.config)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::from_representative(self.representative.sub(&other.representative)?, &self.config)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_representative(self.representative.scale(c), &self.config).expect("same domain")
    }
}

/// `Q_i(f)`: the class of a density on chart `i`.
pub fn q_chart(chart: usize, f: &Density, config: &Config) -> Result<DiffClass> {
    if !f.domain().compatible(&Domain::chart(chart)) {
        return Err(Error::SupportEscape);
    }
    let rep = Density::push(&Submersion::into_torus(Domain::chart(chart))?, f)?;
    DiffClass::from_representative(rep, config)
}

/// Unit-mass bump on `(-ε, ε)`.
pub fn unit_time_bump(eps: f64) -> Density {
    time_bump(0.0, 0.95 * eps, eps)
}

/// Unit-mass bump on `(-ε, ε)` with the given centre and radius.
pub fn time_bump(center: f64, radius: f64, eps: f64) -> Density {
    Density::bumps(
        Domain::new(vec![Factor::Interval { lo: -eps, hi: eps }]),
        vec![Bump::with_mass(vec![center], vec![radius], C64::new(1.0, 0.0))],
    )
    .expect("bump inside its interval")
}

/// `p(y, s) = h(y) + (s, λs)` on `O_χ × (-ε, ε)`.
pub fn flow_submersion(chi: &Plot, config: &Config) -> Result<Submersion> {
    let Some(h) = &chi.h else {
        return Err(Error::NotSubmersion("a constant plot flows onto a single orbit".into()));
    };
    let domain = chi.domain.product(&Domain::new(vec![Factor::Interval { lo: -config.eps, hi: config.eps }]));
    Submersion::flowed(domain, &h.linear, h.offset, config.lambda)
}

/// `Q_χ(f)` with the default time bump.
pub fn q_plot(chi: &Plot, f: &Density, config: &Config) -> Result<DiffClass> {
    q_plot_with_bump(chi, f, &unit_time_bump(config.eps), config)
}

/// `Q_χ(f) = [p_!(f ⊗ b)]` for a unit-mass time bump `b`, so that
/// `q_!(f ⊗ b) = f` for the projection `q`.
pub fn q_plot_with_bump(chi: &Plot, f: &Density, bump: &Density, config: &Config) -> Result<DiffClass> {
    if !f.domain().compatible(&chi.domain) {
        return Err(Error::DomainMismatch("density and plot domains differ".into()));
    }
    let p = flow_submersion(chi, config)?;
    let g = Density::tensor(f, bump);
    DiffClass::from_representative(Density::push(&p, &g)?, config)
}

/// One term `coeff · g` on a plot `ψ` with submersions `p: ψ → T²` and
/// `q: ψ → O`.
#[derive(Clone, Debug)]
pub struct WitnessPiece {
    pub coeff: C64,
    pub p: Submersion,
    pub q: Submersion,
    pub g: Density,
}

/// A density on a disjoint union of plots whose `q`-pushforward vanishes.
#[derive(Clone, Debug)]
pub struct IdealWitness {
    pub pieces: Vec<WitnessPiece>,
}

impl IdealWitness {
    /// `g = a ⊗ o` with `o` odd in the flow time.
    pub fn odd_fiber(chart: usize, a: &Density, config: &Config) -> Result<Self> {
        let eps = config.eps;
        let odd = Density::bumps(
            Domain::new(vec![Factor::Interval { lo: -eps, hi: eps }]),
            vec![
                Bump::new(vec![0.5 * eps], vec![0.4 * eps], C64::new(1.0, 0.0)),
                Bump::new(vec![-0.5 * eps], vec![0.4 * eps], C64::new(-1.0, 0.0)),
            ],
        )?;
        let chi = Plot::restriction(chart);
        let p = flow_submersion(&chi, config)?;
        let q = Submersion::projection(p.source.clone(), 1)?;
        Ok(Self { pieces: vec![WitnessPiece { coeff: C64::new(1.0, 0.0), p, q, g: Density::tensor(a, &odd) }] })
    }

    /// `(f ⊗ b1) ⊖ (f ⊗ b2)`: two factorisations of the same density.
    pub fn two_factorizations(chi: &Plot, f: &Density, b1: &Density, b2: &Density, config: &Config) -> Result<Self> {
        let p = flow_submersion(chi, config)?;
        let q = Submersion::projection(p.source.clone(), chi.domain.factors.len())?;
        let piece = |coeff: f64, b: &Density| WitnessPiece { coeff: C64::new(coeff, 0.0), p: p.clone(), q: q.clone(), g: Density::tensor(f, b) };
        Ok(Self { pieces: vec![piece(1.0, b1), piece(-1.0, b2)] })
    }

    pub fn zero(chart: usize, config: &Config) -> Result<Self> {
        Self::odd_fiber(chart, &Density::zero(Domain::chart(chart)), config)
    }

    /// `Σ coeff · q_!(g)` as a density on the common plot.
    pub fn q_image(&self) -> Result<Density> {
        let domain = self.pieces.first().map(|p| p.q.target.clone()).ok_or(Error::EmptyFiberedProduct)?;
        let terms = self.pieces.iter().map(|pc| Ok((pc.coeff, Density::push(&pc.q, &pc.g)?))).collect::<Result<Vec<_>>>()?;
        Density::combo(domain, terms)
    }

    /// `Σ coeff · p_!(g)` on the torus.
    pub fn p_image(&self) -> Result<Density> {
        let terms = self.pieces.iter().map(|pc| Ok((pc.coeff, Density::push(&pc.p, &pc.g)?))).collect::<Result<Vec<_>>>()?;
        Density::combo(Domain::torus(), terms)
    }
}

/// Sample points on a grid inside a product domain.
pub fn domain_samples(domain: &Domain, per_axis: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = domain
        .factors
        .iter()
        .flat_map(|f| -> Vec<Vec<f64>> {
            let line = |lo: f64, hi: f64| (0..per_axis).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / per_axis as f64).collect::<Vec<f64>>();
            match *f {
                Factor::Square { lower, side } => vec![line(lower[0], lower[0] + side), line(lower[1], lower[1] + side)],
                Factor::Torus => vec![line(0.0, 1.0), line(0.0, 1.0)],
                Factor::Interval { lo, hi } => vec![line(lo, hi)],
            }
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points.into_iter().flat_map(|p| axis.iter().map(move |x| {
            let mut q = p.clone();
            q.push(*x);
            q
        })).collect();
    }
    points
}

/// Largest modulus of a density over grid samples of its domain.
pub fn sampled_sup(d: &Density, per_axis: usize, quad: &QuadConfig) -> f64 {
    let samples = domain_samples(d.domain(), per_axis);
    crate::par::map_slice(&samples, |z| d.eval(z, quad).norm()).into_iter().fold(0.0, f64::max)
}

pub const IDEAL_PRECONDITION_TOLERANCE: f64 = 1e-9;

/// The class of `p_!(g)` for a witness with `q_!(g) = 0`.
pub fn ideal_generator(w: &IdealWitness, config: &Config) -> Result<DiffClass> {
    let defect = sampled_sup(&w.q_image()?, 9, &config.quad);
    if defect > IDEAL_PRECONDITION_TOLERANCE {
        return Err(Error::PreconditionViolated(format!("q_!(g) has sup {defect:.3e}")));
    }
    DiffClass::from_representative(w.p_image()?, config)
}

/// Product induced by torus multiplication: `[m_!(F1 ⊗ F2)]`.
pub fn convolve_diff(a: &DiffClass, b: &DiffClass) -> Result<DiffClass> {
    let m = Submersion::torus_multiplication(&Domain::torus(), &Domain::torus())?;
    let rep = Density::push(&m, &Density::tensor(&a.representative, &b.representative))?;
    DiffClass::from_representative(rep, &a.config)
}

/// `[F] ↦ [conj(F) ∘ inversion]`.
pub fn involution_diff(a: &DiffClass) -> Result<DiffClass> {
    let inv = Submersion::inversion(Domain::torus())?;
    DiffClass::from_representative(Density::push(&inv, &a.representative.conj())?, &a.config)
}
