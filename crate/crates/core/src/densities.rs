//! Compactly supported smooth densities on products of chart squares,
//! tori and intervals, with fiber integration along affine submersions.
//!
//! A [`Density`] is an immutable expression tree. Leaves are explicit
//! (sums of bump profiles, trigonometric polynomials, groupoid kernels);
//! inner nodes are weighting by a partition function, tensor products,
//! pushforwards, linear combinations and conjugation. Pointwise values are
//! computed by quadrature along fibers; Fourier coefficients of a pushforward
//! are pulled back exactly to the source (Fubini), so masses never depend on
//! a pointwise discretisation.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groupoid::GroupoidKernel;
use crate::quadrature::{QuadConfig, Rule};
use crate::torus::{wrap, wrap_centered, Atlas, TorusPoint};
use crate::{cis, C64};

/// `∫_{-1}^{1} exp(-1/(1-s²)) ds`.
pub const BUMP_INTEGRAL_1D: f64 = 0.443_993_816_168_078_65;

/// The standard bump `exp(-1/(1-r²))` as a function of `r²`.
pub fn bump_profile(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// `∫_{|x|<1} exp(-1/(1-|x|²)) dx` in dimension `d`.
pub fn bump_integral(d: usize) -> f64 {
    static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = CACHE.get_or_init(|| {
        let rule = Rule::composite(0.0, 1.0, 64, 16);
        (0..=8)
            .map(|d| {
                if d == 0 {
                    return 1.0;
                }
                // surface area of the unit sphere in R^d
                let area = 2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d);
                area * rule.integrate(|r| r.powi(d as i32 - 1) * bump_profile(r * r))
            })
            .collect()
    });
    table[d]
}

/// `Γ(d/2)` for positive integers `d`.
fn gamma_half(d: usize) -> f64 {
    if d % 2 == 0 {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x < d as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// One factor of a product domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    /// Open square `lower + (0, side)²` of the torus, in lifted coordinates.
    Square { lower: [f64; 2], side: f64 },
    /// The whole torus, coordinates in `[0, 1)`.
    Torus,
    /// Open interval of the real line.
    Interval { lo: f64, hi: f64 },
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn chart(i: usize) -> Self {
        let c = Atlas::standard().chart(i);
        Factor::Square { lower: c.lower, side: c.side }
    }

    fn coord(&self, k: usize) -> Coord {
        match *self {
            Factor::Square { lower, side } => Coord::Periodic { lower: lower[k], extent: side },
            Factor::Torus => Coord::Periodic { lower: 0.0, extent: 1.0 },
            Factor::Interval { lo, hi } => Coord::Line { lo, hi },
        }
    }

    fn compatible(&self, other: &Factor) -> bool {
        match (self, other) {
            (Factor::Square { lower: a, side: s }, Factor::Square { lower: b, side: t }) => {
                (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12 && (s - t).abs() < 1e-12
            }
            (Factor::Torus, Factor::Torus) => true,
            (Factor::Interval { .. }, Factor::Interval { .. }) => true,
            _ => false,
        }
    }
}

/// How a single coordinate behaves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coord {
    /// Angle coordinate living in the window `[lower, lower + 1)`, and only
    /// `[lower, lower + extent)` belongs to the domain.
    Periodic { lower: f64, extent: f64 },
    Line { lo: f64, hi: f64 },
}

impl Coord {
    /// Lifts into the window; `None` outside the domain.
    fn normalize(&self, x: f64) -> Option<f64> {
        match *self {
            Coord::Periodic { lower, extent } => {
                let v = lower + wrap(x - lower);
                (extent >= 1.0 || (v > lower && v < lower + extent)).then_some(v)
            }
            Coord::Line { lo, hi } => (x > lo && x < hi).then_some(x),
        }
    }

    fn periodic(&self) -> bool {
        matches!(self, Coord::Periodic { .. })
    }

    fn full_range(&self) -> (f64, f64) {
        match *self {
            Coord::Periodic { lower, extent } => (lower, lower + extent.min(1.0)),
            Coord::Line { lo, hi } => (lo, hi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub factors: Vec<Factor>,
}

impl Domain {
    pub fn new(factors: Vec<Factor>) -> Self {
        Self { factors }
    }

    pub fn torus() -> Self {
        Self::new(vec![Factor::Torus])
    }

    pub fn chart(i: usize) -> Self {
        Self::new(vec![Factor::chart(i)])
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).sum()
    }

    pub fn coords(&self) -> Vec<Coord> {
        self.factors.iter().flat_map(|f| (0..f.dim()).map(move |k| f.coord(k))).collect()
    }

    pub fn product(&self, other: &Domain) -> Domain {
        Domain::new(self.factors.iter().chain(&other.factors).copied().collect())
    }

    pub fn compatible(&self, other: &Domain) -> bool {
        self.factors.len() == other.factors.len()
            && self.factors.iter().zip(&other.factors).all(|(a, b)| a.compatible(b))
    }

    /// Image under `x ↦ -x`.
    pub fn negated(&self) -> Domain {
        Domain::new(
            self.factors
                .iter()
                .map(|f| match *f {
                    Factor::Square { lower, side } => Factor::Square { lower: [-lower[0] - side, -lower[1] - side], side },
                    Factor::Torus => Factor::Torus,
                    Factor::Interval { lo, hi } => Factor::Interval { lo: -hi, hi: -lo },
                })
                .collect(),
        )
    }

    /// Lifts every coordinate into its window, or `None` outside.
    pub fn normalize(&self, z: &[f64]) -> Option<Vec<f64>> {
        self.coords().iter().zip(z).map(|(c, x)| c.normalize(*x)).collect()
    }
}

/// `amp · exp(-1/(1-r²))` with `r² = Σ ((z_k - c_k)/ρ_k)²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
    pub amp: C64,
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: Vec<f64>, amp: C64) -> Self {
        assert_eq!(center.len(), radius.len());
        Self { center, radius, amp }
    }

    /// A bump whose integral is `mass`.
    pub fn with_mass(center: Vec<f64>, radius: Vec<f64>, mass: C64) -> Self {
        let vol: f64 = radius.iter().product::<f64>() * bump_integral(radius.len());
        Self::new(center, radius, mass / vol)
    }

    fn eval(&self, z: &[f64], coords: &[Coord]) -> C64 {
        let mut r2 = 0.0;
        for k in 0..z.len() {
            let mut d = z[k] - self.center[k];
            if coords[k].periodic() {
                d = wrap_centered(d);
            }
            r2 += (d / self.radius[k]).powi(2);
            if r2 >= 1.0 {
                return C64::new(0.0, 0.0);
            }
        }
        self.amp * bump_profile(r2)
    }

    pub fn mass(&self) -> C64 {
        self.amp * self.radius.iter().product::<f64>() * bump_integral(self.radius.len())
    }

    fn integrate_exp(&self, xi: &[f64], quad: &QuadConfig) -> C64 {
        if xi.iter().all(|&x| x == 0.0) {
            return self.mass();
        }
        let rules: Vec<Rule> = (0..self.center.len())
            .map(|k| {
                let (c, r) = (self.center[k], self.radius[k]);
                Rule::composite(c - r, c + r, (quad.panels_per_unit / 4).max(1), quad.order)
            })
            .collect();
        let mut total = C64::new(0.0, 0.0);
        tensor_rule(&rules, |z, w| {
            let mut r2 = 0.0;
            for k in 0..z.len() {
                r2 += ((z[k] - self.center[k]) / self.radius[k]).powi(2);
            }
            if r2 < 1.0 {
                let phase: f64 = z.iter().zip(xi).map(|(a, b)| a * b).sum();
                total += cis(-phase) * (w * bump_profile(r2));
            }
        });
        total * self.amp
    }

    fn bbox(&self, coords: &[Coord]) -> Vec<Option<(f64, f64)>> {
        (0..self.center.len())
            .map(|k| {
                let (c, r) = (self.center[k], self.radius[k]);
                match coords[k] {
                    Coord::Periodic { lower, .. } => {
                        let c = lower + wrap(c - lower);
                        Some((c - r, c + r))
                    }
                    Coord::Line { .. } => Some((c - r, c + r)),
                }
            })
            .collect()
    }
}

/// Visits every node of a tensor-product rule.
fn tensor_rule<F: FnMut(&[f64], f64)>(rules: &[Rule], mut f: F) {
    let dims = rules.len();
    let mut z = vec![0.0; dims];
    if dims == 0 {
        f(&z, 1.0);
        return;
    }
    if rules.iter().any(Rule::is_empty) {
        return;
    }
    let mut idx = vec![0usize; dims];
    loop {
        let mut w = 1.0;
        for k in 0..dims {
            z[k] = rules[k].nodes[idx[k]];
            w *= rules[k].weights[idx[k]];
        }
        f(&z, w);
        let mut k = dims;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < rules[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// An affine submersion `z ↦ L z + c` between product domains (reduced mod 1
/// on periodic target coordinates).
///
/// Fibers are parameterised by a set of *free* source coordinates; the
/// remaining *dependent* coordinates are solved from `L_dep z_dep = x - c -
/// L_free z_free`. Densities are trivialised against Lebesgue measure, so
/// fiber integration carries the Jacobian `1/|det L_dep|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Submersion {
    pub source: Domain,
    pub target: Domain,
    pub linear: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    dependent: Vec<usize>,
    free: Vec<usize>,
    solve: Vec<Vec<f64>>,
    jacobian: f64,
}

impl Submersion {
    pub fn affine(source: Domain, target: Domain, linear: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let (n, m) = (source.dim(), target.dim());
        if linear.len() != m || linear.iter().any(|row| row.len() != n) || offset.len() != m {
            return Err(Error::DomainMismatch(format!("{m}x{n} affine map expected")));
        }
        let mut best: Option<(Vec<usize>, f64)> = None;
        for cols in subsets(n, m) {
            let block: Vec<Vec<f64>> = linear.iter().map(|row| cols.iter().map(|&c| row[c]).collect()).collect();
            let det = determinant(&block);
            if det.abs() > best.as_ref().map_or(1e-12, |b| b.1.abs() + 1e-12) {
                best = Some((cols, det));
            }
        }
        let Some((dependent, det)) = best else {
            return Err(Error::NotSubmersion(format!("rank of the {m}x{n} linear part is below {m}")));
        };
        let block: Vec<Vec<f64>> = linear.iter().map(|row| dependent.iter().map(|&c| row[c]).collect()).collect();
        let solve = invert(&block);
        let free = (0..n).filter(|c| !dependent.contains(c)).collect();
        Ok(Self { source, target, linear, offset, dependent, free, solve, jacobian: 1.0 / det.abs() })
    }

    /// Keeps the leading factors whose dimensions add up to `target.dim()`.
    pub fn projection(source: Domain, keep_factors: usize) -> Result<Self> {
        let target = Domain::new(source.factors[..keep_factors].to_vec());
        let (n, m) = (source.dim(), target.dim());
        let linear = (0..m).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        Self::affine(source, target, linear, vec![0.0; m])
    }

    /// `(y, s) ↦ h(y) + (s, λs)` into the torus, where `h(y) = A y + c`.
    pub fn flowed(source: Domain, h_linear: &[Vec<f64>], h_offset: [f64; 2], lambda: f64) -> Result<Self> {
        let n = source.dim();
        let mut linear = vec![vec![0.0; n]; 2];
        for i in 0..2 {
            linear[i][..n - 1].copy_from_slice(&h_linear[i]);
        }
        linear[0][n - 1] = 1.0;
        linear[1][n - 1] = lambda;
        Self::affine(source, Domain::torus(), linear, h_offset.to_vec())
    }

    /// `(y1, y2) ↦ y1 + y2` for two 2-dimensional factors.
    pub fn torus_multiplication(left: &Domain, right: &Domain) -> Result<Self> {
        let source = left.product(right);
        let linear = vec![vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]];
        Self::affine(source, Domain::torus(), linear, vec![0.0, 0.0])
    }

    /// `x ↦ -x`.
    pub fn inversion(source: Domain) -> Result<Self> {
        let n = source.dim();
        let target = source.negated();
        let linear = (0..n).map(|i| (0..n).map(|j| if i == j { -1.0 } else { 0.0 }).collect()).collect();
        Self::affine(source, target, linear, vec![0.0; n])
    }

    /// Inclusion of a chart square (or torus) into the torus.
    pub fn into_torus(source: Domain) -> Result<Self> {
        Self::affine(source, Domain::torus(), vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0])
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &Submersion) -> Result<Self> {
        if !self.target.compatible(&next.source) {
            return Err(Error::DomainMismatch("target of the first map is not the source of the second".into()));
        }
        let n = self.source.dim();
        let linear = next
            .linear
            .iter()
            .map(|row| (0..n).map(|j| row.iter().zip(&self.linear).map(|(a, r)| a * r[j]).sum()).collect())
            .collect();
        let offset = next.apply(&self.offset);
        Self::affine(self.source.clone(), next.target.clone(), linear, offset)
    }

    pub fn fiber_dim(&self) -> usize {
        self.free.len()
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        self.linear
            .iter()
            .zip(&self.offset)
            .map(|(row, c)| row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + c)
            .collect()
    }

    /// The source point over `x` with free coordinates `u`.
    pub fn fiber_point(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.source.dim()];
        for (k, &c) in self.free.iter().enumerate() {
            z[c] = u[k];
        }
        let rhs: Vec<f64> = (0..self.target.dim())
            .map(|i| x[i] - self.offset[i] - self.free.iter().map(|&c| self.linear[i][c] * z[c]).sum::<f64>())
            .collect();
        for (k, &c) in self.dependent.iter().enumerate() {
            z[c] = self.solve[k].iter().zip(&rhs).map(|(a, b)| a * b).sum();
        }
        z
    }

    /// Largest deviation of `φ(fiber_point(x, u))` from `x` (mod 1 where periodic).
    pub fn fiber_defect(&self, x: &[f64], u: &[f64]) -> f64 {
        let image = self.apply(&self.fiber_point(x, u));
        self.target
            .coords()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let d = image[i] - x[i];
                if c.periodic() {
                    wrap_centered(d).abs()
                } else {
                    d.abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// `Lᵀ ξ`, the frequency on the source matching `ξ` on the target.
    fn pull_frequency(&self, xi: &[f64]) -> Vec<f64> {
        (0..self.source.dim()).map(|j| (0..xi.len()).map(|i| self.linear[i][j] * xi[i]).sum()).collect()
    }

    fn image_bbox(&self, bbox: &[Option<(f64, f64)>]) -> Vec<Option<(f64, f64)>> {
        let coords = self.source.coords();
        let tcoords = self.target.coords();
        (0..self.target.dim())
            .map(|i| {
                let (mut lo, mut hi) = (self.offset[i], self.offset[i]);
                for (j, a) in self.linear[i].iter().enumerate() {
                    if *a == 0.0 {
                        continue;
                    }
                    let (l, h) = match bbox[j] {
                        Some(b) => b,
                        None => match coords[j] {
                            Coord::Line { lo, hi } => (lo, hi),
                            Coord::Periodic { .. } => return None,
                        },
                    };
                    lo += (a * l).min(a * h);
                    hi += (a * l).max(a * h);
                }
                if tcoords[i].periodic() && hi - lo >= 1.0 {
                    None
                } else {
                    Some((lo, hi))
                }
            })
            .collect()
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = Vec::new();
    for last in (k - 1)..n {
        for mut s in subsets(last, k - 1) {
            s.push(last);
            out.push(s);
        }
    }
    out.sort();
    out
}

fn determinant(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    m.determinant()
}

fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    if n == 0 {
        return vec![];
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let inv = m.try_inverse().expect("block chosen with nonzero determinant");
    (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Bumps { domain: Domain, bumps: Vec<Bump> },
    /// `Σ c_k e^{2πi k·x}` on the torus.
    Trig { coeffs: Vec<([i32; 2], C64)> },
    Kernel { kernel: GroupoidKernel },
    /// The torus density `inner` times the partition weight of a chart,
    /// read in that chart's coordinates.
    Weighted { chart: usize, inner: Density },
    Tensor { left: Density, right: Density },
    Push { map: Submersion, inner: Density },
    Combo { domain: Domain, terms: Vec<(C64, Density)> },
    Conj { inner: Density },
    /// `z ↦ inner(L z + c)` on `domain`.
    Pullback { domain: Domain, linear: Vec<Vec<f64>>, offset: Vec<f64>, inner: Density },
    /// Pointwise product of two densities on the same domain.
    Product { left: Density, right: Density },
}

#[derive(Debug)]
struct Inner {
    node: Node,
    domain: Domain,
    bbox: Vec<Option<(f64, f64)>>,
}

/// A cheaply clonable, immutable density.
#[derive(Clone, Debug)]
pub struct Density(Arc<Inner>);

impl Serialize for Density {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.node.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Density {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let node = Node::deserialize(d)?;
        Density::from_node(node).map_err(serde::de::Error::custom)
    }
}

impl Density {
    fn from_node(node: Node) -> Result<Self> {
        let (domain, bbox) = match &node {
            Node::Bumps { domain, bumps } => {
                let coords = domain.coords();
                for b in bumps {
                    if b.center.len() != coords.len() {
                        return Err(Error::DomainMismatch("bump dimension".into()));
                    }
                    for (k, c) in coords.iter().enumerate() {
                        let (lo, hi) = c.full_range();
                        let lifted = match c {
                            Coord::Periodic { lower, .. } => lower + wrap(b.center[k] - lower),
                            Coord::Line { .. } => b.center[k],
                        };
                        let whole_circle = matches!(c, Coord::Periodic { extent, .. } if *extent >= 1.0);
                        if b.radius[k] <= 0.0 || (!whole_circle && (lifted - b.radius[k] <= lo || lifted + b.radius[k] >= hi)) {
                            return Err(Error::SupportEscape);
                        }
                    }
                }
                let bbox = bumps_bbox(bumps, &coords);
                (domain.clone(), bbox)
            }
            Node::Trig { .. } => (Domain::torus(), vec![None, None]),
            Node::Kernel { kernel } => {
                let (lo, hi) = kernel.time_support().unwrap_or((-1.0, 1.0));
                let pad = 1e-9;
                (
                    Domain::new(vec![Factor::Torus, Factor::Interval { lo: lo - pad, hi: hi + pad }]),
                    vec![None, None, Some((lo, hi))],
                )
            }
            Node::Weighted { chart, inner } => {
                if !inner.domain().compatible(&Domain::torus()) {
                    return Err(Error::DomainMismatch("weighted density must live on the torus".into()));
                }
                let c = Atlas::standard().chart(*chart);
                (
                    Domain::chart(*chart),
                    vec![Some((c.lower[0], c.lower[0] + c.side)), Some((c.lower[1], c.lower[1] + c.side))],
                )
            }
            Node::Tensor { left, right } => {
                let mut bbox = left.0.bbox.clone();
                bbox.extend(right.0.bbox.iter().copied());
                (left.domain().product(right.domain()), bbox)
            }
            Node::Push { map, inner } => {
                if !map.source.compatible(inner.domain()) {
                    return Err(Error::DomainMismatch(format!(
                        "pushforward source {:?} vs density domain {:?}",
                        map.source, inner.domain()
                    )));
                }
                (map.target.clone(), map.image_bbox(&inner.0.bbox))
            }
            Node::Combo { domain, terms } => {
                if terms.iter().any(|(_, d)| !d.domain().compatible(domain)) {
                    return Err(Error::DomainMismatch("linear combination of densities on different domains".into()));
                }
                let dim = domain.dim();
                let bbox = (0..dim)
                    .map(|k| {
                        let mut hull: Option<(f64, f64)> = None;
                        for (_, d) in terms {
                            let b = d.0.bbox[k]?;
                            hull = Some(hull.map_or(b, |h| (h.0.min(b.0), h.1.max(b.1))));
                        }
                        hull.filter(|h| h.1 - h.0 < 1.0 || !domain.coords()[k].periodic())
                    })
                    .collect();
                (domain.clone(), bbox)
            }
            Node::Conj { inner } => (inner.domain().clone(), inner.0.bbox.clone()),
            Node::Pullback { domain, linear, offset, inner } => {
                if linear.len() != inner.domain().dim() || offset.len() != linear.len() || linear.iter().any(|r| r.len() != domain.dim()) {
                    return Err(Error::DomainMismatch("pullback matrix shape".into()));
                }
                (domain.clone(), vec![None; domain.dim()])
            }
            Node::Product { left, right } => {
                if !left.domain().compatible(right.domain()) {
                    return Err(Error::DomainMismatch("pointwise product of densities on different domains".into()));
                }
                let bbox = left
                    .0
                    .bbox
                    .iter()
                    .zip(&right.0.bbox)
                    .map(|(a, b)| match (a, b) {
                        (Some(a), Some(b)) => Some((a.0.max(b.0), a.1.min(b.1).max(a.0.max(b.0)))),
                        (Some(a), None) | (None, Some(a)) => Some(*a),
                        (None, None) => None,
                    })
                    .collect();
                (left.domain().clone(), bbox)
            }
        };
        Ok(Density(Arc::new(Inner { node, domain, bbox })))
    }

    pub fn bumps(domain: Domain, bumps: Vec<Bump>) -> Result<Self> {
        Self::from_node(Node::Bumps { domain, bumps })
    }

    pub fn zero(domain: Domain) -> Self {
        Self::from_node(Node::Bumps { domain, bumps: vec![] }).expect("empty sum is valid")
    }

    pub fn trig(coeffs: Vec<([i32; 2], C64)>) -> Self {
        Self::from_node(Node::Trig { coeffs }).expect("trigonometric polynomials live on the torus")
    }

    pub fn kernel(kernel: GroupoidKernel) -> Self {
        Self::from_node(Node::Kernel { kernel }).expect("kernels live on torus times a line")
    }

    pub fn weighted(chart: usize, inner: Density) -> Result<Self> {
        Self::from_node(Node::Weighted { chart, inner })
    }

    pub fn tensor(left: &Density, right: &Density) -> Self {
        Self::from_node(Node::Tensor { left: left.clone(), right: right.clone() }).expect("tensor of valid densities")
    }

    pub fn push(map: &Submersion, inner: &Density) -> Result<Self> {
        Self::from_node(Node::Push { map: map.clone(), inner: inner.clone() })
    }

    pub fn combo(domain: Domain, terms: Vec<(C64, Density)>) -> Result<Self> {
        Self::from_node(Node::Combo { domain, terms })
    }

    pub fn conj(&self) -> Self {
        Self::from_node(Node::Conj { inner: self.clone() }).expect("conjugate of a valid density")
    }

    pub fn add(&self, other: &Density) -> Result<Self> {
        Self::combo(self.domain().clone(), vec![(C64::new(1.0, 0.0), self.clone()), (C64::new(1.0, 0.0), other.clone())])
    }

    pub fn sub(&self, other: &Density) -> Result<Self> {
        Self::combo(self.domain().clone(), vec![(C64::new(1.0, 0.0), self.clone()), (C64::new(-1.0, 0.0), other.clone())])
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::combo(self.domain().clone(), vec![(c, self.clone())]).expect("same domain")
    }

    pub fn pullback(domain: Domain, linear: Vec<Vec<f64>>, offset: Vec<f64>, inner: &Density) -> Result<Self> {
        Self::from_node(Node::Pullback { domain, linear, offset, inner: inner.clone() })
    }

    pub fn product(left: &Density, right: &Density) -> Result<Self> {
        Self::from_node(Node::Product { left: left.clone(), right: right.clone() })
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn domain(&self) -> &Domain {
        &self.0.domain
    }

    /// Per coordinate, an interval (in lifted coordinates) containing the
    /// support, or `None` when it may fill the whole coordinate range.
    pub fn bbox(&self) -> &[Option<(f64, f64)>] {
        &self.0.bbox
    }

    /// Pointwise value at `z` (any lift of periodic coordinates).
    pub fn eval(&self, z: &[f64], quad: &QuadConfig) -> C64 {
        let zero = C64::new(0.0, 0.0);
        match &self.0.node {
            Node::Bumps { domain, bumps } => {
                let coords = domain.coords();
                let Some(z) = domain.normalize(z) else { return zero };
                bumps.iter().map(|b| b.eval(&z, &coords)).sum()
            }
            Node::Trig { coeffs } => coeffs.iter().map(|(k, c)| c * cis(k[0] as f64 * z[0] + k[1] as f64 * z[1])).sum(),
            Node::Kernel { kernel } => kernel.eval(TorusPoint::new(z[0], z[1]), z[2]),
            Node::Weighted { chart, inner } => {
                let Some(z) = self.domain().normalize(z) else { return zero };
                let w = Atlas::standard().weight(*chart, TorusPoint::new(z[0], z[1]));
                if w == 0.0 {
                    return zero;
                }
                inner.eval(&z, quad) * w
            }
            Node::Tensor { left, right } => {
                let n = left.domain().dim();
                let a = left.eval(&z[..n], quad);
                if a == zero {
                    return zero;
                }
                a * right.eval(&z[n..], quad)
            }
            Node::Push { map, inner } => {
                let Some(x) = self.domain().normalize(z) else { return zero };
                let coords = map.source.coords();
                let rules: Vec<Rule> = map
                    .free
                    .iter()
                    .map(|&c| match inner.bbox()[c] {
                        Some((lo, hi)) => {
                            let (flo, fhi) = coords[c].full_range();
                            let (lo, hi) = if coords[c].periodic() { (lo, hi) } else { (lo.max(flo), hi.min(fhi)) };
                            Rule::for_fiber(lo, hi, quad)
                        }
                        None => match coords[c] {
                            Coord::Periodic { lower, extent } if extent >= 1.0 => Rule::periodic(quad.torus_grid, lower),
                            other => {
                                let (lo, hi) = other.full_range();
                                Rule::for_interval(lo, hi, quad)
                            }
                        },
                    })
                    .collect();
                let mut total = zero;
                tensor_rule(&rules, |u, w| {
                    let p = map.fiber_point(&x, u);
                    total += inner.eval(&p, quad) * w;
                });
                total * map.jacobian
            }
            Node::Combo { terms, .. } => terms.iter().map(|(c, d)| c * d.eval(z, quad)).sum(),
            Node::Conj { inner } => inner.eval(z, quad).conj(),
            Node::Pullback { linear, offset, inner, .. } => {
                if self.domain().normalize(z).is_none() {
                    return zero;
                }
                let w: Vec<f64> = linear
                    .iter()
                    .zip(offset)
                    .map(|(row, c)| row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + c)
                    .collect();
                inner.eval(&w, quad)
            }
            Node::Product { left, right } => {
                let a = left.eval(z, quad);
                if a == zero {
                    return zero;
                }
                a * right.eval(z, quad)
            }
        }
    }

    /// `∫ f(z) e^{-2πi ξ·z} dz`. Periodic coordinates need integer `ξ`.
    pub fn integrate_exp(&self, xi: &[f64], quad: &QuadConfig) -> C64 {
        let zero = C64::new(0.0, 0.0);
        match &self.0.node {
            Node::Bumps { bumps, .. } => bumps.iter().map(|b| b.integrate_exp(xi, quad)).sum(),
            Node::Trig { coeffs } => coeffs
                .iter()
                .map(|(k, c)| c * periodic_character_integral(k[0] as f64 - xi[0]) * periodic_character_integral(k[1] as f64 - xi[1]))
                .sum(),
            Node::Kernel { kernel } => {
                let mode = [xi[0].round() as i32, xi[1].round() as i32];
                kernel.mode(mode).map_or(zero, |f| f.fourier(xi[2], quad))
            }
            Node::Weighted { .. } => {
                let rule = Rule::periodic(quad.torus_grid, 0.0);
                let c = self.domain().coords();
                let rows = crate::par::map_range(rule.len(), |i| {
                    let mut acc = zero;
                    for j in 0..rule.len() {
                        let z = [rule.nodes[i], rule.nodes[j]];
                        let Some(lz) = c.iter().zip(&z).map(|(c, x)| c.normalize(*x)).collect::<Option<Vec<f64>>>() else {
                            continue;
                        };
                        acc += self.eval(&lz, quad) * cis(-(xi[0] * lz[0] + xi[1] * lz[1]));
                    }
                    acc
                });
                rows.into_iter().sum::<C64>() * (rule.weights[0] * rule.weights[0])
            }
            Node::Tensor { left, right } => {
                let n = left.domain().dim();
                let a = left.integrate_exp(&xi[..n], quad);
                if a == zero {
                    return zero;
                }
                a * right.integrate_exp(&xi[n..], quad)
            }
            Node::Push { map, inner } => {
                let phase: f64 = xi.iter().zip(&map.offset).map(|(a, b)| a * b).sum();
                inner.integrate_exp(&map.pull_frequency(xi), quad) * cis(-phase)
            }
            Node::Combo { terms, .. } => terms.iter().map(|(c, d)| c * d.integrate_exp(xi, quad)).sum(),
            Node::Conj { inner } => {
                let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
                inner.integrate_exp(&neg, quad).conj()
            }
            Node::Pullback { .. } | Node::Product { .. } => self.integrate_exp_direct(xi, quad),
        }
    }

    /// Total mass by quadrature of pointwise values over the bounding box,
    /// independent of the Fourier pullback used by [`Density::integrate`].
    pub fn integrate_by_values(&self, quad: &QuadConfig) -> C64 {
        self.integrate_exp_direct(&vec![0.0; self.domain().dim()], quad)
    }

    /// Tensor-product quadrature over the bounding box of the support.
    fn integrate_exp_direct(&self, xi: &[f64], quad: &QuadConfig) -> C64 {
        let coords = self.domain().coords();
        let rules: Vec<Rule> = coords
            .iter()
            .zip(self.bbox())
            .map(|(c, b)| match (b, c) {
                (Some((lo, hi)), _) => Rule::for_fiber(*lo, *hi, quad),
                (None, Coord::Periodic { lower, extent }) if *extent >= 1.0 => Rule::periodic(quad.torus_grid, *lower),
                (None, c) => {
                    let (lo, hi) = c.full_range();
                    Rule::for_interval(lo, hi, quad)
                }
            })
            .collect();
        let Some((first, rest)) = rules.split_first() else {
            return self.eval(&[], quad);
        };
        let rows = crate::par::map_range(first.len(), |i| {
            let mut acc = C64::new(0.0, 0.0);
            tensor_rule(rest, |u, w| {
                let mut z = Vec::with_capacity(u.len() + 1);
                z.push(first.nodes[i]);
                z.extend_from_slice(u);
                let phase: f64 = z.iter().zip(xi).map(|(a, b)| a * b).sum();
                acc += self.eval(&z, quad) * cis(-phase) * w;
            });
            acc * first.weights[i]
        });
        rows.into_iter().sum()
    }

    /// Total mass.
    pub fn integrate(&self, quad: &QuadConfig) -> C64 {
        self.integrate_exp(&vec![0.0; self.domain().dim()], quad)
    }

    /// Total mass with a one-refinement error estimate.
    pub fn integrate_estimated(&self, quad: &QuadConfig) -> Estimate {
        let coarse = self.integrate(quad);
        let fine = self.integrate(&quad.refined());
        Estimate { value: fine, error: (fine - coarse).norm() }
    }

    /// Like [`Density::integrate_estimated`], failing when the estimate
    /// exceeds `tolerance`.
    pub fn integrate_checked(&self, quad: &QuadConfig, tolerance: f64) -> Result<Estimate> {
        let est = self.integrate_estimated(quad);
        if est.error > tolerance {
            return Err(Error::QuadratureFailure { estimate: est.error, tolerance });
        }
        Ok(est)
    }

    /// Fourier coefficient of a torus density at the integer frequency `k`.
    pub fn fourier(&self, k: [i32; 2], quad: &QuadConfig) -> C64 {
        self.integrate_exp(&[k[0] as f64, k[1] as f64], quad)
    }

    /// Re-expresses a bump density on another domain with the same factor
    /// kinds (for instance a different chart square).
    pub fn rehome(&self, domain: Domain) -> Result<Self> {
        match &self.0.node {
            Node::Bumps { bumps, .. } => Self::bumps(domain, bumps.clone()),
            _ => Err(Error::PreconditionViolated("only explicit bump sums can be re-homed".into())),
        }
    }
}

/// `∫_0^1 e^{2πi ν x} dx`.
fn periodic_character_integral(nu: f64) -> C64 {
    if nu.abs() < 1e-14 {
        return C64::new(1.0, 0.0);
    }
    (cis(nu) - 1.0) / C64::new(0.0, std::f64::consts::TAU * nu)
}

fn bumps_bbox(bumps: &[Bump], coords: &[Coord]) -> Vec<Option<(f64, f64)>> {
    if bumps.is_empty() {
        return coords
            .iter()
            .map(|c| {
                let (lo, _) = c.full_range();
                Some((lo, lo))
            })
            .collect();
    }
    let boxes: Vec<Vec<Option<(f64, f64)>>> = bumps.iter().map(|b| b.bbox(coords)).collect();
    coords
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let intervals: Vec<(f64, f64)> = boxes.iter().filter_map(|b| b[k]).collect();
            match c {
                Coord::Periodic { extent, .. } if *extent >= 1.0 => circular_hull(&intervals),
                _ => {
                    let lo = intervals.iter().map(|i| i.0).fold(f64::INFINITY, f64::min);
                    let hi = intervals.iter().map(|i| i.1).fold(f64::NEG_INFINITY, f64::max);
                    Some((lo, hi))
                }
            }
        })
        .collect()
}

/// Shortest arc covering the given arcs, as a lifted interval.
fn circular_hull(intervals: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut arcs: Vec<(f64, f64)> = intervals.iter().map(|&(lo, hi)| (wrap(lo), wrap(lo) + (hi - lo))).collect();
    arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for a in arcs {
        match merged.last_mut() {
            Some(m) if a.0 <= m.1 => m.1 = m.1.max(a.1),
            _ => merged.push(a),
        }
    }
    let n = merged.len();
    // the hull is the complement of the widest gap between consecutive arcs
    let (mut best_gap, mut best) = (merged[0].0 + 1.0 - merged[n - 1].1, (merged[0].0, merged[n - 1].1));
    for i in 0..n - 1 {
        let gap = merged[i + 1].0 - merged[i].1;
        if gap > best_gap {
            best_gap = gap;
            best = (merged[i + 1].0, merged[i].1 + 1.0);
        }
    }
    (best_gap > 0.0).then_some(best)
}

/// A value with an additive error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
}

/// Least-squares fit of a two-dimensional density on a chart square onto the
/// lattice of bumps with pitch `side/16` and radius twice the pitch, kept
/// strictly inside the square.
#[derive(Clone, Debug)]
pub struct LatticeFit {
    pub density: Density,
    pub residual: f64,
}

pub fn fit_to_lattice(f: &Density, threshold: f64, quad: &QuadConfig) -> Result<LatticeFit> {
    let domain = f.domain().clone();
    let [Factor::Square { lower, side }] = domain.factors[..] else {
        return Err(Error::PreconditionViolated("lattice fits are defined on a single chart square".into()));
    };
    let pitch = side / 16.0;
    let radius = 2.0 * pitch;
    let mut centers = Vec::new();
    for i in 3..=13 {
        for j in 3..=13 {
            centers.push([lower[0] + i as f64 * pitch, lower[1] + j as f64 * pitch]);
        }
    }
    let samples: Vec<[f64; 2]> = (1..64)
        .flat_map(|i| (1..64).map(move |j| [lower[0] + i as f64 * side / 64.0, lower[1] + j as f64 * side / 64.0]))
        .collect();
    let values = crate::par::map_slice(&samples, |z| f.eval(z, quad));
    let coords = domain.coords();
    let basis: Vec<Bump> = centers.iter().map(|c| Bump::new(c.to_vec(), vec![radius, radius], C64::new(1.0, 0.0))).collect();
    let a = nalgebra::DMatrix::from_fn(samples.len(), basis.len(), |i, j| basis[j].eval(&samples[i], &coords));
    let b = nalgebra::DVector::from_vec(values.clone());
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-12).map_err(|e| Error::PreconditionViolated(e.to_string()))?;
    let fitted = &a * &x;
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let residual = (0..samples.len()).map(|i| (fitted[i] - values[i]).norm()).fold(0.0, f64::max) / scale;
    if residual > threshold {
        return Err(Error::FitResidualTooLarge { residual, threshold });
    }
    let bumps = basis.into_iter().zip(x.iter()).map(|(mut b, c)| {
        b.amp = *c;
        b
    });
    Ok(LatticeFit { density: Density::bumps(domain, bumps.collect())?, residual })
}
