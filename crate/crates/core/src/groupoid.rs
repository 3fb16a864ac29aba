//! The action groupoid `T² ⋊_λ ℝ` and its convolution algebra.
//!
//! Kernels are stored as finite Fourier series in the torus variable whose
//! coefficients are compactly supported functions of time:
//! `k(g, t) = Σ_κ c_κ(t) e^{2πi κ·g}`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::densities::{bump_profile, Bump, Density, Domain, Factor, Submersion, BUMP_INTEGRAL_1D};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, QuadConfig, Rule};
use crate::torus::{flow, wrap, Atlas, TorusPoint};
use crate::{cis, par, C64};

/// The arrow `(g, t)` from `g` to `flow(g, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupoidElement {
    pub base: TorusPoint,
    pub time: f64,
}

impl GroupoidElement {
    pub fn new(base: TorusPoint, time: f64) -> Self {
        Self { base, time }
    }

    pub fn source(&self) -> TorusPoint {
        self.base
    }

    pub fn range(&self, lambda: f64) -> TorusPoint {
        flow(self.base, self.time, lambda)
    }

    pub fn inverse(&self, lambda: f64) -> Self {
        Self::new(self.range(lambda), -self.time)
    }

    pub fn unit(p: TorusPoint) -> Self {
        Self::new(p, 0.0)
    }
}

/// `γ1 γ2`, defined when `source(γ1) = range(γ2)`.
pub fn groupoid_compose(g1: &GroupoidElement, g2: &GroupoidElement, lambda: f64) -> Result<GroupoidElement> {
    let distance = g1.source().distance(g2.range(lambda));
    if distance > 1e-12 {
        return Err(Error::NotComposable { distance });
    }
    Ok(GroupoidElement::new(g2.base, g1.time + g2.time))
}

/// `amp · bump((t - center)/radius) · e^{2πi freq t}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModBump {
    pub center: f64,
    pub radius: f64,
    pub amp: C64,
    pub freq: f64,
}

impl ModBump {
    /// A bump of total mass `mass` (before modulation).
    pub fn with_mass(center: f64, radius: f64, mass: C64) -> Self {
        Self { center, radius, amp: mass / (radius * BUMP_INTEGRAL_1D), freq: 0.0 }
    }

    pub fn eval(&self, t: f64) -> C64 {
        let r = (t - self.center) / self.radius;
        let b = bump_profile(r * r);
        if b == 0.0 {
            return C64::new(0.0, 0.0);
        }
        self.amp * b * cis(self.freq * t)
    }
}

/// Composite Gauss-Legendre nodes on panels of width `1/panels_per_unit`
/// aligned to the integers, covering `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub first_panel: i64,
    pub panels: usize,
    pub panels_per_unit: usize,
    pub order: usize,
}

impl TimeGrid {
    pub fn covering(lo: f64, hi: f64, quad: &QuadConfig) -> Self {
        let h = 1.0 / quad.panels_per_unit as f64;
        let first = (lo / h - 1e-9).floor() as i64;
        let last = ((hi / h + 1e-9).ceil() as i64).max(first + 1);
        Self { first_panel: first, panels: (last - first) as usize, panels_per_unit: quad.panels_per_unit, order: quad.order }
    }

    pub fn width(&self) -> f64 {
        1.0 / self.panels_per_unit as f64
    }

    pub fn lo(&self) -> f64 {
        self.first_panel as f64 * self.width()
    }

    pub fn hi(&self) -> f64 {
        (self.first_panel + self.panels as i64) as f64 * self.width()
    }

    pub fn rule(&self) -> Rule {
        Rule::composite(self.lo(), self.hi(), self.panels, self.order)
    }

    fn reflected(&self) -> Self {
        Self { first_panel: -(self.first_panel + self.panels as i64), ..*self }
    }

    fn union(&self, other: &Self) -> Self {
        let first = self.first_panel.min(other.first_panel);
        let last = (self.first_panel + self.panels as i64).max(other.first_panel + other.panels as i64);
        Self { first_panel: first, panels: (last - first) as usize, ..*self }
    }
}

/// Barycentric weights for Lagrange interpolation on Gauss-Legendre nodes.
fn barycentric(order: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let table = CACHE.get_or_init(|| {
        (0..=64)
            .map(|n| {
                if n == 0 {
                    return (vec![], vec![]);
                }
                let (x, _) = gauss_legendre(n);
                let w = (0..n)
                    .map(|j| 1.0 / (0..n).filter(|&k| k != j).map(|k| x[j] - x[k]).product::<f64>())
                    .collect();
                (x, w)
            })
            .collect()
    });
    &table[order.min(64)]
}

/// A compactly supported function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFn {
    /// Finite sum of modulated bumps.
    Closed { bumps: Vec<ModBump> },
    /// Values at the nodes of a grid, interpolated panel by panel.
    Sampled { grid: TimeGrid, values: Vec<C64> },
}

impl TimeFn {
    pub fn bump(b: ModBump) -> Self {
        TimeFn::Closed { bumps: vec![b] }
    }

    pub fn eval(&self, t: f64) -> C64 {
        match self {
            TimeFn::Closed { bumps } => bumps.iter().map(|b| b.eval(t)).sum(),
            TimeFn::Sampled { grid, values } => {
                let h = grid.width();
                let pos = t / h - grid.first_panel as f64;
                if pos < 0.0 || pos > grid.panels as f64 {
                    return C64::new(0.0, 0.0);
                }
                let p = (pos.floor() as usize).min(grid.panels - 1);
                let local = 2.0 * (pos - p as f64) - 1.0;
                let (x, w) = barycentric(grid.order);
                let vals = &values[p * grid.order..(p + 1) * grid.order];
                let mut num = C64::new(0.0, 0.0);
                let mut den = 0.0;
                for j in 0..grid.order {
                    let d = local - x[j];
                    if d.abs() < 1e-15 {
                        return vals[j];
                    }
                    let c = w[j] / d;
                    num += vals[j] * c;
                    den += c;
                }
                num / den
            }
        }
    }

    /// Smallest interval outside which the function vanishes.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            TimeFn::Closed { bumps } => {
                let lo = bumps.iter().map(|b| b.center - b.radius).fold(f64::INFINITY, f64::min);
                let hi = bumps.iter().map(|b| b.center + b.radius).fold(f64::NEG_INFINITY, f64::max);
                (lo <= hi).then_some((lo, hi))
            }
            TimeFn::Sampled { grid, .. } => Some((grid.lo(), grid.hi())),
        }
    }

    pub fn sample(&self, grid: &TimeGrid) -> Vec<C64> {
        if let TimeFn::Sampled { grid: g, values } = self {
            if g == grid {
                return values.clone();
            }
        }
        grid.rule().nodes.iter().map(|&t| self.eval(t)).collect()
    }

    /// `∫ f(t) e^{-2πi ξ t} dt`.
    pub fn fourier(&self, xi: f64, quad: &QuadConfig) -> C64 {
        match self {
            TimeFn::Closed { bumps } => bumps
                .iter()
                .map(|b| {
                    let rule = Rule::composite(b.center - b.radius, b.center + b.radius, (quad.panels_per_unit / 4).max(1), quad.order);
                    rule.nodes.iter().zip(&rule.weights).map(|(&t, &w)| b.eval(t) * cis(-xi * t) * w).sum::<C64>()
                })
                .sum(),
            TimeFn::Sampled { grid, values } => {
                let rule = grid.rule();
                rule.nodes.iter().zip(&rule.weights).zip(values).map(|((&t, &w), v)| v * cis(-xi * t) * w).sum()
            }
        }
    }

    /// `t ↦ conj(f(-t))`.
    pub fn reflect_conj(&self) -> Self {
        match self {
            TimeFn::Closed { bumps } => TimeFn::Closed {
                bumps: bumps.iter().map(|b| ModBump { center: -b.center, radius: b.radius, amp: b.amp.conj(), freq: b.freq }).collect(),
            },
            TimeFn::Sampled { grid, values } => TimeFn::Sampled {
                grid: grid.reflected(),
                values: values.iter().rev().map(|v| v.conj()).collect(),
            },
        }
    }

    /// `t ↦ f(t) e^{2πi ω t}`.
    pub fn modulate(&self, omega: f64) -> Self {
        match self {
            TimeFn::Closed { bumps } => TimeFn::Closed {
                bumps: bumps.iter().map(|b| ModBump { freq: b.freq + omega, ..*b }).collect(),
            },
            TimeFn::Sampled { grid, values } => {
                let nodes = grid.rule().nodes;
                TimeFn::Sampled { grid: *grid, values: values.iter().zip(nodes).map(|(v, t)| v * cis(omega * t)).collect() }
            }
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        match self {
            TimeFn::Closed { bumps } => TimeFn::Closed { bumps: bumps.iter().map(|b| ModBump { amp: b.amp * c, ..*b }).collect() },
            TimeFn::Sampled { grid, values } => TimeFn::Sampled { grid: *grid, values: values.iter().map(|v| v * c).collect() },
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (TimeFn::Closed { bumps: a }, TimeFn::Closed { bumps: b }) => TimeFn::Closed { bumps: a.iter().chain(b).copied().collect() },
            (TimeFn::Sampled { grid: g1, .. }, TimeFn::Sampled { grid: g2, .. }) => {
                let grid = g1.union(g2);
                TimeFn::Sampled { grid, values: self.sample(&grid).iter().zip(other.sample(&grid)).map(|(a, b)| a + b).collect() }
            }
            (TimeFn::Sampled { grid, .. }, closed) | (closed, TimeFn::Sampled { grid, .. }) => {
                let (lo, hi) = closed.support().unwrap_or((grid.lo(), grid.hi()));
                let other_grid = TimeGrid::covering(lo, hi, &QuadConfig { panels_per_unit: grid.panels_per_unit, order: grid.order, torus_grid: 0 });
                let grid = grid.union(&other_grid);
                TimeFn::Sampled { grid, values: self.sample(&grid).iter().zip(other.sample(&grid)).map(|(a, b)| a + b).collect() }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TimeFn::Closed { bumps } => bumps.iter().all(|b| b.amp == C64::new(0.0, 0.0)),
            TimeFn::Sampled { values, .. } => values.iter().all(|v| *v == C64::new(0.0, 0.0)),
        }
    }
}

/// An element of `C∞_c(T² ⋊_λ ℝ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "KernelRecord", try_from = "KernelRecord")]
pub struct GroupoidKernel {
    pub bandlimit: i32,
    pub lambda: f64,
    modes: BTreeMap<[i32; 2], TimeFn>,
}

#[derive(Serialize, Deserialize)]
struct KernelRecord {
    bandlimit: i32,
    lambda: f64,
    terms: Vec<KernelTerm>,
}

#[derive(Serialize, Deserialize)]
struct KernelTerm {
    mode: [i32; 2],
    time: TimeFn,
}

impl From<GroupoidKernel> for KernelRecord {
    fn from(k: GroupoidKernel) -> Self {
        KernelRecord {
            bandlimit: k.bandlimit,
            lambda: k.lambda,
            terms: k.modes.into_iter().map(|(mode, time)| KernelTerm { mode, time }).collect(),
        }
    }
}

impl TryFrom<KernelRecord> for GroupoidKernel {
    type Error = Error;

    fn try_from(r: KernelRecord) -> Result<Self> {
        let mut k = GroupoidKernel::zero(r.bandlimit, r.lambda);
        for t in r.terms {
            k.add_term(t.mode, t.time)?;
        }
        Ok(k)
    }
}

pub const DEFAULT_BANDLIMIT: i32 = 16;

/// `m + λn`, the frequency in time picked up by the mode `(m, n)` along the flow.
pub fn mode_frequency(mode: [i32; 2], lambda: f64) -> f64 {
    mode[0] as f64 + lambda * mode[1] as f64
}

impl GroupoidKernel {
    pub fn zero(bandlimit: i32, lambda: f64) -> Self {
        Self { bandlimit, lambda, modes: BTreeMap::new() }
    }

    /// `e^{2πi mode·g} f(t)`.
    pub fn separable(mode: [i32; 2], time: TimeFn, bandlimit: i32, lambda: f64) -> Result<Self> {
        let mut k = Self::zero(bandlimit, lambda);
        k.add_term(mode, time)?;
        Ok(k)
    }

    pub fn add_term(&mut self, mode: [i32; 2], time: TimeFn) -> Result<()> {
        if mode[0].abs() > self.bandlimit || mode[1].abs() > self.bandlimit {
            return Err(Error::BandlimitOverflow { bandlimit: self.bandlimit, tail: f64::INFINITY });
        }
        let entry = match self.modes.remove(&mode) {
            Some(existing) => existing.add(&time),
            None => time,
        };
        self.modes.insert(mode, entry);
        Ok(())
    }

    pub fn modes(&self) -> impl Iterator<Item = (&[i32; 2], &TimeFn)> {
        self.modes.iter()
    }

    pub fn mode(&self, mode: [i32; 2]) -> Option<&TimeFn> {
        self.modes.get(&mode)
    }

    pub fn eval(&self, g: TorusPoint, t: f64) -> C64 {
        self.modes.iter().map(|(k, f)| f.eval(t) * cis(k[0] as f64 * g.x + k[1] as f64 * g.y)).sum()
    }

    pub fn eval_at(&self, e: &GroupoidElement) -> C64 {
        self.eval(e.base, e.time)
    }

    /// Hull of the time supports of all modes.
    pub fn time_support(&self) -> Option<(f64, f64)> {
        self.modes.values().filter_map(TimeFn::support).fold(None, |acc, (lo, hi)| match acc {
            None => Some((lo, hi)),
            Some((a, b)) => Some((a.min(lo), b.max(hi))),
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { modes: self.modes.iter().map(|(k, f)| (*k, f.scale(c))).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = Self { bandlimit: self.bandlimit.max(other.bandlimit), ..self.clone() };
        for (k, f) in &other.modes {
            out.add_term(*k, f.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Largest modulus over a sample of torus points and times.
    pub fn sup_estimate(&self, samples: usize) -> f64 {
        let Some((lo, hi)) = self.time_support() else { return 0.0 };
        let n = samples.max(2);
        par::map_range(n, |i| {
            let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let mut m: f64 = 0.0;
            for j in 0..n {
                for l in 0..n {
                    let g = TorusPoint::new(j as f64 / n as f64, l as f64 / n as f64);
                    m = m.max(self.eval(g, t).norm());
                }
            }
            m
        })
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// `Σ_κ ∫ |c_κ(t)|² dt`, the squared L² norm.
    pub fn l2_norm_sq(&self, quad: &QuadConfig) -> f64 {
        self.modes
            .values()
            .map(|f| match f.support() {
                Some((lo, hi)) => TimeGrid::covering(lo, hi, quad).rule().integrate(|t| f.eval(t).norm_sqr()),
                None => 0.0,
            })
            .sum()
    }

    /// `sup_t max_κ |a_κ(t) - b_κ(t)|` on the nodes of a common grid.
    pub fn distance(&self, other: &Self, quad: &QuadConfig) -> f64 {
        let supports = [self.time_support(), other.time_support()];
        let (lo, hi) = supports.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |a, s| (a.0.min(s.0), a.1.max(s.1)));
        if lo > hi {
            return 0.0;
        }
        let nodes = TimeGrid::covering(lo, hi, quad).rule().nodes;
        let mut keys: Vec<[i32; 2]> = self.modes.keys().chain(other.modes.keys()).copied().collect();
        keys.sort();
        keys.dedup();
        let zero = TimeFn::Closed { bumps: vec![] };
        keys.iter()
            .map(|k| {
                let a = self.modes.get(k).unwrap_or(&zero);
                let b = other.modes.get(k).unwrap_or(&zero);
                nodes.iter().map(|&t| (a.eval(t) - b.eval(t)).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn output_bandlimit(k1: &GroupoidKernel, k2: &GroupoidKernel, needed: i32) -> Result<i32> {
    let n = k1.bandlimit.max(k2.bandlimit);
    if needed <= n {
        Ok(n)
    } else if needed <= 2 * n {
        Ok(2 * n)
    } else {
        Err(Error::BandlimitOverflow { bandlimit: 2 * n, tail: f64::INFINITY })
    }
}

/// Mode-by-mode time convolution `c_{μ+ν} += (a_μ · e(ω_μ ·)) ∗ b_ν` where the
/// modulation sits on the integration variable.
fn convolve_modes(
    k1: &GroupoidKernel,
    k2: &GroupoidKernel,
    quad: &QuadConfig,
    pairs: &(dyn Fn([i32; 2], [i32; 2]) -> Option<[i32; 2]> + Sync),
    modulation: &(dyn Fn([i32; 2]) -> f64 + Sync),
) -> Result<GroupoidKernel> {
    let (Some((a_lo, a_hi)), Some((b_lo, b_hi))) = (k1.time_support(), k2.time_support()) else {
        return Ok(GroupoidKernel::zero(k1.bandlimit.max(k2.bandlimit), k1.lambda));
    };
    let mut needed = 0;
    for m in k1.modes.keys() {
        for n in k2.modes.keys() {
            if let Some(k) = pairs(*m, *n) {
                needed = needed.max(k[0].abs()).max(k[1].abs());
            }
        }
    }
    let bandlimit = output_bandlimit(k1, k2, needed)?;
    let out_grid = TimeGrid::covering(a_lo + b_lo, a_hi + b_hi, quad);
    let s_rule = TimeGrid::covering(b_lo, b_hi, quad).rule();
    let t_nodes = out_grid.rule().nodes;
    let b_vals: Vec<([i32; 2], Vec<C64>)> = k2
        .modes
        .iter()
        .map(|(k, f)| (*k, s_rule.nodes.iter().map(|&s| f.eval(s)).collect()))
        .collect();
    let left: Vec<([i32; 2], &TimeFn)> = k1.modes.iter().map(|(k, f)| (*k, f)).collect();
    let partials = par::map_slice(&left, |(mu, a)| {
        let omega = modulation(*mu);
        let (lo, hi) = a.support().unwrap_or((0.0, 0.0));
        let ns = s_rule.len();
        // A[i][j] = w_j a(t_i - s_j) e(ω s_j)
        let mut mat = vec![C64::new(0.0, 0.0); t_nodes.len() * ns];
        for (i, &t) in t_nodes.iter().enumerate() {
            for j in 0..ns {
                let s = s_rule.nodes[j];
                let d = t - s;
                if d < lo || d > hi {
                    continue;
                }
                mat[i * ns + j] = a.eval(d) * cis(omega * s) * s_rule.weights[j];
            }
        }
        let mut out: Vec<([i32; 2], Vec<C64>)> = Vec::new();
        for (nu, b) in &b_vals {
            let Some(kappa) = pairs(*mu, *nu) else { continue };
            let vals = (0..t_nodes.len())
                .map(|i| mat[i * ns..(i + 1) * ns].iter().zip(b).map(|(x, y)| x * y).sum())
                .collect();
            out.push((kappa, vals));
        }
        out
    });
    let mut acc: BTreeMap<[i32; 2], Vec<C64>> = BTreeMap::new();
    for (kappa, vals) in partials.into_iter().flatten() {
        let slot = acc.entry(kappa).or_insert_with(|| vec![C64::new(0.0, 0.0); t_nodes.len()]);
        for (s, v) in slot.iter_mut().zip(vals) {
            *s += v;
        }
    }
    let mut out = GroupoidKernel::zero(bandlimit, k1.lambda);
    for (k, values) in acc {
        out.modes.insert(k, TimeFn::Sampled { grid: out_grid, values });
    }
    Ok(out)
}

/// `(k1 ∗ k2)(g, t) = ∫ k1(flow(g, s), t - s) k2(g, s) ds`.
pub fn convolve_groupoid(k1: &GroupoidKernel, k2: &GroupoidKernel, quad: &QuadConfig) -> Result<GroupoidKernel> {
    let lambda = k1.lambda;
    convolve_modes(k1, k2, quad, &|m, n| Some([m[0] + n[0], m[1] + n[1]]), &|m| mode_frequency(m, lambda))
}

/// `k*(g, t) = conj(k(flow(g, t), -t))`.
pub fn involution_groupoid(k: &GroupoidKernel) -> GroupoidKernel {
    let modes = k
        .modes
        .iter()
        .map(|(m, f)| {
            let kappa = [-m[0], -m[1]];
            (kappa, f.reflect_conj().modulate(mode_frequency(kappa, k.lambda)))
        })
        .collect();
    GroupoidKernel { modes, ..k.clone() }
}

/// Convolution for the abelian group structure of `T² × ℝ`.
pub fn group_convolve(k1: &GroupoidKernel, k2: &GroupoidKernel, quad: &QuadConfig) -> Result<GroupoidKernel> {
    convolve_modes(k1, k2, quad, &|m, n| (m == n).then_some(m), &|_| 0.0)
}

/// `k*(g, t) = conj(k(-g, -t))`. Reflection and conjugation both flip the
/// mode, so every mode stays in place.
pub fn group_involution(k: &GroupoidKernel) -> GroupoidKernel {
    let modes = k.modes.iter().map(|(m, f)| (*m, f.reflect_conj())).collect();
    GroupoidKernel { modes, ..k.clone() }
}

/// Matrix of `ξ ↦ (t ↦ ∫ k(flow(p, s), t - s) ξ(s) ds)` on `n` midpoint
/// nodes of `[-window, window]`.
pub fn regular_representation(k: &GroupoidKernel, p: TorusPoint, n: usize, window: f64) -> DMatrix<C64> {
    let h = 2.0 * window / n as f64;
    let nodes: Vec<f64> = (0..n).map(|i| -window + (i as f64 + 0.5) * h).collect();
    let columns = par::map_range(n, |j| {
        let base = flow(p, nodes[j], k.lambda);
        let phases: Vec<(C64, &TimeFn)> = k.modes.iter().map(|(m, f)| (cis(m[0] as f64 * base.x + m[1] as f64 * base.y), f)).collect();
        nodes.iter().map(|&t| phases.iter().map(|(c, f)| c * f.eval(t - nodes[j])).sum::<C64>() * h).collect::<Vec<C64>>()
    });
    DMatrix::from_fn(n, n, |i, j| columns[j][i])
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_hermitian_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().min()
}

/// Space-constant kernel `e_η(t)` of unit mass: an approximate unit.
pub fn mollifier(eta: f64, bandlimit: i32, lambda: f64) -> GroupoidKernel {
    GroupoidKernel::separable([0, 0], TimeFn::bump(ModBump::with_mass(0.0, eta, C64::new(1.0, 0.0))), bandlimit, lambda)
        .expect("mode (0,0) is within every bandlimit")
}

/// A bisubmersion of the groupoid: a product domain (a two-dimensional base
/// factor followed by time intervals) with an affine map into `T² × ℝ`
/// given by its source and time components. The range is
/// `source + (time, λ time)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bisubmersion {
    pub domain: Domain,
    pub source_linear: [Vec<f64>; 2],
    pub source_offset: [f64; 2],
    pub time_linear: Vec<f64>,
    pub lambda: f64,
    /// Half-width of the time window reached by the time map.
    pub reach: f64,
    /// A chart of the atlas containing the range, when one does.
    pub target_chart: Option<usize>,
}

impl Bisubmersion {
    /// `O_i × (-ε, ε)` with `s(y, t) = y`, `r(y, t) = flow(y, t)`.
    pub fn path_holonomy(chart: usize, eps: f64, lambda: f64) -> Self {
        let domain = Domain::new(vec![Factor::chart(chart), Factor::Interval { lo: -eps, hi: eps }]);
        Self::identity_like(domain, eps, lambda)
    }

    /// `T² × (-ε, ε)`, a single bisubmersion covering every chart.
    pub fn global(eps: f64, lambda: f64) -> Self {
        let domain = Domain::new(vec![Factor::Torus, Factor::Interval { lo: -eps, hi: eps }]);
        Self::identity_like(domain, eps, lambda)
    }

    fn identity_like(domain: Domain, eps: f64, lambda: f64) -> Self {
        let mut b = Self {
            domain,
            source_linear: [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            source_offset: [0.0, 0.0],
            time_linear: vec![0.0, 0.0, 1.0],
            lambda,
            reach: eps,
            target_chart: None,
        };
        b.target_chart = b.find_target_chart();
        b
    }

    fn find_target_chart(&self) -> Option<usize> {
        let (lo, hi) = self.range_bbox()?;
        Atlas::standard().chart_for_box(lo, hi)
    }

    fn base_box(&self) -> Option<([f64; 2], [f64; 2])> {
        match self.domain.factors[0] {
            Factor::Square { lower, side } => Some((lower, [lower[0] + side, lower[1] + side])),
            _ => None,
        }
    }

    fn range_bbox(&self) -> Option<([f64; 2], [f64; 2])> {
        let coords = self.domain.coords();
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        let (blo, bhi) = self.base_box()?;
        for i in 0..2 {
            let row = self.range_row(i);
            lo[i] = self.source_offset[i];
            hi[i] = self.source_offset[i];
            for (j, a) in row.iter().enumerate() {
                let (l, h) = if j < 2 {
                    (blo[j], bhi[j])
                } else {
                    match coords[j] {
                        crate::densities::Coord::Line { lo, hi } => (lo, hi),
                        _ => return None,
                    }
                };
                lo[i] += (a * l).min(a * h);
                hi[i] += (a * l).max(a * h);
            }
        }
        Some((lo, hi))
    }

    fn range_row(&self, i: usize) -> Vec<f64> {
        let slope = if i == 0 { 1.0 } else { self.lambda };
        self.source_linear[i].iter().zip(&self.time_linear).map(|(s, t)| s + slope * t).collect()
    }

    pub fn source(&self, u: &[f64]) -> TorusPoint {
        let v = |i: usize| self.source_linear[i].iter().zip(u).map(|(a, b)| a * b).sum::<f64>() + self.source_offset[i];
        TorusPoint::new(v(0), v(1))
    }

    pub fn time(&self, u: &[f64]) -> f64 {
        self.time_linear.iter().zip(u).map(|(a, b)| a * b).sum()
    }

    pub fn range(&self, u: &[f64]) -> TorusPoint {
        flow(self.source(u), self.time(u), self.lambda)
    }

    pub fn element(&self, u: &[f64]) -> GroupoidElement {
        GroupoidElement::new(self.source(u), self.time(u))
    }

    /// The affine map onto `T² × (-reach, reach)`.
    pub fn to_groupoid(&self) -> Result<Submersion> {
        let target = Domain::new(vec![Factor::Torus, Factor::Interval { lo: -self.reach, hi: self.reach }]);
        let linear = vec![self.source_linear[0].clone(), self.source_linear[1].clone(), self.time_linear.clone()];
        Submersion::affine(self.domain.clone(), target, linear, vec![self.source_offset[0], self.source_offset[1], 0.0])
    }
}

/// `U⁻¹`: same domain, arrows replaced by their inverses.
pub fn inverse_bisubmersion(u: &Bisubmersion) -> Bisubmersion {
    let mut inv = Bisubmersion {
        domain: u.domain.clone(),
        source_linear: [u.range_row(0), u.range_row(1)],
        source_offset: u.source_offset,
        time_linear: u.time_linear.iter().map(|t| -t).collect(),
        lambda: u.lambda,
        reach: u.reach,
        target_chart: None,
    };
    inv.target_chart = inv.find_target_chart();
    inv
}

/// `U ∘ V = U ×_{s_U, r_V} V`, parameterised by the coordinates of `V`
/// followed by the time coordinates of `U`.
pub fn compose_bisubmersion(u: &Bisubmersion, v: &Bisubmersion) -> Result<Bisubmersion> {
    if let (Some((rlo, rhi)), Some((blo, bhi))) = (v.range_bbox(), u.base_box()) {
        let overlaps = (0..2).all(|i| intervals_meet_mod1(rlo[i], rhi[i], blo[i], bhi[i]));
        if !overlaps {
            return Err(Error::EmptyFiberedProduct);
        }
    }
    let (compose, _) = fibered_coordinates(u, v)?;
    let nv = v.domain.dim();
    let nu_rest = u.domain.dim() - 2;
    let n = nv + nu_rest;
    // time = τ_U(u(w)) + τ_V(v)
    let mut time_linear = vec![0.0; n];
    for j in 0..n {
        let from_u: f64 = (0..u.domain.dim()).map(|c| u.time_linear[c] * compose.linear[c][j]).sum();
        let from_v = if j < nv { v.time_linear[j] } else { 0.0 };
        time_linear[j] = from_u + from_v;
    }
    let mut source_linear = [vec![0.0; n], vec![0.0; n]];
    for i in 0..2 {
        source_linear[i][..nv].copy_from_slice(&v.source_linear[i]);
    }
    let mut factors = v.domain.factors.clone();
    factors.extend_from_slice(&u.domain.factors[1..]);
    let mut out = Bisubmersion {
        domain: Domain::new(factors),
        source_linear,
        source_offset: v.source_offset,
        time_linear,
        lambda: u.lambda,
        reach: u.reach + v.reach,
        target_chart: None,
    };
    out.target_chart = out.find_target_chart();
    Ok(out)
}

fn intervals_meet_mod1(a: f64, b: f64, c: f64, d: f64) -> bool {
    if b - a >= 1.0 || d - c >= 1.0 {
        return true;
    }
    let shift = wrap(c - a);
    shift < b - a || shift + (d - c) > 1.0
}

/// Affine map `w = (v, u_rest) ↦ u` picking the point of `U` paired with `v`.
struct AffineCoords {
    linear: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

fn fibered_coordinates(u: &Bisubmersion, v: &Bisubmersion) -> Result<(AffineCoords, ())> {
    let nv = v.domain.dim();
    let nu = u.domain.dim();
    let n = nv + nu - 2;
    let sb = DMatrix::from_fn(2, 2, |i, j| u.source_linear[i][j]);
    let sb_inv = sb.try_inverse().ok_or(Error::EmptyFiberedProduct)?;
    // s_U(u_base, u_rest) = r_V(v)  ⇒  u_base = Sb⁻¹ (r_V(v) - c_U - Sr u_rest)
    let mut rhs = vec![vec![0.0; n]; 2];
    let mut rhs_off = [0.0; 2];
    for i in 0..2 {
        let row = v.range_row(i);
        rhs[i][..nv].copy_from_slice(&row);
        for c in 2..nu {
            rhs[i][nv + c - 2] = -u.source_linear[i][c];
        }
        rhs_off[i] = v.source_offset[i] - u.source_offset[i];
    }
    let mut linear = vec![vec![0.0; n]; nu];
    let mut offset = vec![0.0; nu];
    for i in 0..2 {
        for j in 0..n {
            linear[i][j] = sb_inv[(i, 0)] * rhs[0][j] + sb_inv[(i, 1)] * rhs[1][j];
        }
        offset[i] = sb_inv[(i, 0)] * rhs_off[0] + sb_inv[(i, 1)] * rhs_off[1];
    }
    for c in 2..nu {
        linear[c][nv + c - 2] = 1.0;
    }
    Ok((AffineCoords { linear, offset }, ()))
}

/// The density `f_U ⊗ f_V` restricted to the fibered product `U ∘ V`.
pub fn fibered_tensor(u: &Bisubmersion, v: &Bisubmersion, f_u: &Density, f_v: &Density) -> Result<Density> {
    let composite = compose_bisubmersion(u, v)?;
    let (coords, _) = fibered_coordinates(u, v)?;
    let n = composite.domain.dim();
    let nv = v.domain.dim();
    let pulled_u = Density::pullback(composite.domain.clone(), coords.linear, coords.offset, f_u)?;
    let proj: Vec<Vec<f64>> = (0..nv).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let pulled_v = Density::pullback(composite.domain.clone(), proj, vec![0.0; nv], f_v)?;
    Density::product(&pulled_u, &pulled_v)
}

/// The density on `T² × ℝ` obtained by pushing `f` along the bisubmersion.
pub fn q_atlas_density(u: &Bisubmersion, f: &Density) -> Result<Density> {
    if !f.domain().compatible(&u.domain) {
        return Err(Error::DomainMismatch(format!("density on {:?}, bisubmersion on {:?}", f.domain(), u.domain)));
    }
    check_support(&u.domain, f)?;
    Density::push(&u.to_groupoid()?, f)
}

fn check_support(domain: &Domain, f: &Density) -> Result<()> {
    for (c, b) in domain.coords().iter().zip(f.bbox()) {
        if let (crate::densities::Coord::Line { lo, hi }, Some((a, z))) = (c, b) {
            if *a < lo - 1e-12 || *z > hi + 1e-12 {
                return Err(Error::SupportEscape);
            }
        }
    }
    Ok(())
}

/// `Q_U(f)` as a kernel: the pushforward along `U → T² × ℝ`, projected on
/// Fourier modes `|κ|∞ ≤ bandlimit` and sampled on the time grid.
pub fn q_atlas(u: &Bisubmersion, f: &Density, bandlimit: i32, quad: &QuadConfig) -> Result<GroupoidKernel> {
    let pushed = q_atlas_density(u, f)?;
    if let crate::densities::Node::Kernel { kernel } = f.node() {
        if u.to_groupoid()?.fiber_dim() == 0 && u.domain.factors[0] == Factor::Torus && u.time_linear == [0.0, 0.0, 1.0] && u.source_linear == [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]] {
            return Ok(kernel.clone());
        }
    }
    kernel_from_density(&pushed, bandlimit, u.lambda, quad)
}

/// Spectral projection of a density on `T² × ℝ`.
pub fn kernel_from_density(d: &Density, bandlimit: i32, lambda: f64, quad: &QuadConfig) -> Result<GroupoidKernel> {
    let coords_ok = d.domain().dim() == 3 && d.domain().factors[0] == Factor::Torus;
    if !coords_ok {
        return Err(Error::DomainMismatch("expected a density on T² × ℝ".into()));
    }
    let Some((lo, hi)) = d.bbox()[2] else {
        return Err(Error::PreconditionViolated("time support must be bounded".into()));
    };
    if hi <= lo {
        return Ok(GroupoidKernel::zero(bandlimit, lambda));
    }
    let grid = TimeGrid::covering(lo, hi, quad);
    let times = grid.rule().nodes;
    let m = quad.torus_grid;
    let nb = bandlimit as usize;
    let width = 2 * nb + 1;
    // twiddles e(-k j / m)
    let tw: Vec<Vec<C64>> = (0..width)
        .map(|ki| {
            let k = ki as f64 - nb as f64;
            (0..m).map(|j| cis(-k * j as f64 / m as f64) / m as f64).collect()
        })
        .collect();
    let per_time = par::map_slice(&times, |&t| {
        let mut row_coeffs = vec![vec![C64::new(0.0, 0.0); width]; m];
        for (iy, row) in row_coeffs.iter_mut().enumerate() {
            let y = iy as f64 / m as f64;
            let vals: Vec<C64> = (0..m).map(|ix| d.eval(&[ix as f64 / m as f64, y, t], quad)).collect();
            for (ki, slot) in row.iter_mut().enumerate() {
                *slot = vals.iter().zip(&tw[ki]).map(|(a, b)| a * b).sum();
            }
        }
        let mut coeffs = vec![C64::new(0.0, 0.0); width * width];
        for kx in 0..width {
            for ky in 0..width {
                coeffs[kx * width + ky] = (0..m).map(|iy| row_coeffs[iy][kx] * tw[ky][iy]).sum();
            }
        }
        coeffs
    });
    let mut k = GroupoidKernel::zero(bandlimit, lambda);
    for kx in 0..width {
        for ky in 0..width {
            let values: Vec<C64> = per_time.iter().map(|c| c[kx * width + ky]).collect();
            if values.iter().all(|v| v.norm() == 0.0) {
                continue;
            }
            k.modes.insert([kx as i32 - bandlimit, ky as i32 - bandlimit], TimeFn::Sampled { grid, values });
        }
    }
    Ok(k)
}

/// `g ⊗ ℓ` on `O × (-ε, ε)` with `ℓ` a smooth bump of total mass `2ε`.
pub fn hat_density(g: &Density, eps: f64) -> Density {
    let ell = Density::bumps(
        Domain::new(vec![Factor::Interval { lo: -eps, hi: eps }]),
        vec![Bump::with_mass(vec![0.0], vec![0.95 * eps], C64::new(2.0 * eps, 0.0))],
    )
    .expect("bump fits its interval");
    Density::tensor(g, &ell)
}
