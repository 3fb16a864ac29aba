//! The rotation algebra `A_λ`: finite sums `Σ a(m,n) uᵐ vⁿ` in normal order,
//! with `vu = e^{-2πiλ} uv`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Rule;
use crate::{cis, cis_multiple, par, C64};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Coefficient>", from = "Vec<Coefficient>")]
pub struct NcElement {
    coeffs: BTreeMap<(i32, i32), C64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct Coefficient {
    m: i32,
    n: i32,
    re: f64,
    im: f64,
}

impl From<NcElement> for Vec<Coefficient> {
    fn from(a: NcElement) -> Self {
        a.coeffs.into_iter().map(|((m, n), c)| Coefficient { m, n, re: c.re, im: c.im }).collect()
    }
}

impl From<Vec<Coefficient>> for NcElement {
    fn from(v: Vec<Coefficient>) -> Self {
        NcElement::from_terms(v.into_iter().map(|c| ((c.m, c.n), C64::new(c.re, c.im))))
    }
}

impl NcElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(0, 0, C64::new(1.0, 0.0))
    }

    pub fn u() -> Self {
        Self::monomial(1, 0, C64::new(1.0, 0.0))
    }

    pub fn v() -> Self {
        Self::monomial(0, 1, C64::new(1.0, 0.0))
    }

    /// `c uᵐ vⁿ`.
    pub fn monomial(m: i32, n: i32, c: C64) -> Self {
        Self::from_terms([((m, n), c)])
    }

    /// Sums repeated keys and drops zeros.
    pub fn from_terms<I: IntoIterator<Item = ((i32, i32), C64)>>(terms: I) -> Self {
        let mut coeffs: BTreeMap<(i32, i32), C64> = BTreeMap::new();
        for (k, c) in terms {
            *coeffs.entry(k).or_default() += c;
        }
        coeffs.retain(|_, c| *c != C64::new(0.0, 0.0));
        Self { coeffs }
    }

    pub fn coeff(&self, m: i32, n: i32) -> C64 {
        self.coeffs.get(&(m, n)).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(i32, i32), &C64)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.coeffs.iter().chain(&other.coeffs).map(|(k, c)| (*k, *c)))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_terms(self.coeffs.iter().map(|(k, c)| (*k, c * s)))
    }

    /// `Σ |a(m,n)|`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Largest coefficient modulus.
    pub fn max_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest `|m|` in the support.
    pub fn u_radius(&self) -> i32 {
        self.coeffs.keys().map(|k| k.0.abs()).max().unwrap_or(0)
    }

    /// Largest `max(|m|, |n|)` in the support.
    pub fn radius(&self) -> i32 {
        self.coeffs.keys().map(|k| k.0.abs().max(k.1.abs())).max().unwrap_or(0)
    }
}

/// `(ab)(M,N) = Σ a(m,n) b(M-m,N-n) e^{-2πiλ n (M-m)}`.
pub fn multiply(a: &NcElement, b: &NcElement, lambda: f64) -> NcElement {
    let left: Vec<((i32, i32), C64)> = a.coeffs.iter().map(|(k, c)| (*k, *c)).collect();
    let partial = par::map_slice(&left, |&((m, n), ca)| {
        b.coeffs
            .iter()
            .map(|(&(p, q), cb)| ((m + p, n + q), ca * cb * cis_multiple(-(n as i64) * p as i64, lambda)))
            .collect::<Vec<_>>()
    });
    NcElement::from_terms(partial.into_iter().flatten())
}

/// `a*(M,N) = conj(a(-M,-N)) e^{-2πiλ M N}`.
pub fn star(a: &NcElement, lambda: f64) -> NcElement {
    NcElement::from_terms(a.coeffs.iter().map(|(&(m, n), c)| ((-m, -n), c.conj() * cis_multiple(-(m as i64) * n as i64, lambda))))
}

/// The canonical trace `a(0,0)`.
pub fn trace(a: &NcElement) -> C64 {
    a.coeff(0, 0)
}

/// Matrix of `a` on `span{e_k : |k| ≤ n}` with `u e_k = e_{k-1}` and
/// `v e_k = e^{2πiλk} e_k`.
pub fn represent(a: &NcElement, n: usize, lambda: f64) -> Result<DMatrix<C64>> {
    let radius = a.u_radius() as usize;
    if n < radius + 1 {
        return Err(Error::WindowTooSmall { size: n, residual: f64::INFINITY });
    }
    let dim = 2 * n + 1;
    let mut mat = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    let n = n as i64;
    for (&(m, p), c) in &a.coeffs {
        for k in -n..=n {
            let row = k - m as i64;
            if row.abs() > n {
                continue;
            }
            mat[((row + n) as usize, (k + n) as usize)] += c * cis_multiple(p as i64 * k, lambda);
        }
    }
    Ok(mat)
}

/// Largest entry of `x - y` on rows and columns at least `margin` away from
/// the window boundary.
pub fn interior_defect(x: &DMatrix<C64>, y: &DMatrix<C64>, margin: usize) -> f64 {
    let dim = x.nrows();
    let mut worst: f64 = 0.0;
    for i in margin..dim.saturating_sub(margin) {
        for j in margin..dim.saturating_sub(margin) {
            worst = worst.max((x[(i, j)] - y[(i, j)]).norm());
        }
    }
    worst
}

/// A projection `e = f(u)v + g(u) + v*f(u)` together with its audit data.
#[derive(Clone, Debug, Serialize)]
pub struct Projection {
    pub element: NcElement,
    /// `‖e² - e‖₁`.
    pub residual: f64,
    pub trace: f64,
    pub bandlimit: usize,
}

/// Smooth step from 0 at `t ≤ 0` to 1 at `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    let psi = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        psi(t) / (psi(t) + psi(1.0 - t))
    }
}

/// Profiles on the circle: `g` rises on `[0, w]`, equals one up to `μ`, falls
/// back on `[μ, μ + w]`; `f = sqrt(g - g²)` on the falling ramp.
fn profiles(mu: f64, w: f64) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let g = move |x: f64| {
        let x = crate::torus::wrap(x);
        if x <= w {
            smooth_step(x / w)
        } else if x <= mu {
            1.0
        } else if x <= mu + w {
            1.0 - smooth_step((x - mu) / w)
        } else {
            0.0
        }
    };
    let f = move |x: f64| {
        let x = crate::torus::wrap(x);
        if x > mu && x < mu + w {
            let s = smooth_step((x - mu) / w);
            (s * (1.0 - s)).max(0.0).sqrt()
        } else {
            0.0
        }
    };
    (g, f)
}

/// Fourier coefficients `ĥ_k`, `|k| ≤ bandlimit`, of a real function on the
/// circle.
fn real_fourier(h: impl Fn(f64) -> f64, bandlimit: usize) -> Vec<C64> {
    let rule = Rule::periodic(1 << 14, 0.0);
    let samples: Vec<f64> = rule.nodes.iter().map(|&x| h(x)).collect();
    let positive: Vec<C64> = (0..=bandlimit)
        .map(|k| {
            rule.nodes.iter().zip(&samples).map(|(&x, &v)| cis(-(k as f64) * x) * v).sum::<C64>() * rule.weights[0]
        })
        .collect();
    let b = bandlimit as i64;
    (-b..=b)
        .map(|k| if k >= 0 { positive[k as usize] } else { positive[(-k) as usize].conj() })
        .collect()
}

fn function_of_u(coeffs: &[C64], bandlimit: usize) -> NcElement {
    NcElement::from_terms(coeffs.iter().enumerate().map(|(i, c)| ((i as i32 - bandlimit as i32, 0), *c)))
}

/// Builds the projection at a fixed bandlimit; fails when `‖e² - e‖₁`
/// exceeds `bound`.
pub fn powers_rieffel_projection(lambda: f64, smoothing: f64, bandlimit: usize, bound: f64) -> Result<Projection> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::PreconditionViolated(format!("rotation number {lambda} outside (0, 1)")));
    }
    let complement = lambda > 0.5;
    let mu = if complement { 1.0 - lambda } else { lambda };
    if !(smoothing > 0.0 && smoothing <= mu) {
        return Err(Error::PreconditionViolated(format!("smoothing {smoothing} must lie in (0, {mu}]")));
    }
    let (g, f) = profiles(mu, smoothing);
    let g_hat = function_of_u(&real_fourier(g, bandlimit), bandlimit);
    let f_hat = function_of_u(&real_fourier(f, bandlimit), bandlimit);
    // with μ = 1 - λ the roles of v and v* swap: v* h(u) v = h(x - μ)
    let v = NcElement::v();
    let v_adj = star(&v, lambda);
    let (fwd, bwd) = if complement { (v_adj, v) } else { (v, v_adj) };
    let mut e = multiply(&f_hat, &fwd, lambda).add(&g_hat).add(&multiply(&bwd, &f_hat, lambda));
    if complement {
        e = NcElement::one().sub(&e);
    }
    // exact self-adjointness: average with the adjoint
    e = e.add(&star(&e, lambda)).scale(C64::new(0.5, 0.0));
    let residual = multiply(&e, &e, lambda).sub(&e).l1_norm();
    let tr = trace(&e).re;
    if residual > bound {
        return Err(Error::ProjectionResidualTooLarge { residual, threshold: bound });
    }
    Ok(Projection { element: e, residual, trace: tr, bandlimit })
}

/// Ramp width used when none is given: most of the room the plateau allows.
pub fn default_smoothing(lambda: f64) -> f64 {
    0.9 * lambda.min(1.0 - lambda)
}

/// Tries bandlimits 16, 32, 48, 64 in turn.
pub fn powers_rieffel_auto(lambda: f64, smoothing: f64, bound: f64) -> Result<Projection> {
    let mut last = Error::ProjectionResidualTooLarge { residual: f64::INFINITY, threshold: bound };
    for b in [16, 32, 48, 64] {
        match powers_rieffel_projection(lambda, smoothing, b, bound) {
            Ok(p) => return Ok(p),
            Err(e) => last = e,
        }
    }
    Err(last)
}
