//! Plots of the quotient diffeology: maps from products of chart squares and
//! intervals that factor through an affine map into the torus.

use serde::{Deserialize, Serialize};

use crate::densities::{Coord, Domain, Factor, Submersion};
use crate::error::{Error, Result};
use crate::torus::{Atlas, TorusPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Restriction,
    Composed,
    Product,
    Inverse,
    Constant,
}

/// `y ↦ A y + c` into the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusMap {
    pub linear: [Vec<f64>; 2],
    pub offset: [f64; 2],
}

impl TorusMap {
    pub fn identity() -> Self {
        Self { linear: [vec![1.0, 0.0], vec![0.0, 1.0]], offset: [0.0, 0.0] }
    }

    pub fn apply(&self, y: &[f64]) -> TorusPoint {
        let v = |i: usize| self.linear[i].iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + self.offset[i];
        TorusPoint::new(v(0), v(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plot {
    pub domain: Domain,
    pub kind: PlotKind,
    /// Absent for constant plots.
    pub h: Option<TorusMap>,
    pub constant: Option<TorusPoint>,
    /// A chart of the atlas containing the image, when one does.
    pub target_chart: Option<usize>,
}

impl Plot {
    /// The projection restricted to chart `i`.
    pub fn restriction(chart: usize) -> Self {
        Self { domain: Domain::chart(chart), kind: PlotKind::Restriction, h: Some(TorusMap::identity()), constant: None, target_chart: Some(chart) }
    }

    pub fn constant(domain: Domain, point: TorusPoint) -> Self {
        let target = Atlas::standard().charts.iter().position(|c| c.contains(point));
        Self { domain, kind: PlotKind::Constant, h: None, constant: Some(point), target_chart: target }
    }

    fn with_map(domain: Domain, kind: PlotKind, h: TorusMap) -> Self {
        let mut p = Self { domain, kind, h: Some(h), constant: None, target_chart: None };
        p.target_chart = p.image_box().and_then(|(lo, hi)| Atlas::standard().chart_for_box(lo, hi));
        p
    }

    /// `χ ∘ φ` for an affine `φ(z) = B z + d` from `domain` into the domain of `χ`.
    pub fn composed(&self, domain: Domain, linear: &[Vec<f64>], offset: &[f64]) -> Result<Self> {
        if linear.len() != self.domain.dim() || linear.iter().any(|r| r.len() != domain.dim()) {
            return Err(Error::DomainMismatch("composition shape".into()));
        }
        let Some(h) = &self.h else {
            return Ok(Plot::constant(domain, self.constant.expect("constant plot carries its point")));
        };
        let n = domain.dim();
        let mut lin = [vec![0.0; n], vec![0.0; n]];
        let mut off = h.offset;
        for i in 0..2 {
            for j in 0..n {
                lin[i][j] = (0..self.domain.dim()).map(|k| h.linear[i][k] * linear[k][j]).sum();
            }
            off[i] += (0..self.domain.dim()).map(|k| h.linear[i][k] * offset[k]).sum::<f64>();
        }
        Ok(Self::with_map(domain, PlotKind::Composed, TorusMap { linear: lin, offset: off }))
    }

    pub fn is_constant(&self) -> bool {
        self.h.is_none()
    }

    pub fn eval(&self, u: &[f64]) -> TorusPoint {
        match &self.h {
            Some(h) => h.apply(u),
            None => self.constant.expect("constant plot carries its point"),
        }
    }

    /// Interval hull of the image in lifted coordinates.
    pub fn image_box(&self) -> Option<([f64; 2], [f64; 2])> {
        let Some(h) = &self.h else {
            let p = self.constant?;
            return Some((p.as_array(), p.as_array()));
        };
        let coords = self.domain.coords();
        let mut lo = h.offset;
        let mut hi = h.offset;
        for i in 0..2 {
            for (j, a) in h.linear[i].iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let (l, u) = match coords[j] {
                    Coord::Periodic { lower, extent } if extent < 1.0 => (lower, lower + extent),
                    Coord::Periodic { .. } => return None,
                    Coord::Line { lo, hi } => (lo, hi),
                };
                lo[i] += (a * l).min(a * u);
                hi[i] += (a * l).max(a * u);
            }
        }
        Some((lo, hi))
    }

    /// Splits the domain on a uniform grid until every piece lands in one chart.
    pub fn localize(&self, max_depth: usize) -> Result<Vec<Plot>> {
        if self.target_chart.is_some() {
            return Ok(vec![self.clone()]);
        }
        if max_depth == 0 {
            return Err(Error::NoCoveringChart);
        }
        let mut out = Vec::new();
        for domain in halve(&self.domain) {
            let piece = match &self.h {
                Some(h) => Self::with_map(domain, self.kind, h.clone()),
                None => Plot::constant(domain, self.constant.expect("constant plot carries its point")),
            };
            out.extend(piece.localize(max_depth - 1)?);
        }
        Ok(out)
    }
}

fn halve(domain: &Domain) -> Vec<Domain> {
    let mut pieces = vec![Vec::new()];
    for f in &domain.factors {
        let halves: Vec<Factor> = match *f {
            Factor::Square { lower, side } => {
                let s = side / 2.0;
                vec![
                    Factor::Square { lower, side: s },
                    Factor::Square { lower: [lower[0] + s, lower[1]], side: s },
                    Factor::Square { lower: [lower[0], lower[1] + s], side: s },
                    Factor::Square { lower: [lower[0] + s, lower[1] + s], side: s },
                ]
            }
            Factor::Torus => (0..4)
                .map(|k| Factor::Square { lower: [0.5 * (k % 2) as f64, 0.5 * (k / 2) as f64], side: 0.5 })
                .collect(),
            Factor::Interval { lo, hi } => {
                let mid = 0.5 * (lo + hi);
                vec![Factor::Interval { lo, hi: mid }, Factor::Interval { lo: mid, hi }]
            }
        };
        pieces = pieces
            .into_iter()
            .flat_map(|p| {
                halves.iter().map(move |h| {
                    let mut q = p.clone();
                    q.push(*h);
                    q
                })
            })
            .collect();
    }
    pieces.into_iter().map(Domain::new).collect()
}

/// `(u, v) ↦ χ1(u) χ2(v)`.
pub fn plot_product(a: &Plot, b: &Plot) -> Plot {
    let domain = a.domain.product(&b.domain);
    match (&a.h, &b.h) {
        (None, None) => Plot::constant(domain, a.eval(&[]).add(b.eval(&[]))),
        _ => {
            let part = |p: &Plot| -> TorusMap {
                match &p.h {
                    Some(h) => h.clone(),
                    None => {
                        let c = p.constant.expect("constant plot carries its point");
                        TorusMap { linear: [vec![0.0; p.domain.dim()], vec![0.0; p.domain.dim()]], offset: [c.x, c.y] }
                    }
                }
            };
            let (ha, hb) = (part(a), part(b));
            let linear = [0, 1].map(|i| ha.linear[i].iter().chain(&hb.linear[i]).copied().collect());
            let offset = [ha.offset[0] + hb.offset[0], ha.offset[1] + hb.offset[1]];
            Plot::with_map(domain, PlotKind::Product, TorusMap { linear, offset })
        }
    }
}

/// The plot on `-O_χ` given by `w ↦ χ(-w)⁻¹`.
pub fn plot_inverse(p: &Plot) -> Plot {
    let domain = p.domain.negated();
    match &p.h {
        None => Plot::constant(domain, p.constant.expect("constant plot carries its point").inverse()),
        Some(h) => {
            let mut plot = Plot::with_map(domain, PlotKind::Inverse, TorusMap { linear: h.linear.clone(), offset: [-h.offset[0], -h.offset[1]] });
            if p.kind == PlotKind::Inverse {
                plot.kind = PlotKind::Composed;
            }
            plot
        }
    }
}

/// The realisation `O × (-ε, ε)` of a plot through the flow:
/// `q(y, s) = y`, `p(y, s) = flow(χ(y), s)`.
#[derive(Clone, Debug)]
pub struct FiberProduct {
    pub psi_domain: Domain,
    /// Linear part and offset of `p` into the torus.
    pub p_linear: [Vec<f64>; 2],
    pub p_offset: [f64; 2],
    pub q: Submersion,
    pub target_chart: usize,
    pub lambda: f64,
}

impl FiberProduct {
    pub fn p_eval(&self, z: &[f64]) -> TorusPoint {
        TorusMap { linear: self.p_linear.clone(), offset: self.p_offset }.apply(z)
    }

    /// `p` as a submersion into the torus; fails for constant plots, whose
    /// flowed image is a curve.
    pub fn p(&self) -> Result<Submersion> {
        Submersion::affine(self.psi_domain.clone(), Domain::torus(), self.p_linear.to_vec(), self.p_offset.to_vec())
    }
}

/// Neighbourhood of `x0` in the domain of `χ`, thickened by the flow, whose
/// image lies in a single chart.
pub fn fiber_product_plot(chi: &Plot, x0: &[f64], eps: f64, lambda: f64) -> Result<FiberProduct> {
    let atlas = Atlas::standard();
    let mut domain = chi.domain.clone();
    for _ in 0..12 {
        let candidate = thicken(chi, &domain, eps, lambda);
        if let Some(chart) = candidate.as_ref().and_then(|(lo, hi)| atlas.chart_for_box(*lo, *hi)) {
            return finish(chi, domain, eps, lambda, chart);
        }
        domain = shrink_around(&domain, x0);
    }
    Err(Error::EpsilonTooLarge { eps })
}

fn thicken(chi: &Plot, domain: &Domain, eps: f64, lambda: f64) -> Option<([f64; 2], [f64; 2])> {
    let piece = match &chi.h {
        Some(h) => Plot::with_map(domain.clone(), chi.kind, h.clone()),
        None => Plot::constant(domain.clone(), chi.constant?),
    };
    let (mut lo, mut hi) = piece.image_box()?;
    lo[0] -= eps;
    hi[0] += eps;
    lo[1] -= lambda.abs() * eps;
    hi[1] += lambda.abs() * eps;
    Some((lo, hi))
}

fn shrink_around(domain: &Domain, x0: &[f64]) -> Domain {
    let mut k = 0;
    let factors = domain
        .factors
        .iter()
        .map(|f| {
            let out = match *f {
                Factor::Square { lower, side } => {
                    let s = side / 2.0;
                    let c = [x0[k], x0[k + 1]];
                    let new_lower = [0, 1].map(|i| {
                        let lifted = lower[i] + crate::torus::wrap(c[i] - lower[i]);
                        (lifted - s / 2.0).clamp(lower[i], lower[i] + side - s)
                    });
                    Factor::Square { lower: new_lower, side: s }
                }
                Factor::Torus => {
                    let c = [x0[k], x0[k + 1]];
                    Factor::Square { lower: [c[0] - 0.25, c[1] - 0.25], side: 0.5 }
                }
                Factor::Interval { lo, hi } => {
                    let w = (hi - lo) / 4.0;
                    let c = x0[k].clamp(lo + w, hi - w);
                    Factor::Interval { lo: c - w, hi: c + w }
                }
            };
            k += f.dim();
            out
        })
        .collect();
    Domain::new(factors)
}

fn finish(chi: &Plot, domain: Domain, eps: f64, lambda: f64, chart: usize) -> Result<FiberProduct> {
    let n = domain.dim();
    let psi_domain = domain.product(&Domain::new(vec![Factor::Interval { lo: -eps, hi: eps }]));
    let (mut lin, off) = match &chi.h {
        Some(h) => (h.linear.clone(), h.offset),
        None => {
            let c = chi.constant.expect("constant plot carries its point");
            ([vec![0.0; n], vec![0.0; n]], [c.x, c.y])
        }
    };
    lin[0].push(1.0);
    lin[1].push(lambda);
    let q = Submersion::projection(psi_domain.clone(), domain.factors.len())?;
    Ok(FiberProduct { psi_domain, p_linear: lin, p_offset: off, q, target_chart: chart, lambda })
}
