//! The two-torus in angle coordinates, the irrational flow, the fixed chart
//! cover with its partition of unity, and orbit-density certificates.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Reduces into `[0, 1)`.
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed representative of `x` mod 1 in `[-1/2, 1/2]`.
pub fn wrap_centered(x: f64) -> f64 {
    x - x.round()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x: wrap(x), y: wrap(y) }
    }

    pub const ORIGIN: TorusPoint = TorusPoint { x: 0.0, y: 0.0 };

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn inverse(self) -> Self {
        Self::new(-self.x, -self.y)
    }

    /// Flat distance on the torus.
    pub fn distance(self, o: Self) -> f64 {
        wrap_centered(self.x - o.x).hypot(wrap_centered(self.y - o.y))
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// `p + (t, λt)`.
pub fn flow(p: TorusPoint, t: f64, lambda: f64) -> TorusPoint {
    TorusPoint::new(p.x + t, p.y + lambda * t)
}

/// An open square `lower + (0, side)²`, taken mod 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub id: usize,
    pub lower: [f64; 2],
    pub side: f64,
}

impl Chart {
    /// Coordinates of `p` in the window `lower + [0, 1)²`.
    pub fn lift(&self, p: TorusPoint) -> [f64; 2] {
        [
            self.lower[0] + wrap(p.x - self.lower[0]),
            self.lower[1] + wrap(p.y - self.lower[1]),
        ]
    }

    pub fn contains(&self, p: TorusPoint) -> bool {
        let [u, v] = self.lift(p);
        let inside = |c: f64, lo: f64| c > lo && c < lo + self.side;
        inside(u, self.lower[0]) && inside(v, self.lower[1])
    }

    /// Whether the lifted box `[lo, hi]` (any lift) sits inside the chart.
    /// Boxes are closures of open images, so touching the edge is allowed up
    /// to rounding.
    pub fn contains_box(&self, lo: [f64; 2], hi: [f64; 2]) -> bool {
        (0..2).all(|k| {
            if hi[k] - lo[k] > self.side + BOX_SLACK {
                return false;
            }
            let mut start = self.lower[k] + wrap(lo[k] - self.lower[k]);
            if start > self.lower[k] + 1.0 - BOX_SLACK {
                start -= 1.0;
            }
            start >= self.lower[k] - BOX_SLACK && start + (hi[k] - lo[k]) <= self.lower[k] + self.side + BOX_SLACK
        })
    }
}

pub const CHART_SIDE: f64 = 0.6;
const BOX_SLACK: f64 = 1e-12;
pub const DEFAULT_EPSILON: f64 = 0.2;

const PARTITION_CENTER: f64 = 0.3;
const PARTITION_RADIUS: f64 = 0.29;

/// The fixed cover by four squares of side 0.6 and its partition of unity.
#[derive(Clone, Debug, PartialEq)]
pub struct Atlas {
    pub charts: [Chart; 4],
}

impl Atlas {
    pub fn standard() -> &'static Atlas {
        static ATLAS: OnceLock<Atlas> = OnceLock::new();
        ATLAS.get_or_init(|| {
            let corners = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]];
            let charts = std::array::from_fn(|i| Chart { id: i, lower: corners[i], side: CHART_SIDE });
            let atlas = Atlas { charts };
            atlas.verify_cover().expect("standard charts cover the torus");
            atlas
        })
    }

    pub fn chart(&self, i: usize) -> &Chart {
        &self.charts[i]
    }

    fn verify_cover(&self) -> Result<()> {
        let step = CHART_SIDE / 10.0;
        let n = (1.0 / step).ceil() as usize;
        for i in 0..n {
            for j in 0..n {
                let p = TorusPoint::new(i as f64 * step, j as f64 * step);
                if !self.charts.iter().any(|c| c.contains(p)) {
                    return Err(Error::NoCoveringChart);
                }
            }
        }
        Ok(())
    }

    /// First chart containing the lifted box, if any.
    pub fn chart_for_box(&self, lo: [f64; 2], hi: [f64; 2]) -> Option<usize> {
        self.charts.iter().position(|c| c.contains_box(lo, hi))
    }

    /// Smooth weight of chart `i` at `p`; the four weights sum to one.
    pub fn weight(&self, i: usize, p: TorusPoint) -> f64 {
        let c = &self.charts[i];
        let wx = axis_bump(p.x, c.lower[0]) / (axis_bump(p.x, 0.0) + axis_bump(p.x, 0.5));
        let wy = axis_bump(p.y, c.lower[1]) / (axis_bump(p.y, 0.0) + axis_bump(p.y, 0.5));
        wx * wy
    }
}

fn axis_bump(x: f64, lower: f64) -> f64 {
    let r = wrap_centered(x - lower - PARTITION_CENTER) / PARTITION_RADIUS;
    crate::densities::bump_profile(r * r)
}

/// Continued-fraction convergent denominators of `lambda`, deduplicated.
pub fn convergent_denominators(lambda: f64, max_terms: usize) -> Vec<u64> {
    let mut dens: Vec<u64> = Vec::new();
    let (mut q_prev, mut q) = (0u64, 1u64);
    let mut x = lambda.fract();
    dens.push(1);
    for _ in 0..max_terms {
        if x.abs() < 1e-12 {
            break;
        }
        let inv = 1.0 / x;
        let a = inv.floor();
        x = inv - a;
        let Some(next) = (a as u64).checked_mul(q).and_then(|v| v.checked_add(q_prev)) else {
            break;
        };
        q_prev = q;
        q = next;
        if *dens.last().unwrap() != q {
            dens.push(q);
        }
    }
    dens
}

fn dist_to_int(x: f64) -> f64 {
    wrap_centered(x).abs()
}

/// A time horizon `T` such that the orbit of the origin over `[0, T]` comes
/// within `delta` of every point of the torus.
///
/// For consecutive convergent denominators `q' < q`, the points `jλ` for
/// `0 ≤ j < q` split the circle into gaps of length at most
/// `‖q'λ‖ + ‖qλ‖`; every vertical circle then meets the orbit segment of
/// length `q` at least that densely.
pub fn orbit_density_horizon(delta: f64, lambda: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::InvalidDelta(delta));
    }
    let dens = convergent_denominators(lambda, 64);
    for w in dens.windows(2) {
        let gap = dist_to_int(w[0] as f64 * lambda) + dist_to_int(w[1] as f64 * lambda);
        if gap <= 2.0 * delta {
            return Ok(w[1] as f64);
        }
    }
    Err(Error::PreconditionViolated(format!("no convergent certifies delta = {delta}")))
}

/// Maximum over a `grid_n × grid_n` grid of the distance to the orbit
/// segment `{flow(0, t) : 0 ≤ t ≤ T}`.
pub fn orbit_distance_field(horizon: f64, grid_n: usize, lambda: f64) -> f64 {
    let pieces = orbit_pieces(horizon, lambda);
    let rows = par::map_range(grid_n, |i| {
        let mut worst: f64 = 0.0;
        for j in 0..grid_n {
            let p = [i as f64 / grid_n as f64, j as f64 / grid_n as f64];
            let d = pieces
                .iter()
                .map(|seg| segment_distance(p, seg, lambda))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
        worst
    });
    rows.into_iter().fold(0.0, f64::max)
}

/// Straight pieces of the orbit between wraps: start point and length.
fn orbit_pieces(horizon: f64, lambda: f64) -> Vec<([f64; 2], f64)> {
    let mut breaks = vec![0.0, horizon.max(0.0)];
    let mut k = 1.0;
    while k < horizon {
        breaks.push(k);
        k += 1.0;
    }
    if lambda != 0.0 {
        let step = 1.0 / lambda.abs();
        let mut t = step;
        while t < horizon {
            breaks.push(t);
            t += step;
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if breaks.len() == 1 {
        return vec![([0.0, 0.0], 0.0)];
    }
    breaks
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let start = [wrap(mid) - 0.5 * (w[1] - w[0]), wrap(lambda * mid) - 0.5 * lambda * (w[1] - w[0])];
            (start, w[1] - w[0])
        })
        .collect()
}

fn segment_distance(p: [f64; 2], seg: &([f64; 2], f64), lambda: f64) -> f64 {
    let (a, len) = seg;
    let norm = (1.0 + lambda * lambda).sqrt();
    let dir = [1.0 / norm, lambda / norm];
    let mut best = f64::INFINITY;
    for sx in -1..=1 {
        for sy in -1..=1 {
            let d = [p[0] + sx as f64 - a[0], p[1] + sy as f64 - a[1]];
            let along = ((d[0] * dir[0] + d[1] * dir[1]).clamp(0.0, len * norm)) as f64;
            let dx = d[0] - along * dir[0];
            let dy = d[1] - along * dir[1];
            best = best.min(dx.hypot(dy));
        }
    }
    best
}
