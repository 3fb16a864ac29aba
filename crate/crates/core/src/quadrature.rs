//! Gauss-Legendre and periodic trapezoid rules.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Discretisation knobs shared by every numerical routine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Gauss-Legendre panels per unit length on the time axis and inside bump supports.
    pub panels_per_unit: usize,
    /// Gauss-Legendre order per panel.
    pub order: usize,
    /// Points per direction for trapezoid sums over the whole torus.
    pub torus_grid: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { panels_per_unit: 16, order: 16, torus_grid: 128 }
    }
}

impl QuadConfig {
    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    /// Halves every step size.
    pub fn refined(self) -> Self {
        Self {
            panels_per_unit: self.panels_per_unit * 2,
            order: self.order,
            torus_grid: self.torus_grid * 2,
        }
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn cached_rule(order: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=64).map(|n| if n == 0 { (vec![], vec![]) } else { gauss_legendre(n) }).collect());
    &rules[order.clamp(1, 64)]
}

/// A one-dimensional rule: `sum w_i f(x_i)` approximates the integral.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Composite Gauss-Legendre rule on `[a, b]` with `panels` equal panels.
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = cached_rule(order);
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * x.len());
        let mut weights = Vec::with_capacity(panels * x.len());
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(w) {
                nodes.push(mid + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    /// Composite rule with panel count chosen from a density per unit length.
    pub fn for_interval(a: f64, b: f64, quad: &QuadConfig) -> Self {
        let panels = ((b - a) * quad.panels_per_unit as f64).ceil().max(1.0) as usize;
        Self::composite(a, b, panels, quad.order)
    }

    /// Like [`Rule::for_interval`] but with at least half a unit's worth of
    /// panels, so that narrow supports still get resolved.
    pub fn for_fiber(a: f64, b: f64, quad: &QuadConfig) -> Self {
        let panels = ((b - a) * quad.panels_per_unit as f64).ceil().max((quad.panels_per_unit / 2).max(1) as f64) as usize;
        Self::composite(a, b, panels, quad.order)
    }

    /// Trapezoid rule for one full period `[offset, offset + 1)`.
    pub fn periodic(n: usize, offset: f64) -> Self {
        let n = n.max(1);
        Self {
            nodes: (0..n).map(|i| offset + i as f64 / n as f64).collect(),
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}
