//! Numerical toolkit for the irrational rotation groupoid `T² ⋊_λ ℝ`, the
//! convolution algebras attached to it, and the rotation algebra `A_λ`.

pub mod config;
pub mod densities;
pub mod diffeology;
pub mod error;
pub mod groupoid;
pub mod nc_torus;
pub mod par;
pub mod periods;
pub mod phi;
pub mod plot;
pub mod quadrature;
pub mod report;
pub mod suites;
pub mod torus;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex<f64>;

/// `e^{2πi x}`.
pub fn cis(x: f64) -> C64 {
    let (s, c) = (std::f64::consts::TAU * (x - x.round())).sin_cos();
    C64::new(c, s)
}

/// `e^{2πi k x}` with the rounding error of `k x` carried into the reduced
/// phase.
pub fn cis_multiple(k: i64, x: f64) -> C64 {
    let kf = k as f64;
    let p = kf * x;
    let err = kf.mul_add(x, -p);
    cis((p - p.round()) + err)
}
