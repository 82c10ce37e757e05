//! Numerical Laplace inversion on a deformed contour (fixed-Talbot rule).
//!
//! Suited to rational transforms with poles on the negative real axis, which
//! is exactly the shape of the limit-law transforms here.

use num_complex::Complex64;

/// Invert `transform` at time `t > 0` with `m` contour nodes.
///
/// Fixed-Talbot rule: `r = 2m/(5t)`, nodes `s_k = r th_k (cot th_k + i)` with
/// `th_k = k pi / m`, plus the real node `s_0 = r`.
pub fn talbot_invert<F>(transform: F, t: f64, m: usize) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    assert!(t > 0.0, "inversion requires t > 0");
    assert!(m >= 2);
    let r = 2.0 * m as f64 / (5.0 * t);
    let mut acc = 0.5 * transform(Complex64::new(r, 0.0)).re * (r * t).exp();
    for k in 1..m {
        let theta = k as f64 * std::f64::consts::PI / m as f64;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * transform(s) * Complex64::new(1.0, sigma);
        acc += term.re;
    }
    acc * r / m as f64
}

/// Default node count used by the limit-law evaluators.
pub const TALBOT_NODES: usize = 32;
