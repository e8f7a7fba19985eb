//! Ewald split of the periodic Coulomb Green's function on the unit torus.
//!
//! g solves Δg = −δ₀ + 1 with mean zero, equivalently ĝ(ξ) = 1/(4π²|ξ|²) for
//! ξ ≠ 0. The split at parameter α writes
//!
//!   g(x) = Σ_n κ₃ erfc(α|x−n|)/|x−n|
//!        + Σ_{ξ≠0} e^{−π²|ξ|²/α²}/(4π²|ξ|²) e^{2πi ξ·x}
//!        − 1/(4α²),
//!
//! both sums converging like Gaussians. The constant is the mean of the
//! real-space part, so g keeps mean zero for every α; evaluations are
//! α-independent up to the truncation tails, which the cutoffs below keep
//! under 1e−12.

use crate::geom::{norm2, reduce, Point3};
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

/// Coulomb normalization in d = 3: Δ(κ₃/|x|) = −δ₀.
pub const KAPPA3: f64 = 1.0 / (4.0 * PI);

/// Truncation radii for one value of the splitting parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwaldParams {
    pub alpha: f64,
    /// Real-space images summed over |n|∞ ≤ real_shells.
    pub real_shells: i32,
    /// Reciprocal modes summed over 0 < |ξ|∞ ≤ k_max.
    pub k_max: i32,
}

impl EwaldParams {
    /// Cutoffs so both tails stay below 1e−12 for this α.
    ///
    /// Real space: every omitted image sits at distance ≥ real_shells + 1/2
    /// from the reduced point, and erfc(6) ≈ 2e−17 kills the tail. Reciprocal:
    /// modes beyond |ξ| = 2α carry e^{−4π²} ≈ 7e−18.
    pub fn for_alpha(alpha: f64) -> Self {
        assert!(alpha > 0.0, "Ewald split requires alpha > 0");
        let real_shells = ((6.0 / alpha - 0.5).ceil() as i32).max(1);
        let k_max = (2.0 * alpha).ceil() as i32;
        EwaldParams {
            alpha,
            real_shells,
            k_max,
        }
    }

    /// Reciprocal coefficients indexed by |ξ|² (entry 0 unused).
    pub fn radial_coefficients(&self) -> Vec<f64> {
        let kmax = self.k_max;
        let smax = (3 * kmax * kmax) as usize;
        let mut radial = vec![0.0; smax + 1];
        for (s2, c) in radial.iter_mut().enumerate().skip(1) {
            let s2 = s2 as f64;
            *c = (-PI * PI * s2 / (self.alpha * self.alpha)).exp() / (4.0 * PI * PI * s2);
        }
        radial
    }
}

/// Per-axis phase table e^{2πi k x} for k = −kmax..=kmax.
#[inline]
pub fn phase_table(x: f64, k_max: i32) -> Vec<Complex64> {
    let step = Complex64::from_polar(1.0, 2.0 * PI * x);
    let n = (2 * k_max + 1) as usize;
    let mut t = vec![Complex64::new(1.0, 0.0); n];
    let mut acc = Complex64::new(1.0, 0.0);
    for j in 1..=k_max {
        acc *= step;
        t[(k_max + j) as usize] = acc;
        t[(k_max - j) as usize] = acc.conj();
    }
    t
}

/// Reciprocal-space sum Σ_{ξ≠0} radial[|ξ|²] · weight(|ξ|²-independent) · e^{2πiξ·x}.
///
/// `radial` already contains the Gaussian and 1/(4π²|ξ|²) factors.
pub fn reciprocal_sum(x: Point3, k_max: i32, radial: &[f64]) -> f64 {
    let tx = phase_table(x[0], k_max);
    let ty = phase_table(x[1], k_max);
    let tz = phase_table(x[2], k_max);
    let mut acc = 0.0;
    for kx in -k_max..=k_max {
        let ex = tx[(kx + k_max) as usize];
        let kx2 = (kx * kx) as usize;
        for ky in -k_max..=k_max {
            let exy = ex * ty[(ky + k_max) as usize];
            let kxy2 = kx2 + (ky * ky) as usize;
            for kz in -k_max..=k_max {
                let s2 = kxy2 + (kz * kz) as usize;
                if s2 == 0 {
                    continue;
                }
                let c = radial[s2];
                if c != 0.0 {
                    acc += c * (exy * tz[(kz + k_max) as usize]).re;
                }
            }
        }
    }
    acc
}

/// Real-space image sum Σ_{|n|∞ ≤ shells} κ₃ erfc(α|x̂−n|)/|x̂−n| for reduced x̂.
///
/// Precondition: x̂ does not coincide with a lattice point (checked by callers).
pub fn real_sum(xr: Point3, alpha: f64, shells: i32) -> f64 {
    let mut acc = 0.0;
    for nx in -shells..=shells {
        let dx = xr[0] - nx as f64;
        for ny in -shells..=shells {
            let dy = xr[1] - ny as f64;
            for nz in -shells..=shells {
                let dz = xr[2] - nz as f64;
                let s2 = dx * dx + dy * dy + dz * dz;
                let s = s2.sqrt();
                acc += KAPPA3 * libm::erfc(alpha * s) / s;
            }
        }
    }
    acc
}

/// Direct Ewald evaluation of g at a reduced point.
pub fn eval_reduced(xr: Point3, params: &EwaldParams, radial: &[f64]) -> f64 {
    real_sum(xr, params.alpha, params.real_shells)
        + reciprocal_sum(xr, params.k_max, radial)
        - 1.0 / (4.0 * params.alpha * params.alpha)
}

/// Direct Ewald evaluation of g(x), reducing x to the fundamental cell.
pub fn eval(x: Point3, params: &EwaldParams, radial: &[f64]) -> f64 {
    eval_reduced(reduce(x), params, radial)
}

/// Regularized value at the origin, g_reg0 = lim_{x→0} (g(x) − κ₃/|x|).
///
/// The n = 0 real-space term contributes κ₃(erfc(α|x|) − 1)/|x| → −2ακ₃/√π.
pub fn g_reg0(params: &EwaldParams, radial: &[f64]) -> f64 {
    let alpha = params.alpha;
    let shells = params.real_shells;
    let mut acc = -2.0 * alpha * KAPPA3 / PI.sqrt();
    for nx in -shells..=shells {
        for ny in -shells..=shells {
            for nz in -shells..=shells {
                if nx == 0 && ny == 0 && nz == 0 {
                    continue;
                }
                let s2 = (nx * nx + ny * ny + nz * nz) as f64;
                let s = s2.sqrt();
                acc += KAPPA3 * libm::erfc(alpha * s) / s;
            }
        }
    }
    acc += reciprocal_sum([0.0, 0.0, 0.0], params.k_max, radial);
    acc - 1.0 / (4.0 * alpha * alpha)
}

/// Is the reduced point within `tol` of the lattice origin?
#[inline]
pub fn near_origin(x: Point3, tol: f64) -> Option<f64> {
    let d2 = norm2(reduce(x));
    if d2 < tol * tol {
        Some(d2.sqrt())
    } else {
        None
    }
}
