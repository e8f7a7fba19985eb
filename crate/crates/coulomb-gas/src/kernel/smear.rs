//! Ball averages γ_r ∗ g and γ_r ∗ γ_r ∗ g of the Coulomb kernels.
//!
//! γ_r is the uniform probability measure on the ball B_r. On the Fourier
//! side smearing multiplies each mode by b(2π|ξ|r) with
//! b(κ) = 3(sin κ − κ cos κ)/κ³; on the real side the erfc short-range part
//! of the Ewald split is convolved radially. For a radial profile η supported
//! on [0, t_max] and radial f,
//!
//!   (η ∗ f)(s) = (2π/s) ∫_0^{t_max} t η(t) [∫_{|s−t|}^{s+t} u f(u) du] dt,
//!
//! and for f = κ₃ erfc(αu)/u the inner integrand is κ₃ erfc(αu), whose
//! antiderivative F₁(u) = u·erfc(αu) − e^{−α²u²}/(α√π) is explicit.

use super::ewald::{reciprocal_sum, EwaldParams, KAPPA3};
use super::quad::GaussLegendre;
use crate::error::{Error, Result};
use crate::geom::{reduce, sub, Point3};
use std::f64::consts::PI;

/// Fourier multiplier of γ_r: b(κ) = 3(sin κ − κ cos κ)/κ³.
pub fn ball_factor(kappa: f64) -> f64 {
    let k = kappa.abs();
    if k < 0.05 {
        let k2 = k * k;
        1.0 - k2 / 10.0 + k2 * k2 / 280.0 - k2 * k2 * k2 / 15120.0
    } else {
        3.0 * (k.sin() - k * k.cos()) / (k * k * k)
    }
}

/// Free-space single smear (γ_r ∗ κ₃/|·|)(s): Newton's theorem inside B_r.
pub fn free_single(s: f64, r: f64) -> f64 {
    if s >= r {
        KAPPA3 / s
    } else {
        KAPPA3 * (3.0 * r * r - s * s) / (2.0 * r * r * r)
    }
}

/// Free-space double smear (γ_r ∗ γ_r ∗ κ₃/|·|)(s).
///
/// Inside s ≤ 2r the convolution is the quintic
/// κ₃ (192r⁵ − 80r³s² + 30r²s³ − s⁵)/(160 r⁶), which matches κ₃/s to third
/// order at s = 2r; at s = 0 it gives the ball self-interaction (6/5)κ₃/r.
pub fn free_double(s: f64, r: f64) -> f64 {
    if s >= 2.0 * r {
        KAPPA3 / s
    } else {
        let r2 = r * r;
        let r3 = r2 * r;
        let s2 = s * s;
        KAPPA3 * (192.0 * r3 * r2 - 80.0 * r3 * s2 + 30.0 * r2 * s2 * s - s2 * s2 * s)
            / (160.0 * r3 * r3)
    }
}

/// F₁(u) = ∫ erfc(αu) du (antiderivative vanishing at +∞).
#[inline]
fn erfc_antideriv(u: f64, alpha: f64) -> f64 {
    u * libm::erfc(alpha * u) - (-alpha * alpha * u * u).exp() / (alpha * PI.sqrt())
}

/// ∫_a^b erfc(αu) du with 0 ≤ a ≤ b.
///
/// Short intervals are integrated directly to dodge the cancellation in
/// F₁(b) − F₁(a); elsewhere the difference is relatively accurate because the
/// integrand is O(1) only where the difference is too.
fn erfc_integral(a: f64, b: f64, alpha: f64, quad4: &GaussLegendre) -> f64 {
    if b - a < 1e-3 {
        quad4.integrate(a, b, |u| libm::erfc(alpha * u))
    } else {
        erfc_antideriv(b, alpha) - erfc_antideriv(a, alpha)
    }
}

/// Radial profile of γ_r ∗ γ_r at distance t ∈ [0, 2r] (overlap of two balls
/// over V_r²): 3(4r + t)(2r − t)²/(64π r⁶).
#[inline]
fn double_profile(t: f64, r: f64) -> f64 {
    let d = 2.0 * r - t;
    3.0 * (4.0 * r + t) * d * d / (64.0 * PI * r.powi(6))
}

/// Convolution of the erfc short-range part φ(u) = κ₃ erfc(αu)/u with γ_r
/// (`twice = false`) or with γ_r ∗ γ_r (`twice = true`), at radius s.
pub fn erfc_ball_convolve(
    s: f64,
    r: f64,
    alpha: f64,
    twice: bool,
    quad: &GaussLegendre,
    quad4: &GaussLegendre,
) -> f64 {
    let t_max = if twice { 2.0 * r } else { r };
    // profile weight t·η(t); for γ_r the profile is 3/(4πr³) on [0, r]
    let weight = |t: f64| {
        if twice {
            t * double_profile(t, r)
        } else {
            t * 3.0 / (4.0 * PI * r * r * r)
        }
    };
    if s < 1e-9 {
        // (η ∗ φ)(0) = ∫ 4π t² η(t) φ(t) dt, φ(t) = κ₃ erfc(αt)/t
        return quad.integrate(0.0, t_max, |t| 4.0 * PI * weight(t) * KAPPA3 * libm::erfc(alpha * t));
    }
    let inner = |t: f64| erfc_integral((s - t).abs(), s + t, alpha, quad4);
    let integrand = |t: f64| weight(t) * inner(t);
    // |s − t| kinks the inner integral at t = s
    let acc = if s < t_max {
        quad.integrate(0.0, s, integrand) + quad.integrate(s, t_max, integrand)
    } else {
        quad.integrate(0.0, t_max, integrand)
    };
    2.0 * PI * KAPPA3 * acc / s
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r < 0.5 {
        Ok(())
    } else {
        Err(Error::SmearingRadius(r))
    }
}

/// Smeared torus kernel evaluator for one fixed radius.
///
/// Caches the b-weighted reciprocal coefficients; reuse it when evaluating
/// many points at the same r (pairwise sums in the audits, C_sub grids).
pub struct SmearedTorus {
    r: f64,
    params: EwaldParams,
    radial_once: Vec<f64>,
    radial_twice: Vec<f64>,
    shells: i32,
    reach_once: f64,
    reach_twice: f64,
    quad: GaussLegendre,
    quad4: GaussLegendre,
}

impl SmearedTorus {
    pub fn new(params: EwaldParams, r: f64) -> Result<Self> {
        check_radius(r)?;
        let radial = params.radial_coefficients();
        let mut radial_once = radial.clone();
        let mut radial_twice = radial;
        for (s2, (c1, c2)) in radial_once
            .iter_mut()
            .zip(radial_twice.iter_mut())
            .enumerate()
            .skip(1)
        {
            let b = ball_factor(2.0 * PI * (s2 as f64).sqrt() * r);
            *c1 *= b;
            *c2 *= b * b;
        }
        let reach_once = 6.0 / params.alpha + r;
        let reach_twice = 6.0 / params.alpha + 2.0 * r;
        let shells = (reach_twice + 0.5).ceil() as i32;
        Ok(SmearedTorus {
            r,
            params,
            radial_once,
            radial_twice,
            shells,
            reach_once,
            reach_twice,
            quad: GaussLegendre::new(48),
            quad4: GaussLegendre::new(4),
        })
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    fn real_part(&self, xr: Point3, twice: bool) -> f64 {
        let reach = if twice {
            self.reach_twice
        } else {
            self.reach_once
        };
        let reach2 = reach * reach;
        let mut acc = 0.0;
        for nx in -self.shells..=self.shells {
            for ny in -self.shells..=self.shells {
                for nz in -self.shells..=self.shells {
                    let d = sub(xr, [nx as f64, ny as f64, nz as f64]);
                    let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    if d2 > reach2 {
                        continue;
                    }
                    acc += erfc_ball_convolve(
                        d2.sqrt(),
                        self.r,
                        self.params.alpha,
                        twice,
                        &self.quad,
                        &self.quad4,
                    );
                }
            }
        }
        acc
    }

    /// (γ_r ∗ g)(x).
    pub fn once(&self, x: Point3) -> f64 {
        let xr = reduce(x);
        self.real_part(xr, false) + reciprocal_sum(xr, self.params.k_max, &self.radial_once)
            - 1.0 / (4.0 * self.params.alpha * self.params.alpha)
    }

    /// (γ_r ∗ γ_r ∗ g)(x); at x = 0 the smeared self-interaction.
    pub fn twice(&self, x: Point3) -> f64 {
        let xr = reduce(x);
        self.real_part(xr, true) + reciprocal_sum(xr, self.params.k_max, &self.radial_twice)
            - 1.0 / (4.0 * self.params.alpha * self.params.alpha)
    }

    /// Smeared self-interaction S(r) = (γ_r ∗ γ_r ∗ g)(0).
    pub fn self_interaction(&self) -> f64 {
        self.twice([0.0, 0.0, 0.0])
    }
}
