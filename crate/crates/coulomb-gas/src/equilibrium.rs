//! Equilibrium data for the confined gas with quadratic potential in d = 3.
//!
//! For V(x) = |x|²/2 the continuum energy minimizer is the uniform
//! probability measure on a centered ball: applying the Laplacian to the
//! stationarity condition g∗μ + V = const forces the density ρ = ΔV = 3,
//! and unit mass then pins the radius at R = (4π)^{−1/3}. Everything else
//! (the offset making the minimal energy zero, the effective potential ζ)
//! follows in closed form from Newton's theorem.

use crate::error::{Error, Result};
use crate::geom::{norm, Point3};
use crate::kernel::KAPPA3;
use crate::system::ConfiningPotential;

/// The equilibrium measure, its support, and the effective potential ζ.
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumMeasure {
    radius: f64,
    density: f64,
    /// Additive offset on V chosen so the minimal continuum energy is 0.
    v_offset: f64,
}

/// Construct the equilibrium data for V = |x|²/2 in dimension d.
/// Only d = 3 ships; the quadratic potential is the only supported family.
pub fn solve_quadratic_equilibrium(d: usize) -> Result<EquilibriumMeasure> {
    if d != 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    let radius = (4.0 * std::f64::consts::PI).powf(-1.0 / 3.0);
    // E(μ) = ½⟨g∗μ,μ⟩ + ⟨V,μ⟩ = (3/5)R² + (3/10)R² + c₀; zero it.
    let v_offset = -0.9 * radius * radius;
    Ok(EquilibriumMeasure {
        radius,
        density: 3.0,
        v_offset,
    })
}

/// Construct from a named potential; anything but the quadratic family is an
/// explicit unsupported error.
pub fn solve_equilibrium(d: usize, potential_name: &str) -> Result<EquilibriumMeasure> {
    match potential_name {
        "quadratic" => solve_quadratic_equilibrium(d),
        other => Err(Error::UnsupportedPotential(other.to_string())),
    }
}

impl EquilibriumMeasure {
    /// Support radius R = (4π)^{−1/3}.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Constant density on the support (= 3 in d = 3).
    pub fn density(&self) -> f64 {
        self.density
    }

    /// Offset c₀ in V(x) = |x|²/2 + c₀ normalizing the minimal energy to 0.
    pub fn v_offset(&self) -> f64 {
        self.v_offset
    }

    /// The normalized confining potential this measure equilibrates.
    pub fn potential(&self) -> ConfiningPotential {
        ConfiningPotential::quadratic_with_offset(self.v_offset)
    }

    pub fn contains(&self, x: Point3) -> bool {
        norm(x) <= self.radius
    }

    /// μ_V density at a point: ρ inside the ball, 0 outside.
    pub fn weight(&self, x: Point3) -> f64 {
        if self.contains(x) {
            self.density
        } else {
            0.0
        }
    }

    /// ⟨V, μ_V⟩ = (3/10)R² + c₀ for the normalized potential.
    pub fn v_average(&self) -> f64 {
        0.3 * self.radius * self.radius + self.v_offset
    }

    /// g∗μ_V as a function of |x| (Newton's theorem).
    pub fn ball_potential(&self, s: f64) -> f64 {
        let r = self.radius;
        if s <= r {
            // κ₃/R³ = 1 with this radius, so the interior is (3R²−s²)/2
            KAPPA3 * (3.0 * r * r - s * s) / (2.0 * r * r * r)
        } else {
            KAPPA3 / s
        }
    }

    /// ζ(x) = g∗μ_V + ⟨V,μ_V⟩ + V: identically 0 on the support,
    /// κ₃/s + s²/2 − (3/2)R² outside (C¹ across the boundary).
    pub fn zeta_radial(&self, s: f64) -> f64 {
        let r = self.radius;
        if s <= r {
            0.0
        } else {
            KAPPA3 / s + 0.5 * s * s - 1.5 * r * r
        }
    }

    pub fn zeta(&self, x: Point3) -> f64 {
        self.zeta_radial(norm(x))
    }

    /// ⟨ζ, μ_X⟩ = Σ_j ζ(x_j); zero exactly when everyone is inside Σ.
    pub fn zeta_statistic(&self, positions: &[Point3]) -> f64 {
        positions.iter().map(|&x| self.zeta(x)).sum()
    }

    /// Global sup of |ζ − V|, attained at the origin: (9/10)R².
    pub fn sup_zeta_minus_v(&self) -> f64 {
        0.9 * self.radius * self.radius
    }

    /// Uniform draw from the support (rejection from the bounding cube).
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Point3 {
        loop {
            let p = [
                rng.random_range(-self.radius..self.radius),
                rng.random_range(-self.radius..self.radius),
                rng.random_range(-self.radius..self.radius),
            ];
            if norm(p) <= self.radius {
                return p;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_three_dimensional_quadratic_data_ships() {
        assert!(matches!(
            solve_quadratic_equilibrium(2),
            Err(Error::UnsupportedDimension(2))
        ));
        assert!(matches!(
            solve_equilibrium(3, "quartic"),
            Err(Error::UnsupportedPotential(_))
        ));
        assert!(solve_equilibrium(3, "quadratic").is_ok());
    }

    #[test]
    fn unit_mass_by_construction() {
        let eq = solve_quadratic_equilibrium(3).unwrap();
        let v3 = 4.0 / 3.0 * std::f64::consts::PI;
        let mass = eq.density() * v3 * eq.radius().powi(3);
        assert!((mass - 1.0).abs() < 1e-12, "mass = {mass}");
    }

    #[test]
    fn frozen_constants() {
        let eq = solve_quadratic_equilibrium(3).unwrap();
        assert!((eq.radius() - 0.4301270069140498).abs() < 1e-15);
        assert!((eq.v_offset() - -0.16650831786915515).abs() < 1e-15);
        assert!((eq.v_average() - (0.05550277262305171 - 0.16650831786915515)).abs() < 1e-15);
        assert!((eq.sup_zeta_minus_v() - 0.16650831786915515).abs() < 1e-15);
    }

    #[test]
    fn zeta_is_continuous_and_flat_at_the_boundary() {
        let eq = solve_quadratic_equilibrium(3).unwrap();
        let r = eq.radius();
        assert_eq!(eq.zeta_radial(0.0), 0.0);
        assert_eq!(eq.zeta_radial(r), 0.0);
        let eps = 1e-6;
        // value and first derivative both vanish at R from outside
        assert!(eq.zeta_radial(r + eps).abs() < 1e-11);
        assert!(eq.zeta_radial(r + eps) >= 0.0);
        let slope = (eq.zeta_radial(r + 2.0 * eps) - eq.zeta_radial(r + eps)) / eps;
        assert!(slope.abs() < 1e-5, "slope at boundary = {slope}");
    }

    #[test]
    fn ball_potential_is_continuous_at_the_boundary() {
        let eq = solve_quadratic_equilibrium(3).unwrap();
        let r = eq.radius();
        let inside = eq.ball_potential(r - 1e-12);
        let outside = eq.ball_potential(r + 1e-12);
        assert!((inside - outside).abs() < 1e-10);
        assert!((eq.ball_potential(r) - KAPPA3 / r).abs() < 1e-15);
    }
}
