//! Interaction kernels: the periodic Coulomb Green's function on T³ and the
//! free-space Coulomb kernel on R^d, with their ball smearings.
//!
//! The periodic kernel g is the mean-zero solution of Δg = −δ₀ + 1 on the
//! unit torus; near the origin g(x) = κ₃/|x| + g_reg0 + O(|x|²). Everything
//! downstream (energies, certificates, field grids) evaluates through this
//! module.

mod ewald;
mod fft3;
mod quad;
mod smear;
mod table;

pub use ewald::{EwaldParams, KAPPA3};
pub use quad::GaussLegendre;
pub use smear::{ball_factor, free_double, free_single, SmearedTorus};
pub use table::{KernelTable, DEFAULT_TABLE_M, TABLE_ALPHA, TABLE_RCUT};

use crate::error::{Error, Result};
use crate::geom::{reduce, Point3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// ∫_{[−1/2,1/2]³} |x|⁻¹ dx, for the singular cell in grid means.
///
/// Cross-checked in tests by an independent spherical-pyramid quadrature.
pub const UNIT_CELL_INV_DIST_INTEGRAL: f64 = 2.380077363979554;

/// Default Ewald splitting parameter.
pub const DEFAULT_ALPHA: f64 = 6.0;

/// Points closer to the lattice than this reduce to the singularity.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Periodic Coulomb Green's function on the unit torus.
///
/// Immutable after construction; evaluation is safe from any number of
/// threads concurrently.
pub struct TorusKernel {
    d: usize,
    params: EwaldParams,
    radial: Vec<f64>,
    table: Option<KernelTable>,
    g_reg0: f64,
    min_cache: OnceLock<(Point3, f64)>,
}

impl TorusKernel {
    /// Direct-summation kernel (no table) with the default split.
    pub fn new(d: usize) -> Result<Self> {
        Self::with_alpha(d, DEFAULT_ALPHA)
    }

    pub fn with_alpha(d: usize, alpha: f64) -> Result<Self> {
        if d != 3 {
            return Err(Error::UnsupportedDimension(d));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Ewald split alpha = {alpha} must be positive"
            )));
        }
        let params = EwaldParams::for_alpha(alpha);
        let radial = params.radial_coefficients();
        let g_reg0 = ewald::g_reg0(&params, &radial);
        Ok(TorusKernel {
            d,
            params,
            radial,
            table: None,
            g_reg0,
            min_cache: OnceLock::new(),
        })
    }

    /// Kernel with a freshly built interpolation table of resolution m.
    pub fn tabulated(d: usize, m: usize) -> Result<Self> {
        let mut k = Self::new(d)?;
        k.table = Some(KernelTable::build(m)?);
        Ok(k)
    }

    /// Kernel backed by a table loaded from disk.
    pub fn from_table_file<P: AsRef<std::path::Path>>(d: usize, path: P) -> Result<Self> {
        let mut k = Self::new(d)?;
        k.table = Some(KernelTable::load(path)?);
        Ok(k)
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn table(&self) -> Option<&KernelTable> {
        self.table.as_ref()
    }

    /// Regularized value at the origin: lim_{x→0} (g(x) − κ₃/|x|).
    pub fn g_reg0(&self) -> f64 {
        self.g_reg0
    }

    /// g(x). Errors when x reduces to the lattice origin.
    pub fn eval(&self, x: Point3) -> Result<f64> {
        if let Some(d) = ewald::near_origin(x, SINGULAR_TOL) {
            return Err(Error::SingularInput(d));
        }
        Ok(self.eval_unchecked(x))
    }

    /// g(x) without the singularity check; callers guarantee x ≢ 0.
    #[inline]
    pub fn eval_unchecked(&self, x: Point3) -> f64 {
        match &self.table {
            Some(t) => t.eval(x),
            None => ewald::eval(x, &self.params, &self.radial),
        }
    }

    /// g(x) by direct Ewald summation, bypassing any table.
    pub fn eval_ewald(&self, x: Point3) -> Result<f64> {
        if let Some(d) = ewald::near_origin(x, SINGULAR_TOL) {
            return Err(Error::SingularInput(d));
        }
        Ok(ewald::eval(x, &self.params, &self.radial))
    }

    /// Direct Ewald evaluation at a caller-chosen split, for consistency checks.
    pub fn eval_ewald_at(&self, x: Point3, alpha: f64) -> Result<f64> {
        if let Some(d) = ewald::near_origin(x, SINGULAR_TOL) {
            return Err(Error::SingularInput(d));
        }
        let params = EwaldParams::for_alpha(alpha);
        let radial = params.radial_coefficients();
        Ok(ewald::eval(x, &params, &radial))
    }

    /// (γ_r ∗ g)(x), single ball average.
    pub fn smeared_once(&self, x: Point3, r: f64) -> Result<f64> {
        Ok(SmearedTorus::new(self.params, r)?.once(x))
    }

    /// (γ_r ∗ γ_r ∗ g)(x); at x = 0 the smeared self-interaction S(r).
    pub fn smeared(&self, x: Point3, r: f64) -> Result<f64> {
        Ok(SmearedTorus::new(self.params, r)?.twice(x))
    }

    /// Reusable smeared evaluator for a fixed radius.
    pub fn smearer(&self, r: f64) -> Result<SmearedTorus> {
        SmearedTorus::new(self.params, r)
    }

    /// −min g, from the cached minimizer search.
    pub fn m_pot(&self) -> f64 {
        self.minimum().1
    }

    /// (argmin g, −min g). Grid scan plus deterministic descent, cached.
    pub fn minimum(&self) -> (Point3, f64) {
        *self.min_cache.get_or_init(|| {
            let grid = if self.table.is_some() { 64 } else { 24 };
            self.min_over_torus(grid, 0)
        })
    }

    /// Dense grid scan refined by pattern descent; `seed` adds random starts.
    ///
    /// The result is seed-independent to well below 1e−8: every descent
    /// converges to the global corner minimum or to a worse local value that
    /// the min discards. Returns (minimizer, m_pot = −min).
    pub fn min_over_torus(&self, grid_m: usize, seed: u64) -> (Point3, f64) {
        let h = 1.0 / grid_m as f64;
        // coarse scan on cell centers, keep the best few
        let mut best: Vec<(f64, Point3)> = Vec::new();
        for ix in 0..grid_m {
            for iy in 0..grid_m {
                for iz in 0..grid_m {
                    let x = [
                        (ix as f64 + 0.5) * h,
                        (iy as f64 + 0.5) * h,
                        (iz as f64 + 0.5) * h,
                    ];
                    let v = self.eval_unchecked(x);
                    if best.len() < 6 || v < best.last().unwrap().0 {
                        best.push((v, x));
                        best.sort_by(|a, b| a.0.total_cmp(&b.0));
                        best.truncate(6);
                    }
                }
            }
        }
        let mut starts: Vec<Point3> = best.iter().map(|&(_, x)| x).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            starts.push([
                rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random::<f64>(),
            ]);
        }
        let mut global: Option<(f64, Point3)> = None;
        for s in starts {
            // fast phase on the table (if any), polish on the direct sum
            let coarse = pattern_descent(s, h, 1e-5, |x| self.eval_unchecked(x));
            let fine = pattern_descent(coarse.1, 4e-5, 1e-10, |x| {
                ewald::eval(x, &self.params, &self.radial)
            });
            if global.is_none() || fine.0 < global.unwrap().0 {
                global = Some(fine);
            }
        }
        let (vmin, xmin) = global.unwrap();
        (reduce(xmin), -vmin)
    }

    /// Mean of g over an m³ node grid, singular cell integrated analytically.
    ///
    /// The cell around the origin contributes κ₃·C_cell·h² + g_reg0·h³ with
    /// C_cell the unit-cube integral of 1/|x|; all other nodes use the
    /// midpoint rule. Mean-zero g should give ~0.
    pub fn grid_mean(&self, m: usize) -> f64 {
        let h = 1.0 / m as f64;
        let h3 = h * h * h;
        let mut acc = 0.0;
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    if ix == 0 && iy == 0 && iz == 0 {
                        continue;
                    }
                    acc += self.eval_unchecked([ix as f64 * h, iy as f64 * h, iz as f64 * h]);
                }
            }
        }
        acc * h3 + KAPPA3 * UNIT_CELL_INV_DIST_INTEGRAL * h * h + self.g_reg0 * h3
    }

    /// Compact 19-point finite-difference Laplacian of g at x, step h.
    ///
    /// Uses the direct Ewald sum: spline curvature error would dominate the
    /// h² budget. For the true kernel the leading stencil error term is
    /// proportional to Δ²g, which vanishes away from the singularity.
    pub fn fd_laplacian(&self, x: Point3, h: f64) -> Result<f64> {
        if let Some(d) = ewald::near_origin(x, SINGULAR_TOL) {
            return Err(Error::SingularInput(d));
        }
        Ok(compact_laplacian(
            |y| ewald::eval(y, &self.params, &self.radial),
            x,
            h,
        ))
    }
}

/// Free-space Coulomb kernel κ_d |x|^{2−d} with Δ(κ_d|x|^{2−d}) = −δ₀.
#[derive(Debug, Clone, Copy)]
pub struct FreeKernel {
    d: usize,
    kappa: f64,
}

/// Γ(n/2) for positive integer n.
fn gamma_half_integer(n: usize) -> f64 {
    if n % 2 == 0 {
        // Γ(m) = (m−1)!
        let m = n / 2;
        (1..m).map(|k| k as f64).product()
    } else {
        // Γ(m + 1/2) = (2m−1)!! √π / 2^m
        let m = n / 2;
        let mut acc = PI.sqrt();
        for k in 0..m {
            acc *= (2 * k + 1) as f64 / 2.0;
        }
        acc
    }
}

impl FreeKernel {
    pub fn new(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::UnsupportedDimension(d));
        }
        // surface area of S^{d−1}: 2 π^{d/2} / Γ(d/2)
        let omega = 2.0 * PI.powf(d as f64 / 2.0) / gamma_half_integer(d);
        let kappa = 1.0 / ((d as f64 - 2.0) * omega);
        Ok(FreeKernel { d, kappa })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    /// κ_d, the coefficient of |x|^{2−d}.
    pub fn normalization(&self) -> f64 {
        self.kappa
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, kernel dimension is {}",
                x.len(),
                self.d
            )));
        }
        let s2: f64 = x.iter().map(|v| v * v).sum();
        if s2 < SINGULAR_TOL * SINGULAR_TOL {
            return Err(Error::SingularInput(s2.sqrt()));
        }
        Ok(self.eval_radial(s2.sqrt()))
    }

    /// κ_d s^{2−d} for s > 0.
    #[inline]
    pub fn eval_radial(&self, s: f64) -> f64 {
        self.kappa * s.powi(2 - self.d as i32)
    }

    /// (γ_r ∗ g_free)(s); d = 3 only.
    pub fn smeared_once_radial(&self, s: f64, r: f64) -> Result<f64> {
        self.require_d3()?;
        if !(r > 0.0) {
            return Err(Error::SmearingRadius(r));
        }
        Ok(free_single(s, r))
    }

    /// (γ_r ∗ γ_r ∗ g_free)(s); d = 3 only.
    pub fn smeared_radial(&self, s: f64, r: f64) -> Result<f64> {
        self.require_d3()?;
        if !(r > 0.0) {
            return Err(Error::SmearingRadius(r));
        }
        Ok(free_double(s, r))
    }

    fn require_d3(&self) -> Result<()> {
        if self.d == 3 {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension(self.d))
        }
    }
}

fn pattern_descent<F: Fn(Point3) -> f64>(
    start: Point3,
    step0: f64,
    step_min: f64,
    f: F,
) -> (f64, Point3) {
    let mut x = start;
    let mut v = f(x);
    let mut step = step0;
    while step > step_min {
        let mut improved = false;
        for axis in 0..3 {
            for dir in [-1.0, 1.0] {
                let mut y = x;
                y[axis] += dir * step;
                let vy = f(y);
                if vy < v {
                    v = vy;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (v, x)
}

/// Compact 19-point Laplacian: (⅓ ΣS₁ + ⅙ ΣS₂ − 4f)/h² over face and edge
/// neighbors. Its h² error term is (1/12)Δ²f, zero for harmonic-type fields.
pub fn compact_laplacian<F: Fn(Point3) -> f64>(f: F, x: Point3, h: f64) -> f64 {
    let mut s1 = 0.0;
    for axis in 0..3 {
        for dir in [-1.0, 1.0] {
            let mut y = x;
            y[axis] += dir * h;
            s1 += f(y);
        }
    }
    let mut s2 = 0.0;
    for a in 0..3 {
        for b in (a + 1)..3 {
            for da in [-1.0, 1.0] {
                for db in [-1.0, 1.0] {
                    let mut y = x;
                    y[a] += da * h;
                    y[b] += db * h;
                    s2 += f(y);
                }
            }
        }
    }
    (s1 / 3.0 + s2 / 6.0 - 4.0 * f(x)) / (h * h)
}

/// Spectral quadratic form ⟨φ, g∗φ⟩ = Σ_{ξ≠0} ĝ(ξ)|φ̂(ξ)|² for a cosine/sine
/// polynomial given by coefficient maps over frequencies |k|∞ ≤ deg.
///
/// ĝ(ξ) = 1/(4π²|ξ|²) > 0, so the form is nonnegative for mean-zero φ.
pub fn spectral_quadratic_form(coeffs: &[(i32, i32, i32, f64, f64)]) -> f64 {
    // entries: (kx, ky, kz, a_cos, b_sin); conjugate frequencies folded in
    let mut acc = 0.0;
    for &(kx, ky, kz, a, b) in coeffs {
        let s2 = (kx * kx + ky * ky + kz * kz) as f64;
        if s2 == 0.0 {
            continue;
        }
        let ghat = 1.0 / (4.0 * PI * PI * s2);
        // φ̂(±ξ) = (a ∓ ib)/2 ⟹ |φ̂(ξ)|² + |φ̂(−ξ)|² = (a² + b²)/2
        acc += ghat * (a * a + b * b) / 2.0;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::norm;

    #[test]
    fn rejects_unsupported_dimension() {
        assert!(matches!(
            TorusKernel::new(4),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(matches!(
            TorusKernel::new(2),
            Err(Error::UnsupportedDimension(2))
        ));
    }

    #[test]
    fn singular_input_is_an_error() {
        let k = TorusKernel::new(3).unwrap();
        assert!(matches!(
            k.eval([0.0, 0.0, 0.0]),
            Err(Error::SingularInput(_))
        ));
        assert!(matches!(
            k.eval([1.0, 2.0, -1.0]),
            Err(Error::SingularInput(_))
        ));
    }

    #[test]
    fn free_kernel_normalization() {
        let k = FreeKernel::new(3).unwrap();
        assert!((k.eval(&[1.0, 0.0, 0.0]).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-16);
        // homogeneity g(2x) = 2^{2−d} g(x)
        let a = k.eval(&[0.2, -0.1, 0.3]).unwrap();
        let b = k.eval(&[0.4, -0.2, 0.6]).unwrap();
        assert!((2.0 * b - a).abs() < 1e-15);

        let k5 = FreeKernel::new(5).unwrap();
        // κ_5 = 1/(3·ω_4), ω_4 = 8π²/3
        assert!((k5.normalization() - 1.0 / (8.0 * PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn compact_laplacian_reproduces_quadratics() {
        let f = |x: Point3| 2.0 * x[0] * x[0] - x[1] * x[1] + 0.5 * x[2] * x[2] + x[0] * x[1];
        let lap = compact_laplacian(f, [0.3, -0.2, 0.9], 1e-3);
        assert!((lap - 3.0).abs() < 1e-9);
    }

    #[test]
    fn free_kernel_harmonic_away_from_origin() {
        let k = FreeKernel::new(3).unwrap();
        let f = |x: Point3| k.eval_radial(norm(x));
        let lap = compact_laplacian(f, [0.7, 0.0, 0.0], 1e-3);
        assert!(lap.abs() < 1e-6, "laplacian {lap}");
        let lap2 = compact_laplacian(f, [0.4, -0.5, 0.2], 1e-3);
        assert!(lap2.abs() < 1e-6, "laplacian {lap2}");
    }
}
