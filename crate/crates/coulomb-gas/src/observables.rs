//! What gets measured on configurations: linear statistics of smooth test
//! functions, the potential field on a grid, L¹ norms taken through the
//! negative part (the field itself has integrable singularities; its
//! negative part is bounded), and trace-level estimators (exponential
//! moments, tail probabilities).

use crate::equilibrium::EquilibriumMeasure;
use crate::error::{Error, Result};
use crate::geom::{norm, norm2, sub, Point3};
use crate::stats;
use crate::system::{Configuration, Domain, System};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Smooth test function with closed-form Laplacian. Torus modes are plane
/// waves cos(2πk·x); confined-gas functions are C² radial bumps supported
/// strictly inside the equilibrium ball.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    TorusCos { k: [i64; 3] },
    Bump { rho: f64 },
}

impl TestFunction {
    pub fn torus_cos(k: [i64; 3]) -> TestFunction {
        TestFunction::TorusCos { k }
    }

    /// Radial bump (1 − (|x|/ρ)²)³ centered at the origin. Its support must
    /// sit strictly inside the equilibrium ball so the confined theory's
    /// hypotheses hold.
    pub fn bump(rho: f64) -> Result<TestFunction> {
        let r_eq = (4.0 * PI).powf(-1.0 / 3.0);
        if !(rho > 0.0 && rho < r_eq) {
            return Err(Error::InvalidArgument(format!(
                "bump radius {rho} must lie in (0, {r_eq:.4}) to stay inside the support"
            )));
        }
        Ok(TestFunction::Bump { rho })
    }

    /// Parse a registry name: "cos_1_0_0" or "bump_0.25".
    pub fn by_name(name: &str) -> Result<TestFunction> {
        if let Some(rest) = name.strip_prefix("cos_") {
            let parts: Vec<&str> = rest.split('_').collect();
            if parts.len() != 3 {
                return Err(Error::Config(format!(
                    "test function '{name}': expected cos_kx_ky_kz"
                )));
            }
            let mut k = [0i64; 3];
            for (slot, p) in k.iter_mut().zip(&parts) {
                *slot = p
                    .parse()
                    .map_err(|_| Error::Config(format!("bad wavevector component '{p}'")))?;
            }
            return Ok(TestFunction::TorusCos { k });
        }
        if let Some(rest) = name.strip_prefix("bump_") {
            let rho: f64 = rest
                .parse()
                .map_err(|_| Error::Config(format!("bad bump radius '{rest}'")))?;
            return TestFunction::bump(rho);
        }
        Err(Error::Config(format!("unknown test function '{name}'")))
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::TorusCos { k } => format!("cos_{}_{}_{}", k[0], k[1], k[2]),
            TestFunction::Bump { rho } => format!("bump_{rho}"),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            TestFunction::TorusCos { .. } => Domain::Torus,
            TestFunction::Bump { .. } => Domain::Euclidean,
        }
    }

    pub fn eval(&self, x: Point3) -> f64 {
        match self {
            TestFunction::TorusCos { k } => {
                let phase = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
                (2.0 * PI * phase).cos()
            }
            TestFunction::Bump { rho } => {
                let u = norm2(x) / (rho * rho);
                if u >= 1.0 {
                    0.0
                } else {
                    let w = 1.0 - u;
                    w * w * w
                }
            }
        }
    }

    pub fn laplacian(&self, x: Point3) -> f64 {
        match self {
            TestFunction::TorusCos { k } => {
                let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                -4.0 * PI * PI * k2 * self.eval(x)
            }
            TestFunction::Bump { rho } => {
                let u = norm2(x) / (rho * rho);
                if u >= 1.0 {
                    0.0
                } else {
                    6.0 / (rho * rho) * (1.0 - u) * (7.0 * u - 3.0)
                }
            }
        }
    }

    /// ‖Δφ‖∞ in closed form.
    pub fn laplacian_sup(&self) -> f64 {
        match self {
            TestFunction::TorusCos { k } => {
                let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                4.0 * PI * PI * k2
            }
            // |(1−u)(7u−3)| on [0,1] peaks at u = 0 with value 3
            TestFunction::Bump { rho } => 18.0 / (rho * rho),
        }
    }

    /// Centering constant: ∫φ dx on the torus, ⟨φ, μ_V⟩ for the confined
    /// gas (uniform density 3 on the ball makes it 3·∫φ = 64πρ³/105).
    pub fn equilibrium_mean(&self) -> f64 {
        match self {
            TestFunction::TorusCos { k } => {
                if k == &[0, 0, 0] {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Bump { rho } => 64.0 * PI * rho.powi(3) / 105.0,
        }
    }
}

/// Centered linear statistic: Σ_j φ(x_j) minus N times the equilibrium mean.
pub fn linear_statistic(cfg: &Configuration, phi: &TestFunction) -> Result<f64> {
    if cfg.domain() != phi.domain() {
        return Err(Error::InvalidArgument(format!(
            "test function {} is for the {} domain",
            phi.name(),
            phi.domain().as_str()
        )));
    }
    let raw: f64 = cfg.positions().iter().map(|&x| phi.eval(x)).sum();
    Ok(raw - cfg.len() as f64 * phi.equilibrium_mean())
}

/// The potential field of a configuration sampled at the centers of an M³
/// grid, together with quadrature weights for the grid's measure.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub m: usize,
    pub domain: Domain,
    /// Center of cell (0,0,0).
    pub origin: Point3,
    /// Grid spacing per axis.
    pub step: f64,
    /// Field values, index (ix·M + iy)·M + iz.
    pub values: Vec<f64>,
    /// Cells containing a particle (value computed but near-singular).
    pub singular: Vec<bool>,
    /// Lebesgue volume of one cell.
    pub cell_volume: f64,
    /// Quadrature weights of the grid measure: cell_volume on the torus,
    /// μ_V cell masses for the confined gas.
    pub weights: Vec<f64>,
    /// ⟨ζ, μ_X⟩ of the generating configuration (confined grids only).
    pub zeta_stat: Option<f64>,
}

impl FieldGrid {
    pub fn center(&self, ix: usize, iy: usize, iz: usize) -> Point3 {
        [
            self.origin[0] + ix as f64 * self.step,
            self.origin[1] + iy as f64 * self.step,
            self.origin[2] + iz as f64 * self.step,
        ]
    }

    pub fn grid_mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Lebesgue pairing Σ f(z_c)·v(z_c)·h³ — used for the duality check
    /// ⟨Δφ, Pμ_X⟩ = −⟨φ, μ_X − N·mean⟩.
    pub fn pair_with<F: Fn(Point3) -> f64>(&self, f: F) -> f64 {
        let m = self.m;
        let mut acc = 0.0;
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    let v = self.values[(ix * m + iy) * m + iz];
                    acc += f(self.center(ix, iy, iz)) * v;
                }
            }
        }
        acc * self.cell_volume
    }
}

/// Torus potential field Pμ_X(z) = Σ_j g(z − x_j) from raw positions.
/// An empty slice gives the identically-zero field.
pub fn potential_field_of_points(
    system: &System,
    positions: &[Point3],
    m: usize,
) -> Result<FieldGrid> {
    if system.domain() != Domain::Torus {
        return Err(Error::InvalidArgument(
            "torus field requested for a confined system".into(),
        ));
    }
    if m < 16 {
        return Err(Error::InvalidArgument(format!("grid too coarse: M = {m}")));
    }
    let kernel = system.kernel().expect("torus system has a kernel").clone();
    let h = 1.0 / m as f64;
    let mut values = vec![0.0; m * m * m];
    values
        .par_chunks_mut(m * m)
        .enumerate()
        .for_each(|(ix, slab)| {
            let zx = (ix as f64 + 0.5) * h;
            for iy in 0..m {
                let zy = (iy as f64 + 0.5) * h;
                for iz in 0..m {
                    let z = [zx, zy, (iz as f64 + 0.5) * h];
                    let mut acc = 0.0;
                    for &x in positions {
                        acc += kernel.eval_unchecked(sub(z, x));
                    }
                    slab[iy * m + iz] = acc;
                }
            }
        });
    let mut singular = vec![false; m * m * m];
    for &x in positions {
        let idx: Vec<usize> = (0..3)
            .map(|a| {
                let f = x[a].rem_euclid(1.0);
                ((f * m as f64) as usize).min(m - 1)
            })
            .collect();
        singular[(idx[0] * m + idx[1]) * m + idx[2]] = true;
    }
    // the negative part is uniformly bounded: Pμ_X ≥ −N·m_pot
    let floor = -(positions.len() as f64) * kernel.m_pot() - 1e-9;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < floor {
        return Err(Error::FloorViolation(format!(
            "field minimum {min} under the uniform bound {floor}"
        )));
    }
    let cell = h * h * h;
    Ok(FieldGrid {
        m,
        domain: Domain::Torus,
        origin: [0.5 * h; 3],
        step: h,
        weights: vec![cell; values.len()],
        values,
        singular,
        cell_volume: cell,
        zeta_stat: None,
    })
}

pub fn potential_field(system: &System, cfg: &Configuration, m: usize) -> Result<FieldGrid> {
    potential_field_of_points(system, cfg.positions(), m)
}

/// Confined-gas potential field Pμ_X = g∗μ_X + ⟨V,μ_X⟩ + N·V on the box
/// [−half_extent, half_extent]³, with μ_V quadrature weights.
pub fn potential_field_confined(
    system: &System,
    positions: &[Point3],
    eq: &EquilibriumMeasure,
    m: usize,
    half_extent: f64,
) -> Result<FieldGrid> {
    if system.domain() != Domain::Euclidean {
        return Err(Error::InvalidArgument(
            "confined field requested for a torus system".into(),
        ));
    }
    if m < 16 {
        return Err(Error::InvalidArgument(format!("grid too coarse: M = {m}")));
    }
    if half_extent < eq.radius() {
        return Err(Error::InvalidArgument(
            "field box does not cover the equilibrium support".into(),
        ));
    }
    let potential = *system.potential().expect("confined system has a potential");
    let n = positions.len() as f64;
    let v_at_particles: f64 = positions.iter().map(|&x| potential.eval(x)).sum();
    let h = 2.0 * half_extent / m as f64;
    let lo = -half_extent + 0.5 * h;
    let kappa3 = crate::kernel::KAPPA3;
    let mut values = vec![0.0; m * m * m];
    values
        .par_chunks_mut(m * m)
        .enumerate()
        .for_each(|(ix, slab)| {
            let zx = lo + ix as f64 * h;
            for iy in 0..m {
                let zy = lo + iy as f64 * h;
                for iz in 0..m {
                    let z = [zx, zy, lo + iz as f64 * h];
                    let mut acc = v_at_particles + n * potential.eval(z);
                    for &x in positions {
                        acc += kappa3 / norm(sub(z, x));
                    }
                    slab[iy * m + iz] = acc;
                }
            }
        });
    let mut singular = vec![false; m * m * m];
    for &x in positions {
        let mut inside = true;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = (x[a] + half_extent) / h;
            if !(0.0..(m as f64)).contains(&f) {
                inside = false;
                break;
            }
            idx[a] = f as usize;
        }
        if inside {
            singular[(idx[0] * m + idx[1]) * m + idx[2]] = true;
        }
    }
    let cell = h * h * h;
    let weights: Vec<f64> = (0..m * m * m)
        .map(|i| {
            let (ix, rest) = (i / (m * m), i % (m * m));
            let center = [
                lo + ix as f64 * h,
                lo + (rest / m) as f64 * h,
                lo + (rest % m) as f64 * h,
            ];
            eq.weight(center) * cell
        })
        .collect();
    Ok(FieldGrid {
        m,
        domain: Domain::Euclidean,
        origin: [lo; 3],
        step: h,
        values,
        singular,
        cell_volume: cell,
        weights,
        zeta_stat: Some(eq.zeta_statistic(positions)),
    })
}

/// L¹ norm of the field through its negative part.
///
/// Torus (mean-zero field): ‖Pμ‖₁ = −2∫(Pμ)₋. Confined:
/// ‖Pμ‖_{L¹(μ_V)} = ⟨ζ,μ_X⟩ − 2∫(Pμ)₋ dμ_V.
pub fn l1_norm(field: &FieldGrid) -> Result<f64> {
    let neg: f64 = field
        .values
        .iter()
        .zip(&field.weights)
        .map(|(&v, &w)| w * v.min(0.0))
        .sum();
    match field.domain {
        Domain::Torus => Ok(-2.0 * neg),
        Domain::Euclidean => {
            let zeta = field.zeta_stat.ok_or_else(|| {
                Error::InvalidArgument("confined field lacks its ζ statistic".into())
            })?;
            Ok(zeta - 2.0 * neg)
        }
    }
}

/// Result of the two-resolution duality audit.
#[derive(Debug, Clone, Copy)]
pub struct DualityCheck {
    pub statistic_abs: f64,
    /// ‖Δφ‖∞ · ‖Pμ‖₁ at resolution M and 2M.
    pub bound_coarse: f64,
    pub bound_fine: f64,
    /// 3× the refinement delta, the allowed quadrature slack.
    pub slack: f64,
    pub ok: bool,
}

/// Checks |⟨φ, μ_X − mean⟩| ≤ ‖Δφ‖∞·‖Pμ_X‖₁ with quadrature error
/// estimated from an M → 2M refinement.
pub fn duality_check(
    system: &System,
    cfg: &Configuration,
    phi: &TestFunction,
    m: usize,
) -> Result<DualityCheck> {
    let stat = linear_statistic(cfg, phi)?.abs();
    let coarse = l1_norm(&potential_field(system, cfg, m)?)? * phi.laplacian_sup();
    let fine = l1_norm(&potential_field(system, cfg, 2 * m)?)? * phi.laplacian_sup();
    let slack = 3.0 * (fine - coarse).abs();
    Ok(DualityCheck {
        statistic_abs: stat,
        bound_coarse: coarse,
        bound_fine: fine,
        slack,
        ok: stat <= fine + slack + 1e-12,
    })
}

/// Empirical exponential moment of a trace.
#[derive(Debug, Clone, Copy)]
pub struct ExpMoment {
    /// log E[e^{λv}] — always available.
    pub log_estimate: f64,
    pub log_stderr: f64,
    /// Plain-domain estimate; None when the exponents were too large.
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    pub log_domain: bool,
}

/// Mean of e^{λ·v_t} with a delete-block jackknife error. Falls back to a
/// log-domain estimate when max λ·v_t > 500 (e^x overflows near 709).
pub fn exp_moment(values: &[f64], lambda: f64) -> Result<ExpMoment> {
    let ess = stats::effective_sample_size(values).ess;
    if ess < 100.0 {
        return Err(Error::InvalidArgument(format!(
            "exponential moment needs ≥ 100 effective samples, have {ess:.0}"
        )));
    }
    let blocks = 20.min(values.len() / 10).max(2);
    let scaled: Vec<f64> = values.iter().map(|&v| lambda * v).collect();
    let max_exp = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_exp > 500.0 {
        let j = stats::jackknife_blocks(&scaled, blocks, stats::log_mean_exp)?;
        return Ok(ExpMoment {
            log_estimate: j.value,
            log_stderr: j.stderr,
            estimate: None,
            stderr: None,
            log_domain: true,
        });
    }
    let exps: Vec<f64> = scaled.iter().map(|&w| w.exp()).collect();
    let j = stats::jackknife_blocks(&exps, blocks, stats::mean)?;
    Ok(ExpMoment {
        log_estimate: j.value.ln(),
        log_stderr: j.stderr / j.value,
        estimate: Some(j.value),
        stderr: Some(j.stderr),
        log_domain: false,
    })
}

/// Empirical tail probability with autocorrelation-adjusted error bars.
#[derive(Debug, Clone, Copy)]
pub struct TailProbability {
    pub p: f64,
    pub stderr: f64,
    /// Fewer than 5 exceedances observed: the estimate is unreliable.
    pub low_count: bool,
}

/// Frequency of |v_t| ≥ threshold. The binomial error uses the effective
/// sample size of the exceedance indicator, not the raw length.
pub fn tail_probability(values: &[f64], threshold: f64) -> Result<TailProbability> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    let indicator: Vec<f64> = values
        .iter()
        .map(|&v| if v.abs() >= threshold { 1.0 } else { 0.0 })
        .collect();
    let p = stats::mean(&indicator);
    let count = indicator.iter().sum::<f64>();
    let n_eff = stats::effective_sample_size(&indicator).ess;
    let stderr = (p * (1.0 - p) / n_eff).sqrt();
    Ok(TailProbability {
        p,
        stderr,
        low_count: count < 5.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::GaussLegendre;

    #[test]
    fn names_round_trip() {
        for name in ["cos_1_0_0", "cos_-2_1_0", "bump_0.25"] {
            let f = TestFunction::by_name(name).unwrap();
            assert_eq!(f.name(), name);
        }
        assert!(TestFunction::by_name("cos_1_0").is_err());
        assert!(TestFunction::by_name("tanh_3").is_err());
        assert!(TestFunction::by_name("bump_0.9").is_err(), "outside support");
    }

    #[test]
    fn cosine_laplacian_is_consistent() {
        let f = TestFunction::torus_cos([1, -2, 0]);
        let x = [0.3, 0.77, 0.123];
        // finite-difference check of the closed form
        let h = 1e-5;
        let mut lap = -6.0 * f.eval(x) / (h * h);
        for a in 0..3 {
            let mut p = x;
            p[a] += h;
            let mut q = x;
            q[a] -= h;
            lap += (f.eval(p) + f.eval(q)) / (h * h);
        }
        assert!((lap - f.laplacian(x)).abs() < 1e-4);
        assert!(f.laplacian_sup() >= f.laplacian(x).abs());
    }

    #[test]
    fn bump_laplacian_is_consistent() {
        let f = TestFunction::bump(0.3).unwrap();
        for s in [0.0, 0.1, 0.2, 0.29] {
            let x = [s, 0.0, 0.0];
            let h = 1e-5;
            let mut lap = -6.0 * f.eval(x) / (h * h);
            for a in 0..3 {
                let mut p = x;
                p[a] += h;
                let mut q = x;
                q[a] -= h;
                lap += (f.eval(p) + f.eval(q)) / (h * h);
            }
            assert!(
                (lap - f.laplacian(x)).abs() < 1e-3,
                "at s = {s}: fd {lap} vs closed {}",
                f.laplacian(x)
            );
            assert!(f.laplacian_sup() + 1e-12 >= f.laplacian(x).abs());
        }
        // sup is attained at the center
        assert!((f.laplacian([0.0; 3]).abs() - f.laplacian_sup()).abs() < 1e-12);
    }

    #[test]
    fn bump_equilibrium_mean_matches_quadrature() {
        let rho = 0.25;
        let f = TestFunction::bump(rho).unwrap();
        let gl = GaussLegendre::new(48);
        let quad = 3.0
            * 4.0
            * PI
            * gl.integrate(0.0, rho, |s| {
                let u = s * s / (rho * rho);
                (1.0 - u).powi(3) * s * s
            });
        assert!((f.equilibrium_mean() - quad).abs() < 1e-12);
    }

    #[test]
    fn exp_moment_of_constant_trace_is_exact() {
        let vals = vec![0.7; 256];
        let m = exp_moment(&vals, 2.0).unwrap();
        assert!((m.estimate.unwrap() - (1.4f64).exp()).abs() < 1e-12);
        assert!(m.stderr.unwrap() < 1e-12);
        let unit = exp_moment(&vals, 0.0).unwrap();
        assert_eq!(unit.estimate.unwrap(), 1.0);
        assert!(!unit.log_domain);
    }

    #[test]
    fn exp_moment_switches_to_log_domain() {
        let vals: Vec<f64> = (0..300).map(|i| 600.0 + (i % 7) as f64).collect();
        let m = exp_moment(&vals, 1.0).unwrap();
        assert!(m.log_domain);
        assert!(m.estimate.is_none());
        assert!(m.log_estimate > 599.0 && m.log_estimate < 610.0);
        assert!(m.log_estimate.is_finite());
    }

    #[test]
    fn tail_probability_edge_thresholds() {
        let vals: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        let zero = tail_probability(&vals, 0.0).unwrap();
        assert_eq!(zero.p, 1.0);
        let inf = tail_probability(&vals, f64::INFINITY).unwrap();
        assert_eq!(inf.p, 0.0);
        assert!(inf.low_count);
        let half = tail_probability(&vals, 0.5).unwrap();
        assert!((half.p - 0.5).abs() < 1e-12, "stratified sample is exact");
        assert!(!half.low_count);
    }
}
