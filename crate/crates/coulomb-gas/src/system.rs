//! Particle configurations and their energies.
//!
//! A configuration caches per-particle local energies ℓ_j (the field the
//! other particles plus, in the confined case, the potential terms exert on
//! particle j) together with the total energy H, so that a Metropolis move
//! costs O(N) instead of O(N²). `total_energy` re-establishes both caches.
//!
//! Torus: H = Σ_{j<k} g(x_j−x_k), ℓ_j = Σ_{k≠j} g(x_j−x_k), H = ½ Σ_j ℓ_j.
//!
//! Confined: H = ½ Σ_{j≠k} g(x_j−x_k) + N Σ_j V(x_j) and
//! ℓ_j = Σ_{k≠j} g(x_j−x_k) + Σ_{k≠j} V(x_k) + (N−1) V(x_j), which gives
//! H = ½ Σ_j (ℓ_j + 2 V(x_j)).

use crate::error::{Error, Result};
use crate::geom::{norm, norm2, reduce, sub, wrap01, Point3};
use crate::kernel::{FreeKernel, TorusKernel, SINGULAR_TOL};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Torus,
    Euclidean,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Torus => "torus",
            Domain::Euclidean => "euclidean",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(Domain::Torus),
            "euclidean" => Ok(Domain::Euclidean),
            other => Err(Error::Config(format!("unknown domain '{other}'"))),
        }
    }
}

/// Confining potential for the Euclidean gas.
///
/// Only the quadratic family ships: V(x) = |x|²/2 + c₀. It is bounded below
/// by c₀, grows at infinity, and e^{−V} is integrable, which is everything
/// the confined Hamiltonian needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfiningPotential {
    Quadratic { c0: f64 },
}

impl ConfiningPotential {
    pub fn quadratic() -> Self {
        ConfiningPotential::Quadratic { c0: 0.0 }
    }

    pub fn quadratic_with_offset(c0: f64) -> Self {
        ConfiningPotential::Quadratic { c0 }
    }

    #[inline]
    pub fn eval(&self, x: Point3) -> f64 {
        match self {
            ConfiningPotential::Quadratic { c0 } => 0.5 * norm2(x) + c0,
        }
    }

    pub fn laplacian(&self, _x: Point3) -> f64 {
        match self {
            ConfiningPotential::Quadratic { .. } => 3.0,
        }
    }

    pub fn lower_bound(&self) -> f64 {
        match self {
            ConfiningPotential::Quadratic { c0 } => *c0,
        }
    }

    pub fn offset(&self) -> f64 {
        match self {
            ConfiningPotential::Quadratic { c0 } => *c0,
        }
    }
}

/// Interaction model: which kernel acts between particles, and under which
/// confinement. Cheap to clone; the torus kernel is shared.
#[derive(Clone)]
pub struct System {
    domain: Domain,
    torus_kernel: Option<Arc<TorusKernel>>,
    free_kernel: Option<FreeKernel>,
    potential: Option<ConfiningPotential>,
    floor: Option<f64>,
}

impl System {
    pub fn torus(kernel: Arc<TorusKernel>) -> Self {
        System {
            domain: Domain::Torus,
            torus_kernel: Some(kernel),
            free_kernel: None,
            potential: None,
            floor: None,
        }
    }

    pub fn euclidean(potential: ConfiningPotential) -> Result<Self> {
        Ok(System {
            domain: Domain::Euclidean,
            torus_kernel: None,
            free_kernel: Some(FreeKernel::new(3)?),
            potential: Some(potential),
            floor: None,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn kernel(&self) -> Option<&Arc<TorusKernel>> {
        self.torus_kernel.as_ref()
    }

    pub fn potential(&self) -> Option<&ConfiningPotential> {
        self.potential.as_ref()
    }

    /// Certified lower bound for H − N⟨ζ, μ_X⟩; checked by samplers when set.
    pub fn set_energy_floor(&mut self, bound: f64) {
        self.floor = Some(bound);
    }

    pub fn energy_floor(&self) -> Option<f64> {
        self.floor
    }

    /// Pair interaction between two positions.
    ///
    /// The arguments are ordered canonically before evaluating, so the result
    /// is bit-identical no matter how the two particles are labeled. Together
    /// with the sorted reduction in `total_energy` this makes H exactly
    /// invariant under relabeling, not merely up to roundoff.
    #[inline]
    pub fn pair(&self, a: Point3, b: Point3) -> f64 {
        let (a, b) = if lex_less(b, a) { (b, a) } else { (a, b) };
        match self.domain {
            Domain::Torus => self
                .torus_kernel
                .as_ref()
                .unwrap()
                .eval_unchecked(sub(a, b)),
            Domain::Euclidean => self
                .free_kernel
                .as_ref()
                .unwrap()
                .eval_radial(norm(sub(a, b))),
        }
    }

    #[inline]
    fn pair_dist2(&self, a: Point3, b: Point3) -> f64 {
        match self.domain {
            Domain::Torus => norm2(reduce(sub(a, b))),
            Domain::Euclidean => norm2(sub(a, b)),
        }
    }

    #[inline]
    pub fn confinement(&self, x: Point3) -> f64 {
        match (&self.potential, self.domain) {
            (Some(v), Domain::Euclidean) => v.eval(x),
            _ => 0.0,
        }
    }

    /// Full O(N²) energy; refreshes all caches and clears the dirty flag.
    ///
    /// The pair values (and, in the confined case, the potential values) are
    /// sorted before summation, so the stored H does not depend on particle
    /// labels at all.
    pub fn total_energy(&self, cfg: &mut Configuration) -> Result<f64> {
        let n = cfg.positions.len();
        let mut pair_sums = vec![0.0; n];
        let mut pair_values = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let d2 = self.pair_dist2(cfg.positions[i], cfg.positions[j]);
                if d2 < SINGULAR_TOL * SINGULAR_TOL {
                    return Err(Error::CoincidentPoints {
                        i,
                        j,
                        dist: d2.sqrt(),
                    });
                }
                let g = self.pair(cfg.positions[i], cfg.positions[j]);
                pair_sums[i] += g;
                pair_sums[j] += g;
                pair_values.push(g);
            }
        }
        let h_pairs = sorted_sum(&mut pair_values);
        match self.domain {
            Domain::Torus => {
                cfg.local.copy_from_slice(&pair_sums);
                cfg.h = h_pairs;
            }
            Domain::Euclidean => {
                let v: Vec<f64> = cfg.positions.iter().map(|&x| self.confinement(x)).collect();
                let sv = sorted_sum(&mut v.clone());
                for j in 0..n {
                    cfg.local[j] = pair_sums[j] + (sv - v[j]) + (n as f64 - 1.0) * v[j];
                }
                cfg.h = h_pairs + n as f64 * sv;
            }
        }
        cfg.dirty = false;
        Ok(cfg.h)
    }

    /// ℓ_j recomputed directly in O(N); does not touch the caches.
    pub fn local_energy(&self, cfg: &Configuration, j: usize) -> Result<f64> {
        let n = cfg.positions.len();
        if j >= n {
            return Err(Error::InvalidArgument(format!(
                "particle index {j} out of range for N = {n}"
            )));
        }
        let xj = cfg.positions[j];
        let mut acc = 0.0;
        for (k, &xk) in cfg.positions.iter().enumerate() {
            if k == j {
                continue;
            }
            acc += self.pair(xj, xk);
        }
        if self.domain == Domain::Euclidean {
            let sv_others: f64 = cfg
                .positions
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &x)| self.confinement(x))
                .sum();
            acc += sv_others + (n as f64 - 1.0) * self.confinement(xj);
        }
        Ok(acc)
    }

    /// H(x_j → x_new) − H, in O(N) kernel evaluations.
    pub fn delta_energy_move(
        &self,
        cfg: &Configuration,
        j: usize,
        x_new: Point3,
    ) -> Result<f64> {
        let n = cfg.positions.len();
        if j >= n {
            return Err(Error::InvalidArgument(format!(
                "particle index {j} out of range for N = {n}"
            )));
        }
        let x_old = cfg.positions[j];
        let mut delta = 0.0;
        for (k, &xk) in cfg.positions.iter().enumerate() {
            if k == j {
                continue;
            }
            let d2 = self.pair_dist2(x_new, xk);
            if d2 < SINGULAR_TOL * SINGULAR_TOL {
                return Err(Error::CoincidentPoints {
                    i: j,
                    j: k,
                    dist: d2.sqrt(),
                });
            }
            delta += self.pair(x_new, xk) - self.pair(x_old, xk);
        }
        if self.domain == Domain::Euclidean {
            delta += n as f64 * (self.confinement(x_new) - self.confinement(x_old));
        }
        Ok(delta)
    }

    /// Move particle j and repair all caches in O(N).
    pub fn apply_move(&self, cfg: &mut Configuration, j: usize, x_new: Point3) -> Result<()> {
        let n = cfg.positions.len();
        if j >= n {
            return Err(Error::InvalidArgument(format!(
                "particle index {j} out of range for N = {n}"
            )));
        }
        let x_new = match self.domain {
            Domain::Torus => wrap01(x_new),
            Domain::Euclidean => x_new,
        };
        let x_old = cfg.positions[j];
        let mut pair_new_j = 0.0;
        let mut pair_delta = 0.0;
        // first pass detects coincidences before any cache is touched
        for (k, &xk) in cfg.positions.iter().enumerate() {
            if k == j {
                continue;
            }
            let d2 = self.pair_dist2(x_new, xk);
            if d2 < SINGULAR_TOL * SINGULAR_TOL {
                return Err(Error::CoincidentPoints {
                    i: j,
                    j: k,
                    dist: d2.sqrt(),
                });
            }
        }
        match self.domain {
            Domain::Torus => {
                for k in 0..n {
                    if k == j {
                        continue;
                    }
                    let xk = cfg.positions[k];
                    let g_new = self.pair(x_new, xk);
                    let g_old = self.pair(x_old, xk);
                    cfg.local[k] += g_new - g_old;
                    pair_new_j += g_new;
                    pair_delta += g_new - g_old;
                }
                cfg.local[j] = pair_new_j;
                cfg.h += pair_delta;
            }
            Domain::Euclidean => {
                let v_new = self.confinement(x_new);
                let v_old = self.confinement(x_old);
                let dv = v_new - v_old;
                let mut sv_others = 0.0;
                for k in 0..n {
                    if k == j {
                        continue;
                    }
                    let xk = cfg.positions[k];
                    let g_new = self.pair(x_new, xk);
                    let g_old = self.pair(x_old, xk);
                    cfg.local[k] += (g_new - g_old) + dv;
                    pair_new_j += g_new;
                    pair_delta += g_new - g_old;
                    sv_others += self.confinement(xk);
                }
                cfg.local[j] = pair_new_j + sv_others + (n as f64 - 1.0) * v_new;
                cfg.h += pair_delta + n as f64 * dv;
            }
        }
        cfg.positions[j] = x_new;
        Ok(())
    }
}

/// Label-free position ordering used to canonicalize pair evaluations.
#[inline]
fn lex_less(a: Point3, b: Point3) -> bool {
    for i in 0..3 {
        if a[i] != b[i] {
            return a[i] < b[i];
        }
    }
    false
}

/// Sum after sorting: the result depends only on the multiset of values.
fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// Snapshot header fields carried alongside the particle rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SnapshotMeta {
    pub seed: u64,
    pub sweep: u64,
}

/// A particle configuration with energy caches.
#[derive(Debug, Clone)]
pub struct Configuration {
    domain: Domain,
    positions: Vec<Point3>,
    local: Vec<f64>,
    h: f64,
    dirty: bool,
}

impl Configuration {
    /// Torus positions are wrapped into [0,1)³ on construction.
    pub fn new(domain: Domain, mut positions: Vec<Point3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("empty configuration".into()));
        }
        if domain == Domain::Torus {
            for p in &mut positions {
                *p = wrap01(*p);
            }
        }
        let n = positions.len();
        Ok(Configuration {
            domain,
            positions,
            local: vec![0.0; n],
            h: 0.0,
            dirty: true,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    /// Cached total energy; callers must have refreshed via `total_energy`.
    pub fn energy(&self) -> f64 {
        debug_assert!(!self.dirty, "energy read from a dirty cache");
        self.h
    }

    /// Cached local energies ℓ_j.
    pub fn local_energies(&self) -> &[f64] {
        debug_assert!(!self.dirty, "local energies read from a dirty cache");
        &self.local
    }

    /// ½ Σ_j ℓ_j (torus) or ½ Σ_j (ℓ_j + 2V(x_j)) (confined): must equal H.
    pub fn energy_from_locals(&self, system: &System) -> f64 {
        let mut acc = 0.0;
        for (j, &l) in self.local.iter().enumerate() {
            acc += l + 2.0 * system.confinement(self.positions[j]);
        }
        0.5 * acc
    }

    /// CSV snapshot: schema row, header fields, then one row per particle.
    /// Floats print in shortest round-trip form, so parsing is bit-exact.
    pub fn write_snapshot<W: Write>(&self, w: &mut W, meta: SnapshotMeta) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "schema,coulomb-snapshot-v1");
        let _ = writeln!(s, "d,n,domain,seed,sweep");
        let _ = writeln!(
            s,
            "3,{},{},{},{}",
            self.positions.len(),
            self.domain.as_str(),
            meta.seed,
            meta.sweep
        );
        let _ = writeln!(s, "x,y,z");
        for p in &self.positions {
            let _ = writeln!(s, "{},{},{}", p[0], p[1], p[2]);
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(r: &mut R) -> Result<(Self, SnapshotMeta)> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Config("snapshot truncated".into()))?
                .map_err(Error::Io)
        };
        let schema = next()?;
        if schema.trim() != "schema,coulomb-snapshot-v1" {
            return Err(Error::Config(format!(
                "unrecognized snapshot schema '{schema}'"
            )));
        }
        let header = next()?;
        if header.trim() != "d,n,domain,seed,sweep" {
            return Err(Error::Config("malformed snapshot header".into()));
        }
        let meta_line = next()?;
        let fields: Vec<&str> = meta_line.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Config("malformed snapshot meta row".into()));
        }
        let d: usize = fields[0]
            .parse()
            .map_err(|_| Error::Config("bad dimension".into()))?;
        if d != 3 {
            return Err(Error::UnsupportedDimension(d));
        }
        let n: usize = fields[1]
            .parse()
            .map_err(|_| Error::Config("bad particle count".into()))?;
        let domain: Domain = fields[2].parse()?;
        let seed: u64 = fields[3]
            .parse()
            .map_err(|_| Error::Config("bad seed".into()))?;
        let sweep: u64 = fields[4]
            .parse()
            .map_err(|_| Error::Config("bad sweep index".into()))?;
        let cols = next()?;
        if cols.trim() != "x,y,z" {
            return Err(Error::Config("malformed snapshot columns".into()));
        }
        let mut positions = Vec::with_capacity(n);
        for _ in 0..n {
            let row = next()?;
            let xs: Vec<&str> = row.trim().split(',').collect();
            if xs.len() != 3 {
                return Err(Error::Config("malformed particle row".into()));
            }
            let mut p = [0.0; 3];
            for (slot, s) in p.iter_mut().zip(&xs) {
                *slot = s
                    .parse()
                    .map_err(|_| Error::Config(format!("bad coordinate '{s}'")))?;
            }
            positions.push(p);
        }
        let cfg = Configuration::new(domain, positions)?;
        Ok((cfg, SnapshotMeta { seed, sweep }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::GaussLegendre;

    #[test]
    fn quadratic_potential_basics() {
        let v = ConfiningPotential::quadratic_with_offset(-0.1);
        assert_eq!(v.eval([0.0, 0.0, 0.0]), -0.1);
        assert_eq!(v.laplacian([1.0, 2.0, 3.0]), 3.0);
        assert!(v.eval([10.0, 0.0, 0.0]) > v.lower_bound());
    }

    #[test]
    fn gibbs_weight_of_potential_is_integrable() {
        // ∫ e^{−V} over R³ for V = |x|²/2 is (2π)^{3/2}; the radial tail
        // quadrature should reproduce it, confirming integrability.
        let v = ConfiningPotential::quadratic();
        let q = GaussLegendre::new(64);
        let val = q.integrate(0.0, 12.0, |s| {
            4.0 * std::f64::consts::PI * s * s * (-v.eval([s, 0.0, 0.0])).exp()
        });
        let expect = (2.0 * std::f64::consts::PI).powf(1.5);
        assert!((val - expect).abs() < 1e-8, "{val} vs {expect}");
    }

    #[test]
    fn snapshot_bit_exact_roundtrip() {
        let cfg = Configuration::new(
            Domain::Torus,
            vec![
                [0.12345678901234567, 0.9999999999999999, 0.3],
                [1.0 / 3.0, 2.0 / 3.0, 0.7708283231644267],
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        cfg.write_snapshot(&mut buf, SnapshotMeta { seed: 7, sweep: 99 })
            .unwrap();
        let (back, meta) = Configuration::read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(meta, SnapshotMeta { seed: 7, sweep: 99 });
        for (a, b) in cfg.positions().iter().zip(back.positions()) {
            assert_eq!(a, b);
        }
        // and the serialized bytes are reproducible
        let mut buf2 = Vec::new();
        back.write_snapshot(&mut buf2, meta).unwrap();
        assert_eq!(buf, buf2);
    }
}
