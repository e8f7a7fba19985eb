//! Markov chains for the Gibbs measure ∝ e^{−βH}.
//!
//! Production sampling is random-walk Metropolis with single-particle moves:
//! Gaussian steps, wrapped on the torus, accepted with min(1, e^{−βΔ}) using
//! the O(N) move deltas from [`crate::system`]. A grid heat-bath that redraws
//! one particle from its exact discretized conditional is kept alongside as a
//! validation sampler.
//!
//! Every random number comes from a counter-based generator keyed by
//! (seed, chain id), so a chain is a pure function of those two values and a
//! trace can be reproduced bit for bit, either by rerunning from scratch or by
//! restoring a checkpoint. Proposal-scale tuning runs only during burn-in;
//! after that σ is frozen and the chain is time-homogeneous.

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::observables::{linear_statistic, TestFunction};
use crate::stats::{self, Ess};
use crate::system::{Configuration, Domain, SnapshotMeta, System};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

/// Sweeps between σ updates while tuning.
const TUNE_WINDOW: u64 = 50;
/// Metropolis acceptance rate the tuner steers toward.
const TUNE_TARGET: f64 = 0.35;
/// Sweeps between full cache rebuilds inside `run_chain`.
pub const REFRESH_EVERY: u64 = 1024;

/// Generator driving chain `chain_id` of a run keyed by `seed`.
///
/// Streams are independent, so chains of one run never share randomness.
pub fn chain_rng(seed: u64, chain_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_id);
    rng
}

/// Generator for building chain `chain_id`'s initial configuration. Lives in
/// the upper half of the stream space so it cannot collide with `chain_rng`.
pub fn init_rng(seed: u64, chain_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_id | 1 << 63);
    rng
}

/// Cubic lattice of the first `n` sites, each coordinate perturbed by
/// `jitter` lattice spacings. Standard torus start: it is far from the
/// coincidence set and burns in quickly.
pub fn lattice_init<R: Rng>(n: usize, jitter: f64, rng: &mut R) -> Vec<Point3> {
    let side = (n as f64).cbrt().ceil() as usize;
    let side = side.max(1);
    let h = 1.0 / side as f64;
    let mut out = Vec::with_capacity(n);
    'fill: for ix in 0..side {
        for iy in 0..side {
            for iz in 0..side {
                if out.len() == n {
                    break 'fill;
                }
                let mut p = [
                    (ix as f64 + 0.5) * h,
                    (iy as f64 + 0.5) * h,
                    (iz as f64 + 0.5) * h,
                ];
                for c in &mut p {
                    *c += jitter * h * (rng.random::<f64>() - 0.5);
                }
                out.push(p);
            }
        }
    }
    out
}

/// `n` i.i.d. uniform points in the ball of the given radius (rejection from
/// the bounding cube). Standard start for the confined gas.
pub fn ball_init<R: Rng>(n: usize, radius: f64, rng: &mut R) -> Vec<Point3> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = [
            radius * (2.0 * rng.random::<f64>() - 1.0),
            radius * (2.0 * rng.random::<f64>() - 1.0),
            radius * (2.0 * rng.random::<f64>() - 1.0),
        ];
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= radius * radius {
            out.push(p);
        }
    }
    out
}

/// One Markov chain: configuration, inverse temperature, generator, proposal
/// scale, counters. Everything needed to reproduce or resume the chain is in
/// here and goes into a checkpoint.
pub struct ChainState {
    system: System,
    cfg: Configuration,
    beta: f64,
    seed: u64,
    chain_id: u64,
    rng: ChaCha8Rng,
    sigma: f64,
    tuning: bool,
    sweep: u64,
    proposed: u64,
    accepted: u64,
    // window bases for the tuner, production bases for the reported rate
    win_p0: u64,
    win_a0: u64,
    prod_p0: u64,
    prod_a0: u64,
}

impl ChainState {
    /// Build a chain at `beta ≥ 0` (β = 0 is the uniform control chain).
    /// Establishes the energy caches, so a coincident start is rejected here.
    pub fn new(
        system: System,
        mut cfg: Configuration,
        beta: f64,
        seed: u64,
        chain_id: u64,
    ) -> Result<ChainState> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "inverse temperature must be finite and ≥ 0, got {beta}"
            )));
        }
        if cfg.domain() != system.domain() {
            return Err(Error::InvalidArgument(
                "configuration and system live on different domains".into(),
            ));
        }
        system.total_energy(&mut cfg)?;
        let n = cfg.len() as f64;
        let sigma = (0.25 * n.powf(-1.0 / 3.0)).clamp(1e-3, 0.25);
        Ok(ChainState {
            system,
            cfg,
            beta,
            seed,
            chain_id,
            rng: chain_rng(seed, chain_id),
            sigma,
            tuning: true,
            sweep: 0,
            proposed: 0,
            accepted: 0,
            win_p0: 0,
            win_a0: 0,
            prod_p0: 0,
            prod_a0: 0,
        })
    }

    pub fn configuration(&self) -> &Configuration {
        &self.cfg
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn chain_id(&self) -> u64 {
        self.chain_id
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn set_sigma(&mut self, sigma: f64) -> Result<()> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "proposal scale must be positive, got {sigma}"
            )));
        }
        self.sigma = sigma;
        Ok(())
    }

    pub fn sweep(&self) -> u64 {
        self.sweep
    }

    pub fn proposed(&self) -> u64 {
        self.proposed
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn is_tuning(&self) -> bool {
        self.tuning
    }

    /// Freeze σ and start counting the reported acceptance rate from here.
    /// Idempotent; `run_chain` calls it when the burn-in ends.
    pub fn finish_burn_in(&mut self) {
        self.tuning = false;
        self.prod_p0 = self.proposed;
        self.prod_a0 = self.accepted;
    }

    /// Acceptance rate since the burn-in ended (over everything if it never
    /// did). 0 before any proposal.
    pub fn acceptance(&self) -> f64 {
        let p = self.proposed - self.prod_p0;
        let a = self.accepted - self.prod_a0;
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }

    /// Rebuild the energy caches from the positions and check the certified
    /// floor if one is set. Periodically scheduled by `run_chain` so that
    /// incremental cache drift never accumulates past a few ulps.
    pub fn refresh(&mut self) -> Result<f64> {
        let h = self.system.total_energy(&mut self.cfg)?;
        if let (Some(floor), Domain::Torus) = (self.system.energy_floor(), self.system.domain()) {
            let slack = 1e-9 * h.abs().max(1.0);
            if h < floor - slack {
                return Err(Error::FloorViolation(format!(
                    "H = {h} fell below the certified bound {floor} at sweep {}",
                    self.sweep
                )));
            }
        }
        Ok(h)
    }

    /// Cached energy of the current configuration.
    pub fn energy(&self) -> f64 {
        self.cfg.energy()
    }

    /// N single-particle Metropolis proposals in scan order.
    ///
    /// A proposal into the coincidence set has target weight zero and is
    /// rejected like any other uphill move. At β = 0 everything else is
    /// accepted without evaluating the energy difference.
    pub fn metropolis_sweep(&mut self) -> Result<()> {
        let n = self.cfg.len();
        for j in 0..n {
            let x = self.cfg.positions()[j];
            let mut x_new = x;
            for c in &mut x_new {
                let z: f64 = self.rng.sample(StandardNormal);
                *c += self.sigma * z;
            }
            self.proposed += 1;
            if self.beta == 0.0 {
                match self.system.apply_move(&mut self.cfg, j, x_new) {
                    Ok(()) => self.accepted += 1,
                    Err(Error::CoincidentPoints { .. }) => {}
                    Err(e) => return Err(e),
                }
                continue;
            }
            let delta = match self.system.delta_energy_move(&self.cfg, j, x_new) {
                Ok(d) => d,
                Err(Error::CoincidentPoints { .. }) => continue,
                Err(e) => return Err(e),
            };
            let accept = delta <= 0.0 || {
                let u: f64 = self.rng.random();
                u < (-self.beta * delta).exp()
            };
            if accept {
                self.system.apply_move(&mut self.cfg, j, x_new)?;
                self.accepted += 1;
            }
        }
        self.sweep += 1;
        if self.tuning && self.sweep % TUNE_WINDOW == 0 {
            self.retune();
        }
        Ok(())
    }

    fn retune(&mut self) {
        let p = self.proposed - self.win_p0;
        let a = self.accepted - self.win_a0;
        self.win_p0 = self.proposed;
        self.win_a0 = self.accepted;
        if p == 0 {
            return;
        }
        let rate = a as f64 / p as f64;
        let hi = match self.system.domain() {
            Domain::Torus => 0.3,
            Domain::Euclidean => 1.0,
        };
        self.sigma = (self.sigma * (rate - TUNE_TARGET).exp()).clamp(1e-4, hi);
    }

    /// Log-weights −β·Σ_{k≠j} interactions of cell centers of an m³ grid with
    /// the particles other than j. The heat-bath draw exponentiates these;
    /// tests use them directly for conditional-measure identities.
    pub fn conditional_log_weights(&self, j: usize, m: usize) -> Result<Vec<f64>> {
        if self.system.domain() != Domain::Torus {
            return Err(Error::InvalidArgument(
                "the grid heat-bath is defined on the torus only".into(),
            ));
        }
        if m < 4 {
            return Err(Error::InvalidArgument(format!(
                "heat-bath grid m = {m} too coarse"
            )));
        }
        let n = self.cfg.len();
        if j >= n {
            return Err(Error::InvalidArgument(format!(
                "particle index {j} out of range for N = {n}"
            )));
        }
        let kernel = self.system.kernel().expect("torus system has a kernel");
        let h = 1.0 / m as f64;
        let positions = self.cfg.positions();
        let mut lw = vec![0.0; m * m * m];
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    let z = [
                        (ix as f64 + 0.5) * h,
                        (iy as f64 + 0.5) * h,
                        (iz as f64 + 0.5) * h,
                    ];
                    let mut f = 0.0;
                    for (k, &xk) in positions.iter().enumerate() {
                        if k == j {
                            continue;
                        }
                        f += kernel.eval_unchecked([z[0] - xk[0], z[1] - xk[1], z[2] - xk[2]]);
                    }
                    lw[(ix * m + iy) * m + iz] = -self.beta * f;
                }
            }
        }
        Ok(lw)
    }

    /// Redraw particle j from its discretized conditional Gibbs measure:
    /// inverse-CDF over the m³ cell weights, then uniform jitter inside the
    /// chosen cell. Exact in the m → ∞ limit; cells holding another particle
    /// get weight e^{−∞} = 0 automatically.
    pub fn heatbath_resample(&mut self, j: usize, m: usize) -> Result<()> {
        let lw = self.conditional_log_weights(j, m)?;
        // shift so the largest weight is 1: exponentials cannot overflow
        let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut cum = Vec::with_capacity(lw.len());
        let mut acc = 0.0;
        for &l in &lw {
            acc += (l - top).exp();
            cum.push(acc);
        }
        let total = acc;
        let h = 1.0 / m as f64;
        for _ in 0..4 {
            let u = self.rng.random::<f64>() * total;
            let idx = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
            let iz = idx % m;
            let iy = (idx / m) % m;
            let ix = idx / (m * m);
            let x = [
                (ix as f64 + self.rng.random::<f64>()) * h,
                (iy as f64 + self.rng.random::<f64>()) * h,
                (iz as f64 + self.rng.random::<f64>()) * h,
            ];
            match self.system.apply_move(&mut self.cfg, j, x) {
                Ok(()) => return Ok(()),
                Err(Error::CoincidentPoints { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::InvalidArgument(
            "heat-bath kept drawing coincident cells; grid too coarse".into(),
        ))
    }

    /// Serialize everything needed to resume bit-exactly. Rebuilds the energy
    /// caches first, so a resumed chain and the original agree bitwise from
    /// this sweep on.
    pub fn write_checkpoint<W: Write>(&mut self, w: &mut W) -> Result<()> {
        self.refresh()?;
        let mut s = String::new();
        let _ = writeln!(s, "schema,coulomb-checkpoint-v1");
        let _ = writeln!(
            s,
            "beta,sigma,chain,tuning,proposed,accepted,win_p0,win_a0,prod_p0,prod_a0,rng_word_pos"
        );
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.beta,
            self.sigma,
            self.chain_id,
            u8::from(self.tuning),
            self.proposed,
            self.accepted,
            self.win_p0,
            self.win_a0,
            self.prod_p0,
            self.prod_a0,
            self.rng.get_word_pos()
        );
        w.write_all(s.as_bytes())?;
        self.cfg.write_snapshot(
            w,
            SnapshotMeta {
                seed: self.seed,
                sweep: self.sweep,
            },
        )
    }

    /// Restore a chain written by `write_checkpoint` onto `system`.
    pub fn read_checkpoint<R: BufRead>(system: System, r: &mut R) -> Result<ChainState> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim() != "schema,coulomb-checkpoint-v1" {
            return Err(Error::Config(format!(
                "unrecognized checkpoint schema '{}'",
                line.trim()
            )));
        }
        line.clear();
        r.read_line(&mut line)?;
        if line.trim()
            != "beta,sigma,chain,tuning,proposed,accepted,win_p0,win_a0,prod_p0,prod_a0,rng_word_pos"
        {
            return Err(Error::Config("malformed checkpoint header".into()));
        }
        line.clear();
        r.read_line(&mut line)?;
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Config("malformed checkpoint row".into()));
        }
        let bad = |what: &str| Error::Config(format!("checkpoint: bad {what}"));
        let beta: f64 = fields[0].parse().map_err(|_| bad("beta"))?;
        let sigma: f64 = fields[1].parse().map_err(|_| bad("sigma"))?;
        let chain_id: u64 = fields[2].parse().map_err(|_| bad("chain id"))?;
        let tuning: u8 = fields[3].parse().map_err(|_| bad("tuning flag"))?;
        let proposed: u64 = fields[4].parse().map_err(|_| bad("counter"))?;
        let accepted: u64 = fields[5].parse().map_err(|_| bad("counter"))?;
        let win_p0: u64 = fields[6].parse().map_err(|_| bad("counter"))?;
        let win_a0: u64 = fields[7].parse().map_err(|_| bad("counter"))?;
        let prod_p0: u64 = fields[8].parse().map_err(|_| bad("counter"))?;
        let prod_a0: u64 = fields[9].parse().map_err(|_| bad("counter"))?;
        let word_pos: u128 = fields[10].parse().map_err(|_| bad("generator state"))?;
        let (mut cfg, meta) = Configuration::read_snapshot(r)?;
        if cfg.domain() != system.domain() {
            return Err(Error::Config(
                "checkpoint domain does not match the system".into(),
            ));
        }
        system.total_energy(&mut cfg)?;
        let mut rng = chain_rng(meta.seed, chain_id);
        rng.set_word_pos(word_pos);
        Ok(ChainState {
            system,
            cfg,
            beta,
            seed: meta.seed,
            chain_id,
            rng,
            sigma,
            tuning: tuning != 0,
            sweep: meta.sweep,
            proposed,
            accepted,
            win_p0,
            win_a0,
            prod_p0,
            prod_a0,
        })
    }
}

/// Sweep budget of a run. `sweeps` counts everything including the burn-in;
/// the trace holds floor((sweeps − burn_in)/thin) rows.
#[derive(Debug, Clone, Copy)]
pub struct RunParams {
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
}

impl RunParams {
    fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be ≥ 1".into()));
        }
        if self.burn_in > self.sweeps {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} exceeds the sweep budget {}",
                self.burn_in, self.sweeps
            )));
        }
        Ok(())
    }
}

/// Thinned record of one chain: energy and the named linear statistics at
/// every recorded sweep, plus the running acceptance rate.
#[derive(Debug, Clone)]
pub struct Trace {
    pub chain_id: u64,
    pub names: Vec<String>,
    pub sweeps: Vec<u64>,
    pub energy: Vec<f64>,
    /// One column per name, indexed [observable][row].
    pub stats: Vec<Vec<f64>>,
    pub acceptance: Vec<f64>,
}

impl Trace {
    fn with_names(chain_id: u64, names: Vec<String>, capacity: usize) -> Trace {
        Trace {
            chain_id,
            stats: names.iter().map(|_| Vec::with_capacity(capacity)).collect(),
            names,
            sweeps: Vec::with_capacity(capacity),
            energy: Vec::with_capacity(capacity),
            acceptance: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.sweeps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sweeps.is_empty()
    }

    /// Column by name: "energy", "acceptance", or an observable name.
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        match name {
            "energy" => Some(&self.energy),
            "acceptance" => Some(&self.acceptance),
            _ => {
                let i = self.names.iter().position(|n| n == name)?;
                Some(&self.stats[i])
            }
        }
    }
}

/// CSV with one row per recorded sweep. Floats print in shortest round-trip
/// form, so `read_traces_csv` recovers them bit-exactly.
pub fn write_traces_csv<W: Write>(traces: &[&Trace], w: &mut W) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::InvalidArgument("no traces to write".into()));
    }
    let names = &traces[0].names;
    for t in traces {
        if &t.names != names {
            return Err(Error::InvalidArgument(
                "traces carry different observable sets".into(),
            ));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "schema,coulomb-trace-v1");
    let _ = write!(s, "chain,sweep,energy");
    for n in names {
        let _ = write!(s, ",{n}");
    }
    let _ = writeln!(s, ",acceptance");
    for t in traces {
        for row in 0..t.len() {
            let _ = write!(s, "{},{},{}", t.chain_id, t.sweeps[row], t.energy[row]);
            for col in &t.stats {
                let _ = write!(s, ",{}", col[row]);
            }
            let _ = writeln!(s, ",{}", t.acceptance[row]);
        }
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Parse a trace CSV back into per-chain traces, ordered by chain id.
pub fn read_traces_csv<R: BufRead>(r: &mut R) -> Result<Vec<Trace>> {
    let mut lines = r.lines();
    let schema = lines
        .next()
        .ok_or_else(|| Error::Config("empty trace file".into()))?
        .map_err(Error::Io)?;
    if schema.trim() != "schema,coulomb-trace-v1" {
        return Err(Error::Config(format!(
            "unrecognized trace schema '{}'",
            schema.trim()
        )));
    }
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("trace file missing header".into()))?
        .map_err(Error::Io)?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 4 || cols[0] != "chain" || cols[1] != "sweep" || cols[2] != "energy" {
        return Err(Error::Config("malformed trace header".into()));
    }
    if cols[cols.len() - 1] != "acceptance" {
        return Err(Error::Config("malformed trace header".into()));
    }
    let names: Vec<String> = cols[3..cols.len() - 1].iter().map(|s| s.to_string()).collect();
    let mut traces: Vec<Trace> = Vec::new();
    for line in lines {
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Config(format!(
                "trace row has {} fields, expected {}",
                fields.len(),
                cols.len()
            )));
        }
        let bad = |what: &str| Error::Config(format!("trace: bad {what}"));
        let chain: u64 = fields[0].parse().map_err(|_| bad("chain id"))?;
        let sweep: u64 = fields[1].parse().map_err(|_| bad("sweep"))?;
        let energy: f64 = fields[2].parse().map_err(|_| bad("energy"))?;
        let acc: f64 = fields[fields.len() - 1]
            .parse()
            .map_err(|_| bad("acceptance"))?;
        let t = match traces.iter_mut().find(|t| t.chain_id == chain) {
            Some(t) => t,
            None => {
                traces.push(Trace::with_names(chain, names.clone(), 0));
                traces.last_mut().unwrap()
            }
        };
        t.sweeps.push(sweep);
        t.energy.push(energy);
        for (col, f) in t.stats.iter_mut().zip(&fields[3..fields.len() - 1]) {
            col.push(f.parse().map_err(|_| bad("statistic"))?);
        }
        t.acceptance.push(acc);
    }
    traces.sort_by_key(|t| t.chain_id);
    Ok(traces)
}

/// Per-chain summary computed at the end of a run.
#[derive(Debug, Clone)]
pub struct ChainDiagnostics {
    /// Acceptance rate after the burn-in.
    pub acceptance: f64,
    /// Frozen proposal scale.
    pub sigma: f64,
    pub sweeps: u64,
    pub energy_ess: Ess,
    /// Parallel to the trace's observable names.
    pub stat_ess: Vec<Ess>,
}

/// A finished (or checkpointable) run: the chain, its trace, diagnostics.
pub struct ChainRun {
    pub chain: ChainState,
    pub trace: Trace,
    pub diagnostics: ChainDiagnostics,
}

/// Drive a chain with Metropolis sweeps: tune σ during burn-in, then record
/// the named statistics every `thin` sweeps. Deterministic given the chain's
/// (seed, id); rerunning yields a bit-identical trace.
pub fn run_chain(
    mut chain: ChainState,
    params: &RunParams,
    observables: &[TestFunction],
) -> Result<ChainRun> {
    params.validate()?;
    for phi in observables {
        if phi.domain() != chain.system.domain() {
            return Err(Error::InvalidArgument(format!(
                "observable {} lives on the wrong domain",
                phi.name()
            )));
        }
    }
    let names: Vec<String> = observables.iter().map(|o| o.name()).collect();
    let capacity = ((params.sweeps - params.burn_in) / params.thin) as usize;
    let mut trace = Trace::with_names(chain.chain_id, names, capacity);
    if params.burn_in == 0 && chain.is_tuning() {
        chain.finish_burn_in();
    }
    while chain.sweep() < params.sweeps {
        chain.metropolis_sweep()?;
        let s = chain.sweep();
        if s == params.burn_in {
            chain.finish_burn_in();
        }
        if s % REFRESH_EVERY == 0 {
            chain.refresh()?;
        }
        if s > params.burn_in && (s - params.burn_in) % params.thin == 0 {
            trace.sweeps.push(s);
            trace.energy.push(chain.energy());
            for (col, phi) in trace.stats.iter_mut().zip(observables) {
                col.push(linear_statistic(chain.configuration(), phi)?);
            }
            trace.acceptance.push(chain.acceptance());
        }
    }
    let diagnostics = ChainDiagnostics {
        acceptance: chain.acceptance(),
        sigma: chain.sigma(),
        sweeps: chain.sweep(),
        energy_ess: stats::effective_sample_size(&trace.energy),
        stat_ess: trace
            .stats
            .iter()
            .map(|col| stats::effective_sample_size(col))
            .collect(),
    };
    Ok(ChainRun {
        chain,
        trace,
        diagnostics,
    })
}

/// Split convergence statistic across chains for one trace column.
pub fn cross_chain_rhat(traces: &[Trace], column: &str) -> Result<f64> {
    let mut series = Vec::with_capacity(traces.len());
    for t in traces {
        let s = t.series(column).ok_or_else(|| {
            Error::InvalidArgument(format!("no trace column named '{column}'"))
        })?;
        series.push(s.to_vec());
    }
    stats::split_rhat(&series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::TorusKernel;
    use crate::system::ConfiningPotential;
    use std::sync::{Arc, OnceLock};

    fn test_kernel() -> Arc<TorusKernel> {
        static KERNEL: OnceLock<Arc<TorusKernel>> = OnceLock::new();
        KERNEL
            .get_or_init(|| Arc::new(TorusKernel::tabulated(3, 48).unwrap()))
            .clone()
    }

    #[test]
    fn generators_are_keyed_by_seed_and_chain() {
        let mut a = chain_rng(7, 0);
        let mut b = chain_rng(7, 0);
        let mut c = chain_rng(7, 1);
        let mut d = chain_rng(8, 0);
        let (xa, xb, xc, xd): (f64, f64, f64, f64) =
            (a.random(), b.random(), c.random(), d.random());
        assert_eq!(xa.to_bits(), xb.to_bits());
        assert_ne!(xa.to_bits(), xc.to_bits());
        assert_ne!(xa.to_bits(), xd.to_bits());
        // init stream is distinct from the chain stream of every id used here
        let mut e = init_rng(7, 0);
        let xe: f64 = e.random();
        assert_ne!(xa.to_bits(), xe.to_bits());
    }

    #[test]
    fn lattice_init_fills_the_cell_evenly() {
        let mut rng = init_rng(1, 0);
        let pts = lattice_init(27, 0.2, &mut rng);
        assert_eq!(pts.len(), 27);
        for p in &pts {
            for c in p {
                assert!((0.0..1.0).contains(c), "coordinate {c} escaped the cell");
            }
        }
        // distinct sites: minimal spacing stays a decent fraction of 1/3
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d2 = crate::geom::torus_dist2(pts[i], pts[j]);
                assert!(d2.sqrt() > 0.1, "lattice sites {i},{j} nearly collided");
            }
        }
    }

    #[test]
    fn ball_init_respects_the_radius() {
        let mut rng = init_rng(2, 5);
        let r = 0.43;
        let pts = ball_init(64, r, &mut rng);
        assert_eq!(pts.len(), 64);
        for p in &pts {
            assert!(crate::geom::norm(*p) <= r + 1e-15);
        }
    }

    #[test]
    fn negative_or_nonfinite_beta_is_rejected() {
        let sys = System::torus(test_kernel());
        let cfg = Configuration::new(Domain::Torus, vec![[0.1, 0.2, 0.3]]).unwrap();
        assert!(ChainState::new(sys.clone(), cfg.clone(), -1.0, 0, 0).is_err());
        assert!(ChainState::new(sys.clone(), cfg.clone(), f64::NAN, 0, 0).is_err());
        assert!(ChainState::new(sys, cfg, 0.0, 0, 0).is_ok());
    }

    #[test]
    fn tuner_raises_sigma_when_everything_is_accepted() {
        // N = 1: no interactions, every proposal lands; the tuner should walk
        // σ up toward the clamp during burn-in and then freeze.
        let sys = System::torus(test_kernel());
        let cfg = Configuration::new(Domain::Torus, vec![[0.5, 0.5, 0.5]]).unwrap();
        let mut chain = ChainState::new(sys, cfg, 1.0, 3, 0).unwrap();
        let s0 = chain.sigma();
        for _ in 0..400 {
            chain.metropolis_sweep().unwrap();
        }
        assert!(chain.sigma() > s0, "tuner never moved σ");
        chain.finish_burn_in();
        let frozen = chain.sigma();
        for _ in 0..200 {
            chain.metropolis_sweep().unwrap();
        }
        assert_eq!(chain.sigma(), frozen, "σ moved after the burn-in ended");
    }

    #[test]
    fn run_params_are_validated() {
        assert!(RunParams {
            sweeps: 10,
            burn_in: 20,
            thin: 1
        }
        .validate()
        .is_err());
        assert!(RunParams {
            sweeps: 10,
            burn_in: 0,
            thin: 0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn trace_csv_roundtrip_is_bit_exact() {
        let sys = System::euclidean(ConfiningPotential::quadratic()).unwrap();
        let mut rng = init_rng(11, 2);
        let pts = ball_init(8, 0.4, &mut rng);
        let cfg = Configuration::new(Domain::Euclidean, pts).unwrap();
        let chain = ChainState::new(sys, cfg, 1.0, 11, 2).unwrap();
        let run = run_chain(
            chain,
            &RunParams {
                sweeps: 120,
                burn_in: 40,
                thin: 4,
            },
            &[TestFunction::bump(0.3).unwrap()],
        )
        .unwrap();
        assert_eq!(run.trace.len(), 20);
        let mut buf = Vec::new();
        write_traces_csv(&[&run.trace], &mut buf).unwrap();
        let back = read_traces_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        let t = &back[0];
        assert_eq!(t.chain_id, 2);
        assert_eq!(t.names, run.trace.names);
        assert_eq!(t.sweeps, run.trace.sweeps);
        for (a, b) in t.energy.iter().zip(&run.trace.energy) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (ca, cb) in t.stats.iter().zip(&run.trace.stats) {
            for (a, b) in ca.iter().zip(cb) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn trace_length_matches_the_thinning_formula() {
        let sys = System::torus(test_kernel());
        let mut rng = init_rng(4, 0);
        let cfg = Configuration::new(Domain::Torus, lattice_init(8, 0.2, &mut rng)).unwrap();
        let chain = ChainState::new(sys, cfg, 1.0, 4, 0).unwrap();
        let run = run_chain(
            chain,
            &RunParams {
                sweeps: 103,
                burn_in: 10,
                thin: 7,
            },
            &[],
        )
        .unwrap();
        assert_eq!(run.trace.len(), ((103 - 10) / 7) as usize);
        assert_eq!(run.trace.sweeps.first().copied(), Some(17));
        assert_eq!(run.trace.sweeps.last().copied(), Some(10 + 13 * 7));
    }
}
