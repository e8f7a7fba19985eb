//! Config-driven experiment drivers.
//!
//! A declarative TOML spec selects one of five experiment kinds:
//!
//! * `kernel-check`: PDE and identity battery for the periodic kernel.
//! * `sample`: MCMC runs with trace output; at small N (≤ 16) the full
//!   inequality audit runs on the retained samples.
//! * `ground-state`: two-sided energy brackets per system size.
//! * `sweep`: the fluctuation-scaling study with a matched Poisson baseline.
//! * `analyze`: re-derive the scaling fit from an existing report table.
//!
//! Every emitted number is a pure function of (config, seed, platform):
//! chains get independent generator streams keyed by task id, tasks are
//! merged in sorted order, and floats are printed with the shortest
//! round-trip formatting, so rerunning a spec reproduces output files byte
//! for byte regardless of the worker-pool width.

mod audit;
mod report;

pub use audit::{run_inequality_audit, AuditReport, AuditRow};
pub use report::{
    analyze_report, emit_report, read_report_rows, Analysis, PerSize, ReportRow, ScalingResult,
    SlopeFit,
};

use crate::equilibrium::{solve_quadratic_equilibrium, EquilibriumMeasure};
use crate::error::{Error, Result};
use crate::groundstate::{certify_lower_bound, confined_lower_bound, minimize_best_of,
    regularized_best_of, SmearingBound};
use crate::kernel::TorusKernel;
use crate::observables::{linear_statistic, TestFunction};
use crate::sampler::{
    ball_init, chain_rng, init_rng, lattice_init, run_chain, ChainRun, ChainState, RunParams,
    Trace,
};
use crate::stats;
use crate::system::{Configuration, Domain, System};
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;
use std::sync::Arc;

/// Schema tag a config file must carry in its first key.
pub const CONFIG_SCHEMA: &str = "coulomb-config-v1";

/// Spline-table resolution for the sampling hot loop. 48³ keeps the table in
/// L2; finer tables are more accurate per lookup but DRAM-bound and ~3×
/// slower, which dominates everything at sweep sizes.
const RUNTIME_TABLE_M: usize = 48;

/// Move budget for the minimizers joined into sweep reports. Enough for the
/// bracket to be honest at N ≤ 216; `ground-state` runs use the configured
/// budget instead.
const GS_BUDGET: u64 = 120_000;

/// Restart seeds for bracket joins. Fixed, so reports are reproducible.
const GS_SEEDS: [u64; 2] = [1, 2];

/// i.i.d. point sets per size for the Poisson baseline.
const BASELINE_SETS: usize = 10_000;

/// Generator stream offset for baseline sampling, disjoint from chain ids.
const BASELINE_STREAM: u64 = 1 << 61;

/// Convergence gate on the split statistic.
const RHAT_GATE: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    KernelCheck,
    Sample,
    GroundState,
    Sweep,
    Analyze,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::KernelCheck => "kernel-check",
            ExperimentKind::Sample => "sample",
            ExperimentKind::GroundState => "ground-state",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Analyze => "analyze",
        }
    }
}

/// β is either fixed or a power schedule b·N^exponent.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSchedule {
    pub b: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ExperimentKind,
    pub domain: String,
    pub d: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n: Vec<usize>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub beta_schedule: Option<BetaSchedule>,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub chains: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesSection {
    pub names: Vec<String>,
    pub grid_m: usize,
    /// Tail thresholds λ reported against the certified tail bound.
    #[serde(default = "default_lambda")]
    pub lambda: Vec<f64>,
}

fn default_lambda() -> Vec<f64> {
    vec![2.0, 3.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

/// A parsed experiment spec. Field meanings follow the config schema
/// documented in the README; `validate` enforces every invariant, so a spec
/// obtained through [`parse_spec`] is ready to run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema: String,
    pub model: ModelSection,
    pub run: RunSection,
    pub observables: ObservablesSection,
    pub output: OutputSection,
}

impl ExperimentSpec {
    pub fn domain(&self) -> Result<Domain> {
        match self.model.domain.as_str() {
            "torus" => Ok(Domain::Torus),
            "euclidean" => Ok(Domain::Euclidean),
            other => Err(Error::Config(format!(
                "unknown domain '{other}' (expected torus or euclidean)"
            ))),
        }
    }

    /// Inverse temperature used for a run at size n.
    pub fn beta_for(&self, n: usize) -> f64 {
        match (self.run.beta, self.run.beta_schedule) {
            (Some(b), _) => b,
            (None, Some(s)) => s.b * (n as f64).powf(s.exponent),
            (None, None) => unreachable!("validation requires one β form"),
        }
    }

    /// Parsed test functions, first one primary.
    pub fn test_functions(&self) -> Result<Vec<TestFunction>> {
        self.observables
            .names
            .iter()
            .map(|s| TestFunction::by_name(s))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "schema '{}' not supported (expected {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        if self.model.d != 3 {
            return Err(Error::Config(format!(
                "d = {} not supported (only d = 3)",
                self.model.d
            )));
        }
        let domain = self.domain()?;
        if self.model.kind == ExperimentKind::KernelCheck && domain != Domain::Torus {
            return Err(Error::Config(
                "kernel-check audits the periodic kernel; domain must be torus".into(),
            ));
        }
        if self.run.n.is_empty() {
            return Err(Error::Config("empty size list".into()));
        }
        if !self.run.n.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "size list must be strictly ascending".into(),
            ));
        }
        let min_n = if domain == Domain::Euclidean { 2 } else { 1 };
        if self.run.n[0] < min_n {
            return Err(Error::Config(format!(
                "sizes must be ≥ {min_n} on this domain"
            )));
        }
        if self.run.sweeps == 0 || self.run.thin == 0 || self.run.chains == 0 {
            return Err(Error::Config(
                "sweeps, thin and chains must be positive".into(),
            ));
        }
        if self.run.burn_in >= self.run.sweeps {
            return Err(Error::Config(format!(
                "burn-in {} leaves no samples out of {} sweeps",
                self.run.burn_in, self.run.sweeps
            )));
        }
        match (self.run.beta, self.run.beta_schedule) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either beta or beta_schedule, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("missing beta (or beta_schedule)".into()))
            }
            _ => {}
        }
        for &n in &self.run.n {
            let beta = self.beta_for(n);
            if !beta.is_finite() || beta < 0.0 {
                return Err(Error::Config(format!("β({n}) = {beta} is not usable")));
            }
            // the confined moment bounds need β ≥ 1/(N−1)
            if domain == Domain::Euclidean {
                let floor = 1.0 / (n as f64 - 1.0);
                if beta < floor - 1e-12 {
                    return Err(Error::Config(format!(
                        "β({n}) = {beta} below the confined floor 1/(N−1) = {floor}"
                    )));
                }
            }
        }
        if self.observables.names.is_empty() {
            return Err(Error::Config("no test functions listed".into()));
        }
        for phi in self.test_functions()? {
            if phi.domain() != domain {
                return Err(Error::Config(format!(
                    "test function {} lives on the wrong domain",
                    phi.name()
                )));
            }
        }
        if self.observables.grid_m < 16 {
            return Err(Error::Config(format!(
                "grid_m = {} too coarse (need ≥ 16)",
                self.observables.grid_m
            )));
        }
        if self.observables.lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config("tail thresholds must be positive".into()));
        }
        if self.output.dir.is_empty() {
            return Err(Error::Config("empty output directory".into()));
        }
        Ok(())
    }
}

/// Parse and validate a TOML spec.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

/// Load a spec from a file, with optional seed and output-dir overrides.
pub fn load_spec(path: &str, seed: Option<u64>, out: Option<&str>) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {path}: {e}")))?;
    let mut spec = parse_spec(&text)?;
    if let Some(s) = seed {
        spec.run.seed = s;
    }
    if let Some(dir) = out {
        spec.output.dir = dir.to_string();
        spec.validate()?;
    }
    Ok(spec)
}

/// Shared model state: the kernel table is built once and shared by every
/// task; confined runs carry the equilibrium measure instead.
pub struct ModelContext {
    pub domain: Domain,
    pub kernel: Option<Arc<TorusKernel>>,
    pub equilibrium: Option<EquilibriumMeasure>,
}

impl ModelContext {
    pub fn build(spec: &ExperimentSpec) -> Result<ModelContext> {
        let domain = spec.domain()?;
        match domain {
            Domain::Torus => Ok(ModelContext {
                domain,
                kernel: Some(Arc::new(TorusKernel::tabulated(3, RUNTIME_TABLE_M)?)),
                equilibrium: None,
            }),
            Domain::Euclidean => Ok(ModelContext {
                domain,
                kernel: None,
                equilibrium: Some(solve_quadratic_equilibrium(3)?),
            }),
        }
    }

    pub fn system(&self) -> Result<System> {
        match self.domain {
            Domain::Torus => Ok(System::torus(Arc::clone(
                self.kernel.as_ref().expect("torus context"),
            ))),
            Domain::Euclidean => System::euclidean(
                self.equilibrium.as_ref().expect("confined context").potential(),
            ),
        }
    }

    /// Initial positions for chain `chain_id` at size n.
    fn initial_positions(&self, n: usize, seed: u64, chain_id: u64) -> Vec<crate::geom::Point3> {
        let mut rng = init_rng(seed, chain_id);
        match self.domain {
            Domain::Torus => lattice_init(n, 0.35, &mut rng),
            Domain::Euclidean => {
                let eq = self.equilibrium.as_ref().expect("confined context");
                ball_init(n, eq.radius(), &mut rng)
            }
        }
    }
}

/// All chains of one size, merged in chain order, with the convergence gate.
pub struct SizeRun {
    pub n: usize,
    pub beta: f64,
    pub runs: Vec<ChainRun>,
    /// Split statistic over the primary observable, max over energy too.
    pub rhat: f64,
}

impl SizeRun {
    pub fn traces(&self) -> Vec<&Trace> {
        self.runs.iter().map(|r| &r.trace).collect()
    }

    /// Post-burn-in series of the named column pooled across chains.
    pub fn pooled(&self, column: &str) -> Vec<f64> {
        let mut out = Vec::new();
        for r in &self.runs {
            if let Some(s) = r.trace.series(column) {
                out.extend_from_slice(s);
            }
        }
        out
    }

    /// Effective sample size of the column summed over chains.
    pub fn total_ess(&self, column: &str) -> f64 {
        self.runs
            .iter()
            .filter_map(|r| r.trace.series(column))
            .map(|s| stats::effective_sample_size(s).ess)
            .sum()
    }
}

/// Split statistic for a set of chains; a single chain is split into its
/// halves, which is the standard within-chain fallback.
fn size_rhat(series: Vec<Vec<f64>>) -> Result<f64> {
    if series.len() >= 2 {
        return stats::split_rhat(&series);
    }
    let one = &series[0];
    let half = one.len() / 2;
    if half < 2 {
        return Err(Error::InvalidArgument(
            "trace too short for the split statistic".into(),
        ));
    }
    stats::split_rhat(&[one[..half].to_vec(), one[half..2 * half].to_vec()])
}

/// Run every (size, chain) task on the worker pool and merge
/// deterministically: task ids are (size index, chain index), results are
/// sorted on them before any reduction, so the pool width never changes a
/// byte of output.
pub fn run_all_chains(spec: &ExperimentSpec, ctx: &ModelContext) -> Result<Vec<SizeRun>> {
    let phis = spec.test_functions()?;
    let params = RunParams {
        sweeps: spec.run.sweeps,
        burn_in: spec.run.burn_in,
        thin: spec.run.thin,
    };
    let chains = spec.run.chains;
    let tasks: Vec<(usize, u64)> = (0..spec.run.n.len())
        .flat_map(|i| (0..chains).map(move |c| (i, c)))
        .collect();
    let mut finished: Vec<((usize, u64), ChainRun)> = tasks
        .par_iter()
        .map(|&(i, c)| {
            let n = spec.run.n[i];
            let chain_id = i as u64 * chains + c;
            let positions = ctx.initial_positions(n, spec.run.seed, chain_id);
            let cfg = Configuration::new(ctx.domain, positions)?;
            let chain = ChainState::new(
                ctx.system()?,
                cfg,
                spec.beta_for(n),
                spec.run.seed,
                chain_id,
            )?;
            Ok(((i, c), run_chain(chain, &params, &phis)?))
        })
        .collect::<Result<_>>()?;
    finished.sort_by_key(|&(id, _)| id);

    let primary = phis[0].name();
    let mut sizes = Vec::with_capacity(spec.run.n.len());
    let mut iter = finished.into_iter();
    for (i, &n) in spec.run.n.iter().enumerate() {
        let mut runs = Vec::with_capacity(chains as usize);
        for _ in 0..chains {
            let ((gi, _), run) = iter.next().expect("one result per task");
            debug_assert_eq!(gi, i);
            runs.push(run);
        }
        let stat_series: Vec<Vec<f64>> = runs
            .iter()
            .filter_map(|r| r.trace.series(&primary).map(|s| s.to_vec()))
            .collect();
        let energy_series: Vec<Vec<f64>> = runs.iter().map(|r| r.trace.energy.clone()).collect();
        let rhat = size_rhat(stat_series)?.max(size_rhat(energy_series)?);
        sizes.push(SizeRun {
            n,
            beta: spec.beta_for(n),
            runs,
            rhat,
        });
    }
    Ok(sizes)
}

/// Poisson baseline for one size: the identical estimator evaluated on
/// BASELINE_SETS i.i.d. point sets (uniform on the torus, μ_V-distributed in
/// the confined gas). Returns the per-set statistics.
pub fn baseline_statistics(
    spec: &ExperimentSpec,
    ctx: &ModelContext,
    size_index: usize,
    phi: &TestFunction,
) -> Result<Vec<f64>> {
    let n = spec.run.n[size_index];
    let mut rng = chain_rng(spec.run.seed, BASELINE_STREAM + size_index as u64);
    let mut values = Vec::with_capacity(BASELINE_SETS);
    for _ in 0..BASELINE_SETS {
        let positions: Vec<crate::geom::Point3> = match ctx.domain {
            Domain::Torus => (0..n)
                .map(|_| {
                    [
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.0..1.0),
                    ]
                })
                .collect(),
            Domain::Euclidean => {
                let eq = ctx.equilibrium.as_ref().expect("confined context");
                (0..n).map(|_| eq.sample(&mut rng)).collect()
            }
        };
        let cfg = Configuration::new(ctx.domain, positions)?;
        values.push(linear_statistic(&cfg, phi)?);
    }
    Ok(values)
}

/// Energy bracket joined into reports: certified lower bound and the best
/// minimizer found under the fixed join budget.
fn bracket_for(ctx: &ModelContext, n: usize) -> Result<(SmearingBound, f64, bool)> {
    match ctx.domain {
        Domain::Torus => {
            let kernel = ctx.kernel.as_ref().expect("torus context");
            let lower = certify_lower_bound(kernel, n)?;
            let upper = minimize_best_of(&ctx.system()?, n, GS_BUDGET, &GS_SEEDS)?;
            Ok((lower, upper.energy, upper.converged))
        }
        Domain::Euclidean => {
            let eq = ctx.equilibrium.as_ref().expect("confined context");
            let lower = confined_lower_bound(eq, n)?;
            let upper = regularized_best_of(eq, n, GS_BUDGET, &GS_SEEDS)?;
            Ok((lower, upper.energy, upper.converged))
        }
    }
}

/// Sample std with its effective-sample-size-adjusted standard error.
///
/// The error of a sample std from m effectively independent draws is
/// std/√(2m) to first order, so serial correlation widens the bar through
/// the ESS rather than the raw length.
fn std_with_error(pooled: &[f64], ess: f64) -> (f64, f64, f64) {
    let mean = stats::mean(pooled);
    let std = stats::variance(pooled).sqrt();
    let stderr = std / (2.0 * ess.max(2.0)).sqrt();
    (mean, std, stderr)
}

fn fit_loglog(ns: &[f64], stds: &[f64], errs: &[f64]) -> Result<SlopeFit> {
    if ns.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "refusing a scaling fit through {} points (need 4)",
            ns.len()
        )));
    }
    let x: Vec<f64> = ns.iter().map(|&n| n.ln()).collect();
    let y: Vec<f64> = stds.iter().map(|&s| s.ln()).collect();
    // delta method: σ_{ln s} = σ_s / s
    let w: Vec<f64> = stds
        .iter()
        .zip(errs)
        .map(|(&s, &e)| (s / e).powi(2))
        .collect();
    let fit = stats::weighted_line_fit(&x, &y, &w)?;
    Ok(SlopeFit {
        slope: fit.slope,
        intercept: fit.intercept,
        stderr: fit.slope_se,
        ci_lo: fit.slope - 1.96 * fit.slope_se,
        ci_hi: fit.slope + 1.96 * fit.slope_se,
    })
}

/// The headline study: chains at every size, centered statistics, weighted
/// log-log fit, matched Poisson baseline, and the energy-bracket join.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<ScalingResult> {
    let ctx = ModelContext::build(spec)?;
    let phis = spec.test_functions()?;
    let primary = &phis[0];
    let sizes = run_all_chains(spec, &ctx)?;

    let mut rows = Vec::with_capacity(sizes.len());
    let mut unconverged = false;
    for (i, size) in sizes.iter().enumerate() {
        let column = primary.name();
        let pooled = size.pooled(&column);
        if pooled.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "size {} retained only {} samples",
                size.n,
                pooled.len()
            )));
        }
        let ess = size.total_ess(&column);
        let (mean, std, stderr) = std_with_error(&pooled, ess);
        let base_values = baseline_statistics(spec, &ctx, i, primary)?;
        let base_ess = stats::effective_sample_size(&base_values).ess;
        let (_, base_std, base_stderr) = std_with_error(&base_values, base_ess);
        if size.rhat > RHAT_GATE {
            unconverged = true;
        }
        let (lower, h_opt, h_opt_converged) = bracket_for(&ctx, size.n)?;
        rows.push(PerSize {
            n: size.n,
            beta: size.beta,
            mean,
            std,
            stderr,
            ess,
            rhat: size.rhat,
            baseline_std: base_std,
            baseline_stderr: base_stderr,
            bound: lower.bound,
            h_opt,
            h_opt_converged,
        });
    }

    let (fit, baseline_fit) = if rows.len() >= 4 {
        let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let stds: Vec<f64> = rows.iter().map(|r| r.std).collect();
        let errs: Vec<f64> = rows.iter().map(|r| r.stderr).collect();
        let bstds: Vec<f64> = rows.iter().map(|r| r.baseline_std).collect();
        let berrs: Vec<f64> = rows.iter().map(|r| r.baseline_stderr).collect();
        (
            Some(fit_loglog(&ns, &stds, &errs)?),
            Some(fit_loglog(&ns, &bstds, &berrs)?),
        )
    } else {
        (None, None)
    };

    Ok(ScalingResult {
        observable: primary.name(),
        domain: ctx.domain,
        rows,
        fit,
        baseline_fit,
        unconverged,
    })
}

/// How a finished run should be reported to the shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Unconverged,
    Violation,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Unconverged => 2,
            Outcome::Violation => 3,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Unconverged => "UNCONVERGED",
            Outcome::Violation => "VIOLATION",
        }
    }
}

/// Run the spec's experiment kind end to end, writing its files into the
/// output directory, and say how it went.
pub fn execute(spec: &ExperimentSpec) -> Result<Outcome> {
    std::fs::create_dir_all(&spec.output.dir)?;
    match spec.model.kind {
        ExperimentKind::KernelCheck => report::run_kernel_check(spec),
        ExperimentKind::GroundState => report::run_ground_state(spec),
        ExperimentKind::Sweep => {
            let result = run_sweep(spec)?;
            emit_report(&result, spec)?;
            Ok(if result.unconverged {
                Outcome::Unconverged
            } else {
                Outcome::Pass
            })
        }
        ExperimentKind::Sample => run_sample(spec),
        ExperimentKind::Analyze => analyze_report(spec).map(|a| a.outcome),
    }
}

/// The `sample` kind: chains with persisted traces; at small N the retained
/// samples additionally pass through the full inequality audit.
fn run_sample(spec: &ExperimentSpec) -> Result<Outcome> {
    let ctx = ModelContext::build(spec)?;
    let sizes = run_all_chains(spec, &ctx)?;
    let mut unconverged = false;
    for size in &sizes {
        let path = format!("{}/traces-n{}.csv", spec.output.dir, size.n);
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        crate::sampler::write_traces_csv(&size.traces(), &mut file)?;
        if size.rhat > RHAT_GATE {
            unconverged = true;
        }
    }
    let auditable = spec.run.n.iter().all(|&n| n <= 16);
    let audit = if auditable {
        Some(audit::audit_with_context(spec, &ctx)?)
    } else {
        None
    };
    report::write_sample_summary(spec, &sizes, audit.as_ref(), unconverged)?;
    if let Some(a) = &audit {
        if !a.passed() {
            return Ok(Outcome::Violation);
        }
    }
    Ok(if unconverged {
        Outcome::Unconverged
    } else {
        Outcome::Pass
    })
}

/// Run `f` on a dedicated pool of the requested width. Output bytes never
/// depend on the width; this only bounds parallelism.
pub fn with_thread_limit<T, F: FnOnce() -> T + Send>(threads: Option<usize>, f: F) -> Result<T>
where
    T: Send,
{
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_toml() -> String {
        r#"
schema = "coulomb-config-v1"

[model]
kind = "sample"
domain = "torus"
d = 3

[run]
n = [8, 16]
beta = 2.0
sweeps = 400
burn_in = 100
thin = 5
chains = 2
seed = 7

[observables]
names = ["cos_1_0_0"]
grid_m = 32

[output]
dir = "out"
"#
        .to_string()
    }

    #[test]
    fn a_full_spec_parses_and_fills_defaults() {
        let spec = parse_spec(&base_toml()).unwrap();
        assert_eq!(spec.model.kind, ExperimentKind::Sample);
        assert_eq!(spec.domain().unwrap(), Domain::Torus);
        assert_eq!(spec.run.n, vec![8, 16]);
        assert_eq!(spec.beta_for(8), 2.0);
        // tail thresholds default
        assert_eq!(spec.observables.lambda, vec![2.0, 3.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = base_toml().replace("seed = 7", "seed = 7\ntypo_knob = 1");
        let err = parse_spec(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn schema_tag_is_enforced() {
        let text = base_toml().replace("coulomb-config-v1", "coulomb-config-v0");
        assert!(matches!(parse_spec(&text), Err(Error::Config(_))));
    }

    #[test]
    fn beta_and_schedule_are_mutually_exclusive() {
        let text = base_toml().replace(
            "beta = 2.0",
            "beta = 2.0\nbeta_schedule = { b = 1.0, exponent = -0.5 }",
        );
        assert!(matches!(parse_spec(&text), Err(Error::Config(_))));
        let text = base_toml().replace("beta = 2.0\n", "");
        assert!(matches!(parse_spec(&text), Err(Error::Config(_))));
    }

    #[test]
    fn beta_schedule_is_a_power_law_in_n() {
        let text = base_toml().replace(
            "beta = 2.0",
            "beta_schedule = { b = 3.0, exponent = -0.5 }",
        );
        let spec = parse_spec(&text).unwrap();
        assert!((spec.beta_for(16) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn confined_runs_enforce_the_beta_floor() {
        let text = base_toml()
            .replace("domain = \"torus\"", "domain = \"euclidean\"")
            .replace("names = [\"cos_1_0_0\"]", "names = [\"bump_0.25\"]")
            .replace("beta = 2.0", "beta = 0.01");
        let err = parse_spec(&text).unwrap_err();
        assert!(err.to_string().contains("floor"), "{err}");
    }

    #[test]
    fn test_functions_must_match_the_domain() {
        let text = base_toml().replace("cos_1_0_0", "bump_0.25");
        let err = parse_spec(&text).unwrap_err();
        assert!(err.to_string().contains("domain"), "{err}");
    }

    #[test]
    fn size_lists_must_ascend_and_meet_the_domain_floor() {
        let text = base_toml().replace("n = [8, 16]", "n = [16, 8]");
        assert!(parse_spec(&text).is_err());
        let text = base_toml()
            .replace("domain = \"torus\"", "domain = \"euclidean\"")
            .replace("names = [\"cos_1_0_0\"]", "names = [\"bump_0.25\"]")
            .replace("n = [8, 16]", "n = [1, 8]");
        assert!(parse_spec(&text).is_err());
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let text = base_toml().replace("grid_m = 32", "grid_m = 8");
        assert!(parse_spec(&text).is_err());
    }

    #[test]
    fn kernel_check_requires_the_torus() {
        let text = base_toml()
            .replace("kind = \"sample\"", "kind = \"kernel-check\"")
            .replace("domain = \"torus\"", "domain = \"euclidean\"")
            .replace("names = [\"cos_1_0_0\"]", "names = [\"bump_0.25\"]")
            .replace("n = [8, 16]", "n = [8, 27]");
        assert!(parse_spec(&text).is_err());
    }

    #[test]
    fn loglog_fit_recovers_an_exact_power_law() {
        let ns = [27.0f64, 64.0, 125.0, 216.0];
        let stds: Vec<f64> = ns.iter().map(|&n| 2.0 * n.powf(0.4)).collect();
        let errs = vec![1e-3; 4];
        let fit = fit_loglog(&ns, &stds, &errs).unwrap();
        assert!((fit.slope - 0.4).abs() < 1e-10, "slope {}", fit.slope);
        assert!((fit.intercept - 2.0f64.ln()).abs() < 1e-10);
        assert!(fit.ci_lo < 0.4 && 0.4 < fit.ci_hi);
    }

    #[test]
    fn loglog_fit_needs_four_points() {
        let ns = [8.0, 27.0, 64.0];
        let stds = [1.0, 2.0, 3.0];
        let errs = [0.1, 0.1, 0.1];
        assert!(fit_loglog(&ns, &stds, &errs).is_err());
    }

    #[test]
    fn outcomes_map_to_shell_conventions() {
        assert_eq!(Outcome::Pass.exit_code(), 0);
        assert_eq!(Outcome::Unconverged.exit_code(), 2);
        assert_eq!(Outcome::Violation.exit_code(), 3);
        assert_eq!(Outcome::Violation.as_str(), "VIOLATION");
    }

    #[test]
    fn seed_and_outdir_overrides_apply() {
        let dir = std::env::temp_dir().join(format!("coulomb-spec-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("spec.toml");
        std::fs::write(&path, base_toml()).unwrap();
        let spec = load_spec(path.to_str().unwrap(), Some(99), Some("elsewhere")).unwrap();
        assert_eq!(spec.run.seed, 99);
        assert_eq!(spec.output.dir, "elsewhere");
        let spec = load_spec(path.to_str().unwrap(), None, None).unwrap();
        assert_eq!(spec.run.seed, 7);
        assert_eq!(spec.output.dir, "out");
        std::fs::remove_dir_all(&dir).ok();
    }
}
