//! Report emission and re-analysis: the pinned-schema CSV table, a
//! self-contained SVG log-log plot, and machine-readable summaries, plus the
//! kernel-check and ground-state drivers whose output is tabular.

use super::audit::AuditReport;
use super::{fit_loglog, ExperimentSpec, ModelContext, Outcome, SizeRun};
use crate::error::{Error, Result};
use crate::groundstate::{self, Certificate};
use crate::observables::duality_check;
use crate::sampler::{chain_rng, lattice_init};
use crate::system::{Configuration, Domain};
use rand::Rng;
use std::fmt::Write as _;
use std::fs;

pub const REPORT_SCHEMA: &str = "coulomb-report-v1";
pub const SUMMARY_SCHEMA: &str = "coulomb-summary-v1";
pub const CHECK_SCHEMA: &str = "coulomb-kernel-check-v1";

/// The pinned report header. `analyze` refuses anything else.
const REPORT_HEADER: &str =
    "N,mean,std,stderr,ESS,slope,slope_ci_lo,slope_ci_hi,baseline_slope,B(N),H_opt";

/// Scaling-slope gate for the headline experiment.
const SLOPE_GATE: f64 = 0.45;

/// One size of the scaling study.
#[derive(Debug, Clone, Copy)]
pub struct PerSize {
    pub n: usize,
    pub beta: f64,
    pub mean: f64,
    /// Std of the centered linear statistic over retained samples.
    pub std: f64,
    /// ESS-adjusted standard error of `std`.
    pub stderr: f64,
    pub ess: f64,
    pub rhat: f64,
    pub baseline_std: f64,
    pub baseline_stderr: f64,
    /// Certified lower bound on the (regularized) minimum energy.
    pub bound: f64,
    /// Best minimizer found under the join budget; an upper bracket.
    pub h_opt: f64,
    pub h_opt_converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Output of [`super::run_sweep`]: everything the report files need.
#[derive(Debug, Clone)]
pub struct ScalingResult {
    pub observable: String,
    pub domain: Domain,
    pub rows: Vec<PerSize>,
    /// None when fewer than 4 sizes were run; fits never extrapolate less.
    pub fit: Option<SlopeFit>,
    pub baseline_fit: Option<SlopeFit>,
    pub unconverged: bool,
}

impl ScalingResult {
    /// The headline gates: fitted slope at most the gate and the fit's upper
    /// confidence end strictly under the baseline's lower end.
    pub fn scaling_gates(&self) -> Option<(bool, bool)> {
        let (f, b) = (self.fit.as_ref()?, self.baseline_fit.as_ref()?);
        Some((f.slope <= SLOPE_GATE, f.ci_hi < b.ci_lo))
    }

    pub fn bracket_valid(&self) -> bool {
        self.rows.iter().all(|r| r.bound <= r.h_opt + 1e-12)
    }
}

fn write_atomically(path: &str, bytes: &[u8]) -> Result<()> {
    let tmp = format!("{path}.tmp");
    fs::write(&tmp, bytes).map_err(|e| {
        Error::Config(format!("cannot write {tmp}: {e}"))
    })?;
    fs::rename(&tmp, path).map_err(|e| Error::Config(format!("cannot move into {path}: {e}")))?;
    Ok(())
}

/// Write report.csv, report.svg and summary.txt for a finished sweep.
///
/// The CSV carries the fit columns on every row (constant down the table) so
/// a row is self-describing; absent fits are NaN. An empty result still
/// produces the schema'd header and a NO DATA summary.
pub fn emit_report(result: &ScalingResult, spec: &ExperimentSpec) -> Result<()> {
    fs::create_dir_all(&spec.output.dir)?;
    let dir = &spec.output.dir;

    let mut csv = String::new();
    let _ = writeln!(csv, "schema,{REPORT_SCHEMA}");
    let _ = writeln!(csv, "{REPORT_HEADER}");
    let nan = f64::NAN;
    for r in &result.rows {
        let (s, lo, hi) = result
            .fit
            .as_ref()
            .map_or((nan, nan, nan), |f| (f.slope, f.ci_lo, f.ci_hi));
        let bs = result.baseline_fit.as_ref().map_or(nan, |f| f.slope);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n, r.mean, r.std, r.stderr, r.ess, s, lo, hi, bs, r.bound, r.h_opt
        );
    }
    write_atomically(&format!("{dir}/report.csv"), csv.as_bytes())?;
    write_atomically(&format!("{dir}/report.svg"), render_svg(result).as_bytes())?;

    let mut s = String::new();
    let _ = writeln!(s, "schema={SUMMARY_SCHEMA}");
    let _ = writeln!(s, "kind=sweep");
    let _ = writeln!(s, "domain={}", result.domain.as_str());
    let _ = writeln!(s, "observable={}", result.observable);
    let sizes: Vec<String> = result.rows.iter().map(|r| r.n.to_string()).collect();
    let _ = writeln!(s, "sizes={}", sizes.join(","));
    let _ = writeln!(s, "unconverged={}", result.unconverged);
    for r in &result.rows {
        let _ = writeln!(
            s,
            "n{}.beta={} n{}.std={} n{}.stderr={} n{}.ess={} n{}.rhat={} n{}.baseline_std={} \
             n{}.bound={} n{}.h_opt={} n{}.h_opt_converged={}",
            r.n, r.beta, r.n, r.std, r.n, r.stderr, r.n, r.ess, r.n, r.rhat, r.n,
            r.baseline_std, r.n, r.bound, r.n, r.h_opt, r.n, r.h_opt_converged
        );
    }
    match &result.fit {
        Some(f) => {
            let _ = writeln!(s, "slope={}", f.slope);
            let _ = writeln!(s, "slope_ci_lo={}", f.ci_lo);
            let _ = writeln!(s, "slope_ci_hi={}", f.ci_hi);
        }
        None => {
            let _ = writeln!(s, "slope=NOT-FITTED");
        }
    }
    if let Some(b) = &result.baseline_fit {
        let _ = writeln!(s, "baseline_slope={}", b.slope);
        let _ = writeln!(s, "baseline_ci_lo={}", b.ci_lo);
        let _ = writeln!(s, "baseline_ci_hi={}", b.ci_hi);
    }
    match result.scaling_gates() {
        Some((le_gate, below)) => {
            let _ = writeln!(s, "check.slope_le_{SLOPE_GATE}={}", pass(le_gate));
            let _ = writeln!(s, "check.below_baseline={}", pass(below));
        }
        None => {
            let _ = writeln!(s, "check.slope_le_{SLOPE_GATE}=SKIPPED");
            let _ = writeln!(s, "check.below_baseline=SKIPPED");
        }
    }
    let _ = writeln!(s, "check.bracket={}", pass(result.bracket_valid()));
    let result_line = if result.rows.is_empty() {
        "NO DATA"
    } else if result.unconverged {
        "UNCONVERGED"
    } else {
        "PASS"
    };
    let _ = writeln!(s, "result={result_line}");
    write_atomically(&format!("{dir}/summary.txt"), s.as_bytes())
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// One parsed row of report.csv.
#[derive(Debug, Clone, Copy)]
pub struct ReportRow {
    pub n: f64,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub ess: f64,
    pub slope: f64,
    pub slope_ci_lo: f64,
    pub slope_ci_hi: f64,
    pub baseline_slope: f64,
    pub bound: f64,
    pub h_opt: f64,
}

/// Parse report.csv, checking schema and header.
pub fn read_report_rows(path: &str) -> Result<Vec<ReportRow>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read report {path}: {e}")))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l == format!("schema,{REPORT_SCHEMA}") => {}
        other => {
            return Err(Error::Config(format!(
                "report schema line missing or wrong: {other:?}"
            )))
        }
    }
    match lines.next() {
        Some(l) if l == REPORT_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "report header mismatch: {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Config(format!("report row {}: bad float '{t}'", i + 3)))
            })
            .collect::<Result<_>>()?;
        if f.len() != 11 {
            return Err(Error::Config(format!(
                "report row {}: expected 11 columns, found {}",
                i + 3,
                f.len()
            )));
        }
        rows.push(ReportRow {
            n: f[0],
            mean: f[1],
            std: f[2],
            stderr: f[3],
            ess: f[4],
            slope: f[5],
            slope_ci_lo: f[6],
            slope_ci_hi: f[7],
            baseline_slope: f[8],
            bound: f[9],
            h_opt: f[10],
        });
    }
    Ok(rows)
}

/// Result of re-deriving the fit from an emitted table.
pub struct Analysis {
    pub outcome: Outcome,
    pub recomputed: Option<SlopeFit>,
    pub recorded_slope: Option<f64>,
}

/// Re-parse `report.csv` in the spec's output directory, re-derive the
/// weighted fit from the (N, std, stderr) columns, and cross-check the
/// recorded slope column. A recorded slope that the table itself cannot
/// reproduce to 1e−12 is reported as a violation.
pub fn analyze_report(spec: &ExperimentSpec) -> Result<Analysis> {
    let dir = &spec.output.dir;
    let rows = read_report_rows(&format!("{dir}/report.csv"))?;
    let mut s = String::new();
    let _ = writeln!(s, "schema={SUMMARY_SCHEMA}");
    let _ = writeln!(s, "kind=analyze");
    let _ = writeln!(s, "rows={}", rows.len());

    let analysis = if rows.is_empty() {
        let _ = writeln!(s, "result=NO DATA");
        Analysis {
            outcome: Outcome::Pass,
            recomputed: None,
            recorded_slope: None,
        }
    } else if rows.len() < 4 {
        let _ = writeln!(s, "slope=NOT-FITTED");
        let _ = writeln!(s, "result=PASS");
        Analysis {
            outcome: Outcome::Pass,
            recomputed: None,
            recorded_slope: None,
        }
    } else {
        let ns: Vec<f64> = rows.iter().map(|r| r.n).collect();
        let stds: Vec<f64> = rows.iter().map(|r| r.std).collect();
        let errs: Vec<f64> = rows.iter().map(|r| r.stderr).collect();
        let fit = fit_loglog(&ns, &stds, &errs)?;
        let recorded = rows[0].slope;
        let _ = writeln!(s, "slope={}", fit.slope);
        let _ = writeln!(s, "recorded_slope={recorded}");
        let ok = if recorded.is_nan() {
            true
        } else {
            (fit.slope - recorded).abs() <= 1e-12 * fit.slope.abs().max(1.0)
        };
        let _ = writeln!(s, "check.round_trip={}", pass(ok));
        let _ = writeln!(s, "result={}", if ok { "PASS" } else { "VIOLATION" });
        Analysis {
            outcome: if ok { Outcome::Pass } else { Outcome::Violation },
            recomputed: Some(fit),
            recorded_slope: Some(recorded),
        }
    };
    write_atomically(&format!("{dir}/analyze-summary.txt"), s.as_bytes())?;
    Ok(analysis)
}

// ---------------------------------------------------------------------------
// SVG

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const ML: f64 = 70.0;
const MR: f64 = 24.0;
const MT: f64 = 40.0;
const MB: f64 = 56.0;

impl Frame {
    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        // SVG y grows downward
        H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)
    }
}

/// Log-log scatter of std vs N with error bars, both fits, and a reference
/// line of slope 1/3 through the first point.
fn render_svg(result: &ScalingResult) -> String {
    let mut out = String::with_capacity(8192);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{W}" height="{H}" fill="white" stroke="none"/>"#
    );
    let title = format!(
        "std of centered {} vs N ({})",
        result.observable,
        result.domain.as_str()
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        title
    );
    if result.rows.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="18" text-anchor="middle">NO DATA</text>"#,
            W / 2.0,
            H / 2.0
        );
        let _ = writeln!(out, "</svg>");
        return out;
    }

    let mut ys = Vec::new();
    for r in &result.rows {
        ys.push((r.std - r.stderr).max(r.std * 0.5).ln());
        ys.push((r.std + r.stderr).ln());
        ys.push((r.baseline_std - r.baseline_stderr).max(r.baseline_std * 0.5).ln());
        ys.push((r.baseline_std + r.baseline_stderr).ln());
    }
    let xs: Vec<f64> = result.rows.iter().map(|r| (r.n as f64).ln()).collect();
    let (xmin, xmax) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (ymin, ymax) = (
        ys.iter().cloned().fold(f64::INFINITY, f64::min),
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let xpad = 0.08 * (xmax - xmin).max(1e-9);
    let ypad = 0.12 * (ymax - ymin).max(1e-9);
    let f = Frame {
        x0: xmin - xpad,
        x1: xmax + xpad,
        y0: ymin - ypad,
        y1: ymax + ypad,
    };

    // axes
    let _ = writeln!(
        out,
        r#"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="black" stroke-width="1"/>"#,
        W - ML - MR,
        H - MT - MB
    );
    for r in &result.rows {
        let x = f.px((r.n as f64).ln());
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            H - MB,
            H - MB + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            H - MB + 20.0,
            r.n
        );
    }
    for k in 0..5 {
        let y = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let py = f.py(y);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{ML}" y2="{py:.2}" stroke="black"/>"#,
            ML - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{:.3}</text>"#,
            ML - 9.0,
            py + 4.0,
            y.exp()
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">N (log)</text>"#,
        ML + (W - ML - MR) / 2.0,
        H - 14.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">std (log)</text>"#,
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    );

    let line = |fit: &SlopeFit, color: &str, dash: &str, out: &mut String| {
        let (xa, xb) = (f.x0, f.x1);
        let (ya, yb) = (fit.intercept + fit.slope * xa, fit.intercept + fit.slope * xb);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            f.px(xa),
            f.py(ya),
            f.px(xb),
            f.py(yb)
        );
    };
    // reference slope 1/3 through the first point
    let x_first = (result.rows[0].n as f64).ln();
    let y_first = result.rows[0].std.ln();
    let reference = SlopeFit {
        slope: 1.0 / 3.0,
        intercept: y_first - x_first / 3.0,
        stderr: 0.0,
        ci_lo: 0.0,
        ci_hi: 0.0,
    };
    line(
        &reference,
        "#999999",
        r#" stroke-dasharray="2,4""#,
        &mut out,
    );
    if let Some(fit) = &result.fit {
        line(fit, "#1f6fb2", "", &mut out);
    }
    if let Some(fit) = &result.baseline_fit {
        line(fit, "#555555", r#" stroke-dasharray="6,3""#, &mut out);
    }

    for r in &result.rows {
        let x = f.px((r.n as f64).ln());
        for (std, err, color, square) in [
            (r.std, r.stderr, "#1f6fb2", false),
            (r.baseline_std, r.baseline_stderr, "#555555", true),
        ] {
            let ylo = f.py((std - err).max(std * 0.5).ln());
            let yhi = f.py((std + err).ln());
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{ylo:.2}" x2="{x:.2}" y2="{yhi:.2}" stroke="{color}" stroke-width="1"/>"#
            );
            let y = f.py(std.ln());
            if square {
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="{color}"/>"#,
                    x - 3.5,
                    y - 3.5
                );
            } else {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#
                );
            }
        }
    }

    let legend_y = MT + 16.0;
    let slope_text = result
        .fit
        .as_ref()
        .map_or("slope: not fitted".to_string(), |s| {
            format!("slope {:.4}", s.slope)
        });
    let base_text = result
        .baseline_fit
        .as_ref()
        .map_or("baseline: not fitted".to_string(), |s| {
            format!("Poisson baseline {:.4}", s.slope)
        });
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{legend_y}" font-family="sans-serif" font-size="12" fill="#1f6fb2">● {slope_text}</text>"##,
        ML + 10.0
    );
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="#555555">■ {base_text}</text>"##,
        ML + 10.0,
        legend_y + 16.0
    );
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="#999999">· · reference slope 1/3</text>"##,
        ML + 10.0,
        legend_y + 32.0
    );
    let _ = writeln!(out, "</svg>");
    out
}

// ---------------------------------------------------------------------------
// kernel-check

/// A named check row: worst observed statistic against its tolerance.
struct CheckRow {
    name: &'static str,
    statistic: f64,
    tolerance: f64,
}

impl CheckRow {
    fn ok(&self) -> bool {
        self.statistic <= self.tolerance
    }
}

/// Battery of identity checks for the periodic kernel: the discrete PDE
/// −Δg = δ₀ − 1 via finite differences away from the charge, Ewald-parameter
/// independence, vanishing grid mean, evenness, the certified lower bound,
/// and the duality inequality on random configurations.
pub fn run_kernel_check(spec: &ExperimentSpec) -> Result<Outcome> {
    let exact = crate::kernel::TorusKernel::new(3)?;
    let mut rng = chain_rng(spec.run.seed, 1 << 60);
    let mut rows = Vec::new();

    let random_point = |rng: &mut rand_chacha::ChaCha8Rng, min_dist: f64| loop {
        let x: crate::geom::Point3 = [
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        ];
        let r: f64 = x
            .iter()
            .map(|&c| {
                let d: f64 = c - c.round();
                d * d
            })
            .sum::<f64>()
            .sqrt();
        if r > min_dist {
            return x;
        }
    };

    // −Δg = δ₀ − 1: central differences at h = 1/64 see Δg = 1 off-charge
    let mut worst_fd: f64 = 0.0;
    for _ in 0..200 {
        let x = random_point(&mut rng, 0.2);
        let lap = exact.fd_laplacian(x, 1.0 / 64.0)?;
        worst_fd = worst_fd.max((lap - 1.0).abs());
    }
    rows.push(CheckRow {
        name: "fd_laplacian_equals_one",
        statistic: worst_fd,
        tolerance: 1e-3,
    });

    // the Ewald value must not depend on the splitting parameter
    let mut worst_alpha: f64 = 0.0;
    for _ in 0..25 {
        let x = random_point(&mut rng, 0.05);
        let g4 = exact.eval_ewald_at(x, 4.0)?;
        let g6 = exact.eval_ewald_at(x, 6.0)?;
        let g8 = exact.eval_ewald_at(x, 8.0)?;
        worst_alpha = worst_alpha.max((g4 - g6).abs().max((g6 - g8).abs()));
    }
    rows.push(CheckRow {
        name: "ewald_alpha_independent",
        statistic: worst_alpha,
        tolerance: 1e-10,
    });

    rows.push(CheckRow {
        name: "grid_mean_vanishes",
        statistic: exact.grid_mean(spec.observables.grid_m.max(48)).abs(),
        tolerance: 5e-3,
    });

    let mut worst_even: f64 = 0.0;
    for _ in 0..50 {
        let x = random_point(&mut rng, 0.02);
        let neg = [-x[0], -x[1], -x[2]];
        worst_even = worst_even.max((exact.eval(x)? - exact.eval(neg)?).abs());
    }
    rows.push(CheckRow {
        name: "kernel_is_even",
        statistic: worst_even,
        tolerance: 1e-12,
    });

    // certified minimum: g ≥ −m_pot everywhere
    let m_pot = exact.m_pot();
    let mut worst_floor: f64 = 0.0;
    for _ in 0..10_000 {
        let x = random_point(&mut rng, 0.0);
        worst_floor = worst_floor.max(-(exact.eval_unchecked(x) + m_pot));
    }
    rows.push(CheckRow {
        name: "lower_bound_holds",
        statistic: worst_floor,
        tolerance: 1e-12,
    });

    // duality |⟨φ,μ⟩| ≤ ‖Δφ‖∞‖Pμ‖₁ on random configurations
    let ctx = ModelContext::build(spec)?;
    let system = ctx.system()?;
    let phis = spec.test_functions()?;
    let mut duality_margin: f64 = 0.0;
    let mut duality_ok = true;
    for &n in spec.run.n.iter().take(2) {
        let positions = lattice_init(n, 1.0, &mut rng);
        let cfg = Configuration::new(Domain::Torus, positions)?;
        for phi in &phis {
            let d = duality_check(&system, &cfg, phi, spec.observables.grid_m)?;
            duality_ok &= d.ok;
            duality_margin = duality_margin.max(d.statistic_abs - (d.bound_fine + d.slack));
        }
    }
    rows.push(CheckRow {
        name: "duality_bound_holds",
        statistic: duality_margin,
        tolerance: 1e-12,
    });

    let dir = &spec.output.dir;
    let mut csv = String::new();
    let _ = writeln!(csv, "schema,{CHECK_SCHEMA}");
    let _ = writeln!(csv, "check,statistic,tolerance,pass");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.name, r.statistic, r.tolerance, r.ok());
    }
    write_atomically(&format!("{dir}/kernel-check.csv"), csv.as_bytes())?;

    let all_ok = rows.iter().all(|r| r.ok()) && duality_ok;
    let mut s = String::new();
    let _ = writeln!(s, "schema={SUMMARY_SCHEMA}");
    let _ = writeln!(s, "kind=kernel-check");
    for r in &rows {
        let _ = writeln!(s, "check.{}={}", r.name, pass(r.ok()));
    }
    let _ = writeln!(s, "result={}", if all_ok { "PASS" } else { "VIOLATION" });
    write_atomically(&format!("{dir}/summary.txt"), s.as_bytes())?;
    Ok(if all_ok {
        Outcome::Pass
    } else {
        Outcome::Violation
    })
}

// ---------------------------------------------------------------------------
// ground-state

/// Certificate table driver: a two-sided bracket per size, the configured
/// sweep count serving as the move budget and the chain count as restarts.
pub fn run_ground_state(spec: &ExperimentSpec) -> Result<Outcome> {
    let ctx = ModelContext::build(spec)?;
    let seeds: Vec<u64> = (1..=spec.run.chains).collect();
    let budget = spec.run.sweeps;
    let mut certs = Vec::with_capacity(spec.run.n.len());
    for &n in &spec.run.n {
        let cert = match ctx.domain {
            Domain::Torus => {
                let system = ctx.system()?;
                groundstate::certificate(&system, n, budget, &seeds)?
            }
            Domain::Euclidean => {
                let eq = ctx.equilibrium.as_ref().expect("confined context");
                let lower = groundstate::confined_lower_bound(eq, n)?;
                let upper = groundstate::regularized_best_of(eq, n, budget, &seeds)?;
                Certificate {
                    n,
                    r: lower.r,
                    self_energy: lower.self_energy,
                    c_sub: lower.c_sub,
                    bound: lower.bound,
                    h_opt: upper.energy,
                    converged: upper.converged,
                }
            }
        };
        certs.push(cert);
    }

    let dir = &spec.output.dir;
    let mut buf = Vec::new();
    groundstate::write_certificates_csv(&certs, &mut buf)?;
    write_atomically(&format!("{dir}/certificates.csv"), &buf)?;

    let ok = certs.iter().all(|c| c.bound <= c.h_opt + 1e-12);
    let mut s = String::new();
    let _ = writeln!(s, "schema={SUMMARY_SCHEMA}");
    let _ = writeln!(s, "kind=ground-state");
    let _ = writeln!(s, "domain={}", ctx.domain.as_str());
    for c in &certs {
        let _ = writeln!(
            s,
            "n{}.bound={} n{}.h_opt={} n{}.converged={}",
            c.n, c.bound, c.n, c.h_opt, c.n, c.converged
        );
    }
    let _ = writeln!(s, "check.bracket={}", pass(ok));
    let _ = writeln!(s, "result={}", if ok { "PASS" } else { "VIOLATION" });
    write_atomically(&format!("{dir}/summary.txt"), s.as_bytes())?;
    Ok(if ok { Outcome::Pass } else { Outcome::Violation })
}

/// Summary for the `sample` kind, folding in audit results when they ran.
pub fn write_sample_summary(
    spec: &ExperimentSpec,
    sizes: &[SizeRun],
    audit: Option<&AuditReport>,
    unconverged: bool,
) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "schema={SUMMARY_SCHEMA}");
    let _ = writeln!(s, "kind=sample");
    let _ = writeln!(s, "domain={}", spec.model.domain);
    for size in sizes {
        let _ = writeln!(
            s,
            "n{}.beta={} n{}.rhat={} n{}.sweeps={}",
            size.n, size.beta, size.n, size.rhat, size.n, spec.run.sweeps
        );
    }
    let _ = writeln!(s, "unconverged={unconverged}");
    match audit {
        Some(a) => {
            for row in &a.rows {
                let _ = writeln!(
                    s,
                    "audit.{}={} worst_slack={} tolerance={}",
                    row.name,
                    pass(row.pass),
                    row.worst_slack,
                    row.tolerance
                );
            }
            for (name, covered) in &a.coverage {
                let _ = writeln!(s, "coverage.{name}={covered}");
            }
            let _ = writeln!(s, "audit={}", pass(a.passed()));
        }
        None => {
            let _ = writeln!(s, "audit=SKIPPED (sizes above 16)");
        }
    }
    let result_line = match (audit.map(|a| a.passed()), unconverged) {
        (Some(false), _) => "VIOLATION",
        (_, true) => "UNCONVERGED",
        _ => "PASS",
    };
    let _ = writeln!(s, "result={result_line}");
    write_atomically(&format!("{}/summary.txt", spec.output.dir), s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scratch_dir(tag: &str) -> String {
        let dir = std::env::temp_dir().join(format!("coulomb-report-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.to_str().unwrap().to_string()
    }

    fn spec_with_dir(dir: &str) -> super::super::ExperimentSpec {
        let toml = format!(
            r#"
schema = "coulomb-config-v1"

[model]
kind = "sweep"
domain = "torus"
d = 3

[run]
n = [27, 64, 125, 216]
beta = 1.0
sweeps = 10
burn_in = 2
thin = 1
chains = 2
seed = 3

[observables]
names = ["cos_1_0_0"]
grid_m = 32

[output]
dir = "{dir}"
"#
        );
        super::super::parse_spec(&toml).unwrap()
    }

    fn synthetic_result() -> ScalingResult {
        let ns = [27usize, 64, 125, 216];
        let rows: Vec<PerSize> = ns
            .iter()
            .map(|&n| PerSize {
                n,
                beta: 1.0,
                mean: 0.01,
                std: 0.5 * (n as f64).powf(0.3),
                stderr: 0.01,
                ess: 800.0,
                rhat: 1.01,
                baseline_std: 0.6 * (n as f64).powf(0.5),
                baseline_stderr: 0.01,
                bound: -0.1 * (n as f64).powf(4.0 / 3.0),
                h_opt: -0.08 * (n as f64).powf(4.0 / 3.0),
                h_opt_converged: true,
            })
            .collect();
        let fit = SlopeFit {
            slope: 0.3,
            intercept: 0.5f64.ln(),
            stderr: 0.005,
            ci_lo: 0.29,
            ci_hi: 0.31,
        };
        let baseline = SlopeFit {
            slope: 0.5,
            intercept: 0.6f64.ln(),
            stderr: 0.005,
            ci_lo: 0.49,
            ci_hi: 0.51,
        };
        ScalingResult {
            observable: "cos_1_0_0".into(),
            domain: Domain::Torus,
            rows,
            fit: Some(fit),
            baseline_fit: Some(baseline),
            unconverged: false,
        }
    }

    #[test]
    fn report_files_round_trip_and_pass_gates() {
        let dir = scratch_dir("roundtrip");
        let spec = spec_with_dir(&dir);
        let result = synthetic_result();
        assert_eq!(result.scaling_gates(), Some((true, true)));
        assert!(result.bracket_valid());
        emit_report(&result, &spec).unwrap();

        let rows = read_report_rows(&format!("{dir}/report.csv")).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].n, 27.0);
        assert!((rows[0].std - 0.5 * 27f64.powf(0.3)).abs() < 1e-15);
        assert!((rows[0].slope - 0.3).abs() < 1e-15);
        assert!((rows[2].baseline_slope - 0.5).abs() < 1e-15);

        let svg = std::fs::read_to_string(format!("{dir}/report.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("</svg>"));
        assert!(svg.contains("circle"), "data points missing");
        assert!(svg.contains("reference slope 1/3"));

        let summary = std::fs::read_to_string(format!("{dir}/summary.txt")).unwrap();
        assert!(summary.contains("check.slope_le_0.45=PASS"));
        assert!(summary.contains("check.below_baseline=PASS"));
        assert!(summary.contains("result=PASS"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn emitted_reports_survive_their_own_analyzer() {
        let dir = scratch_dir("analyze");
        let spec = spec_with_dir(&dir);
        // recompute the fit from the actual table so the recorded slope is
        // self-consistent, as run_sweep produces it
        let mut result = synthetic_result();
        let ns: Vec<f64> = result.rows.iter().map(|r| r.n as f64).collect();
        let stds: Vec<f64> = result.rows.iter().map(|r| r.std).collect();
        let errs: Vec<f64> = result.rows.iter().map(|r| r.stderr).collect();
        result.fit = Some(super::super::fit_loglog(&ns, &stds, &errs).unwrap());
        emit_report(&result, &spec).unwrap();
        let analysis = analyze_report(&spec).unwrap();
        assert_eq!(analysis.outcome, Outcome::Pass);
        let recomputed = analysis.recomputed.unwrap();
        assert!((recomputed.slope - result.fit.unwrap().slope).abs() < 1e-12);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn tampered_slope_columns_are_flagged() {
        let dir = scratch_dir("tamper");
        let spec = spec_with_dir(&dir);
        let mut result = synthetic_result();
        let ns: Vec<f64> = result.rows.iter().map(|r| r.n as f64).collect();
        let stds: Vec<f64> = result.rows.iter().map(|r| r.std).collect();
        let errs: Vec<f64> = result.rows.iter().map(|r| r.stderr).collect();
        let mut fit = super::super::fit_loglog(&ns, &stds, &errs).unwrap();
        fit.slope += 1e-6;
        result.fit = Some(fit);
        emit_report(&result, &spec).unwrap();
        let analysis = analyze_report(&spec).unwrap();
        assert_eq!(analysis.outcome, Outcome::Violation);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn report_parser_rejects_foreign_files() {
        let dir = scratch_dir("reject");
        let path = format!("{dir}/report.csv");
        std::fs::write(&path, "schema,other-v1\n").unwrap();
        assert!(read_report_rows(&path).is_err());
        std::fs::write(
            &path,
            format!("schema,{REPORT_SCHEMA}\nwrong,header\n1,2\n"),
        )
        .unwrap();
        assert!(read_report_rows(&path).is_err());
        std::fs::write(
            &path,
            format!("schema,{REPORT_SCHEMA}\n{REPORT_HEADER}\n1,2,3\n"),
        )
        .unwrap();
        assert!(read_report_rows(&path).is_err(), "short row accepted");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empty_results_emit_a_no_data_page() {
        let dir = scratch_dir("nodata");
        let spec = spec_with_dir(&dir);
        let result = ScalingResult {
            observable: "cos_1_0_0".into(),
            domain: Domain::Torus,
            rows: Vec::new(),
            fit: None,
            baseline_fit: None,
            unconverged: false,
        };
        assert_eq!(result.scaling_gates(), None);
        emit_report(&result, &spec).unwrap();
        let svg = std::fs::read_to_string(format!("{dir}/report.svg")).unwrap();
        assert!(svg.contains("NO DATA"));
        let summary = std::fs::read_to_string(format!("{dir}/summary.txt")).unwrap();
        assert!(summary.contains("result=NO DATA"));
        assert!(read_report_rows(&format!("{dir}/report.csv")).unwrap().is_empty());
        std::fs::remove_dir_all(&dir).ok();
    }
}
