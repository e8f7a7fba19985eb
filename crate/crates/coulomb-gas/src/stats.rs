//! Statistics shared by the samplers, observables, and experiment drivers:
//! autocorrelation-aware effective sample sizes, split-chain convergence,
//! block jackknife errors, weighted line fits, and a chi-square tail.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

#[derive(Debug, Clone, Copy)]
pub struct Ess {
    /// Effective number of independent samples, ≤ n.
    pub ess: f64,
    /// Integrated autocorrelation time, ≥ ½ (½ means uncorrelated).
    pub tau_int: f64,
}

/// Effective sample size by Geyer's initial-positive-sequence rule: sum
/// autocorrelations in adjacent pairs while the pair sums stay positive.
/// Conservative for any reversible chain.
pub fn effective_sample_size(xs: &[f64]) -> Ess {
    let n = xs.len();
    if n < 4 {
        return Ess {
            ess: n as f64,
            tau_int: 0.5,
        };
    }
    if xs.windows(2).all(|w| w[0] == w[1]) {
        // literally constant: no correlation information, call it iid
        return Ess {
            ess: n as f64,
            tau_int: 0.5,
        };
    }
    let m = mean(xs);
    let c0: f64 = xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    let rounding_floor = (f64::EPSILON * n as f64 * (1.0 + m.abs())).powi(2);
    if c0 <= rounding_floor {
        // constant up to accumulated float noise: same verdict
        return Ess {
            ess: n as f64,
            tau_int: 0.5,
        };
    }
    let acov = |k: usize| -> f64 {
        let mut s = 0.0;
        for t in 0..(n - k) {
            s += (xs[t] - m) * (xs[t + k] - m);
        }
        s / n as f64
    };
    // pair-sum accumulation: tau_sum = 1 + 2 Σ ρ_k over the kept window
    let mut tau_sum = 1.0;
    let mut k = 1;
    while k + 1 < n / 2 {
        let gamma = (acov(k) + acov(k + 1)) / c0;
        if gamma <= 0.0 {
            break;
        }
        tau_sum += 2.0 * gamma;
        k += 2;
    }
    let tau_sum = tau_sum.max(1.0);
    Ess {
        ess: (n as f64 / tau_sum).min(n as f64),
        tau_int: tau_sum / 2.0,
    }
}

/// Split-chain convergence statistic (potential scale reduction). Each chain
/// is halved, then between/within variances are compared; values near 1 mean
/// the halves are indistinguishable.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::InvalidArgument(
            "split statistic needs at least 2 chains".into(),
        ));
    }
    let shortest = chains.iter().map(|c| c.len()).min().unwrap();
    let half = shortest / 2;
    if half < 2 {
        return Err(Error::InvalidArgument(
            "chains too short to split".into(),
        ));
    }
    let mut pieces: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        pieces.push(&c[..half]);
        pieces.push(&c[half..2 * half]);
    }
    let nn = half as f64;
    let means: Vec<f64> = pieces.iter().map(|p| mean(p)).collect();
    let vars: Vec<f64> = pieces.iter().map(|p| variance(p)).collect();
    let w = mean(&vars);
    let b = nn * variance(&means);
    if w <= 0.0 {
        // all pieces constant: identical constants converge trivially
        return Ok(if b <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (nn - 1.0) / nn * w + b / nn;
    Ok((var_plus / w).sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
    /// Weighted residual sum of squares.
    pub chi2: f64,
    pub dof: usize,
}

/// Weighted least squares for y = a + b·x with weights w = 1/σ². Standard
/// errors come from the normal-equation inverse, inflated by the reduced
/// chi-square when it exceeds 1, so underestimated input errors widen the
/// interval instead of narrowing it.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n != w.len() {
        return Err(Error::InvalidArgument("mismatched fit input lengths".into()));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(
            "line fit needs at least 3 points".into(),
        ));
    }
    if w.iter().any(|&wi| !(wi > 0.0)) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    let s: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
    let sy: f64 = w.iter().zip(y).map(|(wi, yi)| wi * yi).sum();
    let sxx: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi * xi).sum();
    let sxy: f64 = w
        .iter()
        .zip(x)
        .zip(y)
        .map(|((wi, xi), yi)| wi * xi * yi)
        .sum();
    let det = s * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::InvalidArgument("degenerate fit abscissae".into()));
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2: f64 = w
        .iter()
        .zip(x)
        .zip(y)
        .map(|((wi, xi), yi)| {
            let r = yi - intercept - slope * xi;
            wi * r * r
        })
        .sum();
    let dof = n - 2;
    let inflate = (chi2 / dof as f64).max(1.0);
    let slope_se = (s / det * inflate).sqrt();
    let intercept_se = (sxx / det * inflate).sqrt();
    Ok(LineFit {
        intercept,
        slope,
        intercept_se,
        slope_se,
        chi2,
        dof,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct JackknifeEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Delete-one-block jackknife over contiguous blocks. Blocks absorb serial
/// correlation up to roughly (trace length)/blocks.
pub fn jackknife_blocks<F>(data: &[f64], blocks: usize, stat: F) -> Result<JackknifeEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    let n = data.len();
    if blocks < 2 || n < 2 * blocks {
        return Err(Error::InvalidArgument(format!(
            "jackknife needs ≥ 2 blocks with ≥ 2 points each (n = {n}, blocks = {blocks})"
        )));
    }
    let full = stat(data);
    let mut leave_outs = Vec::with_capacity(blocks);
    let mut scratch = Vec::with_capacity(n);
    for b in 0..blocks {
        let lo = b * n / blocks;
        let hi = (b + 1) * n / blocks;
        scratch.clear();
        scratch.extend_from_slice(&data[..lo]);
        scratch.extend_from_slice(&data[hi..]);
        leave_outs.push(stat(&scratch));
    }
    let m = mean(&leave_outs);
    let var: f64 = leave_outs.iter().map(|&v| (v - m) * (v - m)).sum::<f64>()
        * (blocks as f64 - 1.0)
        / blocks as f64;
    Ok(JackknifeEstimate {
        value: full,
        stderr: var.sqrt(),
    })
}

/// log(Σ e^{v_i}) computed stably.
pub fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + vals.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// log of the mean of e^{v_i}.
pub fn log_mean_exp(vals: &[f64]) -> f64 {
    log_sum_exp(vals) - (vals.len() as f64).ln()
}

/// Kolmogorov-Smirnov distance of a sample to the uniform law on [0,1).
pub fn ks_distance_uniform(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((x - lo).abs()).max((hi - x).abs());
    }
    d
}

/// Survival function of the chi-square law, Q(x; k) = P(X > x), via the
/// regularized incomplete gamma function (series for small x, continued
/// fraction otherwise).
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let a = 0.5 * dof;
    let x = 0.5 * x;
    if x < a + 1.0 {
        1.0 - lower_gamma_series(a, x)
    } else {
        upper_gamma_cf(a, x)
    }
}

fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - libm::lgamma(a)).exp()
}

fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    // Lentz's method for the continued fraction of Q(a, x)
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x + a * x.ln() - libm::lgamma(a)).exp()
}
