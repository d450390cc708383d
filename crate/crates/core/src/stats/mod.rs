//! Rank and product-moment correlation, significance helpers, and KDE
//! export. Sample sizes here are desk scale, so the O(n^2) tau is fine.

mod correlate;
mod kde;
mod tdist;
mod williams;

pub use correlate::{
    correlate, report_json, CorrelationReport, CorrelationValues, MetricCorrelation,
    WilliamsEntry,
};
pub use kde::{gaussian_kde, KdeCurve, KdeGrid};
pub use tdist::{ln_gamma, reg_inc_beta, student_t_two_sided_p};
pub use williams::{williams_t, WilliamsResult};

use crate::{Error, Result};

fn check_paired(x: &[f64], y: &[f64], what: &str) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Usage(format!(
            "{what} needs paired samples, got {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Usage(format!("{what} needs at least 2 samples")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Usage(format!("{what} requires finite samples")));
    }
    Ok(())
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("ranks need non-NaN values"));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[order[k]] = shared;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, "pearson")?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Invalid(
            "correlation undefined: an input has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of the average-ranked data.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, "spearman")?;
    pearson(&ranks(x), &ranks(y))
}

/// Tau-b: (concordant - discordant) / sqrt((n0 - n1)(n0 - n2)), where n1 and
/// n2 count pairs tied in x and in y respectively.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y, "kendall_tau_b")?;
    let n = x.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut tied_x, mut tied_y) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let tie_x = x[i] == x[j];
            let tie_y = y[i] == y[j];
            if tie_x {
                tied_x += 1;
            }
            if tie_y {
                tied_y += 1;
            }
            if !tie_x && !tie_y {
                if (x[i] - x[j]) * (y[i] - y[j]) > 0.0 {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let dx = n0 - tied_x;
    let dy = n0 - tied_y;
    if dx == 0 || dy == 0 {
        return Err(Error::Invalid(
            "correlation undefined: an input is entirely tied".into(),
        ));
    }
    let tau = (concordant - discordant) as f64 / ((dx as f64) * (dy as f64)).sqrt();
    Ok(tau.clamp(-1.0, 1.0))
}

/// Complementary error function (Abramowitz & Stegun 7.1.26, |err| < 1.5e-7).
fn erfc(x: f64) -> f64 {
    let ax = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * ax);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let tail = poly * (-ax * ax).exp();
    if x >= 0.0 {
        tail
    } else {
        2.0 - tail
    }
}

/// Two-sided normal-tail p for a z statistic.
fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Pearson r with its two-sided p from t = r*sqrt((n-2)/(1-r^2)), df = n-2.
pub fn pearson_test(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let r = pearson(x, y)?;
    Ok((r, r_to_p(r, x.len())))
}

/// Spearman r with the same t-approximation applied to the rank correlation.
pub fn spearman_test(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let r = spearman(x, y)?;
    Ok((r, r_to_p(r, x.len())))
}

fn r_to_p(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    if 1.0 - r * r <= 0.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    student_t_two_sided_p(t, df)
}

/// Tau-b with a tie-adjusted normal approximation for the two-sided p.
pub fn kendall_tau_b_test(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let tau = kendall_tau_b(x, y)?;
    let n = x.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            if x[i] != x[j] && y[i] != y[j] {
                if (x[i] - x[j]) * (y[i] - y[j]) > 0.0 {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let tie_sizes = |v: &[f64]| -> Vec<f64> {
        let mut sorted: Vec<f64> = v.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite checked above"));
        let mut sizes = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            if j > i {
                sizes.push((j - i + 1) as f64);
            }
            i = j + 1;
        }
        sizes
    };
    let tx = tie_sizes(x);
    let ty = tie_sizes(y);
    let nf = n as f64;
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt: f64 = tx.iter().map(|&t| t * (t - 1.0) * (2.0 * t + 5.0)).sum();
    let vu: f64 = ty.iter().map(|&t| t * (t - 1.0) * (2.0 * t + 5.0)).sum();
    let sum_t1: f64 = tx.iter().map(|&t| t * (t - 1.0)).sum();
    let sum_u1: f64 = ty.iter().map(|&t| t * (t - 1.0)).sum();
    let sum_t2: f64 = tx.iter().map(|&t| t * (t - 1.0) * (t - 2.0)).sum();
    let sum_u2: f64 = ty.iter().map(|&t| t * (t - 1.0) * (t - 2.0)).sum();
    let mut var = (v0 - vt - vu) / 18.0 + sum_t1 * sum_u1 / (2.0 * nf * (nf - 1.0));
    if n > 2 {
        var += sum_t2 * sum_u2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    }
    if var <= 0.0 {
        return Ok((tau, 1.0));
    }
    let z = (concordant - discordant) as f64 / var.sqrt();
    Ok((tau, normal_two_sided_p(z)))
}
