//! Williams' test for two dependent correlations sharing one variable:
//! does variable 2 correlate with variable 1 more strongly than variable 3
//! does, given that r23 ties the two competitors together?

use super::tdist::student_t_two_sided_p;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilliamsResult {
    pub t: f64,
    /// Two-sided p from Student t with n - 3 degrees of freedom.
    pub p: f64,
    pub df: usize,
}

pub fn williams_t(r12: f64, r13: f64, r23: f64, n: usize) -> Result<WilliamsResult> {
    for r in [r12, r13, r23] {
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::Usage(format!(
                "correlation {r} outside [-1, 1] in Williams' test"
            )));
        }
    }
    if n < 4 {
        return Err(Error::Usage(format!(
            "Williams' test needs n >= 4, got {n}"
        )));
    }
    let k = 1.0 - r12 * r12 - r13 * r13 - r23 * r23 + 2.0 * r12 * r13 * r23;
    if k < -1e-12 {
        return Err(Error::Invalid(format!(
            "inconsistent correlation triple ({r12}, {r13}, {r23}): determinant {k} < 0"
        )));
    }
    let k = k.max(0.0);
    let nf = n as f64;
    let rbar = 0.5 * (r12 + r13);
    let denom = 2.0 * k * (nf - 1.0) / (nf - 3.0) + rbar * rbar * (1.0 - r23).powi(3);
    let df = n - 3;
    if denom <= 0.0 {
        // Only reachable on the degenerate boundary (k = 0 with r23 = 1 or
        // rbar = 0); a zero numerator still has a well-defined answer.
        if r12 == r13 {
            return Ok(WilliamsResult { t: 0.0, p: 1.0, df });
        }
        return Err(Error::Invalid(format!(
            "degenerate correlation triple ({r12}, {r13}, {r23}) in Williams' test"
        )));
    }
    let t = (r12 - r13) * ((nf - 1.0) * (1.0 + r23) / denom).sqrt();
    let p = student_t_two_sided_p(t, df as f64);
    Ok(WilliamsResult { t, p, df })
}
