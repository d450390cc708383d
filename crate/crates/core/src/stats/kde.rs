//! Gaussian kernel density estimate on a uniform grid, for exporting
//! score-distribution curves to external plotting.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeGrid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl KdeGrid {
    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.lo + k as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// f(g) = (1/(n*h)) * sum_i phi((g - x_i)/h) with the standard normal phi.
pub fn gaussian_kde(samples: &[f64], bandwidth: f64, grid: &KdeGrid) -> Result<KdeCurve> {
    if samples.is_empty() {
        return Err(Error::Usage("kde needs at least one sample".into()));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Usage(format!("kde bandwidth must be positive, got {bandwidth}")));
    }
    if grid.steps < 2 || !(grid.hi > grid.lo) {
        return Err(Error::Usage(format!(
            "kde grid needs hi > lo and steps >= 2, got [{}, {}] with {} steps",
            grid.lo, grid.hi, grid.steps
        )));
    }
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let points = grid.points();
    let density = points
        .iter()
        .map(|&g| {
            norm * samples
                .iter()
                .map(|&x| {
                    let z = (g - x) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(KdeCurve { grid: points, density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const GRID: KdeGrid = KdeGrid { lo: -3.0, hi: 4.0, steps: 1401 };

    #[test]
    fn single_kernel_peak_height() {
        let curve = gaussian_kde(&[0.5], 0.2, &KdeGrid { lo: 0.0, hi: 1.0, steps: 3 }).unwrap();
        assert_eq!(curve.grid, vec![0.0, 0.5, 1.0]);
        // 1/(h*sqrt(2*pi)) at the sample itself.
        assert_abs_diff_eq!(curve.density[1], 1.9947114020071635, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_samples_give_symmetric_density() {
        let grid = KdeGrid { lo: -2.0, hi: 2.0, steps: 81 };
        let curve = gaussian_kde(&[-1.0, -0.25, 0.25, 1.0], 0.2, &grid).unwrap();
        let d = &curve.density;
        for k in 0..d.len() / 2 {
            assert_abs_diff_eq!(d[k], d[d.len() - 1 - k], epsilon = 1e-12);
        }
    }

    #[test]
    fn trapezoidal_integral_is_one() {
        let samples = [0.0, 0.1, 0.33, 0.5, 0.5, 0.72, 0.9, 1.0];
        let curve = gaussian_kde(&samples, 0.2, &GRID).unwrap();
        let step = (GRID.hi - GRID.lo) / (GRID.steps - 1) as f64;
        let mut integral = 0.0;
        for w in curve.density.windows(2) {
            integral += 0.5 * (w[0] + w[1]) * step;
        }
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let grid = KdeGrid { lo: 0.0, hi: 1.0, steps: 10 };
        assert!(matches!(gaussian_kde(&[], 0.2, &grid), Err(Error::Usage(_))));
        assert!(matches!(gaussian_kde(&[0.5], 0.0, &grid), Err(Error::Usage(_))));
        assert!(matches!(
            gaussian_kde(&[0.5], 0.2, &KdeGrid { lo: 1.0, hi: 0.0, steps: 10 }),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            gaussian_kde(&[0.5], 0.2, &KdeGrid { lo: 0.0, hi: 1.0, steps: 1 }),
            Err(Error::Usage(_))
        ));
    }
}
