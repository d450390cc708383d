//! Color conversions, the CIEDE2000 perceptual distance, and the feature
//! vectors consumed by listener models.
//!
//! The pipeline for perceptual distance is HSV -> sRGB -> linear RGB -> XYZ
//! (D65, 2 degree observer) -> CIELAB -> CIEDE2000.

use crate::corpus::Color;
use crate::scalar::Scalar;
use crate::Real;

/// CIELAB coordinates. `l` is lightness in `[0, 100]`; `a` and `b` are the
/// green-red and blue-yellow axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabColor<T = Real> {
    pub l: T,
    pub a: T,
    pub b: T,
}

/// Converts HSV (h in degrees, s and v in `[0, 1]`) to sRGB in `[0, 1]^3`.
/// Exact on sector boundaries: multiples of 60 degrees hit pure components.
pub fn hsv_to_rgb<T: Scalar>(h: T, s: T, v: T) -> [T; 3] {
    let sixty = T::of(60.0);
    let mut hp = (h % T::of(360.0)) / sixty;
    if hp < T::zero() {
        hp = hp + T::of(6.0);
    }
    let sector = hp.floor();
    let f = hp - sector;
    let p = v * (T::one() - s);
    let q = v * (T::one() - f * s);
    let t = v * (T::one() - (T::one() - f) * s);
    match sector.to_u32().unwrap_or(0) % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Converts sRGB in `[0, 1]^3` to HSV with h in `[0, 360)`.
pub fn rgb_to_hsv<T: Scalar>(r: T, g: T, b: T) -> [T; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > T::zero() { delta / max } else { T::zero() };
    if delta == T::zero() {
        return [T::zero(), s, v];
    }
    let sixty = T::of(60.0);
    let h = if max == r {
        sixty * ((g - b) / delta)
    } else if max == g {
        sixty * (T::of(2.0) + (b - r) / delta)
    } else {
        sixty * (T::of(4.0) + (r - g) / delta)
    };
    let h = if h < T::zero() { h + T::of(360.0) } else { h };
    // Rounding can land exactly on 360; fold it back to 0.
    let h = if h >= T::of(360.0) { h - T::of(360.0) } else { h };
    [h, s, v]
}

fn srgb_to_linear<T: Scalar>(c: T) -> T {
    if c <= T::of(0.04045) {
        c / T::of(12.92)
    } else {
        ((c + T::of(0.055)) / T::of(1.055)).powf(T::of(2.4))
    }
}

/// Converts sRGB in `[0, 1]^3` to CIELAB under D65 (Xn=0.95047, Zn=1.08883).
pub fn rgb_to_lab<T: Scalar>(r: T, g: T, b: T) -> LabColor<T> {
    let rl = srgb_to_linear(r);
    let gl = srgb_to_linear(g);
    let bl = srgb_to_linear(b);

    let x = T::of(0.4124564) * rl + T::of(0.3575761) * gl + T::of(0.1804375) * bl;
    let y = T::of(0.2126729) * rl + T::of(0.7151522) * gl + T::of(0.0721750) * bl;
    let z = T::of(0.0193339) * rl + T::of(0.1191920) * gl + T::of(0.9503041) * bl;

    let fx = lab_f(x / T::of(0.95047));
    let fy = lab_f(y);
    let fz = lab_f(z / T::of(1.08883));

    let l = (T::of(116.0) * fy - T::of(16.0)).max(T::zero()).min(T::of(100.0));
    LabColor { l, a: T::of(500.0) * (fx - fy), b: T::of(200.0) * (fy - fz) }
}

fn lab_f<T: Scalar>(t: T) -> T {
    // delta = 6/29; below delta^3 the cube root is replaced by a linear ramp.
    let delta3 = T::of(216.0 / 24389.0);
    if t > delta3 {
        t.powf(T::of(1.0 / 3.0))
    } else {
        t * T::of(24389.0 / 27.0 / 116.0) + T::of(16.0 / 116.0)
    }
}

/// Convenience: CIELAB of a `Color` via the sRGB pipeline.
pub fn color_to_lab(c: &Color) -> LabColor {
    let [r, g, b] = hsv_to_rgb(c.h, c.s, c.v);
    rgb_to_lab(r, g, b)
}

/// CIEDE2000 color difference, including the hue-rotation term. Symmetric and
/// zero iff the inputs are equal; the triangle inequality does not hold for
/// this formula and is not implied.
pub fn ciede2000<T: Scalar>(x: &LabColor<T>, y: &LabColor<T>) -> T {
    let two = T::of(2.0);
    let c1 = (x.a * x.a + x.b * x.b).sqrt();
    let c2 = (y.a * y.a + y.b * y.b).sqrt();
    let cbar = (c1 + c2) / two;
    let pow7 = |v: T| v.powi(7);
    let g = T::of(0.5)
        * (T::one() - (pow7(cbar) / (pow7(cbar) + pow7(T::of(25.0)))).sqrt());

    let a1p = (T::one() + g) * x.a;
    let a2p = (T::one() + g) * y.a;
    let c1p = (a1p * a1p + x.b * x.b).sqrt();
    let c2p = (a2p * a2p + y.b * y.b).sqrt();

    let h1p = hue_deg(x.b, a1p);
    let h2p = hue_deg(y.b, a2p);

    let dl = y.l - x.l;
    let dc = c2p - c1p;

    let chroma_prod = c1p * c2p;
    let dhp = if chroma_prod == T::zero() {
        T::zero()
    } else {
        let diff = h2p - h1p;
        if diff.abs() <= T::of(180.0) {
            diff
        } else if diff > T::of(180.0) {
            diff - T::of(360.0)
        } else {
            diff + T::of(360.0)
        }
    };
    let dh_big = two * chroma_prod.sqrt() * (to_rad(dhp / two)).sin();

    let lbar = (x.l + y.l) / two;
    let cbar_p = (c1p + c2p) / two;
    let hbar = if chroma_prod == T::zero() {
        h1p + h2p
    } else {
        let sum = h1p + h2p;
        if (h1p - h2p).abs() <= T::of(180.0) {
            sum / two
        } else if sum < T::of(360.0) {
            (sum + T::of(360.0)) / two
        } else {
            (sum - T::of(360.0)) / two
        }
    };

    let t = T::one() - T::of(0.17) * to_rad(hbar - T::of(30.0)).cos()
        + T::of(0.24) * to_rad(two * hbar).cos()
        + T::of(0.32) * to_rad(T::of(3.0) * hbar + T::of(6.0)).cos()
        - T::of(0.20) * to_rad(T::of(4.0) * hbar - T::of(63.0)).cos();

    let dtheta = T::of(30.0) * (-((hbar - T::of(275.0)) / T::of(25.0)).powi(2)).exp();
    let rc = two * (pow7(cbar_p) / (pow7(cbar_p) + pow7(T::of(25.0)))).sqrt();
    let rt = -(to_rad(two * dtheta)).sin() * rc;

    let lterm = lbar - T::of(50.0);
    let sl = T::one() + T::of(0.015) * lterm * lterm / (T::of(20.0) + lterm * lterm).sqrt();
    let sc = T::one() + T::of(0.045) * cbar_p;
    let sh = T::one() + T::of(0.015) * cbar_p * t;

    let vl = dl / sl;
    let vc = dc / sc;
    let vh = dh_big / sh;
    (vl * vl + vc * vc + vh * vh + rt * vc * vh).sqrt()
}

/// Hue angle in degrees in `[0, 360)`; zero when both components are zero.
fn hue_deg<T: Scalar>(b: T, ap: T) -> T {
    if b == T::zero() && ap == T::zero() {
        return T::zero();
    }
    let h = b.atan2(ap) * T::of(180.0 / std::f64::consts::PI);
    if h < T::zero() {
        h + T::of(360.0)
    } else {
        h
    }
}

fn to_rad<T: Scalar>(deg: T) -> T {
    deg * T::of(std::f64::consts::PI / 180.0)
}

/// Input representation for listener models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// `(h/360, s, v)`, 3 dimensions.
    RawHsv,
    /// Cosine and sine of `2*pi*(j*h + k*s + l*v)` over all `(j, k, l)` in
    /// `{0, 1, 2}^3` (lexicographic), 54 dimensions.
    Fourier,
}

impl FeatureMode {
    pub fn dim(self) -> usize {
        match self {
            FeatureMode::RawHsv => 3,
            FeatureMode::Fourier => 54,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::RawHsv => "raw_hsv",
            FeatureMode::Fourier => "fourier",
        }
    }

    pub fn parse(s: &str) -> crate::Result<Self> {
        match s {
            "raw_hsv" => Ok(FeatureMode::RawHsv),
            "fourier" => Ok(FeatureMode::Fourier),
            other => Err(crate::Error::Usage(format!(
                "unknown feature mode {other:?}; expected raw_hsv or fourier"
            ))),
        }
    }
}

/// Fixed-length real vector describing one color.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorFeatureVector {
    pub values: Vec<Real>,
    pub mode: FeatureMode,
}

/// Builds the feature vector for a color under the given mode.
pub fn color_features(c: &Color, mode: FeatureMode) -> ColorFeatureVector {
    let hn = c.h / 360.0;
    let values = match mode {
        FeatureMode::RawHsv => vec![hn, c.s, c.v],
        FeatureMode::Fourier => {
            let tau = std::f64::consts::TAU;
            let mut out = Vec::with_capacity(54);
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let theta = tau * (j as f64 * hn + k as f64 * c.s + l as f64 * c.v);
                        out.push(theta.cos());
                        out.push(theta.sin());
                    }
                }
            }
            out
        }
    };
    debug_assert_eq!(values.len(), mode.dim());
    ColorFeatureVector { values, mode }
}
