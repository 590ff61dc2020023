//! Complex error-function family: the Faddeeva function `w(z)` and the
//! normal distribution function `Φ(z)` continued to complex arguments.
//!
//! `w(z) = e^{-z²} erfc(-iz)` is evaluated in the closed upper half-plane by
//! Weideman's rational expansion for moderate `|z|` and by the Laplace
//! continued fraction for large `|z|`. `Φ` is assembled from `w` so that the
//! large exponential factor is applied once, at the end.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{domain, Result};

/// Largest `|Im z|` accepted by [`normal_cdf`].
pub const NORMAL_CDF_MAX_IMAG: f64 = 30.0;

const WEIDEMAN_TERMS: usize = 40;
const CONTINUED_FRACTION_RADIUS: f64 = 12.0;
const CONTINUED_FRACTION_DEPTH: usize = 90;

struct Weideman {
    scale: f64,
    coeffs: Vec<f64>,
}

fn weideman() -> &'static Weideman {
    static TABLE: OnceLock<Weideman> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = WEIDEMAN_TERMS;
        let m = 2 * n;
        let len = 2 * m;
        let scale = (n as f64 / 2f64.sqrt()).sqrt();
        let sample = |k: i64| -> f64 {
            let theta = k as f64 * PI / m as f64;
            let t = scale * (theta / 2.0).tan();
            (-t * t).exp() * (scale * scale + t * t)
        };
        // fftshift-ordered samples: g[j] = F(j) for j < m, 0 at j = m,
        // F(j - 2m) above.
        let g: Vec<f64> = (0..len)
            .map(|j| {
                let j = j as i64;
                let m = m as i64;
                if j < m {
                    sample(j)
                } else if j == m {
                    0.0
                } else {
                    sample(j - 2 * m)
                }
            })
            .collect();
        let coeffs = (1..=n)
            .map(|k| {
                let re: f64 = g
                    .iter()
                    .enumerate()
                    .map(|(j, gj)| gj * (2.0 * PI * (j * k) as f64 / len as f64).cos())
                    .sum();
                re / len as f64
            })
            .collect();
        Weideman { scale, coeffs }
    })
}

fn faddeeva_weideman(z: Complex64) -> Complex64 {
    let table = weideman();
    let i = Complex64::i();
    let l = Complex64::new(table.scale, 0.0);
    let denom = l - i * z;
    let zz = (l + i * z) / denom;
    let mut p = Complex64::new(0.0, 0.0);
    for c in table.coeffs.iter().rev() {
        p = p * zz + c;
    }
    2.0 * p / (denom * denom) + (1.0 / PI.sqrt()) / denom
}

fn faddeeva_continued_fraction(z: Complex64) -> Complex64 {
    let mut cf = z;
    for k in (1..=CONTINUED_FRACTION_DEPTH).rev() {
        cf = z - (k as f64 / 2.0) / cf;
    }
    Complex64::i() / (PI.sqrt() * cf)
}

/// Faddeeva function `w(z) = e^{-z²} erfc(-iz)` for any complex `z`.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im >= 0.0 {
        if z.norm() > CONTINUED_FRACTION_RADIUS {
            faddeeva_continued_fraction(z)
        } else {
            faddeeva_weideman(z)
        }
    } else {
        // w(z) = 2 e^{-z²} - w(-z)
        2.0 * (-z * z).exp() - faddeeva(-z)
    }
}

/// Complementary error function of a complex argument.
pub fn erfc(z: Complex64) -> Complex64 {
    // erfc(z) = e^{-z²} w(iz); for Re z < 0 use erfc(z) = 2 - erfc(-z).
    if z.re >= 0.0 {
        (-z * z).exp() * faddeeva(Complex64::i() * z)
    } else {
        2.0 - erfc(-z)
    }
}

fn normal_cdf_unchecked(z: Complex64) -> Complex64 {
    if z.re <= 0.0 {
        // Φ(z) = ½ erfc(-z/√2) = ½ e^{-z²/2} w(-iz/√2); the argument of w
        // lies in the closed upper half-plane.
        let arg = -Complex64::i() * z * FRAC_1_SQRT_2;
        0.5 * (-0.5 * z * z).exp() * faddeeva(arg)
    } else {
        1.0 - normal_cdf_unchecked(-z)
    }
}

/// Normal distribution function `Φ(z) = (2π)^{-1/2} ∫_{-∞}^{z} e^{-y²/2} dy`,
/// analytically continued to complex `z` with `|Im z| ≤ 30`.
pub fn normal_cdf(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(domain(format!("normal_cdf argument {z} is not finite")));
    }
    if z.im.abs() > NORMAL_CDF_MAX_IMAG {
        return Err(domain(format!(
            "normal_cdf argument {z} has |Im z| > {NORMAL_CDF_MAX_IMAG}"
        )));
    }
    Ok(normal_cdf_unchecked(z))
}

/// Real normal distribution function.
pub fn normal_cdf_real(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    normal_cdf_unchecked(Complex64::new(x, 0.0)).re
}

/// `e^{x²/2} Φ(-x)`, i.e. the Mills ratio scaled by `(2π)^{-1/2}`, without
/// overflow for large positive `x`.
pub fn scaled_normal_tail(x: f64) -> f64 {
    if x >= 0.0 {
        0.5 * faddeeva(Complex64::new(0.0, x * FRAC_1_SQRT_2)).re
    } else {
        (0.5 * x * x).exp() * (1.0 - normal_cdf_real(-x))
    }
}
