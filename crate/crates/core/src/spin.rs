//! Spin precession switched on by a passing photon packet.
//!
//! A spin `a|+⟩ + b|-⟩` with splitting `ε` starts precessing once a packet
//! of width `σ` crosses the switch; `s` is the packet centre's distance past
//! the switch. Collapse smears the switchover over `𝒯` and damps the
//! precession amplitude by `e^{-ε²𝒯²/2}`.

use num_complex::Complex64;

use crate::error::{domain, invalid, Result};
use crate::special::{normal_cdf, normal_cdf_real};

/// Regime threshold for the `σε ≪ 1` and `σ ≪ 𝒯` shortcuts.
pub const REGIME_SMALL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinModelParams {
    pub a: Complex64,
    pub b: Complex64,
    pub epsilon: f64,
    pub sigma: f64,
    pub t_cal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinRegime {
    /// `σε ≤ 0.01`.
    pub narrow_packet: bool,
    /// `σ ≤ 0.01 𝒯`.
    pub packet_inside_window: bool,
}

impl SpinModelParams {
    pub fn new(a: Complex64, b: Complex64, epsilon: f64, sigma: f64, t_cal: f64) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid("a, b", format!("|a|^2 + |b|^2 = {norm}, not 1")));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(invalid("epsilon", format!("must be finite and > 0, got {epsilon}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("must be finite and > 0, got {sigma}")));
        }
        if !(t_cal >= 0.0) || !t_cal.is_finite() {
            return Err(invalid("T_cal", format!("must be finite and >= 0, got {t_cal}")));
        }
        Ok(Self {
            a,
            b,
            epsilon,
            sigma,
            t_cal,
        })
    }

    /// Real amplitudes `a = b = 1/√2`.
    pub fn symmetric(epsilon: f64, sigma: f64, t_cal: f64) -> Result<Self> {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new(h, h, epsilon, sigma, t_cal)
    }

    pub fn regime(&self) -> SpinRegime {
        SpinRegime {
            narrow_packet: self.sigma * self.epsilon <= REGIME_SMALL,
            packet_inside_window: self.sigma <= REGIME_SMALL * self.t_cal,
        }
    }

    /// Collapse damping of the precession amplitude, `e^{-ε²𝒯²/2}`.
    pub fn precession_damping(&self) -> f64 {
        (-0.5 * (self.epsilon * self.t_cal).powi(2)).exp()
    }

    fn coherence(&self) -> Complex64 {
        self.a.conj() * self.b
    }
}

/// `(a*b + ab*)Φ(-s/w) + e^{-ε²w²/2}·2Re[a*b e^{iεs} Φ((s + iεκ)/w)]`.
fn sigma1_form(s: f64, p: &SpinModelParams, w: f64, kappa: f64) -> Result<f64> {
    let c = p.coherence();
    let eps = p.epsilon;
    let phi = normal_cdf(Complex64::new(s / w, eps * kappa / w))?;
    let osc = c * Complex64::from_polar(1.0, eps * s) * phi;
    Ok(2.0 * c.re * normal_cdf_real(-s / w) + (-0.5 * eps * eps * w * w).exp() * 2.0 * osc.re)
}

/// `⟨σ₁⟩` under ordinary Schrödinger evolution.
pub fn sigma1_standard(s: f64, p: &SpinModelParams) -> Result<f64> {
    sigma1_form(s, p, p.sigma, p.sigma * p.sigma)
}

/// Narrow-packet form `2Re(a*b)Φ(-s/σ) + 2Re(a*b e^{iεs})Φ(s/σ)`.
pub fn sigma1_standard_approx(s: f64, p: &SpinModelParams) -> f64 {
    step_form(s, p, p.sigma, 1.0)
}

/// `⟨σ₁⟩` after collapse has run for long enough to give width `𝒯`: the
/// Gaussian smear of [`sigma1_standard`] in closed form, with
/// `r² = σ² + 𝒯²`.
pub fn sigma1_collapsed(s: f64, p: &SpinModelParams) -> Result<f64> {
    let r2 = p.sigma * p.sigma + p.t_cal * p.t_cal;
    sigma1_form(s, p, r2.sqrt(), r2)
}

/// The closed form with imaginary shift `εσ(σ + 𝒯)` in the Φ arguments, as
/// it is usually quoted. It agrees with [`sigma1_collapsed`] at `𝒯 = 0` and
/// for `|s| ≫ 𝒯`, but not inside the switchover window.
pub fn sigma1_collapsed_printed(s: f64, p: &SpinModelParams) -> Result<f64> {
    let r2 = p.sigma * p.sigma + p.t_cal * p.t_cal;
    sigma1_form(s, p, r2.sqrt(), p.sigma * (p.sigma + p.t_cal))
}

/// Shortcut for `σε ≪ 1`, `σ ≪ 𝒯`:
/// `2Re(a*b)Φ(-s/𝒯) + e^{-ε²𝒯²/2}·2Re(a*b e^{iεs})Φ(s/𝒯)`.
pub fn sigma1_collapsed_approx(s: f64, p: &SpinModelParams) -> f64 {
    step_form(s, p, p.t_cal, p.precession_damping())
}

fn step_form(s: f64, p: &SpinModelParams, w: f64, damping: f64) -> f64 {
    let c = p.coherence();
    let (off, on) = if w == 0.0 {
        let on = if s > 0.0 { 1.0 } else if s < 0.0 { 0.0 } else { 0.5 };
        (1.0 - on, on)
    } else {
        (normal_cdf_real(-s / w), normal_cdf_real(s / w))
    };
    2.0 * c.re * off + damping * 2.0 * (c * Complex64::from_polar(1.0, p.epsilon * s)).re * on
}

/// Spin density matrix in the `|+⟩, |-⟩` basis after the switchover.
pub type SpinDensityMatrix = [[Complex64; 2]; 2];

/// `(1 - D)[|a|²|+⟩⟨+| + |b|²|-⟩⟨-|] + D|χ(s)⟩⟨χ(s)|`, `D = e^{-ε²𝒯²/2}`,
/// `χ(s) = a e^{-iεs/2}|+⟩ + b e^{iεs/2}|-⟩`. Valid for `s > 2𝒯`.
pub fn spin_density_matrix(s: f64, p: &SpinModelParams) -> Result<SpinDensityMatrix> {
    if !(s > 2.0 * p.t_cal) {
        return Err(domain(format!(
            "s = {s} lies inside the switchover window (need s > 2T = {})",
            2.0 * p.t_cal
        )));
    }
    let d = p.precession_damping();
    let half = 0.5 * p.epsilon * s;
    let chi = [p.a * Complex64::from_polar(1.0, -half), p.b * Complex64::from_polar(1.0, half)];
    // The diagonal is |a|², |b|² in both parts of the mixture.
    let up = p.a.norm_sqr() / (p.a.norm_sqr() + p.b.norm_sqr());
    let off = chi[0] * chi[1].conj() * d;
    Ok([
        [Complex64::new(up, 0.0), off],
        [off.conj(), Complex64::new(1.0 - up, 0.0)],
    ])
}

/// `Tr(ρσ₁) = 2 Re ρ₊₋`.
pub fn sigma1_of(rho: &SpinDensityMatrix) -> f64 {
    2.0 * rho[0][1].re
}
