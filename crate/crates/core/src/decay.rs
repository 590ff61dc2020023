//! Two-level atom coupled to a one-dimensional photon field.
//!
//! Photon energy is `k` (not `|k|`), so the grid spans negative momenta and
//! spontaneous decay is exactly exponential. `s` is the time elapsed since
//! preparation (decay) or since the incident packet reached the atom
//! (excitation).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::ensemble::TimeSeries;
use crate::error::{domain, invalid, Error, Result};
use crate::math::{gaussian_pdf, pairwise_sum};
use crate::quadrature::{integrate_with_breakpoints, QuadOptions};
use crate::special::{normal_cdf_real, scaled_normal_tail};

/// Regime threshold for the delta-packet shortcuts.
pub const REGIME_SMALL: f64 = 1e-2;
/// `Γ𝒯` above which the Gaussian asymptotics are flagged as applicable.
pub const LARGE_GAMMA_T: f64 = 5.0;
/// Allowed drift of total probability per unit time on the k-grid.
pub const KGRID_CONSERVATION_TOL: f64 = 1e-8;
pub const DEFAULT_MODES: usize = 4096;
pub const DEFAULT_HALF_WIDTH: f64 = 40.0;
/// Default step as a fraction of `1 / half-width`.
pub const DEFAULT_STEP_FRACTION: f64 = 0.05;

// Incident packet support, in units of its amplitude width.
const PACKET_REACH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayModelParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub x0: f64,
    pub t_cal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecayRegime {
    /// `σε ≤ 0.01`.
    pub narrow_in_energy: bool,
    /// `σΓ ≤ 0.01`.
    pub short_against_lifetime: bool,
    /// `σ ≤ 0.01 𝒯`.
    pub packet_inside_window: bool,
    /// `Γ𝒯 ≥ 5`.
    pub large_gamma_t: bool,
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

impl DecayModelParams {
    pub fn new(epsilon: f64, gamma: f64, sigma: f64, x0: f64, t_cal: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        check_positive("Gamma", gamma)?;
        check_positive("sigma", sigma)?;
        if !x0.is_finite() {
            return Err(invalid("x0", "must be finite"));
        }
        if !(t_cal >= 0.0) || !t_cal.is_finite() {
            return Err(invalid("T_cal", format!("must be finite and >= 0, got {t_cal}")));
        }
        Ok(Self {
            epsilon,
            gamma,
            sigma,
            x0,
            t_cal,
        })
    }

    /// Atom with the coupling switched off (`Γ = 0`). Only meaningful for
    /// the k-grid integrator.
    pub fn uncoupled(epsilon: f64, sigma: f64, x0: f64) -> Result<Self> {
        let mut p = Self::new(epsilon, 1.0, sigma, x0, 0.0)?;
        p.gamma = 0.0;
        Ok(p)
    }

    /// Coupling constant `g = √(Γ/2π)`.
    pub fn coupling(&self) -> f64 {
        (self.gamma / (2.0 * PI)).sqrt()
    }

    pub fn regime(&self) -> DecayRegime {
        DecayRegime {
            narrow_in_energy: self.sigma * self.epsilon <= REGIME_SMALL,
            short_against_lifetime: self.sigma * self.gamma <= REGIME_SMALL,
            packet_inside_window: self.sigma <= REGIME_SMALL * self.t_cal,
            large_gamma_t: self.gamma * self.t_cal >= LARGE_GAMMA_T,
        }
    }

    fn rate(&self) -> Complex64 {
        Complex64::new(0.5 * self.gamma, self.epsilon)
    }

    /// Width `w` of the regularized incident amplitude
    /// `f(v) = (2πw²)^{-1/4} e^{-v²/4w²}`, chosen so that `∫|f|² = 1` and
    /// `∫f = σ^{1/2}`.
    pub fn packet_width(&self) -> f64 {
        self.sigma / (8.0 * PI).sqrt()
    }

    /// Regularized incident amplitude `f(v)`.
    pub fn packet_amplitude(&self, v: f64) -> f64 {
        let w = self.packet_width();
        (2.0 * PI * w * w).powf(-0.25) * (-v * v / (4.0 * w * w)).exp()
    }

    /// `|f(v)|²`, a normal density of variance `w²`.
    pub fn packet_density(&self, v: f64) -> f64 {
        let w = self.packet_width();
        gaussian_pdf(v, 0.0, w * w)
    }
}

/// Excited amplitude with no incident photon, `β(0) = 1`.
pub fn beta_decay_closed(s: f64, p: &DecayModelParams) -> Result<Complex64> {
    if !(s >= 0.0) {
        return Err(domain(format!("decay amplitude needs s >= 0, got {s}")));
    }
    Ok((-p.rate() * s).exp())
}

/// Photon momentum density `|α_k(s)|²` after decay for time `s`.
///
/// Tends to the Lorentzian `(Γ/2π) / ((k-ε)² + Γ²/4)` as `s → ∞`.
pub fn photon_number_density(k: f64, s: f64, p: &DecayModelParams) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(domain(format!("photon density needs s >= 0, got {s}")));
    }
    let d = k - p.epsilon;
    let decay = (-0.5 * p.gamma * s).exp();
    let num = if s.is_infinite() {
        1.0
    } else {
        let half = 0.5 * d * s;
        // 1 + e^{-Γs} - 2e^{-Γs/2}cos(ds), written to stay accurate for small ds.
        (1.0 - decay).powi(2) + 4.0 * decay * half.sin().powi(2)
    };
    Ok(p.gamma / (2.0 * PI) * num / (d * d + 0.25 * p.gamma * p.gamma))
}

/// Limit `s → ∞` of [`photon_number_density`].
pub fn photon_lorentzian(k: f64, p: &DecayModelParams) -> f64 {
    let d = k - p.epsilon;
    p.gamma / (2.0 * PI) / (d * d + 0.25 * p.gamma * p.gamma)
}

/// Excited amplitude for a delta-like incident packet, `f ≈ σ^{1/2}δ`.
/// `s = 0` counts as just after the packet passed.
pub fn beta_excitation(s: f64, p: &DecayModelParams) -> Complex64 {
    if s < 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(0.0, -(p.gamma * p.sigma).sqrt()) * (-p.rate() * s).exp()
}

/// Excitation probability `Γσ Θ(s) e^{-Γs}`.
pub fn occupation(s: f64, p: &DecayModelParams) -> f64 {
    if s < 0.0 {
        0.0
    } else {
        p.gamma * p.sigma * (-p.gamma * s).exp()
    }
}

/// Excited amplitude for the regularized Gaussian packet, by quadrature of
/// `β(s) = -i√Γ e^{-(Γ/2+iε)s} ∫_{-∞}^{s} f(s') e^{(Γ/2+iε)s'} ds'`.
pub fn beta_excitation_packet(s: f64, p: &DecayModelParams) -> Result<Complex64> {
    let reach = PACKET_REACH * p.packet_width();
    if s <= -reach {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let c = p.rate();
    let hi = s.min(reach);
    let scale = p.sigma.sqrt();
    let opts = QuadOptions::with_abs_tol(1e-13 * scale);
    let bps = [0.0];
    let r = integrate_with_breakpoints(
        |v| (c * v).exp() * p.packet_amplitude(v),
        -reach,
        hi,
        &bps,
        opts,
    )?;
    Ok(Complex64::new(0.0, -p.gamma.sqrt()) * (-c * s).exp() * r.value)
}

/// `|β(s)|²` for the regularized packet.
pub fn occupation_packet(s: f64, p: &DecayModelParams) -> Result<f64> {
    Ok(beta_excitation_packet(s, p)?.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonVariant {
    DecayOnly,
    Excitation,
}

/// Photon position density split by origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionTerms {
    /// Undisturbed incident packet.
    pub incident: f64,
    /// Loss from the incident packet where the atom absorbed it.
    pub interference: f64,
    /// Re-emitted photon.
    pub tail: f64,
    pub total: f64,
}

impl PositionTerms {
    fn new(incident: f64, interference: f64, tail: f64) -> Self {
        Self {
            incident,
            interference,
            tail,
            total: incident + interference + tail,
        }
    }
}

/// Photon position density at `x` and elapsed time `s`.
///
/// Decay-only puts everything in `tail`. In the excitation variant the
/// delta-like interference term is regularized as `-Γσ Θ(x-x₀) |f(u)|²`,
/// `u = s - (x-x₀)`, which carries the same weight `Γσ`.
pub fn photon_position_density(x: f64, s: f64, p: &DecayModelParams, variant: PhotonVariant) -> PositionTerms {
    let d = x - p.x0;
    let u = s - d;
    match variant {
        PhotonVariant::DecayOnly => {
            let tail = if d > 0.0 && u >= 0.0 {
                p.gamma * (-p.gamma * u).exp()
            } else {
                0.0
            };
            PositionTerms::new(0.0, 0.0, tail)
        }
        PhotonVariant::Excitation => {
            let incident = p.packet_density(u);
            if d <= 0.0 {
                return PositionTerms::new(incident, 0.0, 0.0);
            }
            let gs = p.gamma * p.sigma;
            let interference = -gs * p.packet_density(u);
            let tail = if u >= 0.0 {
                gs * p.gamma * (-p.gamma * u).exp()
            } else {
                0.0
            };
            PositionTerms::new(incident, interference, tail)
        }
    }
}

/// `E[Θ(u+𝒯η) e^{-Γ(u+𝒯η)}]` over standard normal `η`.
fn smeared_exp_tail(u: f64, gamma: f64, t_cal: f64) -> f64 {
    if t_cal == 0.0 {
        return if u >= 0.0 { (-gamma * u).exp() } else { 0.0 };
    }
    let x = gamma * t_cal - u / t_cal;
    if x >= 0.0 {
        // e^{-Γu + (Γ𝒯)²/2} Φ(-x) = e^{-u²/2𝒯²} e^{x²/2} Φ(-x)
        (-0.5 * (u / t_cal).powi(2)).exp() * scaled_normal_tail(x)
    } else {
        (-gamma * u + 0.5 * (gamma * t_cal).powi(2)).exp() * normal_cdf_real(-x)
    }
}

/// Collapse-averaged excitation probability
/// `Γσ e^{-Γs} e^{(Γ𝒯)²/2} Φ(s/𝒯 - Γ𝒯)`.
pub fn occupation_collapsed(s: f64, p: &DecayModelParams) -> f64 {
    p.gamma * p.sigma * smeared_exp_tail(s, p.gamma, p.t_cal)
}

/// Large-`Γ𝒯` form of [`occupation_collapsed`]: `σ(2π𝒯²)^{-1/2} e^{-s²/2𝒯²}`.
pub fn occupation_collapsed_asymptotic(s: f64, p: &DecayModelParams) -> Result<f64> {
    if !(p.t_cal > 0.0) {
        return Err(domain("asymptotic occupation needs T_cal > 0"));
    }
    Ok(p.sigma * gaussian_pdf(s, 0.0, p.t_cal * p.t_cal))
}

/// Collapse-averaged photon position density.
///
/// The incident and interference terms use the packet density smeared over
/// `𝒯`, a normal of variance `w² + 𝒯²`; for `σ ≪ 𝒯` this is the
/// `(2π𝒯²)^{-1/2}` Gaussian.
pub fn photon_position_density_collapsed(x: f64, s: f64, p: &DecayModelParams) -> PositionTerms {
    let d = x - p.x0;
    let u = s - d;
    let w = p.packet_width();
    let g = gaussian_pdf(u, 0.0, w * w + p.t_cal * p.t_cal);
    if d <= 0.0 {
        return PositionTerms::new(g, 0.0, 0.0);
    }
    let gs = p.gamma * p.sigma;
    PositionTerms::new(g, -gs * g, gs * p.gamma * smeared_exp_tail(u, p.gamma, p.t_cal))
}

/// Large-`Γ𝒯` form of the collapsed position density:
/// `(2π𝒯²)^{-1/2} e^{-u²/2𝒯²} (1 + Γσ Θ(x-x₀) u/(Γ𝒯²))`.
pub fn photon_position_density_collapsed_asymptotic(x: f64, s: f64, p: &DecayModelParams) -> Result<f64> {
    if !(p.t_cal > 0.0) {
        return Err(domain("asymptotic position density needs T_cal > 0"));
    }
    let d = x - p.x0;
    let u = s - d;
    let g = gaussian_pdf(u, 0.0, p.t_cal * p.t_cal);
    let gs = p.gamma * p.sigma;
    let bracket = if d > 0.0 {
        (1.0 - gs) + gs * (1.0 + u / (p.gamma * p.t_cal * p.t_cal))
    } else {
        1.0
    };
    Ok(g * bracket)
}

/// Uniform photon momentum grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KGrid {
    k_min: f64,
    k_max: f64,
    n_modes: usize,
    dt: f64,
}

impl KGrid {
    /// Validates the grid against `p`: centred on `ε`, half-width at least
    /// `20Γ`, and `dt (k_max - k_min) ≤ 0.5`.
    pub fn new(k_min: f64, k_max: f64, n_modes: usize, dt: f64, p: &DecayModelParams) -> Result<Self> {
        if n_modes < 64 {
            return Err(invalid("n_modes", format!("need at least 64, got {n_modes}")));
        }
        if !(k_min.is_finite() && k_max.is_finite() && k_max > k_min) {
            return Err(invalid("k_min, k_max", format!("need k_min < k_max, got [{k_min}, {k_max}]")));
        }
        check_positive("dt", dt)?;
        let width = k_max - k_min;
        let spacing = width / (n_modes - 1) as f64;
        let centre = 0.5 * (k_min + k_max);
        if (centre - p.epsilon).abs() > 0.5 * spacing {
            return Err(invalid(
                "k_min, k_max",
                format!("grid centre {centre} is not on epsilon = {}", p.epsilon),
            ));
        }
        if 0.5 * width < 20.0 * p.gamma {
            return Err(invalid(
                "k_min, k_max",
                format!("half-width {} is below 20 Gamma = {}", 0.5 * width, 20.0 * p.gamma),
            ));
        }
        if dt * width > 0.5 {
            return Err(domain(format!(
                "stability bound violated: dt * (k_max - k_min) = {} > 0.5",
                dt * width
            )));
        }
        Ok(Self {
            k_min,
            k_max,
            n_modes,
            dt,
        })
    }

    /// Grid of half-width `half_width_in_gamma · Γ` about `ε`. A `dt` of
    /// `None` picks `0.05 / half-width`.
    pub fn centred(p: &DecayModelParams, half_width_in_gamma: f64, n_modes: usize, dt: Option<f64>) -> Result<Self> {
        let hw = half_width_in_gamma * p.gamma;
        let dt = dt.unwrap_or(DEFAULT_STEP_FRACTION / hw);
        Self::new(p.epsilon - hw, p.epsilon + hw, n_modes, dt, p)
    }

    /// 4096 modes over `ε ± 40Γ`.
    pub fn default_for(p: &DecayModelParams) -> Result<Self> {
        Self::centred(p, DEFAULT_HALF_WIDTH, DEFAULT_MODES, None)
    }

    pub fn k_min(&self) -> f64 {
        self.k_min
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spacing(&self) -> f64 {
        (self.k_max - self.k_min) / (self.n_modes - 1) as f64
    }

    /// Time after which a wave packet on this grid revives, `2π/Δk`.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing()
    }

    pub fn momenta(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_modes).map(|i| self.k_min + h * i as f64).collect()
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_modes];
        w[0] *= 0.5;
        w[self.n_modes - 1] *= 0.5;
        w
    }
}

/// Initial condition for [`integrate_kgrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KGridStart {
    /// Atom excited, field empty, at `s = 0`.
    DecayOnly,
    /// Atom in its ground state and the regularized packet `f` approaching;
    /// integration starts at `s = -lead`.
    Incident { lead: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KGridSolution {
    /// `|β(s)|²` at every `sample_every`-th step, endpoints included.
    pub occupation: TimeSeries<f64>,
    pub momenta: Vec<f64>,
    /// Photon amplitudes at the final time.
    pub alpha: Vec<Complex64>,
    pub beta: Complex64,
    pub steps: usize,
    pub dt: f64,
    /// `|P(end) - P(start)| / duration`.
    pub drift_rate: f64,
}

/// Integrate the atom-field equations on a momentum grid.
///
/// Works in a frame rotating at `ε` with a fixed-step integrating-factor
/// RK4 (free mode rotation exact, coupling to fourth order); the step is the
/// largest that divides the duration and does not exceed `grid.dt()`.
/// Errors if the duration exceeds the grid recurrence time or if total
/// probability drifts by more than `1e-8` per unit time.
pub fn integrate_kgrid(
    p: &DecayModelParams,
    grid: &KGrid,
    start: KGridStart,
    s_end: f64,
    sample_every: usize,
) -> Result<KGridSolution> {
    let s0 = match start {
        KGridStart::DecayOnly => 0.0,
        KGridStart::Incident { lead } => {
            check_positive("lead", lead)?;
            -lead
        }
    };
    if !(s_end > s0) || !s_end.is_finite() {
        return Err(invalid("s_end", format!("must be finite and > {s0}, got {s_end}")));
    }
    let duration = s_end - s0;
    if duration > grid.recurrence_time() {
        return Err(domain(format!(
            "duration {duration} exceeds the grid recurrence time {}",
            grid.recurrence_time()
        )));
    }
    let sample_every = sample_every.max(1);
    let steps = (duration / grid.dt).ceil() as usize;
    let dt = duration / steps as f64;

    let ks = grid.momenta();
    let wk = grid.weights();
    let g = p.coupling();
    let detune: Vec<f64> = ks.iter().map(|k| k - p.epsilon).collect();
    let emit: Vec<Complex64> = ks.iter().map(|k| Complex64::from_polar(g, -k * p.x0)).collect();
    // Absorption weights fold in the trapezoid rule.
    let absorb: Vec<Complex64> = emit.iter().zip(&wk).map(|(e, w)| e.conj() * *w).collect();

    // Rotating-frame amplitudes a_k = α_k e^{iεs}, b = β e^{iεs}.
    let rot0 = Complex64::from_polar(1.0, p.epsilon * s0);
    let (mut a, mut b) = match start {
        KGridStart::DecayOnly => (vec![Complex64::new(0.0, 0.0); ks.len()], Complex64::new(1.0, 0.0)),
        KGridStart::Incident { .. } => {
            let w = p.packet_width();
            // Fourier transform of f(s0 - x + x₀), with ⟨x|k⟩ = e^{ikx}/√(2π).
            let amp = (2.0 * PI * w * w).powf(-0.25) * 2.0 * w * PI.sqrt() / (2.0 * PI).sqrt();
            let a = ks
                .iter()
                .map(|&k| Complex64::from_polar(amp * (-(k * w).powi(2)).exp(), -k * (s0 + p.x0)) * rot0)
                .collect();
            (a, Complex64::new(0.0, 0.0))
        }
    };

    let total = |a: &[Complex64], b: Complex64| {
        let terms: Vec<f64> = a.iter().zip(&wk).map(|(x, w)| x.norm_sqr() * w).collect();
        pairwise_sum(&terms) + b.norm_sqr()
    };
    let p_start = total(&a, b);

    // Coupling part only; free rotation e^{-i(k-ε)h} is applied exactly.
    let minus_i = Complex64::new(0.0, -1.0);
    let coupling = |a: &[Complex64], b: Complex64, da: &mut [Complex64]| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..a.len() {
            da[i] = minus_i * emit[i] * b;
            acc += absorb[i] * a[i];
        }
        minus_i * acc
    };
    let half: Vec<Complex64> = detune.iter().map(|d| Complex64::from_polar(1.0, -d * 0.5 * dt)).collect();
    let full: Vec<Complex64> = half.iter().map(|h| h * h).collect();

    let n = ks.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut k1 = vec![zero; n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let mut samples = vec![(s0, b.norm_sqr())];
    for step in 1..=steps {
        let l1 = coupling(&a, b, &mut k1);
        for i in 0..n {
            tmp[i] = half[i] * (a[i] + k1[i] * (0.5 * dt));
        }
        let l2 = coupling(&tmp, b + l1 * (0.5 * dt), &mut k2);
        for i in 0..n {
            tmp[i] = half[i] * a[i] + k2[i] * (0.5 * dt);
        }
        let l3 = coupling(&tmp, b + l2 * (0.5 * dt), &mut k3);
        for i in 0..n {
            tmp[i] = full[i] * a[i] + half[i] * k3[i] * dt;
        }
        let l4 = coupling(&tmp, b + l3 * dt, &mut k4);
        for i in 0..n {
            a[i] = full[i] * (a[i] + k1[i] * (dt / 6.0)) + half[i] * (k2[i] + k3[i]) * (dt / 3.0) + k4[i] * (dt / 6.0);
        }
        b += (l1 + (l2 + l3) * 2.0 + l4) * (dt / 6.0);
        if step % sample_every == 0 || step == steps {
            let s = if step == steps { s_end } else { s0 + dt * step as f64 };
            samples.push((s, b.norm_sqr()));
        }
    }

    let drift_rate = (total(&a, b) - p_start).abs() / duration;
    if drift_rate > KGRID_CONSERVATION_TOL {
        return Err(Error::Contract(format!(
            "k-grid probability drift {drift_rate:.3e} per unit time exceeds {KGRID_CONSERVATION_TOL:e}; reduce dt"
        )));
    }
    let back = Complex64::from_polar(1.0, -p.epsilon * s_end);
    Ok(KGridSolution {
        occupation: TimeSeries::new(samples)?,
        momenta: ks,
        alpha: a.into_iter().map(|x| x * back).collect(),
        beta: b * back,
        steps,
        dt,
        drift_rate,
    })
}
