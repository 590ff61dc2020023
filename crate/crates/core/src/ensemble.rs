//! Ensemble statistics: Gaussian time-smearing, Monte Carlo ensemble
//! averages and the closed-form ensemble density matrix.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::engine::{sample_step, CollapseParams};
use crate::error::{domain, invalid, Error, Result};
use crate::math::mean_and_std_error;
use crate::quadrature::{integrate_with_breakpoints, GaussHermite, Integrand, QuadOptions};
use crate::rng::trajectory_rng;
use crate::state::{expectation, EnergyLevel, ObservableMatrix, SpectralState};

pub const DEFAULT_SMEARING_ORDER: usize = 64;

/// Half-width of the smearing window in units of `𝒯`.
pub const SMEAR_WINDOW: f64 = 8.0;

/// Tolerance of the adaptive fallback.
pub const ADAPTIVE_SMEAR_TOL: f64 = 1e-8;

/// Gaussian smearing of width `𝒯`: `f ↦ E_η[f(t - 𝒯η)]`, `η ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct SmearingKernel {
    width: f64,
    rule: Arc<GaussHermite>,
}

impl SmearingKernel {
    pub fn new(width: f64, order: usize) -> Result<Self> {
        if !(width >= 0.0) || !width.is_finite() {
            return Err(invalid("T_cal", format!("must be finite and >= 0, got {width}")));
        }
        if order < 8 || !order.is_multiple_of(2) {
            return Err(invalid("quadrature_order", format!("must be even and >= 8, got {order}")));
        }
        let mut rule = GaussHermite::new(order)?;
        // Nodes beyond the window carry < 1e-14 of the mass.
        let keep: Vec<usize> = (0..rule.order()).filter(|&i| rule.nodes[i].abs() <= SMEAR_WINDOW).collect();
        rule.nodes = keep.iter().map(|&i| rule.nodes[i]).collect();
        rule.weights = keep.iter().map(|&i| rule.weights[i]).collect();
        Ok(Self {
            width,
            rule: Arc::new(rule),
        })
    }

    pub fn with_default_order(width: f64) -> Result<Self> {
        Self::new(width, DEFAULT_SMEARING_ORDER)
    }

    /// Same rule, different width.
    pub fn with_width(&self, width: f64) -> Result<Self> {
        if !(width >= 0.0) || !width.is_finite() {
            return Err(invalid("T_cal", format!("must be finite and >= 0, got {width}")));
        }
        Ok(Self {
            width,
            rule: Arc::clone(&self.rule),
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Evaluation window `[t - 8𝒯, t + 8𝒯]`.
    pub fn window(&self, t: f64) -> (f64, f64) {
        (t - SMEAR_WINDOW * self.width, t + SMEAR_WINDOW * self.width)
    }

    /// Gauss–Hermite smear of a smooth function.
    pub fn smear<T: Integrand>(&self, mut f: impl FnMut(f64) -> T, t: f64) -> T {
        if self.width == 0.0 {
            return f(t);
        }
        let mut acc = T::zero();
        for (&eta, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            acc = acc + f(t - self.width * eta) * w;
        }
        acc
    }

    /// Fallible variant of [`smear`](Self::smear).
    pub fn try_smear<T: Integrand>(&self, mut f: impl FnMut(f64) -> Result<T>, t: f64) -> Result<T> {
        if self.width == 0.0 {
            return f(t);
        }
        let mut acc = T::zero();
        for (&eta, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            acc = acc + f(t - self.width * eta)? * w;
        }
        Ok(acc)
    }

    /// Adaptive smear for integrands with kinks or jumps at the given times.
    pub fn smear_adaptive<T: Integrand>(
        &self,
        mut f: impl FnMut(f64) -> T,
        t: f64,
        breakpoints: &[f64],
    ) -> Result<T> {
        if self.width == 0.0 {
            return Ok(f(t));
        }
        let w = self.width;
        let etas: Vec<f64> = breakpoints.iter().map(|&b| (t - b) / w).collect();
        let opts = QuadOptions {
            abs_tol: 0.01 * ADAPTIVE_SMEAR_TOL,
            rel_tol: 0.01 * ADAPTIVE_SMEAR_TOL,
            ..QuadOptions::default()
        };
        let r = integrate_with_breakpoints(
            |eta| f(t - w * eta) * crate::math::normal_pdf(eta),
            -SMEAR_WINDOW,
            SMEAR_WINDOW,
            &etas,
            opts,
        )?;
        if r.error > ADAPTIVE_SMEAR_TOL {
            return Err(Error::Contract(format!(
                "adaptive smear at t = {t}: error estimate {:.3e} above {ADAPTIVE_SMEAR_TOL:e}",
                r.error
            )));
        }
        Ok(r.value)
    }

    /// Smear sampled data (linear interpolation; no extrapolation).
    pub fn smear_series<T: Integrand>(&self, series: &TimeSeries<T>, t: f64) -> Result<T> {
        let (lo, hi) = self.window(t);
        let (first, last) = series.span();
        if lo < first || hi > last {
            return Err(domain(format!(
                "series covers [{first}, {last}] but smearing at t = {t} needs [{lo}, {hi}]"
            )));
        }
        self.try_smear(|s| series.interpolate(s), t)
    }
}

/// Sampled function of time, strictly increasing in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    samples: Vec<(f64, T)>,
    uniform_step: Option<f64>,
}

impl<T: Integrand> TimeSeries<T> {
    pub fn new(samples: Vec<(f64, T)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("series", "need at least two samples"));
        }
        if samples.iter().any(|s| !s.0.is_finite()) || samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(invalid("series", "times must be finite and strictly increasing"));
        }
        let h = samples[1].0 - samples[0].0;
        let uniform = samples
            .windows(2)
            .all(|w| ((w[1].0 - w[0].0) - h).abs() <= 1e-12 * h.abs().max(samples[0].0.abs()));
        Ok(Self {
            samples,
            uniform_step: uniform.then_some(h),
        })
    }

    pub fn samples(&self) -> &[(f64, T)] {
        &self.samples
    }

    pub fn uniform_step(&self) -> Option<f64> {
        self.uniform_step
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    pub fn interpolate(&self, t: f64) -> Result<T> {
        let (first, last) = self.span();
        if !(t >= first && t <= last) {
            return Err(domain(format!("t = {t} outside series span [{first}, {last}]")));
        }
        let n = self.samples.len();
        let i = match self.uniform_step {
            Some(h) => (((t - first) / h).floor() as usize).min(n - 2),
            None => self.samples.partition_point(|s| s.0 <= t).clamp(1, n - 1) - 1,
        };
        let (t0, y0) = self.samples[i];
        let (t1, y1) = self.samples[i + 1];
        let a = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        Ok(y0 * (1.0 - a) + y1 * a)
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Trajectories dropped because their state had zero norm.
    pub excluded: usize,
}

/// Normalized states at time `t` for trajectories `0..n_traj`, in index
/// order. `None` marks a trajectory whose state lost all norm.
pub fn ensemble_states(
    state0: &SpectralState,
    params: &CollapseParams,
    t: f64,
    n_traj: u64,
    master_seed: u64,
) -> Result<Vec<Option<SpectralState>>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("t must be finite and >= 0, got {t}")));
    }
    let start = state0.normalized()?;
    (0..n_traj)
        .into_par_iter()
        .map(|i| {
            if t == 0.0 {
                return Ok(Some(start.clone()));
            }
            let mut rng = trajectory_rng(master_seed, i);
            match sample_step(&start, params, t, &mut rng) {
                Ok((_, s)) => Ok(Some(s)),
                Err(Error::ZeroNorm) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

fn estimate(values: &[f64], excluded: usize) -> McEstimate {
    let (mean, std_error) = mean_and_std_error(values);
    McEstimate {
        mean,
        std_error,
        excluded,
    }
}

/// Ensemble average of `⟨A⟩` over collapse trajectories at time `t`.
pub fn ensemble_expectation_mc(
    state0: &SpectralState,
    params: &CollapseParams,
    t: f64,
    obs: &ObservableMatrix,
    n_traj: u64,
    master_seed: u64,
) -> Result<McEstimate> {
    if n_traj < 2 {
        return Err(invalid("n_traj", "need at least two trajectories"));
    }
    let states = ensemble_states(state0, params, t, n_traj, master_seed)?;
    let values = states
        .iter()
        .flatten()
        .map(|s| expectation(s, obs))
        .collect::<Result<Vec<f64>>>()?;
    let excluded = states.len() - values.len();
    if values.len() < 2 {
        return Err(Error::ZeroNorm);
    }
    Ok(estimate(&values, excluded))
}

/// Complex matrix in an energy basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub basis: Vec<EnergyLevel>,
    pub entries: Array2<Complex64>,
}

impl DensityMatrix {
    pub fn trace(&self) -> Complex64 {
        self.entries.diag().iter().sum()
    }
}

/// `ρ_{E'E} = e^{-λt(E'-E)²/2} ψ_{E'}(t) ψ_E(t)*` with `ψ(t)` the unitary
/// evolution of the normalized initial state.
pub fn ensemble_density_matrix(state0: &SpectralState, params: &CollapseParams, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("t must be finite and >= 0, got {t}")));
    }
    let evolved = state0.normalized()?.schrodinger(t);
    let psi = evolved.amplitudes();
    let mag: Vec<f64> = evolved.components().iter().map(|c| c.log_magnitude.exp()).collect();
    let basis = state0.levels();
    let n = basis.len();
    let lt = params.lambda() * t;
    let entries = Array2::from_shape_fn((n, n), |(a, b)| {
        if a == b {
            // Diagonal depends only on |c_E|, so it is exactly time-invariant.
            return Complex64::new(mag[a] * mag[a], 0.0);
        }
        let d = basis[a].energy - basis[b].energy;
        let damp = if d == 0.0 { 1.0 } else { (-0.5 * lt * d * d).exp() };
        psi[a] * psi[b].conj() * damp
    });
    Ok(DensityMatrix { basis, entries })
}

/// Entry-wise Monte Carlo estimate of the ensemble density matrix from
/// normalized projectors, with standard errors of the real and imaginary
/// parts.
pub struct DensityMatrixEstimate {
    pub mean: DensityMatrix,
    pub std_error_re: Array2<f64>,
    pub std_error_im: Array2<f64>,
    pub excluded: usize,
}

pub fn ensemble_density_matrix_mc(
    state0: &SpectralState,
    params: &CollapseParams,
    t: f64,
    n_traj: u64,
    master_seed: u64,
) -> Result<DensityMatrixEstimate> {
    if n_traj < 2 {
        return Err(invalid("n_traj", "need at least two trajectories"));
    }
    let states = ensemble_states(state0, params, t, n_traj, master_seed)?;
    let amps: Vec<Vec<Complex64>> = states.iter().flatten().map(|s| s.amplitudes()).collect();
    let excluded = states.len() - amps.len();
    if amps.len() < 2 {
        return Err(Error::ZeroNorm);
    }
    let basis = state0.levels();
    let n = basis.len();
    let mut entries = Array2::zeros((n, n));
    let mut se_re = Array2::zeros((n, n));
    let mut se_im = Array2::zeros((n, n));
    for a in 0..n {
        for b in 0..n {
            let prods: Vec<Complex64> = amps.iter().map(|v| v[a] * v[b].conj()).collect();
            let re: Vec<f64> = prods.iter().map(|z| z.re).collect();
            let im: Vec<f64> = prods.iter().map(|z| z.im).collect();
            let (mr, sr) = mean_and_std_error(&re);
            let (mi, si) = mean_and_std_error(&im);
            entries[[a, b]] = Complex64::new(mr, mi);
            se_re[[a, b]] = sr;
            se_im[[a, b]] = si;
        }
    }
    Ok(DensityMatrixEstimate {
        mean: DensityMatrix { basis, entries },
        std_error_re: se_re,
        std_error_im: se_im,
        excluded,
    })
}

/// Smeared subsystem expectation `E_η[⟨ψ₁, t - 𝒯η|V₁|ψ₁, t - 𝒯η⟩]`.
pub fn subsystem_expectation(
    state1_fn: impl Fn(f64) -> Result<SpectralState>,
    obs1: &ObservableMatrix,
    t: f64,
    kernel: &SmearingKernel,
) -> Result<f64> {
    kernel.try_smear(|tau| expectation(&state1_fn(tau)?, obs1), t)
}
