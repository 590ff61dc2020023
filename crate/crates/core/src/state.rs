//! Spectral data model: states expanded in the energy basis, Hermitian
//! observables on that basis, and unit-normalized energy spectra.
//!
//! Amplitudes are stored as `(log |c|, arg c)` pairs. Collapse factors of the
//! form `exp(-λt (E - Ê)²)` underflow `f64` long before the dynamics becomes
//! uninteresting, so norms are always formed by log-sum-exp and linear
//! amplitudes are only materialized after rescaling by the largest modulus.

use std::cmp::Ordering;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{domain, invalid, Error, Result};
use crate::math::{log_sum_exp, pairwise_sum, wrap_phase};

/// An energy eigenvalue together with its degeneracy label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLevel {
    pub energy: f64,
    pub degeneracy: u32,
}

impl EnergyLevel {
    pub fn new(energy: f64, degeneracy: u32) -> Result<Self> {
        if !energy.is_finite() {
            return Err(invalid("energy", format!("{energy} is not finite")));
        }
        Ok(Self { energy, degeneracy })
    }

    /// Nondegenerate level (`j = 0`).
    pub fn simple(energy: f64) -> Result<Self> {
        Self::new(energy, 0)
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then(self.degeneracy.cmp(&other.degeneracy))
    }
}

/// One amplitude `⟨E, j|ψ⟩ = exp(log_magnitude + i phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub level: EnergyLevel,
    pub log_magnitude: f64,
    pub phase: f64,
}

impl Component {
    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.log_magnitude.exp(), self.phase)
    }
}

/// A state vector in the energy basis, components in canonical
/// `(energy, degeneracy)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    components: Vec<Component>,
    normalized: bool,
}

/// Squared norm in both log and linear form. The linear value may
/// underflow to zero while the log value stays finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredNorm {
    pub log: f64,
    pub linear: f64,
}

impl SpectralState {
    /// Build from components; they are sorted into canonical order.
    pub fn from_components(mut components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyState);
        }
        for c in &components {
            if !c.level.energy.is_finite() {
                return Err(invalid("energy", "non-finite energy level"));
            }
            if c.log_magnitude.is_nan() || c.log_magnitude == f64::INFINITY || !c.phase.is_finite() {
                return Err(invalid("amplitude", "amplitude must be finite"));
            }
        }
        components.sort_by(|a, b| a.level.canonical_cmp(&b.level));
        if components
            .windows(2)
            .any(|w| w[0].level.canonical_cmp(&w[1].level) == Ordering::Equal)
        {
            return Err(invalid("levels", "duplicate (energy, degeneracy) pair"));
        }
        if components.iter().all(|c| c.log_magnitude == f64::NEG_INFINITY) {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            components,
            normalized: false,
        })
    }

    /// Build from linear complex amplitudes.
    pub fn from_amplitudes(levels: &[EnergyLevel], amplitudes: &[Complex64]) -> Result<Self> {
        if levels.len() != amplitudes.len() {
            return Err(invalid(
                "amplitudes",
                format!("{} levels but {} amplitudes", levels.len(), amplitudes.len()),
            ));
        }
        let components = levels
            .iter()
            .zip(amplitudes)
            .map(|(&level, a)| Component {
                level,
                log_magnitude: a.norm().ln(),
                phase: if a.norm() == 0.0 { 0.0 } else { a.arg() },
            })
            .collect();
        Self::from_components(components)
    }

    /// Nondegenerate state with real, nonnegative amplitudes `√wᵢ` on
    /// `energies`.
    pub fn from_weights(energies: &[f64], weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights", "weights must be finite and nonnegative"));
        }
        let levels = energies
            .iter()
            .map(|&e| EnergyLevel::simple(e))
            .collect::<Result<Vec<_>>>()?;
        let amps: Vec<Complex64> = weights.iter().map(|w| Complex64::new(w.sqrt(), 0.0)).collect();
        Self::from_amplitudes(&levels, &amps)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn levels(&self) -> Vec<EnergyLevel> {
        self.components.iter().map(|c| c.level).collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Replace every component through `f`, keeping the level order.
    /// The result is flagged unnormalized.
    pub(crate) fn map_components(&self, mut f: impl FnMut(&Component) -> Component) -> Result<Self> {
        let components: Vec<Component> = self.components.iter().map(&mut f).collect();
        if components.iter().all(|c| c.log_magnitude == f64::NEG_INFINITY) {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            components,
            normalized: false,
        })
    }

    /// Unit-norm copy (log-magnitudes shifted by `-½ ln‖ψ‖²`).
    pub fn normalized(&self) -> Result<Self> {
        let norm = squared_norm(self)?;
        if norm.log == f64::NEG_INFINITY {
            return Err(Error::ZeroNorm);
        }
        let shift = 0.5 * norm.log;
        let components = self
            .components
            .iter()
            .map(|c| Component {
                log_magnitude: c.log_magnitude - shift,
                ..*c
            })
            .collect();
        Ok(Self {
            components,
            normalized: true,
        })
    }

    /// Linear amplitudes rescaled so the largest modulus is 1, together with
    /// the log of the removed scale.
    pub fn scaled_amplitudes(&self) -> (f64, Vec<Complex64>) {
        let max = self
            .components
            .iter()
            .map(|c| c.log_magnitude)
            .fold(f64::NEG_INFINITY, f64::max);
        let amps = self
            .components
            .iter()
            .map(|c| Complex64::from_polar((c.log_magnitude - max).exp(), c.phase))
            .collect();
        (max, amps)
    }

    /// Linear amplitudes (may underflow).
    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.components.iter().map(Component::amplitude).collect()
    }

    /// Unitary Schrödinger evolution `c_E ↦ c_E e^{-iEt}`.
    pub fn schrodinger(&self, t: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| Component {
                    phase: wrap_phase(c.phase - c.level.energy * t),
                    ..*c
                })
                .collect(),
            normalized: self.normalized,
        }
    }

    /// Same levels, phases shifted by a constant and moduli scaled by
    /// `exp(log_scale)`.
    pub fn rescaled(&self, log_scale: f64, phase_shift: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| Component {
                    level: c.level,
                    log_magnitude: c.log_magnitude + log_scale,
                    phase: wrap_phase(c.phase + phase_shift),
                })
                .collect(),
            normalized: false,
        }
    }
}

/// `Σ |cᵢ|²`, computed by log-sum-exp over `2 log|cᵢ|`.
pub fn squared_norm(state: &SpectralState) -> Result<SquaredNorm> {
    if state.is_empty() {
        return Err(Error::EmptyState);
    }
    let logs: Vec<f64> = state.components.iter().map(|c| 2.0 * c.log_magnitude).collect();
    let log = log_sum_exp(&logs);
    Ok(SquaredNorm {
        log,
        linear: log.exp(),
    })
}

/// Hermitian matrix on an ordered energy basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableMatrix {
    basis: Vec<EnergyLevel>,
    entries: Array2<Complex64>,
}

const HERMITIAN_TOL: f64 = 1e-12;

impl ObservableMatrix {
    pub fn new(basis: Vec<EnergyLevel>, entries: Array2<Complex64>) -> Result<Self> {
        let n = basis.len();
        if entries.dim() != (n, n) {
            return Err(invalid(
                "observable",
                format!("matrix is {:?} but basis has {n} levels", entries.dim()),
            ));
        }
        let scale = entries.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        for i in 0..n {
            for j in 0..n {
                if (entries[[i, j]] - entries[[j, i]].conj()).norm() > HERMITIAN_TOL * scale {
                    return Err(invalid("observable", format!("entry ({i}, {j}) breaks hermiticity")));
                }
            }
        }
        Ok(Self { basis, entries })
    }

    /// Diagonal observable `F(H)` on the given levels.
    pub fn diagonal(basis: Vec<EnergyLevel>, f: impl Fn(&EnergyLevel) -> f64) -> Self {
        let n = basis.len();
        let mut entries = Array2::zeros((n, n));
        for (i, level) in basis.iter().enumerate() {
            entries[[i, i]] = Complex64::new(f(level), 0.0);
        }
        Self { basis, entries }
    }

    pub fn identity(basis: Vec<EnergyLevel>) -> Self {
        Self::diagonal(basis, |_| 1.0)
    }

    /// The energy operator `H`.
    pub fn hamiltonian(basis: Vec<EnergyLevel>) -> Self {
        Self::diagonal(basis, |l| l.energy)
    }

    /// Projector onto the levels with the given energy (all degeneracy labels).
    pub fn energy_projector(basis: Vec<EnergyLevel>, energy: f64) -> Self {
        Self::diagonal(basis, |l| if l.energy == energy { 1.0 } else { 0.0 })
    }

    /// `(|i⟩⟨j| + |j⟩⟨i|)/2`, whose expectation is `Re(ψᵢ ψⱼ*)`.
    pub fn coherence_real(basis: Vec<EnergyLevel>, i: usize, j: usize) -> Self {
        let n = basis.len();
        let mut entries = Array2::zeros((n, n));
        entries[[i, j]] += Complex64::new(0.5, 0.0);
        entries[[j, i]] += Complex64::new(0.5, 0.0);
        Self { basis, entries }
    }

    /// `i(|i⟩⟨j| - |j⟩⟨i|)/2`, whose expectation is `Im(ψᵢ ψⱼ*)`.
    pub fn coherence_imag(basis: Vec<EnergyLevel>, i: usize, j: usize) -> Self {
        let n = basis.len();
        let mut entries = Array2::zeros((n, n));
        if i != j {
            entries[[i, j]] = Complex64::new(0.0, 0.5);
            entries[[j, i]] = Complex64::new(0.0, -0.5);
        }
        Self { basis, entries }
    }

    pub fn basis(&self) -> &[EnergyLevel] {
        &self.basis
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }
}

/// `⟨ψ|A|ψ⟩ / ⟨ψ|ψ⟩` for a Hermitian observable.
pub fn expectation(state: &SpectralState, obs: &ObservableMatrix) -> Result<f64> {
    if state.is_empty() {
        return Err(Error::EmptyState);
    }
    if obs.basis.len() != state.len()
        || obs
            .basis
            .iter()
            .zip(state.components())
            .any(|(b, c)| *b != c.level)
    {
        return Err(Error::BasisMismatch);
    }
    let (_, amps) = state.scaled_amplitudes();
    let n = amps.len();
    let mut den_terms = Vec::with_capacity(n);
    let mut num_re = Vec::with_capacity(n);
    let mut num_im = Vec::with_capacity(n);
    for i in 0..n {
        let ci = amps[i];
        den_terms.push((ci.conj() * ci).re);
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let a = obs.entries[[i, j]];
            if a != Complex64::new(0.0, 0.0) {
                row += a * amps[j];
            }
        }
        let term = ci.conj() * row;
        num_re.push(term.re);
        num_im.push(term.im);
    }
    let den = pairwise_sum(&den_terms);
    if den == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let re = pairwise_sum(&num_re) / den;
    let im = pairwise_sum(&num_im) / den;
    debug_assert!(
        im.abs() <= 1e-10 * re.abs().max(1.0),
        "imaginary expectation {im} for a Hermitian observable"
    );
    Ok(re)
}

/// Unit-normalized distribution of weights over distinct energies.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpectrum {
    points: Vec<(f64, f64)>,
}

const SPECTRUM_SUM_TOL: f64 = 1e-12;

impl DiscreteSpectrum {
    /// Validate a spectrum: strictly increasing finite energies, nonnegative
    /// weights summing to one.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("spectrum", "no points"));
        }
        if points.iter().any(|(e, w)| !e.is_finite() || !w.is_finite() || *w < 0.0) {
            return Err(invalid("spectrum", "energies must be finite and weights nonnegative"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(invalid("spectrum", "energies must be strictly increasing"));
        }
        let total = pairwise_sum(&points.iter().map(|p| p.1).collect::<Vec<_>>());
        if (total - 1.0).abs() > SPECTRUM_SUM_TOL {
            return Err(invalid("spectrum", format!("weights sum to {total}, not 1")));
        }
        Ok(Self { points })
    }

    /// Normalize arbitrary nonnegative weights and build the spectrum.
    pub fn from_unnormalized(points: Vec<(f64, f64)>) -> Result<Self> {
        let total = pairwise_sum(&points.iter().map(|p| p.1).collect::<Vec<_>>());
        if !(total > 0.0) || !total.is_finite() {
            return Err(invalid("spectrum", "weights must have a positive finite sum"));
        }
        Self::new(points.into_iter().map(|(e, w)| (e, w / total)).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weight at an energy, zero off-support.
    pub fn weight_at(&self, energy: f64) -> f64 {
        self.points
            .binary_search_by(|p| p.0.total_cmp(&energy))
            .map(|i| self.points[i].1)
            .unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.points.iter().map(|(e, w)| e * w).collect::<Vec<_>>())
    }

    /// Zero-pad onto the union of both energy grids.
    pub fn pad_to_common(a: &Self, b: &Self) -> (Self, Self) {
        let mut grid: Vec<f64> = a.energies().chain(b.energies()).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let pad = |s: &Self| Self {
            points: grid.iter().map(|&e| (e, s.weight_at(e))).collect(),
        };
        (pad(a), pad(b))
    }
}

/// Energy distribution of a state: `Σⱼ |⟨E, j|ψ⟩|² / ‖ψ‖²`.
pub fn energy_distribution(state: &SpectralState) -> Result<DiscreteSpectrum> {
    let norm = squared_norm(state)?;
    if norm.log == f64::NEG_INFINITY {
        return Err(Error::ZeroNorm);
    }
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut group: Vec<f64> = Vec::new();
    let mut current = state.components[0].level.energy;
    let flush = |energy: f64, group: &mut Vec<f64>, points: &mut Vec<(f64, f64)>| {
        let w = (log_sum_exp(group) - norm.log).exp();
        points.push((energy, w));
        group.clear();
    };
    for c in &state.components {
        if c.level.energy != current {
            flush(current, &mut group, &mut points);
            current = c.level.energy;
        }
        group.push(2.0 * c.log_magnitude);
    }
    flush(current, &mut group, &mut points);
    // Rounding can leave the sum a few ulps off one.
    let total = pairwise_sum(&points.iter().map(|p| p.1).collect::<Vec<_>>());
    for p in &mut points {
        p.1 /= total;
    }
    DiscreteSpectrum::new(points).map_err(|e| domain(format!("energy distribution: {e}")))
}

/// Largest-weight energy and its weight.
pub fn dominant_energy(spectrum: &DiscreteSpectrum) -> (f64, f64) {
    spectrum
        .points()
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, p| if p.1 > best.1 { p } else { best })
}
