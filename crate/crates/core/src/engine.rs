//! Nonunitary collapse evolution and the stochastic record process `B(t)`.
//!
//! Along a record path each energy component picks up the Schrödinger phase
//! `-E t` and the Gaussian filter `exp(-(B - 2λtE)² / 4λt)`. The record law
//! is the Gaussian mixture `ΔB ~ Σ ρ(E) N(2λΔt E, λΔt)`, which
//! [`sample_step`] draws from exactly, so no step-size error enters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain, invalid, Result};
use crate::math::{log_sum_exp, wrap_phase};
use crate::rng::trajectory_rng;
use crate::state::{energy_distribution, Component, DiscreteSpectrum, SpectralState};

/// Collapse rate `λ` in energy⁻²·time⁻¹ (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseParams {
    lambda: f64,
}

impl CollapseParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid("lambda", format!("must be finite and > 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Smearing width `𝒯 = √(λt)`.
    pub fn smearing_width(&self, t: f64) -> f64 {
        (self.lambda * t).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub seed: u64,
    pub index: u64,
}

/// Apply phase `-E dt` and log-magnitude `-(ΔB - 2λ dt E)² / (4λ dt)` to every
/// component.
fn filter(state: &SpectralState, lambda: f64, dt: f64, db: f64) -> Result<SpectralState> {
    let two_ldt = 2.0 * lambda * dt;
    let four_ldt = 4.0 * lambda * dt;
    state.map_components(|c| {
        let e = c.level.energy;
        let r = db - two_ldt * e;
        Component {
            level: c.level,
            log_magnitude: c.log_magnitude - r * r / four_ldt,
            phase: wrap_phase(c.phase - e * dt),
        }
    })
}

/// `⟨E,j|ψ,t⟩_B` from `⟨E,j|ψ,0⟩` with `B(0) = 0`. Unnormalized.
pub fn evolve(state0: &SpectralState, params: &CollapseParams, t: f64, b: f64) -> Result<SpectralState> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("evolve: t must be finite and >= 0, got {t}")));
    }
    if !b.is_finite() {
        return Err(domain("evolve: B must be finite"));
    }
    if t == 0.0 {
        return Ok(state0.clone());
    }
    filter(state0, params.lambda, t, b)
}

/// Evolve from `(t0, B(t0))` to `(t, B(t))`. Only `t - t0` and the record
/// increment enter.
pub fn evolve_from(
    state_t0: &SpectralState,
    params: &CollapseParams,
    t0: f64,
    t: f64,
    b_t0: f64,
    b_t: f64,
) -> Result<SpectralState> {
    if !(t0 >= 0.0) || !(t > t0) || !t.is_finite() {
        return Err(domain(format!("evolve_from: need t > t0 >= 0, got t0 = {t0}, t = {t}")));
    }
    if !b_t0.is_finite() || !b_t.is_finite() {
        return Err(domain("evolve_from: B values must be finite"));
    }
    filter(state_t0, params.lambda, t - t0, b_t - b_t0)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(domain(format!("time step must be finite and > 0, got {dt}")));
    }
    Ok(())
}

/// `ln P(ΔB)` for the mixture `Σ ρ(E) N(2λdt E, λdt)`.
fn log_record_density(rho: &DiscreteSpectrum, lambda: f64, dt: f64, db: f64) -> f64 {
    let var = lambda * dt;
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    let terms: Vec<f64> = rho
        .points()
        .iter()
        .map(|&(e, w)| {
            let r = db - 2.0 * var * e;
            w.ln() - r * r / (2.0 * var)
        })
        .collect();
    log_norm + log_sum_exp(&terms)
}

/// Conditional density of the record increment `ΔB` over `dt`, evaluated on
/// `db_grid`.
pub fn record_marginal_density(
    state_t0: &SpectralState,
    params: &CollapseParams,
    dt: f64,
    db_grid: &[f64],
) -> Result<Vec<f64>> {
    check_dt(dt)?;
    let rho = energy_distribution(state_t0)?;
    Ok(db_grid
        .iter()
        .map(|&db| log_record_density(&rho, params.lambda, dt, db).exp())
        .collect())
}

/// Draw an index from a discrete distribution by inverse CDF.
fn sample_index<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        if w > 0.0 {
            last = i;
        }
        if u < acc {
            return i;
        }
    }
    last
}

/// Draw `ΔB` over `dt` from the exact mixture law, then evolve the state.
/// The returned state is normalized.
pub fn sample_step<R: Rng + ?Sized>(
    state_t0: &SpectralState,
    params: &CollapseParams,
    dt: f64,
    rng: &mut R,
) -> Result<(f64, SpectralState)> {
    check_dt(dt)?;
    let rho = energy_distribution(state_t0)?;
    let e = rho.points()[sample_index(rho.weights(), rng)].0;
    let var = params.lambda * dt;
    let z: f64 = StandardNormal.sample(rng);
    let db = 2.0 * var * e + var.sqrt() * z;
    let next = filter(state_t0, params.lambda, dt, db)?.normalized()?;
    Ok((db, next))
}

pub const DEFAULT_COLLAPSE_THRESHOLD: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseStatus {
    pub collapsed: bool,
    pub energy: Option<f64>,
    pub max_weight: f64,
}

/// Collapsed iff one energy carries at least `threshold` of the weight.
pub fn collapse_diagnostic(state: &SpectralState, threshold: f64) -> Result<CollapseStatus> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid("threshold", format!("must lie in (0, 1), got {threshold}")));
    }
    let rho = energy_distribution(state)?;
    let (energy, max_weight) = crate::state::dominant_energy(&rho);
    let collapsed = max_weight >= threshold;
    Ok(CollapseStatus {
        collapsed,
        energy: collapsed.then_some(energy),
        max_weight,
    })
}

/// One realized trajectory and the normalized state at its last time.
#[derive(Debug, Clone)]
pub struct TrajectoryRun {
    pub trajectory: Trajectory,
    pub final_state: SpectralState,
}

fn check_schedule(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(invalid("schedule", "no sample times"));
    }
    let mut prev = 0.0;
    for &t in times {
        if !(t > prev) || !t.is_finite() {
            return Err(invalid("schedule", "times must be finite, positive and strictly increasing"));
        }
        prev = t;
    }
    Ok(())
}

/// Run one trajectory from `t = 0, B = 0` through the given times.
pub fn run_trajectory(
    state0: &SpectralState,
    params: &CollapseParams,
    times: &[f64],
    master_seed: u64,
    index: u64,
) -> Result<TrajectoryRun> {
    check_schedule(times)?;
    let mut rng = trajectory_rng(master_seed, index);
    let mut state = state0.normalized()?;
    let mut points = Vec::with_capacity(times.len() + 1);
    points.push(TrajectoryPoint { t: 0.0, b: 0.0 });
    let (mut t, mut b) = (0.0, 0.0);
    for &next_t in times {
        let (db, next) = sample_step(&state, params, next_t - t, &mut rng)?;
        t = next_t;
        b += db;
        state = next;
        points.push(TrajectoryPoint { t, b });
    }
    Ok(TrajectoryRun {
        trajectory: Trajectory {
            points,
            seed: master_seed,
            index,
        },
        final_state: state,
    })
}

/// Trajectories `0..n`, run in parallel and returned in index order.
pub fn run_trajectories(
    state0: &SpectralState,
    params: &CollapseParams,
    times: &[f64],
    master_seed: u64,
    n: u64,
) -> Result<Vec<TrajectoryRun>> {
    check_schedule(times)?;
    (0..n)
        .into_par_iter()
        .map(|i| run_trajectory(state0, params, times, master_seed, i))
        .collect()
}

/// Pearson statistic and degrees of freedom for the two-sample homogeneity
/// test on paired histogram counts. Bins where both counts are zero are
/// skipped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<(f64, usize)> {
    if a.len() != b.len() {
        return Err(invalid("histograms", "bin counts differ"));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(invalid("histograms", "empty sample"));
    }
    let (na, nb) = (na as f64, nb as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        let d = ka * x as f64 - kb * y as f64;
        stat += d * d / (x + y) as f64;
        bins += 1;
    }
    Ok((stat, bins.saturating_sub(1)))
}
