//! Permanent-record criterion: spectral overlap of two outcome universes and
//! the Schwarz bound on how well their record values can stay apart.

use crate::error::{domain, invalid, Error, Result};
use crate::math::pairwise_sum;
use crate::quadrature::{integrate_with_breakpoints, QuadOptions};
use crate::state::DiscreteSpectrum;

/// Two outcome universes at `t0`: spectra `ρ₊`, `ρ₋` and record values
/// `B₊(t0)`, `B₋(t0)`. Spectra are zero-padded onto a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordScenario {
    spectrum_plus: DiscreteSpectrum,
    spectrum_minus: DiscreteSpectrum,
    pub b_plus: f64,
    pub b_minus: f64,
    pub lambda: f64,
    pub t0: f64,
}

impl RecordScenario {
    pub fn new(
        spectrum_plus: &DiscreteSpectrum,
        spectrum_minus: &DiscreteSpectrum,
        b_plus: f64,
        b_minus: f64,
        lambda: f64,
        t0: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid("lambda", format!("must be finite and > 0, got {lambda}")));
        }
        if !(t0 >= 0.0) || !t0.is_finite() {
            return Err(invalid("t0", format!("must be finite and >= 0, got {t0}")));
        }
        if !b_plus.is_finite() || !b_minus.is_finite() {
            return Err(invalid("B", "record values must be finite"));
        }
        let (p, m) = DiscreteSpectrum::pad_to_common(spectrum_plus, spectrum_minus);
        Ok(Self {
            spectrum_plus: p,
            spectrum_minus: m,
            b_plus,
            b_minus,
            lambda,
            t0,
        })
    }

    pub fn spectrum_plus(&self) -> &DiscreteSpectrum {
        &self.spectrum_plus
    }

    pub fn spectrum_minus(&self) -> &DiscreteSpectrum {
        &self.spectrum_minus
    }

    fn elapsed(&self, t: f64) -> Result<f64> {
        if !(t > self.t0) || !t.is_finite() {
            return Err(domain(format!("need t > t0 = {}, got {t}", self.t0)));
        }
        Ok(t - self.t0)
    }

    /// `e^{-(B₊ - B₋)² / 8λ(t - t0)}`.
    fn separation_factor(&self, dt: f64) -> f64 {
        let d = self.b_plus - self.b_minus;
        (-d * d / (8.0 * self.lambda * dt)).exp()
    }
}

/// `Σ √(w₁ w₂)` over a common grid.
pub fn bhattacharyya(rho1: &DiscreteSpectrum, rho2: &DiscreteSpectrum) -> Result<f64> {
    if rho1.len() != rho2.len() || rho1.energies().zip(rho2.energies()).any(|(a, b)| a != b) {
        return Err(Error::GridMismatch("spectra are not on a common energy grid".into()));
    }
    let terms: Vec<f64> = rho1.weights().zip(rho2.weights()).map(|(a, b)| (a * b).sqrt()).collect();
    Ok(pairwise_sum(&terms).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordBound {
    /// Bound at the requested time.
    pub bound: f64,
    /// Supremum over `t > t0`, reached as `t → ∞`.
    pub sup: f64,
}

pub fn record_violation_bound(scenario: &RecordScenario, t: f64) -> Result<RecordBound> {
    let dt = scenario.elapsed(t)?;
    let overlap = bhattacharyya(&scenario.spectrum_plus, &scenario.spectrum_minus)?;
    Ok(RecordBound {
        bound: scenario.separation_factor(dt) * overlap,
        sup: overlap,
    })
}

/// Interval of record values; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BInterval {
    pub lo: f64,
    pub hi: f64,
}

impl BInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

/// Outcome regions `Σ₁`, `Σ₋₁`, `Σ₀` of the record value at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordPartition {
    pub plus: BInterval,
    pub minus: BInterval,
    pub neutral: BInterval,
}

impl RecordPartition {
    fn validate(&self) -> Result<()> {
        let mut parts = [self.plus, self.minus, self.neutral];
        if parts.iter().any(|p| p.lo.is_nan() || p.hi.is_nan() || !(p.hi > p.lo)) {
            return Err(domain("partition intervals must be nonempty"));
        }
        parts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        if parts[0].lo != f64::NEG_INFINITY || parts[2].hi != f64::INFINITY {
            return Err(domain("partition must cover the whole line"));
        }
        if parts[0].hi != parts[1].lo || parts[1].hi != parts[2].lo {
            return Err(domain("partition intervals must be contiguous without overlap"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchwarzCheck {
    /// Integrals over `Σ₁`, `Σ₋₁`, `Σ₀`.
    pub parts: [f64; 3],
    pub lhs_sum: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub const SCHWARZ_QUAD_TOL: f64 = 1e-6;
pub const SCHWARZ_MATCH_TOL: f64 = 1e-4;

/// Integrate the product-of-square-roots integrand over each region of the
/// partition and compare the sum to the closed-form bound.
pub fn verify_schwarz_chain(scenario: &RecordScenario, t: f64, partition: &RecordPartition) -> Result<SchwarzCheck> {
    partition.validate()?;
    let dt = scenario.elapsed(t)?;
    let l = scenario.lambda * dt;
    let rhs = record_violation_bound(scenario, t)?.bound;

    // For each E the B-integrand is a Gaussian of variance λ(t - t0) centred
    // at the midpoint of the two record values shifted by 2λ(t - t0)E.
    let mid = 0.5 * (scenario.b_plus + scenario.b_minus);
    let sep = scenario.separation_factor(dt);
    let centres: Vec<(f64, f64)> = scenario
        .spectrum_plus
        .points()
        .iter()
        .zip(scenario.spectrum_minus.points())
        .filter_map(|(&(e, w1), &(_, w2))| {
            let c = (w1 * w2).sqrt();
            (c > 0.0).then_some((mid + 2.0 * l * e, c))
        })
        .collect();
    if centres.is_empty() {
        return Ok(SchwarzCheck {
            parts: [0.0; 3],
            lhs_sum: 0.0,
            rhs,
            holds: rhs == 0.0,
        });
    }
    let sd = l.sqrt();
    let lo = centres.iter().map(|c| c.0).fold(f64::INFINITY, f64::min) - 40.0 * sd;
    let hi = centres.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max) + 40.0 * sd;
    let integrand = |b: f64| {
        let terms: Vec<f64> = centres
            .iter()
            .map(|&(m, c)| c * crate::math::gaussian_pdf(b, m, l))
            .collect();
        sep * pairwise_sum(&terms)
    };
    let opts = QuadOptions {
        abs_tol: SCHWARZ_QUAD_TOL * 1e-3,
        rel_tol: SCHWARZ_QUAD_TOL,
        max_intervals: 200_000,
    };
    // Split the support at a handful of points so narrow peaks far apart
    // are never straddled by a single panel.
    let n_split = 64.min(centres.len().max(2));
    let splits: Vec<f64> = (1..n_split).map(|i| lo + (hi - lo) * i as f64 / n_split as f64).collect();
    let mut parts = [0.0; 3];
    for (k, iv) in [partition.plus, partition.minus, partition.neutral].iter().enumerate() {
        let a = iv.lo.max(lo);
        let b = iv.hi.min(hi);
        if b <= a {
            continue;
        }
        let r = integrate_with_breakpoints(integrand, a, b, &splits, opts)?;
        parts[k] = r.value;
    }
    let lhs_sum = pairwise_sum(&parts);
    let holds = (lhs_sum - rhs).abs() <= SCHWARZ_MATCH_TOL * rhs.max(f64::MIN_POSITIVE) || (rhs == 0.0 && lhs_sum == 0.0);
    Ok(SchwarzCheck {
        parts,
        lhs_sum,
        rhs,
        holds,
    })
}
