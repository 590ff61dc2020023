//! Two-branch measurement superpositions with shared energy spectra.
//!
//! Each branch has amplitudes `a·c·e^{iθ^α}` on a common level list. When
//! the magnitude lists agree, every record path rescales both branch norms
//! by the same factor, so the branch weight ratio never moves.

use num_complex::Complex64;

use crate::engine::{evolve, run_trajectory, CollapseParams};
use crate::error::{domain, invalid, Error, Result};
use crate::math::log_sum_exp;
use crate::state::{squared_norm, Component, EnergyLevel, SpectralState};

const BETA_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    /// `(E, magnitude)` per level; repeated energies are degenerate levels.
    pub levels: Vec<(f64, f64)>,
    /// Branch-2 magnitudes when they differ from branch 1. Only control
    /// fixtures set this; it breaks the shared-spectrum hypothesis.
    pub magnitudes_2: Option<Vec<f64>>,
    pub phases_1: Vec<f64>,
    pub phases_2: Vec<f64>,
    pub beta_1: Complex64,
    pub beta_2: Complex64,
}

impl BranchSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.levels.len();
        if n == 0 {
            return Err(Error::EmptyState);
        }
        if self.phases_1.len() != n || self.phases_2.len() != n {
            return Err(domain(format!(
                "{n} levels but {} / {} phases",
                self.phases_1.len(),
                self.phases_2.len()
            )));
        }
        if let Some(m2) = &self.magnitudes_2 {
            if m2.len() != n {
                return Err(domain(format!("{n} levels but {} branch-2 magnitudes", m2.len())));
            }
        }
        let mags = self.levels.iter().map(|l| l.1).chain(self.magnitudes_2.iter().flatten().copied());
        for m in mags {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(invalid("magnitude", format!("must be finite and >= 0, got {m}")));
            }
        }
        if self.levels.iter().any(|l| !l.0.is_finite())
            || self.phases_1.iter().chain(&self.phases_2).any(|p| !p.is_finite())
        {
            return Err(invalid("levels", "energies and phases must be finite"));
        }
        let total = self.beta_1.norm_sqr() + self.beta_2.norm_sqr();
        if (total - 1.0).abs() > BETA_NORM_TOL {
            return Err(invalid("beta", format!("|beta_1|^2 + |beta_2|^2 = {total}, not 1")));
        }
        Ok(())
    }

    /// Whether both branches use the same magnitude list.
    pub fn shares_spectrum(&self) -> bool {
        match &self.magnitudes_2 {
            None => true,
            Some(m2) => m2.iter().zip(&self.levels).all(|(a, b)| *a == b.1),
        }
    }

    /// Energy levels with degeneracy labels assigned in order of appearance.
    pub fn energy_levels(&self) -> Result<Vec<EnergyLevel>> {
        let mut seen: Vec<(f64, u32)> = Vec::new();
        self.levels
            .iter()
            .map(|&(e, _)| {
                let j = match seen.iter_mut().find(|s| s.0 == e) {
                    Some(s) => {
                        s.1 += 1;
                        s.1
                    }
                    None => {
                        seen.push((e, 0));
                        0
                    }
                };
                EnergyLevel::new(e, j)
            })
            .collect()
    }

    fn magnitudes(&self, branch: usize) -> Vec<f64> {
        match (branch, &self.magnitudes_2) {
            (2, Some(m2)) => m2.clone(),
            _ => self.levels.iter().map(|l| l.1).collect(),
        }
    }
}

fn branch_state(levels: &[EnergyLevel], mags: &[f64], phases: &[f64], offset: u32) -> Result<SpectralState> {
    let comps = levels
        .iter()
        .zip(mags)
        .zip(phases)
        .map(|((l, &m), &p)| Component {
            level: EnergyLevel::new(l.energy, l.degeneracy + offset).expect("finite energy"),
            log_magnitude: m.ln(),
            phase: p,
        })
        .collect();
    SpectralState::from_components(comps)
}

/// Branch states `Ψ¹`, `Ψ²` (without the `β` factors).
pub fn build_branches(spec: &BranchSpec) -> Result<(SpectralState, SpectralState)> {
    spec.validate()?;
    let levels = spec.energy_levels()?;
    Ok((
        branch_state(&levels, &spec.magnitudes(1), &spec.phases_1, 0)?,
        branch_state(&levels, &spec.magnitudes(2), &spec.phases_2, 0)?,
    ))
}

fn log_weight_ratio(spec: &BranchSpec, s1: &SpectralState, s2: &SpectralState) -> Result<f64> {
    let n1 = squared_norm(s1)?.log;
    let n2 = squared_norm(s2)?.log;
    Ok((spec.beta_2.norm_sqr().ln() - spec.beta_1.norm_sqr().ln()) + (n2 - n1))
}

/// `|β₂|²‖Ψ²_B‖² / |β₁|²‖Ψ¹_B‖²` after evolving both branches under the same
/// `(t, B)`.
pub fn branch_weight_ratio(spec: &BranchSpec, params: &CollapseParams, t: f64, b: f64) -> Result<f64> {
    if spec.beta_1 == Complex64::new(0.0, 0.0) {
        return Err(domain("beta_1 = 0: branch weight ratio undefined"));
    }
    let (s1, s2) = build_branches(spec)?;
    let e1 = evolve(&s1, params, t, b)?;
    let e2 = evolve(&s2, params, t, b)?;
    Ok(log_weight_ratio(spec, &e1, &e2)?.exp())
}

/// `max / min` of the branch weight ratio over a grid of `(t, B)` values.
pub fn ratio_spread(spec: &BranchSpec, params: &CollapseParams, grid: &[(f64, f64)]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(t, b) in grid {
        let r = branch_weight_ratio(spec, params, t, b)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Combined state `β₁Ψ¹ ⊕ β₂Ψ²` with branch 2 on shifted degeneracy labels,
/// so the branches are orthogonal as in the apparatus picture.
pub fn combined_state(spec: &BranchSpec) -> Result<SpectralState> {
    spec.validate()?;
    let levels = spec.energy_levels()?;
    let offset = levels.iter().map(|l| l.degeneracy).max().unwrap_or(0) + 1;
    let b1 = branch_state(&levels, &spec.magnitudes(1), &spec.phases_1, 0)?;
    let b2 = branch_state(&levels, &spec.magnitudes(2), &spec.phases_2, offset)?;
    let mut comps: Vec<Component> = Vec::with_capacity(2 * levels.len());
    for (s, beta) in [(b1, spec.beta_1), (b2, spec.beta_2)] {
        let lb = beta.norm().ln();
        let pb = beta.arg();
        comps.extend(s.components().iter().map(|c| Component {
            log_magnitude: c.log_magnitude + lb,
            phase: c.phase + pb,
            ..*c
        }));
    }
    SpectralState::from_components(comps)
}

/// Branch weight ratio at every point of one sampled trajectory of the
/// combined state.
pub fn trajectory_ratios(
    spec: &BranchSpec,
    params: &CollapseParams,
    times: &[f64],
    master_seed: u64,
    index: u64,
) -> Result<Vec<f64>> {
    let levels = spec.energy_levels()?;
    let offset = levels.iter().map(|l| l.degeneracy).max().unwrap_or(0) + 1;
    let combined = combined_state(spec)?;
    let run = run_trajectory(&combined, params, times, master_seed, index)?;
    let mut out = Vec::with_capacity(run.trajectory.points.len());
    for p in &run.trajectory.points {
        let s = evolve(&combined, params, p.t, p.b)?;
        let (mut w1, mut w2) = (Vec::new(), Vec::new());
        for c in s.components() {
            if c.level.degeneracy >= offset {
                w2.push(2.0 * c.log_magnitude);
            } else {
                w1.push(2.0 * c.log_magnitude);
            }
        }
        out.push((log_sum_exp(&w2) - log_sum_exp(&w1)).exp());
    }
    Ok(out)
}

/// Parse a branch fixture: one level per line with columns
/// `energy magnitude theta1 theta2 [magnitude2]`. `#` starts a comment.
pub fn parse_branch_fixture(text: &str, beta_1: Complex64, beta_2: Complex64) -> Result<BranchSpec> {
    let mut levels = Vec::new();
    let mut phases_1 = Vec::new();
    let mut phases_2 = Vec::new();
    let mut mags_2 = Vec::new();
    let mut columns = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Fixture {
                line: i + 1,
                reason: e.to_string(),
            })?;
        if vals.len() != 4 && vals.len() != 5 {
            return Err(Error::Fixture {
                line: i + 1,
                reason: format!("expected 4 or 5 columns, found {}", vals.len()),
            });
        }
        if *columns.get_or_insert(vals.len()) != vals.len() {
            return Err(Error::Fixture {
                line: i + 1,
                reason: "column count changes within the file".into(),
            });
        }
        levels.push((vals[0], vals[1]));
        phases_1.push(vals[2]);
        phases_2.push(vals[3]);
        if vals.len() == 5 {
            mags_2.push(vals[4]);
        }
    }
    let spec = BranchSpec {
        levels,
        magnitudes_2: (columns == Some(5)).then_some(mags_2),
        phases_1,
        phases_2,
        beta_1,
        beta_2,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::energy_distribution;
    use proptest::prelude::*;

    const PLANE_WAVE: &str = include_str!("../fixtures/plane_wave.txt");
    const CONTROL: &str = include_str!("../fixtures/control.txt");

    fn half() -> Complex64 {
        Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
    }

    fn grid() -> Vec<(f64, f64)> {
        let mut g = Vec::new();
        for i in 0..20 {
            let t = 0.25 + 0.5 * i as f64;
            for j in 0..20 {
                // Record values whose energy estimate B/2λt sweeps the spectrum.
                let e_hat = -0.5 + 5.5 * j as f64 / 19.0;
                g.push((t, 2.0 * t * e_hat));
            }
        }
        g
    }

    #[test]
    fn equal_phases_give_identical_branches() {
        let spec = BranchSpec {
            levels: vec![(0.0, 0.3), (1.0, 0.5), (1.0, 0.2)],
            magnitudes_2: None,
            phases_1: vec![0.1, 0.2, 0.3],
            phases_2: vec![0.1, 0.2, 0.3],
            beta_1: half(),
            beta_2: half(),
        };
        let (a, b) = build_branches(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.components()[2].level, EnergyLevel::new(1.0, 1).unwrap());
    }

    #[test]
    fn plane_wave_branches_differ_but_share_spectra() {
        let spec = parse_branch_fixture(PLANE_WAVE, half(), half()).unwrap();
        assert!(spec.shares_spectrum());
        let (a, b) = build_branches(&spec).unwrap();
        assert_ne!(a, b);
        assert_eq!(energy_distribution(&a).unwrap(), energy_distribution(&b).unwrap());
        // ±k share an energy, so most energies carry two degeneracy labels.
        assert!(a.components().iter().any(|c| c.level.degeneracy == 1));
    }

    #[test]
    fn symmetric_betas_give_unit_ratio_everywhere() {
        let spec = parse_branch_fixture(PLANE_WAVE, half(), half()).unwrap();
        let p = CollapseParams::new(1.0).unwrap();
        for (t, b) in grid() {
            assert_eq!(branch_weight_ratio(&spec, &p, t, b).unwrap(), 1.0);
        }
    }

    #[test]
    fn ratio_four_on_the_grid() {
        let b1 = Complex64::new(0.2f64.sqrt(), 0.0);
        let b2 = Complex64::from_polar(0.8f64.sqrt(), 1.1);
        let spec = parse_branch_fixture(PLANE_WAVE, b1, b2).unwrap();
        let p = CollapseParams::new(0.5).unwrap();
        let want = b2.norm_sqr() / b1.norm_sqr();
        assert!((want - 4.0).abs() < 1e-14);
        for (t, b) in grid() {
            let r = branch_weight_ratio(&spec, &p, t, b).unwrap();
            assert!((r - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn control_ratio_moves_with_record() {
        let spec = parse_branch_fixture(CONTROL, half(), half()).unwrap();
        assert!(!spec.shares_spectrum());
        let p = CollapseParams::new(1.0).unwrap();
        let (lo, hi) = ratio_spread(&spec, &p, &grid()).unwrap();
        assert!(hi / lo > 1.5, "spread {}", hi / lo);
    }

    #[test]
    fn control_oracle_by_direct_summation() {
        let spec = parse_branch_fixture(CONTROL, half(), half()).unwrap();
        let p = CollapseParams::new(1.0).unwrap();
        let (t, b) = (2.0, 3.0);
        let m2 = spec.magnitudes_2.clone().unwrap();
        let sum = |mags: &mut dyn Iterator<Item = f64>| -> f64 {
            spec.levels
                .iter()
                .zip(mags)
                .map(|(l, m)| m * m * (-(b - 2.0 * t * l.0).powi(2) / (2.0 * t)).exp())
                .sum()
        };
        let want = sum(&mut m2.iter().copied()) / sum(&mut spec.levels.iter().map(|l| l.1));
        let got = branch_weight_ratio(&spec, &p, t, b).unwrap();
        assert!((got - want).abs() < 1e-12 * want);
    }

    #[test]
    fn perturbation_is_continuous() {
        let base = parse_branch_fixture(PLANE_WAVE, half(), half()).unwrap();
        let p = CollapseParams::new(1.0).unwrap();
        let mut prev = f64::INFINITY;
        for &delta in &[1e-1, 1e-2, 1e-3, 1e-4] {
            let mut spec = base.clone();
            spec.magnitudes_2 = Some(
                base.levels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| l.1 * (1.0 + delta * ((i % 3) as f64 - 1.0)))
                    .collect(),
            );
            let (lo, hi) = ratio_spread(&spec, &p, &grid()).unwrap();
            let dev = (hi / lo - 1.0).abs();
            assert!(dev > 0.0 && dev < prev);
            prev = dev;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn ratio_is_constant_along_trajectories() {
        let b1 = Complex64::new(0.6, 0.0);
        let b2 = Complex64::new(0.0, 0.8);
        let spec = parse_branch_fixture(PLANE_WAVE, b1, b2).unwrap();
        let p = CollapseParams::new(2.0).unwrap();
        let want = 0.64 / 0.36;
        for idx in 0..20 {
            let rs = trajectory_ratios(&spec, &p, &[0.1, 0.5, 2.0, 10.0], 77, idx).unwrap();
            for r in rs {
                assert!((r - want).abs() <= 1e-12 * want);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(parse_branch_fixture("0 1 0", half(), half()).is_err());
        assert!(parse_branch_fixture("0 1 0 0\n1 1 0 0 1", half(), half()).is_err());
        assert!(parse_branch_fixture("0 x 0 0", half(), half()).is_err());
        assert!(parse_branch_fixture("0 1 0 0", half(), Complex64::new(0.5, 0.0)).is_err());
        let spec = parse_branch_fixture("0 1 0 0", Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        let p = CollapseParams::new(1.0).unwrap();
        assert!(branch_weight_ratio(&spec, &p, 1.0, 0.0).is_err());
        assert!(branch_weight_ratio(&parse_branch_fixture("0 1 0 0", half(), half()).unwrap(), &p, -1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn random_shared_spectra_are_identical(
            rows in proptest::collection::vec((0u8..6, 0.01f64..2.0, -3.2f64..3.2, -3.2f64..3.2), 1..12)
        ) {
            let spec = BranchSpec {
                levels: rows.iter().map(|r| (r.0 as f64 * 0.5, r.1)).collect(),
                magnitudes_2: None,
                phases_1: rows.iter().map(|r| r.2).collect(),
                phases_2: rows.iter().map(|r| r.3).collect(),
                beta_1: half(),
                beta_2: half(),
            };
            let (a, b) = build_branches(&spec).unwrap();
            prop_assert_eq!(energy_distribution(&a).unwrap(), energy_distribution(&b).unwrap());
        }
    }
}
