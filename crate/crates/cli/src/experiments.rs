//! Config sections turned into library calls and output tables.

use collapse_core::decay::{
    self, integrate_kgrid, photon_number_density, DecayModelParams, KGrid, KGridStart, PhotonVariant,
};
use collapse_core::engine::{collapse_diagnostic, evolve, run_trajectories, CollapseParams, DEFAULT_COLLAPSE_THRESHOLD};
use collapse_core::ensemble::{ensemble_density_matrix, ensemble_density_matrix_mc};
use collapse_core::math::{mean_and_std_error, pairwise_sum};
use collapse_core::measurement::{branch_weight_ratio, parse_branch_fixture, BranchSpec};
use collapse_core::record::{
    bhattacharyya, record_violation_bound, verify_schwarz_chain, BInterval, RecordPartition, RecordScenario,
};
use collapse_core::spin::{self, SpinModelParams};
use collapse_core::state::{energy_distribution, DiscreteSpectrum, EnergyLevel, SpectralState};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{
    CollapseSection, Config, DecayQuantity, DecaySection, EnsembleSection, KGridStartKind, MeasurementSection,
    RecordsSection, Section, Span, SpectrumSpec, SpinSection,
};
use crate::output::{number, Table};
use crate::CliError;

const Z_SE_FLOOR: f64 = 1e-12;

/// Result of one experiment run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    /// Additional tables, written next to the main one under their suffix.
    pub extra: Vec<(String, Table)>,
    pub results: Map<String, Value>,
}

/// Validated inputs, ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub derived: Map<String, Value>,
    job: Job,
}

#[derive(Debug, Clone)]
enum Job {
    Collapse {
        state: SpectralState,
        params: CollapseParams,
        times: Vec<f64>,
        trajectories: u64,
        threshold: f64,
    },
    Ensemble {
        state: SpectralState,
        params: CollapseParams,
        times: Vec<f64>,
        trajectories: u64,
    },
    Measurement {
        spec: BranchSpec,
        params: CollapseParams,
        times: Vec<f64>,
        e_hat: Vec<f64>,
    },
    Records {
        scenario: RecordScenario,
        times: Vec<f64>,
        partition: RecordPartition,
    },
    Spin {
        params: SpinModelParams,
        s: Vec<f64>,
    },
    Decay {
        params: DecayModelParams,
        plan: DecayPlan,
    },
}

#[derive(Debug, Clone)]
enum DecayPlan {
    Occupation(Vec<f64>),
    Position { x: Vec<f64>, s: f64 },
    Grid {
        grid: KGrid,
        start: KGridStart,
        s_end: f64,
        sample_every: usize,
    },
}

fn cfg(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn span(s: &Span, key: &str) -> Result<Vec<f64>, CliError> {
    s.check(key)?;
    Ok(s.values())
}

fn initial_state(energies: &[f64], weights: &[f64], phases: Option<&[f64]>) -> Result<SpectralState, CliError> {
    if energies.len() != weights.len() {
        return Err(cfg(format!(
            "`energies` has {} entries but `weights` has {}",
            energies.len(),
            weights.len()
        )));
    }
    let state = match phases {
        None => SpectralState::from_weights(energies, weights)?,
        Some(ph) => {
            if ph.len() != energies.len() {
                return Err(cfg(format!("`phases` has {} entries, expected {}", ph.len(), energies.len())));
            }
            if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(cfg("`weights` must be finite and nonnegative"));
            }
            let levels = energies
                .iter()
                .map(|&e| EnergyLevel::simple(e))
                .collect::<collapse_core::Result<Vec<_>>>()?;
            let amps: Vec<Complex64> = weights.iter().zip(ph).map(|(w, p)| Complex64::from_polar(w.sqrt(), *p)).collect();
            SpectralState::from_amplitudes(&levels, &amps)?
        }
    };
    Ok(state.normalized()?)
}

fn level_energies(state: &SpectralState) -> Vec<f64> {
    state.components().iter().map(|c| c.level.energy).collect()
}

pub fn prepare(config: &Config) -> Result<Prepared, CliError> {
    let mut derived = Map::new();
    let job = match &config.section {
        Section::Collapse(s) => prepare_collapse(s, &mut derived)?,
        Section::Ensemble(s) => prepare_ensemble(s, &mut derived)?,
        Section::Measurement(s) => prepare_measurement(s, config, &mut derived)?,
        Section::Records(s) => prepare_records(s, &mut derived)?,
        Section::Spin(s) => prepare_spin(s, &mut derived)?,
        Section::Decay(s) => prepare_decay(s, &mut derived)?,
    };
    Ok(Prepared { derived, job })
}

fn prepare_collapse(s: &CollapseSection, derived: &mut Map<String, Value>) -> Result<Job, CliError> {
    let params = CollapseParams::new(s.lambda)?;
    let state = initial_state(&s.energies, &s.weights, s.phases.as_deref())?;
    let times = span(&s.times, "times")?;
    if times[0] <= 0.0 {
        return Err(cfg("`times` must start after t = 0"));
    }
    if s.trajectories == 0 {
        return Err(cfg("`trajectories` must be at least 1"));
    }
    let threshold = s.threshold.unwrap_or(DEFAULT_COLLAPSE_THRESHOLD);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(cfg(format!("`threshold` must lie in (0, 1), got {threshold}")));
    }
    let t_end = times[times.len() - 1];
    derived.insert("t_cal".into(), number(params.smearing_width(t_end)));
    derived.insert("levels".into(), json!(level_energies(&state)));
    Ok(Job::Collapse {
        state,
        params,
        times,
        trajectories: s.trajectories,
        threshold,
    })
}

fn prepare_ensemble(s: &EnsembleSection, derived: &mut Map<String, Value>) -> Result<Job, CliError> {
    let params = CollapseParams::new(s.lambda)?;
    let state = initial_state(&s.energies, &s.weights, s.phases.as_deref())?;
    let times = span(&s.times, "times")?;
    if times[0] < 0.0 {
        return Err(cfg("`times` must be >= 0"));
    }
    if s.trajectories < 2 {
        return Err(cfg("`trajectories` must be at least 2"));
    }
    let t_end = times[times.len() - 1];
    derived.insert("t_cal".into(), number(params.smearing_width(t_end)));
    derived.insert("levels".into(), json!(level_energies(&state)));
    Ok(Job::Ensemble {
        state,
        params,
        times,
        trajectories: s.trajectories,
    })
}

fn beta(v: Option<[f64; 2]>) -> Complex64 {
    v.map(|[re, im]| Complex64::new(re, im))
        .unwrap_or(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
}

fn prepare_measurement(
    s: &MeasurementSection,
    config: &Config,
    derived: &mut Map<String, Value>,
) -> Result<Job, CliError> {
    let params = CollapseParams::new(s.lambda)?;
    let path = config.resolve_path(&s.fixture);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let spec = parse_branch_fixture(&text, beta(s.beta1), beta(s.beta2))?;
    let times = span(&s.times, "times")?;
    if times[0] <= 0.0 {
        return Err(cfg("`times` must be > 0"));
    }
    let e_hat = span(&s.e_hat, "e_hat")?;
    derived.insert("levels".into(), json!(spec.levels.len()));
    derived.insert("shares_spectrum".into(), json!(spec.shares_spectrum()));
    derived.insert(
        "t_cal".into(),
        number(params.smearing_width(times[times.len() - 1])),
    );
    Ok(Job::Measurement {
        spec,
        params,
        times,
        e_hat,
    })
}

fn spectrum(spec: &SpectrumSpec, key: &str) -> Result<DiscreteSpectrum, CliError> {
    if spec.energies.len() != spec.weights.len() {
        return Err(cfg(format!("[records.{key}]: energies and weights differ in length")));
    }
    let points = spec.energies.iter().copied().zip(spec.weights.iter().copied()).collect();
    DiscreteSpectrum::from_unnormalized(points).map_err(|e| cfg(format!("[records.{key}]: {e}")))
}

fn prepare_records(s: &RecordsSection, derived: &mut Map<String, Value>) -> Result<Job, CliError> {
    let plus = spectrum(&s.plus, "plus")?;
    let minus = spectrum(&s.minus, "minus")?;
    let scenario = RecordScenario::new(&plus, &minus, s.b_plus, s.b_minus, s.lambda, s.t0)?;
    let times = span(&s.times, "times")?;
    if times[0] <= s.t0 {
        return Err(cfg(format!("`times` must all exceed t0 = {}", s.t0)));
    }
    let [c1, c2] = s.cuts;
    if !(c1.is_finite() && c2.is_finite() && c1 < c2) {
        return Err(cfg("`cuts` must be finite with c1 < c2"));
    }
    let partition = RecordPartition {
        minus: BInterval::new(f64::NEG_INFINITY, c1),
        neutral: BInterval::new(c1, c2),
        plus: BInterval::new(c2, f64::INFINITY),
    };
    derived.insert(
        "t_cal".into(),
        number((s.lambda * (times[times.len() - 1] - s.t0)).sqrt()),
    );
    Ok(Job::Records {
        scenario,
        times,
        partition,
    })
}

fn prepare_spin(s: &SpinSection, derived: &mut Map<String, Value>) -> Result<Job, CliError> {
    let t_cal = s.window().resolve()?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = match (s.a, s.b) {
        (None, None) => (h, h),
        (Some(a), Some(b)) => (a, b),
        _ => return Err(cfg("give both `a` and `b` or neither")),
    };
    let params = SpinModelParams::new(Complex64::new(a, 0.0), Complex64::new(b, 0.0), s.epsilon, s.sigma, t_cal)?;
    let regime = params.regime();
    derived.insert("t_cal".into(), number(t_cal));
    derived.insert("envelope".into(), number(params.precession_damping()));
    derived.insert("narrow_packet".into(), json!(regime.narrow_packet));
    derived.insert("packet_inside_window".into(), json!(regime.packet_inside_window));
    Ok(Job::Spin {
        params,
        s: span(&s.s, "s")?,
    })
}

fn prepare_decay(s: &DecaySection, derived: &mut Map<String, Value>) -> Result<Job, CliError> {
    let t_cal = s.window().resolve()?;
    let params = DecayModelParams::new(s.epsilon, s.gamma, s.sigma, s.x0.unwrap_or(0.0), t_cal)?;
    let regime = params.regime();
    derived.insert("t_cal".into(), number(t_cal));
    derived.insert("gamma_t_cal".into(), number(s.gamma * t_cal));
    derived.insert("narrow_in_energy".into(), json!(regime.narrow_in_energy));
    derived.insert("short_against_lifetime".into(), json!(regime.short_against_lifetime));
    derived.insert("packet_inside_window".into(), json!(regime.packet_inside_window));
    derived.insert("large_gamma_t".into(), json!(regime.large_gamma_t));
    let unused = |key: &str, present: bool| -> Result<(), CliError> {
        if present {
            Err(cfg(format!("`{key}` is not used by quantity `{:?}`", s.quantity).to_lowercase()))
        } else {
            Ok(())
        }
    };
    let plan = match s.quantity {
        DecayQuantity::Occupation => {
            unused("x", s.x.is_some())?;
            unused("at_s", s.at_s.is_some())?;
            unused("kgrid", s.kgrid.is_some())?;
            let grid = s.s.as_ref().ok_or_else(|| cfg("missing field `s` for quantity occupation"))?;
            DecayPlan::Occupation(span(grid, "s")?)
        }
        DecayQuantity::Position => {
            unused("s", s.s.is_some())?;
            unused("kgrid", s.kgrid.is_some())?;
            let grid = s.x.as_ref().ok_or_else(|| cfg("missing field `x` for quantity position"))?;
            let at = s.at_s.ok_or_else(|| cfg("missing field `at_s` for quantity position"))?;
            if !at.is_finite() {
                return Err(cfg("`at_s` must be finite"));
            }
            DecayPlan::Position {
                x: span(grid, "x")?,
                s: at,
            }
        }
        DecayQuantity::Kgrid => {
            unused("s", s.s.is_some())?;
            unused("x", s.x.is_some())?;
            unused("at_s", s.at_s.is_some())?;
            let k = s.kgrid.as_ref().ok_or_else(|| cfg("missing section [decay.kgrid]"))?;
            let n = k.n_modes.unwrap_or(decay::DEFAULT_MODES);
            let hw = k.half_width.unwrap_or(decay::DEFAULT_HALF_WIDTH);
            let grid = KGrid::centred(&params, hw, n, k.dt)?;
            let start = match (k.start, k.lead) {
                (KGridStartKind::Decay, None) => KGridStart::DecayOnly,
                (KGridStartKind::Decay, Some(_)) => return Err(cfg("`lead` only applies to start = \"incident\"")),
                (KGridStartKind::Incident, lead) => KGridStart::Incident {
                    lead: lead.unwrap_or(1.0 / s.gamma),
                },
            };
            derived.insert("recurrence_time".into(), number(grid.recurrence_time()));
            DecayPlan::Grid {
                grid,
                start,
                s_end: k.s_end,
                sample_every: k.sample_every.unwrap_or(10),
            }
        }
    };
    Ok(Job::Decay { params, plan })
}

pub fn execute(prep: &Prepared, seed: u64) -> Result<Outcome, CliError> {
    match &prep.job {
        Job::Collapse {
            state,
            params,
            times,
            trajectories,
            threshold,
        } => run_collapse(state, params, times, *trajectories, *threshold, seed),
        Job::Ensemble {
            state,
            params,
            times,
            trajectories,
        } => run_ensemble(state, params, times, *trajectories, seed),
        Job::Measurement {
            spec,
            params,
            times,
            e_hat,
        } => run_measurement(spec, params, times, e_hat),
        Job::Records {
            scenario,
            times,
            partition,
        } => run_records(scenario, times, partition),
        Job::Spin { params, s } => run_spin(params, s),
        Job::Decay { params, plan } => run_decay(params, plan),
    }
}

struct PointStats {
    b: f64,
    weights: Vec<f64>,
    collapsed_to: Option<usize>,
}

fn run_collapse(
    state: &SpectralState,
    params: &CollapseParams,
    times: &[f64],
    n: u64,
    threshold: f64,
    seed: u64,
) -> Result<Outcome, CliError> {
    let energies = level_energies(state);
    let runs = run_trajectories(state, params, times, seed, n)?;
    // Conditional states depend on the path only through B(t).
    let per_traj: Vec<Vec<PointStats>> = runs
        .par_iter()
        .map(|run| {
            run.trajectory.points[1..]
                .iter()
                .map(|pt| {
                    let s = evolve(state, params, pt.t, pt.b)?.normalized()?;
                    let weights: Vec<f64> = energy_distribution(&s)?.weights().collect();
                    let status = collapse_diagnostic(&s, threshold)?;
                    let collapsed_to = status.energy.and_then(|e| energies.iter().position(|&x| x == e));
                    Ok(PointStats {
                        b: pt.b,
                        weights,
                        collapsed_to,
                    })
                })
                .collect::<collapse_core::Result<Vec<_>>>()
        })
        .collect::<collapse_core::Result<Vec<_>>>()?;

    let mut table = Table::new(&[
        ("t", "time"),
        ("b_mean", "1/energy"),
        ("b_std_error", "1/energy"),
        ("collapsed_fraction", "1"),
    ]);
    for i in 0..energies.len() {
        table.push_column(format!("weight_mean_{i}"), "1");
        table.push_column(format!("collapsed_fraction_{i}"), "1");
    }
    let nf = n as f64;
    let mut last = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        let bs: Vec<f64> = per_traj.iter().map(|p| p[j].b).collect();
        let (bm, bse) = mean_and_std_error(&bs);
        let collapsed = per_traj.iter().filter(|p| p[j].collapsed_to.is_some()).count();
        let mut row = vec![t, bm, bse, collapsed as f64 / nf];
        last.clear();
        for i in 0..energies.len() {
            let w: Vec<f64> = per_traj.iter().map(|p| p[j].weights[i]).collect();
            let hits = per_traj.iter().filter(|p| p[j].collapsed_to == Some(i)).count();
            row.push(pairwise_sum(&w) / nf);
            row.push(hits as f64 / nf);
            last.push(hits as f64 / nf);
        }
        table.push(row);
    }
    let born: Vec<f64> = energy_distribution(state)?.weights().collect();
    let mut results = Map::new();
    results.insert("trajectories".into(), json!(n));
    results.insert("threshold".into(), number(threshold));
    results.insert("born_weights".into(), json!(born));
    results.insert("collapsed_fraction".into(), json!(last));
    results.insert(
        "uncollapsed_fraction".into(),
        number(1.0 - last.iter().sum::<f64>()),
    );
    Ok(Outcome {
        table,
        extra: Vec::new(),
        results,
    })
}

fn run_ensemble(
    state: &SpectralState,
    params: &CollapseParams,
    times: &[f64],
    n: u64,
    seed: u64,
) -> Result<Outcome, CliError> {
    let dim = state.len();
    let mut table = Table::new(&[("t", "time")]);
    for a in 0..dim {
        for b in a..dim {
            for part in ["re", "im"] {
                if a == b && part == "im" {
                    continue;
                }
                table.push_column(format!("rho_{a}_{b}_{part}"), "1");
                table.push_column(format!("rho_{a}_{b}_{part}_mc"), "1");
                table.push_column(format!("rho_{a}_{b}_{part}_se"), "1");
            }
        }
    }
    let mut max_z: f64 = 0.0;
    let mut diag_drift: f64 = 0.0;
    let mut excluded = 0usize;
    let rho0 = ensemble_density_matrix(state, params, 0.0)?;
    for &t in times {
        let exact = ensemble_density_matrix(state, params, t)?;
        let mc = ensemble_density_matrix_mc(state, params, t, n, seed)?;
        excluded += mc.excluded;
        let mut row = vec![t];
        for a in 0..dim {
            diag_drift = diag_drift.max((exact.entries[[a, a]] - rho0.entries[[a, a]]).norm());
            for b in a..dim {
                let e = exact.entries[[a, b]];
                let m = mc.mean.entries[[a, b]];
                let mut parts = vec![(e.re, m.re, mc.std_error_re[[a, b]])];
                if a != b {
                    parts.push((e.im, m.im, mc.std_error_im[[a, b]]));
                }
                for (x, y, se) in parts {
                    // Deterministic entries (t = 0, diagonals) have a standard
                    // error at rounding level, so they are not scored.
                    if se > Z_SE_FLOOR {
                        max_z = max_z.max((y - x).abs() / se);
                    }
                    row.extend([x, y, se]);
                }
            }
        }
        table.push(row);
    }
    let mut results = Map::new();
    results.insert("trajectories".into(), json!(n));
    results.insert("max_abs_z".into(), number(max_z));
    results.insert("diagonal_max_drift".into(), number(diag_drift));
    results.insert("excluded".into(), json!(excluded));
    Ok(Outcome {
        table,
        extra: Vec::new(),
        results,
    })
}

fn run_measurement(
    spec: &BranchSpec,
    params: &CollapseParams,
    times: &[f64],
    e_hat: &[f64],
) -> Result<Outcome, CliError> {
    let mut table = Table::new(&[("t", "time"), ("b", "1/energy"), ("e_hat", "energy"), ("ratio", "1")]);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in times {
        for &e in e_hat {
            let b = 2.0 * params.lambda() * t * e;
            let r = branch_weight_ratio(spec, params, t, b)?;
            lo = lo.min(r);
            hi = hi.max(r);
            table.push(vec![t, b, e, r]);
        }
    }
    let mut results = Map::new();
    results.insert("ratio_min".into(), number(lo));
    results.insert("ratio_max".into(), number(hi));
    results.insert("ratio_spread".into(), number(hi / lo));
    results.insert(
        "expected_ratio".into(),
        number(spec.beta_2.norm_sqr() / spec.beta_1.norm_sqr()),
    );
    results.insert("shares_spectrum".into(), json!(spec.shares_spectrum()));
    Ok(Outcome {
        table,
        extra: Vec::new(),
        results,
    })
}

fn run_records(scenario: &RecordScenario, times: &[f64], partition: &RecordPartition) -> Result<Outcome, CliError> {
    let mut table = Table::new(&[
        ("t", "time"),
        ("bound", "1"),
        ("lhs_sum", "1"),
        ("part_plus", "1"),
        ("part_minus", "1"),
        ("part_neutral", "1"),
    ]);
    let mut all_hold = true;
    let mut sup = 0.0;
    for &t in times {
        let bound = record_violation_bound(scenario, t)?;
        let check = verify_schwarz_chain(scenario, t, partition)?;
        all_hold &= check.holds;
        sup = bound.sup;
        table.push(vec![
            t,
            bound.bound,
            check.lhs_sum,
            check.parts[0],
            check.parts[1],
            check.parts[2],
        ]);
    }
    let mut results = Map::new();
    results.insert(
        "bhattacharyya".into(),
        number(bhattacharyya(scenario.spectrum_plus(), scenario.spectrum_minus())?),
    );
    results.insert("bound_sup".into(), number(sup));
    results.insert("schwarz_chain_holds".into(), json!(all_hold));
    Ok(Outcome {
        table,
        extra: Vec::new(),
        results,
    })
}

fn run_spin(p: &SpinModelParams, s_values: &[f64]) -> Result<Outcome, CliError> {
    let mut table = Table::new(&[
        ("t", "time"),
        ("sigma1_standard", "1"),
        ("sigma1_standard_approx", "1"),
        ("sigma1_collapsed", "1"),
        ("sigma1_collapsed_printed", "1"),
        ("sigma1_collapsed_approx", "1"),
    ]);
    let mut printed_gap: f64 = 0.0;
    for &s in s_values {
        let exact = spin::sigma1_collapsed(s, p)?;
        let printed = spin::sigma1_collapsed_printed(s, p)?;
        printed_gap = printed_gap.max((exact - printed).abs());
        table.push(vec![
            s,
            spin::sigma1_standard(s, p)?,
            spin::sigma1_standard_approx(s, p),
            exact,
            printed,
            spin::sigma1_collapsed_approx(s, p),
        ]);
    }
    let mut results = Map::new();
    results.insert("envelope".into(), number(p.precession_damping()));
    results.insert("t_cal".into(), number(p.t_cal));
    results.insert("printed_form_max_deviation".into(), number(printed_gap));
    Ok(Outcome {
        table,
        extra: Vec::new(),
        results,
    })
}

fn run_decay(p: &DecayModelParams, plan: &DecayPlan) -> Result<Outcome, CliError> {
    let mut results = Map::new();
    let mut extra = Vec::new();
    let table = match plan {
        DecayPlan::Occupation(s_values) => {
            let mut table = Table::new(&[
                ("t", "time"),
                ("occupation", "1"),
                ("occupation_packet", "1"),
                ("occupation_collapsed", "1"),
            ]);
            let asymptotic = p.t_cal > 0.0;
            if asymptotic {
                table.push_column("occupation_asymptotic", "1");
            }
            let mut peak = (f64::NAN, f64::NEG_INFINITY);
            for &s in s_values {
                let collapsed = decay::occupation_collapsed(s, p);
                if collapsed > peak.1 {
                    peak = (s, collapsed);
                }
                let mut row = vec![s, decay::occupation(s, p), decay::occupation_packet(s, p)?, collapsed];
                if asymptotic {
                    row.push(decay::occupation_collapsed_asymptotic(s, p)?);
                }
                table.push(row);
            }
            results.insert("collapsed_peak_t".into(), number(peak.0));
            results.insert("collapsed_peak".into(), number(peak.1));
            results.insert("jump".into(), number(p.gamma * p.sigma));
            table
        }
        DecayPlan::Position { x, s } => {
            let mut table = Table::new(&[
                ("x", "length"),
                ("decay_only", "1/length"),
                ("incident", "1/length"),
                ("interference", "1/length"),
                ("tail", "1/length"),
                ("total", "1/length"),
                ("collapsed_incident", "1/length"),
                ("collapsed_interference", "1/length"),
                ("collapsed_tail", "1/length"),
                ("collapsed_total", "1/length"),
            ]);
            let asymptotic = p.t_cal > 0.0;
            if asymptotic {
                table.push_column("collapsed_asymptotic", "1/length");
            }
            for &xv in x {
                let d = decay::photon_position_density(xv, *s, p, PhotonVariant::DecayOnly);
                let e = decay::photon_position_density(xv, *s, p, PhotonVariant::Excitation);
                let c = decay::photon_position_density_collapsed(xv, *s, p);
                let mut row = vec![
                    xv,
                    d.total,
                    e.incident,
                    e.interference,
                    e.tail,
                    e.total,
                    c.incident,
                    c.interference,
                    c.tail,
                    c.total,
                ];
                if asymptotic {
                    row.push(decay::photon_position_density_collapsed_asymptotic(xv, *s, p)?);
                }
                table.push(row);
            }
            results.insert("at_s".into(), number(*s));
            table
        }
        DecayPlan::Grid {
            grid,
            start,
            s_end,
            sample_every,
        } => {
            let sol = integrate_kgrid(p, grid, *start, *s_end, *sample_every)?;
            let decay_only = matches!(start, KGridStart::DecayOnly);
            let closed = |s: f64| {
                if decay_only {
                    (-p.gamma * s).exp()
                } else {
                    decay::occupation(s, p)
                }
            };
            let mut table = Table::new(&[("t", "time"), ("occupation_grid", "1"), ("occupation_closed", "1")]);
            let mut worst: f64 = 0.0;
            for &(s, occ) in sol.occupation.samples() {
                let want = closed(s);
                if s > 0.0 && want > 0.0 {
                    worst = worst.max((occ / want - 1.0).abs());
                }
                table.push(vec![s, occ, want]);
            }
            let mut spectrum = Table::new(&[
                ("k", "energy"),
                ("alpha_re", "1/sqrt(energy)"),
                ("alpha_im", "1/sqrt(energy)"),
                ("density_grid", "1/energy"),
            ]);
            if decay_only {
                spectrum.push_column("density_closed", "1/energy");
            }
            let mut core_worst: f64 = 0.0;
            for (&k, a) in sol.momenta.iter().zip(&sol.alpha) {
                let mut row = vec![k, a.re, a.im, a.norm_sqr()];
                if decay_only {
                    let want = photon_number_density(k, *s_end, p)?;
                    if (k - p.epsilon).abs() <= 5.0 * p.gamma {
                        core_worst = core_worst.max((a.norm_sqr() / want - 1.0).abs());
                    }
                    row.push(want);
                }
                spectrum.push(row);
            }
            extra.push(("spectrum".to_string(), spectrum));
            results.insert("steps".into(), json!(sol.steps));
            results.insert("dt".into(), number(sol.dt));
            results.insert("drift_rate".into(), number(sol.drift_rate));
            results.insert("occupation_max_rel_error".into(), number(worst));
            if decay_only {
                results.insert("core_spectrum_max_rel_error".into(), number(core_worst));
            }
            results.insert("recurrence_time".into(), number(grid.recurrence_time()));
            table
        }
    };
    Ok(Outcome { table, extra, results })
}
