//! Named experiments. Each one returns its data and the quantities used by
//! the photon-cutoff convergence guard.

use std::fmt;
use std::str::FromStr;

use dotcavity_core::gates::{
    decoherence_scan, half_pi_time, not_gate_time, photon_sweep, run_cz, run_parallel, single_qubit_rot, solve_schedule,
    solve_schedule_fixed_g, CavityState, FidelityMode, GateOptions, GateReport, GateSchedule, ModelLevel, ScheduleResiduals,
};
use dotcavity_core::hilbert::{DOWN, UP};
use dotcavity_core::model::{check_approximations, natural_to_ps, rate_from_lifetime_ps, ApproximationReport};
use dotcavity_core::propagation::PropagationConfig;
use dotcavity_core::{CMatrix, Error};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format, SolveFor, Sweep};
use crate::output::{complex, matrix_rows, to_json, Cell, Csv};

/// Extra photon levels used by the convergence guard.
pub const GUARD_PAD: usize = 4;
pub const GUARD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Params,
    TruthTable,
    PhotonSweep,
    Compare,
    Parallel,
    Decoherence,
    SingleQubit,
}

pub const EXPERIMENTS: [Experiment; 7] = [
    Experiment::Params,
    Experiment::TruthTable,
    Experiment::PhotonSweep,
    Experiment::Compare,
    Experiment::Parallel,
    Experiment::Decoherence,
    Experiment::SingleQubit,
];

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Params => "params",
            Experiment::TruthTable => "truth-table",
            Experiment::PhotonSweep => "photon-sweep",
            Experiment::Compare => "compare",
            Experiment::Parallel => "parallel",
            Experiment::Decoherence => "decoherence",
            Experiment::SingleQubit => "single-qubit",
        }
    }

    pub fn default_format(self) -> Format {
        match self {
            Experiment::PhotonSweep | Experiment::Parallel | Experiment::Decoherence => Format::Csv,
            _ => Format::Json,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EXPERIMENTS.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name()).collect();
            format!("unknown experiment \"{s}\" (expected one of {})", names.join(", "))
        })
    }
}

/// Resolved inputs of one run.
#[derive(Debug, Clone)]
pub struct Request {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub model_level: ModelLevel,
    pub photon_numbers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuardResult {
    pub cutoff: usize,
    pub check_cutoff: usize,
    pub drift: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub struct Outcome {
    pub json: Option<String>,
    pub csv: Option<Csv>,
    pub guard: GuardResult,
}

impl Request {
    pub fn schedule(&self, cutoff: usize) -> Result<GateSchedule, Error> {
        let c = &self.config;
        let schedule = match c.solve_for {
            SolveFor::CavityCoupling { omega1, omega3 } => solve_schedule(omega1, c.omega2, omega3, c.delta1, c.delta2, c.k)?,
            SolveFor::LaserProduct { g } => solve_schedule_fixed_g(g, c.omega2, c.delta1, c.delta2, c.k)?,
        };
        let mut schedule = schedule.with_cutoff(cutoff);
        if c.lab.is_some() {
            schedule.params.lab = c.lab;
            schedule.params.validate()?;
        }
        Ok(schedule)
    }

    pub fn approximations(&self, schedule: &GateSchedule) -> Result<ApproximationReport, Error> {
        check_approximations(&schedule.params, self.config.approx_threshold)
    }

    pub fn options(&self) -> GateOptions {
        GateOptions {
            propagation: PropagationConfig::default()
                .with_steps_per_period(self.config.steps_per_period)
                .with_scheme(self.config.scheme),
            fidelity_mode: self.config.fidelity_mode,
        }
    }

    fn lindblad_options(&self) -> GateOptions {
        let mut o = self.options();
        o.propagation = o.propagation.with_steps_per_period(self.config.lindblad_steps_per_period);
        o
    }

    pub fn cavity(&self) -> CavityState {
        match self.config.mean_photon {
            Some(nbar) => CavityState::Thermal(nbar),
            None => CavityState::Fock(self.config.photon_n),
        }
    }

    pub fn kappas(&self) -> Vec<f64> {
        match self.config.kappa_ladder {
            Some(s) => s.linear(),
            None => {
                let kappa = rate_from_lifetime_ps(self.config.cavity_lifetime_ps);
                Sweep { start: 0.0, stop: 2.0 * kappa, count: 5 }.linear()
            }
        }
    }

    pub fn separations(&self, delta_a: f64) -> Vec<f64> {
        match self.config.separation_ladder {
            Some(s) => s.geometric(),
            None => Sweep { start: 0.1 * delta_a, stop: 1.6 * delta_a, count: 5 }.geometric(),
        }
    }

    pub fn run(&self, schedule: &GateSchedule, approximations: &ApproximationReport) -> Result<Outcome, Error> {
        let cutoff = schedule.params.photon_cutoff;
        let padded = schedule.with_cutoff(cutoff + GUARD_PAD);
        let (json, csv, base, check) = match self.experiment {
            Experiment::Params => {
                let probe = |s: &GateSchedule| Ok::<_, Error>(gate_probe(&run_cz(s, self.model_level, self.cavity(), &self.options())?));
                let json = to_json(&ParamsReport {
                    schedule,
                    residuals: schedule.residuals(),
                    approximations,
                    lab_identity_residuals: schedule.params.lab.map(|l| l.identity_residuals(schedule.delta_solved)),
                });
                (Some(json), None, probe(schedule)?, probe(&padded)?)
            }
            Experiment::TruthTable => {
                let report = run_cz(schedule, self.model_level, self.cavity(), &self.options())?;
                let check = gate_probe(&run_cz(&padded, self.model_level, self.cavity(), &self.options())?);
                let rows = truth_rows(&report);
                let csv = Csv {
                    header: vec!["state", "phase_re", "phase_im"],
                    rows: rows.iter().map(|r| vec![Cell::Text(r.state.into()), r.phase[0].into(), r.phase[1].into()]).collect(),
                };
                let json = to_json(&TruthTable::new(&report, rows));
                (Some(json), Some(csv), gate_probe(&report), check)
            }
            Experiment::PhotonSweep => {
                let sweep = |s: &GateSchedule| photon_sweep(s, self.model_level, &self.photon_numbers, &self.options());
                let rows: Vec<SweepRow> = sweep(schedule)?
                    .iter()
                    .map(|s| SweepRow {
                        n: s.photon_n,
                        fidelity: s.fidelity,
                        leakage: s.leakage,
                        phase_pp: complex(s.matrix[(0, 0)]),
                        phase_mm: complex(s.matrix[(3, 3)]),
                    })
                    .collect();
                let check: Vec<f64> = sweep(&padded)?
                    .iter()
                    .flat_map(|s| [s.fidelity, s.matrix[(0, 0)].re, s.matrix[(0, 0)].im, s.matrix[(3, 3)].re, s.matrix[(3, 3)].im])
                    .collect();
                let base = rows.iter().flat_map(|r| [r.fidelity, r.phase_pp[0], r.phase_pp[1], r.phase_mm[0], r.phase_mm[1]]).collect();
                let csv = Csv {
                    header: vec!["n", "fidelity", "leakage", "phase_pp_re", "phase_pp_im", "phase_mm_re", "phase_mm_im"],
                    rows: rows
                        .iter()
                        .map(|r| {
                            vec![
                                Cell::Int(r.n),
                                r.fidelity.into(),
                                r.leakage.into(),
                                r.phase_pp[0].into(),
                                r.phase_pp[1].into(),
                                r.phase_mm[0].into(),
                                r.phase_mm[1].into(),
                            ]
                        })
                        .collect(),
                };
                (Some(to_json(&rows)), Some(csv), base, check)
            }
            Experiment::Compare => {
                let numeric = run_cz(schedule, self.model_level, self.cavity(), &self.options())?;
                let analytic = run_cz(schedule, ModelLevel::Analytic, self.cavity(), &self.options())?;
                let check = gate_probe(&run_cz(&padded, self.model_level, self.cavity(), &self.options())?);
                let json = to_json(&Compare {
                    fidelity_mode: self.config.fidelity_mode,
                    cavity_state: self.cavity(),
                    t_gate_ps: schedule.t_gate_ps,
                    numeric: CompareSide::new(&numeric),
                    analytic: CompareSide::new(&analytic),
                    fidelity_gap: analytic.avg_fidelity - numeric.avg_fidelity,
                });
                (Some(json), None, gate_probe(&numeric), check)
            }
            Experiment::Parallel => {
                let options = self.options();
                let delta_a = schedule.delta_solved;
                let rows: Vec<ParallelRow> = self
                    .separations(delta_a)
                    .into_iter()
                    .map(|sep| {
                        run_parallel(schedule, delta_a + sep, &options).map(|r| ParallelRow {
                            delta_separation_mev: r.separation,
                            delta_b_mev: r.delta_b,
                            crosstalk_error: r.crosstalk_error,
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let first = rows.first().ok_or_else(|| Error::InvalidParameter("empty separation ladder".into()))?;
                let check = run_parallel(&padded, first.delta_b_mev, &options)?.crosstalk_error;
                let csv = Csv {
                    header: vec!["delta_separation_mev", "crosstalk_error"],
                    rows: rows.iter().map(|r| vec![r.delta_separation_mev.into(), r.crosstalk_error.into()]).collect(),
                };
                let base = vec![first.crosstalk_error];
                (Some(to_json(&rows)), Some(csv), base, vec![check])
            }
            Experiment::Decoherence => {
                let options = self.lindblad_options();
                let points = decoherence_scan(schedule, &self.kappas(), &options)?;
                let last = *points.last().ok_or_else(|| Error::InvalidParameter("empty kappa ladder".into()))?;
                let check = decoherence_scan(&padded, &[last.kappa], &options)?[0];
                let csv = Csv {
                    header: vec!["kappa_mev", "fidelity", "tau_eff_ps"],
                    rows: points.iter().map(|p| vec![p.kappa.into(), p.fidelity.into(), p.tau_eff_ps.into()]).collect(),
                };
                (Some(to_json(&points)), Some(csv), vec![last.fidelity, last.coherence], vec![check.fidelity, check.coherence])
            }
            Experiment::SingleQubit => {
                let block = |s: &GateSchedule, t: f64| -> Result<CMatrix, Error> {
                    let op = single_qubit_rot(&s.params, 0, t)?;
                    let idx = |level: usize| op.space.index(&[level, UP], 0);
                    let ids = [idx(UP)?, idx(DOWN)?];
                    Ok(CMatrix::from_fn(2, 2, |i, j| op.entries[(ids[i], ids[j])]))
                };
                let t_not = not_gate_time(&schedule.params)?;
                let t_half = half_pi_time(&schedule.params)?;
                let (not_u, half_u) = (block(schedule, t_not)?, block(schedule, t_half)?);
                let flatten = |m: &CMatrix| m.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<f64>>();
                let base = [flatten(&not_u), flatten(&half_u)].concat();
                let check = [flatten(&block(&padded, t_not)?), flatten(&block(&padded, t_half)?)].concat();
                let json = to_json(&SingleQubit {
                    raman_coupling_mev: schedule.params.omega1 * schedule.params.omega3 / schedule.params.delta2,
                    not_time_natural: t_not,
                    not_time_ps: natural_to_ps(t_not),
                    half_pi_time_natural: t_half,
                    half_pi_time_ps: natural_to_ps(t_half),
                    not_unitary: matrix_rows(&not_u),
                    half_pi_unitary: matrix_rows(&half_u),
                });
                (Some(json), None, base, check)
            }
        };
        let drift = base.iter().zip(&check).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let drift = if base.len() == check.len() && drift.is_finite() { drift } else { f64::INFINITY };
        Ok(Outcome {
            json,
            csv,
            guard: GuardResult {
                cutoff,
                check_cutoff: cutoff + GUARD_PAD,
                drift,
                tolerance: GUARD_TOLERANCE,
                passed: drift < GUARD_TOLERANCE,
            },
        })
    }
}

/// Fidelity and truth-table phases of a gate run.
fn gate_probe(r: &GateReport) -> Vec<f64> {
    let mut v = vec![r.avg_fidelity];
    v.extend(r.truth_table_phases.iter().flat_map(|z| [z.re, z.im]));
    v
}

const STATE_LABELS: [&str; 4] = ["++", "+-", "-+", "--"];

fn truth_rows(r: &GateReport) -> Vec<TruthRow> {
    STATE_LABELS
        .iter()
        .zip(r.truth_table_phases)
        .map(|(state, z)| TruthRow { state, phase: complex(z), arg: z.arg(), modulus: z.norm() })
        .collect()
}

#[derive(Serialize)]
struct ParamsReport<'a> {
    schedule: &'a GateSchedule,
    residuals: ScheduleResiduals,
    approximations: &'a ApproximationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    lab_identity_residuals: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct TruthRow {
    state: &'static str,
    phase: [f64; 2],
    arg: f64,
    modulus: f64,
}

#[derive(Serialize)]
struct TruthTable {
    model_level: ModelLevel,
    fidelity_mode: FidelityMode,
    cavity_state: CavityState,
    phases: Vec<TruthRow>,
    fidelity: f64,
    local_z_corrections: Option<[f64; 2]>,
    leakage: f64,
    valence_population: f64,
    up_down_matrix: Vec<Vec<[f64; 2]>>,
    t_gate_natural: f64,
    t_gate_ps: f64,
}

impl TruthTable {
    fn new(r: &GateReport, phases: Vec<TruthRow>) -> Self {
        Self {
            model_level: r.model_level,
            fidelity_mode: r.fidelity_mode,
            cavity_state: r.cavity_state,
            phases,
            fidelity: r.avg_fidelity,
            local_z_corrections: r.sectors[0].corrections,
            leakage: r.leakage,
            valence_population: r.valence_population,
            up_down_matrix: matrix_rows(&r.up_down_matrix),
            t_gate_natural: r.t_gate_natural,
            t_gate_ps: r.t_gate_ps,
        }
    }
}

#[derive(Serialize)]
struct SweepRow {
    n: usize,
    fidelity: f64,
    leakage: f64,
    phase_pp: [f64; 2],
    phase_mm: [f64; 2],
}

#[derive(Serialize)]
struct CompareSide {
    model_level: ModelLevel,
    fidelity: f64,
    leakage: f64,
    valence_population: f64,
    local_z_corrections: Option<[f64; 2]>,
    phases: Vec<TruthRow>,
}

impl CompareSide {
    fn new(r: &GateReport) -> Self {
        Self {
            model_level: r.model_level,
            fidelity: r.avg_fidelity,
            leakage: r.leakage,
            valence_population: r.valence_population,
            local_z_corrections: r.sectors[0].corrections,
            phases: truth_rows(r),
        }
    }
}

#[derive(Serialize)]
struct Compare {
    fidelity_mode: FidelityMode,
    cavity_state: CavityState,
    t_gate_ps: f64,
    numeric: CompareSide,
    analytic: CompareSide,
    fidelity_gap: f64,
}

#[derive(Serialize)]
struct ParallelRow {
    delta_separation_mev: f64,
    delta_b_mev: f64,
    crosstalk_error: f64,
}

#[derive(Serialize)]
struct SingleQubit {
    raman_coupling_mev: f64,
    not_time_natural: f64,
    not_time_ps: f64,
    half_pi_time_natural: f64,
    half_pi_time_ps: f64,
    /// Dot 0 on `(↑, ↓)`, cavity in vacuum.
    not_unitary: Vec<Vec<[f64; 2]>>,
    half_pi_unitary: Vec<Vec<[f64; 2]>>,
}
