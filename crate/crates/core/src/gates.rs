//! Conditional-phase gate synthesis and evaluation.
//!
//! The gate closes the cavity loop (`Δt = 2π`), fixes the geometric phase
//! (`A²t/4Δ = π/2`) and the laser phase (`Bt = 2kπ + π/2`). The solvers here
//! pick couplings that satisfy all three; the runners propagate the pair at a
//! chosen model level and compare against `diag(−1, 1, 1, 1)` in the `±`
//! basis.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{
    build_single_qubit, effective_pm_hamiltonian, effective_sz_hamiltonian, interaction_hamiltonian,
    HamiltonianLevel,
};
use crate::hilbert::{
    local_pm_rotation, max_abs, partial_trace_cavity, plus_minus_register, plus_minus_state, sign_patterns,
    thermal_density, thermal_distribution, CMatrix, CVector, LevelBasis, Operator, Sign, SpaceDescriptor,
    C64, ONE, PAIR_SIGNS, PLUS, VALENCE, ZERO,
};
use crate::model::{derive_couplings, natural_to_ps, DerivedCouplings, ModelParams, DEFAULT_PHOTON_CUTOFF};
use crate::propagation::{
    analytic_evolution, const_propagator, evolve_td_columns, lindblad_channel, PropagationConfig,
};

/// Positive root of `Δ = (gΩ₂/2)(1/Δ₁ + 1/(Δ₁+Δ))`, i.e. of
/// `Δ₁Δ² + (Δ₁² − gΩ₂/2)Δ − gΩ₂Δ₁ = 0`.
pub fn solve_delta(g: f64, omega2: f64, delta1: f64) -> Result<f64> {
    for (name, v) in [("g", g), ("omega2", omega2)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
        }
    }
    if !delta1.is_finite() || delta1 <= 0.0 {
        return Err(Error::InvalidParameter(format!("delta1 must be positive, got {delta1}")));
    }
    let c = g * omega2;
    if c == 0.0 {
        return Ok(0.0);
    }
    let b = delta1 * delta1 - 0.5 * c;
    let disc = (b * b + 4.0 * delta1 * c * delta1).sqrt();
    // cancellation-free form of (−b + √disc)/(2Δ₁)
    let mut root = if b > 0.0 { 2.0 * c * delta1 / (b + disc) } else { (disc - b) / (2.0 * delta1) };
    let f = |x: f64| delta1 * x * x + b * x - c * delta1;
    let df = |x: f64| 2.0 * delta1 * x + b;
    root -= f(root) / df(root);
    assert!(root > 0.0, "quadratic has a positive root for positive inputs");
    Ok(root)
}

/// `Δ − (gΩ₂/2)(1/Δ₁ + 1/(Δ₁+Δ))`.
pub fn delta_residual(g: f64, omega2: f64, delta1: f64, delta: f64) -> f64 {
    delta - 0.5 * g * omega2 * (1.0 / delta1 + 1.0 / (delta1 + delta))
}

/// Cavity detuning demanded by the laser-phase condition for winding `k`.
pub fn target_delta(omega1: f64, omega3: f64, delta2: f64, k: u32) -> f64 {
    4.0 * PI * omega1 * omega3 / (delta2 * laser_phase(k))
}

fn laser_phase(k: u32) -> f64 {
    2.0 * PI * k as f64 + 0.5 * PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSchedule {
    pub dot_pair: (usize, usize),
    pub k: u32,
    pub delta_solved: f64,
    /// Set when the schedule was solved for the cavity coupling.
    pub g_required: Option<f64>,
    /// Set when the schedule was solved for the laser product `Ω₁Ω₃`.
    pub omega_product_required: Option<f64>,
    pub t_gate_natural: f64,
    pub t_gate_ps: f64,
    pub couplings: DerivedCouplings,
    /// Complete two-dot parameter set realizing the schedule.
    pub params: ModelParams,
}

/// Deviations of a schedule from the gate conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResiduals {
    /// `Δt − 2π`.
    pub closure: f64,
    /// `Bt − (2kπ + π/2)`.
    pub laser_phase: f64,
    /// `A²t/4Δ − π/2`.
    pub geometric_phase: f64,
    /// Self-consistency of `Δ` with its own coupling.
    pub delta_fixed_point: f64,
}

impl ScheduleResiduals {
    pub fn max_abs(&self) -> f64 {
        [self.closure, self.laser_phase, self.geometric_phase, self.delta_fixed_point]
            .iter()
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl GateSchedule {
    fn assemble(params: ModelParams, k: u32, g_required: Option<f64>, omega_product_required: Option<f64>) -> Result<Self> {
        params.validate()?;
        let delta_solved = params.delta[0];
        let t = 2.0 * PI / delta_solved;
        Ok(Self {
            dot_pair: (0, 1),
            k,
            delta_solved,
            g_required,
            omega_product_required,
            t_gate_natural: t,
            t_gate_ps: natural_to_ps(t),
            couplings: derive_couplings(&params, 0)?,
            params,
        })
    }

    pub fn residuals(&self) -> ScheduleResiduals {
        let p = &self.params;
        let t = self.t_gate_natural;
        let d = self.delta_solved;
        let a = p.cavity_coupling(d);
        ScheduleResiduals {
            closure: d * t - 2.0 * PI,
            laser_phase: p.laser_coupling() * t - laser_phase(self.k),
            geometric_phase: a * a * t / (4.0 * d) - 0.5 * PI,
            delta_fixed_point: delta_residual(p.g, p.omega2, p.delta1, d),
        }
    }

    pub fn with_cutoff(&self, photon_cutoff: usize) -> Self {
        Self { params: self.params.with_cutoff(photon_cutoff), ..self.clone() }
    }

    fn pair(&self) -> [usize; 2] {
        [self.dot_pair.0, self.dot_pair.1]
    }
}

fn check_positive(values: &[(&str, f64)]) -> Result<()> {
    for &(name, v) in values {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Fixes `(Ω₁, Ω₂, Ω₃, Δ₁, Δ₂, k)` and solves for `g` by bisection on the
/// laser-phase condition, then for `Δ`.
pub fn solve_schedule(omega1: f64, omega2: f64, omega3: f64, delta1: f64, delta2: f64, k: u32) -> Result<GateSchedule> {
    check_positive(&[
        ("omega1", omega1),
        ("omega2", omega2),
        ("omega3", omega3),
        ("delta1", delta1),
        ("delta2", delta2),
    ])?;
    let target = target_delta(omega1, omega3, delta2, k);
    let residual = |g: f64| -> Result<f64> {
        let d = solve_delta(g, omega2, delta1)?;
        Ok(4.0 * PI * omega1 * omega3 / (d * delta2) - laser_phase(k))
    };
    // solve_delta is increasing in g, so the residual is decreasing
    let mut hi = target * delta1 / omega2;
    let mut doublings = 0;
    while residual(hi)? > 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 || !hi.is_finite() {
            return Err(Error::Infeasible(format!("no cavity coupling reaches delta = {target:e} for k = {k}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = if residual(lo)?.abs() < residual(hi)?.abs() { lo } else { hi };
    let r = residual(g)?;
    if r.abs() > 1e-10 * laser_phase(k) {
        return Err(Error::Convergence(format!("laser-phase residual {r:e} after bisection")));
    }
    let delta = solve_delta(g, omega2, delta1)?;
    let params = ModelParams::uniform(2, [omega1, omega2, omega3], g, delta1, delta2, delta, DEFAULT_PHOTON_CUTOFF)?;
    GateSchedule::assemble(params, k, Some(g), None)
}

/// Fixes the cavity coupling and solves for the laser product `Ω₁Ω₃`
/// (returned with `Ω₁ = Ω₃`).
pub fn solve_schedule_fixed_g(g: f64, omega2: f64, delta1: f64, delta2: f64, k: u32) -> Result<GateSchedule> {
    check_positive(&[("g", g), ("omega2", omega2), ("delta1", delta1), ("delta2", delta2)])?;
    let delta = solve_delta(g, omega2, delta1)?;
    let product = delta * delta2 * laser_phase(k) / (4.0 * PI);
    let omega = product.sqrt();
    let params = ModelParams::uniform(2, [omega, omega2, omega], g, delta1, delta2, delta, DEFAULT_PHOTON_CUTOFF)?;
    GateSchedule::assemble(params, k, None, Some(product))
}

/// The target gate `diag(−1, 1, 1, 1)` on `(++, +−, −+, −−)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdealGate;

impl IdealGate {
    pub fn matrix(basis: LevelBasis) -> CMatrix {
        let mut cz = CMatrix::identity(4, 4);
        cz[(0, 0)] = -ONE;
        match basis {
            LevelBasis::PlusMinus => cz,
            LevelBasis::UpDown => {
                let w = local_pm_rotation(2);
                let ww = w.kronecker(&w);
                &ww * cz * ww.adjoint()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMode {
    /// Process fidelity `|Tr M|²/d²`.
    Strict,
    /// Average gate fidelity `(|Tr M|² + Tr MM†)/(d(d+1))`.
    GlobalPhase,
    /// Average gate fidelity after the best `diag(1, e^{iφ})` on each qubit.
    LocalZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub fidelity: f64,
    /// `(φ₁, φ₂)` applied after the gate, for `LocalZ`.
    pub corrections: Option<[f64; 2]>,
}

/// Average gate fidelity of `M = U_ideal† U_real`.
pub fn average_fidelity(u_real: &CMatrix, u_ideal: &CMatrix) -> Result<f64> {
    check_square_pair(u_real, u_ideal)?;
    let d = u_real.nrows() as f64;
    let m = u_ideal.adjoint() * u_real;
    let tr = m.trace().norm_sqr();
    let mm = (&m * m.adjoint()).trace().re;
    Ok((tr + mm) / (d * (d + 1.0)))
}

fn check_square_pair(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: b.nrows(), found: a.nrows() });
    }
    Ok(())
}

/// `diag(1, e^{iφ₂}, e^{iφ₁}, e^{i(φ₁+φ₂)})`.
pub fn local_z(phi: [f64; 2]) -> CMatrix {
    let [p1, p2] = phi;
    CMatrix::from_diagonal(&CVector::from_vec(vec![
        ONE,
        C64::from_polar(1.0, p2),
        C64::from_polar(1.0, p1),
        C64::from_polar(1.0, p1 + p2),
    ]))
}

/// Best local phases: with `c = diag(U_real U_ideal†)`, maximizing
/// `|c₀ + e^{iφ₂}c₁ + e^{iφ₁}c₂ + e^{i(φ₁+φ₂)}c₃|` over `φ₂` leaves
/// `|c₀ + e^{iφ₁}c₂| + |c₁ + e^{iφ₁}c₃|`, maximized on a grid and refined by
/// golden-section search.
fn best_local_z(u_real: &CMatrix, u_ideal: &CMatrix) -> [f64; 2] {
    let x = u_real * u_ideal.adjoint();
    let c = [x[(0, 0)], x[(1, 1)], x[(2, 2)], x[(3, 3)]];
    let f = |p: f64| {
        let e = C64::from_polar(1.0, p);
        (c[0] + e * c[2]).norm() + (c[1] + e * c[3]).norm()
    };
    let grid = 720;
    let step = 2.0 * PI / grid as f64;
    let best = (0..grid)
        .map(|i| i as f64 * step)
        .fold((0.0, f64::MIN), |acc, p| {
            let v = f(p);
            if v > acc.1 {
                (p, v)
            } else {
                acc
            }
        })
        .0;
    let (mut a, mut b) = (best - step, best + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    let p1 = 0.5 * (a + b);
    let e = C64::from_polar(1.0, p1);
    let p2 = (c[0] + e * c[2]).arg() - (c[1] + e * c[3]).arg();
    [wrap(p1), wrap(p2)]
}

fn wrap(p: f64) -> f64 {
    let w = p.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

pub fn gate_fidelity(u_real: &CMatrix, u_ideal: &CMatrix, mode: FidelityMode) -> Result<FidelityResult> {
    check_square_pair(u_real, u_ideal)?;
    let d = u_real.nrows() as f64;
    match mode {
        FidelityMode::GlobalPhase => Ok(FidelityResult { fidelity: average_fidelity(u_real, u_ideal)?, corrections: None }),
        FidelityMode::Strict => {
            let tr = (u_ideal.adjoint() * u_real).trace().norm_sqr();
            Ok(FidelityResult { fidelity: tr / (d * d), corrections: None })
        }
        FidelityMode::LocalZ => {
            if u_real.nrows() != 4 {
                return Err(Error::DimensionMismatch { expected: 4, found: u_real.nrows() });
            }
            let phi = best_local_z(u_real, u_ideal);
            let corrected = local_z(phi) * u_real;
            Ok(FidelityResult { fidelity: average_fidelity(&corrected, u_ideal)?, corrections: Some(phi) })
        }
    }
}

/// Average gate fidelity of a channel on `d` levels against a unitary,
/// `F = (Σⱼ Tr[U Pⱼ U† E(Pⱼ)] + d²)/(d²(d+1))` over the two-qubit Pauli
/// products `Pⱼ`, with each `E(Pⱼ)` assembled from the channel applied to
/// the Pauli eigenstates.
pub fn channel_fidelity<F>(channel: F, target: &CMatrix) -> Result<f64>
where
    F: Fn(&CVector) -> Result<CMatrix> + Sync,
{
    if target.shape() != (4, 4) {
        return Err(Error::DimensionMismatch { expected: 4, found: target.nrows() });
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let e0 = CVector::from_vec(vec![ONE, ZERO]);
    let e1 = CVector::from_vec(vec![ZERO, ONE]);
    let sx = |s: f64| CVector::from_vec(vec![C64::new(h, 0.0), C64::new(h * s, 0.0)]);
    let sy = |s: f64| CVector::from_vec(vec![C64::new(h, 0.0), C64::new(0.0, h * s)]);
    // (eigenvalue, eigenvector) pairs of 1, X, Y, Z
    let paulis: Vec<Vec<(f64, CVector)>> = vec![
        vec![(1.0, e0.clone()), (1.0, e1.clone())],
        vec![(1.0, sx(1.0)), (-1.0, sx(-1.0))],
        vec![(1.0, sy(1.0)), (-1.0, sy(-1.0))],
        vec![(1.0, e0), (-1.0, e1)],
    ];
    let mut jobs = Vec::new();
    for (a, pa) in paulis.iter().enumerate() {
        for (b, pb) in paulis.iter().enumerate() {
            for (la, va) in pa {
                for (lb, vb) in pb {
                    jobs.push((a, b, la * lb, va.kronecker(vb)));
                }
            }
        }
    }
    let outputs: Vec<Result<CMatrix>> = jobs.par_iter().map(|(_, _, _, v)| channel(v)).collect();
    let mut images = vec![CMatrix::zeros(4, 4); 16];
    for ((a, b, l, _), out) in jobs.iter().zip(outputs) {
        images[a * 4 + b] += out? * C64::new(*l, 0.0);
    }
    let pauli_mats: Vec<CMatrix> = paulis
        .iter()
        .map(|p| p.iter().fold(CMatrix::zeros(2, 2), |acc, (l, v)| acc + v * v.adjoint() * C64::new(*l, 0.0)))
        .collect();
    let mut total = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            let p = pauli_mats[a].kronecker(&pauli_mats[b]);
            total += (target * p * target.adjoint() * &images[a * 4 + b]).trace().re;
        }
    }
    Ok((total + 16.0) / (16.0 * 5.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelLevel {
    /// Closed-form displacement propagator.
    Analytic,
    /// `S_z` model integrated numerically, then the laser phase applied.
    EffectiveNumeric,
    /// `±`-basis model (laser term included) integrated numerically.
    EffectivePm,
    /// Three-level model in the interaction picture, integrated numerically.
    FullNumeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityState {
    Fock(usize),
    Thermal(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOptions {
    pub propagation: PropagationConfig,
    pub fidelity_mode: FidelityMode,
}

impl Default for GateOptions {
    fn default() -> Self {
        Self { propagation: PropagationConfig::default(), fidelity_mode: FidelityMode::LocalZ }
    }
}

/// Gate restricted to one photon-number sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorReport {
    pub photon_n: usize,
    /// `⟨s, n| U |s′, n⟩` over `s, s′ ∈ (++, +−, −+, −−)`.
    pub matrix: CMatrix,
    pub fidelity: f64,
    pub corrections: Option<[f64; 2]>,
    /// Mean population that leaves the computational states at this photon
    /// number.
    pub leakage: f64,
    /// Mean population found with any dot in the valence level.
    pub valence_population: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateReport {
    pub model_level: ModelLevel,
    pub fidelity_mode: FidelityMode,
    pub cavity_state: CavityState,
    pub sectors: Vec<SectorReport>,
    /// Diagonal of the reference sector's matrix.
    pub truth_table_phases: [C64; 4],
    pub avg_fidelity: f64,
    /// `Σ pₙ Fₙ` over the sector fidelities.
    pub fock_weighted_fidelity: f64,
    pub leakage: f64,
    pub valence_population: f64,
    pub photon_spread: f64,
    /// Reference sector's gate in up/down coordinates.
    pub up_down_matrix: CMatrix,
    pub t_gate_natural: f64,
    pub t_gate_ps: f64,
}

/// `e^{−iθJ}` on the rows of `out`, `J = Σ S_z` over `dots`, for a space in
/// `±` coordinates.
fn apply_laser_frame(space: &SpaceDescriptor, dots: &[usize], theta: f64, out: &mut CMatrix) {
    for row in 0..out.nrows() {
        let levels = space.decompose(row).0;
        let j: f64 = dots.iter().map(|&d| if levels[d] == PLUS { 0.5 } else { -0.5 }).sum();
        let phase = C64::from_polar(1.0, -theta * j);
        out.row_mut(row).iter_mut().for_each(|z| *z *= phase);
    }
}

/// Computational input columns `|s, n⟩`, sector-major.
fn sector_inputs(space: &SpaceDescriptor, sectors: &[usize]) -> Result<CMatrix> {
    let mut cols = Vec::new();
    for &n in sectors {
        for signs in PAIR_SIGNS {
            cols.push(plus_minus_state(space, &signs, n)?.amplitudes);
        }
    }
    Ok(CMatrix::from_columns(&cols))
}

/// Propagates `inputs` through the gate at `level`.
fn propagate_gate(
    params: &ModelParams,
    driven: &[usize],
    t: f64,
    level: ModelLevel,
    inputs: &CMatrix,
    config: &PropagationConfig,
) -> Result<CMatrix> {
    match level {
        ModelLevel::Analytic => Ok(analytic_evolution(params, driven, t, true)?.entries * inputs),
        ModelLevel::EffectiveNumeric => {
            let h = effective_sz_hamiltonian(params, driven)?;
            let mut out = evolve_td_columns(&h, 0.0, t, inputs, config)?;
            apply_laser_frame(&h.space, driven, params.laser_coupling() * t, &mut out);
            Ok(out)
        }
        ModelLevel::EffectivePm => evolve_td_columns(&effective_pm_hamiltonian(params, driven)?, 0.0, t, inputs, config),
        ModelLevel::FullNumeric => evolve_td_columns(&interaction_hamiltonian(params, driven)?, 0.0, t, inputs, config),
    }
}

pub fn level_space(params: &ModelParams, level: ModelLevel) -> Result<SpaceDescriptor> {
    let h = match level {
        ModelLevel::FullNumeric => HamiltonianLevel::Interaction,
        _ => HamiltonianLevel::EffectiveSz,
    };
    h.space(params)
}

struct Realized {
    space: SpaceDescriptor,
    sectors: Vec<usize>,
    outputs: CMatrix,
}

fn realize(schedule: &GateSchedule, level: ModelLevel, sectors: &[usize], config: &PropagationConfig) -> Result<Realized> {
    let params = &schedule.params;
    if params.n_dots != 2 {
        return Err(Error::InvalidParameter(format!("gate runs need exactly two dots, got {}", params.n_dots)));
    }
    let space = level_space(params, level)?;
    let inputs = sector_inputs(&space, sectors)?;
    let outputs = propagate_gate(params, &schedule.pair(), schedule.t_gate_natural, level, &inputs, config)?;
    Ok(Realized { space, sectors: sectors.to_vec(), outputs })
}

fn sector_report(r: &Realized, idx: usize, mode: FidelityMode) -> Result<SectorReport> {
    let n = r.sectors[idx];
    let basis = sector_inputs(&r.space, &[n])?;
    let out = r.outputs.columns(idx * 4, 4);
    let matrix = basis.adjoint() * out;
    let fid = gate_fidelity(&matrix, &IdealGate::matrix(LevelBasis::PlusMinus), mode)?;
    let leakage = (0..4).map(|j| 1.0 - matrix.column(j).norm_squared()).sum::<f64>() / 4.0;
    let valence_population = if r.space.levels_per_dot > VALENCE {
        let mut total = 0.0;
        for row in 0..out.nrows() {
            if r.space.decompose(row).0.contains(&VALENCE) {
                total += out.row(row).norm_squared();
            }
        }
        total / 4.0
    } else {
        0.0
    };
    Ok(SectorReport { photon_n: n, matrix, fidelity: fid.fidelity, corrections: fid.corrections, leakage: leakage.max(0.0), valence_population })
}

/// Per-sector reports for several Fock inputs from a single propagation.
pub fn photon_sweep(
    schedule: &GateSchedule,
    level: ModelLevel,
    photon_numbers: &[usize],
    options: &GateOptions,
) -> Result<Vec<SectorReport>> {
    let r = realize(schedule, level, photon_numbers, &options.propagation)?;
    (0..photon_numbers.len()).map(|i| sector_report(&r, i, options.fidelity_mode)).collect()
}

/// Maximum difference between sector fidelities.
pub fn fidelity_spread(sectors: &[SectorReport]) -> f64 {
    let (lo, hi) = sectors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.fidelity), h.max(s.fidelity)));
    if sectors.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Rows `⟨s|` of the computational states in register coordinates.
fn register_projector(space: &SpaceDescriptor) -> Result<CMatrix> {
    let rows: Vec<CVector> = PAIR_SIGNS
        .iter()
        .map(|s| plus_minus_register(space, s))
        .collect::<Result<_>>()?;
    Ok(CMatrix::from_columns(&rows).adjoint())
}

/// Channel fidelity with the cavity in a thermal state, computed from
/// `Tr_cav[U (ρ ⊗ ρ_th) U†]`.
fn thermal_channel_fidelity(r: &Realized, mean_photon: f64, target: &CMatrix) -> Result<f64> {
    let space = r.space;
    let inputs = sector_inputs(&space, &r.sectors)?;
    let q = register_projector(&space)?;
    let u = &r.outputs;
    channel_fidelity(
        |c: &CVector| {
            let reg = q.adjoint() * c;
            let rho = thermal_density(&space, mean_photon, &reg)?;
            let sub = inputs.adjoint() * &rho.entries * &inputs;
            let evolved = crate::hilbert::DensityMatrix::new(space, u * sub * u.adjoint())?;
            let reduced = partial_trace_cavity(&evolved)?;
            Ok(&q * reduced.entries * q.adjoint())
        },
        target,
    )
}

fn up_down_matrix(pm: &CMatrix) -> CMatrix {
    let w = local_pm_rotation(2);
    let ww = w.kronecker(&w);
    &ww * pm * ww.adjoint()
}

pub fn run_cz(schedule: &GateSchedule, level: ModelLevel, cavity: CavityState, options: &GateOptions) -> Result<GateReport> {
    let cutoff = schedule.params.photon_cutoff;
    let sectors: Vec<usize> = match cavity {
        CavityState::Fock(n) if n > cutoff => {
            return Err(Error::InvalidParameter(format!("photon number {n} exceeds cutoff {cutoff}")))
        }
        CavityState::Fock(n) => vec![n],
        CavityState::Thermal(_) => (0..=cutoff).collect(),
    };
    let r = realize(schedule, level, &sectors, &options.propagation)?;
    let reports: Vec<SectorReport> = (0..sectors.len())
        .map(|i| sector_report(&r, i, options.fidelity_mode))
        .collect::<Result<_>>()?;
    let reference = &reports[0];
    let ideal = IdealGate::matrix(LevelBasis::PlusMinus);
    let (avg_fidelity, weighted, leakage, valence) = match cavity {
        CavityState::Fock(_) => (reference.fidelity, reference.fidelity, reference.leakage, reference.valence_population),
        CavityState::Thermal(nbar) => {
            let p = thermal_distribution(nbar, cutoff)?;
            let weighted = reports.iter().zip(&p).map(|(s, w)| w * s.fidelity).sum::<f64>();
            let leak = reports.iter().zip(&p).map(|(s, w)| w * s.leakage).sum::<f64>();
            let val = reports.iter().zip(&p).map(|(s, w)| w * s.valence_population).sum::<f64>();
            // the reference sector's local corrections are applied to the
            // whole channel
            let target = match reference.corrections {
                Some(phi) => local_z(phi).adjoint() * &ideal,
                None => ideal.clone(),
            };
            let f = thermal_channel_fidelity(&r, nbar, &target)?;
            let f = match options.fidelity_mode {
                FidelityMode::Strict => (5.0 * f - 1.0) / 4.0,
                _ => f,
            };
            (f, weighted, leak, val)
        }
    };
    let m = &reference.matrix;
    Ok(GateReport {
        model_level: level,
        fidelity_mode: options.fidelity_mode,
        cavity_state: cavity,
        truth_table_phases: [m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(3, 3)]],
        avg_fidelity,
        fock_weighted_fidelity: weighted,
        leakage,
        valence_population: valence,
        photon_spread: fidelity_spread(&reports),
        up_down_matrix: up_down_matrix(m),
        sectors: reports,
        t_gate_natural: schedule.t_gate_natural,
        t_gate_ps: schedule.t_gate_ps,
    })
}

/// Fidelity of the numerically propagated `±`-basis model against the
/// closed-form `S_z` evolution (laser phase included) on the vacuum sector.
pub fn rwa_fidelity(params: &ModelParams, t: f64, config: &PropagationConfig) -> Result<f64> {
    let space = HamiltonianLevel::EffectivePm.space(params)?;
    let inputs = sector_inputs(&space, &[0])?;
    let pm = propagate_gate(params, &[0, 1], t, ModelLevel::EffectivePm, &inputs, config)?;
    let exact = propagate_gate(params, &[0, 1], t, ModelLevel::Analytic, &inputs, config)?;
    average_fidelity(&(inputs.adjoint() * pm), &(inputs.adjoint() * exact))
}

pub fn single_qubit_rot(params: &ModelParams, dot: usize, t: f64) -> Result<Operator> {
    const_propagator(&build_single_qubit(params, dot)?, t)
}

fn raman_coupling(params: &ModelParams) -> Result<f64> {
    let c = params.omega1 * params.omega3 / params.delta2;
    if c <= 0.0 {
        return Err(Error::Infeasible("single-qubit rotation needs omega1 and omega3".into()));
    }
    Ok(c)
}

/// `t` with `2(Ω₁Ω₃/Δ₂)t = π`.
pub fn not_gate_time(params: &ModelParams) -> Result<f64> {
    Ok(PI / (2.0 * raman_coupling(params)?))
}

/// `t` with `2(Ω₁Ω₃/Δ₂)t = π/2`.
pub fn half_pi_time(params: &ModelParams) -> Result<f64> {
    Ok(PI / (4.0 * raman_coupling(params)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelReport {
    pub delta_a: f64,
    pub delta_b: f64,
    pub separation: f64,
    /// Closure time of pair a; both pairs are evolved for this long.
    pub t_natural: f64,
    pub fidelity: f64,
    pub crosstalk_error: f64,
}

/// Four dots, pairs `(0, 1)` and `(2, 3)`, both driven through the shared
/// cavity, pair a at the schedule's detuning and pair b at `delta_b`.
/// Compares the joint evolution over pair a's closure time with
/// `CZ_a ⊗ U_b`, where `U_b` is pair b's own closed-form evolution.
pub fn run_parallel(schedule: &GateSchedule, delta_b: f64, options: &GateOptions) -> Result<ParallelReport> {
    check_positive(&[("delta_b", delta_b)])?;
    let base = &schedule.params;
    let delta_a = schedule.delta_solved;
    let mut params = base.clone();
    params.n_dots = 4;
    params.delta = vec![delta_a, delta_a, delta_b, delta_b];
    params.validate()?;
    let t = schedule.t_gate_natural;

    let space = HamiltonianLevel::EffectiveSz.space(&params)?;
    let patterns = sign_patterns(4);
    let inputs = CMatrix::from_columns(
        &patterns
            .iter()
            .map(|s| plus_minus_state(&space, s, 0).map(|v| v.amplitudes))
            .collect::<Result<Vec<_>>>()?,
    );
    let joint = propagate_gate(&params, &[0, 1, 2, 3], t, ModelLevel::EffectiveNumeric, &inputs, &options.propagation)?;

    let mut pair_b = base.clone();
    pair_b.delta = vec![delta_b, delta_b];
    let u_b = analytic_evolution(&pair_b, &[0, 1], t, true)?;
    let pair_space = u_b.space;
    let mut reference = CMatrix::zeros(space.total_dim(), patterns.len());
    for (col, s) in patterns.iter().enumerate() {
        let cz_phase = if s[0] == Sign::Plus && s[1] == Sign::Plus { -ONE } else { ONE };
        let b_in = plus_minus_state(&pair_space, &s[2..], 0)?.amplitudes;
        let b_out = &u_b.entries * b_in;
        for (i, z) in b_out.iter().enumerate() {
            if *z == ZERO {
                continue;
            }
            let (levels_b, n) = pair_space.decompose(i);
            let row = space.index(&[s[0].index(), s[1].index(), levels_b[0], levels_b[1]], n)?;
            reference[(row, col)] = cz_phase * z;
        }
    }
    let overlap = reference.adjoint() * joint;
    let fidelity = average_fidelity(&overlap, &CMatrix::identity(16, 16))?;
    Ok(ParallelReport {
        delta_a,
        delta_b,
        separation: (delta_b - delta_a).abs(),
        t_natural: t,
        fidelity,
        crosstalk_error: 1.0 - fidelity,
    })
}

/// Drives pair `(0, 1)` of four dots, leaving `(2, 3)` undriven, and
/// returns `max |U − U_pair ⊗ 1|` over the vacuum inputs.
pub fn spectator_defect(schedule: &GateSchedule, options: &GateOptions) -> Result<f64> {
    let mut params = schedule.params.clone();
    params.n_dots = 4;
    params.delta = vec![schedule.delta_solved; 4];
    let t = schedule.t_gate_natural;
    let space = HamiltonianLevel::EffectiveSz.space(&params)?;
    let patterns = sign_patterns(4);
    let inputs = CMatrix::from_columns(
        &patterns
            .iter()
            .map(|s| plus_minus_state(&space, s, 0).map(|v| v.amplitudes))
            .collect::<Result<Vec<_>>>()?,
    );
    let joint = propagate_gate(&params, &[0, 1], t, ModelLevel::EffectiveNumeric, &inputs, &options.propagation)?;

    let pair_space = HamiltonianLevel::EffectiveSz.space(&schedule.params)?;
    let pair_inputs = sector_inputs(&pair_space, &[0])?;
    let pair = propagate_gate(&schedule.params, &[0, 1], t, ModelLevel::EffectiveNumeric, &pair_inputs, &options.propagation)?;
    let mut expected = CMatrix::zeros(space.total_dim(), patterns.len());
    for (col, s) in patterns.iter().enumerate() {
        let a_col = PAIR_SIGNS.iter().position(|p| p[..] == s[..2]).unwrap_or(0);
        for i in 0..pair_space.total_dim() {
            let (levels_a, n) = pair_space.decompose(i);
            let row = space.index(&[levels_a[0], levels_a[1], s[2].index(), s[3].index()], n)?;
            expected[(row, col)] = pair[(i, a_col)];
        }
    }
    Ok(max_abs(&(joint - expected)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherencePoint {
    pub kappa: f64,
    pub fidelity: f64,
    /// `|E(|++⟩⟨−−|)₊₊,₋₋|` relative to the lossless value.
    pub coherence: f64,
    /// `t_gate/(−ln coherence)` in ps; `None` when nothing decays.
    pub tau_eff_ps: Option<f64>,
}

/// Gate channels `E(|j⟩⟨k|)` on the computational states in `±`
/// coordinates, laser phase included, cavity starting in vacuum.
fn lossy_gate_channel(schedule: &GateSchedule, kappa: f64, config: &PropagationConfig) -> Result<Vec<Vec<CMatrix>>> {
    let params = &schedule.params;
    let h = effective_sz_hamiltonian(params, &schedule.pair())?;
    let space = h.space;
    let inputs = sector_inputs(&space, &[0])?;
    let t = schedule.t_gate_natural;
    let raw = lindblad_channel(&h, kappa, &inputs, 0.0, t, config)?;
    let q = register_projector(&space)?;
    let reg_space = space.register();
    let mut phases = CMatrix::identity(reg_space.total_dim(), reg_space.total_dim());
    apply_laser_frame(&reg_space, &schedule.pair(), params.laser_coupling() * t, &mut phases);
    let frame = &q * phases * q.adjoint();
    raw.into_iter()
        .map(|row| {
            row.into_iter()
                .map(|e| {
                    let reduced = partial_trace_cavity(&crate::hilbert::DensityMatrix::new(space, e)?)?;
                    Ok(&frame * (&q * reduced.entries * q.adjoint()) * frame.adjoint())
                })
                .collect()
        })
        .collect()
}

/// Average gate fidelity of a channel given by its action on matrix units.
fn unit_channel_fidelity(units: &[Vec<CMatrix>], target: &CMatrix) -> f64 {
    let d = units.len();
    let mut fe = ZERO;
    for j in 0..d {
        for k in 0..d {
            let v = target.adjoint() * &units[j][k] * target;
            fe += v[(j, k)];
        }
    }
    let fe = fe.re / (d * d) as f64;
    (d as f64 * fe + 1.0) / (d as f64 + 1.0)
}

/// Runs the effective-level gate under cavity loss for each `κ`.
pub fn decoherence_scan(schedule: &GateSchedule, kappas: &[f64], options: &GateOptions) -> Result<Vec<DecoherencePoint>> {
    let ideal = IdealGate::matrix(LevelBasis::PlusMinus);
    let lossless = lossy_gate_channel(schedule, 0.0, &options.propagation)?;
    let unitary = run_cz(schedule, ModelLevel::EffectiveNumeric, CavityState::Fock(0), options)?;
    let target = match unitary.sectors[0].corrections {
        Some(phi) => local_z(phi).adjoint() * &ideal,
        None => ideal,
    };
    let c0 = lossless[0][3][(0, 3)].norm();
    kappas
        .iter()
        .map(|&kappa| {
            let units = if kappa == 0.0 { lossless.clone() } else { lossy_gate_channel(schedule, kappa, &options.propagation)? };
            let mut fidelity = unit_channel_fidelity(&units, &target);
            if options.fidelity_mode == FidelityMode::Strict {
                fidelity = (5.0 * fidelity - 1.0) / 4.0;
            }
            let coherence = units[0][3][(0, 3)].norm() / c0;
            let tau_eff_ps = if coherence < 1.0 {
                Some(schedule.t_gate_ps / -coherence.ln())
            } else {
                None
            };
            Ok(DecoherencePoint { kappa, fidelity, coherence, tau_eff_ps })
        })
        .collect()
}
