//! Hamiltonians of the driven dot–cavity system at every level of
//! approximation.
//!
//! Every time-dependent Hamiltonian here is a finite sum of harmonic terms
//! `cₖ e^{iωₖt} Oₖ`, stored as a [`HarmonicHamiltonian`]. Evaluating at a
//! time gives a dense [`Operator`]; the integrators use the term list
//! directly.
//!
//! Coordinates: the lab-frame and interaction-picture models live on
//! three-level dots in up/down coordinates. The raw effective model and the
//! single-qubit Hamiltonian use two-level up/down coordinates. The `±`-basis
//! and `S_z` models use plus/minus coordinates, so `S_z` is diagonal there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilator, creator, dot_transition_op, make_space, max_abs, number_op, s_minus, s_plus, s_z,
    CMatrix, LevelBasis, Operator, SpaceDescriptor, SparseMatrix, C64, DOWN, ONE, UP, VALENCE, ZERO,
};
use crate::model::{derive_couplings, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianLevel {
    Lab,
    Interaction,
    EffectiveRaw,
    EffectivePm,
    EffectiveSz,
    SingleQubit,
}

impl HamiltonianLevel {
    pub fn levels_per_dot(self) -> usize {
        match self {
            HamiltonianLevel::Lab | HamiltonianLevel::Interaction => 3,
            _ => 2,
        }
    }

    pub fn basis(self) -> LevelBasis {
        match self {
            HamiltonianLevel::EffectivePm | HamiltonianLevel::EffectiveSz => LevelBasis::PlusMinus,
            _ => LevelBasis::UpDown,
        }
    }

    pub fn space(self, params: &ModelParams) -> Result<SpaceDescriptor> {
        Ok(make_space(params.n_dots, self.levels_per_dot(), params.photon_cutoff)?.with_basis(self.basis()))
    }
}

#[derive(Debug, Clone)]
pub struct HarmonicTerm {
    pub amplitude: C64,
    /// Angular frequency of the phase factor `e^{iωt}`.
    pub frequency: f64,
    pub op: CMatrix,
    sparse: SparseMatrix,
}

impl HarmonicTerm {
    pub fn coefficient(&self, t: f64) -> C64 {
        self.amplitude * C64::from_polar(1.0, self.frequency * t)
    }

    pub fn sparse(&self) -> &SparseMatrix {
        &self.sparse
    }
}

/// `H(t) = Σₖ cₖ e^{iωₖt} Oₖ`.
#[derive(Debug, Clone)]
pub struct HarmonicHamiltonian {
    pub space: SpaceDescriptor,
    pub terms: Vec<HarmonicTerm>,
}

impl HarmonicHamiltonian {
    pub fn new(space: SpaceDescriptor) -> Self {
        Self { space, terms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn push(&mut self, amplitude: C64, frequency: f64, op: CMatrix) {
        if amplitude == ZERO {
            return;
        }
        let sparse = SparseMatrix::from_dense(&op);
        if sparse.nnz() == 0 {
            return;
        }
        self.terms.push(HarmonicTerm { amplitude, frequency, op, sparse });
    }

    /// Adds `c e^{iωt} O + h.c.`.
    pub fn push_with_conjugate(&mut self, amplitude: C64, frequency: f64, op: CMatrix) {
        let adj = op.adjoint();
        self.push(amplitude.conj(), -frequency, adj);
        self.push(amplitude, frequency, op);
    }

    /// Adds a time-independent Hermitian term.
    pub fn push_static(&mut self, op: CMatrix) {
        self.push(ONE, 0.0, op);
    }

    pub fn extend(&mut self, other: HarmonicHamiltonian) -> Result<()> {
        if other.space != self.space {
            return Err(Error::SpaceMismatch(format!("{:?} vs {:?}", self.space, other.space)));
        }
        self.terms.extend(other.terms);
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        self.terms.iter().all(|t| t.frequency == 0.0)
    }

    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.frequency.abs()).fold(0.0, f64::max)
    }

    pub fn at(&self, t: f64) -> Operator {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for term in &self.terms {
            m += &term.op * term.coefficient(t);
        }
        Operator { space: self.space, entries: m, is_hermitian: true, is_unitary: false }
    }

    /// Sparse form of `Σₛ wₛ H(tₛ)`.
    pub fn combine(&self, samples: &[(f64, f64)]) -> SparseMatrix {
        let mut entries = Vec::with_capacity(self.terms.iter().map(|t| t.sparse.nnz()).sum());
        for term in &self.terms {
            let c: C64 = samples.iter().map(|&(t, w)| term.coefficient(t) * w).sum();
            if c == ZERO {
                continue;
            }
            entries.extend(term.sparse.entries.iter().map(|&(i, j, z)| (i, j, z * c)));
        }
        SparseMatrix { dim: self.dim(), entries }
    }
}

fn sigma(space: &SpaceDescriptor, dot: usize, m: usize, n: usize) -> Result<CMatrix> {
    Ok(dot_transition_op(space, dot, m, n)?.entries)
}

fn check_dots(params: &ModelParams, dots: &[usize]) -> Result<()> {
    if let Some(&d) = dots.iter().find(|&&d| d >= params.n_dots) {
        return Err(Error::UnknownDot(d));
    }
    Ok(())
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Bare Hamiltonian `H₀` and the lab-frame drive `H_int(t)`.
pub fn lab_hamiltonian(params: &ModelParams) -> Result<(Operator, HarmonicHamiltonian)> {
    params.validate()?;
    let lab = params.lab.ok_or(Error::MissingLabFrequencies)?;
    let space = HamiltonianLevel::Lab.space(params)?;
    let d = space.total_dim();
    let mut h0 = CMatrix::zeros(d, d);
    let a = annihilator(&space).entries;
    let mut hint = HarmonicHamiltonian::new(space);
    for i in 0..params.n_dots {
        h0 += sigma(&space, i, UP, UP)? * real(lab.omega_up)
            + sigma(&space, i, DOWN, DOWN)? * real(lab.omega_down)
            + sigma(&space, i, VALENCE, VALENCE)? * real(lab.omega_v);
        let up_v = sigma(&space, i, UP, VALENCE)?;
        let down_v = sigma(&space, i, DOWN, VALENCE)?;
        hint.push_with_conjugate(real(params.omega1), -lab.omega_l1, up_v.clone());
        hint.push_with_conjugate(real(params.omega2), -lab.omega_l2, up_v);
        hint.push_with_conjugate(real(params.omega3), -lab.omega_l3, down_v.clone());
        hint.push_with_conjugate(real(params.g), 0.0, &a * down_v);
    }
    h0 += number_op(&space).entries * real(lab.omega_c);
    Ok((Operator::new(space, h0)?.hermitian(), hint))
}

pub fn build_lab(params: &ModelParams, t: f64) -> Result<(Operator, Operator)> {
    let (h0, hint) = lab_hamiltonian(params)?;
    Ok((h0, hint.at(t)))
}

/// Full three-level model in the interaction picture of `H₀`.
///
/// Dots listed in `driven_dots` see all three lasers; the others keep only
/// their cavity coupling (lasers off).
pub fn interaction_hamiltonian(params: &ModelParams, driven_dots: &[usize]) -> Result<HarmonicHamiltonian> {
    params.validate()?;
    check_dots(params, driven_dots)?;
    let space = HamiltonianLevel::Interaction.space(params)?;
    let a = annihilator(&space).entries;
    let mut h = HarmonicHamiltonian::new(space);
    for i in 0..params.n_dots {
        let up_v = sigma(&space, i, UP, VALENCE)?;
        let down_v = sigma(&space, i, DOWN, VALENCE)?;
        if driven_dots.contains(&i) {
            h.push_with_conjugate(real(params.omega2), params.delta1, up_v.clone());
            h.push_with_conjugate(real(params.omega1), params.delta2, up_v);
            h.push_with_conjugate(real(params.omega3), params.delta2, down_v.clone());
        }
        h.push_with_conjugate(real(params.g), params.delta1 + params.delta[i], &a * down_v);
    }
    Ok(h)
}

pub fn build_interaction(params: &ModelParams, t: f64) -> Result<Operator> {
    let all: Vec<usize> = (0..params.n_dots).collect();
    Ok(interaction_hamiltonian(params, &all)?.at(t))
}

/// Two-level model after eliminating the valence level, in up/down
/// coordinates (ac-Stark shifts omitted).
pub fn effective_raw_hamiltonian(params: &ModelParams, driven_dots: &[usize]) -> Result<HarmonicHamiltonian> {
    params.validate()?;
    check_dots(params, driven_dots)?;
    let space = HamiltonianLevel::EffectiveRaw.space(params)?;
    let ad = creator(&space).entries;
    let mut h = HarmonicHamiltonian::new(space);
    for &i in driven_dots {
        let c = derive_couplings(params, i)?;
        let ud = sigma(&space, i, UP, DOWN)?;
        let du = sigma(&space, i, DOWN, UP)?;
        h.push_static((&ud + &du) * real(params.omega1 * params.omega3 / params.delta2));
        // a†σ↑↓ e^{-iΔt} and its conjugate a σ↓↑ e^{iΔt}
        h.push_with_conjugate(real(c.a_coupling), -params.delta[i], &ad * ud);
    }
    Ok(h)
}

pub fn build_effective_raw(params: &ModelParams, t: f64, driven_dots: &[usize]) -> Result<Operator> {
    Ok(effective_raw_hamiltonian(params, driven_dots)?.at(t))
}

/// Two-level model in the `±` basis with the coupling normalization used by
/// the gate conditions: `A[(2S_z − S₋ + S₊)/4 · a†e^{−iΔt} + h.c.] + B S_z`.
pub fn effective_pm_hamiltonian(params: &ModelParams, driven_dots: &[usize]) -> Result<HarmonicHamiltonian> {
    params.validate()?;
    check_dots(params, driven_dots)?;
    let space = HamiltonianLevel::EffectivePm.space(params)?;
    let ad = creator(&space).entries;
    let mut h = HarmonicHamiltonian::new(space);
    for &i in driven_dots {
        let c = derive_couplings(params, i)?;
        let sz = s_z(&space, i)?.entries;
        let sp = s_plus(&space, i)?.entries;
        let sm = s_minus(&space, i)?.entries;
        let raise = (&sz * real(2.0) - &sm + &sp) * real(0.25);
        h.push_with_conjugate(real(c.a_coupling), -params.delta[i], &ad * raise);
        h.push_static(sz * real(c.b_coupling));
    }
    Ok(h)
}

pub fn build_effective_pm(params: &ModelParams, t: f64, driven_dots: &[usize]) -> Result<Operator> {
    Ok(effective_pm_hamiltonian(params, driven_dots)?.at(t))
}

/// Rotating-frame model `Σᵢ (A/2)(a†e^{−iΔⁱt} + a e^{iΔⁱt}) S_zⁱ` in the
/// `±` basis.
pub fn effective_sz_hamiltonian(params: &ModelParams, driven_dots: &[usize]) -> Result<HarmonicHamiltonian> {
    params.validate()?;
    check_dots(params, driven_dots)?;
    let space = HamiltonianLevel::EffectiveSz.space(params)?;
    let ad = creator(&space).entries;
    let mut h = HarmonicHamiltonian::new(space);
    for &i in driven_dots {
        let c = derive_couplings(params, i)?;
        let sz = s_z(&space, i)?.entries;
        h.push_with_conjugate(real(0.5 * c.a_coupling), -params.delta[i], &ad * sz);
    }
    Ok(h)
}

pub fn build_effective_sz(params: &ModelParams, t: f64, driven_dots: &[usize]) -> Result<Operator> {
    Ok(effective_sz_hamiltonian(params, driven_dots)?.at(t))
}

/// Laser-only Raman Hamiltonian `(Ω₁Ω₃/Δ₂)(σ↑↓ + σ↓↑)` on one dot.
pub fn build_single_qubit(params: &ModelParams, dot_index: usize) -> Result<Operator> {
    params.validate()?;
    check_dots(params, &[dot_index])?;
    let space = HamiltonianLevel::SingleQubit.space(params)?;
    let x = sigma(&space, dot_index, UP, DOWN)? + sigma(&space, dot_index, DOWN, UP)?;
    Ok(Operator::new(space, x * real(params.omega1 * params.omega3 / params.delta2))?.hermitian())
}

/// The raw two-level model carried into `±` coordinates by `W` on every
/// dot.
pub fn rotate_effective_raw(params: &ModelParams, t: f64, driven_dots: &[usize]) -> Result<Operator> {
    Ok(build_effective_raw(params, t, driven_dots)?.to_basis(LevelBasis::PlusMinus))
}

/// `‖W H_raw W† − H_pm‖_max`.
pub fn rotation_identity_defect(params: &ModelParams, t: f64, driven_dots: &[usize]) -> Result<f64> {
    let rotated = rotate_effective_raw(params, t, driven_dots)?;
    let pm = build_effective_pm(params, t, driven_dots)?;
    Ok(max_abs(&(rotated.entries - pm.entries)))
}

/// Part of the `±`-basis model discarded when passing to the `S_z` frame,
/// seen from the frame rotating with both `BΣS_z` and `Δ a†a`:
///
/// `e^{iΔta†a} [e^{iBtJ}(H_pm − BJ)e^{−iBtJ} − H_sz] e^{−iΔta†a}`.
///
/// In this frame the remainder contains only the frequency `B`, so its
/// average over one period `2π/B` vanishes. Requires a shared `Δ`.
pub fn rwa_residual(params: &ModelParams, driven_dots: &[usize], t: f64) -> Result<CMatrix> {
    let delta = shared_delta(params, driven_dots)?;
    let b = params.laser_coupling();
    let pm = effective_pm_hamiltonian(params, driven_dots)?;
    let sz = effective_sz_hamiltonian(params, driven_dots)?;
    let space = pm.space;
    let j = crate::hilbert::total_s_z(&space, driven_dots)?.entries;
    let n = number_op(&space).entries;
    // both generators are diagonal in these coordinates
    let phase = |m: &CMatrix, rate: f64| -> CMatrix {
        CMatrix::from_diagonal(&m.diagonal().map(|z| C64::from_polar(1.0, rate * z.re * t)))
    };
    let frame = phase(&n, delta) * phase(&j, b);
    let h_pm = pm.at(t).entries - &j * real(b);
    let moved = &frame * h_pm * frame.adjoint();
    let nframe = phase(&n, delta);
    let target = &nframe * sz.at(t).entries * nframe.adjoint();
    Ok(moved - target)
}

/// The common cavity detuning of `driven_dots`.
pub fn shared_delta(params: &ModelParams, driven_dots: &[usize]) -> Result<f64> {
    check_dots(params, driven_dots)?;
    let first = *driven_dots
        .first()
        .ok_or_else(|| Error::InvalidParameter("no driven dots".into()))?;
    let delta = params.delta[first];
    if driven_dots.iter().any(|&d| params.delta[d] != delta) {
        return Err(Error::MismatchedDetuning);
    }
    Ok(delta)
}
