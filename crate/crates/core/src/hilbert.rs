//! Fock-truncated composite Hilbert space: `N` dots with 2 or 3 levels each,
//! tensored with one cavity mode.
//!
//! Basis ordering: dot 0 is the most significant digit, the photon number
//! is the fastest index. Level indices are `↑ = 0, ↓ = 1, v = 2` in up/down
//! coordinates and `+ = 0, − = 1` in plus/minus coordinates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const VALENCE: usize = 2;
pub const PLUS: usize = 0;
pub const MINUS: usize = 1;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-9;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Coordinates used for the two qubit levels of every dot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LevelBasis {
    UpDown,
    PlusMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sign::Plus => PLUS,
            Sign::Minus => MINUS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    pub dot_count: usize,
    pub levels_per_dot: usize,
    /// `n_max + 1`; a value of 1 denotes the bare dot register.
    pub photon_dim: usize,
    pub basis: LevelBasis,
}

pub fn make_space(dot_count: usize, levels_per_dot: usize, photon_cutoff: usize) -> Result<SpaceDescriptor> {
    if dot_count == 0 {
        return Err(Error::InvalidParameter("dot_count must be positive".into()));
    }
    if !(2..=3).contains(&levels_per_dot) {
        return Err(Error::InvalidParameter(format!(
            "levels_per_dot must be 2 or 3, got {levels_per_dot}"
        )));
    }
    if photon_cutoff < 2 {
        return Err(Error::InvalidParameter(format!(
            "photon cutoff must be at least 2, got {photon_cutoff}"
        )));
    }
    Ok(SpaceDescriptor {
        dot_count,
        levels_per_dot,
        photon_dim: photon_cutoff + 1,
        basis: LevelBasis::UpDown,
    })
}

impl SpaceDescriptor {
    pub fn with_basis(self, basis: LevelBasis) -> Self {
        Self { basis, ..self }
    }

    pub fn with_cutoff(self, photon_cutoff: usize) -> Self {
        Self { photon_dim: photon_cutoff + 1, ..self }
    }

    /// The dot register alone (no cavity factor).
    pub fn register(self) -> Self {
        Self { photon_dim: 1, ..self }
    }

    pub fn photon_cutoff(&self) -> usize {
        self.photon_dim - 1
    }

    pub fn register_dim(&self) -> usize {
        self.levels_per_dot.pow(self.dot_count as u32)
    }

    pub fn total_dim(&self) -> usize {
        self.register_dim() * self.photon_dim
    }

    pub fn register_index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.dot_count {
            return Err(Error::DimensionMismatch { expected: self.dot_count, found: levels.len() });
        }
        levels.iter().try_fold(0usize, |acc, &l| {
            if l >= self.levels_per_dot {
                Err(Error::InvalidParameter(format!(
                    "level {l} out of range for {}-level dots",
                    self.levels_per_dot
                )))
            } else {
                Ok(acc * self.levels_per_dot + l)
            }
        })
    }

    pub fn index(&self, levels: &[usize], photon_n: usize) -> Result<usize> {
        if photon_n >= self.photon_dim {
            return Err(Error::InvalidParameter(format!(
                "photon number {photon_n} exceeds cutoff {}",
                self.photon_cutoff()
            )));
        }
        Ok(self.register_index(levels)? * self.photon_dim + photon_n)
    }

    /// Inverse of [`index`](Self::index).
    pub fn decompose(&self, index: usize) -> (Vec<usize>, usize) {
        let n = index % self.photon_dim;
        let mut reg = index / self.photon_dim;
        let mut levels = vec![0; self.dot_count];
        for slot in levels.iter_mut().rev() {
            *slot = reg % self.levels_per_dot;
            reg /= self.levels_per_dot;
        }
        (levels, n)
    }

    pub fn level_of(&self, index: usize, dot: usize) -> usize {
        let reg = index / self.photon_dim;
        let shift = self.levels_per_dot.pow((self.dot_count - 1 - dot) as u32);
        (reg / shift) % self.levels_per_dot
    }

    pub fn photon_of(&self, index: usize) -> usize {
        index % self.photon_dim
    }

    fn check_dot(&self, dot: usize) -> Result<()> {
        if dot >= self.dot_count {
            Err(Error::UnknownDot(dot))
        } else {
            Ok(())
        }
    }
}

fn same_space(a: &SpaceDescriptor, b: &SpaceDescriptor) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::SpaceMismatch(format!("{a:?} vs {b:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub space: SpaceDescriptor,
    pub amplitudes: CVector,
}

impl StateVector {
    pub fn new(space: SpaceDescriptor, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::DimensionMismatch { expected: space.total_dim(), found: amplitudes.len() });
        }
        Ok(Self { space, amplitudes })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        same_space(&self.space, &other.space)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }
}

pub fn basis_state(space: &SpaceDescriptor, dot_levels: &[usize], photon_n: usize) -> Result<StateVector> {
    let idx = space.index(dot_levels, photon_n)?;
    let mut amps = CVector::zeros(space.total_dim());
    amps[idx] = ONE;
    StateVector::new(*space, amps)
}

/// Register amplitudes (length `L^N`) of the product state `⊗ᵢ|sᵢ⟩`,
/// `|±⟩ = (|↑⟩ ± |↓⟩)/√2`, in the coordinates of `space`.
pub fn plus_minus_register(space: &SpaceDescriptor, signs: &[Sign]) -> Result<CVector> {
    if signs.len() != space.dot_count {
        return Err(Error::DimensionMismatch { expected: space.dot_count, found: signs.len() });
    }
    let l = space.levels_per_dot;
    let mut reg = CVector::from_element(1, ONE);
    for s in signs {
        let mut single = CVector::zeros(l);
        match space.basis {
            LevelBasis::PlusMinus => single[s.index()] = ONE,
            LevelBasis::UpDown => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                single[UP] = C64::new(h, 0.0);
                single[DOWN] = C64::new(h * s.value(), 0.0);
            }
        }
        reg = reg.kronecker(&single);
    }
    Ok(reg)
}

pub fn plus_minus_state(space: &SpaceDescriptor, signs: &[Sign], photon_n: usize) -> Result<StateVector> {
    if photon_n >= space.photon_dim {
        return Err(Error::InvalidParameter(format!(
            "photon number {photon_n} exceeds cutoff {}",
            space.photon_cutoff()
        )));
    }
    let reg = plus_minus_register(space, signs)?;
    let mut photon = CVector::zeros(space.photon_dim);
    photon[photon_n] = ONE;
    StateVector::new(*space, reg.kronecker(&photon))
}

/// The four two-qubit product states in `(++, +−, −+, −−)` order.
pub const PAIR_SIGNS: [[Sign; 2]; 4] = [
    [Sign::Plus, Sign::Plus],
    [Sign::Plus, Sign::Minus],
    [Sign::Minus, Sign::Plus],
    [Sign::Minus, Sign::Minus],
];

/// Enumerates all `2^N` sign patterns with dot 0 most significant.
pub fn sign_patterns(dot_count: usize) -> Vec<Vec<Sign>> {
    (0..1usize << dot_count)
        .map(|bits| {
            (0..dot_count)
                .map(|d| if bits >> (dot_count - 1 - d) & 1 == 0 { Sign::Plus } else { Sign::Minus })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub space: SpaceDescriptor,
    pub entries: CMatrix,
}

impl DensityMatrix {
    pub fn new(space: SpaceDescriptor, entries: CMatrix) -> Result<Self> {
        let d = space.total_dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: entries.nrows() });
        }
        Ok(Self { space, entries })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let v = &state.amplitudes;
        Self { space: state.space, entries: v * v.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.entries)[0]
    }

    /// Checks Hermiticity (1e−10), unit trace (1e−7) and positivity (−1e−7).
    pub fn check_physical(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > 1e-7 {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-7 {
            return Err(Error::InvalidParameter(format!("density matrix eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// Thermal photon-number distribution `pₙ ∝ n̄ⁿ/(1+n̄)ⁿ⁺¹`, renormalized
/// over `0..=cutoff`.
pub fn thermal_distribution(mean_photon: f64, cutoff: usize) -> Result<Vec<f64>> {
    if !(mean_photon >= 0.0) || !mean_photon.is_finite() {
        return Err(Error::InvalidParameter(format!("mean photon number must be non-negative, got {mean_photon}")));
    }
    if mean_photon == 0.0 {
        let mut p = vec![0.0; cutoff + 1];
        p[0] = 1.0;
        return Ok(p);
    }
    let ratio = mean_photon / (1.0 + mean_photon);
    let mut p: Vec<f64> = (0..=cutoff)
        .map(|n| ratio.powi(n as i32) / (1.0 + mean_photon))
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// `|ψ_dots⟩⟨ψ_dots| ⊗ ρ_thermal`, with `dots` given as register amplitudes.
pub fn thermal_density(space: &SpaceDescriptor, mean_photon: f64, dots: &CVector) -> Result<DensityMatrix> {
    if dots.len() != space.register_dim() {
        return Err(Error::DimensionMismatch { expected: space.register_dim(), found: dots.len() });
    }
    let p = thermal_distribution(mean_photon, space.photon_cutoff())?;
    let cav = CMatrix::from_diagonal(&CVector::from_iterator(p.len(), p.iter().map(|&x| C64::new(x, 0.0))));
    let reg = dots * dots.adjoint();
    DensityMatrix::new(*space, reg.kronecker(&cav))
}

/// Traces out the cavity, leaving a density matrix on the dot register.
pub fn partial_trace_cavity(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let space = rho.space;
    let d = space.total_dim();
    if rho.entries.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho.entries.nrows() });
    }
    let r = space.register_dim();
    let p = space.photon_dim;
    let out = CMatrix::from_fn(r, r, |i, j| (0..p).map(|n| rho.entries[(i * p + n, j * p + n)]).sum());
    DensityMatrix::new(space.register(), out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub space: SpaceDescriptor,
    pub entries: CMatrix,
    pub is_hermitian: bool,
    pub is_unitary: bool,
}

impl Operator {
    pub fn new(space: SpaceDescriptor, entries: CMatrix) -> Result<Self> {
        let d = space.total_dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: entries.nrows() });
        }
        Ok(Self { space, entries, is_hermitian: false, is_unitary: false })
    }

    pub fn hermitian(mut self) -> Self {
        self.is_hermitian = true;
        self
    }

    pub fn unitary(mut self) -> Self {
        self.is_unitary = true;
        self
    }

    pub fn zeros(space: SpaceDescriptor) -> Self {
        let d = space.total_dim();
        Self { space, entries: CMatrix::zeros(d, d), is_hermitian: true, is_unitary: false }
    }

    pub fn identity(space: SpaceDescriptor) -> Self {
        let d = space.total_dim();
        Self { space, entries: CMatrix::identity(d, d), is_hermitian: true, is_unitary: true }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self {
            space: self.space,
            entries: self.entries.adjoint(),
            is_hermitian: self.is_hermitian,
            is_unitary: self.is_unitary,
        }
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        same_space(&self.space, &other.space)?;
        Ok(Operator {
            space: self.space,
            entries: &self.entries * &other.entries,
            is_hermitian: false,
            is_unitary: self.is_unitary && other.is_unitary,
        })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        same_space(&self.space, &other.space)?;
        Ok(Operator {
            space: self.space,
            entries: &self.entries + &other.entries,
            is_hermitian: self.is_hermitian && other.is_hermitian,
            is_unitary: false,
        })
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Operator {
            space: self.space,
            entries: &self.entries * factor,
            is_hermitian: self.is_hermitian && factor.im == 0.0,
            is_unitary: self.is_unitary && (factor.norm() - 1.0).abs() < 1e-15,
        }
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        same_space(&self.space, &other.space)?;
        Operator::new(self.space, &self.entries * &other.entries - &other.entries * &self.entries)
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        same_space(&self.space, &state.space)?;
        StateVector::new(self.space, &self.entries * &state.amplitudes)
    }

    pub fn expectation(&self, state: &StateVector) -> Result<C64> {
        state.inner(&self.apply(state)?)
    }

    /// Checks the advisory flags against the matrix.
    pub fn verify_flags(&self) -> Result<()> {
        if self.is_hermitian {
            let d = hermiticity_defect(&self.entries);
            if d > HERMITIAN_TOL {
                return Err(Error::NotHermitian(d));
            }
        }
        if self.is_unitary {
            let d = unitarity_defect(&self.entries);
            if d > UNITARY_TOL {
                return Err(Error::InvalidParameter(format!("operator flagged unitary, defect {d:e}")));
            }
        }
        Ok(())
    }

    /// Re-expresses the operator in other qubit-level coordinates.
    pub fn to_basis(&self, basis: LevelBasis) -> Operator {
        if basis == self.space.basis {
            return self.clone();
        }
        // columns of W are |±⟩ in up/down coordinates; W is real symmetric
        // and involutory, so the map is the same in both directions
        let w = pm_rotation(&self.space);
        Operator {
            space: self.space.with_basis(basis),
            entries: &w * &self.entries * &w,
            ..self.clone()
        }
    }
}

/// Real symmetric form `[[Re M, −Im M], [Im M, Re M]]` of the Hermitian
/// part of `m`. Its spectrum is that of `m` with every eigenvalue doubled.
fn real_embedding(m: &CMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = 0.5 * (m[(i % n, j % n)] + m[(j % n, i % n)].conj());
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Ascending eigenvalues of the Hermitian part of `m`.
///
/// Goes through the real symmetric embedding; the complex Hermitian
/// eigensolver in nalgebra 0.35 can return non-finite values on valid
/// density matrices.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = real_embedding(m).symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev.into_iter().step_by(2).collect()
}

/// `e^{−iHt}` for Hermitian `H`, via `cos(Ht) − i sin(Ht)` evaluated on the
/// real embedding.
pub fn hermitian_exp(h: &CMatrix, t: f64) -> CMatrix {
    let n = h.nrows();
    let eig = real_embedding(h).symmetric_eigen();
    let v = &eig.eigenvectors;
    let cos = DVector::from_iterator(2 * n, eig.eigenvalues.iter().map(|e| (e * t).cos()));
    let sin = DVector::from_iterator(2 * n, eig.eigenvalues.iter().map(|e| (e * t).sin()));
    let c = v * DMatrix::from_diagonal(&cos) * v.transpose();
    let s = v * DMatrix::from_diagonal(&sin) * v.transpose();
    // embedding of cos − i·sin is C − JS with J = [[0, −1], [1, 0]]; read
    // the left column of blocks
    CMatrix::from_fn(n, n, |i, j| C64::new(c[(i, j)] + s[(i + n, j)], c[(i + n, j)] - s[(i, j)]))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let d = m.ncols();
    max_abs(&(m.adjoint() * m - CMatrix::identity(d, d)))
}

/// Embeds a single-dot operator (`L × L`) on `dot`, identity elsewhere.
pub fn embed_dot_matrix(space: &SpaceDescriptor, dot: usize, local: &CMatrix) -> Result<CMatrix> {
    space.check_dot(dot)?;
    let l = space.levels_per_dot;
    if local.nrows() != l || local.ncols() != l {
        return Err(Error::DimensionMismatch { expected: l, found: local.nrows() });
    }
    let before = l.pow(dot as u32);
    let after = l.pow((space.dot_count - 1 - dot) as u32) * space.photon_dim;
    Ok(CMatrix::identity(before, before)
        .kronecker(local)
        .kronecker(&CMatrix::identity(after, after)))
}

/// `σⁱ_mn = |m⟩⟨n|` on dot `i`.
pub fn dot_transition_op(space: &SpaceDescriptor, dot: usize, m: usize, n: usize) -> Result<Operator> {
    let l = space.levels_per_dot;
    if m >= l || n >= l {
        return Err(Error::InvalidParameter(format!("levels ({m}, {n}) out of range for {l}-level dots")));
    }
    let mut local = CMatrix::zeros(l, l);
    local[(m, n)] = ONE;
    Ok(Operator {
        space: *space,
        entries: embed_dot_matrix(space, dot, &local)?,
        is_hermitian: m == n,
        is_unitary: false,
    })
}

fn photon_matrix(space: &SpaceDescriptor, local: CMatrix) -> CMatrix {
    let r = space.register_dim();
    CMatrix::identity(r, r).kronecker(&local)
}

/// Truncated annihilation operator, `a|n⟩ = √n|n−1⟩`.
pub fn annihilator(space: &SpaceDescriptor) -> Operator {
    let p = space.photon_dim;
    let local = CMatrix::from_fn(p, p, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { ZERO });
    Operator { space: *space, entries: photon_matrix(space, local), is_hermitian: false, is_unitary: false }
}

pub fn creator(space: &SpaceDescriptor) -> Operator {
    annihilator(space).dagger()
}

pub fn number_op(space: &SpaceDescriptor) -> Operator {
    let p = space.photon_dim;
    let local = CMatrix::from_diagonal(&CVector::from_fn(p, |n, _| C64::new(n as f64, 0.0)));
    Operator { space: *space, entries: photon_matrix(space, local), is_hermitian: true, is_unitary: false }
}

/// Local `(S_z, S_+, S_−)` matrices with `S_z = (|+⟩⟨+| − |−⟩⟨−|)/2`,
/// `S_+ = |+⟩⟨−|`, expressed in the coordinates of `space`.
fn local_spin_ops(space: &SpaceDescriptor) -> [CMatrix; 3] {
    let l = space.levels_per_dot;
    let (plus, minus) = match space.basis {
        LevelBasis::PlusMinus => {
            let mut p = CVector::zeros(l);
            p[PLUS] = ONE;
            let mut m = CVector::zeros(l);
            m[MINUS] = ONE;
            (p, m)
        }
        LevelBasis::UpDown => {
            let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let mut p = CVector::zeros(l);
            p[UP] = h;
            p[DOWN] = h;
            let mut m = CVector::zeros(l);
            m[UP] = h;
            m[DOWN] = -h;
            (p, m)
        }
    };
    let sz = (&plus * plus.adjoint() - &minus * minus.adjoint()) * C64::new(0.5, 0.0);
    let sp = &plus * minus.adjoint();
    let sm = &minus * plus.adjoint();
    [sz, sp, sm]
}

pub fn s_z(space: &SpaceDescriptor, dot: usize) -> Result<Operator> {
    let [sz, _, _] = local_spin_ops(space);
    Ok(Operator { space: *space, entries: embed_dot_matrix(space, dot, &sz)?, is_hermitian: true, is_unitary: false })
}

pub fn s_plus(space: &SpaceDescriptor, dot: usize) -> Result<Operator> {
    let [_, sp, _] = local_spin_ops(space);
    Operator::new(*space, embed_dot_matrix(space, dot, &sp)?)
}

pub fn s_minus(space: &SpaceDescriptor, dot: usize) -> Result<Operator> {
    let [_, _, sm] = local_spin_ops(space);
    Operator::new(*space, embed_dot_matrix(space, dot, &sm)?)
}

/// `J = Σ S_zⁱ` over the listed dots.
pub fn total_s_z(space: &SpaceDescriptor, dots: &[usize]) -> Result<Operator> {
    let mut acc = Operator::zeros(*space);
    for &d in dots {
        acc = acc.add(&s_z(space, d)?)?;
    }
    Ok(acc)
}

/// Single-dot basis change `W` with columns `|+⟩, |−⟩` in up/down
/// coordinates (valence level untouched).
pub fn local_pm_rotation(levels: usize) -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut w = CMatrix::identity(levels, levels);
    w[(UP, PLUS)] = C64::new(h, 0.0);
    w[(DOWN, PLUS)] = C64::new(h, 0.0);
    w[(UP, MINUS)] = C64::new(h, 0.0);
    w[(DOWN, MINUS)] = C64::new(-h, 0.0);
    w
}

/// `W ⊗ … ⊗ W ⊗ 1_cavity`.
pub fn pm_rotation(space: &SpaceDescriptor) -> CMatrix {
    let w = local_pm_rotation(space.levels_per_dot);
    let mut full = CMatrix::identity(1, 1);
    for _ in 0..space.dot_count {
        full = full.kronecker(&w);
    }
    full.kronecker(&CMatrix::identity(space.photon_dim, space.photon_dim))
}

/// Orthogonal projector onto photon number `photon_n` with every dot in
/// one of `computational_levels`.
pub fn project_sector(space: &SpaceDescriptor, photon_n: usize, computational_levels: &[usize]) -> Operator {
    let d = space.total_dim();
    let diag = CVector::from_fn(d, |i, _| {
        let (levels, n) = space.decompose(i);
        if n == photon_n && levels.iter().all(|l| computational_levels.contains(l)) {
            ONE
        } else {
            ZERO
        }
    });
    Operator { space: *space, entries: CMatrix::from_diagonal(&diag), is_hermitian: true, is_unitary: false }
}

/// Index map from a space with one cutoff into one with a larger cutoff.
pub fn cutoff_embedding(small: &SpaceDescriptor, large: &SpaceDescriptor) -> Result<Vec<usize>> {
    if small.dot_count != large.dot_count
        || small.levels_per_dot != large.levels_per_dot
        || small.basis != large.basis
        || small.photon_dim > large.photon_dim
    {
        return Err(Error::SpaceMismatch(format!("cannot embed {small:?} into {large:?}")));
    }
    Ok((0..small.total_dim())
        .map(|i| (i / small.photon_dim) * large.photon_dim + i % small.photon_dim)
        .collect())
}

/// Compresses an operator on a larger-cutoff space onto `small`.
pub fn restrict_operator(op: &Operator, small: &SpaceDescriptor) -> Result<Operator> {
    let map = cutoff_embedding(small, &op.space)?;
    let d = small.total_dim();
    Ok(Operator {
        space: *small,
        entries: CMatrix::from_fn(d, d, |i, j| op.entries[(map[i], map[j])]),
        is_hermitian: op.is_hermitian,
        is_unitary: false,
    })
}

/// Sparse triplet view of a dense matrix, used for fast repeated
/// matrix–block products inside the integrators.
#[derive(Debug, Clone, Default)]
pub struct SparseMatrix {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseMatrix {
    pub fn from_dense(m: &CMatrix) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if z != ZERO {
                    entries.push((i, j, z));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|&(i, j, z)| (i, j, z * factor)).collect() }
    }

    /// `out = self · x` for a block of column vectors.
    pub fn mul_block(&self, x: &CMatrix, out: &mut CMatrix) {
        out.fill(ZERO);
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut oc = out.column_mut(c);
            for &(i, j, z) in &self.entries {
                oc[i] += z * xc[j];
            }
        }
    }

    /// `out = x · self` for a block of row vectors.
    pub fn right_mul_block(&self, x: &CMatrix, out: &mut CMatrix) {
        out.fill(ZERO);
        let rows = x.nrows();
        for &(i, j, z) in &self.entries {
            for r in 0..rows {
                out[(r, j)] += x[(r, i)] * z;
            }
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for &(i, j, z) in &self.entries {
            m[(i, j)] += z;
        }
        m
    }
}
