//! Physical parameters of the dot–cavity system, unit handling, derived
//! Raman couplings and the checker for the far-detuned approximations.
//!
//! All energies are in meV and all internal times are in natural units
//! (ħ = 1, so one time unit is ħ / 1 meV). Conversion to picoseconds
//! happens only at the edges through [`convert_time`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ħ in meV·ps.
pub const HBAR_MEV_PS: f64 = 0.658_211_956_9;

/// Tolerance (meV) for the two lab-frame frequency identities.
pub const LAB_IDENTITY_TOL: f64 = 1e-12;

/// Default "much greater than" threshold: a condition `small ≪ large`
/// passes when `small / large <= threshold`.
pub const DEFAULT_APPROX_THRESHOLD: f64 = 0.2;

/// Default Fock cutoff `n_max`.
pub const DEFAULT_PHOTON_CUTOFF: usize = 12;

/// Lab-frame level energies, laser and cavity frequencies (meV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabFrequencies {
    pub omega_up: f64,
    pub omega_down: f64,
    pub omega_v: f64,
    pub omega_c: f64,
    pub omega_l1: f64,
    pub omega_l2: f64,
    pub omega_l3: f64,
}

impl LabFrequencies {
    /// Builds a lab-frame frequency set that reproduces the detunings of
    /// `params` (dot 0's cavity detuning), with the valence level at zero
    /// and the spin-up level at `omega_up`.
    pub fn consistent_with(params: &ModelParams, omega_up: f64, zeeman: f64) -> Self {
        let delta = params.delta[0];
        let omega_v = 0.0;
        let omega_down = omega_up - zeeman;
        Self {
            omega_up,
            omega_down,
            omega_v,
            omega_c: omega_down - omega_v - params.delta1 - delta,
            omega_l1: omega_up - omega_v - params.delta2,
            omega_l2: omega_up - omega_v - params.delta1,
            omega_l3: omega_down - omega_v - params.delta2,
        }
    }

    pub fn spin_splitting(&self) -> f64 {
        self.omega_up - self.omega_down
    }

    /// Residuals of `ω↑↓ + Δ = ω₂ − ω_c` and `ω↑↓ = ω₁ − ω₃`.
    pub fn identity_residuals(&self, delta: f64) -> (f64, f64) {
        let split = self.spin_splitting();
        (
            split + delta - (self.omega_l2 - self.omega_c),
            split - (self.omega_l1 - self.omega_l3),
        )
    }
}

/// All physical inputs of the model.
///
/// `omega*` and `g` may be zero (lasers or coupling switched off); every
/// detuning must be strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_dots: usize,
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub g: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Per-dot two-photon cavity detuning Δⁱ, one entry per dot.
    pub delta: Vec<f64>,
    pub photon_cutoff: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lab: Option<LabFrequencies>,
}

impl ModelParams {
    /// Parameters with one shared cavity detuning on every dot.
    pub fn uniform(
        n_dots: usize,
        omegas: [f64; 3],
        g: f64,
        delta1: f64,
        delta2: f64,
        delta: f64,
        photon_cutoff: usize,
    ) -> Result<Self> {
        let params = Self {
            n_dots,
            omega1: omegas[0],
            omega2: omegas[1],
            omega3: omegas[2],
            g,
            delta1,
            delta2,
            delta: vec![delta; n_dots],
            photon_cutoff,
            lab: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_dots == 0 {
            return bad("n_dots must be positive".into());
        }
        for (name, v) in [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("omega3", self.omega3),
            ("g", self.g),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        for (name, v) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if !v.is_finite() || v <= 0.0 {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.delta1 == self.delta2 {
            return bad("delta1 must differ from delta2".into());
        }
        if self.delta.len() != self.n_dots {
            return bad(format!(
                "delta has {} entries for {} dots",
                self.delta.len(),
                self.n_dots
            ));
        }
        if let Some(d) = self.delta.iter().find(|d| !d.is_finite() || **d <= 0.0) {
            return bad(format!("every per-dot delta must be positive, got {d}"));
        }
        if self.photon_cutoff < 2 {
            return bad("photon_cutoff must be at least 2".into());
        }
        if let Some(lab) = &self.lab {
            let d0 = self.delta[0];
            if self.delta.iter().any(|d| *d != d0) {
                return bad("lab-frame frequencies require a shared cavity detuning".into());
            }
            let (r1, r2) = lab.identity_residuals(d0);
            if r1.abs() > LAB_IDENTITY_TOL || r2.abs() > LAB_IDENTITY_TOL {
                return bad(format!(
                    "lab-frame frequencies violate the resonance identities (residuals {r1:e}, {r2:e})"
                ));
            }
            let d1 = lab.omega_up - lab.omega_v - lab.omega_l2;
            let d2 = lab.omega_up - lab.omega_v - lab.omega_l1;
            if (d1 - self.delta1).abs() > LAB_IDENTITY_TOL || (d2 - self.delta2).abs() > LAB_IDENTITY_TOL
            {
                return bad("lab-frame frequencies imply different delta1/delta2".into());
            }
        }
        Ok(())
    }

    /// Copy with every energy multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.omega1 *= factor;
        out.omega2 *= factor;
        out.omega3 *= factor;
        out.g *= factor;
        out.delta1 *= factor;
        out.delta2 *= factor;
        out.delta.iter_mut().for_each(|d| *d *= factor);
        if let Some(lab) = out.lab.as_mut() {
            for f in [
                &mut lab.omega_up,
                &mut lab.omega_down,
                &mut lab.omega_v,
                &mut lab.omega_c,
                &mut lab.omega_l1,
                &mut lab.omega_l2,
                &mut lab.omega_l3,
            ] {
                *f *= factor;
            }
        }
        out
    }

    pub fn with_cutoff(&self, photon_cutoff: usize) -> Self {
        Self { photon_cutoff, ..self.clone() }
    }

    /// Cavity-assisted Raman coupling `A` for a given cavity detuning.
    pub fn cavity_coupling(&self, delta: f64) -> f64 {
        0.5 * self.g * self.omega2 * (1.0 / self.delta1 + 1.0 / (self.delta1 + delta))
    }

    /// Laser-only Raman coupling `B = 2Ω₁Ω₃/Δ₂`.
    pub fn laser_coupling(&self) -> f64 {
        2.0 * self.omega1 * self.omega3 / self.delta2
    }
}

/// Effective couplings of one dot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedCouplings {
    /// `A = (gΩ₂/2)(1/Δ₁ + 1/(Δ₁+Δⁱ))`, meV.
    pub a_coupling: f64,
    /// `B = 2Ω₁Ω₃/Δ₂`, meV.
    pub b_coupling: f64,
}

pub fn derive_couplings(params: &ModelParams, dot_index: usize) -> Result<DerivedCouplings> {
    let delta = *params
        .delta
        .get(dot_index)
        .ok_or(Error::UnknownDot(dot_index))?;
    Ok(DerivedCouplings {
        a_coupling: params.cavity_coupling(delta),
        b_coupling: params.laser_coupling(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDirection {
    NaturalToPs,
    PsToNatural,
}

pub fn convert_time(value: f64, direction: TimeDirection) -> f64 {
    match direction {
        TimeDirection::NaturalToPs => value * HBAR_MEV_PS,
        TimeDirection::PsToNatural => value / HBAR_MEV_PS,
    }
}

pub fn natural_to_ps(t: f64) -> f64 {
    convert_time(t, TimeDirection::NaturalToPs)
}

pub fn ps_to_natural(t: f64) -> f64 {
    convert_time(t, TimeDirection::PsToNatural)
}

/// Energy (meV) corresponding to a lifetime in ps, `ħ / τ`.
pub fn rate_from_lifetime_ps(lifetime_ps: f64) -> f64 {
    HBAR_MEV_PS / lifetime_ps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproxStatus {
    Pass,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxEntry {
    pub condition: String,
    pub small_value: f64,
    pub large_value: f64,
    pub ratio: f64,
    pub status: ApproxStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub entries: Vec<ApproxEntry>,
    pub threshold: f64,
}

impl ApproximationReport {
    pub fn has_warnings(&self) -> bool {
        self.entries.iter().any(|e| e.status == ApproxStatus::Warn)
    }

    pub fn entry(&self, condition: &str) -> Option<&ApproxEntry> {
        self.entries.iter().find(|e| e.condition == condition)
    }
}

/// Evaluates every inequality required for eliminating the valence level
/// and for dropping the fast laser-coupling terms.
///
/// Quantities that depend on the cavity detuning use the worst case over
/// all dots.
pub fn check_approximations(params: &ModelParams, threshold: f64) -> Result<ApproximationReport> {
    params.validate()?;
    let (d1, d2) = (params.delta1, params.delta2);
    if d1 <= d2 {
        return Err(Error::ChannelSeparationNegative { delta1: d1, delta2: d2 });
    }
    let (o1, o2, o3, g) = (params.omega1, params.omega2, params.omega3, params.g);
    let max_over_dots = |f: &dyn Fn(f64) -> f64| {
        params.delta.iter().map(|&d| f(d)).fold(0.0_f64, f64::max)
    };
    let delta = max_over_dots(&|d| d);
    let a = max_over_dots(&|d| params.cavity_coupling(d));
    let b = params.laser_coupling();
    let sep = d1 - d2;

    let mut entries = Vec::new();
    let mut push = |condition: String, small: f64, large: f64| {
        let ratio = small / large;
        entries.push(ApproxEntry {
            condition,
            small_value: small,
            large_value: large,
            ratio,
            status: if ratio > threshold { ApproxStatus::Warn } else { ApproxStatus::Pass },
        });
    };
    for (dname, dval) in [("delta1", d1), ("delta2", d2)] {
        for (name, v) in [("omega1", o1), ("omega2", o2), ("omega3", o3), ("g", g)] {
            push(format!("{dname} vs {name}"), v, dval);
        }
    }
    let sep_terms = [
        ("delta", delta),
        ("(delta1+delta2)*omega1*omega2/(2*delta1*delta2)", (d1 + d2) * o1 * o2 / (2.0 * d1 * d2)),
        ("(delta1+delta2)*omega2*omega3/(2*delta1*delta2)", (d1 + d2) * o2 * o3 / (2.0 * d1 * d2)),
        (
            "(2*delta1+delta)*omega1*g/(2*delta1*(delta1+delta))",
            max_over_dots(&|d| (2.0 * d1 + d) * o1 * g / (2.0 * d1 * (d1 + d))),
        ),
        (
            "(2*delta1+delta)*omega3*g/(2*delta1*(delta1+delta))",
            max_over_dots(&|d| (2.0 * d1 + d) * o3 * g / (2.0 * d1 * (d1 + d))),
        ),
    ];
    for (name, v) in sep_terms {
        push(format!("delta1-delta2 vs {name}"), v, sep);
    }
    push("B vs delta".into(), delta, b);
    push("B vs A".into(), a, b);
    Ok(ApproximationReport { entries, threshold })
}
