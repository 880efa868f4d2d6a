//! Flat JSON experiment configuration.
//!
//! Every key is optional unless listed in the README as required. Unknown
//! keys, wrong types and inconsistent values are all collected before
//! anything is reported.

use std::path::Path;

use dotcavity_core::gates::{FidelityMode, ModelLevel};
use dotcavity_core::model::{LabFrequencies, DEFAULT_APPROX_THRESHOLD, DEFAULT_PHOTON_CUTOFF};
use dotcavity_core::propagation::Scheme;
use serde::Serialize;
use serde_json::{Map, Value};

/// `start,stop,count`, inclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Sweep {
    pub fn linear(&self) -> Vec<f64> {
        match self.count {
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }

    pub fn geometric(&self) -> Vec<f64> {
        match self.count {
            1 => vec![self.start],
            n => {
                let ratio = (self.stop / self.start).powf(1.0 / (n - 1) as f64);
                (0..n).map(|i| self.start * ratio.powi(i as i32)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// What the schedule solver is asked to find.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveFor {
    /// `Ω₁, Ω₃` given, `g` solved.
    CavityCoupling { omega1: f64, omega3: f64 },
    /// `g` given, `Ω₁Ω₃` solved with `Ω₁ = Ω₃`.
    LaserProduct { g: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub solve_for: SolveFor,
    pub omega2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub k: u32,
    pub photon_cutoff: usize,
    pub lab: Option<LabFrequencies>,
    pub photon_n: usize,
    pub mean_photon: Option<f64>,
    pub photon_sweep: Sweep,
    /// meV; defaults to `κ·(0, 1/2, 1, 3/2, 2)` with `κ = ħ/cavity_lifetime_ps`.
    pub kappa_ladder: Option<Sweep>,
    pub cavity_lifetime_ps: f64,
    /// meV, geometric spacing; defaults to `Δ·(0.1 … 1.6)` in five doublings.
    pub separation_ladder: Option<Sweep>,
    pub model_level: ModelLevel,
    pub fidelity_mode: FidelityMode,
    pub scheme: Scheme,
    pub steps_per_period: usize,
    pub lindblad_steps_per_period: usize,
    pub approx_threshold: f64,
    pub out: Option<String>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io(String),
    Syntax(String),
    Invalid(Vec<String>),
}

impl std::error::Error for ConfigError {}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read config: {m}"),
            ConfigError::Syntax(m) => write!(f, "malformed config: {m}"),
            ConfigError::Invalid(errs) => {
                write!(f, "{} config error(s):", errs.len())?;
                for e in errs {
                    write!(f, "\n  {e}")?;
                }
                Ok(())
            }
        }
    }
}

const LAB_KEYS: [&str; 7] = ["omega_up", "omega_down", "omega_v", "omega_c", "omega_l1", "omega_l2", "omega_l3"];

const KEYS: &[&str] = &[
    "omega1",
    "omega2",
    "omega3",
    "g",
    "delta1",
    "delta2",
    "k",
    "photon_cutoff",
    "omega_up",
    "omega_down",
    "omega_v",
    "omega_c",
    "omega_l1",
    "omega_l2",
    "omega_l3",
    "photon_n",
    "mean_photon",
    "photon_sweep",
    "kappa_ladder",
    "cavity_lifetime_ps",
    "separation_ladder",
    "model_level",
    "fidelity_mode",
    "scheme",
    "steps_per_period",
    "lindblad_steps_per_period",
    "approx_threshold",
    "out",
    "format",
];

struct Reader<'a> {
    map: &'a Map<String, Value>,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn number(&mut self, key: &str) -> Option<f64> {
        match self.map.get(key)? {
            Value::Number(n) => n.as_f64(),
            other => {
                self.errors.push(format!("\"{key}\" must be a number, got {other}"));
                None
            }
        }
    }

    fn required(&mut self, key: &str) -> Option<f64> {
        if !self.map.contains_key(key) {
            self.errors.push(format!("missing required key \"{key}\""));
            return None;
        }
        self.number(key)
    }

    fn integer(&mut self, key: &str) -> Option<u64> {
        match self.map.get(key)? {
            Value::Number(n) if n.as_u64().is_some() => n.as_u64(),
            other => {
                self.errors.push(format!("\"{key}\" must be a non-negative integer, got {other}"));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<&str> {
        match self.map.get(key)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                self.errors.push(format!("\"{key}\" must be a string, got {other}"));
                None
            }
        }
    }

    fn sweep(&mut self, key: &str) -> Option<Sweep> {
        let raw = self.string(key)?.to_string();
        let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
        let parsed = match parts.as_slice() {
            [a, b, c] => match (a.parse::<f64>(), b.parse::<f64>(), c.parse::<usize>()) {
                (Ok(start), Ok(stop), Ok(count)) if count >= 1 && start.is_finite() && stop.is_finite() => {
                    Some(Sweep { start, stop, count })
                }
                _ => None,
            },
            _ => None,
        };
        if parsed.is_none() {
            self.errors.push(format!("\"{key}\" must be \"start,stop,count\" with count >= 1, got \"{raw}\""));
        }
        parsed
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)]) -> Option<T> {
        let raw = self.string(key)?.to_string();
        let found = options.iter().find(|(name, _)| *name == raw).map(|(_, v)| *v);
        if found.is_none() {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            self.errors.push(format!("\"{key}\" must be one of {}, got \"{raw}\"", names.join(", ")));
        }
        found
    }
}

pub const MODEL_LEVELS: [(&str, ModelLevel); 5] = [
    ("analytic", ModelLevel::Analytic),
    ("effective", ModelLevel::EffectiveNumeric),
    ("effective_numeric", ModelLevel::EffectiveNumeric),
    ("effective_pm", ModelLevel::EffectivePm),
    ("full", ModelLevel::FullNumeric),
];

const FIDELITY_MODES: [(&str, FidelityMode); 3] = [
    ("strict", FidelityMode::Strict),
    ("global_phase", FidelityMode::GlobalPhase),
    ("local_z", FidelityMode::LocalZ),
];

const SCHEMES: [(&str, Scheme); 2] =
    [("commutator_free_4", Scheme::CommutatorFree4), ("midpoint_exponential", Scheme::MidpointExponential)];

const FORMATS: [(&str, Format); 2] = [("json", Format::Json), ("csv", Format::Csv)];

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let map = value
        .as_object()
        .ok_or_else(|| ConfigError::Syntax("top level must be a JSON object".into()))?;
    let mut r = Reader { map, errors: Vec::new() };
    for key in map.keys() {
        if !KEYS.contains(&key.as_str()) {
            r.errors.push(format!("unknown key \"{key}\""));
        }
    }

    let omega1 = r.number("omega1");
    let omega2 = r.required("omega2");
    let omega3 = r.number("omega3");
    let g = r.number("g");
    let delta1 = r.required("delta1");
    let delta2 = r.required("delta2");
    let k = if map.contains_key("k") {
        r.integer("k")
    } else {
        r.errors.push("missing required key \"k\"".into());
        None
    };
    let photon_cutoff = r.integer("photon_cutoff").map(|v| v as usize).unwrap_or(DEFAULT_PHOTON_CUTOFF);
    let lab_values: Vec<Option<f64>> = LAB_KEYS.iter().map(|key| r.number(key)).collect();
    let photon_n = r.integer("photon_n").map(|v| v as usize).unwrap_or(0);
    let mean_photon = r.number("mean_photon");
    let photon_sweep = r.sweep("photon_sweep").unwrap_or(Sweep { start: 0.0, stop: 4.0, count: 5 });
    let kappa_ladder = r.sweep("kappa_ladder");
    let cavity_lifetime_ps = r.number("cavity_lifetime_ps").unwrap_or(10.0);
    let separation_ladder = r.sweep("separation_ladder");
    let model_level = r.choice("model_level", &MODEL_LEVELS).unwrap_or(ModelLevel::EffectiveNumeric);
    let fidelity_mode = r.choice("fidelity_mode", &FIDELITY_MODES).unwrap_or(FidelityMode::LocalZ);
    let scheme = r.choice("scheme", &SCHEMES).unwrap_or(Scheme::CommutatorFree4);
    let steps_per_period = r.integer("steps_per_period").map(|v| v as usize).unwrap_or(2000);
    let lindblad_steps_per_period = r.integer("lindblad_steps_per_period").map(|v| v as usize).unwrap_or(500);
    let approx_threshold = r.number("approx_threshold").unwrap_or(DEFAULT_APPROX_THRESHOLD);
    let out = r.string("out").map(str::to_string);
    let format = r.choice("format", &FORMATS);

    let mut errors = r.errors;
    let mut positive = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            if !(v > 0.0) || !v.is_finite() {
                errors.push(format!("{name} must be positive, got {v}"));
            }
        }
    };
    positive("omega1", omega1);
    positive("omega2", omega2);
    positive("omega3", omega3);
    positive("g", g);
    positive("delta1", delta1);
    positive("delta2", delta2);
    positive("cavity_lifetime_ps", Some(cavity_lifetime_ps));
    positive("approx_threshold", Some(approx_threshold));
    if let (Some(d1), Some(d2)) = (delta1, delta2) {
        if d1 == d2 {
            errors.push("delta1 must differ from delta2".into());
        }
    }
    if let Some(n) = mean_photon {
        if !(n >= 0.0) || !n.is_finite() {
            errors.push(format!("mean_photon must be non-negative, got {n}"));
        }
    }
    if photon_cutoff < 2 {
        errors.push(format!("photon_cutoff must be at least 2, got {photon_cutoff}"));
    }
    if photon_n > photon_cutoff {
        errors.push(format!("photon_n ({photon_n}) exceeds photon_cutoff ({photon_cutoff})"));
    }
    let sw = photon_sweep;
    if sw.start < 0.0 || sw.stop < sw.start || sw.start.fract() != 0.0 || sw.stop.fract() != 0.0 {
        errors.push("photon_sweep start and stop must be integers with 0 <= start <= stop".into());
    } else if sw.stop as usize > photon_cutoff {
        errors.push(format!("photon_sweep stop ({}) exceeds photon_cutoff ({photon_cutoff})", sw.stop));
    } else if sw.count != (sw.stop - sw.start) as usize + 1 {
        errors.push(format!("photon_sweep count must be stop - start + 1 = {}", (sw.stop - sw.start) as usize + 1));
    }
    if let Some(s) = kappa_ladder {
        if s.start < 0.0 || s.stop < 0.0 {
            errors.push("kappa_ladder entries must be non-negative".into());
        }
    }
    if let Some(s) = separation_ladder {
        if !(s.start > 0.0 && s.stop > 0.0) {
            errors.push("separation_ladder entries must be positive".into());
        }
    }
    for (name, v) in [("steps_per_period", steps_per_period), ("lindblad_steps_per_period", lindblad_steps_per_period)] {
        if v == 0 {
            errors.push(format!("{name} must be positive"));
        }
    }
    let solve_for = match (omega1, omega3, g) {
        (Some(omega1), Some(omega3), None) => Some(SolveFor::CavityCoupling { omega1, omega3 }),
        (None, None, Some(g)) => Some(SolveFor::LaserProduct { g }),
        (None, None, None) if map.contains_key("omega1") || map.contains_key("g") => None,
        _ => {
            errors.push("give either omega1 and omega3 (g is solved) or g alone (omega1*omega3 is solved)".into());
            None
        }
    };
    let lab = if lab_values.iter().all(Option::is_none) {
        None
    } else if let [Some(omega_up), Some(omega_down), Some(omega_v), Some(omega_c), Some(omega_l1), Some(omega_l2), Some(omega_l3)] =
        lab_values[..]
    {
        Some(LabFrequencies { omega_up, omega_down, omega_v, omega_c, omega_l1, omega_l2, omega_l3 })
    } else {
        errors.push(format!("lab frequencies need all of {}", LAB_KEYS.join(", ")));
        None
    };

    if !errors.is_empty() {
        return Err(ConfigError::Invalid(errors));
    }
    Ok(ExperimentConfig {
        solve_for: solve_for.expect("checked above"),
        omega2: omega2.expect("checked above"),
        delta1: delta1.expect("checked above"),
        delta2: delta2.expect("checked above"),
        k: k.expect("checked above") as u32,
        photon_cutoff,
        lab,
        photon_n,
        mean_photon,
        photon_sweep,
        kappa_ladder,
        cavity_lifetime_ps,
        separation_ladder,
        model_level,
        fidelity_mode,
        scheme,
        steps_per_period,
        lindblad_steps_per_period,
        approx_threshold,
        out,
        format,
    })
}
