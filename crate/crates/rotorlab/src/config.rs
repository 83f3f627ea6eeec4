//! Line-oriented `key = value` scenario files.
//!
//! ```text
//! # comment
//! scenario = gauss_law
//! seed = 7
//! paths = 20000
//! ```
//!
//! `scenario` and `seed` are required; every other key has a per-scenario
//! default. Unknown and repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` repeats line {first}")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: `{key}`: cannot parse `{value}` as {expected}")]
    Type {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("line {line}: `{key}` out of range: {reason}")]
    Range { line: usize, key: String, reason: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("line {line}: unknown scenario `{name}`")]
    UnknownScenario { line: usize, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    GaussLaw,
    Levy,
    DivergenceIdentities,
    ErgodicDichotomy,
    NecessaryConditions,
    MixingSign,
    Girsanov,
    Example1,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::GaussLaw,
        Scenario::Levy,
        Scenario::DivergenceIdentities,
        Scenario::ErgodicDichotomy,
        Scenario::NecessaryConditions,
        Scenario::MixingSign,
        Scenario::Girsanov,
        Scenario::Example1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::GaussLaw => "gauss_law",
            Scenario::Levy => "levy",
            Scenario::DivergenceIdentities => "divergence_identities",
            Scenario::ErgodicDichotomy => "ergodic_dichotomy",
            Scenario::NecessaryConditions => "necessary_conditions",
            Scenario::MixingSign => "mixing_sign",
            Scenario::Girsanov => "girsanov",
            Scenario::Example1 => "example1",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Scenario::GaussLaw => "law of the rotated Wiener integral for sign and adapted rotors",
            Scenario::Levy => "increments of the transformed path against Brownian increments",
            Scenario::DivergenceIdentities => {
                "pathwise rotation, basis-sum, composition and Ogawa identities"
            }
            Scenario::ErgodicDichotomy => "Birkhoff averages in ergodic and non-ergodic regimes",
            Scenario::NecessaryConditions => "invariants that witness failure of the spectral conditions",
            Scenario::MixingSign => "decay of (Q_n h, h) and Wick mixing for the sign rotor",
            Scenario::Girsanov => "change of variables along Q_n h with the exponential density",
            Scenario::Example1 => "powers of the two-point function of the sign rotor",
        }
    }

    /// Rotor choices accepted by the scenario; the first is the default.
    pub fn rotor_choices(&self) -> &'static [RotorChoice] {
        use RotorChoice::*;
        match self {
            Scenario::GaussLaw => &[All, Sign, Adapted],
            Scenario::Levy => &[All, Sign, Adapted, Fixed],
            Scenario::DivergenceIdentities => &[Adapted, Fixed],
            Scenario::Girsanov => &[All, Fixed, Sign],
            _ => &[Sign],
        }
    }

    fn defaults(&self) -> Defaults {
        let d = |n_steps, dim, paths, n_iter, n_max, n_blocks| Defaults {
            n_steps,
            dim,
            paths,
            n_iter,
            n_max,
            n_blocks,
        };
        match self {
            Scenario::GaussLaw => d(256, 1, 100_000, 1, 1, 1),
            Scenario::Levy => d(16, 2, 100_000, 1, 1, 1),
            Scenario::DivergenceIdentities => d(16, 2, 1000, 1, 1, 1),
            Scenario::ErgodicDichotomy => d(128, 1, 50, 10_000, 1, 64),
            Scenario::NecessaryConditions => d(128, 1, 50, 1000, 1, 64),
            Scenario::MixingSign => d(256, 1, 100_000, 1, 10, 1),
            Scenario::Girsanov => d(64, 1, 100_000, 1, 3, 1),
            Scenario::Example1 => d(16, 1, 100_000, 1, 50, 1),
        }
    }
}

impl FromStr for Scenario {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Scenario::ALL.into_iter().find(|x| x.name() == s).ok_or(())
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

struct Defaults {
    n_steps: usize,
    dim: usize,
    paths: usize,
    n_iter: usize,
    n_max: usize,
    n_blocks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotorChoice {
    All,
    Sign,
    Adapted,
    Fixed,
}

impl RotorChoice {
    pub fn name(&self) -> &'static str {
        match self {
            RotorChoice::All => "all",
            RotorChoice::Sign => "sign",
            RotorChoice::Adapted => "adapted",
            RotorChoice::Fixed => "fixed",
        }
    }

    pub fn includes(&self, other: RotorChoice) -> bool {
        *self == RotorChoice::All || *self == other
    }
}

/// Phase law of the ergodic regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawChoice {
    Uniform,
    TwoPoint,
}

impl LawChoice {
    pub fn name(&self) -> &'static str {
        match self {
            LawChoice::Uniform => "uniform",
            LawChoice::TwoPoint => "two_point",
        }
    }
}

/// Pass thresholds. All are positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub var_tol: f64,
    pub mean_sigmas: f64,
    pub skew_tol: f64,
    pub kurt_tol: f64,
    pub ks_factor: f64,
    pub levy_var_tol: f64,
    pub corr_sigmas: f64,
    pub mc_sigmas: f64,
    pub mean_tol: f64,
    pub disp_tol: f64,
    pub ratio_min: f64,
    pub atom_threshold: f64,
    pub fd_step: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            var_tol: 0.02,
            mean_sigmas: 4.0,
            skew_tol: 0.05,
            kurt_tol: 0.1,
            ks_factor: 1.5,
            levy_var_tol: 0.03,
            corr_sigmas: 4.0,
            mc_sigmas: 4.0,
            mean_tol: 0.02,
            disp_tol: 0.02,
            ratio_min: 5.0,
            atom_threshold: 0.05,
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub n_steps: usize,
    pub dim: usize,
    pub paths: usize,
    pub n_iter: usize,
    pub n_max: usize,
    pub n_blocks: usize,
    pub rotor: RotorChoice,
    pub phase_law: LawChoice,
    pub phase_value: f64,
    pub rotation_rate: f64,
    pub thresholds: Thresholds,
    pub out: PathBuf,
}

impl ScenarioConfig {
    /// Configuration with every default applied.
    pub fn with_defaults(scenario: Scenario, seed: u64) -> Self {
        let d = scenario.defaults();
        Self {
            scenario,
            seed,
            n_steps: d.n_steps,
            dim: d.dim,
            paths: d.paths,
            n_iter: d.n_iter,
            n_max: d.n_max,
            n_blocks: d.n_blocks,
            rotor: scenario.rotor_choices()[0],
            phase_law: LawChoice::Uniform,
            phase_value: 1.0,
            rotation_rate: 3.0,
            thresholds: Thresholds::default(),
            out: PathBuf::from("results"),
        }
    }

    /// The `key = value` form accepted by [`parse_config`].
    pub fn serialize(&self) -> String {
        let t = &self.thresholds;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("scenario", self.scenario.name().into());
        kv("seed", self.seed.to_string());
        kv("n_steps", self.n_steps.to_string());
        kv("dim", self.dim.to_string());
        kv("paths", self.paths.to_string());
        kv("n_iter", self.n_iter.to_string());
        kv("n_max", self.n_max.to_string());
        kv("n_blocks", self.n_blocks.to_string());
        kv("rotor", self.rotor.name().into());
        kv("phase_law", self.phase_law.name().into());
        kv("phase_value", format!("{:?}", self.phase_value));
        kv("rotation_rate", format!("{:?}", self.rotation_rate));
        for (k, v) in threshold_fields(t) {
            kv(k, format!("{v:?}"));
        }
        kv("out", self.out.display().to_string());
        s
    }
}

fn threshold_fields(t: &Thresholds) -> [(&'static str, f64); 13] {
    [
        ("var_tol", t.var_tol),
        ("mean_sigmas", t.mean_sigmas),
        ("skew_tol", t.skew_tol),
        ("kurt_tol", t.kurt_tol),
        ("ks_factor", t.ks_factor),
        ("levy_var_tol", t.levy_var_tol),
        ("corr_sigmas", t.corr_sigmas),
        ("mc_sigmas", t.mc_sigmas),
        ("mean_tol", t.mean_tol),
        ("disp_tol", t.disp_tol),
        ("ratio_min", t.ratio_min),
        ("atom_threshold", t.atom_threshold),
        ("fd_step", t.fd_step),
    ]
}

fn threshold_mut<'a>(t: &'a mut Thresholds, key: &str) -> Option<&'a mut f64> {
    Some(match key {
        "var_tol" => &mut t.var_tol,
        "mean_sigmas" => &mut t.mean_sigmas,
        "skew_tol" => &mut t.skew_tol,
        "kurt_tol" => &mut t.kurt_tol,
        "ks_factor" => &mut t.ks_factor,
        "levy_var_tol" => &mut t.levy_var_tol,
        "corr_sigmas" => &mut t.corr_sigmas,
        "mc_sigmas" => &mut t.mc_sigmas,
        "mean_tol" => &mut t.mean_tol,
        "disp_tol" => &mut t.disp_tol,
        "ratio_min" => &mut t.ratio_min,
        "atom_threshold" => &mut t.atom_threshold,
        "fd_step" => &mut t.fd_step,
        _ => return None,
    })
}

const KEYS: &[&str] = &[
    "scenario",
    "seed",
    "n_steps",
    "dim",
    "paths",
    "n_iter",
    "n_max",
    "n_blocks",
    "rotor",
    "phase_law",
    "phase_value",
    "rotation_rate",
    "var_tol",
    "mean_sigmas",
    "skew_tol",
    "kurt_tol",
    "ks_factor",
    "levy_var_tol",
    "corr_sigmas",
    "mc_sigmas",
    "mean_tol",
    "disp_tol",
    "ratio_min",
    "atom_threshold",
    "fd_step",
    "out",
];

/// A raw value with the line it came from (0 for command-line overrides).
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    parse_with_overrides(text, &[])
}

/// Like [`parse_config`], with `(key, value)` pairs that replace the file's
/// values (command-line flags).
pub fn parse_with_overrides(
    text: &str,
    overrides: &[(&str, String)],
) -> Result<ScenarioConfig, ConfigError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: raw.trim().to_string(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: raw.trim().to_string(),
            });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey {
                line,
                key: k.to_string(),
            });
        }
        if let Some(prev) = entries.get(k) {
            return Err(ConfigError::Duplicate {
                line,
                key: k.to_string(),
                first: prev.line,
            });
        }
        entries.insert(
            k.to_string(),
            Entry {
                line,
                value: v.to_string(),
            },
        );
    }
    for (k, v) in overrides {
        if !KEYS.contains(k) {
            return Err(ConfigError::UnknownKey {
                line: 0,
                key: k.to_string(),
            });
        }
        entries.insert(
            k.to_string(),
            Entry {
                line: 0,
                value: v.clone(),
            },
        );
    }
    build(&entries)
}

fn typed<T: FromStr>(key: &str, e: &Entry, expected: &'static str) -> Result<T, ConfigError> {
    e.value.parse().map_err(|_| ConfigError::Type {
        line: e.line,
        key: key.to_string(),
        value: e.value.clone(),
        expected,
    })
}

fn range(key: &str, e: Option<&Entry>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        line: e.map_or(0, |e| e.line),
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn build(entries: &BTreeMap<String, Entry>) -> Result<ScenarioConfig, ConfigError> {
    let scen_entry = entries.get("scenario").ok_or(ConfigError::Missing("scenario"))?;
    let scenario: Scenario =
        scen_entry
            .value
            .parse()
            .map_err(|_| ConfigError::UnknownScenario {
                line: scen_entry.line,
                name: scen_entry.value.clone(),
            })?;
    let seed_entry = entries.get("seed").ok_or(ConfigError::Missing("seed"))?;
    let seed: u64 = typed("seed", seed_entry, "unsigned integer")?;
    let mut cfg = ScenarioConfig::with_defaults(scenario, seed);

    let count = |key: &str, slot: &mut usize| -> Result<(), ConfigError> {
        if let Some(e) = entries.get(key) {
            let v: usize = typed(key, e, "unsigned integer")?;
            if v == 0 {
                return Err(range(key, Some(e), "must be positive"));
            }
            *slot = v;
        }
        Ok(())
    };
    count("n_steps", &mut cfg.n_steps)?;
    count("dim", &mut cfg.dim)?;
    count("paths", &mut cfg.paths)?;
    count("n_iter", &mut cfg.n_iter)?;
    count("n_max", &mut cfg.n_max)?;
    count("n_blocks", &mut cfg.n_blocks)?;

    if let Some(e) = entries.get("rotor") {
        let choices = scenario.rotor_choices();
        cfg.rotor = *choices
            .iter()
            .find(|c| c.name() == e.value)
            .ok_or_else(|| {
                let names: Vec<_> = choices.iter().map(|c| c.name()).collect();
                range("rotor", Some(e), format!("{scenario} accepts {}", names.join(", ")))
            })?;
    }
    if let Some(e) = entries.get("phase_law") {
        cfg.phase_law = match e.value.as_str() {
            "uniform" => LawChoice::Uniform,
            "two_point" => LawChoice::TwoPoint,
            _ => return Err(range("phase_law", Some(e), "expected uniform or two_point")),
        };
    }
    let real = |key: &str, slot: &mut f64, positive: bool| -> Result<(), ConfigError> {
        if let Some(e) = entries.get(key) {
            let v: f64 = typed(key, e, "real number")?;
            if !v.is_finite() {
                return Err(range(key, Some(e), "must be finite"));
            }
            if positive && v <= 0.0 {
                return Err(range(key, Some(e), "must be positive"));
            }
            *slot = v;
        }
        Ok(())
    };
    real("phase_value", &mut cfg.phase_value, false)?;
    real("rotation_rate", &mut cfg.rotation_rate, false)?;
    for key in threshold_fields(&Thresholds::default()).map(|(k, _)| k) {
        let slot = threshold_mut(&mut cfg.thresholds, key).expect("threshold key");
        real(key, slot, true)?;
    }
    if let Some(e) = entries.get("out") {
        cfg.out = PathBuf::from(&e.value);
    }
    validate(&cfg, entries)?;
    Ok(cfg)
}

fn validate(cfg: &ScenarioConfig, entries: &BTreeMap<String, Entry>) -> Result<(), ConfigError> {
    let at = |k: &str| entries.get(k);
    if cfg.n_steps < 2 {
        return Err(range("n_steps", at("n_steps"), "need at least 2 steps"));
    }
    let t = &cfg.thresholds;
    if t.var_tol >= 1.0 || t.levy_var_tol >= 1.0 {
        return Err(range("var_tol", at("var_tol").or(at("levy_var_tol")), "must be below 1"));
    }
    if t.atom_threshold > 1.0 {
        return Err(range("atom_threshold", at("atom_threshold"), "must be at most 1"));
    }
    match cfg.scenario {
        Scenario::ErgodicDichotomy | Scenario::NecessaryConditions => {
            let planes = cfg.n_steps * cfg.dim / 2;
            if !(cfg.n_steps * cfg.dim).is_multiple_of(2) {
                return Err(range("n_steps", at("n_steps"), "n_steps * dim must be even"));
            }
            if !planes.is_multiple_of(cfg.n_blocks) {
                return Err(range(
                    "n_blocks",
                    at("n_blocks"),
                    format!("must divide the number of planes ({planes})"),
                ));
            }
            if cfg.paths < 50 {
                return Err(range("paths", at("paths"), "need at least 50 starting paths"));
            }
        }
        Scenario::Levy => {
            if cfg.paths < 10_000 {
                return Err(range("paths", at("paths"), "need at least 10000 paths"));
            }
        }
        Scenario::GaussLaw | Scenario::MixingSign | Scenario::Girsanov | Scenario::Example1 => {
            if cfg.paths < 1000 {
                return Err(range("paths", at("paths"), "need at least 1000 paths"));
            }
        }
        Scenario::DivergenceIdentities => {}
    }
    Ok(())
}
