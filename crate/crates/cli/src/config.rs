//! Run configuration: TOML file, `[overrides]` table and `--set` pairs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use forster_core::atomic_states::PairSystem;
use forster_core::detection::FidelityWeighting;
use forster_core::ensemble::{ExperimentGeometry, FieldResolution, PhotonStats, SourceOptics, MIN_SAMPLES};
use forster_core::spinwave::RetrievalConfig;
use serde::{Deserialize, Serialize};

use crate::error::{RunError, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    Starkmap,
    GainScan,
    FidelityScan,
    Retrieval,
    OracleCheck,
}

impl ScanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanKind::Starkmap => "starkmap",
            ScanKind::GainScan => "gain-scan",
            ScanKind::FidelityScan => "fidelity-scan",
            ScanKind::Retrieval => "retrieval",
            ScanKind::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for ScanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// Either explicit values or `{ start, stop, points }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range(GridRange),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Range(r) if r.points == 1 => vec![r.start],
            Grid::Range(r) => (0..r.points)
                .map(|i| r.start + (r.stop - r.start) * i as f64 / (r.points - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self, name: &str) -> RunResult<()> {
        if let Grid::Range(r) = self {
            if r.points == 0 || !(r.stop >= r.start) {
                return Err(RunError::Config(format!("{name}: need points >= 1 and stop >= start")));
            }
        }
        let v = self.values();
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(RunError::Config(format!("{name} must be a non-empty list of finite numbers")));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RunError::Config(format!("{name} must be strictly increasing")));
        }
        Ok(())
    }
}

/// Optional replacements for the pair system's interaction constants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairOverrides {
    /// Replaces `c3` of every channel, rad/µs·µm³.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c3_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c6_reference: Option<f64>,
    /// Radians.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub weighting: FidelityWeighting,
    /// Simulated shots per histogram for the fidelity scan; exact count
    /// distributions are used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    /// Shots for the histogram table written at the fidelity peak.
    pub histogram_shots: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            weighting: FidelityWeighting::WorstCase,
            shots: None,
            histogram_shots: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub cases: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { cases: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Preset name or path to a channel file.
    pub pair_system: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanKind>,
    pub seed: u64,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// V/cm. Defaults to ±0.1 around the preset's reference resonance, or
    /// 0–0.25 without one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_grid: Option<Grid>,
    /// µs⁻¹
    pub rate_grid: Grid,
    /// Mean incident source photons during storage.
    pub source_means: Grid,
    /// Field treated as "on resonance" by the retrieval scan, V/cm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resonance_field: Option<f64>,
    pub geometry: ExperimentGeometry,
    pub optics: SourceOptics,
    pub stats: PhotonStats,
    pub resolution: FieldResolution,
    pub pair: PairOverrides,
    pub detection: DetectionConfig,
    pub retrieval: RetrievalConfig,
    pub oracle: OracleConfig,
    /// Flat `key = value` pairs applied on top of everything else.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, toml::Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pair_system: "rb87_50s48s".into(),
            scan: None,
            seed: 0,
            samples: MIN_SAMPLES,
            threads: None,
            output_dir: None,
            field_grid: None,
            rate_grid: Grid::Values(vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0]),
            source_means: Grid::Range(GridRange { start: 0.0, stop: 6.0, points: 13 }),
            resonance_field: None,
            geometry: ExperimentGeometry::default(),
            optics: SourceOptics::default(),
            stats: PhotonStats::default(),
            resolution: FieldResolution::default(),
            pair: PairOverrides::default(),
            detection: DetectionConfig::default(),
            retrieval: RetrievalConfig::default(),
            oracle: OracleConfig::default(),
            overrides: BTreeMap::new(),
        }
    }
}

/// Keys that may be absent from the serialized defaults but are still valid.
const OPTIONAL_KEYS: &[(&str, &str)] = &[
    ("", "scan"),
    ("", "threads"),
    ("", "output_dir"),
    ("", "field_grid"),
    ("", "resonance_field"),
    ("pair", "c3"),
    ("pair", "c3_prime"),
    ("pair", "gamma_p"),
    ("pair", "c6_reference"),
    ("pair", "theta"),
    ("detection", "shots"),
];

fn parse_table(text: &str, origin: &str) -> RunResult<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| RunError::Config(format!("{origin}: {e}")))
}

/// Parses a `--set` value as a TOML value, falling back to a plain string.
pub fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Resolves a dotted or bare key to a full path.
fn resolve_key(key: &str) -> RunResult<Vec<String>> {
    if key.contains('.') {
        return Ok(key.split('.').map(str::to_string).collect());
    }
    let defaults = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
    let mut hits: Vec<Vec<String>> = Vec::new();
    if defaults.get(key).is_some_and(|v| !v.is_table()) || OPTIONAL_KEYS.contains(&("", key)) {
        hits.push(vec![key.to_string()]);
    }
    for (section, value) in &defaults {
        if let toml::Value::Table(t) = value {
            if t.contains_key(key) || OPTIONAL_KEYS.contains(&(section.as_str(), key)) {
                hits.push(vec![section.clone(), key.to_string()]);
            }
        }
    }
    for (section, k) in OPTIONAL_KEYS {
        if *k == key && !section.is_empty() && !hits.iter().any(|h| h[0] == *section) {
            hits.push(vec![section.to_string(), key.to_string()]);
        }
    }
    match hits.len() {
        0 => Err(RunError::Config(format!("unknown parameter `{key}`"))),
        1 => Ok(hits.remove(0)),
        _ => Err(RunError::Config(format!(
            "parameter `{key}` is ambiguous; use one of {}",
            hits.iter().map(|h| h.join(".")).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> RunResult<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut current = table;
    for p in parents {
        let entry = current
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| RunError::Config(format!("`{p}` is not a section")))?;
    }
    current.insert(last.clone(), value);
    Ok(())
}

/// Applies a flat override such as `storage_efficiency = 1.3` or
/// `stats.source_rate = 20`.
pub fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> RunResult<()> {
    let path = resolve_key(key)?;
    set_path(table, &path, value)
}

impl RunConfig {
    /// Builds a configuration from TOML text plus `--set` style pairs.
    pub fn from_toml_with(text: &str, origin: &str, sets: &[(String, String)]) -> RunResult<Self> {
        let mut table = parse_table(text, origin)?;
        if let Some(over) = table.remove("overrides") {
            let over = match over {
                toml::Value::Table(t) => t,
                _ => return Err(RunError::Config(format!("{origin}: `overrides` must be a table"))),
            };
            for (k, v) in over {
                apply_override(&mut table, &k, v)?;
            }
        }
        for (k, v) in sets {
            apply_override(&mut table, k, parse_value(v))?;
        }
        let config: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| RunError::Config(format!("{origin}: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> RunResult<Self> {
        Self::from_toml_with(text, "config", &[])
    }

    pub fn load(path: &Path, sets: &[(String, String)]) -> RunResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_with(&text, &path.display().to_string(), sets)
    }

    /// Checks every physical parameter before any computation starts.
    pub fn validate(&self) -> RunResult<()> {
        let model = |e: forster_core::Error| RunError::Config(e.to_string());
        if self.samples < MIN_SAMPLES {
            return Err(RunError::Config(format!(
                "samples must be >= {MIN_SAMPLES}, got {}",
                self.samples
            )));
        }
        if self.threads == Some(0) {
            return Err(RunError::Config("threads must be >= 1".into()));
        }
        self.geometry.validate().map_err(model)?;
        self.stats.validate().map_err(model)?;
        self.retrieval.validate().map_err(model)?;
        let o = &self.optics;
        for (name, v) in [
            ("optics.cross_section", o.cross_section),
            ("optics.omega_rabi", o.omega_rabi),
            ("optics.gamma", o.gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(RunError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(o.gamma_s >= 0.0 && o.omega.is_finite()) {
            return Err(RunError::Config("optics.gamma_s must be >= 0 and optics.omega finite".into()));
        }
        if !(self.resolution.half_width >= 0.0) || self.resolution.nodes == 0 {
            return Err(RunError::Config("resolution needs half_width >= 0 and nodes >= 1".into()));
        }
        if let FidelityWeighting::Prior(p) = self.detection.weighting {
            if !(0.0..=1.0).contains(&p) {
                return Err(RunError::Config(format!("detection.weighting prior must be in [0, 1], got {p}")));
            }
        }
        if self.detection.shots == Some(0) || self.detection.histogram_shots == 0 {
            return Err(RunError::Config("detection shot counts must be >= 1".into()));
        }
        if self.oracle.cases == 0 {
            return Err(RunError::Config("oracle.cases must be >= 1".into()));
        }
        if let Some(g) = &self.field_grid {
            g.validate("field_grid")?;
            if g.values().iter().any(|&f| f < 0.0) {
                return Err(RunError::Config("field_grid values must be >= 0".into()));
            }
        }
        self.rate_grid.validate("rate_grid")?;
        if self.rate_grid.values().iter().any(|&r| r < 0.0) {
            return Err(RunError::Config("rate_grid values must be >= 0".into()));
        }
        self.source_means.validate("source_means")?;
        if self.source_means.values().iter().any(|&n| n < 0.0) {
            return Err(RunError::Config("source_means values must be >= 0".into()));
        }
        for (name, v) in [
            ("pair.c3", self.pair.c3),
            ("pair.c3_prime", self.pair.c3_prime),
            ("pair.gamma_p", self.pair.gamma_p),
            ("pair.c6_reference", self.pair.c6_reference),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(RunError::Config(format!("{name} must be finite and >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Pair-system text and the parsed system with overrides applied.
    pub fn pair_system(&self) -> RunResult<(String, PairSystem)> {
        let text = match self.pair_system.as_str() {
            "rb87_50s48s" => forster_core::atomic_states::PRESET_RB87_50S48S.to_string(),
            "rb87_66s64s" => forster_core::atomic_states::PRESET_RB87_66S64S.to_string(),
            path => std::fs::read_to_string(path).map_err(|e| {
                RunError::Config(format!(
                    "pair_system `{path}` is neither a preset {:?} nor a readable file: {e}",
                    forster_core::atomic_states::PRESET_NAMES
                ))
            })?,
        };
        let mut system = PairSystem::from_toml(&text).map_err(|e| RunError::Config(e.to_string()))?;
        let p = &self.pair;
        if let Some(c3) = p.c3 {
            system.pair.channels.iter_mut().for_each(|ch| ch.c3 = c3);
        }
        if let Some(v) = p.c3_prime {
            system.constants.c3_prime = v;
        }
        if let Some(v) = p.gamma_p {
            system.constants.gamma_p = v;
        }
        if let Some(v) = p.c6_reference {
            system.constants.c6_reference = v;
        }
        if let Some(v) = p.theta {
            system.pair.theta = v;
            system.pair.validate().map_err(|e| RunError::Config(e.to_string()))?;
        }
        Ok((text, system))
    }

    /// Fully resolved configuration for the summary: overrides folded in,
    /// output location dropped.
    pub fn echo(&self) -> RunConfig {
        RunConfig {
            output_dir: None,
            overrides: BTreeMap::new(),
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Commented default configuration.
pub const TEMPLATE: &str = r#"# Rydberg transistor simulation settings. Every key is optional.
# Units: rad/µs for rates and energies, µm, µs, V/cm.

pair_system = "rb87_50s48s"   # preset name or path to a channel file
seed = 0
samples = 2000                 # Monte Carlo gate/source samples per field
# threads = 4                  # worker threads; all cores when absent
# field_grid = { start = 0.61, stop = 0.81, points = 101 }   # default: ±0.1 V/cm around the preset resonance
rate_grid = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0]      # µs⁻¹, up to the highest measured rate
source_means = { start = 0.0, stop = 6.0, points = 13 }    # incident source photons during storage
# resonance_field = 0.710      # default: preset reference resonance

[geometry]
beam_waist = 6.2               # µm, measured source beam waist
cloud_half_length = 40.0       # µm, measured 1/e cloud half-length
cloud_radius = 10.0            # µm, measured 1/e cloud radius
atom_number = 20000.0          # measured atom number
gate_distribution = "density-times-beam"   # or { pinned = [x, y, z] }

[optics]
cross_section = 0.29           # µm², fitted to the zero-field transmission
omega_rabi = 25.1              # control Rabi frequency, 2π × 4 MHz
gamma = 19.04                  # half the D2 linewidth
gamma_s = 0.63                 # fitted to the zero-field transmission
omega = 0.0                    # two-photon detuning

[stats]
gate_mean_in = 1.0             # mean incident gate photons
source_rate = 35.0             # µs⁻¹, highest measured rate
pulse_length = 21.25           # µs, fitted so that the resonant gain is 200 at 35 µs⁻¹
storage_efficiency = 0.6       # measured gate storage efficiency
detector_efficiency = 0.3      # measured detection efficiency
dephasing_per_photon = 0.00064 # fitted so the non-destructive window ends near 36 µs⁻¹
rate_ceiling = 1000.0          # µs⁻¹, reported when nothing accumulates

[resolution]
half_width = 0.002             # V/cm, measured field resolution
nodes = 4                      # Gauss-Legendre nodes across the resolution interval

[pair]
# c3 = 12250.0                 # replaces every channel coupling
# c3_prime = 377.0
# gamma_p = 3.1416
# c6_reference = 9.1e5
# theta = 0.0

[detection]
weighting = "worst-case"       # or { prior = 0.5 }
# shots = 100000               # simulate histograms instead of exact distributions
histogram_shots = 100000

[retrieval]
base_efficiency = 0.2          # read-out efficiency without storage loss, assumed
storage_time = 4.2             # µs, measured
pulse_length = 3.2             # µs, measured
lifetime = 3.6                 # µs, measured coherence lifetime
grid_points = 201
transverse_gates = 8
sources_per_gate = 8

[oracle]
cases = 10

[overrides]
# storage_efficiency = 0.5     # flat keys, or dotted like "stats.source_rate"
"#;
