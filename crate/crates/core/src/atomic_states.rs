//! Rydberg pair states and their Stark-tuned Förster channels.
//!
//! Energies are angular frequencies in rad/µs ("angular MHz"), electric
//! fields in V/cm, lengths in µm.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Built-in channel data for the 50S/48S pair of ⁸⁷Rb.
pub const PRESET_RB87_50S48S: &str = include_str!("../presets/rb87_50s48s.toml");
/// Built-in channel data for the 66S/64S pair of ⁸⁷Rb.
pub const PRESET_RB87_66S64S: &str = include_str!("../presets/rb87_66s64s.toml");

/// Names accepted by [`PairSystem::preset`].
pub const PRESET_NAMES: [&str; 2] = ["rb87_50s48s", "rb87_66s64s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orbital {
    S,
    P,
}

impl Orbital {
    fn l(self) -> i32 {
        match self {
            Orbital::S => 0,
            Orbital::P => 1,
        }
    }
}

/// A single-atom fine-structure Rydberg level `|n L_j, m_j⟩`.
///
/// Half-integer quantum numbers are stored doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LevelSpec", into = "LevelSpec")]
pub struct RydbergLevel {
    n: u32,
    orbital: Orbital,
    two_j: u8,
    two_mj: i8,
}

impl RydbergLevel {
    /// `j` and `m_j` are passed doubled: `RydbergLevel::new(50, Orbital::S, 1, 1)`
    /// is `50S_{1/2}, m_j = +1/2`.
    pub fn new(n: u32, orbital: Orbital, two_j: u8, two_mj: i8) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("principal quantum number must be >= 1".into()));
        }
        if two_j != 1 && two_j != 3 {
            return Err(Error::Domain(format!("j = {}/2 is not 1/2 or 3/2", two_j)));
        }
        if orbital == Orbital::S && two_j != 1 {
            return Err(Error::Domain("S levels have j = 1/2".into()));
        }
        if two_mj.unsigned_abs() > two_j || (two_mj as i32 - two_j as i32) % 2 != 0 {
            return Err(Error::Domain(format!(
                "m_j = {}/2 incompatible with j = {}/2",
                two_mj, two_j
            )));
        }
        Ok(RydbergLevel {
            n,
            orbital,
            two_j,
            two_mj,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn orbital(&self) -> Orbital {
        self.orbital
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn mj(&self) -> f64 {
        self.two_mj as f64 / 2.0
    }

    /// Landé g-factor of the fine-structure level (g_s = 2).
    pub fn lande_g(&self) -> f64 {
        let j = self.j();
        let l = self.orbital.l() as f64;
        let s = 0.5;
        1.0 + (j * (j + 1.0) + s * (s + 1.0) - l * (l + 1.0)) / (2.0 * j * (j + 1.0))
    }

    /// Checks the single-atom electric-dipole rules `Δl = ±1`, `|Δj| ≤ 1`,
    /// `|Δm_j| ≤ 1` for a transition from `self` to `other`.
    pub fn dipole_coupled_to(&self, other: &RydbergLevel) -> std::result::Result<(), String> {
        if (self.orbital.l() - other.orbital.l()).abs() != 1 {
            return Err(format!("Δl = 0 between {} and {}", self, other));
        }
        if (self.two_j as i32 - other.two_j as i32).abs() > 2 {
            return Err(format!("|Δj| > 1 between {} and {}", self, other));
        }
        if (self.two_mj as i32 - other.two_mj as i32).abs() > 2 {
            return Err(format!("|Δm_j| > 1 between {} and {}", self, other));
        }
        Ok(())
    }

    fn two_mj(&self) -> i32 {
        self.two_mj as i32
    }
}

impl fmt::Display for RydbergLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.two_mj >= 0 { "+" } else { "-" };
        write!(
            f,
            "{}{:?}{}/2(mj={}{}/2)",
            self.n,
            self.orbital,
            self.two_j,
            sign,
            self.two_mj.unsigned_abs()
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelSpec {
    n: u32,
    l: Orbital,
    j: f64,
    mj: f64,
}

fn doubled(x: f64, what: &str) -> std::result::Result<i32, String> {
    let d = 2.0 * x;
    if (d - d.round()).abs() > 1e-9 {
        return Err(format!("{what} = {x} is not a half-integer"));
    }
    Ok(d.round() as i32)
}

impl TryFrom<LevelSpec> for RydbergLevel {
    type Error = String;

    fn try_from(s: LevelSpec) -> std::result::Result<Self, String> {
        let two_j = doubled(s.j, "j")?;
        let two_mj = doubled(s.mj, "mj")?;
        if !(0..=3).contains(&two_j) || !(-3..=3).contains(&two_mj) {
            return Err(format!("j = {}, mj = {} out of range", s.j, s.mj));
        }
        RydbergLevel::new(s.n, s.l, two_j as u8, two_mj as i8).map_err(|e| e.to_string())
    }
}

impl From<RydbergLevel> for LevelSpec {
    fn from(l: RydbergLevel) -> Self {
        LevelSpec {
            n: l.n,
            l: l.orbital,
            j: l.j(),
            mj: l.mj(),
        }
    }
}

/// One dipole-coupled `|P(g), P(s)⟩` pair state with its Stark-tuned defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairChannel {
    pub gate: RydbergLevel,
    pub source: RydbergLevel,
    /// Defect at zero electric field, rad/µs.
    pub defect_zero_field: f64,
    /// Differential pair polarizability, rad/µs per (V/cm)².
    pub diff_polarizability: f64,
    /// Constant Zeeman offset of this `(m_j, m_j)` combination, rad/µs.
    #[serde(default)]
    pub zeeman_shift: f64,
    /// Gate–source dipolar coupling, rad/µs·µm³.
    pub c3: f64,
    /// Angular coupling weight multiplying `c3` for this geometry.
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl PairChannel {
    /// Effective coupling `c3 · weight`.
    pub fn coupling(&self) -> f64 {
        self.c3 * self.weight
    }

    pub fn label(&self) -> String {
        format!("|{}, {}⟩", self.gate, self.source)
    }
}

/// Förster defect `Δ_D(ε) = Δ_D(0) − k ε² + z` of one channel.
pub fn forster_defect(channel: &PairChannel, field: f64) -> f64 {
    channel.defect_zero_field - channel.diff_polarizability * field * field + channel.zeeman_shift
}

/// The pair system: the `|S(g), S(s)⟩` pair and its candidate channels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairConfig {
    pub gate_s: RydbergLevel,
    pub source_s: RydbergLevel,
    pub channels: Vec<PairChannel>,
    /// Angle between interatomic and quantization axes, radians.
    pub theta: f64,
    /// Magnetic field in gauss; only recorded, Zeeman offsets are tabulated.
    pub b_field: f64,
}

fn one_gauss() -> f64 {
    1.0
}

impl PairConfig {
    /// Checks S-state labels, channel dipole couplings and parameter signs.
    pub fn validate(&self) -> Result<()> {
        for s in [&self.gate_s, &self.source_s] {
            if s.orbital != Orbital::S {
                return Err(Error::Config(format!("pair state level {} is not an S level", s)));
            }
        }
        for ch in &self.channels {
            let label = ch.label();
            ch.gate
                .dipole_coupled_to(&self.gate_s)
                .and_then(|_| ch.source.dipole_coupled_to(&self.source_s))
                .map_err(|reason| Error::SelectionRule {
                    channel: label.clone(),
                    reason,
                })?;
            if !(ch.c3 >= 0.0 && ch.weight.is_finite()) {
                return Err(Error::Config(format!("{label}: c3 must be >= 0")));
            }
            if ![ch.defect_zero_field, ch.diff_polarizability, ch.zeeman_shift]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(Error::Config(format!("{label}: non-finite defect model")));
            }
        }
        Ok(())
    }

    /// `ΔM_J = Δm_j(g) + Δm_j(s)` of a channel relative to the S pair.
    pub fn delta_mj_total(&self, channel: &PairChannel) -> f64 {
        let dm = (channel.gate.two_mj() - self.gate_s.two_mj())
            + (channel.source.two_mj() - self.source_s.two_mj());
        dm as f64 / 2.0
    }
}

/// Channels contributing to the interaction for this configuration.
///
/// At `θ = 0` only channels conserving the total projection `M_J` survive;
/// for any other angle the configured list is returned unchanged, with the
/// angular dependence carried by each channel's `weight`.
pub fn channel_set(config: &PairConfig) -> Result<Vec<PairChannel>> {
    config.validate()?;
    if config.theta == 0.0 {
        Ok(config
            .channels
            .iter()
            .filter(|ch| config.delta_mj_total(ch) == 0.0)
            .cloned()
            .collect())
    } else {
        Ok(config.channels.clone())
    }
}

/// A zero of one channel's defect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub field: f64,
    pub channel: usize,
}

/// Bisection tolerance used by [`resonance_fields`], V/cm.
pub const DEFAULT_ROOT_TOLERANCE: f64 = 1e-10;

/// All fields in `[0, field_max]` where an active channel is exactly resonant,
/// sorted ascending. Channel indices refer to [`channel_set`] order.
pub fn resonance_fields(config: &PairConfig, field_max: f64) -> Result<Vec<Resonance>> {
    resonance_fields_with_tolerance(config, field_max, DEFAULT_ROOT_TOLERANCE)
}

pub fn resonance_fields_with_tolerance(
    config: &PairConfig,
    field_max: f64,
    tolerance: f64,
) -> Result<Vec<Resonance>> {
    if !(field_max > 0.0) {
        return Err(Error::Domain(format!("field_max must be > 0, got {field_max}")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Domain("bisection tolerance must be > 0".into()));
    }
    const BRACKETS: usize = 4096;
    let channels = channel_set(config)?;
    let mut roots = Vec::new();
    for (index, ch) in channels.iter().enumerate() {
        let f = |e: f64| forster_defect(ch, e);
        let step = field_max / BRACKETS as f64;
        let mut lo = 0.0;
        let mut f_lo = f(lo);
        if f_lo == 0.0 {
            roots.push(Resonance { field: 0.0, channel: index });
        }
        for k in 1..=BRACKETS {
            let hi = if k == BRACKETS { field_max } else { k as f64 * step };
            let f_hi = f(hi);
            if f_hi == 0.0 {
                roots.push(Resonance { field: hi, channel: index });
            } else if f_lo * f_hi < 0.0 {
                roots.push(Resonance {
                    field: bisect(&f, lo, hi, tolerance),
                    channel: index,
                });
            }
            lo = hi;
            f_lo = f_hi;
        }
    }
    roots.sort_by(|a, b| a.field.total_cmp(&b.field).then(a.channel.cmp(&b.channel)));
    roots.dedup_by(|a, b| a.channel == b.channel && (a.field - b.field).abs() <= tolerance);
    Ok(roots)
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, tolerance: f64) -> f64 {
    let mut f_lo = f(lo);
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    0.5 * (lo + hi)
}

/// Interaction constants shipped alongside a pair system's channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConstants {
    /// Hopping coupling C3′ of the reversed `|P, P⟩` ordering, rad/µs·µm³.
    pub c3_prime: f64,
    /// Decoherence rate of the source P state, rad/µs.
    pub gamma_p: f64,
    /// Zero-field van der Waals coefficient, rad/µs·µm⁶.
    pub c6_reference: f64,
}

/// A pair system as stored in a channel data file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSystem {
    pub name: String,
    /// Field at which the system's primary resonance is calibrated, V/cm.
    pub reference_resonance: Option<f64>,
    pub constants: PairConstants,
    pub pair: PairConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairSystemFile {
    name: String,
    #[serde(default)]
    reference_resonance: Option<f64>,
    gate_s: RydbergLevel,
    source_s: RydbergLevel,
    #[serde(default)]
    theta: f64,
    #[serde(default = "one_gauss")]
    b_field: f64,
    constants: PairConstants,
    channel: Vec<PairChannel>,
}

impl PairSystem {
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "rb87_50s48s" => PRESET_RB87_50S48S,
            "rb87_66s64s" => PRESET_RB87_66S64S,
            other => {
                return Err(Error::Config(format!(
                    "unknown pair-system preset `{other}` (expected one of {:?})",
                    PRESET_NAMES
                )))
            }
        };
        Self::from_toml(text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: PairSystemFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let system = PairSystem {
            name: file.name,
            reference_resonance: file.reference_resonance,
            constants: file.constants,
            pair: PairConfig {
                gate_s: file.gate_s,
                source_s: file.source_s,
                channels: file.channel,
                theta: file.theta,
                b_field: file.b_field,
            },
        };
        system.pair.validate()?;
        let c = &system.constants;
        if !(c.c3_prime >= 0.0 && c.gamma_p >= 0.0 && c.c6_reference >= 0.0) {
            return Err(Error::Config("c3_prime, gamma_p, c6_reference must be >= 0".into()));
        }
        Ok(system)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(n: u32, orbital: Orbital, two_j: u8, two_mj: i8) -> RydbergLevel {
        RydbergLevel::new(n, orbital, two_j, two_mj).unwrap()
    }

    fn toy_channel(d0: f64, k: f64, z: f64) -> PairChannel {
        PairChannel {
            gate: level(49, Orbital::P, 1, 1),
            source: level(48, Orbital::P, 1, 1),
            defect_zero_field: d0,
            diff_polarizability: k,
            zeeman_shift: z,
            c3: 1.0,
            weight: 1.0,
        }
    }

    fn toy_config(channels: Vec<PairChannel>) -> PairConfig {
        PairConfig {
            gate_s: level(50, Orbital::S, 1, 1),
            source_s: level(48, Orbital::S, 1, 1),
            channels,
            theta: 0.0,
            b_field: 1.0,
        }
    }

    #[test]
    fn level_invariants() {
        assert!(RydbergLevel::new(50, Orbital::S, 3, 1).is_err());
        assert!(RydbergLevel::new(50, Orbital::P, 1, 3).is_err());
        assert!(RydbergLevel::new(50, Orbital::P, 3, 2).is_err());
        assert!(RydbergLevel::new(0, Orbital::S, 1, 1).is_err());
        let p = level(64, Orbital::P, 3, -3);
        assert_eq!(p.mj(), -1.5);
        assert!((level(1, Orbital::S, 1, 1).lande_g() - 2.0).abs() < 1e-12);
        assert!((level(1, Orbital::P, 1, 1).lande_g() - 2.0 / 3.0).abs() < 1e-12);
        assert!((level(1, Orbital::P, 3, 1).lande_g() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn defect_examples() {
        let ch = toy_channel(100.0, 4.0, 0.0);
        assert_eq!(forster_defect(&ch, 5.0), 0.0);
        let ch = toy_channel(12.5, 3.0, -0.7);
        assert_eq!(forster_defect(&ch, 0.0), 12.5 - 0.7);
        assert_eq!(forster_defect(&ch, 0.3), forster_defect(&ch, -0.3));
    }

    #[test]
    fn roots_of_toy_channels() {
        let cfg = toy_config(vec![toy_channel(100.0, 4.0, 0.0), toy_channel(9.0, 4.0, 0.0)]);
        let roots = resonance_fields(&cfg, 10.0).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0].field - 1.5).abs() < 1e-9 && roots[0].channel == 1);
        assert!((roots[1].field - 5.0).abs() < 1e-9 && roots[1].channel == 0);
    }

    #[test]
    fn no_roots_when_defect_never_crosses() {
        let cfg = toy_config(vec![toy_channel(-3.0, 2.0, 0.0), toy_channel(-0.1, 50.0, 0.0)]);
        assert!(resonance_fields(&cfg, 5.0).unwrap().is_empty());
        assert!(resonance_fields(&cfg, 0.0).is_err());
    }

    #[test]
    fn theta_zero_filters_mj_changing_channels() {
        let mut ch = toy_channel(1.0, 1.0, 0.0);
        ch.gate = level(49, Orbital::P, 1, -1);
        let mut cfg = toy_config(vec![toy_channel(1.0, 1.0, 0.0), ch]);
        assert_eq!(channel_set(&cfg).unwrap().len(), 1);
        cfg.theta = 0.3;
        assert_eq!(channel_set(&cfg).unwrap().len(), 2);
    }

    #[test]
    fn rejects_delta_l_zero_channel() {
        let mut ch = toy_channel(1.0, 1.0, 0.0);
        ch.gate = level(50, Orbital::S, 1, 1);
        let cfg = toy_config(vec![ch]);
        assert!(matches!(channel_set(&cfg), Err(Error::SelectionRule { .. })));
    }

    #[test]
    fn presets_load() {
        for name in PRESET_NAMES {
            let sys = PairSystem::preset(name).unwrap();
            assert!(!sys.pair.channels.is_empty());
        }
        assert!(PairSystem::preset("cs_60s").is_err());
    }

    #[test]
    fn preset_50s48s_resonance() {
        let sys = PairSystem::preset("rb87_50s48s").unwrap();
        let active = channel_set(&sys.pair).unwrap();
        assert_eq!(active.len(), 1);
        assert_eq!(active[0].gate.to_string(), "49P1/2(mj=+1/2)");
        assert_eq!(active[0].source.to_string(), "48P1/2(mj=+1/2)");
        let roots = resonance_fields(&sys.pair, 1.0).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].field - 0.710).abs() < 1e-4);
        assert!(forster_defect(&active[0], roots[0].field).abs() < 1e-6);
    }

    #[test]
    fn preset_66s64s_four_resonances() {
        let sys = PairSystem::preset("rb87_66s64s").unwrap();
        let active = channel_set(&sys.pair).unwrap();
        assert_eq!(active.len(), 4);
        for ch in &active {
            assert_eq!(sys.pair.delta_mj_total(ch), 0.0);
        }
        let roots = resonance_fields(&sys.pair, 0.25).unwrap();
        assert_eq!(roots.len(), 4);
        assert!(roots.windows(2).all(|w| w[0].field < w[1].field));
    }

    #[test]
    fn zeeman_offsets_match_lande_factors() {
        // μ_B·B at 1 G is 2π·1.39962 MHz.
        let mu_b = std::f64::consts::TAU * 1.399_624_5;
        for name in PRESET_NAMES {
            let sys = PairSystem::preset(name).unwrap();
            let ss = sys.pair.gate_s.lande_g() * sys.pair.gate_s.mj()
                + sys.pair.source_s.lande_g() * sys.pair.source_s.mj();
            for ch in channel_set(&sys.pair).unwrap() {
                let pp = ch.gate.lande_g() * ch.gate.mj() + ch.source.lande_g() * ch.source.mj();
                let expected = (pp - ss) * mu_b * sys.pair.b_field;
                assert!(
                    (ch.zeeman_shift - expected).abs() < 1e-3,
                    "{}: {} vs {}",
                    ch.label(),
                    ch.zeeman_shift,
                    expected
                );
            }
        }
    }
}
