//! From single-polariton transmission to pulse-level observables: geometric
//! averaging over beam and stored spin-wave, optical gain, field scans with
//! finite field resolution and the non-destructive rate window.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::interaction::{GateCoupling, InteractionParams};
use crate::propagation::{eit_baseline, transmission_freq, DensityProfile, PropagationParams, StoredGate, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Cloud and beam geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentGeometry {
    /// Source and gate beam waist w0 (1/e² intensity radius), µm.
    pub beam_waist: f64,
    /// Longitudinal 1/e half-length of the atomic density, µm.
    pub cloud_half_length: f64,
    /// Transverse 1/e radius of the atomic density, µm.
    pub cloud_radius: f64,
    pub atom_number: f64,
    pub gate_distribution: GateDistribution,
}

impl Default for ExperimentGeometry {
    fn default() -> Self {
        ExperimentGeometry {
            beam_waist: 6.2,
            cloud_half_length: 40.0,
            cloud_radius: 10.0,
            atom_number: 2e4,
            gate_distribution: GateDistribution::DensityTimesBeam,
        }
    }
}

/// Where the stored gate excitation sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateDistribution {
    /// Atomic density times gate-beam intensity.
    DensityTimesBeam,
    /// Fixed position, µm.
    Pinned([f64; 3]),
}

impl ExperimentGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beam_waist", self.beam_waist),
            ("cloud_half_length", self.cloud_half_length),
            ("cloud_radius", self.cloud_radius),
            ("atom_number", self.atom_number),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Peak atomic density of the Gaussian cloud, µm⁻³.
    pub fn peak_density(&self) -> f64 {
        self.atom_number / (std::f64::consts::PI.powf(1.5) * self.cloud_half_length * self.cloud_radius.powi(2))
    }

    pub fn profile(&self) -> DensityProfile {
        DensityProfile::gaussian(self.cloud_half_length)
    }

    /// Source medium for this cloud with resonant absorption cross-section
    /// `cross_section` (µm²); `g0² = σ c γ / 2`.
    pub fn source_medium(&self, optics: &SourceOptics) -> Result<PropagationParams> {
        self.validate()?;
        let profile = self.profile();
        let od = optics.cross_section * self.peak_density() * profile.effective_length();
        let mut p = PropagationParams::from_optical_depth(od, optics.omega_rabi, optics.gamma, optics.gamma_s, profile);
        p.omega = optics.omega;
        p.cloud_radius = Some(self.cloud_radius);
        p.c = SPEED_OF_LIGHT;
        p.validate()?;
        Ok(p)
    }

    /// Draws source offsets and gate positions. Each gate position is paired
    /// with `sources_per_gate` source paths.
    pub fn draw_samples(&self, gates: usize, sources_per_gate: usize, seed: u64) -> Result<EnsembleSamples> {
        self.validate()?;
        if gates == 0 || sources_per_gate == 0 {
            return Err(Error::Config("sample counts must be > 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = Normal::new(0.0, 0.5 * self.beam_waist).map_err(|e| Error::Numerical(e.to_string()))?;
        let sigma_t = (0.5 / (1.0 / self.cloud_radius.powi(2) + 2.0 / self.beam_waist.powi(2))).sqrt();
        let transverse = Normal::new(0.0, sigma_t).map_err(|e| Error::Numerical(e.to_string()))?;
        let axial = Normal::new(0.0, self.cloud_half_length / 2f64.sqrt()).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut gate_positions = Vec::with_capacity(gates);
        let mut offsets = Vec::with_capacity(gates * sources_per_gate);
        for _ in 0..gates {
            let pos = match self.gate_distribution {
                GateDistribution::DensityTimesBeam => [
                    transverse.sample(&mut rng),
                    transverse.sample(&mut rng),
                    axial.sample(&mut rng),
                ],
                GateDistribution::Pinned(p) => p,
            };
            gate_positions.push(pos);
            for _ in 0..sources_per_gate {
                offsets.push([source.sample(&mut rng), source.sample(&mut rng)]);
            }
        }
        Ok(EnsembleSamples {
            gate_positions,
            offsets,
            sources_per_gate,
        })
    }
}

/// Source EIT parameters that are not fixed by the cloud geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceOptics {
    /// Resonant absorption cross-section, µm².
    pub cross_section: f64,
    pub omega_rabi: f64,
    pub gamma: f64,
    pub gamma_s: f64,
    pub omega: f64,
}

impl Default for SourceOptics {
    /// Calibrated against the zero-field and on-resonance transmissions of
    /// the 50S/48S preset; see the project notes.
    fn default() -> Self {
        SourceOptics {
            cross_section: 0.29,
            // 2π × 4 MHz
            omega_rabi: 25.1,
            // half the D2 linewidth
            gamma: 19.04,
            gamma_s: 0.63,
            omega: 0.0,
        }
    }
}

/// Fixed sample set shared by every field point of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSamples {
    pub gate_positions: Vec<[f64; 3]>,
    /// Source paths; entries `i·k .. (i+1)·k` belong to gate `i`.
    pub offsets: Vec<[f64; 2]>,
    pub sources_per_gate: usize,
}

impl EnsembleSamples {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Beam-averaged transmissions with and without a stored gate excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionAverage {
    pub t0: f64,
    pub t1: f64,
    pub t0_error: f64,
    pub t1_error: f64,
    /// Standard error of the paired difference `T0 − T1`.
    pub difference_error: f64,
    /// Mean `T0` and `T1` for each gate position.
    pub per_gate: Vec<(f64, f64)>,
    pub samples: usize,
}

fn mean_and_error(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Averages transmission over a fixed sample set for one gate coupling.
pub fn average_over_samples(
    samples: &EnsembleSamples,
    params: &PropagationParams,
    coupling: &GateCoupling,
) -> Result<TransmissionAverage> {
    if samples.is_empty() {
        return Err(Error::Config("empty sample set".into()));
    }
    // The gate-free exponent scales with the transverse density factor.
    let base = -0.5 * eit_baseline(params)?.intensity.ln();
    let t0_at = |b: [f64; 2]| (-2.0 * base * params.transverse_density(b)).exp();
    let k = samples.sources_per_gate;
    let pairs: Vec<(f64, f64)> = samples
        .offsets
        .par_iter()
        .enumerate()
        .map(|(idx, &b)| {
            let gate = StoredGate {
                position: samples.gate_positions[idx / k],
                coupling: coupling.clone(),
            };
            let t1 = transmission_freq(b, Some(&gate), params)?.intensity;
            Ok((t0_at(b), t1))
        })
        .collect::<Result<_>>()?;
    let (t0, t0_error) = mean_and_error(pairs.iter().map(|p| p.0));
    let (t1, t1_error) = mean_and_error(pairs.iter().map(|p| p.1));
    let (_, difference_error) = mean_and_error(pairs.iter().map(|p| p.0 - p.1));
    let per_gate = pairs
        .chunks(k)
        .map(|c| {
            let n = c.len() as f64;
            (c.iter().map(|p| p.0).sum::<f64>() / n, c.iter().map(|p| p.1).sum::<f64>() / n)
        })
        .collect();
    Ok(TransmissionAverage {
        t0,
        t1,
        t0_error,
        t1_error,
        difference_error,
        per_gate,
        samples: pairs.len(),
    })
}

/// Monte Carlo settings for [`average_transmission`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingOptions {
    pub samples: usize,
    pub sources_per_gate: usize,
    pub seed: u64,
    /// Keep doubling the sample count until the standard error of `T1`
    /// drops below this value.
    pub target_error: Option<f64>,
    pub max_samples: usize,
}

impl Default for AveragingOptions {
    fn default() -> Self {
        AveragingOptions {
            samples: 2000,
            sources_per_gate: 1,
            seed: 0,
            target_error: None,
            max_samples: 64_000,
        }
    }
}

/// Smallest sample count accepted by [`average_transmission`].
pub const MIN_SAMPLES: usize = 2000;

/// Result of [`average_transmission`] plus whether the error target was met.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageOutcome {
    pub average: TransmissionAverage,
    pub converged: bool,
}

/// Averages over the source beam and the gate distribution at `field`.
pub fn average_transmission(
    geometry: &ExperimentGeometry,
    params: &PropagationParams,
    interaction: &InteractionParams,
    field: f64,
    options: &AveragingOptions,
) -> Result<AverageOutcome> {
    if options.samples < MIN_SAMPLES {
        return Err(Error::Config(format!(
            "at least {MIN_SAMPLES} samples required, got {}",
            options.samples
        )));
    }
    let coupling = interaction.coupling_at(field);
    let mut gates = options.samples.div_ceil(options.sources_per_gate);
    loop {
        let samples = geometry.draw_samples(gates, options.sources_per_gate, options.seed)?;
        let average = average_over_samples(&samples, params, &coupling)?;
        let Some(target) = options.target_error else {
            return Ok(AverageOutcome { average, converged: true });
        };
        if average.t1_error <= target {
            return Ok(AverageOutcome { average, converged: true });
        }
        if average.samples * 2 > options.max_samples {
            log::warn!(
                "standard error {:.3e} above target {:.3e} after {} samples",
                average.t1_error,
                target,
                average.samples
            );
            return Ok(AverageOutcome { average, converged: false });
        }
        gates *= 2;
    }
}

/// Photon budget of one transistor shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotonStats {
    /// Mean incident gate photon number.
    pub gate_mean_in: f64,
    /// Incident source photon rate, µs⁻¹.
    pub source_rate: f64,
    /// Source pulse duration, µs.
    pub pulse_length: f64,
    pub storage_efficiency: f64,
    pub detector_efficiency: f64,
    /// Probability that a scattered source photon leaves a stationary
    /// Rydberg excitation behind.
    pub dephasing_per_photon: f64,
    /// Rate returned by [`nondestructive_limit`] when nothing accumulates, µs⁻¹.
    pub rate_ceiling: f64,
}

impl Default for PhotonStats {
    fn default() -> Self {
        PhotonStats {
            gate_mean_in: 1.0,
            source_rate: 35.0,
            // fitted so that G = 200 at 35 µs⁻¹ on resonance
            pulse_length: 21.25,
            storage_efficiency: 0.6,
            detector_efficiency: 0.3,
            // fitted so that the non-destructive window ends near 36 µs⁻¹
            dephasing_per_photon: 6.4e-4,
            rate_ceiling: 1000.0,
        }
    }
}

impl PhotonStats {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("storage_efficiency", self.storage_efficiency),
            ("detector_efficiency", self.detector_efficiency),
            ("dephasing_per_photon", self.dephasing_per_photon),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("gate_mean_in", self.gate_mean_in),
            ("source_rate", self.source_rate),
            ("pulse_length", self.pulse_length),
            ("rate_ceiling", self.rate_ceiling),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Probability that at least one gate excitation is stored.
    pub fn storage_probability(&self) -> f64 {
        1.0 - (-self.storage_efficiency * self.gate_mean_in).exp()
    }

    /// Mean incident source photons per pulse.
    pub fn source_photons(&self) -> f64 {
        self.source_rate * self.pulse_length
    }

    /// Pulse-averaged transmission factor from stationary excitations that
    /// build up linearly during the pulse, `(1 − e^{-x})/x`.
    pub fn accumulation_factor(&self, t0: f64, t1: f64) -> f64 {
        let x = self.final_blockade_exponent(t0, t1, self.source_rate);
        if x < 1e-12 {
            1.0
        } else {
            -(-x).exp_m1() / x
        }
    }

    fn final_blockade_exponent(&self, t0: f64, t1: f64, rate: f64) -> f64 {
        let accumulated = self.dephasing_per_photon * rate * self.pulse_length * (1.0 - t0);
        accumulated * blockade_fraction(t0, t1)
    }
}

fn blockade_fraction(t0: f64, t1: f64) -> f64 {
    if t0 > 0.0 {
        (1.0 - t1 / t0).max(0.0)
    } else {
        0.0
    }
}

/// Mean transmitted source photons without and with the gate pulse.
pub fn transmitted_counts(t0: f64, t1: f64, stats: &PhotonStats) -> (f64, f64) {
    let scale = stats.source_photons() * stats.accumulation_factor(t0, t1);
    let p = stats.storage_probability();
    let without = scale * t0;
    let with = scale * ((1.0 - p) * t0 + p * t1);
    (without, with)
}

/// Source photons removed per incident gate photon.
pub fn gain_from_counts(without_gate: f64, with_gate: f64, gate_mean_in: f64) -> Result<f64> {
    if !(gate_mean_in > 0.0) {
        return Err(Error::Domain(format!("gate_mean_in must be > 0, got {gate_mean_in}")));
    }
    Ok((without_gate - with_gate) / gate_mean_in)
}

/// Optical gain for beam-averaged transmissions `t0 ≥ t1`.
pub fn optical_gain(t0: f64, t1: f64, stats: &PhotonStats) -> Result<f64> {
    stats.validate()?;
    if t1 > t0 + 1e-12 {
        return Err(Error::Domain(format!("T1 = {t1} exceeds T0 = {t0}")));
    }
    let (without, with) = transmitted_counts(t0, t1, stats);
    gain_from_counts(without, with, stats.gate_mean_in)
}

/// Finite electric-field resolution: boxcar of half-width `half_width`
/// (V/cm) sampled at `nodes` Gauss–Legendre points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldResolution {
    pub half_width: f64,
    pub nodes: usize,
}

impl Default for FieldResolution {
    fn default() -> Self {
        FieldResolution {
            half_width: 0.002,
            nodes: 4,
        }
    }
}

impl FieldResolution {
    /// Field offsets and weights (summing to one).
    pub fn stencil(&self) -> Vec<(f64, f64)> {
        if self.half_width == 0.0 || self.nodes <= 1 {
            return vec![(0.0, 1.0)];
        }
        gauss_legendre(self.nodes)
            .into_iter()
            .map(|(x, w)| (x * self.half_width, 0.5 * w))
            .collect()
    }

    /// Boxcar average of `f` around `field`.
    pub fn smooth<F: FnMut(f64) -> f64>(&self, field: f64, mut f: F) -> f64 {
        self.stencil().into_iter().map(|(dx, w)| w * f(field + dx)).sum()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// One row of a gain scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub field: f64,
    pub gain: f64,
    pub gain_error: f64,
    pub t0: f64,
    pub t1: f64,
}

/// Gain versus applied field, smoothed by the field resolution. The same
/// sample set is used at every field so neighbouring points share noise.
pub fn field_scan(
    samples: &EnsembleSamples,
    params: &PropagationParams,
    interaction: &InteractionParams,
    fields: &[f64],
    stats: &PhotonStats,
    resolution: &FieldResolution,
) -> Result<Vec<GainPoint>> {
    if fields.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("field grid must be sorted".into()));
    }
    stats.validate()?;
    let stencil = resolution.stencil();
    fields
        .iter()
        .map(|&field| {
            let mut t0 = 0.0;
            let mut t1 = 0.0;
            let mut diff_err = 0.0;
            for &(dx, w) in &stencil {
                let avg = average_over_samples(samples, params, &interaction.coupling_at(field + dx))?;
                t0 += w * avg.t0;
                t1 += w * avg.t1;
                diff_err += w * avg.difference_error;
            }
            let gain = optical_gain(t0, t1.min(t0), stats)?;
            let per_unit = if t0 > t1 { gain / (t0 - t1) } else { 0.0 };
            Ok(GainPoint {
                field,
                gain,
                gain_error: per_unit.abs() * diff_err,
                t0,
                t1,
            })
        })
        .collect()
}

/// Largest source rate whose accumulated stationary excitations reduce the
/// end-of-pulse transmission by less than `max_drop` (0.1 by default use).
pub fn nondestructive_limit(t0: f64, t1: f64, stats: &PhotonStats, max_drop: f64) -> Result<f64> {
    stats.validate()?;
    if !(max_drop > 0.0 && max_drop < 1.0) {
        return Err(Error::Config(format!("max_drop must be in (0, 1), got {max_drop}")));
    }
    let per_rate = stats.final_blockade_exponent(t0, t1, 1.0);
    if per_rate <= 0.0 {
        return Ok(stats.rate_ceiling);
    }
    let limit = -(1.0 - max_drop).ln() / per_rate;
    Ok(limit.min(stats.rate_ceiling))
}

/// End-of-pulse relative transmission drop at `rate`.
pub fn end_of_pulse_drop(t0: f64, t1: f64, stats: &PhotonStats, rate: f64) -> f64 {
    -(-stats.final_blockade_exponent(t0, t1, rate)).exp_m1()
}

/// Complex transmission amplitude averaged over source paths for a fixed
/// gate position (used by the spin-wave model).
pub fn mean_amplitude(
    offsets: &[[f64; 2]],
    gate: &StoredGate,
    params: &PropagationParams,
) -> Result<Complex64> {
    let values: Vec<Complex64> = offsets
        .par_iter()
        .map(|&b| Ok(transmission_freq(b, Some(gate), params)?.amplitude))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<Complex64>() / values.len() as f64)
}
