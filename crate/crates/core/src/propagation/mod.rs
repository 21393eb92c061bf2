//! Single source-polariton transport through the cloud, with or without a
//! stored gate excitation.
//!
//! The steady-state field along a line parallel to the beam axis obeys
//! `∂_z E = (i/c) χ(z) E`, so the transmitted amplitude is
//! `exp((i/c) ∫ χ dz)`. The local susceptibility is
//!
//! ```text
//! χ(z) = n(z) g² [ (ω + iγ_s)/Ω² + V/(Ω² − iγV) ]
//! ```
//!
//! with `V = A/|r − r_j|⁶` the effective gate potential. Positive `Im χ`
//! absorbs. [`time_domain`] integrates the underlying four-field equations
//! directly and serves as an independent check.

pub mod time_domain;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::interaction::GateCoupling;
use crate::quadrature::{integrate, QuadratureOptions};
use crate::{Error, Result};

/// Vacuum speed of light in µm/µs.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Minimum gate–source distance used when evaluating the potential, µm.
pub const DEFAULT_MIN_DISTANCE: f64 = 0.5;

/// Longitudinal density shape `n(z)/n_peak`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DensityProfile {
    /// Flat slab on `[-half_length, half_length]`.
    Uniform { half_length: f64 },
    /// `exp(-z²/half_length²)` truncated at `±cutoff`.
    Gaussian { half_length: f64, cutoff: f64 },
}

impl DensityProfile {
    /// Gaussian profile with its 1/e half-length, truncated at four half-lengths.
    pub fn gaussian(half_length: f64) -> Self {
        DensityProfile::Gaussian {
            half_length,
            cutoff: 4.0 * half_length,
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        match *self {
            DensityProfile::Uniform { half_length } => {
                if z.abs() <= half_length {
                    1.0
                } else {
                    0.0
                }
            }
            DensityProfile::Gaussian { half_length, cutoff } => {
                if z.abs() <= cutoff {
                    (-(z / half_length).powi(2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Support `[z_min, z_max]`.
    pub fn extent(&self) -> (f64, f64) {
        match *self {
            DensityProfile::Uniform { half_length } => (-half_length, half_length),
            DensityProfile::Gaussian { cutoff, .. } => (-cutoff, cutoff),
        }
    }

    /// `∫ n(z)/n_peak dz` over the support.
    pub fn effective_length(&self) -> f64 {
        match *self {
            DensityProfile::Uniform { half_length } => 2.0 * half_length,
            DensityProfile::Gaussian { half_length, cutoff } => {
                std::f64::consts::PI.sqrt() * half_length * statrs::function::erf::erf(cutoff / half_length)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DensityProfile::Uniform { half_length } => half_length > 0.0,
            DensityProfile::Gaussian { half_length, cutoff } => half_length > 0.0 && cutoff > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid density profile {self:?}")))
        }
    }
}

/// Parameters of the source EIT medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// Peak collective coupling `g0 √n_peak`, rad/µs (with `c` in µm/µs,
    /// `g²/c` is an inverse length times a rate).
    pub g: f64,
    /// Half control Rabi frequency Ω, rad/µs.
    pub omega_rabi: f64,
    /// Half decay rate γ of the intermediate state, rad/µs.
    pub gamma: f64,
    /// Decoherence rate of the source Rydberg state, rad/µs.
    pub gamma_s: f64,
    /// Source detuning ω, rad/µs.
    pub omega: f64,
    /// Speed of light, µm/µs.
    pub c: f64,
    pub profile: DensityProfile,
    /// Transverse 1/e radius of the cloud density; `None` means transversely flat.
    pub cloud_radius: Option<f64>,
    /// Gate–source distance clamp, µm.
    pub min_distance: f64,
    /// Tolerances on the dimensionless exponent `∫χ dz / c`.
    pub quadrature: QuadratureOptions,
}

impl PropagationParams {
    /// Medium with the given peak on-axis resonant optical depth
    /// `OD = 2 g² L_eff / (c γ)`.
    pub fn from_optical_depth(
        optical_depth: f64,
        omega_rabi: f64,
        gamma: f64,
        gamma_s: f64,
        profile: DensityProfile,
    ) -> Self {
        let c = SPEED_OF_LIGHT;
        let g = (optical_depth * c * gamma / (2.0 * profile.effective_length())).sqrt();
        PropagationParams {
            g,
            omega_rabi,
            gamma,
            gamma_s,
            omega: 0.0,
            c,
            profile,
            cloud_radius: None,
            min_distance: DEFAULT_MIN_DISTANCE,
            quadrature: QuadratureOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0 && self.omega_rabi > 0.0 && self.gamma > 0.0) {
            return Err(Error::Config(format!(
                "g, omega_rabi, gamma must be > 0 (got {}, {}, {})",
                self.g, self.omega_rabi, self.gamma
            )));
        }
        self.validate_loose()
    }

    /// Checks that allow a vanishing coupling or control field.
    fn validate_loose(&self) -> Result<()> {
        if !(self.g >= 0.0 && self.omega_rabi >= 0.0 && self.gamma > 0.0) {
            return Err(Error::Config("g, omega_rabi must be >= 0 and gamma > 0".into()));
        }
        if !(self.gamma_s >= 0.0) {
            return Err(Error::Config(format!("gamma_s must be >= 0, got {}", self.gamma_s)));
        }
        if !(self.c > 0.0 && self.min_distance > 0.0 && self.omega.is_finite()) {
            return Err(Error::Config("c and min_distance must be > 0".into()));
        }
        if let Some(r) = self.cloud_radius {
            if !(r > 0.0) {
                return Err(Error::Config("cloud_radius must be > 0".into()));
            }
        }
        self.profile.validate()
    }

    /// On-axis resonant two-level optical depth `2 g² L_eff / (c γ)`.
    pub fn optical_depth(&self) -> f64 {
        2.0 * self.g * self.g * self.profile.effective_length() / (self.c * self.gamma)
    }

    /// Same medium with a different speed of light; `g²/c` and therefore
    /// every steady-state transmission is unchanged.
    pub fn with_light_speed(&self, c: f64) -> Self {
        let mut p = self.clone();
        p.g = self.g * (c / self.c).sqrt();
        p.c = c;
        p
    }

    /// Relative density at a transverse offset.
    pub fn transverse_density(&self, path_offset: [f64; 2]) -> f64 {
        match self.cloud_radius {
            Some(r) => (-(path_offset[0].powi(2) + path_offset[1].powi(2)) / (r * r)).exp(),
            None => 1.0,
        }
    }

    /// Messages for parameters outside the regime `ω, γ_s, γ_p ≪ Ω, γ`
    /// (threshold one tenth of `min(Ω, γ)`).
    pub fn validity_warnings(&self, gamma_p: f64) -> Vec<String> {
        let scale = 0.1 * self.omega_rabi.min(self.gamma);
        [("omega", self.omega.abs()), ("gamma_s", self.gamma_s), ("gamma_p", gamma_p)]
            .iter()
            .filter(|(_, v)| *v > scale)
            .map(|(name, v)| {
                format!("{name} = {v:.4} exceeds 0.1·min(Ω, γ) = {scale:.4}; adiabatic elimination degrades")
            })
            .collect()
    }
}

/// A stored gate excitation pinned at `position` (x, y, z in µm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredGate {
    pub position: [f64; 3],
    pub coupling: GateCoupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionResult {
    pub amplitude: Complex64,
    pub intensity: f64,
    pub scatter_probability: f64,
    pub phase: f64,
}

impl TransmissionResult {
    /// Result for the dimensionless exponent `Φ = ∫χ dz / c`.
    pub fn from_exponent(exponent: Complex64) -> Self {
        let amplitude = (Complex64::i() * exponent).exp();
        let intensity = (-2.0 * exponent.im).exp();
        TransmissionResult {
            amplitude,
            intensity,
            scatter_probability: 1.0 - intensity,
            phase: exponent.re,
        }
    }

    pub(crate) fn from_amplitude(amplitude: Complex64) -> Self {
        let intensity = amplitude.norm_sqr();
        TransmissionResult {
            amplitude,
            intensity,
            scatter_probability: 1.0 - intensity,
            phase: amplitude.arg(),
        }
    }
}

/// Susceptibility kernel shared by the point evaluator and the quadrature.
pub(crate) struct Medium<'a> {
    params: &'a PropagationParams,
    line_density: f64,
    path_offset: [f64; 2],
    gate: Option<([f64; 3], Complex64)>,
    background: Complex64,
}

impl<'a> Medium<'a> {
    pub(crate) fn new(params: &'a PropagationParams, path_offset: [f64; 2], gate: Option<&StoredGate>) -> Self {
        let g2 = params.g * params.g;
        let omega2 = params.omega_rabi * params.omega_rabi;
        Medium {
            params,
            line_density: params.transverse_density(path_offset),
            path_offset,
            gate: gate
                .map(|s| (s.position, s.coupling.coefficient(params.omega)))
                .filter(|(_, a)| *a != Complex64::new(0.0, 0.0)),
            background: Complex64::new(params.omega, params.gamma_s) * (g2 / omega2),
        }
    }

    /// Squared transverse distance between the line and the gate.
    fn transverse_sq(&self, pos: &[f64; 3]) -> f64 {
        (self.path_offset[0] - pos[0]).powi(2) + (self.path_offset[1] - pos[1]).powi(2)
    }

    /// χ(z) with the gate distance clamped at `min_distance`.
    pub(crate) fn chi(&self, z: f64) -> Complex64 {
        let n = self.line_density * self.params.profile.value(z);
        if n == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut chi = self.background;
        if let Some((pos, coefficient)) = &self.gate {
            let r2 = (self.transverse_sq(pos) + (z - pos[2]).powi(2)).max(self.params.min_distance.powi(2));
            let inv_v = r2 * r2 * r2 / coefficient;
            let omega2 = self.params.omega_rabi * self.params.omega_rabi;
            let g2 = self.params.g * self.params.g;
            chi += g2 / (inv_v * omega2 - Complex64::new(0.0, self.params.gamma));
        }
        chi * n
    }

    /// Length scale where the interaction term switches from light shift to
    /// absorption, `(γ|A|/Ω²)^{1/6}`.
    fn interaction_scale(&self) -> Option<f64> {
        self.gate.as_ref().and_then(|(_, a)| {
            let s = (self.params.gamma * a.norm() / self.params.omega_rabi.powi(2)).powf(1.0 / 6.0);
            (s.is_finite() && s > 0.0).then_some(s)
        })
    }

    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let mut points = Vec::new();
        if let (Some((pos, _)), Some(scale)) = (&self.gate, self.interaction_scale()) {
            let zj = pos[2];
            points.push(zj);
            let b = self.transverse_sq(pos).sqrt();
            for f in [0.5, 1.0, 2.0, 4.0] {
                let s = f * scale;
                if s > b {
                    let dz = (s * s - b * b).sqrt();
                    points.push(zj - dz);
                    points.push(zj + dz);
                }
            }
        }
        points
    }

    /// `∫ χ dz / c` over `[from, to]`.
    pub(crate) fn exponent(&self, from: f64, to: f64) -> Result<Complex64> {
        let inv_c = 1.0 / self.params.c;
        let r = integrate(
            |z| self.chi(z) * inv_c,
            from,
            to,
            &self.breakpoints(),
            &self.params.quadrature,
        )?;
        Ok(r.value)
    }
}

/// Local susceptibility at `z` on the line through `path_offset`, rad/µs.
///
/// The density factor includes the transverse profile. Evaluation exactly at
/// the gate is an error; closer than `min_distance` the potential is clamped.
pub fn susceptibility(
    z: f64,
    path_offset: [f64; 2],
    gate: Option<&StoredGate>,
    params: &PropagationParams,
) -> Result<Complex64> {
    params.validate()?;
    if let Some(s) = gate {
        if s.position == [path_offset[0], path_offset[1], z] {
            return Err(Error::Singular(z));
        }
    }
    Ok(Medium::new(params, path_offset, gate).chi(z))
}

/// Steady-state transmission of a source photon travelling along the line at
/// transverse `path_offset` through the whole cloud.
pub fn transmission_freq(
    path_offset: [f64; 2],
    gate: Option<&StoredGate>,
    params: &PropagationParams,
) -> Result<TransmissionResult> {
    let (lo, hi) = params.profile.extent();
    transmission_segment(path_offset, gate, params, lo, hi)
}

/// Transmission through the part of the line between `from` and `to`.
pub fn transmission_segment(
    path_offset: [f64; 2],
    gate: Option<&StoredGate>,
    params: &PropagationParams,
    from: f64,
    to: f64,
) -> Result<TransmissionResult> {
    params.validate()?;
    let exponent = Medium::new(params, path_offset, gate).exponent(from, to)?;
    Ok(TransmissionResult::from_exponent(exponent))
}

/// On-axis transmission without a gate excitation.
pub fn eit_baseline(params: &PropagationParams) -> Result<TransmissionResult> {
    transmission_freq([0.0, 0.0], None, params)
}

/// Cumulative exponent `∫_{z_min}^{z_k} χ dz / c` at each of the sorted
/// `points` (all inside the profile support).
pub fn cumulative_exponent(
    path_offset: [f64; 2],
    gate: Option<&StoredGate>,
    params: &PropagationParams,
    points: &[f64],
) -> Result<Vec<Complex64>> {
    params.validate()?;
    let medium = Medium::new(params, path_offset, gate);
    let (lo, _) = params.profile.extent();
    let mut out = Vec::with_capacity(points.len());
    let mut acc = Complex64::new(0.0, 0.0);
    let mut last = lo;
    for &p in points {
        if p < last {
            return Err(Error::Domain("cumulative_exponent needs sorted points".into()));
        }
        acc += medium.exponent(last, p)?;
        out.push(acc);
        last = p;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::ResolvedChannel;

    fn base() -> PropagationParams {
        let mut p = PropagationParams::from_optical_depth(
            8.0,
            20.0,
            19.0,
            0.2,
            DensityProfile::Uniform { half_length: 30.0 },
        );
        p.quadrature.rel_tol = 1e-10;
        p
    }

    fn vdw_gate(z: f64, c6: f64) -> StoredGate {
        StoredGate {
            position: [0.0, 0.0, z],
            coupling: GateCoupling::VanDerWaals { c6 },
        }
    }

    #[test]
    fn perfect_eit_has_zero_susceptibility() {
        let mut p = base();
        p.gamma_s = 0.0;
        let chi = susceptibility(3.0, [0.0, 0.0], None, &p).unwrap();
        assert_eq!(chi, Complex64::new(0.0, 0.0));
        assert_eq!(eit_baseline(&p).unwrap().intensity, 1.0);
    }

    #[test]
    fn susceptibility_limits() {
        let mut p = base();
        p.gamma_s = 0.0;
        let g2 = p.g * p.g;
        // Huge potential: two-level absorption i g²/γ.
        let chi = susceptibility(0.9, [0.0, 0.0], Some(&vdw_gate(0.0, 1e30)), &p).unwrap();
        let two_level = Complex64::new(0.0, g2 / p.gamma);
        assert!((chi - two_level).norm() < 1e-9 * two_level.norm());
        // Weak real potential: light shift g² V / Ω².
        let c6 = 1e-3;
        let z = 5.0;
        let chi = susceptibility(z, [0.0, 0.0], Some(&vdw_gate(0.0, c6)), &p).unwrap();
        let shift = g2 * c6 / z.powi(6) / p.omega_rabi.powi(2);
        assert!((chi.re - shift).abs() < 1e-6 * shift);
        assert!(chi.im.abs() < 1e-3 * shift);
    }

    #[test]
    fn susceptibility_singular_at_gate() {
        let p = base();
        let err = susceptibility(1.5, [0.0, 0.0], Some(&vdw_gate(1.5, 1.0)), &p);
        assert!(matches!(err, Err(Error::Singular(_))));
    }

    #[test]
    fn uniform_eit_closed_form() {
        let p = base();
        let l_eff = p.profile.effective_length();
        let expected = (-2.0 * p.g * p.g * p.gamma_s * l_eff / (p.c * p.omega_rabi.powi(2))).exp();
        let got = eit_baseline(&p).unwrap().intensity;
        assert!((got - expected).abs() < 1e-10 * expected, "{got} vs {expected}");
    }

    #[test]
    fn far_gate_equals_baseline() {
        let p = base();
        let far = transmission_freq([0.0, 0.0], Some(&vdw_gate(1e6, 1e8)), &p).unwrap();
        let none = eit_baseline(&p).unwrap();
        assert!((far.intensity - none.intensity).abs() < 1e-12);
    }

    #[test]
    fn deep_blockade_is_two_level() {
        let mut p = base();
        p.gamma_s = 0.0;
        let od = p.optical_depth();
        let t = transmission_freq([0.0, 0.0], Some(&vdw_gate(0.0, 1e22)), &p).unwrap();
        assert!((t.intensity / (-od).exp() - 1.0).abs() < 0.01, "{} vs {}", t.intensity, (-od).exp());
    }

    #[test]
    fn slabs_factorize() {
        let p = base();
        let gate = StoredGate {
            position: [1.0, 0.5, 3.0],
            coupling: GateCoupling::Forster {
                channels: vec![ResolvedChannel { c3: 2e4, defect: 30.0 }],
                gamma_p: 1.0,
            },
        };
        let off = [0.3, -0.2];
        let whole = transmission_freq(off, Some(&gate), &p).unwrap();
        let a = transmission_segment(off, Some(&gate), &p, -30.0, 0.0).unwrap();
        let b = transmission_segment(off, Some(&gate), &p, 0.0, 30.0).unwrap();
        let product = a.amplitude * b.amplitude;
        assert!((product - whole.amplitude).norm() < 1e-9);
    }

    #[test]
    fn light_speed_rescaling_preserves_transmission() {
        let p = base();
        let slow = p.with_light_speed(1000.0);
        let gate = vdw_gate(2.0, 1e6);
        let a = transmission_freq([1.0, 0.0], Some(&gate), &p).unwrap();
        let b = transmission_freq([1.0, 0.0], Some(&gate), &slow).unwrap();
        assert!((a.amplitude - b.amplitude).norm() < 1e-9);
    }

    #[test]
    fn validity_guard() {
        let mut p = base();
        assert!(p.validity_warnings(0.1).is_empty());
        p.gamma_s = 5.0;
        assert_eq!(p.validity_warnings(3.0).len(), 2);
    }
}
