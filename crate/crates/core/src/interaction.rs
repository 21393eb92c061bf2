//! Gate–source dipolar interaction: the four-state pair Hamiltonian, the
//! adiabatically eliminated effective potential and derived length scales.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic_states::{channel_set, forster_defect, PairChannel, PairSystem};
use crate::{Error, Result};

/// Everything entering the pair Hamiltonian and the effective potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionParams {
    /// Direct `|S, S⟩ ↔ |P, P⟩` coupling, rad/µs·µm³.
    pub c3: f64,
    /// Coupling to the reversed ordering `|P′, P′⟩`, rad/µs·µm³.
    pub c3_prime: f64,
    /// Decoherence rate of the source P state, rad/µs.
    pub gamma_p: f64,
    /// Active channels for the effective potential.
    pub channels: Vec<PairChannel>,
    /// Zero-field van der Waals coefficient, rad/µs·µm⁶.
    pub c6_reference: f64,
}

impl InteractionParams {
    /// Builds the interaction from a pair system, keeping only channels
    /// allowed by the configured geometry. `c3` is taken from the strongest
    /// active channel.
    pub fn from_system(system: &PairSystem) -> Result<Self> {
        let channels = channel_set(&system.pair)?;
        let c3 = channels
            .iter()
            .map(PairChannel::coupling)
            .fold(0.0_f64, |a, b| a.max(b.abs()));
        let params = InteractionParams {
            c3,
            c3_prime: system.constants.c3_prime,
            gamma_p: system.constants.gamma_p,
            channels,
            c6_reference: system.constants.c6_reference,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c3", self.c3),
            ("c3_prime", self.c3_prime),
            ("gamma_p", self.gamma_p),
            ("c6_reference", self.c6_reference),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Couplings and defects of the active channels at `field`.
    pub fn coupling_at(&self, field: f64) -> GateCoupling {
        GateCoupling::Forster {
            channels: self
                .channels
                .iter()
                .map(|ch| ResolvedChannel {
                    c3: ch.coupling(),
                    defect: forster_defect(ch, field),
                })
                .collect(),
            gamma_p: self.gamma_p,
        }
    }
}

/// One channel evaluated at a fixed electric field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedChannel {
    pub c3: f64,
    pub defect: f64,
}

/// Gate–source coupling as seen by a propagating source polariton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GateCoupling {
    /// Dipolar coupling through explicit `|P, P⟩` channels.
    Forster {
        channels: Vec<ResolvedChannel>,
        gamma_p: f64,
    },
    /// Plain van der Waals tail with a real `C6`.
    VanDerWaals { c6: f64 },
}

impl GateCoupling {
    /// Complex coefficient `Σ_α C3α² / (Δα − ω − iγ_p)` of the `1/r⁶`
    /// effective potential.
    pub fn coefficient(&self, omega: f64) -> Complex64 {
        match self {
            GateCoupling::Forster { channels, gamma_p } => channels
                .iter()
                .map(|ch| Complex64::new(ch.c3 * ch.c3, 0.0) / Complex64::new(ch.defect - omega, -gamma_p))
                .sum(),
            GateCoupling::VanDerWaals { c6 } => Complex64::new(*c6, 0.0),
        }
    }
}

/// Dipole-dipole Hamiltonian in the ordered basis
/// `{|S S⟩, |P P⟩, |P′ P′⟩, |S′ S′⟩}`, rad/µs.
pub fn dipole_hamiltonian(r: f64, params: &InteractionParams) -> Result<Matrix4<Complex64>> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("separation must be > 0, got {r}")));
    }
    let inv_r3 = r.powi(-3);
    let a = Complex64::new(params.c3 * inv_r3, 0.0);
    let b = Complex64::new(params.c3_prime * inv_r3, 0.0);
    let z = Complex64::new(0.0, 0.0);
    Ok(Matrix4::new(
        z, a, b, z, //
        a, z, z, b, //
        b, z, z, a, //
        z, b, a, z,
    ))
}

/// Effective gate–source potential at source position `r` for a gate at
/// `gate_pos` (both along the same axis, µm).
pub fn effective_potential(
    r: f64,
    gate_pos: f64,
    omega: f64,
    field: f64,
    params: &InteractionParams,
) -> Result<Complex64> {
    let d = r - gate_pos;
    if d == 0.0 {
        return Err(Error::Singular(gate_pos));
    }
    Ok(params.coupling_at(field).coefficient(omega) / d.powi(6))
}

/// Blockade radius `(γ C6 / Ω²)^{1/6}`.
pub fn blockade_radius(c6: f64, gamma: f64, omega_rabi: f64) -> Result<f64> {
    if !(c6 > 0.0 && gamma > 0.0 && omega_rabi > 0.0) {
        return Err(Error::Domain(format!(
            "blockade radius needs positive inputs, got c6={c6}, gamma={gamma}, omega={omega_rabi}"
        )));
    }
    Ok((gamma * c6 / (omega_rabi * omega_rabi)).powf(1.0 / 6.0))
}

/// Ratio `C3′ / C3`; small values mean excitation hopping is quenched and the
/// gate can be treated as pinned.
pub fn hopping_suppression(params: &InteractionParams) -> Result<f64> {
    if !(params.c3 > 0.0) {
        return Err(Error::Domain("hopping ratio undefined for c3 = 0".into()));
    }
    Ok(params.c3_prime / params.c3)
}

/// Default upper bound on [`hopping_suppression`] for the pinned-gate model.
pub const HOPPING_THRESHOLD: f64 = 0.1;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic_states::{Orbital, RydbergLevel};

    fn channel(d0: f64, c3: f64) -> PairChannel {
        PairChannel {
            gate: RydbergLevel::new(49, Orbital::P, 1, 1).unwrap(),
            source: RydbergLevel::new(48, Orbital::P, 1, 1).unwrap(),
            defect_zero_field: d0,
            diff_polarizability: 0.0,
            zeeman_shift: 0.0,
            c3,
            weight: 1.0,
        }
    }

    fn params(channels: Vec<PairChannel>, gamma_p: f64) -> InteractionParams {
        InteractionParams {
            c3: 1.0,
            c3_prime: 0.0,
            gamma_p,
            channels,
            c6_reference: 1.0,
        }
    }

    #[test]
    fn hamiltonian_vanishes_at_large_separation() {
        let mut p = params(vec![], 0.0);
        p.c3 = 5.0;
        p.c3_prime = 1.0;
        let h = dipole_hamiltonian(1e9, &p).unwrap();
        assert!(h.iter().all(|x| x.norm() < 1e-20 * p.c3));
        assert!(dipole_hamiltonian(0.0, &p).is_err());
        assert!(dipole_hamiltonian(-1.0, &p).is_err());
    }

    #[test]
    fn hamiltonian_is_real_symmetric() {
        let mut p = params(vec![], 0.0);
        p.c3 = 3.0;
        p.c3_prime = 0.4;
        let h = dipole_hamiltonian(1.7, &p).unwrap();
        assert_eq!(h, h.transpose());
        assert!(h.iter().all(|x| x.im == 0.0));
    }

    #[test]
    fn far_detuned_channel_is_van_der_waals() {
        let p = params(vec![channel(1e6, 100.0)], 0.5);
        let v = effective_potential(3.0, 1.0, 0.2, 0.0, &p).unwrap();
        let c6 = 100.0_f64.powi(2) / 1e6;
        assert!((v.re - c6 / 64.0).abs() < 1e-3 * c6 / 64.0);
        assert!(v.im.abs() < 1e-3 * v.re);
    }

    #[test]
    fn on_resonance_is_purely_dissipative() {
        let p = params(vec![channel(0.0, 10.0)], 2.0);
        let v = effective_potential(2.0, 0.0, 0.0, 0.0, &p).unwrap();
        let expected = Complex64::new(100.0, 0.0) / Complex64::new(0.0, -2.0) / 64.0;
        assert!((v - expected).norm() < 1e-12);
        assert_eq!(v.re, 0.0);
        assert!(v.im > 0.0);
    }

    #[test]
    fn opposite_defects_cancel() {
        let p = params(vec![channel(7.0, 3.0), channel(-7.0, 3.0)], 0.0);
        let v = effective_potential(1.3, 0.0, 0.0, 0.0, &p).unwrap();
        assert!(v.re.abs() < 1e-15);
    }

    #[test]
    fn singular_at_gate() {
        let p = params(vec![channel(1.0, 1.0)], 0.0);
        assert!(matches!(
            effective_potential(2.5, 2.5, 0.0, 0.0, &p),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn blockade_radius_examples() {
        assert!((blockade_radius(1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((blockade_radius(64.0, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-14);
        let r = blockade_radius(3.3, 0.7, 2.1).unwrap();
        let r6 = blockade_radius(3.3e6, 0.7, 2.1).unwrap();
        assert!((r6 / r - 10.0).abs() < 1e-12);
        assert!(blockade_radius(0.0, 1.0, 1.0).is_err());
        assert!(blockade_radius(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn hopping_ratio() {
        let mut p = params(vec![], 0.0);
        p.c3 = 10.0;
        p.c3_prime = 0.1;
        assert!((hopping_suppression(&p).unwrap() - 0.01).abs() < 1e-15);
        p.c3_prime = 10.0;
        assert_eq!(hopping_suppression(&p).unwrap(), 1.0);
        p.c3_prime = 0.0;
        assert_eq!(hopping_suppression(&p).unwrap(), 0.0);
        p.c3 = 0.0;
        assert!(hopping_suppression(&p).is_err());
    }
}
