//! Brute-force space–time integration of the coupled photon, intermediate,
//! source-Rydberg and pair-state amplitudes.
//!
//! The photon field is advanced along characteristics with an upwind step
//! (Courant number `C ≤ 1`, exact shift at `C = 1`). Atomic amplitudes at each
//! node evolve under an exponential integrator with the field held at its
//! step midpoint, which makes the update linear in the new field value and
//! solvable node by node.
//!
//! Field equations (frame of the bare atomic resonances, carrier `e^{-iωt}`):
//!
//! ```text
//! ∂_t E = -c ∂_z E - i g P
//! ∂_t P = -γ P - i g E - i Ω S
//! ∂_t S = -γ_s S - i Ω P - i Σ_α V_α B_α
//! ∂_t B_α = -(γ_p + iΔ_α) B_α - i V_α S
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PropagationParams, StoredGate, TransmissionResult};
use crate::interaction::GateCoupling;
use crate::{Error, Result};

/// Grid and drive settings for [`transmission_time_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Spatial step, µm.
    pub dz: f64,
    /// `c dt / dz`; must lie in `(0, 1]`.
    pub courant: f64,
    /// Duration of the sin² switch-on, µs.
    pub ramp_time: f64,
    /// Give up if the output has not settled by this time, µs.
    pub max_time: f64,
    /// Absolute change of the output amplitude between checks that counts as settled.
    pub settle_tolerance: f64,
    /// Speed of light used on the grid; `None` keeps `params.c`. Rescaling
    /// keeps `g²/c` fixed and leaves the steady state unchanged.
    pub light_speed: Option<f64>,
}

impl PulseSpec {
    /// Settings scaled to the EIT response time of `params`.
    pub fn for_params(params: &PropagationParams) -> Self {
        let (lo, hi) = params.profile.extent();
        let length = hi - lo;
        let omega2 = params.omega_rabi * params.omega_rabi;
        let od = params.optical_depth().max(1.0);
        let bandwidth = omega2 / (params.gamma * od.sqrt());
        let delay = params.g * params.g * params.profile.effective_length() / (params.c * omega2);
        let light_speed = 10.0 * length;
        let response = delay + 1.0 / bandwidth + 1.0 / params.gamma;
        let ramp_time = 4.0 * response;
        PulseSpec {
            dz: (length / 400.0).min(0.05),
            courant: 1.0,
            ramp_time,
            // near-resonant pair states with tiny γ_p can take hundreds of
            // response times to settle
            max_time: ramp_time + 0.1 + 1000.0 * response,
            settle_tolerance: 1e-5,
            light_speed: Some(light_speed),
        }
    }

    /// Same pulse on a grid refined by `factor` in both `dz` and `dt`.
    pub fn refined(&self, factor: f64) -> Self {
        PulseSpec {
            dz: self.dz / factor,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.courant > 0.0 && self.courant <= 1.0) {
            return Err(Error::Config(format!(
                "Courant number must be in (0, 1], got {}",
                self.courant
            )));
        }
        if !(self.dz > 0.0 && self.ramp_time >= 0.0 && self.max_time > self.ramp_time && self.settle_tolerance > 0.0) {
            return Err(Error::Config(format!("invalid pulse spec {self:?}")));
        }
        if let Some(c) = self.light_speed {
            if !(c > 0.0) {
                return Err(Error::Config("light_speed must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// One-step propagator of a node: `x ← Φ x + ψ E`.
struct NodeStep {
    coupling: f64,
    phi: Vec<Complex64>,
    psi: Vec<Complex64>,
}

fn node_generator(
    coupling: f64,
    params: &PropagationParams,
    potentials: &[(f64, f64)],
    vdw_shift: f64,
    gamma_p: f64,
) -> DMatrix<Complex64> {
    let m = potentials.len();
    let dim = m + 2;
    let i = Complex64::i();
    let mut a = DMatrix::<Complex64>::zeros(dim + 1, dim + 1);
    a[(0, 0)] = Complex64::new(-params.gamma, 0.0);
    a[(0, 1)] = -i * params.omega_rabi;
    a[(1, 0)] = -i * params.omega_rabi;
    a[(1, 1)] = Complex64::new(-params.gamma_s, vdw_shift);
    for (alpha, &(v, defect)) in potentials.iter().enumerate() {
        let b = 2 + alpha;
        a[(1, b)] = -i * v;
        a[(b, 1)] = -i * v;
        a[(b, b)] = Complex64::new(-gamma_p, -defect);
    }
    // Drive column: dP includes -i g E.
    a[(0, dim)] = -i * coupling;
    a
}

fn build_steps(
    params: &PropagationParams,
    path_offset: [f64; 2],
    gate: Option<&StoredGate>,
    nodes: &[f64],
    dt: f64,
) -> Result<Vec<NodeStep>> {
    let transverse = params.transverse_density(path_offset);
    nodes
        .iter()
        .map(|&z| {
            let coupling = params.g * (transverse * params.profile.value(z)).sqrt();
            let mut potentials = Vec::new();
            let mut vdw_shift = 0.0;
            let mut gamma_p = 0.0;
            if let Some(s) = gate {
                let r2 = ((path_offset[0] - s.position[0]).powi(2)
                    + (path_offset[1] - s.position[1]).powi(2)
                    + (z - s.position[2]).powi(2))
                .max(params.min_distance.powi(2));
                let r3 = r2 * r2.sqrt();
                match &s.coupling {
                    GateCoupling::Forster { channels, gamma_p: gp } => {
                        gamma_p = *gp;
                        potentials = channels.iter().map(|ch| (ch.c3 / r3, ch.defect)).collect();
                    }
                    GateCoupling::VanDerWaals { c6 } => vdw_shift = c6 / (r3 * r3),
                }
            }
            let a = node_generator(coupling, params, &potentials, vdw_shift, gamma_p);
            let dim = a.nrows() - 1;
            let e = (a * Complex64::new(dt, 0.0)).exp();
            if !e.iter().all(|x| x.is_finite()) {
                return Err(Error::Numerical(format!("non-finite node propagator at z = {z}")));
            }
            let mut phi = Vec::with_capacity(dim * dim);
            for r in 0..dim {
                for c in 0..dim {
                    phi.push(e[(r, c)]);
                }
            }
            let psi = (0..dim).map(|r| e[(r, dim)]).collect();
            Ok(NodeStep { coupling, phi, psi })
        })
        .collect()
}

/// Transmitted amplitude at the carrier frequency after the output settles.
///
/// The free-space phase `ω (z_max − z_min)/c` is removed so the result is
/// directly comparable with [`super::transmission_freq`].
pub fn transmission_time_oracle(
    path_offset: [f64; 2],
    gate: Option<&StoredGate>,
    params: &PropagationParams,
    pulse: &PulseSpec,
) -> Result<TransmissionResult> {
    pulse.validate()?;
    params.validate_loose()?;
    let params = match pulse.light_speed {
        Some(c) => params.with_light_speed(c),
        None => params.clone(),
    };
    let (lo, hi) = params.profile.extent();
    let cells = ((hi - lo) / pulse.dz).ceil().max(1.0) as usize;
    let dz = (hi - lo) / cells as f64;
    let nodes: Vec<f64> = (0..=cells).map(|k| lo + dz * k as f64).collect();
    let courant = pulse.courant;
    let dt = courant * dz / params.c;
    let steps = build_steps(&params, path_offset, gate, &nodes, dt)?;
    let dim = steps[0].psi.len();

    let omega = params.omega;
    let drive = |t: f64| -> Complex64 {
        let s = if t >= pulse.ramp_time || pulse.ramp_time == 0.0 {
            1.0
        } else {
            (0.5 * std::f64::consts::PI * t / pulse.ramp_time).sin().powi(2)
        };
        Complex64::from_polar(s, -omega * t)
    };

    let n = nodes.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut field = vec![zero; n];
    let mut source = vec![zero; n];
    let mut state = vec![zero; n * dim];
    let mut scratch = vec![zero; dim];
    let half_dt = 0.5 * dt;
    let i = Complex64::i();

    let transit = (hi - lo) / params.c;
    let check_every = ((pulse.ramp_time.max(transit) / 20.0) / dt).ceil().max(1.0) as usize;
    let mut last_check: Option<Complex64> = None;
    let mut quiet_checks = 0;
    let reference = Complex64::from_polar(1.0, -omega * (hi - lo) / params.c);
    let total_steps = (pulse.max_time / dt).ceil() as usize;

    for step_index in 1..=total_steps {
        let t_new = dt * step_index as f64;
        let t_old = t_new - dt;

        // Interior nodes from the far end so that node k-1 still holds old values.
        for k in (0..n).rev() {
            let node = &steps[k];
            let x = &mut state[k * dim..(k + 1) * dim];
            for (r, out) in scratch.iter_mut().enumerate() {
                *out = node.phi[r * dim..(r + 1) * dim]
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| a * b)
                    .sum();
            }
            let e_old = field[k];
            let e_new = if k == 0 {
                drive(t_new)
            } else {
                // f_new = a + b E_new
                let a = -i * node.coupling * (scratch[0] + node.psi[0] * e_old * 0.5);
                let b = -i * node.coupling * node.psi[0] * 0.5;
                let rhs = (1.0 - courant) * e_old
                    + courant * field[k - 1]
                    + half_dt * ((1.0 - courant) * source[k] + courant * source[k - 1]);
                (rhs + half_dt * a) / (1.0 - half_dt * b)
            };
            let e_mid = 0.5 * (e_old + e_new);
            for (r, xr) in x.iter_mut().enumerate() {
                *xr = scratch[r] + node.psi[r] * e_mid;
            }
            field[k] = e_new;
            source[k] = -i * node.coupling * x[0];
        }

        if step_index % check_every == 0 && t_old >= pulse.ramp_time + transit {
            let a = field[n - 1] * Complex64::from_polar(1.0, omega * t_new) * reference;
            if !a.is_finite() {
                return Err(Error::Numerical("time-domain field diverged".into()));
            }
            if let Some(prev) = last_check {
                if (a - prev).norm() <= pulse.settle_tolerance {
                    quiet_checks += 1;
                    if quiet_checks >= 3 {
                        return Ok(TransmissionResult::from_amplitude(a));
                    }
                } else {
                    quiet_checks = 0;
                }
            }
            last_check = Some(a);
        }
    }
    Err(Error::Numerical(format!(
        "output did not settle within {} µs",
        pulse.max_time
    )))
}
