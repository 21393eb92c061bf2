//! Stored gate spin-wave as a density matrix on a grid along the beam axis,
//! the decoherence channel of a single passing source photon, Uhlmann
//! fidelity and retrieval-efficiency curves.
//!
//! All channel operators are diagonal in the gate position, so applying a
//! channel multiplies the density matrix elementwise by the coherence kernel
//! `K_ab = t_a t̄_b + Σ_s m_s(a) m̄_s(b)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::ExperimentGeometry;
use crate::interaction::GateCoupling;
use crate::propagation::{cumulative_exponent, DensityProfile, PropagationParams, StoredGate};
use crate::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 201;
/// Intrinsic coherence lifetime of the stored spin-wave, µs.
pub const DEFAULT_LIFETIME: f64 = 3.6;

const TRACE_TOL: f64 = 1e-10;
const COMPLETENESS_TOL: f64 = 1e-6;

/// `points` equally spaced positions on `[-half_width, half_width]`.
pub fn uniform_grid(half_width: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(half_width > 0.0) {
        return Err(Error::Config(format!(
            "grid needs >= 2 points and positive extent, got {points} over ±{half_width}"
        )));
    }
    let step = 2.0 * half_width / (points - 1) as f64;
    Ok((0..points).map(|i| -half_width + step * i as f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinWaveState {
    grid: Vec<f64>,
    rho: DMatrix<Complex64>,
    pub intrinsic_lifetime: f64,
}

impl SpinWaveState {
    /// Pure state with grid amplitudes `psi` (normalized here).
    pub fn from_amplitudes(grid: Vec<f64>, psi: &[Complex64]) -> Result<Self> {
        if grid.len() != psi.len() || grid.is_empty() {
            return Err(Error::Config("grid and amplitudes differ in length".into()));
        }
        let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain("spin-wave amplitude vanishes on the grid".into()));
        }
        let v: Vec<Complex64> = psi.iter().map(|a| a / norm).collect();
        let n = v.len();
        let rho = DMatrix::from_fn(n, n, |a, b| v[a] * v[b].conj());
        Ok(SpinWaveState {
            grid,
            rho,
            intrinsic_lifetime: DEFAULT_LIFETIME,
        })
    }

    /// Wraps a density matrix after checking trace, hermiticity and positivity.
    pub fn from_density_matrix(grid: Vec<f64>, rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() != grid.len() || rho.ncols() != grid.len() {
            return Err(Error::Config("density matrix does not match the grid".into()));
        }
        check_density_matrix(&rho)?;
        Ok(SpinWaveState {
            grid,
            rho,
            intrinsic_lifetime: DEFAULT_LIFETIME,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density_matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|z| z.re).sum()
    }

    /// Occupation probability of each grid point.
    pub fn populations(&self) -> Vec<f64> {
        self.rho.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn spacing(&self) -> f64 {
        if self.grid.len() < 2 {
            return 0.0;
        }
        self.grid[1] - self.grid[0]
    }
}

fn check_density_matrix(rho: &DMatrix<Complex64>) -> Result<()> {
    let trace: f64 = rho.diagonal().iter().map(|z| z.re).sum();
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::Domain(format!("trace {trace} differs from 1")));
    }
    check_psd(rho)
}

fn check_psd(rho: &DMatrix<Complex64>) -> Result<()> {
    let asym = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-10 {
        return Err(Error::Domain(format!("matrix is not Hermitian (deviation {asym:.2e})")));
    }
    let min = rho.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::Domain(format!("matrix has negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

/// Stored excitation following the atomic density: `|ψ(z)|² ∝ n(z)`.
pub fn stored_spinwave(profile: &DensityProfile, grid: Vec<f64>) -> Result<SpinWaveState> {
    let psi: Vec<Complex64> = grid
        .iter()
        .map(|&z| Complex64::new(profile.value(z).sqrt(), 0.0))
        .collect();
    SpinWaveState::from_amplitudes(grid, &psi)
}

/// Kraus family of one source photon, diagonal in the gate position.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonChannel {
    /// Transmission amplitude for each gate grid point.
    pub transmit: Vec<Complex64>,
    /// `scatter[s][a]`: amplitude to scatter in path cell `s` with the gate at `a`.
    pub scatter: Vec<Vec<Complex64>>,
}

impl PhotonChannel {
    pub fn identity(n: usize) -> Self {
        PhotonChannel {
            transmit: vec![Complex64::new(1.0, 0.0); n],
            scatter: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.transmit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmit.is_empty()
    }

    /// Largest deviation of `|t|² + Σ|m|²` from one over gate positions.
    pub fn completeness_error(&self) -> f64 {
        (0..self.len())
            .map(|a| {
                let s: f64 = self.scatter.iter().map(|m| m[a].norm_sqr()).sum();
                (self.transmit[a].norm_sqr() + s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn check(&self) -> Result<()> {
        if self.scatter.iter().any(|m| m.len() != self.len()) {
            return Err(Error::Config("scatter operators do not match the grid".into()));
        }
        let err = self.completeness_error();
        if err > COMPLETENESS_TOL {
            return Err(Error::Numerical(format!("channel completeness violated by {err:.3e}")));
        }
        Ok(())
    }

    /// Elementwise kernels of the transmitted and scattered branches.
    pub fn branch_kernels(&self) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let n = self.len();
        let t = &self.transmit;
        let kt = DMatrix::from_fn(n, n, |a, b| t[a] * t[b].conj());
        let mut ks = DMatrix::zeros(n, n);
        if !self.scatter.is_empty() {
            // ks = Mᵀ · conj(M) with M[s][a]
            let m = DMatrix::from_fn(self.scatter.len(), n, |s, a| self.scatter[s][a]);
            ks = m.transpose() * m.map(|z| z.conj());
        }
        (kt, ks)
    }

    /// Full coherence kernel `K = K_t + K_s`.
    pub fn kernel(&self) -> DMatrix<Complex64> {
        let (kt, ks) = self.branch_kernels();
        kt + ks
    }
}

/// Channel for a source photon on the line at `path_offset` with the gate
/// spin-wave at transverse position `gate_transverse`.
///
/// Path cells are bounded by the spin-wave grid points and the ends of the
/// cloud. The scattering probability of a cell is the drop of `|E|²` across
/// it, so completeness holds by construction.
pub fn photon_channel(
    grid: &[f64],
    path_offset: [f64; 2],
    gate_transverse: [f64; 2],
    coupling: &GateCoupling,
    params: &PropagationParams,
) -> Result<PhotonChannel> {
    params.validate()?;
    let (lo, hi) = params.profile.extent();
    let mut edges: Vec<f64> = std::iter::once(lo)
        .chain(grid.iter().copied().filter(|&z| z > lo && z < hi))
        .chain(std::iter::once(hi))
        .collect();
    edges.dedup();
    let columns: Vec<(Complex64, Vec<Complex64>)> = grid
        .par_iter()
        .map(|&zg| {
            let gate = StoredGate {
                position: [gate_transverse[0], gate_transverse[1], zg],
                coupling: coupling.clone(),
            };
            let phi = cumulative_exponent(path_offset, Some(&gate), params, &edges)?;
            let field: Vec<(f64, f64)> = phi.iter().map(|p| ((-2.0 * p.im).exp(), p.re)).collect();
            let cells = field
                .windows(2)
                .map(|w| {
                    let p = (w[0].0 - w[1].0).max(0.0);
                    Complex64::from_polar(p.sqrt(), 0.5 * (w[0].1 + w[1].1))
                })
                .collect();
            let end = phi.last().copied().unwrap_or_default();
            Ok(((Complex64::i() * end).exp(), cells))
        })
        .collect::<Result<_>>()?;
    let n_cells = edges.len() - 1;
    let transmit = columns.iter().map(|c| c.0).collect();
    let scatter = (0..n_cells)
        .map(|s| columns.iter().map(|c| c.1[s]).collect())
        .collect();
    let channel = PhotonChannel { transmit, scatter };
    channel.check()?;
    Ok(channel)
}

/// Result of one photon passing: new state and branch probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOutcome {
    pub state: SpinWaveState,
    pub p_transmit: f64,
    pub p_scatter: f64,
}

/// `ρ_f = t ρ t† + Σ_s M_s ρ M_s†`.
pub fn apply_channel(state: &SpinWaveState, channel: &PhotonChannel) -> Result<ChannelOutcome> {
    if channel.len() != state.grid.len() {
        return Err(Error::Config("channel and state grids differ".into()));
    }
    channel.check()?;
    let (kt, ks) = channel.branch_kernels();
    let transmitted = state.rho.component_mul(&kt);
    let scattered = state.rho.component_mul(&ks);
    let p_transmit: f64 = transmitted.diagonal().iter().map(|z| z.re).sum();
    let p_scatter: f64 = scattered.diagonal().iter().map(|z| z.re).sum();
    Ok(ChannelOutcome {
        state: SpinWaveState {
            grid: state.grid.clone(),
            rho: transmitted + scattered,
            intrinsic_lifetime: state.intrinsic_lifetime,
        },
        p_transmit,
        p_scatter,
    })
}

/// Eigenvalues below this fraction of the largest are treated as round-off.
const SPECTRAL_CUTOFF: f64 = 1e-13;

fn hermitian_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let floor = SPECTRAL_CUTOFF * eig.eigenvalues.amax();
    let d = eig
        .eigenvalues
        .map(|l| Complex64::new(if l > floor { l.sqrt() } else { 0.0 }, 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`, evaluated as the squared trace norm
/// of `√ρ √σ`. `sigma` may be unnormalized.
pub fn uhlmann_fidelity(rho: &DMatrix<Complex64>, sigma: &DMatrix<Complex64>) -> Result<f64> {
    if rho.shape() != sigma.shape() || !rho.is_square() {
        return Err(Error::Config("fidelity needs square matrices of equal size".into()));
    }
    check_psd(rho)?;
    check_psd(sigma)?;
    let product = hermitian_sqrt(rho) * hermitian_sqrt(sigma);
    let norm: f64 = product.singular_values().iter().sum();
    Ok(norm * norm)
}

/// Fidelity against the full final state and against each branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityBreakdown {
    pub total: f64,
    pub transmitted: f64,
    pub scattered: f64,
}

/// Fidelity of `ρ_i` with the state after one photon, split into the
/// transmitted and scattered branches.
pub fn state_fidelity(initial: &SpinWaveState, channel: &PhotonChannel) -> Result<FidelityBreakdown> {
    channel.check()?;
    check_density_matrix(&initial.rho)?;
    let (kt, ks) = channel.branch_kernels();
    let rt = initial.rho.component_mul(&kt);
    let rs = initial.rho.component_mul(&ks);
    let full = &rt + &rs;
    Ok(FidelityBreakdown {
        total: uhlmann_fidelity(&initial.rho, &full)?,
        transmitted: uhlmann_fidelity(&initial.rho, &rt)?,
        scattered: uhlmann_fidelity(&initial.rho, &rs)?,
    })
}

/// Storage and read-out timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    /// Read-out efficiency without source photons and without storage decay.
    pub base_efficiency: f64,
    /// µs
    pub storage_time: f64,
    /// µs
    pub pulse_length: f64,
    /// µs
    pub lifetime: f64,
    pub grid_points: usize,
    /// Transverse gate positions and source paths per gate for the 3D average.
    pub transverse_gates: usize,
    pub sources_per_gate: usize,
    /// Taken from the run seed rather than from configuration files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            base_efficiency: 0.2,
            storage_time: 4.2,
            pulse_length: 3.2,
            lifetime: DEFAULT_LIFETIME,
            grid_points: DEFAULT_GRID_POINTS,
            transverse_gates: 8,
            sources_per_gate: 8,
            seed: 0,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_efficiency) {
            return Err(Error::Config("base_efficiency must be in [0, 1]".into()));
        }
        if !(self.storage_time >= 0.0 && self.pulse_length >= 0.0 && self.lifetime > 0.0) {
            return Err(Error::Config("storage_time, pulse_length >= 0 and lifetime > 0 required".into()));
        }
        if self.pulse_length > self.storage_time {
            return Err(Error::Config("source pulse longer than the storage time".into()));
        }
        if self.grid_points < 2 || self.transverse_gates == 0 || self.sources_per_gate == 0 {
            return Err(Error::Config("grid and sample counts must be positive".into()));
        }
        Ok(())
    }

    /// Read-out efficiency with no source photons.
    pub fn zero_source_efficiency(&self) -> f64 {
        self.base_efficiency * (-self.storage_time / self.lifetime).exp()
    }
}

/// Per-photon coherence kernel averaged over source paths for each
/// transverse gate position, with the gate-induced scattering probability.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedKernel {
    pub weights: Vec<f64>,
    /// One kernel per transverse gate position.
    pub kernels: Vec<DMatrix<Complex64>>,
    /// Extra scattering probability per photon caused by the gate.
    pub excess_scatter: Vec<f64>,
}

impl AveragedKernel {
    /// Builds kernels for the geometry's transverse gate and beam distributions.
    pub fn build(
        initial: &SpinWaveState,
        params: &PropagationParams,
        coupling: &GateCoupling,
        geometry: &ExperimentGeometry,
        config: &RetrievalConfig,
    ) -> Result<Self> {
        config.validate()?;
        let samples = geometry.draw_samples(config.transverse_gates, config.sources_per_gate, config.seed)?;
        let w = initial.populations();
        let k = samples.sources_per_gate;
        let mut kernels = Vec::with_capacity(samples.gate_positions.len());
        let mut excess_scatter = Vec::with_capacity(samples.gate_positions.len());
        for (g, pos) in samples.gate_positions.iter().enumerate() {
            let mut kbar = DMatrix::<Complex64>::zeros(w.len(), w.len());
            let mut excess = 0.0;
            for b in &samples.offsets[g * k..(g + 1) * k] {
                let ch = photon_channel(initial.grid(), *b, [pos[0], pos[1]], coupling, params)?;
                let t0 = crate::propagation::transmission_freq(*b, None, params)?.intensity;
                let with: f64 = w.iter().zip(&ch.transmit).map(|(wa, t)| wa * t.norm_sqr()).sum();
                excess += t0 - with;
                kbar += ch.kernel();
            }
            kbar /= Complex64::new(k as f64, 0.0);
            kernels.push(kbar);
            excess_scatter.push(excess / k as f64);
        }
        Ok(AveragedKernel {
            weights: w,
            kernels,
            excess_scatter,
        })
    }

    /// Single on-axis line with the gate on the same line (1D model).
    pub fn on_axis(initial: &SpinWaveState, channel: &PhotonChannel, params: &PropagationParams) -> Result<Self> {
        let w = initial.populations();
        let t0 = crate::propagation::transmission_freq([0.0, 0.0], None, params)?.intensity;
        let with: f64 = w.iter().zip(&channel.transmit).map(|(wa, t)| wa * t.norm_sqr()).sum();
        Ok(AveragedKernel {
            weights: w,
            kernels: vec![channel.kernel()],
            excess_scatter: vec![t0 - with],
        })
    }

    /// Overlap `⟨ψ|ρ_N|ψ⟩` after a Poisson number of photons with mean
    /// `n_in`, averaged over transverse gate positions. `ψ` is the stored mode.
    pub fn readout_overlap(&self, initial: &SpinWaveState, n_in: f64) -> f64 {
        let rho = initial.density_matrix();
        let psi: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let n = psi.len();
        let total: f64 = self
            .kernels
            .iter()
            .map(|kbar| {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        // Poisson average of K^m is exp(n (K − 1)) elementwise.
                        let decay = ((kbar[(a, b)] - 1.0) * n_in).exp();
                        acc += (psi[a] * psi[b] * rho[(a, b)] * decay).re;
                    }
                }
                acc
            })
            .sum();
        total / self.kernels.len() as f64
    }

    pub fn mean_excess_scatter(&self) -> f64 {
        self.excess_scatter.iter().sum::<f64>() / self.excess_scatter.len() as f64
    }
}

/// One point of a retrieval curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalPoint {
    pub n_in: f64,
    pub n_scattered: f64,
    pub efficiency: f64,
}

/// Retrieval efficiency versus mean incident source photon number.
pub fn retrieval_curve(
    initial: &SpinWaveState,
    kernel: &AveragedKernel,
    config: &RetrievalConfig,
    n_in: &[f64],
) -> Result<Vec<RetrievalPoint>> {
    config.validate()?;
    let base = config.zero_source_efficiency();
    let per_photon = kernel.mean_excess_scatter();
    // ⟨ψ|ρ_i|ψ⟩ is one up to rounding; dividing it out pins the N̄ = 0 point.
    let norm = kernel.readout_overlap(initial, 0.0);
    n_in.iter()
        .map(|&n| {
            if !(n >= 0.0) {
                return Err(Error::Domain(format!("mean photon number must be >= 0, got {n}")));
            }
            Ok(RetrievalPoint {
                n_in: n,
                n_scattered: n * per_photon,
                efficiency: base * (kernel.readout_overlap(initial, n) / norm),
            })
        })
        .collect()
}

/// Reference curves for a retrieval table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitPoint {
    pub n_in: f64,
    pub n_scattered: f64,
    /// Coherence lost with the first scattered photon.
    pub black: f64,
    /// Coherence lost with the first incident photon.
    pub dashed: f64,
    /// Coherence lost with the first photon hitting the blockade disc.
    pub dotted: f64,
}

/// Share of the source beam within `blockade_radius` of the gate's transverse
/// position, averaged over the gate distribution.
pub fn blockade_overlap_fraction(geometry: &ExperimentGeometry, blockade_radius: f64) -> f64 {
    let sigma_b2 = 0.25 * geometry.beam_waist.powi(2);
    let sigma_t2 = 0.5 / (1.0 / geometry.cloud_radius.powi(2) + 2.0 / geometry.beam_waist.powi(2));
    1.0 - (-blockade_radius.powi(2) / (2.0 * (sigma_b2 + sigma_t2))).exp()
}

pub fn limit_curves(config: &RetrievalConfig, points: &[RetrievalPoint], overlap_fraction: f64) -> Vec<LimitPoint> {
    let base = config.zero_source_efficiency();
    points
        .iter()
        .map(|p| LimitPoint {
            n_in: p.n_in,
            n_scattered: p.n_scattered,
            black: base * (-p.n_scattered).exp(),
            dashed: base * (-p.n_in).exp(),
            dotted: base * (-p.n_in * overlap_fraction).exp(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_spinwave_is_flat() {
        let grid = uniform_grid(5.0, 11).unwrap();
        let s = stored_spinwave(&DensityProfile::Uniform { half_length: 5.0 }, grid).unwrap();
        let p = s.populations();
        assert!(p.iter().all(|x| (x - 1.0 / 11.0).abs() < 1e-15));
        assert!((s.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_populations_follow_density() {
        let profile = DensityProfile::gaussian(3.0);
        let grid = uniform_grid(6.0, 41).unwrap();
        let s = stored_spinwave(&profile, grid.clone()).unwrap();
        let p = s.populations();
        let ratio = p[20] / p[30];
        assert!((ratio - profile.value(grid[20]) / profile.value(grid[30])).abs() < 1e-9);
    }

    #[test]
    fn identity_channel_preserves_state() {
        let grid = uniform_grid(5.0, 9).unwrap();
        let s = stored_spinwave(&DensityProfile::gaussian(3.0), grid).unwrap();
        let out = apply_channel(&s, &PhotonChannel::identity(9)).unwrap();
        assert_eq!(out.state.density_matrix(), s.density_matrix());
        assert_eq!(out.p_transmit, 1.0);
    }

    #[test]
    fn projective_scattering_dephases() {
        let n = 5;
        let grid = uniform_grid(2.0, n).unwrap();
        let s = stored_spinwave(&DensityProfile::Uniform { half_length: 2.0 }, grid).unwrap();
        let scatter = (0..n)
            .map(|k| (0..n).map(|a| Complex64::new(if a == k { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        let ch = PhotonChannel {
            transmit: vec![Complex64::new(0.0, 0.0); n],
            scatter,
        };
        let out = apply_channel(&s, &ch).unwrap();
        let rho = out.state.density_matrix();
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    assert_eq!(rho[(a, b)], Complex64::new(0.0, 0.0));
                }
            }
        }
        assert!((out.state.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qubit_fidelities() {
        let h = Complex64::new(0.5, 0.0);
        let plus = DMatrix::from_element(2, 2, h);
        let mixed = DMatrix::from_diagonal_element(2, 2, h);
        assert!((uhlmann_fidelity(&plus, &mixed).unwrap() - 0.5).abs() < 1e-12);
        assert!((uhlmann_fidelity(&plus, &plus).unwrap() - 1.0).abs() < 1e-12);
        let zero = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]));
        let one = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]));
        assert!(uhlmann_fidelity(&zero, &one).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_non_psd() {
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(1.5, 0.0), Complex64::new(-0.5, 0.0)]));
        assert!(matches!(uhlmann_fidelity(&bad, &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn limit_curves_agree_at_zero_and_full_overlap() {
        let cfg = RetrievalConfig::default();
        let pts = [
            RetrievalPoint { n_in: 0.0, n_scattered: 0.0, efficiency: 0.0 },
            RetrievalPoint { n_in: 3.0, n_scattered: 1.0, efficiency: 0.0 },
        ];
        let c = limit_curves(&cfg, &pts, 1.0);
        let base = cfg.zero_source_efficiency();
        assert_eq!((c[0].black, c[0].dashed, c[0].dotted), (base, base, base));
        assert_eq!(c[1].dashed, c[1].dotted);
        assert!((base - 0.2 * (-4.2f64 / 3.6).exp()).abs() < 1e-15);
    }
}
