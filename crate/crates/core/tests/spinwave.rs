use forster_core::ensemble::ExperimentGeometry;
use forster_core::interaction::GateCoupling;
use forster_core::propagation::{DensityProfile, PropagationParams};
use forster_core::spinwave::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Real = Vec<Vec<f64>>;

/// Cyclic Jacobi rotations on a real symmetric matrix: (eigenvalues, eigenvectors as columns).
fn jacobi(mut a: Real) -> (Vec<f64>, Real) {
    let n = a.len();
    let mut v: Real = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn matmul(a: &Real, b: &Real) -> Real {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

/// Real 2n×2n embedding of a Hermitian matrix; every eigenvalue appears twice.
fn embed(m: &DMatrix<Complex64>) -> Real {
    let n = m.nrows();
    let mut r = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            r[i][j] = z.re;
            r[i + n][j + n] = z.re;
            r[i][j + n] = -z.im;
            r[i + n][j] = z.im;
        }
    }
    r
}

fn brute_force_fidelity(rho: &DMatrix<Complex64>, sigma: &DMatrix<Complex64>) -> f64 {
    let (vals, vecs) = jacobi(embed(rho));
    let m = vals.len();
    let floor = 1e-13 * vals.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let root = |l: f64| if l > floor { l.sqrt() } else { 0.0 };
    let sqrt_rho: Real = (0..m)
        .map(|i| (0..m).map(|j| (0..m).map(|k| vecs[i][k] * root(vals[k]) * vecs[j][k]).sum()).collect())
        .collect();
    let inner = matmul(&matmul(&sqrt_rho, &embed(sigma)), &sqrt_rho);
    let sym: Real = (0..m).map(|i| (0..m).map(|j| 0.5 * (inner[i][j] + inner[j][i])).collect()).collect();
    let (lam, _) = jacobi(sym);
    let floor = 1e-13 * lam.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tr = 0.5 * lam.iter().map(|&l| if l > floor { l.sqrt() } else { 0.0 }).sum::<f64>();
    tr * tr
}

fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    let rank = rng.random_range(1..=n);
    let a = DMatrix::from_fn(n, rank, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &a * a.adjoint();
    let tr = m.trace();
    m / tr
}

fn random_channel(rng: &mut ChaCha8Rng, n: usize, cells: usize) -> PhotonChannel {
    let mut transmit = Vec::with_capacity(n);
    let mut scatter = vec![Vec::with_capacity(n); cells];
    for _ in 0..n {
        let mut w: Vec<f64> = (0..=cells).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        transmit.push(Complex64::from_polar(w[0].sqrt(), rng.random_range(-3.0..3.0)));
        for (c, m) in scatter.iter_mut().enumerate() {
            m.push(Complex64::from_polar(w[c + 1].sqrt(), rng.random_range(-3.0..3.0)));
        }
    }
    PhotonChannel { transmit, scatter }
}

fn test_params(profile: DensityProfile) -> PropagationParams {
    PropagationParams::from_optical_depth(6.0, 20.0, 15.0, 0.0, profile)
}

#[test]
fn uhlmann_matches_brute_force_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=16);
        let rho = random_density(&mut rng, n);
        let sigma = random_density(&mut rng, n);
        let f = uhlmann_fidelity(&rho, &sigma).unwrap();
        worst = worst.max((f - brute_force_fidelity(&rho, &sigma)).abs());
    }
    assert!(worst < 1e-8, "worst deviation {worst:e}");
}

#[test]
fn uhlmann_symmetric_and_unit_on_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..30 {
        let n = rng.random_range(2..=12);
        let rho = random_density(&mut rng, n);
        let sigma = random_density(&mut rng, n);
        let a = uhlmann_fidelity(&rho, &sigma).unwrap();
        let b = uhlmann_fidelity(&sigma, &rho).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        assert!((0.0..=1.0 + 1e-9).contains(&a));
        assert!((uhlmann_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn channels_never_reduce_distinguishability() {
    // F(E(ρ), E(σ)) >= F(ρ, σ)
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..40 {
        let n = rng.random_range(2..=10);
        let grid: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let rho = SpinWaveState::from_density_matrix(grid.clone(), random_density(&mut rng, n)).unwrap();
        let sigma = SpinWaveState::from_density_matrix(grid, random_density(&mut rng, n)).unwrap();
        let ch = random_channel(&mut rng, n, 3);
        let before = uhlmann_fidelity(rho.density_matrix(), sigma.density_matrix()).unwrap();
        let er = apply_channel(&rho, &ch).unwrap().state;
        let es = apply_channel(&sigma, &ch).unwrap().state;
        let after = uhlmann_fidelity(er.density_matrix(), es.density_matrix()).unwrap();
        assert!(after >= before - 1e-9, "{after} < {before}");
    }
}

#[test]
fn fidelity_decays_under_repeated_phase_free_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 10;
    let grid: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let psi: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random_range(0.1..1.0), 0.0)).collect();
    let initial = SpinWaveState::from_amplitudes(grid, &psi).unwrap();
    let mut ch = random_channel(&mut rng, n, 4);
    for t in ch.transmit.iter_mut().chain(ch.scatter.iter_mut().flatten()) {
        *t = Complex64::new(t.norm(), 0.0);
    }
    let mut state = initial.clone();
    let mut last = 1.0;
    for _ in 0..6 {
        state = apply_channel(&state, &ch).unwrap().state;
        let f = uhlmann_fidelity(initial.density_matrix(), state.density_matrix()).unwrap();
        assert!(f <= last + 1e-12, "{f} > {last}");
        last = f;
    }
    assert!(last < 0.99);
}

#[test]
fn branches_add_up_when_distinguishable() {
    // Transmission and scattering supported on disjoint gate positions.
    let n = 6;
    let grid: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let psi = vec![Complex64::new(1.0, 0.0); n];
    let initial = SpinWaveState::from_amplitudes(grid, &psi).unwrap();
    let transmit = (0..n).map(|a| Complex64::new(if a < 3 { 1.0 } else { 0.0 }, 0.0)).collect();
    let scatter = vec![(0..n).map(|a| Complex64::new(if a < 3 { 0.0 } else { 1.0 }, 0.0)).collect()];
    let ch = PhotonChannel { transmit, scatter };
    let f = state_fidelity(&initial, &ch).unwrap();
    assert!((f.total - (f.transmitted + f.scattered)).abs() < 1e-12);
    assert!((f.total - 0.5).abs() < 1e-12);
}

#[test]
fn no_interaction_gives_identity_channel() {
    let params = test_params(DensityProfile::gaussian(5.0));
    let grid = uniform_grid(10.0, 21).unwrap();
    let ch = photon_channel(&grid, [0.0, 0.0], [0.0, 0.0], &GateCoupling::VanDerWaals { c6: 0.0 }, &params).unwrap();
    for t in &ch.transmit {
        assert!((t.norm() - 1.0).abs() < 1e-12);
        assert!((t - ch.transmit[0]).norm() < 1e-12);
    }
    let state = stored_spinwave(&params.profile, grid).unwrap();
    let f = state_fidelity(&state, &ch).unwrap();
    assert!((f.total - 1.0).abs() < 1e-10 && f.scattered.abs() < 1e-12);
}

#[test]
fn deep_blockade_scatters_near_the_gate() {
    let params = PropagationParams::from_optical_depth(40.0, 20.0, 15.0, 0.0, DensityProfile::Uniform { half_length: 20.0 });
    let grid = uniform_grid(20.0, 81).unwrap();
    // r_b = (γ C6 / Ω²)^(1/6) = 3 µm
    let c6 = 3f64.powi(6) * 400.0 / 15.0;
    let ch = photon_channel(&grid, [0.0, 0.0], [0.0, 0.0], &GateCoupling::VanDerWaals { c6 }, &params).unwrap();
    assert!(ch.completeness_error() < 1e-6);
    let a = 40; // gate at z = 0
    assert!(ch.transmit[a].norm_sqr() < 0.02);
    // cells are bounded by grid points after the leading edge, so cell s spans grid[s-1]..grid[s]
    let near: f64 = ch
        .scatter
        .iter()
        .enumerate()
        .filter(|(s, _)| *s >= 1 && (grid[*s - 1] + 0.25).abs() < 3.0 * 3.0)
        .map(|(_, m)| m[a].norm_sqr())
        .sum();
    let total: f64 = ch.scatter.iter().map(|m| m[a].norm_sqr()).sum();
    assert!(near / total > 0.95, "localized share {}", near / total);
}

#[test]
fn physical_channels_are_complete() {
    let geo = ExperimentGeometry::default();
    let params = PropagationParams::from_optical_depth(12.0, 25.0, 19.0, 0.6, geo.profile());
    let grid = uniform_grid(2.0 * geo.cloud_half_length, 61).unwrap();
    let state = stored_spinwave(&geo.profile(), grid.clone()).unwrap();
    for (c6, off) in [(1e5, [0.0, 0.0]), (1e6, [2.0, -1.0]), (3e7, [5.0, 3.0])] {
        let ch = photon_channel(&grid, off, [0.5, 0.0], &GateCoupling::VanDerWaals { c6 }, &params).unwrap();
        assert!(ch.completeness_error() < 1e-6);
        let out = apply_channel(&state, &ch).unwrap();
        assert!((out.state.trace() - 1.0).abs() < 1e-10);
        assert!((out.p_transmit + out.p_scatter - 1.0).abs() < 1e-10);
    }
}

#[test]
fn transmitted_fidelity_falls_with_blockade_radius() {
    let geo = ExperimentGeometry::default();
    let params = PropagationParams::from_optical_depth(18.0, 25.0, 19.0, 0.0, geo.profile());
    let grid = uniform_grid(2.0 * geo.cloud_half_length, 101).unwrap();
    let state = stored_spinwave(&geo.profile(), grid.clone()).unwrap();
    let mut last = f64::INFINITY;
    for rb in [2.0, 4.0, 6.0, 8.0, 10.0, 14.0, 20.0] {
        let c6 = f64::powi(rb, 6) * 25.0 * 25.0 / 19.0;
        let ch = photon_channel(&grid, [0.0, 0.0], [0.0, 0.0], &GateCoupling::VanDerWaals { c6 }, &params).unwrap();
        let f = state_fidelity(&state, &ch).unwrap();
        assert!(f.transmitted < last, "F_p {} at r_b {rb} not below {last}", f.transmitted);
        last = f.transmitted;
    }
    assert!(last < 1e-2);
}

#[test]
fn position_resolving_scatter_matches_black_curve() {
    // Transmission without phase information plus fully position-resolving
    // scattering: every scattered photon destroys the coherence.
    let n = 101;
    let geo = ExperimentGeometry::default();
    let grid = uniform_grid(2.0 * geo.cloud_half_length, n).unwrap();
    let state = stored_spinwave(&geo.profile(), grid).unwrap();
    let t = 0.3f64;
    let transmit = vec![Complex64::new(t, 0.0); n];
    let scatter = (0..n)
        .map(|s| (0..n).map(|a| Complex64::new(if a == s { (1.0 - t * t).sqrt() } else { 0.0 }, 0.0)).collect())
        .collect();
    let ch = PhotonChannel { transmit, scatter };
    let kernel = AveragedKernel {
        weights: state.populations(),
        kernels: vec![ch.kernel()],
        excess_scatter: vec![1.0 - t * t],
    };
    let cfg = RetrievalConfig::default();
    let ns: Vec<f64> = (0..=6).map(|i| i as f64 * 0.5).collect();
    let model = retrieval_curve(&state, &kernel, &cfg, &ns).unwrap();
    let limits = limit_curves(&cfg, &model, 1.0);
    // The diagonal keeps the population-weighted self overlap Σ w².
    let diag: f64 = state.populations().iter().map(|w| w * w).sum();
    for (m, l) in model.iter().zip(&limits) {
        let expected = l.black * (1.0 - diag) + cfg.zero_source_efficiency() * diag;
        assert!((m.efficiency - expected).abs() < 1e-12);
        assert!((m.efficiency - l.black).abs() < 0.02 * cfg.zero_source_efficiency());
    }
}

#[test]
fn zero_source_retrieval_is_storage_decay() {
    let geo = ExperimentGeometry::default();
    let params = test_params(geo.profile());
    let grid = uniform_grid(2.0 * geo.cloud_half_length, 41).unwrap();
    let state = stored_spinwave(&geo.profile(), grid).unwrap();
    let ch = photon_channel(state.grid(), [0.0, 0.0], [0.0, 0.0], &GateCoupling::VanDerWaals { c6: 1e6 }, &params).unwrap();
    let kernel = AveragedKernel::on_axis(&state, &ch, &params).unwrap();
    let cfg = RetrievalConfig { base_efficiency: 0.37, ..Default::default() };
    let c = retrieval_curve(&state, &kernel, &cfg, &[0.0, 1.0]).unwrap();
    assert_eq!(c[0].efficiency, 0.37 * (-4.2f64 / 3.6).exp());
    assert!(c[1].efficiency < c[0].efficiency);
}

#[test]
fn grid_doubling_changes_fidelity_little() {
    let geo = ExperimentGeometry::default();
    let params = PropagationParams::from_optical_depth(18.0, 25.0, 19.0, 0.6, geo.profile());
    let coupling = GateCoupling::VanDerWaals { c6: 9.1e5 };
    let fid = |points| {
        let grid = uniform_grid(2.0 * geo.cloud_half_length, points).unwrap();
        let state = stored_spinwave(&geo.profile(), grid.clone()).unwrap();
        let ch = photon_channel(&grid, [0.0, 0.0], [0.0, 0.0], &coupling, &params).unwrap();
        state_fidelity(&state, &ch).unwrap().total
    };
    let (coarse, fine) = (fid(DEFAULT_GRID_POINTS), fid(2 * DEFAULT_GRID_POINTS - 1));
    assert!((coarse - fine).abs() < 1e-3, "{coarse} vs {fine}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_channels_preserve_trace(seed in any::<u64>(), n in 1usize..12, cells in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, n);
        let state = SpinWaveState::from_density_matrix((0..n).map(|i| i as f64).collect(), rho).unwrap();
        let ch = random_channel(&mut rng, n, cells);
        prop_assert!(ch.completeness_error() < 1e-12);
        let out = apply_channel(&state, &ch).unwrap();
        prop_assert!((out.state.trace() - 1.0).abs() < 1e-10);
        prop_assert!((out.p_transmit + out.p_scatter - 1.0).abs() < 1e-10);
        let f = state_fidelity(&state, &ch).unwrap();
        prop_assert!(f.total <= 1.0 + 1e-9 && f.total >= 0.0);
    }
}
