use forster_core::interaction::{GateCoupling, ResolvedChannel};
use forster_core::propagation::time_domain::{transmission_time_oracle, PulseSpec};
use forster_core::propagation::{
    eit_baseline, transmission_freq, DensityProfile, PropagationParams, StoredGate,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn random_case(rng: &mut ChaCha8Rng) -> (PropagationParams, StoredGate, [f64; 2]) {
    let omega_rabi = log_uniform(rng, 10.0, 40.0);
    let gamma = log_uniform(rng, 10.0, 30.0);
    let small = 0.01 * omega_rabi.min(gamma);
    let profile = if rng.random_bool(0.5) {
        DensityProfile::Uniform { half_length: log_uniform(rng, 3.0, 6.0) }
    } else {
        DensityProfile::gaussian(log_uniform(rng, 1.5, 3.0))
    };
    let mut p = PropagationParams::from_optical_depth(
        log_uniform(rng, 1.0, 8.0),
        omega_rabi,
        gamma,
        log_uniform(rng, 1e-3 * small, small),
        profile,
    );
    p.omega = rng.random_range(-small..small);
    p.quadrature.rel_tol = 1e-9;
    let defect = log_uniform(rng, 1.0, 100.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let gate = StoredGate {
        position: [rng.random_range(-1.0..1.0), 0.0, rng.random_range(-2.0..2.0)],
        coupling: GateCoupling::Forster {
            channels: vec![ResolvedChannel { c3: log_uniform(rng, 300.0, 3e4), defect }],
            gamma_p: log_uniform(rng, 1e-3 * small, small),
        },
    };
    let offset = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    (p, gate, offset)
}

#[test]
fn time_domain_oracle_matches_frequency_domain() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..10 {
        let (p, gate, offset) = random_case(&mut rng);
        let fd = transmission_freq(offset, Some(&gate), &p).unwrap();
        let td = transmission_time_oracle(offset, Some(&gate), &p, &PulseSpec::for_params(&p)).unwrap();
        let diff = (fd.intensity - td.intensity).abs();
        println!("case {case}: freq {:.6} time {:.6} diff {:.2e}", fd.intensity, td.intensity, diff);
        assert!(diff < 0.01, "case {case}: {p:?} {gate:?}");
    }
}

#[test]
fn time_domain_grid_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (p, gate, offset) = random_case(&mut rng);
    let pulse = PulseSpec::for_params(&p);
    let coarse = transmission_time_oracle(offset, Some(&gate), &p, &pulse).unwrap();
    let fine = transmission_time_oracle(offset, Some(&gate), &p, &pulse.refined(2.0)).unwrap();
    let change = (coarse.intensity - fine.intensity).abs() / fine.intensity;
    assert!(change < 0.003, "relative change {change}");
}

#[test]
fn baseline_decreases_with_dephasing() {
    let mut p = PropagationParams::from_optical_depth(10.0, 20.0, 19.0, 0.0, DensityProfile::gaussian(8.0));
    let mut last = eit_baseline(&p).unwrap().intensity;
    assert!((last - 1.0).abs() < 1e-12);
    for gs in [0.01, 0.1, 0.5, 2.0] {
        p.gamma_s = gs;
        let t = eit_baseline(&p).unwrap().intensity;
        assert!(t < last);
        last = t;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn passive_and_gate_only_absorbs(
        od in 0.5f64..30.0,
        omega_rabi in 5.0f64..50.0,
        gamma_s in 0.0f64..0.5,
        c3 in 100.0f64..1e5,
        defect in -200.0f64..200.0,
        gamma_p in 0.01f64..5.0,
        zg in -10.0f64..10.0,
        bx in -5.0f64..5.0,
    ) {
        let mut p = PropagationParams::from_optical_depth(od, omega_rabi, 19.0, gamma_s, DensityProfile::gaussian(6.0));
        p.cloud_radius = Some(10.0);
        let gate = StoredGate {
            position: [0.0, 0.0, zg],
            coupling: GateCoupling::Forster { channels: vec![ResolvedChannel { c3, defect }], gamma_p },
        };
        let with = transmission_freq([bx, 0.0], Some(&gate), &p).unwrap();
        let without = transmission_freq([bx, 0.0], None, &p).unwrap();
        prop_assert!(with.intensity >= 0.0 && with.intensity <= 1.0);
        prop_assert!((with.intensity + with.scatter_probability - 1.0).abs() < 1e-15);
        prop_assert!(with.intensity <= without.intensity * (1.0 + 1e-9));
        prop_assert!(gate.coupling.coefficient(p.omega).im >= 0.0);
    }
}
