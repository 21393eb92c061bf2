//! Scan pipelines. Each returns its tables in memory; writing is left to
//! [`crate::output`].

use std::collections::BTreeMap;

use forster_core::atomic_states::{channel_set, forster_defect, resonance_fields, PairSystem};
use forster_core::detection::{
    count_histograms, count_model, fidelity_scan, separate_histograms, FidelityOptions, Histogram,
};
use forster_core::ensemble::{
    average_over_samples, field_scan, nondestructive_limit, optical_gain, EnsembleSamples, GainPoint, PhotonStats,
};
use forster_core::interaction::{blockade_radius, GateCoupling, InteractionParams, ResolvedChannel};
use forster_core::propagation::time_domain::{transmission_time_oracle, PulseSpec};
use forster_core::propagation::{transmission_freq, DensityProfile, PropagationParams, StoredGate};
use forster_core::spinwave::{
    blockade_overlap_fraction, limit_curves, photon_channel, retrieval_curve, state_fidelity, stored_spinwave,
    uniform_grid, AveragedKernel, RetrievalConfig, RetrievalPoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{RunConfig, ScanKind};
use crate::error::{Context, RunError, RunResult};

/// Gain maxima must rise this far (relative to the largest gain) above the
/// surrounding minima to count.
pub const PEAK_PROMINENCE: f64 = 0.01;

/// Allowed end-of-pulse transmission drop inside the non-destructive window.
pub const MAX_DROP: f64 = 0.1;

/// Source paths per gate position in the fidelity scan.
const FIDELITY_SOURCES_PER_GATE: usize = 10;

/// A CSV table held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Everything a scan produces apart from run metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanOutput {
    pub tables: Vec<Table>,
    pub headline: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

impl ScanOutput {
    fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.headline.insert(key.to_string(), value.into());
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Everything derived from the configuration that several scans share.
pub struct Setup {
    pub system: PairSystem,
    pub interaction: InteractionParams,
    pub params: PropagationParams,
}

impl Setup {
    pub fn new(config: &RunConfig) -> RunResult<Self> {
        let (_, system) = config.pair_system()?;
        let interaction = InteractionParams::from_system(&system).context(|| "pair system".into())?;
        let params = config
            .geometry
            .source_medium(&config.optics)
            .context(|| "source medium".into())?;
        Ok(Setup {
            system,
            interaction,
            params,
        })
    }

    fn warnings(&self) -> Vec<String> {
        self.params.validity_warnings(self.interaction.gamma_p)
    }
}

/// Field grid of the run, falling back to the preset's resonance.
pub fn field_values(config: &RunConfig, system: &PairSystem) -> Vec<f64> {
    if let Some(g) = &config.field_grid {
        return g.values();
    }
    match system.reference_resonance {
        Some(f) => (0..101).map(|i| (f - 0.1 + 0.002 * i as f64).max(0.0)).collect(),
        None => (0..126).map(|i| 0.002 * i as f64).collect(),
    }
}

pub fn run_scan(scan: ScanKind, config: &RunConfig) -> RunResult<ScanOutput> {
    match scan {
        ScanKind::Starkmap => starkmap(config),
        ScanKind::GainScan => gain_scan(config),
        ScanKind::FidelityScan => fidelity(config),
        ScanKind::Retrieval => retrieval(config),
        ScanKind::OracleCheck => oracle_check(config),
    }
}

pub fn starkmap(config: &RunConfig) -> RunResult<ScanOutput> {
    let (_, system) = config.pair_system()?;
    let fields = field_values(config, &system);
    let active = channel_set(&system.pair).context(|| "channel set".into())?;
    let is_active = |ch| active.iter().any(|a| a == ch);
    let mut out = ScanOutput::default();
    let mut map = Table::new("starkmap.csv", &["field", "channel", "label", "active", "defect"]);
    for &f in &fields {
        for (i, ch) in system.pair.channels.iter().enumerate() {
            map.push(vec![
                num(f),
                i.to_string(),
                ch.label(),
                is_active(ch).to_string(),
                num(forster_defect(ch, f)),
            ]);
        }
    }
    let field_max = fields.last().copied().unwrap_or(0.0);
    let roots = resonance_fields(&system.pair, field_max).context(|| "resonance search".into())?;
    // Every root must sit in a grid interval where its channel's defect
    // changes sign, and every sign change must hold a root.
    let mut brackets = Vec::new();
    for (c, ch) in active.iter().enumerate() {
        for w in fields.windows(2) {
            let (a, b) = (forster_defect(ch, w[0]), forster_defect(ch, w[1]));
            if a == 0.0 || a.signum() != b.signum() {
                brackets.push((c, w[0], w[1]));
            }
        }
    }
    let mut res = Table::new("resonances.csv", &["field", "channel", "label", "grid_lower", "grid_upper"]);
    let mut matched = 0;
    for r in &roots {
        let bracket = brackets
            .iter()
            .find(|(c, lo, hi)| *c == r.channel && r.field >= *lo && r.field <= *hi);
        if bracket.is_some() {
            matched += 1;
        }
        let (lo, hi) = bracket.map(|b| (num(b.1), num(b.2))).unwrap_or_default();
        res.push(vec![num(r.field), r.channel.to_string(), active[r.channel].label(), lo, hi]);
    }
    let consistent = matched == roots.len() && brackets.len() == roots.len();
    if !consistent {
        out.warnings.push(format!(
            "grid sign changes ({}) and resonance roots ({}) disagree",
            brackets.len(),
            roots.len()
        ));
    }
    out.set("resonance_fields", roots.iter().map(|r| r.field).collect::<Vec<_>>());
    out.set("grid_roots_consistent", consistent);
    out.set("active_channels", active.len());
    out.tables = vec![map, res];
    Ok(out)
}

/// Indices of gain maxima with prominence above `PEAK_PROMINENCE · max`.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_prominence = PEAK_PROMINENCE * (top - floor).max(top.abs());
    let mut peaks = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let v = values[i];
        if !(v > values[i - 1] && v >= values[i + 1]) {
            continue;
        }
        // Lowest point before reaching higher ground on either side. Equal
        // ground to the left counts as higher so twin peaks count once.
        let side = |range: &mut dyn Iterator<Item = usize>, stop: &dyn Fn(f64) -> bool| {
            let mut low = v;
            for j in range {
                if stop(values[j]) {
                    break;
                }
                low = low.min(values[j]);
            }
            low
        };
        let left = side(&mut (0..i).rev(), &|x| x >= v);
        let right = side(&mut (i + 1..values.len()), &|x| x > v);
        if v - left.max(right) > min_prominence {
            peaks.push(i);
        }
    }
    peaks
}

/// Ordinary least squares `y = a x + b` with coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

fn gain_samples(config: &RunConfig, sources_per_gate: usize) -> RunResult<EnsembleSamples> {
    config
        .geometry
        .draw_samples(config.samples.div_ceil(sources_per_gate), sources_per_gate, config.seed)
        .context(|| "ensemble sampling".into())
}

pub fn gain_scan(config: &RunConfig) -> RunResult<ScanOutput> {
    let setup = Setup::new(config)?;
    let fields = field_values(config, &setup.system);
    let samples = gain_samples(config, 1)?;
    let scan = |fields: &[f64]| {
        field_scan(&samples, &setup.params, &setup.interaction, fields, &config.stats, &config.resolution)
            .context(|| "gain scan".into())
    };
    let points = scan(&fields)?;
    let zero = scan(&[0.0])?[0];
    let mut out = ScanOutput {
        warnings: setup.warnings(),
        ..Default::default()
    };

    let mut table = Table::new("gain_scan.csv", &["field", "gain", "gain_error", "t0", "t1"]);
    for p in &points {
        table.push(vec![num(p.field), num(p.gain), num(p.gain_error), num(p.t0), num(p.t1)]);
    }
    let gains: Vec<f64> = points.iter().map(|p| p.gain).collect();
    let maxima = local_maxima(&gains);
    let peak = points
        .iter()
        .copied()
        .max_by(|a, b| a.gain.total_cmp(&b.gain))
        .expect("non-empty field grid");

    // Fields between the outer maxima where the gain drops below its
    // field-free value.
    let dips: Vec<f64> = match (maxima.first(), maxima.last()) {
        (Some(&a), Some(&b)) if b > a => points[a..=b]
            .iter()
            .filter(|p| p.gain < zero.gain)
            .map(|p| p.field)
            .collect(),
        _ => Vec::new(),
    };

    let (rate_table, window) = gain_vs_rate(config, &peak, &zero, &mut out)?;
    out.tables = vec![table, rate_table];
    out.set("peak_gain", peak.gain);
    out.set("peak_field", peak.field);
    out.set("zero_field_gain", zero.gain);
    out.set("local_maxima", maxima.len());
    out.set("maxima_fields", maxima.iter().map(|&i| points[i].field).collect::<Vec<_>>());
    out.set("fields_below_zero_field_gain", dips.len());
    out.set("nondestructive_limit", window);
    Ok(out)
}

/// Gain against source rate at the peak and at zero field.
fn gain_vs_rate(
    config: &RunConfig,
    peak: &GainPoint,
    zero: &GainPoint,
    out: &mut ScanOutput,
) -> RunResult<(Table, f64)> {
    let window = nondestructive_limit(peak.t0, peak.t1, &config.stats, MAX_DROP).context(|| "window".into())?;
    let mut table = Table::new(
        "gain_vs_rate.csv",
        &["rate", "gain_resonance", "gain_zero_field", "enhancement", "in_window"],
    );
    let rates = config.rate_grid.values();
    let mut resonant = Vec::new();
    let mut min_enhancement = f64::INFINITY;
    for &rate in &rates {
        let stats = PhotonStats {
            source_rate: rate,
            ..config.stats
        };
        let g_res = optical_gain(peak.t0, peak.t1.min(peak.t0), &stats).context(|| format!("gain at {rate}"))?;
        let g_zero = optical_gain(zero.t0, zero.t1.min(zero.t0), &stats).context(|| format!("gain at {rate}"))?;
        let enhancement = if g_zero > 0.0 { g_res / g_zero } else { f64::INFINITY };
        let inside = rate <= window;
        if inside && rate > 0.0 {
            min_enhancement = min_enhancement.min(enhancement);
        }
        resonant.push(g_res);
        table.push(vec![num(rate), num(g_res), num(g_zero), num(enhancement), inside.to_string()]);
    }
    if rates.len() >= 2 {
        let (slope, intercept, r2) = linear_fit(&rates, &resonant);
        let max = resonant.iter().cloned().fold(0.0, f64::max);
        out.set("gain_rate_slope", slope);
        out.set("gain_rate_intercept", intercept);
        out.set("gain_rate_intercept_fraction", if max > 0.0 { intercept.abs() / max } else { 0.0 });
        out.set("gain_rate_r2", r2);
    }
    if min_enhancement.is_finite() {
        out.set("min_enhancement_in_window", min_enhancement);
    }
    if rates.iter().any(|&r| r > window) {
        out.warnings.push(format!(
            "rates above {window:.3} µs⁻¹ lie outside the non-destructive window"
        ));
    }
    Ok((table, window))
}

pub fn fidelity(config: &RunConfig) -> RunResult<ScanOutput> {
    let setup = Setup::new(config)?;
    let fields = field_values(config, &setup.system);
    let rates = config.rate_grid.values();
    let samples = gain_samples(config, FIDELITY_SOURCES_PER_GATE)?;
    let transmissions = |field: f64| {
        average_over_samples(&samples, &setup.params, &setup.interaction.coupling_at(field))
            .map(|a| (a.t0, a.per_gate.iter().map(|g| g.1).collect::<Vec<_>>()))
    };
    let options = FidelityOptions {
        weighting: config.detection.weighting,
        shots: config.detection.shots,
        seed: config.seed,
    };
    let rows = fidelity_scan(&fields, &rates, &config.stats, &config.resolution, &options, transmissions)
        .context(|| "fidelity scan".into())?;
    let mut out = ScanOutput {
        warnings: setup.warnings(),
        ..Default::default()
    };
    let mut table = Table::new(
        "fidelity_scan.csv",
        &["field", "rate", "fidelity", "threshold", "mean_absent", "mean_present"],
    );
    for r in &rows {
        table.push(vec![
            num(r.field),
            num(r.rate),
            num(r.fidelity),
            r.threshold.to_string(),
            num(r.mean_absent),
            num(r.mean_present),
        ]);
    }
    let best = rows
        .iter()
        .copied()
        .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
        .expect("non-empty scan");

    // Histograms at the best point, separated as in the measurement.
    let (t0, t1) = transmissions(best.field).context(|| "peak transmissions".into())?;
    let stats = PhotonStats {
        source_rate: best.rate,
        ..config.stats
    };
    let model = count_model(t0, &t1, &stats).context(|| "count model".into())?;
    let (gate, no_gate) =
        count_histograms(&model, config.detection.histogram_shots, config.seed).context(|| "histograms".into())?;
    let sep = separate_histograms(&gate, model.p_excitation, no_gate.mean()).context(|| "separation".into())?;
    out.warnings.extend(sep.warnings.iter().cloned());
    let len = [&gate, &no_gate, &sep.present, &sep.absent]
        .iter()
        .map(|h| h.bins.len())
        .max()
        .unwrap_or(0);
    let bin = |h: &Histogram, i: usize| num(h.bins.get(i).copied().unwrap_or(0.0));
    let mut hist = Table::new(
        "histogram.csv",
        &["count", "shots_no_gate", "shots_gate_pulse", "shots_present_est", "shots_absent_est"],
    );
    for i in 0..len {
        hist.push(vec![
            i.to_string(),
            bin(&no_gate, i),
            bin(&gate, i),
            bin(&sep.present, i),
            bin(&sep.absent, i),
        ]);
    }
    out.tables = vec![table, hist];
    out.set("peak_fidelity", best.fidelity);
    out.set("peak_fidelity_field", best.field);
    out.set("peak_fidelity_rate", best.rate);
    out.set("peak_fidelity_threshold", best.threshold);
    Ok(out)
}

/// Resonant field used by the retrieval scan.
pub fn resonance_field(config: &RunConfig, system: &PairSystem) -> RunResult<f64> {
    config.resonance_field.or(system.reference_resonance).ok_or_else(|| {
        RunError::Config(format!(
            "pair system `{}` has no reference resonance; set resonance_field",
            system.name
        ))
    })
}

/// Linear interpolation of `y(x)` for sorted `x`; `None` outside the range.
pub fn interpolate(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    if x.is_empty() || at < x[0] || at > x[x.len() - 1] {
        return None;
    }
    let i = x.partition_point(|&v| v < at);
    if i == 0 || x[i] == at {
        return Some(y[i]);
    }
    let t = (at - x[i - 1]) / (x[i] - x[i - 1]);
    Some(y[i - 1] + t * (y[i] - y[i - 1]))
}

/// Largest relative efficiency difference between two retrieval curves at
/// equal mean scattered photon number, over their common range.
pub fn collapse_deviation(a: &[RetrievalPoint], b: &[RetrievalPoint]) -> f64 {
    let bx: Vec<f64> = b.iter().map(|p| p.n_scattered).collect();
    let by: Vec<f64> = b.iter().map(|p| p.efficiency).collect();
    a.iter()
        .filter_map(|p| interpolate(&bx, &by, p.n_scattered).map(|e| ((p.efficiency - e) / e).abs()))
        .fold(0.0, f64::max)
}

/// Blockade radii for the per-photon fidelity table, µm.
pub const FIDELITY_RADII: [f64; 10] = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0];

pub fn retrieval(config: &RunConfig) -> RunResult<ScanOutput> {
    let setup = Setup::new(config)?;
    let field = resonance_field(config, &setup.system)?;
    let rcfg = RetrievalConfig {
        seed: config.seed,
        ..config.retrieval
    };
    let geo = &config.geometry;
    let grid = uniform_grid(2.0 * geo.cloud_half_length, rcfg.grid_points).context(|| "spin-wave grid".into())?;
    let initial = stored_spinwave(&geo.profile(), grid).context(|| "stored spin wave".into())?;
    let means = config.source_means.values();

    let resonant = setup.interaction.coupling_at(field);
    let zero = GateCoupling::VanDerWaals {
        c6: setup.interaction.c6_reference,
    };
    let curves: Vec<Vec<RetrievalPoint>> = [&resonant, &zero]
        .iter()
        .map(|coupling| {
            let kernel = AveragedKernel::build(&initial, &setup.params, coupling, geo, &rcfg)?;
            retrieval_curve(&initial, &kernel, &rcfg, &means)
        })
        .collect::<forster_core::Result<_>>()
        .context(|| "retrieval kernels".into())?;

    let c6_eff = resonant.coefficient(setup.params.omega).norm();
    let r_b = blockade_radius(c6_eff, setup.params.gamma, setup.params.omega_rabi)
        .context(|| "blockade radius".into())?;
    let limits = limit_curves(&rcfg, &curves[0], blockade_overlap_fraction(geo, r_b));

    let mut table = Table::new("retrieval.csv", &["n_in_mean", "n_scattered_mean", "efficiency", "model_variant"]);
    for (name, curve) in [("resonance", &curves[0]), ("zero-field", &curves[1])] {
        for p in curve {
            table.push(vec![num(p.n_in), num(p.n_scattered), num(p.efficiency), name.into()]);
        }
    }
    for (name, pick) in [
        ("black", (|l: &forster_core::spinwave::LimitPoint| l.black) as fn(&_) -> f64),
        ("dashed", |l| l.dashed),
        ("dotted", |l| l.dotted),
    ] {
        for l in &limits {
            table.push(vec![num(l.n_in), num(l.n_scattered), num(pick(l)), name.into()]);
        }
    }

    let fid = fidelity_vs_rb(&setup.params, &initial)?;

    let mut out = ScanOutput {
        warnings: setup.warnings(),
        ..Default::default()
    };
    let res = &curves[0];
    let xs: Vec<f64> = res.iter().map(|p| p.n_scattered).collect();
    let ys: Vec<f64> = res.iter().map(|p| p.efficiency).collect();
    if let Some(e) = interpolate(&xs, &ys, 1.0) {
        out.set("retrieval_at_one_scattered", e);
        out.set("retrieval_at_one_scattered_relative", e / rcfg.zero_source_efficiency());
    } else {
        out.warnings.push("source_means do not reach one scattered photon".into());
    }
    out.set("resonance_field", field);
    out.set("blockade_radius", r_b);
    out.set("max_n_scattered", xs.iter().cloned().fold(0.0, f64::max));
    out.set("collapse_deviation", collapse_deviation(&curves[0], &curves[1]));
    out.set("zero_source_efficiency", rcfg.zero_source_efficiency());
    out.set("scatter_per_photon_resonance", res.last().map_or(0.0, |p| if p.n_in > 0.0 { p.n_scattered / p.n_in } else { 0.0 }));
    out.tables = vec![table, fid];
    Ok(out)
}

/// Per-photon fidelity of the stored spin wave on the beam axis for a range
/// of blockade radii.
fn fidelity_vs_rb(
    params: &PropagationParams,
    initial: &forster_core::spinwave::SpinWaveState,
) -> RunResult<Table> {
    let rows: Vec<Vec<String>> = FIDELITY_RADII
        .par_iter()
        .map(|&r_b| {
            let c6 = r_b.powi(6) * params.omega_rabi.powi(2) / params.gamma;
            let channel = photon_channel(initial.grid(), [0.0, 0.0], [0.0, 0.0], &GateCoupling::VanDerWaals { c6 }, params)?;
            let f = state_fidelity(initial, &channel)?;
            Ok(vec![num(r_b), num(f.total), num(f.transmitted), num(f.scattered)])
        })
        .collect::<forster_core::Result<_>>()
        .context(|| "per-photon fidelity".into())?;
    let mut t = Table::new("fidelity_vs_rb.csv", &["blockade_radius", "fidelity", "fidelity_transmitted", "fidelity_scattered"]);
    t.rows = rows;
    Ok(t)
}

/// One randomized comparison of the two transmission solvers.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub params: PropagationParams,
    pub gate: StoredGate,
    pub offset: [f64; 2],
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

/// Random media with `γ_s, γ_p, |ω| ≤ 0.01·min(Ω, γ)` and short clouds so the
/// time-domain grid stays small.
pub fn oracle_cases(count: usize, seed: u64) -> Vec<OracleCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let omega_rabi = log_uniform(&mut rng, 10.0, 40.0);
            let gamma = log_uniform(&mut rng, 10.0, 30.0);
            let small = 0.01 * omega_rabi.min(gamma);
            let profile = if rng.random_bool(0.5) {
                DensityProfile::Uniform {
                    half_length: log_uniform(&mut rng, 3.0, 6.0),
                }
            } else {
                DensityProfile::gaussian(log_uniform(&mut rng, 1.5, 3.0))
            };
            let od = log_uniform(&mut rng, 1.0, 8.0);
            let gamma_s = log_uniform(&mut rng, 1e-3 * small, small);
            let mut params = PropagationParams::from_optical_depth(od, omega_rabi, gamma, gamma_s, profile);
            params.omega = rng.random_range(-small..small);
            params.quadrature.rel_tol = 1e-9;
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let defect = sign * log_uniform(&mut rng, 1.0, 100.0);
            let c3 = log_uniform(&mut rng, 300.0, 3e4);
            let gamma_p = log_uniform(&mut rng, 1e-3 * small, small);
            let gate = StoredGate {
                position: [rng.random_range(-1.0..1.0), 0.0, rng.random_range(-2.0..2.0)],
                coupling: GateCoupling::Forster {
                    channels: vec![ResolvedChannel { c3, defect }],
                    gamma_p,
                },
            };
            let offset = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            OracleCase { params, gate, offset }
        })
        .collect()
}

pub fn oracle_check(config: &RunConfig) -> RunResult<ScanOutput> {
    let cases = oracle_cases(config.oracle.cases, config.seed);
    let results: Vec<(f64, f64)> = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let fd = transmission_freq(c.offset, Some(&c.gate), &c.params)?;
            let td = transmission_time_oracle(c.offset, Some(&c.gate), &c.params, &PulseSpec::for_params(&c.params))?;
            log::info!("oracle case {i}: {} vs {}", fd.intensity, td.intensity);
            Ok((fd.intensity, td.intensity))
        })
        .collect::<forster_core::Result<_>>()
        .context(|| "oracle comparison".into())?;
    let mut table = Table::new(
        "oracle_check.csv",
        &[
            "case", "profile", "half_length", "optical_depth", "omega_rabi", "gamma", "gamma_s", "omega", "c3",
            "defect", "gamma_p", "gate_x", "gate_z", "offset_x", "offset_y", "i_freq", "i_time", "abs_diff",
        ],
    );
    let mut max_diff: f64 = 0.0;
    for (i, (c, (fd, td))) in cases.iter().zip(&results).enumerate() {
        let (profile, half) = match c.params.profile {
            DensityProfile::Uniform { half_length } => ("uniform", half_length),
            DensityProfile::Gaussian { half_length, .. } => ("gaussian", half_length),
        };
        let GateCoupling::Forster { channels, gamma_p } = &c.gate.coupling else {
            unreachable!("oracle cases use Förster couplings")
        };
        let diff = (fd - td).abs();
        max_diff = max_diff.max(diff);
        table.push(vec![
            i.to_string(),
            profile.into(),
            num(half),
            num(c.params.optical_depth()),
            num(c.params.omega_rabi),
            num(c.params.gamma),
            num(c.params.gamma_s),
            num(c.params.omega),
            num(channels[0].c3),
            num(channels[0].defect),
            num(*gamma_p),
            num(c.gate.position[0]),
            num(c.gate.position[2]),
            num(c.offset[0]),
            num(c.offset[1]),
            num(*fd),
            num(*td),
            num(diff),
        ]);
    }
    let mut out = ScanOutput {
        tables: vec![table],
        ..Default::default()
    };
    out.set("max_abs_diff", max_diff);
    out.set("cases", cases.len());
    out.set("all_within_one_percent", max_diff < 0.01);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxima_need_prominence() {
        let v = [0.0, 1.0, 0.999, 1.0, 0.0, 2.0, 0.0];
        assert_eq!(local_maxima(&v), vec![1, 5]);
        assert!(local_maxima(&[1.0, 2.0, 3.0]).is_empty());
    }

    #[test]
    fn fit_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 0.5).collect();
        let (a, b, r2) = linear_fit(&x, &y);
        assert!((a - 2.0).abs() < 1e-12 && (b - 0.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_stays_inside_range() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 3.0, 7.0];
        assert_eq!(interpolate(&x, &y, 1.5), Some(5.0));
        assert_eq!(interpolate(&x, &y, 0.0), Some(1.0));
        assert_eq!(interpolate(&x, &y, 2.5), None);
    }

    #[test]
    fn identical_curves_collapse() {
        let c: Vec<RetrievalPoint> = (0..5)
            .map(|i| RetrievalPoint {
                n_in: i as f64,
                n_scattered: 0.5 * i as f64,
                efficiency: (-0.5 * i as f64).exp(),
            })
            .collect();
        assert_eq!(collapse_deviation(&c, &c), 0.0);
    }
}
