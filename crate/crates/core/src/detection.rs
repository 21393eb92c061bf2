//! Single-shot detection of a stored gate excitation from source photon counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::ensemble::{FieldResolution, PhotonStats};
use crate::{Error, Result};

/// One Poisson component of the count distribution given a stored excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
}

/// Detected-count statistics with and without a stored gate excitation.
///
/// With an excitation present the mean count depends on where the excitation
/// sits, so the present-hypothesis distribution is a Poisson mixture over
/// `components`; the single-mean model is the one-component case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountModel {
    pub mean_no_excitation: f64,
    pub mean_with_excitation: f64,
    pub p_excitation: f64,
    pub components: Vec<MixtureComponent>,
}

impl CountModel {
    pub fn new(mean_no_excitation: f64, mean_with_excitation: f64, p_excitation: f64) -> Result<Self> {
        let model = CountModel {
            mean_no_excitation,
            mean_with_excitation,
            p_excitation,
            components: vec![MixtureComponent {
                weight: 1.0,
                mean: mean_with_excitation,
            }],
        };
        model.validate()?;
        Ok(model)
    }

    /// Model whose present hypothesis is an equal-weight mixture over `means`.
    pub fn with_components(mean_no_excitation: f64, means: &[f64], p_excitation: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::Config("at least one mixture component required".into()));
        }
        let w = 1.0 / means.len() as f64;
        let components: Vec<_> = means
            .iter()
            .map(|&mean| MixtureComponent { weight: w, mean })
            .collect();
        let model = CountModel {
            mean_no_excitation,
            mean_with_excitation: means.iter().sum::<f64>() * w,
            p_excitation,
            components,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let m0 = self.mean_no_excitation;
        if !(m0.is_finite() && m0 >= 0.0) {
            return Err(Error::Config(format!("mean_no_excitation must be >= 0, got {m0}")));
        }
        if !(0.0..=1.0).contains(&self.p_excitation) {
            return Err(Error::Config(format!("p_excitation must be in [0, 1], got {}", self.p_excitation)));
        }
        let mut total = 0.0;
        for c in &self.components {
            if !(c.mean >= 0.0 && c.mean <= m0 * (1.0 + 1e-12) && c.weight >= 0.0) {
                return Err(Error::Config(format!(
                    "component mean {} must lie in [0, {m0}] with non-negative weight",
                    c.mean
                )));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("component weights sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Largest count worth tabulating.
    pub fn support_bound(&self) -> usize {
        let m = self.mean_no_excitation;
        (m + 12.0 * m.sqrt() + 30.0).ceil() as usize
    }

    pub fn absent_pmf(&self, n_max: usize) -> Vec<f64> {
        poisson_pmf(self.mean_no_excitation, n_max)
    }

    pub fn present_pmf(&self, n_max: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_max + 1];
        for c in &self.components {
            for (o, p) in out.iter_mut().zip(poisson_pmf(c.mean, n_max)) {
                *o += c.weight * p;
            }
        }
        out
    }

    /// Counts after a gate pulse: storage succeeds with `p_excitation`.
    pub fn gate_pulse_pmf(&self, n_max: usize) -> Vec<f64> {
        let p = self.p_excitation;
        self.absent_pmf(n_max)
            .into_iter()
            .zip(self.present_pmf(n_max))
            .map(|(a, b)| (1.0 - p) * a + p * b)
            .collect()
    }
}

/// `P(n)` for `n = 0..=n_max`.
pub fn poisson_pmf(mean: f64, n_max: usize) -> Vec<f64> {
    if mean == 0.0 {
        let mut v = vec![0.0; n_max + 1];
        v[0] = 1.0;
        return v;
    }
    let ln_mean = mean.ln();
    (0..=n_max)
        .map(|n| (n as f64 * ln_mean - mean - ln_factorial(n as u64)).exp())
        .collect()
}

/// Count histogram; bins hold (possibly fractional) numbers of shots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<f64>,
}

impl Histogram {
    pub fn from_counts(counts: &[u64]) -> Self {
        let max = counts.iter().copied().max().unwrap_or(0) as usize;
        let mut bins = vec![0.0; max + 1];
        for &c in counts {
            bins[c as usize] += 1.0;
        }
        Histogram { bins }
    }

    /// Expected histogram of `shots` draws from `pmf`.
    pub fn expected(pmf: &[f64], shots: f64) -> Self {
        Histogram {
            bins: pmf.iter().map(|p| p * shots).collect(),
        }
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        let t = self.total();
        if t == 0.0 {
            return 0.0;
        }
        self.bins.iter().enumerate().map(|(n, w)| n as f64 * w).sum::<f64>() / t
    }

    /// Normalized probabilities, padded to `len` bins.
    pub fn probabilities(&self, len: usize) -> Vec<f64> {
        let t = self.total();
        let mut p: Vec<f64> = self.bins.iter().map(|w| if t > 0.0 { w / t } else { 0.0 }).collect();
        p.resize(len.max(p.len()), 0.0);
        p
    }

    fn padded(&self, len: usize) -> Vec<f64> {
        let mut b = self.bins.clone();
        b.resize(len.max(b.len()), 0.0);
        b
    }
}

const SHOTS_PER_STREAM: usize = 1 << 14;

fn draw_stream(seed: u64, stream: u64, shots: usize, mut sample: impl FnMut(&mut ChaCha8Rng) -> u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..shots).map(|_| sample(&mut rng)).collect()
}

fn poisson_draw(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Simulated count histograms `(gate pulse, no gate pulse)` for `shots`
/// repetitions each. Shots are split into fixed-size seeded streams so the
/// result does not depend on the thread count.
pub fn count_histograms(model: &CountModel, shots: usize, seed: u64) -> Result<(Histogram, Histogram)> {
    model.validate()?;
    if shots == 0 {
        return Err(Error::Config("shots must be >= 1".into()));
    }
    let streams = shots.div_ceil(SHOTS_PER_STREAM);
    let chunk = |s: usize| SHOTS_PER_STREAM.min(shots - s * SHOTS_PER_STREAM);
    let cumulative: Vec<f64> = model
        .components
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.weight;
            Some(*acc)
        })
        .collect();
    let gate: Vec<u64> = (0..streams)
        .into_par_iter()
        .map(|s| {
            draw_stream(seed, 2 * s as u64, chunk(s), |rng| {
                if rand::Rng::random_bool(rng, model.p_excitation) {
                    let u: f64 = rand::Rng::random(rng);
                    let i = cumulative.partition_point(|&c| c < u).min(model.components.len() - 1);
                    poisson_draw(model.components[i].mean, rng)
                } else {
                    poisson_draw(model.mean_no_excitation, rng)
                }
            })
        })
        .flatten_iter()
        .collect();
    let no_gate: Vec<u64> = (0..streams)
        .into_par_iter()
        .map(|s| draw_stream(seed, 2 * s as u64 + 1, chunk(s), |rng| poisson_draw(model.mean_no_excitation, rng)))
        .flatten_iter()
        .collect();
    Ok((Histogram::from_counts(&gate), Histogram::from_counts(&no_gate)))
}

/// Histograms attributed to "excitation present" and "excitation absent".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub present: Histogram,
    pub absent: Histogram,
    pub warnings: Vec<String>,
}

/// Splits a gate-pulse histogram using the known storage probability and
/// the no-excitation mean `mean_absent`.
pub fn separate_histograms(gate_pulse: &Histogram, p_excitation: f64, mean_absent: f64) -> Result<Separation> {
    if !(p_excitation > 0.0 && p_excitation <= 1.0) {
        return Err(Error::Domain(format!("p_excitation must be in (0, 1], got {p_excitation}")));
    }
    let shots = gate_pulse.total();
    if shots <= 0.0 {
        return Err(Error::Domain("empty histogram".into()));
    }
    let n_max = gate_pulse.bins.len().max(
        (mean_absent + 12.0 * mean_absent.sqrt() + 30.0).ceil() as usize,
    );
    let pmf = poisson_pmf(mean_absent, n_max);
    let absent = Histogram::expected(&pmf, shots);
    let bins = gate_pulse.padded(n_max + 1);
    let expected_mass = p_excitation * shots;
    let raw: Vec<f64> = bins
        .iter()
        .zip(&pmf)
        .map(|(h, p)| (h - (1.0 - p_excitation) * shots * p).max(0.0))
        .collect();
    let mass: f64 = raw.iter().sum();
    let mut warnings = Vec::new();
    if mass < 0.5 * expected_mass {
        warnings.push(format!(
            "separated component holds {mass:.1} shots, expected {expected_mass:.1}"
        ));
    }
    let present = if mass > 0.0 {
        Histogram {
            bins: raw.iter().map(|w| w * shots / mass).collect(),
        }
    } else {
        Histogram { bins: vec![0.0; raw.len()] }
    };
    if p_excitation < 1.0 {
        let se = (mean_absent.max(1.0) / expected_mass.max(1.0)).sqrt();
        if (present.mean() - mean_absent).abs() < 3.0 * se {
            warnings.push("present and absent components are indistinguishable".into());
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Separation {
        present,
        absent,
        warnings,
    })
}

/// How the two error probabilities are combined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityWeighting {
    /// Worst case over the two hypotheses.
    WorstCase,
    /// Accuracy with prior probability `p` of an excitation being present.
    Prior(f64),
}

/// Best threshold test "excitation present ⇔ count < threshold".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub fidelity: f64,
    pub threshold: u64,
    /// Probability of also calling "present" at a count equal to the
    /// threshold; non-zero only when splitting that bin beats every integer
    /// threshold.
    pub tie_fraction: f64,
    /// Best value over integer thresholds only.
    pub integer_fidelity: f64,
}

/// Detection fidelity of two count histograms. When no threshold test beats
/// a fair coin the fidelity is 0.5 and `threshold` still names the best test.
pub fn detection_fidelity(present: &Histogram, absent: &Histogram, weighting: FidelityWeighting) -> Result<FidelityResult> {
    let len = present.bins.len().max(absent.bins.len());
    if present.total() <= 0.0 || absent.total() <= 0.0 {
        return Err(Error::Domain("histograms must be non-empty".into()));
    }
    let pp = present.probabilities(len);
    let pa = absent.probabilities(len);
    let prior = match weighting {
        FidelityWeighting::WorstCase => None,
        FidelityWeighting::Prior(p) if (0.0..=1.0).contains(&p) => Some(p),
        FidelityWeighting::Prior(p) => return Err(Error::Domain(format!("prior must be in [0, 1], got {p}"))),
    };
    let score = |a: f64, b: f64| match prior {
        None => a.min(b),
        Some(p) => p * a + (1.0 - p) * b,
    };
    let mut best = FidelityResult {
        fidelity: f64::NEG_INFINITY,
        threshold: 0,
        tie_fraction: 0.0,
        integer_fidelity: f64::NEG_INFINITY,
    };
    // cp = P(n < τ | present), ca = P(n < τ | absent)
    let mut cp = 0.0;
    let mut ca = 0.0;
    for tau in 0..=len {
        let a0 = cp;
        let b0 = 1.0 - ca;
        let s0 = score(a0, b0);
        if s0 > best.integer_fidelity + 1e-15 {
            best.integer_fidelity = s0;
        }
        let (mut value, mut q) = (s0, 0.0);
        if tau < len && prior.is_none() && a0 < b0 {
            let (dp, da) = (pp[tau], pa[tau]);
            if dp + da > 0.0 {
                // q = 1 is the next integer threshold.
                let q_star = (b0 - a0) / (dp + da);
                let v = (a0 + q_star * dp).min(b0 - q_star * da);
                if q_star < 1.0 && v > value {
                    value = v;
                    q = q_star;
                }
            }
        }
        if value > best.fidelity + 1e-15 {
            best.fidelity = value;
            best.threshold = tau as u64;
            best.tie_fraction = q;
        }
        if tau < len {
            cp += pp[tau];
            ca += pa[tau];
        }
    }
    // A fair coin scores 0.5 under either weighting.
    best.fidelity = best.fidelity.clamp(0.5, 1.0);
    best.integer_fidelity = best.integer_fidelity.clamp(0.0, 1.0);
    Ok(best)
}

/// Exact fidelity of a count model (the infinite-shot limit).
pub fn model_fidelity(model: &CountModel, weighting: FidelityWeighting) -> Result<FidelityResult> {
    model.validate()?;
    let n = model.support_bound();
    let present = Histogram { bins: model.present_pmf(n) };
    let absent = Histogram { bins: model.absent_pmf(n) };
    detection_fidelity(&present, &absent, weighting)
}

/// Count model for beam-averaged `t0` and per-gate-position `t1` values.
pub fn count_model(t0: f64, t1_per_gate: &[f64], stats: &PhotonStats) -> Result<CountModel> {
    stats.validate()?;
    let mean_t1 = t1_per_gate.iter().sum::<f64>() / t1_per_gate.len().max(1) as f64;
    let scale = stats.detector_efficiency * stats.source_photons() * stats.accumulation_factor(t0, mean_t1);
    let means: Vec<f64> = t1_per_gate.iter().map(|t| scale * t.min(t0)).collect();
    CountModel::with_components(scale * t0, &means, stats.storage_probability())
}

/// One row of a fidelity scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub field: f64,
    pub rate: f64,
    pub fidelity: f64,
    pub threshold: u64,
    pub mean_absent: f64,
    pub mean_present: f64,
}

/// How fidelities are evaluated in a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityOptions {
    pub weighting: FidelityWeighting,
    /// Simulate this many shots per histogram and separate them as in the
    /// experiment; `None` uses the exact model distributions.
    pub shots: Option<usize>,
    pub seed: u64,
}

impl Default for FidelityOptions {
    fn default() -> Self {
        FidelityOptions {
            weighting: FidelityWeighting::WorstCase,
            shots: None,
            seed: 0,
        }
    }
}

/// Fidelity for a given count model, following the measurement procedure
/// when `options.shots` is set.
pub fn evaluate_fidelity(model: &CountModel, options: &FidelityOptions) -> Result<FidelityResult> {
    match options.shots {
        None => model_fidelity(model, options.weighting),
        Some(shots) => {
            let (gate, no_gate) = count_histograms(model, shots, options.seed)?;
            let sep = separate_histograms(&gate, model.p_excitation, no_gate.mean())?;
            detection_fidelity(&sep.present, &no_gate, options.weighting)
        }
    }
}

/// Fidelity at every `(field, rate)` pair. `transmissions(field)` returns the
/// beam-averaged `T0` and per-gate `T1` values; fidelities are smoothed over
/// the field resolution stencil.
pub fn fidelity_scan<F>(
    fields: &[f64],
    rates: &[f64],
    stats: &PhotonStats,
    resolution: &FieldResolution,
    options: &FidelityOptions,
    mut transmissions: F,
) -> Result<Vec<FidelityPoint>>
where
    F: FnMut(f64) -> Result<(f64, Vec<f64>)>,
{
    if fields.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("field grid must be sorted".into()));
    }
    let stencil = resolution.stencil();
    let mut rows = Vec::with_capacity(fields.len() * rates.len());
    for &field in fields {
        let nodes: Vec<(f64, f64, Vec<f64>)> = stencil
            .iter()
            .map(|&(dx, w)| transmissions(field + dx).map(|(t0, t1)| (w, t0, t1)))
            .collect::<Result<_>>()?;
        for &rate in rates {
            let s = PhotonStats {
                source_rate: rate,
                ..*stats
            };
            let mut row = FidelityPoint {
                field,
                rate,
                fidelity: 0.0,
                threshold: 0,
                mean_absent: 0.0,
                mean_present: 0.0,
            };
            let mut best_weight = -1.0;
            for (w, t0, t1) in &nodes {
                let model = count_model(*t0, t1, &s)?;
                let f = evaluate_fidelity(&model, options)?;
                row.fidelity += w * f.fidelity;
                row.mean_absent += w * model.mean_no_excitation;
                row.mean_present += w * model.mean_with_excitation;
                if *w > best_weight {
                    best_weight = *w;
                    row.threshold = f.threshold;
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}
