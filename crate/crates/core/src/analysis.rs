//! Loss-landscape experiments: the parameter-count lower bound on CZ gates,
//! success ratios of random-start optimization, final-loss histograms and a
//! fit of the critical-point density model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adam::AdamOptions;
use crate::circuit::{evaluate, BlockStyle, CouplingMap, Entangler, Template};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::synthesis::{derive_seed, multi_start, stream_rng};
use crate::tensor::{haar_with_rng, Matrix};

const TAG_TARGET: u64 = 11;
const TAG_STARTS: u64 = 12;

/// Fewest CZ gates whose template has as many parameters as `U(4^n)` minus
/// phase: `ceil((4^n - 3n - 1) / 4)`.
pub fn tlb(n: u32) -> u64 {
    assert!(n >= 1, "at least one qubit");
    let num = 4u64.pow(n) - 3 * u64::from(n) - 1;
    num.div_ceil(4)
}

/// Expressivity `l / 2m`.
pub fn gamma(num_params: usize, m: usize) -> f64 {
    num_params as f64 / (2.0 * m as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// The template itself at random angles.
    SelfInstance,
    Haar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrCampaign {
    pub coupling: CouplingMap,
    pub entangler: Entangler,
    pub block_style: BlockStyle,
    pub k: usize,
    pub mode: TargetMode,
    pub num_targets: usize,
    pub starts_per_target: usize,
    /// Success cutoff on the distance (self-instance) or on the gap to the
    /// lowest distance seen for the target (haar).
    pub cutoff: f64,
    pub num_gd_iterations: usize,
    pub learning_rate: f64,
}

impl SrCampaign {
    pub fn new(coupling: CouplingMap, k: usize, mode: TargetMode) -> Self {
        Self {
            coupling,
            entangler: Entangler::CZ,
            block_style: BlockStyle::XYZ,
            k,
            mode,
            num_targets: 10,
            starts_per_target: 1000,
            cutoff: 1e-4,
            num_gd_iterations: 2000,
            learning_rate: 0.1,
        }
    }

    pub fn template(&self) -> Template {
        Template::new(self.coupling.clone(), self.entangler, self.block_style, self.k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSr {
    pub k: usize,
    pub target_id: usize,
    /// Successful runs.
    pub m: usize,
    /// Total runs.
    pub n: usize,
    pub sr: f64,
    pub d_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrResult {
    pub per_target: Vec<TargetSr>,
    pub mean: f64,
    pub std: f64,
}

fn campaign_target(c: &SrCampaign, template: &Template, seed: u64, t: usize) -> Result<Matrix> {
    let mut rng = stream_rng(derive_seed(seed, TAG_TARGET, c.k as u64), t as u64);
    match c.mode {
        TargetMode::SelfInstance => {
            let circuit = template.expand()?;
            let star: Vec<f64> = (0..circuit.num_params()).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            evaluate(&circuit, &star)
        }
        TargetMode::Haar => Ok(haar_with_rng(template.num_qubits(), &mut rng)),
    }
}

/// Final distances of every start on every target, target-major.
pub fn campaign_losses(c: &SrCampaign, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(c.cutoff > 0.0) {
        return Err(Error::InvalidArgument("cutoff must be positive".into()));
    }
    let template = c.template();
    let circuit = template.expand()?;
    let mut opts = AdamOptions::new(c.num_gd_iterations, c.learning_rate);
    if c.mode == TargetMode::SelfInstance {
        opts = opts.stop_below(c.cutoff);
    }
    (0..c.num_targets)
        .map(|t| {
            let spec = LossSpec::hilbert_schmidt(campaign_target(c, &template, seed, t)?);
            let runs = multi_start(&circuit, &spec, c.starts_per_target, &opts, derive_seed(seed, TAG_STARTS, (c.k * 1_000_003 + t) as u64))?;
            Ok(runs.into_iter().map(|r| r.best_raw).collect())
        })
        .collect()
}

pub fn run_sr_campaign(c: &SrCampaign, seed: u64) -> Result<SrResult> {
    let losses = campaign_losses(c, seed)?;
    let per_target: Vec<TargetSr> = losses
        .iter()
        .enumerate()
        .map(|(t, ds)| {
            let d_min = ds.iter().copied().fold(f64::INFINITY, f64::min);
            let m = ds
                .iter()
                .filter(|&&d| match c.mode {
                    TargetMode::SelfInstance => d < c.cutoff,
                    TargetMode::Haar => d - d_min <= c.cutoff,
                })
                .count();
            let n = ds.len();
            TargetSr { k: c.k, target_id: t, m, n, sr: if n == 0 { 0.0 } else { m as f64 / n as f64 }, d_min }
        })
        .collect();
    let (mean, std) = mean_std(per_target.iter().map(|t| t.sr));
    Ok(SrResult { per_target, mean, std })
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Counts of samples in equal-width bins on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn from_samples(samples: &[f64], bins: usize) -> Self {
        assert!(bins >= 1, "at least one bin");
        let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let mut counts = vec![0; bins];
        for &x in samples {
            let b = ((x.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Final raw losses of `starts` independent optimizations, binned.
pub fn loss_histogram(
    template: &Template,
    target: &Matrix,
    starts: usize,
    bins: usize,
    opts: &AdamOptions,
    seed: u64,
) -> Result<(Histogram, Vec<f64>)> {
    if starts == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let c = template.expand()?;
    let spec = LossSpec::hilbert_schmidt(target.clone());
    let losses: Vec<f64> = multi_start(&c, &spec, starts, opts, seed)?.into_iter().map(|r| r.best_raw).collect();
    Ok((Histogram::from_samples(&losses, bins), losses))
}

const DENSITY_GRID: usize = 10_000;

/// Log-spaced grid of `points` values on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

/// Default candidate set for the expressivity fit.
pub fn default_gamma_grid() -> Vec<f64> {
    log_grid(0.02, 2.0, 60)
}

/// Cell midpoints and normalized cell probabilities of
/// `exp(-mE/2) E^{l/2-m} (1-E)^l` with `l = 2 m gamma`.
fn density_cells(m: f64, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let l = 2.0 * m * gamma;
    let h = 1.0 / DENSITY_GRID as f64;
    let xs: Vec<f64> = (0..DENSITY_GRID).map(|i| (i as f64 + 0.5) * h).collect();
    let logs: Vec<f64> = xs.iter().map(|&e| -m * e / 2.0 + (l / 2.0 - m) * e.ln() + l * (-e).ln_1p()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|v| (v - top).exp()).collect();
    let z: f64 = w.iter().sum();
    (xs, w.into_iter().map(|v| v / z).collect())
}

/// Draws from the discretized density, uniformly within each grid cell.
pub fn sample_critical_density<R: Rng + ?Sized>(m: f64, gamma: f64, count: usize, rng: &mut R) -> Vec<f64> {
    let (xs, p) = density_cells(m, gamma);
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for v in &p {
        acc += v;
        cdf.push(acc);
    }
    let h = 1.0 / DENSITY_GRID as f64;
    (0..count)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|&c| c < u).min(xs.len() - 1);
            xs[i] + (rng.random::<f64>() - 0.5) * h
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalFit {
    pub m: f64,
    pub gamma_star: f64,
    pub neg_log_likelihood: f64,
    /// All mass sat in the first bin; `gamma_star` is then the grid maximum.
    pub degenerate: bool,
}

/// Multinomial maximum likelihood of the histogram over `gamma_grid`.
pub fn fit_critical_density(hist: &Histogram, m: f64, gamma_grid: &[f64]) -> Result<CriticalFit> {
    if !(m > 0.0) {
        return Err(Error::InvalidArgument("m must be positive".into()));
    }
    if hist.total() == 0 || gamma_grid.is_empty() {
        return Err(Error::InvalidArgument("empty histogram or grid".into()));
    }
    let top = gamma_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hist.counts[0] == hist.total() {
        return Ok(CriticalFit { m, gamma_star: top, neg_log_likelihood: 0.0, degenerate: true });
    }
    let bins = hist.counts.len();
    let mut best = (f64::INFINITY, top);
    for &g in gamma_grid {
        let (xs, p) = density_cells(m, g);
        let mut mass = vec![0.0; bins];
        for (x, v) in xs.iter().zip(&p) {
            let b = hist.edges[1..].partition_point(|&e| e <= *x).min(bins - 1);
            mass[b] += v;
        }
        let nll: f64 = hist
            .counts
            .iter()
            .zip(&mass)
            .filter(|(c, _)| **c > 0)
            .map(|(&c, &q)| -(c as f64) * q.max(1e-300).ln())
            .sum();
        if nll < best.0 {
            best = (nll, g);
        }
    }
    Ok(CriticalFit { m, gamma_star: best.1, neg_log_likelihood: best.0, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tlb_small_values() {
        assert_eq!(tlb(1), 0);
        assert_eq!(tlb(2), 3);
        assert_eq!(tlb(3), 14);
        assert_eq!(tlb(4), 61);
    }

    #[test]
    fn tlb_is_minimal_solution_of_inequality() {
        for n in 1..=6u32 {
            let t = tlb(n);
            let need = 4u64.pow(n) - 1;
            assert!(4 * t + 3 * u64::from(n) >= need);
            assert!(t == 0 || 4 * (t - 1) + 3 * u64::from(n) < need);
        }
    }

    #[test]
    fn gamma_of_4q_k21() {
        let t = Template::new(CouplingMap::connected(4).unwrap(), Entangler::CZ, BlockStyle::XYZ, 21);
        assert_eq!(t.num_params(), 138);
        assert!((gamma(138, 256) - 0.2695).abs() < 1e-3);
    }

    #[test]
    fn haar_sr_is_positive_and_deterministic() {
        let mut c = SrCampaign::new(CouplingMap::chain(2).unwrap(), 1, TargetMode::Haar);
        c.num_targets = 3;
        c.starts_per_target = 4;
        c.num_gd_iterations = 100;
        let a = run_sr_campaign(&c, 9).unwrap();
        assert!(a.per_target.iter().all(|t| t.sr > 0.0 && t.m >= 1));
        assert_eq!(a, run_sr_campaign(&c, 9).unwrap());
    }

    #[test]
    fn self_instance_low_k_is_easy() {
        let mut c = SrCampaign::new(CouplingMap::connected(3).unwrap(), 1, TargetMode::SelfInstance);
        c.num_targets = 2;
        c.starts_per_target = 10;
        c.num_gd_iterations = 1000;
        let r = run_sr_campaign(&c, 1).unwrap();
        assert!(r.mean >= 0.5, "{r:?}");
    }

    #[test]
    fn histogram_binning() {
        let h = Histogram::from_samples(&[0.0, 0.05, 0.5, 1.0], 10);
        assert_eq!(h.counts, vec![2, 0, 0, 0, 0, 1, 0, 0, 0, 1]);
        assert_eq!(Histogram::from_samples(&[0.3], 5).total(), 1);
    }

    #[test]
    fn single_start_histogram() {
        let t = Template::new(CouplingMap::chain(2).unwrap(), Entangler::CZ, BlockStyle::XYZ, 1);
        let target = crate::tensor::haar_random_unitary(2, 1).unwrap();
        let (h, xs) = loss_histogram(&t, &target, 1, 20, &AdamOptions::new(50, 0.1), 0).unwrap();
        assert_eq!((h.total(), xs.len()), (1, 1));
    }

    #[test]
    fn planted_gamma_is_recovered() {
        let grid = default_gamma_grid();
        let step = grid[1] / grid[0];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for g in [0.1, 0.3, 0.6] {
            let xs = sample_critical_density(1.0, g, 5000, &mut rng);
            let h = Histogram::from_samples(&xs, 50);
            let fit = fit_critical_density(&h, 1.0, &grid).unwrap();
            let ratio = fit.gamma_star / g;
            assert!(ratio < step && ratio > 1.0 / step, "planted {g}, got {}", fit.gamma_star);
        }
    }

    #[test]
    fn degenerate_and_bad_inputs() {
        let h = Histogram::from_samples(&[0.0, 0.001], 10);
        let fit = fit_critical_density(&h, 256.0, &default_gamma_grid()).unwrap();
        assert!(fit.degenerate && (fit.gamma_star - 2.0).abs() < 1e-12);
        assert!(fit_critical_density(&h, 0.0, &default_gamma_grid()).is_err());
        assert!(fit_critical_density(&h, -3.0, &default_gamma_grid()).is_err());
    }
}
