//! Proposals for the (gate count, regularization weight) pair of each
//! adaptive round: prior draws during warmup, then a Parzen-estimator
//! ratio search over the history.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

const WARMUP: usize = 20;
const GOOD_QUANTILE: f64 = 0.25;
const CANDIDATES: usize = 24;
const MIN_BW_K: f64 = 0.5;
const MIN_BW_LOG_R: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suggester {
    #[default]
    Tpe,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchSpace {
    pub min_k: usize,
    pub max_k: usize,
    pub r_mean: f64,
    /// Standard deviation of `ln r`.
    pub r_variance: f64,
}

/// One finished evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub k: usize,
    pub r: f64,
    pub score: f64,
}

impl SearchSpace {
    fn prior_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let k = rng.random_range(self.min_k..=self.max_k);
        let ln_r = Normal::new(self.r_mean.ln(), self.r_variance).expect("positive spread").sample(rng);
        (k, ln_r.exp())
    }

    fn k_spread(&self) -> f64 {
        ((self.max_k - self.min_k + 1) as f64 / 12f64.sqrt()).max(MIN_BW_K)
    }
}

pub fn suggest_hyperparams<R: Rng + ?Sized>(
    history: &[Observation],
    space: &SearchSpace,
    suggester: Suggester,
    rng: &mut R,
) -> (usize, f64) {
    assert!(space.min_k <= space.max_k && space.r_mean > 0.0 && space.r_variance > 0.0);
    if suggester == Suggester::Random || history.len() < WARMUP {
        return space.prior_draw(rng);
    }
    let clip = (space.max_k + 10) as f64;
    let mut order: Vec<usize> = (0..history.len()).collect();
    let y = |i: usize| history[i].score.min(clip);
    order.sort_by(|&a, &b| y(a).total_cmp(&y(b)).then(a.cmp(&b)));
    let n_good = ((GOOD_QUANTILE * history.len() as f64).ceil() as usize).max(1);
    let point = |i: usize| [history[i].k as f64, history[i].r.ln()];
    let good = Kde::fit(order[..n_good].iter().map(|&i| point(i)).collect(), space);
    let bad = Kde::fit(order[n_good..].iter().map(|&i| point(i)).collect(), space);

    let mut best = None;
    for _ in 0..CANDIDATES {
        let x = good.sample(rng, space);
        let ratio = good.log_density(x) - bad.log_density(x);
        if best.is_none_or(|(_, b)| ratio > b) {
            best = Some((x, ratio));
        }
    }
    let ([k, ln_r], _) = best.expect("at least one candidate");
    (k as usize, ln_r.exp())
}

/// Product-Gaussian kernel density over `(k, ln r)` with the prior mixed in
/// as one extra component.
struct Kde {
    points: Vec<[f64; 2]>,
    bw: [f64; 2],
    prior_mu: [f64; 2],
    prior_sd: [f64; 2],
}

fn silverman(values: impl Iterator<Item = f64> + Clone, fallback: f64, floor: f64) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return fallback.max(floor);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = if var > 0.0 { var.sqrt() } else { fallback };
    (1.06 * sd * (n as f64).powf(-0.2)).max(floor)
}

fn log_normal_pdf(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Kde {
    fn fit(points: Vec<[f64; 2]>, space: &SearchSpace) -> Self {
        let prior_mu = [(space.min_k + space.max_k) as f64 / 2.0, space.r_mean.ln()];
        let prior_sd = [space.k_spread(), space.r_variance];
        let bw = [
            silverman(points.iter().map(|p| p[0]), prior_sd[0], MIN_BW_K),
            silverman(points.iter().map(|p| p[1]), prior_sd[1], MIN_BW_LOG_R),
        ];
        Self { points, bw, prior_mu, prior_sd }
    }

    fn log_density(&self, x: [f64; 2]) -> f64 {
        let mut terms: Vec<f64> = self
            .points
            .iter()
            .map(|p| log_normal_pdf(x[0], p[0], self.bw[0]) + log_normal_pdf(x[1], p[1], self.bw[1]))
            .collect();
        terms.push(
            log_normal_pdf(x[0], self.prior_mu[0], self.prior_sd[0])
                + log_normal_pdf(x[1], self.prior_mu[1], self.prior_sd[1]),
        );
        log_sum_exp(&terms) - (terms.len() as f64).ln()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, space: &SearchSpace) -> [f64; 2] {
        let c = rng.random_range(0..=self.points.len());
        let (mu, sd) = match self.points.get(c) {
            Some(p) => (*p, self.bw),
            None => (self.prior_mu, self.prior_sd),
        };
        let k = Normal::new(mu[0], sd[0]).unwrap().sample(rng).round();
        let k = k.clamp(space.min_k as f64, space.max_k as f64);
        let ln_r = Normal::new(mu[1], sd[1]).unwrap().sample(rng);
        [k, ln_r]
    }
}
