//! Static and adaptive synthesis: sample CP templates, keep the promising
//! runs, project them onto CZ circuits and verify by re-optimization.

mod adaptive;
mod project;
mod score;
mod suggest;

pub use adaptive::{adaptive_synthesis, AdaptiveConfig, AdaptiveOutcome, EvalRecord};
pub use project::{cp_fate, project_cp_to_cz, projected_cz_count, push_cp_expansion, CpFate, Projection};
pub use score::score;
pub use suggest::{suggest_hyperparams, Observation, SearchSpace, Suggester};

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::{adam_run_with, AdamOptions, SampleResult};
use crate::circuit::{cz_depth, evaluate, CircuitIR, Entangler, Template};
use crate::error::{Error, Result};
use crate::losses::LossSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticConfig {
    pub num_samples: usize,
    pub num_gd_iterations: usize,
    pub learning_rate: f64,
    pub entry_loss: f64,
    /// `None` accepts any CZ count.
    pub accepted_num_cz_gates: Option<usize>,
    pub cp_threshold: f64,
    pub target_loss: f64,
    pub num_gd_iterations_at_verification: usize,
    pub learning_rate_at_verification: f64,
    pub seed: u64,
}

impl Default for StaticConfig {
    fn default() -> Self {
        Self {
            num_samples: 100,
            num_gd_iterations: 2000,
            learning_rate: 0.1,
            entry_loss: 1e-3,
            accepted_num_cz_gates: None,
            cp_threshold: 0.2,
            target_loss: 1e-6,
            num_gd_iterations_at_verification: 5000,
            learning_rate_at_verification: 0.01,
            seed: 0,
        }
    }
}

impl StaticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.target_loss > 0.0 && self.target_loss < self.entry_loss) {
            return bad("need 0 < target_loss < entry_loss");
        }
        if !(self.cp_threshold > 0.0 && self.cp_threshold < FRAC_PI_2) {
            return bad("need 0 < cp_threshold < pi/2");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate_at_verification > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.num_gd_iterations == 0 || self.num_gd_iterations_at_verification == 0 {
            return bad("iteration counts must be at least 1");
        }
        Ok(())
    }
}

/// Where a decomposition came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub sample_index: usize,
    pub k: usize,
    pub reg_weight: f64,
}

/// A verified CZ circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub circuit: CircuitIR,
    pub params: Vec<f64>,
    pub loss: f64,
    pub cz_count: usize,
    pub cz_depth: usize,
    pub provenance: Provenance,
    pub verified: bool,
}

impl Decomposition {
    /// Sort key: CZ count, CZ depth, loss, then sample index.
    pub fn cmp_quality(&self, other: &Self) -> std::cmp::Ordering {
        (self.cz_count, self.cz_depth)
            .cmp(&(other.cz_count, other.cz_depth))
            .then(self.loss.total_cmp(&other.loss))
            .then(self.provenance.sample_index.cmp(&other.provenance.sample_index))
    }
}

/// A raw sample that passed the loss filter, with its projection attached.
#[derive(Clone, Debug)]
pub struct Prospective {
    pub sample: SampleResult,
    pub projection: Projection,
    pub cz_count: usize,
}

/// Deterministic generator for stream `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent child seed, used to give each adaptive round its own batch.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    stream_rng(seed ^ tag.rotate_left(32), index).random()
}

/// Uniform angles on `[0, 2pi)` for sample `index`.
pub fn initial_angles(num_params: usize, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, index as u64);
    (0..num_params).map(|_| rng.random_range(0.0..TAU)).collect()
}

/// Independent ADAM runs from uniform random starts, in sample order.
pub fn multi_start(
    c: &CircuitIR,
    spec: &LossSpec,
    num_samples: usize,
    opts: &AdamOptions,
    seed: u64,
) -> Result<Vec<SampleResult>> {
    (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let init = initial_angles(c.num_params(), seed, i);
            let mut r = adam_run_with(c, &init, spec, opts)?;
            r.index = i;
            Ok(r)
        })
        .collect()
}

pub fn raw_sample_batch(template: &Template, spec: &LossSpec, cfg: &StaticConfig) -> Result<Vec<SampleResult>> {
    if template.entangler != Entangler::CP {
        return Err(Error::InvalidTemplate("raw sampling needs a CP template".into()));
    }
    let c = template.expand()?;
    let opts = AdamOptions::new(cfg.num_gd_iterations, cfg.learning_rate);
    multi_start(&c, spec, cfg.num_samples, &opts, cfg.seed)
}

/// Keeps samples under `entry_loss` whose projection is within the CZ budget.
pub fn select_prospective(c: &CircuitIR, results: &[SampleResult], cfg: &StaticConfig) -> Result<Vec<Prospective>> {
    let mut out = Vec::new();
    for r in results {
        if r.aborted || !(r.best_raw < cfg.entry_loss) {
            continue;
        }
        let projection = project_cp_to_cz(c, &r.best_params, cfg.cp_threshold)?;
        let cz_count = projection.cz_count();
        if cfg.accepted_num_cz_gates.is_some_and(|max| cz_count > max) {
            continue;
        }
        out.push(Prospective { sample: r.clone(), projection, cz_count });
    }
    Ok(out)
}

/// Why verification turned a candidate down.
#[derive(Clone, Debug, PartialEq)]
pub struct Rejection {
    pub loss: f64,
}

/// Re-optimizes without regularization and accepts iff the loss reaches
/// `target_loss`.
pub fn verify(
    circuit: &CircuitIR,
    params: &[f64],
    spec: &LossSpec,
    cfg: &StaticConfig,
    provenance: Provenance,
) -> Result<std::result::Result<Decomposition, Rejection>> {
    let spec = spec.unregularized();
    let opts = AdamOptions::new(cfg.num_gd_iterations_at_verification, cfg.learning_rate_at_verification);
    let run = adam_run_with(circuit, params, &spec, &opts)?;
    let loss = spec.raw(&evaluate(circuit, &run.best_params)?)?;
    if !(loss <= cfg.target_loss) {
        return Ok(Err(Rejection { loss }));
    }
    let circuit = circuit.clone().with_params(&run.best_params)?;
    Ok(Ok(Decomposition {
        cz_count: crate::circuit::cz_count(&circuit),
        cz_depth: cz_depth(&circuit),
        params: run.best_params,
        circuit,
        loss,
        provenance,
        verified: true,
    }))
}

/// Counts from one static run.
#[derive(Clone, Debug, Default)]
pub struct StaticOutcome {
    pub decompositions: Vec<Decomposition>,
    pub num_samples: usize,
    pub num_prospective: usize,
    pub num_rejected: usize,
}

pub fn static_synthesis(template: &Template, spec: &LossSpec, cfg: &StaticConfig) -> Result<StaticOutcome> {
    cfg.validate()?;
    let c = template.expand()?;
    let samples = raw_sample_batch(template, spec, cfg)?;
    let prospective = select_prospective(&c, &samples, cfg)?;
    let verdicts = prospective
        .par_iter()
        .map(|p| {
            let provenance = Provenance {
                seed: cfg.seed,
                sample_index: p.sample.index,
                k: template.k,
                reg_weight: spec.reg_weight,
            };
            verify(&p.projection.circuit, &p.projection.params, spec, cfg, provenance)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = StaticOutcome { num_samples: samples.len(), num_prospective: prospective.len(), ..Default::default() };
    for v in verdicts {
        match v {
            Ok(d) => out.decompositions.push(d),
            Err(_) => out.num_rejected += 1,
        }
    }
    out.decompositions.sort_by(Decomposition::cmp_quality);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{builtin_target, BlockStyle, CouplingMap, TargetName};
    use crate::tensor::haar_random_unitary;

    fn small_cfg(samples: usize) -> StaticConfig {
        StaticConfig { num_samples: samples, num_gd_iterations: 400, seed: 5, ..Default::default() }
    }

    #[test]
    fn empty_batch() {
        let t = Template::new(CouplingMap::chain(2).unwrap(), Entangler::CP, BlockStyle::XYZ, 2);
        let spec = LossSpec::hilbert_schmidt(haar_random_unitary(2, 0).unwrap());
        assert!(raw_sample_batch(&t, &spec, &small_cfg(0)).unwrap().is_empty());
    }

    #[test]
    fn batch_is_deterministic() {
        let t = Template::new(CouplingMap::chain(2).unwrap(), Entangler::CP, BlockStyle::XYZ, 3);
        let spec = LossSpec::hilbert_schmidt(haar_random_unitary(2, 0).unwrap()).with_reg_weight(1e-3);
        let a = raw_sample_batch(&t, &spec, &small_cfg(6)).unwrap();
        let b = raw_sample_batch(&t, &spec, &small_cfg(6)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|r| r.index).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn cz_template_rejected_for_raw_sampling() {
        let t = Template::new(CouplingMap::chain(2).unwrap(), Entangler::CZ, BlockStyle::XYZ, 3);
        let spec = LossSpec::hilbert_schmidt(haar_random_unitary(2, 0).unwrap());
        assert!(raw_sample_batch(&t, &spec, &small_cfg(1)).is_err());
    }

    fn fake_result(params: Vec<f64>, raw: f64) -> SampleResult {
        SampleResult {
            index: 0,
            final_params: params.clone(),
            best_params: params,
            best_loss: raw,
            best_raw: raw,
            best_iteration: 0,
            iterations_run: 0,
            aborted: false,
        }
    }

    #[test]
    fn selection_thresholds() {
        let t = Template::new(CouplingMap::connected(3).unwrap(), Entangler::CP, BlockStyle::XYZ, 6);
        let c = t.expand().unwrap();
        let mut p = vec![0.0; c.num_params()];
        for s in c.cp_slots() {
            p[s] = std::f64::consts::PI;
        }
        let cfg = StaticConfig { accepted_num_cz_gates: Some(6), ..Default::default() };
        assert!(select_prospective(&c, &[fake_result(p.clone(), 1e-2)], &cfg).unwrap().is_empty());
        let kept = select_prospective(&c, &[fake_result(p.clone(), 1e-4)], &cfg).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].cz_count, 6);
        let tight = StaticConfig { accepted_num_cz_gates: Some(5), ..Default::default() };
        assert!(select_prospective(&c, &[fake_result(p, 0.0)], &tight).unwrap().is_empty());
    }

    #[test]
    fn verify_accepts_exact_and_rejects_inexpressible() {
        let t = Template::new(CouplingMap::chain(2).unwrap(), Entangler::CZ, BlockStyle::XYZ, 2);
        let c = t.expand().unwrap();
        let p: Vec<f64> = (0..c.num_params()).map(|i| i as f64 * 0.3).collect();
        let spec = LossSpec::hilbert_schmidt(evaluate(&c, &p).unwrap());
        let cfg = StaticConfig { num_gd_iterations_at_verification: 50, ..Default::default() };
        let prov = Provenance { seed: 0, sample_index: 0, k: 2, reg_weight: 0.0 };
        let d = verify(&c, &p, &spec, &cfg, prov.clone()).unwrap().unwrap();
        assert!(d.loss <= 1e-12 && d.cz_count == 2);

        // One CZ cannot make a Haar 2q unitary.
        let t1 = Template::new(CouplingMap::chain(2).unwrap(), Entangler::CZ, BlockStyle::XYZ, 1);
        let c1 = t1.expand().unwrap();
        let spec = LossSpec::hilbert_schmidt(haar_random_unitary(2, 9).unwrap());
        let cfg = StaticConfig { num_gd_iterations_at_verification: 1000, ..Default::default() };
        let r = verify(&c1, &vec![0.3; c1.num_params()], &spec, &cfg, prov).unwrap();
        assert!(r.unwrap_err().loss > 1e-6);
    }

    #[test]
    fn static_on_cz_target_2q() {
        let t = Template::new(CouplingMap::chain(2).unwrap(), Entangler::CP, BlockStyle::XYZ, 2);
        let spec = LossSpec::hilbert_schmidt(builtin_target(TargetName::CnZ, 2).unwrap()).with_reg_weight(1e-3);
        let cfg = StaticConfig { num_samples: 8, num_gd_iterations: 600, seed: 1, ..Default::default() };
        let out = static_synthesis(&t, &spec, &cfg).unwrap();
        assert!(!out.decompositions.is_empty());
        assert_eq!(out.decompositions[0].cz_count, 1);
        for w in out.decompositions.windows(2) {
            assert!(w[0].cmp_quality(&w[1]).is_le());
        }
    }

    #[test]
    fn config_validation() {
        assert!(StaticConfig::default().validate().is_ok());
        let bad = StaticConfig { target_loss: 1e-2, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = StaticConfig { cp_threshold: 2.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
