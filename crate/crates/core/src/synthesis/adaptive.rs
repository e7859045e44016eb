use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{
    derive_seed, raw_sample_batch, score, select_prospective, stream_rng, suggest_hyperparams, verify, Decomposition,
    Observation, Provenance, SearchSpace, StaticConfig, Suggester,
};
use crate::circuit::{BlockStyle, CouplingMap, Entangler, Template};
use crate::error::{Error, Result};
use crate::losses::LossSpec;

const TAG_SAMPLES: u64 = 1;
const TAG_SUGGEST: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub min_num_cp_gates: usize,
    pub max_num_cp_gates: usize,
    pub r_mean: f64,
    pub r_variance: f64,
    pub max_evals: usize,
    pub suggester: Suggester,
    pub block_style: BlockStyle,
    /// Stop as soon as a verified decomposition reaches this CZ count.
    pub goal_cz: Option<usize>,
    /// Cap on verification attempts per round.
    pub max_verifications_per_eval: usize,
    /// Per-round sampling settings; `accepted_num_cz_gates` is ignored.
    pub sampling: StaticConfig,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            min_num_cp_gates: 0,
            max_num_cp_gates: 20,
            r_mean: 5.5e-4,
            r_variance: 0.5,
            max_evals: 100,
            suggester: Suggester::Tpe,
            block_style: BlockStyle::XYZ,
            goal_cz: None,
            max_verifications_per_eval: 10,
            sampling: StaticConfig::default(),
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_num_cp_gates > self.max_num_cp_gates {
            return Err(Error::InvalidArgument("min_num_cp_gates exceeds max_num_cp_gates".into()));
        }
        if !(self.r_mean > 0.0 && self.r_variance > 0.0) {
            return Err(Error::InvalidArgument("r_mean and r_variance must be positive".into()));
        }
        self.sampling.validate()
    }

    fn space(&self) -> SearchSpace {
        SearchSpace {
            min_k: self.min_num_cp_gates,
            max_k: self.max_num_cp_gates,
            r_mean: self.r_mean,
            r_variance: self.r_variance,
        }
    }
}

fn ser_score<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_score<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// One line of the evaluation log. An infinite score is written as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub eval_index: usize,
    pub k: usize,
    pub r: f64,
    #[serde(serialize_with = "ser_score", deserialize_with = "de_score")]
    pub score: f64,
    pub num_prospective: usize,
    /// Best verified CZ count after this round.
    pub best_cz: Option<usize>,
    pub seed: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Default)]
pub struct AdaptiveOutcome {
    /// Verified decompositions, each strictly better than the one before.
    pub decompositions: Vec<Decomposition>,
    /// Records produced by this call only.
    pub log: Vec<EvalRecord>,
    pub reached_goal: bool,
}

impl AdaptiveOutcome {
    pub fn best(&self) -> Option<&Decomposition> {
        self.decompositions.last()
    }
}

/// Runs rounds `history.len() .. max_evals`, continuing a previous log if
/// one is given. `on_eval` sees each record (and any new incumbent) as soon
/// as the round finishes.
pub fn adaptive_synthesis(
    spec: &LossSpec,
    coupling: &CouplingMap,
    acfg: &AdaptiveConfig,
    history: &[EvalRecord],
    incumbent: Option<usize>,
    mut on_eval: impl FnMut(&EvalRecord, Option<&Decomposition>) -> Result<()>,
) -> Result<AdaptiveOutcome> {
    acfg.validate()?;
    let space = acfg.space();
    let mut observations: Vec<Observation> =
        history.iter().map(|h| Observation { k: h.k, r: h.r, score: h.score }).collect();
    let mut best_cz = incumbent.or_else(|| history.iter().filter_map(|h| h.best_cz).min());
    let mut out = AdaptiveOutcome::default();
    if best_cz.is_some() && best_cz <= acfg.goal_cz {
        out.reached_goal = true;
        return Ok(out);
    }

    for eval_index in history.len()..acfg.max_evals {
        let started = Instant::now();
        let seed = acfg.sampling.seed;
        let mut rng = stream_rng(derive_seed(seed, TAG_SUGGEST, eval_index as u64), 0);
        let (k, r) = suggest_hyperparams(&observations, &space, acfg.suggester, &mut rng);

        let template = Template::new(coupling.clone(), Entangler::CP, acfg.block_style, k);
        let round_spec = spec.clone().with_reg_weight(r);
        let cfg = StaticConfig {
            seed: derive_seed(seed, TAG_SAMPLES, eval_index as u64),
            accepted_num_cz_gates: None,
            ..acfg.sampling.clone()
        };
        let c = template.expand()?;
        let samples = raw_sample_batch(&template, &round_spec, &cfg)?;
        let mut prospective = select_prospective(&c, &samples, &cfg)?;
        let counts: Vec<usize> = prospective.iter().map(|p| p.cz_count).collect();
        let s = if samples.is_empty() { f64::INFINITY } else { score(&counts, samples.len()) };

        prospective.sort_by(|a, b| {
            a.cz_count.cmp(&b.cz_count).then(a.sample.best_raw.total_cmp(&b.sample.best_raw)).then(a.sample.index.cmp(&b.sample.index))
        });
        let mut improved = None;
        for p in prospective.iter().take(acfg.max_verifications_per_eval) {
            if best_cz.is_some_and(|b| p.cz_count >= b) {
                break;
            }
            let provenance = Provenance { seed: cfg.seed, sample_index: p.sample.index, k, reg_weight: r };
            if let Ok(d) = verify(&p.projection.circuit, &p.projection.params, &round_spec, &cfg, provenance)? {
                best_cz = Some(d.cz_count);
                improved = Some(d);
                break;
            }
        }

        let record = EvalRecord {
            eval_index,
            k,
            r,
            score: s,
            num_prospective: prospective.len(),
            best_cz,
            seed: cfg.seed,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        on_eval(&record, improved.as_ref())?;
        observations.push(Observation { k, r, score: s });
        out.log.push(record);
        if let Some(d) = improved {
            out.decompositions.push(d);
        }
        if best_cz.is_some() && best_cz <= acfg.goal_cz {
            out.reached_goal = true;
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{builtin_target, TargetName};

    fn quick(max_evals: usize) -> AdaptiveConfig {
        AdaptiveConfig {
            min_num_cp_gates: 1,
            max_num_cp_gates: 3,
            max_evals,
            sampling: StaticConfig { num_samples: 4, num_gd_iterations: 300, num_gd_iterations_at_verification: 300, seed: 3, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn single_eval_logs_once() {
        let spec = LossSpec::hilbert_schmidt(builtin_target(TargetName::CnZ, 2).unwrap());
        let out = adaptive_synthesis(&spec, &CouplingMap::chain(2).unwrap(), &quick(1), &[], None, |_, _| Ok(())).unwrap();
        assert_eq!(out.log.len(), 1);
        assert_eq!(out.log[0].eval_index, 0);
    }

    #[test]
    fn resume_continues_indices() {
        let spec = LossSpec::hilbert_schmidt(builtin_target(TargetName::CnX, 2).unwrap());
        let coupling = CouplingMap::chain(2).unwrap();
        let first = adaptive_synthesis(&spec, &coupling, &quick(2), &[], None, |_, _| Ok(())).unwrap();
        let second = adaptive_synthesis(&spec, &coupling, &quick(4), &first.log, None, |_, _| Ok(())).unwrap();
        let full = adaptive_synthesis(&spec, &coupling, &quick(4), &[], None, |_, _| Ok(())).unwrap();
        let idx: Vec<usize> = second.log.iter().map(|r| r.eval_index).collect();
        if !first.reached_goal {
            assert_eq!(idx, vec![2, 3]);
        }
        let strip = |v: &[EvalRecord]| v.iter().map(|r| (r.eval_index, r.k, r.r.to_bits(), r.seed)).collect::<Vec<_>>();
        let mut joined = first.log.clone();
        joined.extend(second.log);
        assert_eq!(strip(&joined), strip(&full.log));
    }

    #[test]
    fn goal_stops_early() {
        let spec = LossSpec::hilbert_schmidt(builtin_target(TargetName::CnZ, 2).unwrap());
        let acfg = AdaptiveConfig { goal_cz: Some(1), max_evals: 20, ..quick(20) };
        let out = adaptive_synthesis(&spec, &CouplingMap::chain(2).unwrap(), &acfg, &[], None, |_, _| Ok(())).unwrap();
        assert!(out.reached_goal);
        assert_eq!(out.best().unwrap().cz_count, 1);
        assert!(out.log.len() < 20);
    }

    #[test]
    fn infinite_score_round_trips_as_null() {
        let r = EvalRecord { eval_index: 0, k: 1, r: 1e-3, score: f64::INFINITY, num_prospective: 0, best_cz: None, seed: 1, wall_time_s: 0.0 };
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"score\":null"));
        assert_eq!(serde_json::from_str::<EvalRecord>(&text).unwrap(), r);
    }

    #[test]
    fn rejects_inverted_range() {
        let spec = LossSpec::hilbert_schmidt(builtin_target(TargetName::CnZ, 2).unwrap());
        let acfg = AdaptiveConfig { min_num_cp_gates: 5, max_num_cp_gates: 2, ..quick(1) };
        assert!(adaptive_synthesis(&spec, &CouplingMap::chain(2).unwrap(), &acfg, &[], None, |_, _| Ok(())).is_err());
    }
}
