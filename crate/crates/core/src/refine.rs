//! Post-processing of verified circuits: drop angles that do nothing, merge
//! angles that only enter through their sum, snap the rest to rational
//! multiples of pi, and spell the result in Clifford+T when possible.
//!
//! Every accepted change keeps the raw loss within `loss_tolerance`. After
//! each tentative change the angles that are not yet settled (zero or a
//! small-denominator multiple of pi) are re-fitted with the settled ones
//! frozen, so the loss stays near machine precision along the way.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::qasm::as_pi_fraction;
use crate::circuit::{cz_count, cz_depth, evaluate, t_count, t_depth, CircuitIR, GateKind};
use crate::error::{Error, Result};
use crate::grad::polish;
use crate::losses::LossSpec;
use crate::synthesis::stream_rng;

/// Loss below which re-fitting is not attempted.
const POLISHED: f64 = 1e-14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeScope {
    #[default]
    SameQubit,
    AllPairs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub loss_tolerance: f64,
    pub max_denominator: i64,
    pub merge_scope: MergeScope,
    /// A change is kept only if the loss, after re-fitting, is at most the
    /// smaller of this and `loss_tolerance`.
    pub accept_loss: f64,
    /// Quasi-Newton steps spent re-fitting free angles after each change;
    /// 0 makes every test a plain single-point check.
    pub refit_iterations: usize,
    /// Seed of the perturbation used to confirm merges.
    pub seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            loss_tolerance: 1e-6,
            max_denominator: 16,
            merge_scope: MergeScope::SameQubit,
            accept_loss: 1e-10,
            refit_iterations: 200,
            seed: 0,
        }
    }
}

/// A merge of slot `from` into slot `into` with the given sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub from: usize,
    pub into: usize,
    pub sign: i8,
}

/// A slot snapped to `p*pi/q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snap {
    pub slot: usize,
    pub p: i64,
    pub q: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RationalReport {
    pub snapped: Vec<Snap>,
    /// Slots still holding an angle that is not a small-denominator multiple of pi.
    pub residual: Vec<usize>,
}

struct Ctx<'a> {
    c: &'a CircuitIR,
    spec: LossSpec,
    cfg: &'a RefineConfig,
}

impl Ctx<'_> {
    fn loss(&self, params: &[f64]) -> Result<f64> {
        self.spec.raw(&evaluate(self.c, params)?)
    }

    fn settled(&self, x: f64) -> bool {
        as_pi_fraction(x, self.cfg.max_denominator).is_some()
    }

    fn accept_below(&self) -> f64 {
        self.cfg.accept_loss.min(self.cfg.loss_tolerance)
    }

    /// Tries `params[slot] = value`, re-fitting the unsettled slots when the
    /// plain change is not accurate enough. Returns the accepted vector.
    fn attempt(&self, params: &[f64], slot: usize, value: f64) -> Result<Option<Vec<f64>>> {
        let mut trial = params.to_vec();
        trial[slot] = value;
        let loss = self.loss(&trial)?;
        let (p, l) = match self.refit(&trial, slot, loss)? {
            Some((p, l)) if l < loss => (p, l),
            _ => (trial, loss),
        };
        Ok((l <= self.accept_below()).then_some(p))
    }

    fn refit(&self, params: &[f64], slot: usize, loss: f64) -> Result<Option<(Vec<f64>, f64)>> {
        if self.cfg.refit_iterations == 0 || loss <= POLISHED {
            return Ok(None);
        }
        let frozen: Vec<usize> = (0..params.len()).filter(|&s| s == slot || self.settled(params[s])).collect();
        if frozen.len() == params.len() {
            return Ok(None);
        }
        polish(self.c, params, &self.spec, &frozen, self.cfg.refit_iterations, POLISHED).map(Some)
    }

    fn check_entry(&self, params: &[f64]) -> Result<()> {
        let l = self.loss(params)?;
        if !(l <= self.cfg.loss_tolerance) {
            return Err(Error::InvalidArgument(format!("loss {l:e} is above the refinement tolerance")));
        }
        Ok(())
    }
}

fn ctx<'a>(c: &'a CircuitIR, spec: &LossSpec, cfg: &'a RefineConfig) -> Ctx<'a> {
    Ctx { c, spec: spec.unregularized(), cfg }
}

/// Greedy single pass setting each nonzero slot to zero when the loss allows.
pub fn try_zero_angles(c: &CircuitIR, params: &[f64], spec: &LossSpec, cfg: &RefineConfig) -> Result<(Vec<f64>, Vec<usize>)> {
    let cx = ctx(c, spec, cfg);
    cx.check_entry(params)?;
    zero_pass(&cx, params.to_vec())
}

fn zero_pass(cx: &Ctx, mut params: Vec<f64>) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut removed = Vec::new();
    for s in 0..params.len() {
        if params[s] == 0.0 {
            continue;
        }
        if let Some(p) = cx.attempt(&params, s, 0.0)? {
            params = p;
            removed.push(s);
        }
    }
    Ok((params, removed))
}

fn in_scope(c: &CircuitIR, scope: MergeScope, i: usize, j: usize) -> bool {
    match scope {
        MergeScope::AllPairs => true,
        MergeScope::SameQubit => {
            let (Some(gi), Some(gj)) = (c.gate_of_slot(i), c.gate_of_slot(j)) else {
                return false;
            };
            let (a, b) = (&c.gates()[gi], &c.gates()[gj]);
            a.qubits.len() == 1 && a.qubits == b.qubits
        }
    }
}

/// Merges pairs whose loss depends only on `a_j ± a_i`, until a full pass
/// changes nothing. Each match is confirmed at one random perturbation of
/// the other angles.
pub fn try_merge_pairs(c: &CircuitIR, params: &[f64], spec: &LossSpec, cfg: &RefineConfig) -> Result<(Vec<f64>, Vec<Merge>)> {
    let cx = ctx(c, spec, cfg);
    cx.check_entry(params)?;
    merge_passes(&cx, params.to_vec())
}

fn merge_passes(cx: &Ctx, mut params: Vec<f64>) -> Result<(Vec<f64>, Vec<Merge>)> {
    let n = params.len();
    let mut merges = Vec::new();
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || params[i] == 0.0 || params[j] == 0.0 || !in_scope(cx.c, cx.cfg.merge_scope, i, j) {
                    continue;
                }
                for sign in [1i8, -1] {
                    let mut trial = params.clone();
                    trial[i] = 0.0;
                    trial[j] = params[j] + f64::from(sign) * params[i];
                    if cx.loss(&trial)? > cx.accept_below() || !confirm_merge(cx, &params, &trial, i, j)? {
                        continue;
                    }
                    params = trial;
                    merges.push(Merge { from: i, into: j, sign });
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            return Ok((params, merges));
        }
    }
}

fn confirm_merge(cx: &Ctx, before: &[f64], after: &[f64], i: usize, j: usize) -> Result<bool> {
    let mut rng = stream_rng(cx.cfg.seed, (i * before.len() + j) as u64);
    let mut b = before.to_vec();
    let mut a = after.to_vec();
    for s in 0..b.len() {
        if s != i && s != j {
            let d = rng.random_range(-0.5..0.5);
            b[s] += d;
            a[s] += d;
        }
    }
    Ok((cx.loss(&b)? - cx.loss(&a)?).abs() <= 1e-10)
}

/// Continued-fraction convergents `p/q` of `x` with `q <= max_den`.
pub fn convergents(x: f64, max_den: i64) -> Vec<(i64, i64)> {
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    let mut out = Vec::new();
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den {
            break;
        }
        out.push((p2, q2));
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a as f64;
        if frac.abs() < 1e-12 {
            break;
        }
        r = 1.0 / frac;
    }
    out
}

fn reduce_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Snaps each slot to a multiple of pi with denominator at most
/// `max_denominator`, trying convergents in order of growing denominator.
pub fn rationalize_angles(
    c: &CircuitIR,
    params: &[f64],
    spec: &LossSpec,
    cfg: &RefineConfig,
) -> Result<(Vec<f64>, RationalReport)> {
    let cx = ctx(c, spec, cfg);
    cx.check_entry(params)?;
    rationalize_pass(&cx, params.to_vec())
}

fn rationalize_pass(cx: &Ctx, mut params: Vec<f64>) -> Result<(Vec<f64>, RationalReport)> {
    let mut report = RationalReport::default();
    for s in 0..params.len() {
        if cx.settled(params[s]) {
            continue;
        }
        let x = reduce_angle(params[s]) / PI;
        let cands = convergents(x, cx.cfg.max_denominator);
        let value = |&(p, q): &(i64, i64)| p as f64 * PI / q as f64;
        let mut accepted = None;
        for cand in &cands {
            if let Some(p) = cx.attempt(&params, s, value(cand))? {
                accepted = Some((p, *cand));
                break;
            }
        }
        if let Some((p, (num, den))) = accepted {
            params = p;
            report.snapped.push(Snap { slot: s, p: num, q: den });
        }
    }
    report.residual = (0..params.len()).filter(|&s| !cx.settled(params[s])).collect();
    Ok((params, report))
}

/// Slots whose angles have no Clifford+T spelling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unsupported {
    pub slots: Vec<usize>,
}

/// `P(k pi/4)` as a short product of Z, S, S†, T, T†.
fn phase_word(k: i64) -> &'static [GateKind] {
    use GateKind::*;
    match k.rem_euclid(8) {
        0 => &[],
        1 => &[T],
        2 => &[S],
        3 => &[S, T],
        4 => &[Z],
        5 => &[Z, T],
        6 => &[Sdg],
        _ => &[Tdg],
    }
}

fn quarter_turns(angle: f64) -> Option<i64> {
    as_pi_fraction(angle, 4).filter(|&(_, q)| 4 % q == 0).map(|(p, q)| p * (4 / q))
}

/// Rewrites a circuit with angles in multiples of pi/4 using only Clifford+T
/// gates and CZ. Equal to the input up to global phase.
pub fn expand_clifford_t(c: &CircuitIR, params: &[f64]) -> Result<std::result::Result<CircuitIR, Unsupported>> {
    use GateKind::*;
    c.check_params(params)?;
    let mut out = CircuitIR::new(c.num_qubits())?;
    let mut bad = Vec::new();
    for g in c.gates() {
        let Some(slot) = g.slot else {
            out.push(g.kind, &g.qubits)?;
            continue;
        };
        let Some(k) = quarter_turns(params[slot]) else {
            bad.push(slot);
            continue;
        };
        let word = phase_word(k);
        let (pre, post): (&[GateKind], &[GateKind]) = match g.kind {
            RZ | P => (&[], &[]),
            RX => (&[H], &[H]),
            RY => (&[Sdg, H], &[H, S]),
            CP => {
                match k.rem_euclid(8) {
                    0 => {}
                    4 => out.push(CZ, &g.qubits)?,
                    _ => bad.push(slot),
                }
                continue;
            }
            _ => unreachable!("parametric kinds are covered"),
        };
        if word.is_empty() {
            continue;
        }
        for &kind in pre.iter().chain(word).chain(post) {
            out.push(kind, &g.qubits)?;
        }
    }
    Ok(if bad.is_empty() { Ok(out) } else { Err(Unsupported { slots: bad }) })
}

/// Result of the full refinement pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub circuit: CircuitIR,
    pub params: Vec<f64>,
    pub loss: f64,
    pub zeroed: Vec<usize>,
    pub merges: Vec<Merge>,
    pub snapped: Vec<Snap>,
    pub residual: Vec<usize>,
    pub cz_count: usize,
    pub cz_depth: usize,
    /// Present when every angle had a Clifford+T spelling.
    pub expanded: Option<CircuitIR>,
    pub t_count: Option<usize>,
    pub t_depth: Option<usize>,
    pub unsupported: Vec<usize>,
}

impl RefineOutcome {
    /// Largest denominator among the nonzero angles, if all are rational.
    pub fn max_denominator(&self, limit: i64) -> Option<i64> {
        self.params.iter().try_fold(1, |acc, &a| as_pi_fraction(a, limit).map(|(_, q)| acc.max(q)))
    }
}

const MAX_ROUNDS: usize = 10;

/// zero → merge → rationalize, repeated until a round changes nothing, then
/// the Clifford+T expansion when every angle allows it.
pub fn refine_pipeline(c: &CircuitIR, params: &[f64], spec: &LossSpec, cfg: &RefineConfig) -> Result<RefineOutcome> {
    let cx = ctx(c, spec, cfg);
    cx.check_entry(params)?;
    let mut p = params.to_vec();
    let (mut zeroed, mut merges, mut snapped) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..MAX_ROUNDS {
        let before = p.clone();
        let (q, z) = zero_pass(&cx, p)?;
        let (q, m) = merge_passes(&cx, q)?;
        let (q, r) = rationalize_pass(&cx, q)?;
        zeroed.extend(z);
        merges.extend(m);
        snapped.extend(r.snapped);
        p = q;
        if p == before {
            break;
        }
    }
    let residual: Vec<usize> = (0..p.len()).filter(|&s| !cx.settled(p[s])).collect();
    let circuit = c.clone().with_params(&p)?;
    let (expanded, unsupported) = match expand_clifford_t(c, &p)? {
        Ok(e) => (Some(e), Vec::new()),
        Err(u) => (None, u.slots),
    };
    let (t_count, t_depth) = match &expanded {
        Some(e) => (Some(t_count(e)?), Some(t_depth(e)?)),
        None => (None, None),
    };
    Ok(RefineOutcome {
        loss: cx.loss(&p)?,
        cz_count: cz_count(c),
        cz_depth: cz_depth(c),
        circuit,
        params: p,
        zeroed,
        merges,
        snapped,
        residual,
        expanded,
        t_count,
        t_depth,
        unsupported,
    })
}
