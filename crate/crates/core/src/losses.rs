//! Objective functions and the CP-angle penalty.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::circuit::{evaluate, CircuitIR};
use crate::error::{Error, Result};
use crate::tensor::{hs_overlap, Matrix, C64};

/// Regularization weight that works well for losses normalized to `[0, 1]`.
pub const DEFAULT_REG_WEIGHT: f64 = 5e-4;

/// `1 - |Tr U^dagger V|^2 / 4^n`.
pub fn hs_distance(u: &Matrix, v: &Matrix) -> Result<f64> {
    let z = hs_overlap(u, v)?;
    let d = u.dim() as f64;
    Ok((1.0 - z.norm_sqr() / (d * d)).max(0.0))
}

/// `1 - |<psi|U|0>|^2`.
pub fn state_prep_loss(u: &Matrix, psi: &[C64]) -> Result<f64> {
    if psi.len() != u.dim() {
        return Err(Error::DimensionMismatch(u.dim(), psi.len()));
    }
    check_normalized(psi)?;
    Ok((1.0 - state_overlap(u, psi).norm_sqr()).max(0.0))
}

fn state_overlap(u: &Matrix, psi: &[C64]) -> C64 {
    psi.iter().enumerate().map(|(x, p)| p.conj() * u.get(x, 0)).sum()
}

fn check_normalized(psi: &[C64]) -> Result<()> {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::UnnormalizedState(norm));
    }
    Ok(())
}

/// `1 - (1/2^n) sum_j |(V^dagger U)_jj|^2`; zero iff `U = V D` for a diagonal unitary `D`.
pub fn relative_phase_loss(u: &Matrix, v: &Matrix) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch(u.dim(), v.dim()));
    }
    let d = u.dim();
    let mass: f64 = (0..d).map(|j| diag_of_vdagu(u, v, j).norm_sqr()).sum();
    Ok((1.0 - mass / d as f64).max(0.0))
}

#[inline]
fn diag_of_vdagu(u: &Matrix, v: &Matrix, j: usize) -> C64 {
    (0..u.dim()).map(|i| v.get(i, j).conj() * u.get(i, j)).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub enum LossKind {
    HilbertSchmidt(Matrix),
    StatePrep(Vec<C64>),
    RelativePhase(Matrix),
}

/// Which objective to minimize plus the CP penalty weight `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub reg_weight: f64,
    pub penalty: PenaltyShape,
}

impl LossSpec {
    pub fn hilbert_schmidt(target: Matrix) -> Self {
        Self { kind: LossKind::HilbertSchmidt(target), reg_weight: 0.0, penalty: PenaltyShape::default() }
    }

    pub fn relative_phase(target: Matrix) -> Self {
        Self { kind: LossKind::RelativePhase(target), reg_weight: 0.0, penalty: PenaltyShape::default() }
    }

    pub fn state_prep(target_state: Vec<C64>) -> Result<Self> {
        if !target_state.len().is_power_of_two() || target_state.len() < 2 {
            return Err(Error::InvalidArgument(format!("state length {} is not 2^n", target_state.len())));
        }
        check_normalized(&target_state)?;
        Ok(Self { kind: LossKind::StatePrep(target_state), reg_weight: 0.0, penalty: PenaltyShape::default() })
    }

    pub fn with_reg_weight(mut self, r: f64) -> Self {
        self.reg_weight = r;
        self
    }

    pub fn with_penalty(mut self, shape: PenaltyShape) -> Self {
        self.penalty = shape;
        self
    }

    /// Same objective with regularization switched off.
    pub fn unregularized(&self) -> Self {
        Self { reg_weight: 0.0, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            LossKind::HilbertSchmidt(m) | LossKind::RelativePhase(m) => m.dim(),
            LossKind::StatePrep(psi) => psi.len(),
        }
    }

    /// Raw loss `L(U)`.
    pub fn raw(&self, u: &Matrix) -> Result<f64> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch(self.dim(), u.dim()));
        }
        match &self.kind {
            LossKind::HilbertSchmidt(v) => hs_distance(u, v),
            LossKind::StatePrep(psi) => state_prep_loss(u, psi),
            LossKind::RelativePhase(v) => relative_phase_loss(u, v),
        }
    }

    /// Raw loss and the transposed adjoint `W^T`, where `dL = Re Tr(W dU)`.
    pub(crate) fn raw_with_adjoint(&self, u: &Matrix) -> (f64, Matrix) {
        let n = u.num_qubits();
        let d = u.dim();
        match &self.kind {
            LossKind::HilbertSchmidt(v) => {
                let z = hs_overlap(v, u).expect("checked dims");
                let dd = (d * d) as f64;
                let loss = (1.0 - z.norm_sqr() / dd).max(0.0);
                let f = -2.0 * z.conj() / dd;
                let mut wt = v.conj();
                for w in wt.data_mut() {
                    *w *= f;
                }
                (loss, wt)
            }
            LossKind::StatePrep(psi) => {
                let f = state_overlap(u, psi);
                let loss = (1.0 - f.norm_sqr()).max(0.0);
                let mut wt = Matrix::zeros(n);
                for (x, p) in psi.iter().enumerate() {
                    wt.set(x, 0, -2.0 * f.conj() * p.conj());
                }
                (loss, wt)
            }
            LossKind::RelativePhase(v) => {
                let mut mass = 0.0;
                let mut wt = Matrix::zeros(n);
                let scale = -2.0 / d as f64;
                for j in 0..d {
                    let c = diag_of_vdagu(u, v, j);
                    mass += c.norm_sqr();
                    let f = scale * c.conj();
                    for i in 0..d {
                        wt.set(i, j, f * v.get(i, j).conj());
                    }
                }
                ((1.0 - mass / d as f64).max(0.0), wt)
            }
        }
    }
}

/// Piecewise-linear penalty on CP angles: 0 at identity, 1 at CZ, 2 at the
/// quarter turns, with flat plateaus of half-width `plateau` around 0, pi/2,
/// 3pi/2 and 2pi but none at pi.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyShape {
    pub plateau: f64,
}

impl Default for PenaltyShape {
    fn default() -> Self {
        Self { plateau: 0.05 }
    }
}

impl PenaltyShape {
    fn knots(&self) -> [(f64, f64); 9] {
        let w = self.plateau;
        [
            (0.0, 0.0),
            (w, 0.0),
            (FRAC_PI_2 - w, 2.0),
            (FRAC_PI_2 + w, 2.0),
            (PI, 1.0),
            (3.0 * FRAC_PI_2 - w, 2.0),
            (3.0 * FRAC_PI_2 + w, 2.0),
            (TAU - w, 0.0),
            (TAU, 0.0),
        ]
    }

    /// Value and slope at `a`; the slope is 0 at kinks.
    pub fn value_and_slope(&self, a: f64) -> (f64, f64) {
        let x = a.rem_euclid(TAU);
        let knots = self.knots();
        for pair in knots.windows(2) {
            let ((x0, y0), (x1, y1)) = (pair[0], pair[1]);
            if x <= x1 {
                let slope = (y1 - y0) / (x1 - x0);
                let value = y0 + slope * (x - x0);
                let at_kink = x == x0 || x == x1;
                return (value, if at_kink { 0.0 } else { slope });
            }
        }
        (0.0, 0.0)
    }
}

pub fn cp_penalty(a: f64, shape: &PenaltyShape) -> f64 {
    shape.value_and_slope(a).0
}

/// `(total, raw)` with `total = raw + r * sum of CP penalties`.
pub fn regularized_loss(c: &CircuitIR, params: &[f64], spec: &LossSpec) -> Result<(f64, f64)> {
    let u = evaluate(c, params)?;
    let raw = spec.raw(&u)?;
    Ok((raw + penalty_sum(c, params, spec), raw))
}

pub(crate) fn penalty_sum(c: &CircuitIR, params: &[f64], spec: &LossSpec) -> f64 {
    if spec.reg_weight == 0.0 {
        return 0.0;
    }
    let total: f64 = c.cp_slots().into_iter().map(|s| cp_penalty(params[s], &spec.penalty)).sum();
    spec.reg_weight * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{BlockStyle, CouplingMap, Entangler, GateKind, Template};
    use crate::tensor::haar_random_unitary;

    #[test]
    fn hs_examples() {
        let u = haar_random_unitary(2, 1).unwrap();
        assert!(hs_distance(&u, &u).unwrap() < 1e-14);
        let phased = u.scale(C64::from_polar(1.0, 2.2));
        assert!(hs_distance(&u, &phased).unwrap() < 1e-14);
        let cz = GateKind::CZ.matrix(0.0).embed(2, &[0, 1]).unwrap();
        assert!((hs_distance(&Matrix::identity(2), &cz).unwrap() - 0.75).abs() < 1e-15);
        assert!(hs_distance(&Matrix::identity(2), &Matrix::identity(3)).is_err());
    }

    #[test]
    fn hs_symmetric_and_left_invariant() {
        for seed in 0..20 {
            let u = haar_random_unitary(3, seed).unwrap();
            let v = haar_random_unitary(3, seed + 100).unwrap();
            let w = haar_random_unitary(3, seed + 200).unwrap();
            let d = hs_distance(&u, &v).unwrap();
            assert!((d - hs_distance(&v, &u).unwrap()).abs() < 1e-14);
            let dw = hs_distance(&w.matmul(&u).unwrap(), &w.matmul(&v).unwrap()).unwrap();
            assert!((d - dw).abs() < 1e-12);
        }
    }

    #[test]
    fn state_prep_examples() {
        let zero = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let one = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let plus = vec![C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0); 2];
        let id = Matrix::identity(1);
        assert_eq!(state_prep_loss(&id, &zero).unwrap(), 0.0);
        assert_eq!(state_prep_loss(&id, &one).unwrap(), 1.0);
        let h = GateKind::H.matrix(0.0).embed(1, &[0]).unwrap();
        assert!(state_prep_loss(&h, &plus).unwrap() < 1e-15);
        let bad = vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        assert!(matches!(state_prep_loss(&id, &bad), Err(Error::UnnormalizedState(_))));
        assert!(LossSpec::state_prep(bad).is_err());
    }

    #[test]
    fn relative_phase_examples() {
        let v = haar_random_unitary(3, 7).unwrap();
        let diag: Vec<C64> = (0..8).map(|i| C64::from_polar(1.0, 0.3 * i as f64 + 0.1)).collect();
        let d = Matrix::diagonal(3, &diag).unwrap();
        let u = v.matmul(&d).unwrap();
        assert!(relative_phase_loss(&u, &v).unwrap() < 1e-12);
        assert!(relative_phase_loss(&v, &v).unwrap() < 1e-12);
        // D V is a relative-phase gate only when V D' = D V for some diagonal D'.
        let u2 = d.matmul(&v).unwrap();
        assert!(relative_phase_loss(&u2, &v).unwrap() > 1e-3);
        let dd: Vec<C64> = (0..8).map(|j| (v.dagger().matmul(&u).unwrap()).get(j, j)).collect();
        let back = u.matmul(&Matrix::diagonal(3, &dd).unwrap().dagger()).unwrap();
        assert!(hs_distance(&back, &v).unwrap() < 1e-12);
        let x = GateKind::X.matrix(0.0).embed(1, &[0]).unwrap();
        assert!((relative_phase_loss(&x, &Matrix::identity(1)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn penalty_anchors() {
        let s = PenaltyShape::default();
        assert_eq!(cp_penalty(0.0, &s), 0.0);
        assert_eq!(cp_penalty(TAU, &s), 0.0);
        assert!((cp_penalty(PI, &s) - 1.0).abs() < 1e-15);
        assert!((cp_penalty(FRAC_PI_2, &s) - 2.0).abs() < 1e-15);
        assert!((cp_penalty(3.0 * FRAC_PI_2, &s) - 2.0).abs() < 1e-15);
        assert!((cp_penalty(-FRAC_PI_2, &s) - 2.0).abs() < 1e-15);
        assert_eq!(cp_penalty(0.03, &s), 0.0);
        assert_eq!(cp_penalty(FRAC_PI_2 + 0.04, &s), 2.0);
        assert!(cp_penalty(PI + 0.01, &s) > 1.0);
    }

    #[test]
    fn penalty_periodic_continuous_and_minima() {
        let s = PenaltyShape::default();
        let mut prev = cp_penalty(-1e-6, &s);
        let mut x = 0.0;
        while x < TAU {
            let v = cp_penalty(x, &s);
            assert!((v - prev).abs() < 1e-4, "jump at {x}");
            assert!((v - cp_penalty(x + TAU, &s)).abs() < 1e-12);
            assert!((v - cp_penalty(x - 3.0 * TAU, &s)).abs() < 1e-12);
            prev = v;
            x += 1e-6;
        }
        // Minimum regions on a 1e-3 grid: maximal runs of equal values with
        // strictly larger neighbours on both sides (wrapping around).
        let n = (TAU / 1e-3).round() as usize;
        let vals: Vec<f64> = (0..n).map(|i| cp_penalty(i as f64 * TAU / n as f64, &s)).collect();
        let mut centres = Vec::new();
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < i + n && (vals[(j + 1) % n] - vals[i]).abs() < 1e-12 {
                j += 1;
            }
            let left = vals[(i + n - 1) % n];
            let right = vals[(j + 1) % n];
            if left > vals[i] + 1e-12 && right > vals[i] + 1e-12 {
                centres.push(((i + j) as f64 / 2.0 * TAU / n as f64) % TAU);
            }
            i = j + 1;
        }
        // The identity plateau may be split by the wrap; merge by value.
        let minima: Vec<f64> = centres.iter().map(|&c| cp_penalty(c, &s)).collect();
        assert!(minima.iter().all(|&v| v == 0.0 || (v - 1.0).abs() < 1e-12), "{centres:?}");
        assert!(centres.iter().any(|&c| (c - PI).abs() < 2e-3));
        assert!(centres.iter().filter(|&&c| (c - PI).abs() > 2e-3).all(|&c| cp_penalty(c, &s) == 0.0));
    }

    #[test]
    fn regularized_total() {
        let t = Template::new(CouplingMap::connected(3).unwrap(), Entangler::CP, BlockStyle::XYZ, 6);
        let c = t.expand().unwrap();
        let spec = LossSpec::hilbert_schmidt(haar_random_unitary(3, 3).unwrap());
        let mut p: Vec<f64> = (0..c.num_params()).map(|i| 0.1 * i as f64).collect();
        let (total, raw) = regularized_loss(&c, &p, &spec).unwrap();
        assert_eq!(total, raw);
        let r = 1e-3;
        let spec = spec.with_reg_weight(r);
        let slots = c.cp_slots();
        for (i, &s) in slots.iter().enumerate() {
            p[s] = if i % 2 == 0 { PI } else { 0.0 };
        }
        let (total, raw) = regularized_loss(&c, &p, &spec).unwrap();
        assert!((total - raw - r * 3.0).abs() < 1e-15);
    }
}
