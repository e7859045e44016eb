//! Circuit representation, templates, metrics and OpenQASM 2.0 I/O.

mod gates;
pub mod metrics;
pub mod qasm;
pub mod targets;
pub mod template;
pub mod topology;

pub use gates::GateKind;
pub use metrics::{cz_count, cz_depth, t_count, t_depth};
pub use qasm::{emit_qasm, parse_qasm};
pub use targets::{builtin_target, TargetName};
pub use template::{BlockStyle, Entangler, Template};
pub use topology::CouplingMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, MAX_QUBITS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    /// Index into the angle vector; present iff the kind is parametric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
}

/// Ordered gate list over `num_qubits` qubits plus its angle vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitIR {
    num_qubits: usize,
    gates: Vec<Gate>,
    params: Vec<f64>,
}

impl CircuitIR {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::UnsupportedQubitCount(num_qubits));
        }
        Ok(Self { num_qubits, gates: Vec::new(), params: Vec::new() })
    }

    /// Builds a circuit from raw parts, checking every structural invariant.
    pub fn from_parts(num_qubits: usize, gates: Vec<Gate>, params: Vec<f64>) -> Result<Self> {
        let mut c = Self::new(num_qubits)?;
        c.params = params;
        for g in gates {
            c.check_gate(&g)?;
            c.gates.push(g);
        }
        Ok(c)
    }

    fn check_gate(&self, g: &Gate) -> Result<()> {
        if g.qubits.len() != g.kind.arity() {
            return Err(Error::ArityMismatch { expected: g.kind.arity(), got: g.qubits.len() });
        }
        for (i, &q) in g.qubits.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(Error::QubitOutOfRange { index: q, num_qubits: self.num_qubits });
            }
            if g.qubits[..i].contains(&q) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        match (g.kind.is_parametric(), g.slot) {
            (true, Some(s)) if s < self.params.len() => Ok(()),
            (true, Some(s)) => Err(Error::ParamLength { expected: s + 1, got: self.params.len() }),
            (true, None) => Err(Error::InvalidArgument(format!("{} gate without an angle slot", g.kind))),
            (false, Some(_)) => Err(Error::InvalidArgument(format!("{} gate takes no angle", g.kind))),
            (false, None) => Ok(()),
        }
    }

    /// Appends a fixed (non-parametric) gate.
    pub fn push(&mut self, kind: GateKind, qubits: &[usize]) -> Result<()> {
        let g = Gate { kind, qubits: qubits.to_vec(), slot: None };
        self.check_gate(&g)?;
        self.gates.push(g);
        Ok(())
    }

    /// Appends a parametric gate with a fresh angle slot and returns the slot.
    pub fn push_param(&mut self, kind: GateKind, qubits: &[usize], angle: f64) -> Result<usize> {
        let slot = self.params.len();
        self.params.push(angle);
        let g = Gate { kind, qubits: qubits.to_vec(), slot: Some(slot) };
        if let Err(e) = self.check_gate(&g) {
            self.params.pop();
            return Err(e);
        }
        self.gates.push(g);
        Ok(slot)
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    #[inline]
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    #[inline]
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    #[inline]
    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.check_params(params)?;
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn with_params(mut self, params: &[f64]) -> Result<Self> {
        self.set_params(params)?;
        Ok(self)
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::ParamLength { expected: self.params.len(), got: params.len() });
        }
        Ok(())
    }

    /// Slots that feed CP gates.
    pub fn cp_slots(&self) -> Vec<usize> {
        self.gates.iter().filter(|g| g.kind == GateKind::CP).filter_map(|g| g.slot).collect()
    }

    /// Index of the gate owning `slot`.
    pub fn gate_of_slot(&self, slot: usize) -> Option<usize> {
        self.gates.iter().position(|g| g.slot == Some(slot))
    }

    /// Unitary at the stored angles.
    pub fn unitary(&self) -> Matrix {
        evaluate(self, &self.params).expect("stored params always match")
    }
}

/// Product of the gate matrices in circuit order at the given angles.
pub fn evaluate(c: &CircuitIR, params: &[f64]) -> Result<Matrix> {
    c.check_params(params)?;
    let mut u = Matrix::identity(c.num_qubits);
    for g in &c.gates {
        let angle = g.slot.map_or(0.0, |s| params[s]);
        u.apply_left_unchecked(&g.kind.matrix(angle), &g.qubits);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{apply_gate, C64};
    use std::f64::consts::PI;

    #[test]
    fn empty_circuit_is_identity() {
        let c = CircuitIR::new(3).unwrap();
        assert_eq!(evaluate(&c, &[]).unwrap(), Matrix::identity(3));
    }

    #[test]
    fn single_rz_pi() {
        let mut c = CircuitIR::new(1).unwrap();
        c.push_param(GateKind::RZ, &[0], PI).unwrap();
        let u = c.unitary();
        assert!((u.get(0, 0) - C64::from_polar(1.0, -PI / 2.0)).norm() < 1e-15);
        assert!((u.get(1, 1) - C64::from_polar(1.0, PI / 2.0)).norm() < 1e-15);
        assert_eq!(u.get(0, 1), C64::new(0.0, 0.0));
    }

    #[test]
    fn one_gate_circuits_match_gate_matrices() {
        for kind in GateKind::ALL {
            let mut c = CircuitIR::new(kind.arity()).unwrap();
            let qubits: Vec<usize> = (0..kind.arity()).collect();
            if kind.is_parametric() {
                c.push_param(kind, &qubits, 0.77).unwrap();
            } else {
                c.push(kind, &qubits).unwrap();
            }
            let expected = kind.matrix(0.77);
            let u = c.unitary();
            for (a, b) in u.data().iter().zip(expected.entries()) {
                assert!((a - b).norm() <= 1e-15, "{kind}");
            }
        }
    }

    #[test]
    fn cx_is_h_conjugated_cz() {
        for (a, b) in [(0, 1), (1, 0), (2, 0)] {
            let mut cx = CircuitIR::new(3).unwrap();
            cx.push(GateKind::CX, &[a, b]).unwrap();
            let mut hz = CircuitIR::new(3).unwrap();
            hz.push(GateKind::H, &[b]).unwrap();
            hz.push(GateKind::CZ, &[a, b]).unwrap();
            hz.push(GateKind::H, &[b]).unwrap();
            assert!(cx.unitary().max_abs_diff(&hz.unitary()) < 1e-12);
        }
    }

    #[test]
    fn structural_errors() {
        let mut c = CircuitIR::new(2).unwrap();
        assert!(c.push(GateKind::CZ, &[0]).is_err());
        assert!(c.push(GateKind::CZ, &[0, 0]).is_err());
        assert!(c.push(GateKind::H, &[2]).is_err());
        assert!(c.push(GateKind::RX, &[0]).is_err());
        assert!(c.push_param(GateKind::H, &[0], 1.0).is_err());
        assert_eq!(c.num_params(), 0);
        c.push_param(GateKind::RY, &[1], 0.1).unwrap();
        assert!(evaluate(&c, &[0.1, 0.2]).is_err());
        assert!(CircuitIR::new(0).is_err());
        assert!(CircuitIR::new(7).is_err());
    }

    #[test]
    fn evaluate_uses_apply_gate_order() {
        let mut c = CircuitIR::new(2).unwrap();
        c.push(GateKind::H, &[0]).unwrap();
        c.push(GateKind::CX, &[0, 1]).unwrap();
        let mut expected = apply_gate(&Matrix::identity(2), &GateKind::H.matrix(0.0), &[0]).unwrap();
        expected = apply_gate(&expected, &GateKind::CX.matrix(0.0), &[0, 1]).unwrap();
        assert_eq!(c.unitary(), expected);
    }
}
