//! Gate tallies and metric-restricted depths.
//!
//! Depth is the longest path through the circuit DAG (gates ordered along each
//! wire) where only gates of the measured type add a layer.

use super::{CircuitIR, GateKind};
use crate::error::{Error, Result};

fn depth_of(c: &CircuitIR, counted: impl Fn(GateKind) -> bool) -> usize {
    let mut wire = vec![0usize; c.num_qubits()];
    for g in c.gates() {
        let start = g.qubits.iter().map(|&q| wire[q]).max().unwrap_or(0);
        let end = start + usize::from(counted(g.kind));
        for &q in &g.qubits {
            wire[q] = end;
        }
    }
    wire.into_iter().max().unwrap_or(0)
}

/// Number of CZ gates; CX counts too since it is a CZ up to Hadamards.
pub fn cz_count(c: &CircuitIR) -> usize {
    c.gates().iter().filter(|g| g.kind.is_cz_like()).count()
}

pub fn cz_depth(c: &CircuitIR) -> usize {
    depth_of(c, GateKind::is_cz_like)
}

fn is_t(kind: GateKind) -> bool {
    matches!(kind, GateKind::T | GateKind::Tdg)
}

fn require_clifford_t(c: &CircuitIR) -> Result<()> {
    match c.gates().iter().position(|g| g.kind.is_parametric()) {
        Some(i) => Err(Error::NotCliffordT(format!("gate {i} is a parametric {}", c.gates()[i].kind))),
        None => Ok(()),
    }
}

pub fn t_count(c: &CircuitIR) -> Result<usize> {
    require_clifford_t(c)?;
    Ok(c.gates().iter().filter(|g| is_t(g.kind)).count())
}

pub fn t_depth(c: &CircuitIR) -> Result<usize> {
    require_clifford_t(c)?;
    Ok(depth_of(c, is_t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_cz_share_a_layer() {
        let mut c = CircuitIR::new(4).unwrap();
        c.push(GateKind::CZ, &[0, 1]).unwrap();
        c.push(GateKind::CZ, &[2, 3]).unwrap();
        c.push(GateKind::CZ, &[1, 2]).unwrap();
        assert_eq!(cz_count(&c), 3);
        assert_eq!(cz_depth(&c), 2);
    }

    #[test]
    fn rotations_only() {
        let mut c = CircuitIR::new(2).unwrap();
        c.push_param(GateKind::RX, &[0], 0.1).unwrap();
        c.push_param(GateKind::RZ, &[1], 0.1).unwrap();
        assert_eq!(cz_count(&c), 0);
        assert_eq!(cz_depth(&c), 0);
        assert!(t_count(&c).is_err());
        assert!(t_depth(&c).is_err());
    }

    #[test]
    fn other_gates_are_transparent() {
        let mut c = CircuitIR::new(3).unwrap();
        c.push(GateKind::T, &[0]).unwrap();
        c.push(GateKind::H, &[1]).unwrap();
        c.push(GateKind::CX, &[0, 1]).unwrap();
        c.push(GateKind::Tdg, &[1]).unwrap();
        c.push(GateKind::T, &[2]).unwrap();
        c.push(GateKind::CZ, &[1, 2]).unwrap();
        c.push(GateKind::T, &[2]).unwrap();
        assert_eq!(t_count(&c).unwrap(), 4);
        // T(0) -> CX carries depth 1 onto wire 1 -> Tdg makes 2 -> CZ syncs wire 2 at 2 -> T gives 3.
        assert_eq!(t_depth(&c).unwrap(), 3);
        assert_eq!(cz_depth(&c), 2);
    }
}
