use serde::{Deserialize, Serialize};

use super::{CircuitIR, CouplingMap, GateKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entangler {
    CP,
    CZ,
}

/// Rotation content of a single-qubit block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockStyle {
    /// RX, then RY, then RZ.
    #[default]
    XYZ,
    /// RX, then RZ.
    XZ,
}

impl BlockStyle {
    pub fn rotations(self) -> &'static [GateKind] {
        match self {
            BlockStyle::XYZ => &[GateKind::RX, GateKind::RY, GateKind::RZ],
            BlockStyle::XZ => &[GateKind::RX, GateKind::RZ],
        }
    }
}

/// Topology-aware ansatz: an initial single-qubit block on every wire, then
/// `k` entangling blocks cycling through `layer_order`, the last layer
/// truncated. Each entangling block is the two-qubit gate followed by one
/// single-qubit block on each of its qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub coupling: CouplingMap,
    pub entangler: Entangler,
    pub block_style: BlockStyle,
    pub k: usize,
    pub layer_order: Vec<(usize, usize)>,
}

impl Template {
    /// Template whose layer is the coupling map's edge list.
    pub fn new(coupling: CouplingMap, entangler: Entangler, block_style: BlockStyle, k: usize) -> Self {
        let layer_order = coupling.edges().to_vec();
        Self { coupling, entangler, block_style, k, layer_order }
    }

    pub fn num_qubits(&self) -> usize {
        self.coupling.num_qubits()
    }

    pub fn num_params(&self) -> usize {
        let per_block = self.block_style.rotations().len();
        let cp = usize::from(self.entangler == Entangler::CP);
        per_block * self.num_qubits() + (2 * per_block + cp) * self.k
    }

    /// The edge used by each of the `k` entangling blocks.
    pub fn edge_sequence(&self) -> Vec<(usize, usize)> {
        if self.layer_order.is_empty() {
            return Vec::new();
        }
        self.layer_order.iter().copied().cycle().take(self.k).collect()
    }

    /// Expands to a circuit with every angle set to zero.
    pub fn expand(&self) -> Result<CircuitIR> {
        if self.k > 0 && self.layer_order.is_empty() {
            return Err(Error::InvalidTemplate("no edges to place entangling gates on".into()));
        }
        let n = self.num_qubits();
        let mut c = CircuitIR::new(n)?;
        let rotations = self.block_style.rotations();
        for q in 0..n {
            for &r in rotations {
                c.push_param(r, &[q], 0.0)?;
            }
        }
        for (a, b) in self.edge_sequence() {
            match self.entangler {
                Entangler::CZ => c.push(GateKind::CZ, &[a, b])?,
                Entangler::CP => {
                    c.push_param(GateKind::CP, &[a, b], 0.0)?;
                }
            }
            for q in [a, b] {
                for &r in rotations {
                    c.push_param(r, &[q], 0.0)?;
                }
            }
        }
        debug_assert_eq!(c.num_params(), self.num_params());
        Ok(c)
    }
}

/// Shorthand used by callers that only need the expanded circuit.
pub fn expand_template(t: &Template) -> Result<CircuitIR> {
    t.expand()
}
