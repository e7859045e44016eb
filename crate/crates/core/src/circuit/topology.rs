use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::MAX_QUBITS;

/// Graph of allowed two-qubit gate placements. Edge order is the layer order
/// used by templates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCoupling", into = "RawCoupling")]
pub struct CouplingMap {
    num_qubits: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<RawCoupling> for CouplingMap {
    type Error = Error;

    fn try_from(raw: RawCoupling) -> Result<Self> {
        CouplingMap::new(raw.n, raw.edges.into_iter().map(|[a, b]| (a, b)).collect())
    }
}

impl From<CouplingMap> for RawCoupling {
    fn from(c: CouplingMap) -> Self {
        RawCoupling { n: c.num_qubits, edges: c.edges.into_iter().map(|(a, b)| [a, b]).collect() }
    }
}

impl CouplingMap {
    pub fn new(num_qubits: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::UnsupportedQubitCount(num_qubits));
        }
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a >= num_qubits || b >= num_qubits {
                return Err(Error::InvalidCoupling(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidCoupling(format!("self-loop on qubit {a}")));
            }
            if edges[..i].iter().any(|&(c, d)| (c, d) == (a, b) || (c, d) == (b, a)) {
                return Err(Error::InvalidCoupling(format!("duplicate edge ({a},{b})")));
            }
        }
        let map = Self { num_qubits, edges };
        if !map.is_connected() {
            return Err(Error::InvalidCoupling("graph is not connected".into()));
        }
        Ok(map)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.num_qubits];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(q) = queue.pop_front() {
            for &(a, b) in &self.edges {
                let other = if a == q { b } else if b == q { a } else { continue };
                if !seen[other] {
                    seen[other] = true;
                    queue.push_back(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn connected(n: usize) -> Result<Self> {
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        Self::new(n, edges)
    }

    pub fn chain(n: usize) -> Result<Self> {
        Self::new(n, (0..n.saturating_sub(1)).map(|a| (a, a + 1)).collect())
    }

    pub fn star(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|b| (0, b)).collect())
    }

    /// Chain closed by `(n-1, 0)`; degenerates to the chain below three qubits.
    pub fn ring(n: usize) -> Result<Self> {
        let mut edges: Vec<_> = (0..n.saturating_sub(1)).map(|a| (a, a + 1)).collect();
        if n >= 3 {
            edges.push((n - 1, 0));
        }
        Self::new(n, edges)
    }

    pub fn preset(name: &str, n: usize) -> Result<Self> {
        match name {
            "connected" => Self::connected(n),
            "chain" => Self::chain(n),
            "star" => Self::star(n),
            "ring" => Self::ring(n),
            other => Err(Error::InvalidCoupling(format!("unknown preset '{other}'"))),
        }
    }

    /// Parses `{"n": int, "edges": [[i, j], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    #[inline]
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_edge_orders() {
        assert_eq!(CouplingMap::chain(4).unwrap().edges(), &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(CouplingMap::star(4).unwrap().edges(), &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(CouplingMap::connected(3).unwrap().edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(CouplingMap::ring(4).unwrap().edges(), &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(CouplingMap::ring(2).unwrap().edges(), &[(0, 1)]);
        assert_eq!(CouplingMap::connected(1).unwrap().edges(), &[]);
    }

    #[test]
    fn invariants_rejected() {
        assert!(CouplingMap::new(3, vec![(0, 0), (1, 2)]).is_err());
        assert!(CouplingMap::new(3, vec![(0, 1), (1, 0), (1, 2)]).is_err());
        assert!(CouplingMap::new(3, vec![(0, 1)]).is_err());
        assert!(CouplingMap::new(3, vec![(0, 3)]).is_err());
        assert!(CouplingMap::preset("hex", 3).is_err());
    }

    #[test]
    fn json_form() {
        let c = CouplingMap::from_json(r#"{"n": 3, "edges": [[0,1],[1,2]]}"#).unwrap();
        assert_eq!(c, CouplingMap::chain(3).unwrap());
        assert_eq!(CouplingMap::from_json(&c.to_json()).unwrap(), c);
        assert!(CouplingMap::from_json(r#"{"n": 3, "edges": [[0,1]]}"#).is_err());
        assert!(CouplingMap::from_json(r#"{"n": 2, "edges": [[0,1]], "x": 1}"#).is_err());
    }
}
