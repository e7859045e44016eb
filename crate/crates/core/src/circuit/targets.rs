use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetName {
    /// Multi-controlled X with the last qubit as target.
    CnX,
    /// Multi-controlled Z, `diag(1, ..., 1, -1)`.
    CnZ,
    /// Multi-controlled square root of X.
    CnRootX,
    QFT,
}

impl FromStr for TargetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnx" | "ccx" | "toffoli" | "mcx" => Ok(TargetName::CnX),
            "cnz" | "ccz" | "mcz" => Ok(TargetName::CnZ),
            "cnrootx" | "cnsqrtx" | "mcsx" => Ok(TargetName::CnRootX),
            "qft" => Ok(TargetName::QFT),
            _ => Err(Error::UnknownTarget(s.to_string())),
        }
    }
}

impl fmt::Display for TargetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetName::CnX => "cnx",
            TargetName::CnZ => "cnz",
            TargetName::CnRootX => "cnrootx",
            TargetName::QFT => "qft",
        })
    }
}

/// Exact matrix of a named gate on `n` qubits (`2 <= n <= 6`).
pub fn builtin_target(name: TargetName, n: usize) -> Result<Matrix> {
    if !(2..=6).contains(&n) {
        return Err(Error::UnsupportedQubitCount(n));
    }
    let d = 1usize << n;
    let mut m = Matrix::identity(n);
    let (a, b) = (d - 2, d - 1);
    match name {
        TargetName::CnZ => m.set(b, b, C64::new(-1.0, 0.0)),
        TargetName::CnX => {
            m.set(a, a, C64::new(0.0, 0.0));
            m.set(b, b, C64::new(0.0, 0.0));
            m.set(a, b, C64::new(1.0, 0.0));
            m.set(b, a, C64::new(1.0, 0.0));
        }
        TargetName::CnRootX => {
            let p = C64::new(0.5, 0.5);
            let q = C64::new(0.5, -0.5);
            m.set(a, a, p);
            m.set(b, b, p);
            m.set(a, b, q);
            m.set(b, a, q);
        }
        TargetName::QFT => {
            let norm = 1.0 / (d as f64).sqrt();
            m = Matrix::from_fn(n, |r, c| {
                let phase = 2.0 * PI * ((r * c) % d) as f64 / d as f64;
                C64::from_polar(norm, phase)
            });
        }
    }
    Ok(m)
}
