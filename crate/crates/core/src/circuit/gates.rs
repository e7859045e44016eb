use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::tensor::{GateMatrix, C64};

const O: C64 = C64::new(0.0, 0.0);
const I1: C64 = C64::new(1.0, 0.0);
const IM: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    RX,
    RY,
    RZ,
    P,
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    CZ,
    CX,
    CP,
}

impl GateKind {
    pub const ALL: [GateKind; 15] = [
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::P,
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::S,
        GateKind::Sdg,
        GateKind::T,
        GateKind::Tdg,
        GateKind::CZ,
        GateKind::CX,
        GateKind::CP,
    ];

    pub fn is_parametric(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::P | GateKind::CP)
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::CZ | GateKind::CX | GateKind::CP => 2,
            _ => 1,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ)
    }

    /// Entangling gates that cost one CZ.
    pub fn is_cz_like(self) -> bool {
        matches!(self, GateKind::CZ | GateKind::CX)
    }

    pub fn qasm_name(self) -> &'static str {
        match self {
            GateKind::RX => "rx",
            GateKind::RY => "ry",
            GateKind::RZ => "rz",
            GateKind::P => "p",
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::S => "s",
            GateKind::Sdg => "sdg",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::CZ => "cz",
            GateKind::CX => "cx",
            GateKind::CP => "cp",
        }
    }

    /// Gate matrix; `angle` is ignored for fixed gates.
    pub fn matrix(self, angle: f64) -> GateMatrix {
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            GateKind::RX => GateMatrix::one_qubit([[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]),
            GateKind::RY => GateMatrix::one_qubit([[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]),
            GateKind::RZ => GateMatrix::one_qubit([[C64::new(c, -s), O], [O, C64::new(c, s)]]),
            GateKind::P => GateMatrix::one_qubit([[I1, O], [O, C64::from_polar(1.0, angle)]]),
            GateKind::H => GateMatrix::one_qubit([[h, h], [h, -h]]),
            GateKind::X => GateMatrix::one_qubit([[O, I1], [I1, O]]),
            GateKind::Y => GateMatrix::one_qubit([[O, -IM], [IM, O]]),
            GateKind::Z => GateMatrix::one_qubit([[I1, O], [O, -I1]]),
            GateKind::S => GateMatrix::one_qubit([[I1, O], [O, IM]]),
            GateKind::Sdg => GateMatrix::one_qubit([[I1, O], [O, -IM]]),
            GateKind::T => GateMatrix::one_qubit([[I1, O], [O, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]]),
            GateKind::Tdg => GateMatrix::one_qubit([[I1, O], [O, C64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)]]),
            GateKind::CZ => GateMatrix::diag2([I1, I1, I1, -I1]),
            GateKind::CX => GateMatrix::two_qubit([[I1, O, O, O], [O, I1, O, O], [O, O, O, I1], [O, O, I1, O]]),
            GateKind::CP => GateMatrix::diag2([I1, I1, I1, C64::from_polar(1.0, angle)]),
        }
    }

    /// `K` with `dG(a)/da = K G(a)`, for parametric kinds.
    pub fn generator(self) -> Option<GateMatrix> {
        let mh = C64::new(0.0, -0.5);
        match self {
            GateKind::RX => Some(GateMatrix::one_qubit([[O, mh], [mh, O]])),
            GateKind::RY => Some(GateMatrix::one_qubit([[O, C64::new(-0.5, 0.0)], [C64::new(0.5, 0.0), O]])),
            GateKind::RZ => Some(GateMatrix::one_qubit([[mh, O], [O, -mh]])),
            GateKind::P => Some(GateMatrix::one_qubit([[O, O], [O, IM]])),
            GateKind::CP => Some(GateMatrix::diag2([O, O, O, IM])),
            _ => None,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.qasm_name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.qasm_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown gate '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn approx(a: &GateMatrix, b: &[C64], tol: f64) -> bool {
        a.entries().iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn all_gates_unitary() {
        for k in GateKind::ALL {
            for a in [0.0, 0.3, -2.1, PI] {
                assert!(k.matrix(a).is_unitary(1e-15), "{k}");
            }
        }
    }

    #[test]
    fn rotation_matches_pauli_exponential() {
        // exp(-i sigma a/2) = cos(a/2) I - i sin(a/2) sigma
        let a = 0.913_f64;
        let (c, s) = ((a / 2.0).cos(), (a / 2.0).sin());
        let paulis = [
            (GateKind::RX, [O, I1, I1, O]),
            (GateKind::RY, [O, -IM, IM, O]),
            (GateKind::RZ, [I1, O, O, -I1]),
        ];
        for (kind, sigma) in paulis {
            let expected: Vec<C64> = [I1, O, O, I1]
                .iter()
                .zip(sigma)
                .map(|(id, p)| id * c - IM * s * p)
                .collect();
            assert!(approx(&kind.matrix(a), &expected, 1e-15), "{kind}");
        }
    }

    #[test]
    fn cp_endpoints() {
        assert!(approx(&GateKind::CP.matrix(0.0), GateMatrix::diag2([I1; 4]).entries(), 1e-15));
        assert!(approx(&GateKind::CP.matrix(PI), GateKind::CZ.matrix(0.0).entries(), 1e-15));
    }

    #[test]
    fn rz_pi() {
        let m = GateKind::RZ.matrix(PI);
        let expected = [C64::from_polar(1.0, -PI / 2.0), O, O, C64::from_polar(1.0, PI / 2.0)];
        assert!(approx(&m, &expected, 1e-15));
    }

    #[test]
    fn generators_match_finite_difference() {
        let a = 0.37;
        let h = 1e-6;
        for k in GateKind::ALL.into_iter().filter(|k| k.is_parametric()) {
            let g = k.generator().unwrap();
            let analytic = g.matmul(&k.matrix(a)).unwrap();
            let (p, m) = (k.matrix(a + h), k.matrix(a - h));
            for (i, z) in analytic.entries().iter().enumerate() {
                let fd = (p.entries()[i] - m.entries()[i]) / (2.0 * h);
                assert!((z - fd).norm() < 1e-9, "{k}");
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("sdg".parse::<GateKind>().unwrap(), GateKind::Sdg);
        assert_eq!("CX".parse::<GateKind>().unwrap(), GateKind::CX);
        assert!("ccx".parse::<GateKind>().is_err());
    }
}
