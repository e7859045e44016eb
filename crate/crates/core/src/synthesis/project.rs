use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::circuit::{CircuitIR, GateKind};
use crate::error::Result;

/// What happened to one CP gate during projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpFate {
    Deleted,
    Cz,
    Expanded,
}

/// Projected CZ circuit with its inherited angles.
#[derive(Clone, Debug)]
pub struct Projection {
    pub circuit: CircuitIR,
    pub params: Vec<f64>,
    pub fates: Vec<CpFate>,
}

impl Projection {
    pub fn cz_count(&self) -> usize {
        crate::circuit::cz_count(&self.circuit)
    }
}

fn reduce(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

/// Classifies a CP angle: near 0 (mod 2π), near π, or neither.
pub fn cp_fate(angle: f64, threshold: f64) -> CpFate {
    let a = reduce(angle);
    if a.min(TAU - a) <= threshold {
        CpFate::Deleted
    } else if (a - PI).abs() <= threshold {
        CpFate::Cz
    } else {
        CpFate::Expanded
    }
}

/// Number of CZ gates the projection of `params` would contain, without
/// building the circuit.
pub fn projected_cz_count(c: &CircuitIR, params: &[f64], threshold: f64) -> usize {
    c.gates()
        .iter()
        .map(|g| match (g.kind, g.slot) {
            (GateKind::CP, Some(s)) => match cp_fate(params[s], threshold) {
                CpFate::Deleted => 0,
                CpFate::Cz => 1,
                CpFate::Expanded => 2,
            },
            (k, _) if k.is_cz_like() => 1,
            _ => 0,
        })
        .sum()
}

/// Appends `CP(a)` on `(p, q)` as two CZ gates plus rotations, equal to
/// `CP(a)` up to global phase.
pub fn push_cp_expansion(c: &mut CircuitIR, p: usize, q: usize, a: f64) -> Result<()> {
    c.push_param(GateKind::RY, &[q], FRAC_PI_2)?;
    c.push(GateKind::CZ, &[p, q])?;
    c.push_param(GateKind::RX, &[q], -a / 2.0)?;
    c.push(GateKind::CZ, &[p, q])?;
    c.push_param(GateKind::RY, &[q], -FRAC_PI_2)?;
    c.push_param(GateKind::RZ, &[p], a / 2.0)?;
    c.push_param(GateKind::RZ, &[q], a / 2.0)?;
    Ok(())
}

/// Replaces every CP gate by the identity, a CZ, or the two-CZ expansion,
/// carrying all other angles over unchanged.
pub fn project_cp_to_cz(c: &CircuitIR, params: &[f64], cp_threshold: f64) -> Result<Projection> {
    c.check_params(params)?;
    let mut out = CircuitIR::new(c.num_qubits())?;
    let mut fates = Vec::new();
    for g in c.gates() {
        match (g.kind, g.slot) {
            (GateKind::CP, Some(s)) => {
                let fate = cp_fate(params[s], cp_threshold);
                fates.push(fate);
                match fate {
                    CpFate::Deleted => {}
                    CpFate::Cz => out.push(GateKind::CZ, &g.qubits)?,
                    CpFate::Expanded => push_cp_expansion(&mut out, g.qubits[0], g.qubits[1], reduce(params[s]))?,
                }
            }
            (kind, Some(s)) => {
                out.push_param(kind, &g.qubits, params[s])?;
            }
            (kind, None) => out.push(kind, &g.qubits)?,
        }
    }
    let params = out.params().to_vec();
    Ok(Projection { circuit: out, params, fates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{evaluate, BlockStyle, CouplingMap, Entangler, Template};
    use crate::losses::hs_distance;

    #[test]
    fn expansion_is_exact() {
        for a in [0.0, 0.3, 1.0, FRAC_PI_2, 2.5, PI, 4.0, 6.1] {
            let mut cp = CircuitIR::new(2).unwrap();
            cp.push_param(GateKind::CP, &[0, 1], a).unwrap();
            let mut ex = CircuitIR::new(2).unwrap();
            push_cp_expansion(&mut ex, 0, 1, a).unwrap();
            let u = cp.unitary();
            let v = ex.unitary();
            assert!(hs_distance(&u, &v).unwrap() < 1e-14, "a = {a}");
            let z = crate::tensor::hs_overlap(&u, &v).unwrap() / 4.0;
            assert!((z.norm() - 1.0).abs() < 1e-14);
            assert!(u.scale(z).max_abs_diff(&v) < 1e-14);
        }
    }

    #[test]
    fn rule_application() {
        let t = Template::new(CouplingMap::chain(3).unwrap(), Entangler::CP, BlockStyle::XYZ, 3);
        let c = t.expand().unwrap();
        let mut p = vec![0.4; c.num_params()];
        let cp = c.cp_slots();
        for (s, a) in cp.iter().zip([0.05, PI - 0.1, FRAC_PI_2]) {
            p[*s] = a;
        }
        let proj = project_cp_to_cz(&c, &p, 0.2).unwrap();
        assert_eq!(proj.fates, vec![CpFate::Deleted, CpFate::Cz, CpFate::Expanded]);
        assert_eq!(proj.cz_count(), 3);
        assert_eq!(projected_cz_count(&c, &p, 0.2), 3);
    }

    #[test]
    fn angles_at_pi_are_bit_exact() {
        let t = Template::new(CouplingMap::connected(3).unwrap(), Entangler::CP, BlockStyle::XYZ, 4);
        let c = t.expand().unwrap();
        let mut p: Vec<f64> = (0..c.num_params()).map(|i| (i as f64 * 0.37).sin()).collect();
        for s in c.cp_slots() {
            p[s] = PI;
        }
        let proj = project_cp_to_cz(&c, &p, 0.2).unwrap();
        assert_eq!(proj.cz_count(), 4);
        let u = evaluate(&c, &p).unwrap();
        let v = evaluate(&proj.circuit, &proj.params).unwrap();
        assert!(u.max_abs_diff(&v) < 1e-15);
    }

    #[test]
    fn negative_and_wrapped_angles() {
        assert_eq!(cp_fate(-0.1, 0.2), CpFate::Deleted);
        assert_eq!(cp_fate(TAU + 0.1, 0.2), CpFate::Deleted);
        assert_eq!(cp_fate(-PI + 0.15, 0.2), CpFate::Cz);
        assert_eq!(cp_fate(1.0, 0.2), CpFate::Expanded);
    }
}
