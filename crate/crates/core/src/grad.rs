//! Exact gradients of the regularized loss with respect to circuit angles.
//!
//! One forward sweep stores the prefix product after every parametric gate.
//! The backward sweep carries `B_j = W G_m ... G_{j+1}` (kept transposed so
//! every update is a row operation) and reads off each derivative as
//! `Re Tr(B_j K_j A_j)`, where `dG_j/da = K_j G_j` and `A_j` is the stored
//! prefix. The total cost is about three forward evaluations.

use crate::circuit::CircuitIR;
use crate::error::Result;
use crate::losses::{penalty_sum, LossSpec};
use crate::tensor::{trace_local, GateMatrix, Matrix};

/// Reusable buffers for repeated gradient evaluations of one circuit.
#[derive(Clone, Debug)]
pub struct GradientWorkspace {
    prefixes: Vec<Matrix>,
    gate_mats: Vec<GateMatrix>,
    cp_slots: Vec<usize>,
}

impl GradientWorkspace {
    pub fn new(c: &CircuitIR) -> Self {
        let n_param_gates = c.gates().iter().filter(|g| g.slot.is_some()).count();
        Self {
            prefixes: vec![Matrix::zeros(c.num_qubits()); n_param_gates],
            gate_mats: Vec::with_capacity(c.gates().len()),
            cp_slots: c.cp_slots(),
        }
    }

    /// Writes the gradient into `grad` and returns `(total, raw)` losses.
    pub fn loss_and_gradient(
        &mut self,
        c: &CircuitIR,
        params: &[f64],
        spec: &LossSpec,
        grad: &mut [f64],
    ) -> Result<(f64, f64)> {
        c.check_params(params)?;
        assert_eq!(grad.len(), params.len(), "gradient buffer length");
        grad.fill(0.0);

        self.gate_mats.clear();
        let mut a = Matrix::identity(c.num_qubits());
        let mut k = 0;
        for g in c.gates() {
            let m = g.kind.matrix(g.slot.map_or(0.0, |s| params[s]));
            a.apply_left_unchecked(&m, &g.qubits);
            self.gate_mats.push(m);
            if g.slot.is_some() {
                self.prefixes[k].data_mut().copy_from_slice(a.data());
                k += 1;
            }
        }

        let (raw, mut bt) = spec.raw_with_adjoint(&a);
        for (g, m) in c.gates().iter().zip(&self.gate_mats).rev() {
            if let Some(slot) = g.slot {
                k -= 1;
                let gen = g.kind.generator().expect("parametric gate has a generator");
                grad[slot] += trace_local(&bt, &gen, &g.qubits, &self.prefixes[k]).re;
            }
            bt.apply_left_unchecked(&m.transpose(), &g.qubits);
        }

        let mut total = raw;
        if spec.reg_weight != 0.0 {
            for &s in &self.cp_slots {
                let (value, slope) = spec.penalty.value_and_slope(params[s]);
                total += spec.reg_weight * value;
                grad[s] += spec.reg_weight * slope;
            }
        }
        Ok((total, raw))
    }
}

/// Gradient of the regularized loss.
pub fn gradient(c: &CircuitIR, params: &[f64], spec: &LossSpec) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; params.len()];
    GradientWorkspace::new(c).loss_and_gradient(c, params, spec, &mut grad)?;
    Ok(grad)
}

/// Regularized loss only.
pub fn loss(c: &CircuitIR, params: &[f64], spec: &LossSpec) -> Result<f64> {
    let u = crate::circuit::evaluate(c, params)?;
    Ok(spec.raw(&u)? + penalty_sum(c, params, spec))
}

/// Central differences `(L(a + h e_i) - L(a - h e_i)) / 2h`.
pub fn finite_difference_gradient(c: &CircuitIR, params: &[f64], spec: &LossSpec, h: f64) -> Result<Vec<f64>> {
    assert!(h > 0.0, "step must be positive");
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        work[i] = params[i] + h;
        let plus = loss(c, &work, spec)?;
        work[i] = params[i] - h;
        let minus = loss(c, &work, spec)?;
        work[i] = params[i];
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

/// Quasi-Newton (BFGS with backtracking) descent over the slots not listed
/// in `frozen`, for polishing a point that is already close to a minimum.
/// Returns the best parameters found and their regularized loss.
pub fn polish(
    c: &CircuitIR,
    params: &[f64],
    spec: &LossSpec,
    frozen: &[usize],
    max_iterations: usize,
    stop_below: f64,
) -> Result<(Vec<f64>, f64)> {
    let free: Vec<usize> = (0..params.len()).filter(|s| !frozen.contains(s)).collect();
    let mut ws = GradientWorkspace::new(c);
    let mut full = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    let n = free.len();
    let (mut f, _) = ws.loss_and_gradient(c, &full, spec, &mut grad)?;
    if n == 0 || !f.is_finite() {
        return Ok((full, f));
    }
    let mut g: Vec<f64> = free.iter().map(|&s| grad[s]).collect();
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut [f64], scale: f64| {
        h.fill(0.0);
        for i in 0..n {
            h[i * n + i] = scale;
        }
    };
    reset(&mut h, 1.0);
    let mut first = true;
    for _ in 0..max_iterations {
        if f <= stop_below {
            break;
        }
        let mut d: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            reset(&mut h, 1.0);
            d = g.iter().map(|x| -x).collect();
            slope = -g.iter().map(|x| x * x).sum::<f64>();
        }
        if slope == 0.0 {
            break;
        }
        let mut t = 1.0;
        let mut trial = full.clone();
        let mut accepted = None;
        for _ in 0..50 {
            for (k, &s) in free.iter().enumerate() {
                trial[s] = full[s] + t * d[k];
            }
            let (ft, _) = ws.loss_and_gradient(c, &trial, spec, &mut grad)?;
            if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                accepted = Some(ft);
                break;
            }
            t *= 0.5;
        }
        let Some(ft) = accepted else { break };
        let g_new: Vec<f64> = free.iter().map(|&s| grad[s]).collect();
        let sv: Vec<f64> = d.iter().map(|x| t * x).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = sv.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            if first {
                let yy: f64 = yv.iter().map(|x| x * x).sum();
                reset(&mut h, sy / yy);
                first = false;
            }
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * yv[j]).sum()).collect();
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += (1.0 + yhy * rho) * rho * sv[i] * sv[j] - rho * (hy[i] * sv[j] + sv[i] * hy[j]);
                }
            }
        }
        full = trial;
        f = ft;
        g = g_new;
    }
    Ok((full, f))
}
