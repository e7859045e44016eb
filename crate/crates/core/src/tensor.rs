//! Dense complex matrices sized for `2^n x 2^n` unitaries with `n <= 6`.
//!
//! Qubit `q` of an `n`-qubit register maps to bit `n - 1 - q` of a basis
//! index, so qubit 0 is the most significant bit. Local gate matrices are
//! indexed the same way: for a two-qubit gate on `(a, b)` the local basis
//! index is `2 * bit(a) + bit(b)`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const MAX_QUBITS: usize = 6;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Square row-major complex matrix of dimension `2^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    num_qubits: usize,
    dim: usize,
    data: Vec<C64>,
}

/// Matrices produced by gates and circuits; unitarity is a property of the
/// value, not enforced by the type.
pub type UnitaryMatrix = Matrix;

impl Matrix {
    pub fn zeros(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        Self { num_qubits, dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(num_qubits: usize) -> Self {
        let mut m = Self::zeros(num_qubits);
        for i in 0..m.dim {
            m.data[i * m.dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(num_qubits: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let dim = 1usize << num_qubits;
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { num_qubits, dim, data }
    }

    pub fn from_vec(num_qubits: usize, data: Vec<C64>) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(dim * dim, data.len()));
        }
        Ok(Self { num_qubits, dim, data })
    }

    pub fn diagonal(num_qubits: usize, diag: &[C64]) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if diag.len() != dim {
            return Err(Error::DimensionMismatch(dim, diag.len()));
        }
        let mut m = Self::zeros(num_qubits);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * dim + i] = *d;
        }
        Ok(m)
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[C64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.num_qubits, |r, c| self.get(c, r))
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.num_qubits, |r, c| self.get(c, r).conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            num_qubits: self.num_qubits,
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            num_qubits: self.num_qubits,
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Plain `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let d = self.dim;
        let mut out = Matrix::zeros(self.num_qubits);
        for r in 0..d {
            let out_row = &mut out.data[r * d..(r + 1) * d];
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == ZERO {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest elementwise deviation of `U^dagger U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.dagger().matmul(self).expect("same dimension");
        prod.max_abs_diff(&Matrix::identity(self.num_qubits))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// In place `self <- (G (x) I) * self`.
    pub fn apply_left(&mut self, gate: &GateMatrix, qubits: &[usize]) -> Result<()> {
        check_operands(self.num_qubits, gate, qubits)?;
        self.apply_left_unchecked(gate, qubits);
        Ok(())
    }

    /// In place `self <- self * (G (x) I)`.
    pub fn apply_right(&mut self, gate: &GateMatrix, qubits: &[usize]) -> Result<()> {
        check_operands(self.num_qubits, gate, qubits)?;
        self.apply_right_unchecked(gate, qubits);
        Ok(())
    }

    pub(crate) fn apply_left_unchecked(&mut self, gate: &GateMatrix, qubits: &[usize]) {
        let d = self.dim;
        let n = self.num_qubits;
        match gate.arity {
            1 => {
                let bit = 1usize << (n - 1 - qubits[0]);
                let g = &gate.entries;
                if gate.diagonal {
                    for i in (0..d).filter(|i| i & bit == 0) {
                        scale_row(&mut self.data, d, i, g[0]);
                        scale_row(&mut self.data, d, i | bit, g[3]);
                    }
                    return;
                }
                for i in (0..d).filter(|i| i & bit == 0) {
                    let j = i | bit;
                    let (lo, hi) = self.data.split_at_mut(j * d);
                    let ri = &mut lo[i * d..(i + 1) * d];
                    let rj = &mut hi[..d];
                    for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
                        let (x, y) = (*a, *b);
                        *a = g[0] * x + g[1] * y;
                        *b = g[2] * x + g[3] * y;
                    }
                }
            }
            _ => {
                let b1 = 1usize << (n - 1 - qubits[0]);
                let b2 = 1usize << (n - 1 - qubits[1]);
                let g = &gate.entries;
                if gate.diagonal {
                    for i in (0..d).filter(|i| i & (b1 | b2) == 0) {
                        let rows = [i, i | b2, i | b1, i | b1 | b2];
                        for (l, r) in rows.iter().enumerate() {
                            let f = g[l * 5];
                            if f != ONE {
                                scale_row(&mut self.data, d, *r, f);
                            }
                        }
                    }
                    return;
                }
                let mut tmp = [ZERO; 4];
                for i in (0..d).filter(|i| i & (b1 | b2) == 0) {
                    let rows = [i, i | b2, i | b1, i | b1 | b2];
                    for c in 0..d {
                        for (l, r) in rows.iter().enumerate() {
                            tmp[l] = self.data[r * d + c];
                        }
                        for (l, r) in rows.iter().enumerate() {
                            let row = &g[l * 4..l * 4 + 4];
                            self.data[r * d + c] =
                                row[0] * tmp[0] + row[1] * tmp[1] + row[2] * tmp[2] + row[3] * tmp[3];
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn apply_right_unchecked(&mut self, gate: &GateMatrix, qubits: &[usize]) {
        let d = self.dim;
        let n = self.num_qubits;
        let g = &gate.entries;
        match gate.arity {
            1 => {
                let bit = 1usize << (n - 1 - qubits[0]);
                for row in self.data.chunks_exact_mut(d) {
                    for c in (0..d).filter(|c| c & bit == 0) {
                        let (x, y) = (row[c], row[c | bit]);
                        row[c] = x * g[0] + y * g[2];
                        row[c | bit] = x * g[1] + y * g[3];
                    }
                }
            }
            _ => {
                let b1 = 1usize << (n - 1 - qubits[0]);
                let b2 = 1usize << (n - 1 - qubits[1]);
                for row in self.data.chunks_exact_mut(d) {
                    for c in (0..d).filter(|c| c & (b1 | b2) == 0) {
                        let cols = [c, c | b2, c | b1, c | b1 | b2];
                        let x = [row[cols[0]], row[cols[1]], row[cols[2]], row[cols[3]]];
                        for (l, col) in cols.iter().enumerate() {
                            row[*col] = x[0] * g[l] + x[1] * g[4 + l] + x[2] * g[8 + l] + x[3] * g[12 + l];
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn scale_row(data: &mut [C64], d: usize, row: usize, f: C64) {
    for z in &mut data[row * d..(row + 1) * d] {
        *z *= f;
    }
}

fn check_operands(num_qubits: usize, gate: &GateMatrix, qubits: &[usize]) -> Result<()> {
    if qubits.len() != gate.arity {
        return Err(Error::ArityMismatch { expected: gate.arity, got: qubits.len() });
    }
    for (i, &q) in qubits.iter().enumerate() {
        if q >= num_qubits {
            return Err(Error::QubitOutOfRange { index: q, num_qubits });
        }
        if qubits[..i].contains(&q) {
            return Err(Error::DuplicateQubit(q));
        }
    }
    Ok(())
}

/// A 2x2 or 4x4 local gate matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateMatrix {
    arity: usize,
    entries: [C64; 16],
    diagonal: bool,
}

impl GateMatrix {
    pub fn new(arity: usize, entries: &[C64]) -> Result<Self> {
        let dim = match arity {
            1 => 2,
            2 => 4,
            other => return Err(Error::ArityMismatch { expected: 2, got: other }),
        };
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(dim * dim, entries.len()));
        }
        let mut buf = [ZERO; 16];
        buf[..entries.len()].copy_from_slice(entries);
        Ok(Self::from_array(arity, buf))
    }

    pub const fn one_qubit(m: [[C64; 2]; 2]) -> Self {
        let mut entries = [ZERO; 16];
        entries[0] = m[0][0];
        entries[1] = m[0][1];
        entries[2] = m[1][0];
        entries[3] = m[1][1];
        let diagonal = m[0][1].re == 0.0 && m[0][1].im == 0.0 && m[1][0].re == 0.0 && m[1][0].im == 0.0;
        Self { arity: 1, entries, diagonal }
    }

    pub fn two_qubit(m: [[C64; 4]; 4]) -> Self {
        let mut entries = [ZERO; 16];
        for (r, row) in m.iter().enumerate() {
            entries[r * 4..r * 4 + 4].copy_from_slice(row);
        }
        Self::from_array(2, entries)
    }

    pub fn diag2(d: [C64; 4]) -> Self {
        let mut entries = [ZERO; 16];
        for (i, v) in d.iter().enumerate() {
            entries[i * 5] = *v;
        }
        Self { arity: 2, entries, diagonal: true }
    }

    fn from_array(arity: usize, entries: [C64; 16]) -> Self {
        let dim = 1 << arity;
        let diagonal = (0..dim).all(|r| (0..dim).all(|c| r == c || entries[r * dim + c] == ZERO));
        Self { arity, entries, diagonal }
    }

    #[inline]
    pub fn arity(&self) -> usize {
        self.arity
    }

    #[inline]
    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    #[inline]
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim() + col]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries[..self.dim() * self.dim()]
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim();
        let mut e = [ZERO; 16];
        for r in 0..d {
            for c in 0..d {
                e[r * d + c] = self.entries[c * d + r];
            }
        }
        Self { arity: self.arity, entries: e, diagonal: self.diagonal }
    }

    pub fn dagger(&self) -> Self {
        let mut t = self.transpose();
        for z in &mut t.entries {
            *z = z.conj();
        }
        t
    }

    pub fn matmul(&self, other: &GateMatrix) -> Result<GateMatrix> {
        if self.arity != other.arity {
            return Err(Error::ArityMismatch { expected: self.arity, got: other.arity });
        }
        let d = self.dim();
        let mut e = [ZERO; 16];
        for r in 0..d {
            for c in 0..d {
                e[r * d + c] = (0..d).map(|k| self.entries[r * d + k] * other.entries[k * d + c]).sum();
            }
        }
        Ok(Self::from_array(self.arity, e))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let p = self.dagger().matmul(self).expect("same arity");
        let d = self.dim();
        (0..d).all(|r| (0..d).all(|c| (p.get(r, c) - if r == c { ONE } else { ZERO }).norm() <= tol))
    }

    /// Embed as a full matrix on `num_qubits` qubits.
    pub fn embed(&self, num_qubits: usize, qubits: &[usize]) -> Result<Matrix> {
        apply_gate(&Matrix::identity(num_qubits), self, qubits)
    }
}

/// Returns `(G (x) I_rest) * m` with `G` acting on `qubits`.
pub fn apply_gate(m: &Matrix, gate: &GateMatrix, qubits: &[usize]) -> Result<Matrix> {
    let mut out = m.clone();
    out.apply_left(gate, qubits)?;
    Ok(out)
}

/// `Tr(U^dagger V)`.
pub fn hs_overlap(u: &Matrix, v: &Matrix) -> Result<C64> {
    if u.dim != v.dim {
        return Err(Error::DimensionMismatch(u.dim, v.dim));
    }
    Ok(u.data.iter().zip(&v.data).map(|(a, b)| a.conj() * b).sum())
}

/// `Tr(B (K (x) I) A)` given `bt = B^T`.
pub(crate) fn trace_local(bt: &Matrix, k: &GateMatrix, qubits: &[usize], a: &Matrix) -> C64 {
    let d = a.dim;
    let n = a.num_qubits;
    let dot = |r1: usize, r2: usize| -> C64 {
        a.row(r1).iter().zip(bt.row(r2)).map(|(x, y)| x * y).sum()
    };
    let mut acc = ZERO;
    match k.arity {
        1 => {
            let bit = 1usize << (n - 1 - qubits[0]);
            let e = &k.entries;
            for i in (0..d).filter(|i| i & bit == 0) {
                let rows = [i, i | bit];
                for l in 0..2 {
                    for lp in 0..2 {
                        let kv = e[l * 2 + lp];
                        if kv != ZERO {
                            acc += kv * dot(rows[lp], rows[l]);
                        }
                    }
                }
            }
        }
        _ => {
            let b1 = 1usize << (n - 1 - qubits[0]);
            let b2 = 1usize << (n - 1 - qubits[1]);
            let e = &k.entries;
            for i in (0..d).filter(|i| i & (b1 | b2) == 0) {
                let rows = [i, i | b2, i | b1, i | b1 | b2];
                for l in 0..4 {
                    for lp in 0..4 {
                        let kv = e[l * 4 + lp];
                        if kv != ZERO {
                            acc += kv * dot(rows[lp], rows[l]);
                        }
                    }
                }
            }
        }
    }
    acc
}

/// Haar-distributed unitary on `n` qubits, deterministic in `seed`.
///
/// Gram-Schmidt QR of a complex Ginibre matrix. The triangular factor has a
/// positive real diagonal by construction, so `Q` is exactly Haar.
pub fn haar_random_unitary(num_qubits: usize, seed: u64) -> Result<Matrix> {
    if !(1..=MAX_QUBITS).contains(&num_qubits) {
        return Err(Error::UnsupportedQubitCount(num_qubits));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(haar_with_rng(num_qubits, &mut rng))
}

pub(crate) fn haar_with_rng<R: rand::Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Matrix {
    let d = 1usize << num_qubits;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut cols: Vec<Vec<C64>> = (0..d)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    C64::new(re * scale, im * scale)
                })
                .collect()
        })
        .collect();
    for j in 0..d {
        // Two orthogonalization passes keep the result unitary to ~1e-15.
        for _ in 0..2 {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let qi = &done[i];
                let cj = &mut rest[0];
                let proj: C64 = qi.iter().zip(cj.iter()).map(|(a, b)| a.conj() * b).sum();
                for (c, q) in cj.iter_mut().zip(qi) {
                    *c -= proj * q;
                }
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut cols[j] {
            *z /= norm;
        }
    }
    Matrix::from_fn(num_qubits, |r, c| cols[c][r])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli_x() -> GateMatrix {
        GateMatrix::one_qubit([[ZERO, ONE], [ONE, ZERO]])
    }

    fn cz() -> GateMatrix {
        GateMatrix::diag2([ONE, ONE, ONE, -ONE])
    }

    /// Brute-force Kronecker embedding used as an independent oracle.
    fn kron(a: &[C64], da: usize, b: &[C64], db: usize) -> Vec<C64> {
        let d = da * db;
        let mut out = vec![ZERO; d * d];
        for ar in 0..da {
            for ac in 0..da {
                for br in 0..db {
                    for bc in 0..db {
                        out[(ar * db + br) * d + ac * db + bc] = a[ar * da + ac] * b[br * db + bc];
                    }
                }
            }
        }
        out
    }

    fn eye(d: usize) -> Vec<C64> {
        let mut m = vec![ZERO; d * d];
        for i in 0..d {
            m[i * d + i] = ONE;
        }
        m
    }

    fn embed_1q_kron(g: &GateMatrix, n: usize, q: usize) -> Matrix {
        let left = eye(1 << q);
        let right = eye(1 << (n - 1 - q));
        let m = kron(&left, 1 << q, g.entries(), 2);
        let m = kron(&m, 1 << (q + 1), &right, 1 << (n - 1 - q));
        Matrix::from_vec(n, m).unwrap()
    }

    #[test]
    fn identity_gate_is_noop() {
        let u = haar_random_unitary(3, 1).unwrap();
        let id = GateMatrix::one_qubit([[ONE, ZERO], [ZERO, ONE]]);
        for q in 0..3 {
            assert_eq!(apply_gate(&u, &id, &[q]).unwrap(), u);
        }
    }

    #[test]
    fn x_on_single_qubit_identity() {
        let m = apply_gate(&Matrix::identity(1), &pauli_x(), &[0]).unwrap();
        assert_eq!(m.data(), &[ZERO, ONE, ONE, ZERO]);
    }

    #[test]
    fn cz_is_involution() {
        let once = apply_gate(&Matrix::identity(2), &cz(), &[0, 1]).unwrap();
        let twice = apply_gate(&once, &cz(), &[0, 1]).unwrap();
        assert_eq!(twice, Matrix::identity(2));
    }

    #[test]
    fn operand_errors() {
        let mut m = Matrix::identity(2);
        assert!(matches!(m.apply_left(&pauli_x(), &[2]), Err(Error::QubitOutOfRange { .. })));
        assert!(matches!(m.apply_left(&pauli_x(), &[0, 1]), Err(Error::ArityMismatch { .. })));
        assert!(matches!(m.apply_left(&cz(), &[1, 1]), Err(Error::DuplicateQubit(1))));
    }

    #[test]
    fn one_qubit_matches_kron() {
        let g = GateMatrix::one_qubit([[c(0.6, 0.0), c(0.0, 0.8)], [c(0.0, 0.8), c(0.6, 0.0)]]);
        for n in 1..=3 {
            for q in 0..n {
                let ours = g.embed(n, &[q]).unwrap();
                let brute = embed_1q_kron(&g, n, q);
                assert!(ours.max_abs_diff(&brute) < 1e-15, "n={n} q={q}");
            }
        }
    }

    #[test]
    fn two_qubit_adjacent_matches_kron() {
        // A generic non-symmetric 4x4 on adjacent qubits (q, q+1) matches I (x) G (x) I.
        let u = haar_random_unitary(2, 11).unwrap();
        let g = GateMatrix::new(2, u.data()).unwrap();
        for n in 2..=3 {
            for q in 0..n - 1 {
                let ours = g.embed(n, &[q, q + 1]).unwrap();
                let m = kron(&eye(1 << q), 1 << q, g.entries(), 4);
                let m = kron(&m, 1 << (q + 2), &eye(1 << (n - 2 - q)), 1 << (n - 2 - q));
                let brute = Matrix::from_vec(n, m).unwrap();
                assert!(ours.max_abs_diff(&brute) < 1e-12, "n={n} q={q}");
            }
        }
    }

    #[test]
    fn two_qubit_reversed_operands_is_swap_conjugate() {
        let u = haar_random_unitary(2, 5).unwrap();
        let g = GateMatrix::new(2, u.data()).unwrap();
        let swap = GateMatrix::two_qubit([
            [ONE, ZERO, ZERO, ZERO],
            [ZERO, ZERO, ONE, ZERO],
            [ZERO, ONE, ZERO, ZERO],
            [ZERO, ZERO, ZERO, ONE],
        ]);
        let reversed = g.embed(2, &[1, 0]).unwrap();
        let conj = swap.matmul(&g).unwrap().matmul(&swap).unwrap().embed(2, &[0, 1]).unwrap();
        assert!(reversed.max_abs_diff(&conj) < 1e-14);
    }

    #[test]
    fn apply_right_matches_matmul() {
        let u = haar_random_unitary(3, 2).unwrap();
        let v = haar_random_unitary(2, 3).unwrap();
        let g = GateMatrix::new(2, v.data()).unwrap();
        for qs in [[0, 2], [2, 1], [1, 0]] {
            let mut right = u.clone();
            right.apply_right(&g, &qs).unwrap();
            let full = u.matmul(&g.embed(3, &qs).unwrap()).unwrap();
            assert!(right.max_abs_diff(&full) < 1e-14);
        }
    }

    #[test]
    fn gate_then_inverse_restores() {
        let u = haar_random_unitary(4, 9).unwrap();
        let g = GateMatrix::new(2, haar_random_unitary(2, 10).unwrap().data()).unwrap();
        let mut m = apply_gate(&u, &g, &[3, 1]).unwrap();
        m.apply_left(&g.dagger(), &[3, 1]).unwrap();
        assert!(m.max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn hs_overlap_examples() {
        let u = haar_random_unitary(2, 4).unwrap();
        let tr = hs_overlap(&u, &u).unwrap();
        assert!((tr - c(4.0, 0.0)).norm() < 1e-12);

        let czm = cz().embed(2, &[0, 1]).unwrap();
        assert_eq!(hs_overlap(&Matrix::identity(2), &czm).unwrap(), c(2.0, 0.0));

        let phi = 0.731;
        let phase = C64::from_polar(1.0, phi);
        let tr = hs_overlap(&u, &u.scale(phase)).unwrap();
        assert!((tr - phase * 4.0).norm() < 1e-12);

        assert!(hs_overlap(&Matrix::identity(1), &Matrix::identity(2)).is_err());
    }

    #[test]
    fn trace_local_matches_dense() {
        let a = haar_random_unitary(3, 21).unwrap();
        let b = haar_random_unitary(3, 22).unwrap();
        let k1 = GateMatrix::one_qubit([[c(0.1, 0.2), c(0.3, -0.1)], [c(-0.5, 0.0), c(0.0, 0.7)]]);
        let k2 = GateMatrix::new(2, haar_random_unitary(2, 23).unwrap().data()).unwrap();
        let bt = b.transpose();
        for (k, qs) in [(k1, vec![1]), (k2, vec![2, 0])] {
            let dense = b.matmul(&k.embed(3, &qs).unwrap()).unwrap().matmul(&a).unwrap().trace();
            let fast = trace_local(&bt, &k, &qs, &a);
            assert!((dense - fast).norm() < 1e-12);
        }
    }

    #[test]
    fn haar_deterministic_and_unitary() {
        assert_eq!(haar_random_unitary(3, 42).unwrap(), haar_random_unitary(3, 42).unwrap());
        assert_ne!(haar_random_unitary(3, 42).unwrap(), haar_random_unitary(3, 43).unwrap());
        for n in 1..=MAX_QUBITS {
            for seed in 0..100 {
                let u = haar_random_unitary(n, seed).unwrap();
                assert!(u.unitarity_error() < 1e-10, "n={n} seed={seed}");
            }
        }
        assert!(haar_random_unitary(0, 1).is_err());
        assert!(haar_random_unitary(7, 1).is_err());
    }

    #[test]
    fn haar_trace_second_moment() {
        // E|Tr U|^2 = 1 for Haar U; the per-sample variance of |Tr U|^2/4 is about 1/16.
        let samples: Vec<f64> = (0..1000)
            .map(|s| haar_random_unitary(2, 1000 + s).unwrap().trace().norm_sqr() / 4.0)
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        let se = (var / samples.len() as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * se, "mean {mean} se {se}");
    }
}
