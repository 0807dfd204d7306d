//! Batched state-vector simulation of Pauli-rotation circuits with adjoint
//! differentiation.
//!
//! A [`StateBatch`] stores `cols` state vectors of an `n`-qubit register in
//! row-major order (`data[index * cols + col]`), so every gate touches
//! contiguous runs of `cols` amplitudes.

use num_complex::Complex64;

use crate::qsim::{CMatrix, ZERO};

/// Generator of a rotation `exp(−i θ P / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationAxis {
    X(usize),
    Y(usize),
    Z(usize),
    XX(usize, usize),
    ZZ(usize, usize),
}

impl RotationAxis {
    fn shifted(self, offset: usize) -> Self {
        match self {
            RotationAxis::X(q) => RotationAxis::X(q + offset),
            RotationAxis::Y(q) => RotationAxis::Y(q + offset),
            RotationAxis::Z(q) => RotationAxis::Z(q + offset),
            RotationAxis::XX(a, b) => RotationAxis::XX(a + offset, b + offset),
            RotationAxis::ZZ(a, b) => RotationAxis::ZZ(a + offset, b + offset),
        }
    }
}

/// One parameterized rotation; `param` indexes the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rotation {
    pub axis: RotationAxis,
    pub param: usize,
}

/// Ordered list of rotations on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub n_params: usize,
    pub rotations: Vec<Rotation>,
}

impl Circuit {
    /// The same circuit acting on qubits `offset..offset + n_qubits` of a
    /// `total`-qubit register.
    pub fn embedded(&self, offset: usize, total: usize) -> Circuit {
        Circuit {
            n_qubits: total,
            n_params: self.n_params,
            rotations: self
                .rotations
                .iter()
                .map(|r| Rotation { axis: r.axis.shifted(offset), param: r.param })
                .collect(),
        }
    }

    pub fn apply(&self, batch: &mut StateBatch, params: &[f64]) {
        debug_assert_eq!(batch.n_qubits, self.n_qubits);
        for rot in &self.rotations {
            batch.rotate(rot.axis, params[rot.param]);
        }
    }

    pub fn apply_inverse(&self, batch: &mut StateBatch, params: &[f64]) {
        for rot in self.rotations.iter().rev() {
            batch.rotate(rot.axis, -params[rot.param]);
        }
    }

    /// Reverse-mode gradient. `states` holds the circuit outputs and
    /// `adjoint` the loss sensitivities `∂L/∂ψ̄` (convention
    /// `dL = 2 Re Σ <λ|dψ>`). Both batches are rewound to the circuit input.
    pub fn backpropagate(&self, states: &mut StateBatch, adjoint: &mut StateBatch, params: &[f64], grad: &mut [f64]) {
        for rot in self.rotations.iter().rev() {
            // d/dθ exp(−iθP/2) = −(i/2) P exp(−iθP/2)
            grad[rot.param] += adjoint.pauli_overlap(states, rot.axis).im;
            states.rotate(rot.axis, -params[rot.param]);
            adjoint.rotate(rot.axis, -params[rot.param]);
        }
    }

    /// Dense unitary of the circuit.
    pub fn unitary(&self, params: &[f64]) -> CMatrix {
        let dim = 1usize << self.n_qubits;
        let mut batch = StateBatch::identity(self.n_qubits);
        self.apply(&mut batch, params);
        // column c of the batch is U|c>; row-major storage is U itself
        CMatrix::from_row_slice(dim, dim, &batch.data)
    }
}

/// `cols` state vectors over `n_qubits` qubits, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBatch {
    pub n_qubits: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl StateBatch {
    pub fn zeros(n_qubits: usize, cols: usize) -> Self {
        Self { n_qubits, cols, data: vec![ZERO; cols << n_qubits] }
    }

    /// Columns `|0>, |1>, ..., |2^n − 1>`.
    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut b = Self::zeros(n_qubits, dim);
        for i in 0..dim {
            b.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        b
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, index: usize, col: usize) -> Complex64 {
        self.data[index * self.cols + col]
    }

    pub fn set(&mut self, index: usize, col: usize, value: Complex64) {
        self.data[index * self.cols + col] = value;
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.get(i, col)).collect()
    }

    fn bit(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn rows_mut(&mut self, a: usize, b: usize) -> (&mut [Complex64], &mut [Complex64]) {
        debug_assert!(a < b);
        let c = self.cols;
        let (lo, hi) = self.data.split_at_mut(b * c);
        (&mut lo[a * c..a * c + c], &mut hi[..c])
    }

    /// Applies `exp(−i θ P / 2)`.
    pub fn rotate(&mut self, axis: RotationAxis, theta: f64) {
        let (s, c) = (0.5 * theta).sin_cos();
        let cols = self.cols;
        match axis {
            RotationAxis::Z(q) => {
                let bit = self.bit(q);
                let phase0 = Complex64::new(c, -s);
                let phase1 = Complex64::new(c, s);
                for (i, row) in self.data.chunks_mut(cols).enumerate() {
                    let ph = if i & bit == 0 { phase0 } else { phase1 };
                    row.iter_mut().for_each(|z| *z *= ph);
                }
            }
            RotationAxis::ZZ(a, b) => {
                let (ba, bb) = (self.bit(a), self.bit(b));
                let same = Complex64::new(c, -s);
                let diff = Complex64::new(c, s);
                for (i, row) in self.data.chunks_mut(cols).enumerate() {
                    let ph = if (i & ba == 0) == (i & bb == 0) { same } else { diff };
                    row.iter_mut().for_each(|z| *z *= ph);
                }
            }
            RotationAxis::Y(q) => {
                let bit = self.bit(q);
                for i in (0..self.dim()).filter(|i| i & bit == 0) {
                    let (r0, r1) = self.rows_mut(i, i | bit);
                    for (x, y) in r0.iter_mut().zip(r1.iter_mut()) {
                        let (a, b) = (*x, *y);
                        *x = a * c - b * s;
                        *y = a * s + b * c;
                    }
                }
            }
            RotationAxis::X(q) => {
                let bit = self.bit(q);
                let ms = Complex64::new(0.0, -s);
                for i in (0..self.dim()).filter(|i| i & bit == 0) {
                    let (r0, r1) = self.rows_mut(i, i | bit);
                    for (x, y) in r0.iter_mut().zip(r1.iter_mut()) {
                        let (a, b) = (*x, *y);
                        *x = a * c + b * ms;
                        *y = a * ms + b * c;
                    }
                }
            }
            RotationAxis::XX(a, b) => {
                let (ba, bb) = (self.bit(a), self.bit(b));
                let mask = ba | bb;
                let ms = Complex64::new(0.0, -s);
                for i in (0..self.dim()).filter(|i| i & ba == 0) {
                    let j = i ^ mask;
                    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                    let (r0, r1) = self.rows_mut(lo, hi);
                    for (x, y) in r0.iter_mut().zip(r1.iter_mut()) {
                        let (u, v) = (*x, *y);
                        *x = u * c + v * ms;
                        *y = u * ms + v * c;
                    }
                }
            }
        }
    }

    /// `Σ_cols <self|P|other>`.
    pub fn pauli_overlap(&self, other: &StateBatch, axis: RotationAxis) -> Complex64 {
        let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
        };
        fn row(batch: &StateBatch, i: usize) -> &[Complex64] {
            &batch.data[i * batch.cols..(i + 1) * batch.cols]
        }
        let dim = self.dim();
        match axis {
            RotationAxis::Z(q) => {
                let bit = self.bit(q);
                (0..dim)
                    .map(|i| {
                        let d = dot(row(self, i), row(other, i));
                        if i & bit == 0 { d } else { -d }
                    })
                    .sum()
            }
            RotationAxis::ZZ(a, b) => {
                let (ba, bb) = (self.bit(a), self.bit(b));
                (0..dim)
                    .map(|i| {
                        let d = dot(row(self, i), row(other, i));
                        if (i & ba == 0) == (i & bb == 0) { d } else { -d }
                    })
                    .sum()
            }
            RotationAxis::X(q) => {
                let bit = self.bit(q);
                (0..dim).map(|i| dot(row(self, i), row(other, i ^ bit))).sum()
            }
            RotationAxis::XX(a, b) => {
                let mask = self.bit(a) | self.bit(b);
                (0..dim).map(|i| dot(row(self, i), row(other, i ^ mask))).sum()
            }
            RotationAxis::Y(q) => {
                // Y|0> = i|1>, Y|1> = −i|0>
                let bit = self.bit(q);
                let i_unit = Complex64::new(0.0, 1.0);
                (0..dim)
                    .map(|i| {
                        let d = dot(row(self, i), row(other, i ^ bit));
                        if i & bit == 0 { -i_unit * d } else { i_unit * d }
                    })
                    .sum()
            }
        }
    }

    /// Applies a dense operator on the contiguous qubit range
    /// `first..first + k` (k = log2 of the operator dimension).
    pub fn apply_dense(&mut self, op: &CMatrix, first: usize) {
        let k = op.nrows().trailing_zeros() as usize;
        let low = self.n_qubits - first - k;
        let cols = self.cols;
        let block = 1usize << k;
        let mut scratch = vec![ZERO; block * cols];
        for high in 0..1usize << first {
            for lo in 0..1usize << low {
                let index = |l: usize| ((high << k | l) << low) | lo;
                for l in 0..block {
                    let src = index(l) * cols;
                    scratch[l * cols..(l + 1) * cols].copy_from_slice(&self.data[src..src + cols]);
                }
                for r in 0..block {
                    let dst = index(r) * cols;
                    let out = &mut self.data[dst..dst + cols];
                    out.iter_mut().for_each(|z| *z = ZERO);
                    for l in 0..block {
                        let m = op[(r, l)];
                        if m == ZERO {
                            continue;
                        }
                        for (o, s) in out.iter_mut().zip(&scratch[l * cols..(l + 1) * cols]) {
                            *o += m * s;
                        }
                    }
                }
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}
