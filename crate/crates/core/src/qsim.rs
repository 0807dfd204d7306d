//! Dense density-matrix simulation of small qubit registers.
//!
//! Qubit 0 is the most significant bit of the computational-basis index, so
//! `|q0 q1 ... q(n-1)>` has index `q0 * 2^(n-1) + ... + q(n-1)`. Every
//! routine in the crate uses this ordering.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Largest register the dense simulator accepts (dimension 4096).
pub const MAX_QUBITS: usize = 12;

const TRACE_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;
const UNITARY_TOL: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidState(format!("dimension {dim} is not a power of two")));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::RegisterTooLarge(n));
    }
    Ok(n)
}

fn check_targets(targets: &[usize], n_qubits: usize) -> Result<()> {
    for (k, &t) in targets.iter().enumerate() {
        if t >= n_qubits {
            return Err(Error::QubitOutOfRange { qubit: t, n_qubits });
        }
        if targets[..k].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    Ok(())
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub(crate) fn trace(m: &CMatrix) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigen-decomposition of a Hermitian matrix as `(eigenvalues, eigenvectors)`.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Positional masks in the full index for each local index of a k-qubit
/// operator acting on `targets` (targets[0] is the most significant local bit).
fn local_offsets(targets: &[usize], n_qubits: usize) -> (usize, Vec<usize>) {
    let k = targets.len();
    let bits: Vec<usize> = targets.iter().map(|&t| 1usize << (n_qubits - 1 - t)).collect();
    let mask = bits.iter().fold(0, |acc, b| acc | b);
    let offsets = (0..1usize << k)
        .map(|l| {
            (0..k)
                .filter(|j| l >> (k - 1 - j) & 1 == 1)
                .fold(0, |acc, j| acc | bits[j])
        })
        .collect();
    (mask, offsets)
}

/// Multiplies `op` (acting on `targets`) into every column of a column-major
/// `dim x ncols` block.
pub(crate) fn apply_left_inplace(data: &mut [Complex64], n_qubits: usize, op: &CMatrix, targets: &[usize]) {
    let dim = 1usize << n_qubits;
    let (mask, offsets) = local_offsets(targets, n_qubits);
    let local = offsets.len();
    let mut amps = vec![ZERO; local];
    for col in data.chunks_mut(dim) {
        for base in (0..dim).filter(|i| i & mask == 0) {
            for (l, off) in offsets.iter().enumerate() {
                amps[l] = col[base | off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (c, a) in amps.iter().enumerate() {
                    acc += op[(r, c)] * a;
                }
                col[base | off] = acc;
            }
        }
    }
}

/// `op · m · op†` with `op` embedded on `targets`; `m` must be Hermitian.
fn conjugate_hermitian(m: &CMatrix, n_qubits: usize, op: &CMatrix, targets: &[usize]) -> CMatrix {
    let mut left = m.clone();
    apply_left_inplace(left.as_mut_slice(), n_qubits, op, targets);
    let mut out = left.adjoint();
    apply_left_inplace(out.as_mut_slice(), n_qubits, op, targets);
    out
}

/// Hermitian, positive semidefinite, unit-trace operator on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: CMatrix,
}

impl DensityMatrix {
    /// Validates trace, Hermiticity and positivity.
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch { expected: data.nrows(), found: data.ncols() });
        }
        let n_qubits = qubits_for_dim(data.nrows())?;
        let tr = trace(&data);
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let herm = hermitian_deviation(&data);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let min_ev = hermitian_eigenvalues(&data)[0];
        if min_ev < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_ev:e}")));
        }
        Ok(Self { n_qubits, data })
    }

    pub(crate) fn from_matrix_unchecked(data: CMatrix) -> Self {
        let n_qubits = data.nrows().trailing_zeros() as usize;
        Self { n_qubits, data }
    }

    /// `|ψ><ψ|` for a state vector; the vector is normalized first.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let n_qubits = qubits_for_dim(psi.len())?;
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
        Ok(Self { n_qubits, data: &v * v.adjoint() })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n_qubits));
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::QubitOutOfRange { qubit: index, n_qubits });
        }
        let mut data = CMatrix::zeros(dim, dim);
        data[(index, index)] = ONE;
        Ok(Self { n_qubits, data })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n_qubits));
        }
        let dim = 1usize << n_qubits;
        Ok(Self { n_qubits, data: CMatrix::identity(dim, dim) / Complex64::from(dim as f64) })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    /// `self ⊗ other`, with `self` on the leading (most significant) qubits.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n));
        }
        Ok(Self { n_qubits: n, data: self.data.kronecker(&other.data) })
    }

    pub fn trace(&self) -> Complex64 {
        trace(&self.data)
    }

    /// Tr(ρ²).
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Bloch vector of a single-qubit state.
    pub fn bloch_vector(&self) -> Option<[f64; 3]> {
        (self.n_qubits == 1).then(|| {
            let d = &self.data;
            [2.0 * d[(0, 1)].re, -2.0 * d[(0, 1)].im, (d[(0, 0)] - d[(1, 1)]).re]
        })
    }
}

/// Square unitary on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    n_qubits: usize,
    data: CMatrix,
}

impl Unitary {
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch { expected: data.nrows(), found: data.ncols() });
        }
        let n_qubits = qubits_for_dim(data.nrows())?;
        let dev = max_abs(&(&data * data.adjoint() - CMatrix::identity(data.nrows(), data.nrows())));
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { n_qubits, data })
    }

    pub(crate) fn from_matrix_unchecked(data: CMatrix) -> Self {
        let n_qubits = data.nrows().trailing_zeros() as usize;
        Self { n_qubits, data }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self { n_qubits, data: CMatrix::identity(dim, dim) }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self { n_qubits: self.n_qubits, data: self.data.adjoint() }
    }

    /// Maximum entrywise deviation of `U U†` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let dim = self.data.nrows();
        max_abs(&(&self.data * self.data.adjoint() - CMatrix::identity(dim, dim)))
    }

    /// `U |index>` as a state vector.
    pub fn column(&self, index: usize) -> Vec<Complex64> {
        self.data.column(index).iter().copied().collect()
    }
}

/// Kraus representation `{E_k}` of a trace-preserving map.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    operators: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidState("empty Kraus set".into()))?;
        let dim = first.nrows();
        qubits_for_dim(dim)?;
        for op in &operators {
            if op.nrows() != dim || op.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: op.nrows().max(op.ncols()) });
            }
        }
        let set = Self { operators };
        let dev = set.completeness_error();
        if dev > TRACE_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(set)
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn n_qubits(&self) -> usize {
        self.operators[0].nrows().trailing_zeros() as usize
    }

    /// Max entrywise deviation of `Σ E_k† E_k` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let dim = self.operators[0].nrows();
        let sum = self
            .operators
            .iter()
            .fold(CMatrix::zeros(dim, dim), |acc, e| acc + e.adjoint() * e);
        max_abs(&(sum - CMatrix::identity(dim, dim)))
    }
}

/// `U ρ U†` with `u` embedded on `targets`.
pub fn apply_unitary(state: &DensityMatrix, u: &Unitary, targets: &[usize]) -> Result<DensityMatrix> {
    check_targets(targets, state.n_qubits)?;
    if u.n_qubits != targets.len() {
        return Err(Error::DimensionMismatch { expected: targets.len(), found: u.n_qubits });
    }
    Ok(DensityMatrix::from_matrix_unchecked(conjugate_hermitian(
        &state.data,
        state.n_qubits,
        &u.data,
        targets,
    )))
}

/// `Σ_k E_k ρ E_k†` for a single-qubit channel on `target`.
pub fn apply_kraus(state: &DensityMatrix, channel: &KrausSet, target: usize) -> Result<DensityMatrix> {
    if channel.n_qubits() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: channel.n_qubits() });
    }
    apply_channel(state, channel, &[target])
}

/// `Σ_k E_k ρ E_k†` for a channel acting on `targets`.
pub fn apply_channel(state: &DensityMatrix, channel: &KrausSet, targets: &[usize]) -> Result<DensityMatrix> {
    check_targets(targets, state.n_qubits)?;
    if channel.n_qubits() != targets.len() {
        return Err(Error::DimensionMismatch { expected: targets.len(), found: channel.n_qubits() });
    }
    let dev = channel.completeness_error();
    if dev > TRACE_TOL {
        return Err(Error::NotTracePreserving(dev));
    }
    let dim = state.dim();
    let out = channel.operators.iter().fold(CMatrix::zeros(dim, dim), |acc, e| {
        acc + conjugate_hermitian(&state.data, state.n_qubits, e, targets)
    });
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Reduced state on `keep`, in the order listed.
pub fn partial_trace(state: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let n = state.n_qubits;
    check_targets(keep, n)?;
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let (_, keep_off) = local_offsets(keep, n);
    let (_, trace_off) = local_offsets(&traced, n);
    let dk = keep_off.len();
    let mut out = CMatrix::zeros(dk, dk);
    for (a, oa) in keep_off.iter().enumerate() {
        for (b, ob) in keep_off.iter().enumerate() {
            out[(a, b)] = trace_off.iter().map(|t| state.data[(oa | t, ob | t)]).sum();
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

fn check_same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// Eigenvalues with numerical dust in `[-1e-9, 0)` clipped to zero and the
/// spectrum renormalized to unit sum.
fn clipped_spectrum(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let (mut ev, vecs) = hermitian_eigen(m);
    for v in ev.iter_mut() {
        if *v < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {v:e}")));
        }
        *v = v.max(0.0);
    }
    let total: f64 = ev.iter().sum();
    if total > 0.0 {
        ev.iter_mut().for_each(|v| *v /= total);
    }
    Ok((ev, vecs))
}

const PURE_TOL: f64 = 1e-10;

/// Uhlmann fidelity `(Tr √(√a b √a))²`; reduces to `<ψ|b|ψ>` when either
/// state is pure.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same_dim(a, b)?;
    if a.purity() > 1.0 - PURE_TOL || b.purity() > 1.0 - PURE_TOL {
        let overlap: Complex64 = a.data.iter().zip(b.data.transpose().iter()).map(|(x, y)| x * y).sum();
        return Ok(overlap.re.clamp(0.0, 1.0));
    }
    let (ev, vecs) = clipped_spectrum(&a.data)?;
    let sqrt_diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        ev.len(),
        ev.iter().map(|v| Complex64::from(v.sqrt())),
    ));
    let sqrt_a = &vecs * sqrt_diag * vecs.adjoint();
    let mut inner = &sqrt_a * &b.data * &sqrt_a;
    inner = (&inner + inner.adjoint()) * Complex64::from(0.5);
    let root_trace: f64 = hermitian_eigenvalues(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// `½ ‖a − b‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(trace_norm_half(&(&a.data - &b.data)).clamp(0.0, 1.0))
}

pub(crate) fn trace_norm_half(diff: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(diff).iter().map(|v| v.abs()).sum::<f64>()
}

/// Common single- and two-qubit gate matrices.
pub mod gates {
    use super::{CMatrix, Complex64, I, ONE, ZERO};

    fn m2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    pub fn identity() -> CMatrix {
        m2(ONE, ZERO, ZERO, ONE)
    }

    pub fn pauli_x() -> CMatrix {
        m2(ZERO, ONE, ONE, ZERO)
    }

    pub fn pauli_y() -> CMatrix {
        m2(ZERO, -I, I, ZERO)
    }

    pub fn pauli_z() -> CMatrix {
        m2(ONE, ZERO, ZERO, -ONE)
    }

    pub fn hadamard() -> CMatrix {
        let h = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        m2(h, h, h, -h)
    }

    /// Control on the first (most significant) qubit.
    pub fn cnot() -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        m
    }
}
