//! Fixed baseline codes: the `[[3,1,1]]` repetition code and the `[[5,1,3]]`
//! perfect code, with encoder unitaries and measurement-free projector
//! recovery channels.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qsim::{gates, CMatrix, KrausSet, Unitary, ONE, ZERO};

/// Single-qubit Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::I => gates::identity(),
            Pauli::X => gates::pauli_x(),
            Pauli::Y => gates::pauli_y(),
            Pauli::Z => gates::pauli_z(),
        }
    }

    fn anticommutes(self, other: Pauli) -> bool {
        self != Pauli::I && other != Pauli::I && self != other
    }
}

/// Tensor product of single-qubit Paulis; position 0 acts on qubit 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self(vec![Pauli::I; n])
    }

    /// Single `pauli` on `qubit` of an `n`-qubit register.
    pub fn single(n: usize, qubit: usize, pauli: Pauli) -> Self {
        let mut ops = vec![Pauli::I; n];
        ops[qubit] = pauli;
        Self(ops)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|p| **p != Pauli::I).count()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        self.0.iter().zip(&other.0).filter(|(a, b)| a.anticommutes(**b)).count() % 2 == 0
    }

    /// Dense `2^n x 2^n` matrix.
    pub fn matrix(&self) -> CMatrix {
        self.0
            .iter()
            .fold(CMatrix::from_element(1, 1, ONE), |acc, p| acc.kronecker(&p.matrix()))
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidCode(format!("bad Pauli character `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            let c = match p {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A `[[n, 1, d]]` stabilizer code with a syndrome-indexed correction table.
#[derive(Debug, Clone)]
pub struct StabilizerCode {
    id: &'static str,
    n: usize,
    d: usize,
    generators: Vec<PauliString>,
    codewords: [Vec<Complex64>; 2],
    /// `corrections[s]` for every syndrome `s`.
    corrections: Vec<Option<PauliString>>,
    encoder: Unitary,
}

impl StabilizerCode {
    pub fn id(&self) -> &'static str {
        self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        1
    }

    pub fn distance(&self) -> usize {
        self.d
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    /// `|0_L>` and `|1_L>`.
    pub fn codewords(&self) -> &[Vec<Complex64>; 2] {
        &self.codewords
    }

    /// Syndrome as an integer; bit `n−2−i` flags anticommutation with generator `i`.
    pub fn syndrome(&self, error: &PauliString) -> usize {
        syndrome_of(&self.generators, error)
    }

    pub fn correction(&self, syndrome: usize) -> Option<&PauliString> {
        self.corrections.get(syndrome).and_then(Option::as_ref)
    }

    /// Projector onto the joint eigenspace with the given syndrome.
    pub fn syndrome_projector(&self, syndrome: usize) -> CMatrix {
        let dim = 1usize << self.n;
        let m = self.generators.len();
        let id = CMatrix::identity(dim, dim);
        self.generators.iter().enumerate().fold(id.clone(), |acc, (i, g)| {
            let sign = if syndrome >> (m - 1 - i) & 1 == 1 { -1.0 } else { 1.0 };
            acc * ((&id + g.matrix() * Complex64::from(sign)) * Complex64::from(0.5))
        })
    }
}

/// Builds a correction table from single-qubit errors in the order given,
/// keeping the first error seen for each syndrome.
fn correction_table(generators: &[PauliString], n: usize, errors: &[Pauli]) -> Vec<Option<PauliString>> {
    let m = generators.len();
    let mut table = vec![None; 1 << m];
    table[0] = Some(PauliString::identity(n));
    for q in 0..n {
        for &p in errors {
            let e = PauliString::single(n, q, p);
            let s = syndrome_of(generators, &e);
            if table[s].is_none() {
                table[s] = Some(e);
            }
        }
    }
    table
}

fn syndrome_of(generators: &[PauliString], error: &PauliString) -> usize {
    let m = generators.len();
    generators
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.commutes_with(error))
        .fold(0, |acc, (i, _)| acc | 1 << (m - 1 - i))
}

fn basis_vector(dim: usize, index: usize) -> DVector<Complex64> {
    let mut v = DVector::from_element(dim, ZERO);
    v[index] = ONE;
    v
}

fn normalized(v: DVector<Complex64>) -> DVector<Complex64> {
    let norm = v.norm();
    v / Complex64::from(norm)
}

/// `[[3,1,1]]` bit-flip repetition code: generators `ZZI, IZZ`, codewords
/// `|000>, |111>`, majority-vote corrections and a CNOT-ladder encoder.
pub fn repetition_code() -> StabilizerCode {
    let generators: Vec<PauliString> = ["ZZI", "IZZ"].iter().map(|s| s.parse().unwrap()).collect();
    let corrections = correction_table(&generators, 3, &[Pauli::X]);
    let codewords = [basis_vector(8, 0), basis_vector(8, 7)].map(|v| v.iter().copied().collect());

    // CNOT(0→1) then CNOT(0→2)
    let mut enc = CMatrix::zeros(8, 8);
    for input in 0..8usize {
        let b = input >> 2 & 1;
        let output = input ^ (b << 1) ^ b;
        enc[(output, input)] = ONE;
    }
    StabilizerCode {
        id: "rep3",
        n: 3,
        d: 1,
        generators,
        codewords,
        corrections,
        encoder: Unitary::from_matrix_unchecked(enc),
    }
}

/// `[[5,1,3]]` perfect code with generators `XZZXI` and its cyclic shifts.
///
/// `|0_L>` is the stabilizer projection of `|00000>`, `|1_L> = X^⊗5 |0_L>`.
/// The encoder maps `|b>|s>` (with `s` the 4-bit ancilla value) to
/// `C_s |b_L>`, where `C_s` is the table correction for syndrome `s`.
pub fn perfect_code() -> StabilizerCode {
    let generators: Vec<PauliString> = ["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let corrections = correction_table(&generators, 5, &[Pauli::X, Pauli::Y, Pauli::Z]);

    let dim = 32;
    let id = CMatrix::identity(dim, dim);
    let projector = generators
        .iter()
        .fold(id.clone(), |acc, g| acc * ((&id + g.matrix()) * Complex64::from(0.5)));
    let zero_l = normalized(&projector * basis_vector(dim, 0));
    let x_l: PauliString = "XXXXX".parse().unwrap();
    let one_l = x_l.matrix() * &zero_l;

    let mut enc = CMatrix::zeros(dim, dim);
    for (b, word) in [&zero_l, &one_l].into_iter().enumerate() {
        for (s, corr) in corrections.iter().enumerate() {
            let corr = corr.as_ref().expect("perfect code table is complete");
            enc.set_column(b * 16 + s, &(corr.matrix() * word));
        }
    }
    StabilizerCode {
        id: "perfect5",
        n: 5,
        d: 3,
        generators,
        codewords: [zero_l, one_l].map(|v| v.iter().copied().collect()),
        corrections,
        encoder: Unitary::from_matrix_unchecked(enc),
    }
}

/// Looks up a registered code by id (`rep3`, `perfect5`).
pub fn code_by_id(id: &str) -> Result<StabilizerCode> {
    match id {
        "rep3" => Ok(repetition_code()),
        "perfect5" => Ok(perfect_code()),
        other => Err(Error::UnknownCode(other.to_string())),
    }
}

/// Encoder mapping `|b>|0...0>` to `|b_L>`.
pub fn encoder_unitary(code: &StabilizerCode) -> Unitary {
    code.encoder.clone()
}

/// Measurement-free recovery `{C_s Π_s}` over all syndromes.
pub fn recovery_channel(code: &StabilizerCode) -> Result<KrausSet> {
    let ops = code
        .corrections
        .iter()
        .enumerate()
        .map(|(s, corr)| {
            let corr = corr
                .as_ref()
                .ok_or_else(|| Error::InvalidCode(format!("no correction for syndrome {s:#b}")))?;
            Ok(corr.matrix() * code.syndrome_projector(s))
        })
        .collect::<Result<Vec<_>>>()?;
    KrausSet::new(ops)
}
