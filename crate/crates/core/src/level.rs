//! Single-level encode → noise → recover → decode maps.

use std::sync::Mutex;

use crate::channels::PauliChannel;
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::estimator::LevelEvaluator;
use crate::losses::{LogicalChoi, RecoveryFrame, RecoveryObjective};
use crate::qsim::{apply_channel, apply_kraus, apply_unitary, partial_trace, DensityMatrix, KrausSet, Unitary};
use crate::stabilizer::{encoder_unitary, recovery_channel, StabilizerCode};
use crate::train::TrainedCode;

/// `ρ ⊗ |0><0|^{⊗ n−1}` followed by `U_enc · U_enc†`.
pub fn encode(input: &DensityMatrix, encoder: &Unitary) -> Result<DensityMatrix> {
    let n = encoder.n_qubits();
    let padded = input.tensor(&DensityMatrix::basis(n - 1, 0)?)?;
    let all: Vec<usize> = (0..n).collect();
    apply_unitary(&padded, encoder, &all)
}

/// `N^{⊗ n}` on the first `n` qubits of `state`.
pub fn apply_iid_noise(state: &DensityMatrix, noise: &PauliChannel, n: usize) -> Result<DensityMatrix> {
    let kraus = noise.kraus();
    (0..n).try_fold(state.clone(), |acc, q| apply_kraus(&acc, &kraus, q))
}

/// `Tr_{n−1}(U_enc† ρ U_enc)`, keeping the logical qubit 0.
pub fn decode(state: &DensityMatrix, encoder: &Unitary) -> Result<DensityMatrix> {
    let all: Vec<usize> = (0..encoder.n_qubits()).collect();
    partial_trace(&apply_unitary(state, &encoder.adjoint(), &all)?, &[0])
}

/// Level built from a stabilizer code with projector recovery.
#[derive(Debug, Clone)]
pub struct StabilizerLevel {
    code: StabilizerCode,
    encoder: Unitary,
    recovery: KrausSet,
}

impl StabilizerLevel {
    pub fn new(code: StabilizerCode) -> Result<Self> {
        let encoder = encoder_unitary(&code);
        let recovery = recovery_channel(&code)?;
        Ok(Self { code, encoder, recovery })
    }

    pub fn code(&self) -> &StabilizerCode {
        &self.code
    }
}

impl LevelEvaluator for StabilizerLevel {
    fn evaluate(&self, input: &DensityMatrix, noise: &PauliChannel) -> Result<DensityMatrix> {
        let n = self.code.n();
        let all: Vec<usize> = (0..n).collect();
        let encoded = encode(input, &self.encoder)?;
        let noisy = apply_iid_noise(&encoded, noise, n)?;
        let recovered = apply_channel(&noisy, &self.recovery, &all)?;
        decode(&recovered, &self.encoder)
    }
}

/// Level built from a trained code: variational encoder, recovery unitary on
/// `n + r` qubits with fresh ancillas, and decoding by the encoder inverse.
///
/// The logical Choi state is computed once per noise channel and reused for
/// every input.
#[derive(Debug)]
pub struct VariationalLevel {
    encoder: Unitary,
    recovery: Circuit,
    params: Vec<f64>,
    r: usize,
    frame: RecoveryFrame,
    cache: Mutex<Option<(PauliChannel, LogicalChoi)>>,
}

impl VariationalLevel {
    pub fn new(code: &TrainedCode) -> Result<Self> {
        Ok(Self {
            encoder: code.encoder_unitary()?,
            recovery: code.recovery.circuit(),
            params: code.recovery_params.values().to_vec(),
            r: code.r,
            frame: code.frame,
            cache: Mutex::new(None),
        })
    }

    pub fn n(&self) -> usize {
        self.encoder.n_qubits()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Logical Choi state of the whole level under `noise`.
    pub fn logical_choi(&self, noise: &PauliChannel) -> Result<LogicalChoi> {
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some((cached, choi)) = cache.as_ref() {
            if cached.probs() == noise.probs() {
                return Ok(choi.clone());
            }
        }
        let objective = RecoveryObjective::new(&self.encoder, noise, self.r)?.in_frame(self.frame);
        let choi = objective.choi_circuit(&objective.embed(&self.recovery), &self.params);
        *cache = Some((*noise, choi.clone()));
        Ok(choi)
    }
}

impl LevelEvaluator for VariationalLevel {
    fn evaluate(&self, input: &DensityMatrix, noise: &PauliChannel) -> Result<DensityMatrix> {
        if input.n_qubits() != 1 {
            return Err(Error::DimensionMismatch { expected: 2, found: input.dim() });
        }
        let out = self.logical_choi(noise)?.apply(input.matrix());
        let hermitian = (&out + out.adjoint()) * num_complex::Complex64::from(0.5);
        Ok(DensityMatrix::from_matrix_unchecked(hermitian))
    }
}
