//! Distinguishability and fidelity losses, evaluated on batched state
//! vectors so that both the value and its adjoint gradient are cheap.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::PauliChannel;
use crate::circuit::{Circuit, StateBatch};
use crate::error::{Error, Result};
use crate::estimator::{cardinal_vectors, CARDINAL_BLOCH};
use crate::qsim::{hermitian_eigen, CMatrix, Unitary, MAX_QUBITS, ZERO};

const PAIR_COUNT: usize = 15;
const EIGEN_FLOOR: f64 = 1e-15;

/// Unordered cardinal pairs `(a, b)`, `a < b`.
pub fn cardinal_pairs() -> Vec<(usize, usize)> {
    (0..6).flat_map(|a| (a + 1..6).map(move |b| (a, b))).collect()
}

/// Trace distance between two cardinal states.
fn cardinal_distance(a: usize, b: usize) -> f64 {
    let (ra, rb) = (CARDINAL_BLOCH[a], CARDINAL_BLOCH[b]);
    0.5 * ra.iter().zip(rb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `ψ ⊗ |0…0>` for each cardinal state, on `n_qubits` qubits.
pub fn cardinal_inputs(n_qubits: usize) -> StateBatch {
    let mut batch = StateBatch::zeros(n_qubits, 6);
    let high = 1usize << (n_qubits - 1);
    for (c, v) in cardinal_vectors().iter().enumerate() {
        batch.set(0, c, v[0]);
        batch.set(high, c, v[1]);
    }
    batch
}

fn outer(psi: &[Complex64]) -> CMatrix {
    let dim = psi.len();
    CMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj())
}

/// Trace distances of one cardinal pair before and after encoding + noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub pair: (usize, usize),
    pub before: f64,
    pub after: f64,
}

impl PairTerm {
    /// `max(T_before − T_after, 0)`.
    pub fn loss(&self) -> f64 {
        (self.before - self.after).max(0.0)
    }
}

/// Pair terms for encoded cardinal states held in `states` (6 columns), and
/// optionally the adjoint `∂L/∂ψ̄` of the mean clipped loss.
fn pair_terms(states: &StateBatch, noise: &PauliChannel, with_adjoint: bool) -> (Vec<PairTerm>, Option<StateBatch>) {
    let n = states.n_qubits;
    let columns: Vec<Vec<Complex64>> = (0..6).map(|c| states.column(c)).collect();
    let noisy: Vec<CMatrix> = columns
        .iter()
        .map(|psi| {
            let mut rho = outer(psi);
            noise.apply_iid_to_operator(&mut rho, n, 0..n);
            rho
        })
        .collect();
    let mut adjoint = with_adjoint.then(|| StateBatch::zeros(n, 6));
    let weight = 1.0 / (2.0 * PAIR_COUNT as f64);
    let terms = cardinal_pairs()
        .into_iter()
        .map(|(a, b)| {
            let diff = &noisy[a] - &noisy[b];
            let (values, vectors) = hermitian_eigen(&diff);
            let term = PairTerm {
                pair: (a, b),
                before: cardinal_distance(a, b),
                after: 0.5 * values.iter().map(|l| l.abs()).sum::<f64>(),
            };
            if let Some(adj) = adjoint.as_mut().filter(|_| term.before > term.after) {
                let signs = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    values.len(),
                    values.iter().map(|&l| Complex64::from(if l.abs() < EIGEN_FLOOR { 0.0 } else { l.signum() })),
                ));
                let mut sign_op = &vectors * signs * vectors.adjoint();
                noise.apply_iid_to_operator(&mut sign_op, n, 0..n);
                for (col, scale) in [(a, -weight), (b, weight)] {
                    let pushed = &sign_op * nalgebra::DVector::from_column_slice(&columns[col]);
                    for (i, v) in pushed.iter().enumerate() {
                        let current = adj.get(i, col);
                        adj.set(i, col, current + v * scale);
                    }
                }
            }
            term
        })
        .collect();
    (terms, adjoint)
}

fn mean_loss(terms: &[PairTerm]) -> f64 {
    terms.iter().map(PairTerm::loss).sum::<f64>() / terms.len() as f64
}

fn encoded_cardinals(encoder: &Unitary) -> StateBatch {
    let n = encoder.n_qubits();
    let mut states = cardinal_inputs(n);
    states.apply_dense(encoder.matrix(), 0);
    states
}

/// Per-pair trace distances for the encoder under `channel^{⊗n}`.
pub fn distinguishability_pairs(encoder: &Unitary, channel: &PauliChannel) -> Vec<PairTerm> {
    pair_terms(&encoded_cardinals(encoder), channel, false).0
}

/// Mean over the 15 cardinal pairs of the clipped trace-distance loss.
pub fn distinguishability_loss(encoder: &Unitary, channel: &PauliChannel) -> f64 {
    mean_loss(&distinguishability_pairs(encoder, channel))
}

/// Distinguishability loss of a parameterized encoder circuit.
#[derive(Debug, Clone)]
pub struct EncoderObjective {
    circuit: Circuit,
    noise: PauliChannel,
}

impl EncoderObjective {
    pub fn new(circuit: Circuit, noise: PauliChannel) -> Self {
        Self { circuit, noise }
    }

    fn states(&self, params: &[f64]) -> StateBatch {
        let mut states = cardinal_inputs(self.circuit.n_qubits);
        self.circuit.apply(&mut states, params);
        states
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        mean_loss(&pair_terms(&self.states(params), &self.noise, false).0)
    }

    pub fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let mut states = self.states(params);
        let (terms, adjoint) = pair_terms(&states, &self.noise, true);
        let mut adjoint = adjoint.expect("adjoint requested");
        let mut grad = vec![0.0; self.circuit.n_params];
        self.circuit.backpropagate(&mut states, &mut adjoint, params, &mut grad);
        (mean_loss(&terms), grad)
    }
}

/// Which aggregate of the six cardinal infidelities to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityMode {
    Average,
    Worst,
}

/// Choi state `(I ⊗ E)(|Φ+><Φ+|)` of a single-qubit logical channel; index
/// `2·ref + logical`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalChoi(pub CMatrix);

impl LogicalChoi {
    pub fn entanglement_fidelity(&self) -> f64 {
        let j = &self.0;
        0.5 * (j[(0, 0)] + j[(0, 3)] + j[(3, 0)] + j[(3, 3)]).re
    }

    /// `E(ρ)` for a 2×2 operator `ρ`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        CMatrix::from_fn(2, 2, |l1, l2| {
            let mut acc = ZERO;
            for i in 0..2 {
                for j in 0..2 {
                    acc += rho[(i, j)] * self.0[(2 * i + l1, 2 * j + l2)];
                }
            }
            acc * 2.0
        })
    }

    /// `<ψ|E(ψ)|ψ>` for the six cardinal states, clamped to [0, 1].
    pub fn cardinal_fidelities(&self) -> [f64; 6] {
        cardinal_vectors().map(|v| {
            let out = self.apply(&outer(&v));
            let f = (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| v[i].conj() * out[(i, j)] * v[j])
                .sum::<Complex64>()
                .re;
            f.clamp(0.0, 1.0)
        })
    }

    /// `1 − F` aggregated over the cardinal states.
    pub fn loss(&self, mode: FidelityMode) -> f64 {
        let losses = self.cardinal_fidelities().map(|f| 1.0 - f);
        match mode {
            FidelityMode::Average => losses.iter().sum::<f64>() / 6.0,
            FidelityMode::Worst => losses.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Recovery-stage objective for a fixed encoder and noise.
///
/// The noisy encoded Choi state (reference qubit + `n` data qubits) is
/// purified into at most `2^{n+1}` weighted columns; `r` ancillas in `|0>` are
/// appended. The register is ordered reference, data, ancillas.
#[derive(Debug, Clone)]
pub struct RecoveryObjective {
    n: usize,
    r: usize,
    encoder: CMatrix,
    encoder_adjoint: CMatrix,
    start: StateBatch,
    frame: RecoveryFrame,
}

/// Where the trainable recovery circuit `W` acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryFrame {
    /// `U_rec = W`.
    Physical,
    /// `U_rec = (U_enc ⊗ I) · W · (U_enc† ⊗ I)`, so `W` sees the decoded
    /// logical qubit and syndrome qubits directly.
    #[default]
    Logical,
}

impl RecoveryObjective {
    pub fn new(encoder: &Unitary, noise: &PauliChannel, r: usize) -> Result<Self> {
        let n = encoder.n_qubits();
        if n + r > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n + r));
        }
        let u = encoder.matrix();
        let dim = 1usize << n;
        let half = dim / 2;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let phi: Vec<Complex64> = (0..2 * dim).map(|idx| u[(idx % dim, (idx / dim) * half)] * h).collect();
        let mut choi = outer(&phi);
        noise.apply_iid_to_operator(&mut choi, n + 1, 1..n + 1);
        let (values, vectors) = hermitian_eigen(&choi);
        let kept: Vec<usize> = (0..values.len()).filter(|&k| values[k] > EIGEN_FLOOR).collect();
        let mut start = StateBatch::zeros(1 + n + r, kept.len());
        for (col, &k) in kept.iter().enumerate() {
            let w = values[k].sqrt();
            for idx in 0..2 * dim {
                start.set(idx << r, col, vectors[(idx, k)] * w);
            }
        }
        Ok(Self { n, r, encoder: u.clone(), encoder_adjoint: u.adjoint(), start, frame: RecoveryFrame::Physical })
    }

    /// Switches the frame in which recovery circuits act.
    pub fn in_frame(mut self, frame: RecoveryFrame) -> Self {
        if self.frame != frame {
            let op = match frame {
                RecoveryFrame::Logical => &self.encoder_adjoint,
                RecoveryFrame::Physical => &self.encoder,
            };
            self.start.apply_dense(op, 1);
            self.frame = frame;
        }
        self
    }

    pub fn frame(&self) -> RecoveryFrame {
        self.frame
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Lifts a recovery circuit on `n + r` qubits onto the full register.
    pub fn embed(&self, recovery: &Circuit) -> Circuit {
        recovery.embedded(1, 1 + self.n + self.r)
    }

    fn recovered(&self, recover: impl FnOnce(&mut StateBatch)) -> StateBatch {
        let mut states = self.start.clone();
        recover(&mut states);
        states
    }

    fn decoded(&self, recovered: &StateBatch) -> StateBatch {
        let mut states = recovered.clone();
        if self.frame == RecoveryFrame::Physical {
            states.apply_dense(&self.encoder_adjoint, 1);
        }
        states
    }

    fn junk_bits(&self) -> usize {
        self.n + self.r - 1
    }

    fn choi_of(&self, decoded: &StateBatch) -> LogicalChoi {
        let junk = 1usize << self.junk_bits();
        let cols = decoded.cols;
        let mut j = CMatrix::zeros(4, 4);
        for a in 0..4 {
            for b in a..4 {
                let ra = &decoded.data[a * junk * cols..(a + 1) * junk * cols];
                let rb = &decoded.data[b * junk * cols..(b + 1) * junk * cols];
                let v: Complex64 = ra.iter().zip(rb).map(|(x, y)| x * y.conj()).sum();
                j[(a, b)] = v;
                j[(b, a)] = v.conj();
            }
        }
        LogicalChoi(j)
    }

    /// Logical Choi state when `recover` acts on the full register.
    pub fn choi_with(&self, recover: impl FnOnce(&mut StateBatch)) -> LogicalChoi {
        self.choi_of(&self.decoded(&self.recovered(recover)))
    }

    /// Logical Choi state for a dense recovery unitary on `n + r` qubits.
    pub fn choi_dense(&self, recovery: &Unitary) -> Result<LogicalChoi> {
        let width = self.n + self.r;
        if recovery.n_qubits() != width {
            return Err(Error::DimensionMismatch { expected: 1 << width, found: recovery.matrix().nrows() });
        }
        Ok(self.choi_with(|s| s.apply_dense(recovery.matrix(), 1)))
    }

    /// Logical Choi state for an embedded recovery circuit.
    pub fn choi_circuit(&self, embedded: &Circuit, params: &[f64]) -> LogicalChoi {
        self.choi_with(|s| embedded.apply(s, params))
    }

    /// Average cardinal fidelity loss `2(1 − F_e)/3` and its gradient.
    pub fn value_and_gradient(&self, embedded: &Circuit, params: &[f64]) -> (f64, Vec<f64>) {
        let mut recovered = self.recovered(|s| embedded.apply(s, params));
        let decoded = self.decoded(&recovered);
        let choi = self.choi_of(&decoded);
        let value = 2.0 * (1.0 - choi.entanglement_fidelity()) / 3.0;

        let junk = 1usize << self.junk_bits();
        let cols = decoded.cols;
        let mut adjoint = StateBatch::zeros(decoded.n_qubits, cols);
        let scale = -2.0 / 3.0 * 0.5;
        for k in 0..junk * cols {
            let s = (decoded.data[k] + decoded.data[3 * junk * cols + k]) * scale;
            adjoint.data[k] = s;
            adjoint.data[3 * junk * cols + k] = s;
        }
        if self.frame == RecoveryFrame::Physical {
            adjoint.apply_dense(&self.encoder, 1);
        }
        let mut grad = vec![0.0; embedded.n_params];
        embedded.backpropagate(&mut recovered, &mut adjoint, params, &mut grad);
        (value, grad)
    }
}

/// Cardinal fidelity loss of encoder + dense recovery unitary on `n + r`
/// qubits, with `r` fresh ancillas.
pub fn fidelity_loss(
    encoder: &Unitary,
    recovery: &Unitary,
    channel: &PauliChannel,
    r: usize,
    mode: FidelityMode,
) -> Result<f64> {
    Ok(RecoveryObjective::new(encoder, channel, r)?.choi_dense(recovery)?.loss(mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{named_channel, NoiseName};
    use crate::optim::gradient;
    use crate::rea::{build_rea, default_block_count, synthesize, ReaParameters};
    use crate::stabilizer::{encoder_unitary, repetition_code};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_values(len: usize, seed: u64, scale: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-scale..scale)).collect()
    }

    fn bit(p: f64) -> PauliChannel {
        named_channel(NoiseName::Bit, p).unwrap()
    }

    /// Measurement-free rep3 recovery: copy the syndrome into two ancillas,
    /// then flip the flagged data qubit controlled on the ancillas.
    fn rep3_recovery() -> Unitary {
        let perm = |x: usize| -> usize {
            let (data, anc) = (x >> 2, x & 3);
            let bits = [(data >> 2) & 1, (data >> 1) & 1, data & 1];
            let syndrome = ((bits[0] ^ bits[1]) << 1) | (bits[1] ^ bits[2]);
            let anc = anc ^ syndrome;
            let flip = match anc {
                0b10 => 0b100,
                0b11 => 0b010,
                0b01 => 0b001,
                _ => 0,
            };
            ((data ^ flip) << 2) | anc
        };
        let m = CMatrix::from_fn(32, 32, |row, col| if perm(col) == row { Complex64::from(1.0) } else { ZERO });
        Unitary::new(m).unwrap()
    }

    #[test]
    fn noiseless_proxy_is_zero() {
        let layout = build_rea(4, default_block_count(4), 3).unwrap();
        let params = ReaParameters::new(&layout, random_values(layout.parameter_count(), 1, 3.0)).unwrap();
        let u = synthesize(&layout, &params).unwrap();
        assert!(distinguishability_loss(&u, &PauliChannel::identity()) < 1e-12);
    }

    #[test]
    fn single_qubit_bitflip_pair() {
        let p = 0.1;
        let terms = distinguishability_pairs(&Unitary::identity(1), &bit(p));
        // cardinal indices 4 and 5 are |0> and |1>
        let zz = terms.iter().find(|t| t.pair == (4, 5)).unwrap();
        assert!((zz.loss() - 2.0 * p).abs() < 1e-12);
        let xx = terms.iter().find(|t| t.pair == (0, 1)).unwrap();
        assert!(xx.loss() < 1e-12);
    }

    #[test]
    fn pair_terms_are_symmetric() {
        let layout = build_rea(3, 6, 2).unwrap();
        let params = ReaParameters::new(&layout, random_values(layout.parameter_count(), 4, 2.0)).unwrap();
        let u = synthesize(&layout, &params).unwrap();
        let noise = bit(0.07);
        let states = encoded_cardinals(&u);
        for t in distinguishability_pairs(&u, &noise) {
            let (a, b) = t.pair;
            let mut ra = outer(&states.column(b));
            let mut rb = outer(&states.column(a));
            noise.apply_iid_to_operator(&mut ra, 3, 0..3);
            noise.apply_iid_to_operator(&mut rb, 3, 0..3);
            let swapped = 0.5 * hermitian_eigen(&(ra - rb)).0.iter().map(|l| l.abs()).sum::<f64>();
            assert!((swapped - t.after).abs() < 1e-12);
        }
    }

    #[test]
    fn encoder_adjoint_gradient_matches_finite_differences() {
        let layout = build_rea(3, 12, 8).unwrap();
        let objective = EncoderObjective::new(layout.circuit(), named_channel(NoiseName::Adep, 0.1).unwrap());
        let params = random_values(layout.parameter_count(), 5, 1.0);
        let (value, grad) = objective.value_and_gradient(&params);
        assert!((value - objective.value(&params)).abs() < 1e-14);
        let fd = gradient(|x| Ok(objective.value(x)), &params, 1e-5).unwrap();
        for (k, (a, b)) in grad.iter().zip(&fd).enumerate() {
            assert!((a - b).abs() < 1e-7, "param {k}: adjoint {a} fd {b}");
        }
    }

    #[test]
    fn rep3_projector_recovery_as_unitary() {
        let encoder = encoder_unitary(&repetition_code());
        let recovery = rep3_recovery();
        let worst = fidelity_loss(&encoder, &recovery, &bit(0.1), 2, FidelityMode::Worst).unwrap();
        assert!((worst - 0.028).abs() < 1e-12, "{worst}");
        let choi = RecoveryObjective::new(&encoder, &bit(0.1), 2).unwrap().choi_dense(&recovery).unwrap();
        let f = choi.cardinal_fidelities();
        assert!((f[0] - 1.0).abs() < 1e-12 && (f[1] - 1.0).abs() < 1e-12);
        for v in &f[2..] {
            assert!((1.0 - v - 0.028).abs() < 1e-12);
        }
        let avg = fidelity_loss(&encoder, &recovery, &bit(0.1), 2, FidelityMode::Average).unwrap();
        assert!(avg <= worst);
    }

    #[test]
    fn identity_recovery_without_noise_is_lossless() {
        let layout = build_rea(3, 12, 1).unwrap();
        let params = ReaParameters::new(&layout, random_values(layout.parameter_count(), 2, 3.0)).unwrap();
        let encoder = synthesize(&layout, &params).unwrap();
        for mode in [FidelityMode::Average, FidelityMode::Worst] {
            let loss = fidelity_loss(&encoder, &Unitary::identity(5), &PauliChannel::identity(), 2, mode).unwrap();
            assert!(loss.abs() < 1e-12);
        }
    }

    #[test]
    fn average_mode_equals_entanglement_fidelity_form() {
        let enc_layout = build_rea(3, 12, 1).unwrap();
        let encoder = synthesize(
            &enc_layout,
            &ReaParameters::new(&enc_layout, random_values(enc_layout.parameter_count(), 2, 3.0)).unwrap(),
        )
        .unwrap();
        let rec_layout = build_rea(5, 10, 9).unwrap();
        let noise = named_channel(NoiseName::Dep, 0.2).unwrap();
        let objective = RecoveryObjective::new(&encoder, &noise, 2).unwrap();
        let embedded = objective.embed(&rec_layout.circuit());
        for seed in 0..10 {
            let params = random_values(rec_layout.parameter_count(), seed, 3.0);
            let choi = objective.choi_circuit(&embedded, &params);
            let avg = choi.loss(FidelityMode::Average);
            assert!((0.0..=1.0).contains(&avg) && (0.0..=1.0).contains(&choi.loss(FidelityMode::Worst)));
            assert!((avg - 2.0 * (1.0 - choi.entanglement_fidelity()) / 3.0).abs() < 1e-12);
            assert!(avg <= choi.loss(FidelityMode::Worst) + 1e-15);
            let trace: Complex64 = (0..4).map(|i| choi.0[(i, i)]).sum();
            assert!((trace.re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn recovery_adjoint_gradient_matches_finite_differences() {
        let enc_layout = build_rea(2, 6, 1).unwrap();
        let encoder = synthesize(
            &enc_layout,
            &ReaParameters::new(&enc_layout, random_values(enc_layout.parameter_count(), 3, 2.0)).unwrap(),
        )
        .unwrap();
        let rec_layout = build_rea(4, 12, 2).unwrap();
        let objective = RecoveryObjective::new(&encoder, &bit(0.15), 2).unwrap();
        let embedded = objective.embed(&rec_layout.circuit());
        let params = random_values(rec_layout.parameter_count(), 6, 2.0);
        let (value, grad) = objective.value_and_gradient(&embedded, &params);
        let loss = |x: &[f64]| Ok(objective.choi_circuit(&embedded, x).loss(FidelityMode::Average));
        assert!((value - loss(&params).unwrap()).abs() < 1e-13);
        let fd = gradient(loss, &params, 1e-5).unwrap();
        for (k, (a, b)) in grad.iter().zip(&fd).enumerate() {
            assert!((a - b).abs() < 1e-8, "param {k}: adjoint {a} fd {b}");
        }
    }

    #[test]
    fn register_cap_is_enforced() {
        let encoder = Unitary::identity(5);
        assert!(matches!(
            RecoveryObjective::new(&encoder, &bit(0.1), 8),
            Err(Error::RegisterTooLarge(13))
        ));
    }
}
