//! Randomized entangling ansatz (REA).
//!
//! An initial layer of `RZ·RY·RZ` Euler rotations on every qubit is followed
//! by two-qubit blocks placed on seeded random pairs. Each block applies
//! `exp(−i θ₁ XX/2)·exp(−i θ₂ ZZ/2)` and then `RY(θ₃)` on the first qubit,
//! `RY(θ₄)` on the second and `RZ(θ₅)` on the first. All-zero parameters give
//! the identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::PauliChannel;
use crate::circuit::{Circuit, Rotation, RotationAxis};
use crate::error::{Error, Result};
use crate::qsim::{Unitary, MAX_QUBITS};

pub const PARAMS_PER_SINGLE: usize = 3;
pub const PARAMS_PER_BLOCK: usize = 5;

/// Default block count `n(n + 1)` for an `n`-qubit ansatz.
pub fn default_block_count(n_qubits: usize) -> usize {
    n_qubits * (n_qubits + 1)
}

/// Recovery block count for an `m`-qubit register: about twice the real
/// dimension `4^m` of the unitary group, in blocks of [`PARAMS_PER_BLOCK`].
pub fn recovery_block_count(m_qubits: usize) -> usize {
    (2 * 4usize.pow(m_qubits as u32)).div_ceil(PARAMS_PER_BLOCK)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReaLayout {
    n_qubits: usize,
    seed: u64,
    blocks: Vec<(usize, usize)>,
}

impl ReaLayout {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    pub fn parameter_count(&self) -> usize {
        PARAMS_PER_SINGLE * self.n_qubits + PARAMS_PER_BLOCK * self.blocks.len()
    }

    /// The rotation sequence realizing this layout.
    pub fn circuit(&self) -> Circuit {
        let mut rotations = Vec::with_capacity(self.parameter_count());
        let mut push = |axis, param| rotations.push(Rotation { axis, param });
        for q in 0..self.n_qubits {
            let base = PARAMS_PER_SINGLE * q;
            push(RotationAxis::Z(q), base);
            push(RotationAxis::Y(q), base + 1);
            push(RotationAxis::Z(q), base + 2);
        }
        for (b, &(i, j)) in self.blocks.iter().enumerate() {
            let base = PARAMS_PER_SINGLE * self.n_qubits + PARAMS_PER_BLOCK * b;
            push(RotationAxis::ZZ(i, j), base + 1);
            push(RotationAxis::XX(i, j), base);
            push(RotationAxis::Y(i), base + 2);
            push(RotationAxis::Y(j), base + 3);
            push(RotationAxis::Z(i), base + 4);
        }
        Circuit { n_qubits: self.n_qubits, n_params: self.parameter_count(), rotations }
    }
}

/// Seeded random layout; pairs are ordered, distinct, and never repeat the
/// previous block. Layouts with the same seed share their common prefix.
pub fn build_rea(n_qubits: usize, n_blocks: usize, seed: u64) -> Result<ReaLayout> {
    if n_qubits < 2 {
        return Err(Error::InvalidAnsatz(format!("need at least 2 qubits, got {n_qubits}")));
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::RegisterTooLarge(n_qubits));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks: Vec<(usize, usize)> = Vec::with_capacity(n_blocks);
    while blocks.len() < n_blocks {
        let i = rng.random_range(0..n_qubits);
        let j = rng.random_range(0..n_qubits - 1);
        let pair = (i, if j >= i { j + 1 } else { j });
        if blocks.last() != Some(&pair) {
            blocks.push(pair);
        }
    }
    Ok(ReaLayout { n_qubits, seed, blocks })
}

pub fn parameter_count(layout: &ReaLayout) -> usize {
    layout.parameter_count()
}

/// Parameter vector (radians) checked against a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ReaParameters(Vec<f64>);

impl ReaParameters {
    pub fn new(layout: &ReaLayout, values: Vec<f64>) -> Result<Self> {
        let expected = layout.parameter_count();
        if values.len() != expected {
            return Err(Error::ParameterLength { expected, found: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("ansatz parameter {v}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(layout: &ReaLayout) -> Self {
        Self(vec![0.0; layout.parameter_count()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn synthesize(layout: &ReaLayout, params: &ReaParameters) -> Result<Unitary> {
    let expected = layout.parameter_count();
    if params.len() != expected {
        return Err(Error::ParameterLength { expected, found: params.len() });
    }
    Ok(Unitary::from_matrix_unchecked(layout.circuit().unitary(params.values())))
}

/// Where a trained ansatz came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub channel: PauliChannel,
    pub level: usize,
}

/// Serialized form of a layout with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaRecord {
    pub n_qubits: usize,
    pub seed: u64,
    pub blocks: Vec<(usize, usize)>,
    pub params: Vec<f64>,
    pub provenance: Provenance,
}

impl ReaRecord {
    pub fn new(layout: &ReaLayout, params: &ReaParameters, provenance: Provenance) -> Self {
        Self {
            n_qubits: layout.n_qubits,
            seed: layout.seed,
            blocks: layout.blocks.clone(),
            params: params.values().to_vec(),
            provenance,
        }
    }

    /// Rebuilds the layout from its seed and checks it against the stored
    /// blocks and parameter count.
    pub fn restore(&self) -> Result<(ReaLayout, ReaParameters, Provenance)> {
        let layout = build_rea(self.n_qubits, self.blocks.len(), self.seed)?;
        if layout.blocks != self.blocks {
            return Err(Error::Malformed(format!(
                "stored blocks do not match the layout generated from seed {}",
                self.seed
            )));
        }
        let params = ReaParameters::new(&layout, self.params.clone())?;
        self.provenance.channel.validate()?;
        Ok((layout, params, self.provenance))
    }
}

pub fn serialize(layout: &ReaLayout, params: &ReaParameters, provenance: Provenance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ReaRecord::new(layout, params, provenance))?)
}

pub fn deserialize(text: &str) -> Result<(ReaLayout, ReaParameters, Provenance)> {
    let record: ReaRecord = serde_json::from_str(text)?;
    record.restore()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{named_channel, NoiseName};
    use crate::qsim::{partial_trace, hermitian_eigenvalues, CMatrix, DensityMatrix};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_params(layout: &ReaLayout, seed: u64) -> ReaParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..layout.parameter_count()).map(|_| rng.random_range(-PI..PI)).collect();
        ReaParameters::new(layout, values).unwrap()
    }

    fn max_dev(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn provenance() -> Provenance {
        Provenance { channel: named_channel(NoiseName::Yflip, 0.1).unwrap(), level: 1 }
    }

    #[test]
    fn counts() {
        let layout = build_rea(5, default_block_count(5), 11).unwrap();
        assert_eq!(layout.blocks().len(), 30);
        assert_eq!(parameter_count(&layout), 165);
        assert_eq!(recovery_block_count(5), 410);
        assert_eq!(recovery_block_count(3), 26);
        let bare = build_rea(2, 0, 3).unwrap();
        assert_eq!(parameter_count(&bare), 6);
        assert!(build_rea(1, 0, 0).is_err());
    }

    #[test]
    fn layout_is_deterministic_and_well_formed() {
        let a = build_rea(4, 40, 99).unwrap();
        assert_eq!(a, build_rea(4, 40, 99).unwrap());
        assert_ne!(a, build_rea(4, 40, 100).unwrap());
        for w in a.blocks().windows(2) {
            assert_ne!(w[0], w[1]);
        }
        assert!(a.blocks().iter().all(|&(i, j)| i != j && i < 4 && j < 4));
        let longer = build_rea(4, 60, 99).unwrap();
        assert_eq!(&longer.blocks()[..40], a.blocks());
    }

    #[test]
    fn zero_parameters_give_identity() {
        let layout = build_rea(3, 12, 5).unwrap();
        let u = synthesize(&layout, &ReaParameters::zeros(&layout)).unwrap();
        assert!(max_dev(u.matrix(), &CMatrix::identity(8, 8)) < 1e-10);
    }

    #[test]
    fn synthesized_unitaries_are_unitary() {
        let layout = build_rea(3, 12, 5).unwrap();
        for seed in 0..10 {
            let u = synthesize(&layout, &random_params(&layout, seed)).unwrap();
            assert!(u.unitarity_error() < 1e-10);
        }
    }

    #[test]
    fn periodic_in_each_parameter() {
        let layout = build_rea(3, 6, 8).unwrap();
        let params = random_params(&layout, 1);
        let base = synthesize(&layout, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let k = rng.random_range(0..params.len());
            let mut shifted = params.values().to_vec();
            shifted[k] += 2.0 * PI;
            let u = synthesize(&layout, &ReaParameters::new(&layout, shifted).unwrap()).unwrap();
            // a 2π shift of a half-angle rotation flips the global sign
            let dev = max_dev(u.matrix(), base.matrix()).min(max_dev(&-u.matrix(), base.matrix()));
            assert!(dev < 1e-10, "parameter {k}");
        }
    }

    #[test]
    fn entangling_block_creates_one_ebit() {
        let layout = build_rea(2, 1, 0).unwrap();
        let mut values = vec![0.0; layout.parameter_count()];
        values[6] = FRAC_PI_2;
        let u = synthesize(&layout, &ReaParameters::new(&layout, values).unwrap()).unwrap();
        let out = DensityMatrix::from_pure(&u.column(0)).unwrap();
        let reduced = partial_trace(&out, &[0]).unwrap();
        let entropy: f64 = hermitian_eigenvalues(reduced.matrix())
            .into_iter()
            .filter(|&l| l > 1e-15)
            .map(|l| -l * l.log2())
            .sum();
        assert!((entropy - 1.0).abs() < 1e-10, "entropy {entropy}");
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let layout = build_rea(2, 2, 0).unwrap();
        assert!(matches!(
            ReaParameters::new(&layout, vec![0.0; 5]),
            Err(Error::ParameterLength { expected: 16, found: 5 })
        ));
    }

    #[test]
    fn record_round_trip_is_exact() {
        let layout = build_rea(4, 20, 1234).unwrap();
        let params = random_params(&layout, 9);
        let text = serialize(&layout, &params, provenance()).unwrap();
        let (l2, p2, prov) = deserialize(&text).unwrap();
        assert_eq!(l2, layout);
        assert_eq!(prov, provenance());
        assert!(p2.values().iter().zip(params.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let u1 = synthesize(&layout, &params).unwrap();
        let u2 = synthesize(&l2, &p2).unwrap();
        assert!(max_dev(u1.matrix(), u2.matrix()) < 1e-12);
    }

    #[test]
    fn malformed_records_are_rejected() {
        let layout = build_rea(3, 4, 7).unwrap();
        let params = random_params(&layout, 0);
        let mut value: serde_json::Value =
            serde_json::from_str(&serialize(&layout, &params, provenance()).unwrap()).unwrap();
        let mut missing_seed = value.clone();
        missing_seed.as_object_mut().unwrap().remove("seed");
        assert!(deserialize(&missing_seed.to_string()).is_err());

        value["seed"] = serde_json::json!(8);
        assert!(matches!(deserialize(&value.to_string()), Err(Error::Malformed(_))));

        let mut short = serde_json::from_str::<ReaRecord>(&serialize(&layout, &params, provenance()).unwrap()).unwrap();
        short.params.pop();
        assert!(matches!(short.restore(), Err(Error::ParameterLength { .. })));
    }
}
