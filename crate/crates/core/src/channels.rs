//! Single-qubit Pauli noise.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{gates, CMatrix, KrausSet};

const PROB_TOL: f64 = 1e-12;

/// Named noise families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseName {
    /// Symmetric depolarizing, `(p/3, p/3, p/3)`.
    Dep,
    /// Asymmetric depolarizing with Z-dominant split `(0.07, 0.07, 0.86)`
    /// (asymmetry factor c = 0.5).
    Adep,
    /// Bit flip, `(p, 0, 0)`.
    Bit,
    /// Y flip, `(0, p, 0)`.
    Yflip,
}

impl NoiseName {
    pub const ALL: [NoiseName; 4] = [NoiseName::Dep, NoiseName::Adep, NoiseName::Bit, NoiseName::Yflip];

    /// Fractions `(p_x/p, p_y/p, p_z/p)`.
    pub fn proportions(self) -> [f64; 3] {
        match self {
            NoiseName::Dep => [1.0 / 3.0; 3],
            NoiseName::Adep => [0.07, 0.07, 0.86],
            NoiseName::Bit => [1.0, 0.0, 0.0],
            NoiseName::Yflip => [0.0, 1.0, 0.0],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseName::Dep => "dep",
            NoiseName::Adep => "adep",
            NoiseName::Bit => "bit",
            NoiseName::Yflip => "yflip",
        }
    }
}

impl fmt::Display for NoiseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownChannel(s.to_string()))
    }
}

/// `N(ρ) = (1 − p)ρ + p_x XρX + p_y YρY + p_z ZρZ` with `p = p_x + p_y + p_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliChannel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<NoiseName>,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl PauliChannel {
    pub fn new(p_x: f64, p_y: f64, p_z: f64) -> Result<Self> {
        let ch = Self { name: None, p_x, p_y, p_z };
        ch.validate()?;
        Ok(ch)
    }

    pub fn identity() -> Self {
        Self { name: None, p_x: 0.0, p_y: 0.0, p_z: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = self.probs();
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidChannel(format!("non-finite probability in {probs:?}")));
        }
        if probs.iter().any(|&p| p < -PROB_TOL) {
            return Err(Error::InvalidChannel(format!("negative probability in {probs:?}")));
        }
        if self.strength() > 1.0 + PROB_TOL {
            return Err(Error::InvalidChannel(format!("total strength {} exceeds 1", self.strength())));
        }
        Ok(())
    }

    pub fn probs(&self) -> [f64; 3] {
        [self.p_x, self.p_y, self.p_z]
    }

    /// Total strength `p = p_x + p_y + p_z`.
    pub fn strength(&self) -> f64 {
        self.p_x + self.p_y + self.p_z
    }

    /// `(p_x/p, p_y/p, p_z/p)`, zeros for the identity channel.
    pub fn proportions(&self) -> [f64; 3] {
        let p = self.strength();
        if p <= 0.0 {
            return [0.0; 3];
        }
        self.probs().map(|q| q / p)
    }

    /// Bloch-matrix diagonal `η_P = 1 − 2(p − p_P)`.
    pub fn bloch_eta(&self) -> BlochDiagonal {
        BlochDiagonal {
            eta_x: 1.0 - 2.0 * (self.p_y + self.p_z),
            eta_y: 1.0 - 2.0 * (self.p_x + self.p_z),
            eta_z: 1.0 - 2.0 * (self.p_x + self.p_y),
        }
    }

    /// Kraus operators `{√(1−p) I, √p_x X, √p_y Y, √p_z Z}`; zero-probability
    /// terms are omitted.
    pub fn kraus(&self) -> KrausSet {
        let weights = [1.0 - self.strength(), self.p_x, self.p_y, self.p_z];
        let paulis = [gates::identity(), gates::pauli_x(), gates::pauli_y(), gates::pauli_z()];
        let ops = weights
            .iter()
            .zip(paulis)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, m)| m * Complex64::from(w.sqrt()))
            .collect();
        KrausSet::new(ops).expect("Pauli Kraus operators are trace preserving")
    }

    /// Applies the channel in place to qubit `qubit` of any operator on
    /// `n_qubits` qubits (states, differences, observables).
    pub fn apply_to_operator(&self, m: &mut CMatrix, n_qubits: usize, qubit: usize) {
        let p = self.strength();
        let keep_diag = 1.0 - p + self.p_z;
        let swap_diag = self.p_x + self.p_y;
        let keep_off = 1.0 - p - self.p_z;
        let swap_off = self.p_x - self.p_y;
        let bit = 1usize << (n_qubits - 1 - qubit);
        let dim = m.nrows();
        for b in (0..dim).filter(|b| b & bit == 0) {
            let b1 = b | bit;
            for a in (0..dim).filter(|a| a & bit == 0) {
                let a1 = a | bit;
                let (m00, m01, m10, m11) = (m[(a, b)], m[(a, b1)], m[(a1, b)], m[(a1, b1)]);
                m[(a, b)] = m00 * keep_diag + m11 * swap_diag;
                m[(a1, b1)] = m11 * keep_diag + m00 * swap_diag;
                m[(a, b1)] = m01 * keep_off + m10 * swap_off;
                m[(a1, b)] = m10 * keep_off + m01 * swap_off;
            }
        }
    }

    /// `N^{⊗k}` on qubits `qubits` of an operator on `n_qubits` qubits.
    pub fn apply_iid_to_operator(&self, m: &mut CMatrix, n_qubits: usize, qubits: std::ops::Range<usize>) {
        for q in qubits {
            self.apply_to_operator(m, n_qubits, q);
        }
    }

    /// Worst-case fidelity loss `max_ψ 1 − <ψ|N(ψ)|ψ> = (1 − min η)/2`.
    pub fn worst_case_infidelity(&self) -> f64 {
        let eta = self.bloch_eta();
        (1.0 - eta.eta_x.min(eta.eta_y).min(eta.eta_z)) / 2.0
    }

    /// Average fidelity loss over the Haar measure, `(2/3)(1 − F_e)`
    /// with entanglement fidelity `F_e = 1 − p`.
    pub fn average_infidelity(&self) -> f64 {
        2.0 * self.strength() / 3.0
    }
}

impl fmt::Display for PauliChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y, z] = self.proportions();
        write!(f, "p={} X:{x:.2} Y:{y:.2} Z:{z:.2}", format_strength(self.strength()))
    }
}

/// Strength with two significant figures (`0.082`, `0.0068`, `0.0000020`).
pub fn format_strength(p: f64) -> String {
    if p == 0.0 || !p.is_finite() {
        return format!("{p:.3}");
    }
    let digits = (1 - p.abs().log10().floor() as i32).max(0) as usize;
    format!("{p:.digits$}")
}

/// Diagonal of the single-qubit Pauli-Liouville (Bloch) matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochDiagonal {
    pub eta_x: f64,
    pub eta_y: f64,
    pub eta_z: f64,
}

impl BlochDiagonal {
    pub fn as_array(&self) -> [f64; 3] {
        [self.eta_x, self.eta_y, self.eta_z]
    }
}

/// Named channel at total strength `p`.
pub fn named_channel(name: NoiseName, p: f64) -> Result<PauliChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidChannel(format!("strength {p} outside [0, 1]")));
    }
    let [x, y, z] = name.proportions();
    Ok(PauliChannel { name: Some(name), p_x: x * p, p_y: y * p, p_z: z * p })
}

/// Parses `NAME:P` or `X,Y,Z`.
pub fn parse_noise(spec: &str) -> Result<PauliChannel> {
    if let Some((name, p)) = spec.split_once(':') {
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| Error::InvalidChannel(format!("cannot parse strength `{p}`")))?;
        return named_channel(name.trim().parse()?, p);
    }
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidChannel(format!("expected NAME:P or X,Y,Z, got `{spec}`")));
    }
    let mut probs = [0.0; 3];
    for (slot, part) in probs.iter_mut().zip(parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| Error::InvalidChannel(format!("cannot parse probability `{part}`")))?;
    }
    PauliChannel::new(probs[0], probs[1], probs[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{apply_kraus, DensityMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_channel(rng: &mut impl Rng) -> PauliChannel {
        let mut w: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        PauliChannel::new(w[1], w[2], w[3]).unwrap()
    }

    fn random_state(rng: &mut impl Rng) -> DensityMatrix {
        let psi: Vec<Complex64> = (0..2).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let pure = DensityMatrix::from_pure(&psi).unwrap();
        let mix = rng.random::<f64>();
        let m = pure.matrix() * Complex64::from(mix)
            + DensityMatrix::maximally_mixed(1).unwrap().matrix() * Complex64::from(1.0 - mix);
        DensityMatrix::new(m).unwrap()
    }

    #[test]
    fn named_examples() {
        let y = named_channel(NoiseName::Yflip, 0.10).unwrap();
        assert_eq!(y.probs(), [0.0, 0.10, 0.0]);
        let a = named_channel(NoiseName::Adep, 0.10).unwrap();
        for (got, want) in a.probs().iter().zip([0.007, 0.007, 0.086]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(named_channel(NoiseName::Dep, 0.0).unwrap().probs(), [0.0; 3]);
        assert!(named_channel(NoiseName::Bit, 1.5).is_err());
        assert!("amp".parse::<NoiseName>().is_err());
    }

    #[test]
    fn bloch_examples() {
        let eta = PauliChannel::identity().bloch_eta();
        assert_eq!(eta.as_array(), [1.0; 3]);
        let p = 0.13;
        let bit = named_channel(NoiseName::Bit, p).unwrap().bloch_eta().as_array();
        for (g, w) in bit.iter().zip([1.0, 1.0 - 2.0 * p, 1.0 - 2.0 * p]) {
            assert!((g - w).abs() < 1e-15);
        }
        let dep = named_channel(NoiseName::Dep, p).unwrap().bloch_eta().as_array();
        for g in dep {
            assert!((g - (1.0 - 4.0 * p / 3.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn kraus_examples() {
        assert_eq!(PauliChannel::identity().kraus().operators().len(), 1);
        let flip = PauliChannel::new(1.0, 0.0, 0.0).unwrap().kraus();
        assert_eq!(flip.operators().len(), 1);
        assert_eq!(flip.operators()[0], gates::pauli_x());
        let dep = named_channel(NoiseName::Dep, 0.3).unwrap().kraus();
        let weights: Vec<f64> = dep.operators().iter().map(|k| (k.adjoint() * k)[(0, 0)].re).collect();
        for (g, w) in weights.iter().zip([0.7, 0.1, 0.1, 0.1]) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn kraus_matches_explicit_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let ch = random_channel(&mut rng);
            let rho = random_state(&mut rng);
            let got = apply_kraus(&rho, &ch.kraus(), 0).unwrap();
            let m = rho.matrix();
            let (x, y, z) = (gates::pauli_x(), gates::pauli_y(), gates::pauli_z());
            let want: CMatrix = m * Complex64::from(1.0 - ch.strength())
                + &x * m * &x * Complex64::from(ch.p_x)
                + &y * m * &y * Complex64::from(ch.p_y)
                + &z * m * &z * Complex64::from(ch.p_z);
            let dev = (got.matrix() - want).iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-12, "deviation {dev}");
        }
    }

    /// Brute-force worst case over a 101 x 100 latitude/longitude grid on the
    /// Bloch sphere.
    fn grid_worst_case(ch: &PauliChannel, points: usize) -> f64 {
        let side = (points as f64).sqrt() as usize;
        let eta = ch.bloch_eta().as_array();
        let mut worst: f64 = 0.0;
        for i in 0..=side {
            let theta = std::f64::consts::PI * i as f64 / side as f64;
            for j in 0..side {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / side as f64;
                let v = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
                // <ψ|N(ψ)|ψ> = (1 + Σ η_P v_P²)/2
                let f = 0.5 * (1.0 + (0..3).map(|k| eta[k] * v[k] * v[k]).sum::<f64>());
                worst = worst.max(1.0 - f);
            }
        }
        worst
    }

    #[test]
    fn worst_case_examples() {
        assert_eq!(PauliChannel::identity().worst_case_infidelity(), 0.0);
        let bit = named_channel(NoiseName::Bit, 0.1).unwrap();
        assert!((bit.worst_case_infidelity() - 0.1).abs() < 1e-15);
        assert!((grid_worst_case(&bit, 10_000) - 0.1).abs() < 1e-4);
        let dep = named_channel(NoiseName::Dep, 0.1).unwrap();
        assert!((dep.worst_case_infidelity() - 0.2 / 3.0).abs() < 1e-15);
        assert!((grid_worst_case(&dep, 10_000) - 0.2 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn worst_case_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let ch = random_channel(&mut rng);
            let grid = grid_worst_case(&ch, 10_000);
            assert!((ch.worst_case_infidelity() - grid).abs() < 1e-4);
        }
    }

    #[test]
    fn parse_noise_specs() {
        let y = parse_noise("yflip:0.1").unwrap();
        assert_eq!(y.name, Some(NoiseName::Yflip));
        assert_eq!(y.probs(), [0.0, 0.1, 0.0]);
        let t = parse_noise("0.01, 0.02,0.03").unwrap();
        assert_eq!(t.probs(), [0.01, 0.02, 0.03]);
        assert!(parse_noise("0.5,0.5,0.5").is_err());
        assert!(parse_noise("foo:0.1").is_err());
        assert!(parse_noise("0.1").is_err());
    }

    #[test]
    fn strength_formatting() {
        assert_eq!(format_strength(0.082), "0.082");
        assert_eq!(format_strength(0.0068), "0.0068");
        assert_eq!(format_strength(0.1), "0.10");
        assert_eq!(format_strength(0.00046), "0.00046");
        assert_eq!(format_strength(0.0000020), "0.0000020");
        assert_eq!(format_strength(0.0000037), "0.0000037");
    }

    #[test]
    fn channel_record_serialization() {
        let y = named_channel(NoiseName::Yflip, 0.1).unwrap();
        let json = serde_json::to_string(&y).unwrap();
        assert!(json.contains("\"name\":\"yflip\""));
        let back: PauliChannel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, y);
        let plain: PauliChannel = serde_json::from_str(r#"{"p_x":0.1,"p_y":0.0,"p_z":0.0}"#).unwrap();
        assert_eq!(plain.name, None);
    }

    #[test]
    fn operator_application_matches_kraus() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let channel = random_channel(&mut rng);
        let psi: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        let state = DensityMatrix::from_pure(&psi).unwrap();
        for q in 0..3 {
            let want = apply_kraus(&state, &channel.kraus(), q).unwrap();
            let mut got = state.matrix().clone();
            channel.apply_to_operator(&mut got, 3, q);
            let dev = (got - want.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-14, "qubit {q}");
        }
    }
}
