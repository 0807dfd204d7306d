//! Fidelity-only estimation of the effective single-qubit Pauli channel of
//! one encode → noise → recover → decode level.
//!
//! Six cardinal inputs `|±X>, |±Y>, |±Z>` are pushed through the level, their
//! output fidelities fix the Bloch diagonal `η_P = F(+P) + F(−P) − 1`, which
//! is converted to Kraus probabilities and, when the result is not a valid
//! channel, projected onto the probability simplex.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::{BlochDiagonal, PauliChannel};
use crate::error::{Error, Result};
use crate::qsim::{fidelity, DensityMatrix};

/// Residual above which the effective channel is flagged as non-Pauli.
pub const NON_PAULI_RESIDUAL: f64 = 1e-6;

const SIMPLEX_TOL: f64 = 1e-12;

/// Cardinal labels in the order used throughout: `+X, −X, +Y, −Y, +Z, −Z`.
pub const CARDINAL_LABELS: [&str; 6] = ["+X", "-X", "+Y", "-Y", "+Z", "-Z"];

/// Bloch vectors of the cardinal states, same order as [`CARDINAL_LABELS`].
pub const CARDINAL_BLOCH: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
];

/// State vectors of the six cardinal states.
pub fn cardinal_vectors() -> [[Complex64; 2]; 6] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        [c(h, 0.0), c(h, 0.0)],
        [c(h, 0.0), c(-h, 0.0)],
        [c(h, 0.0), c(0.0, h)],
        [c(h, 0.0), c(0.0, -h)],
        [c(1.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(1.0, 0.0)],
    ]
}

/// The six pure cardinal states `|±X>, |±Y>, |±Z>`.
pub fn cardinal_states() -> [DensityMatrix; 6] {
    cardinal_vectors().map(|v| DensityMatrix::from_pure(&v).expect("cardinal vectors are normalized"))
}

/// `η_P = F(+P) + F(−P) − 1`, the exact least-squares solution for the
/// cardinal design.
pub fn eta_from_fidelities(fids: &[f64; 6]) -> Result<BlochDiagonal> {
    if let Some(f) = fids.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::FidelityOutOfRange(*f));
    }
    Ok(BlochDiagonal {
        eta_x: fids[0] + fids[1] - 1.0,
        eta_y: fids[2] + fids[3] - 1.0,
        eta_z: fids[4] + fids[5] - 1.0,
    })
}

fn design_system(fids: &[f64; 6]) -> (DMatrix<f64>, DVector<f64>) {
    let a = DMatrix::from_fn(6, 3, |i, j| CARDINAL_BLOCH[i][j].powi(2));
    let b = DVector::from_iterator(6, fids.iter().map(|f| 2.0 * f - 1.0));
    (a, b)
}

/// Solves `argmin_η ‖Aη − b‖²` with a dense SVD, rows `A_i = r_i²` and
/// targets `b_i = 2F_i − 1`. Cross-check for [`eta_from_fidelities`].
pub fn least_squares_eta(fids: &[f64; 6]) -> Result<BlochDiagonal> {
    let (a, b) = design_system(fids);
    let eta = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::NonFinite(e.to_string()))?;
    Ok(BlochDiagonal { eta_x: eta[0], eta_y: eta[1], eta_z: eta[2] })
}

/// `‖Aη − b‖` for the cardinal design.
pub fn residual(eta: &BlochDiagonal, fids: &[f64; 6]) -> f64 {
    let (a, b) = design_system(fids);
    let eta = DVector::from_row_slice(&eta.as_array());
    (a * eta - b).norm()
}

/// Raw `(p_I, p_X, p_Y, p_Z)`; entries may be negative for non-Pauli input.
pub fn eta_to_probs(eta: &BlochDiagonal) -> [f64; 4] {
    let BlochDiagonal { eta_x, eta_y, eta_z } = *eta;
    let p_x = 0.25 * (1.0 - eta_y - eta_z + eta_x);
    let p_y = 0.25 * (1.0 - eta_x - eta_z + eta_y);
    let p_z = 0.25 * (1.0 - eta_x - eta_y + eta_z);
    [1.0 - p_x - p_y - p_z, p_x, p_y, p_z]
}

/// Euclidean projection of `(p_I, p_X, p_Y, p_Z)` onto the probability
/// simplex by the sort-and-threshold method. Returns the channel and whether
/// the input had to be moved.
pub fn project_to_simplex(raw: &[f64; 4]) -> Result<(PauliChannel, bool)> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("raw probabilities {raw:?}")));
    }
    let sum: f64 = raw.iter().sum();
    if raw.iter().all(|&v| v >= -SIMPLEX_TOL) && (sum - 1.0).abs() <= SIMPLEX_TOL {
        let [_, x, y, z] = raw.map(|v| v.max(0.0));
        return Ok((PauliChannel { name: None, p_x: x, p_y: y, p_z: z }, false));
    }
    let q = simplex_projection(raw);
    Ok((PauliChannel { name: None, p_x: q[1], p_y: q[2], p_z: q[3] }, true))
}

fn simplex_projection(v: &[f64; 4]) -> [f64; 4] {
    let mut u = *v;
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

/// A single-qubit level map: encode, apply `noise` to every physical qubit,
/// recover, decode.
pub trait LevelEvaluator {
    fn evaluate(&self, input: &DensityMatrix, noise: &PauliChannel) -> Result<DensityMatrix>;
}

/// Fitted effective channel of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub eta: BlochDiagonal,
    /// `(p_I, p_X, p_Y, p_Z)` before projection.
    pub probs_raw: [f64; 4],
    pub probs: PauliChannel,
    pub projected: bool,
    pub residual: f64,
    /// Output fidelities for `+X, −X, +Y, −Y, +Z, −Z`.
    pub fidelities: [f64; 6],
}

impl ChannelEstimate {
    /// Builds an estimate from the six measured fidelities.
    pub fn from_fidelities(fidelities: [f64; 6]) -> Result<Self> {
        let eta = eta_from_fidelities(&fidelities)?;
        let probs_raw = eta_to_probs(&eta);
        let (probs, projected) = project_to_simplex(&probs_raw)?;
        Ok(Self { eta, probs_raw, probs, projected, residual: residual(&eta, &fidelities), fidelities })
    }

    pub fn strength(&self) -> f64 {
        self.probs.strength()
    }

    pub fn proportions(&self) -> [f64; 3] {
        self.probs.proportions()
    }

    /// Worst-case fidelity loss of the fitted channel.
    pub fn worst_case_infidelity(&self) -> f64 {
        self.probs.worst_case_infidelity()
    }

    /// Largest `1 − F` over the six measured inputs.
    pub fn measured_worst_infidelity(&self) -> f64 {
        self.fidelities.iter().map(|f| 1.0 - f).fold(0.0, f64::max)
    }

    pub fn is_pauli(&self) -> bool {
        self.residual < NON_PAULI_RESIDUAL
    }
}

/// Runs the six cardinal states through `level` and fits a Pauli channel.
pub fn estimate_effective_channel(level: &dyn LevelEvaluator, physical: &PauliChannel) -> Result<ChannelEstimate> {
    let mut fids = [0.0; 6];
    for (slot, state) in fids.iter_mut().zip(cardinal_states()) {
        let out = level.evaluate(&state, physical)?;
        *slot = fidelity(&state, &out)?;
    }
    ChannelEstimate::from_fidelities(fids)
}

/// A level that applies the physical channel directly to the logical qubit.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityLevel;

impl LevelEvaluator for IdentityLevel {
    fn evaluate(&self, input: &DensityMatrix, noise: &PauliChannel) -> Result<DensityMatrix> {
        crate::qsim::apply_kraus(input, &noise.kraus(), 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{named_channel, NoiseName};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_channel(rng: &mut impl Rng) -> PauliChannel {
        let w: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
        let total: f64 = w.iter().sum();
        PauliChannel::new(w[1] / total, w[2] / total, w[3] / total).unwrap()
    }

    #[test]
    fn cardinal_state_properties() {
        let states = cardinal_states();
        assert_eq!(states[4], DensityMatrix::basis(1, 0).unwrap());
        for (s, want) in states.iter().zip(CARDINAL_BLOCH) {
            let b = s.bloch_vector().unwrap();
            let norm: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            for (g, w) in b.iter().zip(want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
        let mean = states.iter().fold(crate::qsim::CMatrix::zeros(2, 2), |acc, s| acc + s.matrix())
            / Complex64::from(6.0);
        let half = DensityMatrix::maximally_mixed(1).unwrap();
        assert!((mean - half.matrix()).norm() < 1e-12);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_from_fidelities(&[1.0; 6]).unwrap().as_array(), [1.0; 3]);
        let p = 0.1;
        let fids = [1.0, 1.0, 1.0 - p, 1.0 - p, 1.0 - p, 1.0 - p];
        let eta = eta_from_fidelities(&fids).unwrap().as_array();
        for (g, w) in eta.iter().zip([1.0, 1.0 - 2.0 * p, 1.0 - 2.0 * p]) {
            assert!((g - w).abs() < 1e-15);
        }
        assert!(matches!(eta_from_fidelities(&[1.2, 1.0, 1.0, 1.0, 1.0, 1.0]), Err(Error::FidelityOutOfRange(_))));
    }

    #[test]
    fn eta_matches_bloch_diagonal_on_pauli_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let ch = random_channel(&mut rng);
            let est = estimate_effective_channel(&IdentityLevel, &ch).unwrap();
            for (g, w) in est.eta.as_array().iter().zip(ch.bloch_eta().as_array()) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probs_examples_and_round_trip() {
        assert_eq!(eta_to_probs(&PauliChannel::identity().bloch_eta()), [1.0, 0.0, 0.0, 0.0]);
        let p = 0.2;
        let probs = eta_to_probs(&BlochDiagonal { eta_x: 1.0, eta_y: 1.0 - 2.0 * p, eta_z: 1.0 - 2.0 * p });
        for (g, w) in probs.iter().zip([1.0 - p, p, 0.0, 0.0]) {
            assert!((g - w).abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let ch = random_channel(&mut rng);
            let back = eta_to_probs(&ch.bloch_eta());
            for (g, w) in back[1..].iter().zip(ch.probs()) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_is_the_least_squares_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let fids: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>());
            let closed = eta_from_fidelities(&fids).unwrap().as_array();
            let lsq = least_squares_eta(&fids).unwrap().as_array();
            for (a, b) in closed.iter().zip(lsq) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let (ch, moved) = project_to_simplex(&[0.9, 0.05, 0.03, 0.02]).unwrap();
        assert!(!moved);
        assert_eq!(ch.probs(), [0.05, 0.03, 0.02]);
        let (ch, moved) = project_to_simplex(&[1.02, -0.02, 0.0, 0.0]).unwrap();
        assert!(moved);
        assert!(ch.probs().iter().all(|p| p.abs() < 1e-15));
        assert!(project_to_simplex(&[f64::NAN, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn estimator_is_exact_on_pauli_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let ch = random_channel(&mut rng);
            let est = estimate_effective_channel(&IdentityLevel, &ch).unwrap();
            assert!(!est.projected);
            assert!(est.residual < 1e-10);
            for (g, w) in est.probs.probs().iter().zip(ch.probs()) {
                assert!((g - w).abs() < 1e-10);
            }
        }
        let y = named_channel(NoiseName::Yflip, 0.1).unwrap();
        let est = estimate_effective_channel(&IdentityLevel, &y).unwrap();
        assert!((est.probs.p_y - 0.1).abs() < 1e-12 && est.probs.p_x.abs() < 1e-12 && est.probs.p_z.abs() < 1e-12);
    }
}
