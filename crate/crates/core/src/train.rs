//! Training of variational encoders and measurement-free recoveries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use rayon::prelude::*;

use crate::channels::PauliChannel;
use crate::error::{Error, Result};
use crate::losses::{EncoderObjective, FidelityMode, RecoveryFrame, RecoveryObjective};
use crate::optim::{gradient, minimize, LbfgsOptions};
use crate::qsim::{Unitary, MAX_QUBITS};
use crate::rea::{build_rea, default_block_count, recovery_block_count, synthesize, Provenance, ReaLayout, ReaParameters, ReaRecord};

/// Cold-start ranges: encoders draw from the full period, recoveries start
/// near the identity.
const ENCODER_INIT: f64 = std::f64::consts::PI;
const RECOVERY_INIT: f64 = 0.1;
const ENCODER_STREAM: u64 = 0;
const RECOVERY_STREAM: u64 = 1 << 32;

/// Which ansatz is being optimized.
#[derive(Debug, Clone, Copy)]
enum Stage {
    Encoder,
    Recovery,
}

impl Stage {
    fn init_scale(self) -> f64 {
        match self {
            Stage::Encoder => ENCODER_INIT,
            Stage::Recovery => RECOVERY_INIT,
        }
    }

    fn stream(self) -> u64 {
        match self {
            Stage::Encoder => ENCODER_STREAM,
            Stage::Recovery => RECOVERY_STREAM,
        }
    }
}

/// How the optimizer obtains gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Reverse-mode differentiation through the circuit simulator.
    #[default]
    Adjoint,
    /// Central differences with step `h`.
    FiniteDifference,
}

/// Optimizer budget for the recovery stage, which needs far more iterations
/// than the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryBudget {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub memory: usize,
}

impl Default for RecoveryBudget {
    fn default() -> Self {
        Self { max_iterations: 5000, tolerance: 1e-12, memory: 40 }
    }
}

/// The top-level `max_iterations`, `tolerance` and `memory` drive encoder
/// training; `recovery` holds the recovery stage's own budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_iterations: usize,
    pub h: f64,
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub memory: usize,
    pub gradient: GradientMethod,
    /// Fresh recovery ancillas.
    pub ancillas: usize,
    pub recovery_frame: RecoveryFrame,
    /// Recovery block count; `None` uses [`recovery_block_count`].
    pub recovery_blocks: Option<usize>,
    pub recovery: RecoveryBudget,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            h: 1e-5,
            tolerance: 1e-9,
            restarts: 3,
            seed: 0,
            memory: 10,
            gradient: GradientMethod::Adjoint,
            ancillas: 0,
            recovery_frame: RecoveryFrame::Logical,
            recovery_blocks: None,
            recovery: RecoveryBudget::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.h.is_nan() || self.h <= 0.0 {
            return fail(format!("gradient step h must be positive, got {}", self.h));
        }
        if !(self.tolerance > 0.0 && self.recovery.tolerance > 0.0) {
            return fail(format!("tolerances must be positive, got {} and {}", self.tolerance, self.recovery.tolerance));
        }
        if self.restarts == 0 {
            return fail("restarts must be at least 1".into());
        }
        if self.memory == 0 || self.recovery.memory == 0 {
            return fail("optimizer memory must be at least 1".into());
        }
        Ok(())
    }

    fn recovery_blocks_for(&self, width: usize) -> usize {
        self.recovery_blocks.unwrap_or_else(|| recovery_block_count(width))
    }

    fn lbfgs(&self, stage: Stage) -> LbfgsOptions {
        match stage {
            Stage::Encoder => LbfgsOptions { memory: self.memory, max_iterations: self.max_iterations, tolerance: self.tolerance },
            Stage::Recovery => {
                let r = self.recovery;
                LbfgsOptions { memory: r.memory, max_iterations: r.max_iterations, tolerance: r.tolerance }
            }
        }
    }
}

/// Outcome of one optimization (best over restarts).
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub layout: ReaLayout,
    pub params: ReaParameters,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restart: usize,
}

fn cold_start(len: usize, seed: u64, stage: Stage, restart: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage.stream() + restart as u64 + 1);
    let scale = stage.init_scale();
    (0..len).map(|_| rng.random_range(-scale..=scale)).collect()
}

fn fit<V, G>(layout: ReaLayout, config: &TrainConfig, warm: Option<ReaParameters>, stage: Stage, value: V, value_and_grad: G) -> Result<Fit>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
{
    config.validate()?;
    let len = layout.parameter_count();
    let run = |restart: usize| -> Result<Fit> {
        let x0 = match (&warm, restart) {
            (Some(w), 0) => w.values().to_vec(),
            _ => cold_start(len, config.seed, stage, restart),
        };
        let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            match config.gradient {
                GradientMethod::Adjoint => Ok(value_and_grad(x)),
                GradientMethod::FiniteDifference => Ok((value(x), gradient(|y| Ok(value(y)), x, config.h)?)),
            }
        };
        let found = minimize(objective, x0, &config.lbfgs(stage))?;
        Ok(Fit {
            params: ReaParameters::new(&layout, found.x)?,
            layout: layout.clone(),
            loss: found.value,
            iterations: found.iterations,
            converged: found.converged,
            restart,
        })
    };
    let runs: Vec<Result<Fit>> = (0..config.restarts).into_par_iter().map(run).collect();
    let mut best: Option<Fit> = None;
    let mut last_error = None;
    for outcome in runs {
        match outcome {
            Ok(found) if best.as_ref().is_none_or(|b| found.loss < b.loss) => best = Some(found),
            Ok(_) => {}
            Err(e) => last_error = Some(e),
        }
    }
    best.ok_or_else(|| last_error.expect("at least one restart"))
}

fn check_warm(warm: Option<(&ReaLayout, &ReaParameters)>, layout: &ReaLayout) -> Result<Option<ReaParameters>> {
    warm.map(|(l, p)| warm_start(l, p, layout)).transpose()
}

/// Minimizes the distinguishability proxy over an `n`-qubit REA encoder with
/// `n(n + 1)` blocks.
pub fn train_encoder(n: usize, channel: &PauliChannel, config: &TrainConfig) -> Result<Fit> {
    train_encoder_from(n, channel, config, None)
}

/// As [`train_encoder`], with restart 0 warm-started from `warm`.
pub fn train_encoder_from(
    n: usize,
    channel: &PauliChannel,
    config: &TrainConfig,
    warm: Option<(&ReaLayout, &ReaParameters)>,
) -> Result<Fit> {
    let layout = build_rea(n, default_block_count(n), config.seed)?;
    let init = check_warm(warm, &layout)?;
    let objective = EncoderObjective::new(layout.circuit(), *channel);
    fit(layout, config, init, Stage::Encoder, |x| objective.value(x), |x| objective.value_and_gradient(x))
}

/// Minimizes the average fidelity loss over an `(n + r)`-qubit REA recovery
/// acting in `config.recovery_frame`.
pub fn train_recovery(encoder: &Unitary, channel: &PauliChannel, r: usize, config: &TrainConfig) -> Result<Fit> {
    train_recovery_from(encoder, channel, r, config, None)
}

pub fn train_recovery_from(
    encoder: &Unitary,
    channel: &PauliChannel,
    r: usize,
    config: &TrainConfig,
    warm: Option<(&ReaLayout, &ReaParameters)>,
) -> Result<Fit> {
    let objective = RecoveryObjective::new(encoder, channel, r)?.in_frame(config.recovery_frame);
    let width = encoder.n_qubits() + r;
    let layout = build_rea(width, config.recovery_blocks_for(width), config.seed.wrapping_add(1))?;
    let init = check_warm(warm, &layout)?;
    let embedded = objective.embed(&layout.circuit());
    fit(
        layout,
        config,
        init,
        Stage::Recovery,
        |x| objective.choi_circuit(&embedded, x).loss(FidelityMode::Average),
        |x| objective.value_and_gradient(&embedded, x),
    )
}

/// Copies `previous` into a parameter vector for `layout`: the single-qubit
/// layer and the common block prefix are kept, extra blocks start at zero.
pub fn warm_start(previous_layout: &ReaLayout, previous: &ReaParameters, layout: &ReaLayout) -> Result<ReaParameters> {
    if previous_layout.n_qubits() != layout.n_qubits() {
        return Err(Error::InvalidAnsatz(format!(
            "cannot warm-start a {}-qubit ansatz from a {}-qubit one",
            layout.n_qubits(),
            previous_layout.n_qubits()
        )));
    }
    if previous.len() != previous_layout.parameter_count() {
        return Err(Error::ParameterLength { expected: previous_layout.parameter_count(), found: previous.len() });
    }
    let mut values = vec![0.0; layout.parameter_count()];
    let common = values.len().min(previous.len());
    values[..common].copy_from_slice(&previous.values()[..common]);
    ReaParameters::new(layout, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeLosses {
    pub distinguishability: f64,
    pub average_fidelity: f64,
    pub worst_fidelity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub encoder_iterations: usize,
    pub recovery_iterations: usize,
    pub converged: bool,
}

/// A trained `((n, 2))` code: encoder and recovery ansätze with their losses.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedCode {
    pub encoder: ReaLayout,
    pub encoder_params: ReaParameters,
    pub recovery: ReaLayout,
    pub recovery_params: ReaParameters,
    pub n: usize,
    pub r: usize,
    pub frame: RecoveryFrame,
    pub channel: PauliChannel,
    pub level: usize,
    pub losses: CodeLosses,
    pub training: TrainingSummary,
}

/// On-disk form of a [`TrainedCode`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeArtifact {
    pub n: usize,
    pub r: usize,
    pub frame: RecoveryFrame,
    pub losses: CodeLosses,
    pub training: TrainingSummary,
    pub encoder: ReaRecord,
    pub recovery: ReaRecord,
}

impl TrainedCode {
    pub fn encoder_unitary(&self) -> Result<Unitary> {
        synthesize(&self.encoder, &self.encoder_params)
    }

    pub fn recovery_objective(&self, channel: &PauliChannel) -> Result<RecoveryObjective> {
        Ok(RecoveryObjective::new(&self.encoder_unitary()?, channel, self.r)?.in_frame(self.frame))
    }

    /// Cardinal fidelity loss of this code under `channel`.
    pub fn fidelity_loss(&self, channel: &PauliChannel, mode: FidelityMode) -> Result<f64> {
        let objective = self.recovery_objective(channel)?;
        let embedded = objective.embed(&self.recovery.circuit());
        Ok(objective.choi_circuit(&embedded, self.recovery_params.values()).loss(mode))
    }

    pub fn to_artifact(&self) -> CodeArtifact {
        let provenance = Provenance { channel: self.channel, level: self.level };
        CodeArtifact {
            n: self.n,
            r: self.r,
            frame: self.frame,
            losses: self.losses,
            training: self.training,
            encoder: ReaRecord::new(&self.encoder, &self.encoder_params, provenance),
            recovery: ReaRecord::new(&self.recovery, &self.recovery_params, provenance),
        }
    }

    pub fn from_artifact(artifact: &CodeArtifact) -> Result<Self> {
        let (encoder, encoder_params, provenance) = artifact.encoder.restore()?;
        let (recovery, recovery_params, rec_provenance) = artifact.recovery.restore()?;
        if provenance != rec_provenance {
            return Err(Error::Malformed("encoder and recovery provenance differ".into()));
        }
        if encoder.n_qubits() != artifact.n || recovery.n_qubits() != artifact.n + artifact.r {
            return Err(Error::Malformed(format!(
                "ansatz widths {} and {} do not match n = {}, r = {}",
                encoder.n_qubits(),
                recovery.n_qubits(),
                artifact.n,
                artifact.r
            )));
        }
        Ok(Self {
            encoder,
            encoder_params,
            recovery,
            recovery_params,
            n: artifact.n,
            r: artifact.r,
            frame: artifact.frame,
            channel: provenance.channel,
            level: provenance.level,
            losses: artifact.losses,
            training: artifact.training,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_artifact())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_artifact(&serde_json::from_str(text)?)
    }
}

/// Trains encoder then recovery for `channel`, optionally warm-starting both
/// from a previously trained code of the same size.
pub fn train_code(
    n: usize,
    channel: &PauliChannel,
    level: usize,
    config: &TrainConfig,
    warm: Option<&TrainedCode>,
) -> Result<TrainedCode> {
    let r = config.ancillas;
    if n < 2 {
        return Err(Error::InvalidAnsatz(format!("need at least 2 physical qubits, got {n}")));
    }
    if n + r > MAX_QUBITS {
        return Err(Error::RegisterTooLarge(n + r));
    }
    let warm = warm.filter(|w| w.n == n && w.r == r && w.frame == config.recovery_frame);
    let enc = train_encoder_from(n, channel, config, warm.map(|w| (&w.encoder, &w.encoder_params)))?;
    let encoder = synthesize(&enc.layout, &enc.params)?;
    let rec = train_recovery_from(&encoder, channel, r, config, warm.map(|w| (&w.recovery, &w.recovery_params)))?;
    let mut code = TrainedCode {
        encoder: enc.layout,
        encoder_params: enc.params,
        recovery: rec.layout,
        recovery_params: rec.params,
        n,
        r,
        frame: config.recovery_frame,
        channel: *channel,
        level,
        losses: CodeLosses { distinguishability: enc.loss, average_fidelity: rec.loss, worst_fidelity: 0.0 },
        training: TrainingSummary {
            encoder_iterations: enc.iterations,
            recovery_iterations: rec.iterations,
            converged: enc.converged && rec.converged,
        },
    };
    code.losses.worst_fidelity = code.fidelity_loss(channel, FidelityMode::Worst)?;
    Ok(code)
}
