//! Level-wise concatenation: estimate the effective channel after each level
//! and pick the next code from the noise it leaves behind.

use serde::{Deserialize, Serialize};

use crate::channels::PauliChannel;
use crate::error::{Error, Result};
use crate::estimator::{estimate_effective_channel, ChannelEstimate, LevelEvaluator};
use crate::level::{StabilizerLevel, VariationalLevel};
use crate::qsim::MAX_QUBITS;
use crate::stabilizer::code_by_id;
use crate::train::{train_code, RecoveryBudget, TrainConfig, TrainedCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeKind {
    Stabilizer,
    Variational,
}

/// A code used at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub kind: CodeKind,
    pub id: String,
    pub n: usize,
    /// Recovery ancillas; 0 for projector recovery.
    pub r: usize,
    /// Distance when known.
    pub d: Option<usize>,
    #[serde(skip)]
    pub trained: Option<TrainedCode>,
}

impl CodeSpec {
    pub fn stabilizer(id: &str) -> Result<Self> {
        let code = code_by_id(id)?;
        Ok(Self {
            kind: CodeKind::Stabilizer,
            id: code.id().to_string(),
            n: code.n(),
            r: 0,
            d: Some(code.distance()),
            trained: None,
        })
    }

    pub fn variational(code: TrainedCode) -> Self {
        Self { kind: CodeKind::Variational, id: format!("var{}", code.n), n: code.n, r: code.r, d: None, trained: Some(code) }
    }

    /// `[[n,1,d]]` for stabilizer codes, `((n,2))` otherwise.
    pub fn label(&self) -> String {
        match (self.kind, self.d) {
            (CodeKind::Stabilizer, Some(d)) => format!("[[{},1,{}]]", self.n, d),
            _ => format!("(({},2))", self.n),
        }
    }

    pub fn evaluator(&self) -> Result<Box<dyn LevelEvaluator>> {
        match self.kind {
            CodeKind::Stabilizer => Ok(Box::new(StabilizerLevel::new(code_by_id(&self.id)?)?)),
            CodeKind::Variational => {
                let code = self
                    .trained
                    .as_ref()
                    .ok_or_else(|| Error::InvalidCode(format!("variational code `{}` has no trained parameters", self.id)))?;
                Ok(Box::new(VariationalLevel::new(code)?))
            }
        }
    }
}

/// Effective channel after one level of `code` under `channel^{⊗n}`.
pub fn run_level(code: &CodeSpec, channel: &PauliChannel) -> Result<ChannelEstimate> {
    if code.n + code.r > MAX_QUBITS {
        return Err(Error::RegisterTooLarge(code.n + code.r));
    }
    estimate_effective_channel(code.evaluator()?.as_ref(), channel)
}

/// `max_P |p_P/p − 1/3|`; zero for the noiseless channel.
pub fn structure_score(channel: &PauliChannel) -> f64 {
    if channel.strength() <= 0.0 {
        return 0.0;
    }
    channel.proportions().iter().map(|f| (f - 1.0 / 3.0).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelinePolicy {
    pub tau: f64,
    pub target: f64,
    pub max_levels: usize,
    pub sizes: Vec<usize>,
    pub fallback: String,
    /// Recovery iterations per candidate size during screening.
    pub screening_iterations: usize,
}

impl Default for PipelinePolicy {
    fn default() -> Self {
        Self { tau: 0.05, target: 1e-5, max_levels: 6, sizes: vec![3, 4, 5], fallback: "perfect5".into(), screening_iterations: 500 }
    }
}

impl PipelinePolicy {
    pub fn stabilizer_only(max_levels: usize) -> Self {
        Self { sizes: Vec::new(), max_levels, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.tau > 0.0 && self.tau < 2.0 / 3.0) {
            return fail(format!("tau must lie in (0, 2/3), got {}", self.tau));
        }
        if self.target.is_nan() || self.target <= 0.0 {
            return fail(format!("target must be positive, got {}", self.target));
        }
        if let Some(n) = self.sizes.iter().find(|&&n| !(2..=MAX_QUBITS).contains(&n)) {
            return fail(format!("variational size {n} outside 2..={MAX_QUBITS}"));
        }
        if self.screening_iterations == 0 {
            return fail("screening_iterations must be at least 1".into());
        }
        code_by_id(&self.fallback)?;
        Ok(())
    }
}

/// One size screened during code selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub n: usize,
    pub worst_case_infidelity: f64,
    /// `ln(ε_in/ε_out) / ln n`: suppression per unit of log-qubit cost.
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub code: CodeSpec,
    pub input: PauliChannel,
    pub input_structure: f64,
    pub estimate: ChannelEstimate,
    pub cumulative_qubits: u64,
    pub worst_case_infidelity: f64,
    /// Product of level distances while every level's distance is known.
    pub distance: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Candidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_infidelity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Product of `n` over the recorded levels.
pub fn cumulative_qubits(records: &[LevelRecord]) -> u64 {
    records.iter().map(|r| r.code.n as u64).product()
}

fn efficiency(before: f64, after: f64, n: usize) -> f64 {
    if after <= 0.0 {
        return f64::INFINITY;
    }
    (before / after).ln() / (n as f64).ln()
}

struct Choice {
    code: CodeSpec,
    estimate: ChannelEstimate,
    candidates: Vec<Candidate>,
    fallback_infidelity: Option<f64>,
    note: Option<String>,
}

fn screening_config(config: &TrainConfig, iterations: usize) -> TrainConfig {
    let recovery = RecoveryBudget { max_iterations: iterations, ..config.recovery };
    TrainConfig { restarts: 1, recovery, ..*config }
}

fn choose(
    channel: &PauliChannel,
    level: usize,
    policy: &PipelinePolicy,
    config: &TrainConfig,
    previous: &[TrainedCode],
) -> Result<Choice> {
    let fallback = CodeSpec::stabilizer(&policy.fallback)?;
    let fallback_estimate = run_level(&fallback, channel)?;
    if policy.sizes.is_empty() || structure_score(channel) < policy.tau {
        return Ok(Choice { code: fallback, estimate: fallback_estimate, candidates: Vec::new(), fallback_infidelity: None, note: None });
    }
    let before = channel.worst_case_infidelity();
    let fallback_worst = fallback_estimate.worst_case_infidelity();
    let screening = screening_config(config, policy.screening_iterations);
    let mut candidates = Vec::new();
    let mut best: Option<(f64, TrainedCode)> = None;
    let mut failures = Vec::new();
    for &n in &policy.sizes {
        let warm = previous.iter().rev().find(|c| c.n == n);
        let trained = match train_code(n, channel, level, &screening, warm) {
            Ok(code) => code,
            Err(e) => {
                failures.push(format!("n={n}: {e}"));
                continue;
            }
        };
        let worst = run_level(&CodeSpec::variational(trained.clone()), channel)?.worst_case_infidelity();
        let score = efficiency(before, worst, n);
        candidates.push(Candidate { n, worst_case_infidelity: worst, efficiency: score });
        if worst < before && best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, trained));
        }
    }
    let mut notes = Vec::new();
    if !failures.is_empty() {
        notes.push(format!("training failed for {}", failures.join("; ")));
    }
    let chosen = match best {
        Some((_, screened)) => match train_code(screened.n, channel, level, config, Some(&screened)) {
            Ok(code) => {
                let spec = CodeSpec::variational(code);
                let estimate = run_level(&spec, channel)?;
                if estimate.worst_case_infidelity() < fallback_worst {
                    Some((spec, estimate))
                } else {
                    notes.push(format!(
                        "{} reached {:.3e}, not below the fallback's {:.3e}",
                        spec.label(),
                        estimate.worst_case_infidelity(),
                        fallback_worst
                    ));
                    None
                }
            }
            Err(e) => {
                notes.push(format!("training failed for n={}: {e}", screened.n));
                None
            }
        },
        None => None,
    };
    let note = (!notes.is_empty()).then(|| notes.join("; "));
    let (code, estimate) = chosen.unwrap_or((fallback, fallback_estimate));
    Ok(Choice { code, estimate, candidates, fallback_infidelity: Some(fallback_worst), note })
}

/// Runs levels until the worst-case infidelity reaches `policy.target` or
/// `policy.max_levels` levels have been added.
pub fn plan_and_run(initial: &PauliChannel, policy: &PipelinePolicy, config: &TrainConfig) -> Result<Vec<LevelRecord>> {
    policy.validate()?;
    config.validate()?;
    initial.validate()?;
    let mut records: Vec<LevelRecord> = Vec::new();
    let mut trained: Vec<TrainedCode> = Vec::new();
    let mut channel = *initial;
    let mut qubits: u64 = 1;
    let mut distance: Option<u64> = Some(1);
    let mut current = initial.worst_case_infidelity();
    while current > policy.target && records.len() < policy.max_levels {
        let level = records.len() + 1;
        let choice = choose(&channel, level, policy, config, &trained)?;
        if let Some(code) = &choice.code.trained {
            trained.push(code.clone());
        }
        qubits *= choice.code.n as u64;
        distance = distance.zip(choice.code.d).map(|(a, b)| a * b as u64);
        current = choice.estimate.worst_case_infidelity();
        let next = choice.estimate.probs;
        records.push(LevelRecord {
            level,
            input: channel,
            input_structure: structure_score(&channel),
            code: choice.code,
            estimate: choice.estimate,
            cumulative_qubits: qubits,
            worst_case_infidelity: current,
            distance,
            candidates: choice.candidates,
            fallback_infidelity: choice.fallback_infidelity,
            note: choice.note,
        });
        channel = PauliChannel { name: None, ..next };
    }
    Ok(records)
}

/// Physical qubits needed to reach `target`, interpolating `ln qubits`
/// linearly in `ln ε` between consecutive levels. Level 0 is the bare
/// channel `initial` on one qubit.
pub fn qubits_at(initial: &PauliChannel, records: &[LevelRecord], target: f64) -> Result<f64> {
    let mut prev = (1.0f64, initial.worst_case_infidelity());
    if prev.1 <= target {
        return Ok(1.0);
    }
    for r in records {
        let here = (r.cumulative_qubits as f64, r.worst_case_infidelity);
        if here.1 <= target {
            if here.1 == target || here.1 <= 0.0 || here.1 >= prev.1 {
                return Ok(here.0);
            }
            let t = (target.ln() - prev.1.ln()) / (here.1.ln() - prev.1.ln());
            return Ok((prev.0.ln() + t * (here.0.ln() - prev.0.ln())).exp());
        }
        prev = here;
    }
    Err(Error::TargetUnreached(target))
}

/// Baseline qubits over hybrid qubits at `target`.
pub fn overhead_ratio(
    initial: &PauliChannel,
    hybrid: &[LevelRecord],
    baseline: &[LevelRecord],
    target: f64,
) -> Result<f64> {
    Ok(qubits_at(initial, baseline, target)? / qubits_at(initial, hybrid, target)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{named_channel, NoiseName};

    fn yflip() -> PauliChannel {
        named_channel(NoiseName::Yflip, 0.1).unwrap()
    }

    fn record(n: usize, qubits: u64, worst: f64) -> LevelRecord {
        let channel = PauliChannel::new(worst / 3.0, worst / 3.0, worst / 3.0).unwrap();
        LevelRecord {
            level: 1,
            code: CodeSpec { kind: CodeKind::Stabilizer, id: "perfect5".into(), n, r: 0, d: Some(3), trained: None },
            input: channel,
            input_structure: 0.0,
            estimate: ChannelEstimate::from_fidelities([1.0; 6]).unwrap(),
            cumulative_qubits: qubits,
            worst_case_infidelity: worst,
            distance: None,
            candidates: Vec::new(),
            fallback_infidelity: None,
            note: None,
        }
    }

    #[test]
    fn structure_score_examples() {
        assert!(structure_score(&named_channel(NoiseName::Dep, 0.1).unwrap()) < 1e-15);
        assert!((structure_score(&yflip()) - 2.0 / 3.0).abs() < 1e-15);
        let near = PauliChannel::new(0.33, 0.33, 0.34).unwrap();
        assert!((structure_score(&near) - 0.0067).abs() < 1e-4);
        assert_eq!(structure_score(&PauliChannel::identity()), 0.0);
    }

    #[test]
    fn cumulative_qubit_examples() {
        assert_eq!(cumulative_qubits(&[]), 1);
        let three = [record(5, 5, 0.1), record(5, 25, 0.1), record(5, 125, 0.1)];
        assert_eq!(cumulative_qubits(&three), 125);
        assert_eq!(cumulative_qubits(&[record(3, 3, 0.1), record(5, 15, 0.1)]), 15);
    }

    #[test]
    fn run_level_examples() {
        let rep = run_level(&CodeSpec::stabilizer("rep3").unwrap(), &named_channel(NoiseName::Bit, 0.1).unwrap()).unwrap();
        assert!((rep.strength() - 0.028).abs() < 1e-12);
        assert!((rep.proportions()[0] - 1.0).abs() < 1e-12);
        for id in ["rep3", "perfect5"] {
            let quiet = run_level(&CodeSpec::stabilizer(id).unwrap(), &PauliChannel::identity()).unwrap();
            assert!(quiet.strength() < 1e-10);
        }
        assert!(CodeSpec::stabilizer("steane7").is_err());
        let bare = CodeSpec { trained: None, ..CodeSpec::stabilizer("perfect5").unwrap() };
        let broken = CodeSpec { kind: CodeKind::Variational, ..bare };
        assert!(run_level(&broken, &yflip()).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(CodeSpec::stabilizer("perfect5").unwrap().label(), "[[5,1,3]]");
        assert_eq!(CodeSpec::stabilizer("rep3").unwrap().label(), "[[3,1,1]]");
    }

    #[test]
    fn policy_validation() {
        assert!(PipelinePolicy::default().validate().is_ok());
        assert!(PipelinePolicy { tau: 0.7, ..Default::default() }.validate().is_err());
        assert!(PipelinePolicy { target: 0.0, ..Default::default() }.validate().is_err());
        assert!(PipelinePolicy { fallback: "nope".into(), ..Default::default() }.validate().is_err());
        assert!(PipelinePolicy { sizes: vec![1], ..Default::default() }.validate().is_err());
    }

    #[test]
    fn depolarizing_noise_never_trains() {
        let dep = named_channel(NoiseName::Dep, 0.1).unwrap();
        let policy = PipelinePolicy { tau: 0.01, max_levels: 3, ..Default::default() };
        let records = plan_and_run(&dep, &policy, &TrainConfig::default()).unwrap();
        assert_eq!(records.len(), 3);
        assert!(records.iter().all(|r| r.code.kind == CodeKind::Stabilizer && r.candidates.is_empty()));
    }

    #[test]
    fn target_met_up_front_gives_no_levels() {
        let quiet = named_channel(NoiseName::Dep, 1e-7).unwrap();
        let records = plan_and_run(&quiet, &PipelinePolicy::default(), &TrainConfig::default()).unwrap();
        assert!(records.is_empty());
        assert_eq!(overhead_ratio(&quiet, &records, &records, 1e-5).unwrap(), 1.0);
    }

    #[test]
    fn stabilizer_distances_multiply() {
        let records = plan_and_run(&yflip(), &PipelinePolicy::stabilizer_only(2), &TrainConfig::default()).unwrap();
        assert_eq!(records[0].distance, Some(3));
        assert_eq!(records[1].distance, Some(9));
    }

    #[test]
    fn interpolation_is_log_log() {
        let initial = yflip();
        let runs = [record(5, 625, 0.0068), record(5, 3125, 0.00046)];
        let q = qubits_at(&initial, &runs, 0.0006).unwrap();
        let t = (0.0006f64.ln() - 0.0068f64.ln()) / (0.00046f64.ln() - 0.0068f64.ln());
        assert!((q.ln() - (625f64.ln() + t * 5f64.ln())).abs() < 1e-12);
        assert_eq!(qubits_at(&initial, &runs, 0.0068).unwrap(), 625.0);
        assert!(matches!(qubits_at(&initial, &runs, 1e-9), Err(Error::TargetUnreached(_))));
        assert!((overhead_ratio(&initial, &runs, &runs, 0.001).unwrap() - 1.0).abs() < 1e-12);
    }
}
