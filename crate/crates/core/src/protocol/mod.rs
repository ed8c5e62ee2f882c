//! Debate orchestration: Manager estimate, stance assignment, alternating
//! debater turns, Judge verdict, plus the single-agent baselines.

mod debate;
mod pipeline;
mod transcript;

use serde::{Deserialize, Serialize};

use crate::agents::AgentError;
use crate::backend::{BackendError, GenerationParams, Usage};
use crate::corpus::Instance;
use crate::domain::{ArgLabel, LabelDistribution, StancePair};
use crate::metrics::Prediction;

pub use debate::{assign_stances, instance_rng, instance_seed, run_debate, should_skip};
pub use pipeline::{run_baseline, run_pipeline, run_pipeline_with_progress, BaselineOutcome};
pub use transcript::{Speaker, Transcript, TranscriptError, Turn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebateConfig {
    /// Each round is one Proponent turn and one Opponent turn.
    pub rounds: usize,
    /// Manager confidence at or above which the debate is skipped. `1.0`
    /// never skips.
    pub skip_threshold: f64,
    pub manager: GenerationParams,
    pub debater: GenerationParams,
    pub judge: GenerationParams,
    pub rng_seed: u64,
    /// Attempts per Manager/Judge call before the instance is failed.
    pub parse_attempts: u32,
}

impl Default for DebateConfig {
    fn default() -> Self {
        Self {
            rounds: 2,
            skip_threshold: 1.0,
            manager: GenerationParams::new("gemini-2.5-flash", 0.0, 512),
            debater: GenerationParams::new("gemini-2.5-flash", 0.7, 1024),
            judge: GenerationParams::new("gemini-2.5-pro", 0.0, 4096),
            rng_seed: 42,
            parse_attempts: 3,
        }
    }
}

impl DebateConfig {
    pub fn scheduled_turns(&self) -> usize {
        2 * self.rounds
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::Config(m));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.skip_threshold) {
            return bad(format!("skip_threshold {} outside [0, 1]", self.skip_threshold));
        }
        if self.parse_attempts == 0 {
            return bad("parse_attempts must be at least 1".into());
        }
        for (name, p) in [("manager", &self.manager), ("debater", &self.debater), ("judge", &self.judge)] {
            p.validate()
                .map_err(|e| ProtocolError::Config(format!("{name} params: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{instance_id}: manager reply unreadable after {attempts} attempt(s): {last}")]
    ManagerFailure {
        instance_id: String,
        attempts: u32,
        last: String,
    },
    #[error("{instance_id}: judge reply unreadable after {attempts} attempt(s): {last}")]
    JudgeFailure {
        instance_id: String,
        attempts: u32,
        last: String,
    },
    #[error("{instance_id}: backend: {source}")]
    Backend {
        instance_id: String,
        #[source]
        source: BackendError,
    },
    #[error("{instance_id}: {source}")]
    Agent {
        instance_id: String,
        #[source]
        source: AgentError,
    },
}

impl ProtocolError {
    /// Errors that stop a whole run rather than failing one instance.
    pub fn is_fatal(&self) -> bool {
        match self {
            ProtocolError::Config(_) => true,
            ProtocolError::Backend { source, .. } => source.is_fatal(),
            ProtocolError::Agent { source, .. } => matches!(source, AgentError::Template(_)),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: ArgLabel,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelIds {
    pub manager: String,
    pub debater: String,
    pub judge: String,
}

/// Everything one debate produced, written as one JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateRecord {
    pub instance_id: String,
    pub essay_id: String,
    pub gold_label: ArgLabel,
    #[serde(default)]
    pub target_text: String,
    pub manager_distribution: Option<LabelDistribution>,
    pub stance: Option<StancePair>,
    /// `true` when the Proponent defends the Manager's top label.
    pub coin: Option<bool>,
    pub skipped: bool,
    pub turns: Transcript,
    pub verdict: Option<Verdict>,
    /// Judge picked a label neither debater defended.
    #[serde(default)]
    pub verdict_outside_stance: bool,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub usage: Usage,
    pub model_ids: ModelIds,
}

impl DebateRecord {
    pub fn new(instance: &Instance, config: &DebateConfig) -> Self {
        Self {
            instance_id: instance.instance_id.clone(),
            essay_id: instance.essay_id.clone(),
            gold_label: instance.gold_label,
            target_text: instance.target_text.clone(),
            manager_distribution: None,
            stance: None,
            coin: None,
            skipped: false,
            turns: Transcript::new(),
            verdict: None,
            verdict_outside_stance: false,
            failed: false,
            error: None,
            usage: Usage::default(),
            model_ids: ModelIds {
                manager: config.manager.model_id.clone(),
                debater: config.debater.model_id.clone(),
                judge: config.judge.model_id.clone(),
            },
        }
    }

    pub fn prediction(&self) -> Prediction {
        match (&self.verdict, self.failed) {
            (Some(v), false) => Prediction::ok(&self.instance_id, v.label, self.gold_label),
            _ => Prediction::failed(&self.instance_id, self.gold_label),
        }
    }
}
