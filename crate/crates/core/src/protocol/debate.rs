use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{DebateConfig, DebateRecord, ProtocolError, Speaker, Transcript, Turn, Verdict};
use crate::agents::{
    parse_judge_reply, parse_manager_reply, render_debater_prompt, render_judge_prompt,
    render_manager_prompt, AgentError, DebaterView, TemplateSet, LABEL_CORRECTION,
    MANAGER_CORRECTION,
};
use crate::backend::{ChatBackend, ChatMessage, ChatRequest, GenerationParams, Usage};
use crate::corpus::Instance;
use crate::domain::{AgentRole, LabelDistribution, StancePair};

/// Per-instance seed derived from the run seed and the instance id, so a
/// debate's randomness does not depend on scheduling.
pub fn instance_seed(run_seed: u64, instance_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(instance_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

pub fn instance_rng(run_seed: u64, instance_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(instance_seed(run_seed, instance_id))
}

/// Top-two labels, handed to the debaters by a fair coin. The flag is
/// `true` when the Proponent got the most probable label.
pub fn assign_stances<R: Rng + ?Sized>(dist: &LabelDistribution, rng: &mut R) -> (StancePair, bool) {
    let (top1, top2) = dist.top_two();
    let coin: bool = rng.random();
    let (proponent, opponent) = if coin { (top1, top2) } else { (top2, top1) };
    let pair = StancePair::new(proponent, opponent).expect("top_two yields distinct labels");
    (pair, coin)
}

/// Threshold `1.0` never skips; below it, skip when the Manager's top
/// probability reaches the threshold.
pub fn should_skip(dist: &LabelDistribution, threshold: f64) -> bool {
    threshold < 1.0 && dist.max_probability() >= threshold
}

pub(super) struct Call<'a, B: ?Sized> {
    pub backend: &'a B,
    pub instance_id: &'a str,
    pub usage: &'a mut Usage,
}

impl<B: ChatBackend + ?Sized> Call<'_, B> {
    pub async fn send(
        &mut self,
        agent: AgentRole,
        messages: Vec<ChatMessage>,
        params: &GenerationParams,
    ) -> Result<String, ProtocolError> {
        let request = ChatRequest::new(agent, messages, params.clone());
        let response = self
            .backend
            .complete(&request)
            .await
            .map_err(|source| ProtocolError::Backend {
                instance_id: self.instance_id.to_string(),
                source,
            })?;
        *self.usage += response.usage;
        Ok(response.text)
    }

    /// Sends, parses, and on a parse failure appends the bad reply plus a
    /// correction and asks again, up to `attempts` calls in total. The inner
    /// error carries the attempt count and the last parse failure.
    pub async fn send_parsed<T>(
        &mut self,
        agent: AgentRole,
        mut messages: Vec<ChatMessage>,
        params: &GenerationParams,
        attempts: u32,
        parse: impl Fn(&str) -> Result<T, AgentError>,
        correction: &str,
    ) -> Result<Result<T, (u32, String)>, ProtocolError> {
        let mut last = String::new();
        for attempt in 1..=attempts {
            let text = self.send(agent, messages.clone(), params).await?;
            match parse(&text) {
                Ok(v) => return Ok(Ok(v)),
                Err(e) => last = e.to_string(),
            }
            if attempt < attempts {
                messages.push(ChatMessage::assistant(text));
                messages.push(ChatMessage::user(correction));
            }
        }
        Ok(Err((attempts, last)))
    }
}

fn agent_err(instance: &Instance, source: AgentError) -> ProtocolError {
    ProtocolError::Agent {
        instance_id: instance.instance_id.clone(),
        source,
    }
}

/// Runs one full debate, failing on the first error.
pub async fn run_debate<B: ChatBackend + ?Sized>(
    instance: &Instance,
    config: &DebateConfig,
    backend: &B,
    templates: &TemplateSet,
) -> Result<DebateRecord, ProtocolError> {
    config.validate()?;
    let mut record = DebateRecord::new(instance, config);
    debate_into(&mut record, instance, config, backend, templates).await?;
    Ok(record)
}

/// Fills `record` step by step so a failure leaves the partial state behind.
pub(super) async fn debate_into<B: ChatBackend + ?Sized>(
    record: &mut DebateRecord,
    instance: &Instance,
    config: &DebateConfig,
    backend: &B,
    templates: &TemplateSet,
) -> Result<(), ProtocolError> {
    let mut usage = Usage::default();
    let result = debate_steps(record, &mut usage, instance, config, backend, templates).await;
    record.usage = usage;
    result
}

async fn debate_steps<B: ChatBackend + ?Sized>(
    record: &mut DebateRecord,
    usage: &mut Usage,
    instance: &Instance,
    config: &DebateConfig,
    backend: &B,
    templates: &TemplateSet,
) -> Result<(), ProtocolError> {
    let mut call = Call {
        backend,
        instance_id: &instance.instance_id,
        usage,
    };

    // Manager
    let messages = render_manager_prompt(instance, templates).map_err(|e| agent_err(instance, e))?;
    let manager = call
        .send_parsed(
            AgentRole::Manager,
            messages,
            &config.manager,
            config.parse_attempts,
            parse_manager_reply,
            MANAGER_CORRECTION,
        )
        .await?
        .map_err(|(attempts, last)| ProtocolError::ManagerFailure {
            instance_id: instance.instance_id.clone(),
            attempts,
            last,
        })?;
    let dist = manager.distribution;
    record.manager_distribution = Some(dist);

    if should_skip(&dist, config.skip_threshold) {
        let label = dist.argmax();
        record.skipped = true;
        record.verdict = Some(Verdict {
            label,
            rationale: format!(
                "Debate skipped: manager probability {:.2} for {label} reached the threshold {:.2}.",
                dist.max_probability(),
                config.skip_threshold
            ),
        });
        return Ok(());
    }

    let mut rng = instance_rng(config.rng_seed, &instance.instance_id);
    let (stance, coin) = assign_stances(&dist, &mut rng);
    record.stance = Some(stance);
    record.coin = Some(coin);

    let total_turns = config.scheduled_turns();
    let mut transcript = Transcript::new();
    for index in 1..=total_turns {
        let speaker = Speaker::for_turn(index);
        let (assigned, opposing) = match speaker {
            Speaker::Proponent => (stance.proponent, stance.opponent),
            Speaker::Opponent => (stance.opponent, stance.proponent),
        };
        let view = DebaterView {
            speaker,
            assigned_label: assigned,
            opponent_label: opposing,
            total_turns,
        };
        let messages = render_debater_prompt(instance, view, &transcript, templates)
            .map_err(|e| agent_err(instance, e))?;
        let content = call.send(AgentRole::Debater, messages, &config.debater).await?;
        transcript
            .push(Turn {
                index,
                speaker,
                defended_label: assigned,
                content: content.trim().to_string(),
            })
            .expect("turn schedule follows transcript invariants");
        record.turns = transcript.clone();
    }

    let messages = render_judge_prompt(instance, &transcript, total_turns, templates)
        .map_err(|e| agent_err(instance, e))?;
    let judge = call
        .send_parsed(
            AgentRole::Judge,
            messages,
            &config.judge,
            config.parse_attempts,
            parse_judge_reply,
            LABEL_CORRECTION,
        )
        .await?
        .map_err(|(attempts, last)| ProtocolError::JudgeFailure {
            instance_id: instance.instance_id.clone(),
            attempts,
            last,
        })?;
    record.verdict_outside_stance = !stance.contains(judge.label);
    record.verdict = Some(Verdict {
        label: judge.label,
        rationale: judge.rationale,
    });
    Ok(())
}
