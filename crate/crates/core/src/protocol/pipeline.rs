use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};

use super::debate::{debate_into, Call};
use super::{DebateConfig, DebateRecord, ProtocolError};
use crate::agents::{parse_judge_reply, render_baseline_prompt, BaselineKind, TemplateSet, LABEL_CORRECTION};
use crate::backend::{ChatBackend, Usage};
use crate::corpus::Instance;
use crate::metrics::Prediction;

fn check_parallelism(parallelism: usize) -> Result<(), ProtocolError> {
    if parallelism == 0 {
        return Err(ProtocolError::Config("parallelism must be at least 1".into()));
    }
    Ok(())
}

/// Debates every instance with up to `parallelism` in flight. Output order
/// matches input order. Per-instance failures become failed records; only
/// fatal errors (bad credentials, broken templates) abort the run.
pub async fn run_pipeline<B: ChatBackend + ?Sized>(
    instances: &[Instance],
    config: &DebateConfig,
    backend: &B,
    templates: &TemplateSet,
    parallelism: usize,
) -> Result<Vec<DebateRecord>, ProtocolError> {
    run_pipeline_with_progress(instances, config, backend, templates, parallelism, &|_, _| {}).await
}

/// Like [`run_pipeline`], calling `progress(done, record)` as each record is
/// emitted in input order.
pub async fn run_pipeline_with_progress<B: ChatBackend + ?Sized>(
    instances: &[Instance],
    config: &DebateConfig,
    backend: &B,
    templates: &TemplateSet,
    parallelism: usize,
    progress: &(dyn Fn(usize, &DebateRecord) + Sync),
) -> Result<Vec<DebateRecord>, ProtocolError> {
    config.validate()?;
    check_parallelism(parallelism)?;
    let mut done = 0usize;
    stream::iter(instances)
        .map(|instance| async move {
            let mut record = DebateRecord::new(instance, config);
            match debate_into(&mut record, instance, config, backend, templates).await {
                Ok(()) => Ok(record),
                Err(e) if e.is_fatal() => Err(e),
                Err(e) => {
                    tracing::warn!(instance = %instance.instance_id, error = %e, "instance failed");
                    record.failed = true;
                    record.error = Some(e.to_string());
                    Ok(record)
                }
            }
        })
        .buffered(parallelism)
        .inspect_ok(|record| {
            done += 1;
            progress(done, record);
        })
        .try_collect()
        .await
}

/// One baseline prediction with its token cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub prediction: Prediction,
    pub usage: Usage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Single-agent baseline over every instance. Vanilla and chain-of-thought
/// use the Manager's model settings; the smart baseline uses the Judge's.
pub async fn run_baseline<B: ChatBackend + ?Sized>(
    instances: &[Instance],
    kind: BaselineKind,
    config: &DebateConfig,
    backend: &B,
    templates: &TemplateSet,
    parallelism: usize,
) -> Result<Vec<BaselineOutcome>, ProtocolError> {
    config.validate()?;
    check_parallelism(parallelism)?;
    let params = match kind {
        BaselineKind::Smart => &config.judge,
        BaselineKind::Vanilla | BaselineKind::Cot => &config.manager,
    };
    stream::iter(instances)
        .map(|instance| async move {
            let mut usage = Usage::default();
            let result = async {
                let messages = render_baseline_prompt(instance, kind, templates).map_err(|source| {
                    ProtocolError::Agent {
                        instance_id: instance.instance_id.clone(),
                        source,
                    }
                })?;
                let mut call = Call {
                    backend,
                    instance_id: &instance.instance_id,
                    usage: &mut usage,
                };
                call.send_parsed(
                    kind.role(),
                    messages,
                    params,
                    config.parse_attempts,
                    parse_judge_reply,
                    LABEL_CORRECTION,
                )
                .await?
                .map_err(|(attempts, last)| ProtocolError::JudgeFailure {
                    instance_id: instance.instance_id.clone(),
                    attempts,
                    last,
                })
            }
            .await;
            let (prediction, error) = match result {
                Ok(reply) => (Prediction::ok(&instance.instance_id, reply.label, instance.gold_label), None),
                Err(e) if e.is_fatal() => return Err(e),
                Err(e) => {
                    tracing::warn!(instance = %instance.instance_id, error = %e, "instance failed");
                    (Prediction::failed(&instance.instance_id, instance.gold_label), Some(e.to_string()))
                }
            };
            Ok(BaselineOutcome { prediction, usage, error })
        })
        .buffered(parallelism)
        .try_collect()
        .await
}
