//! Role prompts for the Manager, debaters, Judge and single-agent
//! baselines, and parsers for their replies.

mod prompts;
mod replies;
mod templates;

use crate::domain::ArgLabel;

pub use prompts::{
    label_definitions_block, render_baseline_prompt, render_debater_prompt, render_judge_prompt,
    render_manager_prompt, render_transcript, smart_system_text, BaselineKind, DebaterView,
    EMPTY_TRANSCRIPT_MARKER, LABEL_CORRECTION, MANAGER_CORRECTION,
};
pub use replies::{parse_judge_reply, parse_manager_reply, JudgeReply, ManagerReply, NO_RATIONALE};
pub use templates::{required_placeholders, PromptTemplate, TemplateError, TemplateSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("unreadable reply: {0}")]
    Parse(String),
    #[error("transcript has {got} of {expected} scheduled turns")]
    IncompleteTranscript { expected: usize, got: usize },
    #[error("both debaters would defend {0}")]
    SameStance(ArgLabel),
}
