use std::collections::HashMap;
use std::fmt::Write as _;

use super::templates::{apply_debate_blocks, render, TemplateSet};
use super::AgentError;
use crate::backend::ChatMessage;
use crate::corpus::Instance;
use crate::domain::{AgentRole, ArgLabel};
use crate::protocol::{Speaker, Transcript};

pub const EMPTY_TRANSCRIPT_MARKER: &str = "(No arguments yet. You open the debate.)";

/// Every label with its definition, one per line. The only place label names
/// appear in manager, judge and baseline prompts.
pub fn label_definitions_block() -> String {
    let mut out = String::new();
    for label in ArgLabel::ALL {
        let _ = writeln!(out, "- {label}: {}", label.definition());
    }
    out.trim_end().to_string()
}

/// Transcript as speaker-tagged blocks in turn order.
pub fn render_transcript(transcript: &Transcript) -> String {
    if transcript.is_empty() {
        return EMPTY_TRANSCRIPT_MARKER.to_string();
    }
    transcript
        .turns()
        .iter()
        .map(|t| {
            format!(
                "[Turn {}] {}, defending {}:\n{}",
                t.index,
                t.speaker,
                t.defended_label,
                t.content.trim()
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Single-agent baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Vanilla,
    Cot,
    Smart,
}

impl BaselineKind {
    pub fn role(self) -> AgentRole {
        match self {
            BaselineKind::Vanilla => AgentRole::Vanilla,
            BaselineKind::Cot => AgentRole::Cot,
            BaselineKind::Smart => AgentRole::Smart,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            BaselineKind::Vanilla => "Vanilla",
            BaselineKind::Cot => "Chain-of-Thought",
            BaselineKind::Smart => "Smart Reasoning",
        }
    }
}

/// What one debater sees about its own side of the debate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DebaterView {
    pub speaker: Speaker,
    pub assigned_label: ArgLabel,
    pub opponent_label: ArgLabel,
    pub total_turns: usize,
}

fn messages(
    role: AgentRole,
    system: &str,
    user: &str,
    vars: &HashMap<&str, String>,
) -> Result<Vec<ChatMessage>, AgentError> {
    let mut out = Vec::with_capacity(2);
    let system = render(role, system, vars)?;
    if !system.trim().is_empty() {
        out.push(ChatMessage::system(system));
    }
    out.push(ChatMessage::user(render(role, user, vars)?));
    Ok(out)
}

fn base_vars(instance: &Instance) -> HashMap<&'static str, String> {
    HashMap::from([
        ("masked_text", instance.masked_text.clone()),
        ("label_definitions", label_definitions_block()),
    ])
}

pub fn render_manager_prompt(instance: &Instance, templates: &TemplateSet) -> Result<Vec<ChatMessage>, AgentError> {
    let t = templates.get(AgentRole::Manager);
    let system = apply_debate_blocks(t.role, &t.system, false)?;
    messages(t.role, &system, &t.user, &base_vars(instance))
}

pub fn render_debater_prompt(
    instance: &Instance,
    view: DebaterView,
    transcript_so_far: &Transcript,
    templates: &TemplateSet,
) -> Result<Vec<ChatMessage>, AgentError> {
    if view.assigned_label == view.opponent_label {
        return Err(AgentError::SameStance(view.assigned_label));
    }
    let t = templates.get(AgentRole::Debater);
    let mut vars = base_vars(instance);
    vars.extend([
        ("assigned_label", view.assigned_label.to_string()),
        ("opponent_label", view.opponent_label.to_string()),
        ("speaker", view.speaker.to_string()),
        ("transcript", render_transcript(transcript_so_far)),
        ("turn_index", transcript_so_far.next_index().to_string()),
        ("total_turns", view.total_turns.to_string()),
    ]);
    let system = apply_debate_blocks(t.role, &t.system, true)?;
    messages(t.role, &system, &t.user, &vars)
}

/// The judge sees the essay, the full transcript and all label definitions,
/// but not the manager's distribution.
pub fn render_judge_prompt(
    instance: &Instance,
    transcript: &Transcript,
    scheduled_turns: usize,
    templates: &TemplateSet,
) -> Result<Vec<ChatMessage>, AgentError> {
    if !transcript.is_complete(scheduled_turns) {
        return Err(AgentError::IncompleteTranscript {
            expected: scheduled_turns,
            got: transcript.len(),
        });
    }
    let t = templates.get(AgentRole::Judge);
    let mut vars = base_vars(instance);
    vars.insert("transcript", render_transcript(transcript));
    let system = apply_debate_blocks(t.role, &t.system, true)?;
    messages(t.role, &system, &t.user, &vars)
}

/// The judge's system text with the debate-only blocks removed, as used by
/// the smart baseline.
pub fn smart_system_text(templates: &TemplateSet) -> Result<String, AgentError> {
    let judge = templates.get(AgentRole::Judge);
    Ok(apply_debate_blocks(AgentRole::Smart, &judge.system, false)?)
}

pub fn render_baseline_prompt(
    instance: &Instance,
    kind: BaselineKind,
    templates: &TemplateSet,
) -> Result<Vec<ChatMessage>, AgentError> {
    let role = kind.role();
    let t = templates.get(role);
    let system = match kind {
        BaselineKind::Smart => smart_system_text(templates)?,
        _ => apply_debate_blocks(role, &t.system, false)?,
    };
    messages(role, &system, &t.user, &base_vars(instance))
}

/// Follow-up sent after an unreadable manager reply.
pub const MANAGER_CORRECTION: &str = "Your previous reply could not be read. Reply again with only a JSON object whose keys are the three type names defined above and whose values are probabilities.";

/// Follow-up sent after a judge or baseline reply without a final label line.
pub const LABEL_CORRECTION: &str = "Your previous reply did not end with a line of the form `LABEL: <type name>`. Reply again and end with that line.";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{make_instances, parse_essay};
    use crate::protocol::Turn;

    const LABEL_NAMES: [&str; 3] = ["MajorClaim", "Claim", "Premise"];

    fn instance() -> Instance {
        let essay = parse_essay(
            "e1",
            "Cars are good. They are fast.",
            "T1\tClaim 0 14\tCars are good.\nT2\tPremise 15 29\tThey are fast.",
        )
        .unwrap();
        make_instances(&essay).remove(0)
    }

    fn transcript(n: usize) -> Transcript {
        let mut t = Transcript::new();
        for i in 1..=n {
            let speaker = Speaker::for_turn(i);
            let label = if speaker == Speaker::Proponent { ArgLabel::Premise } else { ArgLabel::Claim };
            t.push(Turn {
                index: i,
                speaker,
                defended_label: label,
                content: format!("argument number {i}"),
            })
            .unwrap();
        }
        t
    }

    fn joined(msgs: &[ChatMessage]) -> String {
        msgs.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }

    fn outside_definitions(msgs: &[ChatMessage]) -> String {
        joined(msgs).replace(&label_definitions_block(), "")
    }

    fn view(speaker: Speaker, assigned: ArgLabel, opponent: ArgLabel) -> DebaterView {
        DebaterView {
            speaker,
            assigned_label: assigned,
            opponent_label: opponent,
            total_turns: 4,
        }
    }

    #[test]
    fn manager_prompt_shape() {
        let msgs = render_manager_prompt(&instance(), &TemplateSet::builtin()).unwrap();
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].role, crate::backend::Role::System);
        assert!(msgs[0].content.contains(&label_definitions_block()));
        assert_eq!(msgs[1].content.matches("<TARGET>Cars are good.</TARGET>").count(), 1);
        assert!(msgs[1].content.contains("JSON"));
        let all = joined(&msgs);
        assert!(!all.contains("{{"));
        for name in LABEL_NAMES {
            assert!(all.contains(name));
            assert!(!outside_definitions(&msgs).contains(name), "{name} leaked");
        }
    }

    #[test]
    fn manager_template_without_essay_is_rejected() {
        let err = crate::agents::PromptTemplate::parse(
            AgentRole::Manager,
            "[system]\n{{label_definitions}}\n[user]\nclassify",
        );
        assert!(err.is_err());
    }

    #[test]
    fn debater_first_and_third_turns() {
        let set = TemplateSet::builtin();
        let first = render_debater_prompt(&instance(), view(Speaker::Proponent, ArgLabel::Premise, ArgLabel::Claim), &Transcript::new(), &set).unwrap();
        let user = &first[1].content;
        assert!(user.contains(EMPTY_TRANSCRIPT_MARKER));
        assert!(!user.contains("[Turn "));
        assert!(user.contains("Turn 1 of 4"));
        assert!(first[0].content.contains("Structural and logical dependencies outweigh"));

        let third = render_debater_prompt(&instance(), view(Speaker::Proponent, ArgLabel::Premise, ArgLabel::Claim), &transcript(2), &set).unwrap();
        let user = &third[1].content;
        assert_eq!(user.matches("[Turn ").count(), 2);
        let (a, b) = (user.find("argument number 1").unwrap(), user.find("argument number 2").unwrap());
        assert!(a < b);
        assert!(!user.contains(EMPTY_TRANSCRIPT_MARKER));
    }

    #[test]
    fn debater_rejects_same_labels() {
        let err = render_debater_prompt(&instance(), view(Speaker::Proponent, ArgLabel::Claim, ArgLabel::Claim), &Transcript::new(), &TemplateSet::builtin());
        assert!(matches!(err, Err(AgentError::SameStance(ArgLabel::Claim))));
    }

    /// Swaps two labels and the two speaker names in one pass.
    fn swap(text: &str, a: ArgLabel, b: ArgLabel) -> String {
        let protect = text.replace("MajorClaim", "\u{1}");
        let sentinel = |l: ArgLabel| if l == ArgLabel::MajorClaim { "\u{1}".to_string() } else { l.to_string() };
        protect
            .replace(&sentinel(a), "\u{2}")
            .replace(&sentinel(b), &sentinel(a))
            .replace('\u{2}', &sentinel(b))
            .replace("Proponent", "\u{3}")
            .replace("Opponent", "Proponent")
            .replace('\u{3}', "Opponent")
            .replace('\u{1}', "MajorClaim")
    }

    #[test]
    fn debater_prompts_are_symmetric() {
        let set = TemplateSet::builtin();
        for (a, b) in [(ArgLabel::Premise, ArgLabel::Claim), (ArgLabel::MajorClaim, ArgLabel::Premise)] {
            let pro = render_debater_prompt(&instance(), view(Speaker::Proponent, a, b), &Transcript::new(), &set).unwrap();
            let opp = render_debater_prompt(&instance(), view(Speaker::Opponent, b, a), &Transcript::new(), &set).unwrap();
            let defs = label_definitions_block();
            let pro = joined(&pro).replace(&defs, "");
            let opp = joined(&opp).replace(&defs, "");
            assert_eq!(swap(&pro, a, b), opp);
        }
    }

    #[test]
    fn judge_prompt_needs_complete_transcript() {
        let set = TemplateSet::builtin();
        let msgs = render_judge_prompt(&instance(), &transcript(4), 4, &set).unwrap();
        assert_eq!(msgs[1].content.matches("[Turn ").count(), 4);
        assert!(msgs[0].content.contains(&label_definitions_block()));
        assert!(msgs[0].content.contains("direction of support"));
        let err = render_judge_prompt(&instance(), &transcript(3), 4, &set).unwrap_err();
        assert!(matches!(err, AgentError::IncompleteTranscript { expected: 4, got: 3 }));
    }

    #[test]
    fn judge_prompt_has_no_distribution() {
        let msgs = render_judge_prompt(&instance(), &transcript(2), 2, &TemplateSet::builtin()).unwrap();
        let all = joined(&msgs);
        assert!(!all.contains("0.75") && !all.to_lowercase().contains("probabilit"));
    }

    #[test]
    fn baseline_prompts() {
        let set = TemplateSet::builtin();
        let inst = instance();
        let vanilla = joined(&render_baseline_prompt(&inst, BaselineKind::Vanilla, &set).unwrap());
        let cot = joined(&render_baseline_prompt(&inst, BaselineKind::Cot, &set).unwrap());
        assert!(!vanilla.contains("step by step"));
        assert!(cot.contains("step by step"));
        for text in [&vanilla, &cot] {
            assert!(text.contains("LABEL: <type name>"));
        }

        let smart = render_baseline_prompt(&inst, BaselineKind::Smart, &set).unwrap();
        let judge = render_judge_prompt(&inst, &transcript(4), 4, &set).unwrap();
        // The judge's system text minus its debate-only lines.
        let judge_lines: Vec<&str> = set.get(AgentRole::Judge).system.lines().collect();
        let open = judge_lines.iter().position(|l| l.trim() == "{{#debate}}").unwrap();
        let close = judge_lines.iter().position(|l| l.trim() == "{{/debate}}").unwrap();
        let expected: Vec<&str> = judge_lines[..open].iter().chain(&judge_lines[close + 1..]).copied().collect();
        let expected = render(AgentRole::Smart, &expected.join("\n"), &base_vars(&inst)).unwrap();
        assert_eq!(smart[0].content, expected);
        assert!(judge[0].content.starts_with(&expected[..expected.find("Explain").unwrap()]));
        assert!(!smart[0].content.contains("debater"));
        assert!(!joined(&smart).contains("transcript"));
    }

    #[test]
    fn gold_label_only_in_definitions() {
        let set = TemplateSet::builtin();
        let inst = instance();
        let prompts = [
            render_manager_prompt(&inst, &set).unwrap(),
            render_baseline_prompt(&inst, BaselineKind::Vanilla, &set).unwrap(),
            render_baseline_prompt(&inst, BaselineKind::Cot, &set).unwrap(),
            render_baseline_prompt(&inst, BaselineKind::Smart, &set).unwrap(),
        ];
        for msgs in &prompts {
            assert!(!outside_definitions(msgs).contains(inst.gold_label.as_str()));
        }
    }

    #[test]
    fn renderers_are_pure() {
        let set = TemplateSet::builtin();
        let a = render_judge_prompt(&instance(), &transcript(4), 4, &set).unwrap();
        let b = render_judge_prompt(&instance(), &transcript(4), 4, &set).unwrap();
        assert_eq!(a, b);
    }
}
