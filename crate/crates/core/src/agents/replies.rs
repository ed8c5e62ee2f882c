use serde_json::Value;

use super::AgentError;
use crate::domain::{ArgLabel, LabelDistribution};

#[derive(Debug, Clone, PartialEq)]
pub struct ManagerReply {
    pub distribution: LabelDistribution,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeReply {
    pub label: ArgLabel,
    pub rationale: String,
    pub raw_text: String,
}

pub const NO_RATIONALE: &str = "(no rationale given)";

/// First JSON object embedded anywhere in `text`.
fn first_json_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    text.match_indices('{').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

fn as_probability(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().trim_end_matches('%').trim().parse().ok(),
        _ => None,
    }
}

/// Reads the manager's probability object. Keys are matched leniently,
/// missing labels count as zero, and the result is normalized.
pub fn parse_manager_reply(text: &str) -> Result<ManagerReply, AgentError> {
    let object = first_json_object(text)
        .ok_or_else(|| AgentError::Parse("no JSON object in manager reply".into()))?;
    let mut found = false;
    let mut weights = [0.0; 3];
    for (key, value) in &object {
        let Some(label) = ArgLabel::parse_lenient(key) else {
            continue;
        };
        found = true;
        weights[label.index()] = as_probability(value).unwrap_or(0.0);
    }
    if !found {
        return Err(AgentError::Parse(
            "manager JSON object names none of the labels".into(),
        ));
    }
    Ok(ManagerReply {
        distribution: LabelDistribution::from_weights(weights),
        raw_text: text.to_string(),
    })
}

/// Label from a `LABEL: <name>` line; markdown emphasis and a trailing
/// period are tolerated.
fn label_line(line: &str) -> Option<ArgLabel> {
    let cleaned = line.trim().trim_matches(|c| matches!(c, '*' | '`' | '_' | '#' | ' '));
    let (head, name) = cleaned.split_once(':')?;
    if !head.trim().trim_matches(|c| matches!(c, '*' | '`')).eq_ignore_ascii_case("label") {
        return None;
    }
    let name = name.trim().trim_matches(|c| matches!(c, '*' | '`' | '.' | '"' | '\'' | ' '));
    ArgLabel::parse_lenient(name)
}

/// Expects the last non-blank line to be `LABEL: <name>`; everything before
/// it is the rationale.
pub fn parse_judge_reply(text: &str) -> Result<JudgeReply, AgentError> {
    let trimmed = text.trim_end();
    let (before, last) = match trimmed.rfind('\n') {
        Some(i) => (&trimmed[..i], &trimmed[i + 1..]),
        None => ("", trimmed),
    };
    let label = label_line(last)
        .ok_or_else(|| AgentError::Parse("reply does not end with `LABEL: <name>`".into()))?;
    let rationale = before.trim();
    Ok(JudgeReply {
        label,
        rationale: if rationale.is_empty() {
            NO_RATIONALE.to_string()
        } else {
            rationale.to_string()
        },
        raw_text: text.to_string(),
    })
}
