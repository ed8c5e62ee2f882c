//! Prompt templates: plain-text files with a `[system]` and a `[user]`
//! section and `{{name}}` placeholders.
//!
//! Lines consisting solely of `{{#debate}}` / `{{/debate}}` delimit text that
//! only applies when a debate transcript is present. The judge keeps it; the
//! single-agent "smart" baseline reuses the judge's system text without it.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::domain::AgentRole;

const DEBATE_OPEN: &str = "{{#debate}}";
const DEBATE_CLOSE: &str = "{{/debate}}";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("{role} template: required placeholder {{{{{name}}}}} is missing")]
    MissingPlaceholder { role: AgentRole, name: &'static str },
    #[error("{role} template: placeholder {{{{{name}}}}} has no value")]
    Unbound { role: AgentRole, name: String },
    #[error("{role} template: {message}")]
    Syntax { role: AgentRole, message: String },
    #[error("template file {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub role: AgentRole,
    pub system: String,
    pub user: String,
}

/// Placeholders a role's renderer needs to find in its template.
pub fn required_placeholders(role: AgentRole) -> &'static [&'static str] {
    match role {
        AgentRole::Manager => &["masked_text", "label_definitions"],
        AgentRole::Debater => &[
            "masked_text",
            "assigned_label",
            "opponent_label",
            "transcript",
            "label_definitions",
        ],
        AgentRole::Judge => &["masked_text", "transcript", "label_definitions"],
        AgentRole::Vanilla | AgentRole::Cot => &["masked_text", "label_definitions"],
        // The system text comes from the judge template.
        AgentRole::Smart => &["masked_text"],
    }
}

impl PromptTemplate {
    /// Parses `[system]` / `[user]` sections. Text before the first header
    /// is rejected so typos in headers do not silently drop content.
    pub fn parse(role: AgentRole, source: &str) -> Result<Self, TemplateError> {
        let mut system: Option<Vec<&str>> = None;
        let mut user: Option<Vec<&str>> = None;
        let mut current: Option<&mut Vec<&str>> = None;
        for line in source.lines() {
            match line.trim() {
                "[system]" => {
                    current = Some(system.insert(Vec::new()));
                }
                "[user]" => {
                    current = Some(user.insert(Vec::new()));
                }
                _ => match current.as_deref_mut() {
                    Some(lines) => lines.push(line),
                    None if line.trim().is_empty() => {}
                    None => {
                        return Err(TemplateError::Syntax {
                            role,
                            message: "text before the first [system] or [user] header".into(),
                        })
                    }
                },
            }
        }
        let join = |lines: Option<Vec<&str>>| lines.unwrap_or_default().join("\n").trim().to_string();
        let template = Self {
            role,
            system: join(system),
            user: join(user),
        };
        if template.user.is_empty() {
            return Err(TemplateError::Syntax {
                role,
                message: "missing [user] section".into(),
            });
        }
        if role != AgentRole::Smart && template.system.is_empty() {
            return Err(TemplateError::Syntax {
                role,
                message: "missing [system] section".into(),
            });
        }
        template.check_required()?;
        Ok(template)
    }

    fn check_required(&self) -> Result<(), TemplateError> {
        for name in required_placeholders(self.role) {
            let token = format!("{{{{{name}}}}}");
            if !self.system.contains(&token) && !self.user.contains(&token) {
                return Err(TemplateError::MissingPlaceholder {
                    role: self.role,
                    name,
                });
            }
        }
        Ok(())
    }
}

/// Keeps or drops `{{#debate}}` blocks. Markers must sit on their own line.
pub fn apply_debate_blocks(role: AgentRole, text: &str, keep: bool) -> Result<String, TemplateError> {
    let mut out = Vec::new();
    let mut inside = false;
    for line in text.lines() {
        match line.trim() {
            DEBATE_OPEN if inside => {
                return Err(TemplateError::Syntax {
                    role,
                    message: "nested {{#debate}} block".into(),
                })
            }
            DEBATE_OPEN => inside = true,
            DEBATE_CLOSE if !inside => {
                return Err(TemplateError::Syntax {
                    role,
                    message: "{{/debate}} without opening marker".into(),
                })
            }
            DEBATE_CLOSE => inside = false,
            _ if inside && !keep => {}
            _ => out.push(line),
        }
    }
    if inside {
        return Err(TemplateError::Syntax {
            role,
            message: "unclosed {{#debate}} block".into(),
        });
    }
    Ok(out.join("\n"))
}

/// Single-pass `{{name}}` substitution. Substituted values are never
/// rescanned, so essay text containing braces is left alone.
pub fn render(role: AgentRole, text: &str, vars: &HashMap<&str, String>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after.find("}}").ok_or_else(|| TemplateError::Syntax {
            role,
            message: "unterminated `{{`".into(),
        })?;
        let name = after[..close].trim();
        let value = vars.get(name).ok_or_else(|| TemplateError::Unbound {
            role,
            name: name.to_string(),
        })?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// One template per agent role, loaded once and shared read-only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: HashMap<AgentRole, PromptTemplate>,
}

fn builtin_source(role: AgentRole) -> &'static str {
    match role {
        AgentRole::Manager => include_str!("../../templates/manager.txt"),
        AgentRole::Debater => include_str!("../../templates/debater.txt"),
        AgentRole::Judge => include_str!("../../templates/judge.txt"),
        AgentRole::Vanilla => include_str!("../../templates/vanilla.txt"),
        AgentRole::Cot => include_str!("../../templates/cot.txt"),
        AgentRole::Smart => include_str!("../../templates/smart.txt"),
    }
}

impl TemplateSet {
    /// Templates shipped with the crate.
    pub fn builtin() -> Self {
        let templates = AgentRole::ALL
            .into_iter()
            .map(|role| {
                let t = PromptTemplate::parse(role, builtin_source(role))
                    .expect("built-in templates are valid");
                (role, t)
            })
            .collect();
        Self { templates }
    }

    /// Reads `<role>.txt` from `dir` for every role, falling back to the
    /// built-in template for files that do not exist.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        for role in AgentRole::ALL {
            let path = dir.join(format!("{role}.txt"));
            if path.is_file() {
                set.load_file(role, &path)?;
            }
        }
        Ok(set)
    }

    pub fn load_file(&mut self, role: AgentRole, path: &Path) -> Result<(), TemplateError> {
        let source = std::fs::read_to_string(path).map_err(|e| TemplateError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        self.set(PromptTemplate::parse(role, &source)?);
        Ok(())
    }

    pub fn set(&mut self, template: PromptTemplate) {
        self.templates.insert(template.role, template);
    }

    pub fn get(&self, role: AgentRole) -> &PromptTemplate {
        &self.templates[&role]
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}
