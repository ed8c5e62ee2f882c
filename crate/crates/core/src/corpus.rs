//! Brat standoff essay corpora and masked, prompt-ready instances.
//!
//! An essay is a `<id>.txt` file paired with a `<id>.ann` file. Component
//! lines in the annotation file are tab-separated:
//!
//! ```text
//! T3    Premise 412 467    it is cheaper to share a kitchen
//! ```
//!
//! Offsets count Unicode scalar values into the text file. Relation,
//! attribute and note lines are skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::ArgLabel;

pub const TARGET_OPEN: &str = "<TARGET>";
pub const TARGET_CLOSE: &str = "</TARGET>";
pub const ARG_OPEN: &str = "<ARG>";
pub const ARG_CLOSE: &str = "</ARG>";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{essay_id}.ann line {line}: {reason}")]
    MalformedAnnotation {
        essay_id: String,
        line: usize,
        reason: String,
    },
    #[error("{essay_id}: components {first} and {second} overlap")]
    OverlappingSpans {
        essay_id: String,
        first: String,
        second: String,
    },
    #[error("essay `{essay_id}`: missing file {}", path.display())]
    MissingEssayFile { essay_id: String, path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgComponent {
    pub component_id: String,
    pub gold_label: ArgLabel,
    /// Character offset, inclusive.
    pub span_start: usize,
    /// Character offset, exclusive.
    pub span_end: usize,
    pub surface_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Essay {
    pub essay_id: String,
    pub text: String,
    /// Sorted by `span_start`, non-overlapping.
    pub components: Vec<ArgComponent>,
}

/// One classification problem: an essay with a single target component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: String,
    pub essay_id: String,
    pub component_id: String,
    pub masked_text: String,
    pub gold_label: ArgLabel,
    /// Surface text of the target, kept for reporting. Not part of any prompt
    /// beyond what `masked_text` already shows.
    #[serde(default)]
    pub target_text: String,
}

/// How much of the essay a prompt sees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextWindow {
    #[default]
    Full,
    /// Only the line (paragraph) holding the target.
    Paragraph,
}

pub fn instance_id(essay_id: &str, component_id: &str) -> String {
    format!("{essay_id}:{component_id}")
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Byte offset of every char boundary, plus the end of the string, so that
/// `offsets[c]` is the byte position of character `c`.
fn char_byte_offsets(text: &str) -> Vec<usize> {
    text.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect()
}

pub fn parse_essay(essay_id: &str, text: &str, ann: &str) -> Result<Essay, CorpusError> {
    let offsets = char_byte_offsets(text);
    let char_len = offsets.len() - 1;
    let mut components = Vec::new();

    for (idx, raw_line) in ann.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if !line.starts_with('T') {
            continue;
        }
        let malformed = |reason: String| CorpusError::MalformedAnnotation {
            essay_id: essay_id.to_string(),
            line: line_no,
            reason,
        };

        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default();
        let (Some(header), Some(surface)) = (fields.next(), fields.next()) else {
            return Err(malformed("expected three tab-separated fields".into()));
        };
        let mut parts = header.split(' ');
        let (Some(label), Some(start), Some(end), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(malformed(format!("expected `<Label> <start> <end>`, got `{header}`")));
        };
        let gold_label: ArgLabel = label
            .parse()
            .map_err(|_| malformed(format!("label `{label}` is not one of MajorClaim, Claim, Premise")))?;
        let parse_offset = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| malformed(format!("bad offset `{s}`")))
        };
        let (span_start, span_end) = (parse_offset(start)?, parse_offset(end)?);
        if span_start >= span_end || span_end > char_len {
            return Err(malformed(format!(
                "span {span_start}..{span_end} out of range for text of {char_len} characters"
            )));
        }
        let sliced = &text[offsets[span_start]..offsets[span_end]];
        if collapse_whitespace(sliced) != collapse_whitespace(surface) {
            return Err(malformed(format!(
                "surface text `{surface}` does not match text `{sliced}`"
            )));
        }
        components.push(ArgComponent {
            component_id: id.to_string(),
            gold_label,
            span_start,
            span_end,
            surface_text: surface.to_string(),
        });
    }

    components.sort_by_key(|c| (c.span_start, c.span_end));
    for pair in components.windows(2) {
        if pair[1].span_start < pair[0].span_end {
            return Err(CorpusError::OverlappingSpans {
                essay_id: essay_id.to_string(),
                first: pair[0].component_id.clone(),
                second: pair[1].component_id.clone(),
            });
        }
    }

    Ok(Essay {
        essay_id: essay_id.to_string(),
        text: text.to_string(),
        components,
    })
}

/// One instance per component, full-essay context.
pub fn make_instances(essay: &Essay) -> Vec<Instance> {
    make_instances_with(essay, ContextWindow::Full)
}

pub fn make_instances_with(essay: &Essay, window: ContextWindow) -> Vec<Instance> {
    let offsets = char_byte_offsets(&essay.text);
    (0..essay.components.len())
        .map(|target| {
            let comp = &essay.components[target];
            let masked_text = match window {
                ContextWindow::Full => {
                    mask_range(essay, &offsets, target, 0, essay.text.len())
                }
                ContextWindow::Paragraph => {
                    let (lo, hi) = paragraph_bounds(
                        &essay.text,
                        offsets[comp.span_start],
                        offsets[comp.span_end],
                    );
                    mask_range(essay, &offsets, target, lo, hi)
                }
            };
            Instance {
                instance_id: instance_id(&essay.essay_id, &comp.component_id),
                essay_id: essay.essay_id.clone(),
                component_id: comp.component_id.clone(),
                masked_text,
                gold_label: comp.gold_label,
                target_text: comp.surface_text.clone(),
            }
        })
        .collect()
}

/// Byte bounds of the newline-delimited block holding `[start, end)`.
fn paragraph_bounds(text: &str, start: usize, end: usize) -> (usize, usize) {
    let lo = text[..start].rfind('\n').map_or(0, |i| i + 1);
    let hi = text[end..].find('\n').map_or(text.len(), |i| end + i);
    (lo, hi)
}

/// Tags every component inside the byte window `[lo, hi)`. Tags are
/// inserted from the last span backwards so earlier offsets stay valid.
fn mask_range(essay: &Essay, offsets: &[usize], target: usize, lo: usize, hi: usize) -> String {
    let mut out = essay.text[lo..hi].to_string();
    for (i, comp) in essay.components.iter().enumerate().rev() {
        let (s, e) = (offsets[comp.span_start], offsets[comp.span_end]);
        if s < lo || e > hi {
            continue;
        }
        let (open, close) = if i == target {
            (TARGET_OPEN, TARGET_CLOSE)
        } else {
            (ARG_OPEN, ARG_CLOSE)
        };
        out.insert_str(e - lo, close);
        out.insert_str(s - lo, open);
    }
    out
}

/// Removes every masking tag, recovering the underlying text.
pub fn strip_tags(masked: &str) -> String {
    [TARGET_OPEN, TARGET_CLOSE, ARG_OPEN, ARG_CLOSE]
        .iter()
        .fold(masked.to_string(), |acc, tag| acc.replace(tag, ""))
}

fn read_file(essay_id: &str, path: PathBuf) -> Result<String, CorpusError> {
    if !path.is_file() {
        return Err(CorpusError::MissingEssayFile {
            essay_id: essay_id.to_string(),
            path,
        });
    }
    fs::read_to_string(&path).map_err(|source| CorpusError::Io { path, source })
}

pub fn load_essay(corpus_dir: &Path, essay_id: &str) -> Result<Essay, CorpusError> {
    let text = read_file(essay_id, corpus_dir.join(format!("{essay_id}.txt")))?;
    let ann = read_file(essay_id, corpus_dir.join(format!("{essay_id}.ann")))?;
    parse_essay(essay_id, &text, &ann)
}

/// Essay ids from a split file: one per line, blank lines and `#` comments
/// skipped.
pub fn read_split(split_file: &Path) -> Result<Vec<String>, CorpusError> {
    let content = fs::read_to_string(split_file).map_err(|source| CorpusError::Io {
        path: split_file.to_path_buf(),
        source,
    })?;
    Ok(content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Loads the listed essays in listed order.
pub fn load_split(corpus_dir: &Path, split_file: &Path) -> Result<Vec<Essay>, CorpusError> {
    read_split(split_file)?
        .iter()
        .map(|id| load_essay(corpus_dir, id))
        .collect()
}

/// Counts of essays, instances and gold labels for a prepared corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub essays: usize,
    pub instances: usize,
    pub per_label: BTreeMap<ArgLabel, usize>,
}

impl CorpusSummary {
    pub fn from_essays(essays: &[Essay]) -> Self {
        let mut per_label: BTreeMap<ArgLabel, usize> =
            ArgLabel::ALL.iter().map(|l| (*l, 0)).collect();
        for c in essays.iter().flat_map(|e| &e.components) {
            *per_label.entry(c.gold_label).or_default() += 1;
        }
        Self {
            essays: essays.len(),
            instances: per_label.values().sum(),
            per_label,
        }
    }
}

impl std::fmt::Display for CorpusSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} essays, {} instances", self.essays, self.instances)?;
        for (label, n) in &self.per_label {
            write!(f, "; {label}: {n}")?;
        }
        Ok(())
    }
}
