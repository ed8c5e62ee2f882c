use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::ArgLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Speaker {
    Proponent,
    Opponent,
}

impl Speaker {
    /// Proponent opens, so odd turns are the Proponent's.
    pub fn for_turn(index: usize) -> Speaker {
        if index % 2 == 1 {
            Speaker::Proponent
        } else {
            Speaker::Opponent
        }
    }

    pub fn other(self) -> Speaker {
        match self {
            Speaker::Proponent => Speaker::Opponent,
            Speaker::Opponent => Speaker::Proponent,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::Proponent => "Proponent",
            Speaker::Opponent => "Opponent",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    /// 1-based.
    pub index: usize,
    pub speaker: Speaker,
    pub defended_label: ArgLabel,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TranscriptError {
    #[error("turn {got} appended where turn {expected} was due")]
    OutOfOrder { expected: usize, got: usize },
    #[error("turn {index} must be spoken by the {expected}")]
    WrongSpeaker { index: usize, expected: Speaker },
    #[error("the {speaker} switched from {before} to {after}")]
    LabelChanged {
        speaker: Speaker,
        before: ArgLabel,
        after: ArgLabel,
    },
}

/// Ordered debate turns. Appends are checked so indices stay contiguous,
/// speakers alternate starting with the Proponent, and each speaker keeps
/// one label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    turns: Vec<Turn>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn next_index(&self) -> usize {
        self.turns.len() + 1
    }

    pub fn push(&mut self, turn: Turn) -> Result<(), TranscriptError> {
        let expected = self.next_index();
        if turn.index != expected {
            return Err(TranscriptError::OutOfOrder {
                expected,
                got: turn.index,
            });
        }
        let due = Speaker::for_turn(turn.index);
        if turn.speaker != due {
            return Err(TranscriptError::WrongSpeaker {
                index: turn.index,
                expected: due,
            });
        }
        if let Some(prev) = self.turns.iter().find(|t| t.speaker == turn.speaker) {
            if prev.defended_label != turn.defended_label {
                return Err(TranscriptError::LabelChanged {
                    speaker: turn.speaker,
                    before: prev.defended_label,
                    after: turn.defended_label,
                });
            }
        }
        self.turns.push(turn);
        Ok(())
    }

    /// First `n` turns, i.e. the history visible before turn `n + 1`.
    pub fn prefix(&self, n: usize) -> Transcript {
        Transcript {
            turns: self.turns[..n.min(self.turns.len())].to_vec(),
        }
    }

    pub fn is_complete(&self, scheduled_turns: usize) -> bool {
        self.turns.len() == scheduled_turns
    }

    /// Re-checks every invariant, e.g. after deserializing.
    pub fn validate(&self) -> Result<(), TranscriptError> {
        let mut rebuilt = Transcript::new();
        for t in &self.turns {
            rebuilt.push(t.clone())?;
        }
        Ok(())
    }
}
