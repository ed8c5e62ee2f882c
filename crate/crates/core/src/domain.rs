//! Label set, probability distributions over it, and the stance pair handed
//! to the two debaters.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

/// Argument component label.
///
/// Variant order is the canonical total order used for deterministic
/// tie-breaks: `MajorClaim < Claim < Premise`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArgLabel {
    MajorClaim,
    Claim,
    Premise,
}

impl ArgLabel {
    pub const ALL: [ArgLabel; 3] = [ArgLabel::MajorClaim, ArgLabel::Claim, ArgLabel::Premise];

    pub fn as_str(self) -> &'static str {
        match self {
            ArgLabel::MajorClaim => "MajorClaim",
            ArgLabel::Claim => "Claim",
            ArgLabel::Premise => "Premise",
        }
    }

    /// One-sentence definition used in the label-definitions block of every
    /// prompt.
    pub fn definition(self) -> &'static str {
        match self {
            ArgLabel::MajorClaim => {
                "The central thesis of the whole essay: the root of the argument structure, which every other argument ultimately serves."
            }
            ArgLabel::Claim => {
                "An intermediate argument that is itself backed by other statements and serves as the point those statements are evidence for."
            }
            ArgLabel::Premise => {
                "A supporting unit (a reason, example, or piece of evidence) that backs a Claim or another Premise and receives no support of its own."
            }
        }
    }

    /// Position in the canonical order, `0..3`.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<ArgLabel> {
        Self::ALL.get(index).copied()
    }

    /// Lenient name match: case-insensitive, ignores spaces, underscores and
    /// hyphens, so `"major claim"` and `"MAJOR_CLAIM"` both resolve.
    pub fn parse_lenient(name: &str) -> Option<ArgLabel> {
        let folded: String = name
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        match folded.as_str() {
            "majorclaim" => Some(ArgLabel::MajorClaim),
            "claim" => Some(ArgLabel::Claim),
            "premise" => Some(ArgLabel::Premise),
            _ => None,
        }
    }
}

impl fmt::Display for ArgLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown argument label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for ArgLabel {
    type Err = UnknownLabel;

    /// Exact canonical names only; see [`ArgLabel::parse_lenient`] for model
    /// output.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Which agent a backend request is made for. Mock scripts match on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Manager,
    Debater,
    Judge,
    Vanilla,
    Cot,
    Smart,
}

impl AgentRole {
    pub const ALL: [AgentRole; 6] = [
        AgentRole::Manager,
        AgentRole::Debater,
        AgentRole::Judge,
        AgentRole::Vanilla,
        AgentRole::Cot,
        AgentRole::Smart,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Manager => "manager",
            AgentRole::Debater => "debater",
            AgentRole::Judge => "judge",
            AgentRole::Vanilla => "vanilla",
            AgentRole::Cot => "cot",
            AgentRole::Smart => "smart",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown agent role `{s}`"))
    }
}

/// Probability for each label. Entries are non-negative and sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelDistribution {
    probs: [f64; 3],
}

impl LabelDistribution {
    /// Builds a valid distribution from untrusted weights.
    ///
    /// Missing labels count as 0; negative, NaN and infinite weights are
    /// clamped to 0. If nothing positive remains the result is uniform.
    pub fn normalize<I>(raw: I) -> Self
    where
        I: IntoIterator<Item = (ArgLabel, f64)>,
    {
        let mut weights = [0.0; 3];
        for (label, w) in raw {
            weights[label.index()] = w;
        }
        Self::from_weights(weights)
    }

    /// Same as [`normalize`](Self::normalize) with weights in canonical order.
    pub fn from_weights(weights: [f64; 3]) -> Self {
        let clamped = weights.map(|w| if w.is_finite() && w > 0.0 { w } else { 0.0 });
        let sum: f64 = clamped.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Self::uniform();
        }
        Self {
            probs: clamped.map(|w| w / sum),
        }
    }

    pub fn uniform() -> Self {
        Self {
            probs: [1.0 / 3.0; 3],
        }
    }

    pub fn point_mass(label: ArgLabel) -> Self {
        let mut probs = [0.0; 3];
        probs[label.index()] = 1.0;
        Self { probs }
    }

    pub fn get(&self, label: ArgLabel) -> f64 {
        self.probs[label.index()]
    }

    /// Probabilities in canonical label order.
    pub fn as_array(&self) -> [f64; 3] {
        self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (ArgLabel, f64)> + '_ {
        ArgLabel::ALL.into_iter().map(|l| (l, self.get(l)))
    }

    /// The two most probable labels, most probable first. Ties go to the
    /// label earlier in canonical order.
    pub fn top_two(&self) -> (ArgLabel, ArgLabel) {
        let mut ranked = ArgLabel::ALL;
        // Stable sort keeps canonical order among equal probabilities.
        ranked.sort_by(|a, b| self.get(*b).total_cmp(&self.get(*a)));
        (ranked[0], ranked[1])
    }

    pub fn argmax(&self) -> ArgLabel {
        self.top_two().0
    }

    pub fn max_probability(&self) -> f64 {
        self.get(self.argmax())
    }
}

impl Default for LabelDistribution {
    fn default() -> Self {
        Self::uniform()
    }
}

impl Serialize for LabelDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(3))?;
        for (label, p) in self.iter() {
            map.serialize_entry(label.as_str(), &p)?;
        }
        map.end()
    }
}

/// Tolerance on the stored sum before a read distribution is re-normalized.
pub const STORED_SUM_TOLERANCE: f64 = 1e-6;

impl<'de> Deserialize<'de> for LabelDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct DistVisitor;

        impl<'de> Visitor<'de> for DistVisitor {
            type Value = LabelDistribution;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object with MajorClaim, Claim and Premise probabilities")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut probs = [0.0f64; 3];
                while let Some(key) = map.next_key::<String>()? {
                    let label: ArgLabel = key.parse().map_err(de::Error::custom)?;
                    probs[label.index()] = map.next_value()?;
                }
                let sum: f64 = probs.iter().sum();
                let valid = probs.iter().all(|p| p.is_finite() && *p >= 0.0)
                    && (sum - 1.0).abs() <= STORED_SUM_TOLERANCE;
                Ok(if valid {
                    LabelDistribution { probs }
                } else {
                    LabelDistribution::from_weights(probs)
                })
            }
        }

        deserializer.deserialize_map(DistVisitor)
    }
}

/// Labels defended by the Proponent and the Opponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StancePair {
    pub proponent: ArgLabel,
    pub opponent: ArgLabel,
}

impl StancePair {
    /// `None` when both sides would defend the same label.
    pub fn new(proponent: ArgLabel, opponent: ArgLabel) -> Option<Self> {
        (proponent != opponent).then_some(Self {
            proponent,
            opponent,
        })
    }

    pub fn contains(&self, label: ArgLabel) -> bool {
        self.proponent == label || self.opponent == label
    }
}
