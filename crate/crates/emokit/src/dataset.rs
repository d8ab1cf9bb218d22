//! Emotion labels and the labeled dataset row shared across the pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::embed::Embedding;

/// Six-class emotion set. Codes 0-5 are fixed in this order for
/// serialization; classification tasks use the 4-class subset
/// Angry/Sad/Happy/Neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EmotionLabel {
    Angry,
    Sad,
    Happy,
    Neutral,
    Fear,
    Disgust,
}

pub const SIX_CLASS: [EmotionLabel; 6] = [
    EmotionLabel::Angry,
    EmotionLabel::Sad,
    EmotionLabel::Happy,
    EmotionLabel::Neutral,
    EmotionLabel::Fear,
    EmotionLabel::Disgust,
];

pub const FOUR_CLASS: [EmotionLabel; 4] = [
    EmotionLabel::Angry,
    EmotionLabel::Sad,
    EmotionLabel::Happy,
    EmotionLabel::Neutral,
];

impl EmotionLabel {
    pub fn code(self) -> u8 {
        match self {
            EmotionLabel::Angry => 0,
            EmotionLabel::Sad => 1,
            EmotionLabel::Happy => 2,
            EmotionLabel::Neutral => 3,
            EmotionLabel::Fear => 4,
            EmotionLabel::Disgust => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<EmotionLabel> {
        SIX_CLASS.get(code as usize).copied()
    }

    pub fn short(self) -> &'static str {
        match self {
            EmotionLabel::Angry => "ANG",
            EmotionLabel::Sad => "SAD",
            EmotionLabel::Happy => "HAP",
            EmotionLabel::Neutral => "NEU",
            EmotionLabel::Fear => "FEA",
            EmotionLabel::Disgust => "DIS",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EmotionLabel::Angry => "Angry",
            EmotionLabel::Sad => "Sad",
            EmotionLabel::Happy => "Happy",
            EmotionLabel::Neutral => "Neutral",
            EmotionLabel::Fear => "Fear",
            EmotionLabel::Disgust => "Disgust",
        };
        f.write_str(name)
    }
}

impl FromStr for EmotionLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "angry" | "ang" | "anger" => Ok(EmotionLabel::Angry),
            "sad" => Ok(EmotionLabel::Sad),
            "happy" | "hap" => Ok(EmotionLabel::Happy),
            "neutral" | "neu" => Ok(EmotionLabel::Neutral),
            "fear" | "fea" => Ok(EmotionLabel::Fear),
            "disgust" | "dis" => Ok(EmotionLabel::Disgust),
            other => Err(format!("unknown emotion label: {other}")),
        }
    }
}

/// One dataset row: an utterance embedding with its identity and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEmbedding {
    pub embedding: Embedding,
    pub speaker_id: String,
    pub utterance_id: String,
    pub emotion: EmotionLabel,
    pub sentence_id: Option<String>,
}
