use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseLength {
    Short,
    #[default]
    Medium,
    Long,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    #[default]
    NoPrior,
    Basic,
    Expert,
}

impl ResponseLength {
    pub const ALL: [ResponseLength; 3] = [Self::Short, Self::Medium, Self::Long];

    /// Sentence placed in the answer-length slot of the chat prompt.
    pub fn directive(self) -> &'static str {
        match self {
            Self::Short => "Answer in at most 3 sentences.",
            Self::Medium => "Answer in at most 6 sentences.",
            Self::Long => "Answer in detail, using up to 3 paragraphs.",
        }
    }
}

impl Complexity {
    pub const ALL: [Complexity; 3] = [Self::NoPrior, Self::Basic, Self::Expert];

    /// Text placed in the complexity slot. The template itself supplies the
    /// closing period.
    pub fn directive(self) -> &'static str {
        match self {
            Self::NoPrior => "Explain for a reader with no technical or legal background",
            Self::Basic => "Explain for a reader with basic knowledge of data protection",
            Self::Expert => "Explain for an expert reader, using precise technical and legal terminology",
        }
    }
}

/// Reader preferences applied to every chat answer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserSettings {
    #[serde(default)]
    pub length: ResponseLength,
    #[serde(default)]
    pub complexity: Complexity,
}

impl UserSettings {
    pub fn new(length: ResponseLength, complexity: Complexity) -> Self {
        Self { length, complexity }
    }

    /// All nine length/complexity combinations.
    pub fn all() -> impl Iterator<Item = UserSettings> {
        ResponseLength::ALL
            .into_iter()
            .flat_map(|l| Complexity::ALL.into_iter().map(move |c| UserSettings::new(l, c)))
    }
}
