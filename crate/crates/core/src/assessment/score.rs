use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficColor {
    Green,
    Yellow,
    Red,
    /// No policy or no usable assessment; rendered as a gray question mark.
    Unknown,
}

impl TrafficColor {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Green => "green",
            Self::Yellow => "yellow",
            Self::Red => "red",
            Self::Unknown => "unknown",
        }
    }
}

impl fmt::Display for TrafficColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A 1..=5 Likert rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LikertScore(u8);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("score {0} is outside 1..=5")]
    OutOfRange(i64),
    #[error("cannot average an empty score list")]
    Empty,
}

impl LikertScore {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(value: i64) -> Result<Self, ScoreError> {
        if (Self::MIN as i64..=Self::MAX as i64).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(ScoreError::OutOfRange(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for LikertScore {
    type Error = ScoreError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value as i64)
    }
}

impl From<LikertScore> for u8 {
    fn from(score: LikertScore) -> u8 {
        score.0
    }
}

/// Red at 2 or below, yellow at 3, green at 4 or above.
pub fn score_criterion(score: LikertScore) -> TrafficColor {
    match score.get() {
        1 | 2 => TrafficColor::Red,
        3 => TrafficColor::Yellow,
        _ => TrafficColor::Green,
    }
}

/// Mean of the scores and its color: red below 2.5, yellow on the closed
/// interval [2.5, 3], green above 3.
pub fn score_overall(scores: &[LikertScore]) -> Result<(f64, TrafficColor), ScoreError> {
    if scores.is_empty() {
        return Err(ScoreError::Empty);
    }
    let n = scores.len() as u64;
    let sum: u64 = scores.iter().map(|s| s.get() as u64).sum();
    let average = sum as f64 / n as f64;
    // Compare on integers so the endpoints are exact: avg < 2.5 <=> 2*sum < 5*n.
    let color = if 2 * sum < 5 * n {
        TrafficColor::Red
    } else if sum <= 3 * n {
        TrafficColor::Yellow
    } else {
        TrafficColor::Green
    };
    Ok((average, color))
}
