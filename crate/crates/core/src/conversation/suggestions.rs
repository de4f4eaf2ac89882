//! Parsing of generated question lists and the static fallback questions.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::Deserialize;

static MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|\s)\(?([1-9])\s*[.):]\s+").unwrap());

/// Items of a numbered list (`1.`, `1)` or `1:` markers), whether the items
/// sit on separate lines or run together on one line. Only markers that
/// continue the sequence 1, 2, 3, ... start a new item.
pub fn parse_numbered_list(text: &str) -> Vec<String> {
    let mut starts: Vec<(usize, usize)> = Vec::new();
    let mut expected = 1;
    for caps in MARKER.captures_iter(text) {
        let number: u32 = caps[1].parse().unwrap();
        if number == expected {
            let whole = caps.get(0).unwrap();
            starts.push((whole.start(), whole.end()));
            expected += 1;
        }
    }

    if starts.is_empty() {
        return text
            .lines()
            .map(|l| l.trim().trim_start_matches(['-', '*', '•']))
            .map(tidy)
            .filter(|l| l.ends_with('?'))
            .collect();
    }

    starts
        .iter()
        .enumerate()
        .map(|(i, &(_, content_start))| {
            let end = starts.get(i + 1).map_or(text.len(), |&(next, _)| next);
            tidy(&text[content_start..end])
        })
        .filter(|s| !s.is_empty())
        .collect()
}

fn tidy(item: &str) -> String {
    let item = item.replace("**", "");
    let item = item.split_whitespace().collect::<Vec<_>>().join(" ");
    item.trim()
        .trim_end_matches([';', ','])
        .trim()
        .trim_matches(['"', '“', '”'])
        .trim()
        .to_string()
}

/// Case-insensitive, whitespace-collapsed comparison key for questions.
pub fn question_key(q: &str) -> String {
    q.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, Deserialize)]
pub struct FallbackQuestions {
    general: Vec<String>,
    #[serde(default)]
    criteria: BTreeMap<String, Vec<String>>,
}

static BUILTIN: &str = include_str!("../../resources/fallback_questions.toml");

impl Default for FallbackQuestions {
    fn default() -> Self {
        toml::from_str(BUILTIN).expect("bundled fallback questions are valid TOML")
    }
}

impl FallbackQuestions {
    /// Candidate questions for a topic, most specific first. Never runs dry:
    /// after the table entries come generic questions naming the topic.
    pub fn candidates(&self, criterion: Option<&str>) -> impl Iterator<Item = String> + '_ {
        let specific: Vec<String> = criterion
            .and_then(|name| {
                let lower = name.to_lowercase();
                self.criteria
                    .iter()
                    .filter(|(key, _)| lower.contains(key.as_str()))
                    .max_by_key(|(key, _)| key.len())
                    .map(|(_, qs)| qs.clone())
            })
            .unwrap_or_default();
        let topic = criterion.unwrap_or("data protection").to_string();
        specific
            .into_iter()
            .chain(self.general.iter().cloned())
            .chain((1..).map(move |i| match i {
                1 => format!("What does the policy say about {topic}?"),
                2 => format!("Why did {topic} get this rating?"),
                3 => format!("What would an ideal policy do differently regarding {topic}?"),
                n => format!("What else should I know about {topic} (question {n})?"),
            }))
    }
}
