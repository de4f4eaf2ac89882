//! Extraction of `criterion: k/5` ratings from free-form model output.

use std::sync::LazyLock;

use regex::Regex;

use super::score::LikertScore;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCriterion {
    pub name: String,
    pub score: LikertScore,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAssessment {
    pub criteria: Vec<ParsedCriterion>,
    /// Lines that looked like ratings but were dropped, duplicates, and similar.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no criterion ratings found in model output")]
pub struct ParseFailure {
    pub diagnostics: Vec<String>,
}

static LIST_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[-*+•>]\s+|#{1,6}\s*|\(?\d{1,2}[.)]\s+|[a-z][.)]\s+)").unwrap());

static RATING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<name>[^:]+?)\s*:\s*(?:rating\s*[:=]?\s*)?(?P<score>\d+(?:[.,]\d+)?)\s*/\s*5(?P<rest>.*)$")
        .unwrap()
});

static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:step\s*\d+\s*[:.)-]?\s*)?(?P<kind>criteria|analysis|evaluation|conclusion|summary|reflection)\s*(?::|$)")
        .unwrap()
});

static SUMMARY_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:overall|total|average|final)(?:\s+(?:rating|score))?$").unwrap());

/// Strips list bullets, heading hashes, numbering and emphasis so that
/// `- **Consent**: 4/5` and `### Consent: 4/5` both read `Consent: 4/5`.
fn clean(line: &str) -> String {
    let plain = line.replace("**", "").replace("__", "").replace('*', "");
    let mut s = plain.trim();
    loop {
        let stripped = LIST_MARKER.find(s).map(|m| &s[m.end()..]);
        match stripped {
            Some(rest) if rest.len() < s.len() => s = rest.trim_start(),
            _ => break,
        }
    }
    s.trim_matches('_').trim().to_string()
}

enum LineKind {
    Rating { name: String, score: String, rest: String },
    Header { conclusion: bool },
    Text,
}

fn classify(line: &str) -> LineKind {
    let cleaned = clean(line);
    if let Some(caps) = RATING.captures(&cleaned) {
        let rest = caps["rest"].to_string();
        if !rest.starts_with(|c: char| c.is_ascii_digit()) {
            return LineKind::Rating {
                name: caps["name"].trim().to_string(),
                score: caps["score"].to_string(),
                rest,
            };
        }
    }
    if line.trim_start().starts_with('#') && !cleaned.is_empty() {
        let conclusion = HEADER.captures(&cleaned).is_some_and(|c| is_closing(&c["kind"]));
        return LineKind::Header { conclusion };
    }
    if let Some(caps) = HEADER.captures(&cleaned) {
        return LineKind::Header {
            conclusion: is_closing(&caps["kind"]),
        };
    }
    LineKind::Text
}

fn is_closing(kind: &str) -> bool {
    matches!(
        kind.to_ascii_lowercase().as_str(),
        "conclusion" | "summary" | "reflection"
    )
}

fn name_key(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Every `<name>: <k>/5` rating in `raw`, in document order.
///
/// A criterion's justification is the rest of its rating line plus the
/// following lines up to the next rating or section header. Once a
/// conclusion header follows at least one rating, the rest of the text is
/// ignored.
pub fn parse_assessment(raw: &str) -> Result<ParsedAssessment, ParseFailure> {
    let mut criteria: Vec<ParsedCriterion> = Vec::new();
    let mut warnings = Vec::new();
    // Index into `criteria` still collecting justification lines.
    let mut open: Option<usize> = None;
    let mut justification: Vec<String> = Vec::new();

    let close = |open: &mut Option<usize>, lines: &mut Vec<String>, criteria: &mut Vec<ParsedCriterion>| {
        if let Some(i) = open.take() {
            criteria[i].justification = lines.join("\n");
        }
        lines.clear();
    };

    for (lineno, line) in raw.lines().enumerate() {
        match classify(line) {
            LineKind::Rating { name, score, rest } => {
                close(&mut open, &mut justification, &mut criteria);
                let at = lineno + 1;
                if !name.chars().any(char::is_alphabetic) || name.chars().count() > 100 {
                    warnings.push(format!("line {at}: ignored rating with unusable name {name:?}"));
                    continue;
                }
                if SUMMARY_NAME.is_match(&name) {
                    warnings.push(format!("line {at}: ignored summary rating {name:?}"));
                    continue;
                }
                let score = match score.parse::<i64>() {
                    Ok(k) => match LikertScore::new(k) {
                        Ok(s) => s,
                        Err(_) => {
                            warnings.push(format!("line {at}: {name:?} has out-of-range score {k}/5"));
                            continue;
                        }
                    },
                    Err(_) => {
                        warnings.push(format!("line {at}: {name:?} has non-integer score {score}/5"));
                        continue;
                    }
                };
                if criteria.iter().any(|c| name_key(&c.name) == name_key(&name)) {
                    warnings.push(format!("line {at}: duplicate criterion {name:?}, keeping the first"));
                    continue;
                }
                let rest = rest
                    .trim_start_matches(|c: char| c.is_whitespace() || "-–—:.,;)]|".contains(c))
                    .trim();
                if !rest.is_empty() {
                    justification.push(rest.to_string());
                }
                criteria.push(ParsedCriterion {
                    name,
                    score,
                    justification: String::new(),
                });
                open = Some(criteria.len() - 1);
            }
            LineKind::Header { conclusion } => {
                close(&mut open, &mut justification, &mut criteria);
                if conclusion && !criteria.is_empty() {
                    break;
                }
            }
            LineKind::Text => {
                let text = line.trim();
                if open.is_some() && !text.is_empty() {
                    justification.push(text.to_string());
                }
            }
        }
    }
    close(&mut open, &mut justification, &mut criteria);

    if criteria.is_empty() {
        let mut diagnostics = warnings;
        diagnostics.push("no line of the form `<criterion>: <1-5>/5` found".into());
        return Err(ParseFailure { diagnostics });
    }
    Ok(ParsedAssessment { criteria, warnings })
}
