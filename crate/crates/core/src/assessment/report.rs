use std::cmp::Ordering;
use std::fmt::Write;

use super::PolicyAssessment;

/// Plain-text side-by-side ranking of several sites, best first.
///
/// Ordered by average score (descending), then by number of pressing
/// issues, then by domain. The output depends only on domains, names and
/// scores, so identical inputs always give identical bytes.
pub fn ranking_report(assessments: &[PolicyAssessment]) -> String {
    let mut ranked: Vec<&PolicyAssessment> = assessments.iter().collect();
    ranked.sort_by(|a, b| {
        b.average
            .partial_cmp(&a.average)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.pressing_issues().len().cmp(&b.pressing_issues().len()))
            .then_with(|| a.domain.cmp(&b.domain))
    });

    let mut out = String::new();
    writeln!(out, "Privacy ranking ({} sites)", ranked.len()).unwrap();
    for (i, a) in ranked.iter().enumerate() {
        writeln!(
            out,
            "{}. {}  {}  average {:.2}  ({} criteria)",
            i + 1,
            a.domain,
            a.overall.as_str().to_uppercase(),
            a.average,
            a.criteria.len()
        )
        .unwrap();
        for c in &a.criteria {
            writeln!(out, "   - {}: {}/5 {}", c.display_name(), c.score.get(), c.color).unwrap();
        }
        let pressing: Vec<String> = a.pressing_issues().iter().map(|c| c.display_name()).collect();
        if pressing.is_empty() {
            writeln!(out, "   pressing issues: none").unwrap();
        } else {
            writeln!(out, "   pressing issues: {}", pressing.join(", ")).unwrap();
        }
    }
    out
}
