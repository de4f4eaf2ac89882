//! The three prompt templates and their slot filling.
//!
//! Templates are plain strings with `{slot}` markers. Filling is a single
//! left-to-right pass, so a slot value (policy text in particular) is never
//! rescanned for markers.

use serde::{Deserialize, Serialize};

use super::settings::UserSettings;
use super::{LlmError, Role, Turn};
use crate::acquisition::PolicyDocument;

const ASSESSMENT_TEMPLATE: &str = "\
Your output must be a maximum of 600 words long! You are an expert in data protection and a member of an ethics council. You are given a privacy policy. Your task is to uncover aspects in data protection declarations that are ethically questionable from your perspective. Proceed step by step:

1. Criteria: From your perspective, identify relevant ethical test criteria for this privacy policy as criteria for a later evaluation. When naming the test criteria, stick to standardized terms and concepts that are common in the field of ethics. Keep it short!
2. Analysis: Based on this, check for ethical problems or ethically questionable circumstances in the privacy policy.
3. Evaluation: Only after you have completed step 2: Rate the privacy policy based on your analysis regarding each of your criteria on a 5-point Likert scale. Explain what this rating means. Explain what the ideal case with 5 points and the worst case with one point would look like. The output in this step should look like this:

[Insert rating criterion here]: [insert rating here]/5 [insert line break]

[insert justification here]

4. Conclusion: Reflect on your evaluation and check whether it is complete.

Important: Check for errors in your analysis and correct them if necessary before the evaluation. You must present your approach clearly and concisely and follow the steps mentioned. Your output must not exceed 600 words.

Privacy policy: {policy}";

const CHAT_TEMPLATE: &str = "Keep it short! Privacy policy: {policy} | Rating: {rating}. Users want to know more about how this rating is justified in the privacy policy. When answering the questions, focus on the given topic of the rating. Keep it short! {complexity}. {length}";

const SUGGESTION_SYSTEM_TEMPLATE: &str = "Your task is to ask questions about a privacy policy. Your output consists of three questions: 1. question 1; 2. question 2; 3. question 3. Please output the questions in a numbered list. Never repeat questions that have already been asked: {asked}";

const SUGGESTION_USER_TEMPLATE: &str =
    "Specifically: Ask your questions about the privacy policy on the topic: {topic}.

Embrace the context of the previous chat: {history}";

/// Appended to the assessment prompt when the first answer could not be parsed.
pub const FORMAT_REMINDER: &str = "\n\nReminder: in step 3, put every rating on its own line in exactly this form: [criterion]: [rating]/5, where the rating is a whole number from 1 to 5, followed by the justification on the next line.";

/// Inserted where the middle of an over-long policy was cut.
pub const TRUNCATION_MARKER: &str = "\n[... policy text truncated ...]\n";

/// Topic slot value for the general chat.
pub const GENERAL_TOPIC: &str = "General";

/// A template set; swap in a localized one through configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub assessment: String,
    pub chat: String,
    pub suggestion_system: String,
    pub suggestion_user: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::english()
    }
}

impl TemplateSet {
    pub fn english() -> Self {
        Self {
            assessment: ASSESSMENT_TEMPLATE.into(),
            chat: CHAT_TEMPLATE.into(),
            suggestion_system: SUGGESTION_SYSTEM_TEMPLATE.into(),
            suggestion_user: SUGGESTION_USER_TEMPLATE.into(),
        }
    }

    /// Loads a template set from a TOML file with the four keys of this struct.
    pub fn from_toml(source: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(source)
    }
}

/// A rendered system prompt and whether the policy slice had to be cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    pub truncated: bool,
}

/// Renders the templates against a token budget.
///
/// Token counts are estimated as one token per four bytes, rounded up.
#[derive(Debug, Clone)]
pub struct PromptRenderer {
    templates: TemplateSet,
    context_budget_tokens: usize,
}

impl PromptRenderer {
    pub fn new(templates: TemplateSet, context_budget_tokens: usize) -> Self {
        Self {
            templates,
            context_budget_tokens,
        }
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn render_assessment_prompt(&self, policy: &PolicyDocument) -> Result<RenderedPrompt, LlmError> {
        require_ok(policy)?;
        self.render_with_policy(&self.templates.assessment, &policy.text, &[], 0)
    }

    /// `reserve_tokens` is room to keep free for chat history and the
    /// question that travel alongside this system prompt.
    pub fn render_chat_prompt(
        &self,
        policy: &PolicyDocument,
        rating_context: &str,
        settings: UserSettings,
        reserve_tokens: usize,
    ) -> Result<RenderedPrompt, LlmError> {
        require_ok(policy)?;
        let rating = rating_context.trim_end().trim_end_matches('.');
        self.render_with_policy(
            &self.templates.chat,
            &policy.text,
            &[
                ("rating", rating),
                ("complexity", settings.complexity.directive()),
                ("length", settings.length.directive()),
            ],
            reserve_tokens,
        )
    }

    /// Returns `(system prompt, user prompt)`. `topic` is a criterion name,
    /// or `None` for the general chat.
    pub fn render_suggestion_prompt(
        &self,
        topic: Option<&str>,
        history: &[Turn],
        asked: &[String],
    ) -> Result<(String, String), LlmError> {
        let asked = asked.join("; ");
        let system = fill(&self.templates.suggestion_system, &[("asked", &asked)]);
        let history = history
            .iter()
            .map(|t| format!("{}: {}", t.role.label(), t.content))
            .collect::<Vec<_>>()
            .join("\n");
        let user = fill(
            &self.templates.suggestion_user,
            &[("topic", topic.unwrap_or(GENERAL_TOPIC)), ("history", &history)],
        );
        let used = estimate_tokens(&system) + estimate_tokens(&user);
        if used > self.context_budget_tokens {
            return Err(LlmError::TooLong {
                needed: used,
                budget: self.context_budget_tokens,
            });
        }
        Ok((system, user))
    }

    fn render_with_policy(
        &self,
        template: &str,
        policy_text: &str,
        slots: &[(&str, &str)],
        reserve_tokens: usize,
    ) -> Result<RenderedPrompt, LlmError> {
        let mut all: Vec<(&str, &str)> = slots.to_vec();
        all.push(("policy", ""));
        let overhead = estimate_tokens(&fill(template, &all)) + reserve_tokens;
        let marker = estimate_tokens(TRUNCATION_MARKER);
        if overhead + marker > self.context_budget_tokens {
            return Err(LlmError::TooLong {
                needed: overhead + marker,
                budget: self.context_budget_tokens,
            });
        }

        let room = self.context_budget_tokens - overhead;
        let (policy, truncated) = if estimate_tokens(policy_text) <= room {
            (policy_text.to_string(), false)
        } else {
            (truncate_middle(policy_text, (room - marker) * 4), true)
        };
        all.pop();
        all.push(("policy", &policy));
        Ok(RenderedPrompt {
            text: fill(template, &all),
            truncated,
        })
    }
}

impl Role {
    fn label(self) -> &'static str {
        match self {
            Role::User => "User",
            Role::Assistant => "Assistant",
        }
    }
}

fn require_ok(policy: &PolicyDocument) -> Result<(), LlmError> {
    if policy.is_ok() && !policy.text.is_empty() {
        Ok(())
    } else {
        Err(LlmError::InvalidRequest(format!(
            "policy for {} is not usable ({})",
            policy.domain,
            policy.status.as_str()
        )))
    }
}

pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

/// Substitutes `{name}` markers in one pass. Unknown markers are left as is.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replaced = after.find('}').and_then(|close| {
            let name = &after[..close];
            slots
                .iter()
                .find(|(slot, _)| *slot == name)
                .map(|(_, value)| (value, close))
        });
        match replaced {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Keeps whole words from the head and the tail, up to `max_bytes` in total,
/// joined by [`TRUNCATION_MARKER`].
fn truncate_middle(text: &str, max_bytes: usize) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let half = max_bytes / 2;

    let mut head_len = 0;
    let mut head = 0;
    for w in &words {
        if head_len + w.len() + 1 > half {
            break;
        }
        head_len += w.len() + 1;
        head += 1;
    }
    let mut tail_len = 0;
    let mut tail = 0;
    for w in words[head..].iter().rev() {
        if tail_len + w.len() + 1 > half {
            break;
        }
        tail_len += w.len() + 1;
        tail += 1;
    }
    format!(
        "{}{}{}",
        words[..head].join(" "),
        TRUNCATION_MARKER,
        words[words.len() - tail..].join(" ")
    )
}

#[cfg(test)]
mod tests {
    use chrono::Utc;

    use super::*;
    use crate::acquisition::AcquisitionStatus;
    use crate::llm::settings::{Complexity, ResponseLength};

    fn policy(text: &str) -> PolicyDocument {
        PolicyDocument::ok("shop.example", "https://shop.example/privacy", text, Utc::now())
    }

    fn renderer() -> PromptRenderer {
        PromptRenderer::new(TemplateSet::english(), 100_000)
    }

    #[test]
    fn assessment_prompt_shape() {
        let p = renderer()
            .render_assessment_prompt(&policy("We collect emails."))
            .unwrap();
        assert!(!p.truncated);
        for needle in [
            "1. Criteria:",
            "2. Analysis:",
            "3. Evaluation:",
            "4. Conclusion:",
            "Your output must be a maximum of 600 words long!",
            "Your output must not exceed 600 words.",
            "[Insert rating criterion here]: [insert rating here]/5",
        ] {
            assert!(p.text.contains(needle), "missing {needle}");
        }
        assert!(p.text.ends_with("Privacy policy: We collect emails."));
    }

    #[test]
    fn assessment_prompts_differ_only_in_policy() {
        let r = renderer();
        let a = r.render_assessment_prompt(&policy("Alpha text.")).unwrap().text;
        let b = r.render_assessment_prompt(&policy("Beta words here.")).unwrap().text;
        assert_eq!(a.replace("Alpha text.", "<P>"), b.replace("Beta words here.", "<P>"));
    }

    #[test]
    fn rejects_failed_policy() {
        let failed = PolicyDocument::failed(
            "shop.example",
            "https://shop.example/",
            AcquisitionStatus::TooShort,
            "short",
            Utc::now(),
        );
        let r = renderer();
        assert!(matches!(
            r.render_assessment_prompt(&failed),
            Err(LlmError::InvalidRequest(_))
        ));
        assert!(r.render_chat_prompt(&failed, "x", UserSettings::default(), 0).is_err());
    }

    #[test]
    fn chat_prompt_directives() {
        let s = UserSettings::new(ResponseLength::Short, Complexity::NoPrior);
        let p = renderer()
            .render_chat_prompt(&policy("Text."), "Transparency: 3/5\nVague.", s, 0)
            .unwrap()
            .text;
        assert!(p.starts_with("Keep it short! Privacy policy: Text. | Rating: Transparency: 3/5\nVague. Users want"));
        assert!(p.ends_with(
            "Keep it short! Explain for a reader with no technical or legal background. Answer in at most 3 sentences."
        ));
    }

    #[test]
    fn policy_text_is_not_rescanned_for_slots() {
        let p = renderer()
            .render_chat_prompt(
                &policy("Odd {rating} and {length} text."),
                "R",
                UserSettings::default(),
                0,
            )
            .unwrap()
            .text;
        assert!(p.contains("Privacy policy: Odd {rating} and {length} text. | Rating: R."));
    }

    #[test]
    fn suggestion_prompt_slots() {
        let r = renderer();
        let (system, user) = r.render_suggestion_prompt(Some("Transparency"), &[], &[]).unwrap();
        assert!(system.ends_with("Never repeat questions that have already been asked: "));
        assert!(
            user.starts_with("Specifically: Ask your questions about the privacy policy on the topic: Transparency.")
        );
        assert!(user.ends_with("Embrace the context of the previous chat: "));

        let history = vec![Turn::new(Role::User, "Q1"), Turn::new(Role::Assistant, "A1")];
        let asked = vec!["Q1".to_string(), "Q2".to_string()];
        let (system, user) = r.render_suggestion_prompt(None, &history, &asked).unwrap();
        assert!(system.contains("Q1") && system.contains("Q2"));
        assert!(user.contains("topic: General."));
        assert!(user.ends_with("User: Q1\nAssistant: A1"));
    }

    #[test]
    fn long_policy_keeps_head_and_tail() {
        let words: Vec<String> = (0..5000).map(|i| format!("word{i}")).collect();
        let text = words.join(" ");
        let r = PromptRenderer::new(TemplateSet::english(), 2000);
        let p = r.render_assessment_prompt(&policy(&text)).unwrap();
        assert!(p.truncated);
        assert!(estimate_tokens(&p.text) <= 2000);
        assert!(p.text.contains("Privacy policy: word0 word1"));
        assert!(p.text.ends_with("word4999"));
        assert!(p.text.contains(TRUNCATION_MARKER));
        assert!(p.text.contains("4. Conclusion:"));
    }

    #[test]
    fn template_alone_over_budget_is_an_error() {
        let r = PromptRenderer::new(TemplateSet::english(), 50);
        assert!(matches!(
            r.render_assessment_prompt(&policy("x y z")),
            Err(LlmError::TooLong { .. })
        ));
        let r = PromptRenderer::new(TemplateSet::english(), 1000);
        assert!(matches!(
            r.render_chat_prompt(&policy("x"), "r", UserSettings::default(), 5000),
            Err(LlmError::TooLong { .. })
        ));
    }

    #[test]
    fn fill_single_pass() {
        assert_eq!(fill("a {x} b {y} {z}", &[("x", "{y}"), ("y", "2")]), "a {y} b 2 {z}");
        assert_eq!(fill("{", &[]), "{");
        assert_eq!(fill("}{x", &[("x", "1")]), "}{x");
    }

    #[test]
    fn template_set_from_toml() {
        let t = TemplateSet::from_toml(
            "assessment = 'A {policy}'\nchat = 'C'\nsuggestion_system = 'S'\nsuggestion_user = 'U'\n",
        )
        .unwrap();
        let r = PromptRenderer::new(t, 1000);
        assert_eq!(r.render_assessment_prompt(&policy("p")).unwrap().text, "A p");
    }
}
