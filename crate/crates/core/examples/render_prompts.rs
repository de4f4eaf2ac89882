//! Prints the three prompts the model sees: assessment, chat and
//! suggestions.

use chrono::Utc;
use policyscope::acquisition::PolicyDocument;
use policyscope::llm::{Complexity, PromptRenderer, ResponseLength, Role, TemplateSet, Turn};
use policyscope::UserSettings;

fn main() {
    let renderer = PromptRenderer::new(TemplateSet::english(), 120_000);
    let policy = PolicyDocument::ok(
        "example.test",
        "https://example.test/privacy",
        "We collect your email address to send receipts. We keep it for two years.",
        Utc::now(),
    );

    let assessment = renderer.render_assessment_prompt(&policy).unwrap();
    println!("=== assessment ===\n{}\n", assessment.text);

    let settings = UserSettings::new(ResponseLength::Short, Complexity::Expert);
    let chat = renderer
        .render_chat_prompt(&policy, "Retention: 2/5 (red). Two years is not justified", settings, 0)
        .unwrap();
    println!("=== chat ===\n{}\n", chat.text);

    let history = [
        Turn::new(Role::User, "How long is my email kept?"),
        Turn::new(Role::Assistant, "Two years after your last order."),
    ];
    let (system, user) = renderer
        .render_suggestion_prompt(Some("Retention"), &history, &["How long is my email kept?".into()])
        .unwrap();
    println!("=== suggestions (system) ===\n{system}\n");
    println!("=== suggestions (user) ===\n{user}");
}
