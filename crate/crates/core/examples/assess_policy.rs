//! Assesses one policy with a scripted model and prints the overview a user
//! would see first: overall color, the red criteria, then every rating.
//!
//! Set `OPENAI_API_KEY` to send the same prompt to a real model instead.

use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use policyscope::llm::{CompletionProvider, GatewayConfig, OpenAiProvider};
use policyscope::{Assessor, LlmGateway, MockProvider, PolicyDocument};

const POLICY: &str = "We collect your name, postal address, email address and payment details \
when you place an order. We use this information to deliver your order and to send you our \
newsletter unless you unsubscribe. We share your data with logistics partners, payment \
providers and selected advertising partners. Data is stored on servers in the United States. \
We keep order data for as long as necessary. You can contact us to access or delete your data. \
We take appropriate technical and organisational measures to protect your data. This policy \
may change from time to time and the current version is always available on this page. \
Cookies are used for analytics and personalised advertising.";

const SCRIPTED: &str = "\
1. Criteria: Transparency, Consent, Data Transfer, Retention, User Rights.

2. Analysis: Advertising partners receive data without a clear opt-in and storage is indefinite.

3. Evaluation:

Transparency: 3/5
Recipients are named only by category.

Consent: 2/5
Newsletter and advertising rely on opt-out.

Data Transfer: 2/5
Transfers to the United States are mentioned without safeguards.

Retention: 1/5
\"As long as necessary\" gives no period.

User Rights: 4/5
Access and deletion are offered by contact.

4. Conclusion: The evaluation is complete.
";

#[tokio::main]
async fn main() {
    let provider: Arc<dyn CompletionProvider> = match std::env::var("OPENAI_API_KEY") {
        Ok(_) => Arc::new(OpenAiProvider::from_env(
            "https://api.openai.com/v1",
            "OPENAI_API_KEY",
            Duration::from_secs(90),
        )),
        Err(_) => Arc::new(MockProvider::new().with_default_reply(SCRIPTED)),
    };
    let gateway = Arc::new(LlmGateway::new(provider, GatewayConfig::default()));
    let policy = PolicyDocument::ok("shop.example", "https://shop.example/privacy", POLICY, Utc::now());

    let assessment = match Assessor::new(gateway).assess(&policy).await {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    println!(
        "{}: {} (average {:.2})",
        assessment.domain,
        assessment.overall.as_str().to_uppercase(),
        assessment.average
    );
    let pressing: Vec<String> = assessment.pressing_issues().iter().map(|c| c.display_name()).collect();
    println!("pressing issues: {}", pressing.join(", "));
    println!();
    for c in &assessment.criteria {
        println!(
            "{:<14} {}/5 {:<6} {}",
            c.display_name(),
            c.score.get(),
            c.color.as_str(),
            c.justification
        );
    }
}
