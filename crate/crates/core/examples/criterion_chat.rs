//! Criterion-scoped chat with follow-up suggestions.
//!
//! Asks about one criterion on one site, then opens the same criterion on a
//! second site: the question asked on the first site is offered again,
//! which makes comparing sites a one-click affair.

use std::sync::Arc;

use chrono::Utc;
use policyscope::assessment::CriterionRating;
use policyscope::llm::{GatewayConfig, MockReply, MockRule, Tier};
use policyscope::{
    ChatScope, Conversation, LikertScore, LlmGateway, MockProvider, PolicyAssessment, PolicyDocument, Store,
    UserSettings,
};

fn seed(store: &Store, domain: &str, retention: i64) {
    let text = format!("This privacy policy applies to {domain}. ").repeat(30);
    store
        .put_policy(&PolicyDocument::ok(
            domain,
            format!("https://{domain}/privacy"),
            text,
            Utc::now(),
        ))
        .unwrap();
    let ratings = [("Transparency", 4), ("Retention", retention), ("Consent", 3)]
        .into_iter()
        .map(|(name, s)| CriterionRating::new(name, LikertScore::new(s).unwrap(), format!("{name} on {domain}.")))
        .collect();
    store
        .put_assessment(&PolicyAssessment::from_ratings(domain, ratings, "", "scripted", Utc::now()).unwrap())
        .unwrap();
}

#[tokio::main]
async fn main() {
    let store = Arc::new(Store::in_memory().unwrap());
    seed(&store, "news.example", 2);
    seed(&store, "shop.example", 4);

    let mock = MockProvider::new()
        .with_rule(
            MockRule::any(MockReply::text(
                "1. Is there a deadline for deletion?\n2. Are backups deleted too?\n3. Can I ask for earlier deletion?",
            ))
            .tier(Tier::Lightweight),
        )
        .with_default_reply("The policy keeps account data until you close the account.");
    let gateway = Arc::new(LlmGateway::new(Arc::new(mock), GatewayConfig::default()));
    let chat = Conversation::new(store, gateway);
    let scope = ChatScope::criterion("retention");

    let settings = UserSettings::default();
    let answer = chat
        .ask("news.example", &scope, "How long is my data kept?", settings)
        .await
        .unwrap();
    println!("news.example / Retention");
    println!("  Q: How long is my data kept?\n  A: {answer}");
    for s in chat.suggest("news.example", &scope).await.unwrap() {
        println!("  suggestion: {s}");
    }

    println!("\nshop.example / Retention (fresh thread)");
    for s in chat.suggest("shop.example", &scope).await.unwrap() {
        println!("  suggestion: {s}");
    }

    let cleared = chat.clear_history("news.example").unwrap();
    println!("\ncleared {cleared} thread(s) on news.example; ratings are kept");
}
