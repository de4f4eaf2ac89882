mod common;

use std::collections::HashSet;
use std::sync::Arc;

use common::{ChaosProvider, QUESTION_POOL};
use policyscope::conversation::{question_key, ChatScope, Conversation};
use policyscope::llm::{GatewayConfig, LlmGateway, Role, Tier, Turn, UserSettings};
use policyscope::store::Store;
use proptest::prelude::*;

const DOMAINS: [&str; 2] = ["a.test", "b.test"];
const CRITERIA: [(&str, u8); 3] = [("Transparency", 3), ("Consent", 2), ("Security", 4)];

#[derive(Debug, Clone)]
enum Op {
    Ask {
        domain: usize,
        scope: usize,
        question: usize,
    },
    Suggest {
        domain: usize,
        scope: usize,
    },
    Clear {
        domain: usize,
    },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..2usize, 0..4usize, 0..QUESTION_POOL.len()).prop_map(|(domain, scope, question)| Op::Ask { domain, scope, question }),
        4 => (0..2usize, 0..4usize).prop_map(|(domain, scope)| Op::Suggest { domain, scope }),
        1 => (0..2usize).prop_map(|domain| Op::Clear { domain }),
    ]
}

fn scope(i: usize) -> ChatScope {
    match i {
        0 => ChatScope::General,
        n => ChatScope::criterion(CRITERIA[n - 1].0),
    }
}

struct World {
    chaos: Arc<ChaosProvider>,
    store: Arc<Store>,
    chat: Conversation,
}

fn world(seed: u64) -> World {
    let chaos = Arc::new(ChaosProvider::new(seed, 20));
    let store = Arc::new(Store::in_memory().unwrap());
    for d in DOMAINS {
        common::seed_domain(&store, d, &CRITERIA);
    }
    let gateway = Arc::new(LlmGateway::new(chaos.clone(), GatewayConfig::default()));
    let chat = Conversation::new(store.clone(), gateway).with_clock(common::manual_clock());
    World { chaos, store, chat }
}

fn check_all_threads(store: &Store) -> Result<(), TestCaseError> {
    for d in DOMAINS {
        for t in store.get_threads(d).unwrap() {
            prop_assert!(t.is_well_formed(), "{t:?}");
            prop_assert_eq!(&t.domain, d);
            let asked: HashSet<String> = t.asked_questions().iter().map(|q| question_key(q)).collect();
            prop_assert!(t.suggestions.iter().all(|s| !asked.contains(&question_key(s))));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threads_stay_well_formed(seed in any::<u64>(), ops in proptest::collection::vec(op(), 1..40)) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async {
            let w = world(seed);
            for op in ops {
                match op {
                    Op::Ask { domain, scope: s, question } => {
                        let (d, s) = (DOMAINS[domain], scope(s));
                        let before = w.chat.thread(d, &s).unwrap();
                        let q = QUESTION_POOL[question];
                        let calls_before = w.chaos.calls.lock().unwrap().len();
                        let result = w.chat.ask(d, &s, q, UserSettings::default()).await;
                        let after = w.chat.thread(d, &s).unwrap();
                        match result {
                            Ok(answer) => {
                                prop_assert_eq!(after.messages.len(), before.messages.len() + 2);
                                prop_assert_eq!(&after.messages[after.messages.len() - 2].text, q);
                                prop_assert_eq!(&after.messages[after.messages.len() - 1].text, &answer);
                                prop_assert!(after.suggestions.is_empty());
                            }
                            Err(_) => prop_assert_eq!(&after, &before),
                        }
                        // Every model call for this question saw exactly this thread's history.
                        let calls = w.chaos.calls.lock().unwrap();
                        for req in &calls[calls_before..] {
                            prop_assert_eq!(req.tier, Tier::Assessment);
                            prop_assert_eq!(&req.history, &before.turns());
                            prop_assert_eq!(req.user_prompt.as_deref(), Some(q));
                            let marker = format!("applies to {d}.");
                            prop_assert!(req.system_prompt.contains(&marker));
                        }
                    }
                    Op::Suggest { domain, scope: s } => {
                        let (d, s) = (DOMAINS[domain], scope(s));
                        let got = w.chat.suggest(d, &s).await.unwrap();
                        prop_assert_eq!(got.len(), 3);
                        let keys: HashSet<String> = got.iter().map(|q| question_key(q)).collect();
                        prop_assert_eq!(keys.len(), 3);
                        let asked: HashSet<String> = w
                            .chat
                            .thread(d, &s)
                            .unwrap()
                            .asked_questions()
                            .iter()
                            .map(|q| question_key(q))
                            .collect();
                        prop_assert!(keys.is_disjoint(&asked));
                    }
                    Op::Clear { domain } => {
                        w.chat.clear_history(DOMAINS[domain]).unwrap();
                        prop_assert!(w.store.get_threads(DOMAINS[domain]).unwrap().is_empty());
                        prop_assert!(w.store.get_assessment(DOMAINS[domain]).unwrap().is_some());
                    }
                }
                check_all_threads(&w.store)?;
            }
            Ok(())
        })?;
    }

    /// The last question asked in a scope is the first suggestion on any
    /// other domain's fresh thread in that scope.
    #[test]
    fn carryover_reaches_fresh_threads(seed in any::<u64>(), s in 0..4usize, question in 0..QUESTION_POOL.len()) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async {
            let chaos = Arc::new(ChaosProvider::new(seed, 0));
            let store = Arc::new(Store::in_memory().unwrap());
            common::seed_domain(&store, "a.test", &CRITERIA);
            common::seed_domain(&store, "b.test", &CRITERIA);
            let gateway = Arc::new(LlmGateway::new(chaos, GatewayConfig::default()));
            let chat = Conversation::new(store, gateway);
            let s = scope(s);
            let q = QUESTION_POOL[question];
            chat.ask("a.test", &s, q, UserSettings::default()).await.unwrap();
            let got = chat.suggest("b.test", &s).await.unwrap();
            prop_assert_eq!(got[0].as_str(), q);
            Ok(())
        })?;
    }
}

#[tokio::test]
async fn history_never_crosses_domains() {
    let w = world(7);
    let s = UserSettings::default();
    // Keep asking until both domains have answers; failures are retried.
    for (d, q) in [("a.test", "q-a-1"), ("b.test", "q-b-1"), ("a.test", "q-a-2")] {
        while w.chat.ask(d, &ChatScope::General, q, s).await.is_err() {}
    }
    let last = w.chaos.calls.lock().unwrap().last().cloned().unwrap();
    let texts: Vec<&str> = last.history.iter().map(|t: &Turn| t.content.as_str()).collect();
    assert_eq!(texts.len(), 2);
    assert_eq!(texts[0], "q-a-1");
    assert_eq!(last.history[1].role, Role::Assistant);
    assert!(!last.system_prompt.contains("applies to b.test"));
}
