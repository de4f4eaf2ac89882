//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs against the fixture sites and scripted mock models only.

mod common;

use std::collections::HashSet;
use std::future::Future;
use std::pin::Pin;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use common::{ChaosProvider, Stack, QUESTION_POOL};
use policyscope::acquisition::{AcquisitionConfig, AcquisitionStatus, PolicyAcquirer};
use policyscope::assessment::{
    parse_assessment, ranking_report, score_criterion, score_overall, AssessError, Assessor, LikertScore, TrafficColor,
};
use policyscope::conversation::{question_key, ChatScope, Conversation};
use policyscope::fixtures::FixtureServer;
use policyscope::llm::{
    GatewayConfig, LlmGateway, MockProvider, MockReply, MockRule, Tier, UserSettings, FORMAT_REMINDER,
};
use policyscope::service::AssessResponse;
use policyscope::store::Store;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

type Outcome = Result<String, String>;
type Check = fn() -> Pin<Box<dyn Future<Output = Outcome>>>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let checks: [(&str, Check); 8] = [
        ("threshold oracle equivalence", || Box::pin(threshold_oracle())),
        ("calibration separation", || Box::pin(calibration())),
        ("parser suite", || Box::pin(parser_suite())),
        ("acquisition corpus", || Box::pin(acquisition_corpus())),
        ("cache and dedup", || Box::pin(cache_dedup())),
        ("suggestion contract", || Box::pin(suggestion_contract())),
        ("settings propagation", || Box::pin(settings_propagation())),
        ("bookstore comparison replay", || Box::pin(bookstore_replay())),
    ];
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap();
    let mut failed = 0;
    for (name, check) in checks {
        match rt.block_on(check()) {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn scores(v: &[u8]) -> Vec<LikertScore> {
    v.iter().map(|&s| LikertScore::new(s.into()).unwrap()).collect()
}

/// Exact rational comparisons: Red below 5/2, Yellow up to and including 3.
fn oracle_overall(v: &[u8]) -> TrafficColor {
    let (sum, n) = (v.iter().map(|&s| u32::from(s)).sum::<u32>(), v.len() as u32);
    if 2 * sum < 5 * n {
        TrafficColor::Red
    } else if sum <= 3 * n {
        TrafficColor::Yellow
    } else {
        TrafficColor::Green
    }
}

fn oracle_criterion(k: u8) -> TrafficColor {
    match k {
        1 | 2 => TrafficColor::Red,
        3 => TrafficColor::Yellow,
        _ => TrafficColor::Green,
    }
}

async fn threshold_oracle() -> Outcome {
    let started = Instant::now();
    let mut vectors: Vec<Vec<u8>> = vec![vec![]];
    let mut all = Vec::new();
    for _ in 0..3 {
        vectors = vectors
            .iter()
            .flat_map(|v| (1..=5).map(move |k| [v.clone(), vec![k]].concat()))
            .collect();
        all.extend(vectors.iter().cloned());
    }
    ensure!(all.len() == 155, "enumerated {} vectors", all.len());
    for v in &all {
        let (avg, color) = score_overall(&scores(v)).map_err(|e| e.to_string())?;
        ensure!(
            color == oracle_overall(v),
            "{v:?}: got {color}, oracle {}",
            oracle_overall(v)
        );
        let mean = v.iter().map(|&s| f64::from(s)).sum::<f64>() / v.len() as f64;
        ensure!((avg - mean).abs() < 1e-12, "{v:?}: average {avg}");
        for &k in v {
            let got = score_criterion(LikertScore::new(k.into()).unwrap());
            ensure!(got == oracle_criterion(k), "score {k}: got {got}");
        }
    }
    for bad in [0, 6, -1] {
        ensure!(LikertScore::new(bad).is_err(), "score {bad} accepted");
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("155/155 vectors agree in {elapsed:?}"))
}

async fn calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mock = MockProvider::new();
    let mut sites = Vec::new();
    for (kind, range) in [("strong", 4..=5u8), ("weak", 1..=2u8)] {
        for i in 0..10 {
            let domain = format!("{kind}-{i}.test");
            let n = rng.gen_range(3..=12);
            let criteria: Vec<(String, u8)> = (0..n)
                .map(|c| (format!("Criterion {c}"), rng.gen_range(range.clone())))
                .collect();
            let borrowed: Vec<(&str, u8)> = criteria.iter().map(|(n, s)| (n.as_str(), *s)).collect();
            mock = mock.with_rule(MockRule::containing(
                format!("applies to {domain}."),
                MockReply::text(common::rating_response(&borrowed)),
            ));
            sites.push((domain, kind));
        }
    }
    let mock = Arc::new(mock);
    let assessor = Assessor::new(common::gateway(&mock));
    let mut runs = Vec::new();
    for _ in 0..2 {
        let mut colors = Vec::new();
        for (domain, kind) in &sites {
            let a = assessor
                .assess(&common::policy_doc(domain, domain))
                .await
                .map_err(|e| format!("{domain}: {e}"))?;
            let want = if *kind == "strong" {
                TrafficColor::Green
            } else {
                TrafficColor::Red
            };
            ensure!(a.overall == want, "{domain}: {} (average {:.2})", a.overall, a.average);
            colors.push(a.overall);
        }
        runs.push(colors);
    }
    ensure!(runs[0] == runs[1], "second run differs");
    ensure!(
        mock.call_count(Tier::Assessment) == 40,
        "{} model calls",
        mock.call_count(Tier::Assessment)
    );
    Ok("10/10 strong green, 10/10 weak red, stable across two runs".into())
}

const NAMES: &[&str] = &[
    "Transparency",
    "Data Minimization",
    "Purpose Limitation",
    "Security",
    "User Rights",
    "Consent",
    "Data Transfer",
    "Retention",
    "Children's Privacy",
    "Third-Party Sharing",
    "Cookies and Tracking",
    "Accountability",
];

/// One response in the four-step shape with randomized noise on the rating
/// lines: emphasis, bullets, headings, spacing and blank lines.
fn noisy_response(rng: &mut ChaCha8Rng) -> (String, Vec<(String, u8)>) {
    let n = rng.gen_range(3..=12);
    let mut names: Vec<&str> = NAMES.to_vec();
    names.shuffle(rng);
    let expected: Vec<(String, u8)> = names[..n]
        .iter()
        .map(|s| (s.to_string(), rng.gen_range(1..=5)))
        .collect();
    let mut out = format!(
        "1. Criteria: {}.\n\n2. Analysis: Each criterion was checked.\n\n3. Evaluation:\n",
        names[..n].join(", ")
    );
    for (i, (name, k)) in expected.iter().enumerate() {
        let styled = match rng.gen_range(0..4) {
            0 => name.clone(),
            1 => format!("**{name}**"),
            2 => format!("__{name}__"),
            _ => format!("*{name}*"),
        };
        let prefix = ["", "- ", "* ", "• ", "### ", &format!("{}. ", i + 1)][rng.gen_range(0..6)].to_string();
        let colon = [":", " :", ":  "][rng.gen_range(0..3)];
        let slash = ["/", " / "][rng.gen_range(0..2)];
        let whole = if rng.gen_bool(0.2) {
            format!("**{prefix}{name}{colon} {k}{slash}5**")
        } else {
            format!("{prefix}{styled}{colon} {k}{slash}5")
        };
        out.push_str(&"\n".repeat(rng.gen_range(1..=3)));
        out.push_str(&whole);
        out.push_str(&format!(
            "\nThe policy covers {} to some degree; 4 of 10 clauses apply.\n",
            name.to_lowercase()
        ));
    }
    out.push_str("\n4. Conclusion: Overall the policy rates 3/5 against the chosen criteria.\n");
    (out, expected)
}

const MALFORMED: [&str; 10] = [
    "The policy is reasonably clear and I would rate it well overall.",
    "Transparency: 3\nSecurity: 2\nConsent: 4",
    "Transparency: good\nSecurity: poor\nConsent: adequate",
    "Transparency: 7/10\nSecurity: 4/10\nConsent: 8/10",
    "Transparency - 3 out of 5\nSecurity - 2 out of 5\nConsent - 4 out of 5",
    "I'm sorry, but I can't evaluate this document.",
    "| Criterion | Rating |\n|---|---|\n| Transparency | 3 |\n| Security | 2 |",
    "Transparency: 0/5\nSecurity: 9/5\nConsent: 6/5",
    "Transparency: three out of five\nSecurity: two out of five",
    "Overall rating: 3/5\nThe policy is average.",
];

async fn parser_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut total = 0;
    for i in 0..50 {
        let (raw, expected) = noisy_response(&mut rng);
        let parsed = parse_assessment(&raw).map_err(|e| format!("response {i}: {e}\n{raw}"))?;
        let got: Vec<(String, u8)> = parsed
            .criteria
            .iter()
            .map(|c| (c.name.clone(), c.score.get()))
            .collect();
        ensure!(
            got == expected,
            "response {i}: got {got:?}, expected {expected:?}\n{raw}"
        );
        total += expected.len();
    }
    for (i, raw) in MALFORMED.iter().enumerate() {
        ensure!(parse_assessment(raw).is_err(), "malformed {i} parsed: {raw:?}");
        let mock = Arc::new(MockProvider::new().with_default_reply(*raw));
        let err = Assessor::new(common::gateway(&mock))
            .assess(&common::policy_doc("shop.test", "Shop"))
            .await
            .expect_err("malformed output produced an assessment");
        ensure!(matches!(err, AssessError::Unavailable { .. }), "malformed {i}: {err}");
        let calls = mock.calls();
        ensure!(calls.len() == 2, "malformed {i}: {} model calls", calls.len());
        ensure!(
            calls[1].request.system_prompt.ends_with(FORMAT_REMINDER),
            "malformed {i}: retry lacks the format reminder"
        );
    }
    Ok(format!(
        "50 noisy responses, {total}/{total} ratings recalled exactly; 10/10 malformed retried then unavailable"
    ))
}

#[derive(Deserialize)]
struct Corpus {
    site: Vec<Site>,
}

#[derive(Deserialize)]
struct Site {
    host: String,
    expect: AcquisitionStatus,
}

async fn acquisition_corpus() -> Outcome {
    let source = std::fs::read_to_string(common::fixtures_dir().join("corpus.toml")).map_err(|e| e.to_string())?;
    let sites = toml::from_str::<Corpus>(&source).map_err(|e| e.to_string())?.site;
    let mut counts = std::collections::BTreeMap::new();
    for s in &sites {
        *counts.entry(s.expect.as_str()).or_insert(0) += 1;
    }
    let want: std::collections::BTreeMap<&str, i32> = [
        ("ok", 14),
        ("link_not_found", 3),
        ("fetch_blocked", 2),
        ("too_short", 1),
    ]
    .into();
    ensure!(counts == want, "corpus labels {counts:?}");

    let server = FixtureServer::start(FixtureServer::bundled_root())
        .await
        .map_err(|e| e.to_string())?;
    let config = AcquisitionConfig {
        timeout_secs: 1,
        ..AcquisitionConfig::default()
    };
    let acquirer = PolicyAcquirer::new(Arc::new(server.fetcher(Duration::from_secs(1))), &config);
    let started = Instant::now();
    let mut matched = 0;
    for site in &sites {
        let doc = acquirer.acquire_policy(&server.url(&site.host, "/")).await;
        ensure!(
            doc.status == site.expect,
            "{}: got {:?} ({:?})",
            site.host,
            doc.status,
            doc.diagnostic
        );
        matched += 1;
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{matched}/20 labels matched in {:.2}s", elapsed.as_secs_f64()))
}

fn bookstore_mock() -> MockProvider {
    MockProvider::from_dir(common::fixtures_dir().join("scenarios/bookstores")).unwrap()
}

async fn post_assess(stack: &Stack, url: &str) -> Result<AssessResponse, String> {
    let reply = stack
        .call(Method::POST, "/assess", Some(json!({ "page_url": url })))
        .await;
    ensure!(reply.status == StatusCode::OK, "{url}: HTTP {}", reply.status);
    Ok(reply.parse())
}

async fn cache_dedup() -> Outcome {
    let sequential = Stack::new(bookstore_mock()).await;
    let a = post_assess(&sequential, "http://bookstore-a.test/").await?;
    let b = post_assess(&sequential, "http://www.bookstore-a.test/").await?;
    ensure!(
        a.status == "ok" && a.criteria == b.criteria,
        "sequential answers differ"
    );
    let calls = sequential.mock.call_count(Tier::Assessment);
    ensure!(calls == 1, "sequential: {calls} assessment calls");

    let concurrent = Arc::new(Stack::new(bookstore_mock()).await);
    let tasks: Vec<_> = (0..2)
        .map(|_| {
            let stack = concurrent.clone();
            tokio::spawn(async move { post_assess(&stack, "http://bookstore-b.test/").await })
        })
        .collect();
    let mut answers = Vec::new();
    for t in tasks {
        answers.push(t.await.map_err(|e| e.to_string())??);
    }
    ensure!(answers[0].criteria == answers[1].criteria, "concurrent answers differ");
    let calls = concurrent.mock.call_count(Tier::Assessment);
    ensure!(calls == 1, "concurrent: {calls} assessment calls");
    Ok("sequential pair: 1 model call; concurrent pair: 1 model call".into())
}

const DOMAINS: [&str; 3] = ["a.test", "b.test", "c.test"];
const CRITERIA: [(&str, u8); 3] = [("Transparency", 3), ("Consent", 2), ("Security", 4)];

fn scope(i: usize) -> ChatScope {
    match i {
        0 => ChatScope::General,
        n => ChatScope::criterion(CRITERIA[n - 1].0),
    }
}

fn chat_world(seed: u64, failure_percent: u32) -> (Conversation, Arc<Store>) {
    let store = Arc::new(Store::in_memory().unwrap());
    for d in DOMAINS {
        common::seed_domain(&store, d, &CRITERIA);
    }
    let gateway = Arc::new(LlmGateway::new(
        Arc::new(ChaosProvider::new(seed, failure_percent)),
        GatewayConfig::default(),
    ));
    (Conversation::new(store.clone(), gateway), store)
}

async fn suggestion_contract() -> Outcome {
    let mut suggest_calls = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (chat, _) = chat_world(seed, 20);
        for _ in 0..rng.gen_range(5..25) {
            let (d, s) = (DOMAINS[rng.gen_range(0..3)], scope(rng.gen_range(0..4)));
            if rng.gen_bool(0.5) {
                let q = QUESTION_POOL[rng.gen_range(0..QUESTION_POOL.len())];
                let _ = chat.ask(d, &s, q, UserSettings::default()).await;
                continue;
            }
            let got = chat.suggest(d, &s).await.map_err(|e| format!("seed {seed}: {e}"))?;
            suggest_calls += 1;
            let keys: HashSet<String> = got.iter().map(|q| question_key(q)).collect();
            ensure!(got.len() == 3 && keys.len() == 3, "seed {seed}: {got:?}");
            let asked = chat.thread(d, &s).map_err(|e| e.to_string())?.asked_questions();
            let repeated: Vec<&String> = asked.iter().filter(|q| keys.contains(&question_key(q))).collect();
            ensure!(repeated.is_empty(), "seed {seed}: repeats {repeated:?}");
        }
    }

    let mut pairs = 0;
    for (i, from) in DOMAINS.iter().enumerate() {
        for (j, to) in DOMAINS.iter().enumerate() {
            if i == j {
                continue;
            }
            for s in 0..4 {
                let (chat, _) = chat_world(0, 0);
                let s = scope(s);
                let q = format!("What does {from} do with my {}?", s.key());
                chat.ask(from, &s, &q, UserSettings::default())
                    .await
                    .map_err(|e| e.to_string())?;
                let got = chat.suggest(to, &s).await.map_err(|e| e.to_string())?;
                ensure!(got.first() == Some(&q), "{from} -> {to} ({}): {got:?}", s.key());
            }
            pairs += 1;
        }
    }
    Ok(format!(
        "200 sequences, {suggest_calls} suggestion sets valid; carryover held for {pairs}/6 domain pairs"
    ))
}

/// Both directive strings are swapped for fixed markers; the rest must match
/// the default rendering byte for byte.
fn masked(prompt: &str, settings: UserSettings) -> String {
    prompt
        .replacen(settings.complexity.directive(), "<complexity>", 1)
        .replacen(settings.length.directive(), "<length>", 1)
}

async fn settings_propagation() -> Outcome {
    let store = Arc::new(Store::in_memory().unwrap());
    common::seed_domain(&store, "shop.test", &CRITERIA);
    let mock = Arc::new(MockProvider::new().with_default_reply("An answer."));
    let chat = Conversation::new(store.clone(), common::gateway(&mock));
    let mut prompts = Vec::new();
    for settings in UserSettings::all() {
        chat.clear_history("shop.test").map_err(|e| e.to_string())?;
        chat.ask("shop.test", &ChatScope::criterion("Consent"), "Why?", settings)
            .await
            .map_err(|e| e.to_string())?;
        let prompt = mock
            .last_call(Tier::Assessment)
            .ok_or("no chat call")?
            .request
            .system_prompt;
        prompts.push((settings, prompt));
    }
    let baseline = masked(&prompts[0].1, prompts[0].0);
    for (settings, prompt) in &prompts {
        for other in UserSettings::all() {
            let expected = (other.length == settings.length) as usize;
            let found = prompt.matches(other.length.directive()).count();
            ensure!(
                found == expected,
                "{settings:?}: length directive of {other:?} found {found} times"
            );
            let expected = (other.complexity == settings.complexity) as usize;
            let found = prompt.matches(other.complexity.directive()).count();
            ensure!(
                found == expected,
                "{settings:?}: complexity directive of {other:?} found {found} times"
            );
        }
        ensure!(
            masked(prompt, *settings) == baseline,
            "{settings:?}: prompt differs outside the directives"
        );
    }
    let distinct: HashSet<&String> = prompts.iter().map(|(_, p)| p).collect();
    ensure!(distinct.len() == 9, "only {} distinct prompts", distinct.len());
    Ok("9/9 combinations differ only in their two directives".into())
}

async fn bookstore_run() -> Result<String, String> {
    let stack = Stack::new(bookstore_mock()).await;
    let mut assessments = Vec::new();
    for host in [
        "bookstore-a.test",
        "bookstore-b.test",
        "bookstore-c.test",
        "bookstore-d.test",
    ] {
        let reply = post_assess(&stack, &format!("http://{host}/")).await?;
        ensure!(reply.status == "ok", "{host}: {}", reply.status);
        let stored = stack.service.store().get_assessment(host).map_err(|e| e.to_string())?;
        assessments.push(stored.ok_or(format!("{host}: nothing stored"))?);
    }
    Ok(ranking_report(&assessments))
}

async fn bookstore_replay() -> Outcome {
    let first = bookstore_run().await?;
    let second = bookstore_run().await?;
    ensure!(first == second, "rerun differs:\n{first}\n---\n{second}");
    let order: Vec<(&str, &str)> = first
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .map(|l| {
            let mut f = l.split_whitespace().skip(1);
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    ensure!(
        order
            == [
                ("bookstore-d.test", "GREEN"),
                ("bookstore-a.test", "GREEN"),
                ("bookstore-b.test", "YELLOW"),
                ("bookstore-c.test", "RED"),
            ],
        "unexpected ranking {order:?}"
    );
    Ok(format!(
        "4 sites ranked, report of {} bytes identical on rerun",
        first.len()
    ))
}
