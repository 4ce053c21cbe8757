//! Acceptance suite: one test per criterion, each printing a PASS line and
//! enforcing its stated tolerance and time budget. Everything runs offline
//! against scripted backends. Run with `--nocapture` to see the lines.

use arag_core::corpus::{Category, DemoExample, DemoLabel, DemoPool, Document, QuestionRecord, Source};
use arag_core::decision::{
    self, DecisionContext, DecisionPolicy, EmbeddingError, EmbeddingProvider, TaAreConfig,
};
use arag_core::metrics;
use arag_core::modelio::{
    GenerationParams, Matcher, ResponseCache, ScriptEntry, ScriptedClient,
};
use arag_core::pipeline::{self, RunContext, RunOptions};
use arag_core::prompts;
use chrono::NaiveDate;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

// ── shared helpers ─────────────────────────────────────────────────────

struct FixedEmbedder(Vec<f64>);

impl EmbeddingProvider for FixedEmbedder {
    fn dimension(&self) -> usize {
        self.0.len()
    }
    fn embed(&self, _text: &str) -> Result<Vec<f64>, EmbeddingError> {
        Ok(self.0.clone())
    }
}

fn record(
    id: &str,
    source: Source,
    category: Category,
    question: &str,
    gold: &str,
    needs_retrieval: bool,
    docs: u32,
) -> QuestionRecord {
    QuestionRecord {
        id: id.into(),
        source,
        category,
        question: question.into(),
        gold_answers: vec![gold.into()],
        needs_retrieval,
        documents: if docs == 0 {
            None
        } else {
            Some(
                (1..=docs)
                    .map(|rank| Document {
                        id: format!("{id}-d{rank}"),
                        title: None,
                        text: format!("background passage {rank} for {id}"),
                        rank,
                    })
                    .collect(),
            )
        },
    }
}

// ── criterion 1: metric oracle equivalence ─────────────────────────────

/// Independent normalization: regex-based, against the implementation's
/// character-filter route.
mod oracle {
    use regex::Regex;
    use std::sync::OnceLock;

    fn non_word() -> &'static Regex {
        static RE: OnceLock<Regex> = OnceLock::new();
        RE.get_or_init(|| Regex::new(r"[^\p{Alphabetic}\p{N}\s]").unwrap())
    }

    fn article() -> &'static Regex {
        static RE: OnceLock<Regex> = OnceLock::new();
        RE.get_or_init(|| Regex::new(r"\b(a|an|the)\b").unwrap())
    }

    pub fn normalize(s: &str) -> String {
        let lowered = s.to_lowercase();
        let stripped = non_word().replace_all(&lowered, "");
        let no_articles = article().replace_all(&stripped, " ");
        no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    fn tokens(s: &str) -> Vec<String> {
        normalize(s).split_whitespace().map(str::to_string).collect()
    }

    /// Bag intersection via sorted two-pointer walk.
    fn common_count(mut a: Vec<String>, mut b: Vec<String>) -> usize {
        a.sort();
        b.sort();
        let (mut i, mut j, mut common) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        common
    }

    pub fn token_f1(prediction: &str, gold_answers: &[String]) -> f64 {
        let pred = tokens(prediction);
        let mut best = 0.0f64;
        for gold in gold_answers {
            let gold_tokens = tokens(gold);
            if pred.is_empty() || gold_tokens.is_empty() {
                best = best.max(0.0);
                continue;
            }
            let common = common_count(pred.clone(), gold_tokens.clone());
            if common == 0 {
                continue;
            }
            let precision = common as f64 / pred.len() as f64;
            let recall = common as f64 / gold_tokens.len() as f64;
            best = best.max(2.0 * precision * recall / (precision + recall));
        }
        best
    }

    /// Naive O(n*m) substring scan, independent of str::contains.
    fn contains_naive(haystack: &str, needle: &str) -> bool {
        let h: Vec<char> = haystack.chars().collect();
        let n: Vec<char> = needle.chars().collect();
        if n.is_empty() {
            return true;
        }
        if n.len() > h.len() {
            return false;
        }
        (0..=h.len() - n.len()).any(|start| h[start..start + n.len()] == n[..])
    }

    pub fn loose_match(prediction: &str, gold_answers: &[String]) -> bool {
        let pred = normalize(prediction);
        gold_answers
            .iter()
            .any(|gold| contains_naive(&pred, &normalize(gold)))
    }
}

const WORDS: &[&str] = &[
    "fieldfare", "bird", "mean", "girls", "politician", "vancouver", "canada", "a", "an", "the",
    "don't", "rep", "hurd", "texas", "time", "2024", "broadway", "show",
];
const PUNCT: &[&str] = &[",", ".", "!", "?", "\"", "'", ";", ":", "'", "(", ")"];

fn random_phrase(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=8);
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        let mut word = WORDS[rng.gen_range(0..WORDS.len())].to_string();
        if rng.gen_bool(0.3) {
            word = word.to_uppercase();
        }
        if rng.gen_bool(0.25) {
            word = format!("{}{word}", PUNCT[rng.gen_range(0..PUNCT.len())]);
        }
        if rng.gen_bool(0.25) {
            word.push_str(PUNCT[rng.gen_range(0..PUNCT.len())]);
        }
        words.push(word);
    }
    let separator = if rng.gen_bool(0.2) { "  " } else { " " };
    words.join(separator)
}

#[test]
fn criterion_1_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    for case in 0..200 {
        let prediction = random_phrase(&mut rng);
        let gold_count = rng.gen_range(1..=3);
        let golds: Vec<String> = (0..gold_count).map(|_| random_phrase(&mut rng)).collect();

        let implementation = metrics::token_f1(&prediction, &golds).unwrap();
        let reference = oracle::token_f1(&prediction, &golds);
        assert_eq!(
            implementation, reference,
            "case {case}: token_f1 diverged on {prediction:?} vs {golds:?}"
        );

        let implementation = metrics::loose_match(&prediction, &golds).unwrap();
        let reference = oracle::loose_match(&prediction, &golds);
        assert_eq!(
            implementation, reference,
            "case {case}: loose_match diverged on {prediction:?} vs {golds:?}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5s");
    println!("criterion 1 (metric oracle equivalence, 200 cases): PASS");
}

// ── criterion 2: hand-value checks ─────────────────────────────────────

#[test]
fn criterion_2_hand_values() {
    let f1 = metrics::token_f1("fieldfare bird", &["fieldfare".to_string()]).unwrap();
    assert!((f1 - 2.0 / 3.0).abs() < 1e-9, "got {f1}");

    let m = metrics::decision_metrics(&[true, true, false, false], &[true, false, true, false])
        .unwrap();
    assert_eq!(m.accuracy, 0.5);
    assert_eq!(m.macro_f1, 0.5);
    println!("criterion 2 (hand values): PASS");
}

// ── criterion 3: threshold behavior ────────────────────────────────────

#[test]
fn criterion_3_threshold_monotonicity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);

    let n = 1000;
    let mut records = Vec::with_capacity(n);
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let question = format!("score-q-{i:04} does this need retrieval?");
        // Drawn once, fixed by the seed; every score is >= 0.25.
        let score = 0.25 + 0.75 * rng.gen::<f64>();
        entries.push(ScriptEntry::new(Matcher::Exact(question.clone()), "").with_score(score));
        records.push(record(
            &format!("q{i}"),
            Source::Custom,
            Category::LongTail,
            &question,
            "gold",
            true,
            0,
        ));
    }
    let client = ScriptedClient::new(entries);

    let rate = |t: f64| -> usize {
        let ctx = DecisionContext {
            client: &client,
            cache: None,
            model_id: "m",
            params: GenerationParams::default(),
            pool: None,
            embedder: None,
        };
        records
            .iter()
            .filter(|r| {
                decision::decide(&DecisionPolicy::Threshold { t: Some(t) }, r, &ctx)
                    .unwrap()
                    .retrieve
            })
            .count()
    };

    let low = rate(0.25);
    let mid = rate(0.5);
    let high = rate(0.75);
    assert_eq!(low, n, "all scores are >= 0.25, rate at t=0.25 must be 100%");
    assert!(low >= mid && mid >= high, "rates {low} {mid} {high} not non-increasing");
    assert!(
        low > mid && mid > high,
        "rates {low} {mid} {high} do not reproduce the decreasing shape"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 2.0, "took {elapsed:?}, budget 2s");
    println!(
        "criterion 3 (threshold rates {:.1}/{:.1}/{:.1}%): PASS",
        100.0 * low as f64 / n as f64,
        100.0 * mid as f64 / n as f64,
        100.0 * high as f64 / n as f64
    );
}

// ── criterion 4: prompt fidelity against golden files ──────────────────

const QUESTION: &str = "What is Henry Feilden's occupation?";

fn golden_pool() -> DemoPool {
    DemoPool {
        dimension: 2,
        yes_examples: vec![
            DemoExample {
                question: "Who won the 2023 Ballon d'Or award?".into(),
                label: DemoLabel::Yes,
                embedding: Some(vec![1.0, 0.0]),
            },
            DemoExample {
                question: "What is Grace Kelly's occupation?".into(),
                label: DemoLabel::Yes,
                embedding: Some(vec![0.0, 1.0]),
            },
        ],
        no_examples: vec![
            DemoExample {
                question: "What is the capital of France?".into(),
                label: DemoLabel::No,
                embedding: None,
            },
            DemoExample {
                question: "Who wrote the play Romeo and Juliet?".into(),
                label: DemoLabel::No,
                embedding: None,
            },
        ],
    }
}

fn ta_config(include_date: bool, k: usize) -> TaAreConfig {
    TaAreConfig {
        k_yes: k,
        k_no: k,
        include_date,
        date: NaiveDate::from_ymd_opt(2024, 1, 12).unwrap(),
    }
}

fn render_ta(include_date: bool, k: usize) -> String {
    let pool = golden_pool();
    let config = ta_config(include_date, k);
    let embedder = FixedEmbedder(vec![1.0, 0.0]);
    let demos = decision::select_demonstrations(QUESTION, &pool, &config, &embedder).unwrap();
    prompts::render_ta_are_prompt(QUESTION, &config, &demos)
}

#[test]
fn criterion_4_prompt_fidelity() {
    assert_eq!(
        prompts::render_vanilla_prompt(QUESTION),
        include_str!("golden/vanilla.txt")
    );
    assert_eq!(render_ta(true, 2), include_str!("golden/ta_are.txt"));
    assert_eq!(
        prompts::render_closed_book_prompt(QUESTION),
        include_str!("golden/answer_closed_book.txt")
    );
    let docs = vec![
        Document {
            id: "d1".into(),
            title: None,
            text: "Henry Master Feilden was an English Conservative Party politician who sat in the House of Commons from 1869 to 1880.".into(),
            rank: 1,
        },
        Document {
            id: "d2".into(),
            title: None,
            text: "Feilden was elected member of parliament for Blackburn at a by-election in 1869.".into(),
            rank: 2,
        },
    ];
    assert_eq!(
        prompts::render_context_prompt(QUESTION, &docs, None),
        include_str!("golden/answer_with_context.txt")
    );
    println!("criterion 4 (prompt fidelity, 4 golden files): PASS");
}

// ── criterion 5: demonstration selection vs brute force ────────────────

fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn oracle_select(query: &[f64], embeddings: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| (i, oracle_cosine(query, e)))
        .collect();
    scored.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        std::cmp::Ordering::Equal => a.0.cmp(&b.0),
        order => order,
    });
    scored.truncate(k);
    scored.into_iter().map(|(i, _)| i).collect()
}

#[test]
fn criterion_5_selection_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    for case in 0..100 {
        let pool_size = rng.gen_range(3..=50);
        let dim = rng.gen_range(2..=16);
        let mut embeddings: Vec<Vec<f64>> = Vec::with_capacity(pool_size);
        for i in 0..pool_size {
            // A quarter of the entries duplicate an earlier embedding so the
            // index tie rule is exercised.
            if i > 0 && rng.gen_bool(0.25) {
                let j = rng.gen_range(0..i);
                embeddings.push(embeddings[j].clone());
            } else {
                embeddings.push((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
            }
        }
        let query: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k_yes = rng.gen_range(0..=pool_size.min(6));
        let k_no = rng.gen_range(0..=2);

        let pool = DemoPool {
            dimension: dim,
            yes_examples: embeddings
                .iter()
                .enumerate()
                .map(|(i, e)| DemoExample {
                    question: format!("y{i}"),
                    label: DemoLabel::Yes,
                    embedding: Some(e.clone()),
                })
                .collect(),
            no_examples: vec![
                DemoExample {
                    question: "n0".into(),
                    label: DemoLabel::No,
                    embedding: None,
                },
                DemoExample {
                    question: "n1".into(),
                    label: DemoLabel::No,
                    embedding: None,
                },
            ],
        };
        let config = TaAreConfig {
            k_yes,
            k_no,
            include_date: false,
            date: NaiveDate::from_ymd_opt(2024, 1, 12).unwrap(),
        };
        let embedder = FixedEmbedder(query.clone());
        let selected =
            decision::select_demonstrations("query", &pool, &config, &embedder).unwrap();

        let yes_indices: Vec<usize> = selected
            .iter()
            .filter(|(_, label)| *label == DemoLabel::Yes)
            .map(|(demo, _)| demo.question[1..].parse().unwrap())
            .collect();
        let expected = oracle_select(&query, &embeddings, k_yes);
        assert_eq!(yes_indices, expected, "case {case} (k_yes={k_yes}, dim={dim})");

        let no_questions: Vec<&str> = selected
            .iter()
            .filter(|(_, label)| *label == DemoLabel::No)
            .map(|(demo, _)| demo.question.as_str())
            .collect();
        assert_eq!(no_questions, ["n0", "n1"][..k_no]);
    }
    println!("criterion 5 (selection vs brute-force oracle, 100 pools): PASS");
}

// ── criterion 6: filter correctness ────────────────────────────────────

#[test]
fn criterion_6_filter_partition() {
    let candidates: Vec<QuestionRecord> = (0..50)
        .map(|i| {
            record(
                &format!("c{i:02}"),
                Source::Custom,
                Category::LongTail,
                &format!("candidate question c{i:02} please"),
                &format!("gold{i:02} term"),
                true,
                0,
            )
        })
        .collect();

    // Judged records get a rule; every fifth record misses the script and
    // must land in the unjudged bucket.
    let mut entries = Vec::new();
    for (i, candidate) in candidates.iter().enumerate() {
        if i % 5 == 0 {
            continue;
        }
        let prediction = if i % 3 == 0 {
            candidate.gold_answers[0].clone()
        } else {
            "unrelated words".to_string()
        };
        entries.push(ScriptEntry::new(
            Matcher::contains(candidate.question.clone()),
            prediction,
        ));
    }
    let judge_client = ScriptedClient::new(entries);
    let judge = pipeline::JudgeContext {
        client: &judge_client,
        cache: None,
        model_id: "judge".into(),
        params: GenerationParams::default(),
    };

    let outcome = pipeline::filter_needs_retrieval(&candidates, &judge);

    // Partition covers the input, pairwise disjoint.
    let mut all_ids: Vec<&str> = outcome
        .kept
        .iter()
        .map(|r| r.id.as_str())
        .chain(outcome.discarded.iter().map(|d| d.record.id.as_str()))
        .chain(outcome.unjudged.iter().map(|u| u.record.id.as_str()))
        .collect();
    all_ids.sort();
    let mut expected_ids: Vec<String> = (0..50).map(|i| format!("c{i:02}")).collect();
    expected_ids.sort();
    assert_eq!(all_ids.len(), 50);
    assert_eq!(all_ids, expected_ids.iter().map(String::as_str).collect::<Vec<_>>());

    // Kept iff the scripted prediction scores exactly zero F1.
    for (i, candidate) in candidates.iter().enumerate() {
        let id = candidate.id.as_str();
        if i % 5 == 0 {
            assert!(outcome.unjudged.iter().any(|u| u.record.id == id));
        } else if i % 3 == 0 {
            let discarded = outcome
                .discarded
                .iter()
                .find(|d| d.record.id == id)
                .unwrap_or_else(|| panic!("{id} should be discarded"));
            assert!(discarded.f1 > 0.0);
            let recomputed = metrics::token_f1(
                &discarded.judge_prediction,
                &candidate.gold_answers,
            )
            .unwrap();
            assert_eq!(recomputed, discarded.f1);
        } else {
            assert!(outcome.kept.iter().any(|r| r.id == id), "{id} should be kept");
        }
    }
    assert_eq!(outcome.unjudged.len(), 10);
    assert_eq!(outcome.discarded.len(), 13);
    assert_eq!(outcome.kept.len(), 27);
    println!("criterion 6 (filter partition on 50 candidates): PASS");
}

// ── criteria 7 and 8: end-to-end offline run, cache discipline ─────────

fn fixture_300() -> Vec<QuestionRecord> {
    let mut records = Vec::with_capacity(300);
    for i in 0..150 {
        records.push(record(
            &format!("q{i:03}"),
            Source::Realtimeqa,
            Category::NewWorld,
            &format!("nw-q-{i:03} what changed this week?"),
            &format!("answer{i:03}"),
            i < 120,
            5,
        ));
    }
    for i in 150..300 {
        records.push(record(
            &format!("q{i:03}"),
            Source::Popqa,
            Category::LongTail,
            &format!("lt-q-{i:03} what is the rare occupation?"),
            &format!("answer{i:03}"),
            i < 210,
            0,
        ));
    }
    records
}

fn fixture_script() -> Vec<ScriptEntry> {
    let mut entries = vec![
        ScriptEntry::new(
            Matcher::Contains(vec!["determine whether".into(), "nw-q-".into()]),
            "[Yes]",
        ),
        ScriptEntry::new(
            Matcher::Contains(vec!["determine whether".into(), "lt-q-".into()]),
            "[No]",
        ),
    ];
    for i in 0..300 {
        let marker = if i < 150 {
            format!("nw-q-{i:03} ")
        } else {
            format!("lt-q-{i:03} ")
        };
        let text = match i % 3 {
            0 => format!("the answer{i:03} indeed"),
            1 => "I don't know".to_string(),
            _ => "something else entirely".to_string(),
        };
        entries.push(ScriptEntry::new(Matcher::contains(marker), text));
    }
    entries
}

fn run_fixture(
    client: &ScriptedClient,
    cache: Option<&ResponseCache>,
    workers: usize,
) -> pipeline::RunResult {
    let dataset = fixture_300();
    let ctx = RunContext {
        client,
        cache,
        model_id: "scripted-fixture".into(),
        params: GenerationParams::default(),
        pool: None,
        embedder: None,
        fallback_retriever: None,
        options: RunOptions {
            k_docs: 5,
            workers,
            max_doc_chars: None,
            timestamp: Some("2024-01-12T00:00:00Z".into()),
        },
    };
    pipeline::run_evaluation(&dataset, &DecisionPolicy::VanillaPrompt, &ctx).unwrap()
}

fn artifact_bytes(dir: &std::path::Path) -> Vec<Vec<u8>> {
    ["records.jsonl", "summary.json", "flow.csv"]
        .iter()
        .map(|name| std::fs::read(dir.join(name)).unwrap())
        .collect()
}

#[test]
fn criterion_7_end_to_end_offline_run() {
    let started = Instant::now();

    let mut artifacts = Vec::new();
    let mut results = Vec::new();
    for workers in [1usize, 4, 16] {
        let client = ScriptedClient::new(fixture_script());
        let result = run_fixture(&client, None, workers);
        let dir = tempfile::tempdir().unwrap();
        pipeline::write_run_artifact(&result, dir.path(), None).unwrap();
        artifacts.push(artifact_bytes(dir.path()));
        results.push(result);
    }

    let result = &results[0];
    let report = &result.report;
    // Hand-computed: 150 yes-decisions (new world), 150 no (long tail);
    // labels 180 true / 120 false; outcomes cycle correct/idk/incorrect.
    assert!((report.retrieval_accuracy - 2.0 / 3.0).abs() < 1e-12);
    assert!((report.match_accuracy - 1.0 / 3.0).abs() < 1e-12);
    assert!((report.macro_precision - 0.7).abs() < 1e-12);
    assert!((report.macro_recall - 17.0 / 24.0).abs() < 1e-12);
    assert!((report.macro_f1 - 23.0 / 33.0).abs() < 1e-12);
    assert_eq!(report.n, 300);

    assert_eq!(result.decision_counts.true_yes, 120);
    assert_eq!(result.decision_counts.false_yes, 30);
    assert_eq!(result.decision_counts.false_no, 60);
    assert_eq!(result.decision_counts.true_no, 90);

    let flow = result.flow;
    assert_eq!(
        (flow.yes_correct, flow.yes_idk, flow.yes_incorrect),
        (50, 50, 50)
    );
    assert_eq!(
        (flow.no_correct, flow.no_idk, flow.no_incorrect),
        (50, 50, 50)
    );
    assert_eq!(flow.total(), 300);
    assert_eq!(result.diagnostics.unparseable_decisions, 0);
    assert_eq!(result.diagnostics.retrieval_misses, 0);

    // Byte-identical artifacts for workers 1, 4, 16.
    assert_eq!(artifacts[0], artifacts[1]);
    assert_eq!(artifacts[0], artifacts[2]);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30s");
    println!(
        "criterion 7 (300-record offline run, workers 1/4/16 byte-identical, {:.2}s): PASS",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_8_cache_discipline() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path().join("cache.jsonl")).unwrap();
    let client = ScriptedClient::new(fixture_script());

    let first = run_fixture(&client, Some(&cache), 4);
    let calls_after_first = client.calls();
    assert_eq!(calls_after_first, 600, "one decision + one answer per record");

    let second = run_fixture(&client, Some(&cache), 4);
    assert_eq!(
        client.calls(),
        calls_after_first,
        "second pass must touch the client zero times"
    );
    assert_eq!(first, second);
    println!("criterion 8 (cache discipline, zero client calls on rerun): PASS");
}

// ── criterion 9: ablation grid ─────────────────────────────────────────

#[test]
fn criterion_9_ablation_grid() {
    let goldens = [
        include_str!("golden/vanilla.txt"),
        include_str!("golden/ablation_date_only.txt"),
        include_str!("golden/ablation_examples_only.txt"),
        include_str!("golden/ta_are.txt"),
    ];
    let configs = [
        ta_config(false, 0),
        ta_config(true, 0),
        ta_config(false, 2),
        ta_config(true, 2),
    ];

    let mut rendered = Vec::new();
    for (config, golden) in configs.iter().zip(goldens) {
        let prompt = render_ta(config.include_date, config.k_yes);
        assert_eq!(prompt, golden, "config {config:?}");
        rendered.push(prompt);
    }
    for i in 0..rendered.len() {
        for j in (i + 1)..rendered.len() {
            assert_ne!(rendered[i], rendered[j], "configs {i} and {j} must differ");
        }
    }

    // The grid is runnable end to end: each config yields a decision.
    let pool = golden_pool();
    let embedder = FixedEmbedder(vec![1.0, 0.0]);
    let client = ScriptedClient::new(vec![]).with_default("[Yes]", None);
    for config in configs {
        let ctx = DecisionContext {
            client: &client,
            cache: None,
            model_id: "m",
            params: GenerationParams::default(),
            pool: Some(&pool),
            embedder: Some(&embedder),
        };
        let question = record(
            "q1",
            Source::Popqa,
            Category::LongTail,
            QUESTION,
            "politician",
            true,
            0,
        );
        let decision =
            decision::decide(&DecisionPolicy::TaAre(config), &question, &ctx).unwrap();
        assert!(decision.retrieve);
    }
    println!("criterion 9 (ablation grid, 4 configs, distinct goldens): PASS");
}
