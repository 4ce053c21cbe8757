//! Prompt templates, rendered byte-exactly.
//!
//! Four templates cover the whole harness: the yes/no retrieval-decision
//! prompt, its time-and-demonstrations variant, and the two answer prompts
//! (closed book, and with retrieved context). Golden-file tests pin every
//! rendering; change nothing here without updating those files.

use crate::corpus::{DemoExample, DemoLabel, Document};
use crate::decision::TaAreConfig;

const DECISION_INSTRUCTION: &str = "Given a question, determine whether you need to retrieve external resources, such as real-time search engines, Wikipedia, or databases, to answer the question correctly. Only answer \"[Yes]\" or \"[No]\".";

const CLOSED_BOOK_INSTRUCTION: &str = "Please use your own knowledge to answer the questions. Only include the answer in your response and try to be concise. If you do not know the answer, just say \"I don't know\".";

const CONTEXT_INSTRUCTION: &str = "Please answer the question based on the provided context. Only include the answer in your response and try to be concise. If you do not know the answer, just say \"I don't know\".";

fn question_block(question: &str) -> String {
    format!("Question: {question}\nAnswer:")
}

/// The plain yes/no retrieval-decision prompt.
pub fn render_vanilla_prompt(question: &str) -> String {
    format!("{DECISION_INSTRUCTION}\n\n{}", question_block(question))
}

/// The time-aware decision prompt: optional date sentence, then the
/// instruction, then the demonstration block (omitted entirely when there
/// are no demonstrations), then the question.
///
/// Demonstrations render as `Question: …` / `Answer: [Yes]` pairs separated
/// by blank lines, in the order given.
pub fn render_ta_are_prompt(
    question: &str,
    config: &TaAreConfig,
    demos: &[(DemoExample, DemoLabel)],
) -> String {
    let mut prompt = String::new();
    if config.include_date {
        prompt.push_str(&format!("Today is {}. ", config.date.format("%Y-%m-%d")));
    }
    prompt.push_str(DECISION_INSTRUCTION);
    prompt.push_str("\n\n");
    if !demos.is_empty() {
        let pairs: Vec<String> = demos
            .iter()
            .map(|(demo, label)| {
                format!("Question: {}\nAnswer: {}", demo.question, answer_tag(*label))
            })
            .collect();
        prompt.push_str("Here are some examples:\n");
        prompt.push_str(&pairs.join("\n\n"));
        prompt.push_str("\n\n");
    }
    prompt.push_str(&question_block(question));
    prompt
}

fn answer_tag(label: DemoLabel) -> &'static str {
    match label {
        DemoLabel::Yes => "[Yes]",
        DemoLabel::No => "[No]",
    }
}

/// Answer prompt used when retrieval was not performed (also the closed-book
/// judge prompt in dataset filtering).
pub fn render_closed_book_prompt(question: &str) -> String {
    format!("{CLOSED_BOOK_INSTRUCTION}\n\n{}", question_block(question))
}

/// Answer prompt with retrieved documents concatenated in rank order under
/// the paragraph slot, separated by blank lines. `max_chars`, when set, caps
/// the total paragraph length.
pub fn render_context_prompt(
    question: &str,
    documents: &[Document],
    max_chars: Option<usize>,
) -> String {
    let mut paragraph = documents
        .iter()
        .map(|d| d.text.as_str())
        .collect::<Vec<_>>()
        .join("\n\n");
    if let Some(limit) = max_chars {
        if paragraph.len() > limit {
            let mut end = limit;
            while !paragraph.is_char_boundary(end) {
                end -= 1;
            }
            paragraph.truncate(end);
        }
    }
    format!(
        "{CONTEXT_INSTRUCTION}\n\nParagraph:\n{paragraph}\n\n{}",
        question_block(question)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn demo(question: &str, label: DemoLabel) -> (DemoExample, DemoLabel) {
        (
            DemoExample {
                question: question.into(),
                label,
                embedding: None,
            },
            label,
        )
    }

    fn config(include_date: bool) -> TaAreConfig {
        TaAreConfig {
            include_date,
            date: NaiveDate::from_ymd_opt(2024, 1, 12).unwrap(),
            ..TaAreConfig::default()
        }
    }

    #[test]
    fn vanilla_prompt_shape() {
        let prompt = render_vanilla_prompt("Q?");
        assert!(prompt.starts_with(
            "Given a question, determine whether you need to retrieve external resources"
        ));
        assert!(prompt.ends_with("Question: Q?\nAnswer:"));
    }

    #[test]
    fn vanilla_prompt_substitutes_verbatim() {
        let prompt = render_vanilla_prompt("Is the marker [Yes] special?");
        assert!(prompt.contains("Question: Is the marker [Yes] special?\nAnswer:"));
    }

    #[test]
    fn ta_are_without_date_or_demos_equals_vanilla() {
        let prompt = render_ta_are_prompt("Q?", &config(false), &[]);
        assert_eq!(prompt, render_vanilla_prompt("Q?"));
    }

    #[test]
    fn ta_are_date_sentence_uses_iso_format() {
        let prompt = render_ta_are_prompt("Q?", &config(true), &[]);
        assert!(prompt.starts_with("Today is 2024-01-12. Given a question,"));
    }

    #[test]
    fn ta_are_demo_block_layout() {
        let demos = vec![
            demo("Who holds the record?", DemoLabel::Yes),
            demo("What is the capital of France?", DemoLabel::No),
        ];
        let prompt = render_ta_are_prompt("Q?", &config(false), &demos);
        assert!(prompt.contains(
            "Here are some examples:\nQuestion: Who holds the record?\nAnswer: [Yes]\n\nQuestion: What is the capital of France?\nAnswer: [No]\n\nQuestion: Q?\nAnswer:"
        ));
    }

    #[test]
    fn closed_book_prompt_shape() {
        let prompt = render_closed_book_prompt("Q?");
        assert!(prompt.starts_with("Please use your own knowledge"));
        assert!(prompt.ends_with("Question: Q?\nAnswer:"));
    }

    #[test]
    fn context_prompt_joins_documents_in_order() {
        let docs: Vec<Document> = (1..=3)
            .map(|rank| Document {
                id: format!("d{rank}"),
                title: None,
                text: format!("passage {rank}"),
                rank,
            })
            .collect();
        let prompt = render_context_prompt("Q?", &docs, None);
        assert!(prompt.contains("Paragraph:\npassage 1\n\npassage 2\n\npassage 3\n\nQuestion: Q?"));
    }

    #[test]
    fn context_prompt_respects_char_cap() {
        let docs = vec![Document {
            id: "d1".into(),
            title: None,
            text: "x".repeat(500),
            rank: 1,
        }];
        let prompt = render_context_prompt("Q?", &docs, Some(100));
        assert!(prompt.contains(&"x".repeat(100)));
        assert!(!prompt.contains(&"x".repeat(101)));
    }

    proptest! {
        #[test]
        fn prompts_are_injective_in_the_question_slot(
            a in "[a-zA-Z0-9 ?]{1,40}",
            b in "[a-zA-Z0-9 ?]{1,40}",
        ) {
            prop_assume!(a != b);
            prop_assert_ne!(render_vanilla_prompt(&a), render_vanilla_prompt(&b));
            prop_assert_ne!(render_closed_book_prompt(&a), render_closed_book_prompt(&b));
        }
    }
}
