//! Table rendering for run summaries and cross-run comparisons.
//!
//! Numbers render to one decimal as percentages. Output is deterministic for
//! fixed inputs, so reports can be diffed and golden-tested.

use super::{FlowCounts, RunSummary};
use crate::decision::DecisionPolicy;

/// "0.493" -> "49.3"
pub fn format_pct(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

/// Delta annotation: "(+37.0)" or "(-5.4)".
pub fn format_delta(delta: f64) -> String {
    if delta >= 0.0 {
        format!("(+{:.1})", delta * 100.0)
    } else {
        format!("({:.1})", delta * 100.0)
    }
}

const HEADER: [&str; 8] = [
    "policy",
    "model",
    "n",
    "retrieval",
    "match",
    "macro_p",
    "macro_r",
    "macro_f1",
];
const WIDTHS: [usize; 8] = [18, 30, 6, 14, 14, 8, 8, 8];

fn format_row(cells: &[String; 8]) -> String {
    let mut row = String::new();
    for (i, cell) in cells.iter().enumerate() {
        if i > 0 {
            row.push_str("  ");
        }
        row.push_str(&format!("{:<width$}", cell, width = WIDTHS[i]));
    }
    row.trim_end().to_string()
}

fn header_row() -> String {
    let cells: [String; 8] = HEADER.map(str::to_string);
    format_row(&cells)
}

fn summary_cells(summary: &RunSummary, baseline: Option<&RunSummary>) -> [String; 8] {
    let retrieval = match baseline {
        Some(base) => format!(
            "{} {}",
            format_pct(summary.report.retrieval_accuracy),
            format_delta(summary.report.retrieval_accuracy - base.report.retrieval_accuracy)
        ),
        None => format_pct(summary.report.retrieval_accuracy),
    };
    let matched = match baseline {
        Some(base) => format!(
            "{} {}",
            format_pct(summary.report.match_accuracy),
            format_delta(summary.report.match_accuracy - base.report.match_accuracy)
        ),
        None => format_pct(summary.report.match_accuracy),
    };
    [
        summary.policy.label(),
        summary.model_id.clone(),
        summary.n.to_string(),
        retrieval,
        matched,
        format_pct(summary.report.macro_precision),
        format_pct(summary.report.macro_recall),
        format_pct(summary.report.macro_f1),
    ]
}

/// One-run table.
pub fn render_run_table(summary: &RunSummary) -> String {
    let mut out = header_row();
    out.push('\n');
    out.push_str(&format_row(&summary_cells(summary, None)));
    out.push('\n');
    out
}

/// Side-by-side comparison of several runs, in input order. A time-aware row
/// gets delta annotations against the vanilla row for the same model, when
/// one is present.
pub fn render_comparison(summaries: &[RunSummary]) -> String {
    let mut out = header_row();
    out.push('\n');
    for summary in summaries {
        let baseline = match summary.policy {
            DecisionPolicy::TaAre(_) => summaries.iter().find(|s| {
                s.model_id == summary.model_id && s.policy == DecisionPolicy::VanillaPrompt
            }),
            _ => None,
        };
        out.push_str(&format_row(&summary_cells(summary, baseline)));
        out.push('\n');
    }
    out
}

/// Six fixed rows of (decision, outcome, count), plot-ready.
pub fn render_flow_csv(flow: &FlowCounts) -> String {
    format!(
        "decision,outcome,count\n\
         yes,correct,{}\n\
         yes,incorrect,{}\n\
         yes,idk,{}\n\
         no,correct,{}\n\
         no,incorrect,{}\n\
         no,idk,{}\n",
        flow.yes_correct,
        flow.yes_incorrect,
        flow.yes_idk,
        flow.no_correct,
        flow.no_incorrect,
        flow.no_idk,
    )
}
