//! Text renderings: soft-pattern tables and accuracy/size tradeoff CSV.

use std::fmt::Write as _;

use rrnn_core::phrases::{Annotation, PhraseMatch, WfsaPhrases};
use serde::{Deserialize, Serialize};

pub const SELF_LOOP_MARK: &str = "_SL";
pub const ELLIPSIS: &str = "...";
pub const END_OF_DOC: &str = "</s>";
/// Placeholder for a transition the path never took.
pub const EMPTY_CELL: &str = "-";

/// Self-loop tokens shown inline; more than this many collapse to an ellipsis.
const INLINE_SELF_LOOPS: usize = 2;

fn self_loops(out: &mut Vec<String>, tokens: &[&str]) {
    if tokens.len() > INLINE_SELF_LOOPS {
        out.push(ELLIPSIS.to_string());
    } else {
        out.extend(tokens.iter().map(|t| format!("{t}{SELF_LOOP_MARK}")));
    }
}

/// One cell per main transition `1..=k`. Cell `i` holds the self-loops
/// taken at state `i - 1` followed by the token read by transition `i`;
/// self-loops at the final state and the end marker go into the last
/// cell the path reached.
pub fn phrase_cells(m: &PhraseMatch, doc: &[String], k: usize) -> Vec<String> {
    let mut pending: Vec<&str> = Vec::new();
    let mut cells: Vec<Vec<String>> = Vec::with_capacity(k);
    for (t, a) in m.annotations() {
        match a {
            Annotation::SelfLoop(_) => pending.push(&doc[t]),
            Annotation::Main(_) => {
                let mut cell = Vec::new();
                self_loops(&mut cell, &pending);
                pending.clear();
                cell.push(doc[t].clone());
                cells.push(cell);
            }
        }
    }
    if let Some(last) = cells.last_mut() {
        self_loops(last, &pending);
        last.push(END_OF_DOC.to_string());
    }
    let mut out: Vec<String> = cells.into_iter().map(|c| c.join(" ")).collect();
    out.resize(k.max(out.len()), EMPTY_CELL.to_string());
    out
}

struct Row {
    list: &'static str,
    rank: usize,
    doc_id: usize,
    score: f64,
    cells: Vec<String>,
}

fn rows(w: &WfsaPhrases, docs: &[Vec<String>], k: usize) -> Vec<Row> {
    let top = w.top.iter().enumerate().map(|(r, m)| ("top", r, m));
    let bottom = w.bottom.iter().enumerate().map(|(r, m)| ("bottom", r, m));
    top.chain(bottom)
        .map(|(list, rank, m)| Row {
            list,
            rank: rank + 1,
            doc_id: m.doc_id,
            score: m.score,
            cells: phrase_cells(m, &docs[m.doc_id], k),
        })
        .collect()
}

/// Aligned plain-text table, one block per WFSA with `lengths[j]` columns.
pub fn render_pattern_table(lengths: &[usize], phrases: &[WfsaPhrases], docs: &[Vec<String>]) -> String {
    let mut out = String::new();
    for w in phrases {
        let k = lengths[w.wfsa];
        let rows = rows(w, docs, k);
        let mut widths: Vec<usize> = (1..=k).map(|i| format!("t{i}").len()).collect();
        for row in &rows {
            for (width, cell) in widths.iter_mut().zip(&row.cells) {
                *width = (*width).max(cell.chars().count());
            }
        }
        writeln!(out, "WFSA {} ({k} transitions)", w.wfsa).unwrap();
        let header: Vec<String> = (1..=k).map(|i| format!("{:<w$}", format!("t{i}"), w = widths[i - 1])).collect();
        writeln!(out, "{:<6} {:>4} {:>12}  {}", "list", "rank", "score", header.join(" | ").trim_end()).unwrap();
        for row in rows {
            let cells: Vec<String> = row
                .cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            writeln!(
                out,
                "{:<6} {:>4} {:>12.6e}  {}",
                row.list,
                row.rank,
                row.score,
                cells.join(" | ").trim_end()
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

/// Tab-separated variant: `wfsa list rank doc_id score t1 .. tk`.
pub fn render_pattern_tsv(lengths: &[usize], phrases: &[WfsaPhrases], docs: &[Vec<String>]) -> String {
    let mut out = String::from("wfsa\tlist\trank\tdoc_id\tscore\tcells\n");
    for w in phrases {
        for row in rows(w, docs, lengths[w.wfsa]) {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:?}\t{}",
                w.wfsa,
                row.list,
                row.rank,
                row.doc_id,
                row.score,
                row.cells.join("\t")
            )
            .unwrap();
        }
    }
    out
}

/// One point on the accuracy/size curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub method: String,
    pub transitions: f64,
    pub transitions_std: f64,
    pub accuracy: f64,
    pub accuracy_std: f64,
}

pub const TRADEOFF_HEADER: &str = "method,transitions,transitions_std,accuracy,accuracy_std";

pub fn emit_tradeoff_csv(points: &[TradeoffPoint]) -> String {
    let mut sorted: Vec<&TradeoffPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.transitions.total_cmp(&b.transitions));
    let mut out = format!("{TRADEOFF_HEADER}\n");
    for p in sorted {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.method, p.transitions, p.transitions_std, p.accuracy, p.accuracy_std
        )
        .unwrap();
    }
    out
}
