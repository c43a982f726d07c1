//! Tab-separated report rows:
//! one row per (model, dataset) with unweighted and usage-weighted columns.

use std::fmt::Write as _;

use super::MetricPair;

pub const TSV_COLUMNS: [&str; 12] = [
    "model",
    "dataset",
    "jaccard",
    "false_neg",
    "false_pos",
    "intersection",
    "w_jaccard",
    "w_false_neg",
    "w_false_pos",
    "w_intersection",
    "n_rows",
    "degenerate",
];

pub fn tsv_header() -> String {
    TSV_COLUMNS.join("\t")
}

pub fn tsv_row(model: &str, dataset: &str, m: &MetricPair) -> String {
    let u = &m.unweighted;
    let w = &m.weighted;
    let mut s = format!("{model}\t{dataset}");
    for v in [
        u.jaccard,
        u.false_neg,
        u.false_pos,
        u.intersection,
        w.jaccard,
        w.false_neg,
        w.false_pos,
        w.intersection,
    ] {
        write!(s, "\t{v:.6}").unwrap();
    }
    write!(s, "\t{}\t{}", u.n_rows, u.degenerate_count).unwrap();
    s
}

/// Header plus rows, newline-terminated.
pub fn tsv_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, &'a MetricPair)>) -> String {
    let mut out = tsv_header();
    out.push('\n');
    for (model, dataset, m) in rows {
        out.push_str(&tsv_row(model, dataset, m));
        out.push('\n');
    }
    out
}
