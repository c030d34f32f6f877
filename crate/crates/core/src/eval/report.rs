//! Plain-text summary tables.

use std::fmt::Write;

use super::cv::{CvSummary, WeightResult};
use super::recall::{RecallRow, SweepTable};

/// `**` below 1e-100, `*` below 1e-10, otherwise `ns`.
pub fn significance(p: f64) -> &'static str {
    if p < 1e-100 {
        "**"
    } else if p < 1e-10 {
        "*"
    } else {
        "ns"
    }
}

/// A labelled row of the correlation table.
pub struct CorrelationRow<'a> {
    pub category: &'a str,
    pub approach: String,
    pub mean_rho: f64,
    pub std_rho: Option<f64>,
    pub fisher_p: Option<f64>,
}

impl<'a> CorrelationRow<'a> {
    pub fn from_summary(category: &'a str, approach: impl Into<String>, s: &CvSummary) -> Self {
        Self {
            category,
            approach: approach.into(),
            mean_rho: s.mean_rho,
            std_rho: Some(s.std_rho),
            fisher_p: Some(s.fisher_p),
        }
    }

    pub fn from_weights(category: &'a str, r: &WeightResult) -> Self {
        Self::from_summary(category, r.weights.to_string(), &r.summary)
    }
}

pub fn correlation_table(rows: &[CorrelationRow<'_>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:<22} {:>8} {:>7} {:>9} {:>4}", "Category", "Approach", "Mean rho", "Std", "p_Fisher", "");
    let _ = writeln!(out, "{}", "-".repeat(67));
    for r in rows {
        let std = r.std_rho.map_or("-".to_string(), |s| format!("{s:.3}"));
        let (p, sig) = match r.fisher_p {
            Some(p) => (format!("{p:.2e}"), significance(p)),
            None => ("-".to_string(), ""),
        };
        let _ = writeln!(out, "{:<12} {:<22} {:>8.3} {:>7} {:>9} {:>4}", r.category, r.approach, r.mean_rho, std, p, sig);
    }
    out
}

fn recall_line(out: &mut String, mode: &str, r: &RecallRow) {
    let _ = writeln!(out, "{:<14} {:>6.1} {:>6.1} {:>6.1}", mode, r.r1, r.r5, r.r10);
}

/// Text / Image / best-alpha Fusion rows, followed by the full sweep.
pub fn recall_table(t: &SweepTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:>6} {:>6} {:>6}", "Mode", "R@1", "R@5", "R@10");
    let _ = writeln!(out, "{}", "-".repeat(35));
    recall_line(&mut out, "Text", &t.text);
    recall_line(&mut out, "Image", &t.image);
    if let Some(best) = t.fusion_at(t.best_alpha.0) {
        recall_line(&mut out, &format!("Fusion ({:.1})", t.best_alpha.0), best);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "alpha sweep ({:?} normalization)", t.normalization);
    for (a, r) in &t.fusion {
        recall_line(&mut out, &format!("{a:.1}"), r);
    }
    out
}
