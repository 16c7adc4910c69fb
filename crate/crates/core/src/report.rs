//! Leaderboard rendering as CSV, JSON or Markdown. Output depends only on
//! the input, so identical leaderboards render to identical bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::uscore::Leaderboard;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReportError {
    #[error("unsupported report format `{0}` (expected csv, json or md)")]
    UnsupportedFormat(String),
    #[error("markdown report needs at least one entry")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, ReportError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Md),
            other => Err(ReportError::UnsupportedFormat(other.to_string())),
        }
    }
}

pub const TIER_LEGEND: &str = "**** p<0.0001, *** p<0.001, ** p<0.01, * p<0.05, ns not significant, n/a no per-sample data; ▲ better / ▼ worse than baseline";

pub fn emit_report(board: &Leaderboard, format: ReportFormat) -> Result<Vec<u8>, ReportError> {
    match format {
        ReportFormat::Csv => Ok(csv(board)),
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(board).expect("leaderboard serializes");
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Md => md(board),
    }
}

fn has_tiers(board: &Leaderboard) -> bool {
    board.entries.iter().any(|e| !e.tiers.is_empty())
}

fn csv(board: &Leaderboard) -> Vec<u8> {
    let tiers = has_tiers(board);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["rank".to_string(), "model".to_string(), "value".to_string()];
    header.extend(board.units.iter().cloned());
    if tiers {
        header.extend(board.units.iter().map(|u| format!("{u} tier")));
    }
    w.write_record(&header).expect("in-memory write");
    for e in &board.entries {
        let mut row = vec![e.rank.to_string(), e.model.clone(), format!("{:.2}", e.value)];
        for u in &board.units {
            row.push(e.per_dataset.get(u).map(|v| format!("{v:.2}")).unwrap_or_default());
        }
        if tiers {
            for u in &board.units {
                row.push(e.tiers.get(u).map(|t| t.tier.as_str().to_string()).unwrap_or_default());
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("flush")
}

fn md(board: &Leaderboard) -> Result<Vec<u8>, ReportError> {
    if board.entries.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut s = String::new();
    let _ = write!(s, "| Rank | Model |");
    for u in &board.units {
        let _ = write!(s, " {u} |");
    }
    s.push_str(" Avg |\n|---:|:---|");
    for _ in &board.units {
        s.push_str("---:|");
    }
    s.push_str("---:|\n");
    for e in &board.entries {
        let _ = write!(s, "| {} | {} |", e.rank, e.model);
        for u in &board.units {
            match e.per_dataset.get(u) {
                Some(v) => {
                    let _ = write!(s, " {v:.2}");
                    if let Some(t) = e.tiers.get(u) {
                        let _ = write!(s, " {}", t.glyph());
                    }
                    s.push_str(" |");
                }
                None => s.push_str(" – |"),
            }
        }
        let _ = writeln!(s, " {:.2} |", e.value);
    }
    if has_tiers(board) {
        let _ = write!(s, "\n{TIER_LEGEND}\n");
    }
    Ok(s.into_bytes())
}
