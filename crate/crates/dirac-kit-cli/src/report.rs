//! Reports: ordered lists of check records with text and JSON emission.

use dirac_kit::grpnum::CheckRecord;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<CheckRecord>,
    /// Wall-clock milliseconds per record, shown in text output only.
    #[serde(skip)]
    pub timing_ms: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

impl Report {
    pub fn push(&mut self, records: Vec<CheckRecord>, elapsed_ms: f64) {
        let share = if records.is_empty() { 0.0 } else { elapsed_ms / records.len() as f64 };
        self.timing_ms.extend(std::iter::repeat(share).take(records.len()));
        self.checks.extend(records);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
        self.timing_ms.extend(other.timing_ms);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.checks.iter().enumerate() {
            let status = if c.pass { "PASS" } else { "FAIL" };
            let ms = self.timing_ms.get(i).copied().unwrap_or(0.0);
            let _ = writeln!(
                out,
                "{status} {}  points={}  max_residual={:.3e}  tolerance={:.1e}  ({ms:.0} ms)",
                c.check, c.points, c.max_residual, c.tolerance
            );
            if let Some(w) = &c.witness {
                let _ = writeln!(out, "    witness: {w}");
            }
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let _ = writeln!(out, "{} checks, {} passed, {} failed", self.checks.len(), self.checks.len() - failed, failed);
        out
    }

    pub fn emit(&self, format: Format) -> String {
        match format {
            Format::Text => self.to_text(),
            Format::Json => self.to_json(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_json() {
        let r = Report::default();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v, serde_json::json!({"checks": []}));
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn failing_check_has_witness_block() {
        let mut r = Report::default();
        r.push(vec![CheckRecord::from_residuals("a", &[0.0], 1e-9), CheckRecord::from_residuals("b", &[1.0], 1e-9)], 2.0);
        let t = r.to_text();
        assert!(t.contains("PASS a"));
        assert!(t.contains("FAIL b"));
        assert!(t.contains("    witness: sample 0"));
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn json_round_trip() {
        let mut r = Report::default();
        r.push(vec![CheckRecord::exact("x", 3, Some("bad".into())), CheckRecord::from_residuals("y", &[f64::INFINITY], 1.0)], 0.0);
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back.checks, r.checks);
    }
}
