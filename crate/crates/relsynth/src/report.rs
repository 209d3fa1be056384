//! Loss traces and evaluation reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use relsynth_core::eval::MetricComparison;
use relsynth_core::{EvalReport, LossRecord};

use crate::error::{Error, Result};

/// CSV with header `epoch,total,reconstruction,kl`, one line per epoch.
pub fn write_loss_trace(records: &[LossRecord], path: &Path) -> Result<()> {
    let mut text = String::from("epoch,total,reconstruction,kl\n");
    for r in records {
        writeln!(text, "{},{},{},{}", r.epoch, r.total, r.reconstruction, r.kl).unwrap();
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pretty-printed JSON of the report.
pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.to_path_buf(),
        line: e.line() as u64,
        column: e.column() as u64,
        message: e.to_string(),
    })
}

fn metric_line(name: &str, m: &MetricComparison) -> String {
    let mc = match m.mc {
        Some(mc) => format!("{mc:.4}"),
        None => format!("undefined ({})", m.note.as_deref().unwrap_or("zero denominator")),
    };
    format!("  {name:<8} real {:.4}  synthetic {:.4}  MC {mc}", m.real, m.synthetic)
}

/// Human-readable summary for the console.
pub fn summary(report: &EvalReport) -> String {
    let mc = &report.model_compatibility;
    let p = &report.privacy;
    let mut s = String::new();
    writeln!(
        s,
        "model compatibility on `{}` (target `{}`, {} train / {} test / {} synthetic rows, seed {})",
        mc.joined_table, mc.target, mc.train_rows, mc.test_rows, mc.synthetic_rows, report.seed
    )
    .unwrap();
    writeln!(s, "{}", metric_line("ROC AUC", &mc.roc_auc)).unwrap();
    writeln!(s, "{}", metric_line("F1", &mc.f1)).unwrap();
    writeln!(
        s,
        "privacy score {:.4} (alpha {:.4}, threshold {}): {}",
        p.score,
        p.alpha,
        p.threshold,
        if p.passed { "PASS" } else { "FAIL" }
    )
    .unwrap();
    s
}
