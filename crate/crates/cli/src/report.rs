use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lawlab_core::evaluation::{aggregate_runs, CellSummary, EvaluationReport};
use lawlab_core::forge::{shipped_catalog, Tier};
use lawlab_core::system::Setting;
use serde::{Deserialize, Serialize};

use crate::runner::{read_records, RunRecord, RunStatus};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub setting: Setting,
    pub tier: Tier,
    /// `None` when no record falls in the cell.
    pub summary: Option<CellSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub domain: String,
    pub summary: Option<CellSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub errors: usize,
    /// Lines of the results file that failed to parse.
    pub corrupt_lines: usize,
    pub overall: Option<CellSummary>,
    /// Setting-major, tier-minor.
    pub grid: Vec<GridCell>,
    /// Catalog order.
    pub domains: Vec<DomainRow>,
    pub mean_rounds: Option<f64>,
    pub mean_transcript_chars: Option<f64>,
}

/// Report a record contributes: errored runs score as missing.
pub fn effective_report(record: &RunRecord) -> EvaluationReport {
    match record.status {
        RunStatus::Ok => record.evaluation.clone(),
        RunStatus::Error => EvaluationReport::missing(),
    }
}

/// Groups records by repeat and aggregates; each repeat is one run.
pub fn aggregate_records<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> Option<CellSummary> {
    let mut by_repeat: BTreeMap<usize, Vec<EvaluationReport>> = BTreeMap::new();
    for r in records {
        by_repeat.entry(r.repeat).or_default().push(effective_report(r));
    }
    let runs: Vec<Vec<EvaluationReport>> = by_repeat.into_values().collect();
    aggregate_runs(&runs).ok()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(records: &[RunRecord], corrupt_lines: usize) -> Summary {
    let grid = Setting::ALL
        .iter()
        .flat_map(|&setting| {
            Tier::ALL.iter().map(move |&tier| GridCell {
                setting,
                tier,
                summary: aggregate_records(records.iter().filter(|r| r.setting == setting && r.tier == tier)),
            })
        })
        .collect();
    let domains = shipped_catalog()
        .laws
        .iter()
        .map(|law| DomainRow {
            domain: law.domain.clone(),
            summary: aggregate_records(records.iter().filter(|r| r.domain == law.domain)),
        })
        .collect();
    Summary {
        records: records.len(),
        errors: records.iter().filter(|r| r.status == RunStatus::Error).count(),
        corrupt_lines,
        overall: aggregate_records(records),
        grid,
        domains,
        mean_rounds: mean(records.iter().map(|r| r.rounds_used as f64)),
        mean_transcript_chars: mean(records.iter().map(|r| r.transcript_chars as f64)),
    }
}

fn sa(cell: &Option<CellSummary>) -> String {
    match cell {
        Some(c) => format!("{:.1} ± {:.1}", c.sa_mean, c.sa_std),
        None => "-".into(),
    }
}

fn rmsle(cell: &Option<CellSummary>) -> String {
    match cell.as_ref().and_then(|c| c.rmsle_mean.zip(c.rmsle_std)) {
        Some((m, s)) => format!("{m:.4} ± {s:.4}"),
        None => "-".into(),
    }
}

impl Summary {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "records: {}  errors: {}  corrupt lines: {}",
            self.records, self.errors, self.corrupt_lines
        );
        let _ = writeln!(
            out,
            "overall SA: {}  RMSLE: {}",
            sa(&self.overall),
            rmsle(&self.overall)
        );
        if let (Some(r), Some(c)) = (self.mean_rounds, self.mean_transcript_chars) {
            let _ = writeln!(out, "mean rounds: {r:.2}  mean transcript characters: {c:.0}");
        }
        let _ = writeln!(out, "\nsymbolic accuracy (%)");
        let _ = write!(out, "{:<10}", "");
        for tier in Tier::ALL {
            let _ = write!(out, "{:>16}", tier.as_str());
        }
        out.push('\n');
        for row in self.grid.chunks(Tier::ALL.len()) {
            let _ = write!(out, "{:<10}", row[0].setting.as_str());
            for cell in row {
                let _ = write!(out, "{:>16}", sa(&cell.summary));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "\n{:<24}{:>16}{:>22}", "domain", "SA", "RMSLE");
        for row in &self.domains {
            let _ = writeln!(
                out,
                "{:<24}{:>16}{:>22}",
                row.domain,
                sa(&row.summary),
                rmsle(&row.summary)
            );
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("group,key,runs,reports,sa_mean,sa_std,rmsle_mean,rmsle_std,rmsle_infinite\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut line = |group: &str, key: String, s: &Option<CellSummary>| {
            if let Some(c) = s {
                let _ = writeln!(
                    out,
                    "{group},{key},{},{},{},{},{},{},{}",
                    c.runs,
                    c.reports,
                    c.sa_mean,
                    c.sa_std,
                    opt(c.rmsle_mean),
                    opt(c.rmsle_std),
                    c.rmsle_infinite
                );
            } else {
                let _ = writeln!(out, "{group},{key},0,0,,,,,0");
            }
        };
        line("overall", "all".into(), &self.overall);
        for cell in &self.grid {
            line(
                "cell",
                format!("{}/{}", cell.setting.as_str(), cell.tier.as_str()),
                &cell.summary,
            );
        }
        for row in &self.domains {
            line("domain", row.domain.clone(), &row.summary);
        }
        out
    }
}

/// Summarizes a results directory and writes `summary.{json,txt,csv}` into it.
pub fn render_report(dir: &Path) -> Result<Summary, HarnessError> {
    let (records, corrupt) = read_records(dir)?;
    let summary = summarize(&records, corrupt);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    for (name, text) in [
        ("summary.json", json),
        ("summary.txt", summary.render_text()),
        ("summary.csv", summary.render_csv()),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(summary)
}
