//! Deterministic rendering of check results, as plain text or JSON.

use serde::Serialize;

use veil_core::anonymity::CheckReport;
use veil_core::ratio::render_rational;
use veil_core::system::Point;

#[derive(Debug, Serialize)]
pub struct ReportEntry {
    pub index: usize,
    pub source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<&'static str>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compiled: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<TableRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize, PartialEq, Eq, Clone, Copy)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Serialize)]
pub struct WitnessRecord {
    pub run: String,
    pub time: usize,
}

#[derive(Debug, Serialize)]
pub struct TableRow {
    pub agent: String,
    pub possible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
}

impl ReportEntry {
    pub fn from_check(
        index: usize,
        source: &'static str,
        kind: Option<&'static str>,
        report: &CheckReport,
    ) -> Self {
        ReportEntry {
            index,
            source,
            kind,
            status: if report.holds {
                Status::Pass
            } else {
                Status::Fail
            },
            compiled: Some(report.compiled.to_string()),
            witness: report.witness.as_ref().map(WitnessRecord::from_point),
            flags: report.diagnostics.flags.clone(),
            table: report
                .diagnostics
                .table
                .iter()
                .map(|row| TableRow {
                    agent: row.agent.to_string(),
                    possible: row.possible,
                    posterior: row.posterior.as_ref().map(render_rational),
                })
                .collect(),
            error: None,
        }
    }

    pub fn from_error(
        index: usize,
        source: &'static str,
        kind: Option<&'static str>,
        compiled: Option<String>,
        message: String,
    ) -> Self {
        ReportEntry {
            index,
            source,
            kind,
            status: Status::Error,
            compiled,
            witness: None,
            flags: Vec::new(),
            table: Vec::new(),
            error: Some(message),
        }
    }
}

impl WitnessRecord {
    pub fn from_point(p: &Point) -> Self {
        WitnessRecord {
            run: p.run.to_string(),
            time: p.time,
        }
    }
}

impl Report {
    pub fn new(entries: Vec<ReportEntry>) -> Self {
        let passed = entries.iter().filter(|e| e.status == Status::Pass).count();
        let failed = entries.iter().filter(|e| e.status == Status::Fail).count();
        let errors = entries.iter().filter(|e| e.status == Status::Error).count();
        Report {
            entries,
            passed,
            failed,
            errors,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.errors > 0 {
            3
        } else if self.failed > 0 {
            1
        } else {
            0
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            let status = match entry.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Error => "ERROR",
            };
            let label = match entry.kind {
                Some(kind) => format!("query {kind}"),
                None => entry.source.to_string(),
            };
            out.push_str(&format!("entry {}: {status} ({label})\n", entry.index));
            if let Some(compiled) = &entry.compiled {
                out.push_str(&format!("  compiled: {compiled}\n"));
            }
            if let Some(witness) = &entry.witness {
                out.push_str(&format!("  witness: ({}, {})\n", witness.run, witness.time));
            }
            for flag in &entry.flags {
                out.push_str(&format!("  note: {flag}\n"));
            }
            for row in &entry.table {
                let posterior = row.posterior.as_deref().unwrap_or("-");
                out.push_str(&format!(
                    "  agent {}: possible={} posterior={}\n",
                    row.agent, row.possible, posterior
                ));
            }
            if let Some(error) = &entry.error {
                out.push_str(&format!("  error: {error}\n"));
            }
        }
        out.push_str(&format!(
            "result: {} passed, {} failed, {} errors\n",
            self.passed, self.failed, self.errors
        ));
        out
    }

    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}
