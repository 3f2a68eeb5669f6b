//! The run report and its two renderings. Timing is deliberately absent so
//! identical configs give byte-identical reports.

use std::fmt::Write;

use fedwhit::report::Check;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    fn text(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Error => "ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckOut {
    pub name: String,
    pub passed: bool,
    pub residuals: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl From<Check> for CheckOut {
    fn from(c: Check) -> Self {
        CheckOut { name: c.name, passed: c.passed, residuals: c.residuals, note: c.note }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Emitted {
    pub label: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskReport {
    pub index: usize,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<u32>,
    pub checks: Vec<CheckOut>,
    pub emitted: Vec<Emitted>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub status: Status,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tasks: Vec<TaskReport>,
}

impl RunReport {
    pub fn task(&self, kind: &str) -> impl Iterator<Item = &TaskReport> {
        let kind = kind.to_owned();
        self.tasks.iter().filter(move |t| t.kind == kind)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "fedwhit report (seed {})", self.seed).unwrap();
        for t in &self.tasks {
            write!(s, "\ntask {}: {}", t.index, t.kind).unwrap();
            if let Some(n) = &t.name {
                write!(s, " \"{n}\"").unwrap();
            }
            match (t.order, t.truncation) {
                (Some(k), Some(n)) => write!(s, " (K = {k}, N = {n})").unwrap(),
                (None, Some(n)) => write!(s, " (N = {n})").unwrap(),
                _ => {}
            }
            writeln!(s, ": {}", t.status.text()).unwrap();
            if let Some(e) = &t.error {
                writeln!(s, "  error: {e}").unwrap();
            }
            for c in &t.checks {
                write!(s, "  [{}] {}", if c.passed { "ok" } else { "FAIL" }, c.name).unwrap();
                if let Some(n) = &c.note {
                    write!(s, " ({n})").unwrap();
                }
                writeln!(s).unwrap();
                for r in &c.residuals {
                    writeln!(s, "      residual: {r}").unwrap();
                }
            }
            for e in &t.emitted {
                writeln!(s, "  {} = {}", e.label, e.value).unwrap();
            }
        }
        writeln!(s).unwrap();
        if let Some(e) = &self.error {
            writeln!(s, "error: {e}").unwrap();
        }
        writeln!(s, "overall: {} (exit {})", self.status.text(), self.exit_code).unwrap();
        s
    }
}
