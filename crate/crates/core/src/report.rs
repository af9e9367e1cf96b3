//! Check reports: a fixed tag vocabulary, JSON with stable key
//! order, and an aligned plain-text table.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::bundle::LiftKind;
use crate::killing::{Correction, TheoremAudit, Verdict};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EqTag {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
    E9,
    E10,
    E11,
    E12,
    E13,
    E14,
    E15,
    E16,
    E17,
    T1,
    T2a,
    T2b,
}

impl EqTag {
    pub const ALL: [EqTag; 20] = [
        EqTag::E1,
        EqTag::E2,
        EqTag::E3,
        EqTag::E4,
        EqTag::E5,
        EqTag::E6,
        EqTag::E7,
        EqTag::E8,
        EqTag::E9,
        EqTag::E10,
        EqTag::E11,
        EqTag::E12,
        EqTag::E13,
        EqTag::E14,
        EqTag::E15,
        EqTag::E16,
        EqTag::E17,
        EqTag::T1,
        EqTag::T2a,
        EqTag::T2b,
    ];
}

impl fmt::Display for EqTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckVerdict {
    Pass,
    Fail,
}

impl fmt::Display for CheckVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckVerdict::Pass => "pass",
            CheckVerdict::Fail => "fail",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub check: String,
    pub tag: EqTag,
    pub field: Option<String>,
    pub kind: Option<LiftKind>,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub verdict: CheckVerdict,
}

impl CheckEntry {
    /// Entry whose verdict is `pass` exactly when `residual ≤ tolerance`.
    pub fn new(check: impl Into<String>, tag: EqTag, field: Option<&str>, kind: Option<LiftKind>, residual: f64, tolerance: f64) -> Self {
        // NaN residuals fail.
        let verdict = if residual <= tolerance { CheckVerdict::Pass } else { CheckVerdict::Fail };
        CheckEntry { check: check.into(), tag, field: field.map(str::to_string), kind, max_abs_residual: residual, tolerance, verdict }
    }

    pub fn passed(&self) -> bool {
        self.verdict == CheckVerdict::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub field: String,
    #[serde(flatten)]
    pub audit: TheoremAudit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionEntry {
    pub field: String,
    #[serde(flatten)]
    pub correction: Correction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub tool_version: String,
    pub command: String,
    pub spec: String,
    pub seed: u64,
    pub samples: usize,
    pub entries: Vec<CheckEntry>,
    pub audits: Vec<AuditEntry>,
    pub corrections: Vec<CorrectionEntry>,
}

impl CheckReport {
    pub fn new(command: &str, spec: &str, seed: u64, samples: usize) -> Self {
        CheckReport {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            spec: spec.to_string(),
            seed,
            samples,
            entries: Vec::new(),
            audits: Vec::new(),
            corrections: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: CheckEntry) {
        self.entries.push(entry);
    }

    pub fn all_checks_pass(&self) -> bool {
        self.entries.iter().all(CheckEntry::passed)
    }

    pub fn has_counterexample(&self) -> bool {
        self.audits.iter().any(|a| a.audit.verdict != Verdict::Consistent)
    }

    /// All checks pass and every audit is consistent.
    pub fn success(&self) -> bool {
        self.all_checks_pass() && !self.has_counterexample()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} (seed {}, {} points)", self.command, self.spec, self.seed, self.samples);
        let rows: Vec<[String; 7]> = self
            .entries
            .iter()
            .map(|e| {
                [
                    e.tag.to_string(),
                    e.check.clone(),
                    e.field.clone().unwrap_or_else(|| "-".into()),
                    e.kind.map(|k| k.name().to_string()).unwrap_or_else(|| "-".into()),
                    format!("{:.3e}", e.max_abs_residual),
                    format!("{:.1e}", e.tolerance),
                    e.verdict.to_string(),
                ]
            })
            .collect();
        let header = ["tag", "check", "field", "lift", "residual", "tol", "verdict"].map(String::from);
        write_table(&mut out, &header, &rows);
        if !self.audits.is_empty() {
            let _ = writeln!(out);
            let rows: Vec<[String; 7]> = self
                .audits
                .iter()
                .map(|a| {
                    let t = &a.audit;
                    [
                        t.theorem.tag().to_string(),
                        a.field.clone(),
                        t.kind.name().to_string(),
                        format!("killing={} ∇X=0:{} ∇∇X=0:{}", t.base_killing, t.base_parallel, t.base_second_parallel),
                        t.hypothesis.to_string(),
                        format!("{}/{}", t.conclusion, t.oracle_conclusion),
                        t.verdict.to_string(),
                    ]
                })
                .collect();
            let header = ["theorem", "field", "lift", "base", "hypothesis", "conclusion/oracle", "verdict"].map(String::from);
            write_table(&mut out, &header, &rows);
        }
        if !self.corrections.is_empty() {
            let _ = writeln!(out, "\nuncorrected-formula deviations (corrected forms are used for all checks):");
            for e in &self.corrections {
                let r = &e.correction;
                let _ = writeln!(out, "  {} {} {} block {}: {:.3e}", r.tag, e.field, r.kind, r.block, r.max_deviation);
            }
        }
        out
    }
}

fn write_table<const N: usize>(out: &mut String, header: &[String; N], rows: &[[String; N]]) {
    let mut widths: [usize; N] = std::array::from_fn(|k| header[k].chars().count());
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |out: &mut String, cells: &[String; N]| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}", w = *w)).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(out, header);
    for r in rows {
        line(out, r);
    }
}

/// One report per catalog spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub tool_version: String,
    pub seed: u64,
    pub samples: usize,
    pub reports: Vec<CheckReport>,
}

impl SuiteReport {
    pub fn success(&self) -> bool {
        self.reports.iter().all(CheckReport::success)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        self.reports.iter().map(CheckReport::to_table).collect::<Vec<_>>().join("\n")
    }
}
