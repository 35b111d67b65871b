//! Evaluation report: machine-readable JSON plus an aligned text table with
//! one column per method.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::screening::Method;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStat {
    pub mean: f64,
    pub median: f64,
}

impl TimeStat {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self { mean: 0.0, median: 0.0 };
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let mid = v.len() / 2;
        let median = if v.len() % 2 == 0 {
            0.5 * (v[mid - 1] + v[mid])
        } else {
            v[mid]
        };
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub certificate_digest: String,
    pub retained_constraints: usize,
    pub retained_constraints_pct: f64,
    /// Bounding problems that did not solve cleanly (kept, not removed).
    pub flagged_sides: usize,
    pub n_exact: usize,
    pub n_infeasible: usize,
    pub n_suboptimal: usize,
    /// Mean relative cost gap over every feasible verdict.
    pub cost_error_pct: f64,
    /// Mean relative cost gap over the suboptimal verdicts only.
    pub cost_error_pct_suboptimal: f64,
    pub max_cost_error_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: Method,
    pub screening_time_s: f64,
    pub reduced_uc_time_s: TimeStat,
    /// Mean reduced-UC time over mean full-UC time, in percent.
    pub computational_burden_pct: f64,
}

/// Wall-clock figures, kept apart so the rest of the report is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub full_uc_time_s: TimeStat,
    pub methods: Vec<MethodTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub grid: String,
    pub n_train: usize,
    /// Training periods whose UC was infeasible (no cost point).
    pub n_train_infeasible: usize,
    pub n_test: usize,
    /// Test periods skipped because the full UC itself is infeasible.
    pub n_test_skipped: usize,
    pub line_sides: usize,
    pub cost_bound_segments: Option<usize>,
    pub methods: Vec<MethodReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingReport>,
}

impl EvaluationReport {
    /// The report with wall-clock fields dropped.
    pub fn deterministic(&self) -> Self {
        Self {
            timing: None,
            ..self.clone()
        }
    }

    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    fn timing_for(&self, m: Method) -> Option<&MethodTiming> {
        self.timing.as_ref()?.methods.iter().find(|t| t.method == m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
    Both,
}

pub const TABLE_ROWS: [&str; 6] = [
    "Retained constraints (%)",
    "#Infeasibilities",
    "#Sub-optimal solutions",
    "Cost error (%)",
    "Reduced UC time (s)",
    "Computational burden (%)",
];

fn layout(out: &mut String, header: &[String], rows: &[(String, Vec<String>)]) {
    let label_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let col_w = header
        .iter()
        .map(String::len)
        .chain(rows.iter().flat_map(|r| r.1.iter().map(String::len)))
        .max()
        .unwrap_or(0)
        .max(6);
    let _ = write!(out, "{:label_w$}", "");
    for h in header {
        let _ = write!(out, "  {h:>col_w$}");
    }
    out.push('\n');
    for (label, cells) in rows {
        let _ = write!(out, "{label:<label_w$}");
        for c in cells {
            let _ = write!(out, "  {c:>col_w$}");
        }
        out.push('\n');
    }
}

pub fn render_table(report: &EvaluationReport) -> String {
    let header: Vec<String> = report.methods.iter().map(|m| m.method.label().to_string()).collect();
    let time = |m: Method, f: &dyn Fn(&MethodTiming) -> String| report.timing_for(m).map_or("-".to_string(), f);
    let mut main: Vec<(String, Vec<String>)> = TABLE_ROWS.iter().map(|r| (r.to_string(), Vec::new())).collect();
    for m in &report.methods {
        main[0].1.push(format!("{:.1}", m.retained_constraints_pct));
        main[1].1.push(m.n_infeasible.to_string());
        main[2].1.push(m.n_suboptimal.to_string());
        main[3].1.push(format!("{:.3}", m.cost_error_pct));
        main[4]
            .1
            .push(time(m.method, &|t| format!("{:.4}", t.reduced_uc_time_s.mean)));
        main[5]
            .1
            .push(time(m.method, &|t| format!("{:.1}", t.computational_burden_pct)));
    }
    let mut extra: Vec<(String, Vec<String>)> = [
        "Retained constraints (#)",
        "#Exact solutions",
        "Cost error, sub-optimal only (%)",
        "Max cost error (%)",
        "Flagged bounding problems",
        "Screening time (s)",
        "Reduced UC time, median (s)",
    ]
    .iter()
    .map(|r| (r.to_string(), Vec::new()))
    .collect();
    for m in &report.methods {
        extra[0].1.push(m.retained_constraints.to_string());
        extra[1].1.push(m.n_exact.to_string());
        extra[2].1.push(format!("{:.3}", m.cost_error_pct_suboptimal));
        extra[3].1.push(format!("{:.3}", m.max_cost_error_pct));
        extra[4].1.push(m.flagged_sides.to_string());
        extra[5]
            .1
            .push(time(m.method, &|t| format!("{:.3}", t.screening_time_s)));
        extra[6]
            .1
            .push(time(m.method, &|t| format!("{:.4}", t.reduced_uc_time_s.median)));
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        "grid {}: {} training periods ({} infeasible), {} test periods ({} skipped), {} line sides",
        report.grid, report.n_train, report.n_train_infeasible, report.n_test, report.n_test_skipped, report.line_sides
    );
    if let Some(t) = &report.timing {
        let _ = writeln!(
            out,
            "full UC time (s): mean {:.4}, median {:.4}",
            t.full_uc_time_s.mean, t.full_uc_time_s.median
        );
    }
    out.push('\n');
    layout(&mut out, &header, &main);
    out.push('\n');
    layout(&mut out, &header, &extra);
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `report.json` and/or `report.txt` into `dir`.
pub fn emit_report(report: &EvaluationReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::IoFailure {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    if matches!(format, ReportFormat::Json | ReportFormat::Both) {
        let p = dir.join("report.json");
        write_file(&p, &report.to_json())?;
        written.push(p);
    }
    if matches!(format, ReportFormat::Table | ReportFormat::Both) {
        let p = dir.join("report.txt");
        write_file(&p, &render_table(report))?;
        written.push(p);
    }
    Ok(written)
}

pub fn parse_report(path: &Path) -> Result<EvaluationReport, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    EvaluationReport::from_json(&text).map_err(|e| HarnessError::stage(super::Stage::Report, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> EvaluationReport {
        let row = |method| MethodReport {
            method,
            certificate_digest: "ab".into(),
            retained_constraints: 7,
            retained_constraints_pct: 70.0,
            flagged_sides: 0,
            n_exact: 1,
            n_infeasible: 0,
            n_suboptimal: 0,
            cost_error_pct: 0.0,
            cost_error_pct_suboptimal: 0.0,
            max_cost_error_pct: 0.0,
        };
        EvaluationReport {
            grid: "g".into(),
            n_train: 3,
            n_train_infeasible: 0,
            n_test: 1,
            n_test_skipped: 0,
            line_sides: 10,
            cost_bound_segments: Some(1),
            methods: vec![row(Method::Bn), row(Method::Ub)],
            timing: Some(TimingReport {
                full_uc_time_s: TimeStat { mean: 0.1, median: 0.1 },
                methods: vec![],
            }),
        }
    }

    #[test]
    fn table_has_the_metric_rows_in_order() {
        let text = render_table(&sample_report());
        let mut at = 0;
        for row in TABLE_ROWS {
            let pos = text[at..].find(row).expect(row);
            at += pos + row.len();
        }
        assert!(text.contains("BN"));
        assert!(text.contains("UB"));
    }

    #[test]
    fn identical_methods_render_identical_cells() {
        let text = render_table(&sample_report());
        let line = text
            .lines()
            .find(|l| l.starts_with("Retained constraints (%)"))
            .unwrap();
        let cells: Vec<&str> = line["Retained constraints (%)".len()..].split_whitespace().collect();
        assert_eq!(cells, vec!["70.0", "70.0"]);
    }

    #[test]
    fn emit_then_parse_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let report = sample_report();
        let files = emit_report(&report, dir.path(), ReportFormat::Both).unwrap();
        assert_eq!(files.len(), 2);
        assert_eq!(parse_report(&dir.path().join("report.json")).unwrap(), report);
    }

    #[test]
    fn medians() {
        assert_eq!(TimeStat::from_samples(&[3.0, 1.0, 2.0]).median, 2.0);
        assert_eq!(TimeStat::from_samples(&[4.0, 1.0, 2.0, 3.0]).median, 2.5);
    }
}
