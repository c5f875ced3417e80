//! Report rendering: delimited text (exact round-trip), a markdown table,
//! and plot-ready per-strategy series.

use crate::schedulers::Strategy;
use crate::simulator::ErrorDistribution;

use super::{ExperimentError, RunRecord};

const RAW_HEADER: &str = "#reshi-raw-results v1";
const REPORT_HEADER: &str = "#reshi-report v1";

/// One aggregate row; `*_pct` columns are relative to the best strategy
/// mean of the same (workflow, distribution, err) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub workflow: String,
    pub distribution: String,
    pub err: f64,
    pub strategy: String,
    pub mean_s: f64,
    pub p90_s: f64,
    pub p95_s: f64,
    pub max_s: f64,
    pub mean_pct: f64,
    pub p90_pct: f64,
    pub p95_pct: f64,
    pub max_pct: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateReport {
    pub rows: Vec<AggregateRow>,
}

const REPORT_COLUMNS: &str =
    "workflow,distribution,err,strategy,mean_s,p90_s,p95_s,max_s,mean_pct,p90_pct,p95_pct,max_pct";

/// Exact delimited form; floats use the shortest round-trip encoding so
/// parse(render(report)) == report.
pub fn render_report_csv(report: &AggregateReport) -> Result<String, ExperimentError> {
    if report.rows.is_empty() {
        return Err(ExperimentError::EmptyReport);
    }
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    out.push_str(REPORT_COLUMNS);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.workflow,
            r.distribution,
            r.err,
            r.strategy,
            r.mean_s,
            r.p90_s,
            r.p95_s,
            r.max_s,
            r.mean_pct,
            r.p90_pct,
            r.p95_pct,
            r.max_pct
        ));
    }
    Ok(out)
}

pub fn parse_report_csv(text: &str) -> Result<AggregateReport, ExperimentError> {
    let err = |line: usize, reason: String| ExperimentError::Format {
        path: "<report>".to_string(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == REPORT_HEADER => {}
        other => return Err(err(1, format!("expected `{REPORT_HEADER}`, got {other:?}"))),
    }
    match lines.next() {
        Some((_, l)) if l.trim() == REPORT_COLUMNS => {}
        other => return Err(err(2, format!("unexpected columns {other:?}"))),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(err(line_no, format!("expected 12 fields, got {}", f.len())));
        }
        let num = |s: &str| -> Result<f64, ExperimentError> {
            s.parse().map_err(|_| err(line_no, format!("invalid number `{s}`")))
        };
        rows.push(AggregateRow {
            workflow: f[0].to_string(),
            distribution: f[1].to_string(),
            err: num(f[2])?,
            strategy: f[3].to_string(),
            mean_s: num(f[4])?,
            p90_s: num(f[5])?,
            p95_s: num(f[6])?,
            max_s: num(f[7])?,
            mean_pct: num(f[8])?,
            p90_pct: num(f[9])?,
            p95_pct: num(f[10])?,
            max_pct: num(f[11])?,
        });
    }
    if rows.is_empty() {
        return Err(ExperimentError::EmptyReport);
    }
    Ok(AggregateReport { rows })
}

/// Human-readable table mirroring the relative-percentage layout.
pub fn render_markdown(report: &AggregateReport) -> Result<String, ExperimentError> {
    if report.rows.is_empty() {
        return Err(ExperimentError::EmptyReport);
    }
    let mut out = String::new();
    let mut current_cell: Option<(String, String, u64)> = None;
    for r in &report.rows {
        let cell = (r.workflow.clone(), r.distribution.clone(), r.err.to_bits());
        if current_cell.as_ref() != Some(&cell) {
            if current_cell.is_some() {
                out.push('\n');
            }
            out.push_str(&format!(
                "## {}, {} error, err = {}\n\n",
                r.workflow, r.distribution, r.err
            ));
            out.push_str("| strategy | mean s | mean % | 90p % | 95p % | max % |\n");
            out.push_str("|---|---|---|---|---|---|\n");
            current_cell = Some(cell);
        }
        out.push_str(&format!(
            "| {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |\n",
            r.strategy, r.mean_s, r.mean_pct, r.p90_pct, r.p95_pct, r.max_pct
        ));
    }
    Ok(out)
}

/// Plot-ready series: one line per (workflow, distribution, strategy, err),
/// grouped so a makespan-vs-err curve per strategy is contiguous.
pub fn render_series_csv(report: &AggregateReport) -> Result<String, ExperimentError> {
    if report.rows.is_empty() {
        return Err(ExperimentError::EmptyReport);
    }
    let mut rows: Vec<&AggregateRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| {
        (&a.workflow, &a.distribution, &a.strategy, a.err.to_bits()).cmp(&(
            &b.workflow,
            &b.distribution,
            &b.strategy,
            b.err.to_bits(),
        ))
    });
    let mut out = String::from("#reshi-series v1\n");
    out.push_str("workflow,distribution,strategy,err,mean_s,p90_s,p95_s,max_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.workflow, r.distribution, r.strategy, r.err, r.mean_s, r.p90_s, r.p95_s, r.max_s
        ));
    }
    Ok(out)
}

/// Raw sweep results, one row per simulation; the failure column carries a
/// comma-free message for failed runs.
pub fn render_raw_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RAW_HEADER);
    out.push('\n');
    out.push_str("workflow,cluster_index,strategy,distribution,err,makespan_s,failure\n");
    for r in records {
        let makespan = r.makespan_s.map(|m| m.to_string()).unwrap_or_default();
        let failure = r
            .failure
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n'], ";");
        out.push_str(&format!(
            "{},{},{},{},{},{makespan},{failure}\n",
            r.workflow,
            r.cluster_index,
            r.strategy.name(),
            r.distribution.name(),
            r.err
        ));
    }
    out
}

pub fn load_raw_results(path: &std::path::Path) -> Result<Vec<RunRecord>, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let err = |line: usize, reason: String| ExperimentError::Format {
        path: path.display().to_string(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == RAW_HEADER => {}
        other => return Err(err(1, format!("expected `{RAW_HEADER}`, got {other:?}"))),
    }
    lines.next(); // column header
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err(line_no, format!("expected 7 fields, got {}", f.len())));
        }
        let strategy =
            Strategy::parse(f[2]).map_err(|e| err(line_no, e.to_string()))?;
        let distribution = ErrorDistribution::parse(f[3])
            .ok_or_else(|| err(line_no, format!("unknown distribution `{}`", f[3])))?;
        records.push(RunRecord {
            workflow: f[0].to_string(),
            cluster_index: f[1]
                .parse()
                .map_err(|_| err(line_no, format!("invalid cluster index `{}`", f[1])))?,
            strategy,
            distribution,
            err: f[4]
                .parse()
                .map_err(|_| err(line_no, format!("invalid err `{}`", f[4])))?,
            makespan_s: if f[5].is_empty() {
                None
            } else {
                Some(
                    f[5].parse()
                        .map_err(|_| err(line_no, format!("invalid makespan `{}`", f[5])))?,
                )
            },
            failure: if f[6].is_empty() { None } else { Some(f[6].to_string()) },
        });
    }
    Ok(records)
}
