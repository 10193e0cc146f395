//! Report files and table rendering.
//!
//! A bench run writes `report.csv` (one line per row), `report.json`
//! (rows, aggregates and run metadata), `gap_vs_size.dat` (mean gap per
//! solver and size) and `report.md`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::run::{BenchReport, Row};
use crate::spec::SolverKind;

pub const CSV_FILE: &str = "report.csv";
pub const JSON_FILE: &str = "report.json";
pub const GAP_FILE: &str = "gap_vs_size.dat";
pub const MARKDOWN_FILE: &str = "report.md";

pub const CSV_COLUMNS: [&str; 8] = [
    "instance",
    "n",
    "solver",
    "value",
    "reference",
    "gap_percent",
    "evaluations",
    "wall_time_s",
];

/// Mean gap and time of one solver over one table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub solver: String,
    pub column: String,
    pub instances: usize,
    pub failures: usize,
    pub mean_gap_percent: Option<f64>,
    pub mean_wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Gap,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(BenchError::Report(format!(
                "unknown report format {other:?} (expected csv, json or markdown)"
            ))),
        }
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn solver_key(label: &str) -> (usize, String) {
    (SolverKind::of_label(label).map_or(SolverKind::ALL.len(), |k| k as usize), label.to_string())
}

/// Columns in table order: sizes ascending, then other labels in order of
/// appearance.
fn column_order(rows: &[Row]) -> Vec<String> {
    let mut sizes: Vec<(usize, String)> = Vec::new();
    let mut others: Vec<String> = Vec::new();
    for r in rows {
        match r.column.strip_prefix("n=").and_then(|s| s.parse::<usize>().ok()) {
            Some(n) => {
                if !sizes.iter().any(|(m, _)| *m == n) {
                    sizes.push((n, r.column.clone()));
                }
            }
            None => {
                if !others.contains(&r.column) {
                    others.push(r.column.clone());
                }
            }
        }
    }
    sizes.sort();
    sizes.into_iter().map(|(_, c)| c).chain(others).collect()
}

fn solver_order(rows: &[Row]) -> Vec<String> {
    let mut solvers: Vec<String> = Vec::new();
    for r in rows {
        if !solvers.contains(&r.solver) {
            solvers.push(r.solver.clone());
        }
    }
    solvers.sort_by_key(|s| solver_key(s));
    solvers
}

/// Per solver and column means, in table order.
pub fn aggregate(rows: &[Row]) -> Vec<Aggregate> {
    let mut cells: HashMap<(&str, &str), Vec<&Row>> = HashMap::new();
    for r in rows {
        cells.entry((&r.solver, &r.column)).or_default().push(r);
    }
    let mut out = Vec::new();
    for s in solver_order(rows) {
        for c in column_order(rows) {
            let Some(members) = cells.get(&(s.as_str(), c.as_str())) else {
                continue;
            };
            let gaps: Vec<f64> = members.iter().filter_map(|r| r.gap_percent).collect();
            let times: Vec<f64> = members.iter().filter_map(|r| r.wall_time_s).collect();
            out.push(Aggregate {
                solver: s.clone(),
                column: c.clone(),
                instances: members.len(),
                failures: members.iter().filter(|r| r.value.is_none()).count(),
                mean_gap_percent: mean(&gaps),
                mean_wall_time_s: mean(&times),
            });
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// `report.csv` contents. Wall times are left empty unless `with_time`.
pub fn to_csv(rows: &[Row], with_time: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.n.to_string(),
            r.solver.clone(),
            opt(r.value),
            opt(r.reference),
            opt(r.gap_percent),
            opt(r.evaluations),
            if with_time { opt(r.wall_time_s) } else { String::new() },
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Report(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

fn column_of(instance: &str, n: usize) -> String {
    match instance.split_once('/') {
        Some((family, _)) => family.to_string(),
        None => format!("n={n}"),
    }
}

/// Parses `report.csv`; table columns are recovered from the instance names.
pub fn parse_csv(text: &str) -> Result<Vec<Row>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(BenchError::Report(format!("unexpected report columns {header:?}")));
    }
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| BenchError::Report(format!("bad number {s:?}: {e}")))
        }
    };
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let n: usize = rec[1]
            .parse()
            .map_err(|e| BenchError::Report(format!("bad size {:?}: {e}", &rec[1])))?;
        rows.push(Row {
            instance: rec[0].to_string(),
            n,
            solver: rec[2].to_string(),
            value: num(&rec[3])?,
            reference: num(&rec[4])?,
            gap_percent: num(&rec[5])?,
            evaluations: num(&rec[6])?,
            wall_time_s: num(&rec[7])?,
            column: column_of(&rec[0], n),
            reference_solver: None,
            error: None,
        });
    }
    Ok(rows)
}

/// Rows of a `report.csv` or `report.json` file, or of a run directory.
pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let path = if path.is_dir() { path.join(CSV_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&path)
        .map_err(|e| BenchError::Report(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let report: BenchReport = serde_json::from_str(&text)?;
        Ok(report.rows)
    } else {
        parse_csv(&text)
    }
}

fn cell(a: &Aggregate, metric: Metric) -> Option<f64> {
    match metric {
        Metric::Gap => a.mean_gap_percent,
        Metric::Time => a.mean_wall_time_s,
    }
}

fn fmt_cell(v: Option<f64>, metric: Metric) -> String {
    match (v, metric) {
        (None, _) => "-".into(),
        (Some(x), Metric::Gap) => format!("{x:.2}"),
        (Some(x), Metric::Time) => format!("{x:.4}"),
    }
}

/// Solvers as rows and columns as sizes or families; gaps in percent with
/// two decimals, times in seconds.
pub fn render_markdown(rows: &[Row], metric: Metric) -> String {
    let aggs = aggregate(rows);
    let columns = column_order(rows);
    let mut out = String::from("| Solver |");
    for c in &columns {
        let _ = write!(out, " {c} |");
    }
    out.push_str("\n|---|");
    for _ in &columns {
        out.push_str("---:|");
    }
    out.push('\n');
    for s in solver_order(rows) {
        let _ = write!(out, "| {s} |");
        for c in &columns {
            let v = aggs
                .iter()
                .find(|a| a.solver == s && &a.column == c)
                .and_then(|a| cell(a, metric));
            let _ = write!(out, " {} |", fmt_cell(v, metric));
        }
        out.push('\n');
    }
    out
}

pub fn render(rows: &[Row], format: Format, metric: Metric) -> Result<String> {
    let aggs = aggregate(rows);
    match format {
        Format::Markdown => Ok(render_markdown(rows, metric)),
        Format::Json => Ok(serde_json::to_string_pretty(&aggs)? + "\n"),
        Format::Csv => {
            let name = match metric {
                Metric::Gap => "mean_gap_percent",
                Metric::Time => "mean_wall_time_s",
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["solver", "column", "instances", name])?;
            for a in &aggs {
                w.write_record([
                    a.solver.clone(),
                    a.column.clone(),
                    a.instances.to_string(),
                    opt(cell(a, metric)),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| BenchError::Report(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
        }
    }
}

/// Whitespace-separated `n solver mean_gap_percent` lines for every size
/// column.
pub fn gap_vs_size(rows: &[Row]) -> String {
    let mut out = String::from("# n solver mean_gap_percent\n");
    for a in aggregate(rows) {
        let (Some(n), Some(g)) = (a.column.strip_prefix("n="), a.mean_gap_percent) else {
            continue;
        };
        let _ = writeln!(out, "{n} {} {g:.6}", a.solver);
    }
    out
}

/// Writes every report file into `dir`.
pub fn write_report(report: &BenchReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CSV_FILE), to_csv(&report.rows, report.spec.records_timing())?)?;
    fs::write(dir.join(JSON_FILE), serde_json::to_string_pretty(report)? + "\n")?;
    fs::write(dir.join(GAP_FILE), gap_vs_size(&report.rows))?;
    let metric = if report.spec.kind == crate::spec::ExperimentKind::Timing {
        Metric::Time
    } else {
        Metric::Gap
    };
    fs::write(dir.join(MARKDOWN_FILE), render_markdown(&report.rows, metric))?;
    Ok(())
}
