use serde::{Deserialize, Serialize};

use super::RunResult;
use crate::dataset::Task;
use crate::error::{Error, Result};

/// Relative gain `(dual - baseline) / baseline`.
pub fn improvement(baseline: f64, dual: f64) -> f64 {
    (dual - baseline) / baseline
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`);
/// `se` is `None` for a single run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::invalid(format!("standard error needs at least 2 runs, got {n}")));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Self {
            mean,
            se: Some(var.sqrt() / (n as f64).sqrt()),
        })
    }

    fn single(v: f64) -> Self {
        Self { mean: v, se: None }
    }
}

/// One line of the machine-readable report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: usize,
    pub seed: u64,
    pub baseline: f64,
    pub dual: f64,
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub task: Task,
    pub n_runs: usize,
    pub baseline: Stat,
    pub dual: Stat,
    pub improvement: Stat,
    pub rows: Vec<RunRow>,
}

fn row(r: &RunResult) -> RunRow {
    RunRow {
        run: r.run,
        seed: r.seed,
        baseline: r.baseline,
        dual: r.dual,
        improvement: improvement(r.baseline, r.dual),
    }
}

/// Means and standard errors over runs; improvement is taken per run first.
pub fn aggregate(task: Task, results: &[RunResult]) -> Result<ExperimentReport> {
    let rows: Vec<RunRow> = results.iter().map(row).collect();
    let column = |f: fn(&RunRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    Ok(ExperimentReport {
        task,
        n_runs: rows.len(),
        baseline: Stat::of(&column(|r| r.baseline))?,
        dual: Stat::of(&column(|r| r.dual))?,
        improvement: Stat::of(&column(|r| r.improvement))?,
        rows,
    })
}

/// `3.6e-4` as `3.60E-04`.
fn sci(v: f64) -> String {
    let s = format!("{v:.2E}");
    match s.split_once('E') {
        Some((m, e)) => {
            let exp: i32 = e.parse().expect("exponent");
            let sign = if exp < 0 { '-' } else { '+' };
            format!("{m}E{sign}{:02}", exp.abs())
        }
        None => s,
    }
}

fn cell(s: Stat) -> String {
    match s.se {
        Some(se) => format!("{:.2}% ({})", 100.0 * s.mean, sci(se)),
        None => format!("{:.2}% (single run)", 100.0 * s.mean),
    }
}

impl ExperimentReport {
    /// Report of one run, without standard errors.
    pub fn single_run(task: Task, result: &RunResult) -> Self {
        let r = row(result);
        Self {
            task,
            n_runs: 1,
            baseline: Stat::single(r.baseline),
            dual: Stat::single(r.dual),
            improvement: Stat::single(r.improvement),
            rows: vec![r],
        }
    }

    pub fn is_single_run(&self) -> bool {
        self.n_runs < 2
    }

    pub const CSV_HEADER: &'static str = "task,run,seed,baseline,dual,improvement";

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6}\n",
                self.task, r.run, r.seed, r.baseline, r.dual, r.improvement
            ));
        }
        out
    }

    /// Recomputes the improvement mean from the per-run accuracies.
    pub fn recomputed_improvement(&self) -> f64 {
        self.rows.iter().map(|r| improvement(r.baseline, r.dual)).sum::<f64>() / self.rows.len() as f64
    }
}

/// Mean accuracies with standard errors in parentheses: one column per
/// task, rows FN, FN + CN and Improvement.
pub fn render_table(reports: &[ExperimentReport]) -> String {
    let mut grid: Vec<Vec<String>> = vec![
        vec!["Model".to_string()],
        vec!["FN".to_string()],
        vec!["FN + CN".to_string()],
        vec!["Improvement".to_string()],
    ];
    for r in reports {
        grid[0].push(format!(
            "{} ({} run{})",
            r.task,
            r.n_runs,
            if r.n_runs == 1 { "" } else { "s" }
        ));
        grid[1].push(cell(r.baseline));
        grid[2].push(cell(r.dual));
        grid[3].push(cell(r.improvement));
    }
    let cols = grid[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| grid.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let line = |row: &[String]| {
        let parts: Vec<String> = row.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        format!("| {} |\n", parts.join(" | "))
    };
    let mut out = line(&grid[0]);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w + 2)).collect();
    out.push_str(&format!("|{}|\n", rule.join("|")));
    for row in &grid[1..] {
        out.push_str(&line(row));
    }
    out
}
