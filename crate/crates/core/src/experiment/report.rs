use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::run::{cells, row_label, ResultTable};
use crate::error::{Error, Result};

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Per-fold records, one line per (dataset, method, J, repeat, fold).
pub fn folds_csv(t: &ResultTable) -> String {
    let mut out = String::from(
        "dataset,method,j,repeat,fold,n_test,pool_fingerprint,status,accuracy,mean_cost,model_bytes\n",
    );
    for r in &t.folds {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{:08x},",
            r.dataset,
            r.method.key(),
            opt(r.j),
            r.repeat,
            r.fold,
            r.n_test,
            r.pool_fingerprint
        );
        match &r.outcome {
            Ok(s) => {
                let _ = writeln!(
                    out,
                    "ok,{},{},{}",
                    s.accuracy,
                    s.mean_cost,
                    opt(s.model_bytes)
                );
            }
            Err(e) => {
                let _ = writeln!(out, "failed: {},,,", csv_safe(e));
            }
        }
    }
    out
}

fn csv_safe(s: &str) -> String {
    s.replace([',', '\n', '"'], " ")
}

/// One line per (dataset, method, J) with fold statistics.
pub fn summary_csv(t: &ResultTable) -> String {
    let mut out = String::from(
        "dataset,method,j,n_folds,mean_accuracy,std_accuracy,mean_cost,model_bytes,status\n",
    );
    for r in &t.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.dataset,
            r.method.key(),
            opt(r.j),
            r.n_folds,
            r.mean_accuracy,
            r.std_accuracy,
            r.mean_cost,
            opt(r.model_bytes),
            r.failure
                .as_deref()
                .map_or_else(|| "ok".to_string(), |e| format!("failed: {}", csv_safe(e)))
        );
    }
    out
}

/// Host wall-clock per inference of the compact engine. Varies run to run.
pub fn timing_csv(t: &ResultTable) -> String {
    let mut out = String::from("dataset,method,j,repeat,fold,n_probes,mean_ns,std_ns,mean_cost\n");
    for r in &t.timings {
        let _ = writeln!(
            out,
            "{},des_clustering,{},{},{},{},{:.1},{:.1},{}",
            r.dataset,
            r.j,
            r.repeat,
            r.fold,
            r.stats.n_probes,
            r.stats.mean_ns,
            r.stats.std_ns,
            r.stats.mean_cost
        );
    }
    out
}

/// Accuracy (std) and mean cost tables, methods as rows, datasets as columns.
pub fn render_table(t: &ResultTable) -> String {
    let datasets: Vec<&str> = t.config.datasets.iter().map(|d| d.name.as_str()).collect();
    let cells = cells(&t.config);
    let width = cells
        .iter()
        .map(|&(m, j)| row_label(m, j).len())
        .max()
        .unwrap_or(6)
        .max(6)
        + 2;
    let col = datasets.iter().map(|d| d.len()).max().unwrap_or(0).max(16) + 2;
    let folds = t.config.n_splits * t.config.n_repeats;
    let header = |out: &mut String| {
        let _ = write!(out, "{:width$}", "Method");
        for d in &datasets {
            let _ = write!(out, "{d:>col$}");
        }
        out.push('\n');
    };

    let mut out = format!(
        "Overall accuracy (std), {}x{} folds = {folds}\n\n",
        t.config.n_repeats, t.config.n_splits
    );
    header(&mut out);
    for &(m, j) in &cells {
        let _ = write!(out, "{:width$}", row_label(m, j));
        for d in &datasets {
            let cell = match t.row(d, m, j) {
                Some(r) if r.failure.is_none() => {
                    format!("{:.3} ({:.3})", r.mean_accuracy, r.std_accuracy)
                }
                Some(_) => "failed".to_string(),
                None => "-".to_string(),
            };
            let _ = write!(out, "{cell:>col$}");
        }
        out.push('\n');
    }

    out.push_str("\nMean inference cost (tree nodes visited + selection work)\n\n");
    header(&mut out);
    for &(m, j) in &cells {
        let _ = write!(out, "{:width$}", row_label(m, j));
        for d in &datasets {
            let cell = match t.row(d, m, j) {
                Some(r) if r.failure.is_none() => format!("{:.2}", r.mean_cost),
                Some(_) => "failed".to_string(),
                None => "-".to_string(),
            };
            let _ = write!(out, "{cell:>col$}");
        }
        out.push('\n');
    }

    let failures: Vec<String> = t
        .rows
        .iter()
        .filter_map(|r| {
            r.failure
                .as_ref()
                .map(|e| format!("{} / {}: {e}", r.dataset, r.label()))
        })
        .collect();
    if !failures.is_empty() {
        out.push_str("\nFailures\n\n");
        for f in failures {
            out.push_str(&f);
            out.push('\n');
        }
    }
    out
}

/// Writes `folds.csv`, `summary.csv`, `table.txt`, `config.toml` and
/// `timing.csv` into `dir`. All but `timing.csv` are identical for identical
/// configs.
pub fn emit_report(t: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    if t.rows.is_empty() {
        return Err(Error::InvalidArgument("empty result table".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("folds.csv", folds_csv(t)),
        ("summary.csv", summary_csv(t)),
        ("table.txt", render_table(t)),
        ("config.toml", t.config.to_toml()),
        ("timing.csv", timing_csv(t)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
