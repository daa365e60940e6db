//! Aggregation of run records into summary tables.

use std::path::Path;

use crate::error::Result;
use crate::train::{mean_std, TrainRecord};

/// One summary row per `(problem, loss variant)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub problem: String,
    pub variant: String,
    pub n_runs: usize,
    pub n_reached: usize,
    pub n_diverged: usize,
    pub mean_epochs: Option<f64>,
    pub std_epochs: Option<f64>,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_seconds: f64,
}

/// Reads every `*.json` run record in `dir` (non-record JSON files are
/// skipped) and aggregates by `(problem, variant)`.
pub fn collect(dir: &Path) -> Result<Vec<ReportRow>> {
    let mut records: Vec<TrainRecord> = Vec::new();
    let mut names: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    names.sort();
    for path in names {
        let text = std::fs::read_to_string(&path)?;
        if let Ok(record) = serde_json::from_str::<TrainRecord>(&text) {
            records.push(record);
        }
    }
    let mut groups: Vec<(String, String, Vec<&TrainRecord>)> = Vec::new();
    for r in &records {
        let key = (r.config.problem.clone(), r.config.loss.name().to_string());
        match groups
            .iter_mut()
            .find(|(p, v, _)| *p == key.0 && *v == key.1)
        {
            Some((_, _, list)) => list.push(r),
            None => groups.push((key.0, key.1, vec![r])),
        }
    }
    groups.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    Ok(groups
        .into_iter()
        .map(|(problem, variant, list)| {
            let reached: Vec<f64> = list
                .iter()
                .filter_map(|r| r.epochs_to_threshold.map(|e| e as f64))
                .collect();
            let errors: Vec<f64> = list
                .iter()
                .filter(|r| !r.diverged)
                .map(|r| r.final_error)
                .collect();
            let seconds: Vec<f64> = list.iter().map(|r| r.wall_seconds).collect();
            let (mean_error, std_error) = mean_std(&errors);
            let (mean_seconds, _) = mean_std(&seconds);
            let (mean_epochs, std_epochs) = if reached.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&reached);
                (Some(m), Some(s))
            };
            ReportRow {
                problem,
                variant,
                n_runs: list.len(),
                n_reached: reached.len(),
                n_diverged: list.iter().filter(|r| r.diverged).count(),
                mean_epochs,
                std_epochs,
                mean_error,
                std_error,
                mean_seconds,
            }
        })
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into())
}

/// CSV rendering (header always present).
pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "problem,variant,runs,reached,diverged,mean_epochs,std_epochs,mean_error,std_error,mean_seconds\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.problem,
            r.variant,
            r.n_runs,
            r.n_reached,
            r.n_diverged,
            fmt_opt(r.mean_epochs),
            fmt_opt(r.std_epochs),
            r.mean_error,
            r.std_error,
            r.mean_seconds,
        ));
    }
    out
}

/// Fixed-width text rendering.
pub fn to_text(rows: &[ReportRow]) -> String {
    let mut out = format!(
        "{:<18} {:<8} {:>4} {:>7} {:>8} {:>14} {:>12} {:>10}\n",
        "problem", "variant", "runs", "reached", "diverged", "epochs(mean±std)", "mean_error", "seconds"
    );
    for r in rows {
        let epochs = match (r.mean_epochs, r.std_epochs) {
            (Some(m), Some(s)) => format!("{m:.0}±{s:.0}"),
            _ => "-".into(),
        };
        out.push_str(&format!(
            "{:<18} {:<8} {:>4} {:>7} {:>8} {:>14} {:>12.3e} {:>10.1}\n",
            r.problem,
            r.variant,
            r.n_runs,
            r.n_reached,
            r.n_diverged,
            epochs,
            r.mean_error,
            r.mean_seconds,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossVariant;
    use crate::train::{train, write_record_files, TrainConfig};

    #[test]
    fn empty_directory_yields_empty_table_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let rows = collect(dir.path()).unwrap();
        assert!(rows.is_empty());
        let csv = to_csv(&rows);
        assert!(csv.starts_with("problem,variant,"));
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn mixed_runs_group_by_problem_and_variant() {
        let dir = tempfile::tempdir().unwrap();
        let mut idx = 0;
        for (problem, loss) in [
            ("toy-sin-k1", LossVariant::ToyL2),
            ("toy-sin-k1", LossVariant::ToyL2),
            ("toy-sin-k2", LossVariant::ToyH1),
        ] {
            let mut config = TrainConfig::new(problem, loss).unwrap();
            config.epochs = 5;
            config.threshold = 1e-9;
            config.seed = idx as u64;
            let (record, params) = train(&config).unwrap();
            write_record_files(&record, &params, dir.path(), idx).unwrap();
            idx += 1;
        }
        let rows = collect(dir.path()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].problem, "toy-sin-k1");
        assert_eq!(rows[0].n_runs, 2);
        assert_eq!(rows[1].problem, "toy-sin-k2");
        assert_eq!(rows[1].n_runs, 1);
    }
}
