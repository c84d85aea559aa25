//! Plot-ready long-format export.
//!
//! Collapses a set of run CSVs from one dataset into tidy rows
//! `(variant, algorithm, seed, cum_props, value)` for a chosen metric, so
//! any plotting tool can draw the propagation curves directly.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use crate::csvio::read_run_csv;

/// Metric column to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TrainLoss,
    TestError,
}

impl Metric {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train_loss" => Some(Metric::TrainLoss),
            "test_error" => Some(Metric::TestError),
            _ => None,
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            Metric::TrainLoss => "train_loss",
            Metric::TestError => "test_error",
        }
    }
}

/// Writes the long-format CSV. `downsample` caps the number of rows kept
/// per run; the first and last rows of a run are always kept.
pub fn emit_plot_data<W: Write>(
    files: &[PathBuf],
    metric: Metric,
    downsample: Option<usize>,
    out: &mut W,
) -> Result<()> {
    if files.is_empty() {
        bail!("no run files given");
    }
    writeln!(out, "variant,algorithm,seed,cum_props,value")?;
    let mut dataset: Option<String> = None;
    for path in files {
        let run = read_run_csv(path)?;
        let ds = run
            .meta
            .get("dataset")
            .cloned()
            .unwrap_or_else(|| "?".to_string());
        match &dataset {
            None => dataset = Some(ds),
            Some(d) if *d == ds => {}
            Some(d) => bail!(
                "mixed datasets: {} has {:?}, earlier files had {:?}",
                path.display(),
                ds,
                d
            ),
        }
        let col = run.column(metric.column()).with_context(|| {
            format!(
                "{}: metric {:?} not recorded for this run (no such column)",
                path.display(),
                metric.column()
            )
        })?;
        let props_col = run
            .column("cum_props")
            .with_context(|| format!("{}: missing cum_props column", path.display()))?;
        let variant = run.meta.get("variant").cloned().unwrap_or_default();
        let algorithm = run.meta.get("algo").cloned().unwrap_or_default();
        let seed = run.meta.get("seed").cloned().unwrap_or_default();

        let n = run.rows.len();
        let keep: Vec<usize> = match downsample {
            Some(k) if k >= 2 && n > k => {
                let mut idx: Vec<usize> =
                    (0..k).map(|j| j * (n - 1) / (k - 1)).collect();
                idx.dedup();
                idx
            }
            _ => (0..n).collect(),
        };
        for i in keep {
            let row = &run.rows[i];
            writeln!(
                out,
                "{},{},{},{},{}",
                variant, algorithm, seed, row[props_col], row[col]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_round_trip() {
        assert_eq!(Metric::parse("train_loss"), Some(Metric::TrainLoss));
        assert_eq!(Metric::parse("test_error"), Some(Metric::TestError));
        assert_eq!(Metric::parse("wall"), None);
        assert_eq!(Metric::TestError.column(), "test_error");
    }
}
