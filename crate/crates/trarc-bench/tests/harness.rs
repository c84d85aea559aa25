//! End-to-end checks of the experiment harness: CSV schema consistency,
//! summary agreement, and the plot-data edge cases.

use std::path::PathBuf;

use trarc::optim::{Algorithm, Variant};
use trarc_bench::csvio::read_run_csv;
use trarc_bench::plot::{emit_plot_data, Metric};
use trarc_bench::{run_experiment, DataSource, ExperimentSpec, SyntheticSpec};

fn small_spec(out: PathBuf, data_seed: u64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(
        DataSource::Synthetic(SyntheticSpec {
            n: 400,
            d: 10,
            nnz_per_row: 3,
            seed: data_seed,
        }),
        out,
    );
    spec.algorithms = vec![Algorithm::TrustRegion];
    spec.variants = vec![Variant::Full, Variant::Sh, Variant::Shg, Variant::Shgf];
    spec.seeds = vec![7];
    spec.max_iters = 20;
    spec
}

#[test]
fn summary_matches_last_run_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small_spec(dir.path().to_path_buf(), 1)).unwrap();
    assert_eq!(out.rows.len(), 4);
    let summary_text = std::fs::read_to_string(&out.summary_file).unwrap();
    for (path, row) in out.run_files.iter().zip(&out.rows) {
        let run = read_run_csv(path).unwrap();
        assert_eq!(run.meta["variant"], row.variant.name());
        let loss_col = run.column("train_loss").unwrap();
        let last_loss = &run.rows.last().unwrap()[loss_col];
        // The summary repeats the exact serialized value of the last row.
        assert_eq!(last_loss, &row.final_train_loss.to_string());
        assert!(summary_text.contains(&format!(",{last_loss},")));
        // cum_props column is nondecreasing.
        let props_col = run.column("cum_props").unwrap();
        let mut prev = 0u64;
        for cells in &run.rows {
            let v: u64 = cells[props_col].parse().unwrap();
            assert!(v >= prev);
            prev = v;
        }
        // Synthetic data has no test split, so the column must be absent.
        assert!(run.column("test_error").is_none());
    }
}

#[test]
fn plot_data_emits_one_series_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small_spec(dir.path().to_path_buf(), 2)).unwrap();
    let mut buf = Vec::new();
    emit_plot_data(&out.run_files, Metric::TrainLoss, None, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "variant,algorithm,seed,cum_props,value"
    );
    let data_rows = lines.count();
    let expected: usize = out.rows.iter().map(|r| r.iterations).sum();
    assert_eq!(data_rows, expected);
}

#[test]
fn plot_data_refuses_mixed_datasets() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = run_experiment(&small_spec(dir_a.path().to_path_buf(), 3)).unwrap();
    let b = run_experiment(&small_spec(dir_b.path().to_path_buf(), 4)).unwrap();
    let files: Vec<PathBuf> = vec![a.run_files[0].clone(), b.run_files[0].clone()];
    let mut buf = Vec::new();
    let err = emit_plot_data(&files, Metric::TrainLoss, None, &mut buf).unwrap_err();
    assert!(err.to_string().contains("mixed datasets"), "{err}");
}

#[test]
fn plot_data_missing_metric_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small_spec(dir.path().to_path_buf(), 5)).unwrap();
    let mut buf = Vec::new();
    let err = emit_plot_data(&out.run_files, Metric::TestError, None, &mut buf).unwrap_err();
    assert!(err.to_string().contains("test_error"), "{err}");
}

#[test]
fn plot_data_downsampling_keeps_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(dir.path().to_path_buf(), 6);
    spec.variants = vec![Variant::Shgf];
    let out = run_experiment(&spec).unwrap();
    let run = read_run_csv(&out.run_files[0]).unwrap();
    let props_col = run.column("cum_props").unwrap();
    let first = &run.rows.first().unwrap()[props_col];
    let last = &run.rows.last().unwrap()[props_col];

    let mut buf = Vec::new();
    emit_plot_data(&out.run_files, Metric::TrainLoss, Some(5), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(rows.len() <= 5);
    assert!(rows.first().unwrap().contains(&format!(",{first},")));
    assert!(rows.last().unwrap().contains(&format!(",{last},")));
}
