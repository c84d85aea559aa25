//! LIBSVM-format dataset ingestion.
//!
//! Lines look like `label idx:val idx:val ...` with 1-based, strictly
//! increasing feature indices. Binary labels arrive in one of three
//! conventions and are normalized to `{0, 1}`:
//!
//! * `{-1, +1}` (a9a, ijcnn1): `-1 → 0`, `+1 → 1`;
//! * `{1, 2}` (covtype.binary): `1 → 0`, `2 → 1`;
//! * `{0, 1}`: kept as is.
//!
//! The convention is decided after the whole file is read; mixing `-1` with
//! `2` is rejected. Files ending in `.gz` are decompressed transparently.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sparse::SparseRowMatrix;
use crate::{Error, Result};

/// Which half of a train/test pair a dataset holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// A parsed dataset: sparse rows plus `{0,1}` labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: SparseRowMatrix,
    pub labels: Vec<f64>,
    pub name: String,
    pub split: Split,
}

/// Exact counts for a parsed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
    /// Fraction of samples labeled 1.
    pub label_balance: f64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    /// Widens the feature dimension (used to harmonize train/test pairs).
    pub fn set_dim(&mut self, d: usize) {
        self.features.set_cols(d);
    }

    pub fn stats(&self) -> DatasetStats {
        let positives = self.labels.iter().filter(|&&y| y == 1.0).count();
        DatasetStats {
            n: self.n(),
            d: self.d(),
            nnz: self.features.nnz(),
            label_balance: positives as f64 / self.n() as f64,
        }
    }
}

/// Raw label values accepted from LIBSVM files.
const ACCEPTED_LABELS: [f64; 4] = [-1.0, 0.0, 1.0, 2.0];

/// Parses LIBSVM text. When `expected_d` is absent the dimension is the
/// largest feature index seen.
pub fn parse_libsvm<R: BufRead>(
    reader: R,
    expected_d: Option<usize>,
    name: &str,
    split: Split,
) -> Result<Dataset> {
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_ascii_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a first token");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label token {label_tok:?}"),
        })?;
        if !ACCEPTED_LABELS.contains(&label) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("label {label} not in {{-1, 0, +1}} (or covtype's {{1, 2}})"),
            });
        }
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut prev_index = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("malformed feature token {tok:?}"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature index {idx_s:?}"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value {val_s:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if idx <= prev_index {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("feature index {idx} not strictly increasing"),
                });
            }
            if let Some(d) = expected_d {
                if idx > d {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("feature index {idx} exceeds declared dimension {d}"),
                    });
                }
            }
            prev_index = idx;
            max_index = max_index.max(idx);
            entries.push((idx - 1, val));
        }
        raw_labels.push(label);
        rows.push(entries);
    }

    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "empty dataset".into(),
        });
    }
    let d = expected_d.unwrap_or(max_index);
    if d == 0 {
        return Err(Error::Parse {
            line: 0,
            msg: "no feature index seen and no dimension declared".into(),
        });
    }

    let labels = normalize_labels(&raw_labels)?;
    let mut features = SparseRowMatrix::new(d);
    for row in &rows {
        features.push_row(row);
    }
    Ok(Dataset {
        features,
        labels,
        name: name.to_string(),
        split,
    })
}

fn normalize_labels(raw: &[f64]) -> Result<Vec<f64>> {
    let has = |v: f64| raw.contains(&v);
    if has(-1.0) && has(2.0) {
        return Err(Error::Parse {
            line: 0,
            msg: "labels mix -1 with 2; no known convention".into(),
        });
    }
    if has(-1.0) {
        // {-1, +1} convention.
        return Ok(raw.iter().map(|&y| if y == -1.0 { 0.0 } else { 1.0 }).collect());
    }
    if has(2.0) {
        if has(0.0) {
            return Err(Error::Parse {
                line: 0,
                msg: "labels mix 0 with 2; no known convention".into(),
            });
        }
        // covtype's {1, 2} convention.
        return Ok(raw.iter().map(|&y| if y == 2.0 { 1.0 } else { 0.0 }).collect());
    }
    Ok(raw.to_vec())
}

/// Serializes a dataset back to LIBSVM text (labels already in `{0,1}`).
/// Values print in shortest round-trip form, so parse → write → parse is
/// the identity.
pub fn write_libsvm<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    for r in 0..dataset.n() {
        write!(w, "{}", dataset.labels[r])?;
        let (idx, val) = dataset.features.row(r);
        for (&j, &v) in idx.iter().zip(val) {
            write!(w, " {}:{}", j + 1, v)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Opens a LIBSVM file, decompressing when the extension is `.gz`.
pub fn open_libsvm(path: &Path, expected_d: Option<usize>, split: Split) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let name = name.trim_end_matches(".txt").to_string();
    let file = File::open(path)?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(flate2::read::GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    parse_libsvm(BufReader::new(reader), expected_d, &name, split)
}

/// Loads a train file and an optional test file, fixing both to the larger
/// of the two feature dimensions (test rows may reference indices absent
/// from the train file).
pub fn load_train_test(train: &Path, test: Option<&Path>) -> Result<(Dataset, Option<Dataset>)> {
    let mut train_ds = open_libsvm(train, None, Split::Train)?;
    let mut test_ds = match test {
        Some(p) => Some(open_libsvm(p, None, Split::Test)?),
        None => None,
    };
    let d = train_ds
        .d()
        .max(test_ds.as_ref().map_or(0, |t| t.d()));
    train_ds.set_dim(d);
    if let Some(t) = test_ds.as_mut() {
        t.set_dim(d);
    }
    Ok((train_ds, test_ds))
}

/// Seeded synthetic binary classification set: sparse ±1 features and labels
/// drawn from a planted logistic model. Stands in for the public sets when
/// running offline.
pub fn synthetic_dataset(n: usize, d: usize, nnz_per_row: usize, seed: u64) -> Dataset {
    assert!(n > 0 && d > 0 && nnz_per_row > 0 && nnz_per_row <= d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
    let scale = 1.0 / (nnz_per_row as f64).sqrt();
    let mut features = SparseRowMatrix::new(d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut cols = rand::seq::index::sample(&mut rng, d, nnz_per_row).into_vec();
        cols.sort_unstable();
        let entries: Vec<(usize, f64)> = cols
            .into_iter()
            .map(|c| (c, if rng.gen_bool(0.5) { scale } else { -scale }))
            .collect();
        let z: f64 = entries.iter().map(|&(c, v)| v * truth[c]).sum();
        let p = crate::problem::sigmoid(4.0 * z);
        labels.push(if rng.gen_bool(p) { 1.0 } else { 0.0 });
        features.push_row(&entries);
    }
    Dataset {
        features,
        labels,
        name: format!("synthetic-n{n}-d{d}-s{seed}"),
        split: Split::Train,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str, expected_d: Option<usize>) -> Result<Dataset> {
        parse_libsvm(Cursor::new(text), expected_d, "t", Split::Train)
    }

    #[test]
    fn parses_basic_line() {
        let ds = parse("+1 1:0.5 3:-2.0\n", Some(3)).unwrap();
        assert_eq!(ds.labels, vec![1.0]);
        assert_eq!(ds.d(), 3);
        let (idx, val) = ds.features.row(0);
        assert_eq!(idx, &[0, 2]);
        assert_eq!(val, &[0.5, -2.0]);
    }

    #[test]
    fn maps_negative_label_to_zero() {
        let ds = parse("-1 2:1\n+1 1:1\n", None).unwrap();
        assert_eq!(ds.labels, vec![0.0, 1.0]);
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.features.row(0).0, &[1]);
    }

    #[test]
    fn maps_covtype_labels() {
        let ds = parse("1 1:1\n2 1:2\n", None).unwrap();
        assert_eq!(ds.labels, vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_label() {
        let err = parse("3 1:1\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn rejects_non_increasing_indices() {
        let err = parse("+1 2:1 2:3\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse("+1 3:1 2:3\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn rejects_malformed_token() {
        let err = parse("+1 1=0.5\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn rejects_empty_input() {
        assert!(parse("", None).is_err());
        assert!(parse("\n  \n", None).is_err());
    }

    #[test]
    fn reports_error_line_number() {
        let err = parse("+1 1:1\n-1 1:1\n+1 0:2\n", None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let text = "+1 1:0.5 3:-2.25\n-1 2:1e-3\n+1 1:7\n";
        let ds = parse(text, Some(4)).unwrap();
        let mut out = Vec::new();
        write_libsvm(&ds, &mut out).unwrap();
        let ds2 = parse_libsvm(Cursor::new(out), Some(4), "t", Split::Train).unwrap();
        assert_eq!(ds.features, ds2.features);
        assert_eq!(ds.labels, ds2.labels);
    }

    #[test]
    fn rows_preserve_line_order() {
        let ds = parse("+1 1:10\n-1 1:20\n+1 1:30\n", None).unwrap();
        assert_eq!(ds.features.row(0).1, &[10.0]);
        assert_eq!(ds.features.row(1).1, &[20.0]);
        assert_eq!(ds.features.row(2).1, &[30.0]);
    }

    #[test]
    fn stats_count_exactly() {
        let ds = parse("+1 1:1 2:1\n-1 3:1\n+1 1:5\n+1 2:2\n", None).unwrap();
        let s = ds.stats();
        assert_eq!(s.n, 4);
        assert_eq!(s.d, 3);
        assert_eq!(s.nnz, 5);
        assert_eq!(s.label_balance, 0.75);
    }

    #[test]
    fn train_test_dimensions_are_harmonized() {
        let dir = std::env::temp_dir().join(format!("trarc-pair-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let train_path = dir.join("pair.train");
        let test_path = dir.join("pair.test");
        // The test file references feature 9, absent from the train file.
        std::fs::write(&train_path, "+1 1:1 4:2\n-1 2:1\n").unwrap();
        std::fs::write(&test_path, "-1 9:1\n+1 1:3\n").unwrap();
        let (train, test) = load_train_test(&train_path, Some(&test_path)).unwrap();
        let test = test.unwrap();
        assert_eq!(train.d(), 9);
        assert_eq!(test.d(), 9);
        assert_eq!(train.split, Split::Train);
        assert_eq!(test.split, Split::Test);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn gzip_files_decompress_transparently() {
        use flate2::write::GzEncoder;
        use flate2::Compression;
        use std::io::Write;
        let dir = std::env::temp_dir().join(format!("trarc-gz-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tiny.libsvm.gz");
        let text = "+1 1:0.5 3:-2.25\n-1 2:1\n";
        let mut enc = GzEncoder::new(std::fs::File::create(&path).unwrap(), Compression::default());
        enc.write_all(text.as_bytes()).unwrap();
        enc.finish().unwrap();
        let ds = open_libsvm(&path, None, Split::Train).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.d(), 3);
        assert_eq!(ds.labels, vec![1.0, 0.0]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn synthetic_is_seed_deterministic() {
        let a = synthetic_dataset(50, 10, 3, 42);
        let b = synthetic_dataset(50, 10, 3, 42);
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
        let c = synthetic_dataset(50, 10, 3, 43);
        assert!(a.labels != c.labels || a.features != c.features);
    }
}
