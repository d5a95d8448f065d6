//! CSV flow-feature files, taxonomy rule files and prediction output.
//!
//! Every column except the label column is parsed as a decimal `f64`; column
//! order is kept. Row numbers in errors are 1-based and do not count the
//! header.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use flowsentinel_core::trainer::Prediction;
use flowsentinel_core::{Dataset, Taxonomy, Tensor};

use crate::error::{Error, Result};

pub const DEFAULT_LABEL_COLUMN: &str = "label";

/// Numeric columns of a CSV plus the label column when it is present.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub features: Tensor,
    pub feature_names: Vec<String>,
    pub labels: Option<Vec<String>>,
}

/// Loads a labelled dataset; the label column must exist.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path, label_column, true)?;
    let labels = table.labels.unwrap_or_default();
    Ok(Dataset::new(
        table.features,
        labels,
        path.display().to_string(),
        table.feature_names,
    )?)
}

/// Loads features for prediction. A label column, if present, is split off
/// and returned separately.
pub fn load_features(path: impl AsRef<Path>, label_column: &str) -> Result<FeatureTable> {
    read_table(path.as_ref(), label_column, false)
}

fn read_table(path: &Path, label_column: &str, label_required: bool) -> Result<FeatureTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(io::BufReader::new(file));
    let schema = |msg: String| Error::Schema {
        path: path.to_path_buf(),
        msg,
    };

    let header = rdr.headers().map_err(|e| csv_error(path, 0, e))?.clone();
    if header.is_empty() {
        return Err(schema("missing header row".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for name in header.iter() {
        if !seen.insert(name) {
            return Err(schema(format!("duplicate column `{name}`")));
        }
    }
    let label_idx = header.iter().position(|h| h == label_column);
    if label_required && label_idx.is_none() {
        return Err(schema(format!(
            "label column `{label_column}` not found in header"
        )));
    }
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&i| Some(i) != label_idx)
        .collect();
    let feature_names: Vec<String> = feature_cols
        .iter()
        .map(|&i| header[i].to_string())
        .collect();

    let mut data = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut rows = 0usize;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| csv_error(path, row, e))?;
        for &i in &feature_cols {
            let cell = &rec[i];
            let bad = |msg: String| Error::Data {
                path: path.to_path_buf(),
                row,
                column: header[i].to_string(),
                msg,
            };
            let v: f64 = cell
                .parse()
                .map_err(|_| bad(format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value `{cell}`")));
            }
            data.push(v);
        }
        if let (Some(l), Some(i)) = (labels.as_mut(), label_idx) {
            l.push(rec[i].to_string());
        }
        rows += 1;
    }
    Ok(FeatureTable {
        features: Tensor::new(vec![rows, feature_names.len()], data)?,
        feature_names,
        labels,
    })
}

fn csv_error(path: &Path, row: usize, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Data {
            path: path.to_path_buf(),
            row,
            column: "*".into(),
            msg: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Data {
            path: path.to_path_buf(),
            row,
            column: "*".into(),
            msg: format!("{:?}", other),
        },
    }
}

pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Taxonomy::parse(&text).map_err(|source| Error::Taxonomy {
        path: path.to_path_buf(),
        source,
    })
}

/// Column name for the probability of `class`.
pub fn probability_column(class: &str) -> String {
    format!("prob_{class}")
}

pub const PREDICTED_COLUMN: &str = "predicted_label";

/// Input features, one probability column per class, then the predicted
/// label. Floats use the shortest representation that parses back to the
/// same bits.
pub fn write_predictions<W: Write>(
    out: W,
    feature_names: &[String],
    features: &Tensor,
    class_names: &[String],
    pred: &Prediction,
) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header = feature_names
        .iter()
        .cloned()
        .chain(class_names.iter().map(|c| probability_column(c)))
        .chain([PREDICTED_COLUMN.to_string()]);
    w.write_record(header)?;
    for (i, &class) in pred.classes.iter().enumerate() {
        let row = features
            .row(i)
            .iter()
            .chain(pred.probabilities.row(i))
            .map(|v| v.to_string())
            .chain([class_names[class].clone()]);
        w.write_record(row)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_file() {
        let f = csv_file("f1,f2,label\n1,2,Benign\n3,4,DDoS-TCP\n");
        let ds = load_csv(f.path(), "label").unwrap();
        assert_eq!(ds.features.shape(), &[2, 2]);
        assert_eq!(ds.features.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ds.raw_labels, ["Benign", "DDoS-TCP"]);
        assert_eq!(ds.feature_names, ["f1", "f2"]);
    }

    #[test]
    fn label_column_anywhere_and_order_kept() {
        let f = csv_file("a,label,b\n1,x,2\n");
        let ds = load_csv(f.path(), "label").unwrap();
        assert_eq!(ds.feature_names, ["a", "b"]);
        assert_eq!(ds.features.data(), &[1.0, 2.0]);
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let f = csv_file("f1,f2,label\nNaN,2,Benign\n");
        match load_csv(f.path(), "label").unwrap_err() {
            Error::Data { row, column, .. } => assert_eq!((row, column.as_str()), (1, "f1")),
            e => panic!("unexpected {e}"),
        }
        let f = csv_file("f1,f2,label\n1,2,Benign\n1,abc,Benign\n");
        let msg = load_csv(f.path(), "label").unwrap_err().to_string();
        assert!(msg.contains("row 2") && msg.contains("column f2"), "{msg}");
    }

    #[test]
    fn header_only_gives_empty_dataset() {
        let f = csv_file("f1,f2,label\n");
        let ds = load_csv(f.path(), "label").unwrap();
        assert_eq!(ds.len(), 0);
        assert_eq!(ds.features.shape(), &[0, 2]);
    }

    #[test]
    fn schema_and_io_errors() {
        let f = csv_file("f1,f2,class\n1,2,x\n");
        assert!(matches!(
            load_csv(f.path(), "label"),
            Err(Error::Schema { .. })
        ));
        assert!(matches!(
            load_csv("/nonexistent/x.csv", "label"),
            Err(Error::Io { .. })
        ));
        let f = csv_file("");
        assert!(matches!(
            load_csv(f.path(), "label"),
            Err(Error::Schema { .. })
        ));
        let f = csv_file("a,a,label\n");
        assert!(matches!(
            load_csv(f.path(), "label"),
            Err(Error::Schema { .. })
        ));
        let f = csv_file("a,b,label\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), "label"),
            Err(Error::Data { row: 1, .. })
        ));
    }

    #[test]
    fn features_without_label() {
        let f = csv_file("a,b\n1,2\n");
        let t = load_features(f.path(), "label").unwrap();
        assert_eq!(t.labels, None);
        assert_eq!(t.feature_names, ["a", "b"]);
        let f = csv_file("a,label\n1,x\n");
        assert_eq!(
            load_features(f.path(), "label").unwrap().labels,
            Some(vec!["x".into()])
        );
    }

    #[test]
    fn taxonomy_file() {
        let f = csv_file("# comment\nexact,Benign,Benign\nprefix,X,Y\n");
        let t = load_taxonomy(f.path()).unwrap();
        assert_eq!(t.rules.len(), 2);
        let f = csv_file("regex,.*,Y\n");
        assert!(matches!(
            load_taxonomy(f.path()),
            Err(Error::Taxonomy { .. })
        ));
    }

    #[test]
    fn prediction_csv_round_trips_bits() {
        let feats = Tensor::new(vec![2, 2], vec![0.1, -1e-300, 1.0 / 3.0, 12345.678]).unwrap();
        let pred = Prediction {
            classes: vec![1, 0],
            probabilities: Tensor::new(vec![2, 2], vec![0.2, 0.8, 0.7000000000000001, 0.3])
                .unwrap(),
        };
        let names = vec!["a".to_string(), "b".to_string()];
        let classes = vec!["Attack".to_string(), "Benign".to_string()];
        let mut buf = Vec::new();
        write_predictions(&mut buf, &names, &feats, &classes, &pred).unwrap();
        let f = csv_file(std::str::from_utf8(&buf).unwrap());
        let ds = load_csv(f.path(), PREDICTED_COLUMN).unwrap();
        assert_eq!(ds.feature_names, ["a", "b", "prob_Attack", "prob_Benign"]);
        assert_eq!(ds.raw_labels, ["Benign", "Attack"]);
        for i in 0..2 {
            let row = ds.features.row(i);
            let expected: Vec<f64> = feats
                .row(i)
                .iter()
                .chain(pred.probabilities.row(i))
                .copied()
                .collect();
            assert!(row
                .iter()
                .zip(&expected)
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
