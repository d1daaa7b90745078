use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use super::recipe::DatasetRecipe;
use super::{DataError, LabeledDataset};

/// Name of the label column in prepared (preprocessed) CSV files.
pub const PREPARED_LABEL_COLUMN: &str = "label";

fn csv_err(e: csv::Error) -> DataError {
    DataError::Csv(e.to_string())
}

/// Loads the recipe's CSV: keeps numeric attribute columns and maps raw
/// labels to classes. Values are not scaled.
pub fn load_csv(recipe: &DatasetRecipe) -> Result<LabeledDataset, DataError> {
    let file = File::open(&recipe.csv).map_err(|source| DataError::Io {
        path: recipe.csv.display().to_string(),
        source,
    })?;
    let ds = load_csv_from_reader(recipe, file)?;
    for m in recipe.count_mismatches(&ds) {
        warn!(
            "{}: class count differs from the published one ({m})",
            recipe.csv.display()
        );
    }
    Ok(ds)
}

/// Same as [`load_csv`] but from any reader.
///
/// A column counts as numeric when its first data cell parses as a finite
/// number; every later cell in that column must then parse too.
pub fn load_csv_from_reader<R: Read>(recipe: &DatasetRecipe, reader: R) -> Result<LabeledDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(recipe.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let label_idx = headers
        .iter()
        .position(|h| *h == recipe.label_column)
        .ok_or_else(|| DataError::MissingColumn(recipe.label_column.clone()))?;
    for d in &recipe.drop_columns {
        if !headers.contains(d) {
            warn!("drop column `{d}` is not in the file");
        }
    }
    let candidate: Vec<bool> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| i != label_idx && !recipe.drop_columns.contains(h))
        .collect();

    let mut numeric: Option<Vec<usize>> = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut unknown: Vec<String> = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let cols = numeric.get_or_insert_with(|| {
            (0..record.len())
                .filter(|&i| candidate.get(i).copied().unwrap_or(false) && parse_finite(&record[i]).is_some())
                .collect()
        });
        if cols.is_empty() {
            return Err(DataError::NoNumericColumns);
        }
        let mut row = Vec::with_capacity(cols.len());
        for &c in cols.iter() {
            let cell = record.get(c).unwrap_or("");
            let v = parse_finite(cell).ok_or_else(|| DataError::Unparseable {
                // 1-based, counting the header line
                row: row_no + 2,
                column: headers[c].clone(),
                value: cell.to_string(),
            })?;
            row.push(v);
        }
        let raw = record.get(label_idx).unwrap_or("");
        match recipe.encode(raw) {
            Some(l) => {
                features.push(row);
                labels.push(l);
            }
            None => {
                if !unknown.iter().any(|u| u == raw) {
                    unknown.push(raw.to_string());
                }
            }
        }
    }
    if !unknown.is_empty() {
        return Err(DataError::UnknownLabels(unknown));
    }
    let cols = numeric.ok_or(DataError::TooFewRows { needed: 1, got: 0 })?;
    LabeledDataset::new(
        features,
        labels,
        recipe.class_names(),
        cols.iter().map(|&c| headers[c].clone()).collect(),
    )
}

fn parse_finite(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Writes feature columns followed by a `label` column holding class names.
pub fn write_prepared_csv<W: Write>(dataset: &LabeledDataset, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = dataset.feature_names.clone();
    header.push(PREPARED_LABEL_COLUMN.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (row, &label) in dataset.features.iter().zip(&dataset.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(dataset.class_names[label].clone());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: "<csv writer>".into(),
        source,
    })
}

pub fn save_prepared_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_prepared_csv(dataset, file)
}

/// Reads a file produced by [`write_prepared_csv`]; labels are resolved
/// against `class_names`.
pub fn read_prepared_csv(path: impl AsRef<Path>, class_names: &[String]) -> Result<LabeledDataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == PREPARED_LABEL_COLUMN)
        .ok_or_else(|| DataError::MissingColumn(PREPARED_LABEL_COLUMN.into()))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut unknown = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                continue;
            }
            row.push(parse_finite(cell).ok_or_else(|| DataError::Unparseable {
                row: row_no + 2,
                column: headers[c].clone(),
                value: cell.to_string(),
            })?);
        }
        let raw = record.get(label_idx).unwrap_or("");
        match class_names.iter().position(|n| n == raw) {
            Some(l) => {
                features.push(row);
                labels.push(l);
            }
            None if !unknown.iter().any(|u: &String| u == raw) => unknown.push(raw.to_string()),
            None => {}
        }
    }
    if !unknown.is_empty() {
        return Err(DataError::UnknownLabels(unknown));
    }
    let feature_names = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    LabeledDataset::new(features, labels, class_names.to_vec(), feature_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recipe() -> DatasetRecipe {
        DatasetRecipe::parse(
            r#"
csv = "unused.csv"
label_column = "class"
drop_columns = ["id"]
[labels]
Acceptable = ["Acceptable", "Safe"]
Unrated = ["Unrated", "Fun"]
Unsafe = ["Unsafe", "Dangerous"]
"#,
        )
        .unwrap()
    }

    #[test]
    fn text_columns_are_dropped() {
        let csv = "id,proto,bytes,dur,class\n1,tcp,10,0.5,Safe\n2,udp,20,1.5,Fun\n3,tcp,30,2.5,Dangerous\n";
        let ds = load_csv_from_reader(&recipe(), csv.as_bytes()).unwrap();
        assert_eq!(ds.feature_names, vec!["bytes", "dur"]);
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.features[2], vec![30.0, 2.5]);
        assert_eq!(ds.labels, vec![0, 1, 2]);
        assert_eq!(ds.class_names, vec!["Acceptable", "Unrated", "Unsafe"]);
    }

    #[test]
    fn unknown_labels_are_listed() {
        let csv = "bytes,class\n1,Safe\n2,Weird\n3,Odd\n4,Weird\n";
        match load_csv_from_reader(&recipe(), csv.as_bytes()) {
            Err(DataError::UnknownLabels(l)) => assert_eq!(l, vec!["Weird", "Odd"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_cell_reports_row_and_column() {
        let csv = "bytes,dur,class\n1,2,Safe\n3,oops,Fun\n";
        match load_csv_from_reader(&recipe(), csv.as_bytes()) {
            Err(DataError::Unparseable { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (3, "dur", "oops"))
            }
            other => panic!("{other:?}"),
        }
        let nan = "bytes,class\n1,Safe\nNaN,Fun\n";
        assert!(matches!(
            load_csv_from_reader(&recipe(), nan.as_bytes()),
            Err(DataError::Unparseable { .. })
        ));
    }

    #[test]
    fn missing_label_column_and_no_numeric() {
        assert!(matches!(
            load_csv_from_reader(&recipe(), "a,b\n1,2\n".as_bytes()),
            Err(DataError::MissingColumn(_))
        ));
        assert!(matches!(
            load_csv_from_reader(&recipe(), "proto,class\ntcp,Safe\n".as_bytes()),
            Err(DataError::NoNumericColumns)
        ));
    }

    #[test]
    fn prepared_csv_round_trip() {
        let ds = LabeledDataset::new(
            vec![vec![0.1, -2.5], vec![1e-17, 3.0]],
            vec![1, 0],
            vec!["SAFE".into(), "UNSAFE".into()],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        save_prepared_csv(&ds, &path).unwrap();
        let back = read_prepared_csv(&path, &ds.class_names).unwrap();
        assert_eq!(back, ds);
    }
}
