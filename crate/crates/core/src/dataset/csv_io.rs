use std::io::{Read, Write};

use super::{ClassVocabulary, Dataset, DatasetError, LabeledExample, FEATURE_COUNT, FEATURE_NAMES};

const LABEL_COLUMN: &str = "label";

/// Reads a bag dataset. Row numbers in errors are 1-based file lines, so the
/// first data row is row 2.
pub fn load_csv<R: Read>(reader: R, vocabulary: &ClassVocabulary) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| DatasetError::Csv(e.to_string()))?,
        None => return Err(DatasetError::BadHeader("missing header row".into())),
    };
    let expected: Vec<&str> = FEATURE_NAMES
        .iter()
        .copied()
        .chain([LABEL_COLUMN])
        .collect();
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(DatasetError::BadHeader(format!(
            "expected `{}`, found `{}`",
            expected.join(","),
            found.join(",")
        )));
    }

    let mut examples = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| DatasetError::Csv(format!("row {row}: {e}")))?;
        if rec.len() != FEATURE_COUNT + 1 {
            return Err(DatasetError::Arity {
                row,
                expected: FEATURE_COUNT + 1,
                found: rec.len(),
            });
        }
        let mut features = Vec::with_capacity(FEATURE_COUNT);
        for (col, field) in rec.iter().take(FEATURE_COUNT).enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    return Err(DatasetError::NotNumeric {
                        row,
                        column: FEATURE_NAMES[col].to_string(),
                        value: field.to_string(),
                    })
                }
            }
        }
        let label_name = &rec[FEATURE_COUNT];
        let label = vocabulary
            .index_of(label_name)
            .ok_or_else(|| DatasetError::UnknownLabel {
                row,
                label: label_name.to_string(),
            })?;
        examples.push(LabeledExample { features, label });
    }
    Dataset::with_width(examples, vocabulary.clone(), FEATURE_COUNT)
}

/// Writes the dataset with shortest round-trip decimal rendering, so a
/// subsequent [`load_csv`] recovers every value exactly.
pub fn save_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<(), DatasetError> {
    if dataset.feature_width() != FEATURE_COUNT {
        return Err(DatasetError::InvalidExample {
            index: 0,
            reason: format!(
                "bag CSV needs {FEATURE_COUNT} features, dataset has {}",
                dataset.feature_width()
            ),
        });
    }
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    let csv_err = |e: csv::Error| DatasetError::Csv(e.to_string());
    let header: Vec<&str> = FEATURE_NAMES
        .iter()
        .copied()
        .chain([LABEL_COLUMN])
        .collect();
    wtr.write_record(&header).map_err(csv_err)?;
    for ex in dataset.examples() {
        let mut row: Vec<String> = ex.features.iter().map(|v| format!("{v}")).collect();
        row.push(
            dataset
                .vocabulary()
                .name(ex.label)
                .expect("labels validated against vocabulary")
                .to_string(),
        );
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| DatasetError::Csv(e.to_string()))?;
    Ok(())
}
