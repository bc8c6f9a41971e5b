use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::correction::StudyDataset;
use crate::scalar::Scalar;

use super::{Format, IoError, DEFAULT_ID_COLUMN, DEFAULT_TURN_COLUMN, LABEL_PREFIX};

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Writes `dataset` in the long-form layout [`super::load_study`] reads.
///
/// Values use the shortest representation that parses back to the same
/// float; missing entries are empty (delimited) or `null` (JSON lines).
pub fn write_study<T: Scalar, W: Write>(dataset: &StudyDataset<T>, out: W, format: Format) -> std::io::Result<()> {
    let metrics = dataset.metric_names();
    let labels = dataset.label_names();
    match format {
        Format::Delimited { delimiter } => {
            let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
            let mut header = vec![DEFAULT_ID_COLUMN.to_string(), DEFAULT_TURN_COLUMN.to_string()];
            header.extend(metrics.iter().cloned());
            header.extend(labels.iter().map(|l| format!("{LABEL_PREFIX}{l}")));
            w.write_record(&header).map_err(csv_err)?;
            for conv in dataset.conversations() {
                for t in 0..conv.turn_count() {
                    let mut rec = vec![conv.id().to_string(), t.to_string()];
                    for m in metrics {
                        rec.push(conv.metric(m).and_then(|c| c[t]).map(|v| v.to_string()).unwrap_or_default());
                    }
                    for l in labels {
                        let cell = conv.label(l).and_then(|c| c[t]);
                        rec.push(cell.map(|b| if b { "1" } else { "0" }.to_string()).unwrap_or_default());
                    }
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
            w.flush()
        }
        Format::JsonLines => {
            let mut w = BufWriter::new(out);
            let key = |s: &str| serde_json::to_string(s).expect("strings serialize");
            for conv in dataset.conversations() {
                for t in 0..conv.turn_count() {
                    let mut line = format!("{{{}:{},{}:{t}", key(DEFAULT_ID_COLUMN), key(conv.id()), key(DEFAULT_TURN_COLUMN));
                    for m in metrics {
                        let v = conv.metric(m).and_then(|c| c[t]).map_or_else(|| "null".to_string(), |v| v.to_string());
                        line.push_str(&format!(",{}:{v}", key(m)));
                    }
                    for l in labels {
                        let v = conv.label(l).and_then(|c| c[t]).map_or("null", |b| if b { "1" } else { "0" });
                        line.push_str(&format!(",{}:{v}", key(&format!("{LABEL_PREFIX}{l}"))));
                    }
                    line.push('}');
                    writeln!(w, "{line}")?;
                }
            }
            w.flush()
        }
    }
}

pub fn save_study<T: Scalar>(dataset: &StudyDataset<T>, path: &Path, format: Format) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    write_study(dataset, BufWriter::new(file), format).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset_io::{load_study_from_str, LoadOptions};

    const TEXT: &str = "conversation_id,turn_index,m,w,label:y\n\
                        a,0,0.1,,1\na,1,-2.5e-8,3,0\na,2,1e300,4,\nb,0,0.30000000000000004,5,1\nb,1,7,6,0\n";

    #[test]
    fn round_trip_both_formats() {
        let first = load_study_from_str::<f64>(TEXT, &LoadOptions::default()).unwrap().dataset;
        for format in [Format::CSV, Format::TSV, Format::JsonLines] {
            let mut buf = Vec::new();
            write_study(&first, &mut buf, format).unwrap();
            let opts = LoadOptions { format, ..LoadOptions::default() };
            let again = load_study_from_str::<f64>(std::str::from_utf8(&buf).unwrap(), &opts).unwrap().dataset;
            assert_eq!(first, again, "{format:?}");
        }
    }
}
