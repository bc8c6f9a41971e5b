use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde_json::Value;

use crate::correction::{ConversationRecord, StudyDataset};
use crate::scalar::Scalar;

use super::{Format, IoError, LoadOptions, LABEL_PREFIX};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingEntry {
    pub conversation: String,
    pub column: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonFiniteEntry {
    pub row: u64,
    pub conversation: String,
    pub column: String,
}

/// A metric with interior missing turns; its ρ̂ uses the longest run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapEntry {
    pub conversation: String,
    pub metric: String,
    pub observed: usize,
    pub longest_run: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub missing: Vec<MissingEntry>,
    pub non_finite: Vec<NonFiniteEntry>,
    pub gaps: Vec<GapEntry>,
    /// Conversations with fewer turns than the configured minimum.
    pub short_conversations: Vec<(String, usize)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.non_finite.is_empty() && self.gaps.is_empty() && self.short_conversations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.missing {
            writeln!(f, "missing: conversation {} column {}: {} value(s)", m.conversation, m.column, m.count)?;
        }
        for n in &self.non_finite {
            writeln!(f, "non-finite: row {} conversation {} column {} (treated as missing)", n.row, n.conversation, n.column)?;
        }
        for g in &self.gaps {
            writeln!(
                f,
                "gap: conversation {} metric {}: {} observed, rho from longest run of {}",
                g.conversation, g.metric, g.observed, g.longest_run
            )?;
        }
        for (c, n) in &self.short_conversations {
            writeln!(f, "short: conversation {c} has {n} turn(s)")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedStudy<T> {
    pub dataset: StudyDataset<T>,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Id,
    Turn,
    Metric,
    Label,
}

struct Column {
    header: String,
    name: String,
    role: Role,
}

enum Cell<T> {
    Missing,
    NonFinite,
    Metric(T),
    Label(bool),
}

struct Row<T> {
    line: u64,
    id: String,
    turn: usize,
    cells: Vec<Cell<T>>,
}

fn is_missing(s: &str) -> bool {
    matches!(s, "" | "NA" | "na" | "N/A" | "null" | "NULL" | "None")
}

fn classify(headers: &[String], options: &LoadOptions) -> Result<Vec<Column>, IoError> {
    let mut columns = Vec::with_capacity(headers.len());
    let mut seen: HashMap<(bool, String), &str> = HashMap::new();
    for h in headers {
        let (role, name) = if *h == options.id_column {
            (Role::Id, h.clone())
        } else if *h == options.turn_column {
            (Role::Turn, h.clone())
        } else if let Some(stripped) = h.strip_prefix(LABEL_PREFIX) {
            (Role::Label, stripped.to_string())
        } else if options.labels.contains(h) {
            (Role::Label, h.clone())
        } else {
            (Role::Metric, h.clone())
        };
        if name.is_empty() {
            return Err(IoError::Schema(format!("column `{h}` has an empty name")));
        }
        if let Some(prev) = seen.insert((role == Role::Label, name.clone()), h) {
            return Err(IoError::Schema(format!("columns `{prev}` and `{h}` both define `{name}`")));
        }
        columns.push(Column { header: h.clone(), name, role });
    }
    for (role, want) in [(Role::Id, &options.id_column), (Role::Turn, &options.turn_column)] {
        if !columns.iter().any(|c| c.role == role) {
            return Err(IoError::Schema(format!("required column `{want}` is missing")));
        }
    }
    for declared in &options.labels {
        if !headers.contains(declared) {
            return Err(IoError::Schema(format!("declared label column `{declared}` is not in the header")));
        }
    }
    Ok(columns)
}

fn parse_row<T: Scalar>(line: u64, columns: &[Column], raw: &[Option<String>]) -> Result<Row<T>, IoError> {
    let mut id = None;
    let mut turn = None;
    let mut cells = Vec::with_capacity(columns.len());
    for (col, value) in columns.iter().zip(raw) {
        let text = value.as_deref().map(str::trim).unwrap_or("");
        let parse_err = |message: String| IoError::Parse { row: line, column: col.header.clone(), message };
        match col.role {
            Role::Id => {
                if is_missing(text) {
                    return Err(parse_err("empty conversation id".into()));
                }
                id = Some(text.to_string());
                cells.push(Cell::Missing);
            }
            Role::Turn => {
                let t = text.parse::<usize>().map_err(|_| parse_err(format!("`{text}` is not a non-negative integer")))?;
                turn = Some(t);
                cells.push(Cell::Missing);
            }
            Role::Metric => {
                if is_missing(text) {
                    cells.push(Cell::Missing);
                    continue;
                }
                let v = T::from_str_radix(text, 10).map_err(|_| parse_err(format!("`{text}` is not a number")))?;
                cells.push(if v.is_finite() { Cell::Metric(v) } else { Cell::NonFinite });
            }
            Role::Label => {
                if is_missing(text) {
                    cells.push(Cell::Missing);
                    continue;
                }
                let b = match text {
                    "0" | "0.0" | "false" | "False" => false,
                    "1" | "1.0" | "true" | "True" => true,
                    other => {
                        return Err(IoError::NonBinaryLabel { row: line, column: col.name.clone(), value: other.to_string() })
                    }
                };
                cells.push(Cell::Label(b));
            }
        }
    }
    let (Some(id), Some(turn)) = (id, turn) else {
        return Err(IoError::Parse { row: line, column: String::new(), message: "row is missing fields".into() });
    };
    Ok(Row { line, id, turn, cells })
}

fn read_delimited<T: Scalar>(
    text: &str,
    delimiter: u8,
    options: &LoadOptions,
) -> Result<(Vec<Column>, Vec<Row<T>>), IoError> {
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).has_headers(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| IoError::Parse { row: 1, column: String::new(), message: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let columns = classify(&headers, options)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line());
            IoError::Parse { row, column: String::new(), message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let raw: Vec<Option<String>> = record.iter().map(|s| Some(s.to_string())).collect();
        rows.push(parse_row(line, &columns, &raw)?);
    }
    Ok((columns, rows))
}

fn json_text(value: &Value) -> Option<String> {
    match value {
        Value::Null => None,
        Value::Bool(b) => Some(if *b { "1" } else { "0" }.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

fn read_json_lines<T: Scalar>(text: &str, options: &LoadOptions) -> Result<(Vec<Column>, Vec<Row<T>>), IoError> {
    let mut headers: Vec<String> = Vec::new();
    let mut objects = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line)
            .map_err(|e| IoError::Parse { row: line_no, column: String::new(), message: e.to_string() })?;
        let Value::Object(map) = value else {
            return Err(IoError::Parse { row: line_no, column: String::new(), message: "expected a JSON object".into() });
        };
        for key in map.keys() {
            if !headers.contains(key) {
                headers.push(key.clone());
            }
        }
        objects.push((line_no, map));
    }
    let columns = classify(&headers, options)?;
    let rows = objects
        .iter()
        .map(|(line, map)| {
            let raw: Vec<Option<String>> = columns.iter().map(|c| map.get(&c.header).and_then(json_text)).collect();
            parse_row(*line, &columns, &raw)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((columns, rows))
}

fn longest_run<T>(col: &[Option<T>]) -> usize {
    let (mut best, mut cur) = (0, 0);
    for v in col {
        cur = if v.is_some() { cur + 1 } else { 0 };
        best = best.max(cur);
    }
    best
}

fn assemble<T: Scalar>(
    columns: &[Column],
    rows: Vec<Row<T>>,
    options: &LoadOptions,
) -> Result<LoadedStudy<T>, IoError> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Row<T>>> = HashMap::new();
    for row in rows {
        if !groups.contains_key(&row.id) {
            order.push(row.id.clone());
        }
        groups.entry(row.id.clone()).or_default().push(row);
    }
    let mut report = ValidationReport::default();
    let mut conversations = Vec::with_capacity(order.len());
    for id in order {
        let mut turns = groups.remove(&id).expect("grouped above");
        turns.sort_by_key(|r| r.turn);
        for (expected, row) in turns.iter().enumerate() {
            if row.turn != expected {
                let what = if row.turn < expected { "repeats" } else { "skips to" };
                return Err(IoError::Schema(format!(
                    "conversation `{id}` {what} turn_index {} (expected {expected}, row {})",
                    row.turn, row.line
                )));
            }
        }
        let n = turns.len();
        let mut metrics = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for (ci, col) in columns.iter().enumerate() {
            match col.role {
                Role::Id | Role::Turn => {}
                Role::Metric => {
                    let mut values = Vec::with_capacity(n);
                    for row in &turns {
                        values.push(match row.cells[ci] {
                            Cell::Metric(v) => Some(v),
                            Cell::NonFinite => {
                                report.non_finite.push(NonFiniteEntry {
                                    row: row.line,
                                    conversation: id.clone(),
                                    column: col.name.clone(),
                                });
                                None
                            }
                            _ => None,
                        });
                    }
                    let observed = values.iter().flatten().count();
                    if observed == 0 {
                        continue;
                    }
                    if observed > 0 && observed < n {
                        report.missing.push(MissingEntry { conversation: id.clone(), column: col.name.clone(), count: n - observed });
                    }
                    let run = longest_run(&values);
                    if run < observed {
                        report.gaps.push(GapEntry { conversation: id.clone(), metric: col.name.clone(), observed, longest_run: run });
                    }
                    metrics.insert(col.name.clone(), values);
                }
                Role::Label => {
                    let values: Vec<Option<bool>> =
                        turns.iter().map(|r| if let Cell::Label(b) = r.cells[ci] { Some(b) } else { None }).collect();
                    let observed = values.iter().flatten().count();
                    if observed > 0 && observed < n {
                        report.missing.push(MissingEntry {
                            conversation: id.clone(),
                            column: format!("{LABEL_PREFIX}{}", col.name),
                            count: n - observed,
                        });
                    }
                    if observed > 0 {
                        labels.insert(col.name.clone(), values);
                    }
                }
            }
        }
        if n < options.min_conv_len {
            report.short_conversations.push((id.clone(), n));
        }
        conversations.push(ConversationRecord::new(id, n, metrics, labels)?);
    }
    Ok(LoadedStudy { dataset: StudyDataset::new(conversations)?, report })
}

/// Parses a turn table held in memory.
pub fn load_study_from_str<T: Scalar>(text: &str, options: &LoadOptions) -> Result<LoadedStudy<T>, IoError> {
    let (columns, rows) = match options.format {
        Format::Delimited { delimiter } => read_delimited(text, delimiter, options)?,
        Format::JsonLines => read_json_lines(text, options)?,
    };
    assemble(&columns, rows, options)
}

/// Reads and validates a turn table.
///
/// Missing and non-finite metric values are dropped for that metric only and
/// listed in the report; a column that is absent throughout a conversation
/// is left out of that conversation.
pub fn load_study<T: Scalar>(path: &Path, options: &LoadOptions) -> Result<LoadedStudy<T>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    load_study_from_str(&text, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<LoadedStudy<f64>, IoError> {
        load_study_from_str(text, &LoadOptions::default())
    }

    #[test]
    fn two_conversations() {
        let text = "conversation_id,turn_index,m,label:y\na,0,1.0,0\na,1,2.0,1\na,2,3.5,0\nb,2,0.5,1\nb,0,0.1,0\nb,1,0.2,1\n";
        let s = load(text).unwrap();
        assert_eq!(s.dataset.k(), 2);
        assert_eq!(s.dataset.total_turns(), 6);
        assert_eq!(s.dataset.metric_names(), ["m"]);
        assert_eq!(s.dataset.label_names(), ["y"]);
        let b = &s.dataset.conversations()[1];
        assert_eq!(b.metric("m").unwrap(), &[Some(0.1), Some(0.2), Some(0.5)]);
        assert_eq!(s.report.short_conversations.len(), 2);
    }

    #[test]
    fn turn_gap_names_the_conversation() {
        let err = load("conversation_id,turn_index,m\nx,0,1\nx,2,2\n").unwrap_err();
        assert!(matches!(&err, IoError::Schema(m) if m.contains("`x`")), "{err}");
        let err = load("conversation_id,turn_index,m\nx,0,1\nx,0,2\n").unwrap_err();
        assert!(matches!(&err, IoError::Schema(m) if m.contains("repeats")));
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = load("conversation_id,turn_index,m\nx,0,1\nx,1,abc\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { row: 3, ref column, .. } if column == "m"));
        let err = load("conversation_id,turn_index,label:y\nx,0,2\n").unwrap_err();
        assert!(matches!(err, IoError::NonBinaryLabel { row: 2, .. }));
        assert!(matches!(load("id,turn_index,m\nx,0,1\n"), Err(IoError::Schema(_))));
    }

    #[test]
    fn binary_metric_stays_a_metric() {
        let s = load("conversation_id,turn_index,flag\nx,0,0\nx,1,1\n").unwrap();
        assert_eq!(s.dataset.metric_names(), ["flag"]);
        assert!(s.dataset.label_names().is_empty());
        let opts = LoadOptions { labels: vec!["flag".into()], ..LoadOptions::default() };
        let s = load_study_from_str::<f64>("conversation_id,turn_index,flag\nx,0,0\nx,1,1\n", &opts).unwrap();
        assert_eq!(s.dataset.label_names(), ["flag"]);
    }

    #[test]
    fn missing_and_non_finite_are_reported() {
        let text = "conversation_id,turn_index,m\nx,0,1\nx,1,\nx,2,3\nx,3,inf\nx,4,5\nx,5,6\n";
        let s = load(text).unwrap();
        let col = s.dataset.conversations()[0].metric("m").unwrap();
        assert_eq!(col, &[Some(1.0), None, Some(3.0), None, Some(5.0), Some(6.0)]);
        assert_eq!(s.report.non_finite.len(), 1);
        assert_eq!(s.report.missing[0].count, 2);
        assert_eq!(s.report.gaps[0].longest_run, 2);
    }

    #[test]
    fn json_lines() {
        let text = "{\"conversation_id\":\"a\",\"turn_index\":0,\"m\":1.5,\"label:y\":true}\n\
                    {\"conversation_id\":\"a\",\"turn_index\":1,\"m\":null,\"label:y\":0}\n";
        let opts = LoadOptions { format: Format::JsonLines, ..LoadOptions::default() };
        let s = load_study_from_str::<f64>(text, &opts).unwrap();
        let c = &s.dataset.conversations()[0];
        assert_eq!(c.metric("m").unwrap(), &[Some(1.5), None]);
        assert_eq!(c.label("y").unwrap(), &[Some(true), Some(false)]);
    }
}
