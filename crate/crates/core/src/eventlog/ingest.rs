use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Event, EventId, EventLog, IngestError, ObjectId};
use crate::units::TimeUnit;

pub const DEFAULT_TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// Abort on the first malformed row.
    #[default]
    Strict,
    /// Skip malformed rows and report them.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    #[default]
    Csv,
    #[serde(rename = "jsonl")]
    JsonLines,
}

impl SourceFormat {
    /// `.jsonl` / `.ndjson` select JSON-lines, everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("jsonl" | "ndjson") => SourceFormat::JsonLines,
            _ => SourceFormat::Csv,
        }
    }
}

/// Maps source columns (or JSON fields) onto event fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IngestionConfig {
    /// Column holding event ids; ids are `e<row>` when absent.
    pub id_column: Option<String>,
    /// Columns whose values are the objects of an event (product first, then e.g. client).
    pub object_columns: Vec<String>,
    pub quantity_column: String,
    pub timestamp_column: String,
    /// Extra columns kept verbatim as attributes.
    pub attribute_columns: Vec<String>,
    pub timestamp_format: String,
    pub time_unit: TimeUnit,
    pub mode: ParseMode,
    pub format: SourceFormat,
}

impl Default for IngestionConfig {
    fn default() -> Self {
        Self {
            id_column: None,
            object_columns: vec!["product".to_owned()],
            quantity_column: "quantity".to_owned(),
            timestamp_column: "timestamp".to_owned(),
            attribute_columns: Vec::new(),
            timestamp_format: DEFAULT_TIMESTAMP_FORMAT.to_owned(),
            time_unit: TimeUnit::Hours,
            mode: ParseMode::Strict,
            format: SourceFormat::Csv,
        }
    }
}

impl IngestionConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.object_columns.is_empty() {
            return Err(IngestError::InvalidConfig("at least one object column is required".into()));
        }
        let mut seen = HashSet::new();
        let all = self
            .id_column
            .iter()
            .chain(&self.object_columns)
            .chain([&self.quantity_column, &self.timestamp_column])
            .chain(&self.attribute_columns);
        for col in all {
            if !seen.insert(col.as_str()) {
                return Err(IngestError::InvalidConfig(format!("column `{col}` mapped more than once")));
            }
        }
        if self.timestamp_format.is_empty() {
            return Err(IngestError::InvalidConfig("empty timestamp format".into()));
        }
        Ok(())
    }

    fn parse_timestamp(&self, raw: &str) -> Result<DateTime<Utc>, String> {
        let raw = raw.trim();
        let fmt = self.timestamp_format.as_str();
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(dt.and_utc());
        }
        if let Ok(dt) = DateTime::parse_from_str(raw, fmt) {
            return Ok(dt.with_timezone(&Utc));
        }
        if let Ok(d) = NaiveDate::parse_from_str(raw, fmt) {
            return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
        }
        DateTime::parse_from_rfc3339(raw)
            .map(|dt| dt.with_timezone(&Utc))
            .map_err(|_| format!("timestamp `{raw}` does not match `{fmt}`"))
    }
}

/// Skipped row in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowIssue {
    pub line: u64,
    pub reason: String,
}

/// Parsed log plus the rows that lenient mode skipped.
#[derive(Debug, Clone)]
pub struct ParseReport {
    pub log: EventLog,
    pub skipped: Vec<RowIssue>,
}

impl ParseReport {
    pub fn skip_count(&self) -> usize {
        self.skipped.len()
    }
}

pub fn parse_log_file(path: impl AsRef<Path>, config: &IngestionConfig) -> Result<ParseReport, IngestError> {
    let file = File::open(path.as_ref())?;
    parse_log(BufReader::new(file), config)
}

/// Parses CSV (with header) or JSON-lines according to `config.format`.
pub fn parse_log<R: Read>(source: R, config: &IngestionConfig) -> Result<ParseReport, IngestError> {
    config.validate()?;
    let mut builder = Builder::new(config);
    match config.format {
        SourceFormat::Csv => parse_csv(source, config, &mut builder)?,
        SourceFormat::JsonLines => parse_jsonl(BufReader::new(source), config, &mut builder)?,
    }
    builder.finish()
}

struct RawRow<'a> {
    id: Option<&'a str>,
    objects: Vec<String>,
    quantity: Option<&'a str>,
    timestamp: Option<&'a str>,
    attributes: BTreeMap<String, String>,
}

struct Builder<'c> {
    config: &'c IngestionConfig,
    events: Vec<Event>,
    ids: HashSet<EventId>,
    skipped: Vec<RowIssue>,
}

impl<'c> Builder<'c> {
    fn new(config: &'c IngestionConfig) -> Self {
        Self { config, events: Vec::new(), ids: HashSet::new(), skipped: Vec::new() }
    }

    fn reject(&mut self, line: u64, reason: String) -> Result<(), IngestError> {
        match self.config.mode {
            ParseMode::Strict => Err(IngestError::MalformedRow { line, reason }),
            ParseMode::Lenient => {
                self.skipped.push(RowIssue { line, reason });
                Ok(())
            }
        }
    }

    fn push(&mut self, line: u64, row_index: usize, row: RawRow<'_>) -> Result<(), IngestError> {
        match self.build(row_index, row) {
            Ok(event) => {
                if self.ids.insert(event.id().clone()) {
                    self.events.push(event);
                    Ok(())
                } else {
                    let reason = format!("duplicate event id `{}`", event.id());
                    self.reject(line, reason)
                }
            }
            Err(reason) => self.reject(line, reason),
        }
    }

    fn build(&self, row_index: usize, row: RawRow<'_>) -> Result<Event, String> {
        let id = match row.id {
            Some(id) if !id.trim().is_empty() => EventId::new(id.trim()),
            Some(_) => return Err("empty event id".into()),
            None => EventId::new(format!("e{}", row_index + 1)),
        };
        let objects: BTreeSet<ObjectId> =
            row.objects.into_iter().filter(|o| !o.is_empty()).map(ObjectId::from).collect();
        if objects.is_empty() {
            return Err("no object identifiers".into());
        }
        let quantity = parse_quantity(row.quantity.ok_or("missing quantity")?)?;
        let timestamp = self.config.parse_timestamp(row.timestamp.ok_or("missing timestamp")?)?;
        Event::new(id, objects, quantity, timestamp, row.attributes).map_err(|e| e.to_string())
    }

    fn finish(self) -> Result<ParseReport, IngestError> {
        Ok(ParseReport { log: EventLog::new(self.events)?, skipped: self.skipped })
    }
}

fn parse_quantity(raw: &str) -> Result<u32, String> {
    let raw = raw.trim();
    if let Ok(q) = raw.parse::<u32>() {
        return if q >= 1 { Ok(q) } else { Err(format!("quantity {q} < 1")) };
    }
    // Spreadsheet exports often write integers as `3.0`.
    match raw.parse::<f64>() {
        Ok(f) if f.fract() == 0.0 && f >= 1.0 && f <= f64::from(u32::MAX) => Ok(f as u32),
        Ok(f) if f.fract() == 0.0 => Err(format!("quantity {f} < 1")),
        _ => Err(format!("quantity `{raw}` is not a positive integer")),
    }
}

fn parse_csv<R: Read>(source: R, config: &IngestionConfig, builder: &mut Builder<'_>) -> Result<(), IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_owned()))
    };
    let id_idx = config.id_column.as_deref().map(index_of).transpose()?;
    let object_idx = config.object_columns.iter().map(|c| index_of(c)).collect::<Result<Vec<_>, _>>()?;
    let quantity_idx = index_of(&config.quantity_column)?;
    let timestamp_idx = index_of(&config.timestamp_column)?;
    let attr_idx = config
        .attribute_columns
        .iter()
        .map(|c| index_of(c).map(|i| (c.clone(), i)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut record = csv::StringRecord::new();
    let mut row_index = 0usize;
    loop {
        let line = reader.position().line() + 1;
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) => {
                builder.reject(line, e.to_string())?;
                row_index += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        }
        let line = record.position().map_or(line, |p| p.line());
        if record.len() != headers.len() {
            builder.reject(line, format!("expected {} fields, found {}", headers.len(), record.len()))?;
            row_index += 1;
            continue;
        }
        let row = RawRow {
            id: id_idx.map(|i| &record[i]),
            objects: object_idx.iter().map(|&i| record[i].trim().to_owned()).collect(),
            quantity: Some(&record[quantity_idx]),
            timestamp: Some(&record[timestamp_idx]),
            attributes: attr_idx.iter().map(|(name, i)| (name.clone(), record[*i].to_owned())).collect(),
        };
        builder.push(line, row_index, row)?;
        row_index += 1;
    }
    Ok(())
}

fn value_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Accepts the canonical format (`objects` array, `attrs` object) as well as
/// flat records using the configured field names.
fn parse_jsonl<R: BufRead>(source: R, config: &IngestionConfig, builder: &mut Builder<'_>) -> Result<(), IngestError> {
    let mut row_index = 0usize;
    for (n, line) in source.lines().enumerate() {
        let line_no = n as u64 + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let map = match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(map)) => map,
            Ok(_) => {
                builder.reject(line_no, "line is not a JSON object".into())?;
                row_index += 1;
                continue;
            }
            Err(e) => {
                builder.reject(line_no, e.to_string())?;
                row_index += 1;
                continue;
            }
        };
        let objects = match map.get("objects") {
            Some(Value::Array(items)) => items.iter().filter_map(value_text).collect(),
            _ => config.object_columns.iter().filter_map(|c| map.get(c).and_then(value_text)).collect(),
        };
        let mut attributes: BTreeMap<String, String> = match map.get("attrs") {
            Some(Value::Object(attrs)) => {
                attrs.iter().filter_map(|(k, v)| value_text(v).map(|v| (k.clone(), v))).collect()
            }
            _ => BTreeMap::new(),
        };
        for col in &config.attribute_columns {
            if let Some(v) = map.get(col).and_then(value_text) {
                attributes.insert(col.clone(), v);
            }
        }
        let id_field = config.id_column.as_deref().unwrap_or("id");
        let id = map.get(id_field).and_then(value_text);
        let quantity = map.get(&config.quantity_column).and_then(value_text);
        let timestamp = map.get(&config.timestamp_column).and_then(value_text);
        let row = RawRow {
            id: id.as_deref(),
            objects,
            quantity: quantity.as_deref(),
            timestamp: timestamp.as_deref(),
            attributes,
        };
        builder.push(line_no, row_index, row)?;
        row_index += 1;
    }
    Ok(())
}
