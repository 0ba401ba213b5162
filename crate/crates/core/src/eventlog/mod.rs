//! Object-centric event logs of sales transactions.
//!
//! An [`EventLog`] is a set of events, each referencing a non-empty set of
//! objects (products, and optionally clients), carrying a purchased quantity,
//! free-form attributes and a timestamp. Discovery works on per-product
//! [`ProductSublog`]s extracted with [`EventLog::extract_sublog`].

mod ingest;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use ingest::{
    parse_log, parse_log_file, IngestionConfig, ParseMode, ParseReport, RowIssue, SourceFormat, DEFAULT_TIMESTAMP_FORMAT,
};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid ingestion config: {0}")]
    InvalidConfig(String),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("duplicate event id `{0}`")]
    DuplicateEventId(EventId),
    #[error("object `{0}` does not occur in the log")]
    UnknownObject(ObjectId),
}

/// Identifier of an event (a transaction).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(String);

/// Identifier of an object referenced by events (a product or a client).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(String);

macro_rules! string_id {
    ($ty:ident) => {
        impl $ty {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $ty {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $ty {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(EventId);
string_id!(ObjectId);

/// One transaction: which objects it touches, how many units, and when.
///
/// Serialized as one line of the canonical JSON-lines format:
/// `{"id", "objects", "quantity", "timestamp", "attrs"?}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EventRecord")]
pub struct Event {
    id: EventId,
    objects: BTreeSet<ObjectId>,
    quantity: u32,
    timestamp: DateTime<Utc>,
    #[serde(rename = "attrs", skip_serializing_if = "BTreeMap::is_empty")]
    attributes: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct EventRecord {
    id: EventId,
    objects: BTreeSet<ObjectId>,
    quantity: u32,
    timestamp: DateTime<Utc>,
    #[serde(default)]
    attrs: BTreeMap<String, String>,
}

impl TryFrom<EventRecord> for Event {
    type Error = IngestError;

    fn try_from(r: EventRecord) -> Result<Self, Self::Error> {
        Event::new(r.id, r.objects, r.quantity, r.timestamp, r.attrs)
    }
}

impl Event {
    pub fn new(
        id: EventId,
        objects: BTreeSet<ObjectId>,
        quantity: u32,
        timestamp: DateTime<Utc>,
        attributes: BTreeMap<String, String>,
    ) -> Result<Self, IngestError> {
        if objects.is_empty() {
            return Err(IngestError::InvalidEvent(format!("event `{id}` references no objects")));
        }
        if quantity == 0 {
            return Err(IngestError::InvalidEvent(format!("event `{id}` has quantity 0")));
        }
        Ok(Self { id, objects, quantity, timestamp, attributes })
    }

    pub fn id(&self) -> &EventId {
        &self.id
    }

    pub fn objects(&self) -> &BTreeSet<ObjectId> {
        &self.objects
    }

    pub fn quantity(&self) -> u32 {
        self.quantity
    }

    pub fn timestamp(&self) -> DateTime<Utc> {
        self.timestamp
    }

    pub fn attributes(&self) -> &BTreeMap<String, String> {
        &self.attributes
    }

    pub fn involves(&self, object: &ObjectId) -> bool {
        self.objects.contains(object)
    }
}

/// An event log `(E, O, f_o, f_a, f_t)`. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    events: Vec<Event>,
    objects: BTreeSet<ObjectId>,
}

impl EventLog {
    /// Builds a log; the object set is the union of all event object sets.
    pub fn new(events: Vec<Event>) -> Result<Self, IngestError> {
        let mut seen = HashSet::with_capacity(events.len());
        for e in &events {
            if !seen.insert(e.id.clone()) {
                return Err(IngestError::DuplicateEventId(e.id.clone()));
            }
        }
        let objects = events.iter().flat_map(|e| e.objects.iter().cloned()).collect();
        Ok(Self { events, objects })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn objects(&self) -> &BTreeSet<ObjectId> {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Restricts the log to events that reference `product`, ordered by
    /// timestamp. Events sharing a timestamp keep their log order.
    pub fn extract_sublog(&self, product: &ObjectId) -> Result<ProductSublog, IngestError> {
        if !self.objects.contains(product) {
            return Err(IngestError::UnknownObject(product.clone()));
        }
        let mut events: Vec<Event> = self.events.iter().filter(|e| e.involves(product)).cloned().collect();
        events.sort_by_key(Event::timestamp);
        Ok(ProductSublog { product: product.clone(), events })
    }

    /// One summary per object that occurs in at least one event, ordered by id.
    pub fn list_products(&self) -> Vec<ProductSummary> {
        let mut by_object: BTreeMap<&ObjectId, ProductSummary> = BTreeMap::new();
        for e in &self.events {
            for o in &e.objects {
                by_object
                    .entry(o)
                    .and_modify(|s| {
                        s.count += 1;
                        s.first = s.first.min(e.timestamp);
                        s.last = s.last.max(e.timestamp);
                    })
                    .or_insert_with(|| ProductSummary {
                        id: o.clone(),
                        count: 1,
                        first: e.timestamp,
                        last: e.timestamp,
                    });
            }
        }
        by_object.into_values().collect()
    }

    /// Writes the canonical JSON-lines representation.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), IngestError> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e).map_err(io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads the canonical JSON-lines representation written by [`write_jsonl`](Self::write_jsonl).
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, IngestError> {
        let mut events = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: Event = serde_json::from_str(&line)
                .map_err(|e| IngestError::MalformedRow { line: n as u64 + 1, reason: e.to_string() })?;
            events.push(event);
        }
        Self::new(events)
    }
}

/// Per-object entry of [`EventLog::list_products`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProductSummary {
    pub id: ObjectId,
    pub count: usize,
    #[serde(rename = "firstTs")]
    pub first: DateTime<Utc>,
    #[serde(rename = "lastTs")]
    pub last: DateTime<Utc>,
}

/// Events of one product, sorted by timestamp (stable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductSublog {
    product: ObjectId,
    events: Vec<Event>,
}

impl ProductSublog {
    pub fn product(&self) -> &ObjectId {
        &self.product
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Re-extracts the same product; a sublog is closed under extraction.
    pub fn extract_sublog(&self, product: &ObjectId) -> Result<ProductSublog, IngestError> {
        if !self.events.iter().any(|e| e.involves(product)) {
            return Err(IngestError::UnknownObject(product.clone()));
        }
        let mut events: Vec<Event> = self.events.iter().filter(|e| e.involves(product)).cloned().collect();
        events.sort_by_key(Event::timestamp);
        Ok(ProductSublog { product: product.clone(), events })
    }

    /// Largest quantity purchased in a single event, if any.
    pub fn max_quantity(&self) -> Option<u32> {
        self.events.iter().map(Event::quantity).max()
    }
}

impl ProductSublog {
    /// Builds a sublog directly from events of one product (synthetic data, tests).
    pub fn from_events(product: ObjectId, events: Vec<Event>) -> Result<Self, IngestError> {
        EventLog::new(events)?.extract_sublog(&product)
    }
}
