use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Event, EventLog, LogError, Timestamp, Trace};

/// Names of the required columns of an event-log CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub case_id: String,
    pub activity: String,
    pub timestamp: String,
    /// chrono format string; when unset, ISO-8601 and `dd-MM-yyyy HH:mm:ss`
    /// are recognised.
    pub timestamp_format: Option<String>,
    /// Attribute columns to keep. `None` keeps every remaining column.
    pub attributes: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            case_id: "case_id".into(),
            activity: "activity".into(),
            timestamp: "timestamp".into(),
            timestamp_format: None,
            attributes: None,
        }
    }
}

impl CsvSchema {
    pub fn new(case_id: &str, activity: &str, timestamp: &str) -> Self {
        CsvSchema {
            case_id: case_id.into(),
            activity: activity.into(),
            timestamp: timestamp.into(),
            ..Default::default()
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, LogError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| LogError::MissingColumn(name.to_owned()))
}

/// Reads an event log from CSV.
///
/// Events are grouped by case in order of first appearance and each trace is
/// stable-sorted by timestamp, so ties keep file order. Non-required columns
/// become categorical attributes; empty cells are missing values. Row numbers
/// in errors are file line numbers (the header is line 1).
pub fn parse_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<EventLog, LogError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let case_col = column(&headers, &schema.case_id)?;
    let act_col = column(&headers, &schema.activity)?;
    let ts_col = column(&headers, &schema.timestamp)?;

    let attr_cols: Vec<(usize, String)> = match &schema.attributes {
        Some(names) => names
            .iter()
            .map(|n| column(&headers, n).map(|i| (i, n.clone())))
            .collect::<Result<_, _>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != case_col && *i != act_col && *i != ts_col)
            .map(|(i, h)| (i, h.trim().to_owned()))
            .collect(),
    };

    let mut cases: IndexMap<String, Vec<Event>> = IndexMap::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let required = |idx: usize, name: &str| -> Result<String, LogError> {
            match record.get(idx).map(str::trim) {
                Some(v) if !v.is_empty() => Ok(v.to_owned()),
                _ => Err(LogError::MissingValue {
                    row,
                    column: name.to_owned(),
                }),
            }
        };
        let case_id = required(case_col, &schema.case_id)?;
        let activity = required(act_col, &schema.activity)?;
        let raw_ts = required(ts_col, &schema.timestamp)?;
        let timestamp = match &schema.timestamp_format {
            Some(fmt) => Timestamp::parse_with_format(&raw_ts, fmt),
            None => Timestamp::parse(&raw_ts),
        }
        .ok_or(LogError::Timestamp { row, value: raw_ts })?;

        let mut event = Event::new(activity, case_id.clone(), timestamp);
        for (idx, name) in &attr_cols {
            let value = record
                .get(*idx)
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(str::to_owned);
            event.attributes.insert(name.clone(), value);
        }
        cases.entry(case_id).or_default().push(event);
    }

    if cases.is_empty() {
        return Err(LogError::Empty);
    }

    let traces = cases
        .into_iter()
        .map(|(case_id, mut events)| {
            events.sort_by_key(|e| e.timestamp);
            Trace::new(case_id, events)
        })
        .collect::<Result<Vec<_>, _>>()?;
    EventLog::from_traces(traces)
}

/// Writes a log as CSV with `case_id,activity,timestamp` followed by the
/// attribute columns. Missing values are written as empty cells.
pub fn write_csv<W: Write>(log: &EventLog, sink: W) -> Result<(), LogError> {
    let mut writer = csv::Writer::from_writer(sink);
    let names: Vec<&str> = log.attribute_names().collect();
    let mut header = vec!["case_id", "activity", "timestamp"];
    header.extend(names.iter().copied());
    writer.write_record(&header)?;
    for trace in &log.traces {
        for e in &trace.events {
            let ts = e.timestamp.to_string();
            let mut row: Vec<&str> = vec![&e.case_id, &e.activity, &ts];
            for name in &names {
                row.push(e.attributes.get(*name).and_then(|v| v.as_deref()).unwrap_or(""));
            }
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::MISSING;

    const EXCERPT: &str = "\
Case ID,Activity,Timestamp,Resource
Case2118,Assign seriousness,14-01-2010 07:52:50,Resource 2
Case2118,Take in charge ticket,09-02-2010 13:01:11,Resource 21
Case2118,Resolve ticket,17-02-2010 07:44:53,Resource 21
Case2118,Closed,17-02-2020 07:44:59,Resource 21
Case2088,Assign seriousness,04-02-2010 08:37:45,Resource 2
Case2088,Take in charge ticket,04-02-2010 09:01:28,Resource 2
Case2088,Create SW anomaly,04-02-2010 09:01:35,Resource 2
Case2088,Resolve ticket,16-03-2010 13:08:40,Resource 2
Case2088,Closed,31-03-2010 11:08:53,Resource 5
";

    fn excerpt_schema() -> CsvSchema {
        CsvSchema::new("Case ID", "Activity", "Timestamp")
    }

    #[test]
    fn helpdesk_excerpt() {
        let log = parse_csv(EXCERPT.as_bytes(), &excerpt_schema()).unwrap();
        assert_eq!(log.num_traces(), 2);
        assert_eq!(log.num_events(), 9);
        // Five distinct activity labels; the end marker makes six.
        assert_eq!(log.activity_vocab.len(), 5);
        assert_eq!(crate::eventlog::augment_eoc(&log).unwrap().activity_vocab.len(), 6);
        assert_eq!(log.attribute_names().collect::<Vec<_>>(), vec!["Resource"]);
        assert_eq!(log.traces[0].case_id, "Case2118");
        assert_eq!(log.traces[0].events[1].activity, "Take in charge ticket");
        assert_eq!(log.traces[0].events[1].attribute_label("Resource"), "Resource 21");
    }

    #[test]
    fn header_only_is_empty_log() {
        let r = parse_csv("case_id,activity,timestamp\n".as_bytes(), &CsvSchema::default());
        assert!(matches!(r, Err(LogError::Empty)));
    }

    #[test]
    fn shuffled_rows_are_sorted() {
        let csv =
            "case_id,activity,timestamp\nc,C,2020-01-03T00:00:00\nc,A,2020-01-01T00:00:00\nc,B,2020-01-02T00:00:00\n";
        let log = parse_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(log.traces.len(), 1);
        assert_eq!(log.traces[0].activities().collect::<Vec<_>>(), vec!["A", "B", "C"]);
    }

    #[test]
    fn ties_keep_file_order() {
        let csv =
            "case_id,activity,timestamp\nc,Z,2020-01-01T00:00:00\nc,Y,2020-01-01T00:00:00\nc,X,2019-12-31T00:00:00\n";
        let log = parse_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(log.traces[0].activities().collect::<Vec<_>>(), vec!["X", "Z", "Y"]);
    }

    #[test]
    fn malformed_timestamp_reports_row() {
        let csv = "case_id,activity,timestamp\nc,A,2020-01-01T00:00:00\nc,B,not a time\n";
        match parse_csv(csv.as_bytes(), &CsvSchema::default()) {
            Err(LogError::Timestamp { row, value }) => {
                assert_eq!(row, 3);
                assert_eq!(value, "not a time");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_row_names_triple() {
        let csv = "case_id,activity,timestamp\nc,A,2020-01-01T00:00:00\nc,A,2020-01-01T00:00:00\n";
        let err = parse_csv(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("\"A\""), "{err}");
        assert!(matches!(err, LogError::Duplicate { .. }));
    }

    #[test]
    fn missing_cells_get_reserved_label() {
        let csv = "case_id,activity,timestamp,res\nc,A,2020-01-01T00:00:00,\nc,B,2020-01-02T00:00:00,r1\n";
        let log = parse_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(log.traces[0].events[0].attribute_label("res"), MISSING);
        let vocab = &log.attribute_vocabs["res"];
        assert_eq!(vocab.index_of(MISSING), Some(0));
        assert_eq!(vocab.index_of("r1"), Some(1));
    }

    #[test]
    fn unknown_column_is_reported() {
        let r = parse_csv(EXCERPT.as_bytes(), &CsvSchema::default());
        assert!(matches!(r, Err(LogError::MissingColumn(c)) if c == "case_id"));
    }

    #[test]
    fn write_then_parse_is_identity() {
        let log = parse_csv(EXCERPT.as_bytes(), &excerpt_schema()).unwrap();
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        let again = parse_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(log, again);
    }
}
