use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{EventLog, LogError};

const SECS_PER_DAY: f64 = 86_400.0;

/// Descriptive statistics of a log. Durations are in days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogStats {
    pub num_cases: usize,
    pub num_activities: usize,
    pub num_events: usize,
    pub avg_case_length: f64,
    pub max_case_length: usize,
    pub avg_event_duration: f64,
    pub max_event_duration: f64,
    pub avg_case_duration: f64,
    pub max_case_duration: f64,
    pub num_variants: usize,
}

const COLUMNS: [&str; 10] = [
    "num_cases",
    "num_activities",
    "num_events",
    "avg_case_length",
    "max_case_length",
    "avg_event_duration",
    "max_event_duration",
    "avg_case_duration",
    "max_case_duration",
    "num_variants",
];

const TITLES: [&str; 10] = [
    "Num. cases",
    "Num. activities",
    "Num. events",
    "Avg. case length",
    "Max. case length",
    "Avg. event duration",
    "Max. event duration",
    "Avg. case duration",
    "Max. case duration",
    "Variants",
];

/// Computes [`LogStats`].
///
/// An event's duration is the gap to the next event of its trace; the last
/// event contributes none. The variant of a trace is its activity sequence.
pub fn compute_stats(log: &EventLog) -> Result<LogStats, LogError> {
    if log.is_empty() {
        return Err(LogError::Empty);
    }
    let num_cases = log.num_traces();
    let num_events = log.num_events();
    let mut gap_sum = 0.0;
    let mut gap_count = 0usize;
    let mut gap_max = 0.0f64;
    let mut case_sum = 0.0;
    let mut case_max = 0.0f64;
    let mut variants: HashSet<Vec<&str>> = HashSet::new();
    let mut activities: HashSet<&str> = HashSet::new();

    for trace in &log.traces {
        for w in trace.events.windows(2) {
            let d = w[1].timestamp.secs_since(w[0].timestamp) / SECS_PER_DAY;
            gap_sum += d;
            gap_count += 1;
            gap_max = gap_max.max(d);
        }
        let d = trace.last_timestamp().secs_since(trace.first_timestamp()) / SECS_PER_DAY;
        case_sum += d;
        case_max = case_max.max(d);
        variants.insert(trace.activities().collect());
        activities.extend(trace.activities());
    }

    Ok(LogStats {
        num_cases,
        num_activities: activities.len(),
        num_events,
        avg_case_length: num_events as f64 / num_cases as f64,
        max_case_length: log.max_trace_len(),
        avg_event_duration: if gap_count == 0 {
            0.0
        } else {
            gap_sum / gap_count as f64
        },
        max_event_duration: gap_max,
        avg_case_duration: case_sum / num_cases as f64,
        max_case_duration: case_max,
        num_variants: variants.len(),
    })
}

impl LogStats {
    fn cells(&self) -> [String; 10] {
        [
            self.num_cases.to_string(),
            self.num_activities.to_string(),
            self.num_events.to_string(),
            format!("{:.2}", self.avg_case_length),
            self.max_case_length.to_string(),
            format!("{:.2}", self.avg_event_duration),
            format!("{:.2}", self.max_event_duration),
            format!("{:.2}", self.avg_case_duration),
            format!("{:.2}", self.max_case_duration),
            self.num_variants.to_string(),
        ]
    }

    /// Header line plus one data row, values rounded to two decimals.
    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", COLUMNS.join(","), self.cells().join(","))
    }

    /// Aligned two-line text table, one column per statistic.
    pub fn to_table(&self) -> String {
        let cells = self.cells();
        let widths: Vec<usize> = TITLES.iter().zip(&cells).map(|(t, c)| t.len().max(c.len())).collect();
        let mut out = String::new();
        for (t, w) in TITLES.iter().zip(&widths) {
            out.push_str(&format!("{t:>w$}  "));
        }
        out = out.trim_end().to_owned();
        out.push('\n');
        let mut row = String::new();
        for (c, w) in cells.iter().zip(&widths) {
            row.push_str(&format!("{c:>w$}  "));
        }
        out.push_str(row.trim_end());
        out.push('\n');
        out
    }
}
