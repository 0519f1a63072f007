use super::{Event, EventLog, LogError, Timestamp, Trace};

/// `n_traces` identical traces over `activities`, `gap_secs` apart. Trace
/// `i` starts `i` days after the epoch.
pub fn deterministic_log(activities: &[&str], n_traces: usize, gap_secs: f64) -> Result<EventLog, LogError> {
    let traces = (0..n_traces)
        .map(|i| {
            let case = format!("case{i:05}");
            let start = Timestamp::from_secs_f64(i as f64 * 86_400.0);
            let events = activities
                .iter()
                .enumerate()
                .map(|(j, a)| Event::new(*a, case.clone(), start.add_secs(j as f64 * gap_secs)))
                .collect();
            Trace::new(case, events)
        })
        .collect::<Result<Vec<_>, _>>()?;
    EventLog::from_traces(traces)
}
