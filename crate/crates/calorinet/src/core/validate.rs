//! Report-only dataset inspection: stream durations, gap intervals, label
//! coverage. Mirrors the missing-data picture of the dataset without
//! mutating anything.

use crate::core::types::*;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub subject_id: String,
    pub session_id: String,
    /// (first, last) frame per stream, `None` when the stream is empty.
    pub silhouette_span: Option<(u64, u64)>,
    pub accel_span: Option<(u64, u64)>,
    pub calorie_span: Option<(u64, u64)>,
    /// Maximal runs of frames with no silhouette file, inside the span.
    pub silhouette_gaps: Vec<(u64, u64)>,
    /// Maximal runs of MISSING calorie frames.
    pub calorie_gaps: Vec<(u64, u64)>,
    /// Fraction of frames in [0, last_frame] covered by a label interval.
    pub label_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub sessions: Vec<SessionReport>,
}

impl ValidationReport {
    pub fn subject_count(&self) -> usize {
        let mut ids: Vec<&str> = self.sessions.iter().map(|s| s.subject_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        ids.len()
    }
}

/// Builds a [`ValidationReport`] over an already-loaded dataset.
pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    let mut sessions = Vec::new();
    for subject in &dataset.subjects {
        for session in &subject.sessions {
            sessions.push(session_report(&subject.id, session));
        }
    }
    ValidationReport { sessions }
}

fn span<T, F: Fn(&T) -> u64>(items: &[T], ts: F) -> Option<(u64, u64)> {
    match (items.first(), items.last()) {
        (Some(a), Some(b)) => Some((ts(a), ts(b))),
        _ => None,
    }
}

fn session_report(subject_id: &str, session: &Session) -> SessionReport {
    let silhouette_span = span(&session.silhouettes, |f| f.timestamp);
    let accel_span = span(&session.accel, |s| s.timestamp);
    let calorie_span = span(&session.calories, |c| c.timestamp);

    // Silhouette gaps: missing frame indices strictly inside the span.
    let mut silhouette_gaps = Vec::new();
    for pair in session.silhouettes.windows(2) {
        if pair[1].timestamp > pair[0].timestamp + 1 {
            silhouette_gaps.push((pair[0].timestamp + 1, pair[1].timestamp - 1));
        }
    }

    // Calorie gaps: runs of MISSING values in the expanded stream.
    let mut calorie_gaps = Vec::new();
    let mut run_start: Option<u64> = None;
    for c in &session.calories {
        match (c.value, run_start) {
            (None, None) => run_start = Some(c.timestamp),
            (Some(_), Some(start)) => {
                calorie_gaps.push((start, c.timestamp - 1));
                run_start = None;
            }
            _ => {}
        }
    }
    if let (Some(start), Some(last)) = (run_start, session.calories.last()) {
        calorie_gaps.push((start, last.timestamp));
    }

    let last = session.last_frame();
    let labeled: u64 = session
        .labels
        .iter()
        .map(|l| l.end.min(last).saturating_sub(l.start) + 1)
        .sum();
    let label_coverage = if last == 0 && session.labels.is_empty() {
        0.0
    } else {
        labeled as f64 / (last + 1) as f64
    };

    SessionReport {
        subject_id: subject_id.to_string(),
        session_id: session.id.clone(),
        silhouette_span,
        accel_span,
        calorie_span,
        silhouette_gaps,
        calorie_gaps,
        label_coverage,
    }
}
