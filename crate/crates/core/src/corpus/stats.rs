use serde::Serialize;

use super::{Corpus, HdmEvent};

/// Histogram bin width for event durations.
pub const HISTOGRAM_BIN_MS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub start_ms: u64,
    pub end_ms: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub conversations: usize,
    pub utterances: usize,
    pub events: usize,
    /// Absent when there are no events.
    pub mean_event_duration_s: Option<f64>,
    pub median_event_duration_s: Option<f64>,
    pub histogram: Vec<HistogramBin>,
}

pub fn corpus_stats(corpus: &Corpus, events: &[HdmEvent]) -> StatsReport {
    let mut durations: Vec<f64> = events.iter().map(HdmEvent::duration_s).collect();
    durations.sort_by(f64::total_cmp);

    let mean = (!durations.is_empty()).then(|| durations.iter().sum::<f64>() / durations.len() as f64);
    let median = (!durations.is_empty()).then(|| {
        let n = durations.len();
        if n % 2 == 1 {
            durations[n / 2]
        } else {
            (durations[n / 2 - 1] + durations[n / 2]) / 2.0
        }
    });

    // Bin on whole milliseconds so 0.3 s lands in [300, 400).
    let mut histogram: Vec<HistogramBin> = Vec::new();
    for d in &durations {
        let ms = (d * 1000.0).round().max(0.0) as u64;
        let bin = (ms / HISTOGRAM_BIN_MS) as usize;
        while histogram.len() <= bin {
            let start_ms = histogram.len() as u64 * HISTOGRAM_BIN_MS;
            histogram.push(HistogramBin {
                start_ms,
                end_ms: start_ms + HISTOGRAM_BIN_MS,
                count: 0,
            });
        }
        histogram[bin].count += 1;
    }

    StatsReport {
        conversations: corpus.len(),
        utterances: corpus.utterance_count(),
        events: events.len(),
        mean_event_duration_s: mean,
        median_event_duration_s: median,
        histogram,
    }
}
