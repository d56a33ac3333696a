use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::spectra::TransitionKey;

use super::InterrogationError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub cycle: u64,
    pub timestamp_s: f64,
    /// Frequency relative to the series reference, Hz.
    pub frequency_hz: f64,
}

/// Per-cycle frequency estimates of one transition.
///
/// Estimates are stored relative to `reference_hz` (the table frequency of
/// the transition) because optical frequencies in f64 have a resolution of
/// roughly 0.1 Hz, too coarse for sub-Hz closure statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySeries {
    pub transition: TransitionKey,
    pub reference_hz: f64,
    /// Time between consecutive samples of this transition.
    pub cycle_duration_s: f64,
    pub samples: Vec<SeriesSample>,
}

impl FrequencySeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.frequency_hz).collect()
    }

    /// The series without its first `n` samples.
    pub fn skip(&self, n: usize) -> FrequencySeries {
        FrequencySeries {
            samples: self.samples.iter().skip(n).copied().collect(),
            ..self.clone()
        }
    }

    /// Writes `cycle,timestamp_s,transition,freq_hz` rows for all `series`.
    /// `freq_hz` is relative to the transition's reference frequency, which
    /// is recorded in a leading `# reference_hz <key> <value>` comment.
    pub fn write_csv<W: Write>(series: &[FrequencySeries], mut out: W) -> Result<(), InterrogationError> {
        for s in series {
            writeln!(out, "# reference_hz {} {}", s.transition, s.reference_hz).map_err(csv::Error::from)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cycle", "timestamp_s", "transition", "freq_hz"])?;
        let mut rows: Vec<(&SeriesSample, &TransitionKey)> = series
            .iter()
            .flat_map(|s| s.samples.iter().map(move |x| (x, &s.transition)))
            .collect();
        rows.sort_by_key(|(x, _)| x.cycle);
        for (x, key) in rows {
            w.write_record([
                x.cycle.to_string(),
                x.timestamp_s.to_string(),
                key.to_string(),
                x.frequency_hz.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads series written by [`FrequencySeries::write_csv`], one per
    /// transition, in order of first appearance. Missing references default
    /// to 0 Hz; the cycle duration is the spacing of the timestamps.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<FrequencySeries>, InterrogationError> {
        let mut text = String::new();
        let mut references: BTreeMap<String, f64> = BTreeMap::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(csv::Error::from)?;
            if let Some(rest) = line.trim().strip_prefix("# reference_hz") {
                let mut parts = rest.split_whitespace();
                match (parts.next(), parts.next().map(str::parse::<f64>)) {
                    (Some(key), Some(Ok(v))) => {
                        references.insert(key.to_string(), v);
                    }
                    _ => return Err(InterrogationError::Format { line: i as u64 + 1, message: "bad reference comment".into() }),
                }
            }
            text.push_str(&line);
            text.push('\n');
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["cycle", "timestamp_s", "transition", "freq_hz"] {
            return Err(InterrogationError::Format {
                line: 1,
                message: "expected header cycle,timestamp_s,transition,freq_hz".into(),
            });
        }
        let mut order: Vec<String> = Vec::new();
        let mut samples: BTreeMap<String, Vec<SeriesSample>> = BTreeMap::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let bad = |what: &str| InterrogationError::Format { line, message: format!("bad {what}") };
            if record.len() != 4 {
                return Err(bad("field count"));
            }
            let sample = SeriesSample {
                cycle: record[0].parse().map_err(|_| bad("cycle"))?,
                timestamp_s: record[1].parse().map_err(|_| bad("timestamp"))?,
                frequency_hz: record[3].parse().map_err(|_| bad("frequency"))?,
            };
            if !sample.timestamp_s.is_finite() || !sample.frequency_hz.is_finite() {
                return Err(bad("non-finite value"));
            }
            let key = record[2].to_string();
            if !samples.contains_key(&key) {
                order.push(key.clone());
            }
            samples.entry(key).or_default().push(sample);
        }
        order
            .into_iter()
            .map(|key| {
                let s = samples.remove(&key).expect("key recorded");
                if s.windows(2).any(|w| !(w[1].timestamp_s > w[0].timestamp_s)) {
                    return Err(InterrogationError::Format {
                        line: 0,
                        message: format!("timestamps of `{key}` are not strictly increasing"),
                    });
                }
                let cycle_duration_s = if s.len() >= 2 {
                    (s[s.len() - 1].timestamp_s - s[0].timestamp_s) / (s.len() - 1) as f64
                } else {
                    0.0
                };
                let transition = key.parse().map_err(|_| InterrogationError::Format {
                    line: 0,
                    message: format!("bad transition key `{key}`"),
                })?;
                Ok(FrequencySeries {
                    transition,
                    reference_hz: references.get(&key).copied().unwrap_or(0.0),
                    cycle_duration_s,
                    samples: s,
                })
            })
            .collect()
    }
}
