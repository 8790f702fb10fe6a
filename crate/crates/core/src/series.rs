//! Hourly univariate series: ingestion, gap repair, splitting and window extraction.
//!
//! A [`TimeSeries`] always lives on a strict hourly grid. Hours without a usable
//! observation are kept as explicit missing entries, so the timestamp of index
//! `i` is always `start_hour + i`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, Result};

/// Seconds per grid step.
pub const SECONDS_PER_HOUR: i64 = 3600;

/// Concentrations outside this range (µg/m³) are treated as outliers and dropped
/// to missing during ingestion.
pub const VALID_RANGE: (f64, f64) = (0.0, 2000.0);

/// Ingested spans longer than this are rejected as implausible (about 1141 years).
const MAX_SPAN_HOURS: i64 = 10_000_000;

/// One grid point. `timestamp` counts whole hours since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub timestamp: i64,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    start_hour: i64,
    values: Vec<Option<f64>>,
}

impl TimeSeries {
    /// Builds a series starting at `start_hour`. Fails on an empty vector or
    /// a non-finite present value.
    pub fn new(name: impl Into<String>, start_hour: i64, values: Vec<Option<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(ForecastError::EmptyInput(
                "series must hold at least one point".into(),
            ));
        }
        if let Some(i) = values
            .iter()
            .position(|v| v.is_some_and(|x| !x.is_finite()))
        {
            return Err(ForecastError::Parse(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Self {
            name: name.into(),
            start_hour,
            values,
        })
    }

    /// Gap-free convenience constructor.
    pub fn from_values(name: impl Into<String>, start_hour: i64, values: &[f64]) -> Result<Self> {
        Self::new(name, start_hour, values.iter().copied().map(Some).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false for a constructed series; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start_hour(&self) -> i64 {
        self.start_hour
    }

    /// One past the last hour.
    pub fn end_hour(&self) -> i64 {
        self.start_hour + self.values.len() as i64
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = SeriesPoint> + '_ {
        self.values.iter().enumerate().map(|(i, v)| SeriesPoint {
            timestamp: self.start_hour + i as i64,
            value: *v,
        })
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn is_gap_free(&self) -> bool {
        self.missing_count() == 0
    }

    /// The values of a gap-free series.
    pub fn dense(&self) -> Result<Vec<f64>> {
        let missing = self.missing_count();
        if missing > 0 {
            return Err(ForecastError::MissingValues(missing));
        }
        Ok(self.values.iter().map(|v| v.unwrap_or_default()).collect())
    }

    /// Sub-series over index range `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.len() {
            return Err(ForecastError::WindowOutOfRange {
                start: self.start_hour + from as i64,
                end: self.start_hour + to as i64,
                series_start: self.start_hour,
                series_end: self.end_hour(),
            });
        }
        Ok(Self {
            name: self.name.clone(),
            start_hour: self.start_hour + from as i64,
            values: self.values[from..to].to_vec(),
        })
    }

    /// Sub-series covering hours `[from_hour, to_hour)`.
    pub fn span(&self, from_hour: i64, to_hour: i64) -> Result<Self> {
        if from_hour < self.start_hour || to_hour > self.end_hour() || from_hour >= to_hour {
            return Err(ForecastError::WindowOutOfRange {
                start: from_hour,
                end: to_hour,
                series_start: self.start_hour,
                series_end: self.end_hour(),
            });
        }
        self.slice(
            (from_hour - self.start_hour) as usize,
            (to_hour - self.start_hour) as usize,
        )
    }
}

/// Train/test split configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub test_hours: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            test_hours: 24,
        }
    }
}

impl SplitSpec {
    /// Training length implied by the 70/30 ratio when no explicit interval is
    /// requested: train : test = fraction : (1 - fraction).
    pub fn implied_train_hours(&self) -> usize {
        let ratio = self.train_fraction / (1.0 - self.train_fraction);
        ((self.test_hours as f64) * ratio).round().max(1.0) as usize
    }
}

/// Names of the timestamp and value columns in an input CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub timestamp: String,
    pub value: String,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            value: "value".into(),
        }
    }
}

/// Reads a `timestamp,value` CSV into a regularized hourly series.
///
/// Duplicate hours are averaged, hours absent inside the observed span become
/// missing, and values outside [`VALID_RANGE`] are dropped to missing. Rows
/// whose fields cannot be parsed are skipped; timestamps that are not on a whole
/// hour are rejected.
pub fn ingest_csv<R: Read>(raw: R, columns: &ColumnSpec) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(raw);

    let headers = reader
        .headers()
        .map_err(|e| ForecastError::Parse(format!("unreadable header: {e}")))?
        .clone();
    if headers.iter().all(str::is_empty) {
        return Err(ForecastError::EmptyInput(
            "input has no header or rows".into(),
        ));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| ForecastError::Parse(format!("header has no `{name}` column")))
    };
    let ts_col = find(&columns.timestamp)?;
    let val_col = find(&columns.value)?;

    // hour -> (sum, count) of present values; hours with only empty values map to (0, 0)
    let mut buckets: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for record in reader.records() {
        let Ok(record) = record else { continue };
        let (Some(ts), Some(val)) = (record.get(ts_col), record.get(val_col)) else {
            continue;
        };
        let Some(hour) = parse_hour(ts)? else {
            continue;
        };
        let value = if val.is_empty() {
            None
        } else {
            match val.parse::<f64>() {
                Ok(v) if v.is_finite() && (VALID_RANGE.0..=VALID_RANGE.1).contains(&v) => Some(v),
                Ok(_) => None,
                Err(_) => continue,
            }
        };
        let slot = buckets.entry(hour).or_insert((0.0, 0));
        if let Some(v) = value {
            slot.0 += v;
            slot.1 += 1;
        }
    }

    let (Some((&first, _)), Some((&last, _))) =
        (buckets.first_key_value(), buckets.last_key_value())
    else {
        return Err(ForecastError::EmptyInput("no parseable rows".into()));
    };
    if last - first >= MAX_SPAN_HOURS {
        return Err(ForecastError::Parse(format!(
            "observed span of {} hours is implausibly long",
            last - first
        )));
    }

    let mut values = vec![None; (last - first + 1) as usize];
    for (hour, (sum, count)) in buckets {
        if count > 0 {
            values[(hour - first) as usize] = Some(sum / count as f64);
        }
    }
    TimeSeries::new(columns.value.clone(), first, values)
}

/// Parses an ISO-8601 or epoch-seconds timestamp into an epoch hour.
/// Returns `Ok(None)` for unparseable text and an error for sub-hourly times.
fn parse_hour(text: &str) -> Result<Option<i64>> {
    let seconds = if let Ok(secs) = text.parse::<i64>() {
        secs
    } else if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        dt.timestamp()
    } else if let Some(dt) = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
    {
        dt.and_utc().timestamp()
    } else {
        return Ok(None);
    };
    if seconds.rem_euclid(SECONDS_PER_HOUR) != 0 {
        return Err(ForecastError::Parse(format!(
            "timestamp `{text}` is not on a whole hour; sub-hourly data is not supported"
        )));
    }
    Ok(Some(seconds.div_euclid(SECONDS_PER_HOUR)))
}

/// Formats an epoch hour as `YYYY-MM-DDTHH:00:00Z`.
pub fn format_hour(hour: i64) -> String {
    DateTime::<Utc>::from_timestamp(hour * SECONDS_PER_HOUR, 0)
        .map(|dt| dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| (hour * SECONDS_PER_HOUR).to_string())
}

/// Writes the series in the ingestion format. Values use the shortest
/// representation that parses back to the same bits.
pub fn write_csv<W: Write>(series: &TimeSeries, mut out: W) -> Result<()> {
    writeln!(out, "timestamp,value")?;
    for p in series.points() {
        match p.value {
            Some(v) => writeln!(out, "{},{}", format_hour(p.timestamp), v)?,
            None => writeln!(out, "{},", format_hour(p.timestamp))?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Fills every missing value. Interior gaps lie on the straight line between the
/// nearest present neighbours; leading and trailing gaps copy the nearest
/// present value.
pub fn interpolate_missing(s: &TimeSeries) -> Result<TimeSeries> {
    let present: Vec<usize> = s
        .values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|_| i))
        .collect();
    if present.len() < 2 {
        return Err(ForecastError::insufficient(2, present.len()));
    }
    let val = |i: usize| s.values[i].unwrap_or_default();

    let mut out: Vec<f64> = Vec::with_capacity(s.len());
    let first = present[0];
    let last = present[present.len() - 1];
    out.extend(std::iter::repeat_n(val(first), first));
    for pair in present.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ya, yb) = (val(a), val(b));
        let span = (b - a) as f64;
        out.push(ya);
        for k in 1..(b - a) {
            let w = k as f64 / span;
            out.push(ya + (yb - ya) * w);
        }
    }
    out.push(val(last));
    out.extend(std::iter::repeat_n(val(last), s.len() - 1 - last));

    TimeSeries::from_values(s.name.clone(), s.start_hour, &out)
}

/// Splits off the final `spec.test_hours` points as the test block, with the
/// contiguous training block right before it.
///
/// `train_hours` fixes the training length; `None` derives it from
/// `spec.train_fraction`. Either way it is capped at what the series holds.
pub fn split(
    s: &TimeSeries,
    spec: &SplitSpec,
    train_hours: Option<usize>,
) -> Result<(TimeSeries, TimeSeries)> {
    if !s.is_gap_free() {
        return Err(ForecastError::MissingValues(s.missing_count()));
    }
    if spec.test_hours == 0 {
        return Err(ForecastError::InvalidConfig(
            "test_hours must be positive".into(),
        ));
    }
    if s.len() < spec.test_hours + 1 {
        return Err(ForecastError::insufficient(spec.test_hours + 1, s.len()));
    }
    let test_start = s.len() - spec.test_hours;
    let wanted = train_hours
        .unwrap_or_else(|| spec.implied_train_hours())
        .max(1);
    let train_len = wanted.min(test_start);
    let train = s.slice(test_start - train_len, test_start)?;
    let test = s.slice(test_start, s.len())?;
    Ok((train, test))
}

/// Training block `[origin - train_len, origin)` and the actuals
/// `[origin, origin + horizon)` that follow it.
pub fn window_at(
    s: &TimeSeries,
    origin: i64,
    train_len: usize,
    horizon: usize,
) -> Result<(TimeSeries, TimeSeries)> {
    let from = origin - train_len as i64;
    let to = origin + horizon as i64;
    if train_len == 0 || horizon == 0 || from < s.start_hour() || to > s.end_hour() {
        return Err(ForecastError::WindowOutOfRange {
            start: from,
            end: to,
            series_start: s.start_hour(),
            series_end: s.end_hour(),
        });
    }
    Ok((s.span(from, origin)?, s.span(origin, to)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(values: &[Option<f64>]) -> TimeSeries {
        TimeSeries::new("pm25", 0, values.to_vec()).unwrap()
    }

    fn ingest(text: &str) -> Result<TimeSeries> {
        ingest_csv(text.as_bytes(), &ColumnSpec::default())
    }

    #[test]
    fn ingest_inserts_gap_hours() {
        let s = ingest("timestamp,value\n0,10\n7200,30\n").unwrap();
        assert_eq!(s.values(), &[Some(10.0), None, Some(30.0)]);
        assert_eq!(s.start_hour(), 0);
    }

    #[test]
    fn ingest_drops_outliers() {
        let s = ingest("timestamp,value\n0,1\n3600,5000\n7200,-3\n10800,4\n").unwrap();
        assert_eq!(s.values(), &[Some(1.0), None, None, Some(4.0)]);
    }

    #[test]
    fn ingest_identity_case() {
        let s = ingest("timestamp,value\n0,1\n3600,2\n7200,3\n").unwrap();
        assert_eq!(s.dense().unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn ingest_iso_timestamps_sorted_and_averaged() {
        let text = "timestamp,value\n\
                    2018-01-07T15:00:00Z,8\n\
                    2018-01-07T14:00:00Z,4\n\
                    2018-01-07T14:00:00Z,6\n\
                    2018-01-07T16:00:00Z,\n";
        let s = ingest(text).unwrap();
        assert_eq!(s.values(), &[Some(5.0), Some(8.0), None]);
        assert_eq!(format_hour(s.start_hour()), "2018-01-07T14:00:00Z");
    }

    #[test]
    fn ingest_errors() {
        assert!(matches!(
            ingest("time,val\n0,1\n"),
            Err(ForecastError::Parse(_))
        ));
        assert!(matches!(
            ingest("timestamp,value\n"),
            Err(ForecastError::EmptyInput(_))
        ));
        assert!(matches!(ingest(""), Err(ForecastError::EmptyInput(_))));
        assert!(matches!(
            ingest("timestamp,value\nnonsense,1\n"),
            Err(ForecastError::EmptyInput(_))
        ));
        assert!(matches!(
            ingest("timestamp,value\n1800,1\n"),
            Err(ForecastError::Parse(_))
        ));
    }

    #[test]
    fn custom_column_names() {
        let cols = ColumnSpec {
            timestamp: "date".into(),
            value: "pm25".into(),
        };
        let s = ingest_csv("station,date,pm25\nA,0,3\nA,3600,4\n".as_bytes(), &cols).unwrap();
        assert_eq!(s.dense().unwrap(), vec![3.0, 4.0]);
        assert_eq!(s.name(), "pm25");
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let vals = [0.1, 1.0 / 3.0, 17.000000000000004, 1999.9999999999998];
        let s = TimeSeries::from_values("value", 420_768, &vals).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        let back = ingest(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn interpolation_examples() {
        let s = interpolate_missing(&series(&[Some(10.0), None, Some(20.0)])).unwrap();
        assert_eq!(s.dense().unwrap(), vec![10.0, 15.0, 20.0]);
        let s = interpolate_missing(&series(&[Some(1.0), None, None, Some(4.0)])).unwrap();
        assert_eq!(s.dense().unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        let s = interpolate_missing(&series(&[None, Some(7.0), Some(9.0)])).unwrap();
        assert_eq!(s.dense().unwrap(), vec![7.0, 7.0, 9.0]);
        let s = interpolate_missing(&series(&[Some(7.0), Some(9.0), None])).unwrap();
        assert_eq!(s.dense().unwrap(), vec![7.0, 9.0, 9.0]);
    }

    #[test]
    fn interpolation_needs_two_anchors() {
        let err = interpolate_missing(&series(&[None, Some(3.0), None])).unwrap_err();
        assert_eq!(err, ForecastError::InsufficientData { needed: 2, got: 1 });
    }

    #[test]
    fn split_examples() {
        let vals: Vec<f64> = (0..100).map(f64::from).collect();
        let s = TimeSeries::from_values("x", 0, &vals).unwrap();
        let spec = SplitSpec::default();
        let (train, test) = split(&s, &spec, Some(48)).unwrap();
        assert_eq!(train.start_hour(), 28);
        assert_eq!(train.end_hour(), 76);
        assert_eq!(test.start_hour(), 76);
        assert_eq!(test.len(), 24);

        let short = TimeSeries::from_values("x", 0, &vals[..25]).unwrap();
        let (train, _) = split(&short, &spec, None).unwrap();
        assert_eq!(train.len(), 1);

        let too_short = TimeSeries::from_values("x", 0, &vals[..24]).unwrap();
        assert!(matches!(
            split(&too_short, &spec, None),
            Err(ForecastError::InsufficientData { .. })
        ));
    }

    #[test]
    fn split_default_ratio_is_seventy_thirty() {
        let spec = SplitSpec::default();
        assert_eq!(spec.implied_train_hours(), 56);
        let vals: Vec<f64> = (0..200).map(f64::from).collect();
        let s = TimeSeries::from_values("x", 0, &vals).unwrap();
        let (train, test) = split(&s, &spec, None).unwrap();
        assert_eq!((train.len(), test.len()), (56, 24));
    }

    #[test]
    fn window_examples() {
        let vals: Vec<f64> = (0..200).map(f64::from).collect();
        let s = TimeSeries::from_values("x", 0, &vals).unwrap();
        let (train, actual) = window_at(&s, 100, 96, 24).unwrap();
        assert_eq!((train.start_hour(), train.end_hour()), (4, 100));
        assert_eq!((actual.start_hour(), actual.end_hour()), (100, 124));

        assert!(matches!(
            window_at(&s, 0, 96, 24),
            Err(ForecastError::WindowOutOfRange { .. })
        ));
        let (_, actual) = window_at(&s, 150, 10, 1).unwrap();
        assert_eq!(actual.len(), 1);
    }

    fn gappy() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(prop::option::weighted(0.6, 0.0..500.0f64), 2..60)
            .prop_filter("two anchors", |v| {
                v.iter().filter(|x| x.is_some()).count() >= 2
            })
    }

    proptest! {
        #[test]
        fn interpolation_is_idempotent(vals in gappy()) {
            let once = interpolate_missing(&series(&vals)).unwrap();
            let twice = interpolate_missing(&once).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn interpolated_values_are_bounded_by_neighbours(vals in gappy()) {
            let filled = interpolate_missing(&series(&vals)).unwrap().dense().unwrap();
            let present: Vec<usize> = vals.iter().enumerate().filter_map(|(i, v)| v.map(|_| i)).collect();
            for pair in present.windows(2) {
                let (a, b) = (vals[pair[0]].unwrap(), vals[pair[1]].unwrap());
                let (lo, hi) = (a.min(b), a.max(b));
                for &v in &filled[pair[0]..=pair[1]] {
                    prop_assert!(v >= lo && v <= hi);
                }
            }
        }

        #[test]
        fn ingest_always_yields_an_hourly_grid(
            rows in prop::collection::vec((-500i64..500, prop::option::of(-100.0..3000.0f64)), 1..80)
        ) {
            let mut text = String::from("timestamp,value\n");
            for (h, v) in &rows {
                match v {
                    Some(v) => text.push_str(&format!("{},{}\n", h * 3600, v)),
                    None => text.push_str(&format!("{},\n", h * 3600)),
                }
            }
            let s = ingest(&text).unwrap();
            let hours: Vec<i64> = rows.iter().map(|r| r.0).collect();
            prop_assert_eq!(s.start_hour(), *hours.iter().min().unwrap());
            prop_assert_eq!(s.end_hour() - 1, *hours.iter().max().unwrap());
            let stamps: Vec<i64> = s.points().map(|p| p.timestamp).collect();
            prop_assert!(stamps.windows(2).all(|w| w[1] == w[0] + 1));
            prop_assert!(s.values().iter().flatten().all(|v| v.is_finite() && *v >= 0.0 && *v <= 2000.0));
        }

        #[test]
        fn split_blocks_are_adjacent(len in 26usize..300, train in 1usize..400) {
            let vals: Vec<f64> = (0..len).map(|i| i as f64).collect();
            let s = TimeSeries::from_values("x", 7, &vals).unwrap();
            let (tr, te) = split(&s, &SplitSpec::default(), Some(train)).unwrap();
            prop_assert_eq!(tr.end_hour(), te.start_hour());
            prop_assert_eq!(te.end_hour(), s.end_hour());
        }
    }
}
