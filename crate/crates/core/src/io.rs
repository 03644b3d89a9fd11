//! Series file formats.
//!
//! CSV: a header row `past_0,…,past_{T-1},future_0,…,future_{τ-1}` followed
//! by one series per row. Every row must have exactly `T + τ` finite values.
//! Floats are written with 17 significant digits so they round-trip.
//!
//! JSON: an array of `{"past": [...], "future": [...]}` objects.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::trajectory::SeriesSample;

/// Formats a float with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Parses a header of the form `past_*…,future_*…` into `(T, τ)`.
fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let mut memory = 0;
    let mut horizon = 0;
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        if let Some(idx) = name.strip_prefix("past_") {
            if horizon > 0 || idx != memory.to_string() {
                return Err(Error::Parse(format!("unexpected column {name:?} at position {i}")));
            }
            memory += 1;
        } else if let Some(idx) = name.strip_prefix("future_") {
            if idx != horizon.to_string() {
                return Err(Error::Parse(format!("unexpected column {name:?} at position {i}")));
            }
            horizon += 1;
        } else {
            return Err(Error::Parse(format!("unknown column {name:?}")));
        }
    }
    if memory == 0 || horizon == 0 {
        return Err(Error::Parse("header needs at least one past_ and one future_ column".into()));
    }
    Ok((memory, horizon))
}

pub fn read_series_csv<R: Read>(reader: R) -> Result<Vec<SeriesSample>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let (memory, horizon) = parse_header(rdr.headers()?)?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != memory + horizon {
            return Err(Error::Parse(format!(
                "row {row}: expected {} values, found {}",
                memory + horizon,
                rec.len()
            )));
        }
        let vals = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {row}: {f:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(SeriesSample::split(&vals, memory).map_err(|e| Error::Parse(format!("row {row}: {e}")))?);
    }
    Ok(out)
}

pub fn parse_series_csv(text: &str) -> Result<Vec<SeriesSample>> {
    read_series_csv(text.as_bytes())
}

pub fn write_series_csv<W: Write>(writer: W, series: &[SeriesSample]) -> Result<()> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to write".into()))?;
    let (memory, horizon) = (first.memory(), first.horizon());
    let mut wtr = csv::Writer::from_writer(writer);
    let header: Vec<String> = (0..memory)
        .map(|i| format!("past_{i}"))
        .chain((0..horizon).map(|i| format!("future_{i}")))
        .collect();
    wtr.write_record(&header)?;
    for s in series {
        if s.memory() != memory || s.horizon() != horizon {
            return Err(Error::LengthMismatch {
                expected: memory + horizon,
                found: s.memory() + s.horizon(),
            });
        }
        wtr.write_record(s.past.iter().chain(&s.future).map(|v| format_f64(*v)))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn series_to_csv_string(series: &[SeriesSample]) -> Result<String> {
    let mut buf = Vec::new();
    write_series_csv(&mut buf, series)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_series_json(text: &str) -> Result<Vec<SeriesSample>> {
    let raw: Vec<SeriesSample> = serde_json::from_str(text)?;
    raw.into_iter()
        .map(|s| SeriesSample::new(s.past, s.future).map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

pub fn series_to_json_string(series: &[SeriesSample]) -> Result<String> {
    Ok(serde_json::to_string(series)?)
}

/// Serde adapter for floats that may be infinite: finite values are plain
/// JSON numbers, infinities are the strings `"inf"` / `"-inf"`.
pub mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("expected number or \"inf\", got {other:?}"))),
            },
        }
    }
}
