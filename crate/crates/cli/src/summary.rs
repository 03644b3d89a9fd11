//! Aggregates episode CSVs into per-(config, method) statistics.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use ptscrc::stats::{mean, percentile_sorted, std_dev, Z_99};

use crate::error::{CliError, CliResult};
use crate::output::{f, EPISODE_HEADER};

pub const SUMMARY_HEADER: [&str; 11] =
    ["config", "method", "metric", "n", "n_nonfinite", "mean", "ci99_low", "ci99_high", "p10", "p50", "p90"];

/// Columns of the episode schema that are summarised.
const METRICS: [&str; 11] = [
    "feasible",
    "objective",
    "constraint_slack_min",
    "interference",
    "gamma",
    "kkt_residual",
    "delay",
    "decoded",
    "throughput",
    "energy",
    "energy_per_bit",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub n: usize,
    pub n_nonfinite: usize,
    pub mean: f64,
    pub ci99: (f64, f64),
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

/// Statistics over the finite values; non-finite ones are only counted.
pub fn summarize_values(values: &[f64]) -> Option<MetricSummary> {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return None;
    }
    let n = finite.len();
    let m = mean(&finite);
    let half = Z_99 * std_dev(&finite) / (n as f64).sqrt();
    finite.sort_by(f64::total_cmp);
    Some(MetricSummary {
        n,
        n_nonfinite: values.len() - n,
        mean: m,
        ci99: (m - half, m + half),
        p10: percentile_sorted(&finite, 0.1),
        p50: percentile_sorted(&finite, 0.5),
        p90: percentile_sorted(&finite, 0.9),
    })
}

fn parse_value(s: &str) -> Option<f64> {
    match s.trim() {
        "" => None,
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

type Groups = BTreeMap<(String, String), BTreeMap<&'static str, Vec<f64>>>;

fn read_episode_csv<R: Read>(input: R, groups: &mut Groups) -> CliResult<bool> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != EPISODE_HEADER {
        return Ok(false);
    }
    for record in reader.records() {
        let record = record?;
        add_record(groups, &record.iter().collect::<Vec<_>>());
    }
    Ok(true)
}

fn add_record(groups: &mut Groups, record: &[&str]) {
    let entry = groups.entry((record[0].to_string(), record[1].to_string())).or_default();
    for name in METRICS {
        let i = EPISODE_HEADER.iter().position(|h| *h == name).expect("metric in schema");
        if let Some(v) = record.get(i).and_then(|s| parse_value(s)) {
            entry.entry(name).or_default().push(v);
        }
    }
}

/// Summary rows for one episode CSV; an error when the header is not the
/// episode schema.
pub fn summarize_episode_csv<R: Read>(input: R) -> CliResult<Vec<Vec<String>>> {
    let mut groups = Groups::new();
    if !read_episode_csv(input, &mut groups)? {
        return Err(CliError::Config("not an episode CSV: unexpected header".into()));
    }
    Ok(summary_rows(&groups))
}

/// Summary rows for in-memory episode records.
pub fn summarize_records(records: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut groups = Groups::new();
    for r in records {
        add_record(&mut groups, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    summary_rows(&groups)
}

/// Summary rows for every episode CSV in `dir` (non-recursive, sorted by
/// file name). Files with another header are skipped.
pub fn summarize_dir(dir: &Path) -> CliResult<Vec<Vec<String>>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut groups = Groups::new();
    let mut found = false;
    for path in &files {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        found |= read_episode_csv(file, &mut groups)?;
    }
    if !found {
        return Err(CliError::Config(format!("{}: no episode CSV files to summarize", dir.display())));
    }
    Ok(summary_rows(&groups))
}

fn summary_rows(groups: &Groups) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for ((config, method), metrics) in groups {
        for name in METRICS {
            let Some(values) = metrics.get(name) else { continue };
            let Some(s) = summarize_values(values) else { continue };
            rows.push(vec![
                config.clone(),
                method.clone(),
                name.to_string(),
                s.n.to_string(),
                s.n_nonfinite.to_string(),
                f(s.mean),
                f(s.ci99.0),
                f(s.ci99.1),
                f(s.p10),
                f(s.p50),
                f(s.p90),
            ]);
        }
    }
    rows
}

/// Inverse-CDF points `(q, x_q)` on an even grid of `levels` quantiles.
pub fn inverse_cdf(values: &[f64], levels: usize) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() || levels == 0 {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    (0..levels)
        .map(|i| {
            let q = if levels == 1 { 0.5 } else { i as f64 / (levels - 1) as f64 };
            (q, percentile_sorted(&sorted, q))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn single_value_is_its_own_summary() {
        let s = summarize_values(&[2.5]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.ci99, (2.5, 2.5));
        assert_eq!((s.p10, s.p50, s.p90), (2.5, 2.5, 2.5));
    }

    #[test]
    fn constant_column_has_zero_width() {
        let s = summarize_values(&[1.0; 7]).unwrap();
        assert_eq!(s.ci99.1 - s.ci99.0, 0.0);
    }

    #[test]
    fn percentiles_match_sort_oracle() {
        let mut r = ptscrc::StreamRng::new(1, ptscrc::StreamDomain::Auxiliary, 0);
        for _ in 0..50 {
            let n: usize = r.random_range(1..40);
            let xs: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
            let mut sorted = xs.clone();
            sorted.sort_by(f64::total_cmp);
            let s = summarize_values(&xs).unwrap();
            for (q, got) in [(0.1f64, s.p10), (0.5, s.p50), (0.9, s.p90)] {
                // linear interpolation between closest ranks
                let pos = q * (n - 1) as f64;
                let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
                let want = sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]);
                assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn non_finite_values_are_counted_apart() {
        let s = summarize_values(&[1.0, f64::INFINITY, 3.0]).unwrap();
        assert_eq!((s.n, s.n_nonfinite, s.mean), (2, 1, 2.0));
        assert!(summarize_values(&[f64::INFINITY]).is_none());
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(summarize_dir(dir.path()).is_err());
    }

    #[test]
    fn episode_csv_round_trip() {
        use crate::output::{episode_records, EpisodeRow};
        let rows: Vec<EpisodeRow> = (0..4)
            .map(|i| EpisodeRow {
                config: "c".into(),
                method: "m".into(),
                episode: i,
                energy_per_bit: Some(if i == 3 { f64::INFINITY } else { i as f64 }),
                ..Default::default()
            })
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(EPISODE_HEADER).unwrap();
        for r in episode_records(&rows) {
            w.write_record(&r).unwrap();
        }
        let bytes = w.into_inner().unwrap();
        let out = summarize_episode_csv(bytes.as_slice()).unwrap();
        assert_eq!(out, summarize_records(&episode_records(&rows)));
        assert_eq!(out.len(), 1);
        assert_eq!((out[0][3].as_str(), out[0][4].as_str()), ("3", "1"));
        assert!(summarize_episode_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn inverse_cdf_endpoints() {
        let pts = inverse_cdf(&[3.0, 1.0, 2.0], 3);
        assert_eq!(pts, vec![(0.0, 1.0), (0.5, 2.0), (1.0, 3.0)]);
    }
}
