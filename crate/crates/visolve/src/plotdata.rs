//! Long-format plot data: `schedule,seed,oracle_calls,metric,value` rows plus a
//! seed-aggregated median and interquartile range.
//!
//! Each record contributes one row per metric. The `iteration` metric holds the
//! flattened iteration count so both iteration- and oracle-indexed curves can be drawn.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use visolve_core::analysis::median;
use visolve_core::Record;

use crate::error::{io_err, Error, Result};
use crate::experiment::{load_manifest, load_traces, verify_manifest};

pub const LONG_HEADER: &str = "schedule,seed,oracle_calls,metric,value";
pub const SUMMARY_HEADER: &str = "schedule,index,iteration,oracle_calls,metric,median,q1,q3,seeds";
pub const LONG_FILE: &str = "plot_long.csv";
pub const SUMMARY_FILE: &str = "plot_summary.csv";

/// One run: its schedule label, seed, inner steps per epoch and records.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub schedule: String,
    pub seed: u64,
    pub steps_per_epoch: usize,
    pub records: Vec<Record>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    pub schedule: String,
    pub seed: u64,
    pub oracle_calls: u64,
    pub metric: String,
    pub value: f64,
}

fn metrics_of(r: &Record, steps: usize) -> Vec<(&'static str, f64)> {
    let mut out = vec![("iteration", r.iteration(steps) as f64)];
    if let Some(v) = r.sq_dist {
        out.push(("sq_dist", v));
    }
    if let Some(v) = r.lyapunov {
        out.push(("lyapunov", v));
    }
    out.push(("residual", r.residual));
    out
}

fn metric_set(r: &Record) -> (bool, bool) {
    (r.sq_dist.is_some(), r.lyapunov.is_some())
}

fn check_metric_sets(series: &[Series]) -> Result<()> {
    let mut first = None;
    for s in series {
        for r in &s.records {
            let m = metric_set(r);
            match first {
                None => first = Some(m),
                Some(f) if f != m => {
                    return Err(Error::PlotData(format!(
                        "inconsistent metric sets: {} seed {} differs",
                        s.schedule, s.seed
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

pub fn long_rows(series: &[Series]) -> Result<Vec<LongRow>> {
    check_metric_sets(series)?;
    let mut out = Vec::new();
    for s in series {
        for r in &s.records {
            for (metric, value) in metrics_of(r, s.steps_per_epoch) {
                out.push(LongRow {
                    schedule: s.schedule.clone(),
                    seed: s.seed,
                    oracle_calls: r.oracle_calls,
                    metric: metric.to_string(),
                    value,
                });
            }
        }
    }
    Ok(out)
}

pub fn long_csv(rows: &[LongRow]) -> String {
    let mut out = String::with_capacity(48 * (rows.len() + 1));
    out.push_str(LONG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.schedule, r.seed, r.oracle_calls, r.metric, r.value
        );
    }
    out
}

pub fn parse_long_csv(text: &str) -> Result<Vec<LongRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(LONG_HEADER) {
        return Err(Error::PlotData("missing header".into()));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::PlotData(format!("malformed row {}", k + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        out.push(LongRow {
            schedule: f[0].to_string(),
            seed: f[1].parse().map_err(|_| bad())?,
            oracle_calls: f[2].parse().map_err(|_| bad())?,
            metric: f[3].to_string(),
            value: f[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Inverse of [`long_rows`] for series with `steps_per_epoch` inner steps.
pub fn regroup(rows: &[LongRow], steps_per_epoch: usize) -> Result<Vec<Series>> {
    let steps = steps_per_epoch.max(1);
    let mut map: BTreeMap<(String, u64), Vec<Record>> = BTreeMap::new();
    let mut order: Vec<(String, u64)> = Vec::new();
    for r in rows {
        let key = (r.schedule.clone(), r.seed);
        let recs = map.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        if r.metric == "iteration" {
            let it = r.value as usize;
            recs.push(Record {
                epoch: it / steps,
                step: it % steps,
                oracle_calls: r.oracle_calls,
                sq_dist: None,
                lyapunov: None,
                residual: f64::NAN,
            });
            continue;
        }
        let last = recs
            .last_mut()
            .ok_or_else(|| Error::PlotData("metric row before its iteration row".into()))?;
        match r.metric.as_str() {
            "sq_dist" => last.sq_dist = Some(r.value),
            "lyapunov" => last.lyapunov = Some(r.value),
            "residual" => last.residual = r.value,
            other => return Err(Error::PlotData(format!("unknown metric `{other}`"))),
        }
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let records = map.remove(&key).unwrap_or_default();
            Series {
                schedule: key.0,
                seed: key.1,
                steps_per_epoch,
                records,
            }
        })
        .collect())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub schedule: String,
    /// Record position within each trace.
    pub index: usize,
    pub iteration: usize,
    /// Median over seeds (VR runs differ in snapshot refreshes).
    pub oracle_calls: f64,
    pub metric: String,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub seeds: usize,
}

/// Aggregates seeds record by record within each schedule.
pub fn summarize(series: &[Series]) -> Result<Vec<SummaryRow>> {
    check_metric_sets(series)?;
    let mut schedules: Vec<&str> = Vec::new();
    for s in series {
        if !schedules.contains(&s.schedule.as_str()) {
            schedules.push(&s.schedule);
        }
    }
    let mut out = Vec::new();
    for sched in schedules {
        let group: Vec<&Series> = series.iter().filter(|s| s.schedule == sched).collect();
        let len = group.iter().map(|s| s.records.len()).max().unwrap_or(0);
        for index in 0..len {
            let here: Vec<(&Series, &Record)> = group
                .iter()
                .filter_map(|s| s.records.get(index).map(|r| (*s, r)))
                .collect();
            let (s0, r0) = here[0];
            let iteration = r0.iteration(s0.steps_per_epoch);
            let mut calls: Vec<f64> = here.iter().map(|(_, r)| r.oracle_calls as f64).collect();
            let calls = median(&mut calls);
            let names: Vec<&'static str> = metrics_of(r0, s0.steps_per_epoch)
                .into_iter()
                .map(|m| m.0)
                .filter(|m| *m != "iteration")
                .collect();
            for name in names {
                let mut vals: Vec<f64> = here
                    .iter()
                    .filter_map(|(s, r)| {
                        metrics_of(r, s.steps_per_epoch)
                            .into_iter()
                            .find(|m| m.0 == name)
                            .map(|m| m.1)
                    })
                    .collect();
                vals.sort_by(f64::total_cmp);
                out.push(SummaryRow {
                    schedule: sched.to_string(),
                    index,
                    iteration,
                    oracle_calls: calls,
                    metric: name.to_string(),
                    median: quantile(&vals, 0.5),
                    q1: quantile(&vals, 0.25),
                    q3: quantile(&vals, 0.75),
                    seeds: vals.len(),
                });
            }
        }
    }
    Ok(out)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.schedule,
            r.index,
            r.iteration,
            r.oracle_calls,
            r.metric,
            r.median,
            r.q1,
            r.q3,
            r.seeds
        );
    }
    out
}

/// Writes [`LONG_FILE`] and [`SUMMARY_FILE`] next to the manifest in `dir`.
pub fn emit_plot_data(dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let manifest = load_manifest(dir)?;
    verify_manifest(dir, &manifest)?;
    let series: Vec<Series> = load_traces(dir, &manifest)?
        .into_iter()
        .map(|(cell, t)| Series {
            schedule: cell.schedule,
            seed: cell.seed,
            steps_per_epoch: t.meta.steps_per_epoch,
            records: t.records,
        })
        .collect();
    if series.is_empty() {
        return Err(Error::PlotData("no successful cells".into()));
    }
    let long = dir.join(LONG_FILE);
    fs::write(&long, long_csv(&long_rows(&series)?)).map_err(io_err(&long))?;
    let summary = dir.join(SUMMARY_FILE);
    fs::write(&summary, summary_csv(&summarize(&series)?)).map_err(io_err(&summary))?;
    Ok((long, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn series(schedule: &str, seed: u64, scale: f64) -> Series {
        let records = (0..3)
            .map(|k| Record {
                epoch: k,
                step: 0,
                oracle_calls: 8 * k as u64,
                sq_dist: Some(scale / (k + 1) as f64),
                lyapunov: None,
                residual: 0.1 * scale,
            })
            .collect();
        Series {
            schedule: schedule.into(),
            seed,
            steps_per_epoch: 4,
            records,
        }
    }

    #[test]
    fn counts_per_metric() {
        let all = [
            series("rr", 50, 1.0),
            series("rr", 51, 2.0),
            series("so", 50, 1.0),
            series("so", 51, 3.0),
        ];
        let rows = long_rows(&all).unwrap();
        let metrics: BTreeSet<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
        assert_eq!(
            metrics,
            BTreeSet::from(["iteration", "sq_dist", "residual"])
        );
        for m in metrics {
            assert_eq!(rows.iter().filter(|r| r.metric == m).count(), 12);
        }
    }

    #[test]
    fn identical_traces_have_zero_iqr() {
        let all = [
            series("rr", 50, 2.0),
            series("rr", 51, 2.0),
            series("rr", 52, 2.0),
        ];
        for row in summarize(&all).unwrap() {
            assert_eq!(row.q1, row.q3);
            assert_eq!(row.median, row.q1);
            assert_eq!(row.seeds, 3);
        }
    }

    #[test]
    fn quartiles_of_four_seeds() {
        let all: Vec<Series> = (0..4).map(|k| series("rr", k, (k + 1) as f64)).collect();
        let rows = summarize(&all).unwrap();
        let first = rows
            .iter()
            .find(|r| r.metric == "sq_dist" && r.index == 0)
            .unwrap();
        assert_eq!((first.q1, first.median, first.q3), (1.75, 2.5, 3.25));
        assert_eq!(first.iteration, 0);
        let last = rows
            .iter()
            .find(|r| r.metric == "sq_dist" && r.index == 2)
            .unwrap();
        assert_eq!((last.iteration, last.oracle_calls), (8, 16.0));
    }

    #[test]
    fn round_trip_through_csv() {
        let mut all = vec![series("rr", 50, 1.0), series("independent", 7, 0.3)];
        all.iter_mut().for_each(|s| {
            s.records
                .iter_mut()
                .for_each(|r| r.lyapunov = Some(r.residual * 3.0));
            s.records[1].step = 2;
        });
        let text = long_csv(&long_rows(&all).unwrap());
        let back = regroup(&parse_long_csv(&text).unwrap(), 4).unwrap();
        assert_eq!(back, all);
    }

    #[test]
    fn inconsistent_metrics_rejected() {
        let mut b = series("so", 1, 1.0);
        b.records[2].sq_dist = None;
        let all = [series("rr", 1, 1.0), b];
        assert!(matches!(long_rows(&all), Err(Error::PlotData(_))));
        assert!(summarize(&all).is_err());
    }

    #[test]
    fn malformed_long_csv() {
        assert!(parse_long_csv("a,b\n").is_err());
        assert!(parse_long_csv(&format!("{LONG_HEADER}\nrr,x,1,sq_dist,1\n")).is_err());
        let rows = parse_long_csv(&format!("{LONG_HEADER}\nrr,1,1,sq_dist,1\n")).unwrap();
        assert!(regroup(&rows, 1).is_err());
    }
}
