//! CSV ingestion for prices and risk indices, log-return computation and
//! date alignment into an estimation-ready dataset.
//!
//! File formats (ISO-8601 dates, comma-delimited, `.` decimal separator):
//! price series `date,close`; risk indices `date,gprd,gprd_a,gprd_t`;
//! datasets `date,y1,...,yp,x1,...,xk`.

use crate::dataset::{Dataset, TimeKind};
use crate::error::{Error, Result};
use chrono::{Datelike, NaiveDate};
use ndarray::Array2;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Daily closing prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    pub close: Vec<f64>,
}

/// Daily log-returns; the date is the day the return realizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

/// Daily geopolitical risk indices: overall, act-based and threat-based.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskIndexSeries {
    pub dates: Vec<NaiveDate>,
    pub gprd: Vec<f64>,
    pub gprd_a: Vec<f64>,
    pub gprd_t: Vec<f64>,
}

/// What the date join kept and dropped.
#[derive(Debug, Clone, Default)]
pub struct AlignReport {
    pub n: usize,
    /// Return dates present in both assets but without a matching risk row.
    pub dropped_return_dates: Vec<NaiveDate>,
    /// Risk dates that never matched a return date.
    pub dropped_risk_dates: Vec<NaiveDate>,
    /// Calendar-day shift applied to the covariates.
    pub lag_days: i64,
}

fn parse_date(path: &str, row: usize, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
        path: path.to_string(),
        row,
        message: format!("bad date `{s}`: {e}"),
    })
}

fn parse_number(path: &str, row: usize, field: &str, s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        row,
        message: format!("bad {field} value `{s}`"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_string(),
            row,
            message: format!("non-finite {field} value `{s}`"),
        });
    }
    Ok(v)
}

fn header_index(headers: &csv::StringRecord, name: &str, path: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Parse {
            path: path.to_string(),
            row: 1,
            message: format!("missing required column `{name}`"),
        })
}

fn sort_and_check_dates<T: Clone>(
    path: &str,
    mut rows: Vec<(NaiveDate, T)>,
) -> Result<Vec<(NaiveDate, T)>> {
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_string(),
            row: 1,
            message: "file contains no data rows".into(),
        });
    }
    rows.sort_by_key(|(d, _)| *d);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Parse {
                path: path.to_string(),
                row: 0,
                message: format!("duplicate date {}", w[0].0),
            });
        }
    }
    Ok(rows)
}

/// Load a `date,close` CSV, sorting rows by date.
///
/// Rows with non-positive, missing or unparseable closes are rejected with
/// the offending row number.
pub fn load_price_csv<P: AsRef<Path>>(path: P) -> Result<PriceSeries> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let date_ix = header_index(&headers, "date", &path_str)?;
    let close_ix = header_index(&headers, "close", &path_str)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // header is row 1
        let record = record.map_err(|e| Error::Parse {
            path: path_str.clone(),
            row,
            message: e.to_string(),
        })?;
        let date = parse_date(&path_str, row, record.get(date_ix).unwrap_or(""))?;
        let close = parse_number(&path_str, row, "close", record.get(close_ix).unwrap_or(""))?;
        if close <= 0.0 {
            return Err(Error::Parse {
                path: path_str.clone(),
                row,
                message: format!("close must be positive, got {close}"),
            });
        }
        rows.push((date, close));
    }
    let rows = sort_and_check_dates(&path_str, rows)?;
    Ok(PriceSeries {
        dates: rows.iter().map(|(d, _)| *d).collect(),
        close: rows.into_iter().map(|(_, c)| c).collect(),
    })
}

/// Write a price series back to `date,close` form.
pub fn write_price_csv<P: AsRef<Path>>(path: P, series: &PriceSeries) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "date,close")?;
    for (d, c) in series.dates.iter().zip(series.close.iter()) {
        writeln!(f, "{},{}", d.format("%Y-%m-%d"), c)?;
    }
    Ok(())
}

/// Load a `date,gprd,gprd_a,gprd_t` CSV, sorting rows by date.
pub fn load_risk_csv<P: AsRef<Path>>(path: P) -> Result<RiskIndexSeries> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let date_ix = header_index(&headers, "date", &path_str)?;
    let g_ix = header_index(&headers, "gprd", &path_str)?;
    let a_ix = header_index(&headers, "gprd_a", &path_str)?;
    let t_ix = header_index(&headers, "gprd_t", &path_str)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            path: path_str.clone(),
            row,
            message: e.to_string(),
        })?;
        let date = parse_date(&path_str, row, record.get(date_ix).unwrap_or(""))?;
        let g = parse_number(&path_str, row, "gprd", record.get(g_ix).unwrap_or(""))?;
        let a = parse_number(&path_str, row, "gprd_a", record.get(a_ix).unwrap_or(""))?;
        let t = parse_number(&path_str, row, "gprd_t", record.get(t_ix).unwrap_or(""))?;
        for (name, v) in [("gprd", g), ("gprd_a", a), ("gprd_t", t)] {
            if v < 0.0 {
                return Err(Error::Parse {
                    path: path_str.clone(),
                    row,
                    message: format!("{name} must be non-negative, got {v}"),
                });
            }
        }
        rows.push((date, (g, a, t)));
    }
    let rows = sort_and_check_dates(&path_str, rows)?;
    Ok(RiskIndexSeries {
        dates: rows.iter().map(|(d, _)| *d).collect(),
        gprd: rows.iter().map(|(_, v)| v.0).collect(),
        gprd_a: rows.iter().map(|(_, v)| v.1).collect(),
        gprd_t: rows.into_iter().map(|(_, v)| v.2).collect(),
    })
}

/// Log-returns `ln(close_{t+1} / close_t)`, dated by the later observation.
pub fn log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.close.len() < 2 {
        return Err(Error::InvalidArgument(
            "log returns need at least two prices".into(),
        ));
    }
    let mut dates = Vec::with_capacity(prices.close.len() - 1);
    let mut values = Vec::with_capacity(prices.close.len() - 1);
    for t in 0..prices.close.len() - 1 {
        dates.push(prices.dates[t + 1]);
        values.push((prices.close[t + 1] / prices.close[t]).ln());
    }
    Ok(ReturnSeries { dates, values })
}

/// Inner-join two return series and the risk indices on date.
///
/// The return observed on day `d` is paired with the risk indices of day
/// `d - lag_days`. Responses are `(r_a, r_b)`, covariates the three indices
/// (standardized by the dataset constructor); dropped dates are reported.
pub fn align(
    returns_a: &ReturnSeries,
    returns_b: &ReturnSeries,
    risk: &RiskIndexSeries,
    lag_days: i64,
) -> Result<(Dataset, AlignReport)> {
    let b_by_date: BTreeMap<NaiveDate, f64> = returns_b
        .dates
        .iter()
        .cloned()
        .zip(returns_b.values.iter().cloned())
        .collect();
    let risk_by_date: BTreeMap<NaiveDate, (f64, f64, f64)> = risk
        .dates
        .iter()
        .enumerate()
        .map(|(i, d)| (*d, (risk.gprd[i], risk.gprd_a[i], risk.gprd_t[i])))
        .collect();

    let mut rows: Vec<(NaiveDate, [f64; 2], [f64; 3])> = Vec::new();
    let mut dropped_return_dates = Vec::new();
    let mut used_risk_dates: Vec<NaiveDate> = Vec::new();
    for (i, date) in returns_a.dates.iter().enumerate() {
        let Some(&rb) = b_by_date.get(date) else {
            continue;
        };
        let risk_date = *date - chrono::Duration::days(lag_days);
        match risk_by_date.get(&risk_date) {
            Some(&(g, a, t)) => {
                rows.push((*date, [returns_a.values[i], rb], [g, a, t]));
                used_risk_dates.push(risk_date);
            }
            None => dropped_return_dates.push(*date),
        }
    }
    if rows.is_empty() {
        return Err(Error::Alignment(
            "no overlapping dates between returns and risk indices".into(),
        ));
    }
    let used: std::collections::BTreeSet<NaiveDate> = used_risk_dates.into_iter().collect();
    let dropped_risk_dates: Vec<NaiveDate> = risk
        .dates
        .iter()
        .filter(|d| !used.contains(d))
        .cloned()
        .collect();

    let n = rows.len();
    let mut responses = Array2::zeros((n, 2));
    let mut covariates = Array2::zeros((n, 3));
    let mut times = Vec::with_capacity(n);
    for (i, (date, ys, xs)) in rows.iter().enumerate() {
        for j in 0..2 {
            responses[(i, j)] = ys[j];
        }
        for j in 0..3 {
            covariates[(i, j)] = xs[j];
        }
        times.push(date.num_days_from_ce() as i64);
    }
    let data = Dataset::new(responses, covariates, times, TimeKind::Date)?;
    let report = AlignReport {
        n,
        dropped_return_dates,
        dropped_risk_dates,
        lag_days,
    };
    Ok((data, report))
}

/// Serialize a dataset as `date,y1..yp,x1..xk` (raw covariate units).
pub fn write_dataset_csv<P: AsRef<Path>>(path: P, data: &Dataset) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let mut header = String::from("date");
    for j in 0..data.p() {
        header.push_str(&format!(",y{}", j + 1));
    }
    for j in 0..data.k() {
        header.push_str(&format!(",x{}", j + 1));
    }
    writeln!(f, "{header}")?;
    for t in 0..data.n() {
        let mut line = data.time_label(t);
        for j in 0..data.p() {
            line.push_str(&format!(",{}", data.responses()[(t, j)]));
        }
        for j in 0..data.k() {
            line.push_str(&format!(",{}", data.covariates()[(t, j)]));
        }
        writeln!(f, "{line}")?;
    }
    Ok(())
}

/// Load a dataset written by [`write_dataset_csv`] (or shaped like it).
///
/// The response/covariate split is read off the `y*`/`x*` header names; the
/// date column accepts either ISO dates or plain integer indices.
pub fn read_dataset_csv<P: AsRef<Path>>(path: P) -> Result<Dataset> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let mut y_cols = Vec::new();
    let mut x_cols = Vec::new();
    let mut date_col = None;
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim().to_ascii_lowercase();
        if h == "date" {
            date_col = Some(i);
        } else if h.starts_with('y') && h[1..].chars().all(|c| c.is_ascii_digit()) {
            y_cols.push(i);
        } else if h.starts_with('x') && h[1..].chars().all(|c| c.is_ascii_digit()) {
            x_cols.push(i);
        }
    }
    let date_col = date_col.ok_or_else(|| Error::Parse {
        path: path_str.clone(),
        row: 1,
        message: "missing required column `date`".into(),
    })?;
    if y_cols.is_empty() || x_cols.is_empty() {
        return Err(Error::Parse {
            path: path_str.clone(),
            row: 1,
            message: "need at least one y* and one x* column".into(),
        });
    }

    let mut times = Vec::new();
    let mut y_rows: Vec<Vec<f64>> = Vec::new();
    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    let mut kind = TimeKind::Date;
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            path: path_str.clone(),
            row,
            message: e.to_string(),
        })?;
        let raw_date = record.get(date_col).unwrap_or("").trim();
        let time = match NaiveDate::parse_from_str(raw_date, "%Y-%m-%d") {
            Ok(d) => d.num_days_from_ce() as i64,
            Err(_) => {
                kind = TimeKind::Index;
                raw_date.parse::<i64>().map_err(|_| Error::Parse {
                    path: path_str.clone(),
                    row,
                    message: format!("bad date or index `{raw_date}`"),
                })?
            }
        };
        times.push(time);
        let mut ys = Vec::with_capacity(y_cols.len());
        for &c in &y_cols {
            ys.push(parse_number(
                &path_str,
                row,
                "response",
                record.get(c).unwrap_or(""),
            )?);
        }
        let mut xs = Vec::with_capacity(x_cols.len());
        for &c in &x_cols {
            xs.push(parse_number(
                &path_str,
                row,
                "covariate",
                record.get(c).unwrap_or(""),
            )?);
        }
        y_rows.push(ys);
        x_rows.push(xs);
    }
    if y_rows.is_empty() {
        return Err(Error::Parse {
            path: path_str.clone(),
            row: 1,
            message: "file contains no data rows".into(),
        });
    }
    let n = y_rows.len();
    let p = y_cols.len();
    let k = x_cols.len();
    let mut responses = Array2::zeros((n, p));
    let mut covariates = Array2::zeros((n, k));
    for i in 0..n {
        for j in 0..p {
            responses[(i, j)] = y_rows[i][j];
        }
        for j in 0..k {
            covariates[(i, j)] = x_rows[i][j];
        }
    }
    Dataset::new(responses, covariates, times, kind)
}
