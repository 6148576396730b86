//! Shared fixtures for the CLI tests: deterministic synthetic price and
//! risk-index files covering about a year of business days.

use chrono::{Datelike, NaiveDate};
use std::path::{Path, PathBuf};
use std::process::Command;

pub fn npts() -> Command {
    Command::new(env!("CARGO_BIN_EXE_npts"))
}

pub fn write_fixtures(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let mut date = NaiveDate::from_ymd_opt(2021, 4, 1).unwrap();
    let mut rows_a = String::from("date,close\n");
    let mut rows_b = String::from("date,close\n");
    let mut rows_r = String::from("date,gprd,gprd_a,gprd_t\n");
    let mut pa = 100.0_f64;
    let mut pb = 50.0_f64;
    let mut count = 0usize;
    let mut t = 0.0_f64;
    while count < 300 {
        if date.weekday().num_days_from_monday() < 5 {
            t += 1.0;
            let risk = 100.0 + 30.0 * (0.13 * t).sin() + 10.0 * (0.57 * t).cos();
            let ra = 0.012 * (1.7 * t).sin() + 0.006 * (0.31 * t + 1.0).sin()
                - 0.0004 * (risk - 100.0) / 50.0;
            let rb =
                0.02 * (2.3 * t).sin() + 0.008 * (0.47 * t).cos() - 0.001 * (risk - 100.0) / 50.0;
            pa *= ra.exp();
            pb *= rb.exp();
            rows_a.push_str(&format!("{},{}\n", date.format("%Y-%m-%d"), pa));
            rows_b.push_str(&format!("{},{}\n", date.format("%Y-%m-%d"), pb));
            rows_r.push_str(&format!(
                "{},{},{},{}\n",
                date.format("%Y-%m-%d"),
                risk,
                (risk * 0.8 + 5.0 * (0.23 * t).sin()).max(1.0),
                (risk * 1.1 + 6.0 * (0.41 * t).cos()).max(1.0),
            ));
            count += 1;
        }
        date = date.succ_opt().unwrap();
    }
    let pa_path = dir.join("prices_a.csv");
    let pb_path = dir.join("prices_b.csv");
    let risk_path = dir.join("risk.csv");
    std::fs::write(&pa_path, rows_a).unwrap();
    std::fs::write(&pb_path, rows_b).unwrap();
    std::fs::write(&risk_path, rows_r).unwrap();
    (pa_path, pb_path, risk_path)
}
