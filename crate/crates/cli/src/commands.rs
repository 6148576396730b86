//! Implementations of the CLI subcommands over the resolved settings map.

use crate::settings::Settings;
use chrono::{Datelike, NaiveDate};
use npts_core::bandwidth::{blocked_cv_bandwidth, CvConfig, CvReport};
use npts_core::covariance::{estimate_cov_with_means, fitted_means};
use npts_core::dataio;
use npts_core::dataset::{Dataset, TimeKind};
use npts_core::kernel::{Bandwidth, KernelSpec};
use npts_core::mean::{confidence_band_with_cov, estimate_mean};
use npts_core::quantile::{check_noncrossing, IrlsConfig};
use npts_core::risk::{rolling_volatility, var_estimate};
use npts_core::sim::{run_monte_carlo_suite, ErrorDist, SimConfig, Target};
use npts_core::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Evaluation rows: standardized coordinates plus an output label per row.
struct EvalGrid {
    points: Vec<Vec<f64>>,
    labels: Vec<String>,
}

fn kernel_spec(settings: &Settings, dim: usize) -> Result<KernelSpec> {
    let family = settings.get("kernel").unwrap_or("epanechnikov").parse()?;
    KernelSpec::new(family, dim)
}

/// Bandwidth from the settings, or blocked cross-validation when absent.
fn resolve_bandwidth(
    settings: &Settings,
    key: &str,
    data: &Dataset,
    spec: &KernelSpec,
) -> Result<(Bandwidth, Option<CvReport>)> {
    if let Some(value) = settings.get_f64(key)? {
        return Ok((Bandwidth::new(value)?, None));
    }
    let report = blocked_cv_bandwidth(data, spec, &CvConfig::default())?;
    eprintln!(
        "note: `{key}` not set; blocked cross-validation selected bandwidth {}",
        report.selected.value()
    );
    Ok((report.selected, Some(report)))
}

/// Grid file (`x1,...,xk` in raw units) or per-observation evaluation.
fn eval_grid(settings: &Settings, data: &Dataset) -> Result<EvalGrid> {
    if let Some(path) = settings.get("grid_file") {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.len() != data.k() {
            return Err(Error::InvalidArgument(format!(
                "grid file `{path}` has {} columns, expected {} (header x1,...,x{})",
                headers.len(),
                data.k(),
                data.k()
            )));
        }
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                path: path.to_string(),
                row: i + 2,
                message: e.to_string(),
            })?;
            let raw: Vec<f64> = record
                .iter()
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::Parse {
                        path: path.to_string(),
                        row: i + 2,
                        message: format!("bad grid value `{s}`"),
                    })
                })
                .collect::<Result<_>>()?;
            points.push(data.standardize_point(&raw)?);
            labels.push(i.to_string());
        }
        if points.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "grid file `{path}` has no rows"
            )));
        }
        Ok(EvalGrid { points, labels })
    } else {
        let points = (0..data.n())
            .map(|t| data.covariate_std_row(t).to_vec())
            .collect();
        let labels = (0..data.n()).map(|t| data.time_label(t)).collect();
        Ok(EvalGrid { points, labels })
    }
}

fn create_output(path: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn irls_from_settings(settings: &Settings) -> Result<IrlsConfig> {
    let mut cfg = IrlsConfig::default();
    if let Some(tol) = settings.get_f64("irls_tol")? {
        cfg.tol = tol;
    }
    if let Some(iters) = settings.get("irls_max_iter") {
        cfg.max_iter = iters.parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "setting `irls_max_iter` is not an integer: `{iters}`"
            ))
        })?;
    }
    Ok(cfg)
}

pub fn fit_mean(settings: &Settings) -> Result<()> {
    let data = dataio::read_dataset_csv(settings.require("input")?)?;
    let spec = kernel_spec(settings, data.k())?;
    let alpha = settings.get_f64("alpha")?.unwrap_or(0.05);
    let (b, _) = resolve_bandwidth(settings, "bandwidth", &data, &spec)?;
    let grid = eval_grid(settings, &data)?;
    let fitted = fitted_means(&data, &spec, b)?;

    let mut out = create_output(settings.require("output")?)?;
    let p = data.p();
    let mut header = String::from("date");
    for j in 0..p {
        header.push_str(&format!(",mu_{}", j + 1));
    }
    for j in 0..p {
        header.push_str(&format!(",band_low_{},band_high_{}", j + 1, j + 1));
    }
    writeln!(out, "{header}")?;
    for (x, label) in grid.points.iter().zip(grid.labels.iter()) {
        let est = estimate_mean(&data, x, &spec, b)?;
        let cov = estimate_cov_with_means(&data, x, &spec, b, &fitted)?;
        let mut line = label.clone();
        for j in 0..p {
            line.push_str(&format!(",{}", est.point[j]));
        }
        for j in 0..p {
            let mut contrast = vec![0.0; p];
            contrast[j] = 1.0;
            let band = confidence_band_with_cov(&data, x, &spec, b, &cov, &contrast, alpha)?;
            line.push_str(&format!(
                ",{},{}",
                band.center - band.half_width,
                band.center + band.half_width
            ));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn fit_cov(settings: &Settings) -> Result<()> {
    let data = dataio::read_dataset_csv(settings.require("input")?)?;
    let spec = kernel_spec(settings, data.k())?;
    let (b_cov, _) = resolve_bandwidth(settings, "bandwidth", &data, &spec)?;
    let b_mean = match settings.get_f64("bandwidth_mean")? {
        Some(v) => Bandwidth::new(v)?,
        None => b_cov,
    };
    let grid = eval_grid(settings, &data)?;
    let fitted = fitted_means(&data, &spec, b_mean)?;

    let mut out = create_output(settings.require("output")?)?;
    let p = data.p();
    let mut header = String::from("date");
    for i in 0..p {
        for j in i..p {
            header.push_str(&format!(",sigma_{}_{}", i + 1, j + 1));
        }
    }
    header.push_str(",gen_var");
    writeln!(out, "{header}")?;
    for (x, label) in grid.points.iter().zip(grid.labels.iter()) {
        let cov = estimate_cov_with_means(&data, x, &spec, b_cov, &fitted)?;
        let mut line = label.clone();
        for i in 0..p {
            for j in i..p {
                line.push_str(&format!(",{}", cov.matrix[(i, j)]));
            }
        }
        line.push_str(&format!(",{}", cov.generalized_variance));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn parse_levels(settings: &Settings) -> Result<Vec<f64>> {
    let levels = settings.require_f64_list("levels")?;
    for &l in &levels {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile level must be in (0,1), got {l}"
            )));
        }
    }
    Ok(levels)
}

pub fn fit_quantile(settings: &Settings) -> Result<()> {
    let data = dataio::read_dataset_csv(settings.require("input")?)?;
    let spec = kernel_spec(settings, data.k())?;
    let levels = parse_levels(settings)?;
    let (b, _) = resolve_bandwidth(settings, "bandwidth", &data, &spec)?;
    let cfg = irls_from_settings(settings)?;
    let grid = eval_grid(settings, &data)?;

    let output = settings.require("output")?;
    let noncrossing_path = settings
        .get("noncrossing_output")
        .map(str::to_string)
        .unwrap_or_else(|| derived_path(output, "_noncrossing"));

    let mut out = create_output(output)?;
    let mut nc_out = create_output(&noncrossing_path)?;
    let p = data.p();
    let mut header = String::from("date");
    for tau in &levels {
        for j in 0..p {
            header.push_str(&format!(",q{}_{}", tau, j + 1));
        }
    }
    writeln!(out, "{header}")?;
    let mut nc_header = String::from("date");
    for i in 0..levels.len() {
        for j in i + 1..levels.len() {
            nc_header.push_str(&format!(",dist_q{}_q{}", levels[i], levels[j]));
        }
    }
    nc_header.push_str(",separated");
    writeln!(nc_out, "{nc_header}")?;

    let mut all_separated = true;
    let mut worst = f64::INFINITY;
    for (x, label) in grid.points.iter().zip(grid.labels.iter()) {
        let report = check_noncrossing(&data, x, &spec, b, &levels, &cfg)?;
        let mut line = label.clone();
        for q in &report.quantiles {
            for j in 0..p {
                line.push_str(&format!(",{}", q[j]));
            }
        }
        writeln!(out, "{line}")?;
        let mut nc_line = label.clone();
        for i in 0..levels.len() {
            for j in i + 1..levels.len() {
                nc_line.push_str(&format!(",{}", report.distances[(i, j)]));
            }
        }
        nc_line.push_str(&format!(",{}", report.separated));
        writeln!(nc_out, "{nc_line}")?;
        all_separated &= report.separated;
        worst = worst.min(report.min_separation);
    }
    eprintln!(
        "note: non-crossing report written to {noncrossing_path} (all separated: {all_separated}, \
         min separation: {worst})"
    );
    Ok(())
}

fn derived_path(output: &str, suffix: &str) -> String {
    let path = Path::new(output);
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("output");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    let file = format!("{stem}{suffix}.{ext}");
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(file).display().to_string(),
        _ => file,
    }
}

/// Indices of the last observation of each ISO week.
fn weekly_indices(data: &Dataset) -> Result<Vec<usize>> {
    if data.time_kind() != TimeKind::Date {
        return Err(Error::InvalidArgument(
            "weekly aggregation requires a dated dataset".into(),
        ));
    }
    let mut picked: Vec<usize> = Vec::new();
    let mut current_week: Option<(i32, u32)> = None;
    for t in 0..data.n() {
        let date =
            NaiveDate::from_num_days_from_ce_opt(data.times()[t] as i32).ok_or_else(|| {
                Error::InvalidArgument(format!("bad date ordinal {}", data.times()[t]))
            })?;
        let week = (date.iso_week().year(), date.iso_week().week());
        match current_week {
            Some(w) if w == week => {
                *picked
                    .last_mut()
                    .expect("picked non-empty when week tracked") = t;
            }
            _ => {
                picked.push(t);
                current_week = Some(week);
            }
        }
    }
    Ok(picked)
}

pub fn var(settings: &Settings) -> Result<()> {
    let data = dataio::read_dataset_csv(settings.require("input")?)?;
    let spec = kernel_spec(settings, data.k())?;
    let alpha = settings.get_f64("alpha")?.unwrap_or(0.95);
    let (b, _) = resolve_bandwidth(settings, "bandwidth", &data, &spec)?;
    let cfg = irls_from_settings(settings)?;
    let weekly = settings.get_bool("weekly")?;
    let rows: Vec<usize> = if weekly {
        weekly_indices(&data)?
    } else {
        (0..data.n()).collect()
    };

    let mut out = create_output(settings.require("output")?)?;
    let p = data.p();
    let mut header = String::from("date");
    for j in 0..p {
        header.push_str(&format!(",var_{}", j + 1));
    }
    writeln!(out, "{header}")?;
    for &t in &rows {
        let x: Vec<f64> = data.covariate_std_row(t).to_vec();
        let est = var_estimate(&data, &x, &spec, b, alpha, &cfg)?;
        let mut line = data.time_label(t);
        for j in 0..p {
            line.push_str(&format!(",{}", est.value[j]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn simulate(settings: &Settings) -> Result<()> {
    let sizes = settings.require_usize_list("sizes")?;
    let dists: Vec<ErrorDist> = settings
        .require("dists")?
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    let targets: Vec<Target> = settings
        .require("targets")?
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    let b_raw = settings.require_f64_list("b_coeffs")?;
    if b_raw.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "b_coeffs must have exactly 3 entries, got {}",
            b_raw.len()
        )));
    }
    let cfg = SimConfig {
        n: sizes.iter().copied().max().unwrap_or(500),
        ar_coeff: settings.require_f64("ar_coeff")?,
        common_innovation_weight: settings.require_f64("common_innovation_weight")?,
        b_coeffs: [b_raw[0], b_raw[1], b_raw[2]],
        error_dist: ErrorDist::Normal,
        seed: settings.require_u64("seed")?,
        replications: settings.require_usize("replications")?,
    };
    let report = run_monte_carlo_suite(&cfg, &dists, &sizes, &targets)?;
    for note in &report.log {
        eprintln!("note: {note}");
    }
    let mut out = create_output(settings.require("output")?)?;
    out.write_all(report.to_csv_string().as_bytes())?;
    print!("{}", report.render_table());
    Ok(())
}

pub fn select_bandwidth(settings: &Settings) -> Result<()> {
    let data = dataio::read_dataset_csv(settings.require("input")?)?;
    let spec = kernel_spec(settings, data.k())?;
    let cfg = CvConfig {
        candidate_grid: settings.require_f64_list("grid")?,
        n_blocks: settings.require_usize("blocks")?,
        ..CvConfig::default()
    };
    let report = blocked_cv_bandwidth(&data, &spec, &cfg)?;
    let mut out = create_output(settings.require("output")?)?;
    let mut header = String::from("bandwidth,mean_score,selected");
    for b in 0..cfg.n_blocks {
        header.push_str(&format!(",block_{}", b + 1));
    }
    writeln!(out, "{header}")?;
    for (ci, (cand, score)) in report.scores.iter().enumerate() {
        let mut line = format!(
            "{},{},{}",
            cand,
            score,
            if *cand == report.selected.value() {
                "true"
            } else {
                "false"
            }
        );
        for bi in 0..cfg.n_blocks {
            line.push_str(&format!(",{}", report.per_block_scores[(ci, bi)]));
        }
        writeln!(out, "{line}")?;
    }
    println!("selected bandwidth: {}", report.selected.value());
    Ok(())
}

pub fn replay(settings: &Settings) -> Result<()> {
    let out_dir = PathBuf::from(settings.require("out_dir")?);
    std::fs::create_dir_all(&out_dir)?;
    let prices_a = dataio::load_price_csv(settings.require("prices_a")?)?;
    let prices_b = dataio::load_price_csv(settings.require("prices_b")?)?;
    let risk = dataio::load_risk_csv(settings.require("risk")?)?;
    let lag: i64 = settings
        .get("lag")
        .unwrap_or("0")
        .parse()
        .map_err(|_| Error::InvalidArgument("setting `lag` is not an integer".into()))?;
    let returns_a = dataio::log_returns(&prices_a)?;
    let returns_b = dataio::log_returns(&prices_b)?;
    let (data, align_report) = dataio::align(&returns_a, &returns_b, &risk, lag)?;
    eprintln!(
        "note: aligned {} observations; dropped {} return dates and {} risk dates",
        align_report.n,
        align_report.dropped_return_dates.len(),
        align_report.dropped_risk_dates.len()
    );
    dataio::write_dataset_csv(out_dir.join("dataset.csv"), &data)?;
    {
        let mut f =
            std::io::BufWriter::new(std::fs::File::create(out_dir.join("align_report.csv"))?);
        writeln!(f, "kind,date")?;
        for d in &align_report.dropped_return_dates {
            writeln!(f, "dropped_return,{}", d.format("%Y-%m-%d"))?;
        }
        for d in &align_report.dropped_risk_dates {
            writeln!(f, "dropped_risk,{}", d.format("%Y-%m-%d"))?;
        }
    }

    // Shared settings for the estimation passes over the aligned dataset.
    let dataset_path = out_dir.join("dataset.csv").display().to_string();
    let mut sub = settings.clone();
    sub.resolve("input", Some(dataset_path), &Default::default(), None);
    sub.resolve(
        "output",
        Some(out_dir.join("mean.csv").display().to_string()),
        &Default::default(),
        None,
    );
    sub.resolve(
        "alpha",
        settings.get("band_alpha").map(str::to_string),
        &Default::default(),
        Some("0.05"),
    );

    // Pin one bandwidth for every pass so the replay is coherent.
    let spec = kernel_spec(settings, data.k())?;
    let (b, _) = resolve_bandwidth(settings, "bandwidth", &data, &spec)?;
    let mut fixed = sub.clone();
    fixed.resolve(
        "bandwidth",
        Some(b.value().to_string()),
        &Default::default(),
        None,
    );

    fit_mean(&fixed)?;

    let mut cov_settings = fixed.clone();
    cov_settings.resolve(
        "output",
        Some(out_dir.join("covariance.csv").display().to_string()),
        &Default::default(),
        None,
    );
    fit_cov(&cov_settings)?;

    let mut q_settings = fixed.clone();
    q_settings.resolve(
        "output",
        Some(out_dir.join("quantiles.csv").display().to_string()),
        &Default::default(),
        None,
    );
    q_settings.resolve(
        "noncrossing_output",
        Some(out_dir.join("noncrossing.csv").display().to_string()),
        &Default::default(),
        None,
    );
    q_settings.resolve("levels", None, &Default::default(), Some("0.05,0.5,0.95"));
    fit_quantile(&q_settings)?;

    let mut var_settings = fixed.clone();
    var_settings.resolve(
        "output",
        Some(out_dir.join("var_weekly.csv").display().to_string()),
        &Default::default(),
        None,
    );
    var_settings.resolve(
        "alpha",
        settings.get("var_alpha").map(str::to_string),
        &Default::default(),
        Some("0.95"),
    );
    var_settings.resolve("weekly", Some("true".into()), &Default::default(), None);
    var(&var_settings)?;

    // Rolling volatility of each return series.
    let window = settings
        .get("vol_window")
        .unwrap_or("5")
        .parse::<usize>()
        .map_err(|_| Error::InvalidArgument("setting `vol_window` is not an integer".into()))?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("volatility.csv"))?);
    let mut header = String::from("date");
    for j in 0..data.p() {
        header.push_str(&format!(",vol_{}", j + 1));
    }
    writeln!(f, "{header}")?;
    let mut cols = Vec::new();
    for j in 0..data.p() {
        let series: Vec<f64> = data.responses().column(j).to_vec();
        cols.push(rolling_volatility(&series, window)?);
    }
    for (i, row) in (window - 1..data.n()).enumerate() {
        let mut line = data.time_label(row);
        for col in &cols {
            line.push_str(&format!(",{}", col[i]));
        }
        writeln!(f, "{line}")?;
    }
    Ok(())
}

/// Dispatch a command over its resolved settings.
pub fn run(command: &str, settings: &Settings) -> Result<()> {
    match command {
        "fit-mean" => fit_mean(settings),
        "fit-cov" => fit_cov(settings),
        "fit-quantile" => fit_quantile(settings),
        "var" => var(settings),
        "simulate" => simulate(settings),
        "replay" => replay(settings),
        "select-bandwidth" => select_bandwidth(settings),
        other => Err(Error::InvalidArgument(format!("unknown command `{other}`"))),
    }
}

/// Default manifest location for a command's resolved settings.
pub fn manifest_path(command: &str, settings: &Settings) -> Result<PathBuf> {
    if let Some(path) = settings.get("manifest") {
        return Ok(PathBuf::from(path));
    }
    if command == "replay" {
        return Ok(PathBuf::from(settings.require("out_dir")?).join("manifest.json"));
    }
    let output = settings.require("output")?;
    Ok(PathBuf::from(format!("{output}.manifest.json")))
}
