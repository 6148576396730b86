//! Command-line front-end: conditional mean / covariance / quantile fits,
//! Value-at-Risk, bandwidth selection, the Monte Carlo study, and the
//! CSV-driven replay pipeline. Every run writes a JSON manifest from which
//! it can be reproduced exactly (`npts rerun <manifest>`).

mod commands;
mod manifest;
mod settings;

use clap::{Args, Parser, Subcommand};
use settings::Settings;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "npts",
    version,
    about = "Kernel-based estimation for multivariate time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Flat key = value config file (flags take precedence over it)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the run manifest (defaults next to the output)
    #[arg(long)]
    manifest: Option<String>,
    /// Kernel family: epanechnikov | gaussian
    #[arg(long)]
    kernel: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional mean with confidence bands per response coordinate
    FitMean {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV (date,y1..,x1..)
        #[arg(long)]
        input: Option<String>,
        /// Output CSV path
        #[arg(long)]
        output: Option<String>,
        /// Bandwidth on the standardized covariate scale (default: blocked CV)
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Band significance level (coverage is 1 - alpha)
        #[arg(long)]
        alpha: Option<f64>,
        /// Evaluation grid CSV in raw covariate units (default: per observation)
        #[arg(long)]
        grid_file: Option<String>,
    },
    /// Conditional covariance components and generalized variance
    FitCov {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        output: Option<String>,
        /// Bandwidth for the outer weighting (default: blocked CV)
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Bandwidth for the in-sample mean fits (default: same as --bandwidth)
        #[arg(long)]
        bandwidth_mean: Option<f64>,
        #[arg(long)]
        grid_file: Option<String>,
    },
    /// Conditional geometric quantiles at one or more levels
    FitQuantile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        output: Option<String>,
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Comma-separated levels in (0,1)
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        grid_file: Option<String>,
        /// Where to write the pairwise-separation report
        #[arg(long)]
        noncrossing_output: Option<String>,
    },
    /// Conditional Value-at-Risk of the negated responses
    Var {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        output: Option<String>,
        #[arg(long)]
        bandwidth: Option<f64>,
        /// VaR confidence level
        #[arg(long)]
        alpha: Option<f64>,
        /// Fit once per ISO week, at its last observation
        #[arg(long)]
        weekly: bool,
    },
    /// Monte Carlo accuracy study over the simulated designs
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        output: Option<String>,
        /// Comma-separated sample sizes
        #[arg(long)]
        sizes: Option<String>,
        /// Comma-separated error families: normal | t3 | shifted-exponential
        #[arg(long)]
        dists: Option<String>,
        /// Comma-separated targets: mean or q0.05-style levels
        #[arg(long)]
        targets: Option<String>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// AR(1) coefficient of the covariate processes
        #[arg(long)]
        ar_coeff: Option<f64>,
        /// Weight of the shared innovation component
        #[arg(long)]
        common_innovation_weight: Option<f64>,
        /// Mixing coefficients of the second response (must sum to 1)
        #[arg(long)]
        b_coeffs: Option<String>,
    },
    /// Full pipeline: load prices and risk indices, align, fit everything
    Replay {
        #[command(flatten)]
        common: Common,
        /// First asset's price CSV (date,close)
        #[arg(long)]
        prices_a: Option<String>,
        /// Second asset's price CSV (date,close)
        #[arg(long)]
        prices_b: Option<String>,
        /// Risk index CSV (date,gprd,gprd_a,gprd_t)
        #[arg(long)]
        risk: Option<String>,
        /// Output directory for the artifact files
        #[arg(long)]
        out_dir: Option<String>,
        /// Pair the return on day t with indices of day t - lag
        #[arg(long)]
        lag: Option<i64>,
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        levels: Option<String>,
        /// VaR confidence level for the weekly series
        #[arg(long)]
        var_alpha: Option<f64>,
        /// Significance level of the mean bands
        #[arg(long)]
        band_alpha: Option<f64>,
        /// Rolling volatility window in observations
        #[arg(long)]
        vol_window: Option<usize>,
    },
    /// Blocked cross-validation over a bandwidth grid
    SelectBandwidth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        output: Option<String>,
        /// Comma-separated candidate bandwidths
        #[arg(long)]
        grid: Option<String>,
        /// Number of contiguous temporal blocks
        #[arg(long)]
        blocks: Option<usize>,
    },
    /// Re-run a previous invocation from its manifest
    Rerun {
        /// Path to a manifest.json written by an earlier run
        manifest: PathBuf,
    },
}

fn file_map(common: &Common) -> Result<BTreeMap<String, String>, npts_core::Error> {
    match &common.config {
        Some(path) => settings::load_config_file(path),
        None => Ok(BTreeMap::new()),
    }
}

fn common_settings(s: &mut Settings, common: &Common, file: &BTreeMap<String, String>) {
    s.resolve("kernel", common.kernel.clone(), file, Some("epanechnikov"));
    s.resolve("manifest", common.manifest.clone(), file, None);
}

fn assemble(cli: Command) -> Result<(String, Settings), npts_core::Error> {
    let mut s = Settings::new();
    match cli {
        Command::FitMean {
            common,
            input,
            output,
            bandwidth,
            alpha,
            grid_file,
        } => {
            let file = file_map(&common)?;
            common_settings(&mut s, &common, &file);
            s.resolve("input", input, &file, None);
            s.resolve("output", output, &file, None);
            s.resolve("bandwidth", bandwidth.map(|v| v.to_string()), &file, None);
            s.resolve("alpha", alpha.map(|v| v.to_string()), &file, Some("0.05"));
            s.resolve("grid_file", grid_file, &file, None);
            Ok(("fit-mean".into(), s))
        }
        Command::FitCov {
            common,
            input,
            output,
            bandwidth,
            bandwidth_mean,
            grid_file,
        } => {
            let file = file_map(&common)?;
            common_settings(&mut s, &common, &file);
            s.resolve("input", input, &file, None);
            s.resolve("output", output, &file, None);
            s.resolve("bandwidth", bandwidth.map(|v| v.to_string()), &file, None);
            s.resolve(
                "bandwidth_mean",
                bandwidth_mean.map(|v| v.to_string()),
                &file,
                None,
            );
            s.resolve("grid_file", grid_file, &file, None);
            Ok(("fit-cov".into(), s))
        }
        Command::FitQuantile {
            common,
            input,
            output,
            bandwidth,
            levels,
            grid_file,
            noncrossing_output,
        } => {
            let file = file_map(&common)?;
            common_settings(&mut s, &common, &file);
            s.resolve("input", input, &file, None);
            s.resolve("output", output, &file, None);
            s.resolve("bandwidth", bandwidth.map(|v| v.to_string()), &file, None);
            s.resolve("levels", levels, &file, Some("0.05,0.5,0.95"));
            s.resolve("grid_file", grid_file, &file, None);
            s.resolve("noncrossing_output", noncrossing_output, &file, None);
            Ok(("fit-quantile".into(), s))
        }
        Command::Var {
            common,
            input,
            output,
            bandwidth,
            alpha,
            weekly,
        } => {
            let file = file_map(&common)?;
            common_settings(&mut s, &common, &file);
            s.resolve("input", input, &file, None);
            s.resolve("output", output, &file, None);
            s.resolve("bandwidth", bandwidth.map(|v| v.to_string()), &file, None);
            s.resolve("alpha", alpha.map(|v| v.to_string()), &file, Some("0.95"));
            s.resolve(
                "weekly",
                weekly.then(|| "true".to_string()),
                &file,
                Some("false"),
            );
            Ok(("var".into(), s))
        }
        Command::Simulate {
            common,
            output,
            sizes,
            dists,
            targets,
            replications,
            seed,
            ar_coeff,
            common_innovation_weight,
            b_coeffs,
        } => {
            let file = file_map(&common)?;
            common_settings(&mut s, &common, &file);
            s.resolve("output", output, &file, None);
            s.resolve("sizes", sizes, &file, Some("100,500,1000"));
            s.resolve("dists", dists, &file, Some("normal,t3,shifted-exponential"));
            s.resolve("targets", targets, &file, Some("mean,q0.05,q0.5,q0.95"));
            s.resolve(
                "replications",
                replications.map(|v| v.to_string()),
                &file,
                Some("50"),
            );
            s.resolve("seed", seed.map(|v| v.to_string()), &file, Some("20250401"));
            s.resolve(
                "ar_coeff",
                ar_coeff.map(|v| v.to_string()),
                &file,
                Some("0.5"),
            );
            s.resolve(
                "common_innovation_weight",
                common_innovation_weight.map(|v| v.to_string()),
                &file,
                Some("0.5"),
            );
            s.resolve("b_coeffs", b_coeffs, &file, Some("0.5,0.3,0.2"));
            Ok(("simulate".into(), s))
        }
        Command::Replay {
            common,
            prices_a,
            prices_b,
            risk,
            out_dir,
            lag,
            bandwidth,
            levels,
            var_alpha,
            band_alpha,
            vol_window,
        } => {
            let file = file_map(&common)?;
            common_settings(&mut s, &common, &file);
            s.resolve("prices_a", prices_a, &file, None);
            s.resolve("prices_b", prices_b, &file, None);
            s.resolve("risk", risk, &file, None);
            s.resolve("out_dir", out_dir, &file, None);
            s.resolve("lag", lag.map(|v| v.to_string()), &file, Some("0"));
            s.resolve("bandwidth", bandwidth.map(|v| v.to_string()), &file, None);
            s.resolve("levels", levels, &file, Some("0.05,0.5,0.95"));
            s.resolve(
                "var_alpha",
                var_alpha.map(|v| v.to_string()),
                &file,
                Some("0.95"),
            );
            s.resolve(
                "band_alpha",
                band_alpha.map(|v| v.to_string()),
                &file,
                Some("0.05"),
            );
            s.resolve(
                "vol_window",
                vol_window.map(|v| v.to_string()),
                &file,
                Some("5"),
            );
            Ok(("replay".into(), s))
        }
        Command::SelectBandwidth {
            common,
            input,
            output,
            grid,
            blocks,
        } => {
            let file = file_map(&common)?;
            common_settings(&mut s, &common, &file);
            s.resolve("input", input, &file, None);
            s.resolve("output", output, &file, None);
            s.resolve("grid", grid, &file, Some("0.3,0.5,0.75,1,1.5,2"));
            s.resolve("blocks", blocks.map(|v| v.to_string()), &file, Some("5"));
            Ok(("select-bandwidth".into(), s))
        }
        Command::Rerun { manifest } => {
            let (command, settings) = manifest::read_manifest(&manifest)?;
            Ok((command, settings))
        }
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("NPTS_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let started = Instant::now();
    let (command, settings) = match assemble(cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            return ExitCode::from(2);
        }
    };
    match commands::run(&command, &settings) {
        Ok(()) => {
            let wall = started.elapsed().as_millis();
            match commands::manifest_path(&command, &settings)
                .and_then(|p| manifest::write_manifest(&p, &command, &settings, wall))
            {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error[{}]: {e}", e.category());
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            let code = match &e {
                npts_core::Error::InvalidArgument(msg)
                    if msg.starts_with("missing required setting") =>
                {
                    2
                }
                _ => 1,
            };
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(code)
        }
    }
}
