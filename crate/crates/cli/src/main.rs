use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use trisk_cli::{
    check_config, cmd_assess, cmd_calibrate, cmd_generate, cmd_report, exit_code,
    render_calibration, GenerateKind, RunConfig, UsageError, CONFIG_ENV,
};
use trisk_core::calib::QuantileMode;
use trisk_core::report::HistogramSpec;
use trisk_core::risk::{BondSign, ClassWeighting};
use trisk_core::synth::SynthConfig;

/// Climate transition-risk repricing of investment fund portfolios.
#[derive(Parser, Debug)]
#[command(name = "trisk", version)]
struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit carbon-intensity distributions per segment.
    Calibrate {
        #[arg(long)]
        counterparties: Option<PathBuf>,
        /// Write the fitted rows to this CSV file.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Reprice every position and aggregate to funds.
    Assess(AssessArgs),
    /// Render tables and histograms from an assess output directory.
    Report(ReportArgs),
    /// Write a synthetic universe.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct AssessArgs {
    #[arg(long)]
    positions: Option<PathBuf>,
    #[arg(long)]
    instruments: Option<PathBuf>,
    #[arg(long)]
    counterparties: Option<PathBuf>,
    #[arg(long)]
    funds: Option<PathBuf>,
    #[arg(long)]
    sector_shocks: Option<PathBuf>,
    #[arg(long)]
    sovereign_shocks: Option<PathBuf>,
    /// JSON scenario used instead of the shock CSVs.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    tec_tac: Option<PathBuf>,
    #[arg(long)]
    cprs_map: Option<PathBuf>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    bond_sign: Option<SignArg>,
    #[arg(long, value_enum)]
    quantile_mode: Option<QuantileArg>,
    #[arg(long, value_enum)]
    class_weighting: Option<WeightingArg>,
    /// Use the plain quantile as the fund-vehicle multiplier.
    #[arg(long)]
    no_fund_factor_two: bool,
    /// Restrict fund statistics to funds carrying this label.
    #[arg(long)]
    subset: Option<String>,
    #[arg(long)]
    scaling_factor: Option<f64>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directory written by `assess`.
    #[arg(long)]
    results: PathBuf,
    #[arg(long, short)]
    output_dir: PathBuf,
    #[arg(long)]
    subset: Option<String>,
    #[arg(long)]
    scaling_factor: Option<f64>,
    /// Fund histogram lower bound, in percent.
    #[arg(long, allow_hyphen_values = true)]
    hist_lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hist_upper: Option<f64>,
    #[arg(long)]
    hist_width: Option<f64>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, short)]
    output_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    funds: Option<usize>,
    #[arg(long)]
    positions_per_fund: Option<usize>,
    #[arg(long)]
    sustainable_share: Option<f64>,
    #[arg(long)]
    missing_rate: Option<f64>,
    /// Write counterparties matching the shipped calibration moments instead.
    #[arg(long)]
    calibration_sample: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SignArg {
    Taylor,
    Additive,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum QuantileArg {
    Parametric,
    Empirical,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum WeightingArg {
    Equal,
    Aum,
}

fn base_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(cli.config.as_ref())?;
    match cli.command {
        Command::Calibrate {
            counterparties,
            output,
            threads,
        } => {
            set(&mut cfg.counterparties, counterparties);
            set(&mut cfg.threads, threads);
            check_config(&cfg)?;
            let out = cmd_calibrate(&cfg, output.as_deref())?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", render_calibration(&out.rows));
        }
        Command::Assess(a) => {
            set(&mut cfg.positions, a.positions);
            set(&mut cfg.instruments, a.instruments);
            set(&mut cfg.counterparties, a.counterparties);
            set(&mut cfg.funds, a.funds);
            set(&mut cfg.sector_shocks, a.sector_shocks);
            set(&mut cfg.sovereign_shocks, a.sovereign_shocks);
            set(&mut cfg.scenario, a.scenario);
            set(&mut cfg.calibration, a.calibration);
            set(&mut cfg.tec_tac, a.tec_tac);
            set(&mut cfg.cprs_map, a.cprs_map);
            set(&mut cfg.output_dir, a.output_dir);
            set(&mut cfg.threads, a.threads);
            set(&mut cfg.report.subset, a.subset);
            set(&mut cfg.report.scaling_factor, a.scaling_factor);
            if let Some(s) = a.bond_sign {
                cfg.risk.bond_sign = match s {
                    SignArg::Taylor => BondSign::Taylor,
                    SignArg::Additive => BondSign::Additive,
                };
            }
            if let Some(q) = a.quantile_mode {
                cfg.risk.quantile_mode = match q {
                    QuantileArg::Parametric => QuantileMode::Parametric,
                    QuantileArg::Empirical => QuantileMode::Empirical,
                };
            }
            if let Some(w) = a.class_weighting {
                cfg.risk.class_weighting = match w {
                    WeightingArg::Equal => ClassWeighting::Equal,
                    WeightingArg::Aum => ClassWeighting::Aum,
                };
            }
            if a.no_fund_factor_two {
                cfg.risk.fund_factor_two = false;
            }
            check_config(&cfg)?;
            let out = cmd_assess(&cfg)?;
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", trisk_core::report::render_text(&out.report));
        }
        Command::Report(r) => {
            let mut options = cfg.report.clone();
            set(&mut options.subset, r.subset);
            set(&mut options.scaling_factor, r.scaling_factor);
            let h = &mut options.fund_histogram;
            h.lower = r.hist_lower.unwrap_or(h.lower);
            h.upper = r.hist_upper.unwrap_or(h.upper);
            h.width = r.hist_width.unwrap_or(h.width);
            let HistogramSpec {
                lower,
                upper,
                width,
            } = *h;
            if !(width > 0.0 && upper > lower) {
                return Err(UsageError(format!(
                    "histogram needs lower < upper and a positive width, got {lower}..{upper} by {width}"
                ))
                .into());
            }
            let out = cmd_report(&r.results, &r.output_dir, &options)?;
            print!("{}", out.text);
        }
        Command::Generate(g) => {
            let kind = if g.calibration_sample {
                GenerateKind::CalibrationSample {
                    seed: g.seed.or(cfg.seed).unwrap_or(SynthConfig::default().seed),
                }
            } else {
                let d = SynthConfig::default();
                GenerateKind::Universe(SynthConfig {
                    seed: g.seed.or(cfg.seed).unwrap_or(d.seed),
                    funds: g.funds.unwrap_or(d.funds),
                    positions_per_fund: g.positions_per_fund.unwrap_or(d.positions_per_fund),
                    sustainable_share: g.sustainable_share.unwrap_or(d.sustainable_share),
                    missing_rate: g.missing_rate.unwrap_or(d.missing_rate),
                })
            };
            for p in cmd_generate(&kind, &g.output_dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
