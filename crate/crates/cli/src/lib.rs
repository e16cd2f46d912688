//! Batch commands behind the `trisk` binary: calibration, assessment,
//! reporting and synthetic data generation.
//!
//! Every command takes a [`RunConfig`], so a run can be replayed from the
//! configuration echoed into its report.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde::{Deserialize, Serialize};

use trisk_core::aggregate::{self, FundResult};
use trisk_core::calib::{self, CalibrationSet};
use trisk_core::ingest::{self, builtin, UniversePaths};
use trisk_core::report::{self, ReportOptions, SectorReport};
use trisk_core::risk::{self, RiskConfig};
use trisk_core::synth::{self, SynthConfig};
use trisk_core::{validate_universe, Scenario, SectorCalibration, Universe};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "TRISK_CONFIG";

pub const POSITIONS_FILE: &str = "positions.csv";
pub const FUNDS_FILE: &str = "funds.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const CALIBRATION_FILE: &str = "calibration.csv";

/// Segments with fewer firms than this get a warning after calibration.
pub const SMALL_SEGMENT: usize = 5;

/// Inputs and switches of a run. Unset paths fall back to the shipped data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub positions: Option<PathBuf>,
    pub instruments: Option<PathBuf>,
    pub counterparties: Option<PathBuf>,
    pub funds: Option<PathBuf>,
    pub sector_shocks: Option<PathBuf>,
    pub sovereign_shocks: Option<PathBuf>,
    /// JSON scenario, used when no shock CSVs are given.
    pub scenario: Option<PathBuf>,
    /// Calibration rows that replace the shipped defaults.
    pub calibration: Option<PathBuf>,
    pub tec_tac: Option<PathBuf>,
    pub cprs_map: Option<PathBuf>,
    pub risk: RiskConfig,
    pub report: ReportOptions,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; all cores when unset. Never changes results.
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Reads a JSON configuration. Relative paths inside it are taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(trisk_core::Error::from)
            .with_context(|| format!("parsing {}", path.display()))?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut() {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        for p in [
            &mut self.positions,
            &mut self.instruments,
            &mut self.counterparties,
            &mut self.funds,
            &mut self.sector_shocks,
            &mut self.sovereign_shocks,
            &mut self.scenario,
            &mut self.calibration,
            &mut self.tec_tac,
            &mut self.cprs_map,
            &mut self.output_dir,
        ] {
            fix(p);
        }
    }

    /// The configuration as echoed into reports. Thread count and output
    /// directory are left out: they do not affect results, and keeping them
    /// would make otherwise identical runs differ.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("threads");
            m.remove("output_dir");
        }
        v
    }

    fn input_paths(&self) -> impl Iterator<Item = &PathBuf> {
        [
            &self.positions,
            &self.instruments,
            &self.counterparties,
            &self.funds,
            &self.sector_shocks,
            &self.sovereign_shocks,
            &self.scenario,
            &self.calibration,
            &self.tec_tac,
            &self.cprs_map,
        ]
        .into_iter()
        .flatten()
    }

    /// Fails with an I/O error naming the first input that does not exist.
    pub fn check_paths(&self) -> Result<()> {
        for p in self.input_paths() {
            if !p.exists() {
                return Err(trisk_core::Error::Io {
                    path: p.clone(),
                    source: std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        "input file not found",
                    ),
                }
                .into());
            }
        }
        Ok(())
    }

    pub fn universe_paths(&self) -> Result<UniversePaths> {
        let need = |p: &Option<PathBuf>, what: &str| {
            p.clone()
                .with_context(|| format!("no {what} file given"))
                .map_err(|e| anyhow::Error::new(UsageError(format!("{e:#}"))))
        };
        Ok(UniversePaths {
            positions: need(&self.positions, "positions")?,
            instruments: need(&self.instruments, "instruments")?,
            counterparties: need(&self.counterparties, "counterparties")?,
            funds: self.funds.clone(),
        })
    }

    /// The scenario with CPRS map and TEC/TAC table attached, plus load warnings.
    pub fn load_scenario(&self) -> Result<(Scenario, Vec<String>)> {
        let (mut scenario, warnings) = match (&self.sector_shocks, &self.scenario) {
            (Some(sector), _) => {
                let sov = self.sovereign_shocks.as_ref().ok_or_else(|| {
                    UsageError("sector shocks given without sovereign shocks".into())
                })?;
                let load = ingest::load_scenario(sector, sov)?;
                (load.scenario, load.warnings)
            }
            (None, Some(bundle)) => (ingest::load_scenario_bundle(bundle)?, Vec::new()),
            (None, None) => (builtin::delayed_transition(), Vec::new()),
        };
        if let Some(p) = &self.cprs_map {
            scenario.cprs_map = Some(ingest::read_cprs_map(p)?);
        } else if scenario.cprs_map.is_none() {
            scenario.cprs_map = Some(builtin::cprs_map());
        }
        if let Some(p) = &self.tec_tac {
            scenario.tec_tac_table = Some(ingest::read_tec_tac(p)?);
        } else if scenario.tec_tac_table.is_none() {
            scenario.tec_tac_table = Some(builtin::tec_tac_sample());
        }
        Ok((scenario, warnings))
    }

    pub fn load_calibration(&self) -> Result<CalibrationSet> {
        let mut set = calib::default_calibration();
        if let Some(p) = &self.calibration {
            set.overlay(calib::read_calibration(p)?);
        }
        Ok(set)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            b = b.num_threads(n.max(1));
        }
        b.build().context("starting worker threads")
    }
}

/// Invalid command-line usage or configuration.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Universe rejected by validation.
#[derive(Debug)]
pub struct ValidationFailed(pub Vec<String>);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} fatal validation finding(s)", self.0.len())?;
        for line in &self.0 {
            write!(f, "\n  {line}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationFailed {}

/// Process exit code for an error: 2 for filesystem problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<trisk_core::Error>() {
            return if e.is_data_error() { 1 } else { 2 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().context("output path has no file name")?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let io = |e: std::io::Error, p: &Path| trisk_core::Error::Io {
        path: p.to_path_buf(),
        source: e,
    };
    {
        let mut f = File::create(&tmp).map_err(|e| io(e, &tmp))?;
        f.write_all(contents).map_err(|e| io(e, &tmp))?;
        f.sync_all().map_err(|e| io(e, &tmp))?;
    }
    fs::rename(&tmp, path).map_err(|e| io(e, path))?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| trisk_core::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Result of [`cmd_calibrate`].
#[derive(Debug, Clone)]
pub struct CalibrateOutput {
    pub rows: Vec<SectorCalibration>,
    pub excluded_nonpositive: usize,
    pub warnings: Vec<String>,
}

/// Fits every segment present in the counterparty file. Writes the rows as CSV
/// to `output` when given.
pub fn cmd_calibrate(cfg: &RunConfig, output: Option<&Path>) -> Result<CalibrateOutput> {
    cfg.check_paths()?;
    let path = cfg
        .counterparties
        .as_ref()
        .ok_or_else(|| UsageError("calibrate needs a counterparties file".into()))?;
    let cps = ingest::read_counterparties(path)?;
    let universe = Universe::new(vec![], vec![], vec![], cps)?;
    let samples = calib::collect_samples(&universe);
    let rows = cfg.pool()?.install(|| calib::calibrate_all(&samples))?;

    let mut warnings = Vec::new();
    for r in rows.iter().filter(|r| r.n < SMALL_SEGMENT) {
        warnings.push(format!(
            "{}: only {} firm(s); the fit is unreliable",
            r.segment, r.n
        ));
    }
    if samples.excluded_nonpositive > 0 {
        warnings.push(format!(
            "{} counterparties with zero or negative carbon intensity left out",
            samples.excluded_nonpositive
        ));
    }
    if let Some(out) = output {
        let mut buf = Vec::new();
        calib::write_calibration(&mut buf, &rows)?;
        write_atomic(out, &buf)?;
    }
    Ok(CalibrateOutput {
        rows,
        excluded_nonpositive: samples.excluded_nonpositive,
        warnings,
    })
}

/// Result of [`cmd_assess`].
#[derive(Debug, Clone)]
pub struct AssessOutput {
    pub report: SectorReport,
    pub funds: Vec<FundResult>,
    pub files: Vec<PathBuf>,
}

/// Validates, reprices and aggregates a universe, then writes position
/// results, fund results, the resolved scenario, the effective calibration and
/// the sector report into the output directory.
pub fn cmd_assess(cfg: &RunConfig) -> Result<AssessOutput> {
    cfg.check_paths()?;
    let out_dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| UsageError("assess needs an output directory".into()))?;
    let universe = ingest::load_universe(&cfg.universe_paths()?)?;
    let validation = validate_universe(&universe);
    if !validation.accepted() {
        let lines = validation
            .fatal()
            .map(|f| format!("{:?} {}: {}", f.kind, f.subject, f.message))
            .collect();
        return Err(ValidationFailed(lines).into());
    }
    let (scenario, mut warnings) = cfg.load_scenario()?;
    warnings.extend(
        validation
            .findings
            .iter()
            .map(|f| format!("{:?} {}: {}", f.kind, f.subject, f.message)),
    );
    let base = cfg.load_calibration()?;

    let (assessment, funds) = cfg.pool()?.install(|| -> Result<_> {
        let a = risk::assess(&universe, &scenario, &base, &cfg.risk)?;
        let funds = aggregate::aggregate_funds(&universe, &a.results, &scenario)?;
        Ok((a, funds))
    })?;
    warnings.extend(assessment.warnings.iter().cloned());

    let report = report::build_report(
        &scenario,
        &assessment.results,
        &funds,
        assessment.class_averages,
        cfg.echo(),
        warnings,
        &cfg.report,
    )?;

    ensure_dir(&out_dir)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let p = out_dir.join(name);
        write_atomic(&p, &bytes)?;
        files.push(p);
        Ok(())
    };
    let mut buf = Vec::new();
    report::write_position_results(&mut buf, &assessment.results)?;
    emit(POSITIONS_FILE, buf)?;
    let mut buf = Vec::new();
    report::write_fund_results(&mut buf, &funds)?;
    emit(FUNDS_FILE, buf)?;
    let mut buf = Vec::new();
    calib::write_calibration(&mut buf, assessment.calibration.0.values())?;
    emit(CALIBRATION_FILE, buf)?;
    emit(SCENARIO_FILE, to_json(&scenario)?)?;
    emit(REPORT_FILE, to_json(&report)?)?;
    Ok(AssessOutput {
        report,
        funds,
        files,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(trisk_core::Error::from)?;
    v.push(b'\n');
    Ok(v)
}

/// Result of [`cmd_report`].
#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub report: SectorReport,
    pub text: String,
    pub files: Vec<PathBuf>,
}

/// Renders tables and histogram data from the files written by
/// [`cmd_assess`] in `results_dir`, into `out_dir`.
pub fn cmd_report(
    results_dir: &Path,
    out_dir: &Path,
    options: &ReportOptions,
) -> Result<ReportOutput> {
    if !results_dir.is_dir() {
        return Err(trisk_core::Error::Io {
            path: results_dir.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "results directory not found",
            ),
        }
        .into());
    }
    let open = |name: &str| -> Result<File> {
        let p = results_dir.join(name);
        Ok(File::open(&p).map_err(|e| trisk_core::Error::Io { path: p, source: e })?)
    };
    let results = report::read_position_results(open(POSITIONS_FILE)?, POSITIONS_FILE)?;
    let funds = report::read_fund_results(open(FUNDS_FILE)?, FUNDS_FILE)?;
    let scenario: Scenario =
        serde_json::from_reader(open(SCENARIO_FILE)?).map_err(trisk_core::Error::from)?;
    let previous: SectorReport =
        serde_json::from_reader(open(REPORT_FILE)?).map_err(trisk_core::Error::from)?;

    let report = report::build_report(
        &scenario,
        &results,
        &funds,
        previous.class_averages,
        previous.config,
        previous.warnings,
        options,
    )?;

    ensure_dir(out_dir)?;
    let mut files = Vec::new();
    let mut emit = |name: String, text: String| -> Result<()> {
        let p = out_dir.join(name);
        write_atomic(&p, text.as_bytes())?;
        files.push(p);
        Ok(())
    };
    emit(
        "instruments.csv".into(),
        report::instrument_table_csv(&report)?,
    )?;
    emit("groups.csv".into(), report::group_table_csv(&report)?)?;
    emit(
        "greenness.csv".into(),
        report::greenness_table_csv(&report)?,
    )?;
    emit(
        "distribution.csv".into(),
        report::distribution_table_csv(&report)?,
    )?;

    let selected = aggregate::select_funds(&funds, options.subset.as_deref());
    let fund_losses: Vec<f64> = selected.iter().map(|f| f.loss_fraction).collect();
    let bins = report::loss_histogram(&fund_losses, options.fund_histogram)?;
    emit("hist_funds.csv".into(), report::histogram_csv(&bins)?)?;
    let inst_spec = options
        .instrument_histogram
        .unwrap_or(report::HistogramSpec {
            lower: -100.0,
            upper: 10.0,
            width: 1.0,
        });
    for class in report.instrument_distributions.keys() {
        let losses: Vec<f64> = aggregate::unique_instruments(&results, *class)
            .iter()
            .map(|r| r.loss_fraction)
            .collect();
        let bins = report::loss_histogram(&losses, inst_spec)?;
        emit(format!("hist_{class}.csv"), report::histogram_csv(&bins)?)?;
    }
    let text = report::render_text(&report);
    emit("summary.txt".into(), text.clone())?;
    let json = String::from_utf8(to_json(&report)?).expect("JSON is UTF-8");
    let name = match &options.subset {
        Some(l) => format!("report_{}.json", sanitize(l)),
        None => "report_all.json".into(),
    };
    emit(name, json)?;
    Ok(ReportOutput {
        report,
        text,
        files,
    })
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// What [`cmd_generate`] should produce.
#[derive(Debug, Clone, PartialEq)]
pub enum GenerateKind {
    /// A full universe: positions, instruments, counterparties and funds.
    Universe(SynthConfig),
    /// Counterparties whose per-segment carbon intensities match the shipped
    /// calibration moments exactly.
    CalibrationSample { seed: u64 },
}

pub fn cmd_generate(kind: &GenerateKind, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    match kind {
        GenerateKind::Universe(cfg) => {
            let u = synth::generate_universe(cfg);
            let paths = UniversePaths {
                positions: out_dir.join("positions.csv"),
                instruments: out_dir.join("instruments.csv"),
                counterparties: out_dir.join("counterparties.csv"),
                funds: Some(out_dir.join("funds.csv")),
            };
            ingest::write_universe(&u, &paths)?;
            let mut files = vec![paths.positions, paths.instruments, paths.counterparties];
            files.extend(paths.funds);
            Ok(files)
        }
        GenerateKind::CalibrationSample { seed } => {
            let cps = synth::calibration_counterparties(&calib::default_calibration(), *seed)?;
            let p = out_dir.join("counterparties.csv");
            let mut buf = Vec::new();
            ingest::write_counterparties(&mut buf, cps.iter())?;
            write_atomic(&p, &buf)?;
            Ok(vec![p])
        }
    }
}

/// Fixed-width rendering of calibration rows.
pub fn render_calibration(rows: &[SectorCalibration]) -> String {
    let mut out = format!(
        "{:<8} {:>6} {:>10} {:>10} {:>8} {:>8} {:>7}\n",
        "segment", "n", "mean", "std", "ln_mean", "ln_std", "r2"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<8} {:>6} {:>10.1} {:>10.1} {:>8.2} {:>8.2} {:>7.4}\n",
            r.segment.label(),
            r.n,
            r.mean,
            r.std,
            r.ln_mean,
            r.ln_std,
            r.r2
        ));
    }
    out
}

/// Rejects settings that cannot be run.
pub fn check_config(cfg: &RunConfig) -> Result<()> {
    if let Some(t) = cfg.threads {
        if t == 0 {
            bail!(UsageError("threads must be at least 1".into()));
        }
    }
    Ok(())
}
