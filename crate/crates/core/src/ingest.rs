//! Delimited-text loaders for portfolio, reference and scenario data, plus the
//! rating-to-CQS map and the parent-chain backfill of counterparty metrics.
//!
//! All files are UTF-8 CSV with a header row. Columns are matched by name, so
//! extra columns are ignored and order does not matter. Decimals use a point.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AssetClass, CiSource, Counterparty, CprsCategory, Fund, Instrument, InvestmentStyle, Position,
    Scenario, SegmentCode, TecTac, TenorCurve, Universe,
};

/// Rating agency whose long-term scale a rating symbol belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Agency {
    Fitch,
    Moodys,
    SP,
}

impl std::fmt::Display for Agency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Agency::Fitch => "Fitch",
            Agency::Moodys => "Moody's",
            Agency::SP => "S&P",
        })
    }
}

impl FromStr for Agency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "fitch" => Ok(Agency::Fitch),
            "moodys" | "moody" => Ok(Agency::Moodys),
            "sp" | "snp" | "standardpoors" | "sandp" => Ok(Agency::SP),
            _ => Err(Error::Domain(format!("unknown rating agency {s:?}"))),
        }
    }
}

/// Maps a long-term rating symbol to its credit quality step.
pub fn rating_to_cqs(rating: &str, agency: Agency) -> Result<u8> {
    let r = rating.trim();
    let step = match agency {
        Agency::Fitch | Agency::SP => match r {
            "AAA" | "AA+" | "AA" | "AA-" => 1,
            "A+" | "A" | "A-" => 2,
            "BBB+" | "BBB" | "BBB-" => 3,
            "BB+" | "BB" | "BB-" => 4,
            "B+" | "B" | "B-" => 5,
            "CCC+" | "CCC" | "CCC-" | "CC" | "C" | "RD" | "SD" | "D" | "DDD" | "DD" => 6,
            _ => 0,
        },
        Agency::Moodys => match r {
            "Aaa" | "Aa1" | "Aa2" | "Aa3" => 1,
            "A1" | "A2" | "A3" => 2,
            "Baa1" | "Baa2" | "Baa3" => 3,
            "Ba1" | "Ba2" | "Ba3" => 4,
            "B1" | "B2" | "B3" => 5,
            "Caa1" | "Caa2" | "Caa3" | "Ca" | "C" => 6,
            _ => 0,
        },
    };
    if step == 0 {
        return Err(Error::UnknownRating {
            rating: r.to_string(),
            agency: agency.to_string(),
        });
    }
    Ok(step)
}

/// Parsed `rating_or_cqs` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatingField {
    pub cqs: u8,
    /// More than one rating was given and they mapped to different steps.
    pub disagreement: bool,
}

/// Parses a `rating_or_cqs` cell: empty, a bare integer step, or one or more
/// ratings separated by `;`, each optionally prefixed by `Agency:`. With several
/// ratings the worst (highest) step wins.
pub fn parse_rating_field(cell: &str) -> Result<Option<RatingField>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    if let Ok(step) = cell.parse::<u8>() {
        return Ok(Some(RatingField {
            cqs: step,
            disagreement: false,
        }));
    }
    let mut steps = Vec::new();
    for part in cell.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let step = match part.split_once(':') {
            Some((agency, rating)) => rating_to_cqs(rating, agency.parse()?)?,
            // Fitch and S&P share symbols; Moody's symbols are disjoint from both.
            None => {
                rating_to_cqs(part, Agency::SP).or_else(|_| rating_to_cqs(part, Agency::Moodys))?
            }
        };
        steps.push(step);
    }
    let worst = steps.iter().copied().max().ok_or(Error::UnknownRating {
        rating: cell.to_string(),
        agency: "any".to_string(),
    })?;
    let best = steps.iter().copied().min().unwrap_or(worst);
    Ok(Some(RatingField {
        cqs: worst,
        disagreement: best != worst,
    }))
}

const COUNTRY_ALIASES: &[(&str, &str)] = &[
    ("austria", "AT"),
    ("belgium", "BE"),
    ("bulgaria", "BG"),
    ("china", "CN"),
    ("croatia", "HR"),
    ("cyprus", "CY"),
    ("czech republic", "CZ"),
    ("czechia", "CZ"),
    ("denmark", "DK"),
    ("estonia", "EE"),
    ("finland", "FI"),
    ("france", "FR"),
    ("germany", "DE"),
    ("greece", "GR"),
    ("hungary", "HU"),
    ("iceland", "IS"),
    ("ireland", "IE"),
    ("italy", "IT"),
    ("japan", "JP"),
    ("latvia", "LV"),
    ("liechtenstein", "LI"),
    ("lithuania", "LT"),
    ("luxembourg", "LU"),
    ("malta", "MT"),
    ("netherlands", "NL"),
    ("the netherlands", "NL"),
    ("norway", "NO"),
    ("poland", "PL"),
    ("portugal", "PT"),
    ("romania", "RO"),
    ("slovakia", "SK"),
    ("slovenia", "SI"),
    ("spain", "ES"),
    ("sweden", "SE"),
    ("switzerland", "CH"),
    ("united kingdom", "GB"),
    ("great britain", "GB"),
    ("united states", "US"),
    ("united states of america", "US"),
    ("usa", "US"),
];

/// ISO 3166-1 alpha-2 code for a country code or one of the known spellings.
pub fn country_code(raw: &str) -> Option<String> {
    let t = raw.trim();
    if t.len() == 2 && t.chars().all(|c| c.is_ascii_alphabetic()) {
        let up = t.to_ascii_uppercase();
        return Some(match up.as_str() {
            "UK" => "GB".to_string(),
            "EL" => "GR".to_string(),
            _ => up,
        });
    }
    let lower = t.to_ascii_lowercase();
    COUNTRY_ALIASES
        .iter()
        .find(|(name, _)| *name == lower)
        .map(|(_, code)| code.to_string())
}

/// Ancestors consulted for backfill: parent then ultimate parent, skipping
/// self-references and unknown ids.
fn backfill_chain<'a>(
    cp: &'a Counterparty,
    all: &'a BTreeMap<String, Counterparty>,
) -> impl Iterator<Item = (CiSource, &'a Counterparty)> {
    let own = std::iter::once((CiSource::Own, cp));
    let parent = cp
        .parent_id
        .as_ref()
        .filter(|id| **id != cp.id)
        .and_then(|id| all.get(id))
        .map(|p| (CiSource::Parent, p));
    let ultimate = cp
        .ultimate_parent_id
        .as_ref()
        .filter(|id| **id != cp.id)
        .and_then(|id| all.get(id))
        .map(|p| (CiSource::UltimateParent, p));
    own.chain(parent).chain(ultimate)
}

/// First available carbon intensity along self → parent → ultimate parent.
pub fn resolve_carbon_intensity(
    cp: &Counterparty,
    all: &BTreeMap<String, Counterparty>,
) -> (Option<f64>, CiSource) {
    backfill_chain(cp, all)
        .find_map(|(src, c)| c.carbon_intensity.map(|ci| (Some(ci), src)))
        .unwrap_or((None, CiSource::Missing))
}

/// Raw NACE code along the same backfill chain as carbon intensity.
pub fn resolve_nace(cp: &Counterparty, all: &BTreeMap<String, Counterparty>) -> Option<String> {
    backfill_chain(cp, all).find_map(|(_, c)| c.nace.clone())
}

/// Country along the same backfill chain as carbon intensity.
pub fn resolve_country(cp: &Counterparty, all: &BTreeMap<String, Counterparty>) -> Option<String> {
    backfill_chain(cp, all).find_map(|(_, c)| c.country.clone())
}

// ---------------------------------------------------------------------------
// CSV plumbing

struct Table {
    file: String,
    reader: csv::Reader<Box<dyn Read>>,
    columns: BTreeMap<String, usize>,
}

struct Row<'a> {
    file: &'a str,
    line: u64,
    record: csv::StringRecord,
    columns: &'a BTreeMap<String, usize>,
}

impl Table {
    fn open(reader: Box<dyn Read>, file: &str, required: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(reader);
        let headers = reader
            .headers()
            .map_err(|e| Error::schema(file, format!("cannot read header: {e}")))?
            .clone();
        let columns: BTreeMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_ascii_lowercase(), i))
            .collect();
        for col in required {
            if !columns.contains_key(*col) {
                return Err(Error::schema(file, format!("missing column {col:?}")));
            }
        }
        Ok(Table {
            file: file.to_string(),
            reader,
            columns,
        })
    }

    fn for_each(mut self, mut f: impl FnMut(&Row<'_>) -> Result<()>) -> Result<()> {
        for rec in self.reader.records() {
            let record = rec.map_err(|e| Error::schema(&self.file, e.to_string()))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.iter().all(str::is_empty) {
                continue;
            }
            f(&Row {
                file: &self.file,
                line,
                record,
                columns: &self.columns,
            })?;
        }
        Ok(())
    }
}

impl Row<'_> {
    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::schema(self.file, format!("line {}: {msg}", self.line))
    }

    fn get(&self, col: &str) -> &str {
        self.columns
            .get(col)
            .and_then(|&i| self.record.get(i))
            .unwrap_or("")
    }

    fn opt_str(&self, col: &str) -> Option<String> {
        let v = self.get(col);
        (!v.is_empty()).then(|| v.to_string())
    }

    fn req_str(&self, col: &str) -> Result<String> {
        self.opt_str(col)
            .ok_or_else(|| self.err(format!("empty {col}")))
    }

    fn opt_f64(&self, col: &str) -> Result<Option<f64>> {
        let v = self.get(col);
        if v.is_empty() {
            return Ok(None);
        }
        parse_number(v)
            .map(Some)
            .ok_or_else(|| self.err(format!("{col}: {v:?} is not a number")))
    }

    fn req_f64(&self, col: &str) -> Result<f64> {
        self.opt_f64(col)?
            .ok_or_else(|| self.err(format!("empty {col}")))
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim().trim_end_matches('%').trim();
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn open_path(path: &Path) -> Result<Box<dyn Read>> {
    File::open(path)
        .map(|f| Box::new(f) as Box<dyn Read>)
        .map_err(|e| Error::io(path, e))
}

fn file_label(path: &Path) -> String {
    path.display().to_string()
}

// ---------------------------------------------------------------------------
// Readers

pub fn parse_positions(reader: impl Read + 'static, file: &str) -> Result<Vec<Position>> {
    let table = Table::open(
        Box::new(reader),
        file,
        &["fund_id", "isin", "asset_class", "market_value"],
    )?;
    let mut out = Vec::new();
    table.for_each(|row| {
        let asset_class = AssetClass::from_str(row.get("asset_class")).map_err(|e| row.err(e))?;
        let isin = match asset_class {
            AssetClass::Cash | AssetClass::Unclassified => row.opt_str("isin").unwrap_or_default(),
            _ => row.req_str("isin")?,
        };
        out.push(Position {
            fund_id: row.req_str("fund_id")?,
            isin,
            asset_class,
            market_value: row.req_f64("market_value")?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_instruments(reader: impl Read + 'static, file: &str) -> Result<Vec<Instrument>> {
    let table = Table::open(Box::new(reader), file, &["isin", "counterparty_id"])?;
    let mut out = Vec::new();
    table.for_each(|row| {
        let rating = parse_rating_field(row.get("rating_or_cqs")).map_err(|e| row.err(e))?;
        let fund_style = row
            .opt_str("fund_style")
            .map(|s| InvestmentStyle::from_str(&s))
            .transpose()
            .map_err(|e| row.err(e))?;
        let country = match row.opt_str("country") {
            Some(c) => {
                Some(country_code(&c).ok_or_else(|| row.err(format!("unknown country {c:?}")))?)
            }
            None => None,
        };
        let flagged = matches!(row.get("worst_of_ratings"), "true" | "1");
        out.push(Instrument {
            isin: row.req_str("isin")?,
            counterparty_id: row.req_str("counterparty_id")?,
            cqs: rating.map(|r| r.cqs),
            maturity_years: row.opt_f64("maturity_years")?,
            coupon: row.opt_f64("coupon")?,
            volatility: row.opt_f64("volatility_pct")?,
            fund_style,
            country,
            rating_disagreement: rating.is_some_and(|r| r.disagreement) || flagged,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_counterparties(reader: impl Read + 'static, file: &str) -> Result<Vec<Counterparty>> {
    let table = Table::open(Box::new(reader), file, &["id", "carbon_intensity"])?;
    let mut out = Vec::new();
    table.for_each(|row| {
        let class = row.opt_str("nace_code_or_country");
        let (nace, country) = match class {
            Some(c) => match country_code(&c) {
                Some(code) => (None, Some(code)),
                None => (Some(c), None),
            },
            None => (None, None),
        };
        out.push(Counterparty {
            id: row.req_str("id")?,
            name: row.opt_str("name").unwrap_or_default(),
            carbon_intensity: row.opt_f64("carbon_intensity")?,
            nace,
            country,
            parent_id: row.opt_str("parent_id"),
            ultimate_parent_id: row.opt_str("ultimate_parent_id"),
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_funds(reader: impl Read + 'static, file: &str) -> Result<Vec<Fund>> {
    let table = Table::open(Box::new(reader), file, &["fund_id"])?;
    let mut out = Vec::new();
    table.for_each(|row| {
        let labels = row
            .get("labels")
            .split(';')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        out.push(Fund {
            id: row.req_str("fund_id")?,
            aum: row.opt_f64("aum")?,
            labels,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Sector shocks as read, before assembly into a [`Scenario`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SectorShocks {
    pub equity: BTreeMap<SegmentCode, f64>,
    pub spread_bp: BTreeMap<SegmentCode, f64>,
}

pub fn parse_sector_shocks(
    reader: impl Read + 'static,
    file: &str,
    warnings: &mut Vec<String>,
) -> Result<SectorShocks> {
    let table = Table::open(
        Box::new(reader),
        file,
        &["nace_bucket", "equity_pct", "spread_bp"],
    )?;
    let mut out = SectorShocks::default();
    table.for_each(|row| {
        let raw = row.req_str("nace_bucket")?;
        let bucket = SegmentCode::resolve(&raw);
        if !bucket.is_nace_bucket() {
            return Err(row.err(format!("{raw:?} is not a NACE bucket")));
        }
        let equity = row.req_f64("equity_pct")? / 100.0;
        let spread = row.req_f64("spread_bp")?;
        if equity > 0.0 {
            warnings.push(format!(
                "{file}: positive equity shock {equity} for {bucket}"
            ));
        }
        if out.equity.insert(bucket, equity).is_some() {
            return Err(Error::Domain(format!(
                "{file}: duplicate bucket {bucket} ({raw})"
            )));
        }
        out.spread_bp.insert(bucket, spread);
        Ok(())
    })?;
    Ok(out)
}

pub const TENOR_COLUMNS: [&str; 10] = [
    "y1", "y2", "y3", "y4", "y5", "y6", "y7", "y8", "y9", "y10plus",
];

pub fn parse_sovereign_shocks(
    reader: impl Read + 'static,
    file: &str,
) -> Result<BTreeMap<String, TenorCurve>> {
    let mut required = vec!["country"];
    required.extend(TENOR_COLUMNS);
    let table = Table::open(Box::new(reader), file, &required)?;
    let mut out = BTreeMap::new();
    table.for_each(|row| {
        let name = row.req_str("country")?;
        let code =
            country_code(&name).ok_or_else(|| row.err(format!("unknown country {name:?}")))?;
        let mut curve = [0.0; 10];
        for (slot, col) in curve.iter_mut().zip(TENOR_COLUMNS) {
            *slot = row.req_f64(col)?;
        }
        if out.insert(code.clone(), TenorCurve(curve)).is_some() {
            return Err(Error::Domain(format!("{file}: duplicate country {code}")));
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_cprs_map(
    reader: impl Read + 'static,
    file: &str,
) -> Result<BTreeMap<SegmentCode, CprsCategory>> {
    let table = Table::open(Box::new(reader), file, &["nace_bucket", "category"])?;
    let mut out = BTreeMap::new();
    table.for_each(|row| {
        let bucket = SegmentCode::resolve(&row.req_str("nace_bucket")?);
        let cat = CprsCategory::from_str(&row.req_str("category")?).map_err(|e| row.err(e))?;
        out.insert(bucket, cat);
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_tec_tac(reader: impl Read + 'static, file: &str) -> Result<BTreeMap<String, TecTac>> {
    let table = Table::open(Box::new(reader), file, &["nace", "tec", "tac"])?;
    let mut out = BTreeMap::new();
    table.for_each(|row| {
        let raw = row.req_str("nace")?;
        let key = crate::model::normalize_nace(&raw)
            .ok_or_else(|| row.err(format!("{raw:?} is not a NACE code")))?;
        let tec = row.req_f64("tec")?;
        let tac = row.req_f64("tac")?;
        if !(0.0..=1.0).contains(&tec) || !(0.0..=1.0).contains(&tac) {
            return Err(row.err("tec and tac must lie in [0, 1]"));
        }
        out.insert(key, TecTac { tec, tac });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_positions(path: &Path) -> Result<Vec<Position>> {
    parse_positions(open_path(path)?, &file_label(path))
}

pub fn read_instruments(path: &Path) -> Result<Vec<Instrument>> {
    parse_instruments(open_path(path)?, &file_label(path))
}

pub fn read_counterparties(path: &Path) -> Result<Vec<Counterparty>> {
    parse_counterparties(open_path(path)?, &file_label(path))
}

pub fn read_funds(path: &Path) -> Result<Vec<Fund>> {
    parse_funds(open_path(path)?, &file_label(path))
}

pub fn read_cprs_map(path: &Path) -> Result<BTreeMap<SegmentCode, CprsCategory>> {
    parse_cprs_map(open_path(path)?, &file_label(path))
}

pub fn read_tec_tac(path: &Path) -> Result<BTreeMap<String, TecTac>> {
    parse_tec_tac(open_path(path)?, &file_label(path))
}

/// A loaded scenario together with non-fatal warnings raised while reading it.
#[derive(Debug, Clone)]
pub struct ScenarioLoad {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
}

fn assemble_scenario(
    name: String,
    shocks: SectorShocks,
    curves: BTreeMap<String, TenorCurve>,
    mut warnings: Vec<String>,
) -> Result<ScenarioLoad> {
    let missing: Vec<_> = SegmentCode::NACE_BUCKETS
        .iter()
        .filter(|b| !shocks.equity.contains_key(b))
        .map(|b| b.label())
        .collect();
    if !missing.is_empty() {
        warnings.push(format!(
            "buckets fall back to Other: {}",
            missing.join(", ")
        ));
    }
    if curves.is_empty() {
        warnings.push("no sovereign curves: every sovereign uses the unlisted-country path".into());
    }
    let scenario = Scenario {
        name,
        equity_shock: shocks.equity,
        spread_shock: shocks.spread_bp,
        sovereign_curves: curves,
        cprs_map: None,
        tec_tac_table: None,
    };
    scenario.check()?;
    Ok(ScenarioLoad { scenario, warnings })
}

/// Reads the sector and sovereign shock files into a scenario.
pub fn load_scenario(sector_file: &Path, sovereign_file: &Path) -> Result<ScenarioLoad> {
    let mut warnings = Vec::new();
    let shocks = parse_sector_shocks(
        open_path(sector_file)?,
        &file_label(sector_file),
        &mut warnings,
    )?;
    let curves = parse_sovereign_shocks(open_path(sovereign_file)?, &file_label(sovereign_file))?;
    let name = sector_file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    assemble_scenario(name, shocks, curves, warnings)
}

/// Reads a JSON scenario bundle (the serialized [`Scenario`]).
pub fn load_scenario_bundle(path: &Path) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_reader(open_path(path)?)?;
    scenario.check()?;
    Ok(scenario)
}

/// Shipped reference data.
pub mod builtin {
    use super::*;

    pub const SECTOR_SHOCKS_CSV: &str = include_str!("../data/scenario_sector_shocks.csv");
    pub const SOVEREIGN_SHOCKS_CSV: &str = include_str!("../data/scenario_sovereign_shocks.csv");
    pub const CPRS_MAP_CSV: &str = include_str!("../data/cprs_map.csv");
    pub const TEC_TAC_SAMPLE_CSV: &str = include_str!("../data/tec_tac_sample.csv");

    /// The delayed-transition shock set, with the default CPRS map and the sample
    /// TEC/TAC table attached.
    pub fn delayed_transition() -> Scenario {
        let mut warnings = Vec::new();
        let shocks = parse_sector_shocks(
            SECTOR_SHOCKS_CSV.as_bytes(),
            "builtin sector shocks",
            &mut warnings,
        )
        .expect("builtin sector shocks parse");
        let curves =
            parse_sovereign_shocks(SOVEREIGN_SHOCKS_CSV.as_bytes(), "builtin sovereign shocks")
                .expect("builtin sovereign shocks parse");
        let mut scenario = assemble_scenario("delayed_transition".into(), shocks, curves, warnings)
            .expect("builtin scenario is consistent")
            .scenario;
        scenario.cprs_map = Some(cprs_map());
        scenario.tec_tac_table = Some(tec_tac_sample());
        scenario
    }

    pub fn cprs_map() -> BTreeMap<SegmentCode, CprsCategory> {
        parse_cprs_map(CPRS_MAP_CSV.as_bytes(), "builtin CPRS map")
            .expect("builtin CPRS map parses")
    }

    pub fn tec_tac_sample() -> BTreeMap<String, TecTac> {
        parse_tec_tac(TEC_TAC_SAMPLE_CSV.as_bytes(), "builtin TEC/TAC")
            .expect("builtin TEC/TAC table parses")
    }
}

/// Paths to the input files of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UniversePaths {
    pub positions: PathBuf,
    pub instruments: PathBuf,
    pub counterparties: PathBuf,
    #[serde(default)]
    pub funds: Option<PathBuf>,
}

pub fn load_universe(paths: &UniversePaths) -> Result<Universe> {
    let funds = match &paths.funds {
        Some(p) => read_funds(p)?,
        None => Vec::new(),
    };
    Universe::new(
        funds,
        read_positions(&paths.positions)?,
        read_instruments(&paths.instruments)?,
        read_counterparties(&paths.counterparties)?,
    )
}

// ---------------------------------------------------------------------------
// Writers

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_positions<W: Write>(w: W, positions: &[Position]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["fund_id", "isin", "asset_class", "market_value"])?;
    for p in positions {
        out.write_record([
            p.fund_id.as_str(),
            p.isin.as_str(),
            p.asset_class.as_str(),
            &p.market_value.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("positions", e))?;
    Ok(())
}

pub fn write_instruments<'a, W: Write>(
    w: W,
    instruments: impl IntoIterator<Item = &'a Instrument>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "isin",
        "counterparty_id",
        "rating_or_cqs",
        "maturity_years",
        "coupon",
        "volatility_pct",
        "fund_style",
        "country",
        "worst_of_ratings",
    ])?;
    for i in instruments {
        out.write_record([
            i.isin.clone(),
            i.counterparty_id.clone(),
            i.cqs.map(|c| c.to_string()).unwrap_or_default(),
            fmt_opt(i.maturity_years),
            fmt_opt(i.coupon),
            fmt_opt(i.volatility),
            i.fund_style
                .map(|s| s.as_str().to_string())
                .unwrap_or_default(),
            i.country.clone().unwrap_or_default(),
            if i.rating_disagreement {
                "true".into()
            } else {
                String::new()
            },
        ])?;
    }
    out.flush().map_err(|e| Error::io("instruments", e))?;
    Ok(())
}

pub fn write_counterparties<'a, W: Write>(
    w: W,
    counterparties: impl IntoIterator<Item = &'a Counterparty>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "id",
        "name",
        "carbon_intensity",
        "nace_code_or_country",
        "parent_id",
        "ultimate_parent_id",
    ])?;
    for c in counterparties {
        out.write_record([
            c.id.clone(),
            c.name.clone(),
            fmt_opt(c.carbon_intensity),
            c.nace
                .clone()
                .or_else(|| c.country.clone())
                .unwrap_or_default(),
            c.parent_id.clone().unwrap_or_default(),
            c.ultimate_parent_id.clone().unwrap_or_default(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("counterparties", e))?;
    Ok(())
}

pub fn write_funds<W: Write>(w: W, funds: &[Fund]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["fund_id", "aum", "labels"])?;
    for f in funds {
        out.write_record([f.id.clone(), fmt_opt(f.aum), f.labels.join(";")])?;
    }
    out.flush().map_err(|e| Error::io("funds", e))?;
    Ok(())
}

pub fn write_sector_shocks<W: Write>(w: W, scenario: &Scenario) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["nace_bucket", "equity_pct", "spread_bp"])?;
    for (seg, eq) in &scenario.equity_shock {
        out.write_record([
            seg.label().to_string(),
            (eq * 100.0).to_string(),
            scenario.spread_shock_for(*seg).to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("sector shocks", e))?;
    Ok(())
}

pub fn write_sovereign_shocks<W: Write>(w: W, scenario: &Scenario) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["country"];
    header.extend(TENOR_COLUMNS);
    out.write_record(&header)?;
    for (country, curve) in &scenario.sovereign_curves {
        let mut rec = vec![country.clone()];
        rec.extend(curve.0.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("sovereign shocks", e))?;
    Ok(())
}

/// Writes the universe as the four CSV files named in `paths`.
pub fn write_universe(universe: &Universe, paths: &UniversePaths) -> Result<()> {
    let create = |p: &Path| File::create(p).map_err(|e| Error::io(p, e));
    write_positions(create(&paths.positions)?, &universe.positions)?;
    write_instruments(create(&paths.instruments)?, universe.instruments.values())?;
    write_counterparties(
        create(&paths.counterparties)?,
        universe.counterparties.values(),
    )?;
    if let Some(f) = &paths.funds {
        write_funds(create(f)?, &universe.funds)?;
    }
    Ok(())
}
