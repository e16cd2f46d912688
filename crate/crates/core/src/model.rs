//! Domain types shared by ingestion, calibration, repricing and aggregation.
//!
//! Everything here is plain data: immutable after construction and `Send + Sync`,
//! so a loaded [`Universe`] can be shared across worker threads without locking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asset class of a single fund position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetClass {
    Equity,
    CorporateBond,
    SovereignBond,
    FundVehicle,
    Cash,
    Unclassified,
}

impl AssetClass {
    pub const ALL: [AssetClass; 6] = [
        AssetClass::Equity,
        AssetClass::CorporateBond,
        AssetClass::SovereignBond,
        AssetClass::FundVehicle,
        AssetClass::Cash,
        AssetClass::Unclassified,
    ];

    /// The three classes whose averages feed fund-vehicle look-through.
    pub const LOOK_THROUGH: [AssetClass; 3] = [
        AssetClass::Equity,
        AssetClass::CorporateBond,
        AssetClass::SovereignBond,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AssetClass::Equity => "equity",
            AssetClass::CorporateBond => "corporate_bond",
            AssetClass::SovereignBond => "sovereign_bond",
            AssetClass::FundVehicle => "fund_vehicle",
            AssetClass::Cash => "cash",
            AssetClass::Unclassified => "unclassified",
        }
    }

    /// Classes that can never lose value under the scenario.
    pub fn is_riskless(self) -> bool {
        matches!(self, AssetClass::Cash | AssetClass::Unclassified)
    }
}

impl fmt::Display for AssetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssetClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        Ok(match key.as_str() {
            "equity" | "equities" | "eq" => AssetClass::Equity,
            "corporate_bond" | "corporate_bonds" | "corporate" | "cb" => AssetClass::CorporateBond,
            "sovereign_bond" | "sovereign_bonds" | "sovereign" | "sovereign_debt" | "gb" => {
                AssetClass::SovereignBond
            }
            "fund_vehicle" | "fund_vehicles" | "fund" | "other_funds" | "if" => {
                AssetClass::FundVehicle
            }
            "cash" | "cash_equivalent" | "cash_and_cash_equivalents" => AssetClass::Cash,
            "unclassified" | "not_classified" | "" => AssetClass::Unclassified,
            _ => return Err(Error::Domain(format!("unknown asset class {s:?}"))),
        })
    }
}

/// Economic segment used to look up scenario shocks and calibrations: the 23
/// NACE buckets of the sector shock table plus the sovereign and fund pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SegmentCode {
    A01,
    A02A03,
    B05B09,
    C10C12,
    C13C18,
    C19,
    C20,
    C21C22,
    C23,
    C24C25,
    C26C28,
    C29C30,
    C31C33,
    D35,
    E36E39,
    F41F43,
    G45G47,
    H49,
    H50,
    H51,
    H52H53,
    L68,
    Other,
    Sov,
    Fund,
}

impl SegmentCode {
    /// The 23 NACE buckets, `Other` last.
    pub const NACE_BUCKETS: [SegmentCode; 23] = [
        SegmentCode::A01,
        SegmentCode::A02A03,
        SegmentCode::B05B09,
        SegmentCode::C10C12,
        SegmentCode::C13C18,
        SegmentCode::C19,
        SegmentCode::C20,
        SegmentCode::C21C22,
        SegmentCode::C23,
        SegmentCode::C24C25,
        SegmentCode::C26C28,
        SegmentCode::C29C30,
        SegmentCode::C31C33,
        SegmentCode::D35,
        SegmentCode::E36E39,
        SegmentCode::F41F43,
        SegmentCode::G45G47,
        SegmentCode::H49,
        SegmentCode::H50,
        SegmentCode::H51,
        SegmentCode::H52H53,
        SegmentCode::L68,
        SegmentCode::Other,
    ];

    pub const ALL: [SegmentCode; 25] = {
        let mut all = [SegmentCode::Other; 25];
        let mut i = 0;
        while i < 23 {
            all[i] = Self::NACE_BUCKETS[i];
            i += 1;
        }
        all[23] = SegmentCode::Sov;
        all[24] = SegmentCode::Fund;
        all
    };

    pub fn label(self) -> &'static str {
        match self {
            SegmentCode::A01 => "A01",
            SegmentCode::A02A03 => "A02-A03",
            SegmentCode::B05B09 => "B05-B09",
            SegmentCode::C10C12 => "C10-C12",
            SegmentCode::C13C18 => "C13-C18",
            SegmentCode::C19 => "C19",
            SegmentCode::C20 => "C20",
            SegmentCode::C21C22 => "C21-C22",
            SegmentCode::C23 => "C23",
            SegmentCode::C24C25 => "C24-C25",
            SegmentCode::C26C28 => "C26-C28",
            SegmentCode::C29C30 => "C29-C30",
            SegmentCode::C31C33 => "C31-C33",
            SegmentCode::D35 => "D35",
            SegmentCode::E36E39 => "E36-E39",
            SegmentCode::F41F43 => "F41-F43",
            SegmentCode::G45G47 => "G45-G47",
            SegmentCode::H49 => "H49",
            SegmentCode::H50 => "H50",
            SegmentCode::H51 => "H51",
            SegmentCode::H52H53 => "H52-H53",
            SegmentCode::L68 => "L68",
            SegmentCode::Other => "Other",
            SegmentCode::Sov => "SOV",
            SegmentCode::Fund => "FUND",
        }
    }

    pub fn is_nace_bucket(self) -> bool {
        !matches!(self, SegmentCode::Sov | SegmentCode::Fund)
    }

    /// Bucket for a two-digit NACE division.
    pub fn from_division(division: u8) -> SegmentCode {
        match division {
            1 => SegmentCode::A01,
            2 | 3 => SegmentCode::A02A03,
            5..=9 => SegmentCode::B05B09,
            10..=12 => SegmentCode::C10C12,
            13..=18 => SegmentCode::C13C18,
            19 => SegmentCode::C19,
            20 => SegmentCode::C20,
            21 | 22 => SegmentCode::C21C22,
            23 => SegmentCode::C23,
            24 | 25 => SegmentCode::C24C25,
            26..=28 => SegmentCode::C26C28,
            29 | 30 => SegmentCode::C29C30,
            31..=33 => SegmentCode::C31C33,
            35 => SegmentCode::D35,
            36..=39 => SegmentCode::E36E39,
            41..=43 => SegmentCode::F41F43,
            45..=47 => SegmentCode::G45G47,
            49 => SegmentCode::H49,
            50 => SegmentCode::H50,
            51 => SegmentCode::H51,
            52 | 53 => SegmentCode::H52H53,
            68 => SegmentCode::L68,
            _ => SegmentCode::Other,
        }
    }

    /// Resolves a raw NACE string (`"C20"`, `"35.11"`, `"D35.1.1"`, `"B05-09"`,
    /// a bucket label, `"SOV"`, `"FUND"`) to its bucket. Anything that cannot be
    /// pinned to a single bucket lands in `Other`.
    pub fn resolve(raw: &str) -> SegmentCode {
        let key = raw.trim().to_ascii_uppercase();
        match key.as_str() {
            "SOV" | "SOVEREIGN" | "SOVEREIGN DEBT" => return SegmentCode::Sov,
            "FUND" | "FUNDS" | "OTHER FUND VEHICLES" | "OTHER FUNDS" => return SegmentCode::Fund,
            "OTHER" | "OTHER NACE" | "" => return SegmentCode::Other,
            _ => {}
        }
        match nace_division(&key) {
            Some(division) => SegmentCode::from_division(division),
            // Sections that map onto exactly one bucket.
            None => match key.as_str() {
                "B" => SegmentCode::B05B09,
                "D" => SegmentCode::D35,
                "E" => SegmentCode::E36E39,
                "F" => SegmentCode::F41F43,
                "G" => SegmentCode::G45G47,
                "L" => SegmentCode::L68,
                _ => SegmentCode::Other,
            },
        }
    }
}

impl fmt::Display for SegmentCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl From<SegmentCode> for String {
    fn from(s: SegmentCode) -> String {
        s.label().to_string()
    }
}

impl TryFrom<String> for SegmentCode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Ok(SegmentCode::resolve(&s))
    }
}

/// Two-digit NACE division of a raw code, skipping any leading section letters.
pub fn nace_division(raw: &str) -> Option<u8> {
    let digits = nace_digits(raw)?;
    if digits.len() < 2 {
        return None;
    }
    digits[..2].parse().ok()
}

/// Normalises a raw NACE code to dotted form: `"D3511"` and `"35.11"` both become
/// `"35.11"`, `"C20"` becomes `"20"`. `None` when the code has no division.
pub fn normalize_nace(raw: &str) -> Option<String> {
    let digits = nace_digits(raw)?;
    if digits.len() < 2 {
        return None;
    }
    let digits = &digits[..digits.len().min(4)];
    Some(if digits.len() > 2 {
        format!("{}.{}", &digits[..2], &digits[2..])
    } else {
        digits.to_string()
    })
}

fn nace_digits(raw: &str) -> Option<String> {
    let rest = raw
        .trim()
        .trim_start_matches(|c: char| c.is_ascii_alphabetic());
    // Bucket ranges like "B05-09" carry the first division before the dash.
    let head = rest.split(['-', ',', ' ']).next().unwrap_or("");
    let digits: String = head.chars().filter(|c| *c != '.').collect();
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    Some(digits)
}

/// Investment style of a fund vehicle held without look-through data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvestmentStyle {
    Equities,
    MixedEquities,
    MixedBonds,
    Bonds,
    GovernmentDebt,
    Others,
}

/// Representative allocation of a fund vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleWeights {
    pub equity: f64,
    pub corporate: f64,
    pub sovereign: f64,
    pub cash: f64,
}

impl InvestmentStyle {
    pub const ALL: [InvestmentStyle; 6] = [
        InvestmentStyle::Equities,
        InvestmentStyle::MixedEquities,
        InvestmentStyle::MixedBonds,
        InvestmentStyle::Bonds,
        InvestmentStyle::GovernmentDebt,
        InvestmentStyle::Others,
    ];

    /// Allocation in whole percent: (equity, corporate, sovereign, cash).
    pub fn weight_percents(self) -> [u8; 4] {
        match self {
            InvestmentStyle::Equities => [85, 5, 5, 5],
            InvestmentStyle::MixedEquities => [65, 15, 15, 5],
            InvestmentStyle::MixedBonds => [25, 35, 35, 5],
            InvestmentStyle::Bonds => [0, 75, 20, 5],
            InvestmentStyle::GovernmentDebt => [0, 20, 75, 5],
            InvestmentStyle::Others => [25, 35, 35, 5],
        }
    }

    pub fn weights(self) -> StyleWeights {
        let [e, c, s, k] = self.weight_percents().map(|p| f64::from(p) / 100.0);
        StyleWeights {
            equity: e,
            corporate: c,
            sovereign: s,
            cash: k,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InvestmentStyle::Equities => "equities",
            InvestmentStyle::MixedEquities => "mixed_equities",
            InvestmentStyle::MixedBonds => "mixed_bonds",
            InvestmentStyle::Bonds => "bonds",
            InvestmentStyle::GovernmentDebt => "government_debt",
            InvestmentStyle::Others => "others",
        }
    }
}

impl fmt::Display for InvestmentStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InvestmentStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        Ok(match key.as_str() {
            "equities" | "equity" => InvestmentStyle::Equities,
            "mixed_equities" | "mixed_equity" => InvestmentStyle::MixedEquities,
            "mixed_bonds" | "mixed_bond" => InvestmentStyle::MixedBonds,
            "bonds" | "bond" => InvestmentStyle::Bonds,
            "government_debt" | "government" | "sovereign" => InvestmentStyle::GovernmentDebt,
            "others" | "other" => InvestmentStyle::Others,
            _ => return Err(Error::Domain(format!("unknown investment style {s:?}"))),
        })
    }
}

/// Issuer or obligor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterparty {
    pub id: String,
    pub name: String,
    /// tCO2e per million USD revenue (sovereigns on the mapped corporate scale).
    pub carbon_intensity: Option<f64>,
    /// Raw NACE code, or a pool code (`SOV`, `FUND`).
    pub nace: Option<String>,
    /// ISO 3166-1 alpha-2 country, for sovereign issuers.
    pub country: Option<String>,
    pub parent_id: Option<String>,
    pub ultimate_parent_id: Option<String>,
}

impl Counterparty {
    pub fn segment(&self) -> Option<SegmentCode> {
        match (&self.nace, &self.country) {
            (Some(code), _) => Some(SegmentCode::resolve(code)),
            (None, Some(_)) => Some(SegmentCode::Sov),
            (None, None) => None,
        }
    }
}

/// Per-ISIN financial metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instrument {
    pub isin: String,
    pub counterparty_id: String,
    /// Credit quality step, 1 (best) to 6.
    pub cqs: Option<u8>,
    pub maturity_years: Option<f64>,
    /// Annual coupon as a decimal.
    pub coupon: Option<f64>,
    /// Annualised volatility in percent (29.9 = 29.9%).
    pub volatility: Option<f64>,
    pub fund_style: Option<InvestmentStyle>,
    pub country: Option<String>,
    /// Set when several agency ratings disagreed and the worst step was kept.
    #[serde(default)]
    pub rating_disagreement: bool,
}

impl Instrument {
    pub fn new(isin: impl Into<String>, counterparty_id: impl Into<String>) -> Self {
        Instrument {
            isin: isin.into(),
            counterparty_id: counterparty_id.into(),
            cqs: None,
            maturity_years: None,
            coupon: None,
            volatility: None,
            fund_style: None,
            country: None,
            rating_disagreement: false,
        }
    }
}

/// One ISIN-level holding of a fund, valued in EUR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub fund_id: String,
    pub isin: String,
    pub asset_class: AssetClass,
    pub market_value: f64,
}

/// Fund record. Sub-funds are separate records.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Fund {
    pub id: String,
    /// Declared AuM; when absent the sum of position values is used.
    pub aum: Option<f64>,
    #[serde(default)]
    pub labels: Vec<String>,
}

impl Fund {
    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l.eq_ignore_ascii_case(label))
    }
}

/// Climate Policy Relevant Sector category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CprsCategory {
    FossilFuel,
    Utility,
    EnergyIntensive,
    Buildings,
    Agriculture,
}

impl FromStr for CprsCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Ok(match key.as_str() {
            "fossil_fuel" | "fossil_fuels" | "fossil" => CprsCategory::FossilFuel,
            "utility" | "utilities" => CprsCategory::Utility,
            "energy_intensive" | "energy_intensity" => CprsCategory::EnergyIntensive,
            "buildings" | "building" | "housing" => CprsCategory::Buildings,
            "agriculture" => CprsCategory::Agriculture,
            _ => return Err(Error::Domain(format!("unknown CPRS category {s:?}"))),
        })
    }
}

/// Transition-risk exposure and taxonomy alignment coefficients of a NACE class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TecTac {
    pub tec: f64,
    pub tac: f64,
}

/// Sovereign yield shocks in basis points for tenors 1..=9 years and 10+.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TenorCurve(pub [f64; 10]);

/// Transition scenario: sector equity and spread shocks plus sovereign yield curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Equity price change as a fraction (negative = loss).
    pub equity_shock: BTreeMap<SegmentCode, f64>,
    /// Credit spread change in basis points.
    pub spread_shock: BTreeMap<SegmentCode, f64>,
    /// Keyed by ISO alpha-2 country code.
    pub sovereign_curves: BTreeMap<String, TenorCurve>,
    #[serde(default)]
    pub cprs_map: Option<BTreeMap<SegmentCode, CprsCategory>>,
    /// Keyed by dotted NACE class (`"35.11"`), group (`"35.1"`) or division (`"35"`).
    #[serde(default)]
    pub tec_tac_table: Option<BTreeMap<String, TecTac>>,
}

impl Scenario {
    /// Checks the structural invariants: an `Other` fallback for both shock maps
    /// and finite values everywhere.
    pub fn check(&self) -> Result<()> {
        for (what, map) in [
            ("equity", &self.equity_shock),
            ("spread", &self.spread_shock),
        ] {
            if !map.contains_key(&SegmentCode::Other) {
                return Err(Error::Domain(format!("{what} shocks lack an Other bucket")));
            }
            if let Some((k, v)) = map.iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::Domain(format!("{what} shock for {k} is {v}")));
            }
        }
        for (country, curve) in &self.sovereign_curves {
            if curve.0.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "non-finite yield shock for {country}"
                )));
            }
        }
        Ok(())
    }

    /// Equity shock of a segment, falling back to `Other`.
    pub fn equity_shock_for(&self, segment: SegmentCode) -> f64 {
        self.equity_shock
            .get(&segment)
            .or_else(|| self.equity_shock.get(&SegmentCode::Other))
            .copied()
            .unwrap_or(0.0)
    }

    /// Spread shock of a segment in basis points, falling back to `Other`.
    pub fn spread_shock_for(&self, segment: SegmentCode) -> f64 {
        self.spread_shock
            .get(&segment)
            .or_else(|| self.spread_shock.get(&SegmentCode::Other))
            .copied()
            .unwrap_or(0.0)
    }

    /// Cross-country average curve used for countries the scenario does not list.
    /// All zeros when no country is listed.
    pub fn average_curve(&self) -> TenorCurve {
        let mut avg = [0.0; 10];
        let n = self.sovereign_curves.len();
        if n == 0 {
            return TenorCurve(avg);
        }
        for curve in self.sovereign_curves.values() {
            for (a, v) in avg.iter_mut().zip(curve.0.iter()) {
                *a += v;
            }
        }
        TenorCurve(avg.map(|a| a / n as f64))
    }

    /// Same scenario with every shock set to zero.
    pub fn zeroed(&self) -> Scenario {
        let mut s = self.clone();
        s.name = format!("{} (zero shock)", self.name);
        s.equity_shock.values_mut().for_each(|v| *v = 0.0);
        s.spread_shock.values_mut().for_each(|v| *v = 0.0);
        s.sovereign_curves
            .values_mut()
            .for_each(|c| c.0 = [0.0; 10]);
        s
    }
}

/// Lognormal carbon-intensity calibration of one segment, with the volatility,
/// CQS and spread-duration means used as multiplier denominators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorCalibration {
    pub segment: SegmentCode,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ln_mean: f64,
    pub ln_std: f64,
    pub r2: f64,
    pub mean_volatility: Option<f64>,
    pub mean_cqs: Option<f64>,
    pub mean_duration: Option<f64>,
}

impl SectorCalibration {
    /// Largest relative error between the stored (mean, std) and the moments
    /// implied by (ln_mean, ln_std).
    pub fn moment_mismatch(&self) -> f64 {
        let var_factor = (self.ln_std * self.ln_std).exp();
        let mean = (self.ln_mean + 0.5 * self.ln_std * self.ln_std).exp();
        let std = ((var_factor - 1.0) * mean * mean).sqrt();
        let rel = |a: f64, b: f64| {
            if b == 0.0 {
                a.abs()
            } else {
                ((a - b) / b).abs()
            }
        };
        rel(mean, self.mean).max(if self.std == 0.0 {
            std / self.mean
        } else {
            rel(std, self.std)
        })
    }
}

/// Where a counterparty's carbon intensity came from. Ordered by severity.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum CiSource {
    Own,
    Parent,
    UltimateParent,
    #[default]
    Missing,
}

/// Multipliers applied to the sector shock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub ci: f64,
    pub vol: Option<f64>,
    pub cqs: Option<f64>,
}

impl Default for Multipliers {
    fn default() -> Self {
        Multipliers {
            ci: 1.0,
            vol: None,
            cqs: None,
        }
    }
}

/// Per-position data-quality flags.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ci_source: CiSource,
    /// Neutral CI multiplier of 1 substituted.
    pub ci_backfilled: bool,
    pub vol_backfilled: bool,
    pub cqs_backfilled: bool,
    /// Duration/convexity taken from the segment mean (no maturity).
    pub duration_backfilled: bool,
    /// Coupon missing, zero coupon assumed.
    pub coupon_backfilled: bool,
    /// Carbon intensity was zero or negative; quantile forced to 0.
    pub nonpositive_ci: bool,
    /// No segment or style could be resolved; the fallback bucket was used.
    pub segment_fallback: bool,
    pub unclassified: bool,
    /// Agency ratings disagreed; the worst step was used.
    pub worst_of_ratings: bool,
}

/// Instrument metrics as used in repricing, carried for reporting.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Exposure {
    pub segment: Option<SegmentCode>,
    pub nace: Option<String>,
    pub country: Option<String>,
    pub carbon_intensity: Option<f64>,
    pub cqs: Option<u8>,
    pub duration: Option<f64>,
    pub convexity: Option<f64>,
    pub volatility: Option<f64>,
    pub style: Option<InvestmentStyle>,
}

/// Scenario outcome for one position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionResult {
    pub fund_id: String,
    pub isin: String,
    pub asset_class: AssetClass,
    pub market_value: f64,
    /// Value change as a fraction of market value; losses are negative.
    pub loss_fraction: f64,
    pub loss_eur: f64,
    pub multipliers: Multipliers,
    pub exposure: Exposure,
    pub diagnostics: Diagnostics,
}

impl PositionResult {
    pub fn new(
        position: &Position,
        loss_fraction: f64,
        multipliers: Multipliers,
        exposure: Exposure,
        diagnostics: Diagnostics,
    ) -> Self {
        PositionResult {
            fund_id: position.fund_id.clone(),
            isin: position.isin.clone(),
            asset_class: position.asset_class,
            market_value: position.market_value,
            loss_fraction,
            loss_eur: loss_fraction * position.market_value,
            multipliers,
            exposure,
            diagnostics,
        }
    }
}

/// A complete, indexed data set: funds, their positions, and reference data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    pub funds: Vec<Fund>,
    pub positions: Vec<Position>,
    pub instruments: BTreeMap<String, Instrument>,
    pub counterparties: BTreeMap<String, Counterparty>,
}

impl Universe {
    /// Builds a universe, adding a bare fund record for every fund id that only
    /// appears in positions. Duplicate ids are rejected.
    pub fn new(
        funds: Vec<Fund>,
        positions: Vec<Position>,
        instruments: Vec<Instrument>,
        counterparties: Vec<Counterparty>,
    ) -> Result<Self> {
        let mut fund_map = BTreeMap::new();
        for f in funds {
            let id = f.id.clone();
            if fund_map.insert(id.clone(), f).is_some() {
                return Err(Error::Domain(format!("duplicate fund id {id}")));
            }
        }
        for p in &positions {
            fund_map.entry(p.fund_id.clone()).or_insert_with(|| Fund {
                id: p.fund_id.clone(),
                ..Fund::default()
            });
        }
        let mut inst_map = BTreeMap::new();
        for i in instruments {
            let id = i.isin.clone();
            if inst_map.insert(id.clone(), i).is_some() {
                return Err(Error::Domain(format!("duplicate instrument {id}")));
            }
        }
        let mut cp_map = BTreeMap::new();
        for c in counterparties {
            let id = c.id.clone();
            if cp_map.insert(id.clone(), c).is_some() {
                return Err(Error::Domain(format!("duplicate counterparty {id}")));
            }
        }
        Ok(Universe {
            funds: fund_map.into_values().collect(),
            positions,
            instruments: inst_map,
            counterparties: cp_map,
        })
    }

    pub fn fund(&self, id: &str) -> Option<&Fund> {
        self.funds
            .binary_search_by(|f| f.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.funds[i])
    }

    /// Asset class of each ISIN as held in positions (first occurrence wins).
    pub fn isin_classes(&self) -> BTreeMap<&str, AssetClass> {
        let mut out = BTreeMap::new();
        for p in &self.positions {
            out.entry(p.isin.as_str()).or_insert(p.asset_class);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Fatal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    DanglingInstrument,
    DanglingCounterparty,
    DanglingParent,
    ParentCycle,
    CqsOutOfRange,
    NegativeMarketValue,
    NonFiniteValue,
    InvalidInstrument,
    MissingSovereignCountry,
    AumMismatch,
    NegativeCarbonIntensity,
    AssetClassConflict,
}

impl FindingKind {
    pub fn severity(self) -> Severity {
        match self {
            FindingKind::NegativeCarbonIntensity | FindingKind::AssetClassConflict => {
                Severity::Warning
            }
            _ => Severity::Fatal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub severity: Severity,
    pub subject: String,
    pub message: String,
}

/// Outcome of [`validate_universe`]. The universe is accepted iff there are no
/// fatal findings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    fn push(&mut self, kind: FindingKind, subject: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            kind,
            severity: kind.severity(),
            subject: subject.into(),
            message: message.into(),
        });
    }

    pub fn accepted(&self) -> bool {
        self.fatal().next().is_none()
    }

    pub fn fatal(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Fatal)
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has(&self, kind: FindingKind) -> bool {
        self.findings.iter().any(|f| f.kind == kind)
    }
}

const AUM_TOLERANCE: f64 = 1e-6;

/// Referential-integrity and range checks over a loaded universe.
pub fn validate_universe(universe: &Universe) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut fund_totals: HashMap<&str, f64> = HashMap::new();
    let mut held_as: BTreeMap<&str, BTreeSet<AssetClass>> = BTreeMap::new();
    for p in &universe.positions {
        let subject = format!("{}/{}", p.fund_id, p.isin);
        if !p.market_value.is_finite() {
            report.push(
                FindingKind::NonFiniteValue,
                &subject,
                "market value is not finite",
            );
        } else if p.market_value < 0.0 {
            report.push(
                FindingKind::NegativeMarketValue,
                &subject,
                format!("market value {} < 0", p.market_value),
            );
        }
        *fund_totals.entry(p.fund_id.as_str()).or_default() += p.market_value;
        held_as
            .entry(p.isin.as_str())
            .or_default()
            .insert(p.asset_class);

        if p.asset_class.is_riskless() {
            continue;
        }
        let Some(inst) = universe.instruments.get(&p.isin) else {
            report.push(
                FindingKind::DanglingInstrument,
                &subject,
                "dangling instrument",
            );
            continue;
        };
        if p.asset_class == AssetClass::SovereignBond {
            let cp_country = universe
                .counterparties
                .get(&inst.counterparty_id)
                .and_then(|c| c.country.as_ref());
            if inst.country.is_none() && cp_country.is_none() {
                report.push(
                    FindingKind::MissingSovereignCountry,
                    &subject,
                    "sovereign bond without a country",
                );
            }
        }
    }

    for (isin, classes) in held_as {
        if classes.len() > 1 {
            report.push(
                FindingKind::AssetClassConflict,
                isin,
                format!("held under several asset classes: {classes:?}"),
            );
        }
    }

    for f in &universe.funds {
        if let Some(aum) = f.aum {
            let total = fund_totals.get(f.id.as_str()).copied().unwrap_or(0.0);
            let scale = aum.abs().max(total.abs());
            if scale > 0.0 && ((aum - total).abs() / scale) > AUM_TOLERANCE {
                report.push(
                    FindingKind::AumMismatch,
                    &f.id,
                    format!("declared AuM {aum} but positions sum to {total}"),
                );
            }
        }
    }

    for inst in universe.instruments.values() {
        if !universe.counterparties.contains_key(&inst.counterparty_id) {
            report.push(
                FindingKind::DanglingCounterparty,
                &inst.isin,
                format!("dangling counterparty {}", inst.counterparty_id),
            );
        }
        if let Some(cqs) = inst.cqs {
            if !(1..=6).contains(&cqs) {
                report.push(
                    FindingKind::CqsOutOfRange,
                    &inst.isin,
                    format!("CQS {cqs} outside 1..=6"),
                );
            }
        }
        let bad = [
            inst.maturity_years
                .filter(|t| !(t.is_finite() && *t >= 0.0))
                .map(|t| format!("maturity {t}")),
            inst.coupon
                .filter(|c| !(c.is_finite() && *c > -1.0))
                .map(|c| format!("coupon {c}")),
            inst.volatility
                .filter(|v| !(v.is_finite() && *v > 0.0))
                .map(|v| format!("volatility {v}")),
        ];
        for msg in bad.into_iter().flatten() {
            report.push(
                FindingKind::InvalidInstrument,
                &inst.isin,
                format!("invalid {msg}"),
            );
        }
    }

    for cp in universe.counterparties.values() {
        if let Some(ci) = cp.carbon_intensity {
            if !ci.is_finite() {
                report.push(
                    FindingKind::NonFiniteValue,
                    &cp.id,
                    "carbon intensity is not finite",
                );
            } else if ci < 0.0 {
                report.push(
                    FindingKind::NegativeCarbonIntensity,
                    &cp.id,
                    format!("carbon intensity {ci} < 0"),
                );
            }
        }
        for link in [&cp.parent_id, &cp.ultimate_parent_id]
            .into_iter()
            .flatten()
        {
            if !universe.counterparties.contains_key(link) {
                report.push(
                    FindingKind::DanglingParent,
                    &cp.id,
                    format!("dangling parent link {link}"),
                );
            }
        }
    }

    for id in parent_cycles(&universe.counterparties) {
        report.push(FindingKind::ParentCycle, id, "parent cycle");
    }

    report
}

/// Counterparties that lie on a cycle of `parent_id` links.
fn parent_cycles(cps: &BTreeMap<String, Counterparty>) -> Vec<String> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unseen,
        OnPath,
        Done,
    }
    let mut marks: HashMap<&str, Mark> = cps.keys().map(|k| (k.as_str(), Mark::Unseen)).collect();
    let mut on_cycle = BTreeSet::new();

    for start in cps.keys() {
        if marks[start.as_str()] != Mark::Unseen {
            continue;
        }
        let mut path: Vec<&str> = Vec::new();
        let mut cur = Some(start.as_str());
        while let Some(id) = cur {
            match marks.get(id).copied() {
                None | Some(Mark::Done) => break,
                Some(Mark::OnPath) => {
                    let from = path.iter().position(|p| *p == id).unwrap_or(0);
                    on_cycle.extend(path[from..].iter().map(|s| s.to_string()));
                    break;
                }
                Some(Mark::Unseen) => {
                    marks.insert(id, Mark::OnPath);
                    path.push(id);
                    cur = cps[id].parent_id.as_deref();
                }
            }
        }
        for id in path {
            marks.insert(id, Mark::Done);
        }
    }
    on_cycle.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(id: &str, parent: Option<&str>) -> Counterparty {
        Counterparty {
            id: id.into(),
            name: id.into(),
            carbon_intensity: Some(10.0),
            nace: Some("C20".into()),
            country: None,
            parent_id: parent.map(String::from),
            ultimate_parent_id: None,
        }
    }

    #[test]
    fn empty_universe_is_accepted() {
        let report = validate_universe(&Universe::default());
        assert!(report.is_empty());
        assert!(report.accepted());
    }

    #[test]
    fn dangling_instrument_is_fatal() {
        let u = Universe::new(
            vec![],
            vec![Position {
                fund_id: "F1".into(),
                isin: "XX0000000001".into(),
                asset_class: AssetClass::Equity,
                market_value: 10.0,
            }],
            vec![],
            vec![],
        )
        .unwrap();
        let report = validate_universe(&u);
        assert!(report.has(FindingKind::DanglingInstrument));
        assert!(!report.accepted());
    }

    #[test]
    fn self_parent_is_a_cycle() {
        let u = Universe::new(vec![], vec![], vec![], vec![cp("A", Some("A"))]).unwrap();
        let report = validate_universe(&u);
        assert!(report.has(FindingKind::ParentCycle));
        assert!(!report.accepted());
    }

    #[test]
    fn longer_cycles_are_found_once_per_member() {
        let u = Universe::new(
            vec![],
            vec![],
            vec![],
            vec![
                cp("A", Some("B")),
                cp("B", Some("C")),
                cp("C", Some("A")),
                cp("D", Some("A")),
            ],
        )
        .unwrap();
        let cyc: Vec<_> = validate_universe(&u)
            .findings
            .into_iter()
            .filter(|f| f.kind == FindingKind::ParentCycle)
            .map(|f| f.subject)
            .collect();
        assert_eq!(cyc, ["A", "B", "C"]);
    }

    #[test]
    fn self_ultimate_parent_is_benign() {
        let mut c = cp("A", None);
        c.ultimate_parent_id = Some("A".into());
        let u = Universe::new(vec![], vec![], vec![], vec![c]).unwrap();
        assert!(validate_universe(&u).accepted());
    }

    #[test]
    fn cqs_and_market_value_ranges() {
        let mut inst = Instrument::new("I1", "A");
        inst.cqs = Some(7);
        let u = Universe::new(
            vec![Fund {
                id: "F".into(),
                aum: Some(5.0),
                labels: vec![],
            }],
            vec![Position {
                fund_id: "F".into(),
                isin: "I1".into(),
                asset_class: AssetClass::CorporateBond,
                market_value: -1.0,
            }],
            vec![inst],
            vec![cp("A", None)],
        )
        .unwrap();
        let r = validate_universe(&u);
        assert!(r.has(FindingKind::CqsOutOfRange));
        assert!(r.has(FindingKind::NegativeMarketValue));
        assert!(r.has(FindingKind::AumMismatch));
    }

    #[test]
    fn style_rows_sum_to_one() {
        for style in InvestmentStyle::ALL {
            let pct: u32 = style.weight_percents().iter().map(|&p| u32::from(p)).sum();
            assert_eq!(pct, 100, "{style}");
            let w = style.weights();
            assert!((w.equity + w.corporate + w.sovereign + w.cash - 1.0).abs() < 1e-12);
        }
        let eq = InvestmentStyle::Equities.weights();
        assert_eq!(
            (eq.equity, eq.corporate, eq.sovereign, eq.cash),
            (0.85, 0.05, 0.05, 0.05)
        );
    }

    #[test]
    fn nace_resolution() {
        assert_eq!(SegmentCode::resolve("C20"), SegmentCode::C20);
        assert_eq!(SegmentCode::resolve("H52"), SegmentCode::H52H53);
        assert_eq!(SegmentCode::resolve("35.11"), SegmentCode::D35);
        assert_eq!(SegmentCode::resolve("D35.1.1"), SegmentCode::D35);
        assert_eq!(SegmentCode::resolve("B05-09"), SegmentCode::B05B09);
        assert_eq!(SegmentCode::resolve("b07"), SegmentCode::B05B09);
        assert_eq!(SegmentCode::resolve("J62"), SegmentCode::Other);
        assert_eq!(SegmentCode::resolve("C"), SegmentCode::Other);
        assert_eq!(SegmentCode::resolve("D"), SegmentCode::D35);
        assert_eq!(SegmentCode::resolve("garbage"), SegmentCode::Other);
        assert_eq!(SegmentCode::resolve("Other NACE"), SegmentCode::Other);
        assert_eq!(SegmentCode::resolve("SOV"), SegmentCode::Sov);
        assert_eq!(SegmentCode::resolve("FUND"), SegmentCode::Fund);
    }

    #[test]
    fn labels_resolve_to_themselves() {
        for seg in SegmentCode::ALL {
            assert_eq!(SegmentCode::resolve(seg.label()), seg);
        }
    }

    #[test]
    fn nace_normalisation() {
        assert_eq!(normalize_nace("35.11").as_deref(), Some("35.11"));
        assert_eq!(normalize_nace("D3511").as_deref(), Some("35.11"));
        assert_eq!(normalize_nace("C20.1").as_deref(), Some("20.1"));
        assert_eq!(normalize_nace("C20").as_deref(), Some("20"));
        assert_eq!(normalize_nace("Other"), None);
    }

    #[test]
    fn scenario_fallbacks() {
        let mut s = Scenario {
            name: "t".into(),
            equity_shock: BTreeMap::from([(SegmentCode::Other, -0.143), (SegmentCode::D35, -0.23)]),
            spread_shock: BTreeMap::from([(SegmentCode::Other, 177.0)]),
            sovereign_curves: BTreeMap::new(),
            cprs_map: None,
            tec_tac_table: None,
        };
        assert!(s.check().is_ok());
        assert_eq!(s.equity_shock_for(SegmentCode::D35), -0.23);
        assert_eq!(s.equity_shock_for(SegmentCode::C19), -0.143);
        assert_eq!(s.spread_shock_for(SegmentCode::D35), 177.0);
        assert_eq!(s.average_curve().0, [0.0; 10]);
        s.spread_shock.clear();
        assert!(s.check().is_err());
    }

    #[test]
    fn asset_class_parsing() {
        assert_eq!(
            "Corporate bond".parse::<AssetClass>().unwrap(),
            AssetClass::CorporateBond
        );
        assert_eq!("CASH".parse::<AssetClass>().unwrap(), AssetClass::Cash);
        assert!("derivative".parse::<AssetClass>().is_err());
    }
}
