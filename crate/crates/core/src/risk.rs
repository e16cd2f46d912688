//! Scenario repricing of single positions.
//!
//! Each asset class has a pure kernel (`*_loss`) taking resolved numbers, and a
//! `reprice_*` wrapper that resolves a position's data through the universe,
//! applies backfills and records diagnostics. [`assess`] runs the whole
//! universe in two phases: direct holdings first, then fund vehicles, whose
//! loss depends on the class averages of the first phase.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{self, CalibrationSet, EmpiricalCdf, QuantileMode};
use crate::error::{Error, Result};
use crate::ingest;
use crate::model::{
    AssetClass, CiSource, Counterparty, Diagnostics, Exposure, Instrument, InvestmentStyle,
    Multipliers, Position, PositionResult, Scenario, SectorCalibration, SegmentCode, StyleWeights,
    TenorCurve, Universe,
};

/// Convexity is capped at this multiple of duration.
pub const CONVEXITY_CAP: f64 = 40.0;

const BP: f64 = 1e-4;

/// First- and second-order price sensitivities of a bond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BondSensitivities {
    /// Years.
    pub duration: f64,
    /// Years squared.
    pub convexity: f64,
}

/// Closed-form duration and convexity from maturity `t` (years) and annual
/// coupon `c` (decimal).
pub fn bond_sensitivities(t: f64, c: f64) -> Result<BondSensitivities> {
    if !(c.is_finite() && c > -1.0) {
        return Err(Error::Domain(format!("coupon must exceed -1, got {c}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!(
            "maturity must be non-negative, got {t}"
        )));
    }
    let duration = t / (1.0 + c).powf(t / 2.0);
    let raw = t * (t + 1.0) / ((1.0 + c) * (1.0 + c));
    Ok(BondSensitivities {
        duration,
        convexity: raw.min(CONVEXITY_CAP * duration),
    })
}

/// Sensitivities for a bond known only by its duration `d`: treats it as a zero
/// coupon bond with maturity `d`.
pub fn sensitivities_from_duration(d: f64) -> BondSensitivities {
    let d = d.max(0.0);
    BondSensitivities {
        duration: d,
        convexity: (d * (d + 1.0)).min(CONVEXITY_CAP * d),
    }
}

/// Yield shock at maturity `t`: linear between the integer tenors 1..=10 and
/// flat outside them.
pub fn interpolate_tenor(curve: &TenorCurve, t: f64) -> f64 {
    let c = &curve.0;
    if !(t > 1.0) {
        return c[0];
    }
    if t >= 10.0 {
        return c[9];
    }
    let lo = t.floor();
    let i = lo as usize - 1;
    let frac = t - lo;
    c[i] + frac * (c[i + 1] - c[i])
}

/// Sign convention for the bond Taylor expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondSign {
    /// Price change `-dy*D + 0.5*dy^2*C`: convexity offsets part of the loss.
    #[default]
    Taylor,
    /// Both terms add to the loss: `-(dy*D + 0.5*dy^2*C)`.
    Additive,
}

/// How fund-vehicle class averages weight the repriced instruments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    /// Each unique ISIN counts once.
    #[default]
    Equal,
    /// Weighted by held market value.
    Aum,
}

/// Average loss fractions of the look-through classes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassAverages {
    pub equity: f64,
    pub corporate: f64,
    pub sovereign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    pub bond_sign: BondSign,
    pub quantile_mode: QuantileMode,
    /// Doubles the fund-vehicle quantile like every other CI multiplier.
    pub fund_factor_two: bool,
    pub class_weighting: ClassWeighting,
    /// Replaces the class averages computed from the run.
    pub class_averages: Option<ClassAverages>,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            bond_sign: BondSign::Taylor,
            quantile_mode: QuantileMode::Parametric,
            fund_factor_two: true,
            class_weighting: ClassWeighting::Equal,
            class_averages: None,
        }
    }
}

/// Equity price change, floored at a total loss.
pub fn equity_loss(ci_m: f64, vol_m: f64, shock: f64) -> f64 {
    (ci_m * vol_m * shock).max(-1.0)
}

/// Corporate bond price change for a spread shock in basis points, given
/// spread duration and convexity. Under [`BondSign::Taylor`] a spread widening
/// never produces a gain.
pub fn corporate_loss(
    ci_m: f64,
    cqs_m: f64,
    shock_bp: f64,
    s: BondSensitivities,
    sign: BondSign,
) -> f64 {
    let ds = ci_m * cqs_m * shock_bp * BP;
    let raw = taylor(ds, s, sign);
    let capped = if ds > 0.0 { raw.min(0.0) } else { raw };
    capped.max(-1.0)
}

/// Sovereign bond price change for a yield shock in basis points. Negative
/// shocks produce gains.
pub fn sovereign_loss(dy_bp: f64, s: BondSensitivities, sign: BondSign) -> f64 {
    taylor(dy_bp * BP, s, sign).max(-1.0)
}

fn taylor(dy: f64, s: BondSensitivities, sign: BondSign) -> f64 {
    let first = dy * s.duration;
    let second = 0.5 * dy * dy * s.convexity;
    match sign {
        BondSign::Taylor => -first + second,
        BondSign::Additive => -(first + second),
    }
}

/// Fund-vehicle price change: the multiplier times the style-weighted class
/// averages, floored at a total loss. Cash contributes nothing.
pub fn fund_vehicle_loss(ci_m: f64, w: StyleWeights, avg: ClassAverages) -> f64 {
    (ci_m * (w.equity * avg.equity + w.corporate * avg.corporate + w.sovereign * avg.sovereign))
        .max(-1.0)
}

/// A carbon-intensity multiplier with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiMultiplier {
    pub value: f64,
    /// No carbon intensity was available; the neutral 1 was used.
    pub backfilled: bool,
    pub nonpositive: bool,
}

/// `2q` for the segment calibration, neutral 1 when `ci` is missing and 0 for
/// non-positive intensities.
pub fn ci_multiplier(ci: Option<f64>, cal: &SectorCalibration) -> CiMultiplier {
    match ci {
        None => CiMultiplier {
            value: 1.0,
            backfilled: true,
            nonpositive: false,
        },
        Some(ci) if !(ci > 0.0) => CiMultiplier {
            value: 0.0,
            backfilled: false,
            nonpositive: true,
        },
        Some(ci) => CiMultiplier {
            value: 2.0 * calib::quantile_of(ci, cal).unwrap_or(0.5),
            backfilled: false,
            nonpositive: false,
        },
    }
}

/// Everything repricing needs besides the position itself.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub universe: &'a Universe,
    pub scenario: &'a Scenario,
    /// Should already carry the run's segment averages, see [`prepare_calibration`].
    pub calibration: &'a CalibrationSet,
    pub empirical: Option<&'a EmpiricalCdf>,
    pub config: &'a RiskConfig,
}

/// Counterparty-level data after walking the backfill chain.
struct Resolved<'a> {
    instrument: Option<&'a Instrument>,
    counterparty: Option<&'a Counterparty>,
    ci: Option<f64>,
    ci_source: CiSource,
}

impl<'a> Context<'a> {
    fn resolve(&self, isin: &str) -> Resolved<'a> {
        let instrument = self.universe.instruments.get(isin);
        let counterparty =
            instrument.and_then(|i| self.universe.counterparties.get(&i.counterparty_id));
        let (ci, ci_source) = counterparty
            .map(|cp| ingest::resolve_carbon_intensity(cp, &self.universe.counterparties))
            .unwrap_or((None, CiSource::Missing));
        Resolved {
            instrument,
            counterparty,
            ci,
            ci_source,
        }
    }

    fn calibration_for(&self, segment: SegmentCode) -> Option<&'a SectorCalibration> {
        self.calibration.get(segment)
    }

    fn ci_multiplier(&self, segment: SegmentCode, ci: Option<f64>) -> CiMultiplier {
        let Some(cal) = self.calibration_for(segment) else {
            return CiMultiplier {
                value: 1.0,
                backfilled: true,
                nonpositive: false,
            };
        };
        let base = ci_multiplier(ci, cal);
        match (self.config.quantile_mode, self.empirical, ci) {
            (QuantileMode::Empirical, Some(e), Some(ci))
                if !base.backfilled && !base.nonpositive =>
            {
                match e.quantile(segment, ci) {
                    Some(q) => CiMultiplier {
                        value: 2.0 * q,
                        ..base
                    },
                    None => base,
                }
            }
            _ => base,
        }
    }

    /// NACE bucket of a corporate issuer; `Other` (flagged) when unknown.
    fn corporate_segment(&self, r: &Resolved<'_>) -> (SegmentCode, Option<String>, bool) {
        let nace = r
            .counterparty
            .and_then(|cp| ingest::resolve_nace(cp, &self.universe.counterparties));
        match nace.as_deref().map(SegmentCode::resolve) {
            Some(seg) if seg.is_nace_bucket() => (seg, nace, false),
            _ => (SegmentCode::Other, nace, true),
        }
    }

    fn sensitivities(
        &self,
        inst: Option<&Instrument>,
        segment: SegmentCode,
        diag: &mut Diagnostics,
    ) -> BondSensitivities {
        if let Some(t) = inst.and_then(|i| i.maturity_years) {
            let coupon = inst.and_then(|i| i.coupon);
            diag.coupon_backfilled = coupon.is_none();
            if let Ok(s) = bond_sensitivities(t, coupon.unwrap_or(0.0)) {
                return s;
            }
        }
        diag.duration_backfilled = true;
        let d = self
            .calibration_for(segment)
            .and_then(|c| c.mean_duration)
            .unwrap_or(0.0);
        sensitivities_from_duration(d)
    }
}

fn base_diagnostics(r: &Resolved<'_>) -> Diagnostics {
    Diagnostics {
        ci_source: r.ci_source,
        worst_of_ratings: r.instrument.is_some_and(|i| i.rating_disagreement),
        ..Diagnostics::default()
    }
}

fn ratio(value: Option<f64>, mean: Option<f64>) -> Option<f64> {
    match (value, mean) {
        (Some(v), Some(m)) if v > 0.0 && m > 0.0 => Some(v / m),
        _ => None,
    }
}

pub fn reprice_equity(ctx: &Context<'_>, position: &Position) -> PositionResult {
    let r = ctx.resolve(&position.isin);
    let mut diag = base_diagnostics(&r);
    let (segment, nace, fallback) = ctx.corporate_segment(&r);
    diag.segment_fallback = fallback;

    let ci_m = ctx.ci_multiplier(segment, r.ci);
    diag.ci_backfilled = ci_m.backfilled;
    diag.nonpositive_ci = ci_m.nonpositive;
    let volatility = r.instrument.and_then(|i| i.volatility);
    let mean_vol = ctx.calibration_for(segment).and_then(|c| c.mean_volatility);
    let vol_m = ratio(volatility, mean_vol);
    diag.vol_backfilled = vol_m.is_none();
    let vol_m = vol_m.unwrap_or(1.0);

    let loss = equity_loss(ci_m.value, vol_m, ctx.scenario.equity_shock_for(segment));
    let exposure = Exposure {
        segment: Some(segment),
        nace,
        carbon_intensity: r.ci,
        volatility,
        ..Exposure::default()
    };
    let mult = Multipliers {
        ci: ci_m.value,
        vol: Some(vol_m),
        cqs: None,
    };
    PositionResult::new(position, loss, mult, exposure, diag)
}

pub fn reprice_corporate_bond(ctx: &Context<'_>, position: &Position) -> PositionResult {
    let r = ctx.resolve(&position.isin);
    let mut diag = base_diagnostics(&r);
    let (segment, nace, fallback) = ctx.corporate_segment(&r);
    diag.segment_fallback = fallback;

    let ci_m = ctx.ci_multiplier(segment, r.ci);
    diag.ci_backfilled = ci_m.backfilled;
    diag.nonpositive_ci = ci_m.nonpositive;
    let cqs = r.instrument.and_then(|i| i.cqs);
    let mean_cqs = ctx.calibration_for(segment).and_then(|c| c.mean_cqs);
    let cqs_m = ratio(cqs.map(f64::from), mean_cqs);
    diag.cqs_backfilled = cqs_m.is_none();
    let cqs_m = cqs_m.unwrap_or(1.0);

    let sens = ctx.sensitivities(r.instrument, segment, &mut diag);
    let loss = corporate_loss(
        ci_m.value,
        cqs_m,
        ctx.scenario.spread_shock_for(segment),
        sens,
        ctx.config.bond_sign,
    );
    let exposure = Exposure {
        segment: Some(segment),
        nace,
        carbon_intensity: r.ci,
        cqs,
        duration: Some(sens.duration),
        convexity: Some(sens.convexity),
        ..Exposure::default()
    };
    let mult = Multipliers {
        ci: ci_m.value,
        vol: None,
        cqs: Some(cqs_m),
    };
    PositionResult::new(position, loss, mult, exposure, diag)
}

pub fn reprice_sovereign(ctx: &Context<'_>, position: &Position) -> Result<PositionResult> {
    let r = ctx.resolve(&position.isin);
    let mut diag = base_diagnostics(&r);
    let country = r
        .instrument
        .and_then(|i| i.country.clone())
        .or_else(|| {
            r.counterparty
                .and_then(|cp| ingest::resolve_country(cp, &ctx.universe.counterparties))
        })
        .map(|c| ingest::country_code(&c).unwrap_or(c))
        .ok_or_else(|| Error::UnknownCountry {
            isin: position.isin.clone(),
        })?;

    let sens = ctx.sensitivities(r.instrument, SegmentCode::Sov, &mut diag);
    // Without a stated maturity the backfilled duration stands in for the tenor.
    let tenor = r
        .instrument
        .and_then(|i| i.maturity_years)
        .unwrap_or(sens.duration);
    let cqs = r.instrument.and_then(|i| i.cqs);

    let (dy_bp, mult) = match ctx.scenario.sovereign_curves.get(&country) {
        Some(curve) => (
            interpolate_tenor(curve, tenor),
            Multipliers {
                ci: 1.0,
                vol: None,
                cqs: None,
            },
        ),
        None => {
            let ci_m = ctx.ci_multiplier(SegmentCode::Sov, r.ci);
            diag.ci_backfilled = ci_m.backfilled;
            diag.nonpositive_ci = ci_m.nonpositive;
            let mean_cqs = ctx
                .calibration_for(SegmentCode::Sov)
                .and_then(|c| c.mean_cqs);
            let cqs_m = ratio(cqs.map(f64::from), mean_cqs);
            diag.cqs_backfilled = cqs_m.is_none();
            let cqs_m = cqs_m.unwrap_or(1.0);
            let base = interpolate_tenor(&ctx.scenario.average_curve(), tenor);
            (
                ci_m.value * cqs_m * base,
                Multipliers {
                    ci: ci_m.value,
                    vol: None,
                    cqs: Some(cqs_m),
                },
            )
        }
    };
    let loss = sovereign_loss(dy_bp, sens, ctx.config.bond_sign);
    let exposure = Exposure {
        segment: Some(SegmentCode::Sov),
        country: Some(country),
        carbon_intensity: r.ci,
        cqs,
        duration: Some(sens.duration),
        convexity: Some(sens.convexity),
        ..Exposure::default()
    };
    Ok(PositionResult::new(position, loss, mult, exposure, diag))
}

pub fn reprice_fund_vehicle(
    ctx: &Context<'_>,
    position: &Position,
    averages: ClassAverages,
) -> PositionResult {
    let r = ctx.resolve(&position.isin);
    let mut diag = base_diagnostics(&r);
    let style = r.instrument.and_then(|i| i.fund_style);
    diag.segment_fallback = style.is_none();
    let style = style.unwrap_or(InvestmentStyle::Others);

    let mut ci_m = ctx.ci_multiplier(SegmentCode::Fund, r.ci);
    if !ctx.config.fund_factor_two && !ci_m.backfilled {
        ci_m.value /= 2.0;
    }
    diag.ci_backfilled = ci_m.backfilled;
    diag.nonpositive_ci = ci_m.nonpositive;

    let loss = fund_vehicle_loss(ci_m.value, style.weights(), averages);
    let exposure = Exposure {
        segment: Some(SegmentCode::Fund),
        carbon_intensity: r.ci,
        style: Some(style),
        ..Exposure::default()
    };
    let mult = Multipliers {
        ci: ci_m.value,
        vol: None,
        cqs: None,
    };
    PositionResult::new(position, loss, mult, exposure, diag)
}

/// Zero-loss result for cash and unclassified positions.
pub fn reprice_cash(position: &Position) -> PositionResult {
    let diag = Diagnostics {
        unclassified: position.asset_class == AssetClass::Unclassified,
        ..Diagnostics::default()
    };
    PositionResult::new(
        position,
        0.0,
        Multipliers::default(),
        Exposure::default(),
        diag,
    )
}

/// Class averages over first-phase results.
pub fn class_averages(results: &[PositionResult], weighting: ClassWeighting) -> ClassAverages {
    let avg = |class: AssetClass| -> f64 {
        let mut sum = 0.0;
        let mut weight = 0.0;
        let mut seen = BTreeSet::new();
        for r in results.iter().filter(|r| r.asset_class == class) {
            match weighting {
                ClassWeighting::Equal => {
                    if seen.insert(r.isin.as_str()) {
                        sum += r.loss_fraction;
                        weight += 1.0;
                    }
                }
                ClassWeighting::Aum => {
                    sum += r.loss_fraction * r.market_value;
                    weight += r.market_value;
                }
            }
        }
        if weight > 0.0 {
            sum / weight
        } else {
            0.0
        }
    };
    ClassAverages {
        equity: avg(AssetClass::Equity),
        corporate: avg(AssetClass::CorporateBond),
        sovereign: avg(AssetClass::SovereignBond),
    }
}

/// Overlays the volatility, CQS and duration means observed in `universe`
/// onto `base`; segments without observations keep the base values.
pub fn prepare_calibration(universe: &Universe, base: &CalibrationSet) -> CalibrationSet {
    let mut cal = base.clone();
    cal.apply_averages(&calib::segment_averages(&calib::instrument_observations(
        universe,
    )));
    cal
}

/// Output of a full repricing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    /// Sorted by fund id, then ISIN.
    pub results: Vec<PositionResult>,
    pub class_averages: ClassAverages,
    pub calibration: CalibrationSet,
    pub warnings: Vec<String>,
}

/// Reprices every position of `universe`. Direct holdings are evaluated in
/// parallel first; fund vehicles follow once the class averages are known.
/// The result does not depend on the thread count.
pub fn assess(
    universe: &Universe,
    scenario: &Scenario,
    base_calibration: &CalibrationSet,
    config: &RiskConfig,
) -> Result<Assessment> {
    let calibration = prepare_calibration(universe, base_calibration);
    let empirical = (config.quantile_mode == QuantileMode::Empirical)
        .then(|| EmpiricalCdf::from_samples(&calib::collect_samples(universe)));
    let ctx = Context {
        universe,
        scenario,
        calibration: &calibration,
        empirical: empirical.as_ref(),
        config,
    };
    let mut warnings = lint_scenario(scenario);

    let phase_one: Vec<PositionResult> = universe
        .positions
        .par_iter()
        .filter(|p| p.asset_class != AssetClass::FundVehicle)
        .map(|p| match p.asset_class {
            AssetClass::Equity => Ok(reprice_equity(&ctx, p)),
            AssetClass::CorporateBond => Ok(reprice_corporate_bond(&ctx, p)),
            AssetClass::SovereignBond => reprice_sovereign(&ctx, p),
            _ => Ok(reprice_cash(p)),
        })
        .collect::<Result<_>>()?;

    let averages = match config.class_averages {
        Some(a) => a,
        None => {
            let present: BTreeSet<AssetClass> = phase_one.iter().map(|r| r.asset_class).collect();
            let has_vehicles = universe
                .positions
                .iter()
                .any(|p| p.asset_class == AssetClass::FundVehicle);
            if has_vehicles {
                for class in AssetClass::LOOK_THROUGH {
                    if !present.contains(&class) {
                        warnings.push(format!(
                            "no {class} positions: fund vehicles use a zero {class} average"
                        ));
                    }
                }
            }
            class_averages(&phase_one, config.class_weighting)
        }
    };

    let phase_two: Vec<PositionResult> = universe
        .positions
        .par_iter()
        .filter(|p| p.asset_class == AssetClass::FundVehicle)
        .map(|p| reprice_fund_vehicle(&ctx, p, averages))
        .collect();

    let mut results = phase_one;
    results.extend(phase_two);
    results.sort_by(|a, b| (&a.fund_id, &a.isin).cmp(&(&b.fund_id, &b.isin)));

    Ok(Assessment {
        results,
        class_averages: averages,
        calibration,
        warnings,
    })
}

/// Flags shocks large enough that the convexity term of a capped bond could
/// outweigh the duration term. With `C <= 40*D` the ratio of the two terms is at
/// most `20*|dy|`, so the check is `|dy| < 500bp`.
pub fn lint_scenario(scenario: &Scenario) -> Vec<String> {
    let limit = 1.0 / (0.5 * CONVEXITY_CAP) / BP;
    let mut out = Vec::new();
    for (seg, bp) in &scenario.spread_shock {
        if bp.abs() >= limit {
            out.push(format!(
                "spread shock {bp}bp for {seg} lets convexity dominate duration"
            ));
        }
    }
    for (country, curve) in &scenario.sovereign_curves {
        if let Some(bp) = curve.0.iter().find(|bp| bp.abs() >= limit) {
            out.push(format!(
                "yield shock {bp}bp for {country} lets convexity dominate duration"
            ));
        }
    }
    out
}

/// Losses per ISIN for a quick lookup.
pub fn loss_by_isin(results: &[PositionResult]) -> BTreeMap<&str, f64> {
    results
        .iter()
        .map(|r| (r.isin.as_str(), r.loss_fraction))
        .collect()
}
