//! Roll-ups of position results to funds, fund subsets and the whole sector,
//! plus distribution statistics, tail characterisation and greenness metrics.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    normalize_nace, AssetClass, CprsCategory, Fund, PositionResult, Scenario, SegmentCode, TecTac,
    Universe,
};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// TEC/TAC of a portfolio. Adjusted values are absent when nothing is eligible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Greenness {
    pub tec: f64,
    pub tac: f64,
    pub eligible_share: f64,
    pub adj_tec: Option<f64>,
    pub adj_tac: Option<f64>,
}

/// Fund-level outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundResult {
    pub fund_id: String,
    pub labels: Vec<String>,
    /// Sum of position market values.
    pub aum: f64,
    pub loss_fraction: f64,
    pub loss_eur: f64,
    /// AuM-weighted carbon intensity over the positions that have one.
    pub weighted_ci: Option<f64>,
    /// Share of AuM with a carbon intensity.
    pub ci_coverage: f64,
    pub class_weights: BTreeMap<AssetClass, f64>,
    /// AuM-weighted loss within each held class.
    pub class_losses: BTreeMap<AssetClass, f64>,
    pub cprs_share: Option<f64>,
    pub greenness: Option<Greenness>,
    /// The fund holds nothing; its loss is reported as 0.
    pub zero_aum: bool,
}

/// Share of total market value per asset class. Empty when the total is 0.
pub fn class_weights<'a>(
    results: impl IntoIterator<Item = &'a PositionResult>,
) -> BTreeMap<AssetClass, f64> {
    let mut by_class: BTreeMap<AssetClass, f64> = BTreeMap::new();
    let mut total = 0.0;
    for r in results {
        *by_class.entry(r.asset_class).or_default() += r.market_value;
        total += r.market_value;
    }
    if total <= 0.0 {
        return BTreeMap::new();
    }
    by_class.values_mut().for_each(|v| *v /= total);
    by_class
}

/// AuM-weighted loss fraction within each asset class.
pub fn class_losses<'a>(
    results: impl IntoIterator<Item = &'a PositionResult>,
) -> BTreeMap<AssetClass, f64> {
    let mut acc: BTreeMap<AssetClass, (f64, f64)> = BTreeMap::new();
    for r in results {
        let e = acc.entry(r.asset_class).or_default();
        e.0 += r.loss_eur;
        e.1 += r.market_value;
    }
    acc.into_iter()
        .map(|(c, (loss, mv))| (c, if mv > 0.0 { loss / mv } else { 0.0 }))
        .collect()
}

/// AuM share of positions whose segment belongs to a climate-policy-relevant
/// sector.
pub fn cprs_share<'a>(
    results: impl IntoIterator<Item = &'a PositionResult>,
    cprs_map: &BTreeMap<SegmentCode, CprsCategory>,
) -> f64 {
    let mut total = 0.0;
    let mut flagged = 0.0;
    for r in results {
        total += r.market_value;
        if r.exposure
            .segment
            .is_some_and(|s| cprs_map.contains_key(&s))
        {
            flagged += r.market_value;
        }
    }
    if total > 0.0 {
        flagged / total
    } else {
        0.0
    }
}

/// Coefficients for a NACE code, trying class (`35.11`), group (`35.1`), then
/// division (`35`).
pub fn lookup_tec_tac(table: &BTreeMap<String, TecTac>, nace: &str) -> Option<TecTac> {
    let key = normalize_nace(nace)?;
    let mut candidates = vec![key.clone()];
    if key.len() == 5 {
        candidates.push(key[..4].to_string());
    }
    if key.len() > 2 {
        candidates.push(key[..2].to_string());
    }
    candidates.iter().find_map(|k| table.get(k).copied())
}

/// `value / eligible_share`, absent when nothing is eligible.
pub fn adjusted(value: f64, eligible_share: f64) -> Option<f64> {
    (eligible_share > 0.0).then(|| value / eligible_share)
}

/// TEC and TAC of a portfolio. Only equities and corporate bonds with a NACE
/// code are eligible, but weights are taken over the whole portfolio.
pub fn tec_tac<'a>(
    results: impl IntoIterator<Item = &'a PositionResult>,
    table: &BTreeMap<String, TecTac>,
) -> Result<Greenness> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let (mut total, mut eligible, mut tec, mut tac) = (0.0, 0.0, 0.0, 0.0);
    for r in results {
        total += r.market_value;
        let nace = match r.asset_class {
            AssetClass::Equity | AssetClass::CorporateBond => r.exposure.nace.as_deref(),
            _ => None,
        };
        let Some(nace) = nace.filter(|n| normalize_nace(n).is_some()) else {
            continue;
        };
        eligible += r.market_value;
        if let Some(c) = lookup_tec_tac(table, nace) {
            tec += r.market_value * c.tec;
            tac += r.market_value * c.tac;
        }
    }
    if total <= 0.0 {
        return Ok(Greenness {
            tec: 0.0,
            tac: 0.0,
            eligible_share: 0.0,
            adj_tec: None,
            adj_tac: None,
        });
    }
    let (tec, tac, eligible_share) = (tec / total, tac / total, eligible / total);
    Ok(Greenness {
        tec,
        tac,
        eligible_share,
        adj_tec: adjusted(tec, eligible_share),
        adj_tac: adjusted(tac, eligible_share),
    })
}

/// Rolls up one fund's position results.
pub fn aggregate_fund(
    fund: &Fund,
    results: &[PositionResult],
    scenario: &Scenario,
) -> Result<FundResult> {
    let aum: f64 = results.iter().map(|r| r.market_value).sum();
    let loss_eur: f64 = results.iter().map(|r| r.loss_eur).sum();
    let zero_aum = aum <= 0.0;

    let (mut ci_sum, mut ci_aum) = (0.0, 0.0);
    for r in results {
        if let Some(ci) = r.exposure.carbon_intensity {
            ci_sum += r.market_value * ci;
            ci_aum += r.market_value;
        }
    }
    let greenness = match &scenario.tec_tac_table {
        Some(table) => Some(tec_tac(results, table)?),
        None => None,
    };
    Ok(FundResult {
        fund_id: fund.id.clone(),
        labels: fund.labels.clone(),
        aum,
        loss_fraction: if zero_aum { 0.0 } else { loss_eur / aum },
        loss_eur,
        weighted_ci: (ci_aum > 0.0).then(|| ci_sum / ci_aum),
        ci_coverage: if zero_aum { 0.0 } else { ci_aum / aum },
        class_weights: class_weights(results),
        class_losses: class_losses(results),
        cprs_share: scenario.cprs_map.as_ref().map(|m| cprs_share(results, m)),
        greenness,
        zero_aum,
    })
}

/// Aggregates every fund of the universe. `results` must be sorted by fund id,
/// as returned by [`crate::risk::assess`]. Output follows fund-id order.
pub fn aggregate_funds(
    universe: &Universe,
    results: &[PositionResult],
    scenario: &Scenario,
) -> Result<Vec<FundResult>> {
    let mut ranges: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut start = 0;
    for chunk in results.chunk_by(|a, b| a.fund_id == b.fund_id) {
        ranges.insert(chunk[0].fund_id.as_str(), (start, start + chunk.len()));
        start += chunk.len();
    }
    universe
        .funds
        .par_iter()
        .map(|f| {
            let slice = ranges
                .get(f.id.as_str())
                .map(|&(a, b)| &results[a..b])
                .unwrap_or(&[]);
            aggregate_fund(f, slice, scenario)
        })
        .collect()
}

/// Sector-wide totals over all positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorSummary {
    pub fund_count: usize,
    pub aum: f64,
    pub loss_eur: f64,
    /// AuM-weighted loss fraction.
    pub loss_fraction: f64,
    pub weighted_ci: Option<f64>,
    pub ci_coverage: f64,
    pub class_weights: BTreeMap<AssetClass, f64>,
    pub class_losses: BTreeMap<AssetClass, f64>,
    pub cprs_share: Option<f64>,
    pub greenness: Option<Greenness>,
}

/// Aggregates a set of funds as if they were one portfolio.
pub fn summarize<'a>(
    funds: &[&FundResult],
    results: impl IntoIterator<Item = &'a PositionResult> + Clone,
    scenario: &Scenario,
) -> Result<SectorSummary> {
    let ids: BTreeSet<&str> = funds.iter().map(|f| f.fund_id.as_str()).collect();
    let selected: Vec<&PositionResult> = results
        .into_iter()
        .filter(|r| ids.contains(r.fund_id.as_str()))
        .collect();
    let aum: f64 = selected.iter().map(|r| r.market_value).sum();
    let loss_eur: f64 = funds.iter().map(|f| f.loss_eur).sum();
    let (mut ci_sum, mut ci_aum) = (0.0, 0.0);
    for r in &selected {
        if let Some(ci) = r.exposure.carbon_intensity {
            ci_sum += r.market_value * ci;
            ci_aum += r.market_value;
        }
    }
    let greenness = match &scenario.tec_tac_table {
        Some(t) => Some(tec_tac(selected.iter().copied(), t)?),
        None => None,
    };
    Ok(SectorSummary {
        fund_count: funds.len(),
        aum,
        loss_eur,
        loss_fraction: if aum > 0.0 { loss_eur / aum } else { 0.0 },
        weighted_ci: (ci_aum > 0.0).then(|| ci_sum / ci_aum),
        ci_coverage: if aum > 0.0 { ci_aum / aum } else { 0.0 },
        class_weights: class_weights(selected.iter().copied()),
        class_losses: class_losses(selected.iter().copied()),
        cprs_share: scenario
            .cprs_map
            .as_ref()
            .map(|m| cprs_share(selected.iter().copied(), m)),
        greenness,
    })
}

/// Loss of a portfolio with the given class allocation, valuing each class at
/// `class_losses`. Cash, unclassified and classes without a loss contribute 0.
pub fn counterfactual_loss(
    class_losses: &BTreeMap<AssetClass, f64>,
    target_weights: &BTreeMap<AssetClass, f64>,
) -> Result<f64> {
    let sum: f64 = target_weights.values().sum();
    if !((sum - 1.0).abs() <= WEIGHT_TOLERANCE) || target_weights.values().any(|w| *w < 0.0) {
        return Err(Error::WeightSum { sum });
    }
    Ok(target_weights
        .iter()
        .filter(|(c, _)| !c.is_riskless())
        .map(|(c, w)| w * class_losses.get(c).copied().unwrap_or(0.0))
        .sum())
}

/// Summary of a loss distribution. Losses are negative, so `p1` is near the
/// worst outcome and `worst_1` averages the most negative values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Adjusted Fisher–Pearson sample skewness; absent below three values.
    pub skewness: Option<f64>,
    pub p1: f64,
    pub p5: f64,
    pub p10: f64,
    pub p50: f64,
    pub worst_1: f64,
    pub worst_5: f64,
    pub best_1: f64,
    pub best_5: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Worst,
    Best,
}

/// Linear-interpolation percentile of ascending `sorted` values, `p` in [0, 1].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Number of observations in a tail of `fraction` of `n`, at least one.
pub fn tail_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Mean of the `ceil(fraction * n)` worst (lowest) or best values.
pub fn tail_mean(sorted: &[f64], fraction: f64, direction: Direction) -> f64 {
    let k = tail_count(sorted.len(), fraction);
    let slice = match direction {
        Direction::Worst => &sorted[..k],
        Direction::Best => &sorted[sorted.len() - k..],
    };
    slice.iter().sum::<f64>() / k as f64
}

pub fn skewness(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    // Relative to the scale of the data, a variance this small is rounding noise.
    let scale = values
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    if m2 <= (1e-12 * scale).powi(2) {
        return Some(0.0);
    }
    let g1 = m3 / m2.powf(1.5);
    Some((nf * (nf - 1.0)).sqrt() / (nf - 2.0) * g1)
}

pub fn distribution(values: &[f64]) -> Result<DistributionStats> {
    if values.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = percentile(&sorted, 0.5);
    Ok(DistributionStats {
        count: n,
        mean: sorted.iter().sum::<f64>() / n as f64,
        median,
        skewness: skewness(&sorted),
        p1: percentile(&sorted, 0.01),
        p5: percentile(&sorted, 0.05),
        p10: percentile(&sorted, 0.10),
        p50: median,
        worst_1: tail_mean(&sorted, 0.01, Direction::Worst),
        worst_5: tail_mean(&sorted, 0.05, Direction::Worst),
        best_1: tail_mean(&sorted, 0.01, Direction::Best),
        best_5: tail_mean(&sorted, 0.05, Direction::Best),
    })
}

/// Distribution of fund loss fractions, each fund counting once.
pub fn sector_distribution(funds: &[&FundResult]) -> Result<DistributionStats> {
    let losses: Vec<f64> = funds.iter().map(|f| f.loss_fraction).collect();
    distribution(&losses)
}

/// Funds carrying `label`; all funds when `label` is `None`.
pub fn select_funds<'a>(funds: &'a [FundResult], label: Option<&str>) -> Vec<&'a FundResult> {
    funds
        .iter()
        .filter(|f| label.is_none_or(|l| f.labels.iter().any(|x| x.eq_ignore_ascii_case(l))))
        .collect()
}

/// One result per ISIN of the given class, in ISIN order.
pub fn unique_instruments(results: &[PositionResult], class: AssetClass) -> Vec<&PositionResult> {
    let mut by_isin: BTreeMap<&str, &PositionResult> = BTreeMap::new();
    for r in results.iter().filter(|r| r.asset_class == class) {
        by_isin.entry(r.isin.as_str()).or_insert(r);
    }
    by_isin.into_values().collect()
}

/// Equal-weighted profile of a tail of instruments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationRow {
    pub count: usize,
    pub mean_loss: f64,
    pub mean_ci: Option<f64>,
    pub mean_cqs: Option<f64>,
    pub mean_duration: Option<f64>,
    pub mean_volatility: Option<f64>,
    /// Most frequent segments with their counts, most frequent first.
    pub top_segments: Vec<(String, usize)>,
    pub top_countries: Vec<(String, usize)>,
    pub top_styles: Vec<(String, usize)>,
}

const TOP_N: usize = 3;

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn modes(keys: impl Iterator<Item = String>) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_default() += 1;
    }
    let mut v: Vec<_> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(TOP_N);
    v
}

/// Sorts by loss, most negative first, ties by ISIN.
fn rank<'a>(items: &[&'a PositionResult]) -> Vec<&'a PositionResult> {
    let mut v = items.to_vec();
    v.sort_by(|a, b| {
        a.loss_fraction
            .total_cmp(&b.loss_fraction)
            .then_with(|| a.isin.cmp(&b.isin))
    });
    v
}

/// Characterises the worst or best `fraction` of `items` (all of them when
/// `fraction` is 1).
pub fn characterize_tail(
    items: &[&PositionResult],
    fraction: f64,
    direction: Direction,
) -> Result<CharacterizationRow> {
    if items.is_empty() {
        return Err(Error::EmptySubset);
    }
    let ranked = rank(items);
    let k = tail_count(ranked.len(), fraction);
    let tail = match direction {
        Direction::Worst => &ranked[..k],
        Direction::Best => &ranked[ranked.len() - k..],
    };
    Ok(CharacterizationRow {
        count: tail.len(),
        mean_loss: mean_of(tail.iter().map(|r| r.loss_fraction)).unwrap_or(0.0),
        mean_ci: mean_of(tail.iter().filter_map(|r| r.exposure.carbon_intensity)),
        mean_cqs: mean_of(tail.iter().filter_map(|r| r.exposure.cqs.map(f64::from))),
        mean_duration: mean_of(tail.iter().filter_map(|r| r.exposure.duration)),
        mean_volatility: mean_of(tail.iter().filter_map(|r| r.exposure.volatility)),
        top_segments: modes(
            tail.iter()
                .filter_map(|r| r.exposure.segment)
                .filter(|s| s.is_nace_bucket())
                .map(|s| s.label().to_string()),
        ),
        top_countries: modes(tail.iter().filter_map(|r| r.exposure.country.clone())),
        top_styles: modes(
            tail.iter()
                .filter_map(|r| r.exposure.style.map(|s| s.to_string())),
        ),
    })
}

/// Equal-weighted profile of a tail of funds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundTailRow {
    pub count: usize,
    pub mean_loss: f64,
    pub mean_weighted_ci: Option<f64>,
    pub mean_cprs_share: Option<f64>,
    pub mean_class_weights: BTreeMap<AssetClass, f64>,
    pub fund_ids: Vec<String>,
}

pub fn characterize_funds(
    funds: &[&FundResult],
    fraction: f64,
    direction: Direction,
) -> Result<FundTailRow> {
    if funds.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut ranked = funds.to_vec();
    ranked.sort_by(|a, b| {
        a.loss_fraction
            .total_cmp(&b.loss_fraction)
            .then_with(|| a.fund_id.cmp(&b.fund_id))
    });
    let k = tail_count(ranked.len(), fraction);
    let tail = match direction {
        Direction::Worst => &ranked[..k],
        Direction::Best => &ranked[ranked.len() - k..],
    };
    let mut weights: BTreeMap<AssetClass, f64> = BTreeMap::new();
    for f in tail {
        for (c, w) in &f.class_weights {
            *weights.entry(*c).or_default() += w / k as f64;
        }
    }
    Ok(FundTailRow {
        count: k,
        mean_loss: mean_of(tail.iter().map(|f| f.loss_fraction)).unwrap_or(0.0),
        mean_weighted_ci: mean_of(tail.iter().filter_map(|f| f.weighted_ci)),
        mean_cprs_share: mean_of(tail.iter().filter_map(|f| f.cprs_share)),
        mean_class_weights: weights,
        fund_ids: tail.iter().map(|f| f.fund_id.clone()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Fixed-width histogram over `[lo, hi]`. Values outside the range are counted
/// in the edge bins, so the counts always add up to `values.len()`.
pub fn histogram(values: &[f64], lo: f64, hi: f64, width: f64) -> Result<Vec<Bin>> {
    if !(width > 0.0 && hi > lo) {
        return Err(Error::Domain(format!(
            "histogram needs hi > lo and a positive width, got [{lo}, {hi}] by {width}"
        )));
    }
    let nbins = (((hi - lo) / width).round() as usize).max(1);
    let mut bins: Vec<Bin> = (0..nbins)
        .map(|i| Bin {
            lower: lo + i as f64 * width,
            upper: if i + 1 == nbins {
                hi
            } else {
                lo + (i + 1) as f64 * width
            },
            count: 0,
        })
        .collect();
    for v in values {
        let idx = ((v - lo) / width).floor();
        let idx = if idx.is_nan() || idx < 0.0 {
            0
        } else {
            (idx as usize).min(nbins - 1)
        };
        bins[idx].count += 1;
    }
    Ok(bins)
}
