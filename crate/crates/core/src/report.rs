//! Sector reports: the machine-readable JSON document, the CSV tables and
//! histogram files derived from it, and the per-position / per-fund result
//! files that link an assessment run to later report runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::aggregate::{
    self, Bin, CharacterizationRow, Direction, DistributionStats, FundResult, FundTailRow,
    Greenness, SectorSummary,
};
use crate::error::{Error, Result};
use crate::model::{
    AssetClass, CiSource, Diagnostics, Exposure, InvestmentStyle, Multipliers, PositionResult,
    Scenario, SegmentCode,
};
use crate::risk::ClassAverages;

/// Percent with two decimals, the precision of every printed table.
pub fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

fn pct_opt(x: Option<f64>) -> String {
    x.map(pct).unwrap_or_else(|| "-".into())
}

fn num_opt(x: Option<f64>, decimals: usize) -> String {
    x.map(|v| format!("{v:.decimals$}"))
        .unwrap_or_else(|| "-".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    /// Bounds and width in percent.
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            lower: -25.0,
            upper: 0.0,
            width: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Restrict fund-level statistics to funds with this label.
    pub subset: Option<String>,
    /// Multiplies the sector EUR loss, e.g. to extrapolate to a larger market.
    pub scaling_factor: Option<f64>,
    pub fund_histogram: HistogramSpec,
    pub instrument_histogram: Option<HistogramSpec>,
}

/// One row of the instrument characterisation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentRow {
    pub asset_class: AssetClass,
    pub selection: String,
    #[serde(flatten)]
    pub row: CharacterizationRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundTail {
    pub selection: String,
    #[serde(flatten)]
    pub row: FundTailRow,
}

/// Aggregate of one fund group, with the loss the whole sector would have had
/// under the group's class allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    #[serde(flatten)]
    pub summary: SectorSummary,
    pub counterfactual_loss: Option<f64>,
}

/// Counts of positions with each backfill flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticCounts {
    pub positions: usize,
    pub ci_from_parent: usize,
    pub ci_missing: usize,
    pub vol_backfilled: usize,
    pub cqs_backfilled: usize,
    pub duration_backfilled: usize,
    pub coupon_backfilled: usize,
    pub nonpositive_ci: usize,
    pub segment_fallback: usize,
    pub unclassified: usize,
    pub worst_of_ratings: usize,
    pub zero_aum_funds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub scenario: String,
    /// The run configuration, echoed for reproducibility.
    pub config: serde_json::Value,
    pub subset: Option<String>,
    pub summary: SectorSummary,
    pub scaled_loss_eur: Option<f64>,
    pub fund_distribution: Option<DistributionStats>,
    pub fund_tails: Vec<FundTail>,
    pub class_averages: ClassAverages,
    pub instrument_distributions: BTreeMap<AssetClass, DistributionStats>,
    pub instruments: Vec<InstrumentRow>,
    pub groups: Vec<GroupRow>,
    pub diagnostics: DiagnosticCounts,
    pub warnings: Vec<String>,
    pub notices: Vec<String>,
}

const CHARACTERIZED: [AssetClass; 4] = [
    AssetClass::Equity,
    AssetClass::CorporateBond,
    AssetClass::SovereignBond,
    AssetClass::FundVehicle,
];

fn diagnostic_counts(results: &[PositionResult], funds: &[FundResult]) -> DiagnosticCounts {
    let mut c = DiagnosticCounts {
        positions: results.len(),
        zero_aum_funds: funds.iter().filter(|f| f.zero_aum).count(),
        ..DiagnosticCounts::default()
    };
    for r in results {
        let d = &r.diagnostics;
        let risky = !r.asset_class.is_riskless();
        c.ci_from_parent += usize::from(matches!(
            d.ci_source,
            CiSource::Parent | CiSource::UltimateParent
        ));
        c.ci_missing += usize::from(risky && d.ci_source == CiSource::Missing);
        c.vol_backfilled += usize::from(d.vol_backfilled);
        c.cqs_backfilled += usize::from(d.cqs_backfilled);
        c.duration_backfilled += usize::from(d.duration_backfilled);
        c.coupon_backfilled += usize::from(d.coupon_backfilled);
        c.nonpositive_ci += usize::from(d.nonpositive_ci);
        c.segment_fallback += usize::from(d.segment_fallback);
        c.unclassified += usize::from(d.unclassified);
        c.worst_of_ratings += usize::from(d.worst_of_ratings);
    }
    c
}

/// Builds the sector report from position and fund results.
pub fn build_report(
    scenario: &Scenario,
    results: &[PositionResult],
    funds: &[FundResult],
    class_averages: ClassAverages,
    config: serde_json::Value,
    warnings: Vec<String>,
    options: &ReportOptions,
) -> Result<SectorReport> {
    let mut notices = Vec::new();
    let all: Vec<&FundResult> = funds.iter().collect();
    let summary = aggregate::summarize(&all, results, scenario)?;

    let selected = aggregate::select_funds(funds, options.subset.as_deref());
    if let (Some(label), true) = (&options.subset, selected.is_empty()) {
        notices.push(format!("no fund carries the label {label:?}"));
    }
    let fund_distribution = aggregate::sector_distribution(&selected).ok();
    let mut fund_tails = Vec::new();
    if !selected.is_empty() {
        for (name, fraction, dir) in [
            ("worst 1%", 0.01, Direction::Worst),
            ("worst 5%", 0.05, Direction::Worst),
            ("best 1%", 0.01, Direction::Best),
        ] {
            fund_tails.push(FundTail {
                selection: name.into(),
                row: aggregate::characterize_funds(&selected, fraction, dir)?,
            });
        }
    }

    let mut instrument_distributions = BTreeMap::new();
    let mut instruments = Vec::new();
    for class in CHARACTERIZED {
        let unique = aggregate::unique_instruments(results, class);
        if unique.is_empty() {
            continue;
        }
        let losses: Vec<f64> = unique.iter().map(|r| r.loss_fraction).collect();
        instrument_distributions.insert(class, aggregate::distribution(&losses)?);
        for (name, fraction, dir) in [
            ("all", 1.0, Direction::Worst),
            ("worst 1%", 0.01, Direction::Worst),
            ("best 1%", 0.01, Direction::Best),
        ] {
            instruments.push(InstrumentRow {
                asset_class: class,
                selection: name.into(),
                row: aggregate::characterize_tail(&unique, fraction, dir)?,
            });
        }
    }

    let labels: BTreeSet<&str> = funds
        .iter()
        .flat_map(|f| f.labels.iter().map(String::as_str))
        .collect();
    let mut groups = vec![GroupRow {
        group: "all".into(),
        summary: summary.clone(),
        counterfactual_loss: if summary.class_weights.is_empty() {
            None
        } else {
            Some(aggregate::counterfactual_loss(
                &summary.class_losses,
                &summary.class_weights,
            )?)
        },
    }];
    for label in labels {
        let members = aggregate::select_funds(funds, Some(label));
        let s = aggregate::summarize(&members, results, scenario)?;
        let counterfactual = if s.class_weights.is_empty() {
            None
        } else {
            Some(aggregate::counterfactual_loss(
                &summary.class_losses,
                &s.class_weights,
            )?)
        };
        groups.push(GroupRow {
            group: label.to_string(),
            summary: s,
            counterfactual_loss: counterfactual,
        });
    }

    Ok(SectorReport {
        scenario: scenario.name.clone(),
        config,
        subset: options.subset.clone(),
        scaled_loss_eur: options.scaling_factor.map(|k| k * summary.loss_fraction),
        summary,
        fund_distribution,
        fund_tails,
        class_averages,
        instrument_distributions,
        instruments,
        groups,
        diagnostics: diagnostic_counts(results, funds),
        warnings,
        notices,
    })
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Domain(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Domain(e.to_string()))
}

fn join_modes(modes: &[(String, usize)]) -> String {
    modes
        .iter()
        .map(|(k, n)| format!("{k} ({n})"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Worst and best instruments by asset class.
pub fn instrument_table_csv(report: &SectorReport) -> Result<String> {
    let rows = report
        .instruments
        .iter()
        .map(|r| {
            vec![
                r.asset_class.to_string(),
                r.selection.clone(),
                r.row.count.to_string(),
                pct(r.row.mean_loss),
                num_opt(r.row.mean_ci, 1),
                num_opt(r.row.mean_cqs, 2),
                num_opt(r.row.mean_duration, 2),
                num_opt(r.row.mean_volatility, 1),
                join_modes(&r.row.top_segments),
                join_modes(&r.row.top_countries),
                join_modes(&r.row.top_styles),
            ]
        })
        .collect();
    csv_string(
        &[
            "asset_class",
            "selection",
            "count",
            "mtm_loss_pct",
            "carbon_intensity",
            "cqs",
            "duration",
            "volatility_pct",
            "top_segments",
            "top_countries",
            "top_styles",
        ],
        rows,
    )
}

const TABLE_CLASSES: [AssetClass; 5] = [
    AssetClass::Equity,
    AssetClass::CorporateBond,
    AssetClass::SovereignBond,
    AssetClass::FundVehicle,
    AssetClass::Cash,
];

/// Allocation, class losses and counterfactual loss per fund group.
pub fn group_table_csv(report: &SectorReport) -> Result<String> {
    let mut header = vec![
        "group".to_string(),
        "funds".into(),
        "aum".into(),
        "mtm_loss_pct".into(),
    ];
    for c in TABLE_CLASSES {
        header.push(format!("weight_{c}_pct"));
    }
    for c in TABLE_CLASSES {
        header.push(format!("loss_{c}_pct"));
    }
    header.extend([
        "sector_loss_at_group_weights_pct".into(),
        "weighted_ci".into(),
        "cprs_share_pct".into(),
    ]);
    let rows = report
        .groups
        .iter()
        .map(|g| {
            let s = &g.summary;
            let mut row = vec![
                g.group.clone(),
                s.fund_count.to_string(),
                format!("{:.2}", s.aum),
                pct(s.loss_fraction),
            ];
            for c in TABLE_CLASSES {
                row.push(pct(s.class_weights.get(&c).copied().unwrap_or(0.0)));
            }
            for c in TABLE_CLASSES {
                row.push(pct_opt(s.class_losses.get(&c).copied()));
            }
            row.push(pct_opt(g.counterfactual_loss));
            row.push(num_opt(s.weighted_ci, 1));
            row.push(pct_opt(s.cprs_share));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_string(&header, rows)
}

/// TEC/TAC per fund group.
pub fn greenness_table_csv(report: &SectorReport) -> Result<String> {
    let rows = report
        .groups
        .iter()
        .filter_map(|g| g.summary.greenness.map(|gr| (g, gr)))
        .map(|(g, gr): (&GroupRow, Greenness)| {
            vec![
                g.group.clone(),
                pct(gr.tac),
                pct(gr.tec),
                pct(gr.eligible_share),
                pct_opt(gr.adj_tac),
                pct_opt(gr.adj_tec),
            ]
        })
        .collect();
    csv_string(
        &[
            "group",
            "tac_pct",
            "tec_pct",
            "eligible_pct",
            "adj_tac_pct",
            "adj_tec_pct",
        ],
        rows,
    )
}

fn stats_row(name: String, s: &DistributionStats) -> Vec<String> {
    vec![
        name,
        s.count.to_string(),
        pct(s.mean),
        pct(s.median),
        num_opt(s.skewness, 2),
        pct(s.p1),
        pct(s.p5),
        pct(s.p10),
        pct(s.p50),
        pct(s.worst_1),
        pct(s.worst_5),
        pct(s.best_1),
        pct(s.best_5),
    ]
}

/// Distribution statistics of fund losses and of each instrument class.
pub fn distribution_table_csv(report: &SectorReport) -> Result<String> {
    let mut rows = Vec::new();
    if let Some(s) = &report.fund_distribution {
        let name = match &report.subset {
            Some(l) => format!("funds ({l})"),
            None => "funds".into(),
        };
        rows.push(stats_row(name, s));
    }
    for (class, s) in &report.instrument_distributions {
        rows.push(stats_row(class.to_string(), s));
    }
    csv_string(
        &[
            "population",
            "count",
            "mean_pct",
            "median_pct",
            "skewness",
            "p1_pct",
            "p5_pct",
            "p10_pct",
            "p50_pct",
            "worst_1_pct",
            "worst_5_pct",
            "best_1_pct",
            "best_5_pct",
        ],
        rows,
    )
}

pub fn histogram_csv(bins: &[Bin]) -> Result<String> {
    let rows = bins
        .iter()
        .map(|b| {
            vec![
                format!("{:.2}", b.lower),
                format!("{:.2}", b.upper),
                b.count.to_string(),
            ]
        })
        .collect();
    csv_string(&["lower_pct", "upper_pct", "count"], rows)
}

/// Histogram of loss fractions, binned in percent.
pub fn loss_histogram(losses: &[f64], spec: HistogramSpec) -> Result<Vec<Bin>> {
    let pcts: Vec<f64> = losses.iter().map(|l| l * 100.0).collect();
    aggregate::histogram(&pcts, spec.lower, spec.upper, spec.width)
}

/// Plain-text summary for the terminal.
pub fn render_text(report: &SectorReport) -> String {
    let mut out = String::new();
    let s = &report.summary;
    let _ = writeln!(out, "Scenario: {}", report.scenario);
    let _ = writeln!(
        out,
        "Funds: {}  AuM: {:.2}  MtM loss: {}% ({:.2})",
        s.fund_count,
        s.aum,
        pct(s.loss_fraction),
        s.loss_eur
    );
    if let Some(x) = report.scaled_loss_eur {
        let _ = writeln!(out, "Scaled loss: {x:.2}");
    }
    let _ = writeln!(
        out,
        "Weighted carbon intensity: {} (coverage {}%)",
        num_opt(s.weighted_ci, 1),
        pct(s.ci_coverage)
    );
    let a = report.class_averages;
    let _ = writeln!(
        out,
        "Class averages: equity {}%  corporate {}%  sovereign {}%",
        pct(a.equity),
        pct(a.corporate),
        pct(a.sovereign)
    );
    if let Some(d) = &report.fund_distribution {
        let who = report.subset.as_deref().unwrap_or("all funds");
        let _ = writeln!(
            out,
            "Fund losses ({who}, n={}): mean {}%  median {}%  skew {}  worst 1% {}%  worst 5% {}%",
            d.count,
            pct(d.mean),
            pct(d.median),
            num_opt(d.skewness, 2),
            pct(d.worst_1),
            pct(d.worst_5)
        );
    }
    if !report.instruments.is_empty() {
        let _ = writeln!(
            out,
            "\n{:<16} {:<9} {:>6} {:>9} {:>9} {:>5} {:>6} {:>6}",
            "class", "selection", "n", "loss %", "CI", "CQS", "dur", "vol"
        );
        for r in &report.instruments {
            let _ = writeln!(
                out,
                "{:<16} {:<9} {:>6} {:>9} {:>9} {:>5} {:>6} {:>6}",
                r.asset_class.as_str(),
                r.selection,
                r.row.count,
                pct(r.row.mean_loss),
                num_opt(r.row.mean_ci, 1),
                num_opt(r.row.mean_cqs, 2),
                num_opt(r.row.mean_duration, 2),
                num_opt(r.row.mean_volatility, 1)
            );
        }
    }
    for g in &report.groups {
        let _ = writeln!(
            out,
            "\nGroup {}: {} funds, loss {}%, sector at group weights {}%",
            g.group,
            g.summary.fund_count,
            pct(g.summary.loss_fraction),
            pct_opt(g.counterfactual_loss)
        );
        if let Some(gr) = g.summary.greenness {
            let _ = writeln!(
                out,
                "  TAC {}%  TEC {}%  eligible {}%  adj TAC {}%  adj TEC {}%",
                pct(gr.tac),
                pct(gr.tec),
                pct(gr.eligible_share),
                pct_opt(gr.adj_tac),
                pct_opt(gr.adj_tec)
            );
        }
    }
    for n in &report.notices {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

// ---------------------------------------------------------------------------
// Result files

#[derive(Debug, Serialize, Deserialize)]
struct PositionRow {
    fund_id: String,
    isin: String,
    asset_class: AssetClass,
    market_value: f64,
    loss_fraction: f64,
    loss_eur: f64,
    ci_m: f64,
    vol_m: Option<f64>,
    cqs_m: Option<f64>,
    segment: Option<SegmentCode>,
    nace: Option<String>,
    country: Option<String>,
    carbon_intensity: Option<f64>,
    cqs: Option<u8>,
    duration: Option<f64>,
    convexity: Option<f64>,
    volatility: Option<f64>,
    style: Option<InvestmentStyle>,
    ci_source: CiSource,
    ci_backfilled: bool,
    vol_backfilled: bool,
    cqs_backfilled: bool,
    duration_backfilled: bool,
    coupon_backfilled: bool,
    nonpositive_ci: bool,
    segment_fallback: bool,
    unclassified: bool,
    worst_of_ratings: bool,
}

impl From<&PositionResult> for PositionRow {
    fn from(r: &PositionResult) -> Self {
        let (e, d) = (&r.exposure, &r.diagnostics);
        PositionRow {
            fund_id: r.fund_id.clone(),
            isin: r.isin.clone(),
            asset_class: r.asset_class,
            market_value: r.market_value,
            loss_fraction: r.loss_fraction,
            loss_eur: r.loss_eur,
            ci_m: r.multipliers.ci,
            vol_m: r.multipliers.vol,
            cqs_m: r.multipliers.cqs,
            segment: e.segment,
            nace: e.nace.clone(),
            country: e.country.clone(),
            carbon_intensity: e.carbon_intensity,
            cqs: e.cqs,
            duration: e.duration,
            convexity: e.convexity,
            volatility: e.volatility,
            style: e.style,
            ci_source: d.ci_source,
            ci_backfilled: d.ci_backfilled,
            vol_backfilled: d.vol_backfilled,
            cqs_backfilled: d.cqs_backfilled,
            duration_backfilled: d.duration_backfilled,
            coupon_backfilled: d.coupon_backfilled,
            nonpositive_ci: d.nonpositive_ci,
            segment_fallback: d.segment_fallback,
            unclassified: d.unclassified,
            worst_of_ratings: d.worst_of_ratings,
        }
    }
}

impl From<PositionRow> for PositionResult {
    fn from(r: PositionRow) -> Self {
        PositionResult {
            fund_id: r.fund_id,
            isin: r.isin,
            asset_class: r.asset_class,
            market_value: r.market_value,
            loss_fraction: r.loss_fraction,
            loss_eur: r.loss_eur,
            multipliers: Multipliers {
                ci: r.ci_m,
                vol: r.vol_m,
                cqs: r.cqs_m,
            },
            exposure: Exposure {
                segment: r.segment,
                nace: r.nace,
                country: r.country,
                carbon_intensity: r.carbon_intensity,
                cqs: r.cqs,
                duration: r.duration,
                convexity: r.convexity,
                volatility: r.volatility,
                style: r.style,
            },
            diagnostics: Diagnostics {
                ci_source: r.ci_source,
                ci_backfilled: r.ci_backfilled,
                vol_backfilled: r.vol_backfilled,
                cqs_backfilled: r.cqs_backfilled,
                duration_backfilled: r.duration_backfilled,
                coupon_backfilled: r.coupon_backfilled,
                nonpositive_ci: r.nonpositive_ci,
                segment_fallback: r.segment_fallback,
                unclassified: r.unclassified,
                worst_of_ratings: r.worst_of_ratings,
            },
        }
    }
}

pub fn write_position_results<W: Write>(w: W, results: &[PositionResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        out.serialize(PositionRow::from(r))?;
    }
    out.flush().map_err(|e| Error::io("position results", e))?;
    Ok(())
}

pub fn read_position_results(r: impl Read, file: &str) -> Result<Vec<PositionResult>> {
    csv::Reader::from_reader(r)
        .deserialize::<PositionRow>()
        .map(|row| {
            row.map(PositionResult::from)
                .map_err(|e| Error::schema(file, e.to_string()))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct FundRow {
    fund_id: String,
    labels: String,
    aum: f64,
    loss_fraction: f64,
    loss_eur: f64,
    weighted_ci: Option<f64>,
    ci_coverage: f64,
    cprs_share: Option<f64>,
    tec: Option<f64>,
    tac: Option<f64>,
    eligible_share: Option<f64>,
    adj_tec: Option<f64>,
    adj_tac: Option<f64>,
    zero_aum: bool,
    /// `class=weight` pairs.
    class_weights: String,
    /// `class=loss` pairs.
    class_losses: String,
}

fn encode_map(m: &BTreeMap<AssetClass, f64>) -> String {
    m.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn decode_map(s: &str, file: &str) -> Result<BTreeMap<AssetClass, f64>> {
    s.split(';')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::schema(file, format!("bad class entry {p:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::schema(file, format!("bad number in {p:?}")))?;
            Ok((k.parse()?, v))
        })
        .collect()
}

pub fn write_fund_results<W: Write>(w: W, funds: &[FundResult]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for f in funds {
        let g = f.greenness;
        out.serialize(FundRow {
            fund_id: f.fund_id.clone(),
            labels: f.labels.join(";"),
            aum: f.aum,
            loss_fraction: f.loss_fraction,
            loss_eur: f.loss_eur,
            weighted_ci: f.weighted_ci,
            ci_coverage: f.ci_coverage,
            cprs_share: f.cprs_share,
            tec: g.map(|g| g.tec),
            tac: g.map(|g| g.tac),
            eligible_share: g.map(|g| g.eligible_share),
            adj_tec: g.and_then(|g| g.adj_tec),
            adj_tac: g.and_then(|g| g.adj_tac),
            zero_aum: f.zero_aum,
            class_weights: encode_map(&f.class_weights),
            class_losses: encode_map(&f.class_losses),
        })?;
    }
    out.flush().map_err(|e| Error::io("fund results", e))?;
    Ok(())
}

pub fn read_fund_results(r: impl Read, file: &str) -> Result<Vec<FundResult>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize::<FundRow>() {
        let row = row.map_err(|e| Error::schema(file, e.to_string()))?;
        let greenness = match (row.tec, row.tac, row.eligible_share) {
            (Some(tec), Some(tac), Some(eligible_share)) => Some(Greenness {
                tec,
                tac,
                eligible_share,
                adj_tec: row.adj_tec,
                adj_tac: row.adj_tac,
            }),
            _ => None,
        };
        out.push(FundResult {
            fund_id: row.fund_id,
            labels: row
                .labels
                .split(';')
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
            aum: row.aum,
            loss_fraction: row.loss_fraction,
            loss_eur: row.loss_eur,
            weighted_ci: row.weighted_ci,
            ci_coverage: row.ci_coverage,
            class_weights: decode_map(&row.class_weights, file)?,
            class_losses: decode_map(&row.class_losses, file)?,
            cprs_share: row.cprs_share,
            greenness,
            zero_aum: row.zero_aum,
        });
    }
    Ok(out)
}
