//! Per-segment lognormal calibration of carbon intensity, probability-plot
//! goodness of fit, and the segment means used as multiplier denominators.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::ingest;
use crate::model::{AssetClass, SectorCalibration, SegmentCode, Universe};
use crate::risk;

pub const DEFAULT_CALIBRATION_CSV: &str = include_str!("../data/default_calibration.csv");

fn std_normal() -> Normal {
    Normal::standard()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Standard normal quantile function.
pub fn norm_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Method-of-moments lognormal fit: returns `(mu, sigma)` of the underlying
/// normal for a distribution with the given mean and variance.
pub fn fit_lognormal(mean: f64, variance: f64) -> Result<(f64, f64)> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::Domain(format!(
            "lognormal mean must be positive, got {mean}"
        )));
    }
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(Error::Domain(format!(
            "lognormal variance must be non-negative, got {variance}"
        )));
    }
    // ln(1 + v/m^2) is sigma^2; written with ln_1p so tiny variances keep precision.
    let s2 = (variance / (mean * mean)).ln_1p();
    Ok((mean.ln() - 0.5 * s2, s2.sqrt()))
}

/// Mean and variance of a lognormal with log-parameters `(mu, sigma)`.
pub fn lognormal_moments(mu: f64, sigma: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let mean = (mu + 0.5 * s2).exp();
    (mean, s2.exp_m1() * mean * mean)
}

/// Carbon intensities of the unique counterparties of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub segment: SegmentCode,
    pub values: Vec<f64>,
}

/// Samples grouped by segment, with the count of counterparties whose intensity
/// was zero or negative and therefore left out.
#[derive(Debug, Clone, Default)]
pub struct SampleCollection {
    pub samples: BTreeMap<SegmentCode, SampleSet>,
    pub excluded_nonpositive: usize,
}

/// Groups counterparties with their own carbon intensity by segment. Only own
/// data counts: parent-backfilled values would duplicate the parent.
pub fn collect_samples(universe: &Universe) -> SampleCollection {
    let mut out = SampleCollection::default();
    for cp in universe.counterparties.values() {
        let (Some(ci), Some(segment)) = (cp.carbon_intensity, cp.segment()) else {
            continue;
        };
        if !(ci > 0.0) {
            out.excluded_nonpositive += 1;
            continue;
        }
        out.samples
            .entry(segment)
            .or_insert_with(|| SampleSet {
                segment,
                values: Vec::new(),
            })
            .values
            .push(ci);
    }
    out
}

/// Filliben order-statistic medians for a sample of size `n`.
pub fn filliben_medians(n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0.5];
    }
    let nf = n as f64;
    let last = 0.5f64.powf(1.0 / nf);
    (1..=n)
        .map(|i| {
            if i == 1 {
                1.0 - last
            } else if i == n {
                last
            } else {
                (i as f64 - 0.3175) / (nf + 0.365)
            }
        })
        .collect()
}

/// Squared probability-plot correlation between sorted log values and normal
/// quantiles at the Filliben medians.
pub fn filliben_r2(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Domain(format!(
            "probability plot needs positive values, got {v}"
        )));
    }
    let mut logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    logs.sort_by(f64::total_cmp);
    let theo: Vec<f64> = filliben_medians(n).into_iter().map(norm_quantile).collect();
    let r = pearson(&logs, &theo)
        .ok_or_else(|| Error::Domain("probability plot of a constant sample".into()))?;
    Ok((r * r).clamp(0.0, 1.0))
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Fits one segment. `r2` is 1 by convention when the sample is too small or
/// constant for a probability plot.
pub fn calibrate_segment(samples: &SampleSet) -> Result<SectorCalibration> {
    let n = samples.values.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if let Some(v) = samples
        .values
        .iter()
        .find(|v| !(v.is_finite() && **v > 0.0))
    {
        return Err(Error::Domain(format!(
            "{}: carbon intensity samples must be positive, got {v}",
            samples.segment
        )));
    }
    let nf = n as f64;
    let mean = samples.values.iter().sum::<f64>() / nf;
    // Population (1/n) variance, so a single firm is a point mass.
    let var = samples
        .values
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / nf;
    let (ln_mean, ln_std) = fit_lognormal(mean, var)?;
    let r2 = match filliben_r2(&samples.values) {
        Ok(r2) => r2,
        Err(Error::InsufficientData { .. }) | Err(Error::Domain(_)) => 1.0,
        Err(e) => return Err(e),
    };
    Ok(SectorCalibration {
        segment: samples.segment,
        n,
        mean,
        std: var.sqrt(),
        ln_mean,
        ln_std,
        r2,
        mean_volatility: None,
        mean_cqs: None,
        mean_duration: None,
    })
}

/// Fits every segment of a collection in parallel.
pub fn calibrate_all(samples: &SampleCollection) -> Result<Vec<SectorCalibration>> {
    let sets: Vec<&SampleSet> = samples.samples.values().collect();
    sets.into_par_iter().map(calibrate_segment).collect()
}

/// Position of `ci` in the fitted lognormal of a segment.
pub fn quantile_of(ci: f64, cal: &SectorCalibration) -> Result<f64> {
    if !(ci.is_finite() && ci > 0.0) {
        return Err(Error::Domain(format!(
            "quantile needs a positive carbon intensity, got {ci}"
        )));
    }
    let x = ci.ln();
    if cal.ln_std == 0.0 {
        let tol = 1e-12 * cal.ln_mean.abs().max(1.0);
        return Ok(if (x - cal.ln_mean).abs() <= tol {
            0.5
        } else if x < cal.ln_mean {
            0.0
        } else {
            1.0
        });
    }
    Ok(norm_cdf((x - cal.ln_mean) / cal.ln_std))
}

/// How a carbon intensity is turned into a within-segment quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileMode {
    #[default]
    Parametric,
    Empirical,
}

/// Sorted per-segment samples for empirical-CDF quantiles.
#[derive(Debug, Clone, Default)]
pub struct EmpiricalCdf {
    sorted: BTreeMap<SegmentCode, Vec<f64>>,
}

impl EmpiricalCdf {
    pub fn from_samples(samples: &SampleCollection) -> Self {
        let sorted = samples
            .samples
            .iter()
            .map(|(seg, set)| {
                let mut v = set.values.clone();
                v.sort_by(f64::total_cmp);
                (*seg, v)
            })
            .collect();
        EmpiricalCdf { sorted }
    }

    /// Mid-rank empirical quantile; `None` when the segment has no samples.
    pub fn quantile(&self, segment: SegmentCode, ci: f64) -> Option<f64> {
        let v = self.sorted.get(&segment).filter(|v| !v.is_empty())?;
        let below = v.partition_point(|x| *x < ci);
        let at_or_below = v.partition_point(|x| *x <= ci);
        let ties = (at_or_below - below) as f64;
        Some((below as f64 + 0.5 * ties) / v.len() as f64)
    }
}

/// Calibrations for every segment. Lookups for a missing segment fall back to
/// `Other`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet(pub BTreeMap<SegmentCode, SectorCalibration>);

impl CalibrationSet {
    pub fn get(&self, segment: SegmentCode) -> Option<&SectorCalibration> {
        self.0
            .get(&segment)
            .or_else(|| self.0.get(&SegmentCode::Other))
    }

    /// Replaces the entries present in `overrides`, keeping every other segment.
    /// Means an override leaves empty are kept from the current entry.
    pub fn overlay(&mut self, overrides: impl IntoIterator<Item = SectorCalibration>) {
        for mut cal in overrides {
            if let Some(old) = self.0.get(&cal.segment) {
                cal.mean_volatility = cal.mean_volatility.or(old.mean_volatility);
                cal.mean_cqs = cal.mean_cqs.or(old.mean_cqs);
                cal.mean_duration = cal.mean_duration.or(old.mean_duration);
            }
            self.0.insert(cal.segment, cal);
        }
    }

    /// Replaces the means with those observed in a run; segments with no
    /// observation keep their current values.
    pub fn apply_averages(&mut self, averages: &SegmentAverages) {
        for (seg, avg) in &averages.0 {
            if let Some(cal) = self.0.get_mut(seg) {
                if avg.mean_volatility.is_some() {
                    cal.mean_volatility = avg.mean_volatility;
                }
                if avg.mean_cqs.is_some() {
                    cal.mean_cqs = avg.mean_cqs;
                }
                if avg.mean_duration.is_some() {
                    cal.mean_duration = avg.mean_duration;
                }
            }
        }
    }
}

/// The shipped calibration: carbon-intensity moments, fit quality and firm
/// counts per segment, with the reference volatility, CQS and spread-duration
/// means.
pub fn default_calibration() -> CalibrationSet {
    let rows = parse_calibration(DEFAULT_CALIBRATION_CSV.as_bytes(), "default calibration")
        .expect("default calibration parses");
    CalibrationSet(rows.into_iter().map(|c| (c.segment, c)).collect())
}

pub fn parse_calibration(reader: impl Read, file: &str) -> Result<Vec<SectorCalibration>> {
    #[derive(Deserialize)]
    struct Row {
        segment: String,
        n: usize,
        mean: f64,
        std: f64,
        ln_mean: Option<f64>,
        ln_std: Option<f64>,
        r2: Option<f64>,
        mean_volatility: Option<f64>,
        mean_cqs: Option<f64>,
        mean_duration: Option<f64>,
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| Error::schema(file, e.to_string()))?;
        let segment = SegmentCode::resolve(&row.segment);
        let (ln_mean, ln_std) = match (row.ln_mean, row.ln_std) {
            (Some(m), Some(s)) => (m, s),
            _ => fit_lognormal(row.mean, row.std * row.std)
                .map_err(|e| Error::schema(file, format!("row {}: {e}", i + 1)))?,
        };
        if ln_std < 0.0 {
            return Err(Error::schema(
                file,
                format!("row {}: negative ln_std", i + 1),
            ));
        }
        out.push(SectorCalibration {
            segment,
            n: row.n,
            mean: row.mean,
            std: row.std,
            ln_mean,
            ln_std,
            r2: row.r2.unwrap_or(1.0),
            mean_volatility: row.mean_volatility,
            mean_cqs: row.mean_cqs,
            mean_duration: row.mean_duration,
        });
    }
    Ok(out)
}

pub fn read_calibration(path: &Path) -> Result<Vec<SectorCalibration>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_calibration(f, &path.display().to_string())
}

pub fn write_calibration<'a, W: Write>(
    w: W,
    rows: impl IntoIterator<Item = &'a SectorCalibration>,
) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "segment",
        "n",
        "mean",
        "std",
        "ln_mean",
        "ln_std",
        "r2",
        "mean_volatility",
        "mean_cqs",
        "mean_duration",
    ])?;
    for c in rows {
        out.write_record([
            c.segment.label().to_string(),
            c.n.to_string(),
            c.mean.to_string(),
            c.std.to_string(),
            c.ln_mean.to_string(),
            c.ln_std.to_string(),
            c.r2.to_string(),
            opt(c.mean_volatility),
            opt(c.mean_cqs),
            opt(c.mean_duration),
        ])?;
    }
    out.flush().map_err(|e| Error::io("calibration", e))?;
    Ok(())
}

/// One instrument's contribution to the segment means.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentObs {
    pub segment: SegmentCode,
    pub asset_class: AssetClass,
    pub volatility: Option<f64>,
    pub cqs: Option<u8>,
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub mean_volatility: Option<f64>,
    pub mean_cqs: Option<f64>,
    pub mean_duration: Option<f64>,
}

/// Per-segment means; the `SOV` entry carries the sovereign-wide CQS mean.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentAverages(pub BTreeMap<SegmentCode, Averages>);

/// Arithmetic means over unique instruments with data: volatility over equities,
/// CQS and duration over corporate and sovereign bonds.
pub fn segment_averages(obs: &[InstrumentObs]) -> SegmentAverages {
    #[derive(Default)]
    struct Acc {
        vol: (f64, usize),
        cqs: (f64, usize),
        dur: (f64, usize),
    }
    fn add(slot: &mut (f64, usize), v: f64) {
        slot.0 += v;
        slot.1 += 1;
    }
    fn mean(slot: (f64, usize)) -> Option<f64> {
        (slot.1 > 0).then(|| slot.0 / slot.1 as f64)
    }
    let mut acc: BTreeMap<SegmentCode, Acc> = BTreeMap::new();
    for o in obs {
        let a = acc.entry(o.segment).or_default();
        match o.asset_class {
            AssetClass::Equity => {
                if let Some(v) = o.volatility {
                    add(&mut a.vol, v);
                }
            }
            AssetClass::CorporateBond | AssetClass::SovereignBond => {
                if let Some(c) = o.cqs {
                    add(&mut a.cqs, f64::from(c));
                }
                if let Some(d) = o.duration {
                    add(&mut a.dur, d);
                }
            }
            _ => {}
        }
    }
    SegmentAverages(
        acc.into_iter()
            .map(|(seg, a)| {
                (
                    seg,
                    Averages {
                        mean_volatility: mean(a.vol),
                        mean_cqs: mean(a.cqs),
                        mean_duration: mean(a.dur),
                    },
                )
            })
            .collect(),
    )
}

/// One observation per held ISIN, with the segment resolved through the
/// counterparty backfill chain. Durations come only from stated maturities.
pub fn instrument_observations(universe: &Universe) -> Vec<InstrumentObs> {
    let classes = universe.isin_classes();
    let mut out = Vec::new();
    for (isin, class) in classes {
        let Some(inst) = universe.instruments.get(isin) else {
            continue;
        };
        let segment = match class {
            AssetClass::Equity | AssetClass::CorporateBond => universe
                .counterparties
                .get(&inst.counterparty_id)
                .and_then(|cp| ingest::resolve_nace(cp, &universe.counterparties))
                .map(|n| SegmentCode::resolve(&n))
                .unwrap_or(SegmentCode::Other),
            AssetClass::SovereignBond => SegmentCode::Sov,
            AssetClass::FundVehicle => SegmentCode::Fund,
            _ => continue,
        };
        let duration = inst
            .maturity_years
            .and_then(|t| risk::bond_sensitivities(t, inst.coupon.unwrap_or(0.0)).ok())
            .map(|s| s.duration);
        out.push(InstrumentObs {
            segment,
            asset_class: class,
            volatility: inst.volatility.filter(|v| *v > 0.0),
            cqs: inst.cqs.filter(|c| (1..=6).contains(c)),
            duration,
        });
    }
    out
}
