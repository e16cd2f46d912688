//! Seeded synthetic data: whole fund universes for end-to-end runs and
//! benchmarks, and counterparty samples with prescribed moments.
//!
//! Every generator is a pure function of its seed, so fixtures can be
//! regenerated instead of committed.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::calib::{default_calibration, CalibrationSet};
use crate::error::{Error, Result};
use crate::ingest::builtin;
use crate::model::{
    AssetClass, Counterparty, Fund, Instrument, InvestmentStyle, Position, SectorCalibration,
    SegmentCode, Universe,
};

/// Countries with no curve in the shipped scenario.
pub const UNLISTED_COUNTRIES: [&str; 4] = ["AU", "BR", "CA", "MX"];

/// Label attached to the funds marked as sustainable.
pub const SUSTAINABLE_LABEL: &str = "sustainable";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub funds: usize,
    /// Average number of positions per fund.
    pub positions_per_fund: usize,
    /// Probability that a fund carries the sustainable label.
    pub sustainable_share: f64,
    /// Probability that a counterparty or instrument field is left empty.
    pub missing_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            funds: 200,
            positions_per_fund: 40,
            sustainable_share: 0.15,
            missing_rate: 0.06,
        }
    }
}

/// A representative NACE class code inside a bucket.
fn nace_code(segment: SegmentCode, rng: &mut impl Rng) -> String {
    let divisions: &[u8] = match segment {
        SegmentCode::A01 => &[1],
        SegmentCode::A02A03 => &[2, 3],
        SegmentCode::B05B09 => &[5, 6, 7, 8, 9],
        SegmentCode::C10C12 => &[10, 11, 12],
        SegmentCode::C13C18 => &[13, 14, 15, 16, 17, 18],
        SegmentCode::C19 => &[19],
        SegmentCode::C20 => &[20],
        SegmentCode::C21C22 => &[21, 22],
        SegmentCode::C23 => &[23],
        SegmentCode::C24C25 => &[24, 25],
        SegmentCode::C26C28 => &[26, 27, 28],
        SegmentCode::C29C30 => &[29, 30],
        SegmentCode::C31C33 => &[31, 32, 33],
        SegmentCode::D35 => &[35],
        SegmentCode::E36E39 => &[36, 37, 38, 39],
        SegmentCode::F41F43 => &[41, 42, 43],
        SegmentCode::G45G47 => &[45, 46, 47],
        SegmentCode::H49 => &[49],
        SegmentCode::H50 => &[50],
        SegmentCode::H51 => &[51],
        SegmentCode::H52H53 => &[52, 53],
        SegmentCode::L68 => &[68],
        _ => &[58, 61, 62, 64, 66, 70, 86],
    };
    let d = *divisions.choose(rng).expect("non-empty");
    format!(
        "{d:02}.{}{}",
        rng.random_range(1..=4),
        rng.random_range(1..=4)
    )
}

fn draw_ci(cal: &SectorCalibration, rng: &mut impl Rng) -> f64 {
    LogNormal::new(cal.ln_mean, cal.ln_std.max(1e-9))
        .expect("valid lognormal")
        .sample(rng)
}

/// Draws a value, then drops it with probability `missing_rate`.
fn maybe<R: Rng, T>(rng: &mut R, missing_rate: f64, draw: impl FnOnce(&mut R) -> T) -> Option<T> {
    let value = draw(rng);
    (!rng.random_bool(missing_rate)).then_some(value)
}

fn isin(prefix: &str, i: usize) -> String {
    format!("{prefix}{i:09}{}", i % 10)
}

/// Picks a segment with probability proportional to its firm count.
fn segment_sampler(cal: &CalibrationSet) -> (Vec<SegmentCode>, Vec<f64>) {
    SegmentCode::NACE_BUCKETS
        .iter()
        .map(|s| (*s, cal.0.get(s).map(|c| c.n as f64).unwrap_or(1.0)))
        .unzip()
}

fn pick_weighted(items: &[SegmentCode], weights: &[f64], rng: &mut impl Rng) -> SegmentCode {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random_range(0.0..total);
    for (s, w) in items.iter().zip(weights) {
        if x < *w {
            return *s;
        }
        x -= w;
    }
    items[items.len() - 1]
}

/// Generates a universe of funds holding equities, corporate and sovereign
/// bonds, fund vehicles and cash, with carbon intensities drawn from the
/// default calibration and a sprinkling of missing data and parent links.
pub fn generate_universe(cfg: &SynthConfig) -> Universe {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cal = default_calibration();
    let total_positions = (cfg.funds * cfg.positions_per_fund).max(1);
    let n_instruments = (total_positions / 5).max(120);
    let (segments, seg_weights) = segment_sampler(&cal);
    let miss = cfg.missing_rate;

    let mut counterparties = Vec::new();
    let mut instruments = Vec::new();

    // Corporate issuers; parents always precede children, so links are acyclic.
    let n_corp = (n_instruments * 2 / 5).max(40);
    for i in 0..n_corp {
        let segment = pick_weighted(&segments, &seg_weights, &mut rng);
        let id = format!("CP{i:06}");
        let ci = draw_ci(&cal.0[&segment], &mut rng);
        let parent = (i > 10 && rng.random_bool(0.1)).then(|| rng.random_range(0..i));
        counterparties.push(Counterparty {
            id: id.clone(),
            name: format!("Issuer {i}"),
            carbon_intensity: maybe(&mut rng, miss, |_| ci),
            nace: maybe(&mut rng, miss / 2.0, |r| nace_code(segment, r)),
            country: None,
            parent_id: parent.map(|p: usize| format!("CP{p:06}")),
            ultimate_parent_id: None,
        });
    }

    let scenario = builtin::delayed_transition();
    let mut countries: Vec<String> = scenario.sovereign_curves.keys().cloned().collect();
    countries.extend(UNLISTED_COUNTRIES.iter().map(|c| c.to_string()));
    for c in &countries {
        counterparties.push(Counterparty {
            id: format!("SOV-{c}"),
            name: format!("Republic {c}"),
            carbon_intensity: maybe(&mut rng, miss, |r| draw_ci(&cal.0[&SegmentCode::Sov], r)),
            nace: None,
            country: Some(c.clone()),
            parent_id: None,
            ultimate_parent_id: None,
        });
    }

    let n_managers = (n_instruments / 20).max(8);
    for i in 0..n_managers {
        counterparties.push(Counterparty {
            id: format!("AM{i:05}"),
            name: format!("Manager {i}"),
            carbon_intensity: maybe(&mut rng, miss, |r| draw_ci(&cal.0[&SegmentCode::Fund], r)),
            nace: Some("FUND".into()),
            country: None,
            parent_id: None,
            ultimate_parent_id: None,
        });
    }

    let mut by_class: [Vec<String>; 4] = Default::default();
    let vol_noise: LogNormal<f64> = LogNormal::new(0.0, 0.3).expect("valid");
    for i in 0..n_instruments {
        let u: f64 = rng.random();
        let class = if u < 0.35 {
            AssetClass::Equity
        } else if u < 0.65 {
            AssetClass::CorporateBond
        } else if u < 0.82 {
            AssetClass::SovereignBond
        } else {
            AssetClass::FundVehicle
        };
        let code = isin("SY", i);
        let cp_idx = rng.random_range(0..n_corp);
        let mut inst = match class {
            AssetClass::Equity | AssetClass::CorporateBond => {
                Instrument::new(code.clone(), counterparties[cp_idx].id.clone())
            }
            AssetClass::SovereignBond => {
                let c = countries.choose(&mut rng).expect("countries");
                let mut inst = Instrument::new(code.clone(), format!("SOV-{c}"));
                inst.country = maybe(&mut rng, 0.2, |_| c.clone());
                inst
            }
            _ => Instrument::new(
                code.clone(),
                format!("AM{:05}", rng.random_range(0..n_managers)),
            ),
        };
        match class {
            AssetClass::Equity => {
                let seg = counterparties[cp_idx]
                    .segment()
                    .unwrap_or(SegmentCode::Other);
                let mean_vol = cal.0[&seg].mean_volatility.unwrap_or(35.0);
                inst.volatility = maybe(&mut rng, miss, |r| mean_vol * vol_noise.sample(r));
                by_class[0].push(code);
            }
            AssetClass::CorporateBond | AssetClass::SovereignBond => {
                let max_cqs = if class == AssetClass::SovereignBond {
                    4
                } else {
                    6
                };
                inst.cqs = maybe(&mut rng, miss, |r| r.random_range(1..=max_cqs));
                inst.maturity_years = maybe(&mut rng, miss, |r| r.random_range(0.25..25.0));
                inst.coupon = maybe(&mut rng, miss, |r| r.random_range(0.0..0.07));
                by_class[if class == AssetClass::CorporateBond {
                    1
                } else {
                    2
                }]
                .push(code);
            }
            _ => {
                inst.fund_style = maybe(&mut rng, miss, |r| {
                    *InvestmentStyle::ALL.choose(r).expect("styles")
                });
                by_class[3].push(code);
            }
        }
        instruments.push(inst);
    }

    let class_order = [
        AssetClass::Equity,
        AssetClass::CorporateBond,
        AssetClass::SovereignBond,
        AssetClass::FundVehicle,
    ];
    let mv_dist: LogNormal<f64> = LogNormal::new(13.0, 1.2).expect("valid");
    let count_noise: Normal<f64> = Normal::new(0.0, 0.3).expect("valid");
    let mut funds = Vec::with_capacity(cfg.funds);
    let mut positions = Vec::with_capacity(total_positions + cfg.funds);
    for f in 0..cfg.funds {
        let id = format!("F{f:05}");
        let mut alloc: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>().powi(2));
        let s: f64 = alloc.iter().sum();
        alloc.iter_mut().for_each(|a| *a /= s);
        let n = ((cfg.positions_per_fund as f64) * (1.0 + count_noise.sample(&mut rng)).max(0.2))
            .round()
            .max(1.0) as usize;
        let mut fund_positions = Vec::with_capacity(n + 1);
        for (k, class) in class_order.iter().enumerate() {
            let k_n = (alloc[k] * n as f64).round() as usize;
            let pool = &by_class[k];
            if pool.is_empty() {
                continue;
            }
            let picks: Vec<&String> = pool
                .choose_multiple(&mut rng, k_n.min(pool.len()))
                .collect();
            for isin in picks {
                fund_positions.push(Position {
                    fund_id: id.clone(),
                    isin: isin.clone(),
                    asset_class: *class,
                    market_value: (mv_dist.sample(&mut rng) * 100.0).round() / 100.0,
                });
            }
        }
        if fund_positions.is_empty() || rng.random_bool(0.9) {
            fund_positions.push(Position {
                fund_id: id.clone(),
                isin: format!("CASH-{id}"),
                asset_class: AssetClass::Cash,
                market_value: (mv_dist.sample(&mut rng) * 50.0).round() / 100.0,
            });
        }
        if rng.random_bool(0.05) {
            fund_positions.push(Position {
                fund_id: id.clone(),
                isin: format!("UNCL-{id}"),
                asset_class: AssetClass::Unclassified,
                market_value: (mv_dist.sample(&mut rng) * 10.0).round() / 100.0,
            });
        }
        fund_positions.shuffle(&mut rng);
        let aum: f64 = fund_positions.iter().map(|p| p.market_value).sum();
        let mut labels = Vec::new();
        if rng.random_bool(cfg.sustainable_share) {
            labels.push(SUSTAINABLE_LABEL.to_string());
        }
        funds.push(Fund {
            id,
            aum: Some(aum),
            labels,
        });
        positions.extend(fund_positions);
    }

    Universe::new(funds, positions, instruments, counterparties).expect("generated ids are unique")
}

/// Coefficient of variation of `exp(p * logs)`, computed relative to the
/// largest log to stay finite for large `p`.
fn power_cv(logs: &[f64], max_log: f64, p: f64) -> f64 {
    let w: Vec<f64> = logs.iter().map(|l| (p * (l - max_log)).exp()).collect();
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Rescales positive `values` so that their mean and population standard
/// deviation equal `mean` and `std` exactly, via a power transform that keeps
/// every value positive and preserves the ordering.
pub fn match_moments(values: &[f64], mean: f64, std: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if !(mean > 0.0 && std >= 0.0) || values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain(
            "moment matching needs positive values and mean".into(),
        ));
    }
    if std == 0.0 {
        return Ok(vec![mean; n]);
    }
    let target = std / mean;
    // The largest reachable CV puts all mass on one point: sqrt(n - 1).
    if target >= ((n - 1) as f64).sqrt() {
        return Err(Error::Domain(format!(
            "coefficient of variation {target} is unreachable with {n} values"
        )));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let max_log = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if logs.iter().all(|l| *l == max_log) {
        return Err(Error::Domain("cannot spread a constant sample".into()));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while power_cv(&logs, max_log, hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Domain("moment matching did not converge".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if power_cv(&logs, max_log, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    let w: Vec<f64> = logs.iter().map(|l| (p * (l - max_log)).exp()).collect();
    let scale = mean / (w.iter().sum::<f64>() / n as f64);
    Ok(w.into_iter().map(|x| x * scale).collect())
}

/// Counterparties whose per-segment carbon intensities have exactly the
/// firm count, mean and standard deviation of each calibration row.
pub fn calibration_counterparties(cal: &CalibrationSet, seed: u64) -> Result<Vec<Counterparty>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let countries: Vec<String> = builtin::delayed_transition()
        .sovereign_curves
        .into_keys()
        .chain(UNLISTED_COUNTRIES.iter().map(|c| c.to_string()))
        .collect();
    let mut out = Vec::new();
    for (segment, row) in &cal.0 {
        let draws: Vec<f64> = (0..row.n).map(|_| draw_ci(row, &mut rng)).collect();
        let values = match_moments(&draws, row.mean, row.std)?;
        for (i, ci) in values.into_iter().enumerate() {
            let (nace, country) = match segment {
                SegmentCode::Sov => (None, Some(countries[i % countries.len()].clone())),
                SegmentCode::Fund => (Some("FUND".to_string()), None),
                s => (Some(nace_code(*s, &mut rng)), None),
            };
            out.push(Counterparty {
                id: format!("{}-{i:05}", segment.label()),
                name: format!("{} firm {i}", segment.label()),
                carbon_intensity: Some(ci),
                nace,
                country,
                parent_id: None,
                ultimate_parent_id: None,
            });
        }
    }
    Ok(out)
}
