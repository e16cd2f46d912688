//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! on any failure that is not listed in [`DOCUMENTED`].
//!
//! Reference values are checked against independent reimplementations written
//! here, never against the engine's own helpers.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use trisk_core::aggregate::{self, counterfactual_loss, Greenness};
use trisk_core::calib::{
    self, default_calibration, filliben_medians, filliben_r2, fit_lognormal, lognormal_moments,
};
use trisk_core::ingest::builtin;
use trisk_core::risk::{
    self, bond_sensitivities, corporate_loss, equity_loss, fund_vehicle_loss, interpolate_tenor,
    sovereign_loss, BondSensitivities, BondSign, ClassAverages, RiskConfig,
};
use trisk_core::synth::{generate_universe, SynthConfig};
use trisk_core::{
    AssetClass, Counterparty, Exposure, Instrument, InvestmentStyle, Position, PositionResult,
    SectorCalibration, SegmentCode, TecTac, Universe,
};

/// Criteria whose reference values cannot all be reproduced, with the exact
/// set of failing items expected. Any other outcome is a real failure.
const DOCUMENTED: &[(u8, &[&str])] = &[(1, &["FUND", "Other", "SOV"])];

enum Verdict {
    Pass(String),
    Fail(String),
}

use Verdict::{Fail, Pass};

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn calibration(segment: SegmentCode, ln_mean: f64, ln_std: f64) -> SectorCalibration {
    let (mean, var) = lognormal_moments(ln_mean, ln_std);
    SectorCalibration {
        segment,
        n: 100,
        mean,
        std: var.sqrt(),
        ln_mean,
        ln_std,
        r2: 1.0,
        mean_volatility: None,
        mean_cqs: None,
        mean_duration: None,
    }
}

/// Independent method-of-moments fit, written without `ln_1p`.
fn oracle_fit(mean: f64, std: f64) -> (f64, f64) {
    let s2 = (1.0 + (std / mean).powi(2)).ln();
    (mean.ln() - s2 / 2.0, s2.sqrt())
}

/// Outcome of criterion 1 with the labels of the rows that missed.
fn c1_table_fit() -> (Verdict, Vec<String>, Vec<String>) {
    let path = manifest_dir().join("../core/tests/fixtures/calibration_reference.csv");
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return (Fail(format!("{}: {e}", path.display())), vec![], vec![]),
    };
    let start = Instant::now();
    let (mut failing, mut notes) = (Vec::new(), Vec::new());
    let mut rows = 0;
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| f[i].parse::<f64>().expect("numeric column");
        let (label, mean, std, ln_mean, ln_std) = (f[0], num(2), num(3), num(4), num(5));
        rows += 1;
        let (mu, sigma) = match fit_lognormal(mean, std * std) {
            Ok(v) => v,
            Err(e) => {
                failing.push(label.to_string());
                notes.push(format!("{label}: {e}"));
                continue;
            }
        };
        let (omu, osigma) = oracle_fit(mean, std);
        if (mu - omu).abs() > 1e-12 || (sigma - osigma).abs() > 1e-12 {
            failing.push(format!("{label}/oracle"));
            notes.push(format!(
                "{label}: fit ({mu}, {sigma}) vs oracle ({omu}, {osigma})"
            ));
        } else if (mu - ln_mean).abs() > 0.01 || (sigma - ln_std).abs() > 0.01 {
            failing.push(label.to_string());
            notes.push(format!(
                "{label}: fitted ({mu:.4}, {sigma:.4}) vs printed ({ln_mean:.2}, {ln_std:.2})"
            ));
        }
    }
    let elapsed = start.elapsed();
    if rows != 26 {
        failing.push(format!("rows={rows}"));
    }
    if elapsed >= Duration::from_secs(1) {
        failing.push("runtime".into());
    }
    failing.sort();
    let detail = format!(
        "{}/{rows} rows within 0.01 in {elapsed:.1?}",
        rows - notes.len()
    );
    (check(failing.is_empty(), detail), failing, notes)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

fn c2_moment_round_trip() -> Verdict {
    let worst_moment = Cell::new(0.0f64);
    let worst_param = Cell::new(0.0f64);
    let result = runner(1000).run(&(-2.0f64..=10.0, 0.0f64..=3.0), |(mu, sigma)| {
        let (m, v) = lognormal_moments(mu, sigma);
        let (mu2, sigma2) = fit_lognormal(m, v).map_err(|e| TestCaseError::fail(e.to_string()))?;
        // Parameters are logs, so near zero they are compared on a unit scale.
        let pe = ((mu2 - mu).abs() / mu.abs().max(1.0))
            .max((sigma2 - sigma).abs() / sigma.abs().max(1.0));
        let (m2, v2) = lognormal_moments(mu2, sigma2);
        let me = ((m2 - m) / m)
            .abs()
            .max(if v == 0.0 { v2 } else { ((v2 - v) / v).abs() });
        worst_moment.set(worst_moment.get().max(me));
        worst_param.set(worst_param.get().max(pe));
        prop_assert!(me <= 1e-10, "moments off by {me:e} at ({mu}, {sigma})");
        prop_assert!(pe <= 1e-10, "parameters off by {pe:e} at ({mu}, {sigma})");
        Ok(())
    });
    match result {
        Ok(()) => Pass(format!(
            "1000 cases, worst relative error {:.1e} (moments), {:.1e} (parameters)",
            worst_moment.get(),
            worst_param.get()
        )),
        Err(e) => Fail(e.to_string()),
    }
}

/// Squared Pearson correlation, computed directly.
fn oracle_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy * sxy / (sxx * syy)
}

/// Filliben's order-statistic medians, from the published formula.
fn oracle_medians(n: usize) -> Vec<f64> {
    let last = 0.5f64.powf(1.0 / n as f64);
    (1..=n)
        .map(|i| {
            if i == 1 {
                1.0 - last
            } else if i == n {
                last
            } else {
                (i as f64 - 0.3175) / (n as f64 + 0.365)
            }
        })
        .collect()
}

fn c3_filliben() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dist = LogNormal::new(4.5, 1.45).unwrap();
    let draws: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
    let r2 = match filliben_r2(&draws) {
        Ok(v) => v,
        Err(e) => return Fail(e.to_string()),
    };
    let mut logs: Vec<f64> = draws.iter().map(|v| v.ln()).collect();
    logs.sort_by(f64::total_cmp);
    let z: Vec<f64> = oracle_medians(logs.len())
        .into_iter()
        .map(calib::norm_quantile)
        .collect();
    let oracle = oracle_r2(&logs, &z);

    let medians_match = filliben_medians(37)
        .iter()
        .zip(oracle_medians(37))
        .all(|(a, b)| (a - b).abs() < 1e-15);
    let perfect: Vec<f64> = oracle_medians(500)
        .into_iter()
        .map(|m| (3.0 + 1.2 * calib::norm_quantile(m)).exp())
        .collect();
    let r2_perfect = filliben_r2(&perfect).unwrap_or(f64::NAN);
    check(
        r2 > 0.99
            && (r2 - oracle).abs() < 1e-12
            && medians_match
            && (r2_perfect - 1.0).abs() <= 1e-12,
        format!(
            "n=10^4 r2={r2:.5} (oracle {oracle:.5}); perfect fit 1-r2={:.1e}",
            1.0 - r2_perfect
        ),
    )
}

fn c4_quantile_oracle() -> Verdict {
    const DRAWS: usize = 1_000_000;
    const PROBES: [f64; 9] = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let mu = rand::Rng::random_range(&mut rng, -1.0..9.0);
        let sigma = rand::Rng::random_range(&mut rng, 0.1..2.5);
        let cal = calibration(SegmentCode::Other, mu, sigma);
        let dist = LogNormal::new(mu, sigma).unwrap();
        let mut sample: Vec<f64> = (0..DRAWS).map(|_| dist.sample(&mut rng)).collect();
        sample.sort_by(f64::total_cmp);
        for p in PROBES {
            let ci = sample[(p * DRAWS as f64) as usize];
            let empirical = sample.partition_point(|v| *v <= ci) as f64 / DRAWS as f64;
            let q = match calib::quantile_of(ci, &cal) {
                Ok(q) => q,
                Err(e) => return Fail(format!("calibration {k}: {e}")),
            };
            worst = worst.max((q - empirical).abs());
        }
    }
    check(
        worst <= 0.005,
        format!("20 calibrations x 9 probes, max |q - ecdf| = {worst:.5}"),
    )
}

fn cp(id: &str, nace: Option<&str>, country: Option<&str>, ci: Option<f64>) -> Counterparty {
    Counterparty {
        id: id.into(),
        name: id.into(),
        carbon_intensity: ci,
        nace: nace.map(Into::into),
        country: country.map(Into::into),
        parent_id: None,
        ultimate_parent_id: None,
    }
}

fn pos(fund: &str, isin: &str, class: AssetClass, mv: f64) -> Position {
    Position {
        fund_id: fund.into(),
        isin: isin.into(),
        asset_class: class,
        market_value: mv,
    }
}

fn c5_repricing() -> Verdict {
    let scenario = builtin::delayed_transition();
    let mut notes = Vec::new();
    let mut ok = true;

    // (i) neutral multipliers through the full pipeline.
    let mut eq = Instrument::new("XS0000000001", "UTIL");
    eq.volatility = Some(29.8);
    let universe = Universe::new(
        vec![],
        vec![pos("F1", "XS0000000001", AssetClass::Equity, 1e6)],
        vec![eq],
        vec![cp("UTIL", Some("35.11"), None, None)],
    )
    .unwrap();
    let a = risk::assess(
        &universe,
        &scenario,
        &default_calibration(),
        &RiskConfig::default(),
    )
    .unwrap();
    let neutral = a.results[0].loss_fraction;
    let kernel = equity_loss(1.0, 1.0, scenario.equity_shock_for(SegmentCode::D35));
    ok &= neutral == -0.23 && kernel == -0.23;
    notes.push(format!("(i) {:.2}%", neutral * 100.0));

    // (ii) Spain 10y with D=8, C=80.
    let es = interpolate_tenor(&scenario.sovereign_curves["ES"], 10.0);
    let s = BondSensitivities {
        duration: 8.0,
        convexity: 80.0,
    };
    let spain = sovereign_loss(es, s, BondSign::Taylor);
    let dy = 121.1e-4;
    let oracle = -dy * 8.0 + 0.5 * dy * dy * 80.0;
    ok &= es == 121.1 && (spain - oracle).abs() < 1e-12 && (spain * 100.0 - -9.10).abs() <= 0.01;
    notes.push(format!("(ii) {:.3}%", spain * 100.0));

    // (iii) Poland beyond ten years gains for every positive duration.
    let pl = &scenario.sovereign_curves["PL"];
    let mut poland_ok = true;
    for t in [10.0, 12.5, 20.0, 30.0] {
        for d in [0.01, 0.5, 2.0, 8.0, 15.0, 25.0] {
            let sens = risk::sensitivities_from_duration(d);
            for sign in [BondSign::Taylor, BondSign::Additive] {
                poland_ok &= sovereign_loss(interpolate_tenor(pl, t), sens, sign) > 0.0;
            }
        }
    }
    ok &= poland_ok && pl.0[9] < 0.0;
    notes.push(format!("(iii) gain={poland_ok}"));

    // (iv) closed-form sensitivities.
    let b = bond_sensitivities(10.0, 0.05).unwrap();
    let (od, oc) = (10.0 / 1.05f64.powf(5.0), 10.0 * 11.0 / (1.05f64 * 1.05));
    ok &= (b.duration - 7.8353).abs() <= 1e-3
        && (b.convexity - 99.773).abs() <= 1e-3
        && (b.duration - od).abs() < 1e-12
        && (b.convexity - oc).abs() < 1e-9;
    notes.push(format!("(iv) D={:.4} C={:.3}", b.duration, b.convexity));
    check(ok, notes.join("; "))
}

fn vehicle_loss(factor_two: bool) -> f64 {
    let mut inst = Instrument::new("ES0000000009", "FUNDCP");
    inst.fund_style = Some(InvestmentStyle::Equities);
    let universe = Universe::new(
        vec![],
        vec![pos("F1", "ES0000000009", AssetClass::FundVehicle, 1e6)],
        vec![inst],
        vec![cp("FUNDCP", Some("FUND"), None, Some(1e9))],
    )
    .unwrap();
    let config = RiskConfig {
        fund_factor_two: factor_two,
        class_averages: Some(ClassAverages {
            equity: -0.1271,
            corporate: -0.0561,
            sovereign: -0.0477,
        }),
        ..RiskConfig::default()
    };
    risk::assess(
        &universe,
        &builtin::delayed_transition(),
        &default_calibration(),
        &config,
    )
    .unwrap()
    .results[0]
        .loss_fraction
}

fn c6_fund_factor_two() -> Verdict {
    let with = vehicle_loss(true) * 100.0;
    let without = vehicle_loss(false) * 100.0;
    let oracle = 2.0 * (0.85 * -12.71 + 0.05 * -5.61 + 0.05 * -4.77);
    check(
        (with - -22.6).abs() <= 0.5
            && (with - -22.20).abs() <= 0.5
            && (without - -11.3).abs() <= 0.5
            && (with - oracle).abs() < 1e-6,
        format!("with factor {with:.2}%, without {without:.2}% (printed worst 1% -22.20%)"),
    )
}

fn green_result(class: AssetClass, nace: Option<&str>, mv: f64) -> PositionResult {
    let p = pos("F1", "X", class, mv);
    let exposure = Exposure {
        nace: nace.map(Into::into),
        ..Exposure::default()
    };
    PositionResult::new(&p, 0.0, Default::default(), exposure, Default::default())
}

fn c7_tec_tac() -> Verdict {
    let direct = aggregate::adjusted(0.0437, 0.3388).unwrap() * 100.0;
    let sustainable = aggregate::adjusted(0.0378, 0.4798).unwrap() * 100.0;

    let table = BTreeMap::from([("35.11".to_string(), TecTac { tec: 1.0, tac: 0.0 })]);
    let results = [
        green_result(AssetClass::Equity, Some("35.11"), 4.37),
        green_result(AssetClass::CorporateBond, Some("62.01"), 33.88 - 4.37),
        green_result(AssetClass::SovereignBond, None, 100.0 - 33.88),
    ];
    let Greenness { adj_tec, .. } = aggregate::tec_tac(&results, &table).unwrap();
    let portfolio = adj_tec.unwrap_or(f64::NAN) * 100.0;
    check(
        (direct - 12.91).abs() <= 0.02
            && (sustainable - 7.87).abs() <= 0.02
            && (portfolio - 4.37 / 33.88 * 100.0).abs() < 1e-9,
        format!(
            "adjusted {direct:.3}% (printed 12.91%), sustainable {sustainable:.3}% (printed 7.87%)"
        ),
    )
}

fn synthetic_run(
    funds: usize,
    seed: u64,
) -> (Universe, Vec<PositionResult>, Vec<aggregate::FundResult>) {
    let universe = generate_universe(&SynthConfig {
        seed,
        funds,
        ..SynthConfig::default()
    });
    let scenario = builtin::delayed_transition();
    let a = risk::assess(
        &universe,
        &scenario,
        &default_calibration(),
        &RiskConfig::default(),
    )
    .unwrap();
    let f = aggregate::aggregate_funds(&universe, &a.results, &scenario).unwrap();
    (universe, a.results, f)
}

fn c8_counterfactual() -> Verdict {
    let (_, _, funds) = synthetic_run(60, 11);
    let mut worst = 0.0f64;
    let mut perturbed = 0;
    let mut distinct_ok = true;
    for f in &funds {
        let own = counterfactual_loss(&f.class_losses, &f.class_weights).unwrap();
        worst = worst.max((own - f.loss_fraction).abs());
        let classes: Vec<AssetClass> = f.class_weights.keys().copied().collect();
        for (i, a) in classes.iter().enumerate() {
            for b in &classes[i + 1..] {
                let (la, lb) = (
                    f.class_losses.get(a).copied().unwrap_or(0.0),
                    f.class_losses.get(b).copied().unwrap_or(0.0),
                );
                if la == lb || f.class_weights[a] <= 0.0 {
                    continue;
                }
                let delta = f.class_weights[a] / 2.0;
                let mut w = f.class_weights.clone();
                *w.get_mut(a).unwrap() -= delta;
                *w.get_mut(b).unwrap() += delta;
                let other = counterfactual_loss(&f.class_losses, &w).unwrap();
                distinct_ok &= other != own && ((other - own) - delta * (lb - la)).abs() < 1e-12;
                perturbed += 1;
            }
        }
    }
    check(
        worst <= 1e-12 && distinct_ok && perturbed > 0,
        format!(
            "{} funds, max |own - loss| = {worst:.1e}; {perturbed} reallocations all differ",
            funds.len()
        ),
    )
}

fn trisk(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_trisk"))
        .current_dir(dir)
        .env_remove(trisk_cli::CONFIG_ENV)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "trisk {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

const INPUTS: [&str; 8] = [
    "--positions",
    "u/positions.csv",
    "--instruments",
    "u/instruments.csv",
    "--counterparties",
    "u/counterparties.csv",
    "--funds",
    "u/funds.csv",
];

fn c9_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let run = || -> Result<(Duration, bool), String> {
        trisk(dir, &["generate", "-o", "u", "--funds", "200"])?;
        let start = Instant::now();
        for t in ["1", "8"] {
            let out = format!("out{t}");
            let rep = format!("rep{t}");
            let mut args = vec!["assess", "--threads", t, "-o", &out];
            args.extend(INPUTS);
            trisk(dir, &args)?;
            trisk(dir, &["report", "--results", &out, "-o", &rep])?;
        }
        let elapsed = start.elapsed();
        let same = dir_bytes(&dir.join("out1")) == dir_bytes(&dir.join("out8"))
            && dir_bytes(&dir.join("rep1")) == dir_bytes(&dir.join("rep8"));
        Ok((elapsed, same))
    };
    let (small, same) = match run() {
        Ok(v) => v,
        Err(e) => return Fail(e),
    };

    let big = tempfile::tempdir().unwrap();
    let big_run = || -> Result<(usize, Duration), String> {
        trisk(
            big.path(),
            &[
                "generate",
                "-o",
                "u",
                "--funds",
                "2500",
                "--positions-per-fund",
                "40",
            ],
        )?;
        let n = fs::read_to_string(big.path().join("u/positions.csv"))
            .map_err(|e| e.to_string())?
            .lines()
            .count()
            - 1;
        let start = Instant::now();
        let mut args = vec!["assess", "-o", "out"];
        args.extend(INPUTS);
        trisk(big.path(), &args)?;
        Ok((n, start.elapsed()))
    };
    let (n, large) = match big_run() {
        Ok(v) => v,
        Err(e) => return Fail(e),
    };
    check(
        same && small < Duration::from_secs(10) && n >= 100_000 && large < Duration::from_secs(60),
        format!(
            "threads 1 vs 8 identical={same}, 200 funds x2 in {small:.2?}; {n} positions in {large:.2?}"
        ),
    )
}

fn c10_invariants() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;

    // Zero shock.
    let universe = generate_universe(&SynthConfig {
        funds: 40,
        seed: 5,
        ..SynthConfig::default()
    });
    let zero = builtin::delayed_transition().zeroed();
    let a = risk::assess(
        &universe,
        &zero,
        &default_calibration(),
        &RiskConfig::default(),
    )
    .unwrap();
    let funds = aggregate::aggregate_funds(&universe, &a.results, &zero).unwrap();
    let zero_ok = a
        .results
        .iter()
        .all(|r| r.loss_fraction == 0.0 && r.loss_eur == 0.0)
        && funds.iter().all(|f| f.loss_eur == 0.0);
    ok &= zero_ok;
    notes.push(format!(
        "zero shock {}",
        if zero_ok { "ok" } else { "NONZERO" }
    ));

    // Monotonicity in carbon intensity.
    let strategy = (
        (0.0f64..8.0, 0.05f64..3.0),
        (-3.0f64..12.0, 0.0f64..4.0),
        (0.2f64..3.0, 0.3f64..3.0),
        (-0.6f64..0.0, 0.0f64..600.0),
        (0.25f64..30.0, 0.0f64..0.12),
        (-0.5f64..0.0, -0.5f64..0.0, -0.5f64..0.0),
        0usize..6,
    );
    let taylor_checked = Cell::new(0u32);
    let mono = runner(1000).run(
        &strategy,
        |((mu, sigma), (l1, gap), (vol_m, cqs_m), (eq_shock, bp), (t, c), (ae, ac, asv), style)| {
            let cal = calibration(SegmentCode::Other, mu, sigma);
            let (ci1, ci2) = (l1.exp(), (l1 + gap).exp());
            let m1 = risk::ci_multiplier(Some(ci1), &cal).value;
            let m2 = risk::ci_multiplier(Some(ci2), &cal).value;
            prop_assert!(m1 <= m2);
            prop_assert!(
                equity_loss(m1, vol_m, eq_shock).abs() <= equity_loss(m2, vol_m, eq_shock).abs()
            );

            let s = bond_sensitivities(t, c).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let add = |m| corporate_loss(m, cqs_m, bp, s, BondSign::Additive).abs();
            prop_assert!(add(m1) <= add(m2));
            // The Taylor quadratic only grows in magnitude up to dy = D/C.
            if m2 * cqs_m * bp * 1e-4 <= s.duration / s.convexity {
                let tay = |m| corporate_loss(m, cqs_m, bp, s, BondSign::Taylor).abs();
                prop_assert!(tay(m1) <= tay(m2) + 1e-15);
                taylor_checked.set(taylor_checked.get() + 1);
            }

            let avg = ClassAverages {
                equity: ae,
                corporate: ac,
                sovereign: asv,
            };
            let w = InvestmentStyle::ALL[style].weights();
            prop_assert!(
                fund_vehicle_loss(m1, w, avg).abs() <= fund_vehicle_loss(m2, w, avg).abs()
            );
            Ok(())
        },
    );
    match mono {
        Ok(()) => notes.push(format!(
            "monotone in CI (1000 cases, {} under Taylor)",
            taylor_checked.get()
        )),
        Err(e) => {
            ok = false;
            notes.push(format!("monotonicity: {e}"));
        }
    }

    // Loss floor, including shocks far beyond any scenario.
    let floor = runner(1000).run(
        &(
            0.0f64..2.0,
            0.0f64..20.0,
            -50.0f64..0.0,
            0.0f64..50_000.0,
            0.25f64..50.0,
            0.0f64..0.2,
        ),
        |(m, mult, eq_shock, bp, t, c)| {
            let s = bond_sensitivities(t, c).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(equity_loss(m, mult, eq_shock) >= -1.0);
            for sign in [BondSign::Taylor, BondSign::Additive] {
                prop_assert!(corporate_loss(m, mult, bp, s, sign) >= -1.0);
            }
            let avg = ClassAverages {
                equity: eq_shock,
                corporate: eq_shock,
                sovereign: eq_shock,
            };
            for style in InvestmentStyle::ALL {
                prop_assert!(fund_vehicle_loss(m * mult, style.weights(), avg) >= -1.0);
            }
            Ok(())
        },
    );
    let mut stressed = builtin::delayed_transition();
    stressed.equity_shock.values_mut().for_each(|v| *v *= 20.0);
    stressed.spread_shock.values_mut().for_each(|v| *v *= 20.0);
    let a = risk::assess(
        &universe,
        &stressed,
        &default_calibration(),
        &RiskConfig::default(),
    )
    .unwrap();
    let floored = a
        .results
        .iter()
        .filter(|r| {
            matches!(
                r.asset_class,
                AssetClass::Equity | AssetClass::CorporateBond | AssetClass::FundVehicle
            )
        })
        .all(|r| r.loss_fraction >= -1.0);
    match floor {
        Ok(()) if floored => notes.push("floor >= -100%".into()),
        Ok(()) => {
            ok = false;
            notes.push("stressed run breaches -100%".into());
        }
        Err(e) => {
            ok = false;
            notes.push(format!("floor: {e}"));
        }
    }

    // EUR reconciliation.
    let (universe, results, funds) = synthetic_run(200, 42);
    let refs: Vec<&aggregate::FundResult> = funds.iter().collect();
    let summary = aggregate::summarize(&refs, &results, &builtin::delayed_transition()).unwrap();
    let by_position: f64 = results
        .iter()
        .map(|r| r.market_value * r.loss_fraction)
        .sum();
    let by_fund: f64 = funds.iter().map(|f| f.loss_eur).sum();
    let fund_ids: BTreeSet<&str> = universe.funds.iter().map(|f| f.id.as_str()).collect();
    let rec = rel_close(by_fund, by_position, 1e-6)
        && rel_close(summary.loss_eur, by_position, 1e-6)
        && rel_close(summary.loss_fraction * summary.aum, by_position, 1e-6)
        && fund_ids.len() == funds.len();
    ok &= rec;
    notes.push(format!(
        "EUR reconcile {} ({by_fund:.2} vs {by_position:.2})",
        if rec { "ok" } else { "MISMATCH" }
    ));
    check(ok, notes.join("; "))
}

fn main() {
    let mut unexpected = 0;
    let mut line = |id: u8, name: &str, verdict: Verdict, failing: &[String], notes: &[String]| {
        let (status, detail) = match verdict {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                let documented = DOCUMENTED.iter().any(|(c, items)| {
                    *c == id && !failing.is_empty() && failing.iter().eq(items.iter())
                });
                if documented {
                    ("FAIL (documented)", d)
                } else {
                    unexpected += 1;
                    ("FAIL", d)
                }
            }
        };
        println!("criterion {id:>2} {status}: {name}: {detail}");
        for note in notes {
            println!("             {note}");
        }
    };

    let (v, failing, notes) = c1_table_fit();
    line(1, "calibration golden numbers", v, &failing, &notes);
    line(2, "moment round trip", c2_moment_round_trip(), &[], &[]);
    line(3, "Filliben oracle", c3_filliben(), &[], &[]);
    line(4, "quantile oracle", c4_quantile_oracle(), &[], &[]);
    line(5, "repricing golden numbers", c5_repricing(), &[], &[]);
    line(6, "fund-vehicle factor two", c6_fund_factor_two(), &[], &[]);
    line(7, "TEC/TAC arithmetic", c7_tec_tac(), &[], &[]);
    line(8, "counterfactual identity", c8_counterfactual(), &[], &[]);
    line(9, "end-to-end determinism", c9_determinism(), &[], &[]);
    line(10, "invariant suite", c10_invariants(), &[], &[]);

    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
