//! Acceptance checks. Each test prints one `ACCEPTANCE <n>: PASS|FAIL`
//! line and then asserts, so the summary shows every criterion even when
//! one of them fails.

#[path = "../../tvws/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use tvws::experiment::run_city;
use tvws::server::router;
use tvws_core::engine::{Engine, EngineConfig};
use tvws_core::geo::{AreaOfInterest, ChannelPlan, GeoPoint, PowerClass};
use tvws_core::propagation::{
    dbu_to_dbm, hata_path_loss, protected_contour_radius, HataEnvironment, HataParams,
};
use tvws_core::protection::{
    allowed_channels, allowed_channels_indexed, fit_calibration, interference_limit, violates, InterferenceMode,
    ProtectionCriteria, SeparationRow, SeparationRule, SeparationTable, TvIndex, WsdTransmission,
};
use tvws_core::registry::{PowerState, TvSetRecord, TvTransmitter};
use tvws_core::resolver::{EntryStatus, QueryRequest, SourceLayer};
use tvws_core::simulator::{
    analytic_expectation, reference_target, rectangle, BroadcastBase, CityScenario, GainEvaluator, Scenario, SimTv,
};

use common::report;

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

// ---------------------------------------------------------------- 1

#[test]
fn c1_separation_table_law() {
    let start = Instant::now();
    let published: [[f64; 4]; 5] = [
        [1.0, 59.0, 9.0, 182.0],
        [5.0, 86.0, 13.2, 265.0],
        [10.0, 101.0, 15.5, 310.0],
        [40.0, 140.0, 22.4, 430.0],
        [100.0, 173.0, 26.4, 533.0],
    ];
    let table = SeparationTable::standard();
    let exact = table.rows().len() == 5
        && table.rows().iter().zip(&published).all(|(r, p)| {
            [r.power_mw, r.coverage_m, r.adj_sep_m, r.co_sep_m]
                .iter()
                .zip(p)
                .all(|(a, b)| a.to_bits() == b.to_bits())
        });

    let criteria = ProtectionCriteria::default();
    let law = fit_calibration(&table, &criteria, 600.0, PowerClass::MW_40).unwrap();
    let (k, slope) = (law.calibration.intercept_db, law.calibration.slope_db_per_decade);
    // Inverse of the fitted log-linear law, without the near-field floor.
    let inverse = |eirp_dbm: f64, field_dbu: f64| 1000.0 * 10f64.powf((eirp_dbm - dbu_to_dbm(field_dbu, 600.0) - k) / slope);
    let mut worst = 0.0f64;
    for r in table.rows() {
        let e = 10.0 * r.power_mw.log10();
        for (fitted, want) in [
            (inverse(e, 18.0), r.co_sep_m),
            (inverse(e, 74.0), r.adj_sep_m),
            (inverse(e, law.coverage_threshold_dbu), r.coverage_m),
        ] {
            worst = worst.max((fitted - want).abs() / want);
        }
    }
    let fit_ok = worst <= 0.05;

    let law_ratio = 10f64.powf(20.0 / slope);
    let (lo, hi) = (&table.rows()[0], &table.rows()[4]);
    let table_ratios = [hi.co_sep_m / lo.co_sep_m, hi.adj_sep_m / lo.adj_sep_m, hi.coverage_m / lo.coverage_m];
    let scaling_ok = within(law_ratio, 2.93, 0.02) && table_ratios.iter().all(|&r| within(r, 2.93, 0.02));
    let co_adj: Vec<f64> = table.rows().iter().map(|r| r.co_sep_m / r.adj_sep_m).collect();
    let co_adj_ok = co_adj.iter().all(|&r| within(r, 20.2, 0.05));
    let elapsed = start.elapsed();

    let pass = exact && fit_ok && scaling_ok && co_adj_ok && elapsed < Duration::from_secs(1);
    report(
        "1 separation-table law",
        pass,
        &format!(
            "(bit-exact={exact}, worst fit error={:.2}%, x100 ratio law={law_ratio:.4} table={table_ratios:.3?}, co/adj={co_adj:.2?}, {elapsed:?})",
            100.0 * worst
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 2

#[test]
fn c2_interference_limits() {
    let c = ProtectionCriteria {
        co_channel_snr_db: 23.0,
        adjacent_snr_db: -33.0,
        min_tv_field_dbu: 41.0,
        ..ProtectionCriteria::default()
    };
    let co = interference_limit(&c, InterferenceMode::CoChannel);
    let adj = interference_limit(&c, InterferenceMode::Adjacent);
    let pass = co == 18.0 && adj == 74.0;
    report("2 interference limits", pass, &format!("(co={co} dBu, adjacent={adj} dBu)"));
    assert!(pass);
}

// ---------------------------------------------------------------- 3

#[test]
fn c3_hata_oracle() {
    let p = HataParams {
        freq_mhz: 600.0,
        tx_height_m: 30.0,
        rx_height_m: 1.5,
        environment: HataEnvironment::UrbanSmallMedium,
    };
    // Written out term by term.
    let lf = 600f64.log10();
    let lhb = 30f64.log10();
    let a_hm = (1.1 * lf - 0.7) * 1.5 - (1.56 * lf - 0.8);
    let hand = |d_km: f64| 69.55 + 26.16 * lf - 13.82 * lhb - a_hm + (44.9 - 6.55 * lhb) * d_km.log10();
    let hand_slope = 44.9 - 6.55 * lhb;

    let l1 = hata_path_loss(&p, 1.0).unwrap();
    let slope = hata_path_loss(&p, 10.0).unwrap() - l1;
    let agrees = [0.05, 0.3, 1.0, 2.5, 7.0, 20.0]
        .iter()
        .all(|&d| (hata_path_loss(&p, d).unwrap() - hand(d)).abs() < 1e-9);
    let pass = (l1 - 121.8).abs() <= 0.1
        && (slope - 35.22).abs() <= 0.01
        && (hand(1.0) - 121.8).abs() <= 0.1
        && (hand_slope - 35.22).abs() <= 0.01
        && (slope - hand_slope).abs() < 1e-9
        && agrees;
    report(
        "3 Hata oracle",
        pass,
        &format!("(L(1 km)={l1:.4} dB, hand={:.4}, slope={slope:.4} dB/decade, hand={hand_slope:.4})", hand(1.0)),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

fn random_records(rng: &mut ChaCha8Rng, area: &AreaOfInterest, plan: &ChannelPlan, n: usize) -> Vec<TvSetRecord> {
    let chans: Vec<u16> = plan.indices().collect();
    (0..n)
        .map(|k| {
            let p = GeoPoint::new(rng.random_range(0.0..area.width()), rng.random_range(0.0..area.height()));
            let cell = area.cell_of(p).unwrap();
            let state = if rng.random_bool(0.7) { PowerState::On } else { PowerState::Off };
            let tuned = rng.random_bool(0.85).then(|| chans[rng.random_range(0..chans.len())]);
            let loc = rng.random_bool(0.8).then_some(p);
            TvSetRecord::new(k as u64 + 1, cell, loc, state, tuned, 1.0, 0)
        })
        .collect()
}

#[test]
fn c4_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut scenarios, mut queries, mut mismatches) = (0, 0, 0);
    let mut first_mismatch = String::new();
    for _ in 0..100 {
        let area = AreaOfInterest::new(rng.random_range(600.0..3000.0), rng.random_range(600.0..3000.0), 50.0).unwrap();
        let first = rng.random_range(21..40u16);
        let plan = ChannelPlan::uhf_range(first, first + rng.random_range(2..15)).unwrap();
        let n_tv = rng.random_range(0..=1000);
        let tvs = random_records(&mut rng, &area, &plan, n_tv);
        let n_wsd = rng.random_range(1..=100);

        let mut cfg = EngineConfig::new(area, plan.clone());
        cfg.policy.layers.geodb = false;
        cfg.policy.layers.wsd_sensing = false;
        let unknown = cfg.policy.unknown_tuning;
        let rule = cfg.rule.clone();
        let mut engine = Engine::new(cfg).unwrap();
        engine.mark_surveyed(&area.cells().collect::<Vec<_>>(), 0).unwrap();
        engine.load_tv_records(tvs.clone()).unwrap();
        let index = TvIndex::new(&tvs, &area, 100.0);

        for q in 0..n_wsd {
            let loc = GeoPoint::new(rng.random_range(0.0..area.width()), rng.random_range(0.0..area.height()));
            let power = PowerClass::LADDER[rng.random_range(0..5)];
            let oracle = allowed_channels(loc, power, &tvs, &plan, &rule, &area, unknown).unwrap();
            let indexed = allowed_channels_indexed(loc, power, &index, &plan, &rule, &area, unknown).unwrap();
            let resolved = engine
                .resolve_query(&QueryRequest { loc, power, time: 1 + q as i64 })
                .unwrap()
                .channel_indices();
            queries += 1;
            if indexed != oracle || resolved != oracle {
                mismatches += 1;
                if first_mismatch.is_empty() {
                    first_mismatch = format!(" first: {loc:?} {power:?} oracle={oracle:?} indexed={indexed:?} resolved={resolved:?}");
                }
            }
        }
        scenarios += 1;
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && scenarios >= 100 && elapsed < Duration::from_secs(30);
    report(
        "4 oracle equivalence",
        pass,
        &format!("({scenarios} scenarios, {queries} queries, {mismatches} mismatches, {elapsed:?}){first_mismatch}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 5

/// Void probability for a homogeneous Poisson process: expected usable
/// channels for a device whose co-channel disk (radius `r`) and adjacent
/// disks (radius `ra`) lie inside the region.
fn poisson_oracle(density: f64, r: f64, ra: f64, n: usize) -> f64 {
    let void = |rad: f64| (-density * std::f64::consts::PI * rad * rad).exp();
    let (co, adj) = (void(r), void(ra));
    (0..n)
        .map(|k| {
            let neighbours = usize::from(k > 0) + usize::from(k + 1 < n);
            co * adj.powi(neighbours as i32)
        })
        .sum()
}

#[test]
fn c5_analytic_cross_check() {
    let start = Instant::now();
    let settings = [(1e-6, 500.0), (5e-6, 200.0), (2e-5, 150.0)];
    let n_channels = 10;
    let (realizations, per_realization) = (200, 25);
    let mut lines = Vec::new();
    let mut all_ok = true;
    for (s, &(density, r)) in settings.iter().enumerate() {
        let ra = r / 20.2;
        let table = SeparationTable::new(vec![SeparationRow {
            power_mw: 1.0,
            coverage_m: r / 3.0,
            adj_sep_m: ra,
            co_sep_m: r,
        }])
        .unwrap();
        let rule = SeparationRule::table_only(table);
        let inner = 8.0 * r;
        let side = inner + 2.0 * r;
        let area = AreaOfInterest::new(side, side, 50.0).unwrap();
        let plan = ChannelPlan::uhf_range(21, 20 + n_channels as u16).unwrap();
        let poisson = Poisson::new(density * side * side).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(500 + s as u64);
        let mut means = Vec::with_capacity(realizations);
        for _ in 0..realizations {
            let mut tvs = Vec::new();
            for ch in plan.indices() {
                let k: f64 = poisson.sample(&mut rng);
                for _ in 0..k as usize {
                    tvs.push(SimTv {
                        loc: GeoPoint::new(rng.random_range(0.0..side), rng.random_range(0.0..side)),
                        on: true,
                        tuned: Some(ch),
                    });
                }
            }
            let wsds = (0..per_realization)
                .map(|_| GeoPoint::new(rng.random_range(r..r + inner), rng.random_range(r..r + inner)))
                .collect();
            let scenario = Scenario {
                area,
                plan: plan.clone(),
                tvs,
                wsds,
                include_adjacent: true,
            };
            let ev = GainEvaluator::new(&scenario, &rule, &[PowerClass::MW_1]).unwrap();
            let total: u64 = (0..ev.wsd_count()).map(|i| ev.counts_for(i)[0] as u64).sum();
            means.push(total as f64 / per_realization as f64);
        }
        let n = means.len() as f64;
        let mean = means.iter().sum::<f64>() / n;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let expect = poisson_oracle(density, r, ra, n_channels);
        let library = analytic_expectation(density, r, ra, n_channels);
        let ok = (mean - expect).abs() <= 3.0 * se && (library - expect).abs() < 1e-12;
        all_ok &= ok;
        lines.push(format!(
            "density={density:e} r={r}: sim={mean:.4} expected={expect:.4} se={se:.4} z={:+.2}",
            (mean - expect) / se
        ));
    }
    let elapsed = start.elapsed();
    let pass = all_ok && elapsed < Duration::from_secs(60);
    report("5 analytic cross-check", pass, &format!("({}; {elapsed:?})", lines.join("; ")));
    assert!(pass);
}

// ---------------------------------------------------------------- 6

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn c6_city_scale_reproduction() {
    let start = Instant::now();
    let rule = SeparationRule::standard();
    let ladder = PowerClass::LADDER;
    let seed = 1;
    let ny = run_city(&CityScenario::new_york(seed), &rule, &ladder).unwrap();
    let mi = run_city(&CityScenario::miami(seed), &rule, &ladder).unwrap();
    let col = |r: &tvws::experiment::CityResult, f: fn(&tvws_core::simulator::PowerGain) -> f64| -> Vec<f64> {
        r.stats.per_power.iter().map(f).collect()
    };
    let (ny_pct, ny_avg) = (col(&ny, |g| g.pct_gaining), col(&ny, |g| g.avg_gained));
    let (mi_avg, mi_all) = (col(&mi, |g| g.avg_gained), mi.stats.per_power.iter().all(|g| g.n_gaining == g.n_wsd));
    let ratios: Vec<f64> = mi_avg.iter().zip(&ny_avg).map(|(m, n)| m / n).collect();

    let checks = [
        ("miami 100% gaining at every power", mi_all),
        ("ny average strictly antitone", strictly_decreasing(&ny_avg)),
        ("miami average strictly antitone", strictly_decreasing(&mi_avg)),
        ("miami average >= 3x ny at every power", ratios.iter().all(|&r| r >= 3.0)),
        ("ny pct gaining antitone", ny_pct.windows(2).all(|w| w[1] <= w[0])),
        ("ny 1 mW ~ 100% gaining", ny_pct[0] >= 99.5),
        ("ny 100 mW < 35% gaining", ny_pct[4] < 35.0),
    ];
    let hard_elapsed = start.elapsed();

    // Soft comparison: every combination of the unstated settings, the
    // closest one reported per table cell.
    let mut runs = vec![("of_operational, 2:1".to_string(), ny.clone(), mi.clone())];
    for (base, bname) in [(BroadcastBase::OfOperational, "of_operational"), (BroadcastBase::OfAll, "of_all")] {
        for aspect in [1.0, 2.0] {
            if base == BroadcastBase::OfOperational && aspect == 2.0 {
                continue;
            }
            let mut out = Vec::new();
            for mut city in [CityScenario::new_york(seed), CityScenario::miami(seed)] {
                city.broadcast_fraction_base = base;
                city.area = rectangle(city.area.surface_m2(), aspect, city.area.cell_size()).unwrap();
                out.push(run_city(&city, &rule, &ladder).unwrap());
            }
            let mi = out.pop().unwrap();
            let ny = out.pop().unwrap();
            runs.push((format!("{bname}, {aspect}:1"), ny, mi));
        }
    }
    let mut soft = Vec::new();
    let mut soft_hits = 0;
    for (ci, name) in ["ny", "miami"].iter().enumerate() {
        for (k, &p) in ladder.iter().enumerate() {
            let (tp, ta) = reference_target(name, p).unwrap();
            let mut best: Option<(f64, String)> = None;
            for (label, ny, mi) in &runs {
                let g = &[ny, mi][ci].stats.per_power[k];
                for (avg, avg_name) in [(g.avg_gained, "avg over gaining"), (g.avg_gained_all, "avg over all")] {
                    let dev = ((g.pct_gaining - tp) / tp).abs().max(((avg - ta) / ta).abs());
                    let text = format!(
                        "{name} {} mW: {:.2}% / {avg:.2} vs {tp}% / {ta} [{label}, {avg_name}] dev {:.1}%",
                        p.eirp_mw(),
                        g.pct_gaining,
                        100.0 * dev
                    );
                    if best.as_ref().is_none_or(|b| dev < b.0) {
                        best = Some((dev, text));
                    }
                }
            }
            let (dev, text) = best.unwrap();
            if dev <= 0.30 {
                soft_hits += 1;
            }
            soft.push(format!("{text} {}", if dev <= 0.30 { "within 30%" } else { "outside 30%" }));
        }
    }
    for line in &soft {
        common::note("6b soft (non-blocking)", line);
    }

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let pass = failed.is_empty() && hard_elapsed < Duration::from_secs(600);
    report(
        "6 city-scale reproduction",
        pass,
        &format!(
            "(ny pct={ny_pct:.2?} avg={ny_avg:.3?}; miami avg={mi_avg:.3?} all gaining={mi_all}; miami/ny={ratios:.2?}; \
             soft cells within 30%: {soft_hits}/10; failed: {failed:?}; {hard_elapsed:?})"
        ),
    );
    assert!(pass, "hard targets failed: {failed:?}");
}

// ---------------------------------------------------------------- 7

/// ON sets are tuned only to channels whose station covers them with room
/// to spare, so every receiver sits where layer 1 already blocks its
/// channel and both neighbours.
fn consistent_records(
    rng: &mut ChaCha8Rng,
    stations: &[TvTransmitter],
    radii: &[f64],
    margin: f64,
    n: usize,
) -> Vec<TvSetRecord> {
    let a = common::area();
    (0..n)
        .map(|k| {
            let p = common::point(rng);
            let covering: Vec<u16> = stations
                .iter()
                .zip(radii)
                .filter(|(s, &r)| tvws_core::geo::distance(p, s.loc) + margin <= r)
                .map(|(s, _)| s.channel.index)
                .collect();
            let (state, tuned) = if covering.is_empty() {
                (PowerState::Off, None)
            } else {
                (PowerState::On, Some(covering[rng.random_range(0..covering.len())]))
            };
            let rel = rng.random_range(0.5..=1.0);
            TvSetRecord::new(5000 + k as u64, a.cell_of(p).unwrap(), Some(p), state, tuned, rel, 0)
        })
        .collect()
}

#[test]
fn c7_resolver_soundness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = common::area();
    let plan = common::plan();
    let (mut fallback_bad, mut superset_bad, mut violations, mut expiry_bad) = (0, 0, 0, 0);
    let (mut grants, mut added, mut layer1_blocked) = (0usize, 0usize, 0usize);
    let combos = 1000;
    for combo in 0..combos {
        let mut cfg = EngineConfig::new(a, plan.clone());
        cfg.policy.sensing_overrides_contour = rng.random_bool(0.5);
        let stations: Vec<TvTransmitter> = (0..rng.random_range(0..4)).map(|i| common::station(&mut rng, i)).collect();
        let radii: Vec<f64> = stations
            .iter()
            .map(|s| protected_contour_radius(s, cfg.rule.criteria.min_tv_field_dbu, &cfg.contour).unwrap())
            .collect();
        let rule = cfg.rule.clone();
        let unknown = cfg.policy.unknown_tuning;
        let theta = cfg.policy.reliability_threshold;
        let reach = rule
            .ladder()
            .iter()
            .map(|&p| rule.separation(p).unwrap())
            .fold(0.0f64, |m, s| m.max(s.co_m).max(s.adj_m));
        let margin = reach + a.cell_size() * std::f64::consts::SQRT_2;

        let mut bare = Engine::new(cfg.clone()).unwrap();
        if !stations.is_empty() {
            bare.load_transmitters(stations.clone()).unwrap();
        }
        let req = common::query(&mut rng, 1000);
        let cell = a.cell_of(req.loc).unwrap();
        let layer1: Vec<u16> = plan.indices().filter(|&c| bare.layer1_free(cell, c)).collect();
        layer1_blocked += plan.len() - layer1.len();

        // Fallback: nothing but transmitters.
        let r = bare.resolve_query(&req).unwrap();
        if r.channel_indices() != layer1 || r.channels.iter().any(|g| g.source_layer != SourceLayer::Geodb) {
            fallback_bad += 1;
        }

        // Superset on physically consistent stores.
        let mut e = bare.clone();
        let n = rng.random_range(0..60);
        e.load_tv_records(consistent_records(&mut rng, &stations, &radii, margin, n)).unwrap();
        if rng.random_bool(0.7) {
            let c = a.cell_of(req.loc).unwrap();
            e.mark_surveyed(&a.cells_within(a.cell_center(c), rng.random_range(0.0..800.0)), 900).unwrap();
        }
        for t in 0..rng.random_range(0..15) {
            let mut rep = common::sensing(&mut rng, 900 + t);
            if rng.random_bool(0.5) {
                rep.loc = GeoPoint::new(
                    (req.loc.x + rng.random_range(-60.0..60.0)).clamp(0.0, common::SIDE_M - 1e-6),
                    (req.loc.y + rng.random_range(-60.0..60.0)).clamp(0.0, common::SIDE_M - 1e-6),
                );
            }
            let _ = e.ingest_sensing_report(rep);
        }
        let r = e.resolve_query(&req).unwrap();
        let got: BTreeSet<u16> = r.channel_indices().into_iter().collect();
        let extra: Vec<_> = r.channels.iter().filter(|g| !layer1.contains(&g.channel)).collect();
        added += extra.len();
        if !layer1.iter().all(|c| got.contains(c))
            || extra
                .iter()
                .any(|g| g.source_layer == SourceLayer::Geodb || g.reliability < theta)
        {
            superset_bad += 1;
        }

        // Arbitrary stores: events, records of any state and reliability.
        let mut x = bare.clone();
        let mut t = 900;
        for _ in 0..rng.random_range(0..40) {
            t += rng.random_range(0..5);
            match rng.random_range(0..4) {
                0 => {
                    let _ = x.ingest_sensing_report(common::sensing(&mut rng, t));
                }
                1 => {
                    let id = rng.random_range(1..1_000_000);
                    let _ = x.load_tv_records(vec![common::record(&mut rng, id, t)]);
                }
                2 => {
                    let _ = x.ingest_tv_event(common::tv_event(&mut rng, t));
                }
                _ => {
                    let c = a.cell_of(common::point(&mut rng)).unwrap();
                    let _ = x.mark_surveyed(&a.cells_within(a.cell_center(c), rng.random_range(0.0..800.0)), t);
                }
            }
        }

        // No granted (channel, power) may violate any ON receiver.
        for (eng, label) in [(&mut e, "consistent"), (&mut x, "arbitrary")] {
            for k in 0..3 {
                let q = QueryRequest {
                    time: 1000 + k,
                    ..if k == 0 { req } else { common::query(&mut rng, 1000 + k) }
                };
                let resp = eng.resolve_query(&q).unwrap();
                let on: Vec<&TvSetRecord> = eng
                    .registry()
                    .tv_records()
                    .filter(|r| r.state == PowerState::On)
                    .collect();
                for g in &resp.channels {
                    grants += 1;
                    for power in [q.power, g.max_power] {
                        let sep = rule.separation(power).unwrap();
                        let wsd = WsdTransmission {
                            loc: q.loc,
                            power,
                            channel: g.channel,
                        };
                        if on.iter().any(|tv| violates(&wsd, tv, sep, &a, unknown)) {
                            violations += 1;
                            if violations == 1 {
                                eprintln!("violation in combo {combo} ({label}): {g:?} at {q:?}");
                            }
                        }
                    }
                }
            }
            // Expiry moves exactly the overdue entries.
            let now = rng.random_range(900..90_000);
            let overdue = eng
                .entries()
                .filter(|x| x.status != EntryStatus::Unknown && x.valid_until < now)
                .count();
            let moved = eng.expire(now);
            if moved != overdue || eng.entries().any(|x| x.status != EntryStatus::Unknown && x.valid_until < now) {
                expiry_bad += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = fallback_bad == 0
        && superset_bad == 0
        && violations == 0
        && expiry_bad == 0
        && elapsed < Duration::from_secs(60);
    report(
        "7 resolver soundness",
        pass,
        &format!(
            "({combos} combinations: fallback mismatches={fallback_bad}, superset failures={superset_bad}, \
             violations={violations} over {grants} grants, expiry mismatches={expiry_bad}; \
             {layer1_blocked} layer-1 blocked channels, {added} channels added by crowd layers; {elapsed:?})"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 8

#[test]
fn c8_service_round_trip_and_recovery() {
    let start = Instant::now();
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let (streams, mut requests, mut mismatches) = (30, 0usize, Vec::new());
    rt.block_on(async {
        for seed in 0..streams {
            let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
            let cmds = common::commands(&mut rng, 80, 20_000);
            let (svc, clock) = common::service_at(common::engine(), 20_000);
            let app = router(svc.clone());
            let mut core = common::engine();
            for c in &cmds {
                requests += 1;
                if let Err(m) = common::drive(&app, &svc, &clock, &mut core, c).await {
                    mismatches.push(m);
                }
            }
            if common::digest_of(&app).await != common::core_digest(&core) {
                mismatches.push(format!("stream {seed}: final digests differ"));
            }
        }
    });
    let runs = 25;
    let recovered = (0..runs).filter(|&s| {
        let (a, b) = common::crash_run(8000 + s);
        a == b
    });
    let recovered = recovered.count();
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && recovered == runs as usize && elapsed < Duration::from_secs(120);
    report(
        "8 service round-trip and recovery",
        pass,
        &format!(
            "({streams} streams / {requests} requests, {} mismatches; {recovered}/{runs} crash runs matched; {elapsed:?})",
            mismatches.len()
        ),
    );
    assert!(pass, "{}", mismatches.first().map_or("", String::as_str));
}

// ---------------------------------------------------------------- 9

#[test]
fn c9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let args = ["tvws", "simulate", "--seed", "42", "--out", out.to_str().unwrap()];
        assert_eq!(tvws::cli::main_with_args(args), std::process::ExitCode::SUCCESS);
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let pass = a == b && a.len() > 100;
    report("9 determinism", pass, &format!("({} bytes, identical={})", a.len(), a == b));
    assert!(pass);
}
