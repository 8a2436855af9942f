#![allow(dead_code)]

use std::io::Write;
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use rand::Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use tvws::persist::state_digest;
use tvws::service::{ManualClock, Service, DEFAULT_SKEW_S};
use tvws::wire::Rejection;
use tvws_core::engine::{Command, Engine, EngineConfig, Outcome};
use tvws_core::geo::{AreaOfInterest, Channel, ChannelPlan, GeoPoint, PowerClass};
use tvws_core::registry::{Presence, PowerState, TvDetectionEvent, TvSetRecord, TvTransmitter, WsdSensingReport};
use tvws_core::resolver::QueryRequest;

pub const SIDE_M: f64 = 2000.0;

pub fn area() -> AreaOfInterest {
    AreaOfInterest::new(SIDE_M, SIDE_M, 50.0).unwrap()
}

pub fn plan() -> ChannelPlan {
    ChannelPlan::uhf_range(21, 30).unwrap()
}

pub fn engine() -> Engine {
    Engine::new(EngineConfig::new(area(), plan())).unwrap()
}

pub fn service_at(engine: Engine, t: i64) -> (Arc<Service>, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(t));
    (Arc::new(Service::new(engine, None, clock.clone(), DEFAULT_SKEW_S)), clock)
}

/// One line per checked criterion, written past the test harness's output
/// capture so it shows for passing tests too.
pub fn report(criterion: &str, pass: bool, detail: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "ACCEPTANCE {criterion}: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Informational line that does not gate any criterion.
pub fn note(label: &str, detail: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "ACCEPTANCE {label}: {detail}");
}

pub fn point<R: Rng>(rng: &mut R) -> GeoPoint {
    GeoPoint::new(rng.random_range(0.0..SIDE_M), rng.random_range(0.0..SIDE_M))
}

pub fn power<R: Rng>(rng: &mut R) -> PowerClass {
    PowerClass::LADDER[rng.random_range(0..PowerClass::LADDER.len())]
}

pub fn channel<R: Rng>(rng: &mut R) -> u16 {
    rng.random_range(21..=30)
}

/// Low-power station whose contour covers part of the area.
pub fn station<R: Rng>(rng: &mut R, id: usize) -> TvTransmitter {
    TvTransmitter {
        id: format!("S{id}"),
        loc: GeoPoint::new(rng.random_range(-1000.0..3000.0), rng.random_range(-1000.0..3000.0)),
        channel: Channel::uhf(channel(rng)),
        erp_w: rng.random_range(0.0005..0.05),
        antenna_height_m: rng.random_range(30.0..80.0),
    }
}

pub fn record<R: Rng>(rng: &mut R, tv_id: u64, t: i64) -> TvSetRecord {
    let a = area();
    let p = point(rng);
    let state = match rng.random_range(0..10) {
        0..=5 => PowerState::On,
        6..=8 => PowerState::Off,
        _ => PowerState::Unknown,
    };
    let tuned = rng.random_bool(0.8).then(|| channel(rng));
    TvSetRecord::new(tv_id, a.cell_of(p).unwrap(), Some(p), state, tuned, rng.random_range(0.5..=1.0), t)
}

pub fn sensing<R: Rng>(rng: &mut R, t: i64) -> WsdSensingReport {
    let n = rng.random_range(1..4);
    WsdSensingReport {
        contributor_id: format!("w{}", rng.random_range(0..5)),
        loc: point(rng),
        timestamp: t,
        readings: (0..n).map(|_| (channel(rng), rng.random_range(-130.0..-60.0))).collect(),
        claimed_sensitivity_dbm: -114.0,
    }
}

pub fn tv_event<R: Rng>(rng: &mut R, t: i64) -> TvDetectionEvent {
    let on = rng.random_bool(0.6);
    TvDetectionEvent {
        contributor_id: format!("p{}", rng.random_range(0..5)),
        tv_id: None,
        loc: Some(point(rng)),
        cell: None,
        timestamp: t,
        presence: if rng.random_bool(0.9) { Presence::Present } else { Presence::Absent },
        power_state: if on { PowerState::On } else { PowerState::Off },
        tuned_channel: (on && rng.random_bool(0.8)).then(|| channel(rng)),
        confidence: rng.random_range(0.3..=1.0),
    }
}

pub fn query<R: Rng>(rng: &mut R, t: i64) -> QueryRequest {
    QueryRequest {
        loc: point(rng),
        power: power(rng),
        time: t,
    }
}

/// Mixed command stream with non-decreasing time starting at `t0`.
pub fn commands<R: Rng>(rng: &mut R, n: usize, t0: i64) -> Vec<Command> {
    let a = area();
    let mut t = t0;
    let mut next_tv = 1u64;
    let mut out = Vec::with_capacity(n);
    if rng.random_bool(0.7) {
        let k = rng.random_range(1..4);
        out.push(Command::LoadTransmitters {
            transmitters: (0..k).map(|i| station(rng, i)).collect(),
        });
    }
    while out.len() < n {
        t += rng.random_range(0..20);
        let c = match rng.random_range(0..100) {
            0..=39 => Command::Query { request: query(rng, t) },
            40..=59 => Command::SpectrumReport { report: sensing(rng, t) },
            60..=79 => Command::TvEvent { event: tv_event(rng, t) },
            80..=86 => {
                let k = rng.random_range(1..6);
                let records = (0..k)
                    .map(|_| {
                        next_tv += 1;
                        record(rng, 1_000_000 + next_tv, t)
                    })
                    .collect();
                Command::LoadTvRecords { records }
            }
            87..=93 => {
                let c = a.cell_of(point(rng)).unwrap();
                Command::MarkSurveyed {
                    cells: a.cells_within(a.cell_center(c), rng.random_range(0.0..600.0)),
                    time: t,
                }
            }
            _ => Command::Expire { now: t },
        };
        out.push(c);
    }
    out
}

pub async fn call(router: &axum::Router, method: &str, uri: &str, body: Option<&Value>) -> (u16, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(b) => Body::from(serde_json::to_vec(b).unwrap()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn expected(r: tvws_core::Result<Outcome>) -> (u16, Value) {
    match r {
        Ok(Outcome::Query { response }) => (200, serde_json::to_value(response).unwrap()),
        Ok(Outcome::SpectrumAccepted { accepted, closed_tasks }) => {
            (200, json!({ "accepted": accepted, "closed_tasks": closed_tasks }))
        }
        Ok(Outcome::TvUpdated { tv_id }) => (200, json!({ "tv_id": tv_id })),
        Ok(Outcome::Loaded { count }) => (200, json!({ "count": count })),
        Ok(Outcome::Surveyed { count }) => (200, json!({ "count": count })),
        Ok(Outcome::Expired { count }) => (200, json!({ "count": count })),
        Err(e) => {
            let r = Rejection::from(e);
            (r.status, serde_json::to_value(r.body).unwrap())
        }
    }
}

/// Sends `cmd` through the HTTP router and applies it to `engine`, then
/// compares the two answers. Load acknowledgements are compared on the
/// count they report.
pub async fn drive(
    router: &axum::Router,
    service: &Service,
    clock: &ManualClock,
    engine: &mut Engine,
    cmd: &Command,
) -> Result<(), String> {
    let want = expected(engine.apply(cmd.clone()));
    let got = match cmd {
        Command::Query { request } => {
            clock.set(request.time);
            call(router, "POST", "/v1/query", Some(&serde_json::to_value(request).unwrap())).await
        }
        Command::SpectrumReport { report } => {
            clock.set(report.timestamp);
            call(router, "POST", "/v1/reports/spectrum", Some(&serde_json::to_value(report).unwrap())).await
        }
        Command::TvEvent { event } => {
            clock.set(event.timestamp);
            call(router, "POST", "/v1/reports/tv", Some(&serde_json::to_value(event).unwrap())).await
        }
        Command::LoadTransmitters { transmitters } => {
            let (s, v) = call(router, "POST", "/v1/admin/load", Some(&json!({ "transmitters": transmitters }))).await;
            (s, if s == 200 { json!({ "count": v["transmitters"] }) } else { v })
        }
        Command::LoadTvRecords { records } => {
            let (s, v) = call(router, "POST", "/v1/admin/load", Some(&json!({ "tv_records": records }))).await;
            (s, if s == 200 { json!({ "count": v["tv_records"] }) } else { v })
        }
        Command::MarkSurveyed { cells, time } => {
            let body = json!({ "surveyed": { "cells": cells, "time": time } });
            let (s, v) = call(router, "POST", "/v1/admin/load", Some(&body)).await;
            (s, if s == 200 { json!({ "count": v["surveyed"] }) } else { v })
        }
        Command::Expire { now } => {
            clock.set(*now);
            match service.expire() {
                Ok(count) => (200, json!({ "count": count })),
                Err(r) => (r.status, serde_json::to_value(r.body).unwrap()),
            }
        }
    };
    if got != want {
        return Err(format!("{cmd:?}\n  http: {got:?}\n  core: {want:?}"));
    }
    if let Command::Query { request } = cmd {
        let (s, tasks) = call(router, "GET", &format!("/v1/pull-tasks?now={}", request.time), None).await;
        let core = serde_json::to_value(engine.open_pull_tasks(None, request.time)).unwrap();
        if s != 200 || tasks != core {
            return Err(format!("pull tasks differ at {}: {tasks} vs {core}", request.time));
        }
    }
    Ok(())
}

pub async fn digest_of(router: &axum::Router) -> String {
    let (s, v) = call(router, "GET", "/v1/admin/digest", None).await;
    assert_eq!(s, 200);
    v["digest"].as_str().unwrap().to_string()
}

pub fn core_digest(engine: &Engine) -> String {
    state_digest(engine)
}

/// Submits `cmd` through the service's typed entry points, as the HTTP
/// handlers would. Rejections are expected for some random commands and
/// are ignored.
pub fn submit(service: &Service, clock: &ManualClock, cmd: &Command) {
    use tvws::wire::{AdminLoad, SurveyMark};
    let load = |transmitters, tv_records, surveyed| AdminLoad {
        transmitters,
        tv_records,
        surveyed,
    };
    let _ = match cmd.clone() {
        Command::Query { request } => {
            clock.set(request.time);
            service.query(request).map(drop)
        }
        Command::SpectrumReport { report } => {
            clock.set(report.timestamp);
            service.spectrum_report(report).map(drop)
        }
        Command::TvEvent { event } => {
            clock.set(event.timestamp);
            service.tv_event(event).map(drop)
        }
        Command::LoadTransmitters { transmitters } => service.admin_load(load(transmitters, vec![], None)).map(drop),
        Command::LoadTvRecords { records } => service.admin_load(load(vec![], records, None)).map(drop),
        Command::MarkSurveyed { cells, time } => {
            service.admin_load(load(vec![], vec![], Some(SurveyMark { cells, time }))).map(drop)
        }
        Command::Expire { now } => {
            clock.set(now);
            service.expire().map(drop)
        }
    };
}

/// Runs one random stream twice: once uninterrupted, once with a crash at
/// a random point (optionally leaving a torn log line) followed by
/// recovery from disk. Returns both final digests.
pub fn crash_run(seed: u64) -> (String, String) {
    use rand::SeedableRng;
    use std::io::Write as _;
    use tvws::persist::Store;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(10..80);
    let cmds = commands(&mut rng, n, 50_000);
    let crash_at = rng.random_range(0..=cmds.len());
    let snapshot_every = rng.random_range(1..12);
    let torn = rng.random_bool(0.5);

    let (plain, clock) = service_at(engine(), 50_000);
    for c in &cmds {
        submit(&plain, &clock, c);
    }
    let want = plain.digest().digest;

    let dir = tempfile::tempdir().unwrap();
    let open = || {
        let (store, e) = Store::open(dir.path(), snapshot_every, false, engine()).unwrap();
        let clock = Arc::new(ManualClock::new(50_000));
        (Service::new(e, Some(store), clock.clone(), DEFAULT_SKEW_S), clock)
    };
    let (svc, clock) = open();
    for c in &cmds[..crash_at] {
        submit(&svc, &clock, c);
    }
    drop(svc);
    if torn {
        let mut f = std::fs::OpenOptions::new()
            .append(true)
            .create(true)
            .open(dir.path().join("log.ndjson"))
            .unwrap();
        f.write_all(br#"{"seq":999999,"command":{"op":"tv_ev"#).unwrap();
    }
    let (svc, clock) = open();
    for c in &cmds[crash_at..] {
        submit(&svc, &clock, c);
    }
    (svc.digest().digest, want)
}
