//! Request handling shared by the HTTP server and in-process callers.
//!
//! A [`Service`] owns the engine behind one lock, so every request sees a
//! state that has either fully applied a command or not at all. Accepted
//! mutations are appended to the command log before the lock is released.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use tvws_core::engine::{Command, Engine, Outcome};
use tvws_core::registry::{Timestamp, TvDetectionEvent, WsdSensingReport};
use tvws_core::resolver::{PullTask, QueryRequest, QueryResponse};

use crate::persist::{state_digest, Store};
use crate::wire::{
    decode, AdminLoad, Digest, ErrorBody, LoadAck, PayloadKind, PullPoll, Rejection, SpectrumAck, TvAck,
};

pub const DEFAULT_SKEW_S: i64 = 120;

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs() as i64)
    }
}

/// Clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(t: Timestamp) -> Self {
        ManualClock(AtomicI64::new(t))
    }

    pub fn set(&self, t: Timestamp) {
        self.0.store(t, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Query,
    SpectrumReport,
    TvEvent,
    PullTasks,
    AdminLoad,
    Digest,
}

struct Node {
    engine: Engine,
    store: Option<Store>,
    applied: u64,
}

pub struct Service {
    node: Mutex<Node>,
    clock: Arc<dyn Clock>,
    skew_s: i64,
}

impl Service {
    pub fn new(engine: Engine, store: Option<Store>, clock: Arc<dyn Clock>, skew_s: i64) -> Self {
        let applied = store.as_ref().map_or(0, Store::seq);
        Service {
            node: Mutex::new(Node {
                engine,
                store,
                applied,
            }),
            clock,
            skew_s,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Node> {
        self.node.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// Read access to the current engine state.
    pub fn with_engine<R>(&self, f: impl FnOnce(&Engine) -> R) -> R {
        f(&self.lock().engine)
    }

    fn check_skew(&self, t: Timestamp) -> Result<(), Rejection> {
        let now = self.clock.now();
        if (t - now).abs() > self.skew_s {
            return Err(Rejection {
                status: 422,
                body: ErrorBody::new(
                    "timestamp_skew",
                    format!("timestamp {t} is more than {}s from server time {now}", self.skew_s),
                    Some("timestamp".into()),
                ),
            });
        }
        Ok(())
    }

    fn execute(&self, command: Command) -> Result<Outcome, Rejection> {
        let mut node = self.lock();
        let outcome = node.engine.apply(command.clone())?;
        let Node { engine, store, applied } = &mut *node;
        *applied += 1;
        if let Some(store) = store {
            store.append(&command, engine).map_err(|e| Rejection {
                status: 500,
                body: ErrorBody::new("storage", e.to_string(), None),
            })?;
        }
        Ok(outcome)
    }

    pub fn query(&self, request: QueryRequest) -> Result<QueryResponse, Rejection> {
        self.check_skew(request.time)?;
        match self.execute(Command::Query { request })? {
            Outcome::Query { response } => Ok(response),
            other => unreachable!("query produced {other:?}"),
        }
    }

    pub fn spectrum_report(&self, report: WsdSensingReport) -> Result<SpectrumAck, Rejection> {
        self.check_skew(report.timestamp)?;
        match self.execute(Command::SpectrumReport { report })? {
            Outcome::SpectrumAccepted { accepted, closed_tasks } => Ok(SpectrumAck { accepted, closed_tasks }),
            other => unreachable!("report produced {other:?}"),
        }
    }

    pub fn tv_event(&self, event: TvDetectionEvent) -> Result<TvAck, Rejection> {
        self.check_skew(event.timestamp)?;
        match self.execute(Command::TvEvent { event })? {
            Outcome::TvUpdated { tv_id } => Ok(TvAck { tv_id }),
            other => unreachable!("event produced {other:?}"),
        }
    }

    pub fn pull_tasks(&self, poll: &PullPoll) -> Vec<PullTask> {
        let now = poll.now.unwrap_or_else(|| self.clock.now());
        self.lock()
            .engine
            .open_pull_tasks(poll.contributor_id.as_deref(), now)
    }

    pub fn admin_load(&self, load: AdminLoad) -> Result<LoadAck, Rejection> {
        let mut ack = LoadAck {
            transmitters: 0,
            tv_records: 0,
            surveyed: 0,
        };
        if !load.transmitters.is_empty() {
            if let Outcome::Loaded { count } = self.execute(Command::LoadTransmitters {
                transmitters: load.transmitters,
            })? {
                ack.transmitters = count;
            }
        }
        if !load.tv_records.is_empty() {
            if let Outcome::Loaded { count } = self.execute(Command::LoadTvRecords {
                records: load.tv_records,
            })? {
                ack.tv_records = count;
            }
        }
        if let Some(mark) = load.surveyed {
            if let Outcome::Surveyed { count } = self.execute(Command::MarkSurveyed {
                cells: mark.cells,
                time: mark.time,
            })? {
                ack.surveyed = count;
            }
        }
        Ok(ack)
    }

    /// Runs one expiry sweep at server time.
    pub fn expire(&self) -> Result<usize, Rejection> {
        let now = self.clock.now();
        match self.execute(Command::Expire { now })? {
            Outcome::Expired { count } => Ok(count),
            other => unreachable!("expire produced {other:?}"),
        }
    }

    pub fn digest(&self) -> Digest {
        let node = self.lock();
        Digest {
            digest: state_digest(&node.engine),
            applied: node.applied,
        }
    }

    /// Decodes `body` for `route`, runs it, and returns the HTTP status and
    /// JSON reply.
    pub fn handle(&self, route: Route, body: &[u8]) -> (u16, serde_json::Value) {
        fn reply<T: Serialize>(r: Result<T, Rejection>) -> (u16, serde_json::Value) {
            match r {
                Ok(v) => (200, serde_json::to_value(v).expect("replies serialize")),
                Err(rej) => (rej.status, serde_json::to_value(rej.body).expect("errors serialize")),
            }
        }
        match route {
            Route::Query => reply(decode(PayloadKind::Query, body).and_then(|q| self.query(q))),
            Route::SpectrumReport => {
                reply(decode(PayloadKind::SpectrumReport, body).and_then(|r| self.spectrum_report(r)))
            }
            Route::TvEvent => reply(decode(PayloadKind::TvEvent, body).and_then(|e| self.tv_event(e))),
            Route::PullTasks => reply(decode::<PullPoll>(PayloadKind::PullPoll, body).map(|p| self.pull_tasks(&p))),
            Route::AdminLoad => reply(decode(PayloadKind::AdminLoad, body).and_then(|l| self.admin_load(l))),
            Route::Digest => reply(Ok::<_, Rejection>(self.digest())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvws_core::engine::EngineConfig;
    use tvws_core::geo::{AreaOfInterest, ChannelPlan};

    fn service(t: i64) -> (Service, Arc<ManualClock>) {
        let area = AreaOfInterest::new(1000.0, 1000.0, 50.0).unwrap();
        let engine = Engine::new(EngineConfig::new(area, ChannelPlan::uhf_range(21, 23).unwrap())).unwrap();
        let clock = Arc::new(ManualClock::new(t));
        (Service::new(engine, None, clock.clone(), DEFAULT_SKEW_S), clock)
    }

    #[test]
    fn query_on_empty_state_lists_plan() {
        let (s, _) = service(1000);
        let (status, body) = s.handle(
            Route::Query,
            br#"{"loc":{"x":10,"y":10},"power_mw":40,"time":1000}"#,
        );
        assert_eq!(status, 200);
        let r: QueryResponse = serde_json::from_value(body).unwrap();
        assert_eq!(r.channel_indices(), vec![21, 22, 23]);
    }

    #[test]
    fn status_codes() {
        let (s, _) = service(1000);
        let (status, body) = s.handle(Route::Query, br#"{"loc":{"x":10,"y":10},"time":1000}"#);
        assert_eq!(status, 422);
        assert_eq!(body["field"], "power_mw");
        let (status, _) = s.handle(Route::Query, br#"{"loc":{"x":-10,"y":10},"power_mw":1,"time":1000}"#);
        assert_eq!(status, 404);
        let (status, body) = s.handle(Route::Query, br#"{"loc":{"x":10,"y":10},"power_mw":1,"time":1500}"#);
        assert_eq!(status, 422);
        assert_eq!(body["code"], "timestamp_skew");
        let report = |t: i64| {
            format!(
                r#"{{"contributor_id":"w","loc":{{"x":5,"y":5}},"timestamp":{t},"readings":{{"21":-90}},"claimed_sensitivity_dbm":-114}}"#
            )
        };
        assert_eq!(s.handle(Route::SpectrumReport, report(1000).as_bytes()).0, 200);
        assert_eq!(s.handle(Route::SpectrumReport, report(900).as_bytes()).0, 409);
        assert_eq!(s.handle(Route::Digest, b"").0, 200);
    }
}
