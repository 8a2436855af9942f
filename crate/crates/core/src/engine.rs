//! The availability engine: evidence stores, cached per-query entries, pull
//! tasks, and the layered query flow. All mutation goes through
//! [`Engine::apply`] so that replaying the same commands rebuilds the same
//! state.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{distance, is_adjacent, AreaOfInterest, Cell, ChannelPlan, GeoPoint, PowerClass};
use crate::propagation::{protected_contour_radius, ContourModel};
use crate::protection::{max_power, SeparationRule};
use crate::registry::{
    OccupancyEvidence, PowerState, Registry, RegistryConfig, Timestamp, TvDetectionEvent,
    TvSetRecord, TvTransmitter, WsdSensingReport,
};
use crate::resolver::{
    compute_validity, AvailabilityEntry, ChannelGrant, EntryStatus, Persistence, PullTask,
    QueryRequest, QueryResponse, ResolverPolicy, SourceLayer,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub area: AreaOfInterest,
    pub plan: ChannelPlan,
    pub rule: SeparationRule,
    pub contour: ContourModel,
    pub registry: RegistryConfig,
    pub policy: ResolverPolicy,
}

impl EngineConfig {
    pub fn new(area: AreaOfInterest, plan: ChannelPlan) -> Self {
        EngineConfig {
            area,
            plan,
            rule: SeparationRule::standard(),
            contour: ContourModel::default(),
            registry: RegistryConfig::default(),
            policy: ResolverPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rule.criteria.validate()?;
        let p = &self.policy;
        if !(0.0..=1.0).contains(&p.reliability_threshold) {
            return Err(Error::invalid("reliability_threshold", "must lie in [0, 1]"));
        }
        if p.sensing_window_s <= 0 {
            return Err(Error::invalid("sensing_window_s", "must be positive"));
        }
        if p.validity.floor_s <= 0 {
            return Err(Error::invalid("floor_s", "must be positive"));
        }
        if self.rule.ladder().is_empty() {
            return Err(Error::invalid("ladder", "no power classes configured"));
        }
        Ok(())
    }
}

/// State-changing operations, in the form they are logged and replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    LoadTransmitters { transmitters: Vec<TvTransmitter> },
    LoadTvRecords { records: Vec<TvSetRecord> },
    MarkSurveyed { cells: Vec<Cell>, time: Timestamp },
    SpectrumReport { report: WsdSensingReport },
    TvEvent { event: TvDetectionEvent },
    Query { request: QueryRequest },
    Expire { now: Timestamp },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Loaded { count: usize },
    Surveyed { count: usize },
    SpectrumAccepted { accepted: bool, closed_tasks: Vec<u64> },
    TvUpdated { tv_id: Option<u64> },
    Query { response: QueryResponse },
    Expired { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CachedQuery {
    loc: GeoPoint,
    power: PowerClass,
    entries: Vec<AvailabilityEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Engine {
    config: EngineConfig,
    registry: Registry,
    /// Protected contour radius per transmitter id.
    contours: BTreeMap<String, f64>,
    #[serde(with = "crate::geo::cell_map")]
    cache: BTreeMap<Cell, Vec<CachedQuery>>,
    pull_tasks: BTreeMap<u64, PullTask>,
    next_task_id: u64,
}

/// How one channel was decided.
struct Decision {
    entry: AvailabilityEntry,
    wants_pull: bool,
}

impl Engine {
    pub fn new(mut config: EngineConfig) -> Result<Self> {
        config.validate()?;
        config.registry.sensing_threshold_dbm = config.rule.criteria.sensing_threshold_dbm;
        Ok(Engine {
            registry: Registry::new(config.area, config.registry),
            config,
            contours: BTreeMap::new(),
            cache: BTreeMap::new(),
            pull_tasks: BTreeMap::new(),
            next_task_id: 1,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn area(&self) -> &AreaOfInterest {
        &self.config.area
    }

    pub fn plan(&self) -> &ChannelPlan {
        &self.config.plan
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Applies one command. Errors leave the state untouched.
    pub fn apply(&mut self, command: Command) -> Result<Outcome> {
        match command {
            Command::LoadTransmitters { transmitters } => {
                let count = self.load_transmitters(transmitters)?;
                Ok(Outcome::Loaded { count })
            }
            Command::LoadTvRecords { records } => {
                let count = self.load_tv_records(records)?;
                Ok(Outcome::Loaded { count })
            }
            Command::MarkSurveyed { cells, time } => {
                let count = self.mark_surveyed(&cells, time)?;
                Ok(Outcome::Surveyed { count })
            }
            Command::SpectrumReport { report } => {
                let closed_tasks = self.ingest_sensing_report(report)?;
                Ok(Outcome::SpectrumAccepted {
                    accepted: true,
                    closed_tasks,
                })
            }
            Command::TvEvent { event } => {
                let tv_id = self.ingest_tv_event(event)?.map(|r| r.tv_id);
                Ok(Outcome::TvUpdated { tv_id })
            }
            Command::Query { request } => Ok(Outcome::Query {
                response: self.resolve_query(&request)?,
            }),
            Command::Expire { now } => Ok(Outcome::Expired {
                count: self.expire(now),
            }),
        }
    }

    // ----- ingestion -----

    pub fn load_transmitters(&mut self, transmitters: Vec<TvTransmitter>) -> Result<usize> {
        for tx in &transmitters {
            if !self.config.plan.contains(tx.channel.index) {
                return Err(Error::UnknownChannel(tx.channel.index));
            }
        }
        let n = self.registry.ingest_transmitters(transmitters)?;
        let min_field = self.config.rule.criteria.min_tv_field_dbu;
        self.contours = self
            .registry
            .transmitters()
            .map(|tx| {
                let r = protected_contour_radius(tx, min_field, &self.config.contour).unwrap_or(0.0);
                (tx.id.clone(), r)
            })
            .collect();
        self.cache.clear();
        Ok(n)
    }

    pub fn load_tv_records(&mut self, records: Vec<TvSetRecord>) -> Result<usize> {
        let area = self.config.area;
        for r in &records {
            if !area.is_valid_cell(r.cell) {
                let c = area.cell_rect(r.cell);
                return Err(Error::OutOfArea { x: c.x0, y: c.y0 });
            }
            if let Some(loc) = r.loc {
                if area.cell_of(loc)? != r.cell {
                    return Err(Error::invalid("cell", "location lies in a different cell"));
                }
            }
        }
        let n = records.len();
        for r in records {
            let p = r.loc.unwrap_or_else(|| area.cell_center(r.cell));
            self.registry.upsert_tv_record(r)?;
            self.invalidate_near(p);
        }
        Ok(n)
    }

    pub fn mark_surveyed(&mut self, cells: &[Cell], time: Timestamp) -> Result<usize> {
        if let Some(c) = cells.iter().find(|c| !self.config.area.is_valid_cell(**c)) {
            let r = self.config.area.cell_rect(*c);
            return Err(Error::OutOfArea { x: r.x0, y: r.y0 });
        }
        for &c in cells {
            self.registry.mark_surveyed(c, time);
            self.invalidate_near(self.config.area.cell_center(c));
        }
        Ok(cells.len())
    }

    /// Stores a sensing report and returns the pull tasks it closed.
    pub fn ingest_sensing_report(&mut self, report: WsdSensingReport) -> Result<Vec<u64>> {
        let ts = report.timestamp;
        let channels: Vec<u16> = report.readings.keys().copied().collect();
        let outcome = self.registry.ingest_sensing_report(report)?;
        self.cache.remove(&outcome.cell);
        let mut closed = Vec::new();
        for task in self.pull_tasks.values_mut() {
            if task.cell == outcome.cell && ts >= task.issued_at && ts <= task.deadline {
                task.channels.retain(|c| !channels.contains(c));
                if task.channels.is_empty() {
                    closed.push(task.task_id);
                }
            }
        }
        for id in &closed {
            self.pull_tasks.remove(id);
        }
        Ok(closed)
    }

    pub fn ingest_tv_event(&mut self, event: TvDetectionEvent) -> Result<Option<TvSetRecord>> {
        let area = self.config.area;
        let p = event
            .loc
            .or_else(|| event.cell.filter(|c| area.is_valid_cell(*c)).map(|c| area.cell_center(c)));
        let record = self.registry.ingest_tv_event(event)?;
        if let Some(p) = p {
            self.invalidate_near(p);
        }
        Ok(record)
    }

    /// Drops cached answers that a receiver change at `p` could affect.
    fn invalidate_near(&mut self, p: GeoPoint) {
        let area = self.config.area;
        let reach = self.max_separation() + area.cell_size() * 1.5;
        for cell in area.cells_within(p, reach) {
            self.cache.remove(&cell);
        }
    }

    fn max_separation(&self) -> f64 {
        self.config
            .rule
            .ladder()
            .iter()
            .filter_map(|&p| self.config.rule.separation(p).ok())
            .map(|s| s.co_m.max(s.adj_m))
            .fold(0.0, f64::max)
    }

    // ----- layers -----

    /// Transmitter-only availability at `cell`.
    pub fn layer1_free(&self, cell: Cell, channel: u16) -> bool {
        let center = self.config.area.cell_center(cell);
        self.registry.transmitters().all(|tx| {
            let ch = tx.channel.index;
            if ch != channel && !is_adjacent(ch, channel) {
                return true;
            }
            distance(center, tx.loc) >= self.contours.get(&tx.id).copied().unwrap_or(0.0)
        })
    }

    /// Transmitter-protected plan channels at `cell`, with the subset of
    /// stations' channels that caused each denial.
    fn layer1_blockers(&self, cell: Cell, channel: u16) -> Vec<u16> {
        let center = self.config.area.cell_center(cell);
        let mut out: Vec<u16> = self
            .registry
            .transmitters()
            .filter(|tx| tx.channel.index == channel || is_adjacent(tx.channel.index, channel))
            .filter(|tx| distance(center, tx.loc) < self.contours.get(&tx.id).copied().unwrap_or(0.0))
            .map(|tx| tx.channel.index)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn ladder_for(&self, power: PowerClass) -> Vec<PowerClass> {
        let mut ladder = self.config.rule.ladder();
        if !ladder.iter().any(|p| p.same_as(power)) {
            ladder.push(power);
            ladder.sort_by(|a, b| a.eirp_mw().total_cmp(&b.eirp_mw()));
        }
        ladder
    }

    fn confidently_vacant(&self, ev: &OccupancyEvidence) -> bool {
        let policy = &self.config.policy;
        ev.occupied == Some(false)
            && ev.n_usable >= policy.validity.k_min
            && ev.confidence >= policy.reliability_threshold
    }

    /// Every cell meeting the disk has been surveyed recently enough.
    fn area_surveyed(&self, loc: GeoPoint, radius: f64, now: Timestamp) -> bool {
        let max_age = self.config.policy.survey_max_age_s;
        self.config.area.cells_within(loc, radius).iter().all(|c| {
            self.registry
                .surveyed_at(*c)
                .is_some_and(|t| t <= now && now - t <= max_age)
        })
    }

    /// Record as the receiver-awareness layer must treat it: sets whose
    /// state is uncertain are assumed on.
    fn conservative(&self, r: &TvSetRecord) -> TvSetRecord {
        let reliable = r.reliability >= self.config.policy.reliability_threshold;
        if reliable && r.state != PowerState::Unknown {
            return r.clone();
        }
        let mut c = r.clone();
        if c.state != PowerState::On {
            c.tuned = None;
        }
        c.state = PowerState::On;
        c
    }

    fn decide(
        &self,
        req: &QueryRequest,
        cell: Cell,
        channel: u16,
        ladder: &[PowerClass],
        near: &[&TvSetRecord],
        surveyed: bool,
    ) -> Result<Decision> {
        let cfg = &self.config;
        let policy = &cfg.policy;
        let area = &cfg.area;
        let t = req.time;
        let geodb_free = policy.layers.geodb && self.layer1_free(cell, channel);

        let occupied = |layer: SourceLayer, reliability: f64| AvailabilityEntry {
            cell,
            channel,
            status: EntryStatus::Occupied,
            max_power: None,
            source_layer: layer,
            reliability,
            persistence: Persistence::Volatile,
            created_at: t,
            valid_until: t + policy.occupied_validity_s.max(1),
        };
        let usable = |mp: Option<PowerClass>| mp.filter(|p| p.eirp_mw() >= req.power.eirp_mw());

        if geodb_free {
            // Receiver records still veto; the transmitter layer cannot see them.
            let mp = usable(max_power(req.loc, channel, near.iter().copied(), ladder, &cfg.rule, area, policy.unknown_tuning)?);
            let entry = match mp {
                Some(mp) => AvailabilityEntry {
                    cell,
                    channel,
                    status: EntryStatus::Free,
                    max_power: Some(mp),
                    source_layer: SourceLayer::Geodb,
                    reliability: 1.0,
                    persistence: Persistence::Static,
                    created_at: t,
                    valid_until: t + compute_validity(SourceLayer::Geodb, 1.0, 0, &policy.validity),
                },
                None => occupied(SourceLayer::TvAwareness, 1.0),
            };
            return Ok(Decision {
                entry,
                wants_pull: false,
            });
        }

        let mut wants_pull = false;
        if policy.layers.wsd_sensing {
            let mut checks = self.layer1_blockers(cell, channel);
            if !checks.contains(&channel) {
                checks.push(channel);
            }
            let evidence: Vec<OccupancyEvidence> = checks
                .iter()
                .map(|&c| {
                    self.registry
                        .occupancy_evidence(cell, c, t, policy.sensing_window_s, policy.fusion)
                })
                .collect();
            let all_vacant = evidence.iter().all(|ev| self.confidently_vacant(ev));
            if evidence.iter().any(|ev| ev.occupied == Some(true)) {
                // Signal present: nothing to gain from asking again.
            } else if !all_vacant {
                wants_pull = true;
            } else if policy.sensing_overrides_contour {
                let mp = usable(max_power(req.loc, channel, near.iter().copied(), ladder, &cfg.rule, area, policy.unknown_tuning)?);
                if let Some(mp) = mp {
                    let reliability = evidence.iter().map(|e| e.confidence).fold(1.0, f64::min);
                    let n = evidence.iter().map(|e| e.n_usable).min().unwrap_or(0);
                    return Ok(Decision {
                        entry: AvailabilityEntry {
                            cell,
                            channel,
                            status: EntryStatus::Free,
                            max_power: Some(mp),
                            source_layer: SourceLayer::WsdSensing,
                            reliability,
                            persistence: Persistence::QuasiStatic,
                            created_at: t,
                            valid_until: t + compute_validity(SourceLayer::WsdSensing, reliability, n, &policy.validity),
                        },
                        wants_pull: false,
                    });
                }
            }
        }

        if policy.layers.tv_awareness && surveyed {
            let treated: Vec<TvSetRecord> = near.iter().map(|r| self.conservative(r)).collect();
            let mp = usable(max_power(req.loc, channel, treated.iter(), ladder, &cfg.rule, area, policy.unknown_tuning)?);
            if let Some(mp) = mp {
                let theta = policy.reliability_threshold;
                let reliable: Vec<&&TvSetRecord> = near
                    .iter()
                    .filter(|r| r.reliability >= theta && r.state != PowerState::Unknown)
                    .collect();
                let reliability = reliable.iter().map(|r| r.reliability).fold(1.0, f64::min);
                // Records loaded directly carry no observations; they count
                // as fully backed.
                let n = reliable
                    .iter()
                    .map(|r| {
                        if r.recent.is_empty() {
                            policy.validity.k_min
                        } else {
                            r.conforming_contributors(cfg.registry.agreement_window_s)
                        }
                    })
                    .min()
                    .unwrap_or(policy.validity.k_min);
                let history_ok = !near.is_empty()
                    && near.iter().map(|r| r.first_seen).min().is_some_and(|f| t - f >= policy.profile_history_s)
                    && near.iter().all(|r| {
                        r.viewing_histogram
                            .iter()
                            .all(|(&c, &w)| w <= 0.0 || (c != channel && !is_adjacent(c, channel)))
                    });
                return Ok(Decision {
                    entry: AvailabilityEntry {
                        cell,
                        channel,
                        status: EntryStatus::Free,
                        max_power: Some(mp),
                        source_layer: SourceLayer::TvAwareness,
                        reliability,
                        persistence: if history_ok {
                            Persistence::QuasiStatic
                        } else {
                            Persistence::Volatile
                        },
                        created_at: t,
                        valid_until: t + compute_validity(SourceLayer::TvAwareness, reliability, n, &policy.validity),
                    },
                    wants_pull,
                });
            }
            return Ok(Decision {
                entry: occupied(SourceLayer::TvAwareness, 1.0),
                wants_pull,
            });
        }

        let layer = if policy.layers.wsd_sensing {
            SourceLayer::WsdSensing
        } else {
            SourceLayer::Geodb
        };
        Ok(Decision {
            entry: occupied(layer, 0.0),
            wants_pull,
        })
    }

    // ----- queries -----

    /// Answers a white-space query, materializing and caching one entry per
    /// plan channel. Free channels are listed with the highest usable power.
    pub fn resolve_query(&mut self, req: &QueryRequest) -> Result<QueryResponse> {
        let cell = self.config.area.cell_of(req.loc)?;
        let sep = self.config.rule.separation(req.power)?;
        let ladder = self.ladder_for(req.power);
        let t = req.time;

        let cached: Option<Vec<AvailabilityEntry>> = self.cache.get(&cell).and_then(|qs| {
            qs.iter()
                .find(|q| q.loc == req.loc && q.power.same_as(req.power))
                .map(|q| q.entries.clone())
        });
        let fresh = |e: &AvailabilityEntry| {
            e.status != EntryStatus::Unknown && e.created_at <= t && t <= e.valid_until
        };

        let mut entries = Vec::with_capacity(self.config.plan.len());
        let mut pull_channels = Vec::new();
        let needs_eval = cached
            .as_ref()
            .is_none_or(|c| c.len() != self.config.plan.len() || !c.iter().all(fresh));
        if needs_eval {
            let max_sep = ladder
                .iter()
                .filter_map(|&p| self.config.rule.separation(p).ok())
                .map(|s| s.co_m.max(s.adj_m))
                .fold(sep.co_m.max(sep.adj_m), f64::max);
            let near = self.registry.tv_sets_near(req.loc, max_sep);
            let surveyed = self.config.policy.layers.tv_awareness
                && self.area_surveyed(req.loc, sep.co_m.max(sep.adj_m), t);
            for (k, channel) in self.config.plan.indices().enumerate() {
                if let Some(prev) = cached.as_ref().and_then(|c| c.get(k)).filter(|e| fresh(e) && e.channel == channel) {
                    entries.push(prev.clone());
                    continue;
                }
                let d = self.decide(req, cell, channel, &ladder, &near, surveyed)?;
                if d.wants_pull && d.entry.status != EntryStatus::Free {
                    pull_channels.push(channel);
                }
                entries.push(d.entry);
            }
        } else {
            entries = cached.unwrap_or_default();
        }

        if !pull_channels.is_empty() {
            self.open_pull_task(cell, pull_channels, t);
        }

        let response = QueryResponse {
            cell,
            channels: entries
                .iter()
                .filter(|e| e.status == EntryStatus::Free)
                .map(|e| ChannelGrant {
                    channel: e.channel,
                    max_power: e.max_power.expect("free entries carry a power"),
                    valid_until: e.valid_until,
                    reliability: e.reliability,
                    source_layer: e.source_layer,
                })
                .collect(),
        };
        let slot = self.cache.entry(cell).or_default();
        match slot
            .iter_mut()
            .find(|q| q.loc == req.loc && q.power.same_as(req.power))
        {
            Some(q) => q.entries = entries,
            None => slot.push(CachedQuery {
                loc: req.loc,
                power: req.power,
                entries,
            }),
        }
        Ok(response)
    }

    fn open_pull_task(&mut self, cell: Cell, channels: Vec<u16>, now: Timestamp) {
        if let Some(task) = self
            .pull_tasks
            .values_mut()
            .find(|t| t.cell == cell && t.deadline >= now)
        {
            for c in channels {
                if !task.channels.contains(&c) {
                    task.channels.push(c);
                }
            }
            task.channels.sort_unstable();
            return;
        }
        let id = self.next_task_id;
        self.next_task_id += 1;
        self.pull_tasks.insert(
            id,
            PullTask {
                task_id: id,
                cell,
                channels,
                issued_at: now,
                deadline: now + self.config.policy.pull_deadline_s,
            },
        );
    }

    /// Outstanding pull tasks at `now`. With a contributor hint, tasks
    /// closest to that contributor's last reported location come first.
    pub fn open_pull_tasks(&self, contributor_hint: Option<&str>, now: Timestamp) -> Vec<PullTask> {
        let mut tasks: Vec<PullTask> = self
            .pull_tasks
            .values()
            .filter(|t| t.deadline >= now)
            .cloned()
            .collect();
        if let Some(loc) = contributor_hint
            .and_then(|id| self.registry.contributor(id))
            .and_then(|p| p.last_loc)
        {
            let area = self.config.area;
            tasks.sort_by(|a, b| {
                distance(area.cell_center(a.cell), loc)
                    .total_cmp(&distance(area.cell_center(b.cell), loc))
                    .then(a.task_id.cmp(&b.task_id))
            });
        }
        tasks
    }

    /// Cached entries, for inspection.
    pub fn entries(&self) -> impl Iterator<Item = &AvailabilityEntry> {
        self.cache.values().flatten().flat_map(|q| q.entries.iter())
    }

    /// Marks every cached entry whose validity has lapsed as unknown and
    /// returns how many changed. Also drops overdue pull tasks and stale
    /// raw evidence.
    pub fn expire(&mut self, now: Timestamp) -> usize {
        let mut count = 0;
        for q in self.cache.values_mut().flatten() {
            for e in q.entries.iter_mut() {
                if e.status != EntryStatus::Unknown && e.valid_until < now {
                    e.status = EntryStatus::Unknown;
                    count += 1;
                }
            }
        }
        let keep_for = self.config.policy.validity.geodb_s;
        self.cache.retain(|_, qs| {
            qs.retain(|q| q.entries.iter().any(|e| e.valid_until >= now - keep_for));
            !qs.is_empty()
        });
        self.pull_tasks.retain(|_, t| t.deadline >= now);
        self.registry.prune(now);
        count
    }
}
