//! Evidence stores: licensed transmitters, crowd-sourced spectrum sensing
//! reports, and TV-set detection events aggregated into receiver records.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{distance, AreaOfInterest, Cell, Channel, GeoPoint};
use crate::math::log10;
use crate::propagation::ERP_TO_EIRP_DB;
use crate::resolver::{compute_reliability, Evidence};

/// Seconds since an arbitrary epoch shared by all parties.
pub type Timestamp = i64;

/// FCC sensing detection threshold for TV signals, dBm.
pub const DEFAULT_SENSING_THRESHOLD_DBM: f64 = -107.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvTransmitter {
    pub id: String,
    pub loc: GeoPoint,
    pub channel: Channel,
    pub erp_w: f64,
    pub antenna_height_m: f64,
}

impl TvTransmitter {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("id", "transmitter id is empty"));
        }
        if !self.loc.is_finite() {
            return Err(Error::invalid("loc", "must be finite"));
        }
        if !(self.erp_w.is_finite() && self.erp_w > 0.0) {
            return Err(Error::invalid("erp_w", "must be positive"));
        }
        if !(self.antenna_height_m.is_finite() && self.antenna_height_m > 0.0) {
            return Err(Error::invalid("antenna_height_m", "must be positive"));
        }
        Ok(())
    }

    pub fn eirp_dbm(&self) -> f64 {
        10.0 * log10(self.erp_w * 1000.0) + ERP_TO_EIRP_DB
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsdSensingReport {
    pub contributor_id: String,
    pub loc: GeoPoint,
    pub timestamp: Timestamp,
    /// Received power per channel index, dBm.
    #[serde(deserialize_with = "crate::geo::channel_map::deserialize")]
    pub readings: BTreeMap<u16, f64>,
    pub claimed_sensitivity_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presence {
    Present,
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerState {
    On,
    Off,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvDetectionEvent {
    pub contributor_id: String,
    /// Set by sources that know which record they describe (smart TVs, or a
    /// phone repeating a previously returned id).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc: Option<GeoPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<Cell>,
    pub timestamp: Timestamp,
    pub presence: Presence,
    pub power_state: PowerState,
    #[serde(default)]
    pub tuned_channel: Option<u16>,
    pub confidence: f64,
}

/// One contributor observation retained on a receiver record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub contributor_id: String,
    pub timestamp: Timestamp,
    pub state: PowerState,
    pub tuned: Option<u16>,
    pub confidence: f64,
    pub trust: f64,
}

impl Observation {
    fn weight(&self) -> f64 {
        self.confidence * self.trust
    }

    fn agrees_with(&self, state: PowerState, tuned: Option<u16>) -> bool {
        if self.state != state {
            return false;
        }
        match (state, self.tuned, tuned) {
            (PowerState::On, Some(a), Some(b)) => a == b,
            _ => true,
        }
    }
}

/// Aggregated state of one TV receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvSetRecord {
    pub tv_id: u64,
    pub cell: Cell,
    /// Best location estimate; `None` when only the cell is known.
    pub loc: Option<GeoPoint>,
    pub state: PowerState,
    pub tuned: Option<u16>,
    pub reliability: f64,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
    /// Number of events that reported each channel as being watched.
    #[serde(default, deserialize_with = "crate::geo::channel_map::deserialize")]
    pub viewing_histogram: BTreeMap<u16, f64>,
    #[serde(default)]
    pub recent: Vec<Observation>,
    #[serde(default)]
    state_since: Timestamp,
    #[serde(default)]
    state_weight: f64,
}

impl TvSetRecord {
    /// Record with a directly asserted state, for fixtures and bulk loads.
    pub fn new(
        tv_id: u64,
        cell: Cell,
        loc: Option<GeoPoint>,
        state: PowerState,
        tuned: Option<u16>,
        reliability: f64,
        seen: Timestamp,
    ) -> Self {
        TvSetRecord {
            tv_id,
            cell,
            loc,
            state,
            tuned,
            reliability: reliability.clamp(0.0, 1.0),
            first_seen: seen,
            last_seen: seen,
            viewing_histogram: BTreeMap::new(),
            recent: Vec::new(),
            state_since: seen,
            state_weight: 0.0,
        }
    }

    /// Distance to `p`, measured to the nearest point of the record's cell
    /// when no point location is known.
    pub fn distance_to(&self, p: GeoPoint, area: &AreaOfInterest) -> f64 {
        match self.loc {
            Some(loc) => distance(loc, p),
            None => area.cell_rect(self.cell).distance_to(p),
        }
    }

    fn position_or_center(&self, area: &AreaOfInterest) -> GeoPoint {
        self.loc.unwrap_or_else(|| area.cell_center(self.cell))
    }

    /// Channels with positive viewing weight.
    pub fn profile_support(&self) -> impl Iterator<Item = u16> + '_ {
        self.viewing_histogram
            .iter()
            .filter(|(_, &w)| w > 0.0)
            .map(|(&c, _)| c)
    }

    /// Distinct contributors backing the current state.
    pub fn conforming_contributors(&self, agreement_window: i64) -> usize {
        let mut ids: Vec<&str> = self
            .recent
            .iter()
            .filter(|o| o.timestamp >= self.state_since - agreement_window)
            .filter(|o| o.agrees_with(self.state, self.tuned))
            .map(|o| o.contributor_id.as_str())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributorProfile {
    pub contributor_id: String,
    pub trust: f64,
    pub report_count: u64,
    pub conflict_count: u64,
    pub latest_timestamp: Option<Timestamp>,
    #[serde(default)]
    pub last_loc: Option<GeoPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustPolicy {
    pub initial: f64,
    pub reward: f64,
    pub penalty: f64,
}

impl Default for TrustPolicy {
    fn default() -> Self {
        TrustPolicy {
            initial: 0.5,
            reward: 0.01,
            penalty: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistryConfig {
    pub sensing_threshold_dbm: f64,
    /// How far a report may lag its contributor's latest report, seconds.
    pub max_backward_skew_s: i64,
    /// Raw reports and observations older than this are dropped, seconds.
    pub retention_s: i64,
    /// Observations this close to the latest state change count toward
    /// record reliability, seconds.
    pub agreement_window_s: i64,
    /// Weight of conflicting evidence in the reliability formula.
    pub conflict_weight: f64,
    pub trust: TrustPolicy,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        RegistryConfig {
            sensing_threshold_dbm: DEFAULT_SENSING_THRESHOLD_DBM,
            max_backward_skew_s: 60,
            retention_s: 24 * 3600,
            agreement_window_s: 60,
            conflict_weight: 1.0,
            trust: TrustPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FusionRule {
    Or,
    KOfN { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEvidence {
    /// `None` when no report covers the channel in the window.
    pub occupied: Option<bool>,
    pub confidence: f64,
    /// Distinct contributors with a reading in the window.
    pub n_reports: usize,
    /// Of those, contributors whose sensitivity meets the threshold.
    pub n_usable: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingOutcome {
    pub cell: Cell,
    pub conforming: bool,
}

/// The three evidence stores plus contributor trust.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    area: AreaOfInterest,
    config: RegistryConfig,
    transmitters: BTreeMap<String, TvTransmitter>,
    #[serde(with = "crate::geo::cell_map")]
    reports: BTreeMap<Cell, Vec<WsdSensingReport>>,
    contributors: BTreeMap<String, ContributorProfile>,
    tv_sets: BTreeMap<u64, TvSetRecord>,
    #[serde(with = "crate::geo::cell_map")]
    tv_cells: BTreeMap<Cell, Vec<u64>>,
    /// Latest time each cell was swept for receivers.
    #[serde(default, with = "crate::geo::cell_map")]
    surveyed: BTreeMap<Cell, Timestamp>,
    next_tv_id: u64,
}

impl Registry {
    pub fn new(area: AreaOfInterest, config: RegistryConfig) -> Self {
        Registry {
            area,
            config,
            transmitters: BTreeMap::new(),
            reports: BTreeMap::new(),
            contributors: BTreeMap::new(),
            tv_sets: BTreeMap::new(),
            tv_cells: BTreeMap::new(),
            surveyed: BTreeMap::new(),
            next_tv_id: 1,
        }
    }

    pub fn area(&self) -> &AreaOfInterest {
        &self.area
    }

    pub fn config(&self) -> &RegistryConfig {
        &self.config
    }

    // ----- Layer 1: transmitters -----

    /// Inserts or replaces transmitters by id. Returns how many were stored.
    pub fn ingest_transmitters<I>(&mut self, records: I) -> Result<usize>
    where
        I: IntoIterator<Item = TvTransmitter>,
    {
        let records: Vec<TvTransmitter> = records.into_iter().collect();
        for r in &records {
            r.validate()?;
        }
        let n = records.len();
        for r in records {
            self.transmitters.insert(r.id.clone(), r);
        }
        Ok(n)
    }

    pub fn transmitters(&self) -> impl Iterator<Item = &TvTransmitter> {
        self.transmitters.values()
    }

    pub fn transmitter_count(&self) -> usize {
        self.transmitters.len()
    }

    // ----- Contributors -----

    pub fn contributor(&self, id: &str) -> Option<&ContributorProfile> {
        self.contributors.get(id)
    }

    pub fn contributors(&self) -> impl Iterator<Item = &ContributorProfile> {
        self.contributors.values()
    }

    pub fn trust_of(&self, id: &str) -> f64 {
        self.contributors
            .get(id)
            .map_or(self.config.trust.initial, |p| p.trust)
    }

    fn profile_mut(&mut self, id: &str) -> &mut ContributorProfile {
        let initial = self.config.trust.initial;
        self.contributors
            .entry(String::from(id))
            .or_insert_with(|| ContributorProfile {
                contributor_id: String::from(id),
                trust: initial,
                report_count: 0,
                conflict_count: 0,
                latest_timestamp: None,
                last_loc: None,
            })
    }

    fn settle_trust(&mut self, id: &str, conforming: Option<bool>) {
        let policy = self.config.trust;
        let p = self.profile_mut(id);
        p.report_count += 1;
        match conforming {
            Some(true) => p.trust = (p.trust + policy.reward).clamp(0.0, 1.0),
            Some(false) => {
                p.trust = (p.trust - policy.penalty).clamp(0.0, 1.0);
                p.conflict_count += 1;
            }
            None => {}
        }
    }

    fn check_timestamp(&self, id: &str, timestamp: Timestamp) -> Result<()> {
        if let Some(latest) = self.contributors.get(id).and_then(|p| p.latest_timestamp) {
            if timestamp < latest - self.config.max_backward_skew_s {
                return Err(Error::StaleTimestamp {
                    contributor: String::from(id),
                    timestamp,
                    latest,
                });
            }
        }
        Ok(())
    }

    fn note_timestamp(&mut self, id: &str, timestamp: Timestamp, loc: Option<GeoPoint>) {
        let p = self.profile_mut(id);
        if loc.is_some() && p.latest_timestamp.is_none_or(|t| timestamp >= t) {
            p.last_loc = loc;
        }
        p.latest_timestamp = Some(p.latest_timestamp.map_or(timestamp, |t| t.max(timestamp)));
    }

    // ----- Layer 2: spectrum sensing -----

    fn detects(&self, reading_dbm: f64) -> bool {
        reading_dbm >= self.config.sensing_threshold_dbm
    }

    /// A sensor whose sensitivity is worse than the detection threshold can
    /// report signals but cannot establish that a channel is vacant.
    pub fn is_usable_for_vacancy(&self, report: &WsdSensingReport) -> bool {
        report.claimed_sensitivity_dbm <= self.config.sensing_threshold_dbm
    }

    /// Stores a push-mode sensing report. The returned outcome says whether
    /// it agreed with the cell's recent reports.
    pub fn ingest_sensing_report(&mut self, report: WsdSensingReport) -> Result<SensingOutcome> {
        let cell = self.area.cell_of(report.loc)?;
        if report.contributor_id.is_empty() {
            return Err(Error::invalid("contributor_id", "is empty"));
        }
        if report.readings.is_empty() {
            return Err(Error::invalid("readings", "report carries no readings"));
        }
        if report.readings.values().any(|v| !v.is_finite()) {
            return Err(Error::invalid("readings", "readings must be finite"));
        }
        if !report.claimed_sensitivity_dbm.is_finite() {
            return Err(Error::invalid("claimed_sensitivity_dbm", "must be finite"));
        }
        self.check_timestamp(&report.contributor_id, report.timestamp)?;

        let conforming = self.sensing_conformity(cell, &report);
        self.note_timestamp(&report.contributor_id, report.timestamp, Some(report.loc));
        self.settle_trust(&report.contributor_id, conforming);

        let retention = self.config.retention_s;
        let bucket = self.reports.entry(cell).or_default();
        bucket.push(report);
        let newest = bucket.iter().map(|r| r.timestamp).max().unwrap_or(0);
        bucket.retain(|r| r.timestamp >= newest - retention);
        Ok(SensingOutcome {
            cell,
            conforming: conforming.unwrap_or(true),
        })
    }

    /// Per-channel majority of other contributors' recent detections in the
    /// cell; `None` when nobody else reported on any of the same channels.
    fn sensing_conformity(&self, cell: Cell, report: &WsdSensingReport) -> Option<bool> {
        let peers = self.reports.get(&cell)?;
        let window = self.config.retention_s.min(3600);
        let mut compared = false;
        for (&ch, &reading) in &report.readings {
            let (mut yes, mut total) = (0usize, 0usize);
            for peer in peers.iter().filter(|p| {
                p.contributor_id != report.contributor_id
                    && (p.timestamp - report.timestamp).abs() <= window
            }) {
                if let Some(&r) = peer.readings.get(&ch) {
                    total += 1;
                    yes += self.detects(r) as usize;
                }
            }
            if total == 0 {
                continue;
            }
            compared = true;
            let majority = 2 * yes > total;
            let tie = 2 * yes == total;
            if !tie && majority != self.detects(reading) {
                return Some(false);
            }
        }
        compared.then_some(true)
    }

    pub fn reports_in(&self, cell: Cell) -> &[WsdSensingReport] {
        self.reports.get(&cell).map_or(&[], |v| v.as_slice())
    }

    /// Fuses the latest in-window reading of every contributor in `cell`.
    pub fn occupancy_evidence(
        &self,
        cell: Cell,
        channel: u16,
        now: Timestamp,
        window_s: i64,
        fusion: FusionRule,
    ) -> OccupancyEvidence {
        let mut latest: BTreeMap<&str, &WsdSensingReport> = BTreeMap::new();
        for r in self.reports_in(cell) {
            if r.timestamp > now || r.timestamp < now - window_s || !r.readings.contains_key(&channel) {
                continue;
            }
            let slot = latest.entry(r.contributor_id.as_str()).or_insert(r);
            if r.timestamp > slot.timestamp {
                *slot = r;
            }
        }
        let n_reports = latest.len();
        if n_reports == 0 {
            return OccupancyEvidence {
                occupied: None,
                confidence: 0.0,
                n_reports: 0,
                n_usable: 0,
            };
        }
        let detections = latest
            .values()
            .filter(|r| self.detects(r.readings[&channel]))
            .count();
        let occupied = match fusion {
            FusionRule::Or => detections > 0,
            FusionRule::KOfN { k } => detections >= k.max(1),
        };
        let mut conforming = Vec::new();
        let mut conflicting = Vec::new();
        let mut n_usable = 0;
        for r in latest.values() {
            let usable = self.is_usable_for_vacancy(r);
            n_usable += usable as usize;
            let e = Evidence {
                confidence: 1.0,
                trust: self.trust_of(&r.contributor_id),
            };
            let detected = self.detects(r.readings[&channel]);
            if detected == occupied {
                if occupied || usable {
                    conforming.push(e);
                }
            } else {
                conflicting.push(e);
            }
        }
        OccupancyEvidence {
            occupied: Some(occupied),
            confidence: compute_reliability(&conforming, &conflicting, self.config.conflict_weight),
            n_reports,
            n_usable,
        }
    }

    // ----- Layer 3: TV receivers -----

    pub fn tv_record(&self, tv_id: u64) -> Option<&TvSetRecord> {
        self.tv_sets.get(&tv_id)
    }

    pub fn tv_records(&self) -> impl Iterator<Item = &TvSetRecord> {
        self.tv_sets.values()
    }

    pub fn tv_count(&self) -> usize {
        self.tv_sets.len()
    }

    /// Inserts a record as-is (fixtures, bulk loads). A zero `tv_id` gets
    /// the next free id. Returns the id used.
    pub fn upsert_tv_record(&mut self, mut record: TvSetRecord) -> Result<u64> {
        if !self.area.is_valid_cell(record.cell) {
            let c = self.area.cell_center(record.cell);
            return Err(Error::OutOfArea { x: c.x, y: c.y });
        }
        if let Some(loc) = record.loc {
            if self.area.cell_of(loc)? != record.cell {
                return Err(Error::invalid("cell", "location lies in a different cell"));
            }
        }
        if record.tv_id == 0 {
            record.tv_id = self.next_tv_id;
        }
        self.next_tv_id = self.next_tv_id.max(record.tv_id + 1);
        record.reliability = record.reliability.clamp(0.0, 1.0);
        if let Some(old) = self.tv_sets.remove(&record.tv_id) {
            self.unindex(old.tv_id, old.cell);
        }
        self.tv_cells.entry(record.cell).or_default().push(record.tv_id);
        let id = record.tv_id;
        self.tv_sets.insert(id, record);
        Ok(id)
    }

    fn unindex(&mut self, id: u64, cell: Cell) {
        if let Some(ids) = self.tv_cells.get_mut(&cell) {
            ids.retain(|&x| x != id);
            if ids.is_empty() {
                self.tv_cells.remove(&cell);
            }
        }
    }

    fn event_cell(&self, event: &TvDetectionEvent) -> Result<Cell> {
        match (event.loc, event.cell) {
            (Some(loc), _) => self.area.cell_of(loc),
            (None, Some(cell)) if self.area.is_valid_cell(cell) => Ok(cell),
            (None, Some(cell)) => {
                let c = self.area.cell_rect(cell);
                Err(Error::OutOfArea { x: c.x0, y: c.y0 })
            }
            (None, None) => Err(Error::invalid("loc", "event needs a location or a cell")),
        }
    }

    fn match_record(&self, event: &TvDetectionEvent, cell: Cell) -> Option<u64> {
        let ids = self.tv_cells.get(&cell)?;
        match event.loc {
            Some(p) => ids
                .iter()
                .map(|id| (id, self.tv_sets[id].position_or_center(&self.area)))
                .min_by(|a, b| {
                    distance(a.1, p)
                        .total_cmp(&distance(b.1, p))
                        .then(a.0.cmp(b.0))
                })
                .map(|(&id, _)| id),
            None => ids.iter().min().copied(),
        }
    }

    /// Folds one detection event into the matching receiver record (or a new
    /// one). Returns the updated record, or `None` for an absence report
    /// that matched nothing.
    pub fn ingest_tv_event(&mut self, event: TvDetectionEvent) -> Result<Option<TvSetRecord>> {
        let cell = self.event_cell(&event)?;
        if event.contributor_id.is_empty() {
            return Err(Error::invalid("contributor_id", "is empty"));
        }
        if !(0.0..=1.0).contains(&event.confidence) {
            return Err(Error::invalid("confidence", "must lie in [0, 1]"));
        }
        self.check_timestamp(&event.contributor_id, event.timestamp)?;

        let matched = match event.tv_id {
            Some(id) => match self.tv_sets.get(&id) {
                Some(r) if r.cell == cell => Some(id),
                Some(_) => {
                    return Err(Error::invalid("tv_id", "record lives in another cell"));
                }
                None => return Err(Error::invalid("tv_id", "no such TV record")),
            },
            None => self.match_record(&event, cell),
        };
        self.mark_surveyed(cell, event.timestamp);
        if matched.is_none() && event.presence == Presence::Absent {
            self.note_timestamp(&event.contributor_id, event.timestamp, event.loc);
            self.settle_trust(&event.contributor_id, None);
            return Ok(None);
        }

        let id = match matched {
            Some(id) => id,
            None => {
                let id = self.next_tv_id;
                self.next_tv_id += 1;
                let mut r = TvSetRecord::new(id, cell, event.loc, PowerState::Unknown, None, 0.0, event.timestamp);
                r.state_since = i64::MIN;
                self.tv_cells.entry(cell).or_default().push(id);
                self.tv_sets.insert(id, r);
                id
            }
        };

        let (state, tuned) = match (event.presence, event.power_state) {
            (Presence::Absent, _) | (_, PowerState::Off) => (PowerState::Off, None),
            (Presence::Present, PowerState::On) => (PowerState::On, event.tuned_channel),
            (Presence::Present, PowerState::Unknown) => (PowerState::Unknown, event.tuned_channel),
        };
        let obs = Observation {
            contributor_id: event.contributor_id.clone(),
            timestamp: event.timestamp,
            state,
            tuned,
            confidence: event.confidence,
            trust: self.trust_of(&event.contributor_id),
        };
        let cfg = self.config;
        let record = self.tv_sets.get_mut(&id).expect("record exists");
        if let Some(loc) = event.loc {
            record.loc = Some(loc);
        }
        if let Some(ch) = event.tuned_channel {
            *record.viewing_histogram.entry(ch).or_insert(0.0) += 1.0;
        }
        let w = obs.weight();
        if obs.timestamp > record.state_since
            || (obs.timestamp == record.state_since && w > record.state_weight)
        {
            record.state = state;
            record.tuned = tuned;
            record.state_since = obs.timestamp;
            record.state_weight = w;
        }
        record.first_seen = record.first_seen.min(obs.timestamp);
        record.last_seen = record.last_seen.max(obs.timestamp);
        record.recent.push(obs);
        let horizon = record.last_seen - cfg.retention_s;
        record.recent.retain(|o| o.timestamp >= horizon);

        let since = record.state_since - cfg.agreement_window_s;
        let (mut conforming, mut conflicting) = (Vec::new(), Vec::new());
        for o in record.recent.iter().filter(|o| o.timestamp >= since) {
            let e = Evidence {
                confidence: o.confidence,
                trust: o.trust,
            };
            if o.agrees_with(record.state, record.tuned) {
                conforming.push(e);
            } else {
                conflicting.push(e);
            }
        }
        record.reliability = compute_reliability(&conforming, &conflicting, cfg.conflict_weight);
        let agrees = record
            .recent
            .last()
            .map(|o| o.agrees_with(record.state, record.tuned));
        let snapshot = record.clone();

        self.note_timestamp(&event.contributor_id, event.timestamp, event.loc);
        self.settle_trust(&event.contributor_id, agrees);
        Ok(Some(snapshot))
    }

    /// Notes that `cell` was checked for receivers at `time`.
    pub fn mark_surveyed(&mut self, cell: Cell, time: Timestamp) {
        let t = self.surveyed.entry(cell).or_insert(time);
        *t = (*t).max(time);
    }

    pub fn surveyed_at(&self, cell: Cell) -> Option<Timestamp> {
        self.surveyed.get(&cell).copied()
    }

    /// Records whose position lies within `radius` of `loc`.
    pub fn tv_sets_near(&self, loc: GeoPoint, radius: f64) -> Vec<&TvSetRecord> {
        let mut out = Vec::new();
        for cell in self.area.cells_within(loc, radius) {
            if let Some(ids) = self.tv_cells.get(&cell) {
                for id in ids {
                    let r = &self.tv_sets[id];
                    if r.distance_to(loc, &self.area) <= radius {
                        out.push(r);
                    }
                }
            }
        }
        out.sort_by_key(|r| r.tv_id);
        out
    }

    /// Drops raw reports and observations older than the retention window
    /// relative to `now`. Aggregated records and histograms are kept.
    pub fn prune(&mut self, now: Timestamp) {
        let horizon = now - self.config.retention_s;
        self.reports.retain(|_, v| {
            v.retain(|r| r.timestamp >= horizon);
            !v.is_empty()
        });
        for r in self.tv_sets.values_mut() {
            r.recent.retain(|o| o.timestamp >= horizon);
        }
    }
}
