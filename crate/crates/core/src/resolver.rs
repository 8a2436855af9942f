//! Availability decisions: reliability and validity policy, the
//! transmitter-only layer, and the value types a query produces.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geo::{distance, is_adjacent, AreaOfInterest, Cell, GeoPoint, PowerClass};
use crate::propagation::{protected_contour_radius, ContourModel};
use crate::protection::{ProtectionCriteria, UnknownTuning};
use crate::registry::{FusionRule, Timestamp, TvTransmitter};

/// One piece of evidence: the reporter's confidence and our trust in them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub confidence: f64,
    pub trust: f64,
}

impl Evidence {
    fn weight(&self) -> f64 {
        (self.confidence * self.trust).clamp(0.0, 1.0)
    }
}

/// Reliability of a conclusion backed by `conforming` evidence and
/// contradicted by `conflicting` evidence:
///
/// `r = (1 - prod(1 - c_i t_i)) * (1 - gamma * W_conflict / (W_conflict + W_conform))`
///
/// with `W` the summed `c t` weights. Always in `[0, 1]`.
pub fn compute_reliability(conforming: &[Evidence], conflicting: &[Evidence], gamma: f64) -> f64 {
    let support = 1.0 - conforming.iter().map(|e| 1.0 - e.weight()).product::<f64>();
    let w_conform: f64 = conforming.iter().map(Evidence::weight).sum();
    let w_conflict: f64 = conflicting.iter().map(Evidence::weight).sum();
    let penalty = if w_conflict > 0.0 {
        gamma.clamp(0.0, 1.0) * w_conflict / (w_conflict + w_conform)
    } else {
        0.0
    };
    (support * (1.0 - penalty)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceLayer {
    Geodb,
    WsdSensing,
    TvAwareness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Persistence {
    Static,
    QuasiStatic,
    Volatile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Free,
    Occupied,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityEntry {
    pub cell: Cell,
    pub channel: u16,
    pub status: EntryStatus,
    pub max_power: Option<PowerClass>,
    pub source_layer: SourceLayer,
    pub reliability: f64,
    pub persistence: Persistence,
    pub created_at: Timestamp,
    pub valid_until: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub loc: GeoPoint,
    #[serde(rename = "power_mw")]
    pub power: PowerClass,
    pub time: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGrant {
    pub channel: u16,
    #[serde(rename = "max_power_mw")]
    pub max_power: PowerClass,
    pub valid_until: Timestamp,
    pub reliability: f64,
    pub source_layer: SourceLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub cell: Cell,
    pub channels: Vec<ChannelGrant>,
}

impl QueryResponse {
    pub fn channel_indices(&self) -> Vec<u16> {
        self.channels.iter().map(|g| g.channel).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullTask {
    pub task_id: u64,
    pub cell: Cell,
    pub channels: Vec<u16>,
    pub issued_at: Timestamp,
    pub deadline: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidityPolicy {
    pub geodb_s: i64,
    pub wsd_sensing_s: i64,
    pub tv_awareness_s: i64,
    pub floor_s: i64,
    /// Contributors needed before the crowd terms stop shortening validity.
    pub k_min: usize,
}

impl Default for ValidityPolicy {
    fn default() -> Self {
        ValidityPolicy {
            geodb_s: 86_400,
            wsd_sensing_s: 600,
            tv_awareness_s: 120,
            floor_s: 60,
            k_min: 3,
        }
    }
}

impl ValidityPolicy {
    pub fn base(&self, layer: SourceLayer) -> i64 {
        match layer {
            SourceLayer::Geodb => self.geodb_s,
            SourceLayer::WsdSensing => self.wsd_sensing_s,
            SourceLayer::TvAwareness => self.tv_awareness_s,
        }
    }
}

/// Seconds a conclusion stays valid. Transmitter-database answers always
/// get the full base period; crowd-sourced ones are scaled by contributor
/// count and reliability, then clamped to `[floor, base]`.
pub fn compute_validity(
    layer: SourceLayer,
    reliability: f64,
    n_contributors: usize,
    policy: &ValidityPolicy,
) -> i64 {
    let base = policy.base(layer);
    if layer == SourceLayer::Geodb {
        return base;
    }
    let crowd = if policy.k_min == 0 {
        1.0
    } else {
        (n_contributors as f64 / policy.k_min as f64).min(1.0)
    };
    let t = libm::floor(base as f64 * crowd * reliability.clamp(0.0, 1.0)) as i64;
    t.max(policy.floor_s).min(base.max(policy.floor_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayerSwitches {
    pub geodb: bool,
    pub wsd_sensing: bool,
    pub tv_awareness: bool,
}

impl Default for LayerSwitches {
    fn default() -> Self {
        LayerSwitches {
            geodb: true,
            wsd_sensing: true,
            tv_awareness: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolverPolicy {
    /// Minimum reliability for crowd-sourced conclusions.
    pub reliability_threshold: f64,
    pub validity: ValidityPolicy,
    pub sensing_window_s: i64,
    pub fusion: FusionRule,
    /// Allow sensed vacancy to free a channel inside a station's contour.
    pub sensing_overrides_contour: bool,
    pub layers: LayerSwitches,
    pub unknown_tuning: UnknownTuning,
    /// A surveyed cell counts for receiver awareness for this long.
    pub survey_max_age_s: i64,
    /// Viewing history span after which an unwatched channel is treated
    /// as quasi-static.
    pub profile_history_s: i64,
    pub pull_deadline_s: i64,
    pub occupied_validity_s: i64,
    /// Gap between background expiry sweeps.
    pub expiry_sweep_s: i64,
}

impl Default for ResolverPolicy {
    fn default() -> Self {
        ResolverPolicy {
            reliability_threshold: 0.8,
            validity: ValidityPolicy::default(),
            sensing_window_s: 600,
            fusion: FusionRule::Or,
            sensing_overrides_contour: false,
            layers: LayerSwitches::default(),
            unknown_tuning: UnknownTuning::ViewingProfile,
            survey_max_age_s: 86_400,
            profile_history_s: 7 * 86_400,
            pull_deadline_s: 300,
            occupied_validity_s: 60,
            expiry_sweep_s: 10,
        }
    }
}

/// Transmitter-only availability: the cell center must lie outside the
/// protected contour of every co-channel station and of every station on
/// an adjacent channel.
pub fn layer1_free<'a, I>(
    cell: Cell,
    channel: u16,
    transmitters: I,
    criteria: &ProtectionCriteria,
    contour: &ContourModel,
    area: &AreaOfInterest,
) -> bool
where
    I: IntoIterator<Item = &'a TvTransmitter>,
{
    let center = area.cell_center(cell);
    transmitters.into_iter().all(|tx| {
        let ch = tx.channel.index;
        if ch != channel && !is_adjacent(ch, channel) {
            return true;
        }
        let radius = protected_contour_radius(tx, criteria.min_tv_field_dbu, contour).unwrap_or(0.0);
        distance(center, tx.loc) >= radius
    })
}
