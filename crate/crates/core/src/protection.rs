//! Receiver protection rules: interference limits, separation distances per
//! power class, pairwise violation checks, and allowed-channel computation.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{is_adjacent, AreaOfInterest, ChannelPlan, GeoPoint, GridIndex, PowerClass};
use crate::math::log10;
use crate::propagation::{
    dbu_to_dbm, solve_distance_for_field, MIN_DISTANCE_M, PathLossCalibration, PropagationModel,
};
use crate::registry::{PowerState, TvSetRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtectionCriteria {
    pub co_channel_snr_db: f64,
    pub adjacent_snr_db: f64,
    pub min_tv_field_dbu: f64,
    pub sensing_threshold_dbm: f64,
}

impl Default for ProtectionCriteria {
    fn default() -> Self {
        ProtectionCriteria {
            co_channel_snr_db: 23.0,
            adjacent_snr_db: -33.0,
            min_tv_field_dbu: 41.0,
            sensing_threshold_dbm: -107.0,
        }
    }
}

impl ProtectionCriteria {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.co_channel_snr_db,
            self.adjacent_snr_db,
            self.min_tv_field_dbu,
            self.sensing_threshold_dbm,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("criteria", "all values must be finite"));
        }
        if self.co_channel_snr_db <= self.adjacent_snr_db {
            return Err(Error::invalid(
                "co_channel_snr_db",
                "must exceed the adjacent-channel SNR",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    CoChannel,
    Adjacent,
}

/// Largest interfering field, dBuV/m, tolerated at a protected receiver.
pub fn interference_limit(criteria: &ProtectionCriteria, mode: InterferenceMode) -> f64 {
    match mode {
        InterferenceMode::CoChannel => criteria.min_tv_field_dbu - criteria.co_channel_snr_db,
        InterferenceMode::Adjacent => criteria.min_tv_field_dbu - criteria.adjacent_snr_db,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub power_mw: f64,
    pub coverage_m: f64,
    pub adj_sep_m: f64,
    pub co_sep_m: f64,
}

/// Minimum WSD-to-receiver distances per power class, ascending in power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SeparationRow>", into = "Vec<SeparationRow>")]
pub struct SeparationTable {
    rows: Vec<SeparationRow>,
}

impl SeparationTable {
    /// 1, 5, 10, 40 and 100 mW urban separation distances.
    pub fn standard() -> Self {
        let row = |power_mw, coverage_m, adj_sep_m, co_sep_m| SeparationRow {
            power_mw,
            coverage_m,
            adj_sep_m,
            co_sep_m,
        };
        SeparationTable::new(alloc::vec![
            row(1.0, 59.0, 9.0, 182.0),
            row(5.0, 86.0, 13.2, 265.0),
            row(10.0, 101.0, 15.5, 310.0),
            row(40.0, 140.0, 22.4, 430.0),
            row(100.0, 173.0, 26.4, 533.0),
        ])
        .expect("static table")
    }

    pub fn new(mut rows: Vec<SeparationRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("rows", "separation table is empty"));
        }
        for r in &rows {
            let vals = [r.power_mw, r.coverage_m, r.adj_sep_m, r.co_sep_m];
            if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::invalid("rows", "all table values must be positive"));
            }
            if r.co_sep_m <= r.adj_sep_m {
                return Err(Error::invalid(
                    "co_sep_m",
                    "co-channel separation must exceed adjacent separation",
                ));
            }
        }
        rows.sort_by(|a, b| a.power_mw.total_cmp(&b.power_mw));
        for w in rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if !(b.power_mw > a.power_mw
                && b.coverage_m > a.coverage_m
                && b.adj_sep_m > a.adj_sep_m
                && b.co_sep_m > a.co_sep_m)
            {
                return Err(Error::invalid(
                    "rows",
                    "powers must be distinct and every column must increase with power",
                ));
            }
        }
        Ok(SeparationTable { rows })
    }

    pub fn rows(&self) -> &[SeparationRow] {
        &self.rows
    }

    pub fn ladder(&self) -> Vec<PowerClass> {
        self.rows
            .iter()
            .map(|r| PowerClass::from_mw(r.power_mw).expect("validated"))
            .collect()
    }

    pub fn row(&self, power: PowerClass) -> Option<&SeparationRow> {
        self.rows
            .iter()
            .find(|r| power.same_as(PowerClass::from_mw(r.power_mw).expect("validated")))
    }
}

impl TryFrom<Vec<SeparationRow>> for SeparationTable {
    type Error = Error;

    fn try_from(rows: Vec<SeparationRow>) -> Result<Self> {
        SeparationTable::new(rows)
    }
}

impl From<SeparationTable> for Vec<SeparationRow> {
    fn from(t: SeparationTable) -> Self {
        t.rows
    }
}

/// Log-linear law fitted to a separation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedLaw {
    pub model: PropagationModel,
    pub calibration: PathLossCalibration,
    /// Receiver threshold that reproduces the coverage column.
    pub coverage_threshold_dbu: f64,
}

impl FittedLaw {
    pub fn coverage_m(&self, power: PowerClass) -> Result<f64> {
        solve_distance_for_field(power.eirp_dbm(), self.coverage_threshold_dbu, &self.model)
    }
}

/// Fits a single log-linear path-loss law to the table's co-channel and
/// adjacent columns: least squares gives the slope, and the intercept is
/// pinned so the `anchor` power reproduces its co-channel distance exactly.
pub fn fit_calibration(
    table: &SeparationTable,
    criteria: &ProtectionCriteria,
    freq_mhz: f64,
    anchor: PowerClass,
) -> Result<FittedLaw> {
    let co = interference_limit(criteria, InterferenceMode::CoChannel);
    let adj = interference_limit(criteria, InterferenceMode::Adjacent);
    // log10(d) = (eirp - limit - K) / slope; regress log10(d) on eirp - limit.
    let mut pts = Vec::with_capacity(2 * table.rows().len());
    for r in table.rows() {
        let e = PowerClass::from_mw(r.power_mw)?.eirp_dbm();
        pts.push((e - co, log10(r.co_sep_m)));
        pts.push((e - adj, log10(r.adj_sep_m)));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx <= 0.0 || sxy <= 0.0 {
        return Err(Error::invalid("rows", "table does not determine a decreasing law"));
    }
    let slope = sxx / sxy;

    let anchor_row = table.row(anchor).ok_or(Error::UnknownPower(anchor.eirp_mw()))?;
    // Path loss at the anchor's co-channel distance equals eirp - P_rx(limit).
    let loss_at_anchor = anchor.eirp_dbm() - dbu_to_dbm(co, freq_mhz);
    let intercept = loss_at_anchor - slope * log10(anchor_row.co_sep_m / 1000.0);
    let calibration = PathLossCalibration::new(intercept, slope)?;
    let model = PropagationModel::Calibrated {
        calibration,
        freq_mhz,
    };

    // Coverage threshold: mean field at each row's coverage distance.
    let coverage_threshold_dbu = table
        .rows()
        .iter()
        .map(|r| model.field_at(10.0 * log10(r.power_mw), r.coverage_m))
        .sum::<f64>()
        / table.rows().len() as f64;
    Ok(FittedLaw {
        model,
        calibration,
        coverage_threshold_dbu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub co_m: f64,
    pub adj_m: f64,
}

/// Where separation distances come from: the table for listed powers, the
/// propagation model for everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationRule {
    pub criteria: ProtectionCriteria,
    pub table: Option<SeparationTable>,
    pub model: Option<PropagationModel>,
}

impl SeparationRule {
    /// Standard table plus the law fitted to it (600 MHz reference).
    pub fn standard() -> Self {
        let criteria = ProtectionCriteria::default();
        let table = SeparationTable::standard();
        let law = fit_calibration(&table, &criteria, 600.0, PowerClass::MW_40).expect("fit");
        SeparationRule {
            criteria,
            table: Some(table),
            model: Some(law.model),
        }
    }

    pub fn table_only(table: SeparationTable) -> Self {
        SeparationRule {
            criteria: ProtectionCriteria::default(),
            table: Some(table),
            model: None,
        }
    }

    pub fn min_separation(&self, power: PowerClass, mode: InterferenceMode) -> Result<f64> {
        if let Some(row) = self.table.as_ref().and_then(|t| t.row(power)) {
            return Ok(match mode {
                InterferenceMode::CoChannel => row.co_sep_m,
                InterferenceMode::Adjacent => row.adj_sep_m,
            });
        }
        match &self.model {
            Some(m) => {
                let limit = interference_limit(&self.criteria, mode);
                // Weaker than the limit even at the distance floor.
                if m.field_at(power.eirp_dbm(), MIN_DISTANCE_M) < limit {
                    return Ok(MIN_DISTANCE_M);
                }
                solve_distance_for_field(power.eirp_dbm(), limit, m)
            }
            None => Err(Error::UnknownPower(power.eirp_mw())),
        }
    }

    pub fn separation(&self, power: PowerClass) -> Result<Separation> {
        Ok(Separation {
            co_m: self.min_separation(power, InterferenceMode::CoChannel)?,
            adj_m: self.min_separation(power, InterferenceMode::Adjacent)?,
        })
    }

    /// The table's ladder, or the default ladder when there is no table.
    pub fn ladder(&self) -> Vec<PowerClass> {
        match &self.table {
            Some(t) => t.ladder(),
            None => PowerClass::LADDER.to_vec(),
        }
    }
}

/// How to protect a receiver that is on but whose channel is unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnknownTuning {
    /// Every channel the set has historically been watched on; every
    /// channel if it has no history.
    #[default]
    ViewingProfile,
    AllChannels,
}

/// Whether an ON receiver must be treated as watching `channel`.
pub fn receiver_watches(tv: &TvSetRecord, channel: u16, unknown: UnknownTuning) -> bool {
    match tv.tuned {
        Some(t) => t == channel,
        None => match unknown {
            UnknownTuning::AllChannels => true,
            UnknownTuning::ViewingProfile => {
                let mut support = tv.profile_support().peekable();
                support.peek().is_none() || support.any(|c| c == channel)
            }
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WsdTransmission {
    pub loc: GeoPoint,
    pub power: PowerClass,
    pub channel: u16,
}

/// Violation test for one WSD against one receiver, given the separation
/// distances that apply to the WSD's power. OFF and unknown-state sets are
/// not protected here.
pub fn violates(
    wsd: &WsdTransmission,
    tv: &TvSetRecord,
    sep: Separation,
    area: &AreaOfInterest,
    unknown: UnknownTuning,
) -> bool {
    if tv.state != PowerState::On {
        return false;
    }
    let d = tv.distance_to(wsd.loc, area);
    if d < sep.co_m && receiver_watches(tv, wsd.channel, unknown) {
        return true;
    }
    if d < sep.adj_m {
        let below = wsd.channel.checked_sub(1);
        let above = wsd.channel.checked_add(1);
        for adj in [below, above].into_iter().flatten() {
            debug_assert!(is_adjacent(adj, wsd.channel));
            if receiver_watches(tv, adj, unknown) {
                return true;
            }
        }
    }
    false
}

/// Exhaustive allowed-channel computation: every plan channel with no
/// violating receiver. Reference path for the indexed variant.
pub fn allowed_channels(
    loc: GeoPoint,
    power: PowerClass,
    tvs: &[TvSetRecord],
    plan: &ChannelPlan,
    rule: &SeparationRule,
    area: &AreaOfInterest,
    unknown: UnknownTuning,
) -> Result<Vec<u16>> {
    let sep = rule.separation(power)?;
    Ok(plan
        .indices()
        .filter(|&channel| {
            let wsd = WsdTransmission { loc, power, channel };
            !tvs.iter().any(|tv| violates(&wsd, tv, sep, area, unknown))
        })
        .collect())
}

/// Receivers bucketed on a grid for radius-limited violation checks.
#[derive(Debug, Clone)]
pub struct TvIndex<'a> {
    tvs: &'a [TvSetRecord],
    grid: GridIndex,
}

impl<'a> TvIndex<'a> {
    /// Only ON receivers are indexed.
    pub fn new(tvs: &'a [TvSetRecord], area: &AreaOfInterest, bucket_m: f64) -> Self {
        let mut grid = GridIndex::new(area.width(), area.height(), bucket_m);
        for (k, tv) in tvs.iter().enumerate() {
            if tv.state == PowerState::On {
                let p = tv.loc.unwrap_or_else(|| area.cell_center(tv.cell));
                grid.insert(k as u32, p);
            }
        }
        TvIndex { tvs, grid }
    }

    /// ON receivers within `radius` of `loc`. Cell-only records are indexed
    /// at their cell center, so the search radius is widened by half a cell
    /// diagonal before the exact filter.
    pub fn near(&self, loc: GeoPoint, radius: f64, area: &AreaOfInterest) -> Vec<&'a TvSetRecord> {
        let slack = area.cell_size() * core::f64::consts::FRAC_1_SQRT_2;
        let mut out = Vec::new();
        self.grid.for_each_candidate(loc, radius + slack, |k| {
            let tv = &self.tvs[k as usize];
            if tv.distance_to(loc, area) <= radius {
                out.push(tv);
            }
        });
        out
    }
}

/// Grid-accelerated [`allowed_channels`].
pub fn allowed_channels_indexed(
    loc: GeoPoint,
    power: PowerClass,
    index: &TvIndex<'_>,
    plan: &ChannelPlan,
    rule: &SeparationRule,
    area: &AreaOfInterest,
    unknown: UnknownTuning,
) -> Result<Vec<u16>> {
    let sep = rule.separation(power)?;
    let near = index.near(loc, sep.co_m.max(sep.adj_m), area);
    Ok(plan
        .indices()
        .filter(|&channel| {
            let wsd = WsdTransmission { loc, power, channel };
            !near.iter().any(|tv| violates(&wsd, tv, sep, area, unknown))
        })
        .collect())
}

/// Highest ladder class usable on `channel` at `loc`, if any.
pub fn max_power<'t, I>(
    loc: GeoPoint,
    channel: u16,
    tvs: I,
    ladder: &[PowerClass],
    rule: &SeparationRule,
    area: &AreaOfInterest,
    unknown: UnknownTuning,
) -> Result<Option<PowerClass>>
where
    I: IntoIterator<Item = &'t TvSetRecord> + Clone,
{
    let mut best = None;
    for &power in ladder {
        let sep = rule.separation(power)?;
        let wsd = WsdTransmission { loc, power, channel };
        if tvs
            .clone()
            .into_iter()
            .any(|tv| violates(&wsd, tv, sep, area, unknown))
        {
            break;
        }
        best = Some(power);
    }
    Ok(best)
}
