//! On-disk fixture formats.
//!
//! | file | format | columns / fields |
//! |------|--------|------------------|
//! | channel plan | CSV | `index,center_freq_mhz` |
//! | separation table | CSV | `power_mw,coverage_m,adj_sep_m,co_sep_m` |
//! | transmitters | CSV | `id,x_m,y_m,channel,erp_w,haat_m` |
//! | spectrum reports, TV events, TV records | NDJSON | the JSON wire form |
//! | custom city | TOML | see [`CityFile`] |

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tvws_core::geo::{Channel, ChannelPlan, GeoPoint};
use tvws_core::protection::{SeparationRow, SeparationTable};
use tvws_core::registry::TvTransmitter;
use tvws_core::simulator::{rectangle, BroadcastBase, ChannelAssignment, CityScenario, DEFAULT_ASPECT, SQ_MILE_M2};

use crate::error::{AppError, Result};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = reader(path)?;
    let mut out = Vec::new();
    for (k, row) in r.deserialize().enumerate() {
        out.push(row.map_err(|e: csv::Error| AppError::Format {
            path: path.into(),
            line: k + 2,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_channel_plan(path: &Path) -> Result<ChannelPlan> {
    let rows: Vec<Channel> = read_csv(path)?;
    Ok(ChannelPlan::new(rows)?)
}

pub fn read_separation_table(path: &Path) -> Result<SeparationTable> {
    let rows: Vec<SeparationRow> = read_csv(path)?;
    Ok(SeparationTable::new(rows)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterRow {
    pub id: String,
    pub x_m: f64,
    pub y_m: f64,
    pub channel: u16,
    pub erp_w: f64,
    pub haat_m: f64,
}

impl TransmitterRow {
    pub fn into_transmitter(self, plan: &ChannelPlan) -> tvws_core::Result<TvTransmitter> {
        let channel = *plan
            .get(self.channel)
            .ok_or(tvws_core::Error::UnknownChannel(self.channel))?;
        let tx = TvTransmitter {
            id: self.id,
            loc: GeoPoint::new(self.x_m, self.y_m),
            channel,
            erp_w: self.erp_w,
            antenna_height_m: self.haat_m,
        };
        tx.validate()?;
        Ok(tx)
    }
}

pub fn read_transmitter_rows(path: &Path) -> Result<Vec<TransmitterRow>> {
    read_csv(path)
}

/// Every transmitter in the file, failing on the first bad row.
pub fn read_transmitters(path: &Path, plan: &ChannelPlan) -> Result<Vec<TvTransmitter>> {
    read_transmitter_rows(path)?
        .into_iter()
        .enumerate()
        .map(|(k, row)| {
            row.into_transmitter(plan).map_err(|e| AppError::Format {
                path: path.into(),
                line: k + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// One parsed record per non-blank line; parse failures are kept per line
/// so bulk loaders can count rejections.
pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, std::result::Result<T, String>)>> {
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| AppError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((k + 1, serde_json::from_str(&line).map_err(|e| e.to_string())));
    }
    Ok(out)
}

/// City description for `simulate --city custom`.
///
/// ```toml
/// name = "springfield"
/// surface_sq_mi = 12.5      # or width_m + height_m
/// households = 40000
/// pct_on = 0.21
/// pct_broadcast = 0.10
/// first_channel = 21
/// last_channel = 40
/// n_wsd = 20000
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityFile {
    pub name: String,
    pub surface_sq_mi: Option<f64>,
    pub width_m: Option<f64>,
    pub height_m: Option<f64>,
    #[serde(default = "default_cell")]
    pub cell_size_m: f64,
    pub households: u64,
    pub pct_on: f64,
    pub pct_broadcast: f64,
    #[serde(default)]
    pub broadcast_base: BroadcastBase,
    pub first_channel: u16,
    pub last_channel: u16,
    #[serde(default = "default_wsd")]
    pub n_wsd: u64,
    #[serde(default)]
    pub assignment: ChannelAssignment,
    #[serde(default = "yes")]
    pub include_adjacent: bool,
}

fn default_cell() -> f64 {
    50.0
}

fn default_wsd() -> u64 {
    100_000
}

fn yes() -> bool {
    true
}

impl CityFile {
    pub fn into_scenario(self, seed: u64, aspect: f64) -> tvws_core::Result<CityScenario> {
        use tvws_core::geo::AreaOfInterest;
        let area = match (self.surface_sq_mi, self.width_m, self.height_m) {
            (Some(s), None, None) => rectangle(s * SQ_MILE_M2, aspect, self.cell_size_m)?,
            (None, Some(w), Some(h)) => AreaOfInterest::new(w, h, self.cell_size_m)?,
            _ => {
                return Err(tvws_core::Error::invalid(
                    "surface_sq_mi",
                    "give either surface_sq_mi or both width_m and height_m",
                ))
            }
        };
        let s = CityScenario {
            name: self.name,
            area,
            households: self.households,
            pct_on: self.pct_on,
            pct_broadcast: self.pct_broadcast,
            broadcast_fraction_base: self.broadcast_base,
            channels: ChannelPlan::uhf_range(self.first_channel, self.last_channel)?,
            n_wsd: self.n_wsd,
            seed,
            assignment: self.assignment,
            include_adjacent: self.include_adjacent,
        };
        s.validate()?;
        Ok(s)
    }
}

pub fn read_city(path: &Path, seed: u64) -> Result<CityScenario> {
    read_city_with_aspect(path, seed, DEFAULT_ASPECT)
}

pub fn read_city_with_aspect(path: &Path, seed: u64, aspect: f64) -> Result<CityScenario> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let city: CityFile =
        toml::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    Ok(city.into_scenario(seed, aspect)?)
}
