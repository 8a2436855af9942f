//! Okumura-Hata urban path loss, received-power to field-strength
//! conversion, and inversion of both to distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log10, pow10};
use crate::registry::TvTransmitter;

/// Distances below this are evaluated at the floor.
pub const MIN_DISTANCE_M: f64 = 10.0;
/// Upper end of the distance bracket used when inverting a model.
pub const MAX_RANGE_M: f64 = 20_000.0;

/// Dipole-convention constant relating dBm at the antenna terminals to
/// dBuV/m: `E = P + 20 log10(f_MHz) + 77.2`.
pub const DIPOLE_FIELD_CONSTANT_DB: f64 = 77.2;

/// ERP (half-wave dipole reference) to EIRP offset.
pub const ERP_TO_EIRP_DB: f64 = 2.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HataEnvironment {
    #[default]
    UrbanSmallMedium,
    UrbanLarge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HataParams {
    pub freq_mhz: f64,
    pub tx_height_m: f64,
    pub rx_height_m: f64,
    #[serde(default)]
    pub environment: HataEnvironment,
}

impl HataParams {
    pub fn validate(&self) -> Result<()> {
        if !(150.0..=1500.0).contains(&self.freq_mhz) {
            return Err(Error::invalid("freq_mhz", "Hata is defined for 150-1500 MHz"));
        }
        if !(1.0..=10.0).contains(&self.rx_height_m) {
            return Err(Error::invalid("rx_height_m", "Hata is defined for 1-10 m"));
        }
        if !(self.tx_height_m.is_finite() && self.tx_height_m > 0.0) {
            return Err(Error::invalid("tx_height_m", "must be positive"));
        }
        Ok(())
    }

    /// Base station heights under 30 m (or above 200 m) lie outside the
    /// range the model was fitted on. They are still evaluated.
    pub fn outside_fitted_range(&self) -> bool {
        !(30.0..=200.0).contains(&self.tx_height_m)
    }

    /// Mobile antenna height correction a(h_m) in dB.
    pub fn mobile_correction_db(&self) -> f64 {
        let (f, hm) = (self.freq_mhz, self.rx_height_m);
        match self.environment {
            HataEnvironment::UrbanSmallMedium => {
                (1.1 * log10(f) - 0.7) * hm - (1.56 * log10(f) - 0.8)
            }
            HataEnvironment::UrbanLarge => {
                if f >= 300.0 {
                    let t = log10(11.75 * hm);
                    3.2 * t * t - 4.97
                } else {
                    let t = log10(1.54 * hm);
                    8.29 * t * t - 1.1
                }
            }
        }
    }

    /// Path loss at 1 km and the per-decade slope.
    pub fn log_linear(&self) -> (f64, f64) {
        let hb = log10(self.tx_height_m);
        let at_1km = 69.55 + 26.16 * log10(self.freq_mhz) - 13.82 * hb - self.mobile_correction_db();
        (at_1km, 44.9 - 6.55 * hb)
    }
}

/// Urban Hata median path loss in dB at `d_km` (floored at 10 m).
pub fn hata_path_loss(params: &HataParams, d_km: f64) -> Result<f64> {
    if !(d_km.is_finite() && d_km > 0.0) {
        return Err(Error::InvalidDistance(d_km));
    }
    let d = d_km.max(MIN_DISTANCE_M / 1000.0);
    let (at_1km, slope) = params.log_linear();
    Ok(at_1km + slope * log10(d))
}

/// Log-linear path-loss law `L(d) = intercept + slope * log10(d_km)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossCalibration {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
}

impl PathLossCalibration {
    pub fn new(intercept_db: f64, slope_db_per_decade: f64) -> Result<Self> {
        if !intercept_db.is_finite() {
            return Err(Error::invalid("intercept_db", "must be finite"));
        }
        if !(slope_db_per_decade.is_finite() && slope_db_per_decade > 0.0) {
            return Err(Error::invalid("slope_db_per_decade", "must be positive"));
        }
        Ok(PathLossCalibration {
            intercept_db,
            slope_db_per_decade,
        })
    }
}

pub fn dbm_to_dbu(p_rx_dbm: f64, freq_mhz: f64) -> f64 {
    p_rx_dbm + 20.0 * log10(freq_mhz) + DIPOLE_FIELD_CONSTANT_DB
}

pub fn dbu_to_dbm(field_dbu: f64, freq_mhz: f64) -> f64 {
    field_dbu - 20.0 * log10(freq_mhz) - DIPOLE_FIELD_CONSTANT_DB
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * log10(mw)
}

/// A propagation law usable for contour and separation inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropagationModel {
    Hata(HataParams),
    /// Fitted law; `freq_mhz` is the reference frequency used for the
    /// field-strength conversion.
    Calibrated {
        calibration: PathLossCalibration,
        freq_mhz: f64,
    },
}

impl PropagationModel {
    pub fn freq_mhz(&self) -> f64 {
        match self {
            PropagationModel::Hata(h) => h.freq_mhz,
            PropagationModel::Calibrated { freq_mhz, .. } => *freq_mhz,
        }
    }

    fn log_linear(&self) -> (f64, f64) {
        match self {
            PropagationModel::Hata(h) => h.log_linear(),
            PropagationModel::Calibrated { calibration, .. } => {
                (calibration.intercept_db, calibration.slope_db_per_decade)
            }
        }
    }

    pub fn path_loss_db(&self, d_m: f64) -> f64 {
        let (at_1km, slope) = self.log_linear();
        at_1km + slope * log10(d_m.max(MIN_DISTANCE_M) / 1000.0)
    }

    /// Field strength in dBuV/m at `d_m` meters from a source of `eirp_dbm`.
    pub fn field_at(&self, eirp_dbm: f64, d_m: f64) -> f64 {
        dbm_to_dbu(eirp_dbm - self.path_loss_db(d_m), self.freq_mhz())
    }
}

/// Distance in meters at which the field of an `eirp_dbm` source falls to
/// `target_dbu`. Both supported laws are log-linear in distance, so the
/// inversion is closed-form.
pub fn solve_distance_for_field(
    eirp_dbm: f64,
    target_dbu: f64,
    model: &PropagationModel,
) -> Result<f64> {
    let out_of_range = Error::OutOfRange {
        target_dbu,
        min_m: MIN_DISTANCE_M,
        max_m: MAX_RANGE_M,
    };
    if !(eirp_dbm.is_finite() && target_dbu.is_finite()) {
        return Err(out_of_range);
    }
    if target_dbu > model.field_at(eirp_dbm, MIN_DISTANCE_M)
        || target_dbu < model.field_at(eirp_dbm, MAX_RANGE_M)
    {
        return Err(out_of_range);
    }
    let (at_1km, slope) = model.log_linear();
    let allowed_loss = eirp_dbm - dbu_to_dbm(target_dbu, model.freq_mhz());
    let d_m = 1000.0 * pow10((allowed_loss - at_1km) / slope);
    Ok(d_m.clamp(MIN_DISTANCE_M, MAX_RANGE_M))
}

/// Receiver-side assumptions for computing TV station contours with Hata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourModel {
    pub rx_height_m: f64,
    pub environment: HataEnvironment,
}

impl Default for ContourModel {
    fn default() -> Self {
        ContourModel {
            rx_height_m: 10.0,
            environment: HataEnvironment::UrbanSmallMedium,
        }
    }
}

impl ContourModel {
    pub fn model_for(&self, tx: &TvTransmitter) -> PropagationModel {
        PropagationModel::Hata(HataParams {
            freq_mhz: tx.channel.center_freq_mhz,
            tx_height_m: tx.antenna_height_m,
            rx_height_m: self.rx_height_m,
            environment: self.environment,
        })
    }
}

/// Radius of the region where the station's field is at least `min_field`.
/// A threshold below the field at the model's maximum range clamps to that
/// range.
pub fn protected_contour_radius(
    tx: &TvTransmitter,
    min_field_dbu: f64,
    contour: &ContourModel,
) -> Result<f64> {
    let model = contour.model_for(tx);
    let eirp = tx.eirp_dbm();
    if min_field_dbu < model.field_at(eirp, MAX_RANGE_M) {
        return Ok(MAX_RANGE_M);
    }
    solve_distance_for_field(eirp, min_field_dbu, &model)
}
