//! TOML configuration.
//!
//! ```toml
//! [area]
//! width_m = 4000
//! height_m = 2000
//! cell_size_m = 50
//! channel_plan = "plan.csv"        # or first_channel / last_channel
//!
//! [protection]
//! separation_table = "table.csv"   # default: the standard table
//! fit_model = true                 # derive distances for unlisted powers
//!
//! [fixtures]
//! transmitters = "stations.csv"
//! tv_records = "records.ndjson"
//! survey_all_at = 0
//!
//! [persistence]
//! dir = "state"
//! snapshot_every = 1000
//! fsync = false
//!
//! [server]
//! listen = "127.0.0.1:8080"
//! skew_s = 120
//! sweep_s = 30
//!
//! [simulation]
//! seed = 1
//! scale = 1.0
//! aspect = 2.0
//! broadcast_base = "of_operational"
//! ```
//!
//! `[policy]`, `[registry]`, `[contour]` and `[protection.criteria]` take the
//! engine's own field names. Relative paths resolve against the directory
//! holding the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use tvws_core::engine::{Engine, EngineConfig};
use tvws_core::geo::{AreaOfInterest, ChannelPlan, PowerClass};
use tvws_core::propagation::ContourModel;
use tvws_core::protection::{fit_calibration, ProtectionCriteria, SeparationRule, SeparationTable};
use tvws_core::registry::{RegistryConfig, TvSetRecord, TvTransmitter};
use tvws_core::resolver::ResolverPolicy;
use tvws_core::simulator::{BroadcastBase, DEFAULT_ASPECT};

use crate::error::{AppError, Result};
use crate::formats;
use crate::service::DEFAULT_SKEW_S;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArea {
    width_m: f64,
    height_m: f64,
    #[serde(default = "default_cell")]
    cell_size_m: f64,
    channel_plan: Option<PathBuf>,
    first_channel: Option<u16>,
    last_channel: Option<u16>,
}

fn default_cell() -> f64 {
    50.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtection {
    separation_table: Option<PathBuf>,
    #[serde(default = "yes")]
    fit_model: bool,
    #[serde(default)]
    criteria: ProtectionCriteria,
}

impl Default for RawProtection {
    fn default() -> Self {
        RawProtection {
            separation_table: None,
            fit_model: true,
            criteria: ProtectionCriteria::default(),
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixtures {
    transmitters: Option<PathBuf>,
    tv_records: Option<PathBuf>,
    survey_all_at: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistenceConfig {
    pub dir: PathBuf,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
    #[serde(default)]
    pub fsync: bool,
}

fn default_snapshot_every() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: String,
    pub skew_s: i64,
    /// Seconds between expiry sweeps.
    pub sweep_s: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: "127.0.0.1:8080".into(),
            skew_s: DEFAULT_SKEW_S,
            sweep_s: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    pub scale: f64,
    pub aspect: f64,
    pub broadcast_base: BroadcastBase,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            seed: 1,
            scale: 1.0,
            aspect: DEFAULT_ASPECT,
            broadcast_base: BroadcastBase::OfOperational,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    area: RawArea,
    #[serde(default)]
    protection: RawProtection,
    #[serde(default)]
    policy: ResolverPolicy,
    #[serde(default)]
    registry: RegistryConfig,
    contour: Option<ContourModel>,
    #[serde(default)]
    fixtures: RawFixtures,
    persistence: Option<PersistenceConfig>,
    #[serde(default)]
    server: ServerConfig,
    #[serde(default)]
    simulation: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub engine: EngineConfig,
    pub transmitters: Vec<TvTransmitter>,
    pub tv_records: Vec<TvSetRecord>,
    pub survey_all_at: Option<i64>,
    pub persistence: Option<PersistenceConfig>,
    pub server: ServerConfig,
    pub simulation: SimulationConfig,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Separation rule from an optional table, with the propagation law fitted
/// to that table when `fit_model` is set.
pub fn separation_rule(table: Option<SeparationTable>, criteria: ProtectionCriteria, fit_model: bool) -> Result<SeparationRule> {
    let table = table.unwrap_or_else(SeparationTable::standard);
    let model = if fit_model {
        let anchor = table
            .ladder()
            .into_iter()
            .find(|p| p.same_as(PowerClass::MW_40))
            .unwrap_or(table.ladder()[0]);
        Some(fit_calibration(&table, &criteria, 600.0, anchor)?.model)
    } else {
        None
    };
    Ok(SeparationRule {
        criteria,
        table: Some(table),
        model,
    })
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Config::parse(&text, base).map_err(|e| match e {
            AppError::Config(m) => AppError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses config text, resolving file references against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Config> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        let area = AreaOfInterest::new(raw.area.width_m, raw.area.height_m, raw.area.cell_size_m)?;
        let plan = match (&raw.area.channel_plan, raw.area.first_channel, raw.area.last_channel) {
            (Some(p), None, None) => formats::read_channel_plan(&resolve(base, p))?,
            (None, Some(a), Some(b)) => ChannelPlan::uhf_range(a, b)?,
            (None, None, None) => ChannelPlan::us_uhf(),
            _ => {
                return Err(AppError::Config(
                    "area: give either channel_plan or both first_channel and last_channel".into(),
                ))
            }
        };
        let table = match &raw.protection.separation_table {
            Some(p) => Some(formats::read_separation_table(&resolve(base, p))?),
            None => None,
        };
        let rule = separation_rule(table, raw.protection.criteria, raw.protection.fit_model)?;

        let mut engine = EngineConfig::new(area, plan);
        engine.rule = rule;
        engine.policy = raw.policy;
        engine.registry = raw.registry;
        if let Some(c) = raw.contour {
            engine.contour = c;
        }
        engine.validate()?;

        let transmitters = match &raw.fixtures.transmitters {
            Some(p) => formats::read_transmitters(&resolve(base, p), &engine.plan)?,
            None => Vec::new(),
        };
        let mut tv_records = Vec::new();
        if let Some(p) = &raw.fixtures.tv_records {
            let path = resolve(base, p);
            for (line, rec) in formats::read_ndjson::<TvSetRecord>(&path)? {
                tv_records.push(rec.map_err(|message| AppError::Format {
                    path: path.clone(),
                    line,
                    message,
                })?);
            }
        }
        let persistence = raw.persistence.map(|mut p| {
            p.dir = resolve(base, &p.dir);
            p
        });
        let sim = &raw.simulation;
        if !(sim.scale.is_finite() && sim.scale > 0.0) {
            return Err(AppError::Config("simulation.scale must be positive".into()));
        }
        if !(sim.aspect.is_finite() && sim.aspect > 0.0) {
            return Err(AppError::Config("simulation.aspect must be positive".into()));
        }
        if raw.server.skew_s < 0 || raw.server.sweep_s == 0 {
            return Err(AppError::Config("server: skew_s must be >= 0 and sweep_s > 0".into()));
        }
        Ok(Config {
            engine,
            transmitters,
            tv_records,
            survey_all_at: raw.fixtures.survey_all_at,
            persistence,
            server: raw.server,
            simulation: raw.simulation,
        })
    }

    /// Engine with the fixtures loaded; the starting point before any
    /// logged commands are replayed.
    pub fn fresh_engine(&self) -> Result<Engine> {
        let mut e = Engine::new(self.engine.clone())?;
        if !self.transmitters.is_empty() {
            e.load_transmitters(self.transmitters.clone())?;
        }
        if !self.tv_records.is_empty() {
            e.load_tv_records(self.tv_records.clone())?;
        }
        if let Some(t) = self.survey_all_at {
            let cells: Vec<_> = e.area().cells().collect();
            e.mark_surveyed(&cells, t)?;
        }
        Ok(e)
    }
}
