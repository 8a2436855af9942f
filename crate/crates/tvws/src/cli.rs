//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use crate::client::Client;
use crate::config::{separation_rule, Config};
use crate::error::{AppError, Result};
use crate::experiment::{comparison_text, results_csv, run_city, svg_chart};
use crate::formats;
use crate::persist::Store;
use crate::server::serve;
use crate::service::{Clock, ManualClock, Service, SystemClock};
use crate::wire::AdminLoad;

use tvws_core::geo::{GeoPoint, PowerClass};
use tvws_core::protection::{ProtectionCriteria, SeparationRule};
use tvws_core::registry::{TvDetectionEvent, WsdSensingReport};
use tvws_core::resolver::QueryRequest;
use tvws_core::simulator::{rectangle, BroadcastBase, CityScenario, DEFAULT_ASPECT};

#[derive(Parser)]
#[command(name = "tvws", version, about = "TV white-space availability service and city simulator")]
pub struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `server.listen`.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Simulate channel gains for one or more cities.
    Simulate {
        /// Repeatable; defaults to ny and miami.
        #[arg(long, value_enum)]
        city: Vec<CityArg>,
        /// City description for `--city custom`.
        #[arg(long)]
        city_file: Option<PathBuf>,
        /// Comma-separated transmit powers in mW.
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,40,100")]
        powers: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Area multiplier; densities are kept.
        #[arg(long)]
        scale: Option<f64>,
        /// Width / height of the city rectangle.
        #[arg(long)]
        aspect: Option<f64>,
        #[arg(long, value_enum)]
        broadcast_base: Option<BaseArg>,
        /// Separation table and simulation defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Results CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// SVG chart of the results.
        #[arg(long)]
        chart: Option<PathBuf>,
        /// Print the comparison with published values to stderr.
        #[arg(long)]
        compare: bool,
    },
    /// Ask for available channels at a location.
    Query {
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        /// EIRP in mW.
        #[arg(long)]
        power: f64,
        #[arg(long)]
        server: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Unix seconds; defaults to now.
        #[arg(long)]
        time: Option<i64>,
    },
    /// Bulk-load transmitters, spectrum reports or TV events.
    Ingest {
        #[arg(long, value_enum)]
        kind: IngestKind,
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        server: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Server time for the skew check when ingesting locally.
        #[arg(long)]
        now: Option<i64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CityArg {
    Ny,
    Miami,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    OfOperational,
    OfAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum IngestKind {
    Transmitters,
    Spectrum,
    Tv,
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new().map_err(|e| AppError::Transport(e.to_string()))
}

fn cmd_serve(config: &Path, listen: Option<String>) -> Result<()> {
    let cfg = Config::load(config)?;
    let fresh = cfg.fresh_engine()?;
    let (engine, store) = match &cfg.persistence {
        Some(p) => {
            let (store, engine) = Store::open(&p.dir, p.snapshot_every, p.fsync, fresh)?;
            (engine, Some(store))
        }
        None => (fresh, None),
    };
    let service = Arc::new(Service::new(engine, store, Arc::new(SystemClock), cfg.server.skew_s));
    let addr = listen.unwrap_or(cfg.server.listen.clone());
    let rt = runtime()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| AppError::Transport(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| AppError::Transport(e.to_string()))?;
        println!("listening on http://{local}");
        let _ = std::io::stdout().flush();
        serve(listener, service, Duration::from_secs(cfg.server.sweep_s))
            .await
            .map_err(|e| AppError::Transport(e.to_string()))
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    cities: Vec<CityArg>,
    city_file: Option<PathBuf>,
    powers: Vec<f64>,
    seed: Option<u64>,
    scale: Option<f64>,
    aspect: Option<f64>,
    base: Option<BaseArg>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    chart: Option<PathBuf>,
    compare: bool,
) -> Result<()> {
    let cfg = config.as_deref().map(Config::load).transpose()?;
    let sim = cfg.as_ref().map(|c| c.simulation.clone()).unwrap_or_default();
    let seed = seed.unwrap_or(sim.seed);
    let scale = scale.unwrap_or(sim.scale);
    let aspect = aspect.unwrap_or(sim.aspect);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(AppError::Config("--scale must be positive".into()));
    }
    if !(aspect.is_finite() && aspect > 0.0) {
        return Err(AppError::Config("--aspect must be positive".into()));
    }
    let base = match base {
        Some(BaseArg::OfOperational) => BroadcastBase::OfOperational,
        Some(BaseArg::OfAll) => BroadcastBase::OfAll,
        None => sim.broadcast_base,
    };
    let ladder = powers
        .iter()
        .map(|&p| PowerClass::from_mw(p))
        .collect::<tvws_core::Result<Vec<_>>>()?;
    if ladder.is_empty() {
        return Err(AppError::Config("--powers is empty".into()));
    }
    let rule: SeparationRule = match &cfg {
        Some(c) => c.engine.rule.clone(),
        None => separation_rule(None, ProtectionCriteria::default(), true)?,
    };

    let cities = if cities.is_empty() { vec![CityArg::Ny, CityArg::Miami] } else { cities };
    let mut scenarios = Vec::new();
    for c in cities {
        let mut s = match c {
            CityArg::Ny => CityScenario::new_york(seed),
            CityArg::Miami => CityScenario::miami(seed),
            CityArg::Custom => {
                let path = city_file
                    .as_deref()
                    .ok_or_else(|| AppError::Config("--city custom needs --city-file".into()))?;
                formats::read_city_with_aspect(path, seed, aspect)?
            }
        };
        if c != CityArg::Custom && aspect != DEFAULT_ASPECT {
            s.area = rectangle(s.area.surface_m2(), aspect, s.area.cell_size())?;
        }
        s.broadcast_fraction_base = base;
        s.validate()?;
        if scale != 1.0 {
            s = s.scaled(scale)?;
        }
        scenarios.push(s);
    }

    let results = scenarios
        .iter()
        .map(|s| run_city(s, &rule, &ladder))
        .collect::<Result<Vec<_>>>()?;
    let csv = results_csv(&results);
    match &out {
        Some(p) => std::fs::write(p, &csv).map_err(|e| AppError::io(p, e))?,
        None => print!("{csv}"),
    }
    if let Some(p) = &chart {
        std::fs::write(p, svg_chart(&results)).map_err(|e| AppError::io(p, e))?;
    }
    if compare {
        eprint!("{}", comparison_text(&results, 0.30));
    }
    Ok(())
}

/// Local state from a config file: fixtures plus anything persisted.
fn local_service(config: &Path, clock: Arc<dyn Clock>) -> Result<(Config, Service)> {
    let cfg = Config::load(config)?;
    let fresh = cfg.fresh_engine()?;
    let service = match &cfg.persistence {
        Some(p) => {
            let (store, engine) = Store::open(&p.dir, p.snapshot_every, p.fsync, fresh)?;
            Service::new(engine, Some(store), clock, cfg.server.skew_s)
        }
        None => Service::new(fresh, None, clock, cfg.server.skew_s),
    };
    Ok((cfg, service))
}

fn target(server: &Option<String>, config: &Option<PathBuf>) -> Result<()> {
    match (server, config) {
        (Some(_), Some(_)) => Err(AppError::Config("give --server or --config, not both".into())),
        (None, None) => Err(AppError::Config("one of --server or --config is required".into())),
        _ => Ok(()),
    }
}

fn cmd_query(x: f64, y: f64, power: f64, server: Option<String>, config: Option<PathBuf>, time: Option<i64>) -> Result<()> {
    target(&server, &config)?;
    let time = time.unwrap_or_else(|| SystemClock.now());
    let request = QueryRequest {
        loc: GeoPoint::new(x, y),
        power: PowerClass::from_mw(power)?,
        time,
    };
    let response = match (&server, &config) {
        (Some(addr), _) => runtime()?.block_on(Client::new(addr).query(&request))?,
        (_, Some(path)) => {
            let (_, service) = local_service(path, Arc::new(ManualClock::new(time)))?;
            service.query(request).map_err(|r| AppError::Remote {
                status: r.status,
                body: r.body,
            })?
        }
        _ => unreachable!(),
    };
    println!("{}", serde_json::to_string_pretty(&response).expect("response serializes"));
    Ok(())
}

#[derive(Default)]
struct Tally {
    accepted: usize,
    rejected: usize,
}

/// Transport failures abort; replies with an error status count as
/// rejections.
fn settle(tally: &mut Tally, line: usize, r: Result<()>) -> Result<()> {
    match r {
        Ok(()) => tally.accepted += 1,
        Err(AppError::Remote { status, body }) => tally.reject(line, format!("{status} {}", body.message)),
        Err(e) => return Err(e),
    }
    Ok(())
}

impl Tally {
    fn reject(&mut self, line: usize, why: impl std::fmt::Display) {
        eprintln!("line {line}: {why}");
        self.rejected += 1;
    }
}

fn cmd_ingest(
    kind: IngestKind,
    file: &Path,
    server: Option<String>,
    config: Option<PathBuf>,
    now: Option<i64>,
) -> Result<()> {
    target(&server, &config)?;
    let mut tally = Tally::default();
    match (&server, &config) {
        (Some(addr), _) => {
            let client = Client::new(addr);
            let rt = runtime()?;
            match kind {
                IngestKind::Transmitters => {
                    // Rows are validated against the server's plan one by
                    // one so a bad row does not sink the file.
                    for (k, row) in formats::read_transmitter_rows(file)?.into_iter().enumerate() {
                        let tx = tvws_core::registry::TvTransmitter {
                            id: row.id,
                            loc: GeoPoint::new(row.x_m, row.y_m),
                            channel: tvws_core::geo::Channel::uhf(row.channel),
                            erp_w: row.erp_w,
                            antenna_height_m: row.haat_m,
                        };
                        let load = AdminLoad {
                            transmitters: vec![tx],
                            tv_records: Vec::new(),
                            surveyed: None,
                        };
                        settle(&mut tally, k + 2, rt.block_on(client.admin_load(&load)).map(drop))?;
                    }
                }
                IngestKind::Spectrum => {
                    for (line, r) in formats::read_ndjson::<WsdSensingReport>(file)? {
                        match r {
                            Ok(rep) => settle(&mut tally, line, rt.block_on(client.spectrum_report(&rep)).map(drop))?,
                            Err(m) => tally.reject(line, m),
                        }
                    }
                }
                IngestKind::Tv => {
                    for (line, r) in formats::read_ndjson::<TvDetectionEvent>(file)? {
                        match r {
                            Ok(ev) => settle(&mut tally, line, rt.block_on(client.tv_event(&ev)).map(drop))?,
                            Err(m) => tally.reject(line, m),
                        }
                    }
                }
            }
        }
        (_, Some(path)) => {
            let clock: Arc<dyn Clock> = match now {
                Some(t) => Arc::new(ManualClock::new(t)),
                None => Arc::new(SystemClock),
            };
            let (cfg, service) = local_service(path, clock)?;
            match kind {
                IngestKind::Transmitters => {
                    let mut good = Vec::new();
                    for (k, row) in formats::read_transmitter_rows(file)?.into_iter().enumerate() {
                        match row.into_transmitter(&cfg.engine.plan) {
                            Ok(tx) => good.push(tx),
                            Err(e) => tally.reject(k + 2, e),
                        }
                    }
                    if !good.is_empty() {
                        let n = good.len();
                        let load = AdminLoad {
                            transmitters: good,
                            tv_records: Vec::new(),
                            surveyed: None,
                        };
                        match service.admin_load(load) {
                            Ok(_) => tally.accepted += n,
                            Err(r) => {
                                eprintln!("load failed: {}", r.body.message);
                                tally.rejected += n;
                            }
                        }
                    }
                }
                IngestKind::Spectrum => {
                    for (line, r) in formats::read_ndjson::<WsdSensingReport>(file)? {
                        match r.and_then(|rep| service.spectrum_report(rep).map(drop).map_err(|e| e.body.message)) {
                            Ok(()) => tally.accepted += 1,
                            Err(m) => tally.reject(line, m),
                        }
                    }
                }
                IngestKind::Tv => {
                    for (line, r) in formats::read_ndjson::<TvDetectionEvent>(file)? {
                        match r.and_then(|ev| service.tv_event(ev).map(drop).map_err(|e| e.body.message)) {
                            Ok(()) => tally.accepted += 1,
                            Err(m) => tally.reject(line, m),
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    println!("accepted {} rejected {}", tally.accepted, tally.rejected);
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Serve { config, listen } => cmd_serve(&config, listen),
        Cmd::Simulate {
            city,
            city_file,
            powers,
            seed,
            scale,
            aspect,
            broadcast_base,
            config,
            out,
            chart,
            compare,
        } => cmd_simulate(
            city,
            city_file,
            powers,
            seed,
            scale,
            aspect,
            broadcast_base,
            config,
            out,
            chart,
            compare,
        ),
        Cmd::Query {
            x,
            y,
            power,
            server,
            config,
            time,
        } => cmd_query(x, y, power, server, config, time),
        Cmd::Ingest {
            kind,
            file,
            server,
            config,
            now,
        } => cmd_ingest(kind, &file, server, config, now),
    }
}

/// Parses `args` (program name first), runs the command and maps the
/// outcome to a process exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
