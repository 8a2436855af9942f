//! City-scale Monte Carlo: households with one TV each, a fraction of them
//! on and tuned to a broadcast channel, and white-space devices scattered
//! over the same rectangle. For every device and power class the simulator
//! counts the plan channels no protected receiver rules out.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{distance, AreaOfInterest, ChannelPlan, GeoPoint, GridIndex, PowerClass};
use crate::math::{exp, pow, sqrt};
use crate::protection::{Separation, SeparationRule};
use crate::registry::{PowerState, TvSetRecord};

/// Population the broadcast-viewing fraction is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BroadcastBase {
    OfAll,
    #[default]
    OfOperational,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelAssignment {
    #[default]
    Uniform,
    /// Channel at plan position k drawn with weight 1 / (k + 1)^s.
    Zipf { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityScenario {
    pub name: String,
    pub area: AreaOfInterest,
    pub households: u64,
    pub pct_on: f64,
    pub pct_broadcast: f64,
    #[serde(default)]
    pub broadcast_fraction_base: BroadcastBase,
    pub channels: ChannelPlan,
    pub n_wsd: u64,
    pub seed: u64,
    #[serde(default)]
    pub assignment: ChannelAssignment,
    /// Apply the adjacent-channel rule in addition to the co-channel one.
    #[serde(default = "yes")]
    pub include_adjacent: bool,
}

fn yes() -> bool {
    true
}

pub const SQ_MILE_M2: f64 = 2_589_988.110336;
pub const DEFAULT_ASPECT: f64 = 2.0;

/// Rectangle of the given surface with `aspect` = width / height.
pub fn rectangle(surface_m2: f64, aspect: f64, cell_size: f64) -> Result<AreaOfInterest> {
    if !(surface_m2 > 0.0 && aspect > 0.0) {
        return Err(Error::invalid("area", "surface and aspect must be positive"));
    }
    let height = sqrt(surface_m2 / aspect);
    AreaOfInterest::new(height * aspect, height, cell_size)
}

impl CityScenario {
    /// Manhattan (New York County) preset.
    pub fn new_york(seed: u64) -> Self {
        CityScenario {
            name: "ny".into(),
            area: rectangle(22.83 * SQ_MILE_M2, DEFAULT_ASPECT, 50.0).expect("preset"),
            households: 732_204,
            pct_on: 0.21,
            pct_broadcast: 0.10,
            broadcast_fraction_base: BroadcastBase::OfOperational,
            channels: ChannelPlan::uhf_range(21, 47).expect("preset"),
            n_wsd: 100_000,
            seed,
            assignment: ChannelAssignment::Uniform,
            include_adjacent: true,
        }
    }

    pub fn miami(seed: u64) -> Self {
        CityScenario {
            name: "miami".into(),
            area: rectangle(35.0 * SQ_MILE_M2, DEFAULT_ASPECT, 50.0).expect("preset"),
            households: 149_077,
            channels: ChannelPlan::uhf_range(21, 46).expect("preset"),
            ..CityScenario::new_york(seed)
        }
    }

    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "ny" | "new_york" | "new-york" => Some(Self::new_york(seed)),
            "miami" => Some(Self::miami(seed)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("pct_on", self.pct_on), ("pct_broadcast", self.pct_broadcast)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(field, "must lie in [0, 1]"));
            }
        }
        if self.households == 0 {
            return Err(Error::invalid("households", "must be positive"));
        }
        if self.n_wsd == 0 {
            return Err(Error::invalid("n_wsd", "must be positive"));
        }
        if self.households > u32::MAX as u64 || self.n_wsd > u32::MAX as u64 {
            return Err(Error::invalid("households", "too many points"));
        }
        if self.channels.is_empty() {
            return Err(Error::invalid("channels", "plan is empty"));
        }
        if self.broadcast_fraction_base == BroadcastBase::OfAll && self.pct_broadcast > self.pct_on {
            return Err(Error::invalid(
                "pct_broadcast",
                "cannot exceed pct_on when taken over all sets",
            ));
        }
        if let ChannelAssignment::Zipf { exponent } = self.assignment {
            if !(exponent.is_finite() && exponent >= 0.0) {
                return Err(Error::invalid("exponent", "must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Probability that an operational set shows a broadcast channel.
    pub fn broadcast_given_on(&self) -> f64 {
        match self.broadcast_fraction_base {
            BroadcastBase::OfOperational => self.pct_broadcast,
            BroadcastBase::OfAll if self.pct_on > 0.0 => (self.pct_broadcast / self.pct_on).min(1.0),
            BroadcastBase::OfAll => 0.0,
        }
    }

    /// Same densities over an area `factor` times the size.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid("scale", "must be positive"));
        }
        let mut s = self.clone();
        let k = sqrt(factor);
        s.area = AreaOfInterest::new(
            self.area.width() * k,
            self.area.height() * k,
            self.area.cell_size(),
        )?;
        s.households = libm::round(self.households as f64 * factor) as u64;
        s.n_wsd = libm::round(self.n_wsd as f64 * factor) as u64;
        s.validate()?;
        Ok(s)
    }

    /// Stable 64-bit digest of every generation parameter.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::default();
        h.write(self.name.as_bytes());
        for v in [
            self.area.width(),
            self.area.height(),
            self.pct_on,
            self.pct_broadcast,
        ] {
            h.write(&v.to_bits().to_le_bytes());
        }
        for v in [self.households, self.n_wsd, self.seed] {
            h.write(&v.to_le_bytes());
        }
        h.write(&[self.broadcast_fraction_base as u8, self.include_adjacent as u8]);
        if let ChannelAssignment::Zipf { exponent } = self.assignment {
            h.write(&exponent.to_bits().to_le_bytes());
        }
        for c in self.channels.indices() {
            h.write(&c.to_le_bytes());
        }
        h.0
    }
}

struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimTv {
    pub loc: GeoPoint,
    pub on: bool,
    /// Broadcast channel shown, for sets that show one.
    pub tuned: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub area: AreaOfInterest,
    pub plan: ChannelPlan,
    pub tvs: Vec<SimTv>,
    pub wsds: Vec<GeoPoint>,
    pub include_adjacent: bool,
}

impl Scenario {
    /// Sets that are on and tuned to a plan channel: the only ones that
    /// constrain a device.
    pub fn protected(&self) -> impl Iterator<Item = &SimTv> {
        self.tvs
            .iter()
            .filter(|t| t.on && t.tuned.is_some_and(|c| self.plan.contains(c)))
    }

    /// Protected sets as receiver records, for the generic protection code.
    pub fn to_records(&self) -> Result<Vec<TvSetRecord>> {
        self.protected()
            .enumerate()
            .map(|(k, t)| {
                Ok(TvSetRecord::new(
                    k as u64 + 1,
                    self.area.cell_of(t.loc)?,
                    Some(t.loc),
                    PowerState::On,
                    t.tuned,
                    1.0,
                    0,
                ))
            })
            .collect()
    }
}

/// Draws households and devices. Every household consumes its draws in the
/// same order, so a fixed seed reproduces the placements exactly.
pub fn generate_scenario(cfg: &CityScenario) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = (cfg.area.width(), cfg.area.height());
    let plan: Vec<u16> = cfg.channels.indices().collect();
    let cumulative: Option<Vec<f64>> = match cfg.assignment {
        ChannelAssignment::Uniform => None,
        ChannelAssignment::Zipf { exponent } => {
            let mut acc = 0.0;
            Some(
                (0..plan.len())
                    .map(|k| {
                        acc += 1.0 / pow(k as f64 + 1.0, exponent);
                        acc
                    })
                    .collect(),
            )
        }
    };
    let q = cfg.broadcast_given_on();

    let mut tvs = Vec::with_capacity(cfg.households as usize);
    for _ in 0..cfg.households {
        let loc = GeoPoint::new(rng.random::<f64>() * w, rng.random::<f64>() * h);
        let on = rng.random::<f64>() < cfg.pct_on;
        let shows = rng.random::<f64>() < q;
        let u = rng.random::<f64>();
        let k = match &cumulative {
            None => ((u * plan.len() as f64) as usize).min(plan.len() - 1),
            Some(cum) => {
                let total = cum[cum.len() - 1];
                cum.partition_point(|&c| c <= u * total).min(plan.len() - 1)
            }
        };
        tvs.push(SimTv {
            loc,
            on,
            tuned: (on && shows).then_some(plan[k]),
        });
    }
    let wsds = (0..cfg.n_wsd)
        .map(|_| GeoPoint::new(rng.random::<f64>() * w, rng.random::<f64>() * h))
        .collect();
    Ok(Scenario {
        area: cfg.area,
        plan: cfg.channels.clone(),
        tvs,
        wsds,
        include_adjacent: cfg.include_adjacent,
    })
}

/// Per-device evaluation against an immutable scenario.
pub struct GainEvaluator<'a> {
    scenario: &'a Scenario,
    ladder: Vec<PowerClass>,
    seps: Vec<Separation>,
    reach: f64,
    points: Vec<GeoPoint>,
    /// Plan position of each protected set's channel.
    slots: Vec<u16>,
    /// Plan positions holding the channels adjacent to each position.
    neighbours: Vec<Vec<usize>>,
    grid: GridIndex,
}

impl<'a> GainEvaluator<'a> {
    pub fn new(scenario: &'a Scenario, rule: &SeparationRule, ladder: &[PowerClass]) -> Result<Self> {
        if ladder.is_empty() {
            return Err(Error::invalid("ladder", "no power classes"));
        }
        let seps = ladder
            .iter()
            .map(|&p| rule.separation(p))
            .collect::<Result<Vec<_>>>()?;
        let reach = seps
            .iter()
            .map(|s| if scenario.include_adjacent { s.co_m.max(s.adj_m) } else { s.co_m })
            .fold(0.0, f64::max);
        let plan = &scenario.plan;
        let neighbours = plan
            .indices()
            .map(|c| {
                [c.checked_sub(1), c.checked_add(1)]
                    .into_iter()
                    .flatten()
                    .filter_map(|n| plan.position(n))
                    .collect()
            })
            .collect();
        let area = &scenario.area;
        let bucket = (reach / 2.0).max(area.cell_size());
        let mut grid = GridIndex::new(area.width(), area.height(), bucket);
        let mut points = Vec::new();
        let mut slots = Vec::new();
        for tv in scenario.protected() {
            let slot = plan.position(tv.tuned.expect("protected sets are tuned"));
            grid.insert(points.len() as u32, tv.loc);
            points.push(tv.loc);
            slots.push(slot.expect("protected channels are in the plan") as u16);
        }
        Ok(GainEvaluator {
            scenario,
            ladder: ladder.to_vec(),
            seps,
            reach,
            points,
            slots,
            neighbours,
            grid,
        })
    }

    pub fn ladder(&self) -> &[PowerClass] {
        &self.ladder
    }

    pub fn protected_count(&self) -> usize {
        self.points.len()
    }

    /// Nearest protected set per plan position, capped at the search reach.
    fn nearest_by_channel(&self, loc: GeoPoint) -> Vec<f64> {
        let mut dmin = vec![f64::INFINITY; self.scenario.plan.len()];
        self.grid.for_each_candidate(loc, self.reach, |k| {
            let d = distance(self.points[k as usize], loc);
            let slot = &mut dmin[self.slots[k as usize] as usize];
            if d < *slot {
                *slot = d;
            }
        });
        dmin
    }

    /// Usable plan channels at `loc` for each ladder power, in ladder order.
    pub fn channels_at(&self, loc: GeoPoint) -> Vec<Vec<u16>> {
        let dmin = self.nearest_by_channel(loc);
        let plan = self.scenario.plan.channels();
        self.seps
            .iter()
            .map(|sep| {
                (0..plan.len())
                    .filter(|&k| self.free(&dmin, k, *sep))
                    .map(|k| plan[k].index)
                    .collect()
            })
            .collect()
    }

    fn free(&self, dmin: &[f64], k: usize, sep: Separation) -> bool {
        dmin[k] >= sep.co_m
            && (!self.scenario.include_adjacent
                || self.neighbours[k].iter().all(|&n| dmin[n] >= sep.adj_m))
    }

    /// Gained-channel count per ladder power for device `i`.
    pub fn counts_for(&self, i: usize) -> Vec<u16> {
        let dmin = self.nearest_by_channel(self.scenario.wsds[i]);
        self.seps
            .iter()
            .map(|sep| {
                (0..dmin.len()).filter(|&k| self.free(&dmin, k, *sep)).count() as u16
            })
            .collect()
    }

    pub fn wsd_count(&self) -> usize {
        self.scenario.wsds.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerGain {
    pub power_mw: f64,
    pub n_wsd: u64,
    pub n_gaining: u64,
    pub pct_gaining: f64,
    /// Mean over devices gaining at least one channel.
    pub avg_gained: f64,
    pub stderr: f64,
    /// Mean over all devices.
    pub avg_gained_all: f64,
    pub stderr_all: f64,
    /// Devices per gained-channel count.
    pub histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainStats {
    pub seed: u64,
    pub fingerprint: u64,
    pub per_power: Vec<PowerGain>,
}

impl GainStats {
    /// Aggregates per-device counts (one row per device, one column per
    /// ladder power).
    pub fn from_counts<'c, I>(ladder: &[PowerClass], rows: I, seed: u64, fingerprint: u64) -> Self
    where
        I: IntoIterator<Item = &'c [u16]>,
    {
        let n = ladder.len();
        let mut hist: Vec<Vec<u64>> = vec![Vec::new(); n];
        for row in rows {
            for (j, &c) in row.iter().take(n).enumerate() {
                let h = &mut hist[j];
                if h.len() <= c as usize {
                    h.resize(c as usize + 1, 0);
                }
                h[c as usize] += 1;
            }
        }
        let per_power = ladder
            .iter()
            .zip(hist)
            .map(|(p, histogram)| summarize(p.eirp_mw(), histogram))
            .collect();
        GainStats {
            seed,
            fingerprint,
            per_power,
        }
    }

    pub fn for_power(&self, power: PowerClass) -> Option<&PowerGain> {
        self.per_power
            .iter()
            .find(|g| PowerClass::from_mw(g.power_mw).is_ok_and(|p| p.same_as(power)))
    }
}

fn mean_and_stderr(histogram: &[u64], skip_zero: bool) -> (u64, f64, f64) {
    let (mut n, mut s, mut s2) = (0u64, 0.0, 0.0);
    for (c, &k) in histogram.iter().enumerate() {
        if skip_zero && c == 0 {
            continue;
        }
        n += k;
        s += (c as f64) * k as f64;
        s2 += (c as f64) * (c as f64) * k as f64;
    }
    if n == 0 {
        return (0, 0.0, 0.0);
    }
    let mean = s / n as f64;
    let se = if n > 1 {
        let var = ((s2 - n as f64 * mean * mean) / (n - 1) as f64).max(0.0);
        sqrt(var / n as f64)
    } else {
        0.0
    };
    (n, mean, se)
}

fn summarize(power_mw: f64, histogram: Vec<u64>) -> PowerGain {
    let n_wsd: u64 = histogram.iter().sum();
    let (n_gaining, avg_gained, stderr) = mean_and_stderr(&histogram, true);
    let (_, avg_gained_all, stderr_all) = mean_and_stderr(&histogram, false);
    PowerGain {
        power_mw,
        n_wsd,
        n_gaining,
        pct_gaining: if n_wsd == 0 { 0.0 } else { 100.0 * n_gaining as f64 / n_wsd as f64 },
        avg_gained,
        stderr,
        avg_gained_all,
        stderr_all,
        histogram,
    }
}

/// Sequential evaluation of every device.
pub fn evaluate_gain(
    scenario: &Scenario,
    rule: &SeparationRule,
    ladder: &[PowerClass],
    seed: u64,
    fingerprint: u64,
) -> Result<GainStats> {
    let ev = GainEvaluator::new(scenario, rule, ladder)?;
    let rows: Vec<Vec<u16>> = (0..ev.wsd_count()).map(|i| ev.counts_for(i)).collect();
    Ok(GainStats::from_counts(
        ladder,
        rows.iter().map(|r| r.as_slice()),
        seed,
        fingerprint,
    ))
}

/// Expected free channels for a device far from the edges when each
/// channel's protected sets form a Poisson process of the given density.
/// The plan is taken as contiguous, so the two end channels have one
/// neighbour and the rest have two.
pub fn analytic_expectation(density_per_channel: f64, r_co: f64, r_adj: f64, n_channels: usize) -> f64 {
    if n_channels == 0 {
        return 0.0;
    }
    let pi = core::f64::consts::PI;
    let co = exp(-density_per_channel * pi * r_co * r_co);
    let a = exp(-density_per_channel * pi * r_adj * r_adj);
    let adj_sum = match n_channels {
        1 => 1.0,
        n => (n - 2) as f64 * a * a + 2.0 * a,
    };
    co * adj_sum
}

/// Area of the disk of radius `r` at `c` that lies inside `area`.
pub fn disk_area_inside(area: &AreaOfInterest, c: GeoPoint, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let steps = 256;
    let x0 = (c.x - r).max(0.0);
    let x1 = (c.x + r).min(area.width());
    if x1 <= x0 {
        return 0.0;
    }
    let dx = (x1 - x0) / steps as f64;
    let mut total = 0.0;
    // Midpoint rule on the clipped chord length.
    for k in 0..steps {
        let x = x0 + (k as f64 + 0.5) * dx;
        let half = sqrt((r * r - (x - c.x) * (x - c.x)).max(0.0));
        let lo = (c.y - half).max(0.0);
        let hi = (c.y + half).min(area.height());
        total += (hi - lo).max(0.0) * dx;
    }
    total
}

/// Edge-aware variant of [`analytic_expectation`]: averages the void
/// probabilities over devices placed on a `samples` × `samples` grid,
/// using only the part of each protection disk inside the area.
pub fn analytic_expectation_in_area(
    area: &AreaOfInterest,
    density_per_channel: f64,
    r_co: f64,
    r_adj: f64,
    n_channels: usize,
    samples: usize,
) -> f64 {
    if n_channels == 0 || samples == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..samples {
        for j in 0..samples {
            let p = GeoPoint::new(
                (i as f64 + 0.5) / samples as f64 * area.width(),
                (j as f64 + 0.5) / samples as f64 * area.height(),
            );
            let co = exp(-density_per_channel * disk_area_inside(area, p, r_co));
            let a = exp(-density_per_channel * disk_area_inside(area, p, r_adj));
            let adj_sum = match n_channels {
                1 => 1.0,
                n => (n - 2) as f64 * a * a + 2.0 * a,
            };
            total += co * adj_sum;
        }
    }
    total / (samples * samples) as f64
}

/// Published results for the two preset cities: (percent gaining, average
/// channels gained).
pub fn reference_target(city: &str, power: PowerClass) -> Option<(f64, f64)> {
    const NY: [(f64, f64); 5] = [(100.0, 9.65), (99.0, 4.0), (92.0, 2.7), (49.8, 1.53), (19.9, 1.27)];
    const MIAMI: [(f64, f64); 5] = [(100.0, 23.4), (100.0, 21.0), (100.0, 19.6), (100.0, 15.5), (100.0, 12.2)];
    let row = match city {
        "ny" | "new_york" | "new-york" => &NY,
        "miami" => &MIAMI,
        _ => return None,
    };
    PowerClass::LADDER
        .iter()
        .position(|p| p.same_as(power))
        .map(|k| row[k])
}
