//! Planar geometry, the cell grid, channel plans and power classes.
//!
//! All locations are local planar coordinates in meters, measured east (`x`)
//! and north (`y`) of the south-west corner of the area of interest.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Default cell edge length in meters.
pub const DEFAULT_CELL_SIZE_M: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        GeoPoint { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Euclidean distance in meters.
pub fn distance(p: GeoPoint, q: GeoPoint) -> f64 {
    math::hypot(p.x - q.x, p.y - q.y)
}

/// Converts WGS84 latitude/longitude into local planar meters with an
/// equirectangular projection around a fixed origin. Accurate to well under
/// a meter across areas a few tens of kilometers wide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    pub origin_lat_deg: f64,
    pub origin_lon_deg: f64,
}

impl LocalProjection {
    const EARTH_RADIUS_M: f64 = 6_371_008.8;

    pub fn project(&self, lat_deg: f64, lon_deg: f64) -> GeoPoint {
        let rad = core::f64::consts::PI / 180.0;
        let k = Self::EARTH_RADIUS_M * rad;
        GeoPoint {
            x: (lon_deg - self.origin_lon_deg) * k * math::cos(self.origin_lat_deg * rad),
            y: (lat_deg - self.origin_lat_deg) * k,
        }
    }
}

/// Serializes a map keyed by [`Cell`] as a list of pairs, for formats whose
/// map keys must be strings.
pub mod cell_map {
    use alloc::collections::BTreeMap;
    use alloc::vec::Vec;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Cell;

    pub fn serialize<V: Serialize, S: Serializer>(map: &BTreeMap<Cell, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, V, D>(d: D) -> Result<BTreeMap<Cell, V>, D::Error>
    where
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(Cell, V)>::deserialize(d)?.into_iter().collect())
    }
}

/// Channel-keyed maps. Keys are written as JSON object keys (strings) and
/// read back from either strings or integers, which keeps them readable
/// inside internally tagged enums where serde buffers the content.
pub mod channel_map {
    use alloc::collections::BTreeMap;
    use core::fmt;
    use core::marker::PhantomData;

    use serde::de::{self, MapAccess, Visitor};
    use serde::{Deserialize, Deserializer};

    struct Key(u16);

    impl<'de> Deserialize<'de> for Key {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            struct KeyVisitor;
            impl Visitor<'_> for KeyVisitor {
                type Value = Key;

                fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                    f.write_str("a channel index")
                }

                fn visit_u64<E: de::Error>(self, v: u64) -> Result<Key, E> {
                    u16::try_from(v).map(Key).map_err(|_| E::custom("channel index out of range"))
                }

                fn visit_i64<E: de::Error>(self, v: i64) -> Result<Key, E> {
                    u16::try_from(v).map(Key).map_err(|_| E::custom("channel index out of range"))
                }

                fn visit_str<E: de::Error>(self, v: &str) -> Result<Key, E> {
                    v.parse().map(Key).map_err(|_| E::custom("channel index must be an integer"))
                }
            }
            d.deserialize_any(KeyVisitor)
        }
    }

    pub fn deserialize<'de, V, D>(d: D) -> Result<BTreeMap<u16, V>, D::Error>
    where
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        struct MapVisitor<V>(PhantomData<V>);
        impl<'de, V: Deserialize<'de>> Visitor<'de> for MapVisitor<V> {
            type Value = BTreeMap<u16, V>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map keyed by channel index")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<Self::Value, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((Key(k), v)) = m.next_entry::<Key, V>()? {
                    out.insert(k, v);
                }
                Ok(out)
            }
        }
        d.deserialize_map(MapVisitor(PhantomData))
    }
}

/// Rectangular area of interest anchored at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AreaFields", into = "AreaFields")]
pub struct AreaOfInterest {
    width: f64,
    height: f64,
    cell_size: f64,
}

#[derive(Serialize, Deserialize)]
struct AreaFields {
    width: f64,
    height: f64,
    #[serde(default = "default_cell_size")]
    cell_size: f64,
}

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE_M
}

impl TryFrom<AreaFields> for AreaOfInterest {
    type Error = Error;

    fn try_from(f: AreaFields) -> Result<Self> {
        AreaOfInterest::new(f.width, f.height, f.cell_size)
    }
}

impl From<AreaOfInterest> for AreaFields {
    fn from(a: AreaOfInterest) -> Self {
        AreaFields {
            width: a.width,
            height: a.height,
            cell_size: a.cell_size,
        }
    }
}

impl AreaOfInterest {
    pub fn new(width: f64, height: f64, cell_size: f64) -> Result<Self> {
        for (field, v) in [("width", width), ("height", height), ("cell_size", cell_size)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, "must be positive and finite"));
            }
        }
        if cell_size > width.min(height) {
            return Err(Error::invalid(
                "cell_size",
                "must not exceed the shorter side of the area",
            ));
        }
        Ok(AreaOfInterest {
            width,
            height,
            cell_size,
        })
    }

    /// Area with the default 50 m cells.
    pub fn with_default_cells(width: f64, height: f64) -> Result<Self> {
        Self::new(width, height, DEFAULT_CELL_SIZE_M)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn surface_m2(&self) -> f64 {
        self.width * self.height
    }

    pub fn diagonal(&self) -> f64 {
        math::hypot(self.width, self.height)
    }

    pub fn columns(&self) -> u32 {
        math::ceil(self.width / self.cell_size) as u32
    }

    pub fn rows(&self) -> u32 {
        math::ceil(self.height / self.cell_size) as u32
    }

    pub fn cell_count(&self) -> usize {
        self.columns() as usize * self.rows() as usize
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.is_finite() && p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    /// Cell containing `p`; points on the far edges belong to the last cell.
    pub fn cell_of(&self, p: GeoPoint) -> Result<Cell> {
        if !self.contains(p) {
            return Err(Error::OutOfArea { x: p.x, y: p.y });
        }
        let i = (math::floor(p.x / self.cell_size) as u32).min(self.columns() - 1);
        let j = (math::floor(p.y / self.cell_size) as u32).min(self.rows() - 1);
        Ok(Cell { i, j })
    }

    pub fn is_valid_cell(&self, cell: Cell) -> bool {
        cell.i < self.columns() && cell.j < self.rows()
    }

    /// Cell rectangle clipped to the area.
    pub fn cell_rect(&self, cell: Cell) -> Rect {
        let x0 = cell.i as f64 * self.cell_size;
        let y0 = cell.j as f64 * self.cell_size;
        Rect {
            x0,
            y0,
            x1: (x0 + self.cell_size).min(self.width),
            y1: (y0 + self.cell_size).min(self.height),
        }
    }

    pub fn cell_center(&self, cell: Cell) -> GeoPoint {
        self.cell_rect(cell).center()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let cols = self.columns();
        (0..self.rows()).flat_map(move |j| (0..cols).map(move |i| Cell { i, j }))
    }

    /// Every cell whose closed rectangle meets the closed disk of `radius`
    /// around `center`.
    pub fn cells_within(&self, center: GeoPoint, radius: f64) -> Vec<Cell> {
        let mut out = Vec::new();
        if !(center.is_finite() && radius >= 0.0) {
            return out;
        }
        let cs = self.cell_size;
        let lo = |v: f64, n: u32| -> u32 {
            let k = math::floor(v / cs);
            if k < 0.0 {
                0
            } else {
                (k as u32).min(n - 1)
            }
        };
        let (cols, rows) = (self.columns(), self.rows());
        if center.x + radius < 0.0
            || center.y + radius < 0.0
            || center.x - radius > self.width
            || center.y - radius > self.height
        {
            return out;
        }
        let (i0, i1) = (lo(center.x - radius, cols), lo(center.x + radius, cols));
        let (j0, j1) = (lo(center.y - radius, rows), lo(center.y + radius, rows));
        for j in j0..=j1 {
            for i in i0..=i1 {
                let cell = Cell { i, j };
                if self.cell_rect(cell).distance_to(center) <= radius {
                    out.push(cell);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn center(&self) -> GeoPoint {
        GeoPoint::new((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    /// Nearest point of the rectangle to `p`.
    pub fn nearest_point(&self, p: GeoPoint) -> GeoPoint {
        GeoPoint::new(p.x.clamp(self.x0, self.x1), p.y.clamp(self.y0, self.y1))
    }

    pub fn distance_to(&self, p: GeoPoint) -> f64 {
        distance(self.nearest_point(p), p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub i: u32,
    pub j: u32,
}

impl Cell {
    pub const fn new(i: u32, j: u32) -> Self {
        Cell { i, j }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub index: u16,
    pub center_freq_mhz: f64,
}

impl Channel {
    /// US UHF channel: channel 14 is centered on 473 MHz, 6 MHz raster.
    pub fn uhf(index: u16) -> Self {
        Channel {
            index,
            center_freq_mhz: 473.0 + 6.0 * (index as f64 - 14.0),
        }
    }
}

/// Ordered set of channels, unique by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Channel>", into = "Vec<Channel>")]
pub struct ChannelPlan {
    channels: Vec<Channel>,
}

impl ChannelPlan {
    pub fn new(mut channels: Vec<Channel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("channels", "channel plan is empty"));
        }
        if let Some(c) = channels
            .iter()
            .find(|c| !(c.center_freq_mhz.is_finite() && c.center_freq_mhz > 0.0))
        {
            return Err(Error::invalid(
                "center_freq_mhz",
                alloc::format!("channel {} has a non-positive frequency", c.index),
            ));
        }
        channels.sort_by_key(|c| c.index);
        if let Some(w) = channels.windows(2).find(|w| w[0].index == w[1].index) {
            return Err(Error::invalid(
                "index",
                alloc::format!("channel {} listed twice", w[0].index),
            ));
        }
        Ok(ChannelPlan { channels })
    }

    /// Consecutive UHF channels `first..=last`.
    pub fn uhf_range(first: u16, last: u16) -> Result<Self> {
        Self::new((first..=last).map(Channel::uhf).collect())
    }

    /// The full post-repack US UHF TV band, channels 14 through 51.
    pub fn us_uhf() -> Self {
        Self::uhf_range(14, 51).expect("static plan")
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn indices(&self) -> impl Iterator<Item = u16> + '_ {
        self.channels.iter().map(|c| c.index)
    }

    pub fn get(&self, index: u16) -> Option<&Channel> {
        self.channels
            .binary_search_by_key(&index, |c| c.index)
            .ok()
            .map(|k| &self.channels[k])
    }

    pub fn contains(&self, index: u16) -> bool {
        self.get(index).is_some()
    }

    /// Position of `index` within the plan.
    pub fn position(&self, index: u16) -> Option<usize> {
        self.channels.binary_search_by_key(&index, |c| c.index).ok()
    }

    /// Plan channels numbered one above or below `index`.
    pub fn adjacent_channels(&self, index: u16) -> Result<Vec<Channel>> {
        if !self.contains(index) {
            return Err(Error::UnknownChannel(index));
        }
        let below = index.checked_sub(1).and_then(|i| self.get(i));
        let above = index.checked_add(1).and_then(|i| self.get(i));
        Ok(below.into_iter().chain(above).copied().collect())
    }
}

impl TryFrom<Vec<Channel>> for ChannelPlan {
    type Error = Error;

    fn try_from(channels: Vec<Channel>) -> Result<Self> {
        ChannelPlan::new(channels)
    }
}

impl From<ChannelPlan> for Vec<Channel> {
    fn from(plan: ChannelPlan) -> Self {
        plan.channels
    }
}

/// Whether two channel numbers are adjacent (differ by exactly one).
pub fn is_adjacent(a: u16, b: u16) -> bool {
    a.abs_diff(b) == 1
}

/// Transmit power level of a white space device, as EIRP in milliwatts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PowerClass(f64);

impl PowerClass {
    pub const MW_1: PowerClass = PowerClass(1.0);
    pub const MW_5: PowerClass = PowerClass(5.0);
    pub const MW_10: PowerClass = PowerClass(10.0);
    pub const MW_40: PowerClass = PowerClass(40.0);
    pub const MW_100: PowerClass = PowerClass(100.0);

    /// The default ladder, ascending.
    pub const LADDER: [PowerClass; 5] = [
        PowerClass::MW_1,
        PowerClass::MW_5,
        PowerClass::MW_10,
        PowerClass::MW_40,
        PowerClass::MW_100,
    ];

    pub fn from_mw(eirp_mw: f64) -> Result<Self> {
        if eirp_mw.is_finite() && eirp_mw > 0.0 {
            Ok(PowerClass(eirp_mw))
        } else {
            Err(Error::invalid("power_mw", "EIRP must be positive and finite"))
        }
    }

    pub fn eirp_mw(self) -> f64 {
        self.0
    }

    pub fn eirp_dbm(self) -> f64 {
        10.0 * math::log10(self.0)
    }

    /// True if both classes denote the same milliwatt value.
    pub fn same_as(self, other: PowerClass) -> bool {
        (self.0 - other.0).abs() <= 1e-9 * self.0.max(other.0)
    }
}

impl TryFrom<f64> for PowerClass {
    type Error = Error;

    fn try_from(mw: f64) -> Result<Self> {
        PowerClass::from_mw(mw)
    }
}

impl From<PowerClass> for f64 {
    fn from(p: PowerClass) -> f64 {
        p.0
    }
}

impl fmt::Display for PowerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mW", self.0)
    }
}

/// Bucketed point index over an area: fixed square buckets, each holding
/// item ids. Radius queries return a superset of the items in the disk;
/// callers apply the exact distance filter.
#[derive(Debug, Clone)]
pub struct GridIndex {
    bucket: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

impl GridIndex {
    pub fn new(width: f64, height: f64, bucket: f64) -> Self {
        let bucket = if bucket.is_finite() && bucket > 0.0 {
            bucket
        } else {
            width.max(height).max(1.0)
        };
        let cols = (math::ceil(width / bucket) as usize).max(1);
        let rows = (math::ceil(height / bucket) as usize).max(1);
        GridIndex {
            bucket,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
        }
    }

    fn col(&self, x: f64) -> usize {
        let k = math::floor(x / self.bucket);
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.cols - 1)
        }
    }

    fn row(&self, y: f64) -> usize {
        let k = math::floor(y / self.bucket);
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.rows - 1)
        }
    }

    /// Points outside the indexed extent land in the nearest edge bucket.
    pub fn insert(&mut self, id: u32, p: GeoPoint) {
        let k = self.row(p.y) * self.cols + self.col(p.x);
        self.buckets[k].push(id);
    }

    pub fn remove(&mut self, id: u32, p: GeoPoint) {
        let k = self.row(p.y) * self.cols + self.col(p.x);
        self.buckets[k].retain(|&x| x != id);
    }

    /// Calls `f` for every id in buckets meeting the square around the disk.
    pub fn for_each_candidate(&self, center: GeoPoint, radius: f64, mut f: impl FnMut(u32)) {
        let (c0, c1) = (self.col(center.x - radius), self.col(center.x + radius));
        let (r0, r1) = (self.row(center.y - radius), self.row(center.y + radius));
        for r in r0..=r1 {
            for bucket in &self.buckets[r * self.cols + c0..=r * self.cols + c1] {
                for &id in bucket {
                    f(id);
                }
            }
        }
    }

    pub fn candidates(&self, center: GeoPoint, radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_candidate(center, radius, |id| out.push(id));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area() -> AreaOfInterest {
        AreaOfInterest::new(1000.0, 600.0, 50.0).unwrap()
    }

    #[test]
    fn distance_examples() {
        let o = GeoPoint::new(0.0, 0.0);
        assert_eq!(distance(o, o), 0.0);
        assert_eq!(distance(o, GeoPoint::new(3.0, 4.0)), 5.0);
        assert_eq!(distance(GeoPoint::new(100.0, 0.0), o), 100.0);
    }

    #[test]
    fn area_validation() {
        assert!(AreaOfInterest::new(0.0, 10.0, 1.0).is_err());
        assert!(AreaOfInterest::new(10.0, 10.0, -1.0).is_err());
        assert!(AreaOfInterest::new(100.0, 40.0, 50.0).is_err());
        assert!(AreaOfInterest::new(f64::NAN, 10.0, 1.0).is_err());
        let a = AreaOfInterest::new(1010.0, 600.0, 50.0).unwrap();
        assert_eq!((a.columns(), a.rows()), (21, 12));
    }

    #[test]
    fn cell_of_examples() {
        let a = area();
        assert_eq!(a.cell_of(GeoPoint::new(0.0, 0.0)).unwrap(), Cell::new(0, 0));
        assert_eq!(a.cell_of(GeoPoint::new(49.9, 50.0)).unwrap(), Cell::new(0, 1));
        assert_eq!(
            a.cell_of(GeoPoint::new(1000.0, 600.0)).unwrap(),
            Cell::new(19, 11)
        );
        assert!(matches!(
            a.cell_of(GeoPoint::new(-0.1, 3.0)),
            Err(Error::OutOfArea { .. })
        ));
        assert!(a.cell_of(GeoPoint::new(3.0, 600.1)).is_err());
    }

    #[test]
    fn partial_edge_cells_are_clipped() {
        let a = AreaOfInterest::new(120.0, 100.0, 50.0).unwrap();
        let r = a.cell_rect(Cell::new(2, 0));
        assert_eq!((r.x0, r.x1), (100.0, 120.0));
        assert_eq!(a.cell_center(Cell::new(2, 0)), GeoPoint::new(110.0, 25.0));
    }

    #[test]
    fn cells_within_radius_zero_is_own_cell() {
        let a = area();
        let p = GeoPoint::new(123.0, 77.0);
        assert_eq!(a.cells_within(p, 0.0), vec![a.cell_of(p).unwrap()]);
    }

    #[test]
    fn cells_within_one_cell_radius_from_center() {
        let a = area();
        let center = a.cell_center(Cell::new(5, 5));
        let got = a.cells_within(center, 50.0);
        // Brute force: nearest point of each cell rectangle.
        let expect: Vec<Cell> = a
            .cells()
            .filter(|&c| a.cell_rect(c).distance_to(center) <= 50.0)
            .collect();
        let mut got_sorted = got.clone();
        got_sorted.sort();
        let mut expect_sorted = expect;
        expect_sorted.sort();
        assert_eq!(got_sorted, expect_sorted);
        // Corner cells sit at ~35.4 m, cells two steps out at 75 m.
        assert_eq!(got.len(), 9);
    }

    #[test]
    fn cells_within_diagonal_covers_everything() {
        let a = area();
        let got = a.cells_within(GeoPoint::new(0.0, 0.0), a.diagonal());
        assert_eq!(got.len(), a.cell_count());
    }

    #[test]
    fn adjacency_examples() {
        let plan = ChannelPlan::uhf_range(29, 31).unwrap();
        let adj: Vec<u16> = plan
            .adjacent_channels(30)
            .unwrap()
            .iter()
            .map(|c| c.index)
            .collect();
        assert_eq!(adj, vec![29, 31]);
        assert_eq!(plan.adjacent_channels(29).unwrap().len(), 1);

        let gappy = ChannelPlan::new(vec![Channel::uhf(28), Channel::uhf(30)]).unwrap();
        assert!(gappy.adjacent_channels(30).unwrap().is_empty());
        assert_eq!(gappy.adjacent_channels(29), Err(Error::UnknownChannel(29)));
    }

    #[test]
    fn uhf_band_frequencies() {
        let plan = ChannelPlan::us_uhf();
        assert_eq!(plan.len(), 38);
        for c in plan.channels() {
            assert!((470.0..=698.0).contains(&c.center_freq_mhz));
        }
    }

    #[test]
    fn plan_rejects_duplicates() {
        assert!(ChannelPlan::new(vec![Channel::uhf(30), Channel::uhf(30)]).is_err());
        assert!(ChannelPlan::new(Vec::new()).is_err());
    }

    #[test]
    fn power_ladder() {
        let mw: Vec<f64> = PowerClass::LADDER.iter().map(|p| p.eirp_mw()).collect();
        assert_eq!(mw, vec![1.0, 5.0, 10.0, 40.0, 100.0]);
        assert!((PowerClass::MW_100.eirp_dbm() - 20.0).abs() < 1e-12);
        assert!(PowerClass::from_mw(0.0).is_err());
    }

    #[test]
    fn projection_scale() {
        let proj = LocalProjection {
            origin_lat_deg: 0.0,
            origin_lon_deg: 0.0,
        };
        let p = proj.project(0.0, 1.0);
        assert!((p.x - 111_195.08).abs() < 1.0);
        assert!(p.y.abs() < 1e-9);
    }

    #[test]
    fn grid_index_superset() {
        let mut g = GridIndex::new(1000.0, 1000.0, 100.0);
        let pts = [
            GeoPoint::new(10.0, 10.0),
            GeoPoint::new(500.0, 500.0),
            GeoPoint::new(999.0, 999.0),
        ];
        for (k, p) in pts.iter().enumerate() {
            g.insert(k as u32, *p);
        }
        let c = g.candidates(GeoPoint::new(450.0, 450.0), 80.0);
        assert!(c.contains(&1));
        assert!(!c.contains(&0));
        g.remove(1, pts[1]);
        assert!(g.candidates(GeoPoint::new(450.0, 450.0), 80.0).is_empty());
    }
}
