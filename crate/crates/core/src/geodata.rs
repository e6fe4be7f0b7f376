//! Station network ingestion: observation CSV parsing, the leap-day-free
//! calendar, and projected distance geometry.
//!
//! Missing values are stored as `NaN` in the per-variable value vectors; use
//! [`BivariateSeries::get`] for an `Option` view.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DAYS_PER_YEAR: usize = 365;
const KM_PER_DEG_LON_EQUATOR: f64 = 111.32;
const KM_PER_DEG_LAT: f64 = 110.57;

/// Minimum (N) or maximum (X) daily temperature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    #[serde(rename = "N")]
    Tmin,
    #[serde(rename = "X")]
    Tmax,
}

impl Variable {
    pub const BOTH: [Variable; 2] = [Variable::Tmin, Variable::Tmax];

    pub fn index(self) -> usize {
        match self {
            Variable::Tmin => 0,
            Variable::Tmax => 1,
        }
    }

    pub fn other(self) -> Variable {
        match self {
            Variable::Tmin => Variable::Tmax,
            Variable::Tmax => Variable::Tmin,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variable::Tmin => "N",
            Variable::Tmax => "X",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
    pub elev: f64,
    /// Projected coordinates in km about the network centroid.
    pub xy: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct BivariateSeries {
    pub station_index: usize,
    /// `values[v][t]` for variable index `v`; `NaN` marks a missing value.
    pub values: [Vec<f64>; 2],
}

impl BivariateSeries {
    pub fn missing(station_index: usize, len: usize) -> Self {
        BivariateSeries {
            station_index,
            values: [vec![f64::NAN; len], vec![f64::NAN; len]],
        }
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, var: Variable, t: usize) -> Option<f64> {
        let v = self.values[var.index()][t];
        (!v.is_nan()).then_some(v)
    }

    pub fn observed_count(&self, var: Variable) -> usize {
        self.values[var.index()].iter().filter(|v| !v.is_nan()).count()
    }
}

/// Leap-day-free daily calendar. Time indices are 0-based internally; the
/// model formulas use the 1-based `t + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Day of year (1..=365, Feb 29 removed) of `t = 0`.
    pub start_doy: u16,
    pub len: usize,
}

impl Calendar {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidArgument(format!("window end {end} precedes start {start}")));
        }
        let start = if is_leap_day(start) { start.succ_opt().unwrap() } else { start };
        let mut len = 0usize;
        let mut d = start;
        while d <= end {
            if !is_leap_day(d) {
                len += 1;
            }
            d = d.succ_opt().ok_or_else(|| Error::InvalidArgument("date overflow".into()))?;
        }
        Ok(Calendar {
            start,
            end,
            start_doy: day_of_year_noleap(start),
            len,
        })
    }

    /// Calendar day `d(t)` in 1..=365; valid for any integer offset, including
    /// indices past the fitting window.
    pub fn day_of_year(&self, t: i64) -> u16 {
        let base = self.start_doy as i64 - 1 + t;
        (base.rem_euclid(DAYS_PER_YEAR as i64) + 1) as u16
    }

    /// Index of `date` within the window, or `None` for leap days and out-of-window dates.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        if date < self.start || date > self.end || is_leap_day(date) {
            return None;
        }
        let raw = (date - self.start).num_days();
        let leaps = count_leap_days(self.start, date);
        Some((raw - leaps) as usize)
    }

    pub fn date_of(&self, t: usize) -> NaiveDate {
        let mut d = self.start;
        let mut k = 0;
        while k < t {
            d = d.succ_opt().expect("date in range");
            if !is_leap_day(d) {
                k += 1;
            }
        }
        d
    }
}

fn is_leap_day(d: NaiveDate) -> bool {
    d.month() == 2 && d.day() == 29
}

/// Leap days in the half-open interval `[from, to)`.
fn count_leap_days(from: NaiveDate, to: NaiveDate) -> i64 {
    let mut n = 0;
    for y in from.year()..=to.year() {
        if let Some(ld) = NaiveDate::from_ymd_opt(y, 2, 29) {
            if ld >= from && ld < to {
                n += 1;
            }
        }
    }
    n
}

pub fn day_of_year_noleap(d: NaiveDate) -> u16 {
    let ord = d.ordinal() as u16;
    let leap = NaiveDate::from_ymd_opt(d.year(), 2, 29).is_some();
    if leap && d.month() > 2 {
        ord - 1
    } else {
        ord
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationNetwork {
    pub stations: Vec<Station>,
    pub series: Vec<BivariateSeries>,
    pub calendar: Calendar,
    /// (lon, lat) in degrees.
    pub centroid: (f64, f64),
}

impl StationNetwork {
    /// Builds a network from already-assembled parts, projecting coordinates
    /// about the station centroid.
    pub fn from_parts(
        mut stations: Vec<Station>,
        series: Vec<BivariateSeries>,
        calendar: Calendar,
    ) -> Result<Self> {
        if stations.is_empty() {
            return Err(Error::EmptyNetwork("no stations".into()));
        }
        if stations.len() != series.len() {
            return Err(Error::InvalidArgument("stations/series length mismatch".into()));
        }
        if series.iter().any(|s| s.len() != calendar.len) {
            return Err(Error::InvalidArgument("series length differs from calendar".into()));
        }
        let n = stations.len() as f64;
        let centroid = (
            stations.iter().map(|s| s.lon).sum::<f64>() / n,
            stations.iter().map(|s| s.lat).sum::<f64>() / n,
        );
        for s in &mut stations {
            s.xy = project_coordinates(s.lon, s.lat, centroid);
        }
        Ok(StationNetwork {
            stations,
            series,
            calendar,
            centroid,
        })
    }

    pub fn n(&self) -> usize {
        self.stations.len()
    }

    pub fn t_len(&self) -> usize {
        self.calendar.len
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        self.stations.iter().map(|s| s.xy).collect()
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    /// Network with station `k` removed (series re-indexed).
    pub fn without_station(&self, k: usize) -> StationNetwork {
        let mut stations = self.stations.clone();
        let mut series = self.series.clone();
        stations.remove(k);
        series.remove(k);
        for (i, s) in series.iter_mut().enumerate() {
            s.station_index = i;
        }
        StationNetwork {
            stations,
            series,
            calendar: self.calendar.clone(),
            centroid: self.centroid,
        }
    }

    pub fn sidecar(&self) -> NetworkSidecar {
        NetworkSidecar {
            centroid_lon: self.centroid.0,
            centroid_lat: self.centroid.1,
            start_date: self.calendar.start.to_string(),
            end_date: self.calendar.end.to_string(),
            n: self.n(),
            t_len: self.t_len(),
            station_ids: self.stations.iter().map(|s| s.id.clone()).collect(),
        }
    }
}

/// Provenance record written next to an ingested network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSidecar {
    pub centroid_lon: f64,
    pub centroid_lat: f64,
    pub start_date: String,
    pub end_date: String,
    pub n: usize,
    pub t_len: usize,
    pub station_ids: Vec<String>,
}

/// Local equirectangular projection about `centroid` (lon, lat), in km.
pub fn project_coordinates(lon: f64, lat: f64, centroid: (f64, f64)) -> [f64; 2] {
    let (lon_c, lat_c) = centroid;
    [
        KM_PER_DEG_LON_EQUATOR * lat_c.to_radians().cos() * (lon - lon_c),
        KM_PER_DEG_LAT * (lat - lat_c),
    ]
}

/// Inverse of [`project_coordinates`]: (lon, lat) of a projected point.
pub fn unproject_coordinates(xy: [f64; 2], centroid: (f64, f64)) -> (f64, f64) {
    let (lon_c, lat_c) = centroid;
    (
        lon_c + xy[0] / (KM_PER_DEG_LON_EQUATOR * lat_c.to_radians().cos()),
        lat_c + xy[1] / KM_PER_DEG_LAT,
    )
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// All `n(n-1)/2` pairwise distances, unsorted.
pub fn pairwise_distances(xy: &[[f64; 2]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xy.len() * xy.len().saturating_sub(1) / 2);
    for i in 0..xy.len() {
        for j in (i + 1)..xy.len() {
            out.push(distance(xy[i], xy[j]));
        }
    }
    out
}

/// Empirical `q`-quantile (lower interpolation) of the intersite distances.
pub fn intersite_distance_quantile(network: &StationNetwork, q: f64) -> Result<f64> {
    distance_quantile(&network.coords(), q)
}

pub fn distance_quantile(xy: &[[f64; 2]], q: f64) -> Result<f64> {
    if xy.len() < 2 {
        return Err(Error::InsufficientData("need at least two stations for intersite distances".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level {q} outside (0, 1)")));
    }
    let mut d = pairwise_distances(xy);
    d.sort_by(f64::total_cmp);
    let idx = (q * (d.len() - 1) as f64).floor() as usize;
    Ok(d[idx])
}

fn parse_missing(field: &str) -> Option<std::result::Result<f64, std::num::ParseFloatError>> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") || f == "-9999" {
        None
    } else {
        Some(f.parse::<f64>())
    }
}

struct StationMeta {
    lon: f64,
    lat: f64,
    elev: f64,
    first_row: usize,
}

/// Parses row-oriented observations
/// (`station_id,lon,lat,elev,date,tmin,tmax,qflag_tmin,qflag_tmax`), keeping
/// dates inside `[start, end]`. A header row is optional. Flagged or absent
/// values become missing, Feb 29 rows are dropped, and stations with no
/// usable observation are removed.
pub fn parse_observations<R: Read>(source: R, start: NaiveDate, end: NaiveDate) -> Result<StationNetwork> {
    let calendar = Calendar::new(start, end)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut meta: BTreeMap<String, StationMeta> = BTreeMap::new();
    let mut values: BTreeMap<String, [Vec<f64>; 2]> = BTreeMap::new();
    let mut seen: BTreeMap<(String, usize), usize> = BTreeMap::new();

    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::MalformedRow { row, msg: e.to_string() })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if row == 1 && rec.get(0).is_some_and(|f| f.eq_ignore_ascii_case("station_id")) {
            continue;
        }
        if rec.len() != 9 {
            return Err(Error::MalformedRow { row, msg: format!("expected 9 columns, found {}", rec.len()) });
        }
        let bad = |msg: String| Error::MalformedRow { row, msg };
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(bad("empty station_id".into()));
        }
        let num = |k: usize, name: &str| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|_| bad(format!("bad {name} '{}'", &rec[k])))
        };
        let lon = num(1, "lon")?;
        let lat = num(2, "lat")?;
        let elev = num(3, "elev")?;
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(bad(format!("coordinates out of range ({lon}, {lat})")));
        }
        let date = NaiveDate::parse_from_str(&rec[4], "%Y-%m-%d")
            .map_err(|_| bad(format!("bad date '{}'", &rec[4])))?;

        match meta.get(&id) {
            Some(m) => {
                if (m.lon - lon).abs() > 1e-9 || (m.lat - lat).abs() > 1e-9 || (m.elev - elev).abs() > 1e-9 {
                    return Err(bad(format!(
                        "station {id} metadata differs from row {}",
                        m.first_row
                    )));
                }
            }
            None => {
                meta.insert(id.clone(), StationMeta { lon, lat, elev, first_row: row });
            }
        }

        let Some(t) = calendar.index_of(date) else { continue };
        if let Some(prev) = seen.insert((id.clone(), t), row) {
            return Err(bad(format!("duplicate observation for {id} on {date} (first at row {prev})")));
        }
        let slot = values
            .entry(id.clone())
            .or_insert_with(|| [vec![f64::NAN; calendar.len], vec![f64::NAN; calendar.len]]);
        for (v, (vcol, fcol)) in [(5usize, 7usize), (6, 8)].into_iter().enumerate() {
            if !rec[fcol].is_empty() {
                continue;
            }
            match parse_missing(&rec[vcol]) {
                None => {}
                Some(Ok(x)) if x.is_finite() => slot[v][t] = x,
                Some(_) => return Err(bad(format!("bad temperature '{}'", &rec[vcol]))),
            }
        }
    }

    let mut stations = Vec::new();
    let mut series = Vec::new();
    for (id, vals) in values {
        if vals.iter().all(|col| col.iter().all(|v| v.is_nan())) {
            continue;
        }
        let m = &meta[&id];
        series.push(BivariateSeries { station_index: stations.len(), values: vals });
        stations.push(Station { id, lon: m.lon, lat: m.lat, elev: m.elev, xy: [0.0, 0.0] });
    }
    if stations.is_empty() {
        return Err(Error::EmptyNetwork(format!("no observations between {start} and {end}")));
    }
    StationNetwork::from_parts(stations, series, calendar)
}

/// Writes the network back in the input CSV schema (with header). Rows with
/// both values missing are omitted.
pub fn write_observations<W: Write>(network: &StationNetwork, mut out: W) -> Result<()> {
    writeln!(out, "station_id,lon,lat,elev,date,tmin,tmax,qflag_tmin,qflag_tmax")?;
    let fmt = |v: f64| if v.is_nan() { String::new() } else { format!("{v}") };
    for (st, se) in network.stations.iter().zip(&network.series) {
        let mut date = network.calendar.start;
        for t in 0..network.t_len() {
            if t > 0 {
                date = date.succ_opt().unwrap();
                if is_leap_day(date) {
                    date = date.succ_opt().unwrap();
                }
            }
            let (n, x) = (se.values[0][t], se.values[1][t]);
            if n.is_nan() && x.is_nan() {
                continue;
            }
            writeln!(out, "{},{},{},{},{},{},{},,", st.id, st.lon, st.lat, st.elev, date, fmt(n), fmt(x))?;
        }
    }
    Ok(())
}
