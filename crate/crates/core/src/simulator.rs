//! Unconditional simulation of daily minimum and maximum temperature at
//! arbitrary locations: per-calendar-day weather covariance, Gaussian draws,
//! and the bivariate autoregressive climate recursion.

use std::borrow::Cow;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{self, BivariateMaternParams};
use crate::climate::{covariate_rows, interpolate_coefficients, Beta, Climatology, ClimateModel};
use crate::error::{Error, Result};
use crate::geodata::{distance, Calendar, StationNetwork, DAYS_PER_YEAR};
use crate::gpcore::COINCIDENT_KM;
use crate::linalg::{cholesky_jittered, min_eigenvalue};
use crate::nugget::{interpolate_nugget, NuggetField};
use crate::weathercov::{LocationCov, StationCovCache};

/// Default cap on simulated locations (the day factors are 2G × 2G).
pub const DEFAULT_MAX_LOCATIONS: usize = 2500;

/// Weather covariance over a fixed location set, nugget included.
pub trait WeatherCovariance: Sync {
    fn dim(&self) -> usize;
    fn day_covariance(&self, d: u16) -> Result<DMatrix<f64>>;
}

fn add_nugget(mut m: DMatrix<f64>, tau: &[[f64; 2]]) -> DMatrix<f64> {
    for (g, t) in tau.iter().enumerate() {
        for i in 0..2 {
            m[(2 * g + i, 2 * g + i)] += t[i] * t[i];
        }
    }
    m
}

/// Nonparametric seasonal covariance plus local nuggets.
pub struct NonparametricWeather {
    pub cov: LocationCov,
    pub tau: Vec<[f64; 2]>,
}

impl WeatherCovariance for NonparametricWeather {
    fn dim(&self) -> usize {
        self.cov.dim()
    }

    fn day_covariance(&self, d: u16) -> Result<DMatrix<f64>> {
        Ok(add_nugget(self.cov.block_matrix(d)?, &self.tau))
    }
}

/// Station-level cached covariance plus station nuggets.
pub struct CachedWeather<'a> {
    pub cache: &'a StationCovCache,
    pub tau: Vec<[f64; 2]>,
}

impl WeatherCovariance for CachedWeather<'_> {
    fn dim(&self) -> usize {
        self.cache.header.dim
    }

    fn day_covariance(&self, d: u16) -> Result<DMatrix<f64>> {
        let m = self
            .cache
            .days
            .get(d as usize - 1)
            .ok_or_else(|| Error::InvalidArgument(format!("day {d} outside cache")))?;
        Ok(add_nugget(m.clone(), &self.tau))
    }
}

/// Stationary bivariate Matérn covariance, identical on every day.
pub struct StationaryWeather {
    matrix: DMatrix<f64>,
}

impl StationaryWeather {
    pub fn new(params: &BivariateMaternParams, locations: &[[f64; 2]]) -> Result<Self> {
        params.validate()?;
        Ok(StationaryWeather {
            matrix: baseline::covariance_matrix(params, locations),
        })
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        StationaryWeather { matrix }
    }
}

impl WeatherCovariance for StationaryWeather {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn day_covariance(&self, _d: u16) -> Result<DMatrix<f64>> {
        Ok(self.matrix.clone())
    }
}

/// Locations with their climate coefficients and nugget standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationGrid {
    pub locations: Vec<[f64; 2]>,
    pub beta: Vec<[Beta; 2]>,
    pub tau: Vec<[f64; 2]>,
}

impl SimulationGrid {
    pub fn new(locations: Vec<[f64; 2]>, beta: Vec<[Beta; 2]>, tau: Vec<[f64; 2]>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InvalidArgument("empty simulation grid".into()));
        }
        if beta.len() != locations.len() || tau.len() != locations.len() {
            return Err(Error::InvalidArgument("grid arrays differ in length".into()));
        }
        let finite = locations.iter().flatten().chain(beta.iter().flatten().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("grid coordinates or coefficients".into()));
        }
        if tau.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("nugget standard deviations must be finite and nonnegative".into()));
        }
        Ok(SimulationGrid { locations, beta, tau })
    }

    /// Kriged coefficients and nuggets at `locations`.
    pub fn from_models(locations: Vec<[f64; 2]>, climate: &ClimateModel, nugget: &[NuggetField; 2]) -> Result<Self> {
        let coefs = interpolate_coefficients(&climate.fields, &locations)?;
        let beta = coefs.iter().map(|c| c.beta).collect();
        let xy = &climate.fields.xy;
        let tn = interpolate_nugget(&nugget[0], xy, &locations)?;
        let tx = interpolate_nugget(&nugget[1], xy, &locations)?;
        let tau = tn.into_iter().zip(tx).map(|(a, b)| [a, b]).collect();
        SimulationGrid::new(locations, beta, tau)
    }

    /// Grid at the stations themselves, using the station fits directly.
    pub fn at_stations(climate: &ClimateModel, nugget: &[NuggetField; 2]) -> Result<Self> {
        let beta = climate.stations.iter().map(|s| s.beta).collect();
        let tau = (0..climate.stations.len())
            .map(|k| [nugget[0].station_tau[k], nugget[1].station_tau[k]])
            .collect();
        SimulationGrid::new(climate.fields.xy.clone(), beta, tau)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Lower Cholesky factor of one calendar day's covariance.
#[derive(Clone, Debug)]
pub struct DayFactor {
    pub d: u16,
    pub l: DMatrix<f64>,
    pub jitter: f64,
}

pub fn build_day_factorization(weather: &dyn WeatherCovariance, d: u16) -> Result<DayFactor> {
    let m = weather.day_covariance(d)?;
    if m.iter().all(|v| *v == 0.0) {
        // degenerate zero-variance weather
        return Ok(DayFactor { d, l: m, jitter: 0.0 });
    }
    match cholesky_jittered(&m) {
        Ok(c) => Ok(DayFactor {
            d,
            l: c.l(),
            jitter: c.jitter,
        }),
        Err(_) => Err(Error::Factorization(format!(
            "day {d}: covariance not positive definite at jitter cap (min eigenvalue {:e})",
            min_eigenvalue(&m)
        ))),
    }
}

/// Factors for a set of calendar days, built in parallel.
#[derive(Clone, Debug, Default)]
pub struct FactorCache {
    factors: Vec<Option<DayFactor>>,
}

impl FactorCache {
    pub fn build(weather: &dyn WeatherCovariance, days: &[u16]) -> Result<Self> {
        let mut wanted = days.to_vec();
        wanted.sort_unstable();
        wanted.dedup();
        let built = wanted
            .par_iter()
            .map(|&d| build_day_factorization(weather, d))
            .collect::<Result<Vec<_>>>()?;
        let mut factors = vec![None; DAYS_PER_YEAR];
        for f in built {
            let idx = f.d as usize - 1;
            factors[idx] = Some(f);
        }
        Ok(FactorCache { factors })
    }

    pub fn all_days(weather: &dyn WeatherCovariance) -> Result<Self> {
        let days: Vec<u16> = (1..=DAYS_PER_YEAR as u16).collect();
        FactorCache::build(weather, &days)
    }

    pub fn get(&self, d: u16) -> Option<&DayFactor> {
        self.factors.get(d as usize - 1)?.as_ref()
    }
}

/// Independent random stream for absolute day index `t`.
pub fn day_rng(seed: u64, t: i64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

/// One draw `L ξ`, returned as `(w_N, w_X)` per location.
pub fn draw_weather<R: Rng>(factor: &DayFactor, rng: &mut R) -> Vec<[f64; 2]> {
    let m = factor.l.nrows();
    let xi = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = &factor.l * xi;
    (0..m / 2).map(|g| [w[2 * g], w[2 * g + 1]]).collect()
}

/// Simulated temperatures, location-major: `z[i][g * t_len + t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOutput {
    pub locations: Vec<[f64; 2]>,
    /// First simulated day as an offset from the fitting window start.
    pub t_start: i64,
    pub t_len: usize,
    pub seed: u64,
    pub z: [Vec<f64>; 2],
    pub masked: bool,
}

impl SimulationOutput {
    pub fn get(&self, i: usize, g: usize, t: usize) -> f64 {
        self.z[i][g * self.t_len + t]
    }

    pub fn series(&self, i: usize, g: usize) -> &[f64] {
        &self.z[i][g * self.t_len..(g + 1) * self.t_len]
    }

    /// The simulation at network stations as a network sharing `template`'s
    /// stations and calendar, so it can be refitted like observations.
    pub fn as_network(&self, template: &StationNetwork) -> Result<StationNetwork> {
        if self.locations.len() != template.n() || self.t_start != 0 || self.t_len != template.t_len() {
            return Err(Error::InvalidArgument("simulation does not match the network".into()));
        }
        let mut net = template.clone();
        for (g, s) in net.series.iter_mut().enumerate() {
            for i in 0..2 {
                s.values[i] = self.series(i, g).to_vec();
            }
        }
        Ok(net)
    }

    /// Fraction of jointly present `(g, t)` with maximum below minimum.
    pub fn inversion_fraction(&self) -> f64 {
        let (mut inv, mut total) = (0usize, 0usize);
        for (n, x) in self.z[0].iter().zip(&self.z[1]) {
            if !n.is_nan() && !x.is_nan() {
                total += 1;
                if x < n {
                    inv += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            inv as f64 / total as f64
        }
    }
}

/// Day range and seed for a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub t_start: i64,
    pub t_len: usize,
    pub seed: u64,
}

/// Time axis of the fitted model: calendar and training climatology.
#[derive(Clone, Copy, Debug)]
pub struct Timeline<'a> {
    pub calendar: &'a Calendar,
    pub climatology: &'a Climatology,
}

impl<'a> Timeline<'a> {
    pub fn of(climate: &'a ClimateModel) -> Self {
        Timeline {
            calendar: &climate.calendar,
            climatology: &climate.climatology,
        }
    }
}

fn check_grid(grid: &SimulationGrid, dim: usize, max_locations: usize) -> Result<()> {
    if grid.len() > max_locations {
        return Err(Error::InvalidArgument(format!(
            "{} locations exceed the cap of {max_locations}",
            grid.len()
        )));
    }
    if dim != 2 * grid.len() {
        return Err(Error::InvalidArgument("weather covariance does not match grid".into()));
    }
    Ok(())
}

/// Simulates a trajectory, factorizing each calendar day once and reusing it
/// for every year of the range.
pub fn simulate_trajectory(
    grid: &SimulationGrid,
    weather: &dyn WeatherCovariance,
    timeline: Timeline,
    spec: TrajectorySpec,
) -> Result<SimulationOutput> {
    check_grid(grid, weather.dim(), DEFAULT_MAX_LOCATIONS)?;
    simulate_inner(grid, timeline, spec, |d| build_day_factorization(weather, d).map(Cow::Owned))
}

/// As [`simulate_trajectory`], drawing from prebuilt factors.
pub fn simulate_with_factors(
    grid: &SimulationGrid,
    factors: &FactorCache,
    timeline: Timeline,
    spec: TrajectorySpec,
) -> Result<SimulationOutput> {
    simulate_inner(grid, timeline, spec, |d| {
        let f = factors
            .get(d)
            .ok_or_else(|| Error::InvalidArgument(format!("no factor cached for day {d}")))?;
        if f.l.nrows() != 2 * grid.len() {
            return Err(Error::InvalidArgument("cached factor does not match grid".into()));
        }
        Ok(Cow::Borrowed(f))
    })
}

fn simulate_inner<'f, F>(grid: &SimulationGrid, timeline: Timeline, spec: TrajectorySpec, factor: F) -> Result<SimulationOutput>
where
    F: Fn(u16) -> Result<Cow<'f, DayFactor>> + Sync,
{
    let TrajectorySpec { t_start, t_len, seed } = spec;
    let g_len = grid.len();
    let cal = timeline.calendar;
    let mut by_day: Vec<Vec<usize>> = vec![Vec::new(); DAYS_PER_YEAR];
    for t in 0..t_len {
        by_day[cal.day_of_year(t_start + t as i64) as usize - 1].push(t);
    }
    let draws: Vec<Vec<(usize, Vec<[f64; 2]>)>> = by_day
        .par_iter()
        .enumerate()
        .filter(|(_, ts)| !ts.is_empty())
        .map(|(di, ts)| {
            let f = factor(di as u16 + 1)?;
            Ok(ts
                .iter()
                .map(|&t| {
                    let mut rng = day_rng(seed, t_start + t as i64);
                    (t, draw_weather(&f, &mut rng))
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut weather = vec![Vec::new(); t_len];
    for (t, w) in draws.into_iter().flatten() {
        weather[t] = w;
    }

    let mut z = [vec![0.0; g_len * t_len], vec![0.0; g_len * t_len]];
    let init = timeline.climatology.initial_lags(cal.day_of_year(t_start));
    let mut prev: Vec<[f64; 2]> = vec![init; g_len];
    for (t, w) in weather.iter().enumerate() {
        let t_abs = t_start + t as i64;
        for g in 0..g_len {
            let rows = covariate_rows(t_abs, cal.len, prev[g][0], prev[g][1]);
            let mut now = [0.0; 2];
            for i in 0..2 {
                now[i] = rows[i].dot(&grid.beta[g][i]) + w[g][i];
                z[i][g * t_len + t] = now[i];
            }
            prev[g] = now;
        }
    }
    Ok(SimulationOutput {
        locations: grid.locations.clone(),
        t_start,
        t_len,
        seed,
        z,
        masked: false,
    })
}

/// Copies the observed missing pattern onto a station-level simulation over
/// the fitting window.
pub fn apply_missing_mask(output: &SimulationOutput, network: &StationNetwork) -> Result<SimulationOutput> {
    if output.locations.len() != network.n()
        || output.t_start != 0
        || output.t_len != network.t_len()
        || output
            .locations
            .iter()
            .zip(network.coords())
            .any(|(a, b)| distance(*a, b) > COINCIDENT_KM)
    {
        return Err(Error::InvalidArgument(
            "simulation must cover the network stations over the fitting window".into(),
        ));
    }
    let mut out = output.clone();
    for (g, s) in network.series.iter().enumerate() {
        for i in 0..2 {
            for t in 0..out.t_len {
                if s.values[i][t].is_nan() {
                    out.z[i][g * out.t_len + t] = f64::NAN;
                }
            }
        }
    }
    out.masked = true;
    Ok(out)
}

/// Little-endian f32 column.
pub fn write_f32_column<W: Write>(values: &[f64], mut out: W) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_f32_column<R: Read>(mut input: R) -> Result<Vec<f32>> {
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    if raw.len() % 4 != 0 {
        return Err(Error::Format("column length is not a multiple of 4 bytes".into()));
    }
    Ok(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect())
}

/// Long-format CSV: `location,x_km,y_km,t,tmin,tmax`.
pub fn write_long_csv<W: Write>(output: &SimulationOutput, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["location", "x_km", "y_km", "t", "tmin", "tmax"]).map_err(csv_err)?;
    let fmt = |v: f64| if v.is_nan() { String::new() } else { format!("{v:.4}") };
    for (g, loc) in output.locations.iter().enumerate() {
        for t in 0..output.t_len {
            w.write_record([
                g.to_string(),
                format!("{:.4}", loc[0]),
                format!("{:.4}", loc[1]),
                (output.t_start + t as i64).to_string(),
                fmt(output.get(0, g, t)),
                fmt(output.get(1, g, t)),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn timeline_parts(len_years: usize) -> (Calendar, Climatology) {
        let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2000 + len_years as i32, 12, 31).unwrap();
        let cal = Calendar::new(start, end).unwrap();
        let clim = Climatology {
            daily: vec![[0.0, 10.0]; 365],
            overall: [0.0, 10.0],
        };
        (cal, clim)
    }

    #[test]
    fn pure_nugget_factor() {
        let w = StationaryWeather::from_matrix(DMatrix::zeros(2, 2));
        let weather = CachedWeatherFree { inner: w, tau: vec![[1.0, 2.0]] };
        let f = build_day_factorization(&weather, 1).unwrap();
        assert_eq!(f.jitter, 0.0);
        assert!((f.l[(0, 0)] - 1.0).abs() < 1e-15 && (f.l[(1, 1)] - 2.0).abs() < 1e-15);
        assert_eq!(f.l[(1, 0)], 0.0);
    }

    /// Stationary matrix plus nuggets, for tests.
    struct CachedWeatherFree {
        inner: StationaryWeather,
        tau: Vec<[f64; 2]>,
    }

    impl WeatherCovariance for CachedWeatherFree {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn day_covariance(&self, d: u16) -> Result<DMatrix<f64>> {
            Ok(add_nugget(self.inner.day_covariance(d)?, &self.tau))
        }
    }

    #[test]
    fn identity_draws_are_standard_normal() {
        let f = DayFactor {
            d: 1,
            l: DMatrix::identity(2, 2),
            jitter: 0.0,
        };
        let mut rng = day_rng(5, 0);
        let draws: Vec<[f64; 2]> = (0..10_000).map(|_| draw_weather(&f, &mut rng)[0]).collect();
        for i in 0..2 {
            let m = draws.iter().map(|d| d[i]).sum::<f64>() / 1e4;
            let v = draws.iter().map(|d| (d[i] - m).powi(2)).sum::<f64>() / 1e4;
            assert!(m.abs() < 0.05 && (v - 1.0).abs() < 0.07, "{m} {v}");
        }
    }

    #[test]
    fn correlated_draws() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let f = build_day_factorization(&StationaryWeather::from_matrix(cov), 10).unwrap();
        let draws: Vec<[f64; 2]> = (0..10_000).map(|t| draw_weather(&f, &mut day_rng(1, t))[0]).collect();
        let mx = draws.iter().map(|d| d[0]).sum::<f64>() / 1e4;
        let my = draws.iter().map(|d| d[1]).sum::<f64>() / 1e4;
        let sxy = draws.iter().map(|d| (d[0] - mx) * (d[1] - my)).sum::<f64>();
        let sxx = draws.iter().map(|d| (d[0] - mx).powi(2)).sum::<f64>();
        let syy = draws.iter().map(|d| (d[1] - my).powi(2)).sum::<f64>();
        let r = sxy / (sxx * syy).sqrt();
        assert!((r - 0.9).abs() < 0.03, "{r}");
        let again = draw_weather(&f, &mut day_rng(1, 17));
        assert_eq!(again[0], draws[17]);
    }

    #[test]
    fn factor_reproduces_matrix() {
        let p = crate::baseline::BivariateMaternParams {
            sigma2: [4.0, 9.0],
            a: [0.02, 0.03],
            nu: [0.8, 1.2],
            tau2: [0.5, 0.5],
            rho: 0.3,
        };
        let locs: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 * 7.0, (i * i) as f64]).collect();
        let w = StationaryWeather::new(&p, &locs).unwrap();
        let f = build_day_factorization(&w, 3).unwrap();
        let sigma = w.day_covariance(3).unwrap();
        let err = (&f.l * f.l.transpose() - &sigma).abs().max();
        assert!(err <= 1e-6 * sigma.abs().max());
    }

    #[test]
    fn deterministic_surface_without_weather() {
        let (cal, clim) = timeline_parts(2);
        let beta = [[1.0, 3.0, -2.0, 0.0, 0.0, 0.5], [9.0, 4.0, -1.0, 0.0, 0.0, 0.0]];
        let grid = SimulationGrid::new(vec![[0.0, 0.0], [10.0, 0.0]], vec![beta; 2], vec![[0.0; 2]; 2]).unwrap();
        let w = StationaryWeather::from_matrix(DMatrix::zeros(4, 4));
        let spec = TrajectorySpec { t_start: 0, t_len: 730, seed: 3 };
        let out = simulate_trajectory(&grid, &w, Timeline { calendar: &cal, climatology: &clim }, spec).unwrap();
        for t in 0..730 {
            let rows = covariate_rows(t as i64, cal.len, 0.0, 0.0);
            for i in 0..2 {
                let want = rows[i].dot(&beta[i]);
                assert!((out.get(i, 1, t) - want).abs() < 1e-9);
            }
        }
        assert_eq!(out.inversion_fraction(), 0.0);
    }

    #[test]
    fn near_unit_root_persistence() {
        let (cal, clim) = timeline_parts(10);
        let beta = [[0.0, 0.0, 0.0, 0.0, 0.999, 0.0], [0.0, 0.0, 0.0, 0.0, 0.999, 0.0]];
        let grid = SimulationGrid::new(vec![[0.0, 0.0]], vec![beta], vec![[1.0, 1.0]]).unwrap();
        let w = StationaryWeather::from_matrix(DMatrix::zeros(2, 2));
        let weather = CachedWeatherFree { inner: w, tau: grid.tau.clone() };
        let spec = TrajectorySpec { t_start: 0, t_len: 3650, seed: 11 };
        let out = simulate_trajectory(&grid, &weather, Timeline { calendar: &cal, climatology: &clim }, spec).unwrap();
        let z = out.series(0, 0);
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let num: f64 = z.windows(2).map(|p| (p[0] - m) * (p[1] - m)).sum();
        let den: f64 = z.iter().map(|v| (v - m).powi(2)).sum();
        assert!(num / den > 0.99, "{}", num / den);
    }

    #[test]
    fn same_seed_same_output_and_cache_agrees() {
        let (cal, clim) = timeline_parts(2);
        let beta = [[1.0, 3.0, -2.0, 0.1, 0.5, 0.5], [9.0, 4.0, -1.0, 0.1, 0.5, 0.0]];
        let locs = vec![[0.0, 0.0], [15.0, 5.0], [30.0, -10.0]];
        let grid = SimulationGrid::new(locs.clone(), vec![beta; 3], vec![[0.5, 0.7]; 3]).unwrap();
        let p = crate::baseline::BivariateMaternParams {
            sigma2: [4.0, 9.0],
            a: [0.02, 0.03],
            nu: [0.8, 1.2],
            tau2: [0.5, 0.5],
            rho: 0.3,
        };
        let w = StationaryWeather::new(&p, &locs).unwrap();
        let tl = Timeline { calendar: &cal, climatology: &clim };
        let spec = TrajectorySpec { t_start: 100, t_len: 500, seed: 42 };
        let a = simulate_trajectory(&grid, &w, tl, spec).unwrap();
        let b = simulate_trajectory(&grid, &w, tl, spec).unwrap();
        assert_eq!(a, b);
        let cache = FactorCache::all_days(&w).unwrap();
        let c = simulate_with_factors(&grid, &cache, tl, spec).unwrap();
        assert_eq!(a, c);
        let d = simulate_trajectory(&grid, &w, tl, TrajectorySpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn grid_validation() {
        let beta = [[0.0; 6]; 2];
        assert!(SimulationGrid::new(vec![], vec![], vec![]).is_err());
        assert!(SimulationGrid::new(vec![[0.0, 0.0]], vec![beta], vec![[-0.1, 0.0]]).is_err());
        assert!(SimulationGrid::new(vec![[f64::NAN, 0.0]], vec![beta], vec![[0.1, 0.0]]).is_err());
    }

    #[test]
    fn f32_column_round_trip() {
        let v = vec![1.5, -2.25, f64::NAN, 30.0];
        let mut buf = Vec::new();
        write_f32_column(&v, &mut buf).unwrap();
        assert_eq!(buf.len(), 16);
        let back = read_f32_column(&buf[..]).unwrap();
        assert_eq!(back[0], 1.5);
        assert!(back[2].is_nan());
    }
}
