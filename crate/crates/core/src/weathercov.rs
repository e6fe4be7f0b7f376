//! Nonparametric, seasonally varying bivariate covariance of the weather
//! residuals: a spatial kernel smoother of daily residual products averaged
//! over nearby calendar days.
//!
//! For a day `t` the single-day estimate factors as
//! `R_ij(x, y, t) = v_i(x, t) v_j(y, t)` where `v_i(x, t)` is the kernel
//! weighted mean of the residuals observed at `t`. Everything here is built on
//! that factorization, which keeps every assembled matrix a sum of outer
//! products (hence nonnegative definite) even when observations are missing.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::climate::ClimateModel;
use crate::error::{Error, Result};
use crate::geodata::{distance, distance_quantile, StationNetwork, DAYS_PER_YEAR};
use crate::linalg::symmetrize;
use crate::nugget::LocalVariances;

pub const MAX_DAY_DISTANCE: u16 = 182;

/// Inter-site distance quantile taken as three spatial bandwidths.
pub const SPATIAL_QUANTILE: f64 = 0.05;

/// Temporal weights below this fraction of the largest weight are skipped.
const WEIGHT_CUTOFF: f64 = 1e-18;

/// Budget for keeping per-calendar-day Gram matrices in memory.
const GRAM_CACHE_BYTES: usize = 2 << 30;

/// Circular distance between two calendar days.
pub fn day_distance(d1: u16, d2: u16) -> Result<u16> {
    for d in [d1, d2] {
        if !(1..=DAYS_PER_YEAR as u16).contains(&d) {
            return Err(Error::InvalidArgument(format!("day of year {d} outside 1..=365")));
        }
    }
    Ok(circular(d1, d2))
}

fn circular(d1: u16, d2: u16) -> u16 {
    let diff = d1.abs_diff(d2);
    if diff <= MAX_DAY_DISTANCE {
        diff
    } else {
        DAYS_PER_YEAR as u16 - diff
    }
}

/// Exponential kernel `(1/lambda) exp(-h/lambda)`.
pub fn kernel_weight(h: f64, lambda: f64) -> f64 {
    (-h / lambda).exp() / lambda
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// km
    pub spatial_lambda: f64,
    /// days
    pub temporal_lambda: f64,
}

impl KernelSpec {
    pub fn new(spatial_lambda: f64, temporal_lambda: f64) -> Result<Self> {
        if !(spatial_lambda > 0.0 && spatial_lambda.is_finite() && temporal_lambda > 0.0 && temporal_lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidths must be positive, got {spatial_lambda} km and {temporal_lambda} days"
            )));
        }
        Ok(KernelSpec {
            spatial_lambda,
            temporal_lambda,
        })
    }
}

/// Residuals `W_i(s_k, t)` of the climate fit, `NaN` where missing.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualField {
    pub xy: Vec<[f64; 2]>,
    /// Calendar day of each time index.
    pub doy: Vec<u16>,
    /// Time-major: `values[i][t * n + k]`.
    values: [Vec<f64>; 2],
}

impl ResidualField {
    /// `residuals[k][i][t]` for station `k`, variable `i`.
    pub fn new(xy: Vec<[f64; 2]>, doy: Vec<u16>, residuals: &[[Vec<f64>; 2]]) -> Result<Self> {
        let n = xy.len();
        let t_len = doy.len();
        if n == 0 {
            return Err(Error::EmptyNetwork("no stations in residual field".into()));
        }
        if residuals.len() != n || residuals.iter().any(|r| r[0].len() != t_len || r[1].len() != t_len) {
            return Err(Error::InvalidArgument("residual arrays do not match network dimensions".into()));
        }
        if doy.iter().any(|d| !(1..=DAYS_PER_YEAR as u16).contains(d)) {
            return Err(Error::InvalidArgument("day of year outside 1..=365".into()));
        }
        let mut values = [vec![f64::NAN; n * t_len], vec![f64::NAN; n * t_len]];
        for (k, r) in residuals.iter().enumerate() {
            for i in 0..2 {
                for t in 0..t_len {
                    let v = r[i][t];
                    if v.is_infinite() {
                        return Err(Error::NonFinite(format!("residual at station {k}, t = {t}")));
                    }
                    values[i][t * n + k] = v;
                }
            }
        }
        Ok(ResidualField { xy, doy, values })
    }

    pub fn from_climate(network: &StationNetwork, climate: &ClimateModel) -> Result<Self> {
        let doy = (0..network.t_len()).map(|t| network.calendar.day_of_year(t as i64)).collect();
        ResidualField::new(network.coords(), doy, &climate.residuals())
    }

    pub fn n(&self) -> usize {
        self.xy.len()
    }

    pub fn t_len(&self) -> usize {
        self.doy.len()
    }

    pub fn get(&self, i: usize, k: usize, t: usize) -> Option<f64> {
        let v = self.values[i][t * self.n() + k];
        (!v.is_nan()).then_some(v)
    }

    /// All stations' values of variable `i` at time `t`.
    pub fn day(&self, i: usize, t: usize) -> &[f64] {
        let n = self.n();
        &self.values[i][t * n..(t + 1) * n]
    }

    /// A day enters the temporal average when both variables are observed
    /// somewhere in the network, so every block pair shares the same days.
    pub fn day_is_usable(&self, t: usize) -> bool {
        (0..2).all(|i| self.day(i, t).iter().any(|v| !v.is_nan()))
    }

    /// The same field with station `k` dropped.
    pub fn without_station(&self, k: usize) -> Result<Self> {
        if k >= self.n() || self.n() < 2 {
            return Err(Error::InvalidArgument(format!("cannot drop station {k} of {}", self.n())));
        }
        let keep: Vec<usize> = (0..self.n()).filter(|&j| j != k).collect();
        let series: Vec<[Vec<f64>; 2]> = keep.iter().map(|&j| self.station_series(j)).collect();
        ResidualField::new(keep.iter().map(|&j| self.xy[j]).collect(), self.doy.clone(), &series)
    }

    /// Residuals of one station as `[min series, max series]`.
    pub fn station_series(&self, k: usize) -> [Vec<f64>; 2] {
        [0, 1].map(|i| (0..self.t_len()).map(|t| self.values[i][t * self.n() + k]).collect())
    }
}

/// Spatial weights of each station for a location, shifted by the nearest
/// station distance so they never all underflow.
#[derive(Clone, Debug)]
struct SpatialWeights {
    dist: Vec<f64>,
    w: Vec<f64>,
}

impl SpatialWeights {
    fn new(xy: &[[f64; 2]], x: [f64; 2], lambda: f64) -> Self {
        let dist: Vec<f64> = xy.iter().map(|&s| distance(x, s)).collect();
        let dmin = dist.iter().cloned().fold(f64::INFINITY, f64::min);
        let w = dist.iter().map(|d| (-(d - dmin) / lambda).exp()).collect();
        SpatialWeights { dist, w }
    }

    /// Kernel-weighted mean of the observed entries of `day`; `None` if none observed.
    fn smooth(&self, day: &[f64], lambda: f64) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (k, &v) in day.iter().enumerate() {
            if !v.is_nan() {
                num += self.w[k] * v;
                den += self.w[k];
            }
        }
        if den > 0.0 {
            return Some(num / den);
        }
        self.smooth_reshifted(day, lambda)
    }

    /// Fallback when every observed station's weight underflowed.
    fn smooth_reshifted(&self, day: &[f64], lambda: f64) -> Option<f64> {
        let dmin = day
            .iter()
            .zip(&self.dist)
            .filter(|(v, _)| !v.is_nan())
            .map(|(_, d)| *d)
            .fold(f64::INFINITY, f64::min);
        if !dmin.is_finite() {
            return None;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (k, &v) in day.iter().enumerate() {
            if !v.is_nan() {
                let w = (-(self.dist[k] - dmin) / lambda).exp();
                num += w * v;
                den += w;
            }
        }
        Some(num / den)
    }
}

/// Fitted nonparametric covariance model: residuals plus bandwidths.
#[derive(Clone, Debug)]
pub struct SeasonalCovModel {
    pub residuals: ResidualField,
    pub kernel: KernelSpec,
    usable: Vec<bool>,
    /// Usable days per calendar day.
    day_counts: Vec<usize>,
}

impl SeasonalCovModel {
    pub fn new(residuals: ResidualField, kernel: KernelSpec) -> Result<Self> {
        let usable: Vec<bool> = (0..residuals.t_len()).map(|t| residuals.day_is_usable(t)).collect();
        let mut day_counts = vec![0usize; DAYS_PER_YEAR];
        for (t, &u) in usable.iter().enumerate() {
            if u {
                day_counts[residuals.doy[t] as usize - 1] += 1;
            }
        }
        if day_counts.iter().all(|&c| c == 0) {
            return Err(Error::InsufficientData("no day has both variables observed".into()));
        }
        Ok(SeasonalCovModel {
            residuals,
            kernel,
            usable,
            day_counts,
        })
    }

    pub fn n(&self) -> usize {
        self.residuals.n()
    }

    pub fn is_usable(&self, t: usize) -> bool {
        self.usable[t]
    }

    /// `v_i(x, t)`, the kernel-smoothed residual of variable `i` at location `x`.
    pub fn smoothed_residual(&self, i: usize, x: [f64; 2], t: usize) -> Option<f64> {
        let sw = SpatialWeights::new(&self.residuals.xy, x, self.kernel.spatial_lambda);
        sw.smooth(self.residuals.day(i, t), self.kernel.spatial_lambda)
    }

    fn weights(&self) -> ModelWeights {
        ModelWeights {
            day_counts: self.day_counts.clone(),
            temporal_lambda: self.kernel.temporal_lambda,
        }
    }

    /// Evaluator for every block pair among `locations`.
    pub fn evaluator(&self, locations: &[[f64; 2]]) -> Result<LocationCov> {
        LocationCov::new(self, locations)
    }
}

/// `R_ij(x, y, t)`: the single-day smoothed empirical covariance, `None` when
/// either variable is unobserved everywhere at `t`.
pub fn smoothed_cov_single_day(model: &SeasonalCovModel, i: usize, j: usize, x: [f64; 2], y: [f64; 2], t: usize) -> Option<f64> {
    Some(model.smoothed_residual(i, x, t)? * model.smoothed_residual(j, y, t)?)
}

/// `C_ij(x, y, d0)`: temporal kernel average of the single-day estimates.
pub fn seasonal_cov(model: &SeasonalCovModel, i: usize, j: usize, x: [f64; 2], y: [f64; 2], d0: u16) -> Result<f64> {
    if !(1..=DAYS_PER_YEAR as u16).contains(&d0) {
        return Err(Error::InvalidArgument(format!("day of year {d0} outside 1..=365")));
    }
    let w = model.weights().temporal(d0);
    let lambda = model.kernel.spatial_lambda;
    let sx = SpatialWeights::new(&model.residuals.xy, x, lambda);
    let sy = SpatialWeights::new(&model.residuals.xy, y, lambda);
    let (mut num, mut den) = (0.0, 0.0);
    for t in 0..model.residuals.t_len() {
        let wt = w[model.residuals.doy[t] as usize - 1];
        if wt == 0.0 || !model.usable[t] {
            continue;
        }
        let vx = sx.smooth(model.residuals.day(i, t), lambda).expect("usable day");
        let vy = sy.smooth(model.residuals.day(j, t), lambda).expect("usable day");
        num += wt * vx * vy;
        den += wt;
    }
    if den == 0.0 {
        return Err(Error::InsufficientData(format!("no usable day near day {d0}")));
    }
    Ok(num / den)
}

/// 2G × 2G block covariance over `locations` on calendar day `d0`, rows
/// ordered `(N, X)` per location.
pub fn assemble_block_matrix(model: &SeasonalCovModel, locations: &[[f64; 2]], d0: u16) -> Result<DMatrix<f64>> {
    model.evaluator(locations)?.block_matrix(d0)
}

#[derive(Clone, Debug)]
enum GramStore {
    /// `grams[d-1] = Σ_{t: d(t)=d} v_t v_tᵀ`
    PerDay(Vec<DMatrix<f64>>),
    /// Columns `v_t` of usable days, with their calendar day.
    Direct { v: DMatrix<f64>, doy: Vec<u16> },
}

/// Block covariance evaluator for a fixed set of locations.
#[derive(Clone, Debug)]
pub struct LocationCov {
    locations: Vec<[f64; 2]>,
    model_weights: ModelWeights,
    store: GramStore,
}

/// Temporal weighting state; weights are relative to the nearest calendar
/// day with data, and zero for calendar days without usable data.
#[derive(Clone, Debug)]
struct ModelWeights {
    day_counts: Vec<usize>,
    temporal_lambda: f64,
}

impl ModelWeights {
    fn temporal(&self, d0: u16) -> Vec<f64> {
        let hmin = (1..=DAYS_PER_YEAR as u16)
            .filter(|&d| self.day_counts[d as usize - 1] > 0)
            .map(|d| circular(d0, d))
            .min()
            .expect("model has a usable day");
        (1..=DAYS_PER_YEAR as u16)
            .map(|d| {
                if self.day_counts[d as usize - 1] == 0 {
                    return 0.0;
                }
                let w = (-((circular(d0, d) - hmin) as f64) / self.temporal_lambda).exp();
                if w < WEIGHT_CUTOFF {
                    0.0
                } else {
                    w
                }
            })
            .collect()
    }
}

impl LocationCov {
    fn new(model: &SeasonalCovModel, locations: &[[f64; 2]]) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InvalidArgument("no locations".into()));
        }
        if locations.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("location coordinates".into()));
        }
        let res = &model.residuals;
        let lambda = model.kernel.spatial_lambda;
        let p = locations.len();
        let days: Vec<usize> = (0..res.t_len()).filter(|&t| model.usable[t]).collect();
        let weights: Vec<SpatialWeights> = locations
            .iter()
            .map(|&x| SpatialWeights::new(&res.xy, x, lambda))
            .collect();
        // column c holds v_t for t = days[c]
        let cols: Vec<Vec<f64>> = days
            .par_iter()
            .map(|&t| {
                let mut col = vec![0.0; 2 * p];
                for i in 0..2 {
                    let day = res.day(i, t);
                    for (g, sw) in weights.iter().enumerate() {
                        col[2 * g + i] = sw.smooth(day, lambda).expect("usable day");
                    }
                }
                col
            })
            .collect();
        let v = DMatrix::from_fn(2 * p, days.len(), |r, c| cols[c][r]);
        let doy: Vec<u16> = days.iter().map(|&t| res.doy[t]).collect();

        let bytes = DAYS_PER_YEAR * 4 * p * p * 8;
        let store = if bytes <= GRAM_CACHE_BYTES {
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); DAYS_PER_YEAR];
            for (c, &d) in doy.iter().enumerate() {
                groups[d as usize - 1].push(c);
            }
            let grams = groups
                .par_iter()
                .map(|cs| {
                    let sub = v.select_columns(cs.iter());
                    &sub * sub.transpose()
                })
                .collect();
            GramStore::PerDay(grams)
        } else {
            GramStore::Direct { v, doy }
        };
        Ok(LocationCov {
            locations: locations.to_vec(),
            model_weights: model.weights(),
            store,
        })
    }

    pub fn locations(&self) -> &[[f64; 2]] {
        &self.locations
    }

    pub fn dim(&self) -> usize {
        2 * self.locations.len()
    }

    /// Block covariance on calendar day `d0`.
    pub fn block_matrix(&self, d0: u16) -> Result<DMatrix<f64>> {
        if !(1..=DAYS_PER_YEAR as u16).contains(&d0) {
            return Err(Error::InvalidArgument(format!("day of year {d0} outside 1..=365")));
        }
        let w = self.model_weights.temporal(d0);
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        let mut den = 0.0;
        match &self.store {
            GramStore::PerDay(grams) => {
                for (d, g) in grams.iter().enumerate() {
                    if w[d] > 0.0 {
                        out.zip_apply(g, |o, v| *o += w[d] * v);
                        den += w[d] * self.model_weights.day_counts[d] as f64;
                    }
                }
            }
            GramStore::Direct { v, doy } => {
                let mut scaled = v.clone();
                for (c, &d) in doy.iter().enumerate() {
                    let wt = w[d as usize - 1];
                    scaled.column_mut(c).scale_mut(wt);
                    den += wt;
                }
                out = &scaled * v.transpose();
            }
        }
        out /= den;
        symmetrize(&mut out);
        Ok(out)
    }

    /// Block matrices for every calendar day, in parallel.
    pub fn all_days(&self) -> Result<Vec<DMatrix<f64>>> {
        (1..=DAYS_PER_YEAR as u16).into_par_iter().map(|d| self.block_matrix(d)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialBandwidth {
    pub lambda: f64,
    pub quantile_distance: f64,
}

/// `lambda = q / 3` with `q` the 5% quantile of inter-site distances, so the
/// kernel's 5%-weight range matches that quantile.
pub fn select_spatial_bandwidth(xy: &[[f64; 2]]) -> Result<SpatialBandwidth> {
    let q = distance_quantile(xy, SPATIAL_QUANTILE)?;
    if q <= 0.0 {
        return Err(Error::InvalidArgument("5% inter-site distance quantile is zero".into()));
    }
    Ok(SpatialBandwidth {
        lambda: q / 3.0,
        quantile_distance: q,
    })
}

/// Default temporal bandwidth candidates, in days.
pub fn default_temporal_candidates() -> Vec<f64> {
    let mut c: Vec<f64> = (2..=40).map(|k| k as f64 * 0.5).collect();
    c.extend([25.0, 30.0, 40.0, 50.0, 60.0, 90.0]);
    c
}

/// Leave-one-day-out squared error of predicting each local empirical
/// variance from the other calendar days.
pub fn temporal_cv_error(variances: &LocalVariances, lambda: f64) -> f64 {
    let kern: Vec<f64> = (0..=MAX_DAY_DISTANCE).map(|h| (-(h as f64) / lambda).exp()).collect();
    let mut total = 0.0;
    for series in variances.iter_series() {
        for d in 1..=DAYS_PER_YEAR as u16 {
            let Some(target) = series[d as usize - 1] else { continue };
            // nearest other day with data sets the shift
            let hmin = (1..=DAYS_PER_YEAR as u16)
                .filter(|&e| e != d && series[e as usize - 1].is_some())
                .map(|e| circular(d, e))
                .min();
            let Some(hmin) = hmin else { continue };
            let (mut num, mut den) = (0.0, 0.0);
            for e in 1..=DAYS_PER_YEAR as u16 {
                if e == d {
                    continue;
                }
                if let Some(s) = series[e as usize - 1] {
                    let h = circular(d, e);
                    let w = if kern[h as usize] > 1e-200 {
                        kern[h as usize] / kern[hmin as usize]
                    } else {
                        (-((h - hmin) as f64) / lambda).exp()
                    };
                    num += w * s;
                    den += w;
                }
            }
            if den > 0.0 && den.is_finite() {
                total += (target - num / den).powi(2);
            }
        }
    }
    total
}

/// Candidate with the least cross-validation error; near-ties go to the smaller bandwidth.
pub fn select_temporal_bandwidth(variances: &LocalVariances, candidates: &[f64]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no temporal bandwidth candidates".into()));
    }
    if candidates.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidArgument("temporal bandwidth candidates must be positive".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let errors: Vec<f64> = sorted.par_iter().map(|&l| temporal_cv_error(variances, l)).collect();
    let scale: f64 = variances.iter_series().flat_map(|s| s.iter().flatten()).map(|v| v * v).sum();
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut best = 0;
    for k in 1..sorted.len() {
        if errors[k] < errors[best] - tol {
            best = k;
        }
    }
    Ok(sorted[best])
}

/// Station-level block matrices for all 365 calendar days.
#[derive(Clone, Debug, PartialEq)]
pub struct StationCovCache {
    pub header: CacheHeader,
    /// `days[d-1]` is the 2n × 2n block matrix for calendar day `d`.
    pub days: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format_version: u32,
    pub n_stations: usize,
    pub n_days: usize,
    pub dim: usize,
    pub layout: String,
    pub kernel: KernelSpec,
    pub station_ids: Vec<String>,
}

pub const CACHE_MAGIC: &[u8; 8] = b"TFWCOV01";
pub const CACHE_VERSION: u32 = 1;
const CACHE_LAYOUT: &str = "f64-le day-major row-major, rows (N,X) per station";

impl StationCovCache {
    pub fn build(model: &SeasonalCovModel, station_ids: &[String]) -> Result<Self> {
        if station_ids.len() != model.n() {
            return Err(Error::InvalidArgument("station id count differs from model".into()));
        }
        let days = model.evaluator(&model.residuals.xy)?.all_days()?;
        Ok(StationCovCache {
            header: CacheHeader {
                format_version: CACHE_VERSION,
                n_stations: model.n(),
                n_days: DAYS_PER_YEAR,
                dim: 2 * model.n(),
                layout: CACHE_LAYOUT.into(),
                kernel: model.kernel,
                station_ids: station_ids.to_vec(),
            },
            days,
        })
    }

    /// `C_ii(s_k, s_k, d)`.
    pub fn diagonal(&self, k: usize, i: usize, d: u16) -> f64 {
        self.days[d as usize - 1][(2 * k + i, 2 * k + i)]
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.header.dim * self.header.dim * 8);
        for m in &self.days {
            buf.clear();
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    buf.extend_from_slice(&m[(r, c)].to_le_bytes());
                }
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Format("not a weather covariance cache".into()));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut header = vec![0u8; len];
        input.read_exact(&mut header)?;
        let header: CacheHeader = serde_json::from_slice(&header)?;
        if header.format_version != CACHE_VERSION {
            return Err(Error::Format(format!("unsupported cache version {}", header.format_version)));
        }
        if header.dim != 2 * header.n_stations || header.n_days != DAYS_PER_YEAR {
            return Err(Error::Format("inconsistent cache dimensions".into()));
        }
        let dim = header.dim;
        let mut raw = vec![0u8; dim * dim * 8];
        let mut days = Vec::with_capacity(DAYS_PER_YEAR);
        for _ in 0..DAYS_PER_YEAR {
            input.read_exact(&mut raw)?;
            let vals: Vec<f64> = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
            days.push(DMatrix::from_row_slice(dim, dim, &vals));
        }
        Ok(StationCovCache { header, days })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_field(n: usize, years: usize, missing: f64, seed: u64) -> ResidualField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xy: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>() * 100.0, rng.random::<f64>() * 80.0]).collect();
        let t_len = years * 365;
        let doy: Vec<u16> = (0..t_len).map(|t| (t % 365) as u16 + 1).collect();
        let res: Vec<[Vec<f64>; 2]> = (0..n)
            .map(|_| {
                [0, 1].map(|_| {
                    (0..t_len)
                        .map(|_| {
                            if rng.random::<f64>() < missing {
                                f64::NAN
                            } else {
                                rng.sample::<f64, _>(StandardNormal)
                            }
                        })
                        .collect()
                })
            })
            .collect();
        ResidualField::new(xy, doy, &res).unwrap()
    }

    /// Literal single-day double sum over station pairs.
    fn r_oracle(f: &ResidualField, lam: f64, i: usize, j: usize, x: [f64; 2], y: [f64; 2], t: usize) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..f.n() {
            for l in 0..f.n() {
                let a = kernel_weight(distance(x, f.xy[k]), lam) * kernel_weight(distance(y, f.xy[l]), lam);
                let (u, o) = match (f.get(i, k, t), f.get(j, l, t)) {
                    (Some(p), Some(q)) => (p * q, 1.0),
                    _ => (0.0, 0.0),
                };
                num += a * u;
                den += a * o;
            }
        }
        (den > 0.0).then(|| num / den)
    }

    /// Complete-data estimator: temporal kernel average of the unnormalized
    /// double sum divided by the double sum of weights.
    fn complete_oracle(f: &ResidualField, kern: KernelSpec, i: usize, j: usize, x: [f64; 2], y: [f64; 2], d0: u16) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..f.t_len() {
            let kt = kernel_weight(circular(d0, f.doy[t]) as f64, kern.temporal_lambda);
            for k in 0..f.n() {
                for l in 0..f.n() {
                    let a = kernel_weight(distance(x, f.xy[k]), kern.spatial_lambda)
                        * kernel_weight(distance(y, f.xy[l]), kern.spatial_lambda);
                    num += kt * a * f.get(i, k, t).unwrap() * f.get(j, l, t).unwrap();
                    den += kt * a;
                }
            }
        }
        num / den
    }

    /// Temporal average of the literal single-day estimates over usable days.
    fn masked_oracle(f: &ResidualField, kern: KernelSpec, i: usize, j: usize, x: [f64; 2], y: [f64; 2], d0: u16) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..f.t_len() {
            if !f.day_is_usable(t) {
                continue;
            }
            let kt = kernel_weight(circular(d0, f.doy[t]) as f64, kern.temporal_lambda);
            num += kt * r_oracle(f, kern.spatial_lambda, i, j, x, y, t).unwrap();
            den += kt;
        }
        num / den
    }

    #[test]
    fn day_distance_examples() {
        assert_eq!(day_distance(1, 365).unwrap(), 1);
        assert_eq!(day_distance(40, 40).unwrap(), 0);
        assert_eq!(day_distance(1, 184).unwrap(), 182);
        assert_eq!(day_distance(1, 183).unwrap(), 182);
        assert!(day_distance(0, 5).is_err());
        assert!(day_distance(5, 366).is_err());
    }

    #[test]
    fn kernel_examples() {
        assert!((kernel_weight(0.0, 4.0) - 0.25).abs() < 1e-15);
        let ratio = kernel_weight(3.0 * 7.0, 7.0) / kernel_weight(0.0, 7.0);
        assert!((ratio - 0.0498).abs() < 1e-4);
        // 75 km bandwidth: 5% weight reached at 225 km
        assert!((kernel_weight(225.0, 75.0) / kernel_weight(0.0, 75.0) - (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn single_station_single_day() {
        let f = ResidualField::new(vec![[0.0, 0.0]], vec![1], &[[vec![1.5], vec![-2.0]]]).unwrap();
        let m = SeasonalCovModel::new(f, KernelSpec::new(10.0, 3.0).unwrap()).unwrap();
        let r = smoothed_cov_single_day(&m, 0, 0, [0.0, 0.0], [0.0, 0.0], 0).unwrap();
        assert!((r - 2.25).abs() < 1e-15);
    }

    #[test]
    fn all_missing_day_is_missing() {
        let f = ResidualField::new(
            vec![[0.0, 0.0], [5.0, 0.0]],
            vec![1, 2],
            &[[vec![f64::NAN, 1.0], vec![f64::NAN, 2.0]], [vec![f64::NAN, 0.5], vec![f64::NAN, 0.1]]],
        )
        .unwrap();
        let m = SeasonalCovModel::new(f, KernelSpec::new(10.0, 3.0).unwrap()).unwrap();
        assert!(smoothed_cov_single_day(&m, 0, 1, [0.0, 0.0], [1.0, 1.0], 0).is_none());
        assert!(smoothed_cov_single_day(&m, 0, 1, [0.0, 0.0], [1.0, 1.0], 1).is_some());
    }

    #[test]
    fn single_day_matches_double_sum() {
        let f = random_field(4, 1, 0.3, 5);
        let lam = 25.0;
        let m = SeasonalCovModel::new(f.clone(), KernelSpec::new(lam, 5.0).unwrap()).unwrap();
        let mut checked = 0;
        for t in 0..60 {
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let x = [10.0 + t as f64, 30.0];
                let y = [70.0, 5.0 + t as f64];
                let got = smoothed_cov_single_day(&m, i, j, x, y, t);
                let want = r_oracle(&f, lam, i, j, x, y, t);
                match (got, want) {
                    (Some(g), Some(w)) => {
                        assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{g} {w}");
                        checked += 1;
                    }
                    (None, None) => {}
                    other => panic!("{other:?}"),
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn complete_data_matches_unmasked_estimator() {
        let f = random_field(5, 3, 0.0, 8);
        let kern = KernelSpec::new(30.0, 4.0).unwrap();
        let m = SeasonalCovModel::new(f.clone(), kern).unwrap();
        let locs = [[12.0, 40.0], [80.0, 10.0], [12.0, 40.0]];
        let ev = m.evaluator(&locs).unwrap();
        for d0 in [1u16, 100, 365] {
            let block = ev.block_matrix(d0).unwrap();
            for (i, j) in [(0, 0), (0, 1), (1, 1)] {
                let want = complete_oracle(&f, kern, i, j, locs[0], locs[1], d0);
                let direct = seasonal_cov(&m, i, j, locs[0], locs[1], d0).unwrap();
                assert!((direct - want).abs() < 1e-12, "{direct} {want}");
                assert!((block[(i, 2 + j)] - want).abs() < 1e-12, "{} {want}", block[(i, 2 + j)]);
            }
        }
    }

    #[test]
    fn masked_cache_matches_literal_average() {
        let f = random_field(6, 2, 0.4, 13);
        let kern = KernelSpec::new(20.0, 6.0).unwrap();
        let m = SeasonalCovModel::new(f.clone(), kern).unwrap();
        let locs = [[5.0, 5.0], [50.0, 60.0]];
        let ev = m.evaluator(&locs).unwrap();
        for d0 in [3u16, 180] {
            let block = ev.block_matrix(d0).unwrap();
            for (gi, gj) in [(0, 0), (0, 1), (1, 1)] {
                for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let want = masked_oracle(&f, kern, i, j, locs[gi], locs[gj], d0);
                    let got = block[(2 * gi + i, 2 * gj + j)];
                    assert!((got - want).abs() < 1e-12, "{got} {want}");
                    let direct = seasonal_cov(&m, i, j, locs[gi], locs[gj], d0).unwrap();
                    assert!((direct - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn direct_store_matches_per_day_store() {
        let f = random_field(5, 2, 0.2, 3);
        let m = SeasonalCovModel::new(f, KernelSpec::new(15.0, 2.0).unwrap()).unwrap();
        let ev = m.evaluator(&[[1.0, 2.0], [40.0, 20.0], [90.0, 70.0]]).unwrap();
        let GramStore::PerDay(_) = &ev.store else { panic!("expected per-day store") };
        let mut cols = Vec::new();
        let mut doy = Vec::new();
        for t in 0..m.residuals.t_len() {
            if m.is_usable(t) {
                let mut c = Vec::new();
                for x in ev.locations() {
                    for i in 0..2 {
                        c.push(m.smoothed_residual(i, *x, t).unwrap());
                    }
                }
                cols.push(c);
                doy.push(m.residuals.doy[t]);
            }
        }
        let v = DMatrix::from_fn(6, cols.len(), |r, c| cols[c][r]);
        let direct = LocationCov {
            store: GramStore::Direct { v, doy },
            ..ev.clone()
        };
        for d in [1u16, 77, 300] {
            let a = ev.block_matrix(d).unwrap();
            let b = direct.block_matrix(d).unwrap();
            assert!((a - b).abs().max() < 1e-12);
        }
    }

    #[test]
    fn tiny_temporal_bandwidth_picks_single_day() {
        let f = random_field(3, 1, 0.0, 2);
        let m = SeasonalCovModel::new(f, KernelSpec::new(20.0, 1e-3).unwrap()).unwrap();
        let x = [10.0, 10.0];
        let y = [60.0, 30.0];
        let c = seasonal_cov(&m, 0, 1, x, y, 50).unwrap();
        let r = smoothed_cov_single_day(&m, 0, 1, x, y, 49).unwrap();
        assert!((c - r).abs() < 1e-12);
    }

    #[test]
    fn far_locations_do_not_underflow() {
        let f = random_field(4, 1, 0.5, 6);
        let m = SeasonalCovModel::new(f, KernelSpec::new(0.5, 2.0).unwrap()).unwrap();
        let b = assemble_block_matrix(&m, &[[5000.0, 5000.0], [-4000.0, 10.0]], 10).unwrap();
        assert!(b.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn single_location_block() {
        let f = random_field(5, 1, 0.1, 1);
        let m = SeasonalCovModel::new(f, KernelSpec::new(20.0, 3.0).unwrap()).unwrap();
        let b = assemble_block_matrix(&m, &[[30.0, 30.0]], 200).unwrap();
        assert_eq!(b.shape(), (2, 2));
        assert_eq!(b[(0, 1)], b[(1, 0)]);
        assert!(b[(0, 0)] >= 0.0 && b[(1, 1)] >= 0.0);
    }

    #[test]
    fn duplicated_locations_stay_psd() {
        let f = random_field(6, 1, 0.2, 4);
        let m = SeasonalCovModel::new(f, KernelSpec::new(20.0, 3.0).unwrap()).unwrap();
        let b = assemble_block_matrix(&m, &[[30.0, 30.0], [10.0, 50.0], [30.0, 30.0]], 30).unwrap();
        for c in 0..6 {
            assert_eq!(b[(0, c)], b[(4, c)]);
            assert_eq!(b[(1, c)], b[(5, c)]);
        }
        let (lo, hi) = crate::linalg::eigen_extremes(&b);
        assert!(lo >= -1e-8 * hi);
    }

    #[test]
    fn spatial_bandwidth_examples() {
        let xy: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 * 3.0, 0.0]).collect();
        let bw = select_spatial_bandwidth(&xy).unwrap();
        assert!((bw.quantile_distance - 3.0).abs() < 1e-12);
        assert!((bw.lambda - 1.0).abs() < 1e-12);
        assert!((62.0f64 / 3.0 - 20.67).abs() < 0.01);
    }

    #[test]
    fn spatial_bandwidth_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let xy: Vec<[f64; 2]> = (0..100).map(|_| [rng.random::<f64>() * 400.0, rng.random::<f64>() * 400.0]).collect();
        let mut d = Vec::new();
        for a in 0..100 {
            for b in (a + 1)..100 {
                d.push(((xy[a][0] - xy[b][0]).powi(2) + (xy[a][1] - xy[b][1]).powi(2)).sqrt());
            }
        }
        d.sort_by(f64::total_cmp);
        let q = d[(0.05 * (d.len() - 1) as f64).floor() as usize];
        let bw = select_spatial_bandwidth(&xy).unwrap();
        assert!((bw.lambda - q / 3.0).abs() < 1e-12);
    }

    fn variances_from(series: Vec<Vec<Option<f64>>>) -> LocalVariances {
        LocalVariances::from_series(series.into_iter().map(|s| [s.clone(), s]).collect()).unwrap()
    }

    #[test]
    fn constant_variances_pick_smallest_candidate() {
        let v = variances_from(vec![vec![Some(2.5); 365]; 3]);
        assert_eq!(select_temporal_bandwidth(&v, &[9.0, 3.0, 20.0]).unwrap(), 3.0);
        assert_eq!(select_temporal_bandwidth(&v, &[7.5]).unwrap(), 7.5);
        assert!(select_temporal_bandwidth(&v, &[]).is_err());
    }

    #[test]
    fn sinusoid_variances_pick_moderate_bandwidth() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let series: Vec<Vec<Option<f64>>> = (0..5)
            .map(|_| {
                (1..=365)
                    .map(|d| Some(4.0 + 2.0 * (2.0 * std::f64::consts::PI * d as f64 / 365.0).cos() + 0.3 * rng.random::<f64>()))
                    .collect()
            })
            .collect();
        let v = variances_from(series);
        let cands = default_temporal_candidates();
        let chosen = select_temporal_bandwidth(&v, &cands).unwrap();
        assert!(chosen < 60.0);
        // grid-search oracle over the same objective
        let mut best = (f64::INFINITY, 0.0);
        for &c in &cands {
            let e = temporal_cv_error(&v, c);
            if e < best.0 {
                best = (e, c);
            }
        }
        assert_eq!(chosen, best.1);
    }

    #[test]
    fn cache_round_trip() {
        let f = random_field(3, 1, 0.1, 9);
        let m = SeasonalCovModel::new(f, KernelSpec::new(20.0, 3.0).unwrap()).unwrap();
        let ids: Vec<String> = (0..3).map(|i| format!("S{i}")).collect();
        let cache = StationCovCache::build(&m, &ids).unwrap();
        let mut buf = Vec::new();
        cache.write_to(&mut buf).unwrap();
        let back = StationCovCache::read_from(&buf[..]).unwrap();
        assert_eq!(back, cache);
        buf[0] = b'X';
        assert!(StationCovCache::read_from(&buf[..]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn blocks_are_psd_and_symmetric(seed in 0u64..10_000, n in 1usize..10, g in 1usize..6, miss in 0.0f64..0.6, d0 in 1u16..=365) {
            let f = random_field(n, 1, miss, seed);
            let Ok(m) = SeasonalCovModel::new(f, KernelSpec::new(15.0, 4.0).unwrap()) else { return Ok(()) };
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let locs: Vec<[f64; 2]> = (0..g).map(|_| [rng.random::<f64>() * 120.0 - 10.0, rng.random::<f64>() * 90.0]).collect();
            let b = assemble_block_matrix(&m, &locs, d0).unwrap();
            prop_assert!((&b - b.transpose()).abs().max() == 0.0);
            let hi = b.diagonal().max().max(0.0);
            prop_assert!(min_eigenvalue(&b) >= -1e-8 * hi.max(1e-300));
            for p in 0..2 * g {
                prop_assert!(b[(p, p)] >= 0.0);
                for q in 0..2 * g {
                    prop_assert!(b[(p, q)].abs() <= (b[(p, p)] * b[(q, q)]).sqrt() + 1e-10);
                }
            }
        }

        #[test]
        fn block_symmetry_of_pointwise_estimator(seed in 0u64..10_000, d0 in 1u16..=365) {
            let f = random_field(4, 1, 0.3, seed);
            let m = SeasonalCovModel::new(f, KernelSpec::new(15.0, 4.0).unwrap()).unwrap();
            let x = [20.0, 30.0];
            let y = [70.0, 10.0];
            let a = seasonal_cov(&m, 0, 1, x, y, d0).unwrap();
            let b = seasonal_cov(&m, 1, 0, y, x, d0).unwrap();
            prop_assert!((a - b).abs() < 1e-14);
        }

        #[test]
        fn station_order_does_not_matter(seed in 0u64..10_000, rot in 1usize..5) {
            let f = random_field(5, 1, 0.2, seed);
            let mut xy = f.xy.clone();
            let mut series: Vec<[Vec<f64>; 2]> = (0..5).map(|k| f.station_series(k)).collect();
            xy.rotate_left(rot);
            series.rotate_left(rot);
            let g = ResidualField::new(xy, f.doy.clone(), &series).unwrap();
            let kern = KernelSpec::new(15.0, 4.0).unwrap();
            let m1 = SeasonalCovModel::new(f, kern).unwrap();
            let m2 = SeasonalCovModel::new(g, kern).unwrap();
            let locs = [[20.0, 30.0], [60.0, 60.0]];
            let a = assemble_block_matrix(&m1, &locs, 40).unwrap();
            let b = assemble_block_matrix(&m2, &locs, 40).unwrap();
            prop_assert!((a - b).abs().max() < 1e-12);
        }
    }
}
