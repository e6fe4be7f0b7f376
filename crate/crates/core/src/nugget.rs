//! Local nugget effects: local empirical variances of the residuals, station
//! nugget estimates, and GP interpolation of the nugget standard deviation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::{Variable, DAYS_PER_YEAR};
use crate::gpcore::{gp_fit_mle, FitBounds, GpHyperParams, SimpleKriging};
use crate::weathercov::{ResidualField, StationCovCache};

/// Minimum number of calendar days with a variance estimate for a station nugget.
pub const MIN_NUGGET_DAYS: usize = 300;

/// Mean of squared observed residuals on calendar day `d`; `None` when none observed.
pub fn local_empirical_variance(residuals: &[f64], doy: &[u16], d: u16) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for (w, &day) in residuals.iter().zip(doy) {
        if day == d && !w.is_nan() {
            sum += w * w;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// `sigma_i(s_k, d)^2` for every station, variable and calendar day.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalVariances {
    /// `values[k][i][d-1]`
    values: Vec<[Vec<Option<f64>>; 2]>,
}

impl LocalVariances {
    pub fn compute(field: &ResidualField) -> LocalVariances {
        let values = (0..field.n())
            .into_par_iter()
            .map(|k| {
                let series = field.station_series(k);
                [0, 1].map(|i| {
                    let mut sum = vec![0.0; DAYS_PER_YEAR];
                    let mut count = vec![0usize; DAYS_PER_YEAR];
                    for (w, &d) in series[i].iter().zip(&field.doy) {
                        if !w.is_nan() {
                            sum[d as usize - 1] += w * w;
                            count[d as usize - 1] += 1;
                        }
                    }
                    sum.iter().zip(&count).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect()
                })
            })
            .collect();
        LocalVariances { values }
    }

    /// From explicit per-station series, each of length 365.
    pub fn from_series(values: Vec<[Vec<Option<f64>>; 2]>) -> Result<LocalVariances> {
        if values.iter().any(|v| v[0].len() != DAYS_PER_YEAR || v[1].len() != DAYS_PER_YEAR) {
            return Err(Error::InvalidArgument("variance series must have 365 days".into()));
        }
        Ok(LocalVariances { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, k: usize, i: usize, d: u16) -> Option<f64> {
        self.values[k][i][d as usize - 1]
    }

    pub fn series(&self, k: usize, i: usize) -> &[Option<f64>] {
        &self.values[k][i]
    }

    pub fn iter_series(&self) -> impl Iterator<Item = &[Option<f64>]> {
        self.values.iter().flat_map(|v| v.iter().map(|s| s.as_slice()))
    }
}

/// `tau = sqrt(max(0, mean_d(sigma^2(d) - C(d))))` over days where both are
/// available; needs at least 300 such days.
pub fn nugget_from_series(variances: &[Option<f64>], cov_diag: &[Option<f64>]) -> Result<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for (s, c) in variances.iter().zip(cov_diag) {
        if let (Some(s), Some(c)) = (s, c) {
            sum += s - c;
            count += 1;
        }
    }
    if count < MIN_NUGGET_DAYS {
        return Err(Error::InsufficientData(format!(
            "{count} calendar days with variance estimates (need {MIN_NUGGET_DAYS})"
        )));
    }
    Ok((sum / count as f64).max(0.0).sqrt())
}

/// Nugget standard deviation at station `k` for variable `i`, using the
/// station-level smoothed covariance diagonal.
pub fn estimate_station_nugget(cache: &StationCovCache, variances: &LocalVariances, k: usize, i: usize) -> Result<f64> {
    let diag: Vec<Option<f64>> = (1..=DAYS_PER_YEAR as u16).map(|d| Some(cache.diagonal(k, i, d))).collect();
    nugget_from_series(variances.series(k, i), &diag).map_err(|e| {
        let id = cache.header.station_ids.get(k).cloned().unwrap_or_else(|| k.to_string());
        e.context(format!("nugget at station {id}"))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuggetField {
    pub variable: Variable,
    pub station_tau: Vec<f64>,
    pub gp: GpHyperParams,
}

/// Station nuggets for both variables and their GP fits.
pub fn fit_nugget_fields(xy: &[[f64; 2]], cache: &StationCovCache, variances: &LocalVariances) -> Result<[NuggetField; 2]> {
    if variances.n() != xy.len() || cache.header.n_stations != xy.len() {
        return Err(Error::InvalidArgument("nugget inputs disagree on station count".into()));
    }
    let fields = Variable::BOTH
        .par_iter()
        .map(|&var| {
            let tau = (0..xy.len())
                .map(|k| estimate_station_nugget(cache, variances, k, var.index()))
                .collect::<Result<Vec<f64>>>()?;
            let gp = gp_fit_mle(xy, &tau, &FitBounds::default()).map_err(|e| e.context(format!("nugget field {}", var.label())))?;
            Ok(NuggetField {
                variable: var,
                station_tau: tau,
                gp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let [a, b]: [NuggetField; 2] = fields.try_into().expect("two variables");
    Ok([a, b])
}

/// Kriged nugget standard deviation at each target, clipped at zero.
pub fn interpolate_nugget(field: &NuggetField, xy: &[[f64; 2]], targets: &[[f64; 2]]) -> Result<Vec<f64>> {
    let k = SimpleKriging::new(field.gp, xy, &field.station_tau)?;
    Ok(targets.iter().map(|&t| clip_tau(k.predict(t).mean)).collect())
}

pub fn clip_tau(v: f64) -> f64 {
    v.max(0.0)
}
