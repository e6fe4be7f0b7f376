//! Local climate component: per-station least squares on the six covariates
//! (intercept, annual harmonics, bivariate lag-1 terms, linear drift), Matérn
//! GP fields over each coefficient, and kriging of coefficients to new sites.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::{BivariateSeries, Calendar, StationNetwork, Variable, DAYS_PER_YEAR};
use crate::gpcore::{gp_fit_mle, FitBounds, GpHyperParams, SimpleKriging};

pub const N_COEF: usize = 6;

/// Coefficient names in design order.
pub const COEF_NAMES: [&str; N_COEF] = ["intercept", "cos", "sin", "ar_other", "ar_self", "drift"];

/// Minimum usable rows for a station fit.
pub const MIN_ROWS: usize = 7;

pub type Beta = [f64; N_COEF];

/// One design row: `(1, cos, sin, other(t-1), self(t-1), r_t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovariateRow(pub [f64; N_COEF]);

impl CovariateRow {
    pub fn dot(&self, beta: &Beta) -> f64 {
        self.0.iter().zip(beta).map(|(x, b)| x * b).sum()
    }
}

/// `(cos, sin)` of the annual harmonic at 0-based index `t`, using the 1-based day count.
pub fn harmonics(t: i64) -> (f64, f64) {
    let ang = 2.0 * PI * (t + 1) as f64 / DAYS_PER_YEAR as f64;
    (ang.cos(), ang.sin())
}

/// Linear drift running from -1 at the first fitted day to +1 at the last,
/// extended with the same slope outside the window.
pub fn drift(t: i64, t_len: usize) -> f64 {
    if t_len <= 1 {
        return 0.0;
    }
    -1.0 + 2.0 * t as f64 / (t_len - 1) as f64
}

/// Rows for both equations given the previous day's values.
pub fn covariate_rows(t: i64, t_len: usize, prev_min: f64, prev_max: f64) -> [CovariateRow; 2] {
    let (c, s) = harmonics(t);
    let r = drift(t, t_len);
    [
        CovariateRow([1.0, c, s, prev_max, prev_min, r]),
        CovariateRow([1.0, c, s, prev_min, prev_max, r]),
    ]
}

/// Design rows `[row_N, row_X]` at 0-based `t`; `None` when a lag is missing or `t == 0`.
pub fn build_covariates(series: &BivariateSeries, t: usize) -> Option<[CovariateRow; 2]> {
    if t == 0 {
        return None;
    }
    let prev_min = series.get(Variable::Tmin, t - 1)?;
    let prev_max = series.get(Variable::Tmax, t - 1)?;
    Some(covariate_rows(t as i64, series.len(), prev_min, prev_max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationCoefficients {
    pub station_id: String,
    /// `beta[v]` for variable index `v`.
    pub beta: [Beta; 2],
    pub n_used: [usize; 2],
    /// Residuals `w_i(t)` (`NaN` where response or covariates are missing).
    /// Recomputed from the network after deserialization.
    #[serde(skip)]
    pub residuals: [Vec<f64>; 2],
}

/// Residuals of `series` under `beta`.
pub fn compute_residuals(series: &BivariateSeries, beta: &[Beta; 2]) -> [Vec<f64>; 2] {
    let t_len = series.len();
    let mut out = [vec![f64::NAN; t_len], vec![f64::NAN; t_len]];
    for t in 0..t_len {
        let Some(rows) = build_covariates(series, t) else { continue };
        for var in Variable::BOTH {
            if let Some(z) = series.get(var, t) {
                out[var.index()][t] = z - rows[var.index()].dot(&beta[var.index()]);
            }
        }
    }
    out
}

/// Least-squares solve via Householder QR; errors when the design is rank-deficient.
fn qr_least_squares(x: DMatrix<f64>, y: DVector<f64>) -> Option<Beta> {
    let p = x.ncols();
    let qr = x.qr();
    let r = qr.r();
    let max_diag = (0..p).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..p).any(|k| r[(k, k)].abs() <= 1e-10 * max_diag) {
        return None;
    }
    let mut qty = y;
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, p).into_owned();
    let sol = r.solve_upper_triangular(&rhs)?;
    let mut beta = [0.0; N_COEF];
    beta.copy_from_slice(sol.as_slice());
    Some(beta)
}

/// Ordinary least squares for both equations at one station.
pub fn ols_fit_station(series: &BivariateSeries, station_id: &str) -> Result<StationCoefficients> {
    let mut beta = [[0.0; N_COEF]; 2];
    let mut n_used = [0usize; 2];
    for var in Variable::BOTH {
        let mut rows: Vec<[f64; N_COEF]> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for t in 1..series.len() {
            let (Some(r), Some(z)) = (build_covariates(series, t), series.get(var, t)) else { continue };
            rows.push(r[var.index()].0);
            ys.push(z);
        }
        let m = rows.len();
        if m < MIN_ROWS {
            return Err(Error::InsufficientData(format!(
                "station {station_id}: {m} usable rows for {} (need {MIN_ROWS})",
                var.label()
            )));
        }
        let x = DMatrix::from_fn(m, N_COEF, |i, j| rows[i][j]);
        let y = DVector::from_vec(ys);
        beta[var.index()] = qr_least_squares(x, y).ok_or_else(|| Error::RankDeficient {
            station: station_id.to_string(),
        })?;
        n_used[var.index()] = m;
    }
    let residuals = compute_residuals(series, &beta);
    Ok(StationCoefficients {
        station_id: station_id.to_string(),
        beta,
        n_used,
        residuals,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub variable: Variable,
    pub k: usize,
    pub station_values: Vec<f64>,
    pub gp: GpHyperParams,
}

/// The twelve fitted coefficient fields over a set of station coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFields {
    pub xy: Vec<[f64; 2]>,
    /// Ordered by variable (N then X), then coefficient index.
    pub fields: Vec<CoefficientField>,
}

impl CoefficientFields {
    pub fn field(&self, var: Variable, k: usize) -> &CoefficientField {
        &self.fields[var.index() * N_COEF + k]
    }
}

/// Interpolated coefficients with their kriging standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolatedCoefficients {
    pub beta: [Beta; 2],
    pub sd: [Beta; 2],
}

/// Station values for one (variable, k) across stations.
pub fn station_values(coefs: &[StationCoefficients], var: Variable, k: usize) -> Vec<f64> {
    coefs.iter().map(|c| c.beta[var.index()][k]).collect()
}

/// Independent MLE fit of each of the twelve coefficient fields.
pub fn fit_coefficient_fields(xy: &[[f64; 2]], coefs: &[StationCoefficients]) -> Result<CoefficientFields> {
    if coefs.len() != xy.len() {
        return Err(Error::InvalidArgument("coefficients and coordinates differ in length".into()));
    }
    if coefs.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "coefficient fields need at least 5 fitted stations, got {}",
            coefs.len()
        )));
    }
    let keys: Vec<(Variable, usize)> = Variable::BOTH
        .iter()
        .flat_map(|&v| (0..N_COEF).map(move |k| (v, k)))
        .collect();
    let fields = keys
        .par_iter()
        .map(|&(var, k)| {
            let values = station_values(coefs, var, k);
            let gp = gp_fit_mle(xy, &values, &FitBounds::default())
                .map_err(|e| e.context(format!("coefficient field beta_{k}{}", var.label())))?;
            Ok(CoefficientField {
                variable: var,
                k,
                station_values: values,
                gp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientFields { xy: xy.to_vec(), fields })
}

/// Simple kriging of every coefficient to each target.
pub fn interpolate_coefficients(fields: &CoefficientFields, targets: &[[f64; 2]]) -> Result<Vec<InterpolatedCoefficients>> {
    let krigers = fields
        .fields
        .iter()
        .map(|f| SimpleKriging::new(f.gp, &fields.xy, &f.station_values))
        .collect::<Result<Vec<_>>>()?;
    Ok(targets
        .par_iter()
        .map(|&target| {
            let mut out = InterpolatedCoefficients {
                beta: [[0.0; N_COEF]; 2],
                sd: [[0.0; N_COEF]; 2],
            };
            for (f, kr) in fields.fields.iter().zip(&krigers) {
                let r = kr.predict(target);
                out.beta[f.variable.index()][f.k] = r.mean;
                out.sd[f.variable.index()][f.k] = r.sd();
            }
            out
        })
        .collect())
}

/// Domain-average observed temperatures per calendar day, used to start simulations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Climatology {
    /// `daily[d-1] = [mean min, mean max]`; `NaN` when the day never occurs.
    pub daily: Vec<[f64; 2]>,
    pub overall: [f64; 2],
}

impl Climatology {
    pub fn from_network(network: &StationNetwork) -> Climatology {
        let cal = &network.calendar;
        let mut sums = vec![[0.0f64; 2]; DAYS_PER_YEAR];
        let mut counts = vec![[0usize; 2]; DAYS_PER_YEAR];
        let mut total = [0.0f64; 2];
        let mut total_n = [0usize; 2];
        for s in &network.series {
            for t in 0..network.t_len() {
                let d = cal.day_of_year(t as i64) as usize - 1;
                for v in 0..2 {
                    let z = s.values[v][t];
                    if !z.is_nan() {
                        sums[d][v] += z;
                        counts[d][v] += 1;
                        total[v] += z;
                        total_n[v] += 1;
                    }
                }
            }
        }
        let daily = sums
            .iter()
            .zip(&counts)
            .map(|(s, c)| [0, 1].map(|v| if c[v] > 0 { s[v] / c[v] as f64 } else { f64::NAN }))
            .collect();
        let overall = [0, 1].map(|v| if total_n[v] > 0 { total[v] / total_n[v] as f64 } else { 0.0 });
        Climatology { daily, overall }
    }

    /// Starting lags for a trajectory whose first day has calendar day `d`:
    /// the average on the preceding calendar day, else the overall mean.
    pub fn initial_lags(&self, d: u16) -> [f64; 2] {
        let prev = if d == 1 { DAYS_PER_YEAR } else { d as usize - 1 };
        let day = self.daily[prev - 1];
        [0, 1].map(|v| if day[v].is_nan() { self.overall[v] } else { day[v] })
    }
}

/// Everything the local climate component produces for a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClimateModel {
    pub calendar: Calendar,
    pub stations: Vec<StationCoefficients>,
    pub fields: CoefficientFields,
    pub climatology: Climatology,
}

impl ClimateModel {
    pub fn t_len(&self) -> usize {
        self.calendar.len
    }

    /// Restores residuals after deserialization.
    pub fn attach_residuals(&mut self, network: &StationNetwork) -> Result<()> {
        if network.n() != self.stations.len() {
            return Err(Error::InvalidArgument("network does not match climate model".into()));
        }
        for (c, s) in self.stations.iter_mut().zip(&network.series) {
            c.residuals = compute_residuals(s, &c.beta);
        }
        Ok(())
    }

    pub fn residuals(&self) -> Vec<[Vec<f64>; 2]> {
        self.stations.iter().map(|c| c.residuals.clone()).collect()
    }
}

/// Station-by-station OLS in parallel.
pub fn fit_stations(network: &StationNetwork) -> Result<Vec<StationCoefficients>> {
    network
        .stations
        .par_iter()
        .zip(&network.series)
        .map(|(st, se)| ols_fit_station(se, &st.id))
        .collect()
}

/// OLS at each station followed by the twelve coefficient-field GP fits.
pub fn fit_local_climate(network: &StationNetwork) -> Result<ClimateModel> {
    let stations = fit_stations(network)?;
    let fields = fit_coefficient_fields(&network.coords(), &stations)?;
    Ok(ClimateModel {
        calendar: network.calendar.clone(),
        stations,
        fields,
        climatology: Climatology::from_network(network),
    })
}
