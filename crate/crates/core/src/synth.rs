//! Synthetic data generators used by tests, examples and the acceptance suite.

use std::f64::consts::PI;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::climate::{covariate_rows, Beta, StationCoefficients, N_COEF};
use crate::error::{Error, Result};
use crate::geodata::{distance, unproject_coordinates, BivariateSeries, Calendar, Station, StationNetwork};
use crate::gpcore::{covariance_matrix as gp_covariance, GpHyperParams};
use crate::linalg::cholesky_jittered;

/// `n` sites uniform on a `width` × `height` km box, centered on the origin.
pub fn random_sites<R: Rng>(n: usize, width: f64, height: f64, rng: &mut R) -> Vec<[f64; 2]> {
    let mut xy: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>() * width, rng.random::<f64>() * height])
        .collect();
    center(&mut xy);
    xy
}

/// Shifts points so their mean is the origin.
pub fn center(xy: &mut [[f64; 2]]) {
    if xy.is_empty() {
        return;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = xy.iter().map(|p| p[1]).sum::<f64>() / n;
    for p in xy {
        p[0] -= mx;
        p[1] -= my;
    }
}

/// Zero-mean multivariate normal sampler.
#[derive(Clone, Debug)]
pub struct MvnSampler {
    l: DMatrix<f64>,
}

impl MvnSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        Ok(MvnSampler {
            l: cholesky_jittered(cov)?.l(),
        })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let xi = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.l * xi
    }
}

/// Spatial structure of the synthetic weather field. Both variants are
/// separable across variables: `C_ij(x, y) = S_ij * R(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub enum WeatherShape {
    /// `R = exp(-h / range_km)`.
    Exponential { range_km: f64 },
    /// Exponential with local range `west_km` for `x < boundary_x` and
    /// `east_km` otherwise, combined so the result stays positive definite.
    TwoRegime { west_km: f64, east_km: f64, boundary_x: f64 },
}

impl WeatherShape {
    pub fn local_range(&self, x: [f64; 2]) -> f64 {
        match *self {
            WeatherShape::Exponential { range_km } => range_km,
            WeatherShape::TwoRegime { west_km, east_km, boundary_x } => {
                if x[0] < boundary_x {
                    west_km
                } else {
                    east_km
                }
            }
        }
    }

    /// Spatial correlation between two points.
    pub fn correlation(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let (lx, ly) = (self.local_range(x), self.local_range(y));
        let s = (lx * lx + ly * ly) / 2.0;
        (lx * ly / s) * (-distance(x, y) / s.sqrt()).exp()
    }
}

/// Known bivariate weather generator: `sd` per variable, cross correlation
/// `rho`, a spatial shape and an independent nugget `tau` per variable.
#[derive(Clone, Debug, PartialEq)]
pub struct WeatherGenerator {
    pub sd: [f64; 2],
    pub rho: f64,
    pub shape: WeatherShape,
    pub tau: [f64; 2],
}

impl WeatherGenerator {
    /// Smooth covariance `C_ij(x, y)` without nugget.
    pub fn cov(&self, i: usize, j: usize, x: [f64; 2], y: [f64; 2]) -> f64 {
        let s = if i == j { self.sd[i] * self.sd[i] } else { self.rho * self.sd[0] * self.sd[1] };
        s * self.shape.correlation(x, y)
    }

    /// Covariance of the observed residuals at stations `a` and `b`.
    pub fn residual_cov(&self, i: usize, j: usize, a: usize, b: usize, xy: &[[f64; 2]]) -> f64 {
        let nug = if a == b && i == j { self.tau[i] * self.tau[i] } else { 0.0 };
        self.cov(i, j, xy[a], xy[b]) + nug
    }

    /// Residual correlation implied by the generator.
    pub fn residual_corr(&self, i: usize, j: usize, a: usize, b: usize, xy: &[[f64; 2]]) -> f64 {
        self.residual_cov(i, j, a, b, xy) / (self.residual_cov(i, i, a, a, xy) * self.residual_cov(j, j, b, b, xy)).sqrt()
    }

    /// 2n × 2n smooth covariance with rows `(N, X)` per location.
    pub fn block_matrix(&self, xy: &[[f64; 2]]) -> DMatrix<f64> {
        let n = xy.len();
        DMatrix::from_fn(2 * n, 2 * n, |r, c| self.cov(r % 2, c % 2, xy[r / 2], xy[c / 2]))
    }
}

/// A reasonable mid-latitude climate: means around 0 / 14 °C, a 10 °C annual
/// cycle, modest persistence and a small warming drift.
pub fn default_climate() -> [Beta; 2] {
    [
        [0.0, -5.0, -1.0, 0.05, 0.55, 0.3],
        [6.0, -5.0, -1.0, 0.05, 0.55, 0.3],
    ]
}

/// Every coefficient field drawn from its own GP around `mean` with the
/// given relative spread; used to make climates vary smoothly in space.
pub fn gp_coefficients<R: Rng>(xy: &[[f64; 2]], mean: &[Beta; 2], spread: &[Beta; 2], range_km: f64, rng: &mut R) -> Result<Vec<[Beta; 2]>> {
    let mut out = vec![[[0.0; N_COEF]; 2]; xy.len()];
    for i in 0..2 {
        for k in 0..N_COEF {
            let gp = GpHyperParams {
                mu: mean[i][k],
                sigma2: spread[i][k] * spread[i][k],
                a: 1.0 / range_km,
                nu: 1.5,
                tau2: 0.0,
            };
            let draw = if gp.sigma2 > 0.0 {
                MvnSampler::new(&gp_covariance(&gp, xy))?.draw(rng)
            } else {
                DVector::zeros(xy.len())
            };
            for (s, v) in out.iter_mut().zip(draw.iter()) {
                s[i][k] = mean[i][k] + v;
            }
        }
    }
    Ok(out)
}

/// Station coefficients drawn from known GP fields plus independent noise
/// of sd `noise`, mimicking OLS estimates scattered about a smooth truth.
pub fn gp_station_coefficients<R: Rng>(xy: &[[f64; 2]], gp: &GpHyperParams, noise: f64, rng: &mut R) -> Result<Vec<StationCoefficients>> {
    let sampler = MvnSampler::new(&gp_covariance(&GpHyperParams { tau2: 0.0, ..*gp }, xy))?;
    let mut out: Vec<StationCoefficients> = (0..xy.len())
        .map(|s| StationCoefficients {
            station_id: format!("S{s:03}"),
            beta: [[0.0; N_COEF]; 2],
            n_used: [0; 2],
            residuals: [Vec::new(), Vec::new()],
        })
        .collect();
    for i in 0..2 {
        for k in 0..N_COEF {
            let draw = sampler.draw(rng);
            for (s, c) in out.iter_mut().enumerate() {
                c.beta[i][k] = gp.mu + draw[s] + noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Ok(out)
}

/// Settings for [`generate_network`].
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub xy: Vec<[f64; 2]>,
    pub years: usize,
    pub start_year: i32,
    /// Per-station climate coefficients; one entry applies to all stations.
    pub climate: Vec<[Beta; 2]>,
    pub weather: WeatherGenerator,
    /// Weather sd multiplier `1 + amp * cos(2 pi d / 365)`.
    pub seasonal_amplitude: f64,
    /// Per-site multiplier on the smooth weather (empty: all ones), making
    /// the weather variance vary from site to site.
    pub site_scale: Vec<f64>,
    /// Independent per-value missing probability.
    pub missing_rate: f64,
    pub centroid: (f64, f64),
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(xy: Vec<[f64; 2]>, years: usize, weather: WeatherGenerator, seed: u64) -> Self {
        SyntheticSpec {
            xy,
            years,
            start_year: 2001,
            climate: vec![default_climate()],
            weather,
            seasonal_amplitude: 0.0,
            site_scale: Vec::new(),
            missing_rate: 0.0,
            centroid: (-105.5, 39.0),
            seed,
        }
    }
}

/// Generated network plus the exact weather that produced it.
#[derive(Clone, Debug)]
pub struct SyntheticNetwork {
    pub network: StationNetwork,
    /// True `W + nugget` at each station, `[k][i][t]`, before masking.
    pub residuals: Vec<[Vec<f64>; 2]>,
}

/// Simulates the bivariate autoregressive climate plus the generator's
/// weather at each site; one burn-in year precedes the returned window.
pub fn generate_network(spec: &SyntheticSpec) -> Result<SyntheticNetwork> {
    let n = spec.xy.len();
    if n == 0 || spec.years == 0 {
        return Err(Error::InvalidArgument("synthetic network needs sites and years".into()));
    }
    if spec.climate.len() != 1 && spec.climate.len() != n {
        return Err(Error::InvalidArgument("climate must have one entry or one per site".into()));
    }
    if !spec.site_scale.is_empty() && spec.site_scale.len() != n {
        return Err(Error::InvalidArgument("site_scale must be empty or one per site".into()));
    }
    let beta = |k: usize| &spec.climate[if spec.climate.len() == 1 { 0 } else { k }];
    let scale = |k: usize| spec.site_scale.get(k).copied().unwrap_or(1.0);
    let start = NaiveDate::from_ymd_opt(spec.start_year, 1, 1).ok_or_else(|| Error::InvalidArgument("start year".into()))?;
    let end = NaiveDate::from_ymd_opt(spec.start_year + spec.years as i32 - 1, 12, 31).ok_or_else(|| Error::InvalidArgument("end year".into()))?;
    let calendar = Calendar::new(start, end)?;
    let t_len = calendar.len;

    let sampler = MvnSampler::new(&spec.weather.block_matrix(&spec.xy))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut prev: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let b = beta(k);
            let persist = b[0][3] + b[0][4];
            [b[0][0], b[1][0]].map(|c| c / (1.0 - persist).max(0.1))
        })
        .collect();
    let mut values = vec![[vec![f64::NAN; t_len], vec![f64::NAN; t_len]]; n];
    let mut residuals = vec![[vec![0.0; t_len], vec![0.0; t_len]]; n];
    let burn = crate::geodata::DAYS_PER_YEAR;
    for step in 0..burn + t_len {
        let (t, keep) = if step < burn { (step, false) } else { (step - burn, true) };
        let amp = 1.0 + spec.seasonal_amplitude * (2.0 * PI * (t % 365 + 1) as f64 / 365.0).cos();
        let w = sampler.draw(&mut rng);
        for k in 0..n {
            let rows = covariate_rows(t as i64, t_len, prev[k][0], prev[k][1]);
            let mut z = [0.0; 2];
            for i in 0..2 {
                let e = amp * scale(k) * w[2 * k + i] + spec.weather.tau[i] * rng.sample::<f64, _>(StandardNormal);
                z[i] = rows[i].dot(&beta(k)[i]) + e;
                if keep {
                    residuals[k][i][t] = e;
                }
            }
            prev[k] = z;
            if keep {
                for i in 0..2 {
                    if rng.random::<f64>() >= spec.missing_rate {
                        values[k][i][t] = z[i];
                    }
                }
            }
        }
    }

    let stations = spec
        .xy
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let (lon, lat) = unproject_coordinates(p, spec.centroid);
            Station {
                id: format!("SYN{k:04}"),
                lon,
                lat,
                elev: 1500.0,
                xy: p,
            }
        })
        .collect();
    let series = values
        .into_iter()
        .enumerate()
        .map(|(k, v)| BivariateSeries { station_index: k, values: v })
        .collect();
    Ok(SyntheticNetwork {
        network: StationNetwork::from_parts(stations, series, calendar)?,
        residuals,
    })
}

/// Sites on a jittered grid over a `width` × `height` km box, centered.
pub fn jittered_grid<R: Rng>(nx: usize, ny: usize, width: f64, height: f64, rng: &mut R) -> Vec<[f64; 2]> {
    let (dx, dy) = (width / nx as f64, height / ny as f64);
    let mut xy = Vec::with_capacity(nx * ny);
    for a in 0..nx {
        for b in 0..ny {
            xy.push([(a as f64 + 0.2 + 0.6 * rng.random::<f64>()) * dx, (b as f64 + 0.2 + 0.6 * rng.random::<f64>()) * dy]);
        }
    }
    center(&mut xy);
    xy
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen() -> WeatherGenerator {
        WeatherGenerator {
            sd: [2.0, 3.0],
            rho: 0.5,
            shape: WeatherShape::Exponential { range_km: 50.0 },
            tau: [1.0, 1.0],
        }
    }

    #[test]
    fn two_regime_is_positive_definite_and_reduces() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xy = random_sites(40, 300.0, 200.0, &mut rng);
        let g = WeatherGenerator {
            shape: WeatherShape::TwoRegime { west_km: 100.0, east_km: 20.0, boundary_x: 0.0 },
            ..gen()
        };
        assert!(crate::linalg::min_eigenvalue(&g.block_matrix(&xy)) > 0.0);
        let (a, b) = ([-50.0, 0.0], [-20.0, 0.0]);
        assert!((g.shape.correlation(a, b) - (-0.3f64).exp()).abs() < 1e-12);
        assert!((g.shape.correlation([5.0, 0.0], [35.0, 0.0]) - (-1.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn generated_residuals_match_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xy = random_sites(4, 100.0, 100.0, &mut rng);
        let mut spec = SyntheticSpec::new(xy.clone(), 10, gen(), 3);
        spec.missing_rate = 0.1;
        let syn = generate_network(&spec).unwrap();
        let net = &syn.network;
        assert_eq!(net.t_len(), 3650);
        for (s, p) in net.stations.iter().zip(&xy) {
            assert!((s.xy[0] - p[0]).abs() < 1e-6 && (s.xy[1] - p[1]).abs() < 1e-6);
        }
        let frac = net.series[0].values[0].iter().filter(|v| v.is_nan()).count() as f64 / 3650.0;
        assert!((frac - 0.1).abs() < 0.02);
        let r = &syn.residuals;
        let var = r[0][1].iter().map(|v| v * v).sum::<f64>() / 3650.0;
        assert!((var - 10.0).abs() < 1.0, "{var}");
        let cross = r[1][0].iter().zip(&r[1][1]).map(|(a, b)| a * b).sum::<f64>() / 3650.0;
        assert!((cross - 3.0).abs() < 0.6, "{cross}");
    }

    #[test]
    fn gp_coefficient_draws_are_reproducible() {
        let xy = random_sites(10, 50.0, 50.0, &mut ChaCha8Rng::seed_from_u64(4));
        let gp = GpHyperParams { mu: 1.0, sigma2: 0.5, a: 0.05, nu: 1.5, tau2: 0.1 };
        let a = gp_station_coefficients(&xy, &gp, 0.1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = gp_station_coefficients(&xy, &gp, 0.1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let zero = [[0.0; N_COEF]; 2];
        let flat = gp_coefficients(&xy, &default_climate(), &zero, 50.0, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert!(flat.iter().all(|c| *c == default_climate()));
    }
}
