//! Stationary bivariate Matérn model for the weather residuals, fitted by
//! maximum likelihood on a seasonal subset of days.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::distance;
use crate::gpcore::{matern_correlation, Matern, COINCIDENT_KM};
use crate::linalg::{cholesky_jittered, eigen_extremes};
use crate::optim::{from_bounded, to_bounded, NelderMead};
use crate::weathercov::ResidualField;

pub const MIN_BASELINE_STATIONS: usize = 10;
pub const MIN_BASELINE_DAYS: usize = 100;
const NU_BOUNDS: (f64, f64) = (0.05, 10.0);
const PSD_SLACK: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivariateMaternParams {
    pub sigma2: [f64; 2],
    /// Inverse ranges, km⁻¹.
    pub a: [f64; 2],
    pub nu: [f64; 2],
    pub tau2: [f64; 2],
    pub rho: f64,
}

impl BivariateMaternParams {
    pub fn nu_cross(&self) -> f64 {
        0.5 * (self.nu[0] + self.nu[1])
    }

    pub fn a_cross(&self) -> f64 {
        self.a[0].min(self.a[1])
    }

    pub fn validate(&self) -> Result<()> {
        let pos = self.sigma2.iter().chain(&self.a).chain(&self.nu).all(|v| v.is_finite() && *v > 0.0);
        let nug = self.tau2.iter().all(|v| v.is_finite() && *v >= 0.0);
        if pos && nug && (-1.0..=1.0).contains(&self.rho) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid bivariate Matérn parameters {self:?}")))
        }
    }

    /// Covariance at separation `h`.
    fn at_distance(&self, i: usize, j: usize, h: f64) -> f64 {
        if i == j {
            let mut c = self.sigma2[i] * matern_correlation(h, self.a[i], self.nu[i]);
            if h <= COINCIDENT_KM {
                c += self.tau2[i];
            }
            c
        } else {
            self.rho * (self.sigma2[0] * self.sigma2[1]).sqrt() * matern_correlation(h, self.a_cross(), self.nu_cross())
        }
    }
}

/// `C_ij(x, y)`; the nugget enters direct terms at coincident locations only.
pub fn bivariate_matern_cov(params: &BivariateMaternParams, i: usize, j: usize, x: [f64; 2], y: [f64; 2]) -> f64 {
    params.at_distance(i, j, distance(x, y))
}

/// 2G × 2G covariance with rows `(N, X)` per location.
pub fn covariance_matrix(params: &BivariateMaternParams, locations: &[[f64; 2]]) -> DMatrix<f64> {
    let g = locations.len();
    let kernels = [Matern::new(params.nu[0]), Matern::new(params.nu[1]), Matern::new(params.nu_cross())];
    let a = [params.a[0], params.a[1], params.a_cross()];
    let scale = [params.sigma2[0], params.sigma2[1], params.rho * (params.sigma2[0] * params.sigma2[1]).sqrt()];
    let mut m = DMatrix::zeros(2 * g, 2 * g);
    for p in 0..g {
        for q in p..g {
            let h = distance(locations[p], locations[q]);
            let nugget = h <= COINCIDENT_KM;
            let corr = [0, 1, 2].map(|r| scale[r] * kernels[r].correlation(a[r] * h));
            for i in 0..2 {
                for j in 0..2 {
                    let c = if i == j { corr[i] + if nugget { params.tau2[i] } else { 0.0 } } else { corr[2] };
                    m[(2 * p + i, 2 * q + j)] = c;
                    m[(2 * q + j, 2 * p + i)] = c;
                }
            }
        }
    }
    m
}

/// Inclusive calendar-day window, wrapping past day 365 when `start > end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonFilter {
    pub start: u16,
    pub end: u16,
}

impl SeasonFilter {
    /// June through August.
    pub const JJA: SeasonFilter = SeasonFilter { start: 152, end: 243 };

    pub fn contains(&self, d: u16) -> bool {
        if self.start <= self.end {
            (self.start..=self.end).contains(&d)
        } else {
            d >= self.start || d <= self.end
        }
    }
}

impl Default for SeasonFilter {
    fn default() -> Self {
        SeasonFilter::JJA
    }
}

/// Days sharing one missingness pattern, reduced to `(count, Σ z zᵀ)`.
#[derive(Clone, Debug)]
struct PatternStats {
    index: Vec<usize>,
    count: usize,
    scatter: DMatrix<f64>,
}

/// Sufficient statistics of the retained days, grouped by missing pattern.
#[derive(Clone, Debug)]
pub struct BaselineData {
    xy: Vec<[f64; 2]>,
    patterns: Vec<PatternStats>,
    days: usize,
    variance: [f64; 2],
    cross_corr: f64,
}

impl BaselineData {
    pub fn new(field: &ResidualField, filter: SeasonFilter) -> Result<Self> {
        let n = field.n();
        if n < MIN_BASELINE_STATIONS {
            return Err(Error::InsufficientData(format!(
                "baseline needs at least {MIN_BASELINE_STATIONS} stations, got {n}"
            )));
        }
        let words = (2 * n).div_ceil(64);
        let mut groups: BTreeMap<Vec<u64>, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        let mut sum_sq = [0.0f64; 2];
        let mut count = [0usize; 2];
        let (mut cross, mut cross_n) = (0.0f64, 0usize);
        let mut days = 0;
        for t in 0..field.t_len() {
            if !filter.contains(field.doy[t]) {
                continue;
            }
            let mut key = vec![0u64; words];
            let mut index = Vec::new();
            for k in 0..n {
                let zn = field.get(0, k, t);
                let zx = field.get(1, k, t);
                for (i, z) in [zn, zx].into_iter().enumerate() {
                    if let Some(z) = z {
                        let r = 2 * k + i;
                        key[r / 64] |= 1 << (r % 64);
                        index.push(r);
                        sum_sq[i] += z * z;
                        count[i] += 1;
                    }
                }
                if let (Some(a), Some(b)) = (zn, zx) {
                    cross += a * b;
                    cross_n += 1;
                }
            }
            if index.is_empty() {
                continue;
            }
            days += 1;
            groups.entry(key).or_insert_with(|| (index, Vec::new())).1.push(t);
        }
        if count.iter().any(|&c| c == 0) {
            return Err(Error::InsufficientData("baseline needs observations of both variables".into()));
        }
        if days < MIN_BASELINE_DAYS {
            return Err(Error::InsufficientData(format!(
                "baseline needs at least {MIN_BASELINE_DAYS} days in season, got {days}"
            )));
        }
        let patterns = groups
            .into_values()
            .map(|(index, ts)| {
                let m = index.len();
                let mut z = DMatrix::zeros(m, ts.len());
                for (c, &t) in ts.iter().enumerate() {
                    for (r, &row) in index.iter().enumerate() {
                        z[(r, c)] = field.get(row % 2, row / 2, t).expect("pattern entry observed");
                    }
                }
                PatternStats {
                    index,
                    count: ts.len(),
                    scatter: &z * z.transpose(),
                }
            })
            .collect();
        let variance = [0, 1].map(|i| sum_sq[i] / count[i] as f64);
        let cross_corr = if cross_n > 0 {
            (cross / cross_n as f64 / (variance[0] * variance[1]).sqrt()).clamp(-0.95, 0.95)
        } else {
            0.0
        };
        Ok(BaselineData {
            xy: field.xy.clone(),
            patterns,
            days,
            variance,
            cross_corr,
        })
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn n_patterns(&self) -> usize {
        self.patterns.len()
    }

    /// Zero-mean Gaussian log-likelihood of the retained days; `None` when the
    /// covariance cannot be factorized.
    pub fn loglik(&self, params: &BivariateMaternParams) -> Option<f64> {
        let full = covariance_matrix(params, &self.xy);
        let terms: Vec<Option<f64>> = self
            .patterns
            .par_iter()
            .map(|p| {
                let sub = full.select_rows(p.index.iter()).select_columns(p.index.iter());
                let chol = cholesky_jittered(&sub).ok()?;
                let m = p.index.len() as f64;
                let quad = chol.chol.solve(&p.scatter).trace();
                Some(-0.5 * (p.count as f64 * (m * (2.0 * std::f64::consts::PI).ln() + chol.ln_det()) + quad))
            })
            .collect();
        // fixed summation order keeps results independent of thread count
        let mut total = 0.0;
        for t in terms {
            total += t?;
        }
        Some(total)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    pub params: BivariateMaternParams,
    pub loglik: f64,
    /// Log-likelihood at each multistart initialization.
    pub start_logliks: Vec<f64>,
    /// Factor applied to rho to restore positive semidefiniteness (1 when untouched).
    pub rho_shrinkage: f64,
    pub season: SeasonFilter,
    pub days: usize,
}

struct Transform {
    ln_sigma2: [(f64, f64); 2],
    ln_tau2: [(f64, f64); 2],
    ln_a: (f64, f64),
}

impl Transform {
    fn decode(&self, u: &[f64]) -> BivariateMaternParams {
        BivariateMaternParams {
            sigma2: [0, 1].map(|i| to_bounded(u[i], self.ln_sigma2[i].0, self.ln_sigma2[i].1).exp()),
            a: [0, 1].map(|i| to_bounded(u[2 + i], self.ln_a.0, self.ln_a.1).exp()),
            nu: [0, 1].map(|i| to_bounded(u[4 + i], NU_BOUNDS.0, NU_BOUNDS.1)),
            tau2: [0, 1].map(|i| to_bounded(u[6 + i], self.ln_tau2[i].0, self.ln_tau2[i].1).exp()),
            rho: u[8].tanh(),
        }
    }

    fn encode(&self, p: &BivariateMaternParams) -> Vec<f64> {
        let mut u = Vec::with_capacity(9);
        u.extend((0..2).map(|i| from_bounded(p.sigma2[i].ln(), self.ln_sigma2[i].0, self.ln_sigma2[i].1)));
        u.extend((0..2).map(|i| from_bounded(p.a[i].ln(), self.ln_a.0, self.ln_a.1)));
        u.extend((0..2).map(|i| from_bounded(p.nu[i], NU_BOUNDS.0, NU_BOUNDS.1)));
        u.extend((0..2).map(|i| from_bounded(p.tau2[i].ln(), self.ln_tau2[i].0, self.ln_tau2[i].1)));
        u.push(p.rho.clamp(-0.999, 0.999).atanh());
        u
    }
}

/// True when the model's covariance on `xy` has min eigenvalue ≥ −1e-8 × max.
pub fn is_valid_on(params: &BivariateMaternParams, xy: &[[f64; 2]]) -> bool {
    let (lo, hi) = eigen_extremes(&covariance_matrix(params, xy));
    lo >= -PSD_SLACK * hi.abs()
}

/// Maximum likelihood fit of the nine free parameters from five
/// deterministic starts.
pub fn fit_baseline(field: &ResidualField, filter: SeasonFilter) -> Result<BaselineFit> {
    let data = BaselineData::new(field, filter)?;
    fit_baseline_data(&data, filter)
}

pub fn fit_baseline_data(data: &BaselineData, filter: SeasonFilter) -> Result<BaselineFit> {
    let xy = &data.xy;
    let mut pos = Vec::new();
    for p in 0..xy.len() {
        for q in (p + 1)..xy.len() {
            let h = distance(xy[p], xy[q]);
            if h > COINCIDENT_KM {
                pos.push(h);
            }
        }
    }
    pos.sort_by(f64::total_cmp);
    if pos.is_empty() {
        return Err(Error::InvalidArgument("all stations coincide".into()));
    }
    let (dmin, dmed, dmax) = (pos[0], pos[pos.len() / 2], pos[pos.len() - 1]);
    let v = data.variance;
    let tr = Transform {
        ln_sigma2: [0, 1].map(|i| ((1e-4 * v[i]).ln(), (10.0 * v[i]).ln())),
        ln_tau2: [0, 1].map(|i| ((1e-6 * v[i]).ln(), (10.0 * v[i]).ln())),
        ln_a: ((0.01 / dmax).ln(), (100.0 / dmin).ln()),
    };
    let r = data.cross_corr;
    let start = |fs: f64, a: f64, nu: f64, rho: f64| BivariateMaternParams {
        sigma2: [fs * v[0], fs * v[1]],
        a: [a / dmed, a / dmed],
        nu: [nu, nu],
        tau2: [(1.0 - fs) * v[0], (1.0 - fs) * v[1]],
        rho,
    };
    let starts = [
        start(0.8, 3.0, 1.0, r),
        start(0.5, 1.0, 0.5, 0.5 * r),
        start(0.95, 10.0, 1.5, r),
        start(0.6, 0.3, 2.5, 0.0),
        start(0.9, 3.0, 0.8, 0.8 * r),
    ];
    let nm = NelderMead {
        max_evals: 3000,
        ftol: 1e-7,
        initial_step: 0.5,
    };
    let results: Vec<(f64, Option<(f64, Vec<f64>)>)> = starts
        .par_iter()
        .map(|s| {
            let u0 = tr.encode(s);
            let start_ll = data.loglik(&tr.decode(&u0)).unwrap_or(f64::NEG_INFINITY);
            let objective = |u: &[f64]| match data.loglik(&tr.decode(u)) {
                Some(ll) => -ll,
                None => f64::INFINITY,
            };
            let m = nm.minimize_restarting(objective, &u0, 4);
            (start_ll, m.f.is_finite().then_some((m.f, m.x)))
        })
        .collect();
    let start_logliks: Vec<f64> = results.iter().map(|r| r.0).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (_, r) in results.into_iter() {
        if let Some(r) = r {
            if best.as_ref().is_none_or(|b| r.0 < b.0) {
                best = Some(r);
            }
        }
    }
    let (_, u) = best.ok_or_else(|| Error::Optimization("baseline fit failed from every start".into()))?;
    let mut params = tr.decode(&u);
    let mut shrink = 1.0;
    while !is_valid_on(&params, xy) {
        if params.rho.abs() < 1e-12 {
            return Err(Error::Factorization("baseline covariance not PSD even with rho = 0".into()));
        }
        params.rho *= 0.9;
        shrink *= 0.9;
    }
    let loglik = data
        .loglik(&params)
        .ok_or_else(|| Error::Factorization("fitted baseline covariance".into()))?;
    Ok(BaselineFit {
        params,
        loglik,
        start_logliks,
        rho_shrinkage: shrink,
        season: filter,
        days: data.days,
    })
}

/// Dense log-likelihood for one day's observed vector, for checks.
pub fn day_loglik(params: &BivariateMaternParams, xy: &[[f64; 2]], z: &[Option<f64>]) -> Option<f64> {
    let index: Vec<usize> = (0..z.len()).filter(|&r| z[r].is_some()).collect();
    let full = covariance_matrix(params, xy);
    let sub = full.select_rows(index.iter()).select_columns(index.iter());
    let chol = cholesky_jittered(&sub).ok()?;
    let v = DVector::from_iterator(index.len(), index.iter().map(|&r| z[r].unwrap()));
    let m = index.len() as f64;
    Some(-0.5 * (m * (2.0 * std::f64::consts::PI).ln() + chol.ln_det() + v.dot(&chol.chol.solve(&v))))
}
