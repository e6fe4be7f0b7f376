//! Univariate Gaussian-process machinery: Matérn covariance, exact Gaussian
//! log-likelihood, maximum likelihood fitting and simple kriging.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::distance;
use crate::linalg::{cholesky_jittered, JitteredCholesky};
use crate::optim::{from_bounded, to_bounded, NelderMead};
pub use crate::special::{matern_correlation, Matern};

/// Log-likelihood returned when the covariance cannot be factorized.
pub const LOGLIK_FAILURE: f64 = -1e300;

/// Targets closer than this (km) to a station are treated as coincident.
pub const COINCIDENT_KM: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpHyperParams {
    pub mu: f64,
    pub sigma2: f64,
    /// Inverse range, km⁻¹.
    pub a: f64,
    pub nu: f64,
    pub tau2: f64,
}

impl GpHyperParams {
    pub fn sill(&self) -> f64 {
        self.sigma2 + self.tau2
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.mu, self.sigma2, self.a, self.nu, self.tau2].iter().all(|v| v.is_finite())
            && self.sigma2 >= 0.0
            && self.tau2 >= 0.0
            && self.a > 0.0
            && self.nu > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid GP hyperparameters {self:?}")))
        }
    }

    /// Covariance between values at distance `h`; `coincident` adds the nugget.
    pub fn covariance(&self, h: f64, coincident: bool) -> f64 {
        let c = self.sigma2 * matern_correlation(h, self.a, self.nu);
        if coincident {
            c + self.tau2
        } else {
            c
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrigeResult {
    pub mean: f64,
    pub variance: f64,
}

impl KrigeResult {
    pub fn sd(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

fn distance_matrix(xy: &[[f64; 2]]) -> DMatrix<f64> {
    let n = xy.len();
    DMatrix::from_fn(n, n, |i, j| distance(xy[i], xy[j]))
}

fn cov_from_distances(dist: &DMatrix<f64>, sigma2: f64, a: f64, nu: f64, tau2: f64) -> DMatrix<f64> {
    let n = dist.nrows();
    let kernel = Matern::new(nu);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = sigma2 + tau2;
        for i in (j + 1)..n {
            let h = dist[(i, j)];
            let mut v = sigma2 * kernel.correlation(a * h);
            if h <= COINCIDENT_KM {
                v += tau2;
            }
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `sigma2 * M(a, nu) + tau2 * I` over the locations (nugget also on coincident pairs).
pub fn covariance_matrix(params: &GpHyperParams, xy: &[[f64; 2]]) -> DMatrix<f64> {
    cov_from_distances(&distance_matrix(xy), params.sigma2, params.a, params.nu, params.tau2)
}

fn check_finite(values: &[f64], xy: &[[f64; 2]]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("GP values".into()));
    }
    if xy.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("GP coordinates".into()));
    }
    if values.len() != xy.len() {
        return Err(Error::InvalidArgument("values and locations differ in length".into()));
    }
    Ok(())
}

fn loglik_from_chol(chol: &JitteredCholesky, resid: &DVector<f64>) -> f64 {
    let n = resid.len() as f64;
    let alpha = chol.chol.solve(resid);
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + chol.ln_det() + resid.dot(&alpha))
}

/// Exact Gaussian log density of `values` under mean `mu` and covariance
/// `sigma2 M + tau2 I`.
pub fn gp_loglik(params: &GpHyperParams, xy: &[[f64; 2]], values: &[f64]) -> Result<f64> {
    check_finite(values, xy)?;
    params.validate()?;
    if values.is_empty() {
        return Err(Error::InsufficientData("no values".into()));
    }
    let cov = covariance_matrix(params, xy);
    let Ok(chol) = cholesky_jittered(&cov) else {
        return Ok(LOGLIK_FAILURE);
    };
    let resid = DVector::from_iterator(values.len(), values.iter().map(|v| v - params.mu));
    Ok(loglik_from_chol(&chol, &resid))
}

/// Box bounds for the MLE search. `None` entries are derived from the data.
#[derive(Clone, Debug)]
pub struct FitBounds {
    pub nu: (f64, f64),
    pub sigma2: Option<(f64, f64)>,
    pub tau2: Option<(f64, f64)>,
    pub a: Option<(f64, f64)>,
    /// Fix the smoothness instead of estimating it.
    pub fixed_nu: Option<f64>,
}

impl Default for FitBounds {
    fn default() -> Self {
        FitBounds {
            nu: (0.05, 10.0),
            sigma2: None,
            tau2: None,
            a: None,
            fixed_nu: None,
        }
    }
}

struct Search {
    dist: DMatrix<f64>,
    z: DVector<f64>,
    ln_sigma2: (f64, f64),
    ln_a: (f64, f64),
    nu: (f64, f64),
    ln_tau2: (f64, f64),
    fixed_nu: Option<f64>,
}

impl Search {
    fn decode(&self, u: &[f64]) -> (f64, f64, f64, f64) {
        let sigma2 = to_bounded(u[0], self.ln_sigma2.0, self.ln_sigma2.1).exp();
        let a = to_bounded(u[1], self.ln_a.0, self.ln_a.1).exp();
        let tau2 = to_bounded(u[2], self.ln_tau2.0, self.ln_tau2.1).exp();
        let nu = match self.fixed_nu {
            Some(nu) => nu,
            None => to_bounded(u[3], self.nu.0, self.nu.1),
        };
        (sigma2, a, nu, tau2)
    }

    fn encode(&self, sigma2: f64, a: f64, nu: f64, tau2: f64) -> Vec<f64> {
        let mut u = vec![
            from_bounded(sigma2.ln(), self.ln_sigma2.0, self.ln_sigma2.1),
            from_bounded(a.ln(), self.ln_a.0, self.ln_a.1),
            from_bounded(tau2.ln(), self.ln_tau2.0, self.ln_tau2.1),
        ];
        if self.fixed_nu.is_none() {
            u.push(from_bounded(nu, self.nu.0, self.nu.1));
        }
        u
    }

    /// Profiled log-likelihood and the GLS mean; `None` on factorization failure.
    fn profile(&self, sigma2: f64, a: f64, nu: f64, tau2: f64) -> Option<(f64, f64)> {
        let cov = cov_from_distances(&self.dist, sigma2, a, nu, tau2);
        let chol = cholesky_jittered(&cov).ok()?;
        let ones = DVector::from_element(self.z.len(), 1.0);
        let s1 = chol.chol.solve(&ones);
        let mu = s1.dot(&self.z) / s1.dot(&ones);
        let resid = self.z.map(|v| v - mu);
        Some((loglik_from_chol(&chol, &resid), mu))
    }
}

/// Maximum likelihood fit of `(mu, sigma2, a, nu, tau2)`. The mean is profiled
/// by generalized least squares; five deterministic starts are optimized in
/// parallel and the best is returned (ties go to the earliest start).
pub fn gp_fit_mle(xy: &[[f64; 2]], values: &[f64], bounds: &FitBounds) -> Result<GpHyperParams> {
    check_finite(values, xy)?;
    let n = values.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!("GP fit needs at least 5 sites, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let vscale = if var > 1e-300 { var } else { 1.0 };

    let dist = distance_matrix(xy);
    let mut pos: Vec<f64> = dist.iter().cloned().filter(|&d| d > COINCIDENT_KM).collect();
    pos.sort_by(f64::total_cmp);
    let (dmin, dmed, dmax) = if pos.is_empty() {
        (1.0, 1.0, 1.0)
    } else {
        (pos[0], pos[pos.len() / 2], pos[pos.len() - 1])
    };
    let a_bounds = bounds.a.unwrap_or((0.01 / dmax, 100.0 / dmin));
    let s_bounds = bounds.sigma2.unwrap_or((1e-8 * vscale, 100.0 * vscale));
    let t_bounds = bounds.tau2.unwrap_or((1e-8 * vscale, 100.0 * vscale));

    let search = Search {
        dist,
        z: DVector::from_column_slice(values),
        ln_sigma2: (s_bounds.0.ln(), s_bounds.1.ln()),
        ln_a: (a_bounds.0.ln(), a_bounds.1.ln()),
        nu: bounds.nu,
        ln_tau2: (t_bounds.0.ln(), t_bounds.1.ln()),
        fixed_nu: bounds.fixed_nu,
    };

    let clamp = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
    let starts: Vec<Vec<f64>> = [
        (0.8, 3.0 / dmed, 1.0, 0.2),
        (0.5, 10.0 / dmed, 0.5, 0.5),
        (0.95, 1.0 / dmed, 2.5, 0.05),
        (0.2, 30.0 / dmed, 1.5, 0.8),
        (0.99, 0.3 / dmed, 0.8, 0.01),
    ]
    .iter()
    .map(|&(fs, a, nu, ft)| {
        search.encode(
            clamp(fs * vscale, s_bounds),
            clamp(a, a_bounds),
            clamp(bounds.fixed_nu.unwrap_or(nu), bounds.nu),
            clamp(ft * vscale, t_bounds),
        )
    })
    .collect();

    let nm = NelderMead {
        max_evals: 1500,
        ftol: 1e-6,
        initial_step: 0.7,
    };
    let results: Vec<Option<(f64, Vec<f64>)>> = starts
        .par_iter()
        .map(|x0| {
            let objective = |u: &[f64]| {
                let (s, a, nu, t) = search.decode(u);
                match search.profile(s, a, nu, t) {
                    Some((ll, _)) => -ll,
                    None => f64::INFINITY,
                }
            };
            let m = nm.minimize_restarting(objective, x0, 3);
            m.f.is_finite().then_some((m.f, m.x))
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| r.0 < b.0) {
            best = Some(r);
        }
    }
    let (_, u) = best.ok_or_else(|| Error::Optimization("every start failed to factorize".into()))?;
    let (sigma2, a, nu, tau2) = search.decode(&u);
    let (_, mu) = search
        .profile(sigma2, a, nu, tau2)
        .ok_or_else(|| Error::Optimization("optimum failed to factorize".into()))?;
    Ok(GpHyperParams { mu, sigma2, a, nu, tau2 })
}

/// Simple kriging predictor with the covariance factorized once.
#[derive(Clone, Debug)]
pub struct SimpleKriging {
    params: GpHyperParams,
    xy: Vec<[f64; 2]>,
    chol: JitteredCholesky,
    alpha: DVector<f64>,
}

impl SimpleKriging {
    pub fn new(params: GpHyperParams, xy: &[[f64; 2]], values: &[f64]) -> Result<Self> {
        check_finite(values, xy)?;
        params.validate()?;
        if values.is_empty() {
            return Err(Error::InsufficientData("kriging needs at least one site".into()));
        }
        let cov = covariance_matrix(&params, xy);
        let chol = cholesky_jittered(&cov).map_err(|e| e.context("kriging covariance"))?;
        let resid = DVector::from_iterator(values.len(), values.iter().map(|v| v - params.mu));
        let alpha = chol.chol.solve(&resid);
        Ok(SimpleKriging {
            params,
            xy: xy.to_vec(),
            chol,
            alpha,
        })
    }

    pub fn params(&self) -> &GpHyperParams {
        &self.params
    }

    pub fn predict(&self, target: [f64; 2]) -> KrigeResult {
        let p = &self.params;
        let kernel = Matern::new(p.nu);
        let c = DVector::from_iterator(
            self.xy.len(),
            self.xy.iter().map(|&s| {
                let h = distance(target, s);
                p.sigma2 * kernel.correlation(p.a * h) + if h <= COINCIDENT_KM { p.tau2 } else { 0.0 }
            }),
        );
        let mean = p.mu + c.dot(&self.alpha);
        let w = self.chol.chol.solve(&c);
        let variance = (p.sill() - c.dot(&w)).clamp(0.0, p.sill());
        KrigeResult { mean, variance }
    }
}

/// Simple kriging of `values` observed at `xy` to each target.
pub fn krige(params: &GpHyperParams, xy: &[[f64; 2]], values: &[f64], targets: &[[f64; 2]]) -> Result<Vec<KrigeResult>> {
    let k = SimpleKriging::new(*params, xy, values)?;
    Ok(targets.iter().map(|&t| k.predict(t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{random_sites, MvnSampler};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(mu: f64, sigma2: f64, a: f64, nu: f64, tau2: f64) -> GpHyperParams {
        GpHyperParams { mu, sigma2, a, nu, tau2 }
    }

    /// Dense-inverse log density, independent of the Cholesky route.
    fn dense_loglik(cov: &DMatrix<f64>, resid: &DVector<f64>) -> f64 {
        let n = resid.len() as f64;
        let inv = cov.clone().try_inverse().unwrap();
        let det = cov.clone().lu().determinant();
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + det.ln() + (resid.transpose() * inv * resid)[(0, 0)])
    }

    fn oracle_cov(p: &GpHyperParams, xy: &[[f64; 2]]) -> DMatrix<f64> {
        DMatrix::from_fn(xy.len(), xy.len(), |i, j| {
            let h = ((xy[i][0] - xy[j][0]).powi(2) + (xy[i][1] - xy[j][1]).powi(2)).sqrt();
            let mut c = p.sigma2 * matern_correlation(h, p.a, p.nu);
            if h <= COINCIDENT_KM {
                c += p.tau2;
            }
            c
        })
    }

    #[test]
    fn single_site_zero_residual() {
        let ll = gp_loglik(&params(3.0, 1.0, 0.1, 1.0, 0.0), &[[0.0, 0.0]], &[3.0]).unwrap();
        assert!((ll + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn pure_nugget_is_iid() {
        let xy = [[0.0, 0.0], [1.0, 0.0], [5.0, 3.0], [10.0, -2.0]];
        let z = [0.3, -1.2, 2.0, 0.1];
        let tau2 = 0.7;
        let ll = gp_loglik(&params(0.0, 0.0, 0.1, 1.0, tau2), &xy, &z).unwrap();
        let iid: f64 = z
            .iter()
            .map(|v| -0.5 * ((2.0 * std::f64::consts::PI * tau2).ln() + v * v / tau2))
            .sum();
        assert!((ll - iid).abs() < 1e-12);
    }

    #[test]
    fn loglik_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (k, &(s2, a, nu, t2)) in [(1.0, 0.05, 0.5, 0.1), (2.5, 0.02, 1.7, 0.3), (0.4, 0.2, 3.0, 0.05)].iter().enumerate() {
            let xy = random_sites(12, 200.0, 150.0, &mut rng);
            let p = params(1.5 * k as f64, s2, a, nu, t2);
            let z: Vec<f64> = MvnSampler::new(&oracle_cov(&p, &xy)).unwrap().draw(&mut rng).iter().map(|v| v + p.mu).collect();
            let got = gp_loglik(&p, &xy, &z).unwrap();
            let resid = DVector::from_iterator(12, z.iter().map(|v| v - p.mu));
            let want = dense_loglik(&oracle_cov(&p, &xy), &resid);
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn singular_covariance_reports_failure_sentinel() {
        // sill overflows to infinity, so no jitter level can factorize it
        let xy = [[0.0, 0.0], [1.0, 1.0]];
        let ll = gp_loglik(&params(0.0, 1e308, 1.0, 1.0, 1e308), &xy, &[1.0, 2.0]).unwrap();
        assert_eq!(ll, LOGLIK_FAILURE);
    }

    #[test]
    fn constant_values_collapse_sill() {
        let xy: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 * 13.0, (i * i) as f64]).collect();
        let p = gp_fit_mle(&xy, &[4.2; 10], &FitBounds::default()).unwrap();
        assert!((p.mu - 4.2).abs() < 1e-8);
        assert!(p.sill() < 1e-6, "{p:?}");
    }

    #[test]
    fn too_few_sites_and_non_finite() {
        let xy = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        assert!(matches!(gp_fit_mle(&xy, &[1.0, 2.0, 3.0, 4.0], &FitBounds::default()), Err(Error::InsufficientData(_))));
        let xy5 = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0]];
        assert!(matches!(
            gp_fit_mle(&xy5, &[1.0, f64::NAN, 3.0, 4.0, 5.0], &FitBounds::default()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn coincident_sites_fit_without_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut xy = random_sites(15, 100.0, 100.0, &mut rng);
        xy[3] = xy[7];
        let p = params(0.0, 1.0, 0.05, 1.0, 0.2);
        let z: Vec<f64> = MvnSampler::new(&oracle_cov(&p, &xy)).unwrap().draw(&mut rng).iter().cloned().collect();
        let fit = gp_fit_mle(&xy, &z, &FitBounds::default()).unwrap();
        assert!(fit.tau2 > 0.0 && fit.sigma2.is_finite());
    }

    #[test]
    fn kriging_is_exact_at_stations() {
        let xy = [[0.0, 0.0], [10.0, 0.0], [0.0, 20.0], [15.0, 15.0]];
        let z = [1.0, -0.5, 2.0, 0.7];
        let p = params(0.3, 1.2, 0.08, 1.3, 0.4);
        let res = krige(&p, &xy, &z, &xy).unwrap();
        for (r, v) in res.iter().zip(&z) {
            assert!((r.mean - v).abs() < 1e-8);
            assert!(r.variance.abs() < 1e-8);
        }
    }

    #[test]
    fn kriging_far_field() {
        let xy = [[0.0, 0.0], [10.0, 0.0], [0.0, 20.0]];
        let p = params(5.0, 2.0, 0.1, 0.5, 0.3);
        let r = krige(&p, &xy, &[1.0, 2.0, 3.0], &[[1e6, 1e6]]).unwrap()[0];
        assert!((r.mean - 5.0).abs() < 1e-12);
        assert!((r.variance - 2.3).abs() < 1e-12);
    }

    #[test]
    fn kriging_matches_three_station_oracle() {
        let xy = [[0.0, 0.0], [12.0, 3.0], [-4.0, 9.0]];
        let z = [1.0, 2.5, -0.5];
        let p = params(0.5, 1.5, 0.07, 1.5, 0.2);
        let target = [3.0, 4.0];
        let cov = oracle_cov(&p, &xy);
        let inv = cov.try_inverse().unwrap();
        let c = DVector::from_iterator(3, xy.iter().map(|s| {
            let h = ((s[0] - target[0]).powi(2) + (s[1] - target[1]).powi(2)).sqrt();
            p.sigma2 * matern_correlation(h, p.a, p.nu)
        }));
        let resid = DVector::from_iterator(3, z.iter().map(|v| v - p.mu));
        let mean = p.mu + (c.transpose() * &inv * resid)[(0, 0)];
        let var = p.sill() - (c.transpose() * &inv * &c)[(0, 0)];
        let r = krige(&p, &xy, &z, &[target]).unwrap()[0];
        assert!((r.mean - mean).abs() < 1e-10);
        assert!((r.variance - var).abs() < 1e-10);
    }

    #[test]
    fn kriging_single_station() {
        let p = params(0.0, 1.0, 0.1, 0.5, 0.0);
        let r = krige(&p, &[[0.0, 0.0]], &[2.0], &[[10.0, 0.0]]).unwrap()[0];
        let rho = (-1.0f64).exp();
        assert!((r.mean - 2.0 * rho).abs() < 1e-12);
        assert!((r.variance - (1.0 - rho * rho)).abs() < 1e-12);
    }

    #[test]
    fn mle_recovers_parameters_on_dense_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let xy = random_sites(150, 300.0, 300.0, &mut rng);
        let truth = params(2.0, 1.5, 0.03, 1.0, 0.2);
        let z: Vec<f64> = MvnSampler::new(&oracle_cov(&truth, &xy)).unwrap().draw(&mut rng).iter().map(|v| v + 2.0).collect();
        let fit = gp_fit_mle(&xy, &z, &FitBounds::default()).unwrap();
        let ll_fit = gp_loglik(&fit, &xy, &z).unwrap();
        let ll_true = gp_loglik(&truth, &xy, &z).unwrap();
        assert!(ll_fit >= ll_true - 1e-6, "{ll_fit} < {ll_true}");
        assert!((fit.tau2 - truth.tau2).abs() < 0.2, "{fit:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matern_monotone_in_distance(a in 0.005f64..1.0, nu in 0.05f64..10.0, h1 in 0.0f64..500.0, dh in 0.0f64..100.0) {
            let c1 = matern_correlation(h1, a, nu);
            let c2 = matern_correlation(h1 + dh, a, nu);
            prop_assert!(c2 <= c1 + 1e-12);
            prop_assert!((0.0..=1.0).contains(&c1));
        }

        #[test]
        fn loglik_shift_invariant(shift in -50.0f64..50.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xy = random_sites(8, 100.0, 100.0, &mut rng);
            let z: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
            let p = params(0.4, 1.0, 0.05, 1.2, 0.1);
            let q = GpHyperParams { mu: p.mu + shift, ..p };
            let zs: Vec<f64> = z.iter().map(|v| v + shift).collect();
            let l1 = gp_loglik(&p, &xy, &z).unwrap();
            let l2 = gp_loglik(&q, &xy, &zs).unwrap();
            prop_assert!((l1 - l2).abs() < 1e-8 * l1.abs().max(1.0));
        }

        #[test]
        fn kriging_variance_bounded(seed in 0u64..1000, tx in -80.0f64..80.0, ty in -80.0f64..80.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xy = random_sites(10, 120.0, 120.0, &mut rng);
            let z: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
            let p = params(0.0, 1.3, 0.04, 0.9, 0.25);
            let r = krige(&p, &xy, &z, &[[tx, ty]]).unwrap()[0];
            prop_assert!(r.variance >= 0.0 && r.variance <= p.sill() + 1e-12);
        }

        #[test]
        fn kriging_invariant_to_relabeling(seed in 0u64..1000, rot in 0usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xy = random_sites(10, 120.0, 120.0, &mut rng);
            let z: Vec<f64> = (0..10).map(|i| (i as f64 * 1.7).cos()).collect();
            let mut xy2 = xy.clone();
            let mut z2 = z.clone();
            xy2.rotate_left(rot);
            z2.rotate_left(rot);
            let p = params(0.1, 1.0, 0.05, 1.5, 0.1);
            let t = [[3.0, -7.0]];
            let r1 = krige(&p, &xy, &z, &t).unwrap()[0];
            let r2 = krige(&p, &xy2, &z2, &t).unwrap()[0];
            prop_assert!((r1.mean - r2.mean).abs() < 1e-9);
            prop_assert!((r1.variance - r2.variance).abs() < 1e-9);
        }
    }
}
