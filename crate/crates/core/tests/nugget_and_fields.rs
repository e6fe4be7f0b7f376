//! Nugget estimation and Gaussian-process coefficient fields on synthetic data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfield::climate::{fit_coefficient_fields, interpolate_coefficients};
use tempfield::gpcore::{covariance_matrix, gp_fit_mle, krige, FitBounds, GpHyperParams};
use tempfield::nugget::LocalVariances;
use tempfield::pipeline::{fit_model, CovOptions};
use tempfield::synth::{generate_network, gp_station_coefficients, random_sites, MvnSampler, SyntheticSpec, WeatherGenerator, WeatherShape};
use tempfield::weathercov::ResidualField;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

#[test]
fn constant_nugget_recovered_on_fifty_stations() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let xy = random_sites(50, 250.0, 250.0, &mut rng);
    // long range, so the smoothed covariance is nearly flat between neighbours
    // and the estimate is not inflated by sigma^2 - C(h)
    let generator = WeatherGenerator { sd: [3.0, 4.0], rho: 0.5, shape: WeatherShape::Exponential { range_km: 300.0 }, tau: [1.0, 1.0] };
    let syn = generate_network(&SyntheticSpec::new(xy, 20, generator, 51)).unwrap();
    let fit = fit_model(&syn.network, &CovOptions::default()).unwrap();
    for field in &fit.nugget {
        let m = median(field.station_tau.clone());
        println!("{:?}: median tau {m:.3}", field.variable);
        assert!((0.8..=1.2).contains(&m), "{:?}: median tau {m:.3}", field.variable);
        assert!(field.station_tau.iter().all(|&t| t >= 0.0));
    }
}

#[test]
fn local_variances_converge_with_record_length() {
    let generator = WeatherGenerator { sd: [2.0, 3.0], rho: 0.4, shape: WeatherShape::Exponential { range_km: 60.0 }, tau: [0.5, 0.5] };
    let xy = vec![[0.0, 0.0], [30.0, 0.0], [0.0, 40.0], [-25.0, -20.0]];
    let truth = [0, 1].map(|i| generator.sd[i].powi(2) + generator.tau[i].powi(2));
    let mut mse = Vec::new();
    for years in [5usize, 20, 80] {
        let syn = generate_network(&SyntheticSpec::new(xy.clone(), years, generator.clone(), 77)).unwrap();
        let doy = (0..syn.network.t_len()).map(|t| syn.network.calendar.day_of_year(t as i64)).collect();
        let v = LocalVariances::compute(&ResidualField::new(xy.clone(), doy, &syn.residuals).unwrap());
        let (mut sq, mut count) = (0.0, 0usize);
        for k in 0..xy.len() {
            for i in 0..2 {
                for d in 1..=365 {
                    sq += (v.get(k, i, d).unwrap() - truth[i]).powi(2);
                    count += 1;
                }
            }
        }
        mse.push(sq / count as f64);
    }
    assert!(mse[0] > mse[1] && mse[1] > mse[2], "MSE by 5, 20, 80 years: {mse:?}");
}

#[test]
fn gp_sill_recovered_on_two_hundred_sites() {
    let truth = GpHyperParams { mu: 1.0, sigma2: 2.0, a: 0.05, nu: 1.0, tau2: 0.25 };
    let mut rel = Vec::new();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let xy = random_sites(200, 200.0, 200.0, &mut rng);
        let z: Vec<f64> = MvnSampler::new(&covariance_matrix(&truth, &xy)).unwrap().draw(&mut rng).iter().map(|v| v + truth.mu).collect();
        let fit = gp_fit_mle(&xy, &z, &FitBounds::default()).unwrap();
        rel.push((fit.sill() - truth.sill()).abs() / truth.sill());
    }
    let m = median(rel);
    assert!(m <= 0.25, "median relative sill error {m:.3}");
}

#[test]
fn fitted_fields_predict_nearly_as_well_as_true_hyperparameters() {
    let truth = GpHyperParams { mu: 0.5, sigma2: 1.0, a: 1.0 / 60.0, nu: 1.0, tau2: 0.0 };
    let (mut fitted_sq, mut oracle_sq) = (0.0, 0.0);
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let all = random_sites(120, 300.0, 300.0, &mut rng);
        let coefs = gp_station_coefficients(&all, &truth, 0.2, &mut rng).unwrap();
        let (train_xy, test_xy) = all.split_at(100);
        let fields = fit_coefficient_fields(train_xy, &coefs[..100]).unwrap();
        let pred = interpolate_coefficients(&fields, test_xy).unwrap();
        // the generator's station values include the 0.2 noise, which the oracle knows about
        let oracle_params = GpHyperParams { tau2: 0.04, ..truth };
        for f in &fields.fields {
            let i = f.variable.index();
            let held: Vec<f64> = coefs[100..].iter().map(|c| c.beta[i][f.k]).collect();
            let oracle = krige(&oracle_params, train_xy, &f.station_values, test_xy).unwrap();
            for (t, want) in held.iter().enumerate() {
                fitted_sq += (pred[t].beta[i][f.k] - want).powi(2);
                oracle_sq += (oracle[t].mean - want).powi(2);
            }
        }
    }
    assert!(fitted_sq <= 1.2 * oracle_sq, "fitted MSE {fitted_sq:.3} vs oracle {oracle_sq:.3} (summed)");
}

#[test]
fn kriged_coefficients_are_continuous() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let xy = random_sites(40, 200.0, 200.0, &mut rng);
    let gp = GpHyperParams { mu: 0.0, sigma2: 1.0, a: 1.0 / 50.0, nu: 1.5, tau2: 0.0 };
    let coefs = gp_station_coefficients(&xy, &gp, 0.1, &mut rng).unwrap();
    let fields = fit_coefficient_fields(&xy, &coefs).unwrap();
    for _ in 0..50 {
        let t = [rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)];
        let a = &interpolate_coefficients(&fields, &[t]).unwrap()[0];
        let b = &interpolate_coefficients(&fields, &[[t[0] + 1e-6, t[1]]]).unwrap()[0];
        for i in 0..2 {
            for k in 0..6 {
                assert!((a.beta[i][k] - b.beta[i][k]).abs() < 1e-4);
            }
        }
    }
}
