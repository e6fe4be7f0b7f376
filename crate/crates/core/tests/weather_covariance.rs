//! Statistical behaviour of the smoothed covariance estimator on synthetic
//! fields with known truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfield::diagnostics::cv_local_sd;
use tempfield::geodata::distance;
use tempfield::synth::{generate_network, jittered_grid, random_sites, SyntheticSpec, WeatherGenerator, WeatherShape};
use tempfield::weathercov::{seasonal_cov, select_spatial_bandwidth, KernelSpec, ResidualField, SeasonalCovModel};

fn true_residual_field(spec: &SyntheticSpec) -> ResidualField {
    let syn = generate_network(spec).unwrap();
    let doy = (0..syn.network.t_len()).map(|t| syn.network.calendar.day_of_year(t as i64)).collect();
    ResidualField::new(spec.xy.clone(), doy, &syn.residuals).unwrap()
}

fn implied_corr(m: &SeasonalCovModel, i: usize, x: [f64; 2], y: [f64; 2], d: u16) -> f64 {
    let c = seasonal_cov(m, i, i, x, y, d).unwrap();
    c / (seasonal_cov(m, i, i, x, x, d).unwrap() * seasonal_cov(m, i, i, y, y, d).unwrap()).sqrt()
}

#[test]
fn stationary_correlation_at_fifty_km() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xy = random_sites(50, 150.0, 150.0, &mut rng);
    let generator = WeatherGenerator { sd: [3.0, 4.0], rho: 0.5, shape: WeatherShape::Exponential { range_km: 50.0 }, tau: [0.0, 0.0] };
    let field = true_residual_field(&SyntheticSpec::new(xy.clone(), 20, generator, 9));
    let lambda = select_spatial_bandwidth(&field.xy).unwrap().lambda;
    let model = SeasonalCovModel::new(field, KernelSpec::new(lambda, 20.0).unwrap()).unwrap();
    // every station pair about 50 km apart, against the exact correlation at its separation
    let (mut pairs, mut worst) = (0, 0.0f64);
    for k in 0..xy.len() {
        for l in (k + 1)..xy.len() {
            let h = distance(xy[k], xy[l]);
            if (h - 50.0).abs() > 2.5 {
                continue;
            }
            pairs += 1;
            for i in 0..2 {
                let r = implied_corr(&model, i, xy[k], xy[l], 200);
                let want = (-h / 50.0).exp();
                worst = worst.max((r - want).abs());
                assert!((r - want).abs() <= 0.1, "variable {i}, stations {k}-{l} at {h:.1} km: {r:.3} vs {want:.3}");
            }
        }
    }
    println!("{pairs} pairs, worst |error| {worst:.3}");
    assert!(pairs >= 10, "only {pairs} pairs near 50 km");
}

#[test]
fn bias_shrinks_as_network_densifies() {
    // true C_NN(x, x) = 1 with no nugget; bandwidth shrinks like n^(-0.4)
    let generator = WeatherGenerator { sd: [1.0, 1.0], rho: 0.3, shape: WeatherShape::Exponential { range_km: 40.0 }, tau: [0.0, 0.0] };
    let probes = [[0.0, 0.0], [20.0, -10.0], [-15.0, 25.0], [30.0, 30.0]];
    let mut errors = Vec::new();
    for (s, n) in [20usize, 50, 100].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(70 + s as u64);
        let xy = jittered_grid(n / 5, 5, 100.0, 100.0, &mut rng);
        let field = true_residual_field(&SyntheticSpec::new(xy, 10, generator.clone(), 30 + s as u64));
        let lambda = 60.0 * (n as f64).powf(-0.4);
        let model = SeasonalCovModel::new(field, KernelSpec::new(lambda, 30.0).unwrap()).unwrap();
        let mut err = 0.0;
        for &x in &probes {
            for (y_off, truth) in [(0.0, 1.0), (20.0, (-0.5f64).exp())] {
                let y = [x[0] + y_off, x[1]];
                err += (seasonal_cov(&model, 0, 0, x, y, 180).unwrap() - truth).abs();
            }
        }
        errors.push(err / (2 * probes.len()) as f64);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "mean |C_hat - C| by n = 20, 50, 100: {errors:?}");
}

#[test]
fn held_out_local_sd_follows_smooth_surface() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let xy = random_sites(50, 100.0, 100.0, &mut rng);
    let generator = WeatherGenerator { sd: [3.0, 4.0], rho: 0.5, shape: WeatherShape::Exponential { range_km: 150.0 }, tau: [0.5, 0.5] };
    let mut spec = SyntheticSpec::new(xy.clone(), 20, generator.clone(), 13);
    // SD rises smoothly from west to east by ±20%
    spec.site_scale = xy.iter().map(|p| 1.0 + 0.2 * p[0] / 100.0).collect();
    let field = true_residual_field(&spec);
    let lambda = select_spatial_bandwidth(&field.xy).unwrap().lambda;
    let model = SeasonalCovModel::new(field, KernelSpec::new(lambda, 20.0).unwrap()).unwrap();
    let days: Vec<u16> = (0..12).map(|m| 15 + 30 * m).collect();
    let (mut abs_err, mut count) = (0.0, 0usize);
    for k in 0..xy.len() {
        for row in cv_local_sd(&model, k, &days).unwrap() {
            let i = row.variable.index();
            let truth = generator.sd[i] * spec.site_scale[k];
            abs_err += (row.predicted - truth).abs();
            count += 1;
        }
    }
    let mae = abs_err / count as f64;
    assert!(mae < 0.2, "mean absolute held-out SD error {mae:.3} °C");
}
