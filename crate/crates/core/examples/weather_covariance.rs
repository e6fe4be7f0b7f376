//! Estimates the seasonal weather covariance from climate residuals and
//! evaluates it away from the stations.
//!
//! ```text
//! cargo run --release --example weather_covariance
//! ```

use std::fs::File;

use chrono::NaiveDate;
use nalgebra::SymmetricEigen;
use tempfield::climate::fit_local_climate;
use tempfield::geodata::parse_observations;
use tempfield::pipeline::{fit_weather, CovOptions};
use tempfield::weathercov::{seasonal_cov, ResidualField};

fn main() -> tempfield::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_obs.csv");
    let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2006, 12, 31).unwrap();
    let network = parse_observations(File::open(path)?, start, end)?;
    let climate = fit_local_climate(&network)?;
    let residuals = ResidualField::from_climate(&network, &climate)?;

    // ten stations is too few for the distance-quantile rule, so fix the spatial bandwidth
    let fit = fit_weather(residuals, &CovOptions { spatial_lambda: Some(20.0), ..CovOptions::default() })?;
    println!("bandwidths: {:?}", fit.report.kernel);
    let best = fit.report.temporal_cv.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    println!("{} temporal candidates, lowest cv error at {:.1} days", fit.report.temporal_cv.len(), best.0);

    let (x, y) = ([0.0, 0.0], [30.0, 10.0]);
    for d in [15u16, 196] {
        let c = |i, j, a, b| seasonal_cov(&fit.model, i, j, a, b, d);
        let corr = c(0, 0, x, y)? / (c(0, 0, x, x)? * c(0, 0, y, y)?).sqrt();
        println!("day {d:3}: sd_N(x) {:.2} °C, sd_X(x) {:.2} °C, corr_N(x, y) {corr:.3}", c(0, 0, x, x)?.sqrt(), c(1, 1, x, x)?.sqrt());
    }

    let grid: Vec<[f64; 2]> = (0..5).flat_map(|r| (0..5).map(move |c| [-40.0 + 20.0 * c as f64, -40.0 + 20.0 * r as f64])).collect();
    let block = fit.model.evaluator(&grid)?.block_matrix(196)?;
    let eig = SymmetricEigen::new(block).eigenvalues;
    println!("50 × 50 block on day 196: eigenvalues in [{:.2e}, {:.2e}]", eig.min(), eig.max());
    Ok(())
}
