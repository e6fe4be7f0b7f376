//! Simulates daily minimum and maximum temperature at the stations and on
//! a regular grid, and writes the grid run as binary columns.
//!
//! ```text
//! cargo run --release --example simulate -- [out_dir]
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use chrono::NaiveDate;
use tempfield::config::regular_grid;
use tempfield::geodata::parse_observations;
use tempfield::pipeline::{fit_model, CovOptions};
use tempfield::simulator::{
    apply_missing_mask, simulate_trajectory, write_f32_column, NonparametricWeather, SimulationGrid, Timeline, TrajectorySpec,
};

fn main() -> tempfield::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().display().to_string()));
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_obs.csv");
    let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2006, 12, 31).unwrap();
    let network = parse_observations(File::open(path)?, start, end)?;
    let fit = fit_model(&network, &CovOptions { spatial_lambda: Some(20.0), ..CovOptions::default() })?;

    let at_stations = apply_missing_mask(&fit.simulate_stations(1)?, &network)?;
    println!(
        "stations: {} × {} days, inversion fraction {:.4}",
        at_stations.locations.len(),
        at_stations.t_len,
        at_stations.inversion_fraction()
    );

    // one year on a 10 km grid
    let locations = regular_grid([-50.0, -50.0, 50.0, 50.0], 10.0);
    let grid = SimulationGrid::from_models(locations.clone(), &fit.climate, &fit.nugget)?;
    let weather = NonparametricWeather { cov: fit.weather.model.evaluator(&locations)?, tau: grid.tau.clone() };
    let spec = TrajectorySpec { t_start: 0, t_len: 365, seed: 2 };
    let sim = simulate_trajectory(&grid, &weather, Timeline::of(&fit.climate), spec)?;
    for (i, name) in ["sim_N.f32", "sim_X.f32"].iter().enumerate() {
        write_f32_column(&sim.z[i], BufWriter::new(File::create(out.join(name))?))?;
    }
    let july: Vec<f64> = (0..sim.locations.len()).map(|g| sim.get(1, g, 196)).collect();
    let mean = july.iter().sum::<f64>() / july.len() as f64;
    println!("grid: {} points, mean maximum on 16 July {mean:.1} °C; columns in {}", locations.len(), out.display());
    Ok(())
}
