//! Station nuggets from the gap between raw and smoothed variances, and the
//! nugget field kriged to new locations.
//!
//! ```text
//! cargo run --release --example nugget
//! ```

use std::fs::File;

use chrono::NaiveDate;
use tempfield::geodata::parse_observations;
use tempfield::nugget::interpolate_nugget;
use tempfield::pipeline::{fit_model, CovOptions};

fn main() -> tempfield::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_obs.csv");
    let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2006, 12, 31).unwrap();
    let network = parse_observations(File::open(path)?, start, end)?;
    let fit = fit_model(&network, &CovOptions { spatial_lambda: Some(20.0), ..CovOptions::default() })?;

    // the bundled data were generated with a 1 °C nugget; with only ten
    // stations the smoothed variance falls short of the local one, so these run high
    println!("station  tau_N  tau_X");
    for (k, s) in network.stations.iter().enumerate() {
        println!("{}  {:.3}  {:.3}", s.id, fit.nugget[0].station_tau[k], fit.nugget[1].station_tau[k]);
    }
    let targets = [[0.0, 0.0], [60.0, 60.0], [500.0, 500.0]];
    for field in &fit.nugget {
        let tau = interpolate_nugget(field, &network.coords(), &targets)?;
        println!("{:?} kriged at {targets:?}: {tau:.3?}", field.variable);
    }
    Ok(())
}
