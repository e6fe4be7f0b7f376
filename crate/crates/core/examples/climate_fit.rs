//! Fits the local climate component to the bundled network: one regression
//! per station, then a Gaussian-process field per coefficient, kriged to a
//! location without a station.
//!
//! ```text
//! cargo run --release --example climate_fit
//! ```

use std::fs::File;

use chrono::NaiveDate;
use tempfield::climate::{fit_local_climate, interpolate_coefficients, COEF_NAMES};
use tempfield::geodata::parse_observations;

fn main() -> tempfield::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_obs.csv");
    let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2006, 12, 31).unwrap();
    let network = parse_observations(File::open(path)?, start, end)?;
    let climate = fit_local_climate(&network)?;

    println!("station regressions (minimum temperature):");
    for s in climate.stations.iter().take(3) {
        let b: Vec<String> = s.beta[0].iter().map(|v| format!("{v:7.3}")).collect();
        println!("  {} n={} [{}]", s.station_id, s.n_used[0], b.join(" "));
    }

    let target = [5.0, -10.0];
    let kriged = &interpolate_coefficients(&climate.fields, &[target])?[0];
    println!("kriged at {target:?} km:");
    for (k, name) in COEF_NAMES.iter().enumerate() {
        println!(
            "  {name:>9}  N {:7.3} ± {:.3}   X {:7.3} ± {:.3}",
            kriged.beta[0][k], kriged.sd[0][k], kriged.beta[1][k], kriged.sd[1][k]
        );
    }
    Ok(())
}
