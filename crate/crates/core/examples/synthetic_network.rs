//! Generates a small synthetic station network and writes it in the
//! observation CSV format.
//!
//! ```text
//! cargo run --release --example synthetic_network -- [out.csv]
//! ```
//!
//! With no argument the file goes to `synthetic_obs.csv` in the working
//! directory. The bundled `data/synthetic_obs.csv` was made this way.

use std::fs::File;
use std::io::BufWriter;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfield::geodata::write_observations;
use tempfield::synth::{center, generate_network, random_sites, SyntheticSpec, WeatherGenerator, WeatherShape};

fn main() -> tempfield::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "synthetic_obs.csv".into());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut xy = random_sites(10, 150.0, 150.0, &mut rng);
    center(&mut xy);

    let weather = WeatherGenerator {
        sd: [3.0, 4.0],
        rho: 0.4,
        shape: WeatherShape::Exponential { range_km: 80.0 },
        tau: [1.0, 1.0],
    };
    let mut spec = SyntheticSpec::new(xy, 6, weather, 7);
    spec.seasonal_amplitude = 0.3;
    let mut syn = generate_network(&spec)?;

    // A couple of station outages rather than scattered gaps, like real records.
    let t_len = syn.network.t_len();
    for _ in 0..4 {
        let k = rng.random_range(0..syn.network.n());
        let start = rng.random_range(0..t_len - 60);
        let len = rng.random_range(10..60);
        for series in syn.network.series[k].values.iter_mut() {
            series[start..start + len].fill(f64::NAN);
        }
    }

    write_observations(&syn.network, BufWriter::new(File::create(&path)?))?;
    let missing: usize = syn
        .network
        .series
        .iter()
        .flat_map(|s| s.values.iter())
        .map(|v| v.iter().filter(|x| x.is_nan()).count())
        .sum();
    println!(
        "wrote {path}: {} stations, {} days ({} to {}), {missing} missing values",
        syn.network.n(),
        t_len,
        syn.network.calendar.date_of(0),
        syn.network.calendar.date_of(t_len - 1)
    );
    Ok(())
}
