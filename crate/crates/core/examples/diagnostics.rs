//! Validation statistics for a fitted model: residual autocorrelation,
//! pairwise correlations against a simulation, domain extremes and
//! leave-one-out coverage of the coefficient fields.
//!
//! ```text
//! cargo run --release --example diagnostics
//! ```

use std::fs::File;

use chrono::NaiveDate;
use tempfield::baseline::SeasonFilter;
use tempfield::diagnostics::{
    coefficient_cv_table, coverage_summary, extrema_qq, pairwise_correlation_compare, residual_acf, Extremum, FieldTable, PairKind,
};
use tempfield::geodata::parse_observations;
use tempfield::pipeline::{fit_model, refit_residuals, CovOptions};
use tempfield::simulator::apply_missing_mask;

fn main() -> tempfield::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_obs.csv");
    let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2006, 12, 31).unwrap();
    let network = parse_observations(File::open(path)?, start, end)?;
    let fit = fit_model(&network, &CovOptions { spatial_lambda: Some(20.0), ..CovOptions::default() })?;
    let observed = refit_residuals(&network)?;

    let mut worst: f64 = 0.0;
    for k in 0..observed.n() {
        for s in observed.station_series(k) {
            worst = worst.max(residual_acf(&s, 1)?[1].abs());
        }
    }
    println!("largest |lag-1 autocorrelation| of residuals: {worst:.3}");

    let sim = apply_missing_mask(&fit.simulate_stations(1)?, &network)?;
    let simulated = refit_residuals(&sim.as_network(&network)?)?;
    let rows = pairwise_correlation_compare(&observed, &simulated, SeasonFilter::JJA, false)?;
    for kind in [PairKind::NN, PairKind::XX, PairKind::NX] {
        let sel: Vec<_> = rows.iter().filter(|r| r.kind == kind).collect();
        let rms = (sel.iter().map(|r| (r.simulated - r.empirical).powi(2)).sum::<f64>() / sel.len() as f64).sqrt();
        println!("{kind:?}: {} pairs, RMS simulated - observed {rms:.3}", sel.len());
    }

    let qq = extrema_qq(&FieldTable::from_network(&network), &FieldTable::from_simulation(&sim))?;
    for which in [Extremum::MaxOfMax, Extremum::MinOfMin] {
        let d: Vec<f64> = qq.iter().filter(|r| r.statistic == which).map(|r| r.simulated - r.observed).collect();
        println!("{which:?}: mean quantile difference {:+.2} °C", d.iter().sum::<f64>() / d.len() as f64);
    }

    for c in coverage_summary(&coefficient_cv_table(&fit.climate.fields)?) {
        print!("{}{}:{:.2} ", c.variable.label(), c.k, c.coverage);
    }
    println!();
    Ok(())
}
