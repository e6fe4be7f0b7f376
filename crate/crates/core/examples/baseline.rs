//! Fits the stationary bivariate Matérn comparison model to summer residuals.
//!
//! ```text
//! cargo run --release --example baseline
//! ```

use std::fs::File;

use chrono::NaiveDate;
use tempfield::baseline::{fit_baseline, SeasonFilter};
use tempfield::geodata::parse_observations;
use tempfield::pipeline::refit_residuals;

fn main() -> tempfield::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_obs.csv");
    let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2006, 12, 31).unwrap();
    let network = parse_observations(File::open(path)?, start, end)?;
    let residuals = refit_residuals(&network)?;
    let fit = fit_baseline(&residuals, SeasonFilter::JJA)?;
    let p = &fit.params;
    println!("{} summer days, log-likelihood {:.2}", fit.days, fit.loglik);
    println!("sigma2 N {:.3} X {:.3}", p.sigma2[0], p.sigma2[1]);
    println!("range (1/a) N {:.1} km X {:.1} km", 1.0 / p.a[0], 1.0 / p.a[1]);
    println!("nu N {:.2} X {:.2}, cross {:.2}", p.nu[0], p.nu[1], p.nu_cross());
    println!("tau2 N {:.3} X {:.3}", p.tau2[0], p.tau2[1]);
    println!("rho {:.3} (shrinkage {:.3})", p.rho, fit.rho_shrinkage);
    println!("start log-likelihoods {:.2?}", fit.start_logliks);
    Ok(())
}
