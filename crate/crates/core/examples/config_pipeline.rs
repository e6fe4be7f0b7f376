//! Drives every command-line stage from a flat config, the same way the
//! `tempfield` binary does, writing artifacts under a scratch directory.
//!
//! ```text
//! cargo run --release --example config_pipeline -- [out_dir]
//! ```

use tempfield::cli::{Command, Run};
use tempfield::config::Config;

fn main() -> tempfield::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("tempfield-example").display().to_string());
    let text = format!(
        "input = {}/data/synthetic_obs.csv\nout_dir = {out}\nwindow_start = 2001-01-01\nwindow_end = 2006-12-31\nspatial_lambda = 20\nseed = 11\n",
        env!("CARGO_MANIFEST_DIR")
    );
    let config = Config::parse(&text)?;
    println!("config hash {}", config.hash());
    let run = Run::new(config, true);
    run.run(&Command::All { seed: None })?;
    for entry in std::fs::read_dir(&out)? {
        println!("  {}", entry?.file_name().to_string_lossy());
    }
    Ok(())
}
