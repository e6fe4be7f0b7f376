//! Subcommand front end: each stage reads earlier artifacts from the output
//! directory, writes its own, and stamps them with a manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::{fit_baseline, BaselineFit};
use crate::climate::{fit_local_climate, ClimateModel};
use crate::config::{hex, regular_grid, Config, GridChoice};
use crate::diagnostics::{self as diag, FieldTable, PairCorrelation, PairKind};
use crate::error::{Error, Result};
use crate::geodata::{parse_observations, write_observations, NetworkSidecar, StationNetwork, DAYS_PER_YEAR};
use crate::nugget::{fit_nugget_fields, LocalVariances, NuggetField};
use crate::pipeline::{fit_weather, refit_residuals, simulate_baseline_stations, BandwidthReport};
use crate::simulator::{
    apply_missing_mask, read_f32_column, simulate_trajectory, write_f32_column, write_long_csv, CachedWeather,
    NonparametricWeather, SimulationGrid, SimulationOutput, Timeline, TrajectorySpec, WeatherCovariance,
};
use crate::weathercov::{ResidualField, SeasonalCovModel, StationCovCache};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "tempfield", version, about = "Fit and simulate bivariate daily temperature fields")]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key (repeatable), e.g. `--set seed=3`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Refuse artifacts whose recorded inputs have changed since they were written.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse observations into network.csv / network.json.
    Ingest,
    /// Station regressions and coefficient fields → climate.json.
    FitClimate,
    /// Bandwidths and smoothed weather covariance → weathercov.json + weathercov.bin.
    FitCov,
    /// Station nuggets and their fields → nugget.json.
    FitNugget,
    /// Stationary bivariate Matérn comparison model → baseline.json.
    FitBaseline,
    /// Simulate at the stations or on a regular grid.
    Simulate {
        #[arg(long)]
        seed: u64,
    },
    /// Diagnostic tables under diagnostics/.
    Diagnose,
    /// Every stage in order.
    All {
        #[arg(long)]
        seed: Option<u64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::FitClimate => "fit-climate",
            Command::FitCov => "fit-cov",
            Command::FitNugget => "fit-nugget",
            Command::FitBaseline => "fit-baseline",
            Command::Simulate { .. } => "simulate",
            Command::Diagnose => "diagnose",
            Command::All { .. } => "all",
        }
    }
}

pub const NETWORK_CSV: &str = "network.csv";
pub const NETWORK_JSON: &str = "network.json";
pub const CLIMATE_JSON: &str = "climate.json";
pub const WEATHERCOV_JSON: &str = "weathercov.json";
pub const WEATHERCOV_BIN: &str = "weathercov.bin";
pub const NUGGET_JSON: &str = "nugget.json";
pub const BASELINE_JSON: &str = "baseline.json";
pub const SIM_N: &str = "sim_N.f32";
pub const SIM_X: &str = "sim_X.f32";
pub const SIMULATION_JSON: &str = "simulation.json";
pub const SIMULATION_CSV: &str = "simulation.csv";
pub const DIAGNOSTICS_DIR: &str = "diagnostics";
pub const DIAGNOSTICS_JSON: &str = "diagnostics.json";

/// Provenance stamped on every JSON artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    /// File (relative to the output directory unless absolute) → SHA-256 when read.
    pub inputs: BTreeMap<String, String>,
    /// Companion files written by the same command → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub manifest: Manifest,
    pub data: T,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeatherCovArtifact {
    pub bandwidths: BandwidthReport,
    pub cache_file: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationMeta {
    /// `stations` or `regular`.
    pub grid: String,
    pub locations: Vec<[f64; 2]>,
    pub t_start: i64,
    pub t_len: usize,
    pub seed: u64,
    pub masked: bool,
    /// Location-major, day-minor little-endian f32, °C.
    pub layout: String,
    pub files: [String; 2],
    pub inversion_fraction: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Run context shared by the stages.
pub struct Run {
    pub config: Config,
    pub out: PathBuf,
    pub strict: bool,
}

impl Run {
    pub fn new(config: Config, strict: bool) -> Self {
        let out = config.out_dir();
        Run { config, out, strict }
    }

    fn path(&self, name: &str) -> PathBuf {
        let p = Path::new(name);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out.join(name)
        }
    }

    fn manifest(&self, command: &str, inputs: &[&str], seed: Option<u64>) -> Result<Manifest> {
        let mut m = BTreeMap::new();
        for name in inputs {
            m.insert(name.to_string(), sha256_file(&self.path(name))?);
        }
        Ok(Manifest {
            command: command.into(),
            version: VERSION.into(),
            config_hash: self.config.hash(),
            seed,
            inputs: m,
            outputs: BTreeMap::new(),
        })
    }

    fn write_artifact<T: Serialize>(&self, name: &str, manifest: Manifest, data: T) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        let file = File::create(self.path(name))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &Artifact { manifest, data })?;
        Ok(())
    }

    /// Reads an artifact and checks that what it was built from is unchanged.
    fn read_artifact<T: DeserializeOwned>(&self, name: &str) -> Result<Artifact<T>> {
        let path = self.path(name);
        let file = File::open(&path).map_err(|_| Error::MissingArtifact(path.clone()))?;
        let art: Artifact<T> = serde_json::from_reader(BufReader::new(file))?;
        let recorded = art.manifest.inputs.iter().chain(&art.manifest.outputs);
        for (input, hash) in recorded {
            let now = sha256_file(&self.path(input)).ok();
            if now.as_deref() != Some(hash.as_str()) {
                let msg = format!("{name} was built from a different {input}");
                if self.strict {
                    return Err(Error::HashMismatch(msg));
                }
                eprintln!("warning: {msg}");
            }
        }
        if art.manifest.version != VERSION {
            let msg = format!("{name} was written by version {}", art.manifest.version);
            if self.strict {
                return Err(Error::HashMismatch(msg));
            }
            eprintln!("warning: {msg}");
        }
        Ok(art)
    }

    pub fn ingest(&self) -> Result<()> {
        let input = self.config.input()?;
        let (start, end) = self.config.window()?;
        let file = File::open(&input).map_err(|_| Error::MissingArtifact(input.clone()))?;
        let network = parse_observations(BufReader::new(file), start, end)?;
        fs::create_dir_all(&self.out)?;
        write_observations(&network, BufWriter::new(File::create(self.path(NETWORK_CSV))?))?;
        let input_abs = fs::canonicalize(&input)?.to_string_lossy().into_owned();
        let mut m = self.manifest("ingest", &[&input_abs], None)?;
        m.outputs.insert(NETWORK_CSV.into(), sha256_file(&self.path(NETWORK_CSV))?);
        self.write_artifact(NETWORK_JSON, m, network.sidecar())?;
        eprintln!("ingest: {} stations, {} days", network.n(), network.t_len());
        Ok(())
    }

    pub fn load_network(&self) -> Result<StationNetwork> {
        let side: Artifact<NetworkSidecar> = self.read_artifact(NETWORK_JSON)?;
        let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Format(format!("{s}: {e}")));
        let path = self.path(NETWORK_CSV);
        let file = File::open(&path).map_err(|_| Error::MissingArtifact(path))?;
        parse_observations(BufReader::new(file), date(&side.data.start_date)?, date(&side.data.end_date)?)
    }

    fn load_climate(&self, network: &StationNetwork) -> Result<ClimateModel> {
        let mut c: ClimateModel = self.read_artifact::<ClimateModel>(CLIMATE_JSON)?.data;
        c.attach_residuals(network)?;
        Ok(c)
    }

    pub fn fit_climate(&self) -> Result<()> {
        let network = self.load_network()?;
        let climate = fit_local_climate(&network)?;
        let m = self.manifest("fit-climate", &[NETWORK_CSV, NETWORK_JSON], None)?;
        self.write_artifact(CLIMATE_JSON, m, &climate)?;
        eprintln!("fit-climate: {} stations", climate.stations.len());
        Ok(())
    }

    fn residuals(&self, network: &StationNetwork, climate: &ClimateModel) -> Result<ResidualField> {
        ResidualField::from_climate(network, climate)
    }

    pub fn fit_cov(&self) -> Result<()> {
        let network = self.load_network()?;
        let climate = self.load_climate(&network)?;
        let fit = fit_weather(self.residuals(&network, &climate)?, &self.config.cov_options()?)?;
        let ids: Vec<String> = network.stations.iter().map(|s| s.id.clone()).collect();
        let cache = StationCovCache::build(&fit.model, &ids)?;
        cache.write_to(BufWriter::new(File::create(self.path(WEATHERCOV_BIN))?))?;
        let mut m = self.manifest("fit-cov", &[NETWORK_CSV, CLIMATE_JSON], None)?;
        m.outputs.insert(WEATHERCOV_BIN.into(), sha256_file(&self.path(WEATHERCOV_BIN))?);
        let k = fit.report.kernel;
        self.write_artifact(
            WEATHERCOV_JSON,
            m,
            WeatherCovArtifact {
                bandwidths: fit.report,
                cache_file: WEATHERCOV_BIN.into(),
            },
        )?;
        eprintln!("fit-cov: spatial {:.3} km, temporal {:.2} days", k.spatial_lambda, k.temporal_lambda);
        Ok(())
    }

    fn load_cov(&self) -> Result<(WeatherCovArtifact, StationCovCache)> {
        let art: Artifact<WeatherCovArtifact> = self.read_artifact(WEATHERCOV_JSON)?;
        let path = self.path(&art.data.cache_file);
        let file = File::open(&path).map_err(|_| Error::MissingArtifact(path))?;
        let cache = StationCovCache::read_from(BufReader::new(file))?;
        Ok((art.data, cache))
    }

    pub fn fit_nugget(&self) -> Result<()> {
        let network = self.load_network()?;
        let climate = self.load_climate(&network)?;
        let (_, cache) = self.load_cov()?;
        let variances = LocalVariances::compute(&self.residuals(&network, &climate)?);
        let fields = fit_nugget_fields(&network.coords(), &cache, &variances)?;
        let m = self.manifest("fit-nugget", &[NETWORK_CSV, CLIMATE_JSON, WEATHERCOV_JSON], None)?;
        self.write_artifact(NUGGET_JSON, m, &fields)?;
        let zeros = fields.iter().flat_map(|f| &f.station_tau).filter(|t| **t == 0.0).count();
        eprintln!("fit-nugget: {zeros} station nuggets truncated at zero");
        Ok(())
    }

    pub fn fit_baseline(&self) -> Result<()> {
        let network = self.load_network()?;
        let climate = self.load_climate(&network)?;
        let fit = fit_baseline(&self.residuals(&network, &climate)?, self.config.season()?)?;
        let m = self.manifest("fit-baseline", &[NETWORK_CSV, CLIMATE_JSON], None)?;
        self.write_artifact(BASELINE_JSON, m, &fit)?;
        eprintln!("fit-baseline: loglik {:.3} over {} days", fit.loglik, fit.days);
        Ok(())
    }

    pub fn simulate(&self, seed: u64) -> Result<()> {
        let network = self.load_network()?;
        let climate = self.load_climate(&network)?;
        let (cov, cache) = self.load_cov()?;
        let nugget: [NuggetField; 2] = self.read_artifact(NUGGET_JSON)?.data;
        let (t_start, t_len) = self.config.sim_range()?;
        let spec = TrajectorySpec {
            t_start,
            t_len: t_len.unwrap_or(climate.t_len()),
            seed,
        };
        let timeline = Timeline::of(&climate);
        let grid_choice = self.config.grid()?;
        let (label, output) = match &grid_choice {
            GridChoice::Stations => {
                let grid = SimulationGrid::at_stations(&climate, &nugget)?;
                let weather = CachedWeather {
                    cache: &cache,
                    tau: grid.tau.clone(),
                };
                let out = simulate_trajectory(&grid, &weather, timeline, spec)?;
                let covers_window = spec.t_start == 0 && spec.t_len == network.t_len();
                let out = if covers_window { apply_missing_mask(&out, &network)? } else { out };
                ("stations", out)
            }
            GridChoice::Regular { bbox, resolution } => {
                let locations = regular_grid(*bbox, *resolution);
                let cap = self.config.max_locations()?;
                if locations.len() > cap {
                    return Err(Error::InvalidArgument(format!(
                        "{} grid points exceed max_locations = {cap}",
                        locations.len()
                    )));
                }
                let grid = SimulationGrid::from_models(locations, &climate, &nugget)?;
                let model = SeasonalCovModel::new(self.residuals(&network, &climate)?, cov.bandwidths.kernel)?;
                let weather = NonparametricWeather {
                    cov: model.evaluator(&grid.locations)?,
                    tau: grid.tau.clone(),
                };
                debug_assert_eq!(weather.dim(), 2 * grid.len());
                ("regular", simulate_trajectory(&grid, &weather, timeline, spec)?)
            }
        };
        self.write_simulation(label, &output)
    }

    fn write_simulation(&self, grid: &str, output: &SimulationOutput) -> Result<()> {
        let files = [SIM_N, SIM_X];
        for (i, f) in files.iter().enumerate() {
            write_f32_column(&output.z[i], BufWriter::new(File::create(self.path(f))?))?;
        }
        let write_csv = self.config.flag("write_csv")?;
        if write_csv {
            write_long_csv(output, BufWriter::new(File::create(self.path(SIMULATION_CSV))?))?;
        }
        let mut m = self.manifest("simulate", &[NETWORK_CSV, CLIMATE_JSON, WEATHERCOV_JSON, NUGGET_JSON], Some(output.seed))?;
        for f in files {
            m.outputs.insert(f.into(), sha256_file(&self.path(f))?);
        }
        if write_csv {
            m.outputs.insert(SIMULATION_CSV.into(), sha256_file(&self.path(SIMULATION_CSV))?);
        }
        let meta = SimulationMeta {
            grid: grid.into(),
            locations: output.locations.clone(),
            t_start: output.t_start,
            t_len: output.t_len,
            seed: output.seed,
            masked: output.masked,
            layout: "location-major, day-minor, little-endian f32".into(),
            files: files.map(String::from),
            inversion_fraction: output.inversion_fraction(),
        };
        eprintln!(
            "simulate: {} locations × {} days, inversion fraction {:.5}",
            meta.locations.len(),
            meta.t_len,
            meta.inversion_fraction
        );
        self.write_artifact(SIMULATION_JSON, m, meta)
    }

    fn load_simulation(&self) -> Result<SimulationOutput> {
        let meta: SimulationMeta = self.read_artifact(SIMULATION_JSON)?.data;
        let z = [0, 1].map(|i| -> Result<Vec<f64>> {
            let path = self.path(&meta.files[i]);
            let file = File::open(&path).map_err(|_| Error::MissingArtifact(path))?;
            Ok(read_f32_column(BufReader::new(file))?.into_iter().map(f64::from).collect())
        });
        let [zn, zx] = z;
        let (zn, zx) = (zn?, zx?);
        if zn.len() != meta.locations.len() * meta.t_len || zx.len() != zn.len() {
            return Err(Error::Format("simulation columns do not match simulation.json".into()));
        }
        Ok(SimulationOutput {
            locations: meta.locations,
            t_start: meta.t_start,
            t_len: meta.t_len,
            seed: meta.seed,
            z: [zn, zx],
            masked: meta.masked,
        })
    }

    pub fn diagnose(&self) -> Result<()> {
        let network = self.load_network()?;
        let climate = self.load_climate(&network)?;
        let (cov, cache) = self.load_cov()?;
        let nugget: [NuggetField; 2] = self.read_artifact(NUGGET_JSON)?.data;
        let sim = self.load_simulation()?;
        // comparisons need a masked station-level run over the fitting window
        let sim = if sim.masked && sim.locations.len() == network.n() && sim.t_len == network.t_len() {
            sim
        } else {
            let grid = SimulationGrid::at_stations(&climate, &nugget)?;
            let weather = CachedWeather {
                cache: &cache,
                tau: grid.tau.clone(),
            };
            let spec = TrajectorySpec {
                t_start: 0,
                t_len: network.t_len(),
                seed: sim.seed,
            };
            apply_missing_mask(&simulate_trajectory(&grid, &weather, Timeline::of(&climate), spec)?, &network)?
        };
        let ids: Vec<String> = network.stations.iter().map(|s| s.id.clone()).collect();
        let observed = self.residuals(&network, &climate)?;
        let simulated = refit_residuals(&sim.as_network(&network)?)?;
        let season = self.config.season()?;
        let cross_site = self.config.flag("cross_site")?;
        let dir = self.out.join(DIAGNOSTICS_DIR);
        fs::create_dir_all(&dir)?;
        let csv = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };

        let lag = self.config.acf_max_lag()?;
        let mut acf = diag::acf_table(&observed, &ids, lag, "observed");
        acf.extend(diag::acf_table(&simulated, &ids, lag, "simulated"));
        diag::write_csv(&acf, csv(diag::ACF_CSV)?)?;

        let mut pairs = labelled("nonparametric", diag::pairwise_correlation_compare(&observed, &simulated, season, cross_site)?);
        let baseline_path = self.path(BASELINE_JSON);
        if baseline_path.exists() {
            let fit: BaselineFit = self.read_artifact(BASELINE_JSON)?.data;
            let bsim = apply_missing_mask(&simulate_baseline_stations(&climate, &fit.params, sim.seed)?, &network)?;
            let bres = refit_residuals(&bsim.as_network(&network)?)?;
            pairs.extend(labelled("baseline", diag::pairwise_correlation_compare(&observed, &bres, season, cross_site)?));
        }
        diag::write_csv(&pairs, csv(diag::PAIRWISE_CSV)?)?;

        let model = SeasonalCovModel::new(observed.clone(), cov.bandwidths.kernel)?;
        let xy = network.coords();
        let bbox = [
            xy.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
            xy.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
            xy.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max),
            xy.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max),
        ];
        let map_grid = regular_grid(bbox, self.config.map_resolution()?);
        let anchor = self.config.map_anchor()?;
        let mut map = Vec::new();
        for d in self.config.map_days()? {
            map.extend(diag::spatial_correlation_map(&model, anchor, &map_grid, d)?);
        }
        diag::write_csv(&map, csv(diag::CORR_MAP_CSV)?)?;

        let obs_t = FieldTable::from_network(&network);
        let sim_t = FieldTable::from_simulation(&sim);
        diag::write_csv(&diag::extrema_qq(&obs_t, &sim_t)?, csv(diag::EXTREMA_CSV)?)?;
        let exceed = diag::exceedance_log_frequency(&FieldTable::from_residuals(&observed), &FieldTable::from_residuals(&simulated))?;
        diag::write_csv(&exceed, csv(diag::EXCEEDANCE_CSV)?)?;

        let wanted = self.config.local_sd_stations();
        let stations: Vec<usize> = if wanted.is_empty() {
            (0..network.n()).collect()
        } else {
            wanted
                .iter()
                .map(|id| network.station_index(id).ok_or_else(|| Error::Config(format!("local_sd_stations: unknown station {id}"))))
                .collect::<Result<_>>()?
        };
        let days: Vec<u16> = (1..=DAYS_PER_YEAR as u16).collect();
        let mut sd = Vec::new();
        for k in stations {
            sd.extend(diag::cv_local_sd(&model, k, &days)?);
        }
        diag::write_csv(&sd, csv(diag::LOCAL_SD_CSV)?)?;

        let cv = diag::coefficient_cv_table(&climate.fields)?;
        diag::write_csv(&cv, csv(diag::COEFF_CV_CSV)?)?;
        diag::write_csv(&diag::coverage_summary(&cv), csv("table1_coverage.csv")?)?;

        let mut m = self.manifest("diagnose", &[NETWORK_CSV, CLIMATE_JSON, WEATHERCOV_JSON, NUGGET_JSON, SIMULATION_JSON], Some(sim.seed))?;
        for f in fs::read_dir(&dir)? {
            let f = f?;
            let name = format!("{DIAGNOSTICS_DIR}/{}", f.file_name().to_string_lossy());
            m.outputs.insert(name.clone(), sha256_file(&self.path(&name))?);
        }
        self.write_artifact(DIAGNOSTICS_JSON, m, serde_json::json!({ "inversion_fraction": sim.inversion_fraction() }))?;
        eprintln!("diagnose: tables written to {}", dir.display());
        Ok(())
    }

    pub fn run(&self, command: &Command) -> Result<()> {
        match command {
            Command::Ingest => self.ingest(),
            Command::FitClimate => self.fit_climate(),
            Command::FitCov => self.fit_cov(),
            Command::FitNugget => self.fit_nugget(),
            Command::FitBaseline => self.fit_baseline(),
            Command::Simulate { seed } => self.simulate(*seed),
            Command::Diagnose => self.diagnose(),
            Command::All { seed } => {
                let seed = match seed {
                    Some(s) => *s,
                    None => self.config.seed()?.ok_or_else(|| Error::Config("all needs --seed or a seed key".into()))?,
                };
                self.ingest()?;
                self.fit_climate()?;
                self.fit_cov()?;
                self.fit_nugget()?;
                self.fit_baseline()?;
                self.simulate(seed)?;
                self.diagnose()
            }
        }
    }
}

#[derive(Serialize)]
struct PairRow {
    model: &'static str,
    a: usize,
    b: usize,
    kind: PairKind,
    empirical: f64,
    simulated: f64,
}

fn labelled(model: &'static str, rows: Vec<PairCorrelation>) -> Vec<PairRow> {
    rows.into_iter()
        .map(|r| PairRow {
            model,
            a: r.a,
            b: r.b,
            kind: r.kind,
            empirical: r.empirical,
            simulated: r.simulated,
        })
        .collect()
}

/// Parses arguments, loads the config and runs one command.
pub fn execute(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::defaults(),
    };
    config.apply_overrides(&cli.overrides)?;
    let run = Run::new(config, cli.strict);
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(|| run.run(&cli.command)),
        None => run.run(&cli.command),
    }
}

pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tempfield {}: {e}", cli.command.name());
            ExitCode::FAILURE
        }
    }
}
