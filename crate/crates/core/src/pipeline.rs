//! End-to-end fitting: climate, weather covariance, nuggets, and simulation
//! at the stations.

use serde::{Deserialize, Serialize};

use crate::baseline::BivariateMaternParams;
use crate::climate::{fit_local_climate, fit_stations, ClimateModel};
use crate::error::Result;
use crate::geodata::StationNetwork;
use crate::nugget::{fit_nugget_fields, LocalVariances, NuggetField};
use crate::simulator::{
    simulate_trajectory, CachedWeather, SimulationGrid, StationaryWeather, SimulationOutput, Timeline, TrajectorySpec,
};
use crate::weathercov::{
    default_temporal_candidates, select_spatial_bandwidth, select_temporal_bandwidth, temporal_cv_error, KernelSpec,
    ResidualField, SeasonalCovModel, StationCovCache,
};

/// Bandwidth choices; `None` selects automatically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovOptions {
    pub spatial_lambda: Option<f64>,
    pub temporal_lambda: Option<f64>,
    pub temporal_candidates: Vec<f64>,
}

impl Default for CovOptions {
    fn default() -> Self {
        CovOptions {
            spatial_lambda: None,
            temporal_lambda: None,
            temporal_candidates: default_temporal_candidates(),
        }
    }
}

/// How the bandwidths were chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub kernel: KernelSpec,
    /// 5% inter-site distance quantile, when the spatial bandwidth was automatic.
    pub quantile_distance: Option<f64>,
    /// `(candidate, cv error)` when the temporal bandwidth was automatic.
    pub temporal_cv: Vec<(f64, f64)>,
}

pub struct WeatherFit {
    pub model: SeasonalCovModel,
    pub variances: LocalVariances,
    pub report: BandwidthReport,
}

/// Selects bandwidths and builds the smoothed covariance model from residuals.
pub fn fit_weather(residuals: ResidualField, opts: &CovOptions) -> Result<WeatherFit> {
    let variances = LocalVariances::compute(&residuals);
    let (spatial, quantile_distance) = match opts.spatial_lambda {
        Some(l) => (l, None),
        None => {
            let b = select_spatial_bandwidth(&residuals.xy)?;
            (b.lambda, Some(b.quantile_distance))
        }
    };
    let (temporal, temporal_cv) = match opts.temporal_lambda {
        Some(l) => (l, Vec::new()),
        None => {
            let l = select_temporal_bandwidth(&variances, &opts.temporal_candidates)?;
            let cv = opts
                .temporal_candidates
                .iter()
                .map(|&c| (c, temporal_cv_error(&variances, c)))
                .collect();
            (l, cv)
        }
    };
    let kernel = KernelSpec::new(spatial, temporal)?;
    Ok(WeatherFit {
        model: SeasonalCovModel::new(residuals, kernel)?,
        variances,
        report: BandwidthReport {
            kernel,
            quantile_distance,
            temporal_cv,
        },
    })
}

/// Every fitted component for one network.
pub struct FittedModel {
    pub climate: ClimateModel,
    pub weather: WeatherFit,
    pub cache: StationCovCache,
    pub nugget: [NuggetField; 2],
}

pub fn fit_model(network: &StationNetwork, opts: &CovOptions) -> Result<FittedModel> {
    let climate = fit_local_climate(network)?;
    let residuals = ResidualField::from_climate(network, &climate)?;
    let weather = fit_weather(residuals, opts)?;
    let ids: Vec<String> = network.stations.iter().map(|s| s.id.clone()).collect();
    let cache = StationCovCache::build(&weather.model, &ids)?;
    let nugget = fit_nugget_fields(&network.coords(), &cache, &weather.variances)?;
    Ok(FittedModel {
        climate,
        weather,
        cache,
        nugget,
    })
}

impl FittedModel {
    /// A trajectory at the stations over the fitting window.
    pub fn simulate_stations(&self, seed: u64) -> Result<SimulationOutput> {
        let grid = SimulationGrid::at_stations(&self.climate, &self.nugget)?;
        let weather = CachedWeather {
            cache: &self.cache,
            tau: grid.tau.clone(),
        };
        let spec = TrajectorySpec {
            t_start: 0,
            t_len: self.climate.t_len(),
            seed,
        };
        simulate_trajectory(&grid, &weather, Timeline::of(&self.climate), spec)
    }
}

/// A trajectory at the stations with the stationary baseline as weather
/// (its own nugget replaces the local ones).
pub fn simulate_baseline_stations(climate: &ClimateModel, params: &BivariateMaternParams, seed: u64) -> Result<SimulationOutput> {
    let xy = climate.fields.xy.clone();
    let weather = StationaryWeather::new(params, &xy)?;
    let beta = climate.stations.iter().map(|s| s.beta).collect();
    let grid = SimulationGrid::new(xy.clone(), beta, vec![[0.0; 2]; xy.len()])?;
    let spec = TrajectorySpec {
        t_start: 0,
        t_len: climate.t_len(),
        seed,
    };
    simulate_trajectory(&grid, &weather, Timeline::of(climate), spec)
}

/// Residuals from refitting the station regressions to `network`.
pub fn refit_residuals(network: &StationNetwork) -> Result<ResidualField> {
    let coefs = fit_stations(network)?;
    let doy = (0..network.t_len()).map(|t| network.calendar.day_of_year(t as i64)).collect();
    let series: Vec<[Vec<f64>; 2]> = coefs.into_iter().map(|c| c.residuals).collect();
    ResidualField::new(network.coords(), doy, &series)
}
