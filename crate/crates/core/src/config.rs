//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Unknown keys are an
//! error so typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use crate::baseline::SeasonFilter;
use crate::error::{Error, Result};
use crate::pipeline::CovOptions;
use crate::simulator::DEFAULT_MAX_LOCATIONS;
use crate::weathercov::default_temporal_candidates;

/// Every accepted key with its default (`""` means unset).
pub const KEYS: &[(&str, &str)] = &[
    ("input", ""),
    ("out_dir", "out"),
    ("window_start", ""),
    ("window_end", ""),
    ("spatial_lambda", ""),
    ("temporal_lambda", ""),
    ("temporal_candidates", ""),
    ("season_start", "152"),
    ("season_end", "243"),
    ("grid", "stations"),
    ("grid_bbox", ""),
    ("grid_resolution", "10"),
    ("max_locations", "2500"),
    ("sim_t_start", "0"),
    ("sim_t_len", ""),
    ("seed", ""),
    ("write_csv", "false"),
    ("acf_max_lag", "10"),
    ("cross_site", "false"),
    ("map_anchor", "0,0"),
    ("map_days", "15,196"),
    ("map_resolution", "10"),
    ("local_sd_stations", ""),
];

/// Where the simulation runs.
#[derive(Clone, Debug, PartialEq)]
pub enum GridChoice {
    /// Network stations, masked like the observations.
    Stations,
    /// Regular grid over `[xmin, ymin, xmax, ymax]` (km) at `resolution` km.
    Regular { bbox: [f64; 4], resolution: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn defaults() -> Self {
        Config {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::defaults();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| e.context(format!("line {}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str()).filter(|s| !s.is_empty())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))))
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: cannot parse {p:?}"))))
                    .collect()
            })
            .transpose()
    }

    /// Hex SHA-256 over the sorted `key=value` lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.values {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        hex(&h.finalize())
    }

    pub fn input(&self) -> Result<PathBuf> {
        self.raw("input").map(PathBuf::from).ok_or_else(|| Error::Config("input is required".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out_dir").unwrap_or("out"))
    }

    pub fn window(&self) -> Result<(NaiveDate, NaiveDate)> {
        let date = |key: &str| -> Result<NaiveDate> {
            let v = self.raw(key).ok_or_else(|| Error::Config(format!("{key} is required")))?;
            NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|_| Error::Config(format!("{key}: bad date {v:?}")))
        };
        Ok((date("window_start")?, date("window_end")?))
    }

    pub fn cov_options(&self) -> Result<CovOptions> {
        Ok(CovOptions {
            spatial_lambda: self.parsed("spatial_lambda")?,
            temporal_lambda: self.parsed("temporal_lambda")?,
            temporal_candidates: self.list("temporal_candidates")?.unwrap_or_else(default_temporal_candidates),
        })
    }

    pub fn season(&self) -> Result<SeasonFilter> {
        let start: u16 = self.parsed("season_start")?.unwrap_or(152);
        let end: u16 = self.parsed("season_end")?.unwrap_or(243);
        if !(1..=365).contains(&start) || !(1..=365).contains(&end) {
            return Err(Error::Config("season days must lie in 1..=365".into()));
        }
        Ok(SeasonFilter { start, end })
    }

    pub fn grid(&self) -> Result<GridChoice> {
        match self.raw("grid").unwrap_or("stations") {
            "stations" => Ok(GridChoice::Stations),
            "regular" => {
                let b = self.list("grid_bbox")?.ok_or_else(|| Error::Config("grid_bbox is required for a regular grid".into()))?;
                let bbox: [f64; 4] = b.try_into().map_err(|_| Error::Config("grid_bbox needs four numbers".into()))?;
                let resolution: f64 = self.parsed("grid_resolution")?.unwrap_or(10.0);
                if !(resolution > 0.0) || bbox[2] < bbox[0] || bbox[3] < bbox[1] {
                    return Err(Error::Config("grid_bbox/grid_resolution describe an empty grid".into()));
                }
                Ok(GridChoice::Regular { bbox, resolution })
            }
            other => Err(Error::Config(format!("grid must be stations or regular, got {other:?}"))),
        }
    }

    pub fn max_locations(&self) -> Result<usize> {
        Ok(self.parsed("max_locations")?.unwrap_or(DEFAULT_MAX_LOCATIONS))
    }

    pub fn sim_range(&self) -> Result<(i64, Option<usize>)> {
        Ok((self.parsed("sim_t_start")?.unwrap_or(0), self.parsed("sim_t_len")?))
    }

    pub fn seed(&self) -> Result<Option<u64>> {
        self.parsed("seed")
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.parsed::<bool>(key)?.unwrap_or(false))
    }

    pub fn acf_max_lag(&self) -> Result<usize> {
        Ok(self.parsed("acf_max_lag")?.unwrap_or(10))
    }

    pub fn map_anchor(&self) -> Result<[f64; 2]> {
        let v = self.list("map_anchor")?.unwrap_or(vec![0.0, 0.0]);
        v.try_into().map_err(|_| Error::Config("map_anchor needs two numbers".into()))
    }

    pub fn map_days(&self) -> Result<Vec<u16>> {
        let days = self.list("map_days")?.unwrap_or(vec![15.0, 196.0]);
        days.into_iter()
            .map(|d| {
                if d.fract() == 0.0 && (1.0..=365.0).contains(&d) {
                    Ok(d as u16)
                } else {
                    Err(Error::Config(format!("map_days: {d} is not a calendar day")))
                }
            })
            .collect()
    }

    pub fn map_resolution(&self) -> Result<f64> {
        Ok(self.parsed("map_resolution")?.unwrap_or(10.0))
    }

    /// Station ids for held-out local SD; empty means every station.
    pub fn local_sd_stations(&self) -> Vec<String> {
        self.raw("local_sd_stations")
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Points of a regular grid, row by row from the lower-left corner.
pub fn regular_grid(bbox: [f64; 4], resolution: f64) -> Vec<[f64; 2]> {
    let nx = ((bbox[2] - bbox[0]) / resolution).floor() as usize + 1;
    let ny = ((bbox[3] - bbox[1]) / resolution).floor() as usize + 1;
    let mut pts = Vec::with_capacity(nx * ny);
    for r in 0..ny {
        for c in 0..nx {
            pts.push([bbox[0] + c as f64 * resolution, bbox[1] + r as f64 * resolution]);
        }
    }
    pts
}
