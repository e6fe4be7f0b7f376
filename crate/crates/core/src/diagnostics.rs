//! Validation statistics for fitted and simulated fields, emitted as tidy rows.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::baseline::SeasonFilter;
use crate::climate::{CoefficientFields, N_COEF};
use crate::error::{Error, Result};
use crate::geodata::{StationNetwork, Variable};
use crate::gpcore::SimpleKriging;
use crate::simulator::SimulationOutput;
use crate::weathercov::{ResidualField, SeasonalCovModel};

pub const MIN_ACF_OBS: usize = 100;

/// Output file names, one per diagnostic.
pub const ACF_CSV: &str = "fig2_acf.csv";
pub const PAIRWISE_CSV: &str = "fig3_pairwise_corr.csv";
pub const CORR_MAP_CSV: &str = "fig4_5_corr_map.csv";
pub const EXTREMA_CSV: &str = "fig6_extrema_qq.csv";
pub const EXCEEDANCE_CSV: &str = "fig7_exceedance.csv";
pub const LOCAL_SD_CSV: &str = "fig8_local_sd.csv";
pub const COEFF_CV_CSV: &str = "table1_coeff_cv.csv";

/// Linear-interpolation quantile of sorted data (R type 7).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_present(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Sample autocorrelation at lags `0..=max_lag` over pairwise-complete
/// observations. Lagged sums are divided by the number of observed values, not
/// the number of complete pairs, which keeps every value in [-1, 1] when there are gaps.
pub fn residual_acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let obs: Vec<f64> = series.iter().cloned().filter(|v| !v.is_nan()).collect();
    if obs.len() < MIN_ACF_OBS {
        return Err(Error::InsufficientData(format!(
            "autocorrelation needs {MIN_ACF_OBS} observations, got {}",
            obs.len()
        )));
    }
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let c0 = obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / obs.len() as f64;
    if c0 == 0.0 {
        return Err(Error::InsufficientData("constant series has no autocorrelation".into()));
    }
    Ok((0..=max_lag)
        .map(|h| {
            let (mut s, mut n) = (0.0, 0usize);
            for t in h..series.len() {
                let (a, b) = (series[t - h], series[t]);
                if !a.is_nan() && !b.is_nan() {
                    s += (a - mean) * (b - mean);
                    n += 1;
                }
            }
            if n == 0 {
                f64::NAN
            } else {
                s / obs.len() as f64 / c0
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcfRow {
    pub source: String,
    pub station: String,
    pub variable: Variable,
    pub lag: usize,
    pub acf: f64,
}

/// Autocorrelation rows for every station and variable with enough data.
pub fn acf_table(field: &ResidualField, ids: &[String], max_lag: usize, source: &str) -> Vec<AcfRow> {
    (0..field.n())
        .into_par_iter()
        .flat_map_iter(|k| {
            let series = field.station_series(k);
            Variable::BOTH
                .into_iter()
                .filter_map(|var| residual_acf(&series[var.index()], max_lag).ok().map(|acf| (var, acf)))
                .flat_map(|(var, acf)| {
                    acf.into_iter().enumerate().skip(1).map(move |(lag, acf)| AcfRow {
                        source: source.to_string(),
                        station: ids[k].clone(),
                        variable: var,
                        lag,
                        acf,
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Pearson correlation over pairwise-complete entries; `None` below three pairs or with zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a.iter().zip(b).filter(|(x, y)| !x.is_nan() && !y.is_nan()).map(|(x, y)| (*x, *y)).collect();
    if pairs.len() < 3 {
        return None;
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PairKind {
    NN,
    XX,
    NX,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCorrelation {
    pub a: usize,
    pub b: usize,
    pub kind: PairKind,
    pub empirical: f64,
    pub simulated: f64,
}

/// Series restricted to days inside the season (others set missing).
fn seasonal(series: &[f64], doy: &[u16], filter: SeasonFilter) -> Vec<f64> {
    series
        .iter()
        .zip(doy)
        .map(|(v, d)| if filter.contains(*d) { *v } else { f64::NAN })
        .collect()
}

/// The list of `(a, b, kind)` pairs compared.
pub fn correlation_pairs(n: usize, cross_site: bool) -> Vec<(usize, usize, PairKind)> {
    let mut pairs = Vec::new();
    for kind in [PairKind::NN, PairKind::XX] {
        for a in 0..n {
            for b in (a + 1)..n {
                pairs.push((a, b, kind));
            }
        }
    }
    for a in 0..n {
        if cross_site {
            for b in 0..n {
                pairs.push((a, b, PairKind::NX));
            }
        } else {
            pairs.push((a, a, PairKind::NX));
        }
    }
    pairs
}

fn kind_vars(kind: PairKind) -> (usize, usize) {
    match kind {
        PairKind::NN => (0, 0),
        PairKind::XX => (1, 1),
        PairKind::NX => (0, 1),
    }
}

/// Observed vs simulated residual correlations for station pairs within the season.
pub fn pairwise_correlation_compare(
    observed: &ResidualField,
    simulated: &ResidualField,
    filter: SeasonFilter,
    cross_site: bool,
) -> Result<Vec<PairCorrelation>> {
    if observed.n() != simulated.n() || observed.doy != simulated.doy {
        return Err(Error::InvalidArgument("observed and simulated residuals differ in shape".into()));
    }
    let obs: Vec<[Vec<f64>; 2]> = (0..observed.n())
        .map(|k| observed.station_series(k).map(|s| seasonal(&s, &observed.doy, filter)))
        .collect();
    let sim: Vec<[Vec<f64>; 2]> = (0..simulated.n())
        .map(|k| simulated.station_series(k).map(|s| seasonal(&s, &simulated.doy, filter)))
        .collect();
    for (o, s) in obs.iter().zip(&sim) {
        for i in 0..2 {
            if o[i].iter().zip(&s[i]).any(|(a, b)| a.is_nan() != b.is_nan()) {
                return Err(Error::InvalidArgument("observed and simulated missing masks differ".into()));
            }
        }
    }
    Ok(correlation_pairs(observed.n(), cross_site)
        .into_par_iter()
        .filter_map(|(a, b, kind)| {
            let (i, j) = kind_vars(kind);
            Some(PairCorrelation {
                a,
                b,
                kind,
                empirical: pearson(&obs[a][i], &obs[b][j])?,
                simulated: pearson(&sim[a][i], &sim[b][j])?,
            })
        })
        .collect())
}

/// Root mean square of `value(row) - truth(row)` for rows of one kind.
pub fn rms_error<F, G>(rows: &[PairCorrelation], kind: PairKind, value: F, truth: G) -> f64
where
    F: Fn(&PairCorrelation) -> f64,
    G: Fn(&PairCorrelation) -> f64,
{
    let errs: Vec<f64> = rows.iter().filter(|r| r.kind == kind).map(|r| (value(r) - truth(r)).powi(2)).collect();
    if errs.is_empty() {
        return f64::NAN;
    }
    (errs.iter().sum::<f64>() / errs.len() as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrMapRow {
    pub g: usize,
    pub x_km: f64,
    pub y_km: f64,
    pub day: u16,
    pub nn: f64,
    pub xx: f64,
    pub nx: f64,
}

/// Model correlations between `anchor` and each grid point on day `d`.
pub fn spatial_correlation_map(model: &SeasonalCovModel, anchor: [f64; 2], grid: &[[f64; 2]], d: u16) -> Result<Vec<CorrMapRow>> {
    let mut locs = vec![anchor];
    locs.extend_from_slice(grid);
    let c = model.evaluator(&locs)?.block_matrix(d)?;
    let var = |p: usize, i: usize| c[(2 * p + i, 2 * p + i)];
    for p in 0..locs.len() {
        for i in 0..2 {
            if !(var(p, i) > 0.0) {
                return Err(Error::InsufficientData(format!("zero variance at map point {p}")));
            }
        }
    }
    let corr = |i: usize, j: usize, p: usize| (c[(i, 2 * p + j)] / (var(0, i) * var(p, j)).sqrt()).clamp(-1.0, 1.0);
    Ok(grid
        .iter()
        .enumerate()
        .map(|(g, xy)| CorrMapRow {
            g,
            x_km: xy[0],
            y_km: xy[1],
            day: d,
            nn: corr(0, 0, g + 1),
            xx: corr(1, 1, g + 1),
            nx: corr(0, 1, g + 1),
        })
        .collect())
}

/// Temperatures (or residuals) per location, location-major: `z[i][k * t_len + t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldTable {
    pub n: usize,
    pub t_len: usize,
    pub z: [Vec<f64>; 2],
}

impl FieldTable {
    pub fn from_network(network: &StationNetwork) -> Self {
        let z = [0, 1].map(|i| network.series.iter().flat_map(|s| s.values[i].iter().cloned()).collect());
        FieldTable {
            n: network.n(),
            t_len: network.t_len(),
            z,
        }
    }

    pub fn from_simulation(sim: &SimulationOutput) -> Self {
        FieldTable {
            n: sim.locations.len(),
            t_len: sim.t_len,
            z: sim.z.clone(),
        }
    }

    pub fn from_residuals(field: &ResidualField) -> Self {
        let series: Vec<[Vec<f64>; 2]> = (0..field.n()).map(|k| field.station_series(k)).collect();
        let z = [0, 1].map(|i| series.iter().flat_map(|s| s[i].iter().cloned()).collect());
        FieldTable {
            n: field.n(),
            t_len: field.t_len(),
            z,
        }
    }

    pub fn get(&self, i: usize, k: usize, t: usize) -> f64 {
        self.z[i][k * self.t_len + t]
    }

    pub fn series(&self, i: usize, k: usize) -> &[f64] {
        &self.z[i][k * self.t_len..(k + 1) * self.t_len]
    }

    fn same_shape(&self, other: &FieldTable) -> bool {
        self.n == other.n && self.t_len == other.t_len
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Extremum {
    MinOfMin,
    MaxOfMax,
    MaxOfMin,
    MinOfMax,
}

impl Extremum {
    pub const ALL: [Extremum; 4] = [Extremum::MinOfMin, Extremum::MaxOfMax, Extremum::MaxOfMin, Extremum::MinOfMax];
}

/// Daily domain extremum series; days with no data are skipped.
pub fn daily_extrema(table: &FieldTable, which: Extremum) -> Vec<f64> {
    let (var, take_max) = match which {
        Extremum::MinOfMin => (0, false),
        Extremum::MaxOfMin => (0, true),
        Extremum::MaxOfMax => (1, true),
        Extremum::MinOfMax => (1, false),
    };
    (0..table.t_len)
        .filter_map(|t| {
            let vals = (0..table.n).map(|k| table.get(var, k, t)).filter(|v| !v.is_nan());
            if take_max {
                vals.reduce(f64::max)
            } else {
                vals.reduce(f64::min)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QqRow {
    pub statistic: Extremum,
    pub percentile: u32,
    pub observed: f64,
    pub simulated: f64,
}

/// Matched percentiles (1..=99) of the four daily domain extrema.
pub fn extrema_qq(observed: &FieldTable, simulated: &FieldTable) -> Result<Vec<QqRow>> {
    if !observed.same_shape(simulated) {
        return Err(Error::InvalidArgument("observed and simulated tables differ in shape".into()));
    }
    let mut rows = Vec::new();
    for which in Extremum::ALL {
        let o = sorted_present(daily_extrema(observed, which).into_iter());
        let s = sorted_present(daily_extrema(simulated, which).into_iter());
        if o.is_empty() || s.is_empty() {
            continue;
        }
        for p in 1..=99u32 {
            let q = p as f64 / 100.0;
            rows.push(QqRow {
                statistic: which,
                percentile: p,
                observed: quantile_type7(&o, q),
                simulated: quantile_type7(&s, q),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Tail {
    Hot,
    Cold,
}

/// Number of days on which exactly `c` stations were in the tail, for `c = 0..=n`.
pub fn exceedance_counts(table: &FieldTable, var: usize, tail: Tail) -> Vec<usize> {
    let thresholds: Vec<Option<f64>> = (0..table.n)
        .map(|k| {
            let s = sorted_present(table.series(var, k).iter().cloned());
            (!s.is_empty()).then(|| quantile_type7(&s, if tail == Tail::Hot { 0.9 } else { 0.1 }))
        })
        .collect();
    let mut hist = vec![0usize; table.n + 1];
    for t in 0..table.t_len {
        let mut count = 0;
        for (k, th) in thresholds.iter().enumerate() {
            let v = table.get(var, k, t);
            if let Some(th) = th {
                if !v.is_nan() && ((tail == Tail::Hot && v > *th) || (tail == Tail::Cold && v < *th)) {
                    count += 1;
                }
            }
        }
        hist[count] += 1;
    }
    hist
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExceedanceRow {
    pub variable: Variable,
    pub tail: Tail,
    pub stations: usize,
    pub observed_log_freq: Option<f64>,
    pub simulated_log_freq: Option<f64>,
}

/// Log day-counts per number of stations whose weather residual is beyond
/// its local 90% (hot) or 10% (cold) quantile; counts never reached in
/// either input are omitted.
pub fn exceedance_log_frequency(observed: &FieldTable, simulated: &FieldTable) -> Result<Vec<ExceedanceRow>> {
    if observed.n != simulated.n {
        return Err(Error::InvalidArgument("observed and simulated station counts differ".into()));
    }
    let log = |c: usize| (c > 0).then(|| (c as f64).ln());
    let mut rows = Vec::new();
    for var in Variable::BOTH {
        for tail in [Tail::Hot, Tail::Cold] {
            let o = exceedance_counts(observed, var.index(), tail);
            let s = exceedance_counts(simulated, var.index(), tail);
            for c in 0..=observed.n {
                if o[c] == 0 && s[c] == 0 {
                    continue;
                }
                rows.push(ExceedanceRow {
                    variable: var,
                    tail,
                    stations: c,
                    observed_log_freq: log(o[c]),
                    simulated_log_freq: log(s[c]),
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalSdRow {
    pub station: usize,
    pub variable: Variable,
    pub day: u16,
    pub predicted: f64,
    pub local: f64,
}

/// Local standard deviations at station `k` predicted with the station held
/// out, against the full-model estimate.
pub fn cv_local_sd(model: &SeasonalCovModel, k: usize, days: &[u16]) -> Result<Vec<LocalSdRow>> {
    if k >= model.n() {
        return Err(Error::InvalidArgument(format!("station {k} out of range")));
    }
    let x = model.residuals.xy[k];
    let held = SeasonalCovModel::new(model.residuals.without_station(k)?, model.kernel)?;
    let full_ev = model.evaluator(&[x])?;
    let held_ev = held.evaluator(&[x])?;
    let mut rows = Vec::new();
    for &d in days {
        let f = full_ev.block_matrix(d)?;
        let h = held_ev.block_matrix(d)?;
        for var in Variable::BOTH {
            let i = var.index();
            rows.push(LocalSdRow {
                station: k,
                variable: var,
                day: d,
                predicted: h[(i, i)].max(0.0).sqrt(),
                local: f[(i, i)].max(0.0).sqrt(),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoeffCvRow {
    pub station: usize,
    pub variable: Variable,
    pub k: usize,
    pub kriged: f64,
    pub sd: f64,
    pub local: f64,
    pub covered_95: bool,
}

/// Leave-one-station-out kriging of every coefficient, reusing the full-fit
/// GP hyperparameters.
pub fn coefficient_cv_table(fields: &CoefficientFields) -> Result<Vec<CoeffCvRow>> {
    let n = fields.xy.len();
    if n < 2 {
        return Err(Error::InsufficientData("leave-one-out needs two stations".into()));
    }
    let per_station: Vec<Vec<CoeffCvRow>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let xy: Vec<[f64; 2]> = fields.xy.iter().enumerate().filter(|(k, _)| *k != s).map(|(_, p)| *p).collect();
            fields
                .fields
                .iter()
                .map(|f| {
                    let vals: Vec<f64> = f.station_values.iter().enumerate().filter(|(k, _)| *k != s).map(|(_, v)| *v).collect();
                    let r = SimpleKriging::new(f.gp, &xy, &vals)?.predict(fields.xy[s]);
                    let local = f.station_values[s];
                    Ok(CoeffCvRow {
                        station: s,
                        variable: f.variable,
                        k: f.k,
                        kriged: r.mean,
                        sd: r.sd(),
                        local,
                        covered_95: (local - r.mean).abs() <= 1.96 * r.sd(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_station.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coverage {
    pub variable: Variable,
    pub k: usize,
    pub coverage: f64,
}

/// Fraction of stations covered, per (variable, coefficient).
pub fn coverage_summary(rows: &[CoeffCvRow]) -> Vec<Coverage> {
    let mut out = Vec::new();
    for var in Variable::BOTH {
        for k in 0..N_COEF {
            let sel: Vec<&CoeffCvRow> = rows.iter().filter(|r| r.variable == var && r.k == k).collect();
            if sel.is_empty() {
                continue;
            }
            let c = sel.iter().filter(|r| r.covered_95).count() as f64 / sel.len() as f64;
            out.push(Coverage { variable: var, k, coverage: c });
        }
    }
    out
}

/// Writes rows as a headed CSV.
pub fn write_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
