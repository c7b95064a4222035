//! CSV ingest with line-numbered diagnostics, and readers/writers for every
//! pipeline artifact. Floats are written in shortest round-trip form.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use csv::StringRecord;
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::causal::{AdjustedPanel, Coefficient, DidEstimate, Panel, TargetTransform};
use crate::error::{Error, Result};
use crate::metrics::{ScoreReport, Scores};
use crate::probmodel::ForecastDistribution;
use crate::spatial::{Region, RegionSet, SpatialMatrix};
use crate::synth::GroundTruth;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

fn f(v: f64) -> String {
    format!("{v:?}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

struct Table {
    path: PathBuf,
    headers: StringRecord,
    reader: csv::Reader<File>,
}

impl Table {
    fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            reader,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: self.path.clone(),
                column: name.to_string(),
            })
    }

    /// Records with their 1-based file line.
    fn records(&mut self) -> Result<Vec<(u64, StringRecord)>> {
        let mut out = Vec::new();
        for rec in self.reader.records() {
            let rec = rec.map_err(|e| csv_error(&self.path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            out.push((line, rec));
        }
        Ok(out)
    }
}

fn parse_err(path: &Path, line: u64, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn get<'r>(rec: &'r StringRecord, idx: usize, path: &Path, line: u64) -> Result<&'r str> {
    rec.get(idx)
        .ok_or_else(|| parse_err(path, line, format!("missing field {}", idx + 1)))
}

fn number(rec: &StringRecord, idx: usize, name: &str, path: &Path, line: u64) -> Result<f64> {
    let s = get(rec, idx, path, line)?;
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(path, line, format!("column '{name}': '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("column '{name}': non-finite value '{s}'")));
    }
    Ok(v)
}

fn integer<T: std::str::FromStr>(rec: &StringRecord, idx: usize, name: &str, path: &Path, line: u64) -> Result<T> {
    let s = get(rec, idx, path, line)?;
    s.parse()
        .map_err(|_| parse_err(path, line, format!("column '{name}': '{s}' is not an integer")))
}

fn date(rec: &StringRecord, idx: usize, path: &Path, line: u64) -> Result<NaiveDate> {
    let s = get(rec, idx, path, line)?;
    NaiveDate::parse_from_str(s, DATE_FORMAT)
        .map_err(|_| parse_err(path, line, format!("'{s}' is not a YYYY-MM-DD date")))
}

fn flag(rec: &StringRecord, idx: usize, path: &Path, line: u64) -> Result<bool> {
    match get(rec, idx, path, line)?.to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        s => Err(parse_err(path, line, format!("treated flag '{s}' is not 0/1"))),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Regions table: `region_id,lat,lon,treated`.
pub fn read_regions(path: &Path) -> Result<(RegionSet, Vec<bool>)> {
    let mut t = Table::open(path)?;
    let (ci, cl, cn, ct) = (t.column("region_id")?, t.column("lat")?, t.column("lon")?, t.column("treated")?);
    let mut regions = Vec::new();
    let mut treated = Vec::new();
    let mut seen = HashSet::new();
    for (line, rec) in t.records()? {
        let id = get(&rec, ci, path, line)?.to_string();
        if id.is_empty() {
            return Err(parse_err(path, line, "empty region_id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(parse_err(path, line, format!("duplicate region_id '{id}'")));
        }
        let lat = number(&rec, cl, "lat", path, line)?;
        let lon = number(&rec, cn, "lon", path, line)?;
        treated.push(flag(&rec, ct, path, line)?);
        regions.push(Region::new(id, lat, lon));
    }
    let set = RegionSet::new(regions).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    Ok((set, treated))
}

pub fn write_regions(path: &Path, regions: &RegionSet, treated: &[bool]) -> Result<()> {
    write_rows(
        path,
        &["region_id", "lat", "lon", "treated"],
        regions.regions().iter().zip(treated).map(|(r, t)| {
            vec![
                r.id.clone(),
                f(r.location.lat),
                f(r.location.lon),
                u8::from(*t).to_string(),
            ]
        }),
    )
}

/// Panel values aligned to a region set, before treatment flags are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    pub times: Vec<NaiveDate>,
    pub y: DMatrix<f64>,
    pub covariate_names: Vec<String>,
    pub covariates: Vec<DMatrix<f64>>,
}

impl PanelData {
    pub fn into_panel(self, regions: &RegionSet, treated: Vec<bool>, post: Vec<bool>) -> Result<Panel> {
        Panel::new(
            regions.ids(),
            self.times,
            self.y,
            self.covariate_names,
            self.covariates,
            treated,
            post,
        )
    }
}

/// Long panel: `region_id,date,y,<covariates...>`, one row per region and
/// date. Every region needs the same evenly spaced dates.
pub fn read_panel(path: &Path, regions: &RegionSet, covariates: Option<&[String]>) -> Result<PanelData> {
    let mut t = Table::open(path)?;
    let (ci, cd, cy) = (t.column("region_id")?, t.column("date")?, t.column("y")?);
    let names: Vec<String> = match covariates {
        Some(c) => c.to_vec(),
        None => t
            .headers
            .iter()
            .filter(|h| !["region_id", "date", "y"].contains(h))
            .map(String::from)
            .collect(),
    };
    let cov_idx = names.iter().map(|n| t.column(n)).collect::<Result<Vec<_>>>()?;

    let n = regions.len();
    let mut rows: Vec<Vec<(NaiveDate, f64, Vec<f64>)>> = vec![Vec::new(); n];
    let mut seen = HashSet::new();
    for (line, rec) in t.records()? {
        let id = get(&rec, ci, path, line)?;
        let i = regions.index_of(id).ok_or_else(|| Error::MissingRegion {
            path: path.to_path_buf(),
            line,
            region: id.to_string(),
        })?;
        let d = date(&rec, cd, path, line)?;
        if !seen.insert((i, d)) {
            return Err(Error::DuplicateKey {
                path: path.to_path_buf(),
                line,
                region: id.to_string(),
                date: d.to_string(),
            });
        }
        if rows[i].last().is_some_and(|(prev, _, _)| *prev > d) {
            return Err(Error::NonMonotoneDates {
                path: path.to_path_buf(),
                line,
                region: id.to_string(),
                date: d.to_string(),
            });
        }
        let y = number(&rec, cy, "y", path, line)?;
        let c = cov_idx
            .iter()
            .zip(&names)
            .map(|(&k, name)| number(&rec, k, name, path, line))
            .collect::<Result<Vec<_>>>()?;
        rows[i].push((d, y, c));
    }

    let ids = regions.ids();
    for (i, r) in rows.iter().enumerate() {
        if r.is_empty() {
            return Err(Error::Gap {
                path: path.to_path_buf(),
                message: format!("region '{}' has no rows", ids[i]),
            });
        }
    }
    let times: Vec<NaiveDate> = rows[0].iter().map(|r| r.0).collect();
    if times.len() >= 2 {
        let step = (times[1] - times[0]).num_days();
        if let Some(w) = times.windows(2).find(|w| (w[1] - w[0]).num_days() != step) {
            return Err(Error::Gap {
                path: path.to_path_buf(),
                message: format!(
                    "region '{}' jumps from {} to {} (expected a {step}-day step)",
                    ids[0], w[0], w[1]
                ),
            });
        }
    }
    for (i, r) in rows.iter().enumerate().skip(1) {
        let mismatch = (0..times.len().max(r.len())).find(|&k| r.get(k).map(|x| x.0) != times.get(k).copied());
        if let Some(k) = mismatch {
            let what = match (times.get(k), r.get(k)) {
                (Some(d), _) => format!("is missing {d}"),
                (None, Some(x)) => format!("has extra date {}", x.0),
                (None, None) => unreachable!(),
            };
            return Err(Error::Gap {
                path: path.to_path_buf(),
                message: format!("region '{}' {what} relative to region '{}'", ids[i], ids[0]),
            });
        }
    }
    let tn = times.len();
    let y = DMatrix::from_fn(n, tn, |i, k| rows[i][k].1);
    let covs = (0..names.len())
        .map(|c| DMatrix::from_fn(n, tn, |i, k| rows[i][k].2[c]))
        .collect();
    Ok(PanelData {
        times,
        y,
        covariate_names: names,
        covariates: covs,
    })
}

pub fn write_panel(path: &Path, panel: &Panel) -> Result<()> {
    let mut header = vec!["region_id", "date", "y"];
    header.extend(panel.covariate_names().iter().map(String::as_str));
    let rows = (0..panel.n_regions()).flat_map(|i| {
        (0..panel.n_times()).map(move |t| {
            let mut r = vec![
                panel.region_ids()[i].clone(),
                panel.times()[t].format(DATE_FORMAT).to_string(),
                f(panel.y()[(i, t)]),
            ];
            r.extend(panel.covariates().iter().map(|c| f(c[(i, t)])));
            r
        })
    });
    write_rows(path, &header, rows)
}

/// Square matrix with a `region_id` column and one column per region.
pub fn write_spatial_matrix(path: &Path, s: &SpatialMatrix, ids: &[String]) -> Result<()> {
    let mut header = vec!["region_id"];
    header.extend(ids.iter().map(String::as_str));
    write_rows(
        path,
        &header,
        ids.iter().enumerate().map(|(i, id)| {
            std::iter::once(id.clone())
                .chain((0..ids.len()).map(|j| f(s.get(i, j))))
                .collect::<Vec<_>>()
        }),
    )
}

pub fn read_spatial_matrix(path: &Path, ids: &[String], alpha: f64) -> Result<SpatialMatrix> {
    let mut t = Table::open(path)?;
    let cols = ids.iter().map(|id| t.column(id)).collect::<Result<Vec<_>>>()?;
    let ci = t.column("region_id")?;
    let n = ids.len();
    let mut w = DMatrix::zeros(n, n);
    let mut filled = vec![false; n];
    for (line, rec) in t.records()? {
        let id = get(&rec, ci, path, line)?;
        let i = ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::MissingRegion { path: path.to_path_buf(), line, region: id.to_string() })?;
        for (j, &c) in cols.iter().enumerate() {
            w[(i, j)] = number(&rec, c, &ids[j], path, line)?;
        }
        filled[i] = true;
    }
    if let Some(i) = filled.iter().position(|x| !x) {
        return Err(Error::Alignment(format!("{}: no row for region '{}'", path.display(), ids[i])));
    }
    SpatialMatrix::from_weights(w, alpha)
}

const SIGMA2_ROW: &str = "residual_variance";
const NOBS_ROW: &str = "n_obs";

/// `coefficient,estimate,std_error`, followed by the residual variance and
/// the observation count (no standard error).
pub fn write_did_estimate(path: &Path, est: &DidEstimate) -> Result<()> {
    let mut rows: Vec<[String; 3]> = est
        .coefficients()
        .into_iter()
        .map(|c| [c.name, f(c.estimate), c.std_error.map(f).unwrap_or_default()])
        .collect();
    rows.push([SIGMA2_ROW.into(), f(est.residual_variance), String::new()]);
    rows.push([NOBS_ROW.into(), est.n_obs.to_string(), String::new()]);
    write_rows(path, &["coefficient", "estimate", "std_error"], rows)
}

pub fn read_did_estimate(path: &Path) -> Result<DidEstimate> {
    let mut t = Table::open(path)?;
    let (cc, ce, cs) = (t.column("coefficient")?, t.column("estimate")?, t.column("std_error")?);
    let mut coefs = Vec::new();
    let mut sigma2 = None;
    let mut n_obs = None;
    for (line, rec) in t.records()? {
        let name = get(&rec, cc, path, line)?.to_string();
        match name.as_str() {
            SIGMA2_ROW => sigma2 = Some(number(&rec, ce, "estimate", path, line)?),
            NOBS_ROW => n_obs = Some(integer(&rec, ce, "estimate", path, line)?),
            _ => {
                let estimate = number(&rec, ce, "estimate", path, line)?;
                let std_error = match get(&rec, cs, path, line)? {
                    "" => None,
                    _ => Some(number(&rec, cs, "std_error", path, line)?),
                };
                coefs.push(Coefficient { name, estimate, std_error });
            }
        }
    }
    let missing = |what: &str| Error::InvalidInput(format!("{}: missing '{what}' row", path.display()));
    DidEstimate::from_coefficients(
        &coefs,
        sigma2.ok_or_else(|| missing(SIGMA2_ROW))?,
        n_obs.ok_or_else(|| missing(NOBS_ROW))?,
    )
}

/// `region_id,log1p,mean,std`.
pub fn write_scaler(path: &Path, ids: &[String], tr: &TargetTransform) -> Result<()> {
    write_rows(
        path,
        &["region_id", "log1p", "mean", "std"],
        ids.iter().enumerate().map(|(i, id)| {
            vec![id.clone(), tr.log1p.to_string(), f(tr.mean[i]), f(tr.std[i])]
        }),
    )
}

pub fn read_scaler(path: &Path, ids: &[String]) -> Result<TargetTransform> {
    let mut t = Table::open(path)?;
    let (ci, cl, cm, cs) = (t.column("region_id")?, t.column("log1p")?, t.column("mean")?, t.column("std")?);
    let mut tr = TargetTransform::identity(ids.len());
    let mut seen = vec![false; ids.len()];
    for (line, rec) in t.records()? {
        let id = get(&rec, ci, path, line)?;
        let i = ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::MissingRegion { path: path.to_path_buf(), line, region: id.to_string() })?;
        tr.log1p = get(&rec, cl, path, line)?
            .parse()
            .map_err(|_| parse_err(path, line, "log1p must be true/false".into()))?;
        tr.mean[i] = number(&rec, cm, "mean", path, line)?;
        tr.std[i] = number(&rec, cs, "std", path, line)?;
        seen[i] = true;
    }
    if let Some(i) = seen.iter().position(|x| !x) {
        return Err(Error::Alignment(format!("{}: no row for region '{}'", path.display(), ids[i])));
    }
    Ok(tr)
}

/// Working-scale targets with their adjusted versions:
/// `region_id,date,y,y_tilde,z`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedTable {
    pub times: Vec<NaiveDate>,
    pub y: DMatrix<f64>,
    pub adjusted: AdjustedPanel,
}

pub fn write_adjusted_panel(path: &Path, ids: &[String], table: &AdjustedTable) -> Result<()> {
    let a = &table.adjusted;
    write_rows(
        path,
        &["region_id", "date", "y", "y_tilde", "z"],
        (0..ids.len()).flat_map(|i| {
            (0..table.times.len()).map(move |t| {
                vec![
                    ids[i].clone(),
                    table.times[t].format(DATE_FORMAT).to_string(),
                    f(table.y[(i, t)]),
                    f(a.y_tilde[(i, t)]),
                    f(a.z[(i, t)]),
                ]
            })
        }),
    )
}

pub fn read_adjusted_panel(path: &Path, ids: &[String]) -> Result<AdjustedTable> {
    let mut t = Table::open(path)?;
    let (ci, cd) = (t.column("region_id")?, t.column("date")?);
    let (cy, ct, cz) = (t.column("y")?, t.column("y_tilde")?, t.column("z")?);
    let mut per: Vec<Vec<(NaiveDate, [f64; 3])>> = vec![Vec::new(); ids.len()];
    for (line, rec) in t.records()? {
        let id = get(&rec, ci, path, line)?;
        let i = ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::MissingRegion { path: path.to_path_buf(), line, region: id.to_string() })?;
        let d = date(&rec, cd, path, line)?;
        let vals = [
            number(&rec, cy, "y", path, line)?,
            number(&rec, ct, "y_tilde", path, line)?,
            number(&rec, cz, "z", path, line)?,
        ];
        per[i].push((d, vals));
    }
    let times: Vec<NaiveDate> = per[0].iter().map(|r| r.0).collect();
    for (i, r) in per.iter().enumerate() {
        if r.iter().map(|x| x.0).ne(times.iter().copied()) || r.is_empty() {
            return Err(Error::Alignment(format!(
                "{}: dates of region '{}' do not match region '{}'",
                path.display(),
                ids[i],
                ids[0]
            )));
        }
    }
    let (n, tn) = (ids.len(), times.len());
    let col = |c: usize| DMatrix::from_fn(n, tn, |i, k| per[i][k].1[c]);
    Ok(AdjustedTable {
        times,
        y: col(0),
        adjusted: AdjustedPanel {
            y_tilde: col(1),
            z: col(2),
        },
    })
}

/// `region_id,date,horizon,sample,value` with 1-based horizon.
pub fn write_forecast_samples(path: &Path, fc: &ForecastDistribution, dates: &[NaiveDate]) -> Result<()> {
    if dates.len() != fc.horizon() {
        return Err(Error::DimensionMismatch {
            what: "forecast dates",
            expected: fc.horizon(),
            actual: dates.len(),
        });
    }
    let ids = fc.region_ids();
    write_rows(
        path,
        &["region_id", "date", "horizon", "sample", "value"],
        (0..fc.n_regions()).flat_map(|i| {
            (0..fc.horizon()).flat_map(move |t| {
                fc.cell(i, t).iter().enumerate().map(move |(k, v)| {
                    vec![
                        ids[i].clone(),
                        dates[t].format(DATE_FORMAT).to_string(),
                        (t + 1).to_string(),
                        k.to_string(),
                        f(*v),
                    ]
                })
            })
        }),
    )
}

pub fn read_forecast_samples(path: &Path) -> Result<(ForecastDistribution, Vec<NaiveDate>)> {
    let mut t = Table::open(path)?;
    let (ci, cd, ch, cs, cv) = (
        t.column("region_id")?,
        t.column("date")?,
        t.column("horizon")?,
        t.column("sample")?,
        t.column("value")?,
    );
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize, usize), f64> = HashMap::new();
    let mut dates: HashMap<usize, NaiveDate> = HashMap::new();
    let (mut m, mut k_max) = (0usize, 0usize);
    for (line, rec) in t.records()? {
        let id = get(&rec, ci, path, line)?.to_string();
        let i = *index.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            order.len() - 1
        });
        let h: usize = integer(&rec, ch, "horizon", path, line)?;
        if h == 0 {
            return Err(parse_err(path, line, "horizon is 1-based".into()));
        }
        let k: usize = integer(&rec, cs, "sample", path, line)?;
        let d = date(&rec, cd, path, line)?;
        if *dates.entry(h).or_insert(d) != d {
            return Err(parse_err(path, line, format!("horizon {h} has two dates")));
        }
        if cells.insert((i, h - 1, k), number(&rec, cv, "value", path, line)?).is_some() {
            return Err(parse_err(path, line, format!("duplicate cell ({}, {h}, {k})", order[i])));
        }
        m = m.max(h);
        k_max = k_max.max(k + 1);
    }
    let mut samples = vec![vec![Vec::with_capacity(k_max); m]; order.len()];
    for (i, region) in samples.iter_mut().enumerate() {
        for (h, cell) in region.iter_mut().enumerate() {
            for k in 0..k_max {
                let v = cells.get(&(i, h, k)).ok_or_else(|| {
                    Error::Alignment(format!(
                        "{}: missing sample {k} for region '{}' at horizon {}",
                        path.display(),
                        order[i],
                        h + 1
                    ))
                })?;
                cell.push(*v);
            }
        }
    }
    let dates = (1..=m)
        .map(|h| dates.get(&h).copied())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Alignment(format!("{}: horizon steps are not contiguous", path.display())))?;
    Ok((ForecastDistribution::from_samples(order, samples)?, dates))
}

fn score_rows(s: &Scores) -> impl Iterator<Item = [String; 3]> + '_ {
    s.rows().into_iter().map(|(metric, level, value)| {
        [metric.to_string(), level.map(f).unwrap_or_default(), f(value)]
    })
}

/// `metric,level,value`.
pub fn write_scores(path: &Path, s: &Scores) -> Result<()> {
    write_rows(path, &["metric", "level", "value"], score_rows(s))
}

/// `region_id,metric,level,value`.
pub fn write_scores_by_region(path: &Path, report: &ScoreReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .per_region
        .iter()
        .flat_map(|(id, s)| score_rows(s).map(move |r| std::iter::once(id.clone()).chain(r).collect()))
        .collect();
    write_rows(path, &["region_id", "metric", "level", "value"], rows)
}

/// Long format `model,horizon,metric,value`; `metric` folds in the level,
/// e.g. `wql@0.5`.
pub fn write_scores_long(path: &Path, model: &str, by_horizon: &[Scores]) -> Result<()> {
    let rows: Vec<[String; 4]> = by_horizon
        .iter()
        .enumerate()
        .flat_map(|(h, s)| {
            s.rows().into_iter().map(move |(metric, level, value)| {
                let name = match level {
                    Some(l) => format!("{metric}@{l:?}"),
                    None => metric.to_string(),
                };
                [model.to_string(), (h + 1).to_string(), name, f(value)]
            })
        })
        .collect();
    write_rows(path, &["model", "horizon", "metric", "value"], rows)
}

/// `epoch,loss` with 1-based epochs.
pub fn write_train_loss(path: &Path, trace: &[f64]) -> Result<()> {
    write_rows(
        path,
        &["epoch", "loss"],
        trace.iter().enumerate().map(|(e, l)| [(e + 1).to_string(), f(*l)]),
    )
}

/// `coefficient,value`.
pub fn write_ground_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut rows: Vec<[String; 2]> = truth.coefficients().into_iter().map(|(k, v)| [k, f(v)]).collect();
    rows.push(["noise_sigma".into(), f(truth.noise_sigma)]);
    write_rows(path, &["coefficient", "value"], rows)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
