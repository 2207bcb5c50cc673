//! Reading and writing of every interchange file: the covariate table,
//! observation and label files, both prediction formats, the generation
//! manifest and the score report.
//!
//! Writers emit LF line endings and render numbers with at most six
//! significant digits (see [`format_number`]). Readers accept CRLF.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data_model::{
    AggregateReport, CounterfactualRecord, CovariateTable, IndividualPrediction,
    IndividualPredictionSet, InstancePair, Metrics, ObservationRecord, Outcome,
    PopulationPrediction, Ufid,
};
use crate::error::{Error, Result};

pub const COVARIATE_FILE: &str = "x.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const LABEL_SUFFIX: &str = "_cf.csv";

pub const OBSERVATION_HEADER: &str = "sample_id,z,y";
pub const LABEL_HEADER: &str = "sample_id,y0,y1";
pub const POPULATION_HEADER: &str = "ufid,effect_size,li,ri";
pub const INDIVIDUAL_HEADER: &str = "sample_id,y0,y1";
pub const MANIFEST_HEADER: &str =
    "ufid,track,size,n_covariates,n_confounders,poly_degree,use_exp,prevalence,censoring_rate";
pub const REPORT_HEADER: &str = "group,instances,enormse,rmse,bias,coverage,cic,encis";

const CENSORED: &str = "NA";

/// Evaluation track; each one lives in its own directory under the data root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Track {
    Scaling,
    Censoring,
}

impl Track {
    pub fn dir_name(self) -> &'static str {
        match self {
            Track::Scaling => "scaling",
            Track::Censoring => "censoring",
        }
    }

    pub fn dir(self, root: &Path) -> PathBuf {
        root.join(self.dir_name())
    }
}

impl FromStr for Track {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaling" => Ok(Track::Scaling),
            "censoring" => Ok(Track::Censoring),
            _ => Err(Error::Invalid(format!(
                "unknown track {s:?} (expected scaling or censoring)"
            ))),
        }
    }
}

/// Renders a finite number with at most six significant digits, using the
/// shortest decimal that reads back to the rounded value. Very small or
/// very large magnitudes switch to exponent notation. Infinities render as
/// `inf` / `-inf`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded = round_significant(x);
    let exp = rounded.abs().log10().floor() as i32;
    if (-5..16).contains(&exp) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Rounds to six significant digits, i.e. the value [`format_number`] writes.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_ci_edge(cell: &str) -> Option<f64> {
    let lower = cell.to_ascii_lowercase();
    match lower.as_str() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => parse_finite(cell),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Line-oriented view of a CSV file with a fixed header. Fields never carry
/// quotes in these formats, so a plain comma split is exact.
struct CsvBody<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    width: usize,
}

impl<'a> CsvBody<'a> {
    fn new(path: &'a Path, text: &'a str, header: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first == header => {}
            Some((_, first)) => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("bad header {first:?}, expected {header:?}"),
                ))
            }
            None => return Err(Error::parse(path, 1, "missing header")),
        }
        Ok(CsvBody {
            path,
            lines,
            width: header.split(',').count(),
        })
    }

    fn with_header(path: &'a Path, text: &'a str) -> Result<(Self, Vec<&'a str>)> {
        let mut lines = text.lines().enumerate();
        let header: Vec<&str> = match lines.next() {
            Some((_, first)) => first.split(',').collect(),
            None => return Err(Error::parse(path, 1, "missing header")),
        };
        let width = header.len();
        Ok((CsvBody { path, lines, width }, header))
    }

    fn err(&self, line: u64, msg: impl Into<String>) -> Error {
        Error::parse(self.path, line, msg)
    }
}

impl<'a> Iterator for CsvBody<'a> {
    type Item = Result<(u64, Vec<&'a str>)>;

    fn next(&mut self) -> Option<Self::Item> {
        let (idx, line) = self.lines.next()?;
        let lineno = idx as u64 + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != self.width {
            return Some(Err(self.err(
                lineno,
                format!("expected {} fields, found {}", self.width, cells.len()),
            )));
        }
        Some(Ok((lineno, cells)))
    }
}

fn file_name(path: &Path) -> Result<&str> {
    path.file_name()
        .and_then(|s| s.to_str())
        .ok_or(Error::FileName(path.to_path_buf(), "not a file name"))
}

fn ufid_from_name(path: &Path, suffix: &str) -> Result<Ufid> {
    let name = file_name(path)?;
    let stem = name
        .strip_suffix(suffix)
        .ok_or(Error::FileName(path.to_path_buf(), "unexpected extension"))?;
    if !Ufid::is_valid(stem) {
        return Err(Error::FileName(
            path.to_path_buf(),
            "base name is not a 7-character lowercase hex ufid",
        ));
    }
    Ok(stem.parse()?)
}

pub fn observation_path(dir: &Path, ufid: &Ufid) -> PathBuf {
    dir.join(format!("{ufid}.csv"))
}

pub fn label_path(dir: &Path, ufid: &Ufid) -> PathBuf {
    dir.join(format!("{ufid}{LABEL_SUFFIX}"))
}

pub fn read_covariates(path: &Path) -> Result<CovariateTable> {
    let text = read_text(path)?;
    let (body, header) = CsvBody::with_header(path, &text)?;
    if header.first() != Some(&"sample_id") {
        return Err(Error::parse(path, 1, "first column must be sample_id"));
    }
    let feature_names: Vec<String> = header[1..].iter().map(|s| s.to_string()).collect();
    let mut sample_ids = Vec::new();
    let mut values = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in body {
        let (line, cells) = row?;
        if !seen.insert(cells[0]) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate sample_id {:?}", cells[0]),
            ));
        }
        sample_ids.push(cells[0].to_string());
        for cell in &cells[1..] {
            let v = parse_finite(cell)
                .ok_or_else(|| Error::parse(path, line, format!("non-numeric value {cell:?}")))?;
            values.push(v);
        }
    }
    CovariateTable::new(sample_ids, feature_names, values)
}

pub fn render_covariates(table: &CovariateTable) -> String {
    let mut out = String::from("sample_id");
    for name in table.feature_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, id) in table.sample_ids().iter().enumerate() {
        out.push_str(id);
        for v in table.row(i) {
            out.push(',');
            out.push_str(&format_number(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_covariates(table: &CovariateTable, path: &Path) -> Result<()> {
    fs::write(path, render_covariates(table)).map_err(|e| Error::io(path, e))
}

pub fn read_observation_file(path: &Path) -> Result<(Ufid, Vec<ObservationRecord>)> {
    let ufid = ufid_from_name(path, ".csv")?;
    let text = read_text(path)?;
    let body = CsvBody::new(path, &text, OBSERVATION_HEADER)?;
    let mut records = Vec::new();
    for row in body {
        let (line, cells) = row?;
        let treated = match cells[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("treatment z must be 0 or 1, found {other:?}"),
                ))
            }
        };
        let y = if cells[2] == CENSORED {
            Outcome::Censored
        } else {
            Outcome::Observed(parse_finite(cells[2]).ok_or_else(|| {
                Error::parse(path, line, format!("bad outcome {:?}", cells[2]))
            })?)
        };
        records.push(ObservationRecord {
            sample_id: cells[0].to_string(),
            treated,
            y,
        });
    }
    Ok((ufid, records))
}

pub fn read_label_file(path: &Path) -> Result<(Ufid, Vec<CounterfactualRecord>)> {
    let ufid = ufid_from_name(path, LABEL_SUFFIX)?;
    let text = read_text(path)?;
    let body = CsvBody::new(path, &text, LABEL_HEADER)?;
    let mut records = Vec::new();
    for row in body {
        let (line, cells) = row?;
        let value = |cell: &str, name: &str| {
            parse_finite(cell).ok_or_else(|| {
                Error::parse(
                    path,
                    line,
                    format!("{name} must be a finite number, found {cell:?}"),
                )
            })
        };
        let y0 = value(cells[1], "y0")?;
        let y1 = value(cells[2], "y1")?;
        records.push(CounterfactualRecord {
            sample_id: cells[0].to_string(),
            y0,
            y1,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInstance(ufid.to_string()));
    }
    Ok((ufid, records))
}

/// Reads `<ufid>.csv` and `<ufid>_cf.csv` from `dir` as one validated pair.
pub fn read_instance_pair(dir: &Path, ufid: &Ufid) -> Result<InstancePair> {
    let (_, observations) = read_observation_file(&observation_path(dir, ufid))?;
    let (_, labels) = read_label_file(&label_path(dir, ufid))?;
    InstancePair::new(ufid.clone(), observations, labels)
}

pub fn render_observations(records: &[ObservationRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 24);
    out.push_str(OBSERVATION_HEADER);
    out.push('\n');
    for r in records {
        let y = match r.y {
            Outcome::Observed(v) => format_number(v),
            Outcome::Censored => CENSORED.to_string(),
        };
        let _ = writeln!(out, "{},{},{}", r.sample_id, r.z(), y);
    }
    out
}

pub fn render_labels(records: &[CounterfactualRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 32);
    out.push_str(LABEL_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.sample_id,
            format_number(r.y0),
            format_number(r.y1)
        );
    }
    out
}

/// Writes `contents` unless the file already holds different bytes. An
/// identical existing file is left alone, so regenerating the same instance
/// is idempotent while a genuine ufid clash is an error.
fn write_new(path: &Path, contents: &str) -> Result<()> {
    match fs::read(path) {
        Ok(existing) if existing == contents.as_bytes() => Ok(()),
        Ok(_) => Err(Error::UfidCollision(path.to_path_buf())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            fs::write(path, contents).map_err(|e| Error::io(path, e))
        }
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Writes `<ufid>.csv` and `<ufid>_cf.csv` into an existing directory.
pub fn write_instance_pair(pair: &InstancePair, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "directory does not exist"),
        ));
    }
    let obs_path = observation_path(dir, pair.ufid());
    let label_path = label_path(dir, pair.ufid());
    let obs = render_observations(pair.observations());
    let labels = render_labels(pair.labels());
    // check both before writing either
    for (path, contents) in [(&obs_path, &obs), (&label_path, &labels)] {
        if let Ok(existing) = fs::read(path) {
            if existing != contents.as_bytes() {
                return Err(Error::UfidCollision(path.clone()));
            }
        }
    }
    write_new(&obs_path, &obs)?;
    write_new(&label_path, &labels)?;
    Ok((obs_path, label_path))
}

/// Observation files in `dir`, sorted by ufid. Label files, the covariate
/// table, the manifest and any other non-ufid name are skipped.
pub fn list_observation_files(dir: &Path) -> Result<Vec<(Ufid, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let Some(name) = path.file_name().and_then(|s| s.to_str()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix(".csv") {
            if Ufid::is_valid(stem) {
                out.push((stem.parse()?, path));
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_population_predictions(path: &Path) -> Result<Vec<PopulationPrediction>> {
    let text = read_text(path)?;
    let body = CsvBody::new(path, &text, POPULATION_HEADER)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for row in body {
        let (line, cells) = row?;
        let ufid: Ufid = cells[0]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid ufid {:?}", cells[0])))?;
        if !seen.insert(ufid.clone()) {
            return Err(Error::parse(path, line, format!("duplicate ufid {ufid}")));
        }
        let effect_size = parse_finite(cells[1]).ok_or_else(|| {
            Error::parse(path, line, format!("bad effect_size {:?}", cells[1]))
        })?;
        let li = parse_ci_edge(cells[2])
            .filter(|v| *v != f64::INFINITY)
            .ok_or_else(|| Error::parse(path, line, format!("bad li {:?}", cells[2])))?;
        let ri = parse_ci_edge(cells[3])
            .filter(|v| *v != f64::NEG_INFINITY)
            .ok_or_else(|| Error::parse(path, line, format!("bad ri {:?}", cells[3])))?;
        if li > ri {
            return Err(Error::parse(
                path,
                line,
                format!("li {li} exceeds ri {ri}"),
            ));
        }
        out.push(PopulationPrediction {
            ufid,
            effect_size,
            li,
            ri,
        });
    }
    Ok(out)
}

pub fn render_population_predictions(preds: &[PopulationPrediction]) -> String {
    let mut out = String::from(POPULATION_HEADER);
    out.push('\n');
    for p in preds {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.ufid,
            format_number(p.effect_size),
            format_number(p.li),
            format_number(p.ri)
        );
    }
    out
}

pub fn write_population_predictions(preds: &[PopulationPrediction], path: &Path) -> Result<()> {
    fs::write(path, render_population_predictions(preds)).map_err(|e| Error::io(path, e))
}

pub fn read_individual_prediction_file(path: &Path) -> Result<IndividualPredictionSet> {
    let ufid = ufid_from_name(path, ".csv")?;
    let text = read_text(path)?;
    let body = CsvBody::new(path, &text, INDIVIDUAL_HEADER)?;
    let mut seen = std::collections::HashSet::new();
    let mut rows = Vec::new();
    for row in body {
        let (line, cells) = row?;
        if !seen.insert(cells[0]) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate sample_id {:?}", cells[0]),
            ));
        }
        let value = |cell: &str, name: &str| {
            parse_finite(cell).ok_or_else(|| {
                Error::parse(
                    path,
                    line,
                    format!("{name} must be a finite number, found {cell:?}"),
                )
            })
        };
        let y0 = value(cells[1], "y0")?;
        let y1 = value(cells[2], "y1")?;
        rows.push(IndividualPrediction {
            sample_id: cells[0].to_string(),
            y0,
            y1,
        });
    }
    Ok(IndividualPredictionSet { ufid, rows })
}

/// Every `<ufid>.csv` in `dir`, sorted by ufid. Any other `.csv` name is an
/// error; non-CSV files are ignored.
pub fn read_individual_predictions(dir: &Path) -> Result<Vec<IndividualPredictionSet>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|s| s.to_str()) == Some("csv") {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .iter()
        .map(|p| read_individual_prediction_file(p))
        .collect()
}

pub fn render_individual_predictions(set: &IndividualPredictionSet) -> String {
    let mut out = String::with_capacity(set.rows.len() * 32);
    out.push_str(INDIVIDUAL_HEADER);
    out.push('\n');
    for r in &set.rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.sample_id,
            format_number(r.y0),
            format_number(r.y1)
        );
    }
    out
}

pub fn write_individual_predictions(set: &IndividualPredictionSet, dir: &Path) -> Result<PathBuf> {
    let path = observation_path(dir, &set.ufid);
    fs::write(&path, render_individual_predictions(set)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// One line of the generation manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub ufid: Ufid,
    pub track: Track,
    pub size: usize,
    pub n_covariates: usize,
    pub n_confounders: usize,
    pub poly_degree: u32,
    pub use_exp: bool,
    pub prevalence: f64,
    pub censoring_rate: f64,
}

pub fn render_manifest(rows: &[ManifestRow]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.ufid,
            r.track.dir_name(),
            r.size,
            r.n_covariates,
            r.n_confounders,
            r.poly_degree,
            r.use_exp,
            format_number(r.prevalence),
            format_number(r.censoring_rate)
        );
    }
    out
}

pub fn write_manifest(rows: &[ManifestRow], path: &Path) -> Result<()> {
    fs::write(path, render_manifest(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = read_text(path)?;
    let body = CsvBody::new(path, &text, MANIFEST_HEADER)?;
    let mut out = Vec::new();
    for row in body {
        let (line, c) = row?;
        let bad = |field: &str, cell: &str| {
            Error::parse(path, line, format!("bad {field} {cell:?}"))
        };
        let count = |i: usize, field: &str| c[i].parse::<usize>().map_err(|_| bad(field, c[i]));
        out.push(ManifestRow {
            ufid: c[0].parse().map_err(|_| bad("ufid", c[0]))?,
            track: c[1].parse().map_err(|_| bad("track", c[1]))?,
            size: count(2, "size")?,
            n_covariates: count(3, "n_covariates")?,
            n_confounders: count(4, "n_confounders")?,
            poly_degree: c[5].parse().map_err(|_| bad("poly_degree", c[5]))?,
            use_exp: c[6].parse().map_err(|_| bad("use_exp", c[6]))?,
            prevalence: parse_finite(c[7]).ok_or_else(|| bad("prevalence", c[7]))?,
            censoring_rate: parse_finite(c[8]).ok_or_else(|| bad("censoring_rate", c[8]))?,
        });
    }
    Ok(out)
}

fn metric_cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => format_number(x),
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

fn metrics_cells(m: &Metrics) -> String {
    [m.enormse, m.rmse, m.bias, m.coverage, m.cic, m.encis]
        .into_iter()
        .map(metric_cell)
        .collect::<Vec<_>>()
        .join(",")
}

/// Report CSV: one row per dataset size, then an `aggregate` row. Metric
/// values keep full precision; inapplicable metrics are empty cells.
pub fn render_report(report: &AggregateReport) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for s in &report.per_size {
        let _ = writeln!(out, "{},{},{}", s.n, s.instance_count, metrics_cells(&s.metrics));
    }
    let total: usize = report.per_size.iter().map(|s| s.instance_count).sum();
    let _ = writeln!(out, "aggregate,{},{}", total, metrics_cells(&report.aggregate));
    out
}

pub fn write_report(report: &AggregateReport, path: &Path) -> Result<()> {
    fs::write(path, render_report(report)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::TempDir;

    fn put(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(3.2), "3.2");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1.0 / 3.0), "0.333333");
        assert_eq!(format_number(123456789.0), "123457000");
        assert_eq!(format_number(2.5e-7), "2.5e-7");
        assert_eq!(format_number(1e20), "1e20");
        assert_eq!(format_number(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_number(0.000123456789), "0.000123457");
    }

    #[test]
    fn covariates_minimal_and_errors() {
        let dir = TempDir::new().unwrap();
        let t = read_covariates(&put(&dir, "x.csv", "sample_id,f1\na1,0.5\n")).unwrap();
        assert_eq!(t.n_rows(), 1);
        assert_eq!(t.n_features(), 1);
        assert_eq!(t.get(0, 0), 0.5);

        let err = read_covariates(&put(&dir, "d.csv", "sample_id,f1\na1,0.5\na1,1\n"))
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_covariates(&put(&dir, "r.csv", "sample_id,f1\na1,0.5,2\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_covariates(&put(&dir, "n.csv", "sample_id,f1\na1,abc\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn observation_parsing() {
        let dir = TempDir::new().unwrap();
        let (ufid, recs) =
            read_observation_file(&put(&dir, "abc1234.csv", "sample_id,z,y\ns1,1,3.2\n"))
                .unwrap();
        assert_eq!(ufid.as_str(), "abc1234");
        assert_eq!(recs[0].y, Outcome::Observed(3.2));
        assert!(recs[0].treated);

        let (_, recs) =
            read_observation_file(&put(&dir, "abc1235.csv", "sample_id,z,y\r\ns1,0,NA\r\n"))
                .unwrap();
        assert_eq!(recs[0].y, Outcome::Censored);
        assert!(!recs[0].treated);

        assert!(
            read_observation_file(&put(&dir, "abc1236.csv", "sample_id,z,y\ns1,2,1.0\n")).is_err()
        );
        assert!(read_observation_file(&put(&dir, "abc1237.csv", "s1,1,1.0\n")).is_err());
        assert!(read_observation_file(&put(&dir, "ABC1237.csv", "sample_id,z,y\n")).is_err());
    }

    #[test]
    fn label_parsing() {
        let dir = TempDir::new().unwrap();
        let (ufid, recs) = read_label_file(&put(
            &dir,
            "8c5f509_cf.csv",
            "sample_id,y0,y1\na,1,2\nb,0.5,0.25\n",
        ))
        .unwrap();
        assert_eq!(ufid.as_str(), "8c5f509");
        assert_eq!(recs.len(), 2);
        assert!(read_label_file(&put(&dir, "8c5f50a_cf.csv", "sample_id,y0,y1\na,NA,2\n")).is_err());
        assert!(matches!(
            read_label_file(&put(&dir, "8c5f50b_cf.csv", "sample_id,y0,y1\n")),
            Err(Error::EmptyInstance(_))
        ));
    }

    #[test]
    fn population_parsing() {
        let dir = TempDir::new().unwrap();
        let p = read_population_predictions(&put(
            &dir,
            "p.csv",
            "ufid,effect_size,li,ri\n8c5f509,1.2,0.8,1.6\n",
        ))
        .unwrap();
        assert_eq!(p[0].effect_size, 1.2);
        assert_eq!((p[0].li, p[0].ri), (0.8, 1.6));

        let p = read_population_predictions(&put(
            &dir,
            "q.csv",
            "ufid,effect_size,li,ri\n8c5f509,1.2,-inf,INF\n",
        ))
        .unwrap();
        assert_eq!((p[0].li, p[0].ri), (f64::NEG_INFINITY, f64::INFINITY));

        assert!(read_population_predictions(&put(
            &dir,
            "d.csv",
            "ufid,effect_size,li,ri\n8c5f509,1,0,2\n8c5f509,1,0,2\n"
        ))
        .is_err());
        assert!(read_population_predictions(&put(
            &dir,
            "o.csv",
            "ufid,effect_size,li,ri\n8c5f509,1,2,0\n"
        ))
        .is_err());
        // estimate outside its CI is accepted
        let p = read_population_predictions(&put(
            &dir,
            "w.csv",
            "ufid,effect_size,li,ri\n8c5f509,5,0,2\n",
        ))
        .unwrap();
        assert!(p[0].estimate_outside_ci());
    }

    #[test]
    fn individual_directory() {
        let dir = TempDir::new().unwrap();
        assert!(read_individual_predictions(dir.path()).unwrap().is_empty());
        put(&dir, "abc1234.csv", "sample_id,y0,y1\na,0,1\nb,0,1\nc,1,1\n");
        let sets = read_individual_predictions(dir.path()).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].rows.len(), 3);

        put(&dir, "abc1235.csv", "sample_id,y0\na,0\n");
        assert!(read_individual_predictions(dir.path()).is_err());
    }

    #[test]
    fn individual_rejects_non_finite() {
        let dir = TempDir::new().unwrap();
        let p = put(&dir, "abc1234.csv", "sample_id,y0,y1\na,0,inf\n");
        assert!(read_individual_prediction_file(&p).is_err());
        let p = put(&dir, "abc1235.csv", "sample_id,y0,y1\na,NA,1\n");
        assert!(read_individual_prediction_file(&p).is_err());
    }

    fn small_pair() -> InstancePair {
        InstancePair::new(
            "aaaaaaa".parse().unwrap(),
            vec![ObservationRecord {
                sample_id: "s1".into(),
                treated: true,
                y: Outcome::Censored,
            }],
            vec![CounterfactualRecord {
                sample_id: "s1".into(),
                y0: 0.5,
                y1: 1.5,
            }],
        )
        .unwrap()
    }

    #[test]
    fn write_pair_layout_and_collisions() {
        let dir = TempDir::new().unwrap();
        let pair = small_pair();
        let (obs, lab) = write_instance_pair(&pair, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(&obs).unwrap(), "sample_id,z,y\ns1,1,NA\n");
        assert_eq!(fs::read_to_string(&lab).unwrap(), "sample_id,y0,y1\ns1,0.5,1.5\n");
        assert_eq!(read_instance_pair(dir.path(), pair.ufid()).unwrap(), pair);

        // same content again is fine
        write_instance_pair(&pair, dir.path()).unwrap();

        let other = InstancePair::new(
            pair.ufid().clone(),
            pair.observations().to_vec(),
            vec![CounterfactualRecord {
                sample_id: "s1".into(),
                y0: 0.0,
                y1: 1.0,
            }],
        )
        .unwrap();
        assert!(matches!(
            write_instance_pair(&other, dir.path()),
            Err(Error::UfidCollision(_))
        ));
        assert!(write_instance_pair(&pair, &dir.path().join("nope")).is_err());
    }

    #[test]
    fn large_pair_line_count() {
        let dir = TempDir::new().unwrap();
        let n = 1000;
        let obs = (0..n)
            .map(|i| ObservationRecord {
                sample_id: format!("s{i}"),
                treated: i % 2 == 0,
                y: Outcome::Observed(i as f64 * 0.1),
            })
            .collect();
        let labels = (0..n)
            .map(|i| CounterfactualRecord {
                sample_id: format!("s{i}"),
                y0: i as f64,
                y1: i as f64 + 1.0,
            })
            .collect();
        let pair = InstancePair::new("0123abc".parse().unwrap(), obs, labels).unwrap();
        let (o, l) = write_instance_pair(&pair, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(o).unwrap().lines().count(), 1001);
        assert_eq!(fs::read_to_string(l).unwrap().lines().count(), 1001);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = TempDir::new().unwrap();
        let rows = vec![ManifestRow {
            ufid: "8c5f509".parse().unwrap(),
            track: Track::Censoring,
            size: 10000,
            n_covariates: 12,
            n_confounders: 3,
            poly_degree: 2,
            use_exp: true,
            prevalence: 0.3,
            censoring_rate: 0.2,
        }];
        let p = dir.path().join(MANIFEST_FILE);
        write_manifest(&rows, &p).unwrap();
        assert_eq!(read_manifest(&p).unwrap(), rows);
    }

    const HEADERS: [&str; 4] = [OBSERVATION_HEADER, LABEL_HEADER, POPULATION_HEADER, MANIFEST_HEADER];

    proptest! {
        #[test]
        fn header_mutations_are_rejected(
            which in 0usize..4,
            pos in 0usize..64,
            ch in prop::char::range(' ', '~'),
            kind in 0u8..3,
        ) {
            let header = HEADERS[which];
            let mut chars: Vec<char> = header.chars().collect();
            let pos = pos % (chars.len() + 1);
            match kind {
                0 => chars.insert(pos, ch),
                1 if pos < chars.len() => { chars.remove(pos); }
                _ if pos < chars.len() => chars[pos] = ch,
                _ => chars.push(ch),
            }
            let mutated: String = chars.into_iter().collect();
            prop_assume!(mutated != header);
            let text = format!("{mutated}\n");
            let path = Path::new("abc1234.csv");
            prop_assert!(CsvBody::new(path, &text, header).is_err());
        }

        #[test]
        fn number_rendering_is_idempotent(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL) {
            let once = format_number(x);
            let back: f64 = once.parse().unwrap();
            prop_assert_eq!(back, round_significant(x));
            prop_assert_eq!(format_number(back), once);
        }
    }
}
