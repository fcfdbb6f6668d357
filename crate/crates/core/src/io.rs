//! File formats: long-form distance CSV, ordinal JSON, embedding JSON and
//! Poincare-disk SVG.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingResult;
use crate::error::{HdmError, Result};
use crate::experiments::TrialSummary;
use crate::gramian::{Hdm, ObservationMask};
use crate::lorentz::{LoidPoint, PoincarePoint};
use crate::solver::{OrdinalConstraint, SolverReport, MAX_DISTANCE};

/// One row of a distance file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?)
}

/// Reads and validates the records of a distance file (header `i,j,value`).
/// The body may be empty.
pub fn load_distance_records(path: &Path) -> Result<Vec<DistanceRecord>> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["i", "j", "value"] {
        return Err(HdmError::Format(format!(
            "expected header `i,j,value`, found `{}`",
            names.join(",")
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, rec) in rdr.deserialize::<DistanceRecord>().enumerate() {
        let r = rec?;
        let row = line + 1;
        if r.i == r.j {
            return Err(HdmError::Format(format!("row {row}: diagonal pair ({}, {})", r.i, r.j)));
        }
        if !r.value.is_finite() || r.value < 0.0 {
            return Err(HdmError::Format(format!("row {row}: invalid distance {}", r.value)));
        }
        if r.value > MAX_DISTANCE {
            return Err(HdmError::Format(format!(
                "row {row}: distance {} exceeds the cap {MAX_DISTANCE}",
                r.value
            )));
        }
        let key = (r.i.min(r.j), r.i.max(r.j));
        if !seen.insert(key) {
            return Err(HdmError::Format(format!("row {row}: duplicate pair {key:?}")));
        }
        out.push(DistanceRecord {
            i: key.0,
            j: key.1,
            value: r.value,
        });
    }
    Ok(out)
}

/// Builds the symmetric distance matrix and mask on `n` points.
pub fn distances_from_records(records: &[DistanceRecord], n: usize) -> Result<(Hdm, ObservationMask)> {
    let mut d = DMatrix::zeros(n, n);
    let mut pairs = Vec::with_capacity(records.len());
    for r in records {
        if r.j >= n || r.i >= n {
            return Err(HdmError::Format(format!(
                "pair ({}, {}) out of range for n = {n}",
                r.i, r.j
            )));
        }
        d[(r.i, r.j)] = r.value;
        d[(r.j, r.i)] = r.value;
        pairs.push((r.i, r.j));
    }
    Ok((Hdm::new(d)?, ObservationMask::from_pairs(n, &pairs)?))
}

/// Loads a distance file; the point count is the largest index plus one.
pub fn load_distances(path: &Path) -> Result<(Hdm, ObservationMask)> {
    let records = load_distance_records(path)?;
    if records.is_empty() {
        return Err(HdmError::NoData(format!("{} lists no distances", path.display())));
    }
    let n = records.iter().map(|r| r.j.max(r.i)).max().unwrap_or(0) + 1;
    distances_from_records(&records, n)
}

/// Writes the measured pairs of `d` (all pairs when `mask` is `None`).
pub fn save_distances(
    path: &Path,
    d: &Hdm,
    mask: Option<&ObservationMask>,
    comment: Option<&str>,
) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(file, "# {line}")?;
        }
    }
    let mut wtr = csv::Writer::from_writer(file);
    let n = d.n();
    for i in 0..n {
        for j in (i + 1)..n {
            if mask.is_none_or(|m| m.is_measured(i, j)) {
                wtr.serialize(DistanceRecord {
                    i,
                    j,
                    value: d.get(i, j),
                })?;
            }
        }
    }
    if n < 2 || mask.is_some_and(|m| m.count() == 0) {
        wtr.write_record(["i", "j", "value"])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Loads a JSON array of `[i1, i2, i3, i4]` comparisons.
pub fn load_ordinal(path: &Path) -> Result<Vec<OrdinalConstraint>> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

pub fn save_ordinal(path: &Path, set: &[OrdinalConstraint]) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer(file, set)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Loid,
    Poincare,
}

impl std::str::FromStr for Model {
    type Err = HdmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loid" => Ok(Model::Loid),
            "poincare" => Ok(Model::Poincare),
            other => Err(HdmError::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

/// Solver diagnostics carried in output files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub converged: bool,
    pub total_slack: f64,
}

impl From<&SolverReport> for ReportSummary {
    fn from(r: &SolverReport) -> Self {
        Self {
            iterations: r.iterations,
            primal_residual: r.primal_residual,
            dual_residual: r.dual_residual,
            objective: r.objective,
            converged: r.converged,
            total_slack: r.slacks.iter().fold(0.0, |acc, s| acc + s),
        }
    }
}

/// Where an output file came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub invocation: Vec<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub config: serde_json::Value,
    pub report: Option<ReportSummary>,
    /// Relative Frobenius error of the embedded distances on measured pairs.
    pub reconstruction_error: Option<f64>,
    #[serde(default)]
    pub rank_deficient: bool,
    pub warning: Option<String>,
}

impl Provenance {
    pub fn new(invocation: Vec<String>) -> Self {
        Self {
            invocation,
            seed: None,
            config: serde_json::Value::Null,
            report: None,
            reconstruction_error: None,
            rank_deficient: false,
            warning: None,
        }
    }
}

/// Serialized point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub model: Model,
    /// Intrinsic dimension `d`; loid coordinates have `d + 1` entries.
    pub dim: usize,
    pub n: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl EmbeddingFile {
    pub fn from_loid(points: &[LoidPoint], model: Model, provenance: Provenance) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.dim());
        let coords: Vec<Vec<f64>> = match model {
            Model::Loid => points.iter().map(|p| p.coords().to_vec()).collect(),
            Model::Poincare => points
                .iter()
                .map(|p| crate::lorentz::to_poincare(p).coords().to_vec())
                .collect(),
        };
        let file = Self {
            model,
            dim,
            n: points.len(),
            points: coords,
            multipliers: None,
            provenance,
        };
        file.validate()?;
        Ok(file)
    }

    /// Checks coordinate lengths and the model invariants.
    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.n {
            return Err(HdmError::Format(format!(
                "n = {} but {} points stored",
                self.n,
                self.points.len()
            )));
        }
        let len = match self.model {
            Model::Loid => self.dim + 1,
            Model::Poincare => self.dim,
        };
        for (k, p) in self.points.iter().enumerate() {
            if p.len() != len {
                return Err(HdmError::Format(format!(
                    "point {k} has {} coordinates, expected {len}",
                    p.len()
                )));
            }
            match self.model {
                Model::Loid => {
                    LoidPoint::new(p.clone())?;
                }
                Model::Poincare => {
                    PoincarePoint::new(p.clone())?;
                }
            }
        }
        Ok(())
    }

    pub fn loid_points(&self) -> Result<Vec<LoidPoint>> {
        self.points
            .iter()
            .map(|p| match self.model {
                Model::Loid => LoidPoint::new(p.clone()),
                Model::Poincare => crate::lorentz::from_poincare(&PoincarePoint::new(p.clone())?),
            })
            .collect()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)?;
    file.flush()?;
    Ok(())
}

pub fn save_embedding_file(path: &Path, file: &EmbeddingFile) -> Result<()> {
    file.validate()?;
    write_json(path, file)
}

/// Writes an embedding in the requested model.
pub fn save_embedding(
    result: &EmbeddingResult,
    path: &Path,
    model: Model,
    provenance: Provenance,
) -> Result<()> {
    let file = EmbeddingFile::from_loid(&result.loid_points, model, provenance)?;
    save_embedding_file(path, &file)
}

pub fn load_embedding(path: &Path) -> Result<EmbeddingFile> {
    let file: EmbeddingFile = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
    file.validate()?;
    Ok(file)
}

/// Raw points for projection: either a bare array of coordinate arrays or
/// an object with a `points` field.
pub fn load_raw_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Bare(Vec<Vec<f64>>),
        Wrapped { points: Vec<Vec<f64>> },
    }
    let raw: Raw = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
    let pts = match raw {
        Raw::Bare(p) | Raw::Wrapped { points: p } => p,
    };
    if let Some(first) = pts.first() {
        if first.len() < 2 {
            return Err(HdmError::Format("points need at least 2 coordinates".into()));
        }
        if pts.iter().any(|p| p.len() != first.len()) {
            return Err(HdmError::Format("points have mixed lengths".into()));
        }
    }
    Ok(pts)
}

/// Writes trial summaries as CSV preceded by `#` comment lines.
pub fn save_summaries(path: &Path, rows: &[TrialSummary], comment: Option<&str>) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(file, "# {line}")?;
        }
    }
    let mut wtr = csv::Writer::from_writer(file);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_summaries(path: &Path) -> Result<Vec<TrialSummary>> {
    let mut rdr = csv_reader(path)?;
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<TrialSummary>, _>>()?;
    Ok(rows)
}

const SVG_SIZE: f64 = 1000.0;
const SVG_RADIUS: f64 = 480.0;

/// SVG of points in the Poincare disk (first two coordinates), unit circle
/// drawn as the boundary. Output depends only on the input.
pub fn poincare_svg(points: &[PoincarePoint], labels: Option<&[String]>) -> Result<String> {
    if let Some(l) = labels {
        if l.len() != points.len() {
            return Err(HdmError::DimensionMismatch {
                expected: points.len(),
                got: l.len(),
            });
        }
    }
    let c = SVG_SIZE / 2.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">"#
    );
    let _ = writeln!(
        s,
        r#"<circle cx="{c}" cy="{c}" r="{SVG_RADIUS}" fill="none" stroke="black" stroke-width="2"/>"#
    );
    for (k, p) in points.iter().enumerate() {
        if p.norm() >= 1.0 {
            return Err(HdmError::OutsideBall(p.norm()));
        }
        let x = p.coords().first().copied().unwrap_or(0.0);
        let y = p.coords().get(1).copied().unwrap_or(0.0);
        let (px, py) = (c + SVG_RADIUS * x, c - SVG_RADIUS * y);
        let _ = writeln!(s, r#"<circle cx="{px:.3}" cy="{py:.3}" r="5" fill="crimson"/>"#);
        if let Some(l) = labels {
            let text = escape_xml(&l[k]);
            let _ = writeln!(
                s,
                r#"<text x="{:.3}" y="{:.3}" font-size="14" font-family="sans-serif">{text}</text>"#,
                px + 7.0,
                py - 7.0
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_poincare_svg(points: &[PoincarePoint], labels: Option<&[String]>, path: &Path) -> Result<()> {
    let svg = poincare_svg(points, labels)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn single_pair_file() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "i,j,value\n0,1,1.0\n").unwrap();
        let (d, m) = load_distances(&p).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.get(1, 0), 1.0);
        assert_eq!(m, ObservationMask::full(2));
    }

    #[test]
    fn malformed_files() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        for body in [
            "i,j,value\n",
            "i,j,value\n0,1,1\n1,0,2\n",
            "i,j,value\n0,1,-1\n",
            "i,j,value\n0,1,21\n",
            "i,j,value\n0,0,1\n",
            "a,b,c\n0,1,1\n",
            "i,j,value\n0,x,1\n",
        ] {
            std::fs::write(&p, body).unwrap();
            assert!(load_distances(&p).is_err(), "{body:?}");
        }
        std::fs::write(&p, "i,j,value\n0,1,1\n").unwrap();
        let recs = load_distance_records(&p).unwrap();
        assert!(distances_from_records(&recs, 1).is_err());
    }

    #[test]
    fn distances_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let pts = crate::lorentz::random_loid_points(6, 2, 1, 1.0).unwrap();
        let d = crate::gramian::distance_matrix(&pts).unwrap();
        let mask = ObservationMask::from_pairs(6, &[(0, 1), (2, 5), (3, 4), (4, 5)]).unwrap();
        save_distances(&p, &d, Some(&mask), Some("test")).unwrap();
        let recs = load_distance_records(&p).unwrap();
        let (d2, m2) = distances_from_records(&recs, 6).unwrap();
        assert_eq!(m2, mask);
        for (i, j) in mask.measured_pairs() {
            assert_eq!(d2.get(i, j).to_bits(), d.get(i, j).to_bits());
        }
    }

    #[test]
    fn svg_examples() {
        let empty = poincare_svg(&[], None).unwrap();
        assert!(empty.contains(r#"r="480""#));
        assert_eq!(empty.matches("<circle").count(), 1);
        let origin = PoincarePoint::new(vec![0.0, 0.0]).unwrap();
        let s = poincare_svg(std::slice::from_ref(&origin), Some(&["a<b".to_string()])).unwrap();
        assert!(s.contains(r#"cx="500.000" cy="500.000""#));
        assert!(s.contains("a&lt;b"));
        assert_eq!(s, poincare_svg(&[origin], Some(&["a<b".to_string()])).unwrap());
    }

    #[test]
    fn embedding_file_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("e.json");
        let pts = crate::lorentz::random_loid_points(2, 2, 3, 1.0).unwrap();
        for model in [Model::Loid, Model::Poincare] {
            let f = EmbeddingFile::from_loid(&pts, model, Provenance::new(vec!["x".into()])).unwrap();
            save_embedding_file(&p, &f).unwrap();
            let g = load_embedding(&p).unwrap();
            assert_eq!(f, g);
            assert_eq!(g.n, 2);
            assert_eq!(g.dim, 2);
        }
    }
}
