//! CSV curves with a fixed `x,series,y,stderr` header.

use std::fmt;
use std::io::Write;
use std::path::Path;

pub const HEADER: [&str; 4] = ["x", "series", "y", "stderr"];

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub x: f64,
    pub series: String,
    pub y: f64,
    pub stderr: f64,
}

#[derive(Debug)]
pub enum ArtifactError {
    Io(std::io::Error),
    Csv(csv::Error),
    Invalid(String),
}

impl fmt::Display for ArtifactError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArtifactError::Io(e) => write!(f, "i/o error: {e}"),
            ArtifactError::Csv(e) => write!(f, "csv error: {e}"),
            ArtifactError::Invalid(m) => write!(f, "invalid curve: {m}"),
        }
    }
}

impl std::error::Error for ArtifactError {}

impl From<std::io::Error> for ArtifactError {
    fn from(e: std::io::Error) -> Self {
        ArtifactError::Io(e)
    }
}

impl From<csv::Error> for ArtifactError {
    fn from(e: csv::Error) -> Self {
        ArtifactError::Csv(e)
    }
}

/// Ordered rows of one or more series. Within a series x strictly
/// increases.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurveArtifact {
    rows: Vec<Row>,
}

impl CurveArtifact {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64, series: impl Into<String>, y: f64, stderr: f64) {
        self.rows.push(Row { x, series: series.into(), y, stderr });
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Series labels in order of first appearance.
    pub fn series(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.series.as_str()) {
                out.push(&r.series);
            }
        }
        out
    }

    /// (x, y, stderr) of one series.
    pub fn points(&self, series: &str) -> Vec<(f64, f64, f64)> {
        self.rows.iter().filter(|r| r.series == series).map(|r| (r.x, r.y, r.stderr)).collect()
    }

    pub fn check(&self) -> Result<(), ArtifactError> {
        for s in self.series() {
            let xs: Vec<f64> = self.points(s).iter().map(|p| p.0).collect();
            if xs.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(ArtifactError::Invalid(format!("x not strictly increasing in series {s:?}")));
            }
        }
        if let Some(r) = self.rows.iter().find(|r| !r.x.is_finite() || r.y.is_nan() || !(r.stderr >= 0.0)) {
            return Err(ArtifactError::Invalid(format!("bad row {r:?}")));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, ArtifactError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER)?;
        for r in &self.rows {
            w.write_record([r.x.to_string(), r.series.clone(), r.y.to_string(), r.stderr.to_string()])?;
        }
        w.into_inner().map_err(|e| ArtifactError::Io(e.into_error()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self, ArtifactError> {
        let mut rdr = csv::Reader::from_reader(bytes);
        if rdr.headers()?.iter().ne(HEADER) {
            return Err(ArtifactError::Invalid(format!("header must be {}", HEADER.join(","))));
        }
        let mut out = Self::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| {
                rec[i].parse::<f64>().map_err(|e| ArtifactError::Invalid(format!("column {}: {e}", HEADER[i])))
            };
            out.push(num(0)?, &rec[1], num(2)?, num(3)?);
        }
        out.check()?;
        Ok(out)
    }

    /// Checks the curve, then writes through a temp file in the target
    /// directory and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<(), ArtifactError> {
        self.check()?;
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&self.to_csv()?)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| ArtifactError::Io(e.error))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ArtifactError> {
        Self::from_csv(&std::fs::read(path)?)
    }
}
