//! Sample-file ingest and run export.
//!
//! Every emitted CSV has one header row followed by comma-separated values
//! written with `{:.16e}`, so identical runs give identical bytes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::curve::CurveState;
use crate::error::{Error, Result};
use crate::spectral::{cplx, Interpolant, PeriodicGrid, Spectral};
use crate::su2::SpherePoint;

/// Largest pre-projection `| |γ| − 1 |` accepted on ingest.
pub const INGEST_SPHERE_TOLERANCE: f64 = 0.01;

/// Samples read from a text file.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub points: Vec<SpherePoint>,
    /// Parameter period, from the `x` column when present and `2π` otherwise.
    pub period: f64,
}

/// Parses rows `x, r1, r2, r3` or `r1, r2, r3`. Blank lines, `#` comments
/// and a leading header row are skipped; commas and whitespace both separate.
pub fn parse_samples(text: &str) -> Result<Samples> {
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push((i + 1, v)),
            Err(_) if rows.is_empty() && fields.iter().any(|f| f.starts_with(|c: char| c.is_alphabetic())) => {}
            Err(e) => return Err(Error::BadFormat { line: i + 1, message: e.to_string() }),
        }
    }
    let Some((_, first)) = rows.first() else {
        return Err(Error::BadFormat { line: 0, message: "no samples".into() });
    };
    let width = first.len();
    if width != 3 && width != 4 {
        return Err(Error::BadFormat { line: rows[0].0, message: format!("expected 3 or 4 columns, found {width}") });
    }
    for (line, r) in &rows {
        if r.len() != width {
            return Err(Error::BadFormat { line: *line, message: format!("expected {width} columns, found {}", r.len()) });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadFormat { line: *line, message: "non-finite value".into() });
        }
    }
    if rows.len() < 4 {
        return Err(Error::BadFormat { line: rows[rows.len() - 1].0, message: "need at least 4 samples".into() });
    }
    let off = width - 3;
    let points = rows.iter().map(|(_, r)| SpherePoint::new(r[off], r[off + 1], r[off + 2])).collect();
    let period = if width == 4 {
        let h = rows[1].1[0] - rows[0].1[0];
        for w in rows.windows(2) {
            let d = w[1].1[0] - w[0].1[0];
            if !(h > 0.0) || (d - h).abs() > 1e-6 * h.abs().max(1.0) {
                return Err(Error::BadFormat { line: w[1].0, message: "x column is not uniformly spaced".into() });
            }
        }
        h * rows.len() as f64
    } else {
        2.0 * PI
    };
    Ok(Samples { points, period })
}

/// Relative amplitude of the top octave of arbitrary-length samples.
fn source_tail(points: &[SpherePoint]) -> f64 {
    let n = points.len();
    let fft = rustfft::FftPlanner::new().plan_fft_forward(n);
    let (mut top, mut total) = (0.0, 0.0);
    for c in 0..3 {
        let v: Vec<f64> = points.iter().map(|p| p.to_array()[c]).collect();
        let mut buf = cplx(&v);
        fft.process(&mut buf);
        for (i, z) in buf.iter().enumerate() {
            let k = if 2 * i < n { i } else { n - i };
            let e = z.norm_sqr();
            total += e;
            if 4 * k > n {
                top += e;
            }
        }
    }
    if total > 0.0 {
        (top / total).sqrt()
    } else {
        0.0
    }
}

/// Trigonometric resampling of arbitrary-length samples onto `grid`.
pub fn resample_points(points: &[SpherePoint], grid: PeriodicGrid) -> Vec<SpherePoint> {
    let comp = |c: usize| -> Vec<f64> {
        let v: Vec<f64> = points.iter().map(|p| p.to_array()[c]).collect();
        Interpolant::from_samples(&cplx(&v)).sample(grid.len()).into_iter().map(|z| z.re).collect()
    };
    crate::spectral::join(&comp(0), &comp(1), &comp(2))
}

/// A curve read from disk, resampled and projected onto S².
#[derive(Debug, Clone)]
pub struct IngestedCurve {
    pub curve: CurveState,
    /// Pre-projection `max | |γ| − 1 |`.
    pub deviation: f64,
    pub period: f64,
    pub source_samples: usize,
}

pub fn ingest_curve(path: &Path, spec: &Spectral, tail_threshold: f64) -> Result<IngestedCurve> {
    let samples = parse_samples(&fs::read_to_string(path)?)?;
    ingest_samples(&samples, spec, tail_threshold)
}

pub fn ingest_samples(samples: &Samples, spec: &Spectral, tail_threshold: f64) -> Result<IngestedCurve> {
    let tail = source_tail(&samples.points);
    if !(tail <= tail_threshold) {
        return Err(Error::NotClosed(tail));
    }
    let resampled = resample_points(&samples.points, spec.grid());
    let deviation = crate::curve::max_sphere_deviation(&resampled);
    if !(deviation <= INGEST_SPHERE_TOLERANCE) {
        return Err(Error::OffSphere(deviation));
    }
    let (curve, _) = CurveState::projected(spec.grid(), resampled, 0.0);
    curve.validate(spec, tail_threshold)?;
    Ok(IngestedCurve { curve, deviation, period: samples.period, source_samples: samples.points.len() })
}

/// Closed filament samples in ℝ³, resampled but not projected.
pub fn ingest_filament(path: &Path, spec: &Spectral, tail_threshold: f64) -> Result<(Vec<SpherePoint>, f64)> {
    let samples = parse_samples(&fs::read_to_string(path)?)?;
    let tail = source_tail(&samples.points);
    if !(tail <= tail_threshold) {
        return Err(Error::NotClosed(tail));
    }
    Ok((resample_points(&samples.points, spec.grid()), samples.period))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn points_csv(grid: PeriodicGrid, points: &[SpherePoint], header: &str) -> String {
    let mut s = format!("{header}\n");
    for (j, p) in points.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", num(grid.x(j)), num(p.r1), num(p.r2), num(p.r3));
    }
    s
}

pub fn field_csv(grid: PeriodicGrid, values: &[C64]) -> String {
    let mut s = String::from("x,re_q,im_q\n");
    for (j, q) in values.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", num(grid.x(j)), num(q.re), num(q.im));
    }
    s
}

/// Column names of `diagnostics.csv`.
pub const DIAGNOSTICS_COLUMNS: [&str; 14] = [
    "t",
    "energy",
    "h1",
    "h2_re",
    "h2_im",
    "h3",
    "h4_re",
    "h4_im",
    "e_n",
    "e_n_sup",
    "sphere_deviation",
    "closure_deviation",
    "pde_residual",
    "vfe_residual",
];

/// Scalar summary and per-time series of a finished run, ready to write.
#[derive(Debug, Clone, Default)]
pub struct ExportData {
    pub config_toml: String,
    /// Key/value pairs for the `[run]` table of the manifest.
    pub run: BTreeMap<String, ManifestValue>,
    /// `(relative path, contents)`.
    pub files: Vec<(PathBuf, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ManifestValue {
    Float(f64),
    Int(i64),
    Text(String),
    List(Vec<String>),
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: u32,
    version: &'a str,
    run: &'a BTreeMap<String, ManifestValue>,
    config: toml::Table,
    checksums: BTreeMap<String, String>,
}

pub const MANIFEST: &str = "manifest.toml";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every artifact, then `manifest.toml` with their SHA-256 sums.
pub fn write_export(data: &ExportData, outdir: &Path) -> Result<Vec<PathBuf>> {
    let mut checksums = BTreeMap::new();
    let mut written = Vec::with_capacity(data.files.len() + 1);
    for (rel, contents) in &data.files {
        let path = outdir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        checksums.insert(rel.to_string_lossy().replace('\\', "/"), sha256_hex(contents.as_bytes()));
        written.push(path);
    }
    let config: toml::Table = toml::from_str(&data.config_toml)
        .map_err(|e| Error::InvalidConfig(format!("configuration does not round-trip: {e}")))?;
    let manifest = Manifest { format: 1, version: env!("CARGO_PKG_VERSION"), run: &data.run, config, checksums };
    let text = toml::to_string(&manifest).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let path = outdir.join(MANIFEST);
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}

/// Files whose checksum no longer matches the manifest.
pub fn verify_manifest(outdir: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(outdir.join(MANIFEST))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::BadFormat { line: 0, message: e.to_string() })?;
    let Some(sums) = table.get("checksums").and_then(|v| v.as_table()) else {
        return Err(Error::BadFormat { line: 0, message: "manifest has no checksums".into() });
    };
    let mut bad = Vec::new();
    for (rel, sum) in sums {
        let ok = match fs::read(outdir.join(rel)) {
            Ok(bytes) => Some(sha256_hex(&bytes).as_str()) == sum.as_str(),
            Err(_) => false,
        };
        if !ok {
            bad.push(rel.clone());
        }
    }
    Ok(bad)
}

/// Gnuplot script: 3-D curve beside `Re q` for each snapshot.
pub fn plot_script(frames: &[String], invariants: &[String], times: &[f64], filaments: &[String]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key off\nset view equal xyz\n");
    let _ = writeln!(s, "set terminal pngcairo size 900,{}", 300 * frames.len().max(1));
    s.push_str("set output 'snapshots.png'\n");
    let _ = writeln!(s, "set multiplot layout {},2", frames.len().max(1));
    for ((f, q), t) in frames.iter().zip(invariants).zip(times) {
        let _ = writeln!(s, "set title 't = {t}'");
        let _ = writeln!(s, "splot '{f}' using 2:3:4 with lines lw 2");
        let _ = writeln!(s, "set title 'Re q, t = {t}'");
        let _ = writeln!(s, "plot '{q}' using 1:2 with lines lw 2");
    }
    s.push_str("unset multiplot\n");
    if !filaments.is_empty() {
        s.push_str("set terminal pngcairo size 600,600\nset output 'filament.png'\nunset title\n");
        let list: Vec<String> = filaments.iter().map(|f| format!("'{f}' using 2:3:4 with lines")).collect();
        let _ = writeln!(s, "splot {}", list.join(", "));
    }
    s
}
