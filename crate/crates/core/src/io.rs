//! File formats: grid metrics, field snapshots, ray dumps, sinograms and
//! forward matrices.
//!
//! Text formats are a single-line JSON header followed by CSV blocks;
//! numbers are written in shortest round-trip form, so identical inputs
//! produce byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bundle::BundleGrid;
use crate::error::{Error, Result};
use crate::geodesic::GeodesicPath;
use crate::metric::{GridSamples, MetricField};
use crate::transform::{InflowSample, TransformKind, TransformMatrix};

/// Provenance stamp embedded in every output file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub config_hash: String,
    #[serde(default)]
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Provenance {
            config_hash: config_hash.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetricHeader {
    dimension: usize,
    nx: usize,
    ny: usize,
    spacing: f64,
    origin: [f64; 2],
    lambda_min: f64,
    #[serde(flatten)]
    provenance: Provenance,
}

/// Write metric component samples: JSON header, then one CSV block per
/// component, row-major over the uniform Cartesian grid.
pub fn write_metric_grid(
    path: impl AsRef<Path>,
    samples: &GridSamples,
    provenance: &Provenance,
) -> Result<()> {
    samples.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    let header = MetricHeader {
        dimension: 2,
        nx: samples.nx,
        ny: samples.ny,
        spacing: samples.spacing,
        origin: samples.origin,
        lambda_min: samples.lambda_min,
        provenance: provenance.clone(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for (name, block) in [
        ("g11", &samples.g11),
        ("g12", &samples.g12),
        ("g22", &samples.g22),
    ] {
        writeln!(w, "# {name}")?;
        for row in block.chunks(samples.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
    }
    Ok(())
}

/// Read a metric grid file written by [`write_metric_grid`].
pub fn read_metric_grid(path: impl AsRef<Path>) -> Result<GridSamples> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::data("metric file is empty"))??;
    let header: MetricHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::data(format!("bad metric header: {e}")))?;
    if header.dimension != 2 {
        return Err(Error::data(format!(
            "unsupported dimension {}",
            header.dimension
        )));
    }
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    let mut current: Option<Vec<f64>> = None;
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('#') {
            if let Some(done) = current.take() {
                blocks.push(done);
            }
            let _ = name;
            current = Some(Vec::with_capacity(header.nx * header.ny));
            continue;
        }
        let block = current
            .as_mut()
            .ok_or_else(|| Error::data("metric data before any block marker"))?;
        for tok in line.split(',') {
            block.push(
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::data(format!("bad sample '{tok}': {e}")))?,
            );
        }
    }
    if let Some(done) = current.take() {
        blocks.push(done);
    }
    if blocks.len() != 3 {
        return Err(Error::data(format!(
            "expected 3 component blocks, found {}",
            blocks.len()
        )));
    }
    let g22 = blocks.pop().unwrap();
    let g12 = blocks.pop().unwrap();
    let g11 = blocks.pop().unwrap();
    let samples = GridSamples {
        origin: header.origin,
        spacing: header.spacing,
        nx: header.nx,
        ny: header.ny,
        g11,
        g12,
        g22,
        lambda_min: header.lambda_min,
    };
    samples.validate()?;
    Ok(samples)
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldHeader {
    kind: String,
    metric_id: String,
    n_r: usize,
    n_phi: usize,
    n_psi: usize,
    #[serde(flatten)]
    provenance: Provenance,
}

/// Write a field snapshot: JSON header then CSV rows of fiber values, node
/// order `(r, phi, psi)` row-major.
pub fn write_field_snapshot(
    path: impl AsRef<Path>,
    grid: &BundleGrid,
    kind: &str,
    values: &[f64],
    provenance: &Provenance,
) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::usage("field length does not match grid"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let header = FieldHeader {
        kind: kind.to_string(),
        metric_id: grid.metric().id().to_string(),
        n_r: grid.n_r,
        n_phi: grid.n_phi,
        n_psi: grid.n_psi,
        provenance: provenance.clone(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for fiber in values.chunks(grid.n_psi) {
        let line: Vec<String> = fiber.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// A field snapshot read back from disk.
#[derive(Debug)]
pub struct FieldSnapshot {
    pub kind: String,
    pub shape: (usize, usize, usize),
    pub values: Vec<f64>,
}

/// Read back a field snapshot.
pub fn read_field_snapshot(path: impl AsRef<Path>) -> Result<FieldSnapshot> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::data("field snapshot is empty"))??;
    let header: FieldHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::data(format!("bad field header: {e}")))?;
    let mut values = Vec::with_capacity(header.n_r * header.n_phi * header.n_psi);
    for line in lines {
        let line = line?;
        for tok in line.trim().split(',').filter(|t| !t.is_empty()) {
            values.push(
                tok.parse::<f64>()
                    .map_err(|e| Error::data(format!("bad value '{tok}': {e}")))?,
            );
        }
    }
    if values.len() != header.n_r * header.n_phi * header.n_psi {
        return Err(Error::data("field snapshot size mismatch"));
    }
    Ok(FieldSnapshot {
        kind: header.kind,
        shape: (header.n_r, header.n_phi, header.n_psi),
        values,
    })
}

/// Dump one traced ray as CSV rows `(t, x1, x2, v1, v2, drift)`.
pub fn write_ray_dump(
    path: impl AsRef<Path>,
    metric: &MetricField,
    ray: &GeodesicPath,
    provenance: &Provenance,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "# config_hash={},version={}",
        provenance.config_hash, provenance.version
    )?;
    writeln!(w, "t,x1,x2,v1,v2,drift")?;
    for i in 0..ray.times.len() {
        let x = ray.points[i];
        let v = ray.velocities[i];
        let drift = (metric.norm_g(x.cap_magnitude(1.0), v)? - 1.0).abs();
        writeln!(
            w,
            "{},{},{},{},{},{:e}",
            ray.times[i], x.x, x.y, v.x, v.y, drift
        )?;
    }
    Ok(())
}

/// Batch manifest entry for a set of dumped rays.
#[derive(Debug, Serialize, Deserialize)]
pub struct RayManifestEntry {
    pub ray_id: usize,
    pub x: [f64; 2],
    pub v: [f64; 2],
    pub status: String,
    pub tau: f64,
    pub file: String,
}

pub fn write_ray_manifest(
    path: impl AsRef<Path>,
    entries: &[RayManifestEntry],
    provenance: &Provenance,
) -> Result<()> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        #[serde(flatten)]
        provenance: &'a Provenance,
        rays: &'a [RayManifestEntry],
    }
    let mut w = BufWriter::new(File::create(path)?);
    let manifest = Manifest {
        provenance,
        rays: entries,
    };
    writeln!(w, "{}", serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Sinogram CSV: `(ray id, boundary arclength, inward angle, weight, value)`.
pub fn write_sinogram(
    path: impl AsRef<Path>,
    rays: &[InflowSample],
    values: &[f64],
    provenance: &Provenance,
) -> Result<()> {
    if rays.len() != values.len() {
        return Err(Error::usage("sinogram needs one value per ray"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "# config_hash={},version={}",
        provenance.config_hash, provenance.version
    )?;
    writeln!(w, "ray_id,boundary_arclength,inward_angle,weight,value")?;
    for (ray, value) in rays.iter().zip(values) {
        writeln!(
            w,
            "{},{},{},{},{}",
            ray.ray_id, ray.boundary_angle, ray.inward_angle, ray.weight, value
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixSidecar {
    rows: usize,
    cols: usize,
    kind: String,
    basis: String,
    metric_id: String,
    ray_weights: Vec<f64>,
    #[serde(flatten)]
    provenance: Provenance,
}

/// Write the forward matrix as little-endian f64, row-major, with a JSON
/// sidecar describing shape, basis and ray weights.
pub fn write_matrix(
    bin_path: impl AsRef<Path>,
    sidecar_path: impl AsRef<Path>,
    matrix: &TransformMatrix,
    provenance: &Provenance,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(bin_path)?);
    for i in 0..matrix.entries.nrows() {
        for j in 0..matrix.entries.ncols() {
            w.write_all(&matrix.entries[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    let sidecar = MatrixSidecar {
        rows: matrix.entries.nrows(),
        cols: matrix.entries.ncols(),
        kind: match matrix.kind {
            TransformKind::Scalar => "scalar".into(),
            TransformKind::OneForm => "one_form".into(),
        },
        basis: matrix.basis_descriptor.clone(),
        metric_id: matrix.metric_id.clone(),
        ray_weights: matrix.ray_weights.iter().cloned().collect(),
        provenance: provenance.clone(),
    };
    let mut s = BufWriter::new(File::create(sidecar_path)?);
    writeln!(s, "{}", serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Read a matrix written by [`write_matrix`]. Ray keys are not stored in
/// the file and come back empty.
pub fn read_matrix(
    bin_path: impl AsRef<Path>,
    sidecar_path: impl AsRef<Path>,
) -> Result<TransformMatrix> {
    let sidecar: MatrixSidecar = serde_json::from_reader(File::open(sidecar_path)?)?;
    let mut buf = Vec::new();
    File::open(bin_path)?.read_to_end(&mut buf)?;
    let expected = sidecar.rows * sidecar.cols * 8;
    if buf.len() != expected {
        return Err(Error::data(format!(
            "matrix payload is {} bytes, expected {expected}",
            buf.len()
        )));
    }
    let mut entries = DMatrix::zeros(sidecar.rows, sidecar.cols);
    for i in 0..sidecar.rows {
        for j in 0..sidecar.cols {
            let o = (i * sidecar.cols + j) * 8;
            entries[(i, j)] = f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        }
    }
    Ok(TransformMatrix {
        entries,
        ray_weights: nalgebra::DVector::from_vec(sidecar.ray_weights),
        kind: if sidecar.kind == "scalar" {
            TransformKind::Scalar
        } else {
            TransformKind::OneForm
        },
        basis_descriptor: sidecar.basis,
        metric_id: sidecar.metric_id,
        dropped_rays: Vec::new(),
        ray_keys: Vec::new(),
    })
}
