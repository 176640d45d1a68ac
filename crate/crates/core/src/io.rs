//! Serialized formats: the binary sample container, 16-bit PGM heatmaps
//! and CSV exports.
//!
//! Container layout, all little-endian:
//!
//! ```text
//! magic "DSAR"  | u32 format version | u64 header length
//! header JSON (self-describing: kind, dimensions, axes, provenance)
//! rows * cols complex samples, row-major, f64 (re, im) pairs
//! ```
//!
//! For residual maps the payload holds real f64 samples instead; the header
//! says which. Writes are bit-reproducible for identical inputs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{DatasetMeta, UnbDataSet, WidebandDataSet, WindowKind};
use crate::heightsolver::ResidualMap;
use crate::imaging::{ComplexImage, ImageGrid, ImageMeta};
use crate::interferometry::Interferogram;

const MAGIC: &[u8; 4] = b"DSAR";
const FORMAT_VERSION: u32 = 1;

/// What a container file holds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ContainerKind {
    WidebandDataset {
        omega_prime: Vec<f64>,
        meta: DatasetMeta,
    },
    UnbDataset {
        mu: Vec<f64>,
        t_phi: f64,
        n_fast: usize,
        window: WindowKind,
        meta: DatasetMeta,
    },
    Image {
        grid: ImageGrid,
        meta: ImageMeta,
    },
    Interferogram {
        grid: ImageGrid,
        registration_offset: [i64; 2],
    },
    ResidualMap {
        label: String,
        y: f64,
        x_axis: Vec<f64>,
        height_axis: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    kind: ContainerKind,
    rows: usize,
    cols: usize,
    /// "c64" for complex pairs, "f64" for real samples.
    sample: String,
}

fn write_header<W: Write>(w: &mut W, header: &Header) -> Result<()> {
    let json = serde_json::to_vec(header)
        .map_err(|e| Error::Format(format!("header encode: {e}")))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a sample container (bad magic)".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    serde_json::from_slice(&json).map_err(|e| Error::Format(format!("header decode: {e}")))
}

fn write_complex<W: Write>(w: &mut W, data: &Array2<Complex64>) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 16);
    for v in data.iter() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_complex<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Array2<Complex64>> {
    let mut buf = vec![0u8; rows * cols * 16];
    r.read_exact(&mut buf)?;
    let mut data = Array2::zeros((rows, cols));
    for (i, v) in data.iter_mut().enumerate() {
        let re = f64::from_le_bytes(buf[16 * i..16 * i + 8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[16 * i + 8..16 * i + 16].try_into().unwrap());
        *v = Complex64::new(re, im);
    }
    Ok(data)
}

fn write_real<W: Write>(w: &mut W, data: &Array2<f64>) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Anything the container can hold, as read back from disk.
#[derive(Debug)]
pub enum Container {
    WidebandDataset(WidebandDataSet),
    UnbDataset(UnbDataSet),
    Image(ComplexImage),
    Interferogram(Interferogram),
    ResidualMap {
        label: String,
        y: f64,
        x_axis: Vec<f64>,
        height_axis: Vec<f64>,
        values: Array2<f64>,
    },
}

pub fn write_wideband_dataset(path: &Path, ds: &WidebandDataSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (rows, cols) = ds.data.dim();
    write_header(
        &mut w,
        &Header {
            kind: ContainerKind::WidebandDataset {
                omega_prime: ds.omega_prime.clone(),
                meta: ds.meta.clone(),
            },
            rows,
            cols,
            sample: "c64".into(),
        },
    )?;
    write_complex(&mut w, &ds.data)
}

pub fn write_unb_dataset(path: &Path, ds: &UnbDataSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (rows, cols) = ds.data.dim();
    write_header(
        &mut w,
        &Header {
            kind: ContainerKind::UnbDataset {
                mu: ds.mu.clone(),
                t_phi: ds.t_phi,
                n_fast: ds.n_fast,
                window: ds.window,
                meta: ds.meta.clone(),
            },
            rows,
            cols,
            sample: "c64".into(),
        },
    )?;
    write_complex(&mut w, &ds.data)
}

pub fn write_image(path: &Path, img: &ComplexImage) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (rows, cols) = img.data.dim();
    write_header(
        &mut w,
        &Header {
            kind: ContainerKind::Image { grid: img.grid, meta: img.meta.clone() },
            rows,
            cols,
            sample: "c64".into(),
        },
    )?;
    write_complex(&mut w, &img.data)
}

pub fn write_interferogram(path: &Path, ig: &Interferogram) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (rows, cols) = ig.data.dim();
    write_header(
        &mut w,
        &Header {
            kind: ContainerKind::Interferogram {
                grid: ig.grid,
                registration_offset: ig.registration_offset,
            },
            rows,
            cols,
            sample: "c64".into(),
        },
    )?;
    write_complex(&mut w, &ig.data)
}

pub fn write_residual_map(path: &Path, map: &ResidualMap) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (rows, cols) = map.values.dim();
    let x_axis = (0..map.grid.nx()).map(|i| map.grid.x_at(i)).collect();
    let height_axis = (0..map.grid.nh()).map(|i| map.grid.h_at(i)).collect();
    write_header(
        &mut w,
        &Header {
            kind: ContainerKind::ResidualMap {
                label: map.label.to_string(),
                y: map.y,
                x_axis,
                height_axis,
            },
            rows,
            cols,
            sample: "f64".into(),
        },
    )?;
    write_real(&mut w, &map.values)
}

/// Read any container file.
pub fn read_container(path: &Path) -> Result<Container> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header(&mut r)?;
    match header.sample.as_str() {
        "c64" => {
            let data = read_complex(&mut r, header.rows, header.cols)?;
            match header.kind {
                ContainerKind::WidebandDataset { omega_prime, meta } => {
                    if omega_prime.len() != header.rows || meta.slow_time.len() != header.cols {
                        return Err(Error::Format("axis lengths disagree with dimensions".into()));
                    }
                    Ok(Container::WidebandDataset(WidebandDataSet { data, omega_prime, meta }))
                }
                ContainerKind::UnbDataset { mu, t_phi, n_fast, window, meta } => {
                    if mu.len() != header.rows || meta.slow_time.len() != header.cols {
                        return Err(Error::Format("axis lengths disagree with dimensions".into()));
                    }
                    Ok(Container::UnbDataset(UnbDataSet { data, mu, t_phi, n_fast, window, meta }))
                }
                ContainerKind::Image { grid, meta } => {
                    Ok(Container::Image(ComplexImage { grid, data, meta }))
                }
                ContainerKind::Interferogram { grid, registration_offset } => {
                    Ok(Container::Interferogram(Interferogram {
                        data,
                        grid,
                        registration_offset,
                    }))
                }
                ContainerKind::ResidualMap { .. } => {
                    Err(Error::Format("residual map with complex samples".into()))
                }
            }
        }
        "f64" => {
            let mut buf = vec![0u8; header.rows * header.cols * 8];
            r.read_exact(&mut buf)?;
            let mut values = Array2::zeros((header.rows, header.cols));
            for (i, v) in values.iter_mut().enumerate() {
                *v = f64::from_le_bytes(buf[8 * i..8 * i + 8].try_into().unwrap());
            }
            match header.kind {
                ContainerKind::ResidualMap { label, y, x_axis, height_axis } => {
                    Ok(Container::ResidualMap { label, y, x_axis, height_axis, values })
                }
                _ => Err(Error::Format("real samples in a complex container kind".into())),
            }
        }
        other => Err(Error::Format(format!("unknown sample type {other}"))),
    }
}

// --- PGM and CSV exports -------------------------------------------------

fn write_pgm(path: &Path, rows: usize, cols: usize, samples: &[u16]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{cols} {rows}\n65535\n")?;
    // PGM 16-bit samples are most-significant-byte first.
    let mut buf = Vec::with_capacity(samples.len() * 2);
    for s in samples {
        buf.extend_from_slice(&s.to_be_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Magnitude heatmap normalized to the image maximum.
pub fn export_magnitude_pgm(path: &Path, data: &Array2<Complex64>) -> Result<()> {
    let max = data.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    let samples: Vec<u16> = data
        .iter()
        .map(|v| (v.norm() * scale).round().clamp(0.0, 65535.0) as u16)
        .collect();
    let (rows, cols) = data.dim();
    write_pgm(path, rows, cols, &samples)
}

/// Phase heatmap mapping `(-pi, pi]` onto `[0, 65535]`.
pub fn export_phase_pgm(path: &Path, data: &Array2<Complex64>) -> Result<()> {
    let samples: Vec<u16> = data
        .iter()
        .map(|v| {
            let t = (v.arg() + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
            (t * 65535.0).round().clamp(0.0, 65535.0) as u16
        })
        .collect();
    let (rows, cols) = data.dim();
    write_pgm(path, rows, cols, &samples)
}

/// Residual heatmap normalized to the map maximum (low residual = dark).
pub fn export_residual_pgm(path: &Path, values: &Array2<f64>) -> Result<()> {
    let max = values.iter().copied().filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    let samples: Vec<u16> = values
        .iter()
        .map(|v| {
            if v.is_finite() {
                (v * scale).round().clamp(0.0, 65535.0) as u16
            } else {
                65535
            }
        })
        .collect();
    let (rows, cols) = values.dim();
    write_pgm(path, rows, cols, &samples)
}

/// RFC-style CSV field quoting: quote when the field contains a comma,
/// quote or newline, doubling embedded quotes.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Complex raster as CSV with one row per pixel.
pub fn export_complex_csv(
    path: &Path,
    data: &Array2<Complex64>,
    axis_names: [&str; 2],
    row_axis: &[f64],
    col_axis: &[f64],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{},{},re,im,magnitude,phase_rad",
        csv_field(axis_names[0]),
        csv_field(axis_names[1])
    )?;
    for ((i, j), v) in data.indexed_iter() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row_axis[i],
            col_axis[j],
            v.re,
            v.im,
            v.norm(),
            v.arg()
        )?;
    }
    Ok(())
}

/// Residual raster as CSV with one row per cell.
pub fn export_residual_csv(
    path: &Path,
    values: &Array2<f64>,
    row_axis: &[f64],
    col_axis: &[f64],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "height_m,x_m,residual")?;
    for ((i, j), v) in values.indexed_iter() {
        writeln!(w, "{},{},{}", row_axis[i], col_axis[j], v)?;
    }
    Ok(())
}
