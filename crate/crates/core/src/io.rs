//! On-disk formats.
//!
//! The native container is a pair of files sharing a stem: `<stem>.f64` holds
//! the raw little-endian `f64` payload and `<stem>.json` a header describing
//! its shape and geometry. Either path may be passed to the readers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Image2D, Signal1D};
use crate::radon::Sinogram;
use crate::rscdt::RscdtFeature;
use crate::transforms1d::{QuantileFn, ScdtTuple};

pub const RSCDT_LAYOUT: &str = "pos_star,pos_mass,neg_star,neg_mass";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Signal1d,
    Image2d,
    Sinogram,
    Scdt,
    Rscdt,
    Basis,
}

/// JSON sidecar of a native container. Fields beyond `kind` and `shape` are
/// present only for the kinds that need them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: Kind,
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axes: Vec<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_axis: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
}

impl Header {
    pub fn new(kind: Kind, shape: Vec<usize>) -> Self {
        Self {
            kind,
            shape,
            axes: Vec::new(),
            t_axis: None,
            angles: None,
            reference: None,
            pos_mass: None,
            neg_mass: None,
            layout: None,
        }
    }

    fn expect_kind(&self, kind: Kind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::UnsupportedFormat(format!(
                "container holds {:?}, expected {:?}",
                self.kind, kind
            )));
        }
        Ok(())
    }

    fn missing(field: &str) -> Error {
        Error::UnsupportedFormat(format!("header lacks `{field}`"))
    }
}

fn stem_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("f64"), path.with_extension("json"))
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_container(path: &Path, header: &Header, data: &[f64]) -> Result<()> {
    let expected: usize = header.shape.iter().product();
    if expected != data.len() {
        return Err(Error::ShapeMismatch(format!(
            "header shape {:?} holds {expected} values, payload has {}",
            header.shape,
            data.len()
        )));
    }
    let (payload, sidecar) = stem_paths(path);
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_atomic(&payload, &bytes)?;
    write_atomic(&sidecar, &serde_json::to_vec_pretty(header)?)
}

pub fn read_container(path: &Path) -> Result<(Header, Vec<f64>)> {
    let (payload, sidecar) = stem_paths(path);
    let text = fs::read(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let header: Header = serde_json::from_slice(&text)?;
    let bytes = fs::read(&payload).map_err(|e| Error::io(&payload, e))?;
    let expected: usize = header.shape.iter().product();
    if bytes.len() != expected * 8 {
        return Err(Error::ShapeMismatch(format!(
            "header shape {:?} needs {} bytes, {} has {}",
            header.shape,
            expected * 8,
            payload.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, data))
}

fn shape2(header: &Header) -> Result<(usize, usize)> {
    match header.shape[..] {
        [r, c] => Ok((r, c)),
        _ => Err(Error::ShapeMismatch(format!("expected a 2-d shape, got {:?}", header.shape))),
    }
}

pub fn save_signal(s: &Signal1D, path: &Path) -> Result<()> {
    let mut h = Header::new(Kind::Signal1d, vec![s.axis().count()]);
    h.axes = vec![*s.axis()];
    write_container(path, &h, s.values())
}

pub fn load_signal(path: &Path) -> Result<Signal1D> {
    let (h, data) = read_container(path)?;
    h.expect_kind(Kind::Signal1d)?;
    match (&h.shape[..], &h.axes[..]) {
        ([n], [axis]) if *n == axis.count() => Signal1D::new(*axis, data),
        _ => Err(Error::ShapeMismatch(format!("signal header shape {:?} disagrees with its axis", h.shape))),
    }
}

/// Stores rows (`y`) then columns (`x`), row-major.
pub fn save_image_container(img: &Image2D, path: &Path) -> Result<()> {
    let (rows, cols) = img.shape();
    let mut h = Header::new(Kind::Image2d, vec![rows, cols]);
    h.axes = vec![*img.y_axis(), *img.x_axis()];
    write_container(path, &h, &img.values().iter().copied().collect::<Vec<_>>())
}

pub fn load_image_container(path: &Path) -> Result<Image2D> {
    let (h, data) = read_container(path)?;
    h.expect_kind(Kind::Image2d)?;
    let (rows, cols) = shape2(&h)?;
    let [y_axis, x_axis] = h.axes[..] else {
        return Err(Error::ShapeMismatch("image header needs two axes".into()));
    };
    if y_axis.count() != rows || x_axis.count() != cols {
        return Err(Error::ShapeMismatch(format!("image header shape {:?} disagrees with its axes", h.shape)));
    }
    let values = Array2::from_shape_vec((rows, cols), data).expect("length checked against shape");
    Image2D::new(x_axis, y_axis, values)
}

/// Loads an image by extension: `.png` as grayscale in `[0, 1]`, `.f64` or
/// `.json` as a native container.
pub fn load_image(path: &Path) -> Result<Image2D> {
    match extension(path).as_deref() {
        Some("png") => load_png(path),
        Some("f64") | Some("json") => load_image_container(path),
        other => Err(Error::UnsupportedFormat(format!(
            "cannot load image from extension {:?}",
            other.unwrap_or("")
        ))),
    }
}

/// Saves a native container, or a signed preview PNG for `.png` paths.
pub fn save_image(img: &Image2D, path: &Path) -> Result<()> {
    match extension(path).as_deref() {
        Some("png") => save_preview_png(img, path).map(|_| ()),
        _ => save_image_container(img, path),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}

/// Grayscale PNG (8 or 16 bit) mapped linearly to `[0, 1]` on the `[-1, 1]^2`
/// domain. PNG rows map to image rows in file order.
pub fn load_png(path: &Path) -> Result<Image2D> {
    let img = image::open(path)?;
    let (max, luma) = match img.color() {
        image::ColorType::L8 | image::ColorType::La8 | image::ColorType::Rgb8 | image::ColorType::Rgba8 => {
            (255.0, img.to_luma8().pixels().map(|p| p.0[0] as f64).collect::<Vec<_>>())
        }
        _ => (65535.0, img.to_luma16().pixels().map(|p| p.0[0] as f64).collect()),
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = Array2::from_shape_vec((h, w), luma.into_iter().map(|v| v / max).collect())
        .expect("pixel count matches dimensions");
    Image2D::square(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreviewSidecar {
    /// Absolute value that maps to 0 or 255; 128 is zero.
    pub scale: f64,
}

/// Writes an 8-bit preview with 0 at grey level 128 and `±scale` at the
/// extremes, plus a `.json` sidecar recording `scale`. Returns `scale`.
pub fn save_preview_png(img: &Image2D, path: &Path) -> Result<f64> {
    let scale = img.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (rows, cols) = img.shape();
    let pixels: Vec<u8> = img
        .values()
        .iter()
        .map(|&v| {
            let g = if scale > 0.0 { 128.0 + 127.0 * v / scale } else { 128.0 };
            g.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    let buf = image::GrayImage::from_raw(cols as u32, rows as u32, pixels).expect("buffer sized from shape");
    let mut bytes = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    write_atomic(path, &bytes)?;
    write_atomic(&path.with_extension("json"), &serde_json::to_vec_pretty(&PreviewSidecar { scale })?)?;
    Ok(scale)
}

pub fn save_sinogram(s: &Sinogram, path: &Path) -> Result<()> {
    let (n_t, n_a) = s.values().dim();
    let mut h = Header::new(Kind::Sinogram, vec![n_t, n_a]);
    h.t_axis = Some(*s.t_axis());
    h.angles = Some(s.angles().to_vec());
    write_container(path, &h, &s.values().iter().copied().collect::<Vec<_>>())
}

pub fn load_sinogram(path: &Path) -> Result<Sinogram> {
    let (h, data) = read_container(path)?;
    h.expect_kind(Kind::Sinogram)?;
    let (rows, cols) = shape2(&h)?;
    let t_axis = h.t_axis.ok_or_else(|| Header::missing("t_axis"))?;
    let angles = h.angles.clone().ok_or_else(|| Header::missing("angles"))?;
    let values = Array2::from_shape_vec((rows, cols), data).expect("length checked against shape");
    Sinogram::new(t_axis, angles, values)
}

/// Rows: `pos_star`, `neg_star`; masses live in the header.
pub fn save_scdt(t: &ScdtTuple, path: &Path) -> Result<()> {
    let n = t.axis().count();
    let mut h = Header::new(Kind::Scdt, vec![2, n]);
    h.reference = Some(*t.axis());
    h.pos_mass = Some(t.pos_mass);
    h.neg_mass = Some(t.neg_mass);
    let mut data = t.pos_star.values().to_vec();
    data.extend_from_slice(t.neg_star.values());
    write_container(path, &h, &data)
}

pub fn load_scdt(path: &Path) -> Result<ScdtTuple> {
    let (h, data) = read_container(path)?;
    h.expect_kind(Kind::Scdt)?;
    let axis = h.reference.ok_or_else(|| Header::missing("ref"))?;
    if h.shape != [2, axis.count()] {
        return Err(Error::ShapeMismatch(format!("scdt header shape {:?} disagrees with its axis", h.shape)));
    }
    let (pos, neg) = data.split_at(axis.count());
    ScdtTuple::new(
        QuantileFn::new(axis, pos.to_vec())?,
        h.pos_mass.ok_or_else(|| Header::missing("pos_mass"))?,
        QuantileFn::new(axis, neg.to_vec())?,
        h.neg_mass.ok_or_else(|| Header::missing("neg_mass"))?,
    )
}

/// One row per angle laid out as [`RSCDT_LAYOUT`], without flattening weights.
pub fn save_rscdt(f: &RscdtFeature, path: &Path) -> Result<()> {
    let n_t = f.t_axis().count();
    let mut h = Header::new(Kind::Rscdt, vec![f.n_angles(), 2 * n_t + 2]);
    h.t_axis = Some(*f.t_axis());
    h.angles = Some(f.angles().to_vec());
    h.layout = Some(RSCDT_LAYOUT.into());
    let mut data = Vec::with_capacity(f.n_angles() * (2 * n_t + 2));
    for t in f.tuples() {
        data.extend_from_slice(t.pos_star.values());
        data.push(t.pos_mass);
        data.extend_from_slice(t.neg_star.values());
        data.push(t.neg_mass);
    }
    write_container(path, &h, &data)
}

pub fn load_rscdt(path: &Path) -> Result<RscdtFeature> {
    let (h, data) = read_container(path)?;
    h.expect_kind(Kind::Rscdt)?;
    if h.layout.as_deref() != Some(RSCDT_LAYOUT) {
        return Err(Error::UnsupportedFormat(format!("unknown rscdt layout {:?}", h.layout)));
    }
    let t_axis = h.t_axis.ok_or_else(|| Header::missing("t_axis"))?;
    let angles = h.angles.clone().ok_or_else(|| Header::missing("angles"))?;
    let n_t = t_axis.count();
    if h.shape != [angles.len(), 2 * n_t + 2] {
        return Err(Error::ShapeMismatch(format!("rscdt header shape {:?} disagrees with its geometry", h.shape)));
    }
    let tuples = data
        .chunks(2 * n_t + 2)
        .map(|c| {
            ScdtTuple::new(
                QuantileFn::new(t_axis, c[..n_t].to_vec())?,
                c[n_t],
                QuantileFn::new(t_axis, c[n_t + 1..2 * n_t + 1].to_vec())?,
                c[2 * n_t + 1],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    RscdtFeature::new(t_axis, angles, tuples)
}

/// Two-column CSV `coordinate,value`.
pub fn write_signal_csv(s: &Signal1D, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["coordinate", "value"])?;
    for (x, v) in s.axis().coords().iter().zip(s.values()) {
        w.write_record([x.to_string(), v.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Projection at angle index `k` as a two-column CSV.
pub fn write_projection_csv(s: &Sinogram, k: usize, path: &Path) -> Result<()> {
    if k >= s.n_angles() {
        return Err(Error::InvalidParameter(format!(
            "angle index {k} out of range for {} angles",
            s.n_angles()
        )));
    }
    write_signal_csv(&s.column(k), path)
}
