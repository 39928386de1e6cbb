//! Synthetic signed-circle images, Difference-of-Gaussians pre-filter and
//! labelled image manifests.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis as NdAxis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Image2D;
use crate::io;

pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Parameters of the signed-circles generator. Radii are fractions of the
/// image side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub side: usize,
    pub radius_range: (f64, f64),
    pub amplitude: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(side: usize, seed: u64) -> Self {
        Self {
            side,
            radius_range: (0.06, 0.12),
            amplitude: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.radius_range;
        if self.side < 8 {
            return Err(Error::InvalidParameter(format!("image side {} is below 8 pixels", self.side)));
        }
        if !(lo > 0.0 && lo <= hi && hi < 0.5) {
            return Err(Error::InvalidParameter(format!("radius range {:?} must satisfy 0 < lo <= hi < 0.5", self.radius_range)));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude {} must be positive", self.amplitude)));
        }
        Ok(())
    }
}

/// Circle signs per class: class 1 has two positive and one negative circle,
/// class 2 one positive and two negative.
pub fn class_signs(class: i64) -> Result<[f64; 3]> {
    match class {
        1 => Ok([1.0, 1.0, -1.0]),
        2 => Ok([1.0, -1.0, -1.0]),
        other => Err(Error::InvalidParameter(format!("synthetic class must be 1 or 2, got {other}"))),
    }
}

#[derive(Debug, Clone, Copy)]
struct Circle {
    cx: f64,
    cy: f64,
    r: f64,
}

/// Pixels between the anti-aliased edges of two circles.
const GAP: f64 = 3.0;

fn place_circles(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<[Circle; 3]> {
    let side = spec.side as f64;
    let (lo, hi) = (spec.radius_range.0 * side, spec.radius_range.1 * side);
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let circles: [Circle; 3] = std::array::from_fn(|_| {
            let r = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            // keep the rim one pixel inside the frame
            let margin = r + 1.0;
            let span = (margin, side - 1.0 - margin);
            let mut coord = || if span.1 > span.0 { rng.random_range(span.0..=span.1) } else { side / 2.0 };
            let (cx, cy) = (coord(), coord());
            Circle { cx, cy, r }
        });
        let disjoint = (0..3).all(|i| {
            (i + 1..3).all(|j| {
                let (a, b) = (circles[i], circles[j]);
                (a.cx - b.cx).hypot(a.cy - b.cy) >= a.r + b.r + GAP
            })
        });
        if disjoint {
            return Ok(circles);
        }
    }
    Err(Error::InfeasiblePlacement(MAX_PLACEMENT_ATTEMPTS))
}

/// One image of `class`; image `index` draws from its own ChaCha stream, so
/// output is independent of generation order.
pub fn generate_image(spec: &SyntheticSpec, class: i64, index: u64) -> Result<Image2D> {
    spec.validate()?;
    let signs = class_signs(class)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(((class as u64) << 40) | index);
    let circles = place_circles(spec, &mut rng)?;
    let values = Array2::from_shape_fn((spec.side, spec.side), |(row, col)| {
        let (px, py) = (col as f64 + 0.5, row as f64 + 0.5);
        circles
            .iter()
            .zip(signs)
            .map(|(c, s)| {
                let d = (px - c.cx).hypot(py - c.cy);
                // linear one-pixel rim centred on the radius
                s * spec.amplitude * (c.r + 0.5 - d).clamp(0.0, 1.0)
            })
            .sum()
    });
    Image2D::square(values)
}

/// `n_per_class` images of class 1 followed by `n_per_class` of class 2.
pub fn generate_synthetic(spec: &SyntheticSpec, n_per_class: usize) -> Result<Vec<(Image2D, i64)>> {
    generate_range(spec, 0, n_per_class)
}

/// Images with per-class indices `start..start + n` for both classes; used to
/// draw disjoint train and test sets from one seed.
pub fn generate_range(spec: &SyntheticSpec, start: usize, n: usize) -> Result<Vec<(Image2D, i64)>> {
    if n == 0 {
        return Err(Error::InvalidParameter("samples per class must be at least 1".into()));
    }
    spec.validate()?;
    [1i64, 2]
        .iter()
        .flat_map(|&c| (start..start + n).map(move |i| (c, i as u64)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(c, i)| Ok((generate_image(spec, c, i)?, c)))
        .collect()
}

/// Number of 8-connected regions where `sign · value > threshold`.
pub fn count_regions(img: &Image2D, sign: f64, threshold: f64) -> usize {
    let v = img.values();
    let (rows, cols) = v.dim();
    let mut seen = Array2::from_elem((rows, cols), false);
    let inside = |r: usize, c: usize| sign * v[[r, c]] > threshold;
    let mut regions = 0;
    for r0 in 0..rows {
        for c0 in 0..cols {
            if seen[[r0, c0]] || !inside(r0, c0) {
                continue;
            }
            regions += 1;
            seen[[r0, c0]] = true;
            let mut stack = vec![(r0, c0)];
            while let Some((r, c)) = stack.pop() {
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if !seen[[nr, nc]] && inside(nr, nc) {
                            seen[[nr, nc]] = true;
                            stack.push((nr, nc));
                        }
                    }
                }
            }
        }
    }
    regions
}

pub const DEFAULT_DOG_SIGMAS: (f64, f64) = (1.0, 2.0);

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

/// Index into `0..n` under half-sample symmetric reflection (`d c b a | a b c d`).
fn reflect(i: i64, n: usize) -> usize {
    let period = 2 * n as i64;
    let m = i.rem_euclid(period);
    (if m < n as i64 { m } else { period - 1 - m }) as usize
}

fn convolve_lines(values: &Array2<f64>, kernel: &[f64], along: NdAxis) -> Array2<f64> {
    let radius = (kernel.len() / 2) as i64;
    let mut out = Array2::zeros(values.dim());
    for (src, mut dst) in values.lanes(along).into_iter().zip(out.lanes_mut(along)) {
        let n = src.len();
        for i in 0..n {
            dst[i] = kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * src[reflect(i as i64 + j as i64 - radius, n)])
                .sum();
        }
    }
    out
}

/// Separable Gaussian blur with reflective boundaries; `sigma` in pixels.
pub fn gaussian_blur(img: &Image2D, sigma: f64) -> Result<Image2D> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    let k = gaussian_kernel(sigma);
    let rows_done = convolve_lines(img.values(), &k, NdAxis(1));
    let both = convolve_lines(&rows_done, &k, NdAxis(0));
    Image2D::new(*img.x_axis(), *img.y_axis(), both)
}

/// `G_{σ1} * img - G_{σ2} * img` with `0 < σ1 < σ2` in pixels.
pub fn dog_filter(img: &Image2D, sigma1: f64, sigma2: f64) -> Result<Image2D> {
    if !(sigma1 > 0.0 && sigma1 < sigma2) {
        return Err(Error::InvalidParameter(format!(
            "DoG sigmas must satisfy 0 < sigma1 < sigma2, got {sigma1}, {sigma2}"
        )));
    }
    let a = gaussian_blur(img, sigma1)?;
    let b = gaussian_blur(img, sigma2)?;
    Image2D::new(*img.x_axis(), *img.y_axis(), a.values() - b.values())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct Row {
    path: String,
    label: String,
    #[serde(default)]
    split: Option<String>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries whose split tag equals `split`.
    pub fn split(&self, split: &str) -> Manifest {
        Manifest {
            entries: self
                .entries
                .iter()
                .filter(|e| e.split.as_deref() == Some(split))
                .cloned()
                .collect(),
        }
    }

    pub fn labels(&self) -> Vec<i64> {
        let mut l: Vec<i64> = self.entries.iter().map(|e| e.label).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    fn warn_duplicates(&self) {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.path) {
                log::warn!("duplicate manifest path {}", e.path.display());
            }
        }
    }
}

/// Reads a `path,label[,split]` CSV. Relative paths resolve against the
/// manifest's directory; every file must exist.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let base = path.parent().unwrap_or(Path::new(""));
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("path") || headers.get(1) != Some("label") {
        return Err(Error::Manifest {
            path: path.into(),
            row: 1,
            msg: "header must start with `path,label`".into(),
        });
    }
    let mut entries = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        // header is line 1
        let line = i + 2;
        let bad = |msg: String| Error::Manifest {
            path: path.into(),
            row: line,
            msg,
        };
        let row = row.map_err(|e| bad(e.to_string()))?;
        let label: i64 = row
            .label
            .parse()
            .ok()
            .filter(|l| *l >= 0)
            .ok_or_else(|| bad(format!("label `{}` is not a non-negative integer", row.label)))?;
        let file = base.join(&row.path);
        if !file.is_file() {
            return Err(bad(format!("missing file {}", file.display())));
        }
        entries.push(ManifestEntry {
            path: file,
            label,
            split: row.split.filter(|s| !s.is_empty()),
        });
    }
    let m = Manifest { entries };
    if m.is_empty() {
        return Err(Error::EmptySamples);
    }
    m.warn_duplicates();
    Ok(m)
}

/// Writes the manifest with paths relative to its directory where possible.
pub fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let with_split = m.entries.iter().any(|e| e.split.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    if with_split {
        w.write_record(["path", "label", "split"])?;
    } else {
        w.write_record(["path", "label"])?;
    }
    for e in &m.entries {
        let p = e.path.strip_prefix(base).unwrap_or(&e.path).to_string_lossy().into_owned();
        let mut rec = vec![p, e.label.to_string()];
        if with_split {
            rec.push(e.split.clone().unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    io::write_atomic(path, &bytes)
}

/// Builds a manifest from `dir/<label>/*.png`, sorted by label then file name.
pub fn ingest_folder(dir: &Path) -> Result<Manifest> {
    let read = |d: &Path| -> Result<Vec<PathBuf>> {
        let mut v: Vec<PathBuf> = fs::read_dir(d)
            .map_err(|e| Error::io(d, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(d, err)))
            .collect::<Result<_>>()?;
        v.sort();
        Ok(v)
    };
    let mut classes = Vec::new();
    for sub in read(dir)?.into_iter().filter(|p| p.is_dir()) {
        let name = sub.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let label: i64 = name.parse().ok().filter(|l| *l >= 0).ok_or_else(|| Error::Manifest {
            path: sub.clone(),
            row: 0,
            msg: format!("class directory `{name}` is not a non-negative integer label"),
        })?;
        classes.push((label, sub));
    }
    classes.sort();
    let mut entries = Vec::new();
    for (label, sub) in classes {
        let pngs: Vec<PathBuf> = read(&sub)?
            .into_iter()
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
            .collect();
        if pngs.is_empty() {
            return Err(Error::EmptyClass(label));
        }
        entries.extend(pngs.into_iter().map(|path| ManifestEntry { path, label, split: None }));
    }
    if entries.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(Manifest { entries })
}

/// Loads every entry (PNG to `[0, 1]`, or a native container), applying
/// the DoG filter first when `dog` is given.
pub fn load_samples(m: &Manifest, dog: Option<(f64, f64)>) -> Result<Vec<(Image2D, i64)>> {
    m.entries
        .par_iter()
        .map(|e| {
            let img = io::load_image(&e.path)?;
            let img = match dog {
                Some((s1, s2)) => dog_filter(&img, s1, s2)?,
                None => img,
            };
            Ok((img, e.label))
        })
        .collect()
}

/// Writes samples as native containers `<prefix>_<index>` under `dir`, with
/// optional signed PNG previews, and returns their manifest entries.
pub fn write_samples(dir: &Path, prefix: &str, samples: &[(Image2D, i64)], split: Option<&str>, previews: bool) -> Result<Vec<ManifestEntry>> {
    let preview_dir = dir.join("previews");
    let target = if previews { &preview_dir } else { dir };
    fs::create_dir_all(target).map_err(|e| Error::io(target, e))?;
    samples
        .par_iter()
        .enumerate()
        .map(|(i, (img, label))| {
            let stem = dir.join(format!("{prefix}_{i:05}"));
            let path = stem.with_extension("f64");
            io::save_image_container(img, &path)?;
            if previews {
                io::save_preview_png(img, &preview_dir.join(format!("{prefix}_{i:05}.png")))?;
            }
            Ok(ManifestEntry {
                path,
                label: *label,
                split: split.map(str::to_owned),
            })
        })
        .collect()
}
