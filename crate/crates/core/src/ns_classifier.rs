//! Nearest-subspace classification in transform space.
//!
//! Each class is modelled by the span of its flattened training features;
//! a sample goes to the class whose span leaves the smallest projection
//! residual.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Image2D};
use crate::io::{self, Header, Kind};
use crate::rscdt::{flatten, rcdt, rscdt, FeatureConfig, FlatFeature};

pub const FORMAT_VERSION: u32 = 1;
const ORTHONORMAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformKind {
    #[serde(rename = "rscdt")]
    Rscdt,
    /// R-CDT of the absolute-valued image.
    #[serde(rename = "rcdt-abs")]
    RcdtAbs,
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rscdt" => Ok(Self::Rscdt),
            "rcdt-abs" => Ok(Self::RcdtAbs),
            other => Err(Error::InvalidParameter(format!(
                "unknown transform kind `{other}` (expected rscdt or rcdt-abs)"
            ))),
        }
    }
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rscdt => "rscdt",
            Self::RcdtAbs => "rcdt-abs",
        })
    }
}

/// Everything needed to turn an image into a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub kind: TransformKind,
    pub feature: FeatureConfig,
    pub x_axis: Axis,
    pub y_axis: Axis,
}

impl FeatureSpace {
    pub fn new(kind: TransformKind, feature: FeatureConfig, x_axis: Axis, y_axis: Axis) -> Self {
        Self {
            kind,
            feature,
            x_axis,
            y_axis,
        }
    }

    pub fn for_image(kind: TransformKind, feature: FeatureConfig, img: &Image2D) -> Self {
        Self::new(kind, feature, *img.x_axis(), *img.y_axis())
    }

    pub fn extract(&self, img: &Image2D) -> Result<FlatFeature> {
        if img.x_axis() != &self.x_axis || img.y_axis() != &self.y_axis {
            return Err(Error::ConfigMismatch(format!(
                "image is {:?} on {:?} x {:?}, model expects {:?} x {:?}",
                img.shape(),
                img.x_axis(),
                img.y_axis(),
                self.x_axis,
                self.y_axis
            )));
        }
        match self.kind {
            TransformKind::Rscdt => Ok(flatten(&rscdt(img, &self.feature)?)),
            TransformKind::RcdtAbs => Ok(rcdt(&img.abs(), &self.feature)?.flatten()),
        }
    }

    pub fn extract_all(&self, imgs: &[&Image2D]) -> Result<Vec<FlatFeature>> {
        imgs.par_iter().map(|img| self.extract(img)).collect()
    }
}

/// Orthonormal basis of one class span, `dim x rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBasis {
    pub label: i64,
    pub basis: DMatrix<f64>,
}

impl ClassBasis {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `‖v‖² - ‖Bᵀv‖²`, clamped at zero.
    pub fn residual(&self, v: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        let coeffs = self.basis.tr_mul(&v);
        (v.norm_squared() - coeffs.norm_squared()).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel {
    space: FeatureSpace,
    rank_cutoff: Option<f64>,
    dim: usize,
    /// Sorted by label.
    classes: Vec<ClassBasis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: i64,
    /// `(label, residual)` for every class, by ascending label.
    pub residuals: Vec<(i64, f64)>,
}

/// Orthonormal basis of the column span of `x` (`dim x n`): thin QR, then an
/// SVD of `R` keeping `σ_i > tol · σ_max`. `tol` defaults to
/// `max(dim, n) · ε`.
pub fn orthonormal_span(x: &DMatrix<f64>, rank_cutoff: Option<f64>) -> DMatrix<f64> {
    let (dim, n) = x.shape();
    let qr = x.clone().qr();
    let q = qr.q();
    let svd = qr.r().svd(true, false);
    let u = svd.u.expect("requested U");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let tol = rank_cutoff.unwrap_or(dim.max(n) as f64 * f64::EPSILON);
    let mut keep: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > tol * sigma_max).collect();
    keep.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let mut basis = DMatrix::zeros(dim, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &(&q * u.column(i)));
    }
    basis
}

/// Trains on images: transforms every sample, then builds the class spans.
pub fn train(samples: &[(Image2D, i64)], kind: TransformKind, feature: FeatureConfig, rank_cutoff: Option<f64>) -> Result<SubspaceModel> {
    let first = samples.first().ok_or(Error::EmptySamples)?;
    let space = FeatureSpace::for_image(kind, feature, &first.0);
    let imgs: Vec<&Image2D> = samples.iter().map(|(img, _)| img).collect();
    let feats = space.extract_all(&imgs)?;
    let labeled: Vec<(FlatFeature, i64)> = feats.into_iter().zip(samples.iter().map(|s| s.1)).collect();
    train_on_features(space, &labeled, rank_cutoff)
}

/// Builds the class spans from precomputed features of `space`.
pub fn train_on_features(space: FeatureSpace, samples: &[(FlatFeature, i64)], rank_cutoff: Option<f64>) -> Result<SubspaceModel> {
    let dim = samples.first().ok_or(Error::EmptySamples)?.0.len();
    if let Some(c) = rank_cutoff {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParameter(format!("rank cutoff {c} must lie in (0, 1)")));
        }
    }
    let mut by_label: BTreeMap<i64, Vec<&FlatFeature>> = BTreeMap::new();
    for (f, label) in samples {
        if f.len() != dim {
            return Err(Error::ShapeMismatch(format!("feature of length {} among length {dim}", f.len())));
        }
        by_label.entry(*label).or_default().push(f);
    }
    let classes = by_label
        .into_par_iter()
        .map(|(label, feats)| {
            let x = DMatrix::from_fn(dim, feats.len(), |i, j| feats[j].as_slice()[i]);
            let basis = orthonormal_span(&x, rank_cutoff);
            if basis.ncols() == 0 {
                return Err(Error::EmptyClass(label));
            }
            log::debug!("class {label}: {} samples, rank {}", feats.len(), basis.ncols());
            Ok(ClassBasis { label, basis })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubspaceModel {
        space,
        rank_cutoff,
        dim,
        classes,
    })
}

impl SubspaceModel {
    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn classes(&self) -> &[ClassBasis] {
        &self.classes
    }

    pub fn labels(&self) -> Vec<i64> {
        self.classes.iter().map(|c| c.label).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank_cutoff(&self) -> Option<f64> {
        self.rank_cutoff
    }

    fn class(&self, label: i64) -> Result<&ClassBasis> {
        self.classes
            .iter()
            .find(|c| c.label == label)
            .ok_or(Error::UnknownLabel(label))
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::ConfigMismatch(format!(
                "feature has length {}, model expects {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn residual_of(&self, v: &FlatFeature, label: i64) -> Result<f64> {
        self.check_dim(v.as_slice())?;
        Ok(self.class(label)?.residual(v.as_slice()))
    }

    pub fn residual(&self, img: &Image2D, label: i64) -> Result<f64> {
        self.residual_of(&self.space.extract(img)?, label)
    }

    /// Class with the smallest residual; ties go to the smallest label.
    pub fn predict_feature(&self, v: &FlatFeature) -> Result<Prediction> {
        self.check_dim(v.as_slice())?;
        let residuals: Vec<(i64, f64)> = self
            .classes
            .iter()
            .map(|c| (c.label, c.residual(v.as_slice())))
            .collect();
        let mut best = residuals[0];
        for &(label, r) in &residuals[1..] {
            if r < best.1 {
                best = (label, r);
            } else if r == best.1 {
                log::warn!("residual tie between classes {} and {label}", best.0);
            }
        }
        Ok(Prediction {
            label: best.0,
            residuals,
        })
    }

    pub fn predict(&self, img: &Image2D) -> Result<Prediction> {
        self.predict_feature(&self.space.extract(img)?)
    }

    /// Predictions in input order, computed in parallel.
    pub fn predict_batch(&self, imgs: &[&Image2D]) -> Result<Vec<Prediction>> {
        imgs.par_iter().map(|img| self.predict(img)).collect()
    }

    pub fn predict_features(&self, feats: &[FlatFeature]) -> Result<Vec<Prediction>> {
        feats.par_iter().map(|f| self.predict_feature(f)).collect()
    }

    /// Errors unless `space` produces the same features the model was trained on.
    pub fn check_compatible(&self, space: &FeatureSpace) -> Result<()> {
        if space != &self.space {
            return Err(Error::ConfigMismatch(format!(
                "model was trained with {:?}, data uses {:?}",
                self.space, space
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub accuracy: f64,
    pub labels: Vec<i64>,
    /// `confusion[i][j]`: samples of true class `labels[i]` predicted as `labels[j]`.
    pub confusion: Vec<Vec<usize>>,
    pub truth: Vec<i64>,
    pub predictions: Vec<Prediction>,
}

pub fn evaluate(model: &SubspaceModel, samples: &[(Image2D, i64)]) -> Result<Report> {
    let imgs: Vec<&Image2D> = samples.iter().map(|(i, _)| i).collect();
    let truth: Vec<i64> = samples.iter().map(|s| s.1).collect();
    check_labels(model, &truth)?;
    let predictions = model.predict_batch(&imgs)?;
    Ok(report(model, truth, predictions))
}

pub fn evaluate_features(model: &SubspaceModel, samples: &[(FlatFeature, i64)]) -> Result<Report> {
    let truth: Vec<i64> = samples.iter().map(|s| s.1).collect();
    check_labels(model, &truth)?;
    let feats: Vec<FlatFeature> = samples.iter().map(|s| s.0.clone()).collect();
    let predictions = model.predict_features(&feats)?;
    Ok(report(model, truth, predictions))
}

fn check_labels(model: &SubspaceModel, truth: &[i64]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::EmptySamples);
    }
    for &t in truth {
        model.class(t)?;
    }
    Ok(())
}

fn report(model: &SubspaceModel, truth: Vec<i64>, predictions: Vec<Prediction>) -> Report {
    let labels = model.labels();
    let index = |l: i64| labels.iter().position(|&x| x == l).expect("label from model");
    let mut confusion = vec![vec![0; labels.len()]; labels.len()];
    let mut correct = 0;
    for (t, p) in truth.iter().zip(&predictions) {
        confusion[index(*t)][index(p.label)] += 1;
        correct += usize::from(*t == p.label);
    }
    Report {
        accuracy: correct as f64 / truth.len() as f64,
        labels,
        confusion,
        truth,
        predictions,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    space: FeatureSpace,
    rank_cutoff: Option<f64>,
    dim: usize,
    classes: Vec<ClassEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassEntry {
    label: i64,
    rank: usize,
    basis: String,
}

impl SubspaceModel {
    /// Writes `model.json` and one basis container per class into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::new();
        for c in &self.classes {
            let name = format!("basis_{}.f64", c.label);
            let header = Header::new(Kind::Basis, vec![self.dim, c.rank()]);
            // row-major payload
            let data: Vec<f64> = c.basis.transpose().as_slice().to_vec();
            io::write_container(&dir.join(&name), &header, &data)?;
            entries.push(ClassEntry {
                label: c.label,
                rank: c.rank(),
                basis: name,
            });
        }
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            space: self.space,
            rank_cutoff: self.rank_cutoff,
            dim: self.dim,
            classes: entries,
        };
        io::write_atomic(&dir.join("model.json"), &serde_json::to_vec_pretty(&file)?)
    }

    /// Reads a model directory, checking orthonormality of every basis.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("model.json");
        let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let file: ModelFile = serde_json::from_slice(&text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedFormat(format!("model format version {}", file.format_version)));
        }
        let mut classes = Vec::with_capacity(file.classes.len());
        for entry in &file.classes {
            let (header, data) = io::read_container(&dir.join(&entry.basis))?;
            if header.kind != Kind::Basis || header.shape != [file.dim, entry.rank] {
                return Err(Error::ShapeMismatch(format!(
                    "basis for class {} has shape {:?}, expected [{}, {}]",
                    entry.label, header.shape, file.dim, entry.rank
                )));
            }
            let basis = DMatrix::from_row_slice(file.dim, entry.rank, &data);
            let gram = basis.tr_mul(&basis);
            let off = (gram - DMatrix::identity(entry.rank, entry.rank)).amax();
            if !(off <= ORTHONORMAL_TOL) {
                return Err(Error::NotOrthonormal(entry.label));
            }
            classes.push(ClassBasis {
                label: entry.label,
                basis,
            });
        }
        if classes.is_empty() {
            return Err(Error::EmptySamples);
        }
        classes.sort_by_key(|c| c.label);
        Ok(Self {
            space: file.space,
            rank_cutoff: file.rank_cutoff,
            dim: file.dim,
            classes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ax(n: usize) -> Axis {
        Axis::new(-1.0, 1.0, n).unwrap()
    }

    fn space(dim_side: usize) -> FeatureSpace {
        FeatureSpace::new(TransformKind::Rscdt, FeatureConfig::new(4), ax(dim_side), ax(dim_side))
    }

    fn random_features(n: usize, dim: usize, seed: u64) -> Vec<FlatFeature> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| FlatFeature::from_vec((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect()
    }

    fn labeled(feats: &[FlatFeature], label: i64) -> Vec<(FlatFeature, i64)> {
        feats.iter().map(|f| (f.clone(), label)).collect()
    }

    #[test]
    fn one_sample_gives_normalized_feature() {
        let f = random_features(2, 30, 1);
        let mut samples = labeled(&f[..1], 0);
        samples.extend(labeled(&f[1..], 1));
        let m = train_on_features(space(8), &samples, None).unwrap();
        for (c, v) in m.classes().iter().zip(&f) {
            assert_eq!(c.rank(), 1);
            let n = v.norm_sq().sqrt();
            let dot: f64 = c.basis.column(0).iter().zip(v.as_slice()).map(|(b, x)| b * x).sum();
            assert!((dot.abs() - n).abs() < 1e-12 * n);
        }
    }

    #[test]
    fn duplicate_adds_no_rank() {
        let f = random_features(4, 30, 2);
        let base = train_on_features(space(8), &labeled(&f, 3), None).unwrap();
        let mut dup = f.clone();
        dup.push(f[2].clone());
        dup.push(FlatFeature::from_vec(f[0].as_slice().iter().map(|x| 2.5 * x).collect()));
        let more = train_on_features(space(8), &labeled(&dup, 3), None).unwrap();
        assert_eq!(base.classes()[0].rank(), 4);
        assert_eq!(more.classes()[0].rank(), 4);
    }

    #[test]
    fn residual_examples() {
        let f = random_features(5, 40, 3);
        let m = train_on_features(space(8), &labeled(&f, 7), None).unwrap();
        for v in &f {
            assert!(m.residual_of(v, 7).unwrap() < 1e-10 * v.norm_sq());
        }
        // a vector orthogonal to the span
        let b = &m.classes()[0].basis;
        let mut w = DVector::from_column_slice(random_features(1, 40, 4)[0].as_slice());
        w -= b * b.tr_mul(&w);
        let w = FlatFeature::from_vec(w.as_slice().to_vec());
        let r = m.residual_of(&w, 7).unwrap();
        assert!((r - w.norm_sq()).abs() < 1e-12 * w.norm_sq());
        assert!(matches!(m.residual_of(&w, 8), Err(Error::UnknownLabel(8))));
    }

    #[test]
    fn projector_is_idempotent() {
        let f = random_features(6, 50, 5);
        let m = train_on_features(space(8), &labeled(&f, 1), None).unwrap();
        let b = &m.classes()[0].basis;
        for v in random_features(10, 50, 6) {
            let r1 = m.residual_of(&v, 1).unwrap();
            assert_eq!(r1, m.residual_of(&v, 1).unwrap());
            let x = DVector::from_column_slice(v.as_slice());
            let proj = FlatFeature::from_vec((b * b.tr_mul(&x)).as_slice().to_vec());
            assert!(m.residual_of(&proj, 1).unwrap() < 1e-10 * v.norm_sq());
        }
    }

    #[test]
    fn residual_invariant_to_sample_order() {
        let f = random_features(8, 60, 7);
        let mut rev = f.clone();
        rev.reverse();
        rev.swap(1, 5);
        let a = train_on_features(space(8), &labeled(&f, 0), None).unwrap();
        let b = train_on_features(space(8), &labeled(&rev, 0), None).unwrap();
        assert_ne!(a.classes()[0].basis, b.classes()[0].basis);
        for v in random_features(10, 60, 8) {
            let (ra, rb) = (a.residual_of(&v, 0).unwrap(), b.residual_of(&v, 0).unwrap());
            assert!((ra - rb).abs() < 1e-10 * v.norm_sq());
        }
    }

    #[test]
    fn adding_samples_never_increases_residual() {
        let f = random_features(10, 40, 9);
        let probes = random_features(20, 40, 10);
        let mut prev: Option<Vec<f64>> = None;
        for n in 1..=f.len() {
            let m = train_on_features(space(8), &labeled(&f[..n], 0), None).unwrap();
            let r: Vec<f64> = probes.iter().map(|v| m.residual_of(v, 0).unwrap()).collect();
            if let Some(p) = &prev {
                for (a, b) in r.iter().zip(p) {
                    assert!(*a <= b + 1e-10 * b.max(1.0));
                }
            }
            prev = Some(r);
        }
    }

    #[test]
    fn ties_go_to_smallest_label() {
        let v = FlatFeature::from_vec(vec![1.0, 0.0, 0.0]);
        let samples = vec![
            (FlatFeature::from_vec(vec![0.0, 0.0, 1.0]), 5),
            (FlatFeature::from_vec(vec![0.0, 1.0, 0.0]), 2),
        ];
        let m = train_on_features(space(8), &samples, None).unwrap();
        let p = m.predict_feature(&v).unwrap();
        assert_eq!(p.label, 2);
        assert_eq!(p.residuals, vec![(2, 1.0), (5, 1.0)]);
    }

    #[test]
    fn evaluate_on_training_set() {
        let a = random_features(3, 40, 11);
        let b = random_features(3, 40, 12);
        let mut samples = labeled(&a, 0);
        samples.extend(labeled(&b, 1));
        let m = train_on_features(space(8), &samples, None).unwrap();
        let rep = evaluate_features(&m, &samples).unwrap();
        assert_eq!(rep.accuracy, 1.0);
        assert_eq!(rep.confusion, vec![vec![3, 0], vec![0, 3]]);
        assert!(matches!(evaluate_features(&m, &[]), Err(Error::EmptySamples)));
        assert!(matches!(
            evaluate_features(&m, &[(a[0].clone(), 9)]),
            Err(Error::UnknownLabel(9))
        ));
    }

    #[test]
    fn empty_training_set() {
        assert!(matches!(train_on_features(space(8), &[], None), Err(Error::EmptySamples)));
        assert!(matches!(train(&[], TransformKind::Rscdt, FeatureConfig::new(4), None), Err(Error::EmptySamples)));
    }

    fn blob(n: usize, cx: f64, cy: f64, sign: f64) -> Image2D {
        Image2D::from_fn(ax(n), ax(n), |x, y| {
            (-((x - cx).powi(2) + (y - cy).powi(2)) / 0.03).exp()
                + sign * 0.7 * (-((x - cx - 0.3).powi(2) + (y - cy).powi(2)) / 0.02).exp()
        })
        .unwrap()
    }

    #[test]
    fn translated_templates_stay_in_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut samples = Vec::new();
        for _ in 0..6 {
            let (dx, dy) = (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            samples.push((blob(32, dx, dy, 1.0), 1));
            samples.push((blob(32, dx, dy, -1.0), 2));
        }
        let m = train(&samples, TransformKind::Rscdt, FeatureConfig::new(12), None).unwrap();
        for (img, label) in &samples {
            let v = m.space().extract(img).unwrap();
            assert!(m.residual_of(&v, *label).unwrap() < 1e-6 * v.norm_sq().sqrt());
            assert_eq!(m.predict(img).unwrap().label, *label);
        }
        let wrong = Image2D::square(Array2::zeros((16, 16))).unwrap();
        assert!(matches!(m.predict(&wrong), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = random_features(3, 25, 14);
        let b = random_features(2, 25, 15);
        let mut samples = labeled(&a, 4);
        samples.extend(labeled(&b, 1));
        let m = train_on_features(space(8), &samples, Some(1e-9)).unwrap();
        m.save(dir.path()).unwrap();
        let back = SubspaceModel::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.labels(), vec![1, 4]);

        // corrupt one basis: no longer orthonormal
        let (h, mut data) = io::read_container(&dir.path().join("basis_4.f64")).unwrap();
        data[0] += 0.1;
        io::write_container(&dir.path().join("basis_4.f64"), &h, &data).unwrap();
        assert!(matches!(SubspaceModel::load(dir.path()), Err(Error::NotOrthonormal(4))));
    }

    #[test]
    fn compatibility_guard() {
        let m = train_on_features(space(8), &labeled(&random_features(2, 10, 16), 0), None).unwrap();
        assert!(m.check_compatible(&space(8)).is_ok());
        let other = FeatureSpace::new(TransformKind::Rscdt, FeatureConfig::new(5), ax(8), ax(8));
        assert!(matches!(m.check_compatible(&other), Err(Error::ConfigMismatch(_))));
    }
}
