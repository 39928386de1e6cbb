use std::fs;
use std::path::{Path, PathBuf};

use rscdt::datasets::{dog_filter, generate_range, ingest_folder, load_manifest, load_samples, write_manifest, write_samples, Manifest, SyntheticSpec, DEFAULT_DOG_SIGMAS};
use rscdt::grid::{Axis, Image2D};
use rscdt::io::{load_image, load_rscdt, save_image, save_rscdt};
use rscdt::ns_classifier::{evaluate, train, FeatureSpace, Report, SubspaceModel, TransformKind};
use rscdt::radon::{relative_l2_in_disk, RampWindow};
use rscdt::rscdt::{flatten, rscdt, rscdt_inverse, signed_sliced_wasserstein};

use crate::config::ExperimentConfig;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

const CONFIG_FILE: &str = "config.json";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| rscdt::Error::Io {
        path: dir.into(),
        source: e,
    })?;
    Ok(())
}

/// `<stem>.config.json` beside a single-file output.
fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("config.json")
}

/// Loads an image and applies the configured DoG prefilter.
fn load_input(path: &Path, cfg: &ExperimentConfig) -> Result<Image2D> {
    let img = load_image(path)?;
    Ok(match cfg.dog_pair() {
        Some((s1, s2)) => dog_filter(&img, s1, s2)?,
        None => img,
    })
}

/// The image the chosen transform actually sees.
fn transform_input(img: Image2D, kind: TransformKind) -> Image2D {
    match kind {
        TransformKind::Rscdt => img,
        TransformKind::RcdtAbs => {
            if img.values().iter().any(|&v| v < 0.0) {
                log::info!("input has negative values; rcdt-abs transforms their absolute value");
            }
            img.abs()
        }
    }
}

pub fn generate(cfg: &ExperimentConfig, previews: bool) -> Result<()> {
    let out = cfg.out()?;
    create_dir(out)?;
    let spec = SyntheticSpec::new(cfg.size, cfg.seed);
    let n_train = cfg.train_per_class;
    let n_test = cfg.test_per_class;
    let train = generate_range(&spec, 0, n_train)?;
    let split = (n_test > 0).then_some("train");
    let mut entries = write_samples(out, "train", &train, split, previews)?;
    if n_test > 0 {
        let test = generate_range(&spec, n_train, n_test)?;
        entries.extend(write_samples(out, "test", &test, Some("test"), previews)?);
    }
    write_manifest(&Manifest { entries }, &out.join("manifest.csv"))?;
    cfg.write(&out.join(CONFIG_FILE))?;
    println!(
        "wrote {} training and {} test images per class ({}x{}, seed {}) to {}",
        n_train,
        n_test,
        cfg.size,
        cfg.size,
        cfg.seed,
        out.display()
    );
    Ok(())
}

pub fn transform(cfg: &ExperimentConfig, input: &Path) -> Result<()> {
    let out = cfg.out()?;
    let img = transform_input(load_input(input, cfg)?, cfg.kind);
    let feature = rscdt(&img, &cfg.feature())?;
    save_rscdt(&feature, out)?;
    cfg.write(&sidecar(out))?;
    let back = rscdt_inverse(&feature, img.x_axis(), img.y_axis(), RampWindow::None)?;
    let err = relative_l2_in_disk(&back, &img)?;
    println!(
        "{} feature with {} angles x {} offsets written to {}",
        cfg.kind,
        feature.n_angles(),
        feature.t_axis().count(),
        out.display()
    );
    println!("round-trip relative L2 (inscribed disk): {err:.4e}");
    Ok(())
}

pub fn reconstruct(cfg: &ExperimentConfig, input: &Path, compare: Option<&Path>) -> Result<()> {
    let out = cfg.out()?;
    let feature = load_rscdt(input)?;
    let reference = compare.map(|p| load_input(p, cfg).map(|img| transform_input(img, cfg.kind))).transpose()?;
    let (x_axis, y_axis) = match &reference {
        Some(img) => (*img.x_axis(), *img.y_axis()),
        None => {
            let a = Axis::new(-1.0, 1.0, cfg.size)?;
            (a, a)
        }
    };
    let img = rscdt_inverse(&feature, &x_axis, &y_axis, RampWindow::None)?;
    save_image(&img, out)?;
    cfg.write(&sidecar(out))?;
    println!("{}x{} reconstruction written to {}", y_axis.count(), x_axis.count(), out.display());
    if let Some(reference) = reference {
        println!("relative L2 against {} (inscribed disk): {:.4e}", compare.unwrap().display(), relative_l2_in_disk(&img, &reference)?);
    }
    Ok(())
}

pub fn distance(cfg: &ExperimentConfig, a: &Path, b: &Path, check_isometry: bool) -> Result<()> {
    let ia = transform_input(load_input(a, cfg)?, cfg.kind);
    let ib = transform_input(load_input(b, cfg)?, cfg.kind);
    let feature = cfg.feature();
    let d = signed_sliced_wasserstein(&ia, &ib, &feature)?;
    println!("D = {d:.10e}");
    if check_isometry {
        let flat = flatten(&rscdt(&ia, &feature)?).distance_sq(&flatten(&rscdt(&ib, &feature)?)).sqrt();
        let rel = if d > 0.0 { (d * d - flat * flat).abs() / (d * d) } else { flat };
        println!("flattened feature distance = {flat:.10e}");
        println!("relative squared gap = {rel:.4e}");
    }
    Ok(())
}

/// A manifest CSV, or a `<dir>/<label>/*.png` folder.
fn read_manifest(path: &Path) -> Result<Manifest> {
    Ok(if path.is_dir() { ingest_folder(path)? } else { load_manifest(path)? })
}

/// Entries of `split`, or every entry when the manifest carries no split tags.
fn select(m: Manifest, split: Option<&str>, default: &str) -> Result<Manifest> {
    let tagged = m.entries.iter().any(|e| e.split.is_some());
    let chosen = match (split, tagged) {
        (Some(s), _) => m.split(s),
        (None, true) => m.split(default),
        (None, false) => m,
    };
    if chosen.is_empty() {
        return Err(CliError::Usage(format!(
            "manifest has no entries for split `{}`",
            split.unwrap_or(default)
        )));
    }
    Ok(chosen)
}

pub fn train_cmd(cfg: &ExperimentConfig, manifest: &Path, split: Option<&str>) -> Result<()> {
    let out = cfg.out()?;
    let m = select(read_manifest(manifest)?, split, "train")?;
    let samples = load_samples(&m, cfg.dog_pair())?;
    let samples: Vec<(Image2D, i64)> = samples.into_iter().map(|(img, l)| (transform_input(img, cfg.kind), l)).collect();
    let model = train(&samples, cfg.kind, cfg.feature(), cfg.rank_cutoff)?;
    model.save(out)?;
    cfg.write(&out.join(CONFIG_FILE))?;
    println!("trained {} model on {} images, feature length {}", cfg.kind, samples.len(), model.dim());
    for c in model.classes() {
        println!("  class {}: subspace rank {}", c.label, c.rank());
    }
    Ok(())
}

/// Model plus the configuration it dictates: the model's own settings form
/// the base layer, and any override that changes the features is rejected.
pub fn load_model(dir: &Path, file: Option<&Path>, flags: &crate::config::Overrides) -> Result<(SubspaceModel, ExperimentConfig)> {
    let model = SubspaceModel::load(dir)?;
    let saved = dir.join(CONFIG_FILE);
    let mut base = if saved.is_file() { ExperimentConfig::read(&saved)? } else { ExperimentConfig::default() };
    let space = model.space();
    base.kind = space.kind;
    base.angles = space.feature.n_angles;
    base.offsets = space.feature.n_offsets;
    base.out = None;
    let dog = base.dog;
    let cfg = ExperimentConfig::resolve(base, file, flags)?;
    let wanted = FeatureSpace::new(cfg.kind, cfg.feature(), space.x_axis, space.y_axis);
    model.check_compatible(&wanted)?;
    if cfg.dog != dog {
        return Err(rscdt::Error::ConfigMismatch(format!("model was trained with dog {dog:?}, data uses {:?}", cfg.dog)).into());
    }
    Ok((model, cfg))
}

fn load_for_model(path: &Path, model: &SubspaceModel, cfg: &ExperimentConfig) -> Result<Image2D> {
    let img = transform_input(load_input(path, cfg)?, cfg.kind);
    model.check_compatible(&FeatureSpace::for_image(cfg.kind, cfg.feature(), &img))?;
    Ok(img)
}

pub fn predict(model: &SubspaceModel, cfg: &ExperimentConfig, inputs: &[PathBuf]) -> Result<()> {
    for path in inputs {
        let p = model.predict(&load_for_model(path, model, cfg)?)?;
        let residuals: Vec<String> = p.residuals.iter().map(|(l, r)| format!("{l}={r:.6e}")).collect();
        println!("{}: label {} residuals {}", path.display(), p.label, residuals.join(" "));
    }
    Ok(())
}

pub fn evaluate_cmd(model: &SubspaceModel, cfg: &ExperimentConfig, manifest: &Path, split: Option<&str>) -> Result<()> {
    let out = cfg.out()?;
    let m = select(read_manifest(manifest)?, split, "test")?;
    let samples = load_samples(&m, cfg.dog_pair())?;
    let samples: Vec<(Image2D, i64)> = samples.into_iter().map(|(img, l)| (transform_input(img, cfg.kind), l)).collect();
    if let Some((img, _)) = samples.first() {
        model.check_compatible(&FeatureSpace::for_image(cfg.kind, cfg.feature(), img))?;
    }
    let report = evaluate(model, &samples)?;
    create_dir(out)?;
    write_report(&report, &out.join("report.csv"))?;
    write_residuals(&report, &m, &out.join("residuals.csv"))?;
    cfg.write(&out.join(CONFIG_FILE))?;
    println!("accuracy {:.2}% on {} images ({})", 100.0 * report.accuracy, report.truth.len(), cfg.kind);
    println!("confusion (rows true, columns predicted), labels {:?}", report.labels);
    for (label, row) in report.labels.iter().zip(&report.confusion) {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>5}")).collect();
        println!("  {label:>5}: {}", cells.join(" "));
    }
    Ok(())
}

fn csv_bytes(rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).map_err(rscdt::Error::from)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

fn write_report(r: &Report, path: &Path) -> Result<()> {
    let mut rows = vec![
        vec!["accuracy".to_owned(), format!("{:.6}", r.accuracy)],
        vec!["samples".to_owned(), r.truth.len().to_string()],
        vec![],
    ];
    let mut head = vec!["true\\predicted".to_owned()];
    head.extend(r.labels.iter().map(i64::to_string));
    rows.push(head);
    for (label, row) in r.labels.iter().zip(&r.confusion) {
        let mut line = vec![label.to_string()];
        line.extend(row.iter().map(usize::to_string));
        rows.push(line);
    }
    Ok(rscdt::io::write_atomic(path, &csv_bytes(rows)?)?)
}

fn write_residuals(r: &Report, m: &Manifest, path: &Path) -> Result<()> {
    let mut head = vec!["path".to_owned(), "truth".to_owned(), "predicted".to_owned()];
    head.extend(r.labels.iter().map(|l| format!("residual_{l}")));
    let mut rows = vec![head];
    for ((e, t), p) in m.entries.iter().zip(&r.truth).zip(&r.predictions) {
        let mut line = vec![e.path.display().to_string(), t.to_string(), p.label.to_string()];
        line.extend(p.residuals.iter().map(|(_, v)| format!("{v:.10e}")));
        rows.push(line);
    }
    Ok(rscdt::io::write_atomic(path, &csv_bytes(rows)?)?)
}

pub fn filter_dog(cfg: &ExperimentConfig, input: &Path) -> Result<()> {
    let out = cfg.out()?;
    let (s1, s2) = cfg.dog_pair().unwrap_or(DEFAULT_DOG_SIGMAS);
    let img = dog_filter(&load_image(input)?, s1, s2)?;
    save_image(&img, out)?;
    println!("DoG({s1}, {s2}) of {} written to {}", input.display(), out.display());
    Ok(())
}
