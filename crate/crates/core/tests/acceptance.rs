//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints its own PASS/FAIL line; exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rscdt::datasets::{count_regions, dog_filter, generate_range, ingest_folder, load_samples, SyntheticSpec};
use rscdt::grid::{Axis, Image2D, Signal1D};
use rscdt::io::save_preview_png;
use rscdt::ns_classifier::{train, train_on_features, FeatureSpace, SubspaceModel, TransformKind};
use rscdt::radon::{radon_inverse, relative_l2_in_disk, RampWindow};
use rscdt::rscdt::{flatten, rscdt, rscdt_inverse, signed_sliced_wasserstein, FeatureConfig, FlatFeature, RadonWarp};
use rscdt::transforms1d::{cdt, quantile_distance_sq, scdt, scdt_inverse, signed_wasserstein, transform_distance_sq};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn axis(n: usize) -> Axis {
    Axis::new(-1.0, 1.0, n).unwrap()
}

fn gauss(x: f64, c: f64, w: f64) -> f64 {
    (-(x - c).powi(2) / (2.0 * w * w)).exp()
}

/// Sum of 3 to 6 Gaussian bumps of random sign on `[-1, 1]`.
fn random_signed_signal(rng: &mut ChaCha8Rng, n: usize) -> Signal1D {
    let k = rng.random_range(3..=6);
    let bumps: Vec<(f64, f64, f64)> = (0..k)
        .map(|i| {
            // at least one bump of each sign
            let sign = match i {
                0 => 1.0,
                1 => -1.0,
                _ if rng.random_bool(0.5) => 1.0,
                _ => -1.0,
            };
            (sign * rng.random_range(0.3..1.0), rng.random_range(-0.6..0.6), rng.random_range(0.04..0.15))
        })
        .collect();
    Signal1D::from_fn(axis(n), |x| bumps.iter().map(|(a, c, w)| a * gauss(x, *c, *w)).sum()).unwrap()
}

/// Smooth signed image: 3 to 5 Gaussian blobs of mixed sign well inside the unit disk.
fn random_signed_image(rng: &mut ChaCha8Rng, n: usize) -> Image2D {
    let k = rng.random_range(3..=5);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..k)
        .map(|i| {
            let sign = if i == 0 { 1.0 } else if i == 1 { -1.0 } else if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let rad = rng.random_range(0.0..0.45);
            let phi = rng.random_range(0.0..2.0 * PI);
            (sign * rng.random_range(0.4..1.0), rad * phi.cos(), rad * phi.sin(), rng.random_range(0.08..0.2))
        })
        .collect();
    Image2D::from_fn(axis(n), axis(n), |x, y| {
        blobs
            .iter()
            .map(|(a, cx, cy, w)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp())
            .sum()
    })
    .unwrap()
}

fn rel_l1(a: &Signal1D, b: &Signal1D) -> f64 {
    a.sub(b).unwrap().l1_norm() / b.l1_norm()
}

struct ClassData {
    rscdt_train: Vec<(FlatFeature, i64)>,
    rscdt_test: Vec<(FlatFeature, i64)>,
    rscdt_space: FeatureSpace,
}

fn features(space: &FeatureSpace, samples: &[(Image2D, i64)]) -> Vec<(FlatFeature, i64)> {
    let imgs: Vec<&Image2D> = samples.iter().map(|s| &s.0).collect();
    space
        .extract_all(&imgs)
        .unwrap()
        .into_iter()
        .zip(samples.iter().map(|s| s.1))
        .collect()
}

fn accuracy(model: &SubspaceModel, test: &[(FlatFeature, i64)]) -> (f64, Vec<i64>, bool) {
    let feats: Vec<FlatFeature> = test.iter().map(|t| t.0.clone()).collect();
    let preds = model.predict_features(&feats).unwrap();
    let correct = preds.iter().zip(test).filter(|(p, t)| p.label == t.1).count();
    // cross-class residual above the within-class one for every sample
    let separated = preds.iter().zip(test).all(|(p, t)| {
        let own = p.residuals.iter().find(|r| r.0 == t.1).unwrap().1;
        p.residuals.iter().filter(|r| r.0 != t.1).all(|r| r.1 > own)
    });
    (correct as f64 / test.len() as f64, preds.iter().map(|p| p.label).collect(), separated)
}

fn criterion_1() -> (Outcome, ClassData) {
    let spec = SyntheticSpec::new(128, 2024);
    let train_imgs = generate_range(&spec, 0, 150).unwrap();
    let test_imgs = generate_range(&spec, 150, 100).unwrap();
    let cfg = FeatureConfig::new(180);
    let space = FeatureSpace::for_image(TransformKind::Rscdt, cfg, &train_imgs[0].0);
    let abs_space = FeatureSpace::for_image(TransformKind::RcdtAbs, cfg, &train_imgs[0].0);

    let rscdt_train = features(&space, &train_imgs);
    let rscdt_test = features(&space, &test_imgs);
    let model = train_on_features(space, &rscdt_train, None).unwrap();
    let (acc, _, separated) = accuracy(&model, &rscdt_test);

    let abs_train = features(&abs_space, &train_imgs);
    let abs_test = features(&abs_space, &test_imgs);
    let abs_model = train_on_features(abs_space, &abs_train, None).unwrap();
    let (abs_acc, _, _) = accuracy(&abs_model, &abs_test);

    let pass = acc == 1.0 && (0.40..=0.60).contains(&abs_acc);
    (
        outcome(
            pass,
            format!(
                "RSCDT-NS {:.2}% (need 100%), RCDT-NS on |img| {:.2}% (need 40-60%), cross > within residual for all: {separated}",
                100.0 * acc,
                100.0 * abs_acc
            ),
        ),
        ClassData {
            rscdt_train,
            rscdt_test,
            rscdt_space: space,
        },
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r = Signal1D::uniform(axis(512));
    let worst = (0..50)
        .map(|_| {
            let s = random_signed_signal(&mut rng, 512);
            let t = scdt(&s, &r).unwrap();
            rel_l1(&scdt_inverse(&t, &r, s.axis()).unwrap(), &s)
        })
        .fold(0.0, f64::max);
    outcome(worst < 0.02, format!("max relative L1 {worst:.3e} over 50 signals (need < 2e-2)"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = Signal1D::uniform(axis(512));
    let worst = (0..50)
        .map(|_| {
            let a = random_signed_signal(&mut rng, 512);
            let b = random_signed_signal(&mut rng, 512);
            let d2 = signed_wasserstein(&a, &b).powi(2);
            let t2 = transform_distance_sq(&scdt(&a, &r).unwrap(), &scdt(&b, &r).unwrap(), &r).unwrap();
            (d2 - t2).abs() / d2
        })
        .fold(0.0, f64::max);
    outcome(worst < 0.01, format!("max |D_S^2 - transform norm^2| / D_S^2 = {worst:.3e} over 50 pairs (need < 1e-2)"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = FeatureConfig::new(90);
    let worst = (0..20)
        .map(|_| {
            let a = random_signed_image(&mut rng, 64);
            let b = random_signed_image(&mut rng, 64);
            let d2 = signed_sliced_wasserstein(&a, &b, &cfg).unwrap().powi(2);
            let f2 = flatten(&rscdt(&a, &cfg).unwrap()).distance_sq(&flatten(&rscdt(&b, &cfg).unwrap()));
            (d2 - f2).abs() / d2
        })
        .fold(0.0, f64::max);
    outcome(worst < 0.01, format!("max |D^2 - flat distance^2| / D^2 = {worst:.3e} over 20 pairs (need < 1e-2)"))
}

fn template(n: usize, dx: f64, dy: f64) -> Image2D {
    Image2D::from_fn(axis(n), axis(n), |x, y| {
        let (x, y) = (x - dx, y - dy);
        let b = |cx: f64, cy: f64, w: f64| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp();
        b(-0.15, 0.1, 0.16) - 0.8 * b(0.2, -0.12, 0.13) + 0.5 * b(0.05, 0.25, 0.1)
    })
    .unwrap()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = FeatureConfig::new(90);
    let base = rscdt(&template(64, 0.0, 0.0), &cfg).unwrap();
    let cell = base.t_axis().spacing();
    let mut star_err = Vec::new();
    let mut mass_err: f64 = 0.0;
    for _ in 0..20 {
        let (dx, dy) = (rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15));
        let moved = rscdt(&template(64, dx, dy), &cfg).unwrap();
        let predicted = base.composed_with_inverse(&RadonWarp::translation(dx, dy, base.angles())).unwrap();
        for (p, q) in predicted.tuples().iter().zip(moved.tuples()) {
            let total = p.pos_mass + p.neg_mass;
            mass_err = mass_err
                .max((p.pos_mass - q.pos_mass).abs() / total)
                .max((p.neg_mass - q.neg_mass).abs() / total);
            for (a, b) in [(&p.pos_star, &q.pos_star), (&p.neg_star, &q.neg_star)] {
                if !a.is_zero() && !b.is_zero() {
                    star_err.extend(a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs() / cell));
                }
            }
        }
    }
    star_err.sort_by(f64::total_cmp);
    let p99 = star_err[(0.99 * (star_err.len() - 1) as f64).round() as usize];
    outcome(
        p99 <= 2.0 && mass_err < 1e-3,
        format!("star p99 {p99:.3} cells (need <= 2), max mass error {mass_err:.3e} of per-angle total (need < 1e-3)"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let img = if i % 2 == 0 {
            random_signed_image(&mut rng, 64)
        } else {
            generate_range(&SyntheticSpec::new(64, 600 + i), 0, 1).unwrap()[0].0.clone()
        };
        let cfg = FeatureConfig::new(90);
        let masses = cfg.sinogram(&img).unwrap().masses();
        let (lo, hi) = masses.iter().fold((f64::MAX, f64::MIN), |(l, h), &m| (l.min(m), h.max(m)));
        worst = worst.max((hi - lo) / img.l1_norm());
    }
    outcome(worst < 5e-3, format!("max per-angle mass spread {worst:.3e} of the image L1 mass (need < 5e-3)"))
}

fn criterion_7() -> Outcome {
    let img = Image2D::from_fn(axis(128), axis(128), |x, y| {
        let b = |cx: f64, cy: f64, w: f64| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp();
        b(-0.2, 0.1, 0.15) - 0.8 * b(0.25, -0.15, 0.12) + 0.5 * b(0.05, 0.35, 0.1)
    })
    .unwrap();
    let cfg = FeatureConfig::new(180);
    let sino = cfg.sinogram(&img).unwrap();
    let fbp = radon_inverse(&sino, img.x_axis(), img.y_axis(), RampWindow::None).unwrap();
    let e_fbp = relative_l2_in_disk(&fbp, &img).unwrap();
    let f = rscdt(&img, &cfg).unwrap();
    let back = rscdt_inverse(&f, img.x_axis(), img.y_axis(), RampWindow::None).unwrap();
    let e_rscdt = relative_l2_in_disk(&back, &img).unwrap();
    outcome(
        e_fbp < 0.05 && e_rscdt < 0.08,
        format!("FBP relative L2 {e_fbp:.3e} (need < 5e-2), RSCDT round trip {e_rscdt:.3e} (need < 8e-2)"),
    )
}

/// Brute-force W2² by matching `m` evenly spaced quantile levels of the
/// piecewise-linear CDFs.
fn brute_w2_sq(p: &Signal1D, q: &Signal1D, m: usize) -> f64 {
    let quantiles = |s: &Signal1D| -> Vec<f64> {
        let ax = s.axis();
        let h = ax.spacing();
        let mut cdf = vec![0.0];
        for w in s.values().windows(2) {
            cdf.push(cdf.last().unwrap() + 0.5 * h * (w[0] + w[1]));
        }
        let total = *cdf.last().unwrap();
        (0..m)
            .map(|j| {
                let y = (j as f64 + 0.5) / m as f64 * total;
                let (mut lo, mut hi) = (0usize, cdf.len() - 1);
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if cdf[mid] < y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                ax.coord(lo) + h * (y - cdf[lo]) / (cdf[hi] - cdf[lo])
            })
            .collect()
    };
    let (a, b) = (quantiles(p), quantiles(q));
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / m as f64
}

fn random_density(rng: &mut ChaCha8Rng, n: usize) -> Signal1D {
    let k = rng.random_range(1..=4);
    let bumps: Vec<(f64, f64, f64)> = (0..k)
        .map(|_| (rng.random_range(0.2..1.0), rng.random_range(-0.6..0.6), rng.random_range(0.04..0.2)))
        .collect();
    let floor = rng.random_range(0.01..0.1);
    let raw = Signal1D::from_fn(axis(n), |x| floor + bumps.iter().map(|(a, c, w)| a * gauss(x, *c, *w)).sum::<f64>())
        .unwrap();
    let mass = rscdt::grid::integrate(&raw);
    raw.scaled(1.0 / mass)
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r = Signal1D::uniform(axis(512));
    let worst = (0..100)
        .map(|_| {
            let p = random_density(&mut rng, 512);
            let q = random_density(&mut rng, 512);
            let emb = quantile_distance_sq(&cdt(&p, &r, false).unwrap(), &cdt(&q, &r, false).unwrap(), &r).unwrap();
            let oracle = brute_w2_sq(&p, &q, 200_000);
            (emb - oracle).abs() / oracle
        })
        .fold(0.0, f64::max);
    outcome(worst < 5e-3, format!("max relative gap to brute-force W2^2 {worst:.3e} over 100 pairs (need < 5e-3)"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sym_exact = true;
    let mut worst_slack_1d = f64::MIN;
    for _ in 0..100 {
        let [a, b, c] = std::array::from_fn(|_| random_signed_signal(&mut rng, 256));
        let (ab, ba) = (signed_wasserstein(&a, &b), signed_wasserstein(&b, &a));
        sym_exact &= ab == ba;
        let (bc, ac) = (signed_wasserstein(&b, &c), signed_wasserstein(&a, &c));
        worst_slack_1d = worst_slack_1d.max(ac - ab - bc);
    }
    let cfg = FeatureConfig::new(12);
    let mut worst_slack_2d = f64::MIN;
    for _ in 0..100 {
        let [a, b, c] = std::array::from_fn(|_| random_signed_image(&mut rng, 24));
        let d = |x: &Image2D, y: &Image2D| signed_sliced_wasserstein(x, y, &cfg).unwrap();
        let (ab, ba) = (d(&a, &b), d(&b, &a));
        sym_exact &= ab == ba;
        worst_slack_2d = worst_slack_2d.max(d(&a, &c) - ab - d(&b, &c));
    }
    outcome(
        sym_exact && worst_slack_1d <= 1e-9 && worst_slack_2d <= 1e-9,
        format!(
            "symmetry exact: {sym_exact}; worst triangle excess D_S {worst_slack_1d:.3e}, D {worst_slack_2d:.3e} (need <= 1e-9)"
        ),
    )
}

fn criterion_10(data: &ClassData) -> Outcome {
    let model = train_on_features(data.rscdt_space, &data.rscdt_train, None).unwrap();
    let (_, base, _) = accuracy(&model, &data.rscdt_test);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut unchanged = true;
    for _ in 0..3 {
        let mut shuffled = data.rscdt_train.clone();
        shuffled.shuffle(&mut rng);
        let m = train_on_features(data.rscdt_space, &shuffled, None).unwrap();
        let (_, preds, _) = accuracy(&m, &data.rscdt_test);
        unchanged &= preds == base;
    }
    outcome(
        unchanged,
        format!("3 permutations of {} training samples, {} test predictions identical: {unchanged}", data.rscdt_train.len(), base.len()),
    )
}

fn folder_smoke() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec::new(48, 77);
    let samples = generate_range(&spec, 0, 5).unwrap();
    for (i, (img, label)) in samples.iter().enumerate() {
        let sub = dir.path().join(label.to_string());
        std::fs::create_dir_all(&sub).unwrap();
        save_preview_png(img, &sub.join(format!("{i}.png"))).unwrap();
    }
    let m = ingest_folder(dir.path()).unwrap();
    let loaded = load_samples(&m, Some((1.0, 2.0))).unwrap();
    let signed = loaded.iter().all(|(img, _)| count_regions(img, -1.0, 0.0) > 0);
    let model = train(&loaded, TransformKind::Rscdt, FeatureConfig::new(30), None).unwrap();
    let correct = loaded.iter().filter(|(img, l)| model.predict(img).unwrap().label == *l).count();
    let direct = dog_filter(&rscdt::io::load_png(&m.entries[0].path).unwrap(), 1.0, 2.0).unwrap();
    outcome(
        m.len() == 10 && signed && correct == 10 && direct == loaded[0].0,
        format!("{} entries ingested, DoG output signed: {signed}, {correct}/10 training images recovered", m.len()),
    )
}

fn main() {
    // optional positional filters, e.g. `cargo test --test acceptance -- 3 4`
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| only.is_empty() || only.iter().any(|o| o == id);
    let mut results: Vec<(String, Outcome)> = Vec::new();
    let mut run = |id: &str, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let start = Instant::now();
        let o = f();
        println!(
            "[{}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        results.push((name.to_owned(), o));
    };
    let mut data = None;
    let needs_data = wanted("1") || wanted("10");
    if needs_data {
        run("1", "criterion 1, synthetic two-class accuracy", &mut || {
            let (o, d) = criterion_1();
            data = Some(d);
            o
        });
    }
    run("2", "criterion 2, SCDT round trip", &mut criterion_2);
    run("3", "criterion 3, 1D signed isometry", &mut criterion_3);
    run("4", "criterion 4, sliced isometry", &mut criterion_4);
    run("5", "criterion 5, translation composition", &mut criterion_5);
    run("6", "criterion 6, projection intensity equality", &mut criterion_6);
    run("7", "criterion 7, FBP and RSCDT round trips", &mut criterion_7);
    run("8", "criterion 8, CDT embedding vs brute-force W2", &mut criterion_8);
    run("9", "criterion 9, metric axioms", &mut criterion_9);
    if let Some(data) = &data {
        run("10", "criterion 10, training order invariance", &mut || criterion_10(data));
    }
    run("smoke", "folder ingestion smoke test", &mut folder_smoke);
    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass).map(|r| r.0.as_str()).collect();
    println!("{} of {} acceptance checks passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join("; "));
        std::process::exit(1);
    }
}
