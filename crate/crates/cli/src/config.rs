use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rscdt::io::write_atomic;
use rscdt::ns_classifier::TransformKind;
use rscdt::rscdt::FeatureConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Fully resolved settings of one invocation. Echoed next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: TransformKind,
    pub angles: usize,
    /// Offset samples per projection; absent means pixel pitch over the diagonal.
    #[serde(default)]
    pub offsets: Option<usize>,
    #[serde(default)]
    pub dog: Option<[f64; 2]>,
    pub seed: u64,
    pub size: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    #[serde(default)]
    pub rank_cutoff: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: TransformKind::Rscdt,
            angles: 180,
            offsets: None,
            dog: None,
            seed: 2024,
            size: 128,
            train_per_class: 150,
            test_per_class: 100,
            rank_cutoff: None,
            out: None,
        }
    }
}

/// Settings as they appear in a JSON config file or on the command line;
/// absent fields fall through to the layer below.
#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Transform: rscdt, or rcdt-abs (R-CDT of the absolute-valued image)
    #[arg(long, global = true)]
    pub kind: Option<TransformKind>,
    /// Projection angles [default: 180]
    #[arg(long, global = true)]
    pub angles: Option<usize>,
    /// Offset samples per projection [default: pixel pitch over the diagonal]
    #[arg(long, global = true)]
    pub offsets: Option<usize>,
    /// Difference-of-Gaussians prefilter, applied before any transform
    #[arg(long, global = true, value_name = "S1,S2", value_parser = parse_dog)]
    pub dog: Option<[f64; 2]>,
    /// Random seed [default: 2024]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Image side in pixels [default: 128]
    #[arg(long, global = true)]
    pub size: Option<usize>,
    /// Training images per class [default: 150]
    #[arg(long = "samples-per-class", global = true)]
    pub train_per_class: Option<usize>,
    /// Test images per class; 0 writes no test split [default: 100]
    #[arg(long = "test-per-class", global = true)]
    pub test_per_class: Option<usize>,
    /// Relative singular-value cutoff in (0, 1) for the class subspaces
    #[arg(long = "rank-cutoff", global = true)]
    pub rank_cutoff: Option<f64>,
    /// Output path
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_dog(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts[..] else {
        return Err(format!("expected two comma-separated sigmas, got `{s}`"));
    };
    let p = |v: &str| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok([p(a)?, p(b)?])
}

impl Overrides {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(v) = self.kind {
            c.kind = v;
        }
        if let Some(v) = self.angles {
            c.angles = v;
        }
        if self.offsets.is_some() {
            c.offsets = self.offsets;
        }
        if self.dog.is_some() {
            c.dog = self.dog;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.size {
            c.size = v;
        }
        if let Some(v) = self.train_per_class {
            c.train_per_class = v;
        }
        if let Some(v) = self.test_per_class {
            c.test_per_class = v;
        }
        if self.rank_cutoff.is_some() {
            c.rank_cutoff = self.rank_cutoff;
        }
        if self.out.is_some() {
            c.out.clone_from(&self.out);
        }
    }
}

impl ExperimentConfig {
    /// Layers `base`, then the config file, then the flags.
    pub fn resolve(base: ExperimentConfig, file: Option<&Path>, flags: &Overrides) -> Result<Self, CliError> {
        let mut c = base;
        if let Some(path) = file {
            Overrides::read(path)?.apply(&mut c);
        }
        flags.apply(&mut c);
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if self.angles < 2 {
            return bad(format!("--angles must be at least 2, got {}", self.angles));
        }
        if self.offsets.is_some_and(|n| n < 2) {
            return bad("--offsets must be at least 2".into());
        }
        if self.size < 8 {
            return bad(format!("--size must be at least 8, got {}", self.size));
        }
        if self.train_per_class == 0 {
            return bad("--samples-per-class must be positive".into());
        }
        if let Some([a, b]) = self.dog {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return bad(format!("--dog sigmas must be positive, got {a},{b}"));
            }
        }
        if let Some(r) = self.rank_cutoff {
            if !(r > 0.0 && r < 1.0) {
                return bad(format!("--rank-cutoff must lie in (0, 1), got {r}"));
            }
        }
        Ok(())
    }

    pub fn feature(&self) -> FeatureConfig {
        FeatureConfig {
            n_angles: self.angles,
            n_offsets: self.offsets,
        }
    }

    pub fn dog_pair(&self) -> Option<(f64, f64)> {
        self.dog.map(|[a, b]| (a, b))
    }

    /// Output path, required by commands that write files.
    pub fn out(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let bytes = serde_json::to_vec_pretty(self).map_err(rscdt::Error::from)?;
        Ok(write_atomic(path, &bytes)?)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read(path).map_err(|e| rscdt::Error::Io {
            path: path.into(),
            source: e,
        })?;
        Ok(serde_json::from_slice(&text).map_err(rscdt::Error::from)?)
    }
}
