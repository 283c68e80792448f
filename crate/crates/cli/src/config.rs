//! Experiment configuration: a single JSON file, individual fields
//! overridable from the command line.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use diskray::metric::{ConformalProfile, MetricField};
use diskray::{io, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_metric")]
    pub metric: MetricSpec,
    /// Bundle grid: radii, spatial angles, fiber angles.
    #[serde(default = "default_grid")]
    pub grid: (usize, usize, usize),
    /// Inflow rays: boundary points, inward angles.
    #[serde(default = "default_rays")]
    pub rays: (usize, usize),
    /// Pixel basis cells per side.
    #[serde(default = "default_basis")]
    pub basis: usize,
    /// Minimum in-disk coverage for keeping rim cells.
    #[serde(default = "default_coverage")]
    pub min_coverage: f64,
    #[serde(default = "default_lambda")]
    pub lambda_reg: f64,
    /// Relative reconstruction error bound for `invert`.
    #[serde(default = "default_recon_bound")]
    pub recon_error_bound: f64,
    /// Smoothing scales for `mollify-study`.
    #[serde(default = "default_alphas")]
    pub alphas: Vec<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: String,
    /// Pin the worker pool to one thread.
    #[serde(default)]
    pub deterministic: bool,
}

fn default_metric() -> MetricSpec {
    MetricSpec::Builtin {
        name: "euclidean".into(),
        c: None,
        a: None,
        r0: None,
    }
}
fn default_grid() -> (usize, usize, usize) {
    (64, 64, 128)
}
fn default_rays() -> (usize, usize) {
    (64, 64)
}
fn default_basis() -> usize {
    24
}
fn default_coverage() -> f64 {
    0.25
}
fn default_lambda() -> f64 {
    1e-6
}
fn default_recon_bound() -> f64 {
    0.05
}
fn default_alphas() -> Vec<u32> {
    vec![4, 8, 16, 32]
}
fn default_out() -> String {
    "out".into()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    File {
        file: String,
    },
    Builtin {
        #[serde(rename = "builtin")]
        name: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        r0: Option<f64>,
    },
}

impl ExperimentConfig {
    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| diskray::Error::usage(format!("bad config {path}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.0 < 8 || self.grid.1 < 8 || self.grid.2 < 8 {
            return Err(diskray::Error::usage(
                "grid resolutions must be at least 8 in every direction",
            ));
        }
        if self.rays.0 < 4 || self.rays.1 < 4 {
            return Err(diskray::Error::usage("ray counts must be at least 4"));
        }
        if self.lambda_reg <= 0.0 {
            return Err(diskray::Error::usage("lambda_reg must be positive"));
        }
        Ok(())
    }

    pub fn build_metric(&self) -> Result<MetricField> {
        match &self.metric {
            MetricSpec::File { file } => {
                let samples = io::read_metric_grid(file)?;
                MetricField::from_grid_samples(samples, format!("file:{file}"))
            }
            MetricSpec::Builtin { name, c, a, r0 } => match name.as_str() {
                "euclidean" => Ok(MetricField::euclidean()),
                "cap" => Ok(MetricField::constant_curvature(c.unwrap_or(0.8))),
                "quadratic" => Ok(MetricField::conformal(ConformalProfile::Quadratic {
                    a: a.unwrap_or(0.1),
                })),
                "kink" | "c11-test" => Ok(MetricField::conformal(ConformalProfile::Kink {
                    c: c.unwrap_or(0.5),
                    r0: r0.unwrap_or(0.5),
                })),
                "bump" => Ok(MetricField::bump(a.unwrap_or(0.1), [0.0, 0.0], 0.3)),
                "anisotropic" => Ok(MetricField::anisotropic(a.unwrap_or(0.3), c.unwrap_or(0.2))),
                other => Err(diskray::Error::usage(format!(
                    "unknown builtin metric '{other}'"
                ))),
            },
        }
    }

    /// Canonical hash of the resolved configuration, embedded in outputs.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canon.as_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
