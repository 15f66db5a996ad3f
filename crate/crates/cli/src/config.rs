//! Command configuration records: JSON files with strict field validation,
//! overridable by a few global flags.

use certiscope_core::cs::{AmplitudeLaw, EnsembleConfig};
use certiscope_core::KernelSpec;
use serde::{Deserialize, Serialize};

fn default_scan_points() -> usize {
    8192
}
fn default_samples() -> usize {
    2048
}
fn default_lambda_min_rel() -> f64 {
    1e-8
}
fn default_seed() -> u64 {
    0xC0FFEE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikesConfig {
    pub kernel: KernelSpec,
    pub positions: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl SpikesConfig {
    pub fn measure(&self) -> certiscope_core::Result<certiscope_core::thingrid::SpikeMeasure> {
        certiscope_core::thingrid::SpikeMeasure::new(
            self.positions.clone(),
            self.amplitudes.clone(),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificatesConfig {
    #[serde(flatten)]
    pub spikes: SpikesConfig,
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
    /// Dense sample count for the CSV traces.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for CertificatesConfig {
    fn default() -> Self {
        CertificatesConfig {
            spikes: SpikesConfig {
                kernel: KernelSpec::Ideal { fc: 10 },
                positions: vec![85.0 / 256.0, 117.0 / 256.0],
                amplitudes: vec![1.0, 1.0],
            },
            scan_points: default_scan_points(),
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    #[serde(flatten)]
    pub spikes: SpikesConfig,
    pub grid_p: usize,
    /// The path is emitted down to this fraction of λ_max.
    #[serde(default = "default_lambda_min_rel")]
    pub lambda_min_rel: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            spikes: SpikesConfig {
                kernel: KernelSpec::Ideal { fc: 10 },
                positions: vec![341.0 / 1024.0, 648.0 / 1024.0],
                amplitudes: vec![1.0, 1.0],
            },
            grid_p: 1024,
            lambda_min_rel: default_lambda_min_rel(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsTransitionConfig {
    pub p: usize,
    pub q: usize,
    pub trials: usize,
    pub s_min: usize,
    pub s_max: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_amplitude_law")]
    pub amplitude_law: AmplitudeLaw,
}

fn default_amplitude_law() -> AmplitudeLaw {
    AmplitudeLaw::UnitSigned
}

impl CsTransitionConfig {
    pub fn fast() -> Self {
        CsTransitionConfig {
            p: 200,
            q: 50,
            trials: 50,
            s_min: 0,
            s_max: 16,
            master_seed: default_seed(),
            amplitude_law: AmplitudeLaw::UnitSigned,
        }
    }

    pub fn full() -> Self {
        CsTransitionConfig {
            p: 400,
            q: 100,
            trials: 200,
            s_min: 0,
            s_max: 30,
            master_seed: default_seed(),
            amplitude_law: AmplitudeLaw::UnitSigned,
        }
    }

    pub fn ensemble(&self, s: usize) -> EnsembleConfig {
        EnsembleConfig {
            p: self.p,
            q: self.q,
            s,
            trials: self.trials,
            master_seed: self.master_seed,
            amplitude_law: self.amplitude_law,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsHistogramConfig {
    pub p: usize,
    pub q: usize,
    pub trials: usize,
    pub s_values: Vec<usize>,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_amplitude_law")]
    pub amplitude_law: AmplitudeLaw,
}

impl CsHistogramConfig {
    pub fn fast() -> Self {
        CsHistogramConfig {
            p: 200,
            q: 50,
            trials: 100,
            s_values: vec![7, 8, 9],
            master_seed: default_seed(),
            amplitude_law: AmplitudeLaw::UnitSigned,
        }
    }

    pub fn full() -> Self {
        CsHistogramConfig {
            p: 400,
            q: 100,
            trials: 500,
            s_values: vec![14, 16, 18],
            master_seed: default_seed(),
            amplitude_law: AmplitudeLaw::UnitSigned,
        }
    }

    pub fn ensemble(&self, s: usize) -> EnsembleConfig {
        EnsembleConfig {
            p: self.p,
            q: self.q,
            s,
            trials: self.trials,
            master_seed: self.master_seed,
            amplitude_law: self.amplitude_law,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub kernel: KernelSpec,
    /// Instance for the LASSO probe.
    pub lasso_positions: Vec<f64>,
    pub lasso_amplitudes: Vec<f64>,
    /// Instance for the C-BP probe.
    pub cbp_positions: Vec<f64>,
    pub cbp_amplitudes: Vec<f64>,
    pub grid_sizes: Vec<usize>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            kernel: KernelSpec::Ideal { fc: 10 },
            lasso_positions: vec![21.0 / 64.0, 27.0 / 64.0],
            lasso_amplitudes: vec![1.0, 1.0],
            cbp_positions: vec![21.0 / 64.0, 30.0 / 64.0],
            cbp_amplitudes: vec![1.0, 1.0],
            grid_sizes: vec![64, 128, 256, 512, 1024],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    #[serde(flatten)]
    pub spikes: SpikesConfig,
    pub lambda: f64,
    pub grid_sizes: Vec<usize>,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            spikes: SpikesConfig {
                kernel: KernelSpec::Gaussian { sigma: 0.1, wraps: 3 },
                positions: vec![0.3, 2.0 / 3.0],
                amplitudes: vec![1.0, 1.0],
            },
            lambda: 0.05,
            grid_sizes: vec![32, 64, 128, 256, 512],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramCheckConfig {
    #[serde(flatten)]
    pub spikes: SpikesConfig,
    pub h_exponents: Vec<i32>,
}

impl Default for GramCheckConfig {
    fn default() -> Self {
        GramCheckConfig {
            spikes: SpikesConfig {
                kernel: KernelSpec::Ideal { fc: 10 },
                positions: vec![0.45, 0.55],
                amplitudes: vec![1.0, 1.0],
            },
            h_exponents: vec![-8, -9, -10, -11, -12],
        }
    }
}

/// Load a config file, or fall back to the given default.
pub fn load_or_default<T: serde::de::DeserializeOwned>(
    path: Option<&std::path::Path>,
    default: T,
) -> Result<T, String> {
    match path {
        None => Ok(default),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| format!("invalid config {}: {e}", p.display()))
        }
    }
}
