//! Settings file read by `--config`. Every key is optional; command-line
//! flags and `ASSORTIFY_*` variables take precedence over it.

use std::path::{Path, PathBuf};

use assortify::ingest::FabricPopulation;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub fabrics: Option<PathBuf>,
    pub stores: Option<PathBuf>,
    pub products: Option<PathBuf>,
    pub sales: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,

    pub rank: Option<usize>,
    pub reg_lambda: Option<f64>,
    pub n_iterations: Option<usize>,
    pub seed: Option<u64>,
    pub init_scale: Option<f64>,
    pub convergence_tol: Option<f64>,
    pub trend_scalar: Option<f64>,
    pub holdout: Option<f64>,

    pub k: Option<usize>,
    pub grid_points: Option<usize>,
    pub lambda_grid: Option<Vec<f64>>,
    pub store_ids: Option<Vec<String>>,
    pub normalize: Option<bool>,
    pub workers: Option<usize>,
    pub composition_lambdas: Option<Vec<f64>>,
    pub bins: Option<usize>,

    pub addr: Option<String>,
    pub cors: Option<bool>,

    pub generator: GeneratorFile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorFile {
    pub preset: Option<String>,
    pub n_products: Option<usize>,
    pub n_stores: Option<usize>,
    pub rank: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub density: Option<f64>,
    pub weight_min_kg: Option<f64>,
    pub weight_max_kg: Option<f64>,
    pub populations: Option<Vec<FabricPopulation>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input("Io", format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::input("InvalidConfig", format!("{}: {e}", path.display())))
    }
}
