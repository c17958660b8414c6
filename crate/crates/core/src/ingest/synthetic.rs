use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DatasetBundle, Manifest};
use crate::demand::{Observation, SalesMatrix};
use crate::domain::{normalize_fabric_name, Catalog, FabricBlend, FabricTable, Product, Store};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricPopulation {
    pub fabric: String,
    pub higg_msi_per_kg: f64,
    pub share: f64,
}

impl FabricPopulation {
    pub fn new(fabric: &str, higg_msi_per_kg: f64, share: f64) -> Self {
        Self { fabric: fabric.to_string(), higg_msi_per_kg, share }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_products: usize,
    pub n_stores: usize,
    pub fabric_populations: Vec<FabricPopulation>,
    pub rank: usize,
    /// Noise standard deviation as a fraction of the ground-truth std.
    pub noise_sigma: f64,
    /// Probability that a cell is observed.
    pub density: f64,
    pub weight_range_kg: (f64, f64),
    pub price_range: (f64, f64),
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 2018,
            n_products: 200,
            n_stores: 3,
            fabric_populations: vec![
                FabricPopulation::new("cotton", 98.0, 0.4),
                FabricPopulation::new("viscose", 62.0, 0.4),
                FabricPopulation::new("polyester", 44.0, 0.2),
            ],
            rank: 3,
            noise_sigma: 0.05,
            density: 0.7,
            weight_range_kg: (0.1, 0.6),
            price_range: (5.0, 100.0),
        }
    }
}

impl SyntheticConfig {
    /// Default populations with every product weighing 1 kg, so product
    /// scores are exactly the fabric indices.
    pub fn three_peak(n_products: usize, n_stores: usize, seed: u64) -> Self {
        Self { seed, n_products, n_stores, weight_range_kg: (1.0, 1.0), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_products == 0 || self.n_stores == 0 {
            return bad("n_products and n_stores must be positive".into());
        }
        if self.rank == 0 {
            return bad("rank must be positive".into());
        }
        if self.fabric_populations.is_empty() {
            return bad("at least one fabric population is required".into());
        }
        if self.fabric_populations.iter().any(|p| !(p.share >= 0.0) || !(p.higg_msi_per_kg >= 0.0)) {
            return bad("population shares and indices must be non-negative".into());
        }
        let total: f64 = self.fabric_populations.iter().map(|p| p.share).sum();
        if (total - 1.0).abs() > 1e-6 {
            return bad(format!("population shares sum to {total}, expected 1"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density {} outside (0, 1]", self.density));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative".into());
        }
        let (wlo, whi) = self.weight_range_kg;
        if !(wlo > 0.0 && wlo <= whi && whi.is_finite()) {
            return bad("weight_range_kg must satisfy 0 < low <= high".into());
        }
        let (plo, phi) = self.price_range;
        if !(plo >= 0.0 && plo <= phi && phi.is_finite()) {
            return bad("price_range must satisfy 0 <= low <= high".into());
        }
        Ok(())
    }
}

/// Population sizes by largest remainder, so they always sum to `n`.
fn population_counts(shares: &[f64], n: usize) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|s| s * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let missing = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle().take(missing) {
        counts[i] += 1;
    }
    counts
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Builds a seeded catalog of single-fabric products and a sales matrix
/// drawn from a non-negative low-rank model with product and store offsets.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<DatasetBundle> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut table = FabricTable::new();
    for pop in &config.fabric_populations {
        table.insert(&pop.fabric, pop.higg_msi_per_kg)?;
    }

    let shares: Vec<f64> = config.fabric_populations.iter().map(|p| p.share).collect();
    let mut fabric_of: Vec<usize> = population_counts(&shares, config.n_products)
        .into_iter()
        .enumerate()
        .flat_map(|(i, c)| std::iter::repeat_n(i, c))
        .collect();
    fabric_of.shuffle(&mut rng);

    let id_width = config.n_products.to_string().len().max(4);
    let products: Vec<Product> = fabric_of
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let fabric = normalize_fabric_name(&config.fabric_populations[f].fabric);
            let weight_kg = uniform(&mut rng, config.weight_range_kg);
            let price = uniform(&mut rng, config.price_range);
            Product {
                id: format!("p{:0width$}", j + 1, width = id_width),
                name: format!("{fabric} item {}", j + 1),
                category: "apparel".into(),
                price,
                weight_kg,
                blend: FabricBlend::single(&fabric),
            }
        })
        .collect();

    const REGIONS: [&str; 4] = ["North", "South", "East", "West"];
    let store_width = config.n_stores.to_string().len().max(2);
    let stores: Vec<Store> = (0..config.n_stores)
        .map(|s| Store {
            id: format!("s{:0width$}", s + 1, width = store_width),
            name: format!("Store {}", s + 1),
            region: Some(REGIONS[s % REGIONS.len()].to_string()),
        })
        .collect();

    let (n, m, r) = (config.n_products, config.n_stores, config.rank);
    let product_factors: Vec<f64> = (0..n * r).map(|_| rng.random_range(0.0..1.0)).collect();
    let store_factors: Vec<f64> = (0..m * r).map(|_| rng.random_range(0.0..1.0)).collect();
    let product_offset: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
    let store_offset: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..5.0)).collect();
    let scale = 10.0 / r as f64;
    let truth: Vec<f64> = (0..n * m)
        .map(|cell| {
            let (p, s) = (cell / m, cell % m);
            let dot: f64 = (0..r).map(|d| product_factors[p * r + d] * store_factors[s * r + d]).sum();
            scale * dot + product_offset[p] + store_offset[s]
        })
        .collect();

    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let std = (truth.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / truth.len() as f64).sqrt();
    let noise = Normal::new(0.0, config.noise_sigma * std).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut observations = Vec::new();
    for (cell, &t) in truth.iter().enumerate() {
        let noisy = (t + noise.sample(&mut rng)).max(0.0);
        let keep = config.density >= 1.0 || rng.random_bool(config.density);
        if keep {
            observations.push(Observation::new(cell / m, cell % m, noisy));
        }
    }

    let catalog = Catalog::new(products, stores, table);
    let sales = SalesMatrix::new(n, m, observations)?;
    Ok(DatasetBundle { catalog, sales, source_manifest: Manifest::default() })
}
