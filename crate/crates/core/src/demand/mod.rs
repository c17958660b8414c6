//! Store-level demand estimation: sparse sales, factor-model completion,
//! trend adjustment.

mod als;
mod linalg;
mod model_io;

pub use als::{fit_als, regularized_loss, AlsConfig, FactorModel};
pub use model_io::{read_model, write_model};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub product: usize,
    pub store: usize,
    pub value: f64,
    pub confidence: f64,
}

impl Observation {
    pub fn new(product: usize, store: usize, value: f64) -> Self {
        Self { product, store, value, confidence: 1.0 }
    }
}

/// Observed product x store sales. Observations are kept sorted by
/// `(product, store)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SalesMatrix {
    n_products: usize,
    n_stores: usize,
    observations: Vec<Observation>,
}

impl SalesMatrix {
    pub fn new(
        n_products: usize,
        n_stores: usize,
        mut observations: Vec<Observation>,
    ) -> Result<Self> {
        for o in &observations {
            if o.product >= n_products || o.store >= n_stores {
                return Err(Error::InvalidMatrix(format!(
                    "cell ({}, {}) outside {n_products}x{n_stores}",
                    o.product, o.store
                )));
            }
            if !(o.value.is_finite() && o.value >= 0.0) {
                return Err(Error::InvalidMatrix(format!(
                    "cell ({}, {}) has value {}",
                    o.product, o.store, o.value
                )));
            }
            if !(o.confidence.is_finite() && o.confidence > 0.0) {
                return Err(Error::InvalidMatrix(format!(
                    "cell ({}, {}) has confidence {}",
                    o.product, o.store, o.confidence
                )));
            }
        }
        observations.sort_by_key(|o| (o.product, o.store));
        if let Some(w) = observations
            .windows(2)
            .find(|w| (w[0].product, w[0].store) == (w[1].product, w[1].store))
        {
            return Err(Error::InvalidMatrix(format!(
                "cell ({}, {}) observed twice",
                w[0].product, w[0].store
            )));
        }
        Ok(Self { n_products, n_stores, observations })
    }

    /// Fully observed matrix from a dense row-major grid.
    pub fn from_dense(values: &Array2<f64>) -> Result<Self> {
        let (n, m) = values.dim();
        let obs = values
            .indexed_iter()
            .map(|((i, j), &v)| Observation::new(i, j, v))
            .collect();
        Self::new(n, m, obs)
    }

    pub fn n_products(&self) -> usize {
        self.n_products
    }

    pub fn n_stores(&self) -> usize {
        self.n_stores
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn get(&self, product: usize, store: usize) -> Option<f64> {
        self.observations
            .binary_search_by_key(&(product, store), |o| (o.product, o.store))
            .ok()
            .map(|i| self.observations[i].value)
    }

    /// Splits off a seeded random `fraction` of the observations as a
    /// held-out set. Returns `(training matrix, held-out cells)`.
    pub fn split_holdout(&self, fraction: f64, seed: u64) -> Result<(SalesMatrix, Vec<Observation>)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidConfig(format!("holdout fraction {fraction} not in [0, 1)")));
        }
        let mut order: Vec<usize> = (0..self.observations.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_held = (fraction * self.observations.len() as f64).round() as usize;
        let mut held_mask = vec![false; self.observations.len()];
        for &i in &order[..n_held] {
            held_mask[i] = true;
        }
        let (mut train, mut held) = (Vec::new(), Vec::new());
        for (o, is_held) in self.observations.iter().zip(held_mask) {
            if is_held { held.push(*o) } else { train.push(*o) }
        }
        Ok((SalesMatrix::new(self.n_products, self.n_stores, train)?, held))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Observed,
    Imputed,
}

/// Completed demand forecast, one cell per product and store.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrix {
    values: Array2<f64>,
    provenance: Array2<Provenance>,
}

impl DemandMatrix {
    pub fn new(values: Array2<f64>, provenance: Array2<Provenance>) -> Result<Self> {
        if values.dim() != provenance.dim() {
            return Err(Error::DimensionMismatch(format!(
                "values {:?} vs provenance {:?}",
                values.dim(),
                provenance.dim()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidMatrix(format!("demand value {v} is not a non-negative number")));
        }
        Ok(Self { values, provenance })
    }

    pub fn n_products(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_stores(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, product: usize, store: usize) -> f64 {
        self.values[[product, store]]
    }

    pub fn provenance(&self, product: usize, store: usize) -> Provenance {
        self.provenance[[product, store]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn store_column(&self, store: usize) -> Vec<f64> {
        self.values.column(store).to_vec()
    }
}

/// Fills unobserved cells from the factor model, clamped at zero; observed
/// cells keep their recorded values.
pub fn impute(model: &FactorModel, matrix: &SalesMatrix) -> Result<DemandMatrix> {
    if model.n_products() != matrix.n_products() || model.n_stores() != matrix.n_stores() {
        return Err(Error::DimensionMismatch(format!(
            "model is {}x{}, sales matrix is {}x{}",
            model.n_products(),
            model.n_stores(),
            matrix.n_products(),
            matrix.n_stores()
        )));
    }
    let (n, m) = (matrix.n_products(), matrix.n_stores());
    let mut values = Array2::from_shape_fn((n, m), |(i, j)| model.predict(i, j).max(0.0));
    let mut provenance = Array2::from_elem((n, m), Provenance::Imputed);
    for o in matrix.observations() {
        values[[o.product, o.store]] = o.value;
        provenance[[o.product, o.store]] = Provenance::Observed;
    }
    DemandMatrix::new(values, provenance)
}

pub fn apply_trend(demand: &DemandMatrix, trend_scalar: f64) -> Result<DemandMatrix> {
    if !(trend_scalar.is_finite() && trend_scalar > 0.0) {
        return Err(Error::NonPositiveTrend(trend_scalar));
    }
    Ok(DemandMatrix {
        values: demand.values.mapv(|v| v * trend_scalar),
        provenance: demand.provenance.clone(),
    })
}

/// Demand shares of one store: its column divided by the column total.
pub fn normalized_shares(demand: &DemandMatrix, store: usize) -> Result<Vec<f64>> {
    if store >= demand.n_stores() {
        return Err(Error::DimensionMismatch(format!(
            "store {store} out of range for {} stores",
            demand.n_stores()
        )));
    }
    let column = demand.store_column(store);
    let total: f64 = column.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroDemandStore(store));
    }
    Ok(column.into_iter().map(|v| v / total).collect())
}
