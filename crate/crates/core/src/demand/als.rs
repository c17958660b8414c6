//! Bias-augmented alternating least squares.
//!
//! Minimizes, over the observed cells only,
//!
//! ```text
//! sum_ij c_ij (x_ij - u_i . v_j - b_i - g_j)^2
//!   + reg * (sum_i |u_i|^2 + b_i^2 + sum_j |v_j|^2 + g_j^2)
//! ```
//!
//! Each half-step fixes one side and solves every row of the other side
//! exactly: the unknowns `(u_i, b_i)` form a ridge regression against the
//! design rows `[v_j, 1]` with targets `x_ij - g_j`. Because every solve is
//! an exact minimizer of a convex subproblem, the loss never increases.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::linalg::cholesky_solve;
use super::SalesMatrix;
use crate::error::{Error, Result};

/// Relative pivot floor used to detect rank-deficient subproblems when no
/// regularization is applied.
const SINGULAR_PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct AlsConfig {
    pub rank: usize,
    pub reg_lambda: f64,
    pub n_iterations: usize,
    pub seed: u64,
    pub init_scale: f64,
    /// Stop once the relative loss change between iterations drops below this.
    pub convergence_tol: f64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            rank: 8,
            reg_lambda: 0.1,
            n_iterations: 20,
            seed: 0,
            init_scale: 0.1,
            convergence_tol: 1e-5,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if self.n_iterations == 0 {
            return Err(Error::InvalidConfig("n_iterations must be at least 1".into()));
        }
        if !(self.reg_lambda.is_finite() && self.reg_lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!("reg_lambda {} must be >= 0", self.reg_lambda)));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(Error::InvalidConfig(format!("init_scale {} must be > 0", self.init_scale)));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "convergence_tol {} must be >= 0",
                self.convergence_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    /// `n_products x rank`
    pub product_factors: Array2<f64>,
    /// `n_stores x rank`
    pub store_factors: Array2<f64>,
    pub product_bias: Array1<f64>,
    pub store_bias: Array1<f64>,
    pub final_loss: f64,
    /// Loss after each completed iteration.
    pub loss_history: Vec<f64>,
}

impl FactorModel {
    pub fn n_products(&self) -> usize {
        self.product_factors.nrows()
    }

    pub fn n_stores(&self) -> usize {
        self.store_factors.nrows()
    }

    pub fn rank(&self) -> usize {
        self.product_factors.ncols()
    }

    /// Raw model value for one cell, before any clamping.
    pub fn predict(&self, product: usize, store: usize) -> f64 {
        self.product_factors.row(product).dot(&self.store_factors.row(store))
            + self.product_bias[product]
            + self.store_bias[store]
    }
}

/// Value of the training objective for the given parameters.
pub fn regularized_loss(
    matrix: &SalesMatrix,
    product_factors: &Array2<f64>,
    store_factors: &Array2<f64>,
    product_bias: &Array1<f64>,
    store_bias: &Array1<f64>,
    reg_lambda: f64,
) -> f64 {
    let mut fit = 0.0;
    for o in matrix.observations() {
        let pred = product_factors.row(o.product).dot(&store_factors.row(o.store))
            + product_bias[o.product]
            + store_bias[o.store];
        let r = o.value - pred;
        fit += o.confidence * r * r;
    }
    let penalty = product_factors.iter().map(|x| x * x).sum::<f64>()
        + store_factors.iter().map(|x| x * x).sum::<f64>()
        + product_bias.iter().map(|x| x * x).sum::<f64>()
        + store_bias.iter().map(|x| x * x).sum::<f64>();
    fit + reg_lambda * penalty
}

/// Observations grouped by one axis: `(other index, value, confidence)`.
type Adjacency = Vec<Vec<(usize, f64, f64)>>;

fn adjacency(matrix: &SalesMatrix) -> (Adjacency, Adjacency) {
    let mut by_product = vec![Vec::new(); matrix.n_products()];
    let mut by_store = vec![Vec::new(); matrix.n_stores()];
    for o in matrix.observations() {
        by_product[o.product].push((o.store, o.value, o.confidence));
        by_store[o.store].push((o.product, o.value, o.confidence));
    }
    (by_product, by_store)
}

/// Solves every row of one side with the other side frozen. Returns the new
/// factor matrix and bias vector.
fn half_step(
    side: &'static str,
    rows: &Adjacency,
    fixed_factors: &Array2<f64>,
    fixed_bias: &Array1<f64>,
    reg_lambda: f64,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let rank = fixed_factors.ncols();
    let dim = rank + 1;
    let pivot_tol = if reg_lambda > 0.0 { 0.0 } else { SINGULAR_PIVOT_TOL };

    let solutions: Vec<Option<Vec<f64>>> = rows
        .par_iter()
        .map(|cells| {
            let mut a = vec![0.0; dim * dim];
            let mut b = vec![0.0; dim];
            let mut z = vec![0.0; dim];
            for &(other, value, confidence) in cells {
                z[..rank].iter_mut().zip(fixed_factors.row(other)).for_each(|(zk, &f)| *zk = f);
                z[rank] = 1.0;
                let target = value - fixed_bias[other];
                for p in 0..dim {
                    let cz = confidence * z[p];
                    b[p] += cz * target;
                    for q in 0..=p {
                        a[p * dim + q] += cz * z[q];
                    }
                }
            }
            for p in 0..dim {
                for q in 0..p {
                    a[q * dim + p] = a[p * dim + q];
                }
                a[p * dim + p] += reg_lambda;
            }
            cholesky_solve(&a, &b, pivot_tol)
        })
        .collect();

    let mut factors = Array2::zeros((rows.len(), rank));
    let mut bias = Array1::zeros(rows.len());
    for (index, solution) in solutions.into_iter().enumerate() {
        let x = solution.ok_or(Error::SingularSystem { side, index })?;
        factors.row_mut(index).iter_mut().zip(&x[..rank]).for_each(|(f, &v)| *f = v);
        bias[index] = x[rank];
    }
    Ok((factors, bias))
}

/// Initial biases: observed row and column means minus the global mean.
fn initial_biases(matrix: &SalesMatrix) -> (Array1<f64>, Array1<f64>) {
    let obs = matrix.observations();
    let global = obs.iter().map(|o| o.value).sum::<f64>() / obs.len() as f64;
    let mut row_sum = vec![0.0; matrix.n_products()];
    let mut row_n = vec![0usize; matrix.n_products()];
    let mut col_sum = vec![0.0; matrix.n_stores()];
    let mut col_n = vec![0usize; matrix.n_stores()];
    for o in obs {
        row_sum[o.product] += o.value;
        row_n[o.product] += 1;
        col_sum[o.store] += o.value;
        col_n[o.store] += 1;
    }
    let centered = |sum: &[f64], n: &[usize]| -> Array1<f64> {
        sum.iter()
            .zip(n)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 - global })
            .collect()
    };
    (centered(&row_sum, &row_n), centered(&col_sum, &col_n))
}

/// Fits the factor model. Deterministic for a given matrix and config: the
/// per-row solves run in parallel but each reads only the frozen opposite
/// side, so the result does not depend on scheduling.
pub fn fit_als(matrix: &SalesMatrix, config: &AlsConfig) -> Result<FactorModel> {
    config.validate()?;
    if matrix.is_empty() {
        return Err(Error::EmptyMatrix);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = config.init_scale;
    let mut product_factors = Array2::from_shape_simple_fn((matrix.n_products(), config.rank), || {
        rng.random_range(-scale..=scale)
    });
    let mut store_factors = Array2::from_shape_simple_fn((matrix.n_stores(), config.rank), || {
        rng.random_range(-scale..=scale)
    });
    let (mut product_bias, mut store_bias) = initial_biases(matrix);

    let (by_product, by_store) = adjacency(matrix);
    let mut loss_history = Vec::with_capacity(config.n_iterations);

    for _ in 0..config.n_iterations {
        (product_factors, product_bias) =
            half_step("product", &by_product, &store_factors, &store_bias, config.reg_lambda)?;
        (store_factors, store_bias) =
            half_step("store", &by_store, &product_factors, &product_bias, config.reg_lambda)?;

        let loss = regularized_loss(
            matrix,
            &product_factors,
            &store_factors,
            &product_bias,
            &store_bias,
            config.reg_lambda,
        );
        let previous = loss_history.last().copied();
        loss_history.push(loss);
        if let Some(prev) = previous {
            let change = (prev - loss).abs() / prev.max(f64::MIN_POSITIVE);
            if change < config.convergence_tol {
                break;
            }
        }
        if loss == 0.0 {
            break;
        }
    }

    Ok(FactorModel {
        product_factors,
        store_factors,
        product_bias,
        store_bias,
        final_loss: *loss_history.last().expect("at least one iteration"),
        loss_history,
    })
}
