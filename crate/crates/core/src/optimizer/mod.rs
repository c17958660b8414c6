//! Per-store assortment selection under the revenue/sustainability
//! weighted sum.
//!
//! For a trade-off `lambda` and assortment size `k`, each candidate gets
//!
//! ```text
//! score_j = (1 - lambda) / k * revenue_j  -  lambda / k * higg_j
//! ```
//!
//! where `revenue_j` is per-unit revenue times forecast demand at the store
//! and `higg_j` the product's Higg score, optionally min-max rescaled to
//! `[0, 1]` over the store's candidates. The objective is additive over the
//! chosen products, so taking the `k` best scores is exactly optimal; the
//! brute-force enumerator in [`oracle`] checks that.

mod analytics;
mod oracle;
mod pareto;

pub use analytics::{count_peaks, fabric_composition, histogram, HistogramBin};
pub use oracle::{brute_force_oracle, ENUMERATION_LIMIT};
pub use pareto::{even_grid, non_dominated_filter, pareto_front, FrontMember, ParetoFront};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::demand::DemandMatrix;
use crate::domain::Catalog;
use crate::error::{Error, Result};
use crate::numeric::canonical_sum;
use crate::sustainability::ProductHiggScore;

/// Min/max of each raw objective over a store's candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveScales {
    pub revenue_min: f64,
    pub revenue_max: f64,
    pub higg_min: f64,
    pub higg_max: f64,
}

impl ObjectiveScales {
    pub fn from_candidates(candidates: &[Candidate]) -> Self {
        let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut hmin, mut hmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in candidates {
            rmin = rmin.min(c.revenue);
            rmax = rmax.max(c.revenue);
            hmin = hmin.min(c.higg);
            hmax = hmax.max(c.higg);
        }
        if candidates.is_empty() {
            (rmin, rmax, hmin, hmax) = (0.0, 0.0, 0.0, 0.0);
        }
        Self { revenue_min: rmin, revenue_max: rmax, higg_min: hmin, higg_max: hmax }
    }

    fn rescale(value: f64, min: f64, max: f64) -> f64 {
        if max > min {
            (value - min) / (max - min)
        } else {
            0.0
        }
    }

    pub fn rescale_revenue(&self, revenue: f64) -> f64 {
        Self::rescale(revenue, self.revenue_min, self.revenue_max)
    }

    pub fn rescale_higg(&self, higg: f64) -> f64 {
        Self::rescale(higg, self.higg_min, self.higg_max)
    }
}

/// One product as seen by a single store's optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    /// Per-unit revenue times forecast demand at this store.
    pub revenue: f64,
    pub higg: f64,
}

/// The candidate set of one store, in catalog order.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreInstance {
    pub store_index: usize,
    pub candidates: Vec<Candidate>,
}

impl StoreInstance {
    pub fn new(store_index: usize, candidates: Vec<Candidate>) -> Self {
        Self { store_index, candidates }
    }

    pub fn from_catalog(
        store_index: usize,
        demand: &DemandMatrix,
        catalog: &Catalog,
        higg: &[ProductHiggScore],
    ) -> Result<Self> {
        if demand.n_products() != catalog.n_products() || demand.n_stores() != catalog.n_stores() {
            return Err(Error::DimensionMismatch(format!(
                "demand is {}x{}, catalog has {} products and {} stores",
                demand.n_products(),
                demand.n_stores(),
                catalog.n_products(),
                catalog.n_stores()
            )));
        }
        if higg.len() != catalog.n_products() {
            return Err(Error::DimensionMismatch(format!(
                "{} higg scores for {} products",
                higg.len(),
                catalog.n_products()
            )));
        }
        if store_index >= catalog.n_stores() {
            return Err(Error::DimensionMismatch(format!(
                "store index {store_index} out of range for {} stores",
                catalog.n_stores()
            )));
        }
        let candidates = catalog
            .products()
            .iter()
            .zip(higg)
            .enumerate()
            .map(|(j, (p, h))| Candidate {
                id: p.id.clone(),
                revenue: catalog.unit_revenue(j, store_index) * demand.get(j, store_index),
                higg: h.score,
            })
            .collect();
        Ok(Self { store_index, candidates })
    }

    pub fn scales(&self) -> ObjectiveScales {
        ObjectiveScales::from_candidates(&self.candidates)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.candidates.iter().position(|c| c.id == id)
    }

    fn objective_inputs(&self, j: usize, scales: &ObjectiveScales, normalize: bool) -> (f64, f64) {
        let c = &self.candidates[j];
        if normalize {
            (scales.rescale_revenue(c.revenue), scales.rescale_higg(c.higg))
        } else {
            (c.revenue, c.higg)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locks {
    #[serde(default)]
    pub locked_in: BTreeSet<String>,
    #[serde(default)]
    pub locked_out: BTreeSet<String>,
}

fn default_normalize() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRequest {
    pub store_index: usize,
    pub k: usize,
    pub trade_off_lambda: f64,
    #[serde(flatten)]
    pub locks: Locks,
    #[serde(default = "default_normalize")]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssortmentSolution {
    pub store_index: usize,
    pub k: usize,
    pub trade_off_lambda: f64,
    /// Selected product ids in ascending order.
    pub product_ids: Vec<String>,
    /// Mean expected revenue of the selected products, raw units.
    pub revenue_score: f64,
    /// Mean Higg score of the selected products.
    pub higg_score: f64,
    pub objective_value: f64,
}

/// Per-candidate weighted-sum scores for `instance`.
pub fn score_candidates(
    instance: &StoreInstance,
    trade_off_lambda: f64,
    k: usize,
    scales: &ObjectiveScales,
    normalize: bool,
) -> Vec<f64> {
    let (w_rev, w_higg) = weights(trade_off_lambda, k);
    (0..instance.len())
        .map(|j| {
            let (rev, higg) = instance.objective_inputs(j, scales, normalize);
            w_rev * rev - w_higg * higg
        })
        .collect()
}

/// [`score_candidates`] for a store of a loaded catalog.
#[allow(clippy::too_many_arguments)]
pub fn product_scores(
    store_index: usize,
    demand: &DemandMatrix,
    catalog: &Catalog,
    higg: &[ProductHiggScore],
    trade_off_lambda: f64,
    k: usize,
    scales: &ObjectiveScales,
    normalize: bool,
) -> Result<Vec<f64>> {
    let instance = StoreInstance::from_catalog(store_index, demand, catalog, higg)?;
    Ok(score_candidates(&instance, trade_off_lambda, k, scales, normalize))
}

fn weights(trade_off_lambda: f64, k: usize) -> (f64, f64) {
    let k = k as f64;
    ((1.0 - trade_off_lambda) / k, trade_off_lambda / k)
}

/// Weighted-sum objective of a selected set. Sums are taken over sorted
/// values so equal multisets evaluate to identical bits regardless of the
/// order in which products were picked.
pub(crate) fn objective_value(
    instance: &StoreInstance,
    selected: &[usize],
    trade_off_lambda: f64,
    k: usize,
    scales: &ObjectiveScales,
    normalize: bool,
) -> f64 {
    let (revs, higgs): (Vec<f64>, Vec<f64>) = selected
        .iter()
        .map(|&j| instance.objective_inputs(j, scales, normalize))
        .unzip();
    let (w_rev, w_higg) = weights(trade_off_lambda, k);
    w_rev * canonical_sum(&revs) - w_higg * canonical_sum(&higgs)
}

pub(crate) fn build_solution(
    instance: &StoreInstance,
    selected: &[usize],
    trade_off_lambda: f64,
    k: usize,
    scales: &ObjectiveScales,
    normalize: bool,
) -> AssortmentSolution {
    let revenues: Vec<f64> = selected.iter().map(|&j| instance.candidates[j].revenue).collect();
    let higgs: Vec<f64> = selected.iter().map(|&j| instance.candidates[j].higg).collect();
    let mut product_ids: Vec<String> =
        selected.iter().map(|&j| instance.candidates[j].id.clone()).collect();
    product_ids.sort();
    AssortmentSolution {
        store_index: instance.store_index,
        k,
        trade_off_lambda,
        product_ids,
        revenue_score: canonical_sum(&revenues) / k as f64,
        higg_score: canonical_sum(&higgs) / k as f64,
        objective_value: objective_value(instance, selected, trade_off_lambda, k, scales, normalize),
    }
}

/// Resolved lock indices after validation.
pub(crate) struct ResolvedLocks {
    pub locked_in: Vec<usize>,
    pub excluded: Vec<bool>,
}

pub(crate) fn check_request(
    instance: &StoreInstance,
    k: usize,
    trade_off_lambda: f64,
    locks: &Locks,
) -> Result<ResolvedLocks> {
    if k == 0 {
        return Err(Error::InvalidRequest("k must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&trade_off_lambda) {
        return Err(Error::InvalidRequest(format!(
            "trade_off_lambda {trade_off_lambda} outside [0, 1]"
        )));
    }
    if let Some(id) = locks.locked_in.intersection(&locks.locked_out).next() {
        return Err(Error::InvalidLocks(format!("`{id}` is both locked in and locked out")));
    }
    if locks.locked_in.len() > k {
        return Err(Error::InvalidLocks(format!(
            "{} products locked in but k = {k}",
            locks.locked_in.len()
        )));
    }
    let resolve = |id: &String| {
        instance
            .index_of(id)
            .ok_or_else(|| Error::InvalidLocks(format!("unknown product `{id}`")))
    };
    let locked_in = locks.locked_in.iter().map(resolve).collect::<Result<Vec<_>>>()?;
    let locked_out = locks.locked_out.iter().map(resolve).collect::<Result<Vec<_>>>()?;

    let mut excluded = vec![false; instance.len()];
    for &j in locked_in.iter().chain(&locked_out) {
        excluded[j] = true;
    }
    let available = excluded.iter().filter(|e| !**e).count();
    let needed = k - locked_in.len();
    if available < needed {
        return Err(Error::InsufficientCandidates { needed, available });
    }
    Ok(ResolvedLocks { locked_in, excluded })
}

/// Top-k selection against explicit scales.
pub fn optimize_with_scales(
    instance: &StoreInstance,
    k: usize,
    trade_off_lambda: f64,
    locks: &Locks,
    scales: &ObjectiveScales,
    normalize: bool,
) -> Result<AssortmentSolution> {
    let resolved = check_request(instance, k, trade_off_lambda, locks)?;
    let scores = score_candidates(instance, trade_off_lambda, k, scales, normalize);

    let mut eligible: Vec<usize> = (0..instance.len()).filter(|&j| !resolved.excluded[j]).collect();
    eligible.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| instance.candidates[a].id.cmp(&instance.candidates[b].id))
    });

    let mut selected = resolved.locked_in;
    let free_slots = k - selected.len();
    selected.extend_from_slice(&eligible[..free_slots]);
    Ok(build_solution(instance, &selected, trade_off_lambda, k, scales, normalize))
}

/// Locked-in products first, then the highest-scoring eligible candidates,
/// ties going to the smaller product id. Scales come from the instance.
pub fn optimize_instance(instance: &StoreInstance, request: &OptimizeRequest) -> Result<AssortmentSolution> {
    if request.store_index != instance.store_index {
        return Err(Error::DimensionMismatch(format!(
            "request for store {} against instance for store {}",
            request.store_index, instance.store_index
        )));
    }
    optimize_with_scales(
        instance,
        request.k,
        request.trade_off_lambda,
        &request.locks,
        &instance.scales(),
        request.normalize,
    )
}

pub fn optimize_assortment(
    request: &OptimizeRequest,
    demand: &DemandMatrix,
    catalog: &Catalog,
    higg: &[ProductHiggScore],
) -> Result<AssortmentSolution> {
    let instance = StoreInstance::from_catalog(request.store_index, demand, catalog, higg)?;
    optimize_instance(&instance, request)
}
