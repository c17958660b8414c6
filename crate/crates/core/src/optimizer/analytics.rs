use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AssortmentSolution;
use crate::domain::Catalog;
use crate::error::{Error, Result};

/// Weight-weighted fabric shares of an assortment.
pub fn fabric_composition(solution: &AssortmentSolution, catalog: &Catalog) -> Result<BTreeMap<String, f64>> {
    if solution.product_ids.is_empty() {
        return Err(Error::EmptyAssortment);
    }
    let mut mass: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    for id in &solution.product_ids {
        let product = catalog.product(id).ok_or_else(|| Error::UnknownProduct(id.clone()))?;
        for c in &product.blend.components {
            *mass.entry(c.fabric.clone()).or_default() += c.fraction * product.weight_kg;
        }
        total += product.weight_kg;
    }
    Ok(mass.into_iter().map(|(fabric, m)| (fabric, m / total)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Equal-width histogram over `[min, max]`; the maximum lands in the last
/// bin. A zero-width range yields a single bin holding every value.
pub fn histogram(values: &[f64], n_bins: usize) -> Result<Vec<HistogramBin>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Ok(vec![HistogramBin { lower: min, upper: max, count: values.len() }]);
    }

    let width = (max - min) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let bin = (((v - min) / width).floor() as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lower: min + i as f64 * width,
            upper: if i + 1 == n_bins { max } else { min + (i + 1) as f64 * width },
            count,
        })
        .collect())
}

/// Number of maximal runs of non-empty bins.
pub fn count_peaks(bins: &[HistogramBin]) -> usize {
    bins.iter()
        .enumerate()
        .filter(|(i, b)| b.count > 0 && (*i == 0 || bins[i - 1].count == 0))
        .count()
}
