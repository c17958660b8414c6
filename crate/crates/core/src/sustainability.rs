//! Higg MSI scores for products and assortments.

use serde::Serialize;

use crate::domain::{Catalog, FabricTable, Product};
use crate::error::{Error, Result};
use crate::numeric::canonical_sum;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductHiggScore {
    pub product_id: String,
    pub score: f64,
}

/// Blend-weighted Higg index of the product's fabrics, scaled by the
/// garment weight in kilograms.
pub fn product_higg_score(product: &Product, table: &FabricTable) -> Result<ProductHiggScore> {
    let mut per_kg = 0.0;
    for c in &product.blend.components {
        let index = table.get(&c.fabric).ok_or_else(|| Error::UnknownFabric {
            fabric: c.fabric.clone(),
            context: format!("product `{}`", product.id),
        })?;
        per_kg += index * c.fraction;
    }
    Ok(ProductHiggScore { product_id: product.id.clone(), score: per_kg * product.weight_kg })
}

/// Mean product score of an assortment.
pub fn assortment_higg_score(scores: &[ProductHiggScore]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyAssortment);
    }
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    Ok(canonical_sum(&values) / values.len() as f64)
}

/// One score per product, in catalog order.
pub fn score_catalog(catalog: &Catalog) -> Result<Vec<ProductHiggScore>> {
    catalog
        .products()
        .iter()
        .map(|p| product_higg_score(p, catalog.fabric_table()))
        .collect()
}
