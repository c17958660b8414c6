//! Catalog types shared by every stage of the pipeline.
//!
//! Products and stores keep the order they were supplied in; that order
//! defines the row and column indices of every sales and demand matrix.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};

/// Fractions in a blend must sum to one within this tolerance.
pub const BLEND_TOLERANCE: f64 = 1e-6;

/// Case-folds and trims a fabric name so `" Cotton"` and `"cotton"` match.
pub fn normalize_fabric_name(name: &str) -> String {
    name.trim().to_lowercase()
}

/// Higg MSI value per kilogram for each known fabric.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FabricTable {
    entries: BTreeMap<String, f64>,
}

impl FabricTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// The two fabric indices with published values: cotton 98 and
    /// viscose 62. Any other fabric has to be supplied by the user.
    pub fn reference() -> Self {
        let mut table = Self::new();
        table.insert("cotton", 98.0).expect("static entry");
        table.insert("viscose", 62.0).expect("static entry");
        table
    }

    pub fn insert(&mut self, name: &str, higg_msi_per_kg: f64) -> Result<()> {
        let key = normalize_fabric_name(name);
        if key.is_empty() {
            return Err(Error::InvalidCatalog("empty fabric name".into()));
        }
        if !(higg_msi_per_kg.is_finite() && higg_msi_per_kg >= 0.0) {
            return Err(Error::InvalidCatalog(format!(
                "fabric `{key}` has invalid index {higg_msi_per_kg}"
            )));
        }
        if self.entries.contains_key(&key) {
            return Err(Error::DuplicateFabric(key));
        }
        self.entries.insert(key, higg_msi_per_kg);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.get(&normalize_fabric_name(name)).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlendComponent {
    pub fabric: String,
    pub fraction: f64,
}

/// Fabric composition of a product, as fractions of its weight.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FabricBlend {
    pub components: Vec<BlendComponent>,
}

impl FabricBlend {
    /// Builds a blend from `(fabric, fraction)` pairs. No validation happens
    /// here; see [`validate_catalog`].
    pub fn new<S: AsRef<str>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        Self {
            components: pairs
                .into_iter()
                .map(|(name, fraction)| BlendComponent {
                    fabric: normalize_fabric_name(name.as_ref()),
                    fraction,
                })
                .collect(),
        }
    }

    pub fn single(fabric: &str) -> Self {
        Self::new([(fabric, 1.0)])
    }

    pub fn fraction_sum(&self) -> f64 {
        self.components.iter().map(|c| c.fraction).sum()
    }

    pub fn fraction_of(&self, fabric: &str) -> f64 {
        let key = normalize_fabric_name(fabric);
        self.components
            .iter()
            .filter(|c| c.fabric == key)
            .map(|c| c.fraction)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Product {
    pub id: String,
    pub name: String,
    pub category: String,
    /// Expected revenue per unit sold.
    pub price: f64,
    pub weight_kg: f64,
    pub blend: FabricBlend,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Store {
    pub id: String,
    pub name: String,
    pub region: Option<String>,
}

/// Products, stores and the fabric table, with id lookups.
#[derive(Debug, Clone)]
pub struct Catalog {
    products: Vec<Product>,
    stores: Vec<Store>,
    fabric_table: FabricTable,
    price_overrides: BTreeMap<(usize, usize), f64>,
    product_index: HashMap<String, usize>,
    store_index: HashMap<String, usize>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.products == other.products
            && self.stores == other.stores
            && self.fabric_table == other.fabric_table
            && self.price_overrides == other.price_overrides
    }
}

impl Catalog {
    pub fn new(products: Vec<Product>, stores: Vec<Store>, fabric_table: FabricTable) -> Self {
        let mut product_index = HashMap::with_capacity(products.len());
        for (i, p) in products.iter().enumerate() {
            product_index.entry(p.id.clone()).or_insert(i);
        }
        let mut store_index = HashMap::with_capacity(stores.len());
        for (i, s) in stores.iter().enumerate() {
            store_index.entry(s.id.clone()).or_insert(i);
        }
        Self {
            products,
            stores,
            fabric_table,
            price_overrides: BTreeMap::new(),
            product_index,
            store_index,
        }
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn stores(&self) -> &[Store] {
        &self.stores
    }

    pub fn fabric_table(&self) -> &FabricTable {
        &self.fabric_table
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    pub fn n_stores(&self) -> usize {
        self.stores.len()
    }

    pub fn product_index(&self, id: &str) -> Option<usize> {
        self.product_index.get(id).copied()
    }

    pub fn store_index(&self, id: &str) -> Option<usize> {
        self.store_index.get(id).copied()
    }

    pub fn product(&self, id: &str) -> Option<&Product> {
        self.product_index(id).map(|i| &self.products[i])
    }

    /// Overrides the per-unit revenue of one product at one store.
    pub fn set_price_override(&mut self, product: usize, store: usize, price: f64) {
        self.price_overrides.insert((product, store), price);
    }

    pub fn price_overrides(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.price_overrides
    }

    /// Per-unit expected revenue of `product` at `store`: the store override
    /// when present, the catalog price otherwise.
    pub fn unit_revenue(&self, product: usize, store: usize) -> f64 {
        self.price_overrides
            .get(&(product, store))
            .copied()
            .unwrap_or(self.products[product].price)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ValidationKind {
    UnknownFabric,
    BlendNotNormalized,
    DuplicateFabricInBlend,
    EmptyBlend,
    InvalidFraction,
    NonPositiveWeight,
    NegativePrice,
    EmptyId,
    DuplicateProduct,
    DuplicateStore,
    InvalidPriceOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationError {
    pub kind: ValidationKind,
    pub id: String,
    pub message: String,
}

impl ValidationError {
    fn new(kind: ValidationKind, id: &str, message: impl Into<String>) -> Self {
        Self { kind, id: id.to_string(), message: message.into() }
    }
}

/// Checks every catalog invariant and returns one error per violation, in
/// product order then store order. An empty list means the catalog is valid.
pub fn validate_catalog(catalog: &Catalog) -> Vec<ValidationError> {
    use ValidationKind::*;

    let mut errors = Vec::new();
    let table = catalog.fabric_table();

    let mut seen_products = HashSet::new();
    for p in catalog.products() {
        if p.id.trim().is_empty() {
            errors.push(ValidationError::new(EmptyId, &p.id, "product id is empty"));
        } else if !seen_products.insert(p.id.as_str()) {
            errors.push(ValidationError::new(DuplicateProduct, &p.id, "product id repeated"));
        }
        if !(p.weight_kg.is_finite() && p.weight_kg > 0.0) {
            errors.push(ValidationError::new(
                NonPositiveWeight,
                &p.id,
                format!("weight_kg must be positive, got {}", p.weight_kg),
            ));
        }
        if !(p.price.is_finite() && p.price >= 0.0) {
            errors.push(ValidationError::new(
                NegativePrice,
                &p.id,
                format!("price must be non-negative, got {}", p.price),
            ));
        }

        if p.blend.components.is_empty() {
            errors.push(ValidationError::new(EmptyBlend, &p.id, "blend has no components"));
            continue;
        }
        let mut seen_fabrics = HashSet::new();
        for c in &p.blend.components {
            if !seen_fabrics.insert(c.fabric.as_str()) {
                errors.push(ValidationError::new(
                    DuplicateFabricInBlend,
                    &p.id,
                    format!("fabric `{}` listed twice", c.fabric),
                ));
            }
            if !table.contains(&c.fabric) {
                errors.push(ValidationError::new(
                    UnknownFabric,
                    &p.id,
                    format!("fabric `{}` not in fabric table", c.fabric),
                ));
            }
            if !(c.fraction > 0.0 && c.fraction <= 1.0) {
                errors.push(ValidationError::new(
                    InvalidFraction,
                    &p.id,
                    format!("fraction {} for `{}` outside (0, 1]", c.fraction, c.fabric),
                ));
            }
        }
        let sum = p.blend.fraction_sum();
        if !((sum - 1.0).abs() <= BLEND_TOLERANCE) {
            errors.push(ValidationError::new(
                BlendNotNormalized,
                &p.id,
                format!("fractions sum to {sum}"),
            ));
        }
    }

    let mut seen_stores = HashSet::new();
    for s in catalog.stores() {
        if s.id.trim().is_empty() {
            errors.push(ValidationError::new(EmptyId, &s.id, "store id is empty"));
        } else if !seen_stores.insert(s.id.as_str()) {
            errors.push(ValidationError::new(DuplicateStore, &s.id, "store id repeated"));
        }
    }

    for (&(p, s), &price) in catalog.price_overrides() {
        let in_range = p < catalog.n_products() && s < catalog.n_stores();
        if !in_range || !(price.is_finite() && price >= 0.0) {
            errors.push(ValidationError::new(
                InvalidPriceOverride,
                &format!("{p}@{s}"),
                format!("price override {price} invalid or out of range"),
            ));
        }
    }

    errors
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn product(id: &str, price: f64, weight: f64, blend: FabricBlend) -> Product {
        Product {
            id: id.into(),
            name: format!("product {id}"),
            category: "upper".into(),
            price,
            weight_kg: weight,
            blend,
        }
    }

    pub(crate) fn store(id: &str) -> Store {
        Store { id: id.into(), name: format!("store {id}"), region: None }
    }

    fn three_fabrics() -> FabricTable {
        let mut table = FabricTable::reference();
        table.insert("polyester", 44.0).unwrap();
        table
    }

    #[test]
    fn well_formed_catalog_has_no_errors() {
        let catalog = Catalog::new(
            vec![
                product("p1", 20.0, 1.0, FabricBlend::single("cotton")),
                product("p2", 15.0, 0.5, FabricBlend::new([("viscose", 0.5), ("polyester", 0.5)])),
            ],
            vec![store("s1")],
            three_fabrics(),
        );
        assert!(validate_catalog(&catalog).is_empty());
    }

    #[test]
    fn unknown_fabric_is_reported_once() {
        let catalog = Catalog::new(
            vec![product("p1", 20.0, 1.0, FabricBlend::single("linen"))],
            vec![store("s1")],
            three_fabrics(),
        );
        let errors = validate_catalog(&catalog);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].kind, ValidationKind::UnknownFabric);
        assert_eq!(errors[0].id, "p1");
    }

    #[test]
    fn under_normalized_blend() {
        let catalog = Catalog::new(
            vec![product("p1", 20.0, 1.0, FabricBlend::new([("cotton", 0.5), ("viscose", 0.4)]))],
            vec![store("s1")],
            three_fabrics(),
        );
        let errors = validate_catalog(&catalog);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].kind, ValidationKind::BlendNotNormalized);
    }

    #[test]
    fn collects_every_violation() {
        let catalog = Catalog::new(
            vec![
                product("p1", -1.0, 0.0, FabricBlend::default()),
                product("p1", 1.0, 1.0, FabricBlend::new([("cotton", 0.5), ("Cotton ", 0.5)])),
            ],
            vec![store("s1"), store("s1"), store("")],
            three_fabrics(),
        );
        let kinds: Vec<_> = validate_catalog(&catalog).into_iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ValidationKind::NonPositiveWeight,
                ValidationKind::NegativePrice,
                ValidationKind::EmptyBlend,
                ValidationKind::DuplicateProduct,
                ValidationKind::DuplicateFabricInBlend,
                ValidationKind::DuplicateStore,
                ValidationKind::EmptyId,
            ]
        );
    }

    #[test]
    fn validation_is_pure() {
        let catalog = Catalog::new(
            vec![product("p1", 20.0, 1.0, FabricBlend::single("linen"))],
            vec![store("s1")],
            three_fabrics(),
        );
        assert_eq!(validate_catalog(&catalog), validate_catalog(&catalog));
    }

    #[test]
    fn fabric_names_fold_case_and_whitespace() {
        let mut table = FabricTable::new();
        table.insert(" Cotton ", 98.0).unwrap();
        assert_eq!(table.get("COTTON"), Some(98.0));
        assert!(matches!(table.insert("cotton", 1.0), Err(Error::DuplicateFabric(_))));
        assert!(table.insert("wool", -1.0).is_err());
    }

    #[test]
    fn price_override_takes_precedence() {
        let mut catalog = Catalog::new(
            vec![product("p1", 20.0, 1.0, FabricBlend::single("cotton"))],
            vec![store("s1"), store("s2")],
            three_fabrics(),
        );
        catalog.set_price_override(0, 1, 25.0);
        assert_eq!(catalog.unit_revenue(0, 0), 20.0);
        assert_eq!(catalog.unit_revenue(0, 1), 25.0);
    }
}
