//! Loading, writing and generating dataset bundles.

mod parse;
mod synthetic;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demand::{Observation, SalesMatrix};
use crate::domain::{validate_catalog, Catalog, FabricBlend, FabricTable, Product, Store};
use crate::error::{Error, Result};

pub use parse::{
    parse_blend, parse_fabrics, parse_fabrics_str, parse_products, parse_products_str, parse_sales,
    parse_sales_str, parse_sales_with_prices, parse_stores, parse_stores_str, ParsedSales,
};
pub use synthetic::{generate_synthetic, FabricPopulation, SyntheticConfig};

pub const FABRICS_FILE: &str = "fabrics.csv";
pub const STORES_FILE: &str = "stores.csv";
pub const PRODUCTS_FILE: &str = "products.csv";
pub const SALES_FILE: &str = "sales.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub role: String,
    pub path: PathBuf,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn entry(&self, role: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|e| e.role == role)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub catalog: Catalog,
    pub sales: SalesMatrix,
    pub source_manifest: Manifest,
}

/// Locations of the four input files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundlePaths {
    pub fabrics: PathBuf,
    pub stores: PathBuf,
    pub products: PathBuf,
    pub sales: PathBuf,
}

impl BundlePaths {
    /// The standard file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            fabrics: dir.join(FABRICS_FILE),
            stores: dir.join(STORES_FILE),
            products: dir.join(PRODUCTS_FILE),
            sales: dir.join(SALES_FILE),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn manifest_entry(role: &str, path: &Path) -> Result<ManifestEntry> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let rows = bytes.split(|&b| b == b'\n').filter(|l| !l.iter().all(u8::is_ascii_whitespace)).count();
    Ok(ManifestEntry {
        role: role.to_string(),
        path: path.to_path_buf(),
        rows: rows.saturating_sub(1),
        sha256: sha256_hex(&bytes),
    })
}

/// Parses all four files, validates the catalog and records each file's
/// row count and checksum.
pub fn load_bundle(paths: &BundlePaths) -> Result<DatasetBundle> {
    let (products, stores) = std::thread::scope(|scope| {
        let stores = scope.spawn(|| parse_stores(&paths.stores));
        let products = parse_fabrics(&paths.fabrics)
            .and_then(|table| parse_products(&paths.products, &table).map(|p| (p, table)));
        let stores = stores.join().expect("store parser panicked");
        (products, stores)
    });
    let (products, table) = products?;
    let mut catalog = Catalog::new(products, stores?, table);

    let sales = parse_sales_with_prices(&paths.sales, &catalog)?;
    for (&(p, s), &price) in &sales.price_overrides {
        catalog.set_price_override(p, s, price);
    }
    let problems = validate_catalog(&catalog);
    if !problems.is_empty() {
        let joined: Vec<String> = problems.iter().map(|e| format!("{}: {}", e.id, e.message)).collect();
        return Err(Error::InvalidCatalog(joined.join("; ")));
    }

    let source_manifest = Manifest {
        files: vec![
            manifest_entry("fabrics", &paths.fabrics)?,
            manifest_entry("stores", &paths.stores)?,
            manifest_entry("products", &paths.products)?,
            manifest_entry("sales", &paths.sales)?,
        ],
    };
    Ok(DatasetBundle { catalog, sales: sales.matrix, source_manifest })
}

/// Loads the standard file names from `dir`.
pub fn load_bundle_dir(dir: &Path) -> Result<DatasetBundle> {
    load_bundle(&BundlePaths::in_dir(dir))
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n', '\r']) || value != value.trim() {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn blend_text(blend: &FabricBlend) -> String {
    let parts: Vec<String> = blend.components.iter().map(|c| format!("{}:{}", c.fabric, c.fraction)).collect();
    parts.join(";")
}

pub fn fabrics_csv(table: &FabricTable) -> String {
    let mut out = String::from("fabric,higg_msi_per_kg\n");
    for (name, value) in table.iter() {
        writeln!(out, "{},{}", csv_field(name), value).unwrap();
    }
    out
}

pub fn stores_csv(stores: &[Store]) -> String {
    let mut out = String::from("id,name,region\n");
    for s in stores {
        let region = s.region.as_deref().unwrap_or("");
        writeln!(out, "{},{},{}", csv_field(&s.id), csv_field(&s.name), csv_field(region)).unwrap();
    }
    out
}

pub fn products_csv(products: &[Product]) -> String {
    let mut out = String::from("id,name,category,price,weight_kg,blend\n");
    for p in products {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&p.id),
            csv_field(&p.name),
            csv_field(&p.category),
            p.price,
            p.weight_kg,
            blend_text(&p.blend)
        )
        .unwrap();
    }
    out
}

/// Sales rows in (product, store) order. A `price` column is added only when
/// the catalog carries per-store price overrides.
pub fn sales_csv(catalog: &Catalog, sales: &SalesMatrix) -> String {
    let with_price = !catalog.price_overrides().is_empty();
    let mut out = String::from("product_id,store_id,units_sold,confidence");
    out.push_str(if with_price { ",price\n" } else { "\n" });
    for Observation { product, store, value, confidence } in sales.observations() {
        write!(
            out,
            "{},{},{},{}",
            csv_field(&catalog.products()[*product].id),
            csv_field(&catalog.stores()[*store].id),
            value,
            confidence
        )
        .unwrap();
        if with_price {
            out.push(',');
            if let Some(price) = catalog.price_overrides().get(&(*product, *store)) {
                write!(out, "{price}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Writes the four input files and `manifest.json` into `dir`. Manifest
/// paths are relative to `dir` so identical bundles give identical bytes.
pub fn write_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<Manifest> {
    let catalog = &bundle.catalog;
    let files = [
        ("fabrics", FABRICS_FILE, fabrics_csv(catalog.fabric_table())),
        ("stores", STORES_FILE, stores_csv(catalog.stores())),
        ("products", PRODUCTS_FILE, products_csv(catalog.products())),
        ("sales", SALES_FILE, sales_csv(catalog, &bundle.sales)),
    ];
    let mut manifest = Manifest::default();
    for (role, name, text) in files {
        crate::io::write_atomic(&dir.join(name), text.as_bytes())?;
        manifest.files.push(ManifestEntry {
            role: role.to_string(),
            path: PathBuf::from(name),
            rows: text.lines().count() - 1,
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    crate::io::write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}

/// Two products in one store: a 1 kg cotton item (score 98) and a 0.5 kg
/// viscose item (score 31).
pub fn demo_bundle() -> DatasetBundle {
    let products = vec![
        Product {
            id: "p1".into(),
            name: "Cotton tee".into(),
            category: "tops".into(),
            price: 20.0,
            weight_kg: 1.0,
            blend: FabricBlend::single("cotton"),
        },
        Product {
            id: "p2".into(),
            name: "Viscose blouse".into(),
            category: "tops".into(),
            price: 30.0,
            weight_kg: 0.5,
            blend: FabricBlend::single("viscose"),
        },
    ];
    let stores = vec![Store { id: "s1".into(), name: "Demo store".into(), region: None }];
    let catalog = Catalog::new(products, stores, FabricTable::reference());
    let sales = SalesMatrix::new(2, 1, vec![Observation::new(0, 0, 10.0), Observation::new(1, 0, 4.0)])
        .expect("demo sales are valid");
    DatasetBundle { catalog, sales, source_manifest: Manifest::default() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = demo_bundle();
        let manifest = write_bundle(&bundle, dir.path()).unwrap();
        assert_eq!(manifest.entry("products").unwrap().rows, 2);
        let loaded = load_bundle_dir(dir.path()).unwrap();
        assert_eq!(loaded.catalog, bundle.catalog);
        assert_eq!(loaded.sales, bundle.sales);
        let sales = loaded.source_manifest.entry("sales").unwrap();
        assert_eq!(sales.rows, 2);
        assert_eq!(sales.sha256, manifest.entry("sales").unwrap().sha256);
    }

    #[test]
    fn price_overrides_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = demo_bundle();
        bundle.catalog.set_price_override(1, 0, 27.5);
        write_bundle(&bundle, dir.path()).unwrap();
        let loaded = load_bundle_dir(dir.path()).unwrap();
        assert_eq!(loaded.catalog.unit_revenue(1, 0), 27.5);
        assert_eq!(loaded.catalog.unit_revenue(0, 0), 20.0);
        assert_eq!(loaded.catalog, bundle.catalog);
    }

    #[test]
    fn quoted_fields_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = demo_bundle();
        let mut products = bundle.catalog.products().to_vec();
        products[0].name = "Tee, \"classic\"".into();
        bundle.catalog = Catalog::new(products, bundle.catalog.stores().to_vec(), FabricTable::reference());
        write_bundle(&bundle, dir.path()).unwrap();
        assert_eq!(load_bundle_dir(dir.path()).unwrap().catalog, bundle.catalog);
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(load_bundle_dir(dir.path()).unwrap_err().kind(), "Io");
    }
}
