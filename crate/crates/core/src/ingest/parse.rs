//! Readers for the four comma-delimited input files.
//!
//! Every file is UTF-8 with a header row. Numbers always use `.` as the
//! decimal separator, independent of locale. Rows are reported 1-based with
//! the header as row 1.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::demand::{Observation, SalesMatrix};
use crate::domain::{normalize_fabric_name, BlendComponent, Catalog, FabricBlend, FabricTable, Product, Store, BLEND_TOLERANCE};
use crate::error::{Error, Location, ParseReason, Result};

struct Sheet {
    path: PathBuf,
    headers: StringRecord,
    rows: Vec<(usize, StringRecord)>,
}

impl Sheet {
    fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(path, &text)
    }

    fn from_text(path: &Path, text: &str) -> Result<Self> {
        let mut reader = ReaderBuilder::new()
            .has_headers(true)
            .trim(Trim::All)
            .flexible(false)
            .from_reader(text.as_bytes());
        let location = |row: usize| Location { file: path.to_path_buf(), row, column: String::new() };
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse { location: location(1), reason: ParseReason::Malformed(e.to_string()) })?
            .clone();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| {
                let row = e.position().map(|p| p.line() as usize).unwrap_or(i + 2);
                Error::Parse { location: location(row), reason: ParseReason::Malformed(e.to_string()) }
            })?;
            let row = record.position().map(|p| p.line() as usize).unwrap_or(i + 2);
            rows.push((row, record));
        }
        Ok(Self { path: path.to_path_buf(), headers, rows })
    }

    fn error(&self, row: usize, column: &str, reason: ParseReason) -> Error {
        Error::Parse {
            location: Location { file: self.path.clone(), row, column: column.to_string() },
            reason,
        }
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.optional_column(name).ok_or_else(|| self.error(1, name, ParseReason::MissingColumn))
    }

    fn optional_column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h.trim() == name)
    }

    fn text<'r>(&self, row: usize, record: &'r StringRecord, col: usize) -> Result<&'r str> {
        record
            .get(col)
            .ok_or_else(|| self.error(row, &self.headers[col], ParseReason::MissingColumn))
    }

    fn number(&self, row: usize, record: &StringRecord, col: usize) -> Result<f64> {
        let raw = self.text(row, record, col)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(row, &self.headers[col], ParseReason::InvalidNumber(raw.to_string()))),
        }
    }
}

/// `fabric,higg_msi_per_kg`
pub fn parse_fabrics(path: &Path) -> Result<FabricTable> {
    fabrics_from_sheet(&Sheet::read(path)?)
}

pub fn parse_fabrics_str(path: &Path, text: &str) -> Result<FabricTable> {
    fabrics_from_sheet(&Sheet::from_text(path, text)?)
}

fn fabrics_from_sheet(sheet: &Sheet) -> Result<FabricTable> {
    let name_col = sheet.column("fabric")?;
    let index_col = sheet.column("higg_msi_per_kg")?;
    let mut table = FabricTable::new();
    for (row, record) in &sheet.rows {
        let name = normalize_fabric_name(sheet.text(*row, record, name_col)?);
        if name.is_empty() {
            return Err(sheet.error(*row, "fabric", ParseReason::Malformed("empty fabric name".into())));
        }
        let index = sheet.number(*row, record, index_col)?;
        if index < 0.0 {
            return Err(sheet.error(*row, "higg_msi_per_kg", ParseReason::NegativeIndex));
        }
        if table.contains(&name) {
            return Err(Error::DuplicateFabric(name));
        }
        table.insert(&name, index)?;
    }
    Ok(table)
}

/// `id,name,region`; `region` may be absent or empty.
pub fn parse_stores(path: &Path) -> Result<Vec<Store>> {
    stores_from_sheet(&Sheet::read(path)?)
}

pub fn parse_stores_str(path: &Path, text: &str) -> Result<Vec<Store>> {
    stores_from_sheet(&Sheet::from_text(path, text)?)
}

fn stores_from_sheet(sheet: &Sheet) -> Result<Vec<Store>> {
    let id_col = sheet.column("id")?;
    let name_col = sheet.column("name")?;
    let region_col = sheet.optional_column("region");
    let mut seen = HashSet::new();
    let mut stores = Vec::with_capacity(sheet.rows.len());
    for (row, record) in &sheet.rows {
        let id = sheet.text(*row, record, id_col)?.to_string();
        if id.is_empty() {
            return Err(sheet.error(*row, "id", ParseReason::Malformed("empty store id".into())));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateStore(id));
        }
        let region = match region_col {
            Some(c) => Some(sheet.text(*row, record, c)?.to_string()).filter(|r| !r.is_empty()),
            None => None,
        };
        stores.push(Store { id, name: sheet.text(*row, record, name_col)?.to_string(), region });
    }
    Ok(stores)
}

/// Parses `fabric:amount;fabric:amount`. Amounts summing to about 1 are
/// fractions, to about 100 percentages; either way the result sums to 1.
pub fn parse_blend(raw: &str) -> std::result::Result<FabricBlend, ParseReason> {
    let mut components: Vec<BlendComponent> = Vec::new();
    for part in raw.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, amount) = part
            .split_once(':')
            .ok_or_else(|| ParseReason::MalformedBlend(raw.to_string()))?;
        let fabric = normalize_fabric_name(name);
        let amount: f64 = amount
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v > 0.0)
            .ok_or_else(|| ParseReason::MalformedBlend(raw.to_string()))?;
        if fabric.is_empty() {
            return Err(ParseReason::MalformedBlend(raw.to_string()));
        }
        if components.iter().any(|c| c.fabric == fabric) {
            return Err(ParseReason::DuplicateFabricInBlend(fabric));
        }
        components.push(BlendComponent { fabric, fraction: amount });
    }
    if components.is_empty() {
        return Err(ParseReason::MalformedBlend(raw.to_string()));
    }
    Ok(FabricBlend { components })
}

/// Rescales raw blend amounts to fractions, or reports the sum when it is
/// neither about 1 nor about 100.
fn normalize_blend(blend: &mut FabricBlend) -> std::result::Result<(), f64> {
    let sum = blend.fraction_sum();
    let divisor = if (0.98..=1.02).contains(&sum) {
        1.0
    } else if (98.0..=102.0).contains(&sum) {
        100.0
    } else {
        return Err(sum);
    };
    if divisor != 1.0 {
        blend.components.iter_mut().for_each(|c| c.fraction /= divisor);
    }
    let sum = blend.fraction_sum();
    if (sum - 1.0).abs() > BLEND_TOLERANCE {
        blend.components.iter_mut().for_each(|c| c.fraction /= sum);
    }
    Ok(())
}

/// `id,name,category,price,weight_kg,blend`
pub fn parse_products(path: &Path, fabric_table: &FabricTable) -> Result<Vec<Product>> {
    products_from_sheet(&Sheet::read(path)?, fabric_table)
}

pub fn parse_products_str(path: &Path, text: &str, fabric_table: &FabricTable) -> Result<Vec<Product>> {
    products_from_sheet(&Sheet::from_text(path, text)?, fabric_table)
}

fn products_from_sheet(sheet: &Sheet, table: &FabricTable) -> Result<Vec<Product>> {
    let cols = ["id", "name", "category", "price", "weight_kg", "blend"]
        .map(|c| sheet.column(c))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (id_col, name_col, cat_col, price_col, weight_col, blend_col) =
        (cols[0], cols[1], cols[2], cols[3], cols[4], cols[5]);

    let mut seen = HashSet::new();
    let mut products = Vec::with_capacity(sheet.rows.len());
    for (row, record) in &sheet.rows {
        let row = *row;
        let id = sheet.text(row, record, id_col)?.to_string();
        if id.is_empty() {
            return Err(sheet.error(row, "id", ParseReason::Malformed("empty product id".into())));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateProduct(id));
        }
        let price = sheet.number(row, record, price_col)?;
        if price < 0.0 {
            return Err(sheet.error(row, "price", ParseReason::Malformed("price must be non-negative".into())));
        }
        let weight_kg = sheet.number(row, record, weight_col)?;
        if weight_kg <= 0.0 {
            return Err(sheet.error(row, "weight_kg", ParseReason::Malformed("weight_kg must be positive".into())));
        }
        let mut blend = parse_blend(sheet.text(row, record, blend_col)?)
            .map_err(|reason| sheet.error(row, "blend", reason))?;
        normalize_blend(&mut blend).map_err(|sum| Error::BlendNotNormalized {
            context: format!("product `{id}` ({}:{row})", sheet.path.display()),
            sum,
        })?;
        if let Some(c) = blend.components.iter().find(|c| !table.contains(&c.fabric)) {
            return Err(Error::UnknownFabric {
                fabric: c.fabric.clone(),
                context: format!("product `{id}` ({}:{row})", sheet.path.display()),
            });
        }
        products.push(Product {
            id,
            name: sheet.text(row, record, name_col)?.to_string(),
            category: sheet.text(row, record, cat_col)?.to_string(),
            price,
            weight_kg,
            blend,
        });
    }
    Ok(products)
}

/// Sales plus any per-store price overrides found in the optional `price`
/// column.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSales {
    pub matrix: SalesMatrix,
    pub price_overrides: BTreeMap<(usize, usize), f64>,
}

/// `product_id,store_id,units_sold[,confidence]`; repeated cells are summed.
pub fn parse_sales(path: &Path, catalog: &Catalog) -> Result<SalesMatrix> {
    Ok(parse_sales_with_prices(path, catalog)?.matrix)
}

pub fn parse_sales_with_prices(path: &Path, catalog: &Catalog) -> Result<ParsedSales> {
    sales_from_sheet(&Sheet::read(path)?, catalog)
}

pub fn parse_sales_str(path: &Path, text: &str, catalog: &Catalog) -> Result<ParsedSales> {
    sales_from_sheet(&Sheet::from_text(path, text)?, catalog)
}

fn sales_from_sheet(sheet: &Sheet, catalog: &Catalog) -> Result<ParsedSales> {
    let product_col = sheet.column("product_id")?;
    let store_col = sheet.column("store_id")?;
    let units_col = sheet.column("units_sold")?;
    let confidence_col = sheet.optional_column("confidence");
    let price_col = sheet.optional_column("price");

    // cell -> (units, confidence sum, rows)
    let mut cells: BTreeMap<(usize, usize), (f64, f64, usize)> = BTreeMap::new();
    let mut price_overrides = BTreeMap::new();
    for (row, record) in &sheet.rows {
        let row = *row;
        let product_id = sheet.text(row, record, product_col)?;
        let store_id = sheet.text(row, record, store_col)?;
        let product = catalog
            .product_index(product_id)
            .ok_or_else(|| Error::UnknownProduct(product_id.to_string()))?;
        let store = catalog
            .store_index(store_id)
            .ok_or_else(|| Error::UnknownStore(store_id.to_string()))?;
        let units = sheet.number(row, record, units_col)?;
        if units < 0.0 {
            return Err(Error::NegativeUnits { product: product_id.to_string(), store: store_id.to_string() });
        }
        let confidence = match confidence_col {
            Some(c) if !sheet.text(row, record, c)?.is_empty() => {
                let v = sheet.number(row, record, c)?;
                if v <= 0.0 {
                    return Err(sheet.error(row, "confidence", ParseReason::Malformed("confidence must be positive".into())));
                }
                v
            }
            _ => 1.0,
        };
        if let Some(c) = price_col.filter(|&c| !record.get(c).unwrap_or("").is_empty()) {
            let price = sheet.number(row, record, c)?;
            if price < 0.0 {
                return Err(sheet.error(row, "price", ParseReason::Malformed("price must be non-negative".into())));
            }
            if let Some(&previous) = price_overrides.get(&(product, store)) {
                if previous != price {
                    return Err(sheet.error(row, "price", ParseReason::Malformed("conflicting price for cell".into())));
                }
            }
            price_overrides.insert((product, store), price);
        }
        let cell = cells.entry((product, store)).or_insert((0.0, 0.0, 0));
        cell.0 += units;
        cell.1 += confidence;
        cell.2 += 1;
    }

    let observations = cells
        .into_iter()
        .map(|((product, store), (units, conf_sum, n))| Observation {
            product,
            store,
            value: units,
            confidence: conf_sum / n as f64,
        })
        .collect();
    Ok(ParsedSales {
        matrix: SalesMatrix::new(catalog.n_products(), catalog.n_stores(), observations)?,
        price_overrides,
    })
}
