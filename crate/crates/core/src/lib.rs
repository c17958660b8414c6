//! Sustainability-aware assortment planning: product Higg scores, demand
//! completion by matrix factorization, and revenue versus impact selection.

pub mod demand;
pub mod domain;
pub mod error;
pub mod ingest;
pub mod io;
pub mod numeric;
pub mod optimizer;
pub mod sustainability;

pub use domain::{Catalog, FabricBlend, FabricTable, Product, Store};
pub use error::{Error, Result};
