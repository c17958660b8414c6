use std::collections::{BTreeMap, BTreeSet, HashMap};

use assortify::optimizer::{
    even_grid, fabric_composition, histogram, optimize_instance, pareto_front, FrontMember, HistogramBin, Locks,
    OptimizeRequest, AssortmentSolution,
};
use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{ApiError, Service, SessionState};

pub const MAX_GRID_POINTS: usize = 1001;
pub const DEFAULT_GRID_POINTS: usize = 101;
pub const DEFAULT_HISTOGRAM_BINS: usize = 20;
pub const MAX_HISTOGRAM_BINS: usize = 1000;

type ApiResult<T> = Result<Json<T>, ApiError>;

pub(crate) fn routes() -> Router<Service> {
    Router::new()
        .route("/health", get(health))
        .route("/stores", get(stores))
        .route("/products", get(products))
        .route("/optimize", post(optimize))
        .route("/pareto", post(pareto))
        .route("/histograms", get(histograms))
}

fn session(service: &Service) -> Result<&SessionState, ApiError> {
    service.session().ok_or_else(ApiError::not_ready)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid_body(e.to_string()))
}

/// Resolves a store given by id, by index, or both (which must agree).
fn resolve_store(state: &SessionState, id: Option<&str>, index: Option<usize>) -> Result<usize, ApiError> {
    let catalog = &state.bundle.catalog;
    let bad = |msg: String| ApiError::new(StatusCode::BAD_REQUEST, "UnknownStore", msg);
    let by_id = id
        .map(|id| catalog.store_index(id).ok_or_else(|| bad(format!("unknown store `{id}`"))))
        .transpose()?;
    match (by_id, index) {
        (Some(a), Some(b)) if a != b => Err(ApiError::invalid_body("`store` and `store_index` disagree")),
        (Some(a), _) => Ok(a),
        (None, Some(b)) if b < catalog.n_stores() => Ok(b),
        (None, Some(b)) => Err(bad(format!("store index {b} out of range"))),
        (None, None) => Err(ApiError::invalid_body("`store` or `store_index` is required")),
    }
}

#[derive(Serialize)]
struct ManifestFile {
    role: String,
    path: String,
    rows: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    products: usize,
    stores: usize,
    observations: usize,
    files: Vec<ManifestFile>,
}

async fn health(State(service): State<Service>) -> ApiResult<Health> {
    let state = session(&service)?;
    let manifest = &state.bundle.source_manifest;
    Ok(Json(Health {
        status: "ok",
        products: state.bundle.catalog.n_products(),
        stores: state.bundle.catalog.n_stores(),
        observations: state.bundle.sales.len(),
        files: manifest
            .files
            .iter()
            .map(|f| ManifestFile {
                role: f.role.clone(),
                path: f.path.display().to_string(),
                rows: f.rows,
                sha256: f.sha256.clone(),
            })
            .collect(),
    }))
}

#[derive(Serialize)]
struct StoreEntry {
    id: String,
    store_index: usize,
    name: String,
    region: Option<String>,
}

async fn stores(State(service): State<Service>) -> ApiResult<Vec<StoreEntry>> {
    let state = session(&service)?;
    let mut out: Vec<StoreEntry> = state
        .bundle
        .catalog
        .stores()
        .iter()
        .enumerate()
        .map(|(i, s)| StoreEntry { id: s.id.clone(), store_index: i, name: s.name.clone(), region: s.region.clone() })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Json(out))
}

#[derive(Serialize)]
struct ProductEntry {
    id: String,
    name: String,
    category: String,
    price: f64,
    weight_kg: f64,
    blend: BTreeMap<String, f64>,
    higg_score: f64,
    /// Forecast demand and expected revenue for the requested store.
    demand: Option<f64>,
    expected_revenue: Option<f64>,
}

async fn products(
    State(service): State<Service>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Vec<ProductEntry>> {
    let state = session(&service)?;
    let catalog = &state.bundle.catalog;
    let store = match query.get("store").map(String::as_str) {
        None | Some("") => None,
        Some(id) => Some(catalog.store_index(id).ok_or_else(|| {
            ApiError::new(StatusCode::NOT_FOUND, "UnknownStore", format!("unknown store `{id}`"))
        })?),
    };
    let mut out: Vec<ProductEntry> = catalog
        .products()
        .iter()
        .enumerate()
        .map(|(j, p)| ProductEntry {
            id: p.id.clone(),
            name: p.name.clone(),
            category: p.category.clone(),
            price: store.map_or(p.price, |s| catalog.unit_revenue(j, s)),
            weight_kg: p.weight_kg,
            blend: p.blend.components.iter().map(|c| (c.fabric.clone(), c.fraction)).collect(),
            higg_score: state.higg[j].score,
            demand: store.map(|s| state.demand.get(j, s)),
            expected_revenue: store.map(|s| state.instance(s).candidates[j].revenue),
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Json(out))
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizeBody {
    store: Option<String>,
    store_index: Option<usize>,
    k: usize,
    #[serde(alias = "lambda")]
    trade_off_lambda: f64,
    #[serde(default)]
    locked_in: BTreeSet<String>,
    #[serde(default)]
    locked_out: BTreeSet<String>,
    #[serde(default = "default_true")]
    normalize: bool,
}

#[derive(Serialize)]
struct OptimizeResponse {
    store_id: String,
    #[serde(flatten)]
    solution: AssortmentSolution,
}

async fn optimize(State(service): State<Service>, body: Bytes) -> ApiResult<OptimizeResponse> {
    let state = session(&service)?;
    let body: OptimizeBody = parse_body(&body)?;
    let store_index = resolve_store(state, body.store.as_deref(), body.store_index)?;
    let request = OptimizeRequest {
        store_index,
        k: body.k,
        trade_off_lambda: body.trade_off_lambda,
        locks: Locks { locked_in: body.locked_in, locked_out: body.locked_out },
        normalize: body.normalize,
    };
    let solution = optimize_instance(state.instance(store_index), &request)?;
    Ok(Json(OptimizeResponse { store_id: state.bundle.catalog.stores()[store_index].id.clone(), solution }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParetoBody {
    store: Option<String>,
    store_index: Option<usize>,
    k: usize,
    lambda_grid: Option<Vec<f64>>,
    grid_points: Option<usize>,
    #[serde(default)]
    locked_in: BTreeSet<String>,
    #[serde(default)]
    locked_out: BTreeSet<String>,
    #[serde(default = "default_true")]
    normalize: bool,
}

#[derive(Serialize)]
struct ParetoMember {
    #[serde(flatten)]
    member: FrontMember,
    fabric_composition: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ParetoResponse {
    store_id: String,
    store_index: usize,
    k: usize,
    solutions: Vec<ParetoMember>,
}

fn pareto_grid(body: &ParetoBody) -> Result<Vec<f64>, ApiError> {
    let too_big = |n: usize| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "InvalidRequest",
            format!("lambda grid has {n} points, limit is {MAX_GRID_POINTS}"),
        )
    };
    match (&body.lambda_grid, body.grid_points) {
        (Some(_), Some(_)) => Err(ApiError::invalid_body("give `lambda_grid` or `grid_points`, not both")),
        (Some(grid), None) if grid.len() > MAX_GRID_POINTS => Err(too_big(grid.len())),
        (Some(grid), None) => Ok(grid.clone()),
        (None, Some(n)) if n > MAX_GRID_POINTS => Err(too_big(n)),
        (None, n) => Ok(even_grid(n.unwrap_or(DEFAULT_GRID_POINTS))),
    }
}

async fn pareto(State(service): State<Service>, body: Bytes) -> ApiResult<ParetoResponse> {
    let state = session(&service)?;
    let body: ParetoBody = parse_body(&body)?;
    let store_index = resolve_store(state, body.store.as_deref(), body.store_index)?;
    let grid = pareto_grid(&body)?;
    let locks = Locks { locked_in: body.locked_in, locked_out: body.locked_out };
    let (k, normalize) = (body.k, body.normalize);

    let work = service.clone();
    let result = tokio::task::spawn_blocking(move || -> Result<ParetoResponse, ApiError> {
        let state = work.session().expect("session checked above");
        let front = pareto_front(state.instance(store_index), k, &grid, &locks, normalize)?;
        let solutions = front
            .solutions
            .into_iter()
            .map(|member| {
                let fabric_composition = fabric_composition(&member.solution, &state.bundle.catalog)?;
                Ok(ParetoMember { member, fabric_composition })
            })
            .collect::<Result<Vec<_>, assortify::Error>>()?;
        Ok(ParetoResponse {
            store_id: state.bundle.catalog.stores()[store_index].id.clone(),
            store_index,
            k,
            solutions,
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?;
    Ok(Json(result?))
}

#[derive(Serialize)]
struct Histograms {
    n_products: usize,
    bins: usize,
    store_id: Option<String>,
    higg: Vec<HistogramBin>,
    quality: Vec<HistogramBin>,
}

/// Higg scores and a demand-based quality score per product: mean forecast
/// demand across stores, or the demand in `?store=` when given.
async fn histograms(
    State(service): State<Service>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Histograms> {
    let state = session(&service)?;
    let catalog = &state.bundle.catalog;
    let bins = match query.get("bins") {
        None => DEFAULT_HISTOGRAM_BINS,
        Some(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|b| (1..=MAX_HISTOGRAM_BINS).contains(b))
            .ok_or_else(|| {
                ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "InvalidRequest",
                    format!("bins must be an integer in 1..={MAX_HISTOGRAM_BINS}"),
                )
            })?,
    };
    let store = match query.get("store").map(String::as_str) {
        None | Some("") => None,
        Some(id) => Some(catalog.store_index(id).ok_or_else(|| {
            ApiError::new(StatusCode::NOT_FOUND, "UnknownStore", format!("unknown store `{id}`"))
        })?),
    };
    let quality: Vec<f64> = match store {
        Some(s) => state.demand.store_column(s),
        None => (0..catalog.n_products())
            .map(|j| (0..catalog.n_stores()).map(|s| state.demand.get(j, s)).sum::<f64>() / catalog.n_stores().max(1) as f64)
            .collect(),
    };
    let higg: Vec<f64> = state.higg.iter().map(|h| h.score).collect();
    if higg.is_empty() {
        return Ok(Json(Histograms { n_products: 0, bins, store_id: None, higg: vec![], quality: vec![] }));
    }
    Ok(Json(Histograms {
        n_products: higg.len(),
        bins,
        store_id: store.map(|s| catalog.stores()[s].id.clone()),
        higg: histogram(&higg, bins)?,
        quality: histogram(&quality, bins)?,
    }))
}
