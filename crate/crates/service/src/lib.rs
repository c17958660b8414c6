//! Read-only HTTP API over a loaded bundle and its completed demand matrix.

mod error;
mod routes;

use std::sync::{Arc, OnceLock};

use assortify::demand::DemandMatrix;
use assortify::ingest::DatasetBundle;
use assortify::optimizer::StoreInstance;
use assortify::sustainability::{score_catalog, ProductHiggScore};
use assortify::Result;
use axum::Router;
use tokio::net::TcpListener;

pub use error::ApiError;
pub use routes::{MAX_GRID_POINTS, MAX_HISTOGRAM_BINS};

/// Everything the handlers read. Never mutated after construction.
#[derive(Debug)]
pub struct SessionState {
    pub bundle: DatasetBundle,
    pub demand: DemandMatrix,
    pub higg: Vec<ProductHiggScore>,
    instances: Vec<StoreInstance>,
}

impl SessionState {
    pub fn new(bundle: DatasetBundle, demand: DemandMatrix) -> Result<Self> {
        let higg = score_catalog(&bundle.catalog)?;
        let instances = (0..bundle.catalog.n_stores())
            .map(|s| StoreInstance::from_catalog(s, &demand, &bundle.catalog, &higg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bundle, demand, higg, instances })
    }

    pub fn instance(&self, store_index: usize) -> &StoreInstance {
        &self.instances[store_index]
    }
}

/// Shared handle; requests get 503 until a session is installed.
#[derive(Debug, Clone, Default)]
pub struct Service {
    slot: Arc<OnceLock<SessionState>>,
}

impl Service {
    pub fn pending() -> Self {
        Self::default()
    }

    pub fn loaded(state: SessionState) -> Self {
        let service = Self::default();
        service.install(state);
        service
    }

    /// Installs the session. Returns false if one was already installed.
    pub fn install(&self, state: SessionState) -> bool {
        self.slot.set(state).is_ok()
    }

    pub fn session(&self) -> Option<&SessionState> {
        self.slot.get()
    }
}

pub fn router(service: Service, permissive_cors: bool) -> Router {
    let router = routes::routes().with_state(service);
    if permissive_cors {
        router.layer(tower_http::cors::CorsLayer::permissive())
    } else {
        router
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
