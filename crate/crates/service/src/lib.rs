//! HTTP API over a sales log loaded at startup.
//!
//! | method | path        | body                | response                    |
//! |--------|-------------|---------------------|-----------------------------|
//! | GET    | `/health`   |                     | `{status, fingerprint?}`    |
//! | GET    | `/products` |                     | `[{id, count, firstTs, lastTs}]` |
//! | POST   | `/analyze`  | [`AnalyzeRequest`]  | one what-if result          |
//! | POST   | `/sweep`    | [`SweepRequest`]    | array of what-if results    |
//! | POST   | `/simulate` | [`SimulateRequest`] | [`SimulateResponse`]        |
//!
//! Errors share the body `{error, code, detail}`; see [`ErrorKind`] for the
//! status codes. Responses depend only on the loaded log and the request, so
//! they are memoised.

pub mod api;
mod routes;
mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::http::HeaderValue;
use axum::Router;
use tower_http::cors::{Any, CorsLayer};

pub use api::{AnalyzeRequest, ApiError, ErrorKind, SimulateRequest, SimulateResponse, SweepRequest};
pub use routes::router;
pub use state::{fingerprint_of, SessionState, SharedState};

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Origins allowed by CORS; `*` allows any. Empty disables CORS.
    pub cors_origins: Vec<String>,
}

/// Router with the CORS layer requested in `options`.
pub fn app(state: SessionState, options: &ServeOptions) -> Result<Router, String> {
    let router = router(Arc::new(state));
    if options.cors_origins.is_empty() {
        return Ok(router);
    }
    let cors = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    let cors = if options.cors_origins.iter().any(|o| o == "*") {
        cors.allow_origin(Any)
    } else {
        let origins = options
            .cors_origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| format!("invalid CORS origin {o:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        cors.allow_origin(origins)
    };
    Ok(router.layer(cors))
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await
}
