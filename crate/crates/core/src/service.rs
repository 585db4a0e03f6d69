//! Local HTTP service for interactive expansion of a reduced network.
//!
//! One session per process. Reads run concurrently; expand and undo take
//! the write lock, so session state is linearizable.
//!
//! | method | path           | body                 |
//! |--------|----------------|----------------------|
//! | GET    | `/api/network` |                      |
//! | POST   | `/api/expand`  | `{"target": "t_b1"}` |
//! | POST   | `/api/undo`    |                      |
//! | GET    | `/api/stats`   |                      |

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::RwLock;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::grid::{BusId, Network};
use crate::ledger::{expand, Expansion, ExpansionTarget, FieldKey, LedgerError, ReductionLedger};
use crate::metrics::{MetricsError, ReductionReport};

/// Current state plus the snapshots needed to step back.
#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub network: Network,
    pub ledger: ReductionLedger,
    undo: Vec<(Network, ReductionLedger)>,
}

impl Session {
    pub fn new(network: Network, ledger: ReductionLedger) -> Self {
        Session { id: format!("{:08x}", std::process::id()), network, ledger, undo: Vec::new() }
    }

    pub fn undo_depth(&self) -> usize {
        self.undo.len()
    }

    pub fn document(&self) -> GraphDocument {
        let nodes = self
            .network
            .buses()
            .map(|b| NodeDoc {
                id: b.id.clone(),
                voltage_kv: b.nominal_voltage,
                degree: self.network.degree(&b.id),
                cluster_size: self.ledger.cluster_size(&b.id),
                expandable_fields: self.ledger.fields_of(&b.id),
            })
            .collect();
        let edges = self
            .network
            .lines()
            .map(|(k, _)| EdgeDoc { a: k.a.clone(), b: k.b.clone(), is_meta: self.ledger.entries().contains_key(&FieldKey::Edge(k.clone())) })
            .collect();
        GraphDocument { session: self.id.clone(), nodes, edges }
    }

    pub fn expand(&mut self, target: &ExpansionTarget) -> Result<Expansion, LedgerError> {
        let (network, ledger, delta) = expand(&self.network, &self.ledger, target)?;
        let before_net = std::mem::replace(&mut self.network, network);
        let before_ledger = std::mem::replace(&mut self.ledger, ledger);
        self.undo.push((before_net, before_ledger));
        Ok(delta)
    }

    /// Restores the previous snapshot; `None` when there is nothing to undo.
    pub fn undo(&mut self) -> Option<Expansion> {
        let (network, ledger) = self.undo.pop()?;
        let delta = Expansion::between(&self.network, &network, None);
        self.network = network;
        self.ledger = ledger;
        Some(delta)
    }

    pub fn report(&self) -> Result<ReductionReport, MetricsError> {
        ReductionReport::for_state(&self.network, &self.ledger)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: BusId,
    pub voltage_kv: f64,
    pub degree: usize,
    pub cluster_size: usize,
    pub expandable_fields: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub a: BusId,
    pub b: BusId,
    pub is_meta: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub session: String,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Deserialize)]
struct ExpandRequest {
    target: String,
}

type Shared = Arc<RwLock<Session>>;

struct ApiError(StatusCode, serde_json::Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<LedgerError> for ApiError {
    fn from(e: LedgerError) -> Self {
        let message = e.to_string();
        match e {
            LedgerError::NotFound(_) => ApiError(StatusCode::NOT_FOUND, json!({ "error": message })),
            LedgerError::Dependency { prerequisites, .. } => ApiError(StatusCode::CONFLICT, json!({ "error": message, "prerequisites": prerequisites })),
            LedgerError::BadTarget(_) => ApiError(StatusCode::BAD_REQUEST, json!({ "error": message })),
            _ => ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": message })),
        }
    }
}

async fn network(State(s): State<Shared>) -> Json<GraphDocument> {
    Json(s.read().await.document())
}

async fn expand_handler(State(s): State<Shared>, Json(req): Json<ExpandRequest>) -> Result<Json<Expansion>, ApiError> {
    let target: ExpansionTarget = req.target.parse()?;
    let mut session = s.write().await;
    let delta = session.expand(&target)?;
    log::info!("expanded {target}: {} buses back", delta.added_nodes.len());
    Ok(Json(delta))
}

async fn undo_handler(State(s): State<Shared>) -> Result<Json<Expansion>, ApiError> {
    s.write().await.undo().map(Json).ok_or_else(|| ApiError(StatusCode::CONFLICT, json!({ "error": "nothing to undo" })))
}

async fn stats(State(s): State<Shared>) -> Result<Json<ReductionReport>, ApiError> {
    s.read().await.report().map(Json).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })))
}

fn is_local(origin: &HeaderValue) -> bool {
    let Ok(origin) = origin.to_str() else { return false };
    let host = origin.split_once("://").map_or(origin, |(_, rest)| rest);
    let host = host.rsplit_once(':').map_or(host, |(h, port)| if port.chars().all(|c| c.is_ascii_digit()) { h } else { host });
    matches!(host, "localhost" | "127.0.0.1" | "[::1]")
}

pub fn router(session: Session) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|origin, _| is_local(origin)))
        .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    Router::new()
        .route("/api/network", get(network))
        .route("/api/expand", post(expand_handler))
        .route("/api/undo", post(undo_handler))
        .route("/api/stats", get(stats))
        .layer(cors)
        .with_state(Arc::new(RwLock::new(session)))
}

/// Serves `session` on localhost until the process is stopped.
pub async fn serve(session: Session, port: u16) -> std::io::Result<()> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(session)).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_origins() {
        for ok in ["http://localhost:5173", "http://127.0.0.1", "http://[::1]:80"] {
            assert!(is_local(&HeaderValue::from_static(ok)), "{ok}");
        }
        for bad in ["http://example.com", "http://localhost.evil.com:80"] {
            assert!(!is_local(&HeaderValue::from_static(bad)), "{bad}");
        }
    }
}
