//! Read-only JSON API under `/api/v1`.
//!
//! Handlers are plain functions from an immutable [`ServiceState`] to an
//! [`ApiResponse`]; the axum layer only extracts parameters and encodes the
//! result, so identical requests produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use ubench_core::advisor::{advise as run_advice, discretize_model, UScoreSummary};
use ubench_core::registry::Scope;
use ubench_core::stats::{significance_matrix, TierLegend};
use ubench_core::uscore::{build_leaderboard, score_registry, BandSource, MetricTable, ScoreTable};
use ubench_core::{RankerModel, Snapshot, UScoreConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

/// Envelope of every response body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiResponse {
    pub status: Status,
    pub payload: Value,
    pub registry_digest: String,
    #[serde(skip)]
    pub http_status: u16,
}

impl ApiResponse {
    fn ok(state: &ServiceState, payload: Value) -> ApiResponse {
        ApiResponse {
            status: Status::Ok,
            payload,
            registry_digest: state.snapshot.digest().to_string(),
            http_status: 200,
        }
    }

    fn error(state: &ServiceState, http_status: u16, message: impl Into<String>) -> ApiResponse {
        ApiResponse {
            status: Status::Error,
            payload: json!({ "message": message.into() }),
            registry_digest: state.snapshot.digest().to_string(),
            http_status,
        }
    }

    pub fn body(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("response serializes")
    }
}

impl IntoResponse for ApiResponse {
    fn into_response(self) -> Response {
        let code = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (code, [(header::CONTENT_TYPE, "application/json")], self.body()).into_response()
    }
}

/// Everything the service needs, computed once at startup.
#[derive(Debug)]
pub struct ServiceState {
    snapshot: Snapshot,
    rankers: Vec<RankerModel>,
    scores: BTreeMap<Scope, ScoreTable>,
    tables: BTreeMap<(String, Scope), MetricTable>,
    baseline: String,
    legend: TierLegend,
}

impl ServiceState {
    /// Scores both scopes up front. A scope without records gets an empty
    /// score table rather than an error.
    pub fn new(
        snapshot: Snapshot,
        rankers: Vec<RankerModel>,
        bands: &BandSource,
        baseline: impl Into<String>,
    ) -> anyhow::Result<ServiceState> {
        let cfg = UScoreConfig::default();
        let mut scores = BTreeMap::new();
        for &scope in Scope::ALL {
            let table = if snapshot.records_in(scope).next().is_none() {
                ScoreTable { scope, rows: Vec::new() }
            } else {
                score_registry(&snapshot, scope, bands, &cfg)
                    .with_context(|| format!("scoring {scope} records"))?
            };
            scores.insert(scope, table);
        }
        for r in &rankers {
            r.validate().context("invalid ranker")?;
        }
        Ok(ServiceState {
            snapshot,
            rankers,
            scores,
            tables: BTreeMap::new(),
            baseline: baseline.into(),
            legend: TierLegend::default(),
        })
    }

    /// Loads `<metric>_<scope>.csv` wide tables (metric `iou` or `uscore`,
    /// scope `in_domain` or `zero_shot`) found in `dir`.
    pub fn with_tables_dir(mut self, dir: &Path) -> anyhow::Result<ServiceState> {
        for metric in ["iou", "uscore"] {
            for &scope in Scope::ALL {
                let path = dir.join(format!("{metric}_{scope}.csv"));
                if !path.exists() {
                    continue;
                }
                let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
                let table = MetricTable::from_wide_csv(metric, &bytes)
                    .with_context(|| format!("parsing {}", path.display()))?;
                self.tables.insert((metric.to_string(), scope), table);
            }
        }
        Ok(self)
    }

    pub fn digest(&self) -> &str {
        self.snapshot.digest()
    }
}

fn summaries(state: &ServiceState, model: &str) -> Value {
    let mut out = serde_json::Map::new();
    for (scope, table) in &state.scores {
        out.insert(
            scope.to_string(),
            serde_json::to_value(UScoreSummary::for_model(table, model)).expect("serializes"),
        );
    }
    Value::Object(out)
}

/// `GET /api/v1/models`: cards with resource bins and mean U-Score parts.
pub fn list_models(state: &ServiceState) -> ApiResponse {
    let models: Vec<Value> = state
        .snapshot
        .models
        .iter()
        .map(|m| {
            let bins = discretize_model(m.params_m, m.flops_g, m.fps).ok();
            let mut v = serde_json::to_value(m).expect("card serializes");
            v["bins"] = serde_json::to_value(bins).expect("serializes");
            v["uscore"] = summaries(state, &m.name);
            v
        })
        .collect();
    ApiResponse::ok(state, Value::Array(models))
}

/// `GET /api/v1/datasets`: cards with traits when known.
pub fn list_datasets(state: &ServiceState) -> ApiResponse {
    let datasets: Vec<Value> = state
        .snapshot
        .datasets
        .iter()
        .map(|d| {
            let mut v = serde_json::to_value(d).expect("card serializes");
            v["traits"] = serde_json::to_value(state.snapshot.traits_for(&d.name)).expect("serializes");
            v
        })
        .collect();
    ApiResponse::ok(state, Value::Array(datasets))
}

fn parse_scope(state: &ServiceState, raw: Option<&str>) -> Result<Scope, ApiResponse> {
    match raw {
        None => Ok(Scope::InDomain),
        Some(s) => s
            .parse()
            .map_err(|_| ApiResponse::error(state, 400, format!("unknown scope `{s}` (expected source or target)"))),
    }
}

/// `GET /api/v1/leaderboard?metric={iou|uscore}&scope={source|target}`.
pub fn leaderboard(state: &ServiceState, metric: Option<&str>, scope: Option<&str>) -> ApiResponse {
    let metric = metric.unwrap_or("iou").trim().to_ascii_lowercase();
    if metric != "iou" && metric != "uscore" {
        return ApiResponse::error(state, 400, format!("unknown metric `{metric}` (expected iou or uscore)"));
    }
    let scope = match parse_scope(state, scope) {
        Ok(s) => s,
        Err(e) => return e,
    };
    let derived;
    let table = match state.tables.get(&(metric.clone(), scope)) {
        Some(t) => t,
        None => {
            derived = if metric == "iou" {
                MetricTable::from_mean_ious(&state.snapshot, scope)
            } else {
                MetricTable::from_scores(&state.scores[&scope])
            };
            &derived
        }
    };
    let tiers = if state.snapshot.model(&state.baseline).is_some() {
        significance_matrix(&state.snapshot, &state.baseline, scope, &state.legend)
            .ok()
            .map(|m| m.by_model())
    } else {
        None
    };
    let board = build_leaderboard(table, tiers.as_ref());
    ApiResponse::ok(state, serde_json::to_value(board).expect("serializes"))
}

/// `GET /api/v1/uscore/{model}`: per-unit breakdowns and their means.
pub fn uscore(state: &ServiceState, model: &str) -> ApiResponse {
    if state.snapshot.model(model).is_none() {
        return ApiResponse::error(state, 404, format!("unknown model `{model}`"));
    }
    let mut rows = serde_json::Map::new();
    for (scope, table) in &state.scores {
        let r: Vec<_> = table.for_model(model).collect();
        rows.insert(scope.to_string(), serde_json::to_value(r).expect("serializes"));
    }
    ApiResponse::ok(
        state,
        json!({ "model": model, "summary": summaries(state, model), "rows": rows }),
    )
}

/// `GET /api/v1/significance?baseline={name}&scope=...`.
pub fn significance(state: &ServiceState, baseline: Option<&str>, scope: Option<&str>) -> ApiResponse {
    let baseline = baseline.unwrap_or(&state.baseline);
    let scope = match parse_scope(state, scope) {
        Ok(s) => s,
        Err(e) => return e,
    };
    if state.snapshot.model(baseline).is_none() {
        return ApiResponse::error(state, 404, format!("unknown baseline `{baseline}`"));
    }
    match significance_matrix(&state.snapshot, baseline, scope, &state.legend) {
        Ok(m) => ApiResponse::ok(state, serde_json::to_value(m).expect("serializes")),
        Err(e) => ApiResponse::error(state, 400, e.to_string()),
    }
}

/// `POST /api/v1/advise` with a query document.
pub fn advise(state: &ServiceState, body: &[u8]) -> ApiResponse {
    let query: ubench_core::Query = match serde_json::from_slice(body) {
        Ok(q) => q,
        Err(e) => return ApiResponse::error(state, 400, format!("invalid query: {e}")),
    };
    let Some(ranker) = state.rankers.iter().find(|r| r.label_kind == query.label_kind) else {
        return ApiResponse::error(
            state,
            409,
            format!("no ranker trained on {} labels is loaded", query.label_kind.as_str()),
        );
    };
    match run_advice(&state.snapshot, ranker, Some(&state.scores[&Scope::InDomain]), &query) {
        Ok(a) => ApiResponse::ok(state, serde_json::to_value(a).expect("serializes")),
        Err(e) => ApiResponse::error(state, 400, e.to_string()),
    }
}

#[derive(Debug, Deserialize)]
struct BoardParams {
    metric: Option<String>,
    scope: Option<String>,
}

#[derive(Debug, Deserialize)]
struct SignificanceParams {
    baseline: Option<String>,
    scope: Option<String>,
}

type Shared = Arc<ServiceState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/v1/models", get(|State(s): State<Shared>| async move { list_models(&s) }))
        .route("/api/v1/datasets", get(|State(s): State<Shared>| async move { list_datasets(&s) }))
        .route(
            "/api/v1/leaderboard",
            get(|State(s): State<Shared>, Query(p): Query<BoardParams>| async move {
                leaderboard(&s, p.metric.as_deref(), p.scope.as_deref())
            }),
        )
        .route(
            "/api/v1/uscore/{model}",
            get(|State(s): State<Shared>, UrlPath(model): UrlPath<String>| async move { uscore(&s, &model) }),
        )
        .route(
            "/api/v1/significance",
            get(|State(s): State<Shared>, Query(p): Query<SignificanceParams>| async move {
                significance(&s, p.baseline.as_deref(), p.scope.as_deref())
            }),
        )
        .route(
            "/api/v1/advise",
            post(|State(s): State<Shared>, body: Bytes| async move { advise(&s, &body) }),
        )
        .fallback(|State(s): State<Shared>| async move { ApiResponse::error(&s, 404, "no such endpoint") })
        .with_state(state)
}

/// Binds and serves until Ctrl-C or SIGTERM.
pub async fn serve(state: ServiceState, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    log::warn!("serving /api/v1 on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(shutdown_signal())
        .await
        .context("server error")
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::warn!("shutting down");
}
