//! HTTP JSON API over a loaded store.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/api/sessions` | `{"query": "...", "k": 20}` |
//! | GET | `/api/sessions/{id}/recommendations` | `?k=20` |
//! | POST | `/api/sessions/{id}/events` | an interaction event |
//! | GET | `/api/sessions/{id}/diet` | |
//! | GET | `/api/images/{id}` | |
//! | GET | `/api/images/{id}/raw` | |
//! | GET | `/api/boards/{name}` | `?limit=N` |
//!
//! The store is shared read-only. Each session sits behind its own lock, so
//! requests for different sessions never contend.

mod error;

use std::collections::HashMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use scentrec_core::domain::{Cue, ImageDoc};
use scentrec_core::ingest::Store;
use scentrec_core::recommend::RankedItem;
use scentrec_core::scent::{Consumed, InteractionEvent, ScentConfig, ScentScore};
use scentrec_core::session::{Session, DEFAULT_POOL_SIZE, DEFAULT_PREFERENCE_COUNT};
use scentrec_core::Corpus;
use tower_http::services::ServeDir;

pub use error::ApiError;

pub const DEFAULT_K: usize = 20;
pub const MAX_K: usize = 500;

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub scent: ScentConfig,
    pub pool_size: usize,
    pub preference_count: usize,
    /// Directory for per-session JSON event logs.
    pub log_dir: Option<PathBuf>,
    /// Directory served for any path outside `/api`.
    pub static_dir: Option<PathBuf>,
}

impl ServiceOptions {
    pub fn for_store(store: &Store) -> Self {
        ServiceOptions {
            scent: store.config().scent,
            pool_size: DEFAULT_POOL_SIZE,
            preference_count: DEFAULT_PREFERENCE_COUNT,
            log_dir: None,
            static_dir: None,
        }
    }
}

struct SessionEntry {
    session: Session,
    created_at: u64,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<SessionEntry>>>>>,
    options: Arc<ServiceOptions>,
}

/// Persisted form of a session: enough to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    pub query: String,
    pub created_at: u64,
    pub events: Vec<InteractionEvent>,
}

impl AppState {
    /// Builds the state, replaying any session logs found in `log_dir`.
    pub fn new(store: Store, options: ServiceOptions) -> scentrec_core::Result<Self> {
        options.scent.validate()?;
        let state = AppState {
            store: Arc::new(store),
            sessions: Arc::new(RwLock::new(HashMap::new())),
            options: Arc::new(options),
        };
        if let Some(dir) = &state.options.log_dir {
            fs::create_dir_all(dir).map_err(|e| scentrec_core::Error::Io { path: dir.clone(), source: e })?;
            state.restore(dir)?;
        }
        Ok(state)
    }

    fn restore(&self, dir: &Path) -> scentrec_core::Result<()> {
        let io = |e| scentrec_core::Error::Io { path: dir.to_path_buf(), source: e };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let corpus = self.store.corpus();
        let mut map = self.sessions.write().expect("session map poisoned");
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| scentrec_core::Error::Io { path: path.clone(), source: e })?;
            let log: SessionLog = serde_json::from_str(&text)?;
            let session = Session::replay(&log.query, &log.events, corpus, self.options.scent, self.options.pool_size)?;
            map.insert(log.session_id, Arc::new(Mutex::new(SessionEntry { session, created_at: log.created_at })));
        }
        Ok(())
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn options(&self) -> &ServiceOptions {
        &self.options
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionEntry>>, ApiError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("session not found: {id}")))
    }

    fn write_log(&self, id: &str, entry: &SessionEntry) -> Result<(), ApiError> {
        let Some(dir) = &self.options.log_dir else {
            return Ok(());
        };
        let log = SessionLog {
            session_id: id.to_string(),
            query: entry.session.query().to_string(),
            created_at: entry.created_at,
            events: entry.session.events().to_vec(),
        };
        let text = serde_json::to_string_pretty(&log).map_err(|e| ApiError::internal(e.to_string()))?;
        fs::write(dir.join(format!("{id}.json")), text).map_err(|e| ApiError::internal(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    pub image_id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub width: u32,
    pub height: u32,
    pub uri: String,
    pub score: f64,
    pub scent: ScentScore,
    pub cues: Vec<Cue>,
    pub matched_cues: Vec<String>,
}

impl ItemView {
    pub fn new(item: &RankedItem, corpus: &Corpus) -> Self {
        let image = corpus.image(&item.image_id).expect("ranked items come from the corpus");
        ItemView {
            image_id: item.image_id.clone(),
            title: image.title.clone(),
            category: image.category.clone(),
            width: image.width,
            height: image.height,
            uri: raw_url(&image.id),
            score: item.score,
            scent: item.scent.expect("scent-ranked items carry a score"),
            cues: image.cues.clone(),
            matched_cues: item.matched_cues.clone(),
        }
    }
}

fn raw_url(id: &str) -> String {
    format!("/api/images/{id}/raw")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DietView {
    pub iteration: u32,
    pub diet_total: f64,
    pub consumed: Vec<Consumed>,
    pub events: usize,
}

impl DietView {
    fn new(session: &Session) -> Self {
        let p = session.profile();
        DietView { iteration: p.iteration, diet_total: p.diet_total, consumed: p.consumed.clone(), events: session.events().len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationsView {
    pub session_id: String,
    pub query: String,
    pub items: Vec<ItemView>,
    pub preferences: Vec<String>,
    pub diet: DietView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAck {
    pub seq: u64,
    pub kind: String,
    pub iteration: u32,
    pub diet_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardItem {
    pub image_id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardView {
    pub board: String,
    pub count: usize,
    pub items: Vec<BoardItem>,
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    #[serde(default)]
    query: Option<String>,
    #[serde(default)]
    k: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct KParam {
    k: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct LimitParam {
    limit: Option<usize>,
}

fn check_k(k: Option<usize>) -> Result<usize, ApiError> {
    match k.unwrap_or(DEFAULT_K) {
        0 => Err(ApiError::validation(Some("k"), "k must be at least 1")),
        k if k > MAX_K => Err(ApiError::validation(Some("k"), format!("k must be at most {MAX_K}"))),
        k => Ok(k),
    }
}

fn recommendations_view(state: &AppState, id: &str, session: &Session, k: usize) -> Result<RecommendationsView, ApiError> {
    let corpus = state.store.corpus();
    let ranked = session.recommendations(corpus, k)?;
    let preferences = session.preferences(&ranked, corpus, state.options.preference_count);
    Ok(RecommendationsView {
        session_id: id.to_string(),
        query: session.query().to_string(),
        items: ranked.iter().map(|r| ItemView::new(r, corpus)).collect(),
        preferences,
        diet: DietView::new(session),
    })
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<RecommendationsView>), ApiError> {
    let Json(req) = body?;
    let k = check_k(req.k)?;
    let query = req.query.unwrap_or_default();
    if query.trim().is_empty() {
        return Err(ApiError::validation(Some("query"), "query must not be empty"));
    }
    let session = Session::start(&query, state.store.corpus(), state.options.scent, state.options.pool_size)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let entry = SessionEntry { session, created_at };
    let view = recommendations_view(&state, &id, &entry.session, k)?;
    state.write_log(&id, &entry)?;
    state.sessions.write().expect("session map poisoned").insert(id, Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_recommendations(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    params: Result<Query<KParam>, QueryRejection>,
) -> Result<Json<RecommendationsView>, ApiError> {
    let entry = state.session(&id)?;
    let k = check_k(params?.0.k)?;
    let guard = entry.lock().expect("session poisoned");
    Ok(Json(recommendations_view(&state, &id, &guard.session, k)?))
}

async fn record_event(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<InteractionEvent>, JsonRejection>,
) -> Result<Json<EventAck>, ApiError> {
    let entry = state.session(&id)?;
    let Json(event) = body?;
    let mut guard = entry.lock().expect("session poisoned");
    let recorded = guard.session.record(event, state.store.corpus())?.clone();
    state.write_log(&id, &guard)?;
    let p = guard.session.profile();
    Ok(Json(EventAck { seq: recorded.seq, kind: recorded.kind.as_str().to_string(), iteration: p.iteration, diet_total: p.diet_total }))
}

async fn get_diet(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<DietView>, ApiError> {
    let entry = state.session(&id)?;
    let guard = entry.lock().expect("session poisoned");
    Ok(Json(DietView::new(&guard.session)))
}

fn image_doc<'a>(state: &'a AppState, id: &str) -> Result<&'a ImageDoc, ApiError> {
    state.store.corpus().image(id).ok_or_else(|| ApiError::not_found(format!("image not found: {id}")))
}

async fn get_image(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<ImageDoc>, ApiError> {
    Ok(Json(image_doc(&state, &id)?.clone()))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}

async fn get_image_raw(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    image_doc(&state, &id)?;
    let path = state.store.image_path(&id).expect("image exists");
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::not_found(format!("image bytes unavailable for {id}")))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

/// Images whose category is `name`; the corpus name lists everything.
async fn get_board(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
    params: Result<Query<LimitParam>, QueryRejection>,
) -> Result<Json<BoardView>, ApiError> {
    let limit = params?.0.limit;
    let corpus = state.store.corpus();
    let all = name == corpus.name();
    let matching: Vec<&ImageDoc> =
        corpus.images().iter().filter(|i| all || i.category.as_deref() == Some(name.as_str())).collect();
    if matching.is_empty() {
        return Err(ApiError::not_found(format!("board not found: {name}")));
    }
    let count = matching.len();
    let items = matching
        .into_iter()
        .take(limit.unwrap_or(usize::MAX))
        .map(|i| BoardItem { image_id: i.id.clone(), title: i.title.clone(), category: i.category.clone(), uri: raw_url(&i.id) })
        .collect();
    Ok(Json(BoardView { board: name, count, items }))
}

async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: AppState) -> Router {
    let static_dir = state.options.static_dir.clone();
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/recommendations", get(get_recommendations))
        .route("/api/sessions/{id}/events", post(record_event))
        .route("/api/sessions/{id}/diet", get(get_diet))
        .route("/api/images/{id}", get(get_image))
        .route("/api/images/{id}/raw", get(get_image_raw))
        .route("/api/boards/{name}", get(get_board))
        .route("/api/{*rest}", get(api_not_found).post(api_not_found))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(api_not_found),
    }
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
