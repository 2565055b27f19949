//! HTTP session service over the structsheet engine.
//!
//! Each session holds one workbook with its structure model, soundness
//! report, evaluated values and undo history. Mutating routes take the
//! session's lock, so requests against one session are serialized.

mod error;
pub mod views;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use structsheet::soundness::fingerprint;
use structsheet::structure::{perspective, Perspective};
use structsheet::workbook::{export_csv, import_csv, load_json, save_json};
use structsheet::{CellAddress, Session, Workbook};
use tower_http::cors::CorsLayer;

pub use error::ApiError;
use views::{change_json, content_from_value, workbook_json, RefactorRequest};

pub const DEFAULT_PORT: u16 = 7345;

/// `PORT` from the environment, or [`DEFAULT_PORT`].
pub fn port_from_env() -> u16 {
    std::env::var("PORT").ok().and_then(|p| p.parse().ok()).unwrap_or(DEFAULT_PORT)
}

/// Input format of a workbook file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Native,
    Csv,
}

impl Format {
    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_lowercase().as_str() {
            "json" | "wbk" | "wbk.json" | "native" => Some(Format::Native),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }

    pub fn detect(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Native,
        }
    }
}

fn sheet_name_for(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(|s| s.split('.').next().unwrap_or(s).to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "Sheet1".to_string())
}

/// Reads a workbook file; `format` overrides detection by extension.
pub fn load_path(path: &Path, format: Option<Format>) -> Result<Workbook, ApiError> {
    let bytes =
        std::fs::read(path).map_err(|e| ApiError::invalid("Io", format!("cannot read {}: {e}", path.display())))?;
    match format.unwrap_or_else(|| Format::detect(path)) {
        Format::Native => Ok(load_json(&bytes)?),
        Format::Csv => Ok(import_csv(&bytes, &sheet_name_for(path))?),
    }
}

/// Writes a workbook in the format implied by the extension.
pub fn save_path(wb: &Workbook, path: &Path, format: Option<Format>) -> Result<(), ApiError> {
    let bytes = match format.unwrap_or_else(|| Format::detect(path)) {
        Format::Native => save_json(wb),
        Format::Csv => export_csv(wb, wb.default_sheet())?.into_bytes(),
    };
    std::fs::write(path, bytes).map_err(|e| ApiError::invalid("Io", format!("cannot write {}: {e}", path.display())))
}

struct Entry {
    session: Session,
    path: Option<PathBuf>,
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
}

impl AppState {
    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("UnknownSession", format!("unknown session `{id}`")))
    }

    /// Registers a session and returns its id.
    pub fn insert(&self, session: Session) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.sessions.write().insert(id.clone(), Arc::new(Mutex::new(Entry { session, path: None })));
        id
    }
}

type Shared = State<Arc<AppState>>;
type Reply = Result<Json<Value>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid("InvalidBody", e.to_string()))
}

pub fn router() -> Router {
    router_with(Arc::new(AppState::default()))
}

pub fn router_with(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/workbook", get(get_workbook))
        .route("/sessions/{id}/structure", get(get_structure))
        .route("/sessions/{id}/edits", post(post_edits))
        .route("/sessions/{id}/violations", get(get_violations))
        .route("/sessions/{id}/repairs/{candidate}", post(post_repair))
        .route("/sessions/{id}/refactorings", post(post_refactoring))
        .route("/sessions/{id}/undo", post(post_undo))
        .route("/sessions/{id}/settings", put(put_settings))
        .route("/sessions/{id}/save", put(put_save))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves on `0.0.0.0:port` until interrupted.
pub async fn serve(port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], port))).await?;
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn create_session(State(state): Shared, headers: HeaderMap, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let is_csv = headers
        .get(axum::http::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("csv"));
    let mut path = None;
    let wb = if is_csv {
        import_csv(&body, "Sheet1")?
    } else {
        let doc: Value = parse_body(&body)?;
        match (doc.get("path").and_then(Value::as_str), doc.get("csv").and_then(Value::as_str)) {
            (Some(p), _) => {
                let format = doc.get("format").and_then(Value::as_str).and_then(Format::parse);
                let p = PathBuf::from(p);
                let wb = load_path(&p, format)?;
                path = Some(p);
                wb
            }
            (None, Some(text)) => {
                let sheet = doc.get("sheet").and_then(Value::as_str).unwrap_or("Sheet1");
                import_csv(text.as_bytes(), sheet)?
            }
            (None, None) => load_json(&body)?,
        }
    };
    let session = Session::new(wb)?;
    let id = state.insert(session);
    if let Some(p) = path {
        state.entry(&id)?.lock().path = Some(p);
    }
    Ok((StatusCode::CREATED, Json(json!({"sessionId": id}))))
}

async fn get_workbook(State(state): Shared, UrlPath(id): UrlPath<String>) -> Reply {
    let entry = state.entry(&id)?;
    let entry = entry.lock();
    Ok(Json(workbook_json(&entry.session)))
}

async fn get_structure(State(state): Shared, UrlPath(id): UrlPath<String>, Query(q): Query<HashMap<String, String>>) -> Reply {
    let entry = state.entry(&id)?;
    let entry = entry.lock();
    let session = &entry.session;
    let kind = match q.get("perspective").map(String::as_str).unwrap_or("formula-groups") {
        "formula-groups" => Perspective::FormulaGroups,
        "reference-groups" => {
            let g = q.get("group").ok_or_else(|| ApiError::invalid("MissingParameter", "reference-groups needs `group`"))?;
            let model = session.model();
            let idx = model.resolve_group(g).ok_or_else(|| ApiError::not_found("UnknownGroup", format!("unknown group `{g}`")))?;
            Perspective::ReferenceGroups(model.groups[idx].id.clone())
        }
        "cell" => {
            let a = q.get("addr").ok_or_else(|| ApiError::invalid("MissingParameter", "cell needs `addr`"))?;
            Perspective::Cell(CellAddress::parse(a, session.workbook().default_sheet())?)
        }
        "graph" => Perspective::GroupGraph,
        other => return Err(ApiError::invalid("InvalidPerspective", format!("unknown perspective `{other}`"))),
    };
    let set = perspective(session.model(), &kind)?;
    Ok(Json(serde_json::to_value(set).expect("serializable")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditItem {
    addr: String,
    #[serde(default)]
    content: Value,
}

async fn post_edits(State(state): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Reply {
    let entry = state.entry(&id)?;
    let items: Vec<EditItem> = parse_body(&body)?;
    let mut entry = entry.lock();
    let session = &mut entry.session;
    let mut edits = Vec::with_capacity(items.len());
    for item in &items {
        let addr = CellAddress::parse(&item.addr, session.workbook().default_sheet())?;
        edits.push((addr, content_from_value(&item.content)?));
    }
    let changed = session.edit(edits)?;
    Ok(Json(change_json(session, &changed)))
}

async fn get_violations(State(state): Shared, UrlPath(id): UrlPath<String>) -> Reply {
    let entry = state.entry(&id)?;
    let entry = entry.lock();
    Ok(Json(entry.session.report().to_json()))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RepairBody {
    #[serde(default)]
    input: Option<String>,
}

async fn post_repair(State(state): Shared, UrlPath((id, candidate)): UrlPath<(String, String)>, body: Bytes) -> Reply {
    let entry = state.entry(&id)?;
    let body: RepairBody = if body.iter().all(u8::is_ascii_whitespace) { RepairBody::default() } else { parse_body(&body)? };
    let mut entry = entry.lock();
    let session = &mut entry.session;
    let changed = session.apply_repair(&candidate, body.input.as_deref())?;
    Ok(Json(change_json(session, &changed)))
}

async fn post_refactoring(State(state): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Reply {
    let entry = state.entry(&id)?;
    let req: RefactorRequest = parse_body(&body)?;
    let mut entry = entry.lock();
    let session = &mut entry.session;
    let op = req.to_op(session.workbook())?;
    let plan = structsheet::refactor::plan(session.workbook(), session.model(), &op)?;
    let mut out = plan.to_json();
    out["applied"] = json!(!req.dry_run);
    if !req.dry_run {
        let changed = session.apply_plan(&plan)?;
        let change = change_json(session, &changed);
        out["changedValues"] = change["changedValues"].clone();
        out["report"] = change["report"].clone();
    }
    Ok(Json(out))
}

async fn post_undo(State(state): Shared, UrlPath(id): UrlPath<String>) -> Reply {
    let entry = state.entry(&id)?;
    let mut entry = entry.lock();
    let session = &mut entry.session;
    let changed = session.undo()?;
    Ok(Json(change_json(session, &changed)))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Settings {
    soundness_enabled: bool,
}

async fn put_settings(State(state): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Reply {
    let entry = state.entry(&id)?;
    let settings: Settings = parse_body(&body)?;
    let mut entry = entry.lock();
    let session = &mut entry.session;
    session.set_soundness_enabled(settings.soundness_enabled);
    Ok(Json(json!({"soundnessEnabled": session.soundness_enabled(), "report": session.report().to_json()})))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SaveBody {
    #[serde(default)]
    path: Option<PathBuf>,
}

async fn put_save(State(state): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Reply {
    let entry = state.entry(&id)?;
    let body: SaveBody = if body.iter().all(u8::is_ascii_whitespace) { SaveBody::default() } else { parse_body(&body)? };
    let mut entry = entry.lock();
    let path = body
        .path
        .or_else(|| entry.path.clone())
        .ok_or_else(|| ApiError::invalid("MissingParameter", "no path given and the session was not loaded from a file"))?;
    save_path(entry.session.workbook(), &path, None)?;
    entry.path = Some(path.clone());
    Ok(Json(json!({"path": path.display().to_string(), "fingerprint": fingerprint(entry.session.workbook())})))
}
