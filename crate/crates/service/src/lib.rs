//! JSON-over-HTTP facade for the verification UI.
//!
//! Routes: `POST /api/sessions`, `GET /api/sessions/{id}`,
//! `POST /api/sessions/{id}/detect`, `POST /api/sessions/{id}/attribute`,
//! `GET /health`.

pub mod api;
pub mod extractor;
pub mod session;

use std::net::SocketAddr;
use std::ops::Range;
use std::path::PathBuf;
use std::sync::Arc;

use attrib_core::attribution::{attribute_span, AttributionConfig, EvidenceSegmentation, SpanRef};
use attrib_core::detection::{detect, DetectionConfig, StopList};
use attrib_core::prompt::{known_templates, INST_V1};
use attrib_core::text::trim_range;
use attrib_core::trace::Segment;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tower_http::cors::{Any, CorsLayer};

use api::*;
use extractor::{ExtractRequest, Extractor};
use session::{LoadedTrace, Session, SessionRecord, SessionStatus, SessionStore};

pub struct AppState {
    pub store: SessionStore,
    pub extractor: Option<Arc<dyn Extractor>>,
    pub stoplist: StopList,
    /// Allowed CORS origin; any origin when `None`.
    pub cors_origin: Option<String>,
}

impl AppState {
    pub fn open(root: impl Into<PathBuf>, extractor: Option<Arc<dyn Extractor>>) -> std::io::Result<Self> {
        Ok(Self {
            store: SessionStore::open(root)?,
            extractor,
            stoplist: StopList::english_v1(),
            cors_origin: None,
        })
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub model_name: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), model_name: None }
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    fn with_model(mut self, model: &str) -> Self {
        self.model_name = Some(model.to_owned());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { provenance: Provenance::new(self.model_name), error: self.message };
        (self.status, Json(body)).into_response()
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<tokio::task::JoinError> for ApiError {
    fn from(e: tokio::task::JoinError) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

type Shared = Arc<AppState>;

pub fn router(app: Shared) -> Router {
    let origin = match &app.cors_origin {
        Some(o) => HeaderValue::from_str(o).map(Into::into).unwrap_or_else(|_| Any.into()),
        None => Any.into(),
    };
    let cors = CorsLayer::new()
        .allow_origin::<tower_http::cors::AllowOrigin>(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/health", get(health))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/detect", post(detect_handler))
        .route("/api/sessions/{id}/attribute", post(attribute_handler))
        .layer(cors)
        .with_state(app)
}

pub async fn serve(addr: SocketAddr, app: Shared) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app)).await
}

fn model_of(session: &Session) -> Option<String> {
    session.trace.as_ref().map(|t| t.trace.manifest.model_name.clone())
}

fn session_view(session: &Session) -> SessionView {
    let r = &session.record;
    SessionView {
        provenance: Provenance::new(model_of(session)),
        session_id: r.session_id.clone(),
        status: r.status,
        document: r.document.clone(),
        question: r.question.clone(),
        answer: session.trace.as_ref().map(|t| t.answer.clone()),
        created_unix_ms: r.created_unix_ms,
        error: r.error.clone(),
        layer_count: session.trace.as_ref().map(|t| t.trace.layer_count()),
    }
}

async fn health(State(app): State<Shared>) -> Json<Health> {
    Json(Health {
        provenance: Provenance::new(None),
        status: "ok".into(),
        extractor: app.extractor.as_ref().map(|e| e.model_name().to_owned()),
        sessions: app.store.len(),
    })
}

async fn create_session(
    State(app): State<Shared>,
    Json(req): Json<CreateSessionRequest>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    if req.document.trim().is_empty() {
        return Err(ApiError::unprocessable("document is empty"));
    }
    match (req.generate, &req.answer) {
        (true, Some(_)) => return Err(ApiError::unprocessable("give either an answer or generate=true, not both")),
        (false, None) => return Err(ApiError::unprocessable("answer is required unless generate=true")),
        _ => {}
    }
    let template_id = req.template_id.clone().unwrap_or_else(|| INST_V1.to_owned());
    if !known_templates().contains(&template_id.as_str()) {
        return Err(ApiError::unprocessable(format!("unknown template {template_id:?}")));
    }
    let extractor = app
        .extractor
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no extractor configured"))?;

    let id = uuid::Uuid::new_v4().simple().to_string();
    let record = SessionRecord::new(id.clone(), req.document.clone(), req.question.clone(), req.answer.clone(), template_id.clone());
    app.store.persist(&record)?;
    app.store.insert(Session { record: record.clone(), trace: None });

    let out = app.store.trace_dir(&id);
    let request = ExtractRequest { document: req.document, question: req.question, answer: req.answer, template_id };
    let outcome = tokio::task::spawn_blocking(move || {
        if out.exists() {
            std::fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
        }
        extractor.extract(&request, &out).map_err(|e| e.to_string())
    })
    .await
    .unwrap_or_else(|e| Err(e.to_string()));
    let store_app = app.clone();
    let session = tokio::task::spawn_blocking(move || store_app.store.complete(record, outcome)).await??;
    let status = match session.record.status {
        SessionStatus::Ready => StatusCode::CREATED,
        _ => StatusCode::BAD_GATEWAY,
    };
    Ok((status, Json(session_view(&session))))
}

fn lookup(app: &AppState, id: &str) -> Result<Arc<Session>, ApiError> {
    app.store
        .get(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))
}

fn ready(session: &Session) -> Result<&LoadedTrace, ApiError> {
    session.trace.as_ref().ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            format!("session is {:?}, not ready", session.record.status).to_lowercase(),
        )
    })
}

async fn get_session(State(app): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = lookup(&app, &id)?;
    Ok(Json(session_view(&session)))
}

async fn detect_handler(
    State(app): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<DetectRequest>,
) -> Result<Json<DetectResponse>, ApiError> {
    let session = lookup(&app, &id)?;
    ready(&session)?;
    let resp = tokio::task::spawn_blocking(move || run_detect(&app, &session, &req)).await??;
    Ok(Json(resp))
}

fn run_detect(app: &AppState, session: &Session, req: &DetectRequest) -> Result<DetectResponse, ApiError> {
    let lt = ready(session)?;
    let model = lt.trace.manifest.model_name.clone();
    if !req.theta.is_finite() {
        return Err(ApiError::unprocessable("theta must be finite").with_model(&model));
    }
    let cfg = DetectionConfig { layer: req.layer, theta: req.theta };
    let r = detect(&lt.trace, cfg, &app.stoplist, req.filter)
        .map_err(|e| ApiError::unprocessable(e.to_string()).with_model(&model))?;
    let off = lt.answer_offset;
    let tokens = r
        .answer_tokens
        .iter()
        .zip(&r.scores)
        .zip(&r.mask)
        .map(|((&i, &score), &copied)| {
            let t = &lt.trace.tokens()[i];
            TokenScore {
                answer_char_start: t.char_start - off,
                answer_char_end: t.char_end - off,
                score,
                copied,
            }
        })
        .collect();
    let spans = r
        .spans
        .iter()
        .map(|s| SpanAnnotation {
            token_start: s.token_start,
            token_end: s.token_end,
            answer_char_start: s.char_start - off,
            answer_char_end: s.char_end - off,
            text: lt.answer[s.char_start - off..s.char_end - off].to_owned(),
            mean_score: s.mean_score,
        })
        .collect();
    Ok(DetectResponse {
        provenance: Provenance::new(Some(model)),
        session_id: session.record.session_id.clone(),
        layer: r.layer,
        theta: r.theta,
        tokens,
        spans,
    })
}

async fn attribute_handler(
    State(app): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<AttributeRequest>,
) -> Result<Json<AttributeResponse>, ApiError> {
    let session = lookup(&app, &id)?;
    ready(&session)?;
    let resp = tokio::task::spawn_blocking(move || run_attribute(&session, &req)).await??;
    Ok(Json(resp))
}

/// Answer tokens whose non-whitespace text overlaps `range` (answer bytes).
fn resolve_span(lt: &LoadedTrace, range: Range<usize>) -> Option<SpanRef> {
    let range = trim_range(&lt.answer, range)?;
    let hits: Vec<usize> = lt
        .trace
        .tokens()
        .iter()
        .filter(|t| t.segment == Segment::Answer)
        .enumerate()
        .filter_map(|(pos, t)| {
            let local = t.char_start - lt.answer_offset..t.char_end - lt.answer_offset;
            let core = trim_range(&lt.answer, local)?;
            (core.start < range.end && range.start < core.end).then_some(pos)
        })
        .collect();
    Some(SpanRef::new(*hits.first()?, hits.last()? + 1))
}

fn run_attribute(session: &Session, req: &AttributeRequest) -> Result<AttributeResponse, ApiError> {
    let lt = ready(session)?;
    let model = lt.trace.manifest.model_name.clone();
    let err = |m: String| ApiError::unprocessable(m).with_model(&model);
    let (s, e) = (req.answer_char_start, req.answer_char_end);
    if s >= e || e > lt.answer.len() || !lt.answer.is_char_boundary(s) || !lt.answer.is_char_boundary(e) {
        return Err(err(format!("invalid answer char range {s}..{e}")));
    }
    let span = resolve_span(lt, s..e).ok_or_else(|| err("span resolves to zero answer tokens".into()))?;
    let mut cfg = AttributionConfig::new(req.layer);
    if let Some(k) = req.anchors {
        cfg.anchor_count = k;
    }
    cfg.max_window_len = req.max_window;
    cfg.boundary_policy = req.boundary_policy;
    let seg = EvidenceSegmentation::from_tokens(lt.trace.tokens());
    let r = attribute_span(&lt.trace, span, &cfg, seg.as_ref()).map_err(|e| err(e.to_string()))?;

    let prompt = lt.trace.prompt();
    let doc_off = lt.document_offset;
    let doc_tokens = lt.trace.manifest.tokens_in(Segment::Document);
    let answer_tokens = lt.trace.manifest.tokens_in(Segment::Answer);
    // Display ranges drop the whitespace tokens carry at their edges.
    let trimmed = |r: Range<usize>| trim_range(&prompt, r.clone()).unwrap_or(r);
    let window_chars = trimmed(r.window.char_start..r.window.char_end);
    let span_chars = trimmed(answer_tokens[span.start].char_start..answer_tokens[span.end - 1].char_end);
    let evidence = seg
        .as_ref()
        .map(|seg| {
            seg.ranges()
                .iter()
                .enumerate()
                .map(|(i, rg)| {
                    let chars = trimmed(doc_tokens[rg.start].char_start..doc_tokens[rg.end - 1].char_end);
                    EvidenceView {
                        index: i,
                        document_char_start: chars.start - doc_off,
                        document_char_end: chars.end - doc_off,
                        score: r.evidence_scores.get(i).copied().flatten(),
                    }
                })
                .collect()
        })
        .unwrap_or_default();
    Ok(AttributeResponse {
        provenance: Provenance::new(Some(model)),
        session_id: session.record.session_id.clone(),
        layer: req.layer,
        span: ResolvedSpan {
            token_start: span.start,
            token_end: span.end,
            answer_char_start: span_chars.start - lt.answer_offset,
            answer_char_end: span_chars.end - lt.answer_offset,
        },
        window: WindowView {
            token_start: r.window.start,
            token_end: r.window.end,
            document_char_start: window_chars.start - doc_off,
            document_char_end: window_chars.end - doc_off,
            text: prompt[window_chars].to_owned(),
        },
        score: r.score,
        degenerate: r.degenerate,
        anchors: r.anchors,
        evidence,
        predicted_evidence: r.predicted_evidence,
    })
}
