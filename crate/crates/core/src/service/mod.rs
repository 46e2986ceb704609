//! Local HTTP+JSON service for the annotation workbench.
//!
//! | Method | Path | Result |
//! |---|---|---|
//! | GET | `/api/queue?annotator=ID&limit=N` | next review items |
//! | POST | `/api/annotations` | the stored record |
//! | POST | `/api/retrain` | `{job_id}`, or 409 while a job runs |
//! | GET | `/api/jobs/{id}` | [`JobStatus`] |
//! | GET | `/api/stats` | label distribution, agreement, round history |
//! | GET | `/api/documents/{doc_id}/report` | [`DocumentReport`] |
//! | GET | `/api/ratings` | [`RatingTable`] |
//!
//! Handlers only translate between HTTP and the library: every endpoint maps
//! onto one store, model or scoring operation. Store writes go through one
//! lock; training runs on a background thread without holding it.

mod jobs;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::{info, warn};

use crate::annotation::{
    compute_agreement, propose_weak_labels, resolved_training_set, select_seed_batch, AgreementReport,
    AnnotationRecord, AnnotationStore, ADJUDICATOR,
};
use crate::clarity::{train_contrastive_classifier, ClarityError, ClarityModel, Encoder};
use crate::config::PipelineConfig;
use crate::eval::DocumentReport;
use crate::label::{AnnotationLabel, ClarityLabel, ClassLabel};
use crate::pipeline::{score_and_report, SentencePrediction};
use crate::scoring::{RatingTable, ScoreConfig};

pub use jobs::{JobKind, JobRegistry, JobState, JobStatus};

pub const DEFAULT_QUEUE_LIMIT: usize = 20;
pub const MAX_QUEUE_LIMIT: usize = 500;

/// Trains a clarity model from `(text, label)` pairs.
pub type Trainer = Arc<dyn Fn(&[(String, ClarityLabel)]) -> Result<ClarityModel, ClarityError> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundInfo {
    pub round: u32,
    pub model_version: String,
    pub trained_on: usize,
    pub resolved: usize,
}

struct ActiveModel {
    model: ClarityModel,
    version: String,
}

pub struct ServiceState {
    annotators_per_item: usize,
    queue_seed: u64,
    store: RwLock<AnnotationStore>,
    model: RwLock<Option<ActiveModel>>,
    history: RwLock<Vec<RoundInfo>>,
    round: AtomicU32,
    jobs: Mutex<JobRegistry>,
    trainer: Trainer,
    reports: RwLock<BTreeMap<String, DocumentReport>>,
    ratings: RwLock<RatingTable>,
}

impl ServiceState {
    /// Retraining uses the contrastive classifier with the configured
    /// encoder and hyperparameters.
    pub fn new(store: AnnotationStore, config: &PipelineConfig) -> Result<Self, ClarityError> {
        let encoder_config = config
            .clarity
            .encoder_config()
            .map_err(|e| ClarityError::InvalidConfig(e.to_string()))?;
        let encoder = Encoder::new(encoder_config, config.clarity.encoder_seed)?;
        let r = config.clarity.r_per_item;
        let opts = config.clarity.contrastive.clone();
        let trainer: Trainer = Arc::new(move |labeled: &[(String, ClarityLabel)]| {
            train_contrastive_classifier(&encoder, labeled, r, &opts).map(|(m, _)| m)
        });
        Ok(Self::with_trainer(store, config, trainer))
    }

    pub fn with_trainer(store: AnnotationStore, config: &PipelineConfig, trainer: Trainer) -> Self {
        Self {
            annotators_per_item: config.annotation.annotators_per_item,
            queue_seed: config.annotation.split_seed,
            store: RwLock::new(store),
            model: RwLock::new(None),
            history: RwLock::new(Vec::new()),
            round: AtomicU32::new(0),
            jobs: Mutex::new(JobRegistry::default()),
            trainer,
            reports: RwLock::new(BTreeMap::new()),
            ratings: RwLock::new(RatingTable {
                entries: Vec::new(),
                quantile_method: "nearest-rank".into(),
                degenerate: true,
            }),
        }
    }

    /// Start from an already trained model.
    pub fn set_model(&self, model: ClarityModel, version: impl Into<String>) {
        *self.model.write().expect("model lock") = Some(ActiveModel {
            model,
            version: version.into(),
        });
    }

    /// Publish reports and ratings for a classified universe.
    pub fn set_universe(&self, rows: &[SentencePrediction], config: &ScoreConfig) {
        let (scoring, reports) = score_and_report(rows, config);
        *self.ratings.write().expect("ratings lock") = scoring.rating_table();
        *self.reports.write().expect("reports lock") = reports.into_iter().map(|r| (r.doc_id.clone(), r)).collect();
    }

    pub fn current_round(&self) -> u32 {
        self.round.load(Ordering::SeqCst)
    }

    pub fn model_version(&self) -> Option<String> {
        self.model
            .read()
            .expect("model lock")
            .as_ref()
            .map(|m| m.version.clone())
    }

    pub fn record_count(&self) -> usize {
        self.store.read().expect("store lock").len()
    }

    pub fn job(&self, id: &str) -> Option<JobStatus> {
        self.jobs.lock().expect("jobs lock").get(id).cloned()
    }

    fn run_retrain(self: Arc<Self>, job_id: String) {
        let update =
            |s: JobState, p: f64, m: Option<String>| self.jobs.lock().expect("jobs lock").update(&job_id, s, p, m);
        update(JobState::Running, 0.1, None);
        let (training, resolved) = {
            let store = self.store.read().expect("store lock");
            (resolved_training_set(&store), store.resolved().len())
        };
        let missing: Vec<&str> = ClarityLabel::ALL
            .iter()
            .filter(|c| !training.iter().any(|(_, l)| l == *c))
            .map(|c| c.name())
            .collect();
        if !missing.is_empty() {
            update(
                JobState::Failed,
                1.0,
                Some(format!("no resolved {} sentences yet", missing.join("/"))),
            );
            return;
        }
        update(JobState::Running, 0.2, None);
        match (self.trainer)(&training) {
            Ok(model) => {
                let round = self.current_round();
                let version = {
                    let mut history = self.history.write().expect("history lock");
                    let version = format!("v{}", history.len() + 1);
                    history.push(RoundInfo {
                        round,
                        model_version: version.clone(),
                        trained_on: training.len(),
                        resolved,
                    });
                    version
                };
                self.set_model(model, version.clone());
                self.round.fetch_add(1, Ordering::SeqCst);
                info!(%version, trained_on = training.len(), "retrain finished");
                update(JobState::Done, 1.0, Some(format!("model {version}")));
            }
            Err(e) => {
                warn!("retrain failed: {e}");
                update(JobState::Failed, 1.0, Some(e.to_string()));
            }
        }
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Busy { message: String, job_id: String },
    Validation(String),
    Conflict(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, message, extra) = match self {
            Self::NotFound(m) => (StatusCode::NOT_FOUND, "not_found", m, None),
            Self::Busy { message, job_id } => (StatusCode::CONFLICT, "busy", message, Some(job_id)),
            Self::Validation(m) => (StatusCode::UNPROCESSABLE_ENTITY, "validation_error", m, None),
            Self::Conflict(m) => (StatusCode::CONFLICT, "conflict", m, None),
            Self::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m, None),
        };
        let mut body = json!({ "error": kind, "message": message });
        if let Some(id) = extra {
            body["job_id"] = json!(id);
        }
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct QueueParams {
    pub annotator: Option<String>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub sentence_id: String,
    pub doc_id: String,
    pub sentence: String,
    pub proposed_label: Option<ClarityLabel>,
    pub confidence: Option<f64>,
    pub model_version: Option<String>,
    pub round: u32,
}

async fn queue(
    State(state): State<Arc<ServiceState>>,
    Query(q): Query<QueueParams>,
) -> Result<Json<Vec<QueueItem>>, ApiError> {
    let annotator = q
        .annotator
        .filter(|a| !a.trim().is_empty())
        .ok_or_else(|| ApiError::Validation("query parameter `annotator` is required".into()))?;
    let limit = q.limit.unwrap_or(DEFAULT_QUEUE_LIMIT).min(MAX_QUEUE_LIMIT);
    let round = state.current_round();
    let store = state.store.read().expect("store lock");

    let mut seen: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for r in store.records().iter().filter(|r| r.annotator_id != ADJUDICATOR) {
        seen.entry(r.sentence_id.as_str())
            .or_default()
            .insert(r.annotator_id.as_str());
    }
    let candidates: Vec<_> = store
        .corpus()
        .iter()
        .filter(|s| {
            seen.get(s.sentence_id.as_str())
                .is_none_or(|a| !a.contains(annotator.as_str()) && a.len() < state.annotators_per_item)
        })
        .cloned()
        .collect();

    let model = state.model.read().expect("model lock");
    let items: Vec<QueueItem> = match model.as_ref() {
        Some(active) => propose_weak_labels(Some(&active.model), &active.version, &candidates)
            .map_err(|e| ApiError::Internal(e.to_string()))?
            .into_iter()
            .take(limit)
            .filter_map(|p| {
                let s = store.sentence(&p.sentence_id)?;
                Some(QueueItem {
                    sentence_id: p.sentence_id.clone(),
                    doc_id: s.doc_id.clone(),
                    sentence: s.text.clone(),
                    proposed_label: Some(p.proposed),
                    confidence: Some(p.confidence),
                    model_version: Some(p.model_version),
                    round,
                })
            })
            .collect(),
        None => select_seed_batch(
            &candidates,
            candidates.len(),
            state.queue_seed.wrapping_add(u64::from(round)),
        )
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .into_iter()
        .take(limit)
        .filter_map(|sid| {
            let s = store.sentence(&sid)?;
            Some(QueueItem {
                sentence_id: sid.clone(),
                doc_id: s.doc_id.clone(),
                sentence: s.text.clone(),
                proposed_label: None,
                confidence: None,
                model_version: None,
                round,
            })
        })
        .collect(),
    };
    Ok(Json(items))
}

#[derive(Debug, Deserialize)]
pub struct AnnotationBody {
    pub sentence_id: String,
    pub annotator_id: String,
    pub label: String,
    /// Defaults to the service's current round.
    pub round: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotationAck {
    pub record: AnnotationRecord,
    pub record_count: usize,
    /// The same label was already stored for this sentence, annotator and
    /// round; nothing new was written.
    pub duplicate: bool,
}

async fn annotate(
    State(state): State<Arc<ServiceState>>,
    body: Result<Json<AnnotationBody>, JsonRejection>,
) -> Result<Json<AnnotationAck>, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::Validation(e.body_text()))?;
    if body.annotator_id.trim().is_empty() {
        return Err(ApiError::Validation("annotator_id is empty".into()));
    }
    let label: AnnotationLabel = body.label.parse().map_err(|e| ApiError::Validation(format!("{e}")))?;
    let round = body.round.unwrap_or_else(|| state.current_round());
    let mut store = state.store.write().expect("store lock");
    if store.sentence(&body.sentence_id).is_none() {
        return Err(ApiError::NotFound(format!("unknown sentence {}", body.sentence_id)));
    }
    if let Some(existing) = store
        .records()
        .iter()
        .find(|r| r.sentence_id == body.sentence_id && r.annotator_id == body.annotator_id && r.round == round)
    {
        if existing.label == label {
            return Ok(Json(AnnotationAck {
                record: existing.clone(),
                record_count: store.len(),
                duplicate: true,
            }));
        }
        return Err(ApiError::Conflict(format!(
            "{} already labeled {} by {} in round {round}",
            body.sentence_id, existing.label, body.annotator_id
        )));
    }
    let record = AnnotationRecord::new(&body.sentence_id, &body.annotator_id, label, round);
    let record_count = store
        .record(record.clone())
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    if let Err(e) = store.snapshot() {
        warn!("snapshot failed: {e}");
    }
    Ok(Json(AnnotationAck {
        record,
        record_count,
        duplicate: false,
    }))
}

async fn retrain(State(state): State<Arc<ServiceState>>) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let started = state.jobs.lock().expect("jobs lock").start(JobKind::Retrain);
    let job_id = started.map_err(|job_id| ApiError::Busy {
        message: format!("job {job_id} is still running"),
        job_id,
    })?;
    let worker = state.clone();
    let id = job_id.clone();
    std::thread::spawn(move || worker.run_retrain(id));
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))))
}

async fn job(State(state): State<Arc<ServiceState>>, Path(id): Path<String>) -> Result<Json<JobStatus>, ApiError> {
    state
        .job(&id)
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("unknown job {id}")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Stats {
    pub record_count: usize,
    pub annotators: Vec<String>,
    pub resolved: usize,
    pub unresolved: usize,
    /// Latest label per resolved sentence, counted by label.
    pub label_distribution: BTreeMap<String, usize>,
    /// Absent until two annotators share a sentence.
    pub agreement: Option<AgreementReport>,
    pub rounds: Vec<RoundInfo>,
    pub current_round: u32,
    pub model_version: Option<String>,
    pub active_job: Option<JobStatus>,
}

async fn stats(State(state): State<Arc<ServiceState>>) -> Json<Stats> {
    let store = state.store.read().expect("store lock");
    let snapshot = store.to_snapshot();
    let mut label_distribution: BTreeMap<String, usize> =
        AnnotationLabel::ALL.iter().map(|l| (l.name().to_string(), 0)).collect();
    for l in snapshot.resolved.values() {
        *label_distribution.entry(l.name().to_string()).or_default() += 1;
    }
    Json(Stats {
        record_count: snapshot.record_count,
        annotators: snapshot.annotators,
        resolved: snapshot.resolved.len(),
        unresolved: store.corpus().len() - snapshot.resolved.len(),
        label_distribution,
        agreement: compute_agreement(store.records()).ok(),
        rounds: state.history.read().expect("history lock").clone(),
        current_round: state.current_round(),
        model_version: state.model_version(),
        active_job: state.jobs.lock().expect("jobs lock").active().cloned(),
    })
}

async fn report(
    State(state): State<Arc<ServiceState>>,
    Path(doc_id): Path<String>,
) -> Result<Json<DocumentReport>, ApiError> {
    state
        .reports
        .read()
        .expect("reports lock")
        .get(&doc_id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("no report for document {doc_id}")))
}

async fn ratings(State(state): State<Arc<ServiceState>>) -> Json<RatingTable> {
    Json(state.ratings.read().expect("ratings lock").clone())
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/queue", get(queue))
        .route("/api/annotations", post(annotate))
        .route("/api/retrain", post(retrain))
        .route("/api/jobs/:id", get(job))
        .route("/api/stats", get(stats))
        .route("/api/documents/:doc_id/report", get(report))
        .route("/api/ratings", get(ratings))
        .with_state(state)
}

pub async fn serve(state: Arc<ServiceState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
