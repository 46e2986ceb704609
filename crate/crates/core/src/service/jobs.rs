use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_finished(self) -> bool {
        matches!(self, Self::Done | Self::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Retrain,
    Score,
    Ingest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub progress: f64,
    pub message: Option<String>,
}

/// Background jobs, at most one unfinished at a time.
#[derive(Debug, Default)]
pub struct JobRegistry {
    next: u64,
    jobs: BTreeMap<String, JobStatus>,
    active: Option<String>,
}

impl JobRegistry {
    /// Register a queued job, or return the id of the unfinished one.
    pub fn start(&mut self, kind: JobKind) -> Result<String, String> {
        if let Some(id) = &self.active {
            return Err(id.clone());
        }
        self.next += 1;
        let id = format!("job-{}", self.next);
        self.jobs.insert(
            id.clone(),
            JobStatus {
                job_id: id.clone(),
                kind,
                state: JobState::Queued,
                progress: 0.0,
                message: None,
            },
        );
        self.active = Some(id.clone());
        Ok(id)
    }

    /// Move a job forward. Backward or repeated terminal transitions are
    /// ignored so a status never regresses.
    pub fn update(&mut self, id: &str, state: JobState, progress: f64, message: Option<String>) {
        let Some(job) = self.jobs.get_mut(id) else { return };
        if state < job.state || job.state.is_finished() {
            return;
        }
        job.state = state;
        job.progress = progress.clamp(job.progress, 1.0);
        if message.is_some() {
            job.message = message;
        }
        if state.is_finished() && self.active.as_deref() == Some(id) {
            self.active = None;
        }
    }

    pub fn get(&self, id: &str) -> Option<&JobStatus> {
        self.jobs.get(id)
    }

    pub fn active(&self) -> Option<&JobStatus> {
        self.active.as_deref().and_then(|id| self.jobs.get(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_active_job_and_forward_only() {
        let mut r = JobRegistry::default();
        let a = r.start(JobKind::Retrain).unwrap();
        assert_eq!(r.start(JobKind::Retrain), Err(a.clone()));
        r.update(&a, JobState::Running, 0.5, None);
        r.update(&a, JobState::Queued, 0.9, None);
        assert_eq!(r.get(&a).unwrap().state, JobState::Running);
        assert_eq!(r.get(&a).unwrap().progress, 0.5);
        r.update(&a, JobState::Failed, 1.0, Some("boom".into()));
        r.update(&a, JobState::Done, 1.0, None);
        let job = r.get(&a).unwrap();
        assert_eq!(job.state, JobState::Failed);
        assert_eq!(job.message.as_deref(), Some("boom"));
        assert!(r.active().is_none());
        assert_ne!(r.start(JobKind::Retrain).unwrap(), a);
    }
}
