//! In-memory job registry; one entry per submitted experiment.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use hemocomm_api::{ExperimentSummary, JobInfo, JobState};
use hemocomm_core::experiment::ProgressCounter;

pub struct Job {
    pub id: u64,
    pub kind: String,
    pub state: JobState,
    pub progress: ProgressCounter,
    pub steps_total: u64,
    pub dir: PathBuf,
    pub summary: Option<ExperimentSummary>,
    pub error: Option<String>,
}

impl Job {
    pub fn info(&self) -> JobInfo {
        JobInfo {
            id: self.id,
            kind: self.kind.clone(),
            state: self.state,
            steps_done: self.progress.load(Ordering::Relaxed).min(self.steps_total),
            steps_total: self.steps_total,
            error: self.error.clone(),
            summary: self.summary.clone(),
        }
    }
}

#[derive(Default)]
pub struct JobRegistry {
    next_id: AtomicU64,
    jobs: Mutex<HashMap<u64, Job>>,
}

impl JobRegistry {
    /// Allocates a job id and its output directory under `output_root`.
    pub fn create(&self, kind: String, steps_total: u64, output_root: &std::path::Path) -> (u64, ProgressCounter, PathBuf) {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        let dir = output_root.join(format!("job{id:04}"));
        let progress: ProgressCounter = Arc::new(AtomicU64::new(0));
        let job = Job {
            id,
            kind,
            state: JobState::Queued,
            progress: progress.clone(),
            steps_total,
            dir: dir.clone(),
            summary: None,
            error: None,
        };
        self.jobs.lock().unwrap().insert(id, job);
        (id, progress, dir)
    }

    pub fn set_running(&self, id: u64) {
        if let Some(job) = self.jobs.lock().unwrap().get_mut(&id) {
            job.state = JobState::Running;
        }
    }

    pub fn finish(&self, id: u64, result: Result<ExperimentSummary, String>) {
        if let Some(job) = self.jobs.lock().unwrap().get_mut(&id) {
            match result {
                Ok(summary) => {
                    job.state = JobState::Completed;
                    job.progress.store(job.steps_total, Ordering::Relaxed);
                    job.summary = Some(summary);
                }
                Err(error) => {
                    job.state = JobState::Failed;
                    job.error = Some(error);
                }
            }
        }
    }

    pub fn info(&self, id: u64) -> Option<JobInfo> {
        self.jobs.lock().unwrap().get(&id).map(Job::info)
    }

    pub fn list(&self) -> Vec<JobInfo> {
        let mut infos: Vec<JobInfo> = self.jobs.lock().unwrap().values().map(Job::info).collect();
        infos.sort_by_key(|j| j.id);
        infos
    }

    pub fn dir(&self, id: u64) -> Option<PathBuf> {
        self.jobs.lock().unwrap().get(&id).map(|j| j.dir.clone())
    }

    pub fn files(&self, id: u64) -> Option<Vec<String>> {
        let jobs = self.jobs.lock().unwrap();
        let job = jobs.get(&id)?;
        Some(job.summary.as_ref().map(|s| s.files.clone()).unwrap_or_default())
    }
}
