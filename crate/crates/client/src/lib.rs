//! Thin async client for the experiment service.

use std::path::{Path, PathBuf};
use std::time::Duration;

use hemocomm_api::{
    DecodeRequest, DecodeResponse, ErrorBody, ExperimentSpec, FileList, HealthResponse, JobInfo,
    JobState, SubmitResponse, ValidateRequest, ValidateResponse,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("service error ({status}): {message}")]
    Api { status: u16, message: String },
    #[error("job {id} failed: {message}")]
    JobFailed { id: u64, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ClientError>;

pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> Self {
        let mut base = base_url.into();
        while base.ends_with('/') {
            base.pop();
        }
        Client { base, http: reqwest::Client::new() }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}{}", self.base, hemocomm_api::API_BASE, path)
    }

    async fn check(response: reqwest::Response) -> Result<reqwest::Response> {
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        let message = match response.json::<ErrorBody>().await {
            Ok(body) => body.error,
            Err(_) => status.canonical_reason().unwrap_or("request failed").to_string(),
        };
        Err(ClientError::Api { status: status.as_u16(), message })
    }

    pub async fn health(&self) -> Result<HealthResponse> {
        let r = self.http.get(self.url("/health")).send().await?;
        Ok(Self::check(r).await?.json().await?)
    }

    /// Submits an experiment, returning its job id.
    pub async fn submit(&self, spec: &ExperimentSpec) -> Result<u64> {
        let r = self.http.post(self.url("/experiments")).json(spec).send().await?;
        let body: SubmitResponse = Self::check(r).await?.json().await?;
        Ok(body.job_id)
    }

    pub async fn job(&self, id: u64) -> Result<JobInfo> {
        let r = self.http.get(self.url(&format!("/jobs/{id}"))).send().await?;
        Ok(Self::check(r).await?.json().await?)
    }

    pub async fn jobs(&self) -> Result<Vec<JobInfo>> {
        let r = self.http.get(self.url("/jobs")).send().await?;
        Ok(Self::check(r).await?.json().await?)
    }

    /// Polls until the job completes; `on_progress` sees (done, total).
    pub async fn wait(
        &self,
        id: u64,
        poll: Duration,
        mut on_progress: impl FnMut(u64, u64),
    ) -> Result<JobInfo> {
        loop {
            let info = self.job(id).await?;
            on_progress(info.steps_done, info.steps_total);
            match info.state {
                JobState::Completed => return Ok(info),
                JobState::Failed => {
                    return Err(ClientError::JobFailed {
                        id,
                        message: info.error.unwrap_or_else(|| "unknown error".into()),
                    });
                }
                JobState::Queued | JobState::Running => tokio::time::sleep(poll).await,
            }
        }
    }

    pub async fn files(&self, id: u64) -> Result<Vec<String>> {
        let r = self.http.get(self.url(&format!("/jobs/{id}/files"))).send().await?;
        let body: FileList = Self::check(r).await?.json().await?;
        Ok(body.files)
    }

    pub async fn download(&self, id: u64, name: &str) -> Result<Vec<u8>> {
        let r = self.http.get(self.url(&format!("/jobs/{id}/files/{name}"))).send().await?;
        Ok(Self::check(r).await?.bytes().await?.to_vec())
    }

    /// Downloads every output of a finished job into `dest`, preserving the
    /// replicate subdirectory layout.
    pub async fn fetch_outputs(&self, id: u64, dest: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for name in self.files(id).await? {
            let bytes = self.download(id, &name).await?;
            let path = dest.join(&name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| ClientError::Io { path: parent.to_path_buf(), source: e })?;
            }
            std::fs::write(&path, bytes)
                .map_err(|e| ClientError::Io { path: path.clone(), source: e })?;
            written.push(path);
        }
        Ok(written)
    }

    pub async fn decode(&self, request: &DecodeRequest) -> Result<DecodeResponse> {
        let r = self.http.post(self.url("/chain/decode")).json(request).send().await?;
        Ok(Self::check(r).await?.json().await?)
    }

    pub async fn validate_config(&self, config_toml: &str) -> Result<ValidateResponse> {
        let r = self
            .http
            .post(self.url("/config/validate"))
            .json(&ValidateRequest { config: config_toml.to_string() })
            .send()
            .await?;
        Ok(Self::check(r).await?.json().await?)
    }
}
