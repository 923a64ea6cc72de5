//! Thin typed client for the ocsearch HTTP service.

use ocsearch_api::{
    ErrorBody, HealthResponse, JobState, OracleRequest, OracleResponse, ReportRequest,
    ReportResponse, RunAccepted, RunRequest, RunStatus,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server returned {status}: {message}")]
    Api { status: u16, message: String },
}

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
        Self {
            base,
            http: reqwest::Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn check(resp: reqwest::Response) -> Result<reqwest::Response, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let body = resp.text().await.unwrap_or_default();
        let message = match serde_json::from_str::<ErrorBody>(&body) {
            Ok(parsed) => parsed.error,
            Err(_) if body.is_empty() => status.to_string(),
            Err(_) => body,
        };
        Err(ClientError::Api {
            status: status.as_u16(),
            message,
        })
    }

    async fn get_json<T: serde::de::DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let resp = self.http.get(self.url(path)).send().await?;
        Ok(Self::check(resp).await?.json().await?)
    }

    async fn get_text(&self, path: &str) -> Result<String, ClientError> {
        let resp = self.http.get(self.url(path)).send().await?;
        Ok(Self::check(resp).await?.text().await?)
    }

    async fn post_json<B: serde::Serialize, T: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<T, ClientError> {
        let resp = self.http.post(self.url(path)).json(body).send().await?;
        Ok(Self::check(resp).await?.json().await?)
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        self.get_json("/health").await
    }

    pub async fn submit_run(&self, req: &RunRequest) -> Result<RunAccepted, ClientError> {
        self.post_json("/runs", req).await
    }

    pub async fn run_status(&self, id: u64) -> Result<RunStatus, ClientError> {
        self.get_json(&format!("/runs/{id}")).await
    }

    /// One long-poll round trip; the server answers early once the run
    /// leaves the running state.
    pub async fn wait_run(&self, id: u64, timeout_secs: f64) -> Result<RunStatus, ClientError> {
        self.get_json(&format!("/runs/{id}/wait?timeout_secs={timeout_secs}"))
            .await
    }

    /// Long-polls until the run completes or fails, however long it takes.
    pub async fn wait_until_done(&self, id: u64) -> Result<RunStatus, ClientError> {
        loop {
            let status = self.wait_run(id, 30.0).await?;
            if status.state != JobState::Running {
                return Ok(status);
            }
        }
    }

    pub async fn run_log(&self, id: u64) -> Result<String, ClientError> {
        self.get_text(&format!("/runs/{id}/log.csv")).await
    }

    pub async fn run_summary(&self, id: u64) -> Result<String, ClientError> {
        self.get_text(&format!("/runs/{id}/summary.txt")).await
    }

    pub async fn oracle(&self, req: &OracleRequest) -> Result<OracleResponse, ClientError> {
        self.post_json("/oracle", req).await
    }

    pub async fn report(&self, req: &ReportRequest) -> Result<ReportResponse, ClientError> {
        self.post_json("/report", req).await
    }
}
