use serde::de::DeserializeOwned;
use serde::Serialize;

use tvws_core::registry::{TvDetectionEvent, WsdSensingReport};
use tvws_core::resolver::{PullTask, QueryRequest, QueryResponse};

use crate::error::{AppError, Result};
use crate::wire::{AdminLoad, Digest, ErrorBody, LoadAck, SpectrumAck, TvAck};

/// Minimal HTTP client for the service endpoints.
#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `addr` may be `host:port` or a full `http://` URL.
    pub fn new(addr: &str) -> Self {
        let base = if addr.starts_with("http://") || addr.starts_with("https://") {
            addr.trim_end_matches('/').to_string()
        } else {
            format!("http://{}", addr.trim_end_matches('/'))
        };
        Client {
            base,
            http: reqwest::Client::new(),
        }
    }

    async fn finish<T: DeserializeOwned>(&self, resp: reqwest::Response) -> Result<T> {
        let status = resp.status().as_u16();
        let bytes = resp
            .bytes()
            .await
            .map_err(|e| AppError::Transport(e.to_string()))?;
        if status == 200 {
            serde_json::from_slice(&bytes).map_err(|e| AppError::Transport(format!("bad reply: {e}")))
        } else {
            let body = serde_json::from_slice(&bytes).unwrap_or_else(|_| {
                ErrorBody::new("unknown", String::from_utf8_lossy(&bytes).into_owned(), None)
            });
            Err(AppError::Remote { status, body })
        }
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let resp = self
            .http
            .post(format!("{}{}", self.base, path))
            .json(body)
            .send()
            .await
            .map_err(|e| AppError::Transport(e.to_string()))?;
        self.finish(resp).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let resp = self
            .http
            .get(format!("{}{}", self.base, path))
            .send()
            .await
            .map_err(|e| AppError::Transport(e.to_string()))?;
        self.finish(resp).await
    }

    pub async fn query(&self, req: &QueryRequest) -> Result<QueryResponse> {
        self.post("/v1/query", req).await
    }

    pub async fn spectrum_report(&self, report: &WsdSensingReport) -> Result<SpectrumAck> {
        self.post("/v1/reports/spectrum", report).await
    }

    pub async fn tv_event(&self, event: &TvDetectionEvent) -> Result<TvAck> {
        self.post("/v1/reports/tv", event).await
    }

    pub async fn pull_tasks(&self, contributor: Option<&str>) -> Result<Vec<PullTask>> {
        match contributor {
            Some(c) => {
                self.post("/v1/pull-tasks", &serde_json::json!({ "contributor_id": c }))
                    .await
            }
            None => self.get("/v1/pull-tasks").await,
        }
    }

    pub async fn admin_load(&self, load: &AdminLoad) -> Result<LoadAck> {
        self.post("/v1/admin/load", load).await
    }

    pub async fn digest(&self) -> Result<Digest> {
        self.get("/v1/admin/digest").await
    }
}
