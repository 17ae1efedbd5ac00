//! In-process HTTP client over the service router.

#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use sparktune_service::http::router;
use sparktune_service::TuningService;
use tower::ServiceExt;

pub struct Client {
    router: Router,
    rt: tokio::runtime::Runtime,
}

impl Client {
    pub fn new(service: TuningService) -> Self {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(1).enable_all().build().unwrap();
        Client { router: router(Arc::new(service)), rt }
    }

    /// Status and raw response bytes.
    pub fn raw(&self, method: Method, path: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder()
            .method(method)
            .uri(path)
            .header("content-type", "application/json")
            .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
            .unwrap();
        self.rt.block_on(async {
            let resp = self.router.clone().oneshot(req).await.unwrap();
            let status = resp.status();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
            (status, bytes)
        })
    }

    pub fn call(&self, method: Method, path: &str, body: Option<&Value>) -> (StatusCode, Value) {
        let text = body.map(|b| b.to_string());
        let (status, bytes) = self.raw(method, path, text.as_deref());
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    pub fn get(&self, path: &str) -> (StatusCode, Value) {
        self.call(Method::GET, path, None)
    }

    pub fn post(&self, path: &str, body: &Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, Some(body))
    }
}
