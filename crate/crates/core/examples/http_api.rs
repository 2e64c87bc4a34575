//! Drive the HTTP API in-process, without opening a socket.

use axum::body::Body;
use axum::http::Request;
use tower::ServiceExt;

use traceforge::fixtures;
use traceforge::project::Store;
use traceforge::service::router;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<String>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = axum::body::to_bytes(res.into_body(), usize::MAX).await.unwrap();
    println!("{method} {uri} -> {status}\n{}", String::from_utf8_lossy(&bytes));
}

#[tokio::main]
async fn main() {
    let home = tempfile::tempdir().unwrap();
    let app = router(Store::new(home.path()));
    let base = "/api/v1/projects/demo";
    call(&app, "POST", "/api/v1/projects", Some(r#"{"name":"demo"}"#.into())).await;
    let ingest = serde_json::json!({ "format": "csv", "content": fixtures::REQUIREMENTS_CSV });
    call(&app, "POST", &format!("{base}/ingest"), Some(ingest.to_string())).await;
    call(&app, "GET", &format!("{base}/coverage?dal=A"), None).await;
    call(&app, "POST", &format!("{base}/impact"), Some(r#"{"seeds":["HLR-1"]}"#.into())).await;
    call(&app, "GET", &format!("{base}/nodes/NOPE-1"), None).await;
}
