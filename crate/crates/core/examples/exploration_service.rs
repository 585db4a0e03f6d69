//! Driving the exploration service in-process.
//!
//! `gridreduce serve` exposes the same router on a local port.

use axum::body::Body;
use axum::http::{Request, StatusCode};
use gridreduce::io::{generate_synthetic, SyntheticSpec, TreeSpec};
use gridreduce::service::{router, GraphDocument, Session};
use gridreduce::topo::topological_reduction;
use gridreduce::{Stage, Thresholds};
use http_body_util::BodyExt;
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: &str) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json").body(Body::from(body.to_owned())).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8_lossy(&bytes).into_owned())
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = SyntheticSpec::ring(6);
    spec.trees.push(TreeSpec { attach: 0, depth: 2, branching: 2 });
    let net = generate_synthetic(&spec)?;
    let reduced = topological_reduction(&net, &[Stage::D1, Stage::D2], Thresholds::default(), 0)?;
    let app = router(Session::new(reduced.network, reduced.ledger));

    let (_, body) = call(&app, "GET", "/api/network", "").await;
    let doc: GraphDocument = serde_json::from_str(&body)?;
    for node in doc.nodes.iter().filter(|n| n.cluster_size > 1) {
        println!("{} stands for {} buses via {:?}", node.id, node.cluster_size, node.expandable_fields);
    }

    let (status, body) = call(&app, "POST", "/api/expand", r#"{"target":"t_r0:t0n4"}"#).await;
    println!("expand -> {status}\n{body}");
    let (status, _) = call(&app, "POST", "/api/expand", r#"{"target":"t_r9"}"#).await;
    println!("unknown field -> {status}");
    let (status, _) = call(&app, "POST", "/api/undo", "").await;
    println!("undo -> {status}");
    let (status, _) = call(&app, "POST", "/api/undo", "").await;
    println!("undo again -> {status}");
    Ok(())
}
