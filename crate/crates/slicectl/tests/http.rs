use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use slicectl::server::{router, AppState};
use slicenet::api::Scenario;
use slicenet::emulator::{run_scenario, EmulatorConfig};
use slicenet::fixtures;
use tower::ServiceExt;

struct Server {
    state: Arc<AppState>,
    app: Router,
}

impl Server {
    /// Paused clock: time moves only with commands and `advance`.
    fn new() -> Server {
        let state = AppState::new(fixtures::demo_topology(), 42);
        Server { app: router(state.clone()), state }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
        let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, v)
    }

    async fn get(&self, uri: &str) -> Value {
        let (s, v) = self.call(Method::GET, uri, None).await;
        assert_eq!(s, StatusCode::OK);
        v
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    async fn create(&self, name: &str, mobility: bool) -> Value {
        let (s, v) = self.post("/slices", template(name, mobility)).await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v
    }

    async fn join(&self, slice: &str, body: Value) {
        let (s, v) = self.post(&format!("/slices/{slice}/participants"), body).await;
        assert_eq!(s, StatusCode::OK, "{v}");
    }
}

fn template(name: &str, mobility: bool) -> Value {
    json!({
        "slice_name": name,
        "sites": [
            {"site_id": "a", "poa_node_id": "poa1", "expected_participants": 2},
            {"site_id": "b", "poa_node_id": "poa2", "expected_participants": 1}
        ],
        "per_stream_kbps": 1000,
        "latency_bound_ms": 20,
        "mobility_enabled": mobility
    })
}

#[tokio::test]
async fn fresh_server_has_no_slices() {
    let s = Server::new();
    let v = s.get("/views").await;
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["slices"], json!([]));
    assert_eq!(v["t_ms"], 0.0);
    assert_eq!(s.get("/metrics").await["ledger"]["reservations"], 0);
}

#[tokio::test]
async fn create_slice_and_its_rejections() {
    let s = Server::new();
    let v = s.create("blue", false).await;
    assert_eq!(v["slice_id"], 1);

    let (st, v) = s.post("/slices", template("blue", false)).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::CONFLICT, Some("duplicate_slice")));

    let mut t = template("tight", false);
    t["latency_bound_ms"] = json!(1);
    let (st, v) = s.post("/slices", t).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["code"], "embedding_error");
    assert_eq!(v["detail"]["reason"], "latency");

    let mut t = template("nosites", false);
    t.as_object_mut().unwrap().remove("sites");
    let (st, v) = s.post("/slices", t).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "template_error");
    assert_eq!(v["detail"]["path"], "sites");

    let mut t = template("bad", false);
    t["sites"][1]["expected_participants"] = json!("many");
    let (_, v) = s.post("/slices", t).await;
    assert_eq!(v["detail"]["path"], "sites[1].expected_participants");

    // rejections leave nothing behind
    assert_eq!(s.get("/views").await["slices"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let s = Server::new();
    let req = Request::post("/slices").body(Body::from("{not json")).unwrap();
    let resp = s.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);

    s.create("blue", false).await;
    let (st, v) = s.post("/slices/blue/mobility", json!({"enabled": "yes"})).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "bad_request");
    assert!(v["message"].as_str().unwrap().contains("enabled"), "{v}");

    let (st, _) = s.post("/slices/blue/participants", json!({"participant": "a", "poa": "poa1", "extra": 1})).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn delete_slice_restores_the_ledger() {
    let s = Server::new();
    let (st, v) = s.call(Method::DELETE, "/slices/9", None).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_slice")));

    let empty = s.get("/metrics").await["ledger"].clone();
    s.create("blue", false).await;
    s.create("red", false).await;
    assert_ne!(s.get("/metrics").await["ledger"], empty);
    let (st, _) = s.call(Method::DELETE, "/slices/1", None).await;
    assert_eq!(st, StatusCode::OK);
    let (st, _) = s.call(Method::DELETE, "/slices/red", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(s.get("/metrics").await["ledger"], empty);
    let (st, _) = s.call(Method::DELETE, "/slices/red", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn mobility_toggle_shows_in_the_next_view() {
    let s = Server::new();
    let (st, _) = s.post("/slices/blue/mobility", json!({"enabled": true})).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    s.create("blue", false).await;
    assert_eq!(s.get("/views").await["slices"][0]["mobility_enabled"], false);
    let (st, _) = s.post("/slices/blue/mobility", json!({"enabled": true})).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(s.get("/views").await["slices"][0]["mobility_enabled"], true);
}

#[tokio::test]
async fn handoff_with_mobility_off_is_a_conflict() {
    let s = Server::new();
    s.create("blue", false).await;
    s.join("blue", json!({"participant": "alice", "poa": "poa1", "roles": ["producer"]})).await;
    let (st, v) = s.post("/participants/alice/handoff", json!({"to_poa": "poa2"})).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["code"], "mobility_disabled");
    assert_eq!(v["detail"]["handoff_id"], 1);

    s.create("red", true).await;
    s.join("red", json!({"participant": "bob", "poa": "poa1", "roles": ["producer"]})).await;
    let (st, v) = s.post("/participants/bob/handoff", json!({"to_poa": "poa2", "gap_ms": 20})).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["to"], "poa2");
    let (st, v) = s.post("/participants/bob/handoff", json!({"to_poa": "poa1"})).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::CONFLICT, Some("handoff_in_progress")));
}

#[tokio::test]
async fn participant_routes_need_an_unambiguous_slice() {
    let s = Server::new();
    let (st, _) = s.post("/participants/ghost/move", json!({"to_poa": "poa2"})).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    s.create("blue", true).await;
    s.create("red", true).await;
    for slice in ["blue", "red"] {
        s.join(slice, json!({"participant": "carol", "poa": "poa1", "roles": ["consumer"]})).await;
    }
    let (st, v) = s.post("/participants/carol/move", json!({"to_poa": "poa2"})).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("ambiguous_participant")));
    let (st, v) = s.post("/participants/carol/move", json!({"slice": "red", "to_poa": "poa2"})).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["moved"], true);

    let views = s.get("/views").await;
    let poa = |k: usize| views["slices"][k]["participants"][0]["poa"].clone();
    assert_eq!((poa(0), poa(1)), (json!("poa1"), json!("poa2")));

    let (st, _) = s.call(Method::DELETE, "/slices/blue/participants/carol", None).await;
    assert_eq!(st, StatusCode::OK);
    let (st, _) = s.call(Method::DELETE, "/slices/blue/participants/carol", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    // only one slice left for carol, so no slice is needed
    let (st, _) = s.post("/participants/carol/move", json!({"to_poa": "poa1"})).await;
    assert_eq!(st, StatusCode::OK);
}

#[tokio::test]
async fn create_join_publish_counters_obey_conservation() {
    let s = Server::new();
    s.create("blue", true).await;
    s.join("blue", json!({"participant": "alice", "poa": "poa1", "iface": "WiFi"})).await;
    s.join("blue", json!({"participant": "bob", "poa": "poa2", "roles": ["consumer"]})).await;
    s.state.advance(100.0);
    for _ in 0..3 {
        let (st, _) = s.call(Method::POST, "/participants/alice/publish", None).await;
        assert_eq!(st, StatusCode::OK);
    }
    let (st, _) = s.post("/participants/alice/stream", json!({"count": 5, "interval_ms": 20})).await;
    assert_eq!(st, StatusCode::OK);
    s.state.advance(3000.0);

    let v = s.get("/views").await;
    assert_eq!(v["slices"].as_array().unwrap().len(), 1);
    let roster: Vec<&str> = v["slices"][0]["participants"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["participant_id"].as_str().unwrap())
        .collect();
    assert_eq!(roster, ["alice", "bob"]);
    let bob = &v["slices"][0]["participants"][1];
    assert_eq!(bob["delivered"], 8);

    let mut total_in = 0;
    for f in v["forwarders"].as_array().unwrap() {
        for t in f["slices"].as_array().unwrap() {
            assert_eq!(t["conserved"], true, "{}", f["node_id"]);
            let c = &t["counters"];
            total_in += c["interests_in"].as_u64().unwrap();
        }
    }
    assert!(total_in > 0);
    assert_eq!(v["metrics"]["slices"][0]["published"], 8);
    assert_eq!(v["metrics"]["slices"][0]["delivered"], 8);
}

#[tokio::test]
async fn scenario_endpoint_matches_a_headless_run() {
    let s = Server::new();
    let mut doc: Value = serde_json::from_str(fixtures::DEMO_SCENARIO).unwrap();
    doc["seed"] = json!(42);
    let (st, a) = s.post("/scenario", doc.clone()).await;
    assert_eq!(st, StatusCode::OK);
    let (_, b) = s.post("/scenario", doc).await;
    assert_eq!(a, b);

    let script = Scenario::parse(fixtures::DEMO_SCENARIO).unwrap();
    let direct = run_scenario(fixtures::demo_topology(), &script, EmulatorConfig::with_seed(42));
    assert_eq!(a["log"], serde_json::to_value(&direct.log).unwrap());
    assert_eq!(a["metrics"]["slices"][0]["delivered"], 122);
    // the live emulation is untouched
    assert_eq!(s.get("/views").await["slices"], json!([]));

    let (_, empty) = s.post("/scenario", json!({"commands": []})).await;
    assert_eq!(empty["log"], json!([]));
    assert_eq!(empty["metrics"]["t_ms"], 0.0);

    let bad = json!({"commands": [
        {"at_ms": 5, "command": "leave", "args": {"slice": "a", "participant": "b"}},
        {"at_ms": 1, "command": "leave", "args": {"slice": "a", "participant": "b"}}
    ]});
    let (st, v) = s.post("/scenario", bad).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "script_error");
    assert_eq!(v["detail"]["line"], 2);
}

#[tokio::test]
async fn events_stream_pushes_log_records() {
    let s = Server::new();
    let req = Request::get("/events").body(Body::empty()).unwrap();
    let resp = s.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();

    s.create("blue", true).await;
    let frame = tokio::time::timeout(std::time::Duration::from_secs(5), body.frame()).await.unwrap().unwrap().unwrap();
    let text = String::from_utf8(frame.into_data().unwrap().to_vec()).unwrap();
    let line = text.strip_prefix("data: ").unwrap().trim_end();
    let rec: Value = serde_json::from_str(line).unwrap();
    assert_eq!(rec["kind"], "slice_created");
    assert_eq!(rec["slice"], "blue");
}

#[tokio::test]
async fn live_ticker_advances_the_clock() {
    let state = AppState::new(fixtures::demo_topology(), 42);
    assert!(slicectl::server::spawn_ticker(state.clone(), 0.0).is_none());
    let ticker = slicectl::server::spawn_ticker(state.clone(), 10.0).unwrap();
    tokio::time::sleep(std::time::Duration::from_millis(200)).await;
    ticker.abort();
    let app = router(state);
    let resp = app.oneshot(Request::get("/views").body(Body::empty()).unwrap()).await.unwrap();
    let v: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    // 200 ms of wall time at 10x, with generous slack for a loaded machine
    assert!(v["t_ms"].as_f64().unwrap() >= 500.0, "{}", v["t_ms"]);
}
